//! The univariate classification loss, the regularized empirical loss and
//! its gradient with respect to the magnitudes `alpha`.
//!
//! With `z_ij = u_j . (x_i ⊙ phi_j)` fixed, the objective is
//!
//! ```text
//! L(alpha) = sum_i l(-y_i f_i) + sum_j lam_j alpha_j^2,
//! f_i      = sum_j alpha_j relu(alpha_j z_ij)
//! ```
//!
//! and its gradient factors as `2 (lam_j - c_j) alpha_j` with
//! `c_j = sum_i l'_i q_ij` and `q_ij = y_i sgn(alpha_j) relu(sgn(alpha_j) z_ij)`.
//! The factored form is what keeps every inner descent step sign preserving.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{forward_unchecked, relu, sign, MaskSeries, NetParams, Projections};
use crate::par::{self, norm};

/// A convex, non-decreasing, twice differentiable loss with 1-Lipschitz
/// value and derivative, and `l'(z) <= exp(a z)`.
pub trait Loss: Send + Sync {
    fn value(&self, z: f64) -> f64;
    fn deriv(&self, z: f64) -> f64;
    /// The constant `a` in `l'(z) <= exp(a z)`.
    fn exp_bound(&self) -> f64;
    fn deriv_at_zero(&self) -> f64 {
        self.deriv(0.0)
    }
    fn name(&self) -> &'static str;
}

/// `l(z) = ln(1 + e^z)`, with `l' = sigmoid`, `a = 1`, `l'(0) = 1/2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Logistic;

impl Loss for Logistic {
    #[inline]
    fn value(&self, z: f64) -> f64 {
        z.max(0.0) + (-z.abs()).exp().ln_1p()
    }

    #[inline]
    fn deriv(&self, z: f64) -> f64 {
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    }

    fn exp_bound(&self) -> f64 {
        1.0
    }

    fn name(&self) -> &'static str {
        "logistic"
    }
}

/// Regularizer coefficients. They start at `lam0` and only ever decrease,
/// staying inside `[lam0 / 2, lam0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffVector {
    pub lam: Vec<f64>,
    pub lam0: f64,
    /// Number of coefficient updates applied so far.
    pub updates: usize,
}

impl CoeffVector {
    pub fn uniform(m: usize, lam0: f64) -> Self {
        Self { lam: vec![lam0; m], lam0, updates: 0 }
    }

    pub fn m(&self) -> usize {
        self.lam.len()
    }

    pub fn min(&self) -> f64 {
        self.lam.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.lam.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether every coefficient lies in `[lam0 / 2, lam0]`, up to `slack`
    /// relative to `lam0`.
    pub fn in_range(&self, slack: f64) -> bool {
        let tol = slack * self.lam0;
        self.lam.iter().all(|&l| l >= self.lam0 / 2.0 - tol && l <= self.lam0 + tol)
    }
}

fn check_shapes(params: &NetParams, masks: &MaskSeries, data: &Dataset) -> Result<()> {
    if params.d() != masks.d() || data.d() != masks.d() {
        return Err(Error::Shape(format!(
            "params d = {}, masks d = {}, data d = {}",
            params.d(),
            masks.d(),
            data.d()
        )));
    }
    Ok(())
}

fn check_lam(params: &NetParams, lam: &CoeffVector) -> Result<()> {
    if lam.m() != params.m() {
        return Err(Error::Shape(format!("{} coefficients for {} neurons", lam.m(), params.m())));
    }
    Ok(())
}

/// `sum_i l(-y_i f(x_i)) + sum_j lam_j alpha_j^2`.
pub fn empirical_loss(
    params: &NetParams,
    lam: &CoeffVector,
    data: &Dataset,
    masks: &MaskSeries,
    loss: &dyn Loss,
) -> Result<f64> {
    check_shapes(params, masks, data)?;
    check_lam(params, lam)?;
    let terms = par::map_range(data.n(), |i| {
        loss.value(-data.y(i) * forward_unchecked(params, masks, data.point(i)))
    });
    Ok(total(&terms, params.alpha(), &lam.lam))
}

/// `beta_i = l'(-y_i f(x_i))`.
pub fn per_sample_derivs(
    params: &NetParams,
    data: &Dataset,
    masks: &MaskSeries,
    loss: &dyn Loss,
) -> Result<Vec<f64>> {
    check_shapes(params, masks, data)?;
    Ok(par::map_range(data.n(), |i| {
        loss.deriv(-data.y(i) * forward_unchecked(params, masks, data.point(i)))
    }))
}

/// Gradient with respect to `alpha`, evaluated in the direct form
/// `-2 sum_i beta_i y_i relu(alpha_j z_ij) + 2 lam_j alpha_j`.
pub fn grad_alpha(
    params: &NetParams,
    lam: &CoeffVector,
    data: &Dataset,
    masks: &MaskSeries,
    loss: &dyn Loss,
) -> Result<Vec<f64>> {
    check_lam(params, lam)?;
    let beta = per_sample_derivs(params, data, masks, loss)?;
    Ok(par::map_range(params.m(), |j| {
        let a = params.a(j);
        let k = masks.mask_of(j);
        let u = params.dir(j);
        let data_term: f64 = (0..data.n())
            .map(|i| beta[i] * data.y(i) * relu(a * masks.masked_dot(k, u, data.point(i))))
            .sum();
        -2.0 * data_term + 2.0 * lam.lam[j] * a
    }))
}

/// The objective restricted to `alpha` for fixed directions. Projections are
/// computed once, so each evaluation costs `O(n m)`.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    proj: Projections,
    labels: Vec<f64>,
    loss: &'a dyn Loss,
}

impl std::fmt::Debug for dyn Loss + '_ {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Value, gradient and per-sample derivatives at one `alpha`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    pub beta: Vec<f64>,
}

impl<'a> Objective<'a> {
    pub fn new(params: &NetParams, masks: &MaskSeries, data: &Dataset, loss: &'a dyn Loss) -> Result<Self> {
        check_shapes(params, masks, data)?;
        let proj = Projections::new(params, masks, data.points())?;
        let labels = (0..data.n()).map(|i| data.y(i)).collect();
        Ok(Self { proj, labels, loss })
    }

    pub fn n(&self) -> usize {
        self.proj.n()
    }

    pub fn m(&self) -> usize {
        self.proj.m()
    }

    pub fn projections(&self) -> &Projections {
        &self.proj
    }

    /// Per-sample derivatives `beta_i` and loss terms `l(-y_i f_i)`.
    fn sample_terms(&self, alpha: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let scores = self.proj.scores(alpha);
        let pairs = par::map_range(self.n(), |i| {
            let z = -self.labels[i] * scores[i];
            (self.loss.deriv(z), self.loss.value(z))
        });
        pairs.into_iter().unzip()
    }

    pub fn value(&self, alpha: &[f64], lam: &[f64]) -> f64 {
        let (_, terms) = self.sample_terms(alpha);
        total(&terms, alpha, lam)
    }

    pub fn betas(&self, alpha: &[f64]) -> Vec<f64> {
        self.sample_terms(alpha).0
    }

    /// `c_j = sum_i beta_i q_ij`.
    pub fn correlations(&self, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
        par::map_range(self.m(), |j| {
            let s = sign(alpha[j]);
            (0..self.n())
                .map(|i| beta[i] * self.labels[i] * s * relu(s * self.proj.get(i, j)))
                .sum()
        })
    }

    pub fn evaluate(&self, alpha: &[f64], lam: &[f64]) -> Evaluation {
        let (beta, terms) = self.sample_terms(alpha);
        let c = self.correlations(alpha, &beta);
        let grad: Vec<f64> = (0..self.m()).map(|j| 2.0 * (lam[j] - c[j]) * alpha[j]).collect();
        let grad_norm = norm(&grad);
        Evaluation { value: total(&terms, alpha, lam), grad, grad_norm, beta }
    }
}

/// Compensated sum of the data terms and `lam_j alpha_j^2`. Near a
/// stationary point the per-step decrease of inner descent falls to a few
/// ulps of the loss, below the error of a naive sum.
fn total(terms: &[f64], alpha: &[f64], lam: &[f64]) -> f64 {
    par::stable_sum(terms.iter().copied().chain(alpha.iter().zip(lam).map(|(a, l)| l * a * a)))
}

/// The local Lipschitz constant of the gradient around `alpha` for moves of
/// at most half of each magnitude: `12 sqrt(n^2 |alpha|^4 + n^2 + lam0^2)`.
pub fn local_lipschitz(alpha_norm: f64, n: usize, lam0: f64) -> f64 {
    let n = n as f64;
    12.0 * (n * n * alpha_norm.powi(4) + n * n + lam0 * lam0).sqrt()
}
