//! Periodic mask series and the masked two-layer ReLU network.
//!
//! A network with `m` hidden units computes
//! `f(x) = sum_j a_j * relu(w_j . (x ⊙ phi_j))`. We store every unit in the
//! balanced form `a_j = alpha_j`, `w_j = alpha_j * u_j` with `|u_j| = 1`, so
//! `|a_j| = |w_j|` holds by construction and never has to be re-imposed.
//!
//! Masks are sliding windows of width `r` over the `d` input coordinates.
//! Unit `j` (0-based) uses window `j mod (d - r + 1)`; the fully connected
//! network is the special case `r = d` with a single all-ones mask.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, dot, norm};

/// Tolerance on `|u_j| = 1`.
pub const UNIT_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// `sgn` with the convention `sgn(0) = +1`.
#[inline]
pub fn sign(z: f64) -> f64 {
    if z < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// The periodic series of binary window masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSeries {
    d: usize,
    r: usize,
    period: usize,
    masks: Vec<Vec<u8>>,
}

impl MaskSeries {
    /// Builds the series of windows of width `r` over `d` coordinates.
    pub fn new(d: usize, r: usize) -> Result<Self> {
        if r < 1 || r > d {
            return Err(Error::InvalidTopology { d, r });
        }
        let period = d - r + 1;
        let masks = (0..period)
            .map(|k| (0..d).map(|c| u8::from(c >= k && c < k + r)).collect())
            .collect();
        Ok(Self { d, r, period, masks })
    }

    /// Fully connected topology (`r = d`).
    pub fn fully_connected(d: usize) -> Result<Self> {
        Self::new(d, d)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Number of distinct masks, `d - r + 1`.
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn masks(&self) -> &[Vec<u8>] {
        &self.masks
    }

    pub fn mask(&self, k: usize) -> &[u8] {
        &self.masks[k]
    }

    /// Coordinates where mask `k` is one.
    pub fn window(&self, k: usize) -> Range<usize> {
        k..k + self.r
    }

    /// Mask index of unit `j`.
    pub fn mask_of(&self, j: usize) -> usize {
        j % self.period
    }

    /// Indices of the units among `0..m` that use mask `k`.
    pub fn units_on(&self, k: usize, m: usize) -> Vec<usize> {
        (k..m).step_by(self.period).collect()
    }

    /// `u . (x ⊙ phi_k)`.
    #[inline]
    pub fn masked_dot(&self, k: usize, u: &[f64], x: &[f64]) -> f64 {
        let w = self.window(k);
        dot(&u[w.clone()], &x[w])
    }

    /// `x ⊙ phi_k` as a new vector.
    pub fn apply(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let w = self.window(k);
        x.iter()
            .enumerate()
            .map(|(c, &v)| if w.contains(&c) { v } else { 0.0 })
            .collect()
    }
}

/// Network parameters in balanced form: signed magnitudes and unit directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    d: usize,
    alpha: Vec<f64>,
    /// Row-major `m x d`.
    dirs: Vec<f64>,
}

impl NetParams {
    pub fn new(d: usize, alpha: Vec<f64>, dirs: Vec<f64>) -> Result<Self> {
        if dirs.len() != alpha.len() * d {
            return Err(Error::Shape(format!(
                "{} magnitudes need {} direction entries, got {}",
                alpha.len(),
                alpha.len() * d,
                dirs.len()
            )));
        }
        let params = Self { d, alpha, dirs };
        for j in 0..params.m() {
            let nrm = norm(params.dir(j));
            if (nrm - 1.0).abs() > UNIT_TOL {
                return Err(Error::Contract(format!("direction {j} has norm {nrm}")));
            }
        }
        Ok(params)
    }

    pub fn m(&self) -> usize {
        self.alpha.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_mut(&mut self) -> &mut [f64] {
        &mut self.alpha
    }

    pub fn dir(&self, j: usize) -> &[f64] {
        &self.dirs[j * self.d..(j + 1) * self.d]
    }

    /// Replaces unit `j`. `u` is normalized; it must be nonzero.
    pub fn set_unit(&mut self, j: usize, alpha: f64, u: &[f64]) -> Result<()> {
        if u.len() != self.d {
            return Err(Error::Shape(format!("direction length {} != d = {}", u.len(), self.d)));
        }
        let nrm = norm(u);
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::Contract(format!("direction for unit {j} has norm {nrm}")));
        }
        self.alpha[j] = alpha;
        for (dst, &src) in self.dirs[j * self.d..(j + 1) * self.d].iter_mut().zip(u) {
            *dst = src / nrm;
        }
        Ok(())
    }

    /// Output weight `a_j`.
    pub fn a(&self, j: usize) -> f64 {
        self.alpha[j]
    }

    /// Input weight `w_j = alpha_j * u_j`.
    pub fn w(&self, j: usize) -> Vec<f64> {
        self.dir(j).iter().map(|u| self.alpha[j] * u).collect()
    }

    pub fn alpha_norm(&self) -> f64 {
        norm(&self.alpha)
    }

    fn check(&self, masks: &MaskSeries, x: &[f64]) -> Result<()> {
        if self.d != masks.d() || x.len() != self.d {
            return Err(Error::Shape(format!(
                "params d = {}, masks d = {}, point length {}",
                self.d,
                masks.d(),
                x.len()
            )));
        }
        Ok(())
    }
}

fn warn_outside_ball(x: &[f64]) {
    let nrm = norm(x);
    if nrm > 1.0 + 1e-12 {
        log::warn!("input point has norm {nrm} > 1");
    }
}

/// Network score at `x`: `sum_j alpha_j * relu(alpha_j * u_j . (x ⊙ phi_j))`.
pub fn forward(params: &NetParams, masks: &MaskSeries, x: &[f64]) -> Result<f64> {
    params.check(masks, x)?;
    warn_outside_ball(x);
    Ok(forward_unchecked(params, masks, x))
}

pub(crate) fn forward_unchecked(params: &NetParams, masks: &MaskSeries, x: &[f64]) -> f64 {
    (0..params.m())
        .map(|j| {
            let a = params.alpha[j];
            a * relu(a * masks.masked_dot(masks.mask_of(j), params.dir(j), x))
        })
        .sum()
}

/// Pre-activation projections `z_ij = u_j . (x_i ⊙ phi_j)` for a fixed set of
/// directions. Directions do not move during inner descent, so this is built
/// once per descent and the per-step work drops to `O(n m)`.
#[derive(Debug, Clone)]
pub struct Projections {
    n: usize,
    m: usize,
    /// Row-major `n x m`.
    z: Vec<f64>,
}

impl Projections {
    pub fn new(params: &NetParams, masks: &MaskSeries, points: &[f64]) -> Result<Self> {
        let d = params.d();
        if d != masks.d() || !points.len().is_multiple_of(d.max(1)) {
            return Err(Error::Shape(format!(
                "params d = {d}, masks d = {}, point buffer length {}",
                masks.d(),
                points.len()
            )));
        }
        let n = points.len().checked_div(d).unwrap_or(0);
        let m = params.m();
        let rows = par::map_range(n, |i| {
            let x = &points[i * d..(i + 1) * d];
            (0..m)
                .map(|j| masks.masked_dot(masks.mask_of(j), params.dir(j), x))
                .collect::<Vec<_>>()
        });
        Ok(Self { n, m, z: rows.concat() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.m..(i + 1) * self.m]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.z[i * self.m + j]
    }

    /// Scores `f(x_i)` for all samples given magnitudes `alpha`.
    pub fn scores(&self, alpha: &[f64]) -> Vec<f64> {
        debug_assert_eq!(alpha.len(), self.m);
        par::map_range(self.n, |i| {
            self.row(i)
                .iter()
                .zip(alpha)
                .map(|(&z, &a)| a * relu(a * z))
                .sum()
        })
    }
}

/// A member of the teacher class: `h(x) = sum_j c_j relu(v_j . (x ⊙ phi_j))`
/// with `sum |c_j| = 1` and unit `v_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Teacher {
    pub d: usize,
    pub r: usize,
    pub coeffs: Vec<f64>,
    /// Row-major `units x d`.
    pub dirs: Vec<f64>,
}

impl Teacher {
    pub fn units(&self) -> usize {
        self.coeffs.len()
    }

    pub fn dir(&self, j: usize) -> &[f64] {
        &self.dirs[j * self.d..(j + 1) * self.d]
    }

    /// Checks `sum |c_j| = 1` and unit directions.
    pub fn validate(&self) -> Result<()> {
        if self.dirs.len() != self.coeffs.len() * self.d {
            return Err(Error::Shape("teacher direction buffer has wrong length".into()));
        }
        let l1: f64 = self.coeffs.iter().map(|c| c.abs()).sum();
        if (l1 - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!("teacher coefficients sum to {l1} in l1, expected 1")));
        }
        for j in 0..self.units() {
            let nrm = norm(self.dir(j));
            if (nrm - 1.0).abs() > UNIT_TOL {
                return Err(Error::Contract(format!("teacher direction {j} has norm {nrm}")));
            }
        }
        Ok(())
    }
}

/// Teacher output at `x`; bounded by `|x|` on the unit ball.
pub fn teacher_eval(h: &Teacher, masks: &MaskSeries, x: &[f64]) -> Result<f64> {
    h.validate()?;
    if h.d != masks.d() || x.len() != h.d {
        return Err(Error::Shape(format!(
            "teacher d = {}, masks d = {}, point length {}",
            h.d,
            masks.d(),
            x.len()
        )));
    }
    warn_outside_ball(x);
    Ok(teacher_eval_unchecked(h, masks, x))
}

pub(crate) fn teacher_eval_unchecked(h: &Teacher, masks: &MaskSeries, x: &[f64]) -> f64 {
    (0..h.units())
        .map(|j| h.coeffs[j] * relu(masks.masked_dot(masks.mask_of(j), h.dir(j), x)))
        .sum()
}
