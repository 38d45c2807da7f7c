//! Full-batch gradient descent on the magnitudes `alpha` with the neuron
//! directions held fixed.
//!
//! The step size is frozen at entry to `1 / (72 max(L_entry, 2n))`. With this
//! step every update multiplies each `alpha_j` by a factor in `[1/2, 3/2]`,
//! so signs never change, and the loss drops by at least
//! `|grad|^2 / (144 max(L_entry, 2n))` per step. Both facts are checked on
//! every step and any violation is reported as an invariant error.

use std::io::Write;

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{CoeffVector, Loss, Objective};
use crate::network::{MaskSeries, NetParams};

/// Relative slack on loss comparisons for floating-point rounding.
pub const LOSS_SLACK: f64 = 1e-12;

/// `1 / (72 max(L0, 2n))`.
pub fn step_size(l0: f64, n: usize) -> f64 {
    1.0 / (72.0 * l0.max(2.0 * n as f64))
}

/// Stopping tolerance and iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GdSettings {
    pub tol: f64,
    pub max_iters: usize,
}

impl GdSettings {
    /// Tolerance `lam0 / (16 K sqrt(n))` and the cap implied by the rate
    /// bound, `ceil(144 L max(L, 2n) / tol^2) + 1`.
    pub fn from_budget(lam0: f64, budget: usize, n: usize, l_entry: f64) -> Self {
        let tol = lam0 / (16.0 * budget as f64 * (n as f64).sqrt());
        Self { tol, max_iters: iteration_cap(l_entry, n, tol) }
    }

    pub fn with_tol(self, tol: f64, l_entry: f64, n: usize) -> Self {
        Self { tol, max_iters: iteration_cap(l_entry, n, tol) }
    }
}

fn iteration_cap(l_entry: f64, n: usize, tol: f64) -> usize {
    let bound = 144.0 * l_entry * l_entry.max(2.0 * n as f64) / (tol * tol);
    if bound.is_finite() && bound < usize::MAX as f64 / 2.0 {
        bound.ceil() as usize + 1
    } else {
        usize::MAX / 2
    }
}

/// One accepted descent step.
#[derive(Debug, Clone, Copy)]
pub struct GdStep<'s> {
    pub iteration: usize,
    pub alpha_prev: &'s [f64],
    pub alpha_next: &'s [f64],
    pub loss_prev: f64,
    pub loss_next: f64,
    pub grad_norm_prev: f64,
    pub step_size: f64,
}

/// Per-step record of an inner descent.
#[derive(Debug, Clone, Serialize)]
pub struct GdTrace {
    pub iterations: usize,
    pub step_size: f64,
    /// `L(t)` for `t = 0..=iterations`.
    pub losses: Vec<f64>,
    /// `|grad L(t)|` for `t = 0..=iterations`.
    pub grad_norms: Vec<f64>,
    /// `alpha_j(0) >= 0`, one flag per neuron.
    pub initial_signs: Vec<bool>,
    pub settings: GdSettings,
}

impl GdTrace {
    pub fn final_grad_norm(&self) -> f64 {
        *self.grad_norms.last().expect("trace always holds the entry point")
    }

    pub fn entry_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trace always holds the entry point")
    }

    /// `min_{t < T} |grad_t|^2` against `144 L max(L, 2n) / T`; `None` when
    /// no step was taken.
    pub fn rate_check(&self, n: usize) -> Option<(f64, f64)> {
        let t = self.iterations;
        if t == 0 {
            return None;
        }
        let l = self.entry_loss();
        let min_sq = self.grad_norms[..t].iter().map(|g| g * g).fold(f64::INFINITY, f64::min);
        Some((min_sq, 144.0 * l * l.max(2.0 * n as f64) / t as f64))
    }

    /// Writes `outer_k,iteration,loss,grad_norm` rows (no header).
    pub fn write_rows<W: Write>(&self, outer_k: usize, out: &mut W) -> std::io::Result<()> {
        for (t, (l, g)) in self.losses.iter().zip(&self.grad_norms).enumerate() {
            writeln!(out, "{outer_k},{t},{l},{g}")?;
        }
        Ok(())
    }
}

/// Runs descent from `params` until `|grad| <= settings.tol`. Directions are
/// untouched; only `alpha` changes. `on_step` sees every accepted step.
pub fn run_inner_gd(
    params: &NetParams,
    lam: &CoeffVector,
    data: &Dataset,
    masks: &MaskSeries,
    loss: &dyn Loss,
    settings: GdSettings,
    on_step: &mut dyn FnMut(&GdStep<'_>),
) -> Result<(NetParams, GdTrace)> {
    if lam.m() != params.m() {
        return Err(Error::Shape(format!("{} coefficients for {} neurons", lam.m(), params.m())));
    }
    let n = data.n();
    let obj = Objective::new(params, masks, data, loss)?;
    let mut alpha = params.alpha().to_vec();
    let mut ev = obj.evaluate(&alpha, &lam.lam);
    let l_entry = ev.value;
    let eta = step_size(l_entry, n);
    let decrease_scale = 1.0 / (144.0 * l_entry.max(2.0 * n as f64));
    let mut trace = GdTrace {
        iterations: 0,
        step_size: eta,
        losses: vec![ev.value],
        grad_norms: vec![ev.grad_norm],
        initial_signs: alpha.iter().map(|&a| a >= 0.0).collect(),
        settings,
    };

    while ev.grad_norm > settings.tol {
        if trace.iterations >= settings.max_iters {
            return Err(Error::NonConvergence {
                cap: settings.max_iters,
                grad_norm: ev.grad_norm,
                tol: settings.tol,
            });
        }
        let next: Vec<f64> = alpha.iter().zip(&ev.grad).map(|(a, g)| a - eta * g).collect();
        for (j, (&a, &b)) in alpha.iter().zip(&next).enumerate() {
            let preserved = if a == 0.0 { b == 0.0 } else { b != 0.0 && (a > 0.0) == (b > 0.0) };
            if !preserved {
                return Err(Error::Invariant(format!(
                    "step {} flipped the sign of alpha_{j}: {a} -> {b}",
                    trace.iterations
                )));
            }
            if (b - a).abs() > a.abs() / 2.0 {
                return Err(Error::Invariant(format!(
                    "step {} moved alpha_{j} by {} > |alpha|/2 = {}",
                    trace.iterations,
                    (b - a).abs(),
                    a.abs() / 2.0
                )));
            }
        }
        let next_ev = obj.evaluate(&next, &lam.lam);
        let required = ev.value - decrease_scale * ev.grad_norm * ev.grad_norm;
        if next_ev.value > required + LOSS_SLACK * (1.0 + ev.value.abs()) {
            return Err(Error::Invariant(format!(
                "step {}: loss {} -> {} misses the guaranteed decrease to {required}",
                trace.iterations, ev.value, next_ev.value
            )));
        }
        on_step(&GdStep {
            iteration: trace.iterations,
            alpha_prev: &alpha,
            alpha_next: &next,
            loss_prev: ev.value,
            loss_next: next_ev.value,
            grad_norm_prev: ev.grad_norm,
            step_size: eta,
        });
        alpha = next;
        ev = next_ev;
        trace.iterations += 1;
        trace.losses.push(ev.value);
        trace.grad_norms.push(ev.grad_norm);
    }

    if let Some((min_sq, bound)) = trace.rate_check(n) {
        if min_sq > bound * (1.0 + LOSS_SLACK) {
            return Err(Error::Invariant(format!(
                "rate bound violated: min |grad|^2 = {min_sq:e} > {bound:e} after {} steps",
                trace.iterations
            )));
        }
    }

    let mut out = params.clone();
    out.alpha_mut().copy_from_slice(&alpha);
    Ok((out, trace))
}
