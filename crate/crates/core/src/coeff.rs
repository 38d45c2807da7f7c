//! Regularizer coefficient updates.
//!
//! For each mask `s` the activation-pattern vectors `q_i[s]` (one per sample,
//! one entry per neuron on the mask) span at most an `n`-dimensional subspace
//! of `R^Q` with `Q >= n + 1`. The update picks a unit vector `v` orthogonal
//! to that span and, when `lam[s]` is too close to the span, nudges
//! `lam[s]` along the positive or negative part of `v`. Afterwards
//! `dist(lam[s], span q[s]) >= lam0 / (8K)` on every mask, which is what
//! forces a small neuron to exist on each mask once inner descent stalls.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::CoeffVector;
use crate::network::{relu, sign, MaskSeries, NetParams};
use crate::par::{self, dot, norm};

/// Singular values below this fraction of the largest are treated as zero
/// in the span-distance projection.
const RANK_TOL: f64 = 1e-12;

/// Activation-pattern vectors of one mask, as an `n x Q` matrix.
#[derive(Debug, Clone)]
pub struct QBlock {
    pub mask: usize,
    /// Neuron indices of the columns.
    pub units: Vec<usize>,
    /// Row-major `n x Q`.
    pub rows: Vec<f64>,
    pub n: usize,
}

impl QBlock {
    pub fn width(&self) -> usize {
        self.units.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let q = self.width();
        &self.rows[i * q..(i + 1) * q]
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.width(), &self.rows)
    }
}

/// `q_ij = y_i sgn(alpha_j) relu(sgn(alpha_j) u_j . (x_i ⊙ phi_s))`, one block
/// per mask.
pub fn build_q_blocks(params: &NetParams, data: &Dataset, masks: &MaskSeries) -> Result<Vec<QBlock>> {
    if params.d() != masks.d() || data.d() != masks.d() {
        return Err(Error::Shape("params, data and masks disagree on d".into()));
    }
    let n = data.n();
    let m = params.m();
    let mut units_per_mask = Vec::with_capacity(masks.period());
    for s in 0..masks.period() {
        let units = masks.units_on(s, m);
        if units.len() < n + 1 {
            return Err(Error::Capacity { mask: s, have: units.len(), need: n + 1 });
        }
        units_per_mask.push(units);
    }
    Ok(par::map_slice(&units_per_mask, |units| {
        let s = masks.mask_of(units[0]);
        let mut rows = Vec::with_capacity(n * units.len());
        for i in 0..n {
            let x = data.point(i);
            for &j in units {
                let sg = sign(params.a(j));
                rows.push(data.y(i) * sg * relu(sg * masks.masked_dot(s, params.dir(j), x)));
            }
        }
        QBlock { mask: s, units: units.clone(), rows, n }
    }))
}

/// A unit vector orthogonal to every row of the block, together with the
/// largest residual `|v . q_i| / max(1, |q_i|)` actually achieved.
#[derive(Debug, Clone)]
pub struct NullDirection {
    pub v: Vec<f64>,
    pub residual: f64,
}

/// The right singular vector of the smallest singular value, with the first
/// largest-magnitude coordinate made positive. An all-zero block returns
/// `e_1`.
pub fn find_orthogonal_unit(block: &QBlock) -> Result<NullDirection> {
    let q = block.width();
    if q <= block.n {
        return Err(Error::Capacity { mask: block.mask, have: q, need: block.n + 1 });
    }
    if block.rows.iter().all(|&v| v == 0.0) {
        let mut v = vec![0.0; q];
        v[0] = 1.0;
        return Ok(NullDirection { v, residual: 0.0 });
    }
    // Pad to a square matrix so the SVD exposes the full right basis.
    let mut a = DMatrix::<f64>::zeros(q, q);
    a.view_mut((0, 0), (block.n, q)).copy_from(&block.matrix());
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors were requested");
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &s)| if s < svd.singular_values[best] { i } else { best });
    let mut v: Vec<f64> = v_t.row(k).iter().copied().collect();
    let nrm = norm(&v);
    v.iter_mut().for_each(|x| *x /= nrm);
    let lead = v
        .iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x.abs() > v[best].abs() { i } else { best });
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let residual = (0..block.n)
        .map(|i| dot(&v, block.row(i)).abs() / norm(block.row(i)).max(1.0))
        .fold(0.0, f64::max);
    if residual > 1e-8 {
        log::warn!("null direction on mask {} has residual {residual:e}", block.mask);
    }
    Ok(NullDirection { v, residual })
}

/// `min_p |lam - sum_i p_i q_i|`, by projecting onto the row space.
pub fn span_distance(block: &QBlock, lam: &[f64]) -> f64 {
    let q = block.width();
    debug_assert_eq!(lam.len(), q);
    if block.n == 0 {
        return norm(lam);
    }
    // Columns of q_mat span the same space as the rows of the block.
    let q_mat = block.matrix().transpose();
    let svd = q_mat.svd(true, false);
    let u = svd.u.expect("left singular vectors were requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut resid = lam.to_vec();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > RANK_TOL * smax.max(f64::MIN_POSITIVE) {
            let col = u.column(k);
            let c: f64 = col.iter().zip(lam).map(|(a, b)| a * b).sum();
            resid.iter_mut().zip(col.iter()).for_each(|(r, a)| *r -= c * a);
        }
    }
    norm(&resid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UpdateCase {
    /// `lam[s]` already far enough from the span; unchanged.
    Unchanged,
    /// Subtracted the positive part of `v`.
    DecreasePositive,
    /// Added the negative part of `v`.
    DecreaseNegative,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockUpdate {
    pub mask: usize,
    pub case: UpdateCase,
    pub v_dot_lam_old: f64,
    pub span_distance: f64,
    pub null_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoeffUpdate {
    pub blocks: Vec<BlockUpdate>,
    pub max_step: f64,
}

/// Applies one coefficient update in place. `budget` is the run's `K`.
///
/// Checks after the update that `lam` did not increase, moved by at most
/// `lam0 / (2K)` in any coordinate, stays at least `lam0 / (8K)` (up to a
/// `1e-9` relative slack) from every block's span, and lies in
/// `[lam0 / 2, lam0]`.
pub fn update_coefficients(lam: &mut CoeffVector, blocks: &[QBlock], budget: usize) -> Result<CoeffUpdate> {
    if budget == 0 {
        return Err(Error::Contract("coefficient budget K must be positive".into()));
    }
    if lam.updates >= budget {
        return Err(Error::BudgetExhausted(format!("{} updates already applied with K = {budget}", lam.updates)));
    }
    let lam0 = lam.lam0;
    let k = budget as f64;
    let near = lam0 / (8.0 * k);
    let step = lam0 / (2.0 * k);
    let old = lam.lam.clone();

    let nulls = par::map_slice(blocks, find_orthogonal_unit);
    let mut reports = Vec::with_capacity(blocks.len());
    for (block, null) in blocks.iter().zip(nulls) {
        let null = null?;
        let v = &null.v;
        let sub_old: Vec<f64> = block.units.iter().map(|&j| old[j]).collect();
        let v_dot = dot(v, &sub_old);
        let case = if v_dot.abs() >= near {
            UpdateCase::Unchanged
        } else {
            let pos_mass: f64 = v.iter().filter(|&&x| x > 0.0).map(|x| x * x).sum();
            if pos_mass >= 0.5 {
                for (&j, &vj) in block.units.iter().zip(v) {
                    if vj > 0.0 {
                        lam.lam[j] -= step * vj;
                    }
                }
                UpdateCase::DecreasePositive
            } else {
                for (&j, &vj) in block.units.iter().zip(v) {
                    if vj < 0.0 {
                        lam.lam[j] += step * vj;
                    }
                }
                UpdateCase::DecreaseNegative
            }
        };
        let sub_new: Vec<f64> = block.units.iter().map(|&j| lam.lam[j]).collect();
        let dist = span_distance(block, &sub_new);
        if dist < near * (1.0 - 1e-9) {
            return Err(Error::Invariant(format!(
                "mask {}: span distance {dist:e} below lam0/(8K) = {near:e}",
                block.mask
            )));
        }
        reports.push(BlockUpdate {
            mask: block.mask,
            case,
            v_dot_lam_old: v_dot,
            span_distance: dist,
            null_residual: null.residual,
        });
    }
    lam.updates += 1;

    let mut max_step = 0.0_f64;
    for (j, (&new, &prev)) in lam.lam.iter().zip(&old).enumerate() {
        if new > prev {
            return Err(Error::Invariant(format!("coefficient {j} increased from {prev} to {new}")));
        }
        max_step = max_step.max(prev - new);
        if new < lam0 / 2.0 * (1.0 - 1e-12) {
            return Err(Error::BudgetExhausted(format!(
                "coefficient {j} = {new} fell below lam0/2 after {} updates",
                lam.updates
            )));
        }
    }
    if max_step > step * (1.0 + 1e-12) {
        return Err(Error::Invariant(format!("coefficient step {max_step:e} exceeds lam0/(2K) = {step:e}")));
    }
    Ok(CoeffUpdate { blocks: reports, max_step })
}
