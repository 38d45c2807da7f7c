//! The max-ReLU-correlation objective
//! `G(u; s) = |sum_i beta_i y_i relu(u . (x_i ⊙ phi_s))|`, two ways of
//! maximizing it over unit `u`, the inactive-neuron replacement step and the
//! outer termination test.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{empirical_loss, per_sample_derivs, CoeffVector, Loss};
use crate::network::{relu, sign, MaskSeries, NetParams};
use crate::par::{self, argmax, dot, norm};
use crate::rng::unit_on_support;

/// Default cap on exhaustive grid evaluations.
pub const DEFAULT_GRID_CAP: f64 = 1e8;

/// Candidates evaluated per parallel batch.
const CHUNK: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exhaustive,
    Random,
    Oracle,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Exhaustive => "exhaustive",
            SolverKind::Random => "random",
            SolverKind::Oracle => "oracle",
        }
    }
}

/// A proposed direction for mask `mask`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionCandidate {
    pub mask: usize,
    /// Unit vector in `R^d`, zero off the mask window.
    pub v: Vec<f64>,
    /// `G(v)`.
    pub g: f64,
    /// `sum_i beta_i y_i relu(v . x~_i)`; `g = |signed|`.
    pub signed: f64,
    pub solver: SolverKind,
    /// Certified or configured gap between `g` and the true maximum.
    pub budget: f64,
    /// Objective at the unnormalized randomized candidate.
    pub raw_g: Option<f64>,
    /// Every aggregate direction in the randomized solver was zero.
    pub degenerate: bool,
}

/// `y_i beta_i` and the masked points restricted to the window of mask `s`.
#[derive(Debug, Clone)]
pub(crate) struct Weighted {
    pub r: usize,
    pub start: usize,
    /// Row-major `n x r`.
    pub xw: Vec<f64>,
    pub w: Vec<f64>,
}

impl Weighted {
    pub fn new(s: usize, beta: &[f64], data: &Dataset, masks: &MaskSeries) -> Result<Self> {
        if beta.len() != data.n() {
            return Err(Error::Shape(format!("{} weights for {} samples", beta.len(), data.n())));
        }
        if data.d() != masks.d() || s >= masks.period() {
            return Err(Error::Shape(format!("mask {s} invalid for d = {}", data.d())));
        }
        if let Some(b) = beta.iter().find(|&&b| !(b >= 0.0)) {
            return Err(Error::Contract(format!("sample weight {b} is negative")));
        }
        let window = masks.window(s);
        let xw = (0..data.n()).flat_map(|i| data.point(i)[window.clone()].to_vec()).collect();
        let w = (0..data.n()).map(|i| data.y(i) * beta[i]).collect();
        Ok(Self { r: masks.r(), start: window.start, xw, w })
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.xw[i * self.r..(i + 1) * self.r]
    }

    /// `sum_i w_i relu(p . x~_i)` for `p` in window coordinates.
    #[inline]
    pub fn signed(&self, p: &[f64]) -> f64 {
        (0..self.n()).map(|i| self.w[i] * relu(dot(p, self.point(i)))).sum()
    }

    /// `sum_i |w_i| |x~_i|`, the Lipschitz constant of `G` in `u`.
    pub fn lipschitz(&self) -> f64 {
        (0..self.n()).map(|i| self.w[i].abs() * norm(self.point(i))).sum()
    }

    pub fn embed(&self, p: &[f64], d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[self.start..self.start + self.r].copy_from_slice(p);
        v
    }
}

/// `sum_i beta_i y_i relu(u . (x_i ⊙ phi_s))`.
pub fn signed_objective(u: &[f64], s: usize, beta: &[f64], data: &Dataset, masks: &MaskSeries) -> Result<f64> {
    if u.len() != data.d() {
        return Err(Error::Shape(format!("direction length {} != d = {}", u.len(), data.d())));
    }
    let wt = Weighted::new(s, beta, data, masks)?;
    Ok(wt.signed(&u[masks.window(s)]))
}

/// `G(u; s) = |sum_i beta_i y_i relu(u . (x_i ⊙ phi_s))|`.
pub fn g_objective(u: &[f64], s: usize, beta: &[f64], data: &Dataset, masks: &MaskSeries) -> Result<f64> {
    Ok(signed_objective(u, s, beta, data, masks)?.abs())
}

/// Grid resolution for the exhaustive solver: step `lam0 / (n sqrt r)` and
/// half-width `H = ceil(1 / step)`, so each axis has `2H + 1` values.
pub fn grid_shape(n: usize, r: usize, lam0: f64) -> (f64, u64) {
    let h = lam0 / (n.max(1) as f64 * (r as f64).sqrt());
    let half = (1.0 / h).ceil().max(1.0);
    (h, half as u64)
}

/// Number of grid points, `(2H + 1)^r`.
pub fn grid_size(n: usize, r: usize, lam0: f64) -> f64 {
    let (_, half) = grid_shape(n, r, lam0);
    (2.0 * half as f64 + 1.0).powi(r as i32)
}

/// Maximizes `G` over a symmetric grid on the mask window. Every nonzero
/// grid point is scaled onto the unit sphere before evaluation.
///
/// Any unit `u` has a grid point within `h sqrt(r) / 2`; after scaling, that
/// point is within `h sqrt(r)` of `u`, so the reported value is within
/// `C = Lip * h sqrt(r)` of the true maximum, where `Lip = sum beta_i |x~_i|`.
/// Since `beta_i <= 1` and `|x~_i| <= 1`, `C <= lam0`.
pub fn solve_exhaustive(
    s: usize,
    beta: &[f64],
    data: &Dataset,
    masks: &MaskSeries,
    lam0: f64,
    cap: f64,
) -> Result<DirectionCandidate> {
    let wt = Weighted::new(s, beta, data, masks)?;
    let r = masks.r();
    let size = grid_size(data.n(), r, lam0);
    if size > cap {
        return Err(Error::InfeasibleSolver { size, cap });
    }
    let (h, half) = grid_shape(data.n(), r, lam0);
    let side = 2 * half + 1;
    let total = size as u64;
    let point = |idx: u64, p: &mut [f64]| {
        let mut rest = idx;
        for c in p.iter_mut() {
            *c = ((rest % side) as f64 - half as f64) * h;
            rest /= side;
        }
    };
    let chunks = total.div_ceil(CHUNK as u64) as usize;
    let best = par::map_range(chunks, |c| {
        let lo = c as u64 * CHUNK as u64;
        let hi = (lo + CHUNK as u64).min(total);
        let mut p = vec![0.0; r];
        let mut best = (f64::NEG_INFINITY, lo);
        for idx in lo..hi {
            point(idx, &mut p);
            let nrm = norm(&p);
            if nrm == 0.0 {
                continue;
            }
            let val = wt.signed(&p).abs() / nrm;
            if val > best.0 {
                best = (val, idx);
            }
        }
        best
    });
    let vals: Vec<f64> = best.iter().map(|b| b.0).collect();
    let k = argmax(&vals).expect("grid is never empty");
    let mut p = vec![0.0; r];
    point(best[k].1, &mut p);
    let nrm = norm(&p);
    p.iter_mut().for_each(|x| *x /= nrm);
    let signed = wt.signed(&p);
    Ok(DirectionCandidate {
        mask: s,
        v: wt.embed(&p, data.d()),
        g: signed.abs(),
        signed,
        solver: SolverKind::Exhaustive,
        budget: wt.lipschitz() * h * (r as f64).sqrt(),
        raw_g: None,
        degenerate: false,
    })
}

/// Randomized directions: `2M` directions `omega_j` uniform on the mask
/// sphere, each nudged toward the aggregate of the samples it activates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomDirections {
    /// `M`; the solver draws `2M` candidates.
    pub half: u64,
    pub r_pert: f64,
    pub seed: u64,
}

/// One evaluated randomized candidate.
#[derive(Debug, Clone)]
pub struct RandomCandidate {
    pub index: u64,
    /// `omega_j + r a_j v_j`, in window coordinates.
    pub c: Vec<f64>,
    /// `|sum_i w_i relu(c . x~_i)|` before normalization.
    pub raw: f64,
    pub aggregate_zero: bool,
}

impl RandomDirections {
    pub fn new(half: u64, r_pert: f64, seed: u64) -> Result<Self> {
        if half == 0 {
            return Err(Error::Contract("randomized solver needs M >= 1".into()));
        }
        if !(r_pert > 0.0 && r_pert < 1.0) {
            return Err(Error::Contract(format!("perturbation radius {r_pert} must lie in (0, 1)")));
        }
        Ok(Self { half, r_pert, seed })
    }

    pub fn candidates(&self) -> u64 {
        2 * self.half
    }

    fn rng_for(&self, s: usize, j: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (s as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.set_stream(j);
        rng
    }

    /// The direction `omega_j` for mask `s`, in window coordinates.
    pub fn omega(&self, s: usize, r: usize, j: u64) -> Vec<f64> {
        unit_on_support(&mut self.rng_for(s, j), r, 0..r)
    }

    pub(crate) fn evaluate(&self, wt: &Weighted, s: usize, j: u64) -> RandomCandidate {
        let r = wt.r;
        let omega = self.omega(s, r, j);
        let mut agg = vec![0.0; r];
        for i in 0..wt.n() {
            let x = wt.point(i);
            if dot(&omega, x) >= 0.0 {
                agg.iter_mut().zip(x).for_each(|(a, xi)| *a += wt.w[i] * xi);
            }
        }
        let an = norm(&agg);
        let sgn = if j < self.half { 1.0 } else { -1.0 };
        let c: Vec<f64> = if an > 0.0 {
            omega.iter().zip(&agg).map(|(o, a)| o + self.r_pert * sgn * a / an).collect()
        } else {
            omega
        };
        let raw = wt.signed(&c).abs();
        RandomCandidate { index: j, c, raw, aggregate_zero: an == 0.0 }
    }

    /// Evaluates all `2M` candidates and returns the best one, normalized.
    pub fn solve(
        &self,
        s: usize,
        beta: &[f64],
        data: &Dataset,
        masks: &MaskSeries,
        budget: f64,
    ) -> Result<DirectionCandidate> {
        let wt = Weighted::new(s, beta, data, masks)?;
        let total = self.candidates();
        let chunks = total.div_ceil(CHUNK as u64);
        let mut best: Option<RandomCandidate> = None;
        let mut all_zero = true;
        for chunk in 0..chunks {
            let lo = chunk * CHUNK as u64;
            let hi = (lo + CHUNK as u64).min(total);
            let evals = par::map_range((hi - lo) as usize, |k| self.evaluate(&wt, s, lo + k as u64));
            all_zero &= evals.iter().all(|e| e.aggregate_zero);
            let raws: Vec<f64> = evals.iter().map(|e| e.raw).collect();
            let k = argmax(&raws).expect("chunk is never empty");
            if best.as_ref().is_none_or(|b| raws[k] > b.raw) {
                best = evals.into_iter().nth(k);
            }
        }
        let best = best.expect("at least two candidates");
        if all_zero {
            let mut e1 = vec![0.0; wt.r];
            e1[0] = 1.0;
            return Ok(DirectionCandidate {
                mask: s,
                v: wt.embed(&e1, data.d()),
                g: 0.0,
                signed: 0.0,
                solver: SolverKind::Random,
                budget,
                raw_g: Some(0.0),
                degenerate: true,
            });
        }
        let cn = norm(&best.c);
        let p: Vec<f64> = best.c.iter().map(|x| x / cn).collect();
        let signed = wt.signed(&p);
        Ok(DirectionCandidate {
            mask: s,
            v: wt.embed(&p, data.d()),
            g: signed.abs(),
            signed,
            solver: SolverKind::Random,
            budget,
            raw_g: Some(best.raw),
            degenerate: false,
        })
    }

    /// The lowest-index candidate whose raw value reaches `threshold`, if
    /// any. `max_j raw_j >= threshold` holds exactly when this is `Some`,
    /// but the scan stops at the first hit, so very large `M` stays cheap
    /// whenever hits are common.
    pub fn first_exceeding(
        &self,
        s: usize,
        beta: &[f64],
        data: &Dataset,
        masks: &MaskSeries,
        threshold: f64,
    ) -> Result<Option<RandomCandidate>> {
        let wt = Weighted::new(s, beta, data, masks)?;
        let total = self.candidates();
        let workers = rayon_width();
        let mut lo = 0u64;
        let mut batch = workers as u64;
        while lo < total {
            let hi = (lo + batch).min(total);
            let evals = par::map_range((hi - lo) as usize, |k| self.evaluate(&wt, s, lo + k as u64));
            if let Some(hit) = evals.into_iter().find(|e| e.raw >= threshold) {
                return Ok(Some(hit));
            }
            lo = hi;
            batch = (batch * 2).min(CHUNK as u64 * workers as u64);
        }
        Ok(None)
    }
}

fn rayon_width() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Every candidate satisfies `g <= 5 lam0`.
pub fn check_termination(cands: &[DirectionCandidate], lam0: f64) -> bool {
    cands.iter().all(|c| c.g <= 5.0 * lam0)
}

/// Result of replacing one inactive neuron.
#[derive(Debug, Clone, Serialize)]
pub struct Perturbation {
    pub unit: usize,
    pub mask: usize,
    pub alpha_new: f64,
    /// `G` at the candidate with the derivatives of the current network.
    pub g: f64,
    pub loss_before: f64,
    pub loss_after: f64,
    #[serde(skip)]
    pub params: NetParams,
}

impl Perturbation {
    pub fn drop(&self) -> f64 {
        self.loss_before - self.loss_after
    }
}

/// Replaces the first neuron on `cand.mask` with `|alpha_j| <= 1/(2 sqrt n)`
/// by `alpha_j = sgn(S) / sqrt(lam0)`, `u_j = sgn(alpha_j) v*`, where `S` is
/// the signed objective at `v*`. The loss must drop by at least
/// `g / lam0 - 4`, which is at least one because `g > 5 lam0`.
pub fn perturb_inactive(
    params: &NetParams,
    lam: &CoeffVector,
    cand: &DirectionCandidate,
    data: &Dataset,
    masks: &MaskSeries,
    loss: &dyn Loss,
) -> Result<Perturbation> {
    let lam0 = lam.lam0;
    let n = data.n();
    if !(cand.g > 5.0 * lam0) {
        return Err(Error::Contract(format!("perturbation needs g > 5 lam0, got g = {} <= {}", cand.g, 5.0 * lam0)));
    }
    let threshold = 1.0 / (2.0 * (n as f64).sqrt());
    let unit = masks
        .units_on(cand.mask, params.m())
        .into_iter()
        .find(|&j| params.a(j).abs() <= threshold)
        .ok_or(Error::StaleGd { mask: cand.mask, threshold })?;
    let beta = per_sample_derivs(params, data, masks, loss)?;
    let signed = signed_objective(&cand.v, cand.mask, &beta, data, masks)?;
    let alpha_new = sign(signed) / lam0.sqrt();
    let u: Vec<f64> = cand.v.iter().map(|v| sign(alpha_new) * v).collect();
    let mut next = params.clone();
    next.set_unit(unit, alpha_new, &u)?;

    let loss_before = empirical_loss(params, lam, data, masks, loss)?;
    let loss_after = empirical_loss(&next, lam, data, masks, loss)?;
    let g = signed.abs();
    let drop = loss_before - loss_after;
    let slack = 1e-9 * (1.0 + loss_before.abs());
    if drop < g / lam0 - 4.0 - slack || drop < 1.0 - 1e-9 {
        return Err(Error::Invariant(format!(
            "perturbing neuron {unit} dropped the loss by {drop}, expected at least max(g/lam0 - 4, 1) with g = {g}"
        )));
    }
    Ok(Perturbation { unit, mask: cand.mask, alpha_new, g, loss_before, loss_after, params: next })
}

/// Writes `outer_k,mask,solver,g,budget` rows (no header).
pub fn write_candidates<W: Write>(outer_k: usize, cands: &[DirectionCandidate], out: &mut W) -> std::io::Result<()> {
    for c in cands {
        writeln!(out, "{outer_k},{},{},{},{}", c.mask, c.solver.as_str(), c.g, c.budget)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;
    use crate::loss::Logistic;
    use crate::rng::{in_unit_ball, stream_rng};
    use rand::Rng;

    fn data(d: usize, x: Vec<f64>, y: Vec<i8>) -> Dataset {
        Dataset::new(d, x, y, Provenance::default()).unwrap()
    }

    fn random_data(seed: u64, n: usize, d: usize) -> (Dataset, Vec<f64>) {
        let mut rng = stream_rng(seed, 21);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            x.extend(in_unit_ball(&mut rng, d));
            y.push(if rng.random::<bool>() { 1 } else { -1 });
        }
        let beta = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        (data(d, x, y), beta)
    }

    #[test]
    fn objective_single_point() {
        let masks = MaskSeries::fully_connected(2).unwrap();
        let ds = data(2, vec![1.0, 0.0], vec![1]);
        assert_eq!(g_objective(&[1.0, 0.0], 0, &[1.0], &ds, &masks).unwrap(), 1.0);
        assert_eq!(g_objective(&[-1.0, 0.0], 0, &[1.0], &ds, &masks).unwrap(), 0.0);
    }

    #[test]
    fn objective_matches_resummation() {
        let (ds, beta) = random_data(1, 9, 5);
        let masks = MaskSeries::new(5, 3).unwrap();
        let u = [0.3, -0.2, 0.5, 0.1, -0.7];
        for s in 0..3 {
            let mut sum = 0.0;
            for i in 0..ds.n() {
                let pre: f64 = (s..s + 3).map(|c| u[c] * ds.point(i)[c]).sum();
                sum += beta[i] * ds.y(i) * pre.max(0.0);
            }
            let got = g_objective(&u, s, &beta, &ds, &masks).unwrap();
            assert!((got - sum.abs()).abs() < 1e-14);
        }
    }

    #[test]
    fn objective_is_homogeneous() {
        let (ds, beta) = random_data(2, 7, 3);
        let masks = MaskSeries::fully_connected(3).unwrap();
        let u = [0.6, 0.0, 0.8];
        let base = g_objective(&u, 0, &beta, &ds, &masks).unwrap();
        for c in [0.0, 0.5, 2.0] {
            let cu: Vec<f64> = u.iter().map(|x| c * x).collect();
            assert!((g_objective(&cu, 0, &beta, &ds, &masks).unwrap() - c * base).abs() < 1e-14);
        }
    }

    #[test]
    fn exhaustive_one_dimensional_boundary() {
        let masks = MaskSeries::fully_connected(1).unwrap();
        let ds = data(1, vec![0.5], vec![1]);
        let c = solve_exhaustive(0, &[1.0], &ds, &masks, 1.0, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(c.v, vec![1.0]);
        assert_eq!(c.g, 0.5);
        assert_eq!(c.solver, SolverKind::Exhaustive);
    }

    #[test]
    fn exhaustive_zero_weights() {
        let (ds, _) = random_data(3, 4, 3);
        let masks = MaskSeries::fully_connected(3).unwrap();
        let c = solve_exhaustive(0, &[0.0; 4], &ds, &masks, 2.0, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(c.g, 0.0);
        assert!((norm(&c.v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_respects_mask_support() {
        let (ds, beta) = random_data(4, 6, 5);
        let masks = MaskSeries::new(5, 2).unwrap();
        let c = solve_exhaustive(2, &beta, &ds, &masks, 1.0, DEFAULT_GRID_CAP).unwrap();
        assert!(c.v.iter().enumerate().all(|(k, &v)| (2..4).contains(&k) || v == 0.0));
        assert!(c.budget <= 1.0 + 1e-12);
    }

    #[test]
    fn oversized_grid_is_infeasible() {
        let (ds, beta) = random_data(5, 50, 10);
        let masks = MaskSeries::fully_connected(10).unwrap();
        assert!(matches!(
            solve_exhaustive(0, &beta, &ds, &masks, 1.0, DEFAULT_GRID_CAP),
            Err(Error::InfeasibleSolver { .. })
        ));
    }

    #[test]
    fn random_solver_is_reproducible() {
        let (ds, beta) = random_data(6, 12, 4);
        let masks = MaskSeries::fully_connected(4).unwrap();
        let solver = RandomDirections::new(1, 0.1, 9).unwrap();
        let a = solver.solve(0, &beta, &ds, &masks, 1.0).unwrap();
        let b = solver.solve(0, &beta, &ds, &masks, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(a.v.iter().zip(&b.v).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn random_solver_zero_weights_is_degenerate() {
        let (ds, _) = random_data(7, 5, 3);
        let masks = MaskSeries::fully_connected(3).unwrap();
        let solver = RandomDirections::new(4, 0.2, 1).unwrap();
        let c = solver.solve(0, &[0.0; 5], &ds, &masks, 1.0).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.g, 0.0);
        assert_eq!(c.v, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn random_candidate_follows_construction() {
        let (ds, beta) = random_data(8, 10, 3);
        let masks = MaskSeries::fully_connected(3).unwrap();
        let solver = RandomDirections::new(3, 0.25, 4).unwrap();
        let wt = Weighted::new(0, &beta, &ds, &masks).unwrap();
        for j in 0..6 {
            let e = solver.evaluate(&wt, 0, j);
            let omega = solver.omega(0, 3, j);
            let mut agg = [0.0; 3];
            for i in 0..ds.n() {
                let x = ds.point(i);
                if omega.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() >= 0.0 {
                    for c in 0..3 {
                        agg[c] += ds.y(i) * beta[i] * x[c];
                    }
                }
            }
            let an = norm(&agg);
            let a = if j < 3 { 1.0 } else { -1.0 };
            for c in 0..3 {
                assert!((e.c[c] - (omega[c] + 0.25 * a * agg[c] / an)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn solve_returns_the_largest_raw_candidate() {
        let (ds, beta) = random_data(9, 15, 3);
        let masks = MaskSeries::fully_connected(3).unwrap();
        let solver = RandomDirections::new(20, 0.1, 2).unwrap();
        let wt = Weighted::new(0, &beta, &ds, &masks).unwrap();
        let best = (0..40).map(|j| solver.evaluate(&wt, 0, j).raw).fold(0.0, f64::max);
        let c = solver.solve(0, &beta, &ds, &masks, 1.0).unwrap();
        assert_eq!(c.raw_g, Some(best));
        let hit = solver.first_exceeding(0, &beta, &ds, &masks, best).unwrap().unwrap();
        assert_eq!(hit.raw, best);
        assert!(solver.first_exceeding(0, &beta, &ds, &masks, best * (1.0 + 1e-9)).unwrap().is_none());
    }

    #[test]
    fn termination_threshold_is_inclusive() {
        let cand = |g: f64| DirectionCandidate {
            mask: 0,
            v: vec![1.0],
            g,
            signed: g,
            solver: SolverKind::Exhaustive,
            budget: 0.0,
            raw_g: None,
            degenerate: false,
        };
        assert!(check_termination(&[cand(0.0), cand(0.0)], 2.0));
        assert!(check_termination(&[cand(10.0)], 2.0));
        assert!(!check_termination(&[cand(0.0), cand(10.0 + 1e-12)], 2.0));
    }

    /// Two point masses, three quarters labelled `+1` at `e1` and the rest
    /// `-1` at `e3`, with every neuron along `e2`. The network is silent and
    /// `G(e1) = 3n/8 > 5 sqrt(n)` once `n > 178`.
    fn silent_instance(n: usize) -> (NetParams, CoeffVector, Dataset, MaskSeries) {
        let d = 3;
        let masks = MaskSeries::fully_connected(d).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            if i % 4 != 3 {
                x.extend([1.0, 0.0, 0.0]);
                y.push(1);
            } else {
                x.extend([0.0, 0.0, 1.0]);
                y.push(-1);
            }
        }
        let ds = data(d, x, y);
        let m = n + 1;
        let alpha = vec![0.01; m];
        let dirs = (0..m).flat_map(|_| [0.0, 1.0, 0.0]).collect();
        let lam0 = (n as f64).sqrt();
        (NetParams::new(d, alpha, dirs).unwrap(), CoeffVector::uniform(m, lam0), ds, masks)
    }

    #[test]
    fn perturbation_drops_the_loss_by_at_least_one() {
        let (params, lam, ds, masks) = silent_instance(400);
        let beta = per_sample_derivs(&params, &ds, &masks, &Logistic).unwrap();
        let cand = solve_exhaustive(0, &beta, &ds, &masks, lam.lam0, DEFAULT_GRID_CAP).unwrap();
        assert!(cand.g > 5.0 * lam.lam0, "g = {}", cand.g);
        let p = perturb_inactive(&params, &lam, &cand, &ds, &masks, &Logistic).unwrap();
        assert_eq!(p.unit, 0);
        assert_eq!(p.alpha_new.abs(), 1.0 / lam.lam0.sqrt());
        assert!((norm(p.params.dir(0)) - 1.0).abs() < 1e-15);
        assert!(p.drop() >= 1.0 - 1e-9);
        assert!(p.drop() >= p.g / lam.lam0 - 4.0 - 1e-9);
        for j in 1..params.m() {
            assert_eq!(p.params.a(j), params.a(j));
            assert_eq!(p.params.dir(j), params.dir(j));
        }
    }

    #[test]
    fn no_inactive_neuron_is_stale() {
        let (mut params, lam, ds, masks) = silent_instance(400);
        params.alpha_mut().iter_mut().for_each(|a| *a = 1.0);
        let beta = per_sample_derivs(&params, &ds, &masks, &Logistic).unwrap();
        let cand = solve_exhaustive(0, &beta, &ds, &masks, lam.lam0, DEFAULT_GRID_CAP).unwrap();
        assert!(matches!(
            perturb_inactive(&params, &lam, &cand, &ds, &masks, &Logistic),
            Err(Error::StaleGd { .. })
        ));
    }

    #[test]
    fn small_g_is_refused() {
        let (params, lam, ds, masks) = silent_instance(10);
        let beta = per_sample_derivs(&params, &ds, &masks, &Logistic).unwrap();
        let cand = solve_exhaustive(0, &beta, &ds, &masks, lam.lam0, DEFAULT_GRID_CAP).unwrap();
        assert!(matches!(
            perturb_inactive(&params, &lam, &cand, &ds, &masks, &Logistic),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn candidate_rows() {
        let (ds, beta) = random_data(10, 4, 1);
        let masks = MaskSeries::fully_connected(1).unwrap();
        let c = solve_exhaustive(0, &beta, &ds, &masks, 1.0, DEFAULT_GRID_CAP).unwrap();
        let mut buf = Vec::new();
        write_candidates(2, &[c.clone()], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("2,0,exhaustive,{},{}\n", c.g, c.budget));
    }
}
