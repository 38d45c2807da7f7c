//! The outer training loop.
//!
//! Each outer iteration updates the regularizer coefficients, runs inner
//! descent on the magnitudes, asks a solver for the best direction on every
//! mask, and either stops (every candidate value is at most `5 lam0`) or
//! replaces an inactive neuron on the mask with the largest value. Each
//! replacement lowers the loss by at least one, so the loop runs at most
//! `K = max(ceil(L_0), 2n)` times; the driver treats anything else as a bug.

pub mod bounds;
pub mod config;
pub mod report;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coeff::{build_q_blocks, update_coefficients, CoeffUpdate, UpdateCase};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gd::{run_inner_gd, GdSettings, GdStep, GdTrace};
use crate::loss::{empirical_loss, per_sample_derivs, CoeffVector, Loss};
use crate::network::{forward_unchecked, MaskSeries, NetParams};
use crate::oracle::oracle_max_g;
use crate::par::{self, argmax, norm};
use crate::perturb::{
    check_termination, grid_size, perturb_inactive, solve_exhaustive, DirectionCandidate, Perturbation,
    RandomDirections,
};
use crate::rng::{self, stream};

use bounds::{
    surrogate_check, test_error_bound, training_error_bound, BoundReport, BoundValue, Certification,
    TestBoundInputs,
};
use config::{Resolved, SolverChoice, TrainConfig};
use report::{Certificates, ErrorRates, MaskCertificate, OpTally, OuterRecord, Seeds, TrainReport, REPORT_VERSION};

/// Oracle resolution used for the surrogate check when the mask window has
/// at most three coordinates.
pub const SURROGATE_ORACLE_RESOLUTION: usize = 1_000_000;

/// Hooks into a training run. Every method has an empty default.
#[allow(unused_variables)]
pub trait TrainObserver {
    fn on_coeff_update(
        &mut self,
        k: usize,
        params: &NetParams,
        before: &CoeffVector,
        after: &CoeffVector,
        update: &CoeffUpdate,
        budget: usize,
    ) {
    }
    fn on_gd_step(&mut self, k: usize, step: &GdStep<'_>) {}
    fn on_gd_exit(&mut self, k: usize, trace: &GdTrace, params: &NetParams, lam: &CoeffVector) {}
    fn on_candidates(&mut self, k: usize, cands: &[DirectionCandidate]) {}
    fn on_perturbation(&mut self, k: usize, p: &Perturbation) {}
}

/// An observer that ignores everything.
pub struct Silent;

impl TrainObserver for Silent {}

/// Network, coefficients and run parameters at `k = 0`.
#[derive(Debug, Clone)]
pub struct Init {
    pub params: NetParams,
    pub lam: CoeffVector,
    pub budget_k: usize,
    pub initial_loss: f64,
}

/// `max(ceil(L_0), 2n)`.
pub fn budget_k(initial_loss: f64, n: usize) -> usize {
    (initial_loss.ceil() as usize).max(2 * n)
}

/// `|alpha_j(0)| = min(1, sqrt(n / (4 m lam0)))`, signs alternating between
/// consecutive neurons on the same mask, directions uniform on each mask's
/// sphere. The magnitude keeps the initial regularizer at most `n / 4`.
pub fn init_params(cfg: &Resolved, masks: &MaskSeries) -> Result<NetParams> {
    let mag = (cfg.n as f64 / (4.0 * cfg.m as f64 * cfg.lam0)).sqrt().min(1.0);
    let mut rng = rng::stream_rng(cfg.seed, stream::INIT);
    let period = masks.period();
    let mut alpha = Vec::with_capacity(cfg.m);
    let mut dirs = Vec::with_capacity(cfg.m * cfg.d);
    for j in 0..cfg.m {
        alpha.push(if (j / period).is_multiple_of(2) { mag } else { -mag });
        dirs.extend(rng::unit_on_support(&mut rng, cfg.d, masks.window(masks.mask_of(j))));
    }
    NetParams::new(cfg.d, alpha, dirs)
}

/// Fraction of samples with `y_i sgn(f(x_i)) <= 0`, counting `f = 0` as an
/// error for either label.
pub fn training_error(params: &NetParams, data: &Dataset, masks: &MaskSeries) -> Result<f64> {
    if params.d() != data.d() || masks.d() != data.d() {
        return Err(Error::Shape("params, data and masks disagree on d".into()));
    }
    if data.n() == 0 {
        return Ok(0.0);
    }
    let wrong = par::map_range(data.n(), |i| {
        let f = forward_unchecked(params, masks, data.point(i));
        usize::from(!(data.y(i) * f > 0.0))
    });
    Ok(wrong.iter().sum::<usize>() as f64 / data.n() as f64)
}

/// Misclassification rate on a held-out sample.
pub fn test_error_estimate(params: &NetParams, heldout: &Dataset, masks: &MaskSeries) -> Result<f64> {
    training_error(params, heldout, masks)
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub params: NetParams,
    pub lam: CoeffVector,
    pub masks: MaskSeries,
    /// Inner-descent traces, one per outer iteration (retries appended).
    pub gd_traces: Vec<(usize, GdTrace)>,
    /// Candidates per outer iteration.
    pub candidates: Vec<(usize, Vec<DirectionCandidate>)>,
}

/// Params written next to a report; enough to rebuild the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub d: usize,
    pub r: usize,
    pub params: NetParams,
}

/// Trains from the configured initialization.
pub fn train(cfg: &TrainConfig, data: &Dataset, loss: &dyn Loss, observer: &mut dyn TrainObserver) -> Result<TrainOutcome> {
    let resolved = cfg.resolve(data.n(), data.d())?;
    let masks = MaskSeries::new(data.d(), resolved.r)?;
    let params = init_params(&resolved, &masks)?;
    run(resolved, masks, data, loss, params, observer)
}

/// Trains from explicit initial parameters; `m` is taken from `init`.
pub fn train_from(
    cfg: &TrainConfig,
    data: &Dataset,
    loss: &dyn Loss,
    init: NetParams,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    let mut cfg = cfg.clone();
    cfg.model.m = Some(init.m());
    let resolved = cfg.resolve(data.n(), data.d())?;
    let masks = MaskSeries::new(data.d(), resolved.r)?;
    if init.d() != data.d() {
        return Err(Error::Shape(format!("initial params have d = {}, data has d = {}", init.d(), data.d())));
    }
    run(resolved, masks, data, loss, init, observer)
}

fn solver_seed(seed: u64) -> u64 {
    use rand::Rng;
    rng::stream_rng(seed, stream::SOLVER).random()
}

struct Solvers {
    choice: SolverChoice,
    lam0: f64,
    c_budget: f64,
    grid_cap: f64,
    directions: u64,
    r_pert: f64,
    seed: u64,
}

impl Solvers {
    fn uses_grid(&self, n: usize, r: usize) -> bool {
        match self.choice {
            SolverChoice::Exhaustive => true,
            SolverChoice::Random => false,
            SolverChoice::Auto => grid_size(n, r, self.lam0) <= self.grid_cap,
        }
    }

    fn solve(&self, k: usize, beta: &[f64], data: &Dataset, masks: &MaskSeries, ops: &mut OpTally) -> Result<Vec<DirectionCandidate>> {
        let n = data.n();
        let r = masks.r();
        let mut out = Vec::with_capacity(masks.period());
        for s in 0..masks.period() {
            if self.uses_grid(n, r) {
                out.push(solve_exhaustive(s, beta, data, masks, self.lam0, self.grid_cap)?);
                ops.solver += grid_size(n, r, self.lam0) * (n * r) as f64;
            } else {
                let seed = self.seed ^ (k as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
                let solver = RandomDirections::new(self.directions, self.r_pert, seed)?;
                out.push(solver.solve(s, beta, data, masks, self.c_budget)?);
                ops.solver += (solver.candidates() * 3 * (n * r) as u64) as f64;
            }
        }
        Ok(out)
    }
}

fn coefficient_ops(update: &CoeffUpdate, n: usize, m: usize, period: usize) -> f64 {
    let q = (m / period.max(1)) as f64;
    update.blocks.len() as f64 * (q * q * q + n as f64 * q * q)
}

fn run(
    cfg: Resolved,
    masks: MaskSeries,
    data: &Dataset,
    loss: &dyn Loss,
    mut params: NetParams,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    let started = Instant::now();
    let n = data.n();
    let lam0 = cfg.lam0;
    let mut lam = CoeffVector::uniform(params.m(), lam0);
    let initial_loss = empirical_loss(&params, &lam, data, &masks, loss)?;
    let budget = budget_k(initial_loss, n);
    let solvers = Solvers {
        choice: cfg.solver,
        lam0,
        c_budget: cfg.c_budget,
        grid_cap: cfg.grid_cap,
        directions: cfg.directions,
        r_pert: cfg.r_pert,
        seed: solver_seed(cfg.seed),
    };
    log::info!("n = {n}, m = {}, lam0 = {lam0}, K = {budget}, L0 = {initial_loss}", params.m());

    let mut ops = OpTally::default();
    let mut records: Vec<OuterRecord> = Vec::new();
    let mut gd_traces = Vec::new();
    let mut all_candidates = Vec::new();
    let mut k = 0usize;
    let (final_cands, final_trace) = loop {
        if k > budget {
            return Err(Error::Invariant(format!("outer iteration {k} exceeds K = {budget}")));
        }
        let loss_start = empirical_loss(&params, &lam, data, &masks, loss)?;
        if let Some(prev) = records.last() {
            if loss_start > prev.loss_start - 1.0 + 1e-9 * (1.0 + prev.loss_start.abs()) {
                return Err(Error::Invariant(format!(
                    "outer iteration {k}: loss {loss_start} did not drop by one from {}",
                    prev.loss_start
                )));
            }
        }

        let blocks = build_q_blocks(&params, data, &masks)?;
        let before = lam.clone();
        let update = update_coefficients(&mut lam, &blocks, budget)?;
        ops.coefficient += coefficient_ops(&update, n, params.m(), masks.period());
        observer.on_coeff_update(k, &params, &before, &lam, &update, budget);
        if !lam.in_range(1e-12) {
            return Err(Error::Invariant(format!("coefficients left [lam0/2, lam0] at iteration {k}")));
        }
        let changed = update.blocks.iter().filter(|b| b.case != UpdateCase::Unchanged).count();

        let loss_pre = empirical_loss(&params, &lam, data, &masks, loss)?;
        let mut settings = GdSettings::from_budget(lam0, budget, n, loss_pre);
        let mut retries = 0usize;
        let (next, trace, cands, perturbation) = loop {
            let (next, trace) = run_inner_gd(&params, &lam, data, &masks, loss, settings, &mut |s| {
                observer.on_gd_step(k, s)
            })?;
            ops.descent += (trace.iterations * n * next.m()) as f64;
            observer.on_gd_exit(k, &trace, &next, &lam);
            check_small_neurons(&next, &masks, lam0, budget, trace.final_grad_norm(), n)?;

            let beta = per_sample_derivs(&next, data, &masks, loss)?;
            let cands = solvers.solve(k, &beta, data, &masks, &mut ops)?;
            observer.on_candidates(k, &cands);
            if check_termination(&cands, lam0) {
                break (next, trace, cands, None);
            }
            let g: Vec<f64> = cands.iter().map(|c| c.g).collect();
            let best = &cands[argmax(&g).expect("one candidate per mask")];
            match perturb_inactive(&next, &lam, best, data, &masks, loss) {
                Ok(p) => break (next, trace, cands, Some(p)),
                Err(Error::StaleGd { mask, threshold }) if retries < cfg.stale_retries => {
                    retries += 1;
                    log::warn!("no inactive neuron on mask {mask} (threshold {threshold}); halving the descent tolerance");
                    gd_traces.push((k, trace));
                    params = next;
                    let l = empirical_loss(&params, &lam, data, &masks, loss)?;
                    settings = settings.with_tol(settings.tol / 2.0, l, n);
                }
                Err(e) => return Err(e),
            }
        };

        let g_value = cands.iter().map(|c| c.g).fold(0.0, f64::max);
        let mut record = OuterRecord {
            outer_k: k,
            loss_start,
            loss_pre,
            loss_post: trace.final_loss(),
            inner_t: trace.iterations,
            grad_norm: trace.final_grad_norm(),
            g_value,
            perturbed_mask: None,
            perturbed_unit: None,
            loss_after_perturbation: None,
            stale_retries: retries,
            lam_min: lam.min(),
            lam_max: lam.max(),
            coeff_blocks_changed: changed,
        };
        all_candidates.push((k, cands.clone()));
        match perturbation {
            None => {
                params = next;
                records.push(record);
                break (cands, trace);
            }
            Some(p) => {
                observer.on_perturbation(k, &p);
                log::info!("k = {k}: perturbed neuron {} on mask {} (g = {}, drop = {})", p.unit, p.mask, p.g, p.drop());
                record.perturbed_mask = Some(p.mask);
                record.perturbed_unit = Some(p.unit);
                record.loss_after_perturbation = Some(p.loss_after);
                records.push(record);
                gd_traces.push((k, trace));
                params = p.params;
                k += 1;
            }
        }
    };
    gd_traces.push((k, final_trace.clone()));

    let final_loss = empirical_loss(&params, &lam, data, &masks, loss)?;
    let certificates = certify(&params, &masks, &cfg, budget, &final_trace, &final_cands)?;
    let training = training_error(&params, data, &masks)?;
    let bounds = bound_report(&params, &lam, data, &masks, loss, &cfg, budget, &final_cands)?;
    ops.total = ops.coefficient + ops.solver + ops.descent;
    ops.reference = bounds::complexity_reference(cfg.d, budget, params.m(), n, cfg.r, lam0);

    let report = TrainReport {
        version: REPORT_VERSION.to_string(),
        loss: loss.name().to_string(),
        seeds: Seeds { data: data.provenance.seed, init: cfg.seed, solver: solvers.seed },
        k0: k,
        budget_k: budget,
        initial_loss,
        final_loss,
        coefficient_updates: lam.updates,
        records,
        certificates,
        errors: ErrorRates { training, test: None },
        bounds,
        ops,
        wall_clock_secs: cfg.timing.then(|| started.elapsed().as_secs_f64()),
        config: cfg,
    };
    Ok(TrainOutcome { report, params, lam, masks, gd_traces, candidates: all_candidates })
}

/// `sum_s min_{j on s} alpha_j^2 <= (8K / lam0)^2 |grad|^2`, and at most
/// `1 / (4n)` when the gradient is below the descent tolerance.
fn small_neuron_sum(params: &NetParams, masks: &MaskSeries) -> f64 {
    (0..masks.period())
        .map(|s| {
            masks
                .units_on(s, params.m())
                .into_iter()
                .map(|j| params.a(j).powi(2))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

fn check_small_neurons(params: &NetParams, masks: &MaskSeries, lam0: f64, budget: usize, grad_norm: f64, n: usize) -> Result<()> {
    let sum = small_neuron_sum(params, masks);
    let bound = (8.0 * budget as f64 / lam0).powi(2) * grad_norm * grad_norm;
    let quarter = 1.0 / (4.0 * n.max(1) as f64);
    if sum > bound * (1.0 + 1e-9) || sum > quarter * (1.0 + 1e-9) {
        return Err(Error::Invariant(format!(
            "sum of smallest squared magnitudes {sum:e} exceeds min({bound:e}, 1/(4n) = {quarter:e})"
        )));
    }
    Ok(())
}

fn certify(
    params: &NetParams,
    masks: &MaskSeries,
    cfg: &Resolved,
    budget: usize,
    trace: &GdTrace,
    cands: &[DirectionCandidate],
) -> Result<Certificates> {
    let lam0 = cfg.lam0;
    let mask_certs: Vec<MaskCertificate> = cands
        .iter()
        .map(|c| MaskCertificate {
            mask: c.mask,
            g: c.g,
            budget: c.budget,
            certified_max: c.g + c.budget,
            limit: 5.0 * lam0 + c.budget,
        })
        .collect();
    if let Some(bad) = mask_certs.iter().find(|c| c.certified_max > c.limit) {
        return Err(Error::Invariant(format!("mask {} certified maximum {} exceeds {}", bad.mask, bad.certified_max, bad.limit)));
    }
    let grad_norm = trace.final_grad_norm();
    if grad_norm > trace.settings.tol {
        return Err(Error::Invariant(format!("final gradient {grad_norm:e} above tolerance {:e}", trace.settings.tol)));
    }
    let alpha_norm = params.alpha_norm();
    let alpha_bound = 2.0 * (budget as f64 / lam0).sqrt();
    if alpha_norm > alpha_bound {
        return Err(Error::Invariant(format!("|alpha| = {alpha_norm} exceeds 2 sqrt(K / lam0) = {alpha_bound}")));
    }
    let balance_defect = (0..params.m())
        .map(|j| (params.a(j).abs() - norm(&params.w(j))).abs())
        .fold(0.0, f64::max);
    Ok(Certificates {
        grad_norm,
        grad_tol: trace.settings.tol,
        masks: mask_certs,
        alpha_norm,
        alpha_bound,
        small_neuron_sum: small_neuron_sum(params, masks),
        small_neuron_bound: (8.0 * budget as f64 / lam0).powi(2) * grad_norm * grad_norm,
        balance_defect,
    })
}

/// Bound diagnostics for data with a known margin certificate; `None` when
/// the dataset carries no margin.
#[allow(clippy::too_many_arguments)]
pub fn bound_report(
    params: &NetParams,
    lam: &CoeffVector,
    data: &Dataset,
    masks: &MaskSeries,
    loss: &dyn Loss,
    cfg: &Resolved,
    budget: usize,
    cands: &[DirectionCandidate],
) -> Result<Option<BoundReport>> {
    let gamma = data.provenance.gamma;
    if !(gamma > 0.0) || data.n() == 0 {
        return Ok(None);
    }
    let _ = lam;
    let corrupt = data.corrupted_count();
    let n = data.n();
    let lprime0 = loss.deriv_at_zero();
    let beta = per_sample_derivs(params, data, masks, loss)?;
    let sum_lprime: f64 = beta.iter().sum();
    let (g_max, how) = if masks.r() <= 3 {
        let mut best = 0.0_f64;
        for s in 0..masks.period() {
            best = best.max(oracle_max_g(&beta, data, masks, s, SURROGATE_ORACLE_RESOLUTION)?.value);
        }
        (best, Certification::Oracle)
    } else {
        let g = cands.iter().map(|c| c.g + c.budget).fold(0.0, f64::max);
        (g, Certification::SolverCertifiedOnly)
    };
    let c_max = cands.iter().map(|c| c.budget).fold(cfg.c_budget, f64::max);
    let test_inputs = TestBoundInputs {
        lam0: cfg.lam0,
        c: c_max,
        corrupt,
        gamma,
        n,
        budget_k: budget,
        lprime0,
        a: loss.exp_bound(),
        delta: cfg.delta,
    };
    Ok(Some(BoundReport {
        gamma,
        corrupt,
        training: BoundValue::new(training_error_bound(5.0 * cfg.lam0 + c_max, corrupt, gamma, n, lprime0)),
        surrogate: surrogate_check(sum_lprime, g_max, corrupt, gamma, how),
        test: BoundValue::new(test_error_bound(&test_inputs)),
        test_inputs,
    }))
}
