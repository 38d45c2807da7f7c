//! End-to-end acceptance checks. Runs as its own binary so the PASS/FAIL
//! summary is always printed, and exits nonzero if any check fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use mildnet::coeff::CoeffUpdate;
use mildnet::data::{
    generate_dataset, generate_linear_margin_dataset, generate_teacher, Dataset, Provenance,
};
use mildnet::driver::config::TrainConfig;
use mildnet::driver::{test_error_estimate, train, train_from, TrainObserver, TrainOutcome};
use mildnet::gd::{GdStep, GdTrace};
use mildnet::loss::{empirical_loss, grad_alpha, per_sample_derivs, CoeffVector, Logistic};
use mildnet::network::{MaskSeries, NetParams};
use mildnet::oracle::oracle_max_g;
use mildnet::perturb::{solve_exhaustive, Perturbation, RandomDirections, DEFAULT_GRID_CAP};
use mildnet::rng::{in_unit_ball, stream_rng, unit_on_support};

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

/// Distance from `v` to the span of `rows`, by twice-repeated classical
/// Gram-Schmidt.
fn span_distance_gs(rows: &[Vec<f64>], v: &[f64]) -> f64 {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for row in rows {
        let mut w = row.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nw = norm(&w);
        if nw > 1e-10 * norm(row).max(1.0) {
            w.iter_mut().for_each(|x| *x /= nw);
            basis.push(w);
        }
    }
    let mut r = v.to_vec();
    for _ in 0..2 {
        for b in &basis {
            let c = dot(&r, b);
            r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    norm(&r)
}

// ---------------------------------------------------------------------------
// Criterion 1

fn random_config(seed: u64) -> (NetParams, CoeffVector, Dataset, MaskSeries) {
    let mut rng = stream_rng(seed, 101);
    let d = rng.random_range(1..=10);
    let r = rng.random_range(1..=d);
    let masks = MaskSeries::new(d, r).unwrap();
    let m = rng.random_range(masks.period()..=60);
    let n = rng.random_range(1..=20);
    let mut alpha = Vec::with_capacity(m);
    let mut dirs = Vec::with_capacity(m * d);
    for j in 0..m {
        let mag = rng.random_range(0.01..1.0);
        alpha.push(if rng.random::<bool>() { mag } else { -mag });
        dirs.extend(unit_on_support(&mut rng, d, masks.window(masks.mask_of(j))));
    }
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        x.extend(in_unit_ball(&mut rng, d));
        y.push(if rng.random::<bool>() { 1 } else { -1 });
    }
    let lam0 = rng.random_range((n as f64).sqrt()..10.0 * (n as f64).sqrt());
    let mut lam = CoeffVector::uniform(m, lam0);
    lam.lam.iter_mut().for_each(|l| *l = rng.random_range(lam0 / 2.0..=lam0));
    let data = Dataset::new(d, x, y, Provenance::default()).unwrap();
    (NetParams::new(d, alpha, dirs).unwrap(), lam, data, masks)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let h = 1e-6;
    let mut worst = 0.0_f64;
    let mut kink = f64::INFINITY;
    for seed in 0..200 {
        let (params, lam, data, masks) = random_config(seed);
        // The only kinks of the loss in alpha sit at alpha_j = 0.
        kink = kink.min(params.alpha().iter().map(|a| a.abs()).fold(f64::INFINITY, f64::min));
        let g = grad_alpha(&params, &lam, &data, &masks, &Logistic).unwrap();
        let mut fd = vec![0.0; params.m()];
        for (j, slot) in fd.iter_mut().enumerate() {
            let mut plus = params.clone();
            plus.alpha_mut()[j] += h;
            let mut minus = params.clone();
            minus.alpha_mut()[j] -= h;
            let lp = empirical_loss(&plus, &lam, &data, &masks, &Logistic).unwrap();
            let lm = empirical_loss(&minus, &lam, &data, &masks, &Logistic).unwrap();
            *slot = (lp - lm) / (2.0 * h);
        }
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&diff) / norm(&fd).max(1e-12));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-5 && kink >= 1e-6 && secs < 10.0,
        format!("200 configs, worst relative error {worst:.2e}, kink distance {kink:.2e}, {secs:.1}s"),
    )
}

// ---------------------------------------------------------------------------
// Criteria 2-5: instrumented training runs

#[derive(Default)]
struct Audit {
    steps: usize,
    sign_violations: usize,
    step_violations: usize,
    monotone_violations: usize,
    traces: usize,
    rate_violations: usize,
    coeff_calls: usize,
    coeff_increase: usize,
    coeff_step: usize,
    coeff_span: usize,
    coeff_range: usize,
    worst_span_ratio: f64,
    perturbations: usize,
    min_drop: f64,
    drop_violations: usize,
    outer_over_budget: usize,
    runs: usize,
    // State needed to re-evaluate perturbations.
    n: usize,
    last_params: Option<NetParams>,
    last_lam: Option<CoeffVector>,
    data: Option<Dataset>,
    masks: Option<MaskSeries>,
}

impl Audit {
    fn new() -> Self {
        Self { worst_span_ratio: f64::INFINITY, min_drop: f64::INFINITY, ..Default::default() }
    }

    fn begin(&mut self, data: &Dataset, masks: MaskSeries) {
        self.n = data.n();
        self.data = Some(data.clone());
        self.masks = Some(masks);
    }

    fn finish(&mut self, out: &TrainOutcome) {
        self.runs += 1;
        if out.report.k0 > out.report.budget_k {
            self.outer_over_budget += 1;
        }
    }
}

impl TrainObserver for Audit {
    fn on_coeff_update(
        &mut self,
        _k: usize,
        params: &NetParams,
        before: &CoeffVector,
        after: &CoeffVector,
        _update: &CoeffUpdate,
        budget: usize,
    ) {
        self.coeff_calls += 1;
        let lam0 = after.lam0;
        let k = budget as f64;
        for (b, a) in before.lam.iter().zip(&after.lam) {
            if a > b {
                self.coeff_increase += 1;
            }
            if (b - a).abs() > lam0 / (2.0 * k) {
                self.coeff_step += 1;
            }
            if *a < lam0 / 2.0 || *a > lam0 {
                self.coeff_range += 1;
            }
        }
        // Rebuild the activation-pattern rows from scratch and measure the
        // distance of each mask's coefficient block to their span.
        let data = self.data.as_ref().unwrap();
        let masks = self.masks.as_ref().unwrap();
        let need = lam0 / (8.0 * k);
        for s in 0..masks.period() {
            let units = masks.units_on(s, params.m());
            let rows: Vec<Vec<f64>> = (0..data.n())
                .map(|i| {
                    let xs = masks.apply(s, data.point(i));
                    units
                        .iter()
                        .map(|&j| {
                            let sg = if params.a(j) >= 0.0 { 1.0 } else { -1.0 };
                            data.y(i) * sg * relu(sg * dot(params.dir(j), &xs))
                        })
                        .collect()
                })
                .collect();
            let block: Vec<f64> = units.iter().map(|&j| after.lam[j]).collect();
            let dist = span_distance_gs(&rows, &block);
            self.worst_span_ratio = self.worst_span_ratio.min(dist / need);
            if dist < need * (1.0 - 1e-9) {
                self.coeff_span += 1;
            }
        }
    }

    fn on_gd_step(&mut self, _k: usize, s: &GdStep<'_>) {
        self.steps += 1;
        for (&a, &b) in s.alpha_prev.iter().zip(s.alpha_next) {
            let same = if a == 0.0 { b == 0.0 } else { b != 0.0 && (a > 0.0) == (b > 0.0) };
            if !same {
                self.sign_violations += 1;
            }
            if (b - a).abs() > a.abs() / 2.0 {
                self.step_violations += 1;
            }
        }
        if s.loss_next > s.loss_prev {
            self.monotone_violations += 1;
        }
    }

    fn on_gd_exit(&mut self, _k: usize, trace: &GdTrace, params: &NetParams, lam: &CoeffVector) {
        self.traces += 1;
        let t = trace.iterations;
        if t > 0 {
            let l = trace.losses[0];
            let min_sq = trace.grad_norms[..t].iter().map(|g| g * g).fold(f64::INFINITY, f64::min);
            if min_sq > 144.0 * l * l.max(2.0 * self.n as f64) / t as f64 {
                self.rate_violations += 1;
            }
        }
        if trace.losses.windows(2).any(|w| w[1] > w[0]) {
            self.monotone_violations += 1;
        }
        self.last_params = Some(params.clone());
        self.last_lam = Some(lam.clone());
    }

    fn on_perturbation(&mut self, _k: usize, p: &Perturbation) {
        self.perturbations += 1;
        let data = self.data.as_ref().unwrap();
        let masks = self.masks.as_ref().unwrap();
        let lam = self.last_lam.as_ref().unwrap();
        let before = empirical_loss(self.last_params.as_ref().unwrap(), lam, data, masks, &Logistic).unwrap();
        let after = empirical_loss(&p.params, lam, data, masks, &Logistic).unwrap();
        let drop = before - after;
        self.min_drop = self.min_drop.min(drop);
        if drop < 1.0 - 1e-9 {
            self.drop_violations += 1;
        }
    }
}

fn grid_runs(audit: &mut Audit) -> Result<(), String> {
    for seed in 0..20u64 {
        let r = if seed % 2 == 0 { 3 } else { 10 };
        let teacher = generate_teacher(10, r, 2, seed).map_err(|e| e.to_string())?;
        let data = generate_dataset(&teacher, 100, 0.1, 5, seed).map_err(|e| e.to_string())?;
        if !both_classes(&data) {
            return Err(format!("seed {seed}: single-class dataset"));
        }
        let mut cfg = TrainConfig::default();
        cfg.model.r = Some(r);
        cfg.run.seed = seed;
        audit.begin(&data, MaskSeries::new(10, r).unwrap());
        let out = train(&cfg, &data, &Logistic, audit).map_err(|e| format!("seed {seed}, r {r}: {e}"))?;
        audit.finish(&out);
    }
    Ok(())
}

/// Points on two coordinate axes, 3:1 in favour of the positive class, with
/// every initial neuron pointing along a direction no point sees. The first
/// inner descent shrinks the silent neurons, and the correlation on the
/// positive axis forces a perturbation.
fn silent_fixture(n: usize, d: usize, r: usize) -> (Dataset, NetParams, MaskSeries) {
    let masks = MaskSeries::new(d, r).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let mut p = vec![0.0; d];
        if i % 4 != 3 {
            p[0] = 1.0;
            y.push(1);
        } else {
            p[d - 1] = 1.0;
            y.push(-1);
        }
        x.extend(p);
    }
    let data = Dataset::new(d, x, y, Provenance::default()).unwrap();
    let m = (n + 1) * masks.period();
    let mut dirs = Vec::with_capacity(m * d);
    for _ in 0..m {
        let mut u = vec![0.0; d];
        u[1] = 1.0;
        dirs.extend(u);
    }
    (data, NetParams::new(d, vec![0.01; m], dirs).unwrap(), masks)
}

fn fixture_runs(audit: &mut Audit) -> Result<usize, String> {
    let mut perturbed_runs = 0;
    for (n, d, r) in [(400, 3, 3), (400, 4, 3), (256, 3, 3)] {
        let (data, init, masks) = silent_fixture(n, d, r);
        let mut cfg = TrainConfig::default();
        cfg.model.r = Some(r);
        cfg.regularizer.lam0 = Some((n as f64).sqrt());
        audit.begin(&data, masks);
        let before = audit.perturbations;
        let out = train_from(&cfg, &data, &Logistic, init, audit).map_err(|e| format!("fixture n={n} d={d} r={r}: {e}"))?;
        audit.finish(&out);
        if audit.perturbations > before {
            perturbed_runs += 1;
        }
    }
    Ok(perturbed_runs)
}

// ---------------------------------------------------------------------------
// Criterion 6

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let n = 8;
    let lam0 = (n as f64).sqrt() * (n as f64).ln();
    let masks = MaskSeries::fully_connected(3).unwrap();
    let mut rng = stream_rng(6, 106);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        x.extend(in_unit_ball(&mut rng, 3));
        y.push(if rng.random::<bool>() { 1 } else { -1 });
    }
    let data = Dataset::new(3, x, y, Provenance::default()).unwrap();
    let mut ok = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..50 {
        let beta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let oracle = oracle_max_g(&beta, &data, &masks, 0, 1_000_000).unwrap();
        let ex = solve_exhaustive(0, &beta, &data, &masks, lam0, DEFAULT_GRID_CAP).unwrap();
        worst_gap = worst_gap.max(oracle.value - ex.g);
        if ex.g >= oracle.value - lam0 {
            ok += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        ok == 50 && secs < 120.0,
        format!("{ok}/50 within lam0 = {lam0:.3} (largest shortfall {worst_gap:.2e}), {secs:.1}s"),
    )
}

// ---------------------------------------------------------------------------
// Criterion 7

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let (d, n, gamma, delta) = (3usize, 8000usize, 0.3, 0.05_f64);
    let nf = n as f64;
    let eps0 = nf.powf(-1.0 / 3.0);
    let slack = gamma - 4.0 * eps0;
    let r_pert = slack / (32.0 * d as f64);
    let n_needed = (6.0 / delta).ln() / (2.0 * eps0 * eps0);
    let m_needed = ((4.0 * nf / delta).ln() / (gamma * gamma))
        .max(4.0 * (6.0 * nf / delta).ln() / (r_pert * r_pert * slack * slack));
    let half = m_needed.ceil() as u64;
    if !(slack > 0.0 && r_pert < slack / (16.0 * d as f64) && nf >= n_needed) {
        return verdict(false, format!("sample-size and radius conditions fail: n = {n}, needed {n_needed:.1}, slack {slack}"));
    }
    let data = generate_linear_margin_dataset(d, n, gamma, 7).unwrap();
    let masks = MaskSeries::fully_connected(d).unwrap();
    let factor = r_pert * slack / 8.0;
    let mut rng = stream_rng(7, 107);
    let mut hits = 0;
    let mut evaluated = 0u64;
    for trial in 0..100u64 {
        let beta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        // max over the unit ball of |sum_i y_i beta_i u . x_i| is the norm of
        // the weighted sum.
        let mut agg = vec![0.0; d];
        for i in 0..n {
            agg.iter_mut().zip(data.point(i)).for_each(|(a, x)| *a += data.y(i) * beta[i] * x);
        }
        let threshold = factor * norm(&agg);
        let solver = RandomDirections::new(half, r_pert, 1000 + trial).unwrap();
        match solver.first_exceeding(0, &beta, &data, &masks, threshold).unwrap() {
            Some(c) => {
                hits += 1;
                evaluated += c.index + 1;
            }
            None => evaluated += solver.candidates(),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        hits >= 95 && secs < 300.0,
        format!(
            "{hits}/100 trials reach {factor:.3e} x max (n = {n}, M = {half}, r = {r_pert:.3e}, {evaluated} candidates scanned), {secs:.1}s"
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 8

fn criterion_8() -> Outcome {
    let mut runs = 0;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut errors = Vec::new();
    for case in 0..8u64 {
        let (r, corrupt) = match case % 4 {
            0 => (3, 0),
            1 => (3, 3),
            2 => (2, 0),
            _ => (2, 2),
        };
        // A teacher whose negative unit never reaches the margin labels a
        // single class; take the first seed that gives both.
        let Some((seed, data)) = (100 * case..100 * case + 20).find_map(|seed| {
            let teacher = generate_teacher(3, r, 2, seed).ok()?;
            let data = generate_dataset(&teacher, 50, 0.3, corrupt, seed).ok()?;
            both_classes(&data).then_some((seed, data))
        }) else {
            errors.push(format!("case {case}: no two-class dataset in 20 seeds"));
            continue;
        };
        let mut cfg = TrainConfig::default();
        cfg.model.r = Some(r);
        cfg.run.seed = seed;
        let out = match train(&cfg, &data, &Logistic, &mut mildnet::driver::Silent) {
            Ok(o) => o,
            Err(e) => {
                errors.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        runs += 1;
        let beta = per_sample_derivs(&out.params, &data, &out.masks, &Logistic).unwrap();
        let sum: f64 = beta.iter().sum();
        let g_max = (0..out.masks.period())
            .map(|s| oracle_max_g(&beta, &data, &out.masks, s, 1_000_000).unwrap().value)
            .fold(0.0, f64::max);
        let gamma = data.provenance.gamma;
        let rhs = (g_max + 2.0 * data.corrupted_count() as f64) / gamma;
        worst = worst.min(rhs / sum);
        let reported = out.report.bounds.as_ref().map(|b| b.surrogate.holds).unwrap_or(false);
        if sum > rhs * (1.0 + 1e-9) || !reported {
            violations += 1;
        }
    }
    verdict(
        violations == 0 && errors.is_empty(),
        format!("{runs} terminated runs, {violations} violations, smallest rhs/lhs {worst:.3}{}", fmt_errors(&errors)),
    )
}

fn both_classes(data: &Dataset) -> bool {
    let pos = data.labels().iter().filter(|&&y| y > 0).count();
    pos > 0 && pos < data.n()
}

fn fmt_errors(errors: &[String]) -> String {
    if errors.is_empty() {
        String::new()
    } else {
        format!("; errors: {}", errors.join("; "))
    }
}

// ---------------------------------------------------------------------------
// Criterion 9

fn criterion_9() -> Outcome {
    let mut worst_train = 0.0_f64;
    let mut worst_test = 0.0_f64;
    let mut slowest = Duration::ZERO;
    let mut rows = Vec::new();
    for seed in 0..5u64 {
        let start = Instant::now();
        let teacher = generate_teacher(10, 10, 2, 900 + seed).unwrap();
        let data = generate_dataset(&teacher, 200, 0.3, 0, 900 + seed).unwrap();
        let heldout = generate_dataset(&teacher, 1000, 0.3, 0, 5900 + seed).unwrap();
        if !both_classes(&data) || !both_classes(&heldout) {
            return verdict(false, format!("seed {seed}: single-class dataset"));
        }
        let mut cfg = TrainConfig::default();
        cfg.model.m = Some(201);
        cfg.run.seed = seed;
        let out = match train(&cfg, &data, &Logistic, &mut mildnet::driver::Silent) {
            Ok(o) => o,
            Err(e) => return verdict(false, format!("seed {seed}: {e}")),
        };
        let test = test_error_estimate(&out.params, &heldout, &out.masks).unwrap();
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        worst_train = worst_train.max(out.report.errors.training);
        worst_test = worst_test.max(test);
        let collapse = out.report.final_loss / (data.n() as f64 * std::f64::consts::LN_2);
        rows.push(format!("{:.3}/{:.3} (k0 {}, L/(n ln2) {collapse:.4})", out.report.errors.training, test, out.report.k0));
    }
    verdict(
        worst_train <= 0.05 && worst_test <= 0.10 && slowest.as_secs_f64() < 600.0,
        format!(
            "train/test per seed [{}], worst {worst_train:.3}/{worst_test:.3}, slowest run {:.1}s",
            rows.join(", "),
            slowest.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 10

fn criterion_10() -> Outcome {
    let teacher = generate_teacher(3, 3, 2, 10).unwrap();
    let data = generate_dataset(&teacher, 50, 0.4, 0, 10).unwrap();
    let cfg = TrainConfig::default();
    let render = || {
        let out = train(&cfg, &data, &Logistic, &mut mildnet::driver::Silent).unwrap();
        let mut trace = Vec::new();
        out.report.write_trace(&mut trace).unwrap();
        (out.report.to_json().unwrap().into_bytes(), trace)
    };
    let (j1, t1) = render();
    let (j2, t2) = render();
    let (j3, t3) = render();
    let same = j1 == j2 && j2 == j3 && t1 == t2 && t2 == t3;
    verdict(same, format!("3 runs, report {} bytes, trace {} bytes, identical: {same}", j1.len(), t1.len()))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id: usize, name: &'static str, o: Outcome| {
        println!("criterion {id:>2} {:<4} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };

    record(1, "gradient vs finite differences", criterion_1());

    let start = Instant::now();
    let mut audit = Audit::new();
    let grid = grid_runs(&mut audit);
    let grid_runs_done = audit.runs;
    let fixtures = fixture_runs(&mut audit);
    let secs = start.elapsed().as_secs_f64();
    let run_error = [grid.as_ref().err(), fixtures.as_ref().err()].into_iter().flatten().cloned().collect::<Vec<_>>();
    let a = &audit;
    record(
        2,
        "sign preservation and step bound",
        verdict(
            run_error.is_empty() && a.sign_violations == 0 && a.step_violations == 0,
            format!(
                "{} runs ({grid_runs_done} seeded), {} steps, {} sign / {} step violations, {secs:.1}s{}",
                a.runs,
                a.steps,
                a.sign_violations,
                a.step_violations,
                fmt_errors(&run_error)
            ),
        ),
    );
    record(
        3,
        "descent monotonicity and rate",
        verdict(
            run_error.is_empty() && a.monotone_violations == 0 && a.rate_violations == 0,
            format!("{} traces, {} monotonicity / {} rate violations", a.traces, a.monotone_violations, a.rate_violations),
        ),
    );
    record(
        4,
        "coefficient invariants",
        verdict(
            run_error.is_empty() && a.coeff_increase + a.coeff_step + a.coeff_span + a.coeff_range == 0,
            format!(
                "{} updates, violations: {} increase / {} step / {} span / {} range, smallest span ratio {:.3}",
                a.coeff_calls, a.coeff_increase, a.coeff_step, a.coeff_span, a.coeff_range, a.worst_span_ratio
            ),
        ),
    );
    let perturbed_runs = fixtures.as_ref().copied().unwrap_or(0);
    record(
        5,
        "perturbation decrease and outer budget",
        verdict(
            run_error.is_empty() && a.perturbations > 0 && a.drop_violations == 0 && a.outer_over_budget == 0,
            format!(
                "{} perturbations over {perturbed_runs} fixture runs, smallest drop {:.3}, {} runs over K",
                a.perturbations, a.min_drop, a.outer_over_budget
            ),
        ),
    );

    record(6, "exhaustive solver vs oracle", criterion_6());
    record(7, "randomized solver guarantee", criterion_7());
    record(8, "surrogate inequality at termination", criterion_8());
    record(9, "end-to-end learning", criterion_9());
    record(10, "determinism", criterion_10());

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
