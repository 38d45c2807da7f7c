//! Command-line front end: dataset generation, training, evaluation, solver
//! checks against the sphere oracle, and parameter sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng;

use mildnet::data::{
    generate_dataset, generate_linear_margin_dataset, generate_teacher, load_dataset, save_dataset, Dataset,
};
use mildnet::driver::config::{SolverChoice, TrainConfig};
use mildnet::driver::{test_error_estimate, train, training_error, ParamsFile, Silent, TrainOutcome};
use mildnet::loss::Logistic;
use mildnet::network::MaskSeries;
use mildnet::oracle::oracle_max_g;
use mildnet::perturb::{solve_exhaustive, write_candidates, RandomDirections, DEFAULT_GRID_CAP};
use mildnet::rng::stream_rng;
use mildnet::Result;

#[derive(Parser)]
#[command(name = "mildnet", version, about = "Train mildly overparameterized two-layer ReLU classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (CSV plus sidecar).
    GenData(GenData),
    /// Train on a dataset and write the report, trace and parameters.
    Train(Train),
    /// Error rate of saved parameters on a dataset.
    Eval(Eval),
    /// Compare the solvers with the sphere oracle on random weight vectors.
    OracleCheck(OracleCheck),
    /// Train over a grid of lam0, M and r_pert values.
    Sweep(Sweep),
}

#[derive(Args)]
struct GenData {
    #[arg(long)]
    d: usize,
    /// Teacher filter width; defaults to d.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    gamma: f64,
    /// Number of flipped labels.
    #[arg(long, default_value_t = 0)]
    corrupt: usize,
    /// Teacher width; labels of a one-unit teacher are all one class.
    #[arg(long, default_value_t = 2)]
    teacher_units: usize,
    /// Seed for the points, labels and corruption.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed for the teacher; defaults to `--seed`. Reuse it with a new
    /// `--seed` to draw a held-out set from the same teacher.
    #[arg(long)]
    teacher_seed: Option<u64>,
    /// Linearly separable data with margin 2 gamma instead of a teacher network.
    #[arg(long)]
    linear: bool,
    #[arg(long)]
    out: PathBuf,
}

/// Per-key overrides of the config file.
#[derive(Args, Clone, Default)]
struct Overrides {
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    lam0: Option<f64>,
    #[arg(long)]
    c_budget: Option<f64>,
    #[arg(long, value_enum)]
    solver: Option<SolverChoice>,
    #[arg(long)]
    directions: Option<u64>,
    #[arg(long)]
    r_pert: Option<f64>,
    #[arg(long)]
    grid_cap: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stale_retries: Option<usize>,
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    delta: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut TrainConfig) {
        if self.r.is_some() {
            cfg.model.r = self.r;
        }
        if self.m.is_some() {
            cfg.model.m = self.m;
        }
        if self.lam0.is_some() {
            cfg.regularizer.lam0 = self.lam0;
        }
        if self.c_budget.is_some() {
            cfg.regularizer.c_budget = self.c_budget;
        }
        if let Some(v) = self.solver {
            cfg.solver.kind = v;
        }
        if let Some(v) = self.directions {
            cfg.solver.directions = v;
        }
        if let Some(v) = self.r_pert {
            cfg.solver.r_pert = v;
        }
        if let Some(v) = self.grid_cap {
            cfg.solver.grid_cap = v;
        }
        if let Some(v) = self.seed {
            cfg.run.seed = v;
        }
        if let Some(v) = self.stale_retries {
            cfg.run.stale_retries = v;
        }
        if self.timing {
            cfg.run.timing = true;
        }
        if let Some(v) = self.delta {
            cfg.run.delta = v;
        }
    }
}

#[derive(Args)]
struct Train {
    #[arg(long)]
    data: PathBuf,
    /// TOML config; every key can also be given as a flag.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Held-out dataset for the test error.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    out_dir: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Eval {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct OracleCheck {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    lam0: Option<f64>,
    #[arg(long, default_value_t = 1024)]
    directions: u64,
    #[arg(long, default_value_t = 0.1)]
    r_pert: f64,
    #[arg(long, default_value_t = 1_000_000)]
    resolution: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Sweep {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Comma-separated lam0 values.
    #[arg(long, value_delimiter = ',')]
    lam0_grid: Vec<f64>,
    /// Comma-separated values of M.
    #[arg(long, value_delimiter = ',')]
    directions_grid: Vec<u64>,
    /// Comma-separated r_pert values.
    #[arg(long, value_delimiter = ',')]
    r_pert_grid: Vec<f64>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    overrides.apply(&mut cfg);
    Ok(cfg)
}

fn gen_data(a: GenData) -> Result<()> {
    let data = if a.linear {
        generate_linear_margin_dataset(a.d, a.n, a.gamma, a.seed)?
    } else {
        let teacher = generate_teacher(a.d, a.r.unwrap_or(a.d), a.teacher_units, a.teacher_seed.unwrap_or(a.seed))?;
        generate_dataset(&teacher, a.n, a.gamma, a.corrupt, a.seed)?
    };
    save_dataset(&data, &a.out)?;
    if let Some(rate) = data.provenance.acceptance_rate {
        log::info!("acceptance rate {rate:.4}");
    }
    println!("wrote {} points to {}", data.n(), a.out.display());
    Ok(())
}

fn test_error(outcome: &TrainOutcome, test: Option<&Dataset>) -> Result<Option<f64>> {
    test.map(|t| test_error_estimate(&outcome.params, t, &outcome.masks)).transpose()
}

fn write_run(dir: &Path, outcome: &TrainOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), outcome.report.to_json()?)?;
    let mut trace = BufWriter::new(File::create(dir.join("trace.csv"))?);
    outcome.report.write_trace(&mut trace)?;
    trace.flush()?;

    let params = ParamsFile { d: outcome.params.d(), r: outcome.masks.r(), params: outcome.params.clone() };
    fs::write(dir.join("params.json"), serde_json::to_string(&params)?)?;

    let mut gd = BufWriter::new(File::create(dir.join("gd_trace.csv"))?);
    writeln!(gd, "outer_k,iteration,loss,grad_norm")?;
    for (k, t) in &outcome.gd_traces {
        t.write_rows(*k, &mut gd)?;
    }
    gd.flush()?;

    let mut cands = BufWriter::new(File::create(dir.join("candidates.csv"))?);
    writeln!(cands, "outer_k,mask,solver,g,budget")?;
    for (k, c) in &outcome.candidates {
        write_candidates(*k, c, &mut cands)?;
    }
    cands.flush()?;
    Ok(())
}

fn run_train(a: Train) -> Result<()> {
    let cfg = load_config(a.config.as_deref(), &a.overrides)?;
    let data = load_dataset(&a.data)?;
    let test = a.test.as_deref().map(load_dataset).transpose()?;
    let mut outcome = train(&cfg, &data, &Logistic, &mut Silent)?;
    outcome.report.errors.test = test_error(&outcome, test.as_ref())?;
    write_run(&a.out_dir, &outcome)?;
    let r = &outcome.report;
    println!(
        "k0 = {} (K = {}), final loss {:.6}, training error {:.4}{}",
        r.k0,
        r.budget_k,
        r.final_loss,
        r.errors.training,
        r.errors.test.map(|t| format!(", test error {t:.4}")).unwrap_or_default()
    );
    Ok(())
}

fn run_eval(a: Eval) -> Result<()> {
    let file: ParamsFile = serde_json::from_str(&fs::read_to_string(&a.params)?)?;
    let data = load_dataset(&a.data)?;
    let masks = MaskSeries::new(file.d, file.r)?;
    let rate = training_error(&file.params, &data, &masks)?;
    println!("{}", serde_json::json!({ "n": data.n(), "error": rate }));
    Ok(())
}

fn run_oracle_check(a: OracleCheck) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let n = data.n();
    let r = a.r.unwrap_or(data.d());
    let masks = MaskSeries::new(data.d(), r)?;
    let lam0 = a.lam0.unwrap_or((n as f64).sqrt());
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "trial,mask,oracle,oracle_gap,exhaustive,exhaustive_budget,random,random_raw")?;
    let mut rng = stream_rng(a.seed, 0x0c);
    for trial in 0..a.trials {
        let beta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        for s in 0..masks.period() {
            let oracle = oracle_max_g(&beta, &data, &masks, s, a.resolution)?;
            let ex = solve_exhaustive(s, &beta, &data, &masks, lam0, DEFAULT_GRID_CAP)?;
            let rd = RandomDirections::new(a.directions, a.r_pert, a.seed.wrapping_add(trial as u64))?
                .solve(s, &beta, &data, &masks, lam0)?;
            writeln!(
                out,
                "{trial},{s},{},{},{},{},{},{}",
                oracle.value,
                oracle.gap,
                ex.g,
                ex.budget,
                rd.g,
                rd.raw_g.unwrap_or(f64::NAN)
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn run_sweep(a: Sweep) -> Result<()> {
    let base = load_config(a.config.as_deref(), &a.overrides)?;
    let data = load_dataset(&a.data)?;
    let test = a.test.as_deref().map(load_dataset).transpose()?;
    let lam0s: Vec<Option<f64>> =
        if a.lam0_grid.is_empty() { vec![base.regularizer.lam0] } else { a.lam0_grid.iter().map(|&v| Some(v)).collect() };
    let dirs = if a.directions_grid.is_empty() { vec![base.solver.directions] } else { a.directions_grid.clone() };
    let perts = if a.r_pert_grid.is_empty() { vec![base.solver.r_pert] } else { a.r_pert_grid.clone() };

    let mut out = output(a.out.as_deref())?;
    writeln!(out, "lam0,directions,r_pert,status,k0,K,final_loss,train_error,test_error,grad_norm,g_max")?;
    for &lam0 in &lam0s {
        for &m in &dirs {
            for &rp in &perts {
                let mut cfg = base.clone();
                cfg.regularizer.lam0 = lam0;
                cfg.solver.directions = m;
                cfg.solver.r_pert = rp;
                let lam0_text = lam0.map(|v| v.to_string()).unwrap_or_else(|| "default".into());
                match train(&cfg, &data, &Logistic, &mut Silent) {
                    Ok(o) => {
                        let te = test_error(&o, test.as_ref())?.map(|t| t.to_string()).unwrap_or_default();
                        let r = &o.report;
                        let g_max = r.certificates.masks.iter().map(|c| c.g).fold(0.0, f64::max);
                        writeln!(
                            out,
                            "{lam0_text},{m},{rp},ok,{},{},{},{},{te},{},{g_max}",
                            r.k0, r.budget_k, r.final_loss, r.errors.training, r.certificates.grad_norm
                        )?;
                    }
                    Err(e) => {
                        log::warn!("cell lam0={lam0_text} M={m} r_pert={rp} failed: {e}");
                        writeln!(out, "{lam0_text},{m},{rp},error,,,,,,,")?;
                    }
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::OracleCheck(a) => run_oracle_check(a),
        Command::Sweep(a) => run_sweep(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
