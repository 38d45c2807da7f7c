//! Labelled datasets, synthetic generators with known margin certificates,
//! and the on-disk CSV format.
//!
//! File layout:
//!
//! ```text
//! # mildnet-dataset v1, d=<d>, n=<n>, gamma=<gamma>, E=<E>, seed=<seed>
//! y,x1,...,xd
//! ...
//! ```
//!
//! Values are written in Rust's shortest round-trip decimal form, so a
//! save/load cycle is lossless. The teacher (or linear witness) and the
//! corrupted index set live in a JSON sidecar next to the CSV file.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{sign, teacher_eval_unchecked, MaskSeries, Teacher};
use crate::par::{dot, norm};
use crate::rng::{self, stream};

const HEADER_TAG: &str = "# mildnet-dataset v1";
const BALL_TOL: f64 = 1e-12;
/// Rejection sampling gives up after this many draws per requested point.
pub const REJECTION_BUDGET_PER_POINT: usize = 20_000;

/// Where a dataset came from and what it certifies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub gamma: f64,
    /// Sorted indices whose labels were flipped after sampling.
    pub corrupted: Vec<usize>,
    pub teacher_seed: Option<u64>,
    pub teacher: Option<Teacher>,
    /// Unit vector `v` with `y * v.x >= 2 gamma` for linear-margin data.
    pub linear_witness: Option<Vec<f64>>,
    /// Fraction of rejection-sampling draws that were accepted.
    pub acceptance_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    /// Row-major `n x d`.
    x: Vec<f64>,
    y: Vec<i8>,
    pub provenance: Provenance,
}

impl Dataset {
    /// Builds a dataset, checking `|x_i| <= 1` and `y_i in {-1, +1}`.
    pub fn new(d: usize, x: Vec<f64>, y: Vec<i8>, provenance: Provenance) -> Result<Self> {
        if x.len() != y.len() * d {
            return Err(Error::Shape(format!(
                "{} labels need {} coordinates, got {}",
                y.len(),
                y.len() * d,
                x.len()
            )));
        }
        let data = Self { d, x, y, provenance };
        for i in 0..data.n() {
            let nrm = norm(data.point(i));
            if nrm > 1.0 + BALL_TOL {
                return Err(Error::Contract(format!("point {i} has norm {nrm} > 1")));
            }
            if data.y[i] != 1 && data.y[i] != -1 {
                return Err(Error::Contract(format!("label {} at {i}", data.y[i])));
            }
        }
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> &[f64] {
        &self.x
    }

    pub fn labels(&self) -> &[i8] {
        &self.y
    }

    /// Label as `+1.0` / `-1.0`.
    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        f64::from(self.y[i])
    }

    /// Number of corrupted labels `E`.
    pub fn corrupted_count(&self) -> usize {
        self.provenance.corrupted.len()
    }
}

/// Draws a teacher: unit directions on each unit's mask support and
/// coefficients with magnitudes in `[0.5, 1.5)`, alternating signs starting
/// with `+`, then scaled to unit l1 norm.
pub fn generate_teacher(d: usize, r: usize, units: usize, seed: u64) -> Result<Teacher> {
    if units == 0 {
        return Err(Error::Contract("teacher needs at least one unit".into()));
    }
    let masks = MaskSeries::new(d, r)?;
    let mut rng = rng::stream_rng(seed, stream::TEACHER);
    let mut coeffs = Vec::with_capacity(units);
    let mut dirs = Vec::with_capacity(units * d);
    for j in 0..units {
        let mag: f64 = rand::Rng::random_range(&mut rng, 0.5..1.5);
        coeffs.push(if j % 2 == 0 { mag } else { -mag });
        dirs.extend(rng::unit_on_support(&mut rng, d, masks.window(masks.mask_of(j))));
    }
    let l1: f64 = coeffs.iter().map(|c| c.abs()).sum();
    coeffs.iter_mut().for_each(|c| *c /= l1);
    let teacher = Teacher { d, r, coeffs, dirs };
    teacher.validate()?;
    Ok(teacher)
}

fn budget_error(attempts: usize, accepted: usize, reason: &str) -> Error {
    Error::Generation {
        attempts,
        rate: accepted as f64 / attempts.max(1) as f64,
        reason: reason.to_string(),
    }
}

/// Samples `n` points uniformly from the unit ball conditioned on
/// `|h(x)| >= gamma`, labels them `sgn(h(x))`, then flips `corrupt` labels
/// chosen uniformly without replacement.
pub fn generate_dataset(
    teacher: &Teacher,
    n: usize,
    gamma: f64,
    corrupt: usize,
    seed: u64,
) -> Result<Dataset> {
    teacher.validate()?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Contract(format!("margin gamma = {gamma} must lie in (0, 1]")));
    }
    if corrupt > n {
        return Err(Error::Contract(format!("cannot corrupt {corrupt} of {n} labels")));
    }
    let masks = MaskSeries::new(teacher.d, teacher.r)?;
    let d = teacher.d;
    let mut rng = rng::stream_rng(seed, stream::POINTS);
    let budget = REJECTION_BUDGET_PER_POINT.saturating_mul(n.max(1));
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while y.len() < n {
        if attempts >= budget {
            return Err(budget_error(attempts, y.len(), "teacher margin mass too small"));
        }
        attempts += 1;
        let p = rng::in_unit_ball(&mut rng, d);
        let h = teacher_eval_unchecked(teacher, &masks, &p);
        if h.abs() >= gamma {
            y.push(if h > 0.0 { 1 } else { -1 });
            x.extend(p);
        }
    }
    let mut crng = rng::stream_rng(seed, stream::CORRUPTION);
    let mut corrupted = index::sample(&mut crng, n, corrupt).into_vec();
    corrupted.sort_unstable();
    for &i in &corrupted {
        y[i] = -y[i];
    }
    let provenance = Provenance {
        seed,
        gamma,
        corrupted,
        teacher_seed: None,
        teacher: Some(teacher.clone()),
        linear_witness: None,
        acceptance_rate: Some(n as f64 / attempts.max(1) as f64),
    };
    Dataset::new(d, x, y, provenance)
}

/// Points with `y * (v . x) >= 2 gamma` for a fixed random unit `v`.
///
/// The constant witness `v(omega) = v` gives
/// `y * E_omega[v.x 1{x.omega >= 0}] = y (v.x) / 2 >= gamma`, so the data
/// satisfies the spherical-feature margin condition with margin `gamma`
/// and no exceptions.
pub fn generate_linear_margin_dataset(d: usize, n: usize, gamma: f64, seed: u64) -> Result<Dataset> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::Contract(format!("linear margin gamma = {gamma} must lie in (0, 1/2)")));
    }
    if d == 0 {
        return Err(Error::Shape("d must be positive".into()));
    }
    let mut wrng = rng::stream_rng(seed, stream::WITNESS);
    let witness = rng::unit_on_support(&mut wrng, d, 0..d);
    let mut rng = rng::stream_rng(seed, stream::POINTS);
    let budget = REJECTION_BUDGET_PER_POINT.saturating_mul(n.max(1));
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while y.len() < n {
        if attempts >= budget {
            return Err(budget_error(attempts, y.len(), "linear margin band too thin"));
        }
        attempts += 1;
        let p = rng::in_unit_ball(&mut rng, d);
        let proj = dot(&witness, &p);
        if proj.abs() >= 2.0 * gamma {
            y.push(if proj > 0.0 { 1 } else { -1 });
            x.extend(p);
        }
    }
    let provenance = Provenance {
        seed,
        gamma,
        corrupted: Vec::new(),
        teacher_seed: None,
        teacher: None,
        linear_witness: Some(witness),
        acceptance_rate: Some(n as f64 / attempts.max(1) as f64),
    };
    Dataset::new(d, x, y, provenance)
}

/// Number of samples with `y_i h(x_i) >= gamma`.
pub fn margin_count(data: &Dataset, teacher: &Teacher, gamma: f64) -> Result<usize> {
    let masks = MaskSeries::new(teacher.d, teacher.r)?;
    if teacher.d != data.d() {
        return Err(Error::Shape("teacher and dataset dimensions differ".into()));
    }
    Ok((0..data.n())
        .filter(|&i| data.y(i) * teacher_eval_unchecked(teacher, &masks, data.point(i)) >= gamma)
        .count())
}

/// Smallest `y_i (v . x_i)` over the dataset.
pub fn linear_margin(data: &Dataset, witness: &[f64]) -> f64 {
    (0..data.n())
        .map(|i| data.y(i) * dot(witness, data.point(i)))
        .fold(f64::INFINITY, f64::min)
}

/// Checks the stored certificate: at least `n - E` samples have teacher
/// margin `gamma`, or every sample has linear margin `2 gamma`.
pub fn certificate_holds(data: &Dataset) -> Result<bool> {
    let p = &data.provenance;
    if let Some(t) = &p.teacher {
        return Ok(margin_count(data, t, p.gamma)? + data.corrupted_count() >= data.n());
    }
    if let Some(w) = &p.linear_witness {
        return Ok(linear_margin(data, w) >= 2.0 * p.gamma);
    }
    Ok(false)
}

/// `<path>.sidecar.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".sidecar.json");
    PathBuf::from(s)
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let p = &data.provenance;
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(
        out,
        "{HEADER_TAG}, d={}, n={}, gamma={}, E={}, seed={}",
        data.d(),
        data.n(),
        p.gamma,
        data.corrupted_count(),
        p.seed
    )?;
    for i in 0..data.n() {
        write!(out, "{}", data.labels()[i])?;
        for v in data.point(i) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(p)?)?;
    Ok(())
}

struct Header {
    d: usize,
    n: usize,
    gamma: f64,
    corrupt: usize,
    seed: u64,
}

fn parse_header(path: &Path, line: &str) -> Result<Header> {
    let err = |msg: String| Error::Parse { path: path.to_path_buf(), line: 1, msg };
    let rest = line
        .strip_prefix(HEADER_TAG)
        .ok_or_else(|| err(format!("expected header starting with '{HEADER_TAG}'")))?;
    let mut d = None;
    let mut n = None;
    let mut gamma = None;
    let mut corrupt = None;
    let mut seed = None;
    for field in rest.split(',').map(str::trim).filter(|f| !f.is_empty()) {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(format!("header field '{field}' is not key=value")))?;
        let bad = |_| err(format!("bad value for {key}: '{value}'"));
        match key {
            "d" => d = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "n" => n = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "gamma" => gamma = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "E" => corrupt = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(e.to_string()))?),
            other => return Err(err(format!("unknown header field '{other}'"))),
        }
    }
    let missing = |k: &str| err(format!("header is missing '{k}'"));
    Ok(Header {
        d: d.ok_or_else(|| missing("d"))?,
        n: n.ok_or_else(|| missing("n"))?,
        gamma: gamma.ok_or_else(|| missing("gamma"))?,
        corrupt: corrupt.ok_or_else(|| missing("E"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
    })
}

/// Reads a dataset and, when present, its sidecar.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "empty file".into(),
    })?;
    let header = parse_header(path, first)?;
    let mut x = Vec::with_capacity(header.n * header.d);
    let mut y = Vec::with_capacity(header.n);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let err = |msg: String| Error::Parse { path: path.to_path_buf(), line: lineno, msg };
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label = match fields.next().map(str::trim) {
            Some("1") | Some("+1") => 1,
            Some("-1") => -1,
            other => return Err(err(format!("label must be -1 or 1, got {other:?}"))),
        };
        let start = x.len();
        for f in fields {
            x.push(f.trim().parse::<f64>().map_err(|e| err(format!("'{f}': {e}")))?);
        }
        if x.len() - start != header.d {
            return Err(err(format!("expected {} coordinates, got {}", header.d, x.len() - start)));
        }
        let nrm = norm(&x[start..]);
        if nrm > 1.0 + BALL_TOL {
            return Err(err(format!("point norm {nrm} exceeds 1")));
        }
        y.push(label);
    }
    if y.len() != header.n {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("header declares n={} but file has {} rows", header.n, y.len()),
        });
    }
    let side = sidecar_path(path);
    let mut provenance = if side.exists() {
        serde_json::from_str::<Provenance>(&fs::read_to_string(&side)?)?
    } else {
        Provenance::default()
    };
    provenance.seed = header.seed;
    provenance.gamma = header.gamma;
    if provenance.corrupted.len() != header.corrupt && (side.exists() || header.corrupt != 0) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!(
                "header declares E={} but sidecar lists {} corrupted indices",
                header.corrupt,
                provenance.corrupted.len()
            ),
        });
    }
    Dataset::new(header.d, x, y, provenance)
}

/// Labels a point by `sgn` of a score; ties at zero count as `+1` here and
/// are treated as errors by the error-rate helpers.
pub fn label_of(score: f64) -> i8 {
    if sign(score) > 0.0 {
        1
    } else {
        -1
    }
}
