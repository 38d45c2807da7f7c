//! Closed-form error bounds and the surrogate inequality
//! `sum_i l'_i <= (max_u G + 2E) / gamma` evaluated on a finished run.

use serde::Serialize;

/// Training-error bound `(C + 2E) / (l'(0) gamma n)` for a network whose
/// correlation maximum is at most `c`.
pub fn training_error_bound(c: f64, corrupt: usize, gamma: f64, n: usize, lprime0: f64) -> f64 {
    (c + 2.0 * corrupt as f64) / (lprime0 * gamma * n as f64)
}

/// Inputs of the test-error bound of a terminated run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestBoundInputs {
    pub lam0: f64,
    /// Solver budget `C`.
    pub c: f64,
    pub corrupt: usize,
    pub gamma: f64,
    pub n: usize,
    pub budget_k: usize,
    pub lprime0: f64,
    /// `a` in `l'(z) <= exp(a z)`.
    pub a: f64,
    pub delta: f64,
}

/// ```text
/// (5 lam0 + C + 2E) / (gamma n l'(0))
///   + ((30 lam0 + 6C + 12E) ln n / (a gamma lam0) + 3 / (4 sqrt(n K lam0))) * 4 sqrt2 / (l'(0) sqrt n)
///   + sqrt(ln(1/delta) / (2n)) / l'(0)
/// ```
pub fn test_error_bound(p: &TestBoundInputs) -> f64 {
    let n = p.n as f64;
    let e = p.corrupt as f64;
    let k = p.budget_k as f64;
    let first = (5.0 * p.lam0 + p.c + 2.0 * e) / (p.gamma * n * p.lprime0);
    let inner = (30.0 * p.lam0 + 6.0 * p.c + 12.0 * e) * n.ln() / (p.a * p.gamma * p.lam0)
        + 3.0 / (4.0 * (n * k * p.lam0).sqrt());
    let second = inner * 4.0 * 2f64.sqrt() / (p.lprime0 * n.sqrt());
    let third = ((1.0 / p.delta).ln() / (2.0 * n)).sqrt() / p.lprime0;
    first + second + third
}

/// Reference operation count `d K m^2 + d K n^{r/2} + n K^5 / lam0`.
pub fn complexity_reference(d: usize, budget_k: usize, m: usize, n: usize, r: usize, lam0: f64) -> f64 {
    let (d, k, m, n) = (d as f64, budget_k as f64, m as f64, n as f64);
    d * k * m * m + d * k * n.powf(r as f64 / 2.0) + n * k.powi(5) / lam0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certification {
    /// Maximum of `G` from the certified sphere-covering oracle.
    Oracle,
    /// Solver value plus its budget; no independent certificate.
    SolverCertifiedOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurrogateCheck {
    pub sum_lprime: f64,
    pub g_max: f64,
    pub rhs: f64,
    pub holds: bool,
    pub certified_by: Certification,
}

/// `sum_i l'_i <= (g_max + 2E) / gamma`, with relative slack `1e-9`.
pub fn surrogate_check(sum_lprime: f64, g_max: f64, corrupt: usize, gamma: f64, certified_by: Certification) -> SurrogateCheck {
    let rhs = (g_max + 2.0 * corrupt as f64) / gamma;
    SurrogateCheck { sum_lprime, g_max, rhs, holds: sum_lprime <= rhs * (1.0 + 1e-9), certified_by }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: f64,
    /// The bound exceeds one and says nothing at this scale.
    pub vacuous: bool,
}

impl BoundValue {
    pub fn new(value: f64) -> Self {
        Self { value, vacuous: value > 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub gamma: f64,
    pub corrupt: usize,
    /// Training-error bound with `C` the certified correlation maximum.
    pub training: BoundValue,
    pub surrogate: SurrogateCheck,
    pub test: BoundValue,
    pub test_inputs: TestBoundInputs,
}
