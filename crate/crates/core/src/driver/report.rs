//! The training report and its CSV trace.

use std::io::Write;

use serde::Serialize;

use super::bounds::BoundReport;
use super::config::Resolved;

pub const REPORT_VERSION: &str = "mildnet-report v1";

pub const TRACE_HEADER: &str = "outer_k,inner_T,loss_pre,loss_post,grad_norm,perturbed_mask,g_value,lam_min,lam_max";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Seeds {
    pub data: u64,
    pub init: u64,
    pub solver: u64,
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterRecord {
    pub outer_k: usize,
    /// Loss at the start of the iteration, before the coefficient update.
    pub loss_start: f64,
    /// Loss after the coefficient update, before inner descent.
    pub loss_pre: f64,
    /// Loss after inner descent.
    pub loss_post: f64,
    pub inner_t: usize,
    pub grad_norm: f64,
    /// Largest candidate value over masks.
    pub g_value: f64,
    pub perturbed_mask: Option<usize>,
    pub perturbed_unit: Option<usize>,
    pub loss_after_perturbation: Option<f64>,
    pub stale_retries: usize,
    pub lam_min: f64,
    pub lam_max: f64,
    pub coeff_blocks_changed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskCertificate {
    pub mask: usize,
    pub g: f64,
    pub budget: f64,
    /// `g + budget`, an upper bound on `max_u G` for this mask.
    pub certified_max: f64,
    /// `5 lam0 + budget`.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificates {
    pub grad_norm: f64,
    pub grad_tol: f64,
    pub masks: Vec<MaskCertificate>,
    pub alpha_norm: f64,
    /// `2 sqrt(K / lam0)`.
    pub alpha_bound: f64,
    /// `sum_s min_{j on s} alpha_j^2`.
    pub small_neuron_sum: f64,
    /// `(8K / lam0)^2 |grad|^2`.
    pub small_neuron_bound: f64,
    /// Largest `| |a_j| - |w_j| |`.
    pub balance_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRates {
    pub training: f64,
    pub test: Option<f64>,
}

/// Operation counts next to the reference `d K m^2 + d K n^{r/2} + n K^5 / lam0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OpTally {
    pub coefficient: f64,
    pub solver: f64,
    pub descent: f64,
    pub total: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub version: String,
    pub config: Resolved,
    pub loss: String,
    pub seeds: Seeds,
    pub k0: usize,
    pub budget_k: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub coefficient_updates: usize,
    pub records: Vec<OuterRecord>,
    pub certificates: Certificates,
    pub errors: ErrorRates,
    pub bounds: Option<BoundReport>,
    pub ops: OpTally,
    pub wall_clock_secs: Option<f64>,
}

impl TrainReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn write_trace<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.records {
            let mask = r.perturbed_mask.map(|m| m.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.outer_k, r.inner_t, r.loss_pre, r.loss_post, r.grad_norm, mask, r.g_value, r.lam_min, r.lam_max
            )?;
        }
        Ok(())
    }
}
