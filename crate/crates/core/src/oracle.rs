//! Brute-force maximization of `G` over the unit sphere of a mask window of
//! at most three coordinates, with a certified gap to the true maximum.
//!
//! `G` is Lipschitz in `u` with constant `sum_i beta_i` (points lie in the
//! unit ball), so a point set with covering radius `rho` has grid maximum
//! within `rho * sum_i beta_i` of the true maximum.

use std::f64::consts::PI;

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::MaskSeries;
use crate::par::{self, argmax, norm};
use crate::perturb::Weighted;

const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// Largest grid value; the true maximum lies in `[value, value + gap]`.
    pub value: f64,
    /// Maximizing grid direction in `R^d`.
    pub argmax: Vec<f64>,
    pub gap: f64,
    pub evaluations: usize,
}

/// Point `k` of the `n`-point spherical Fibonacci lattice.
pub fn fibonacci_point(k: usize, n: usize) -> [f64; 3] {
    let golden = PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
    let rho = (1.0 - z * z).max(0.0).sqrt();
    let phi = golden * k as f64;
    [rho * phi.cos(), rho * phi.sin(), z]
}

/// Covering-radius bound used for the `n`-point Fibonacci lattice.
pub fn fibonacci_covering_bound(n: usize) -> f64 {
    2.0 * (PI / n as f64).sqrt()
}

fn circle_point(k: usize, n: usize) -> [f64; 2] {
    let t = 2.0 * PI * k as f64 / n as f64;
    [t.cos(), t.sin()]
}

/// Maximizes `G(u; s)` over a covering of the sphere of the window of mask
/// `s` by `resolution` points (ignored when the window has one coordinate,
/// where `{-1, +1}` is exact).
pub fn oracle_max_g(
    beta: &[f64],
    data: &Dataset,
    masks: &MaskSeries,
    s: usize,
    resolution: usize,
) -> Result<OracleResult> {
    let r = masks.r();
    if r > 3 {
        return Err(Error::UnsupportedDimension(r));
    }
    let wt = Weighted::new(s, beta, data, masks)?;
    let total_beta: f64 = beta.iter().sum();
    let (count, gap) = match r {
        1 => (2, 0.0),
        2 => (resolution, total_beta * PI / resolution as f64),
        _ => (resolution, total_beta * fibonacci_covering_bound(resolution)),
    };
    if count == 0 {
        return Err(Error::Contract("oracle resolution must be positive".into()));
    }
    let point = |k: usize| -> Vec<f64> {
        match r {
            1 => vec![if k == 0 { -1.0 } else { 1.0 }],
            2 => circle_point(k, count).to_vec(),
            _ => fibonacci_point(k, count).to_vec(),
        }
    };
    let chunks = count.div_ceil(CHUNK);
    let best = par::map_range(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(count);
        let mut best = (f64::NEG_INFINITY, lo);
        for k in lo..hi {
            let v = wt.signed(&point(k)).abs();
            if v > best.0 {
                best = (v, k);
            }
        }
        best
    });
    let vals: Vec<f64> = best.iter().map(|b| b.0).collect();
    let (value, k) = best[argmax(&vals).expect("at least one chunk")];
    Ok(OracleResult { value, argmax: wt.embed(&point(k), data.d()), gap, evaluations: count })
}

/// Lower bound from the directions `+-normalize(sum_{i in S} beta_i y_i x~_i)`
/// over every nonempty subset `S`. Only a cross-check; it is not certified.
pub fn subset_lower_bound(beta: &[f64], data: &Dataset, masks: &MaskSeries, s: usize) -> Result<(f64, Vec<f64>)> {
    let n = data.n();
    if n > 12 {
        return Err(Error::Contract(format!("subset heuristic supports n <= 12, got {n}")));
    }
    let wt = Weighted::new(s, beta, data, masks)?;
    let r = wt.r;
    let mut best = (0.0, wt.embed(&vec![0.0; r], data.d()));
    for subset in 1u32..(1u32 << n) {
        let mut agg = vec![0.0; r];
        for i in (0..n).filter(|i| subset & (1 << i) != 0) {
            agg.iter_mut().zip(wt.point(i)).for_each(|(a, x)| *a += wt.w[i] * x);
        }
        let an = norm(&agg);
        if an == 0.0 {
            continue;
        }
        for sgn in [1.0, -1.0] {
            let u: Vec<f64> = agg.iter().map(|a| sgn * a / an).collect();
            let v = wt.signed(&u).abs();
            if v > best.0 {
                best = (v, wt.embed(&u, data.d()));
            }
        }
    }
    Ok(best)
}
