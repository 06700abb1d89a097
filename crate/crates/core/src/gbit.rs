//! Decoding biases of one gbit.
//!
//! Two uniform bits x₀x₁ are encoded into a single system and either bit is
//! decoded with success (1+α)/2 or (1+β)/2. If the accessible information of
//! the system is at most one bit and obeys the chain rule, then
//! h((1+α)/2) + h((1+β)/2) ≥ 1. A qubit allows exactly α² + β² ≤ 1, which is
//! strictly smaller.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::infotheory::bias_information;
use crate::quantum::qubit_pair_encoding;

/// Slack on both region tests.
pub const REGION_TOL: f64 = 1e-12;

/// Fixed bisection depth for [`chain_rule_beta_max`].
pub const BISECTION_STEPS: usize = 60;

fn check_unit(alpha: f64, beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
        return Err(invalid(format!("biases ({alpha}, {beta}) outside [0,1]")));
    }
    Ok(())
}

/// h((1+α)/2) + h((1+β)/2) ≥ 1.
pub fn chain_rule_feasible(alpha: f64, beta: f64) -> Result<bool> {
    check_unit(alpha, beta)?;
    // 1 − h((1+ε)/2) evaluated without cancellation
    Ok(bias_information(alpha) + bias_information(beta) <= 1.0 + REGION_TOL)
}

/// α² + β² ≤ 1.
pub fn qubit_feasible(alpha: f64, beta: f64) -> Result<bool> {
    check_unit(alpha, beta)?;
    Ok(alpha * alpha + beta * beta <= 1.0 + REGION_TOL)
}

/// Largest β allowed by the chain rule at `alpha`.
pub fn chain_rule_beta_max(alpha: f64) -> Result<f64> {
    check_unit(alpha, 0.0)?;
    let ia = bias_information(alpha);
    let f = |b: f64| 1.0 - ia - bias_information(b);
    if f(1.0) >= 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Largest β a qubit allows at `alpha`.
pub fn qubit_beta_max(alpha: f64) -> Result<f64> {
    check_unit(alpha, 0.0)?;
    Ok((1.0 - alpha * alpha).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Qubit,
    ChainRuleOnly,
    Excluded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionPoint {
    pub alpha: f64,
    pub beta: f64,
    pub region: Region,
}

pub fn classify_point(alpha: f64, beta: f64) -> Result<RegionPoint> {
    let region = if qubit_feasible(alpha, beta)? {
        Region::Qubit
    } else if chain_rule_feasible(alpha, beta)? {
        Region::ChainRuleOnly
    } else {
        Region::Excluded
    };
    Ok(RegionPoint { alpha, beta, region })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryRow {
    pub alpha: f64,
    pub beta_chain_rule: f64,
    pub beta_qubit: f64,
}

/// Both boundaries on the grid αᵢ = i/(steps−1).
pub fn boundary_rows(steps: usize) -> Result<Vec<BoundaryRow>> {
    if steps < 2 {
        return Err(invalid("boundary needs at least 2 grid points"));
    }
    (0..steps)
        .map(|i| {
            let alpha = if i == steps - 1 { 1.0 } else { i as f64 / (steps - 1) as f64 };
            Ok(BoundaryRow { alpha, beta_chain_rule: chain_rule_beta_max(alpha)?, beta_qubit: qubit_beta_max(alpha)? })
        })
        .collect()
}

/// `v` with 12 significant digits.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (11 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Writes the CSV `alpha,beta_chain_rule,beta_qubit` for [`boundary_rows`].
pub fn emit_boundary<W: Write + ?Sized>(steps: usize, out: &mut W) -> Result<Vec<BoundaryRow>> {
    let rows = boundary_rows(steps)?;
    writeln!(out, "alpha,beta_chain_rule,beta_qubit")?;
    for r in &rows {
        writeln!(
            out,
            "{},{},{}",
            format_sig12(r.alpha),
            format_sig12(r.beta_chain_rule),
            format_sig12(r.beta_qubit)
        )?;
    }
    Ok(rows)
}

/// I(X₀:T₀) + I(X₁:T₁) for the qubit encoding with biases (α, β).
pub fn qubit_capacity_sum(alpha: f64, beta: f64) -> Result<f64> {
    let enc = qubit_pair_encoding(alpha, beta)?;
    Ok(enc.decoding_information(0) + enc.decoding_information(1))
}
