//! Closed-form sample-complexity quantities.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// `H_ε = 18·K·k_mu / max(3ε, ε + Δ_min)²`.
pub fn complexity_h(k: usize, k_mu: f64, epsilon: f64, delta_min: f64) -> Result<f64> {
    if k == 0 || !(k_mu > 0.0) || !(epsilon > 0.0) || !(delta_min >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "complexity needs K >= 1, k_mu > 0, epsilon > 0, delta_min >= 0 (got {k}, {k_mu}, {epsilon}, {delta_min})"
        )));
    }
    let denom = (3.0 * epsilon).max(epsilon + delta_min);
    Ok(18.0 * k as f64 * k_mu / (denom * denom))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryInputs {
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub kappa: f64,
    #[serde(rename = "R")]
    pub reward_bound: f64,
    pub c_mu: f64,
    pub k_mu: f64,
    pub delta_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexityReport {
    #[serde(rename = "H_eps")]
    pub h_eps: f64,
    pub bound_tau: f64,
    pub inputs: TheoryInputs,
}

/// High-probability upper bound on the stopping time under the theoretical
/// width multiplier:
///
/// ```text
/// A = 64·d·κ²·R² / c_mu² · H_ε
/// τ ≤ A · ( ln[A·(π·sqrt(d/(6δ)) + 1)] + c_mu/(4κR) · sqrt((K+1)/(d·H_ε)) )²
/// ```
pub fn stopping_time_bound(inputs: &TheoryInputs) -> Result<f64> {
    validate(inputs)?;
    let h = complexity_h(inputs.k, inputs.k_mu, inputs.epsilon, inputs.delta_min)?;
    let d = inputs.d as f64;
    let (kappa, r, c_mu) = (inputs.kappa, inputs.reward_bound, inputs.c_mu);
    let a = 64.0 * d * kappa * kappa * r * r / (c_mu * c_mu) * h;
    let log_term = (a * (PI * (d / (6.0 * inputs.delta)).sqrt() + 1.0)).ln();
    let tail = c_mu / (4.0 * kappa * r) * ((inputs.k as f64 + 1.0) / (d * h)).sqrt();
    let inner = log_term + tail;
    Ok(a * inner * inner)
}

pub fn complexity_report(inputs: TheoryInputs) -> Result<ComplexityReport> {
    Ok(ComplexityReport {
        h_eps: complexity_h(inputs.k, inputs.k_mu, inputs.epsilon, inputs.delta_min)?,
        bound_tau: stopping_time_bound(&inputs)?,
        inputs,
    })
}

/// Right-hand side of `τ ≤ H_ε·C_τ² + K + 1`.
pub fn stopping_time_certificate(h_eps: f64, c_tau: f64, k: usize) -> f64 {
    h_eps * c_tau * c_tau + k as f64 + 1.0
}

fn validate(i: &TheoryInputs) -> Result<()> {
    let positive = [
        ("epsilon", i.epsilon),
        ("kappa", i.kappa),
        ("R", i.reward_bound),
        ("c_mu", i.c_mu),
        ("k_mu", i.k_mu),
    ];
    if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument(format!("{name} must be finite and > 0, got {v}")));
    }
    if i.d == 0 || i.k == 0 {
        return Err(Error::InvalidArgument("d and K must be >= 1".into()));
    }
    let delta_cap = (i.d as f64 / std::f64::consts::E).min(1.0);
    if !(i.delta > 0.0 && i.delta < delta_cap) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, min(1, d/e)), got {}",
            i.delta
        )));
    }
    if !(i.delta_min >= 0.0) {
        return Err(Error::InvalidArgument("delta_min must be >= 0".into()));
    }
    Ok(())
}
