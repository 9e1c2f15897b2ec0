use rand::Rng;
use statrs::function::beta::ln_beta;

use super::{argmax_set, break_tie, PolicyParams};
use crate::error::{Error, Result};
use crate::model::{validate_placement, DataCenter, PmId, VmId};

const X_SLACK: f64 = 1e-9;

/// EcoCloud acceptance score `u^p (T_a - u) / M_p` with
/// `M_p = p^p / (p+1)^(p+1) * T_a^(p+1)`. Zero above `T_a`; the maximum of
/// exactly 1 sits at `u = p T_a / (p + 1)`.
pub fn ecocloud_score(u: f64, params: &PolicyParams) -> Result<f64> {
    params.validate()?;
    if !(u >= -X_SLACK) || !u.is_finite() {
        return Err(Error::Spec(format!("utilization must be >= 0, got {u}")));
    }
    let u = u.max(0.0);
    let t_a = params.t_a;
    if u > t_a {
        return Ok(0.0);
    }
    let p = params.p as i32;
    let pf = f64::from(params.p);
    let m_p = pf.powi(p) / (pf + 1.0).powi(p + 1) * t_a.powi(p + 1);
    Ok((u.powi(p) * (t_a - u) / m_p).clamp(0.0, 1.0))
}

/// Beta density `x^(alpha-1) (1-x)^(beta-1) / B(alpha, beta)`.
pub fn beta_density(x: f64, alpha: f64, beta: f64) -> f64 {
    let ln_norm = ln_beta(alpha, beta);
    if x > 0.0 && x < 1.0 {
        ((alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln() - ln_norm).exp()
    } else {
        x.powf(alpha - 1.0) * (1.0 - x).powf(beta - 1.0) * (-ln_norm).exp()
    }
}

/// NFV host score `1 - f(x; alpha, beta) / 3`, clamped to `[0, 1]`.
pub fn nfv_score(x: f64, params: &PolicyParams) -> Result<f64> {
    if !(params.alpha > 0.0 && params.beta > 0.0) {
        return Err(Error::Spec(format!(
            "Beta shape parameters must be > 0, got alpha={} beta={}",
            params.alpha, params.beta
        )));
    }
    if !(-X_SLACK..=1.0 + X_SLACK).contains(&x) {
        return Err(Error::Spec(format!(
            "utilization must lie in [0, 1], got {x}"
        )));
    }
    let x = x.clamp(0.0, 1.0);
    let f = beta_density(x, params.alpha, params.beta);
    let score = 1.0 - f / 3.0;
    Ok(if score.is_nan() {
        0.0
    } else {
        score.clamp(0.0, 1.0)
    })
}

/// Scores every feasible candidate at the CPU utilization it would have after
/// receiving `vm` and returns the best one.
pub fn probabilistic_place<F, R>(
    dc: &DataCenter,
    vm: VmId,
    candidates: &[PmId],
    score_fn: F,
    params: &PolicyParams,
    rng: &mut R,
) -> Result<PmId>
where
    F: Fn(f64, &PolicyParams) -> Result<f64>,
    R: Rng + ?Sized,
{
    let mut scored = Vec::with_capacity(candidates.len());
    for &pm in candidates {
        if validate_placement(dc.vm(vm), dc.pm(pm)) {
            scored.push((pm, score_fn(dc.cpu_util_with(pm, vm), params)?));
        }
    }
    if scored.is_empty() {
        return Err(Error::PlacementFailed { vm });
    }
    Ok(break_tie(&argmax_set(&scored), params.tie_break, rng))
}
