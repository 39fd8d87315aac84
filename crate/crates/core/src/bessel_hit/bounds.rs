//! Every explicit right/left tail bound for the hitting time, plus the
//! Laplace-transform lower bound. Right-tail bounds apply at t = (1+eta) E tau,
//! the left-tail upper bounds at t = (1-eta) E tau; the left-tail lower bounds
//! carry their own evaluation time and return it alongside the bound.

use crate::error::{Error, Result};
use crate::specfun::ZeroTable;

use super::BesselHitParams;

fn check_eta_pos(eta: f64) -> Result<()> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::domain(format!("eta must be >= 0, got {eta}")));
    }
    Ok(())
}

fn check_eta_unit(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain(format!("eta must be in (0,1), got {eta}")));
    }
    Ok(())
}

/// P(tau >= (1+eta) E tau) <= exp(-delta (1-alpha) eta^2/(8(1+eta))).
pub fn right_tail_upper(params: &BesselHitParams, eta: f64) -> Result<f64> {
    check_eta_pos(eta)?;
    let d = params.delta();
    let frac = 1.0 - params.alpha();
    Ok((-d * frac * eta * eta / (8.0 * (1.0 + eta))).exp())
}

/// P(tau >= (1+eta) E tau) >= (1-alpha) exp(-(j_1^2/(2 delta)) (1-alpha) (1+eta)).
pub fn right_tail_lower(params: &BesselHitParams, table: &ZeroTable, eta: f64) -> Result<f64> {
    check_eta_pos(eta)?;
    params.check_table(table)?;
    let j1 = table.first();
    let frac = 1.0 - params.alpha();
    Ok(frac * (-(j1 * j1 / (2.0 * params.delta())) * frac * (1.0 + eta)).exp())
}

/// Zero-free variant of the lower bound valid for delta >= 12.4, obtained by
/// bounding j_1 from above.
pub fn right_tail_lower_highdim(params: &BesselHitParams, eta: f64) -> Result<f64> {
    check_eta_pos(eta)?;
    let d = params.delta();
    if d < 12.4 {
        return Err(Error::domain(format!(
            "high-dimension lower bound needs delta >= 12.4, got {d}"
        )));
    }
    let frac = 1.0 - params.alpha();
    let denom = 1.0 - 3.0 * 2.0_f64.powf(2.0 / 3.0) / (d - 2.0).powf(2.0 / 3.0);
    let rate = (d - 4.0 + 4.0 / d) / (8.0 * denom * denom);
    Ok(frac * (-rate * frac * (1.0 + eta)).exp())
}

/// Conditioning on the first positive convolution factor:
/// P(tau >= (1+eta) E tau) >= exp(-sum_n alpha^{n-1} (j_n^2/(2 delta)) (1-alpha)^2 (1+eta)).
pub fn right_tail_lower_refined(
    params: &BesselHitParams,
    table: &ZeroTable,
    eta: f64,
) -> Result<f64> {
    check_eta_pos(eta)?;
    params.check_table(table)?;
    let alpha = params.alpha();
    let frac = 1.0 - alpha;
    let scale = frac * frac * (1.0 + eta) / (2.0 * params.delta());
    let mut exponent = 0.0_f64;
    let mut pw = 1.0_f64;
    let mut converged = alpha == 0.0;
    for &j in table.zeros() {
        exponent += pw * j * j * scale;
        pw *= alpha;
        if pw * j * j * scale < 1e-15 * exponent {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::InsufficientZeros {
            needed: table.len() * 2,
            have: table.len(),
        });
    }
    Ok((-exponent).exp())
}

/// P(tau <= (1-eta) E tau) <= exp(-(delta/8)(1-alpha) eta^2/(1-eta)).
pub fn left_tail_upper(params: &BesselHitParams, eta: f64) -> Result<f64> {
    check_eta_unit(eta)?;
    let frac = 1.0 - params.alpha();
    Ok((-(params.delta() / 8.0) * frac * eta * eta / (1.0 - eta)).exp())
}

/// Same bound evaluated at a time 0 < t < E tau; used by the series
/// evaluation to certify "the tail is still 1" at small t.
pub(crate) fn left_tail_upper_at_time(params: &BesselHitParams, t: f64) -> Option<f64> {
    let mean = params.mean_hitting_time();
    if !(t > 0.0 && t < mean) {
        return None;
    }
    let eta = 1.0 - t / mean;
    left_tail_upper(params, eta).ok()
}

/// Sharper upper bound combining the martingale bound with the first Kent
/// factor: min of `left_tail_upper` and
/// 1 - (1-alpha) exp(-(j_1^2/delta)(1-alpha)(1-eta)/2).
pub fn left_tail_upper_kent(
    params: &BesselHitParams,
    table: &ZeroTable,
    eta: f64,
) -> Result<f64> {
    check_eta_unit(eta)?;
    params.check_table(table)?;
    let j1 = table.first();
    let frac = 1.0 - params.alpha();
    let kent = 1.0 - frac * (-(j1 * j1 / params.delta()) * frac * (1.0 - eta) / 2.0).exp();
    Ok(left_tail_upper(params, eta)?.min(kent))
}

/// For delta > 1:
/// P(tau <= 2c(c-x0)(1-eta)/(delta-1)) >= (1/3) exp(-2(delta-1)((c-x0)/c)/(1-eta)).
/// Returns (evaluation time, bound).
pub fn left_tail_lower(params: &BesselHitParams, eta: f64) -> Result<(f64, f64)> {
    check_eta_unit(eta)?;
    let d = params.delta();
    if d <= 1.0 {
        return Err(Error::domain(format!(
            "left-tail lower bound needs delta > 1, got {d}"
        )));
    }
    let gap = params.c() - params.x0();
    let t = 2.0 * params.c() * gap * (1.0 - eta) / (d - 1.0);
    let bound = (1.0 / 3.0) * (-2.0 * (d - 1.0) * (gap / params.c()) / (1.0 - eta)).exp();
    Ok((t, bound))
}

/// For any delta > 0:
/// P(tau <= 5c(c-x0)(1-eta)/delta) >=
///   (1/3) exp(-2 delta ((c-x0)/c)/(1-eta))
///   { 1 - (1-alpha) exp(-(j_1^2/(2 delta))((c-x0)/c)(1-eta)) }.
/// Returns (evaluation time, bound).
pub fn left_tail_lower_alldelta(
    params: &BesselHitParams,
    table: &ZeroTable,
    eta: f64,
) -> Result<(f64, f64)> {
    check_eta_unit(eta)?;
    params.check_table(table)?;
    let d = params.delta();
    let gap = params.c() - params.x0();
    let ratio = gap / params.c();
    let j1 = table.first();
    let t = 5.0 * params.c() * gap * (1.0 - eta) / d;
    let kent = 1.0
        - (1.0 - params.alpha()) * (-(j1 * j1 / (2.0 * d)) * ratio * (1.0 - eta)).exp();
    let bound = (1.0 / 3.0) * (-2.0 * d * ratio / (1.0 - eta)).exp() * kent;
    Ok((t, bound))
}

/// For delta > 1:
/// E exp(-u tau) >= exp(-(sqrt(((delta-1)/(2c))^2 + 2u) - (delta-1)/(2c))(c - x0)).
pub fn laplace_lower_bound(params: &BesselHitParams, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::domain(format!("needs u >= 0, got {u}")));
    }
    let d = params.delta();
    if d <= 1.0 {
        return Err(Error::domain(format!(
            "Laplace lower bound needs delta > 1, got {d}"
        )));
    }
    let drift = (d - 1.0) / (2.0 * params.c());
    let lambda = (drift * drift + 2.0 * u).sqrt() - drift;
    Ok((-lambda * (params.c() - params.x0())).exp())
}
