//! Moment and tail envelopes: closed-form expressions comparable to the true
//! moments/tails up to universal constants. The moment envelopes split into
//! three regimes by how much of the geometric zero-sum survives the mixing
//! probability: alpha^{nu+2} >= 1/2, (alpha^{nu+2} < 1/2, alpha > 1/2), and
//! alpha <= 1/2. Dispatch uses exact comparisons with no hysteresis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expmix::{EnvelopeForm, MomentEstimate};
use crate::specfun::ZeroTable;

use super::BesselHitParams;

fn check_p(p: f64) -> Result<()> {
    if !(p >= 2.0) {
        return Err(Error::domain(format!("moment index must be p >= 2, got {p}")));
    }
    Ok(())
}

enum Regime {
    HighAlpha,
    MidAlpha,
    LowAlpha,
}

fn regime(alpha: f64, nu: f64) -> Regime {
    if alpha.powf(nu + 2.0) >= 0.5 {
        Regime::HighAlpha
    } else if alpha > 0.5 {
        Regime::MidAlpha
    } else {
        Regime::LowAlpha
    }
}

/// Envelope for ||tau - E tau||_p, in units of c^2.
pub fn central_moment_envelope(
    params: &BesselHitParams,
    table: &ZeroTable,
    p: f64,
) -> Result<MomentEstimate> {
    check_p(p)?;
    params.check_table(table)?;
    let nu = params.nu().get();
    let alpha = params.alpha();
    let one_m = 1.0 - alpha;
    let j1sq = table.first() * table.first();
    let sqrt_part = p.sqrt() * one_m.sqrt() / ((nu + 1.0) * (nu + 2.0).sqrt());
    let (geom, form) = match regime(alpha, nu) {
        Regime::HighAlpha => (
            1.0 / j1sq + (nu + 2.0).powf(-(2.0 - 1.0 / p)),
            EnvelopeForm::CentralHighAlpha,
        ),
        Regime::MidAlpha => (
            1.0 / j1sq + 1.0 / ((nu + 2.0).powi(2) * (1.0 / alpha).log2().powf(1.0 / p)),
            EnvelopeForm::CentralMidAlpha,
        ),
        Regime::LowAlpha => (1.0 / j1sq, EnvelopeForm::CentralLowAlpha),
    };
    let value = p * one_m.powf(1.0 / p) * geom + sqrt_part;
    Ok(MomentEstimate {
        p,
        value: value * params.c() * params.c(),
        form,
    })
}

/// Envelope for ||tau||_p, in units of c^2.
pub fn moment_envelope(
    params: &BesselHitParams,
    table: &ZeroTable,
    p: f64,
) -> Result<MomentEstimate> {
    check_p(p)?;
    params.check_table(table)?;
    let nu = params.nu().get();
    let alpha = params.alpha();
    let one_m = 1.0 - alpha;
    let j1sq = table.first() * table.first();
    let mean_part = one_m / (nu + 1.0);
    let (geom, form) = match regime(alpha, nu) {
        Regime::HighAlpha => (
            1.0 / j1sq + (nu + 2.0).powf(-(2.0 - 1.0 / p)),
            EnvelopeForm::MomentHighAlpha,
        ),
        // (nu+2)^2 here as well: the geometric sum over deep zeros behaves
        // the same for ordinary and central moments.
        Regime::MidAlpha => (
            1.0 / j1sq + 1.0 / ((nu + 2.0).powi(2) * (1.0 / alpha).log2().powf(1.0 / p)),
            EnvelopeForm::MomentMidAlpha,
        ),
        Regime::LowAlpha => (1.0 / j1sq, EnvelopeForm::MomentLowAlpha),
    };
    let value = p * one_m.powf(1.0 / p) * geom + mean_part;
    Ok(MomentEstimate {
        p,
        value: value * params.c() * params.c(),
        form,
    })
}

/// Tail envelope
/// (1-alpha) { e^{-j_1^2 t/(2c^2)} + sum_{n>=2} alpha^{n-1} e^{-(nu+n)^2 t/(2c^2)} },
/// truncated to 1e-12 relative (geometric times Gaussian decay).
pub fn tail_envelope(params: &BesselHitParams, table: &ZeroTable, t: f64) -> Result<f64> {
    params.check_table(table)?;
    if !(t > 0.0) {
        return Err(Error::domain(format!("tail envelope needs t > 0, got {t}")));
    }
    let nu = params.nu().get();
    let alpha = params.alpha();
    let c2 = params.c() * params.c();
    let j1 = table.first();
    let mut sum = (-j1 * j1 * t / (2.0 * c2)).exp();
    if alpha > 0.0 {
        let mut pw = alpha;
        let mut n = 2.0_f64;
        loop {
            let term = pw * (-(nu + n) * (nu + n) * t / (2.0 * c2)).exp();
            sum += term;
            // Ratio of consecutive terms decreases in n.
            let ratio = alpha * (-(2.0 * (nu + n) + 1.0) * t / (2.0 * c2)).exp();
            if term * ratio / (1.0 - ratio) < 1e-12 * sum {
                break;
            }
            pw *= alpha;
            n += 1.0;
        }
    }
    Ok((1.0 - alpha) * sum)
}

/// F(t) = (1-alpha)( e^{-j_1^2 t/(2c^2)}
///        + alpha e^{-(nu+2)^2 t/(2c^2)} min(ceil(1/ln(1/alpha)), n2(t)) )
/// with the indices n1(t) <= n2(t) that mark where the Gaussian factors start
/// to bite. At alpha = 0 the second term vanishes with its prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FEnvelope {
    pub value: f64,
    pub n1: usize,
    pub n2: usize,
}

pub fn f_envelope(params: &BesselHitParams, table: &ZeroTable, t: f64) -> Result<FEnvelope> {
    params.check_table(table)?;
    if !(t > 0.0) {
        return Err(Error::domain(format!("f envelope needs t > 0, got {t}")));
    }
    let nu = params.nu().get();
    let alpha = params.alpha();
    let c2 = params.c() * params.c();
    let rate = |n: usize| (nu + n as f64) * (nu + n as f64) * t / (2.0 * c2);

    let mut n1 = 2usize;
    while rate(n1) < 1.0 {
        n1 += 1;
    }
    let mut n2 = n1 + 1;
    while rate(n2) - rate(n1) < 1.0 {
        n2 += 1;
    }

    let j1 = table.first();
    let first = (-j1 * j1 * t / (2.0 * c2)).exp();
    let second = if alpha > 0.0 {
        let cap = (1.0 / (1.0 / alpha).ln()).ceil();
        alpha * (-rate(2)).exp() * cap.min(n2 as f64)
    } else {
        0.0
    };
    Ok(FEnvelope {
        value: (1.0 - alpha) * (first + second),
        n1,
        n2,
    })
}
