//! The law S = sum_n a_n kappa_n theta_n: a convolution of elementary
//! mixtures of exponentials. kappa_n are independent Bernoulli(1 - alpha),
//! theta_n independent Exp(1), and the weights a_n are non-increasing.
//!
//! Models are truncated to N stored weights plus analytic remainder sums;
//! sampling adds the remainder's mean deterministically, so the sampled law
//! is `S_N + (1-alpha) tail_sum` and its mean is exact.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative cutoff for the geometric envelope sums.
const ENVELOPE_TRUNC: f64 = 1e-15;
/// Relative cutoff for the tail-envelope geometric series.
const TAIL_SUM_TRUNC: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExpMixModelRaw")]
pub struct ExpMixModel {
    alpha: f64,
    weights: Vec<f64>,
    tail_sum: f64,
    tail_sum_sq: f64,
}

#[derive(Deserialize)]
struct ExpMixModelRaw {
    alpha: f64,
    weights: Vec<f64>,
    tail_sum: f64,
    tail_sum_sq: f64,
}

impl TryFrom<ExpMixModelRaw> for ExpMixModel {
    type Error = Error;
    fn try_from(raw: ExpMixModelRaw) -> Result<ExpMixModel> {
        ExpMixModel::with_tail(raw.alpha, raw.weights, raw.tail_sum, raw.tail_sum_sq)
    }
}

impl ExpMixModel {
    pub fn new(alpha: f64, weights: Vec<f64>) -> Result<ExpMixModel> {
        ExpMixModel::with_tail(alpha, weights, 0.0, 0.0)
    }

    pub fn with_tail(
        alpha: f64,
        weights: Vec<f64>,
        tail_sum: f64,
        tail_sum_sq: f64,
    ) -> Result<ExpMixModel> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::domain(format!("alpha must be in [0,1), got {alpha}")));
        }
        for w in weights.windows(2) {
            if !(w[1] <= w[0]) {
                return Err(Error::domain("weights must be non-increasing".to_string()));
            }
        }
        if let Some(&last) = weights.last() {
            if !(last >= 0.0) || !weights[0].is_finite() {
                return Err(Error::domain("weights must be finite and >= 0".to_string()));
            }
        }
        if !(tail_sum >= 0.0) || !(tail_sum_sq >= 0.0) {
            return Err(Error::domain("tail sums must be >= 0".to_string()));
        }
        if tail_sum > 0.0 {
            match weights.last() {
                None => {
                    return Err(Error::domain(
                        "a remainder needs at least one stored weight to bound it".to_string(),
                    ))
                }
                Some(&last) => {
                    if last == 0.0 && weights[0] == 0.0 {
                        return Err(Error::domain(
                            "tail_sum must be 0 when all weights are 0".to_string(),
                        ));
                    }
                    if tail_sum_sq > last * tail_sum * (1.0 + 1e-9) + f64::MIN_POSITIVE {
                        return Err(Error::domain(
                            "tail_sum_sq exceeds a_N * tail_sum".to_string(),
                        ));
                    }
                }
            }
        }
        Ok(ExpMixModel {
            alpha,
            weights,
            tail_sum,
            tail_sum_sq,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tail_sum(&self) -> f64 {
        self.tail_sum
    }

    pub fn tail_sum_sq(&self) -> f64 {
        self.tail_sum_sq
    }

    fn weight_sum(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.tail_sum
    }

    fn weight_sum_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>() + self.tail_sum_sq
    }

    /// E S = (1 - alpha) sum a_n, remainder included.
    pub fn mean(&self) -> f64 {
        (1.0 - self.alpha) * self.weight_sum()
    }

    /// || S - E S ||_2 = sqrt((1-alpha)(1+alpha) sum a_n^2), exactly.
    pub fn central_l2(&self) -> f64 {
        ((1.0 - self.alpha) * (1.0 + self.alpha) * self.weight_sum_sq()).sqrt()
    }

    /// (sum_n alpha^{n-1} a_n^p)^{1/p}, truncated once terms stop mattering.
    fn geometric_p_sum(&self, p: f64) -> f64 {
        let a1 = match self.weights.first() {
            Some(&a) => a,
            None => return 0.0,
        };
        if a1 == 0.0 {
            return 0.0;
        }
        let a1p = a1.powf(p);
        let mut pw = 1.0;
        let mut acc = 0.0;
        for &a in &self.weights {
            acc += pw * a.powf(p);
            pw *= self.alpha;
            if pw * a1p < ENVELOPE_TRUNC * acc {
                break;
            }
        }
        acc.powf(1.0 / p)
    }

    /// Envelope for || S - E S ||_p:
    /// p (1-alpha)^{1/p} (sum alpha^{n-1} a_n^p)^{1/p}
    ///   + sqrt(p) sqrt((1-alpha) sum a_n^2).
    pub fn central_moment_envelope(&self, p: f64) -> Result<MomentEstimate> {
        check_p(p)?;
        let one_m = 1.0 - self.alpha;
        let value = p * one_m.powf(1.0 / p) * self.geometric_p_sum(p)
            + p.sqrt() * (one_m * self.weight_sum_sq()).sqrt();
        Ok(MomentEstimate {
            p,
            value,
            form: EnvelopeForm::MixCentral,
        })
    }

    /// Envelope for || S ||_p:
    /// p (1-alpha)^{1/p} (sum alpha^{n-1} a_n^p)^{1/p} + (1-alpha) sum a_n.
    pub fn moment_envelope(&self, p: f64) -> Result<MomentEstimate> {
        check_p(p)?;
        let one_m = 1.0 - self.alpha;
        let value = p * one_m.powf(1.0 / p) * self.geometric_p_sum(p) + one_m * self.weight_sum();
        Ok(MomentEstimate {
            p,
            value,
            form: EnvelopeForm::MixMoment,
        })
    }

    /// Envelope for || sigma ||_p with sigma = a_1 theta_1 + sum_{n>1} a_n kappa_n theta_n:
    /// p a_1 + (1-alpha) sum_{n>1} a_n.
    pub fn sigma_moment_envelope(&self, p: f64) -> Result<MomentEstimate> {
        check_p(p)?;
        let a1 = *self
            .weights
            .first()
            .ok_or_else(|| Error::precondition("sigma envelope needs at least one weight"))?;
        let rest: f64 = self.weights[1..].iter().sum::<f64>() + self.tail_sum;
        Ok(MomentEstimate {
            p,
            value: p * a1 + (1.0 - self.alpha) * rest,
            form: EnvelopeForm::MixSigma,
        })
    }

    /// p_n(t) solving t = p_n(t) a_n + (1-alpha) sum_{k>n} a_k; +infinity when
    /// a_n = 0 (including indices past the stored weights). May be negative
    /// for small t; tail operations apply the t >= 2 mean guard.
    pub fn p_n_of_t(&self, t: f64, n: usize) -> f64 {
        assert!(n >= 1, "index is 1-based");
        if n > self.weights.len() || self.weights[n - 1] == 0.0 {
            return f64::INFINITY;
        }
        let after: f64 = self.weights[n..].iter().sum::<f64>() + self.tail_sum;
        (t - (1.0 - self.alpha) * after) / self.weights[n - 1]
    }

    /// (1-alpha) { sum_{n: p_n(t)<2} alpha^{n-1}
    ///           + sum_{n: p_n(t)>=2} alpha^{n-1} e^{-beta p_n(t)} }.
    pub fn tail_envelope_sum(&self, t: f64, beta: f64) -> Result<f64> {
        if !(beta >= 1.0) {
            return Err(Error::precondition(format!("beta must be >= 1, got {beta}")));
        }
        let guard = 2.0 * self.mean();
        if !(t >= guard) {
            return Err(Error::precondition(format!(
                "tail envelope needs t >= 2 mean = {guard}, got {t}"
            )));
        }
        // Suffix sums of the weights for p_n in O(1) per index.
        let n_stored = self.weights.len();
        let mut suffix = vec![self.tail_sum; n_stored + 1];
        for i in (0..n_stored).rev() {
            suffix[i] = suffix[i + 1] + self.weights[i];
        }
        let one_m = 1.0 - self.alpha;
        let mut acc = 0.0;
        let mut pw = 1.0;
        for n in 1..=n_stored {
            let a = self.weights[n - 1];
            if a > 0.0 {
                let p_n = (t - one_m * suffix[n]) / a;
                acc += if p_n < 2.0 { pw } else { pw * (-beta * p_n).exp() };
            }
            pw *= self.alpha;
            // Remaining terms are bounded by pw/(1-alpha).
            if pw <= TAIL_SUM_TRUNC * acc.max(f64::MIN_POSITIVE) * one_m {
                break;
            }
        }
        Ok(one_m * acc)
    }

    /// One draw of sum_{n<=N} a_n kappa_n theta_n plus the deterministic
    /// remainder mean. A single uniform per index drives both the Bernoulli
    /// and, on success, the exponential.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut s = (1.0 - self.alpha) * self.tail_sum;
        for &a in &self.weights {
            let u: f64 = rng.random();
            if u >= self.alpha {
                let v = (u - self.alpha) / (1.0 - self.alpha);
                s += a * -(-v).ln_1p();
            }
        }
        s
    }

    /// One draw of sigma = a_1 theta_1 + sum_{n>1} a_n kappa_n theta_n
    /// (the first factor is unconditionally exponential).
    pub fn sample_sigma<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a1 = match self.weights.first() {
            Some(&a) => a,
            None => return 0.0,
        };
        let u: f64 = rng.random();
        let mut s = a1 * -(-u).ln_1p() + (1.0 - self.alpha) * self.tail_sum;
        for &a in &self.weights[1..] {
            let u: f64 = rng.random();
            if u >= self.alpha {
                let v = (u - self.alpha) / (1.0 - self.alpha);
                s += a * -(-v).ln_1p();
            }
        }
        s
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 2.0) {
        return Err(Error::domain(format!("moment index must be p >= 2, got {p}")));
    }
    Ok(())
}

/// Which formula produced a moment estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeForm {
    MixCentral,
    MixMoment,
    MixSigma,
    CentralHighAlpha,
    CentralMidAlpha,
    CentralLowAlpha,
    MomentHighAlpha,
    MomentMidAlpha,
    MomentLowAlpha,
}

/// An envelope value for a p-norm, in time units (the p-th root is taken).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub p: f64,
    pub value: f64,
    pub form: EnvelopeForm,
}

/// Monte Carlo moment estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McMoment {
    /// Estimate of the p-norm (p-th root already taken).
    pub value: f64,
    /// Delta-method standard error of `value`.
    pub stderr: f64,
}

/// Monte Carlo estimate of || S ||_p.
pub fn brute_force_moment<R: Rng + ?Sized>(
    model: &ExpMixModel,
    p: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<McMoment> {
    brute_force(model, p, n_samples, rng, None)
}

/// Monte Carlo estimate of || S - E S ||_p, centered at the analytic mean.
pub fn brute_force_central_moment<R: Rng + ?Sized>(
    model: &ExpMixModel,
    p: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<McMoment> {
    brute_force(model, p, n_samples, rng, Some(model.mean()))
}

fn brute_force<R: Rng + ?Sized>(
    model: &ExpMixModel,
    p: f64,
    n_samples: usize,
    rng: &mut R,
    center: Option<f64>,
) -> Result<McMoment> {
    if n_samples < 10_000 {
        return Err(Error::precondition("brute force needs n_samples >= 1e4"));
    }
    if !(p >= 1.0) {
        return Err(Error::domain("brute force needs p >= 1".to_string()));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_samples {
        let x = match center {
            None => model.sample(rng),
            Some(c) => (model.sample(rng) - c).abs(),
        };
        let xp = x.powf(p);
        sum += xp;
        sum_sq += xp * xp;
    }
    Ok(norm_from_power_sums(sum, sum_sq, n_samples, p))
}

/// p-norm estimate (p-th root taken) from stored draws, optionally centered.
pub fn moment_from_samples(xs: &[f64], p: f64, center: Option<f64>) -> Result<McMoment> {
    if xs.is_empty() {
        return Err(Error::precondition("moment_from_samples needs draws"));
    }
    if !(p >= 1.0) {
        return Err(Error::domain("needs p >= 1".to_string()));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &x in xs {
        let v = match center {
            None => x,
            Some(c) => (x - c).abs(),
        };
        let xp = v.powf(p);
        sum += xp;
        sum_sq += xp * xp;
    }
    Ok(norm_from_power_sums(sum, sum_sq, xs.len(), p))
}

fn norm_from_power_sums(sum: f64, sum_sq: f64, n_samples: usize, p: f64) -> McMoment {
    let n = n_samples as f64;
    let m = sum / n;
    let var = (sum_sq / n - m * m).max(0.0) / n;
    let value = m.powf(1.0 / p);
    // d(m^{1/p})/dm = m^{1/p - 1}/p
    let stderr = var.sqrt() * m.powf(1.0 / p - 1.0) / p;
    McMoment { value, stderr }
}
