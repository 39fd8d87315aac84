//! Hitting-time law of the delta-dimensional Bessel process at level c,
//! started from x0 in [0, c): exact series evaluation, closed-form moments,
//! moment/tail envelopes and every explicit right/left tail bound.

mod bounds;
mod envelopes;
mod series;

pub use bounds::{
    laplace_lower_bound, left_tail_lower, left_tail_lower_alldelta, left_tail_upper,
    left_tail_upper_kent, right_tail_lower, right_tail_lower_highdim, right_tail_lower_refined,
    right_tail_upper,
};
pub use envelopes::{
    central_moment_envelope, f_envelope, moment_envelope, tail_envelope, FEnvelope,
};
pub use series::{
    density, exact_tail, laplace_transform, laplace_transform_bessel_ratio, mean_tail_integral,
};
pub(crate) use series::kent_truncation;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expmix::ExpMixModel;
use crate::specfun::{Order, ZeroTable};

/// Problem instance: index nu > -1 (dimension delta = 2(nu+1)), level c > 0,
/// start x0 in [0, c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BesselHitParamsRaw")]
pub struct BesselHitParams {
    nu: Order,
    c: f64,
    x0: f64,
}

#[derive(Deserialize)]
struct BesselHitParamsRaw {
    nu: f64,
    c: f64,
    x0: f64,
}

impl TryFrom<BesselHitParamsRaw> for BesselHitParams {
    type Error = Error;
    fn try_from(raw: BesselHitParamsRaw) -> Result<BesselHitParams> {
        BesselHitParams::new(Order::new(raw.nu)?, raw.c, raw.x0)
    }
}

impl BesselHitParams {
    pub fn new(nu: Order, c: f64, x0: f64) -> Result<BesselHitParams> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::domain(format!("level must satisfy c > 0, got {c}")));
        }
        if !(0.0..).contains(&x0) || x0 >= c {
            return Err(Error::domain(format!(
                "start must satisfy 0 <= x0 < c, got x0={x0}, c={c}"
            )));
        }
        Ok(BesselHitParams { nu, c, x0 })
    }

    pub fn nu(&self) -> Order {
        self.nu
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Dimension delta = 2(nu + 1) > 0.
    pub fn delta(&self) -> f64 {
        2.0 * (self.nu.get() + 1.0)
    }

    /// z0 = x0^2.
    pub fn z0(&self) -> f64 {
        self.x0 * self.x0
    }

    /// Mixing probability alpha = z0/c^2 in [0, 1).
    pub fn alpha(&self) -> f64 {
        (self.x0 / self.c) * (self.x0 / self.c)
    }

    /// E tau = (c^2 - z0)/delta.
    pub fn mean_hitting_time(&self) -> f64 {
        (self.c * self.c - self.z0()) / self.delta()
    }

    /// Var tau = (1-alpha)(1+alpha) sum a_n^2 with a_n = 2c^2/j_n^2; the zero
    /// sums collapse to the closed form c^4 (1-alpha^2)/(4(nu+1)^2(nu+2)).
    pub fn variance(&self) -> f64 {
        let a = self.alpha();
        (1.0 - a) * (1.0 + a) * 4.0 * self.c.powi(4) * sum_inv_j4(self.nu)
    }

    /// Exponential rate of the n-th convolution factor, lambda_n = j_n^2/(2c^2).
    pub(crate) fn rate(&self, table: &ZeroTable, n: usize) -> f64 {
        let j = table.zero(n);
        j * j / (2.0 * self.c * self.c)
    }

    pub(crate) fn check_table(&self, table: &ZeroTable) -> Result<()> {
        if (table.nu() - self.nu.get()).abs() > 1e-12 {
            return Err(Error::precondition(format!(
                "zero table order {} does not match parameter order {}",
                table.nu(),
                self.nu
            )));
        }
        Ok(())
    }

    /// Truncated Kent representation: weights a_n = 2c^2/j_{nu,n}^2 for
    /// n <= N, mixing probability alpha = z0/c^2, and exact remainder sums
    /// from the closed-form zero identities.
    pub fn to_expmix(&self, table: &ZeroTable, n: usize) -> Result<ExpMixModel> {
        self.check_table(table)?;
        if n == 0 {
            return Err(Error::precondition("to_expmix needs N >= 1"));
        }
        if table.len() < n {
            return Err(Error::InsufficientZeros {
                needed: n,
                have: table.len(),
            });
        }
        let c2 = self.c * self.c;
        let mut weights = Vec::with_capacity(n);
        let mut part_j2 = 0.0_f64;
        let mut comp2 = 0.0_f64;
        let mut part_j4 = 0.0_f64;
        let mut comp4 = 0.0_f64;
        for &j in &table.zeros()[..n] {
            let inv2 = 1.0 / (j * j);
            weights.push(2.0 * c2 * inv2);
            // Kahan updates: the partial sums run over up to 1e4 terms.
            let t2 = inv2 - comp2;
            let s2 = part_j2 + t2;
            comp2 = (s2 - part_j2) - t2;
            part_j2 = s2;
            let t4 = inv2 * inv2 - comp4;
            let s4 = part_j4 + t4;
            comp4 = (s4 - part_j4) - t4;
            part_j4 = s4;
        }
        let tail_sum = (2.0 * c2 * (sum_inv_j2(self.nu) - part_j2)).max(0.0);
        let tail_sum_sq = (4.0 * c2 * c2 * (sum_inv_j4(self.nu) - part_j4)).max(0.0);
        ExpMixModel::with_tail(self.alpha(), weights, tail_sum, tail_sum_sq)
    }
}

impl std::fmt::Display for BesselHitParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(nu={}, c={}, x0={})", self.nu, self.c, self.x0)
    }
}

/// sum_n 1/j_{nu,n}^2 = 1/(4(nu+1)).
pub fn sum_inv_j2(nu: Order) -> f64 {
    1.0 / (4.0 * (nu.get() + 1.0))
}

/// sum_n 1/j_{nu,n}^4 = 1/(16(nu+1)^2(nu+2)).
pub fn sum_inv_j4(nu: Order) -> f64 {
    let g = nu.get() + 1.0;
    1.0 / (16.0 * g * g * (nu.get() + 2.0))
}

/// How a tail probability was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    CtSeries,
    KentSeries,
    MonteCarloFallback,
}

impl std::fmt::Display for TailMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TailMethod::CtSeries => "ct_series",
            TailMethod::KentSeries => "kent_series",
            TailMethod::MonteCarloFallback => "monte_carlo_fallback",
        };
        f.write_str(s)
    }
}

/// A probability with an explicit truncation-error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailValue {
    pub value: f64,
    pub trunc_error: f64,
    pub terms_used: usize,
    pub method: TailMethod,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(nu: f64, c: f64, x0: f64) -> BesselHitParams {
        BesselHitParams::new(Order::new(nu).unwrap(), c, x0).unwrap()
    }

    #[test]
    fn mean_examples() {
        assert_relative_eq!(params(0.0, 1.0, 0.0).mean_hitting_time(), 0.5);
        assert_relative_eq!(params(0.5, 1.0, 0.0).mean_hitting_time(), 1.0 / 3.0);
        // x0 -> c drives the mean to 0.
        assert!(params(0.0, 1.0, 1.0 - 1e-9).mean_hitting_time() < 1e-8);
    }

    #[test]
    fn zero_sum_closed_forms() {
        assert_relative_eq!(sum_inv_j2(Order::new(0.0).unwrap()), 0.25);
        assert_relative_eq!(sum_inv_j2(Order::new(-0.5).unwrap()), 0.5);
        assert_relative_eq!(sum_inv_j4(Order::new(0.0).unwrap()), 1.0 / 32.0);
    }

    #[test]
    fn sum_inv_j2_matches_explicit_half_order_series() {
        // j_{-1/2,n} = (n-1/2) pi: sum 1/((n-1/2)^2 pi^2) = 1/2.
        let direct: f64 = (1..200_000)
            .map(|n| {
                let j = (n as f64 - 0.5) * std::f64::consts::PI;
                1.0 / (j * j)
            })
            .sum();
        assert!((direct - 0.5).abs() < 1e-5);
        assert_relative_eq!(sum_inv_j2(Order::new(-0.5).unwrap()), 0.5);
    }

    #[test]
    fn variance_examples() {
        assert_relative_eq!(params(0.0, 1.0, 0.0).variance(), 0.125);
        assert_relative_eq!(params(0.0, 2.0, 0.0).variance(), 2.0);
        assert!(params(0.0, 1.0, 1.0 - 1e-12).variance() < 1e-10);
    }

    #[test]
    fn to_expmix_mean_is_exact() {
        let table = ZeroTable::compute(Order::new(0.25).unwrap(), 30).unwrap();
        let p = params(0.25, 1.3, 0.4);
        for n in [1, 5, 30] {
            let m = p.to_expmix(&table, n).unwrap();
            assert_relative_eq!(m.mean(), p.mean_hitting_time(), max_relative = 1e-12);
        }
    }

    #[test]
    fn to_expmix_half_order_weights() {
        // nu = -1/2, c = 1: weights 2/j_n^2 = (8/pi^2, 8/(9 pi^2)).
        let table = ZeroTable::compute(Order::new(-0.5).unwrap(), 2).unwrap();
        let m = params(-0.5, 1.0, 0.0).to_expmix(&table, 2).unwrap();
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        assert_relative_eq!(m.weights()[0], 8.0 / pi2, max_relative = 1e-9);
        assert_relative_eq!(m.weights()[1], 8.0 / (9.0 * pi2), max_relative = 1e-9);
    }

    #[test]
    fn to_expmix_l2_matches_variance() {
        let table = ZeroTable::compute(Order::new(1.0).unwrap(), 50).unwrap();
        let p = params(1.0, 2.0, 1.0);
        let m = p.to_expmix(&table, 50).unwrap();
        assert_relative_eq!(
            m.central_l2(),
            p.variance().sqrt(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn params_validation() {
        let nu = Order::new(0.0).unwrap();
        assert!(BesselHitParams::new(nu, 0.0, 0.0).is_err());
        assert!(BesselHitParams::new(nu, 1.0, 1.0).is_err());
        assert!(BesselHitParams::new(nu, 1.0, -0.1).is_err());
        assert!(BesselHitParams::new(nu, 1.0, 0.999).is_ok());
    }

    #[test]
    fn params_json_roundtrip() {
        let p = params(0.5, 2.0, 0.3);
        let s = serde_json::to_string(&p).unwrap();
        let back: BesselHitParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        assert!(serde_json::from_str::<BesselHitParams>(r#"{"nu":0.0,"c":1.0,"x0":2.0}"#).is_err());
    }

    #[test]
    fn table_mismatch_is_rejected() {
        let table = ZeroTable::compute(Order::new(0.5).unwrap(), 5).unwrap();
        assert!(params(0.0, 1.0, 0.0).to_expmix(&table, 5).is_err());
    }
}
