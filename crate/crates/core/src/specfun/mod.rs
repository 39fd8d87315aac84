//! Self-contained special functions: gamma, Bessel J and I of real order
//! nu > -1, and certified computation of the positive zeros j_{nu,n}.

mod bessel;
pub mod cache;
mod gamma;
mod zeros;

pub use bessel::{bessel_i, bessel_j};
pub use gamma::{gamma, ln_gamma};
pub use zeros::{
    mcmahon_tail_inv_j2, mcmahon_tail_inv_j4, zero_ratio_check, ZeroTable, DEFAULT_ZERO_ACCURACY,
};

pub(crate) use bessel::{bessel_i_raw, bessel_j_raw, scaled_bessel_j_raw};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Real Bessel order, restricted to nu > -1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Order(f64);

impl Order {
    pub fn new(nu: f64) -> Result<Order> {
        if !nu.is_finite() || nu <= -1.0 {
            return Err(Error::domain(format!("order must satisfy nu > -1, got {nu}")));
        }
        Ok(Order(nu))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Order raised by one; always valid.
    pub fn next(self) -> Order {
        Order(self.0 + 1.0)
    }
}

impl TryFrom<f64> for Order {
    type Error = Error;
    fn try_from(v: f64) -> Result<Order> {
        Order::new(v)
    }
}

impl From<Order> for f64 {
    fn from(o: Order) -> f64 {
        o.get()
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
