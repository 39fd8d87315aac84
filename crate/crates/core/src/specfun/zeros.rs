use crate::error::{Error, Result};

use super::bessel::bessel_j_raw;
use super::Order;

/// Default certified absolute accuracy per zero.
pub const DEFAULT_ZERO_ACCURACY: f64 = 1e-10;

/// Cached consecutive positive zeros of J_nu for one order.
///
/// Immutable after construction; shared freely across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroTable {
    nu: f64,
    zeros: Vec<f64>,
    accuracy: f64,
}

impl ZeroTable {
    /// Compute the first `n` zeros of J_nu at the default accuracy.
    pub fn compute(nu: Order, n: usize) -> Result<ZeroTable> {
        ZeroTable::compute_with_accuracy(nu, n, DEFAULT_ZERO_ACCURACY)
    }

    pub fn compute_with_accuracy(nu: Order, n: usize, accuracy: f64) -> Result<ZeroTable> {
        if n == 0 {
            return Err(Error::precondition("zero table needs n >= 1"));
        }
        if !(accuracy > 0.0) || accuracy > 1e-6 {
            return Err(Error::precondition("accuracy must be in (0, 1e-6]"));
        }
        let nu = nu.get();
        let mut zeros = Vec::with_capacity(n);
        let mut gap_estimate = std::f64::consts::PI;
        for k in 1..=n {
            let (lo, hi) = if k == 1 {
                bracket_first(nu)?
            } else {
                let prev = zeros[k - 2];
                bracket_next(nu, prev, gap_estimate)?
            };
            let z = refine(nu, lo, hi, accuracy)?;
            if let Some(&prev) = zeros.last() {
                gap_estimate = z - prev;
            }
            zeros.push(z);
        }
        Ok(ZeroTable {
            nu,
            zeros,
            accuracy,
        })
    }

    /// Assemble a table from externally stored zeros, re-certifying each one.
    pub fn from_certified(nu: Order, zeros: Vec<f64>, accuracy: f64) -> Result<ZeroTable> {
        let table = ZeroTable {
            nu: nu.get(),
            zeros,
            accuracy,
        };
        table.validate()?;
        Ok(table)
    }

    /// Re-evaluate J_nu at every stored zero; reject a corrupt table.
    pub fn validate(&self) -> Result<()> {
        let mut prev = 0.0;
        for (i, &z) in self.zeros.iter().enumerate() {
            if !(z > prev) {
                return Err(Error::Cache(format!(
                    "zeros not strictly increasing at n={}",
                    i + 1
                )));
            }
            if !certify(self.nu, z, self.accuracy) {
                return Err(Error::Cache(format!(
                    "stored zero n={} failed sign-change certification",
                    i + 1
                )));
            }
            prev = z;
        }
        Ok(())
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    /// n-th zero, 1-based.
    pub fn zero(&self, n: usize) -> f64 {
        self.zeros[n - 1]
    }

    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    /// First zero; every table has at least one entry.
    pub fn first(&self) -> f64 {
        self.zeros[0]
    }
}

/// Ratios j_{nu,n}/(nu+n) for n >= 2. Tests pin these into a global band.
pub fn zero_ratio_check(table: &ZeroTable) -> Vec<f64> {
    table
        .zeros()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &z)| z / (table.nu() + (i + 1) as f64))
        .collect()
}

/// j_{nu,1}^2 > 4(nu+1), from sum 1/j^2 = 1/(4(nu+1)). For nu >= 5.2 the
/// sharper bound nu + 1/7 < j_{nu,1} applies as well.
fn bracket_first(nu: f64) -> Result<(f64, f64)> {
    let mut lo = 2.0 * (nu + 1.0).sqrt();
    if nu >= 5.2 {
        lo = lo.max(nu + 1.0 / 7.0);
    }
    let f_lo = bessel_j_raw(nu, lo);
    if f_lo <= 0.0 {
        return Err(Error::unconverged(format!(
            "first-zero bracket start not below the zero for nu={nu}"
        )));
    }
    scan_for_sign_change(nu, lo, 0.5, 1.0, 4000)
}

fn bracket_next(nu: f64, prev: f64, gap_estimate: f64) -> Result<(f64, f64)> {
    // Step just past the previous zero, then walk in sub-gap steps until the
    // sign flips. Gaps are monotone along the table, so half the previous gap
    // cannot straddle two zeros.
    let start = prev + (prev.abs() * 1e-12).max(4e-9);
    let sign = bessel_j_raw(nu, start);
    if sign == 0.0 {
        return Err(Error::unconverged("sign evaluation collapsed to zero"));
    }
    scan_for_sign_change(nu, start, 0.45 * gap_estimate, sign, 64)
}

fn scan_for_sign_change(
    nu: f64,
    start: f64,
    step: f64,
    sign_at_start: f64,
    max_steps: usize,
) -> Result<(f64, f64)> {
    let mut x = start;
    let s0 = sign_at_start.signum();
    for _ in 0..max_steps {
        let next = x + step;
        let f = bessel_j_raw(nu, next);
        if f == 0.0 {
            // Exactly on a zero: nudge the endpoints around it.
            return Ok((next - step * 1e-6, next + step * 1e-6));
        }
        if f.signum() != s0 {
            return Ok((x, next));
        }
        x = next;
    }
    Err(Error::unconverged(format!(
        "no sign change of J_{nu} found after {max_steps} steps from {start}"
    )))
}

/// Safeguarded Newton: steps that leave the bracket fall back to bisection,
/// so convergence is guaranteed. Certification re-checks the sign change at
/// +-accuracy around the result.
fn refine(nu: f64, mut lo: f64, mut hi: f64, accuracy: f64) -> Result<f64> {
    let mut f_lo = bessel_j_raw(nu, lo);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = bessel_j_raw(nu, x);
        if f == 0.0 {
            break;
        }
        if (f > 0.0) == (f_lo > 0.0) {
            lo = x;
            f_lo = f;
        } else {
            hi = x;
        }
        // J_nu'(y) = (nu/y) J_nu(y) - J_{nu+1}(y)
        let d = (nu / x) * f - bessel_j_raw(nu + 1.0, x);
        let mut next = if d != 0.0 { x - f / d } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let dx = (next - x).abs();
        x = next;
        if dx < 0.05 * accuracy || (hi - lo) < 0.5 * accuracy {
            break;
        }
    }
    if certify(nu, x, accuracy) {
        return Ok(x);
    }
    // Fall back to pure bisection on the remaining bracket.
    for _ in 0..200 {
        if hi - lo < 0.5 * accuracy {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f = bessel_j_raw(nu, mid);
        if (f > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
        }
    }
    x = 0.5 * (lo + hi);
    if certify(nu, x, accuracy) {
        Ok(x)
    } else {
        Err(Error::unconverged(format!(
            "zero of J_{nu} near {x} failed certification at accuracy {accuracy:e}"
        )))
    }
}

/// True when J_nu changes sign on [z - accuracy, z + accuracy].
pub(crate) fn certify(nu: f64, z: f64, accuracy: f64) -> bool {
    if z <= accuracy {
        return false;
    }
    let a = bessel_j_raw(nu, z - accuracy);
    let b = bessel_j_raw(nu, z + accuracy);
    a == 0.0 || b == 0.0 || (a > 0.0) != (b > 0.0)
}

/// Asymptotic remainder sum_{k>n} 1/j_{nu,k}^2 from the McMahon expansion
/// j ~ beta - (mu-1)/(8 beta), beta = (k + nu/2 - 1/4) pi, mu = 4 nu^2.
///
/// Independent of the closed forms it is used to cross-check; accurate to
/// O(n^-5) relative for n well above nu.
pub fn mcmahon_tail_inv_j2(nu: Order, n: usize) -> f64 {
    let nu = nu.get();
    let pi = std::f64::consts::PI;
    let a = nu / 2.0 - 0.25;
    let z = n as f64 + 1.0 + a;
    let mu = 4.0 * nu * nu;
    polygamma1(z) / (pi * pi) + (mu - 1.0) / 4.0 * polygamma3(z) / (6.0 * pi.powi(4))
}

/// Asymptotic remainder sum_{k>n} 1/j_{nu,k}^4, same expansion.
pub fn mcmahon_tail_inv_j4(nu: Order, n: usize) -> f64 {
    let nu = nu.get();
    let pi = std::f64::consts::PI;
    let a = nu / 2.0 - 0.25;
    let z = n as f64 + 1.0 + a;
    let mu = 4.0 * nu * nu;
    polygamma3(z) / (6.0 * pi.powi(4)) + (mu - 1.0) / 2.0 * polygamma5(z) / (120.0 * pi.powi(6))
}

fn polygamma1(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 40.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    acc + r * (1.0 + r * (0.5 + r * (1.0 / 6.0 - r2 * (1.0 / 30.0 - r2 * (1.0 / 42.0 - r2 / 30.0)))))
}

fn polygamma3(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 40.0 {
        acc += 6.0 / x.powi(4);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    acc + r2 * r * (2.0 + r * (3.0 + r * (2.0 - r2 * (1.0 - r2 * 4.0 / 3.0))))
}

fn polygamma5(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 40.0 {
        acc += 120.0 / x.powi(6);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    acc + r2 * r2 * r * (24.0 + r * (60.0 + r * (60.0 - r2 * 56.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(nu: f64) -> Order {
        Order::new(nu).unwrap()
    }

    // 40-digit references.
    const ZERO_REFS: &[(f64, usize, f64)] = &[
        (0.0, 1, 2.4048255576957727686),
        (0.0, 2, 5.5200781102863106496),
        (0.0, 3, 8.653727912911012217),
        (1.0, 1, 3.8317059702075123156),
        (1.0, 2, 7.0155866698156187535),
        (2.0, 1, 5.1356223018406825563),
        (5.0, 1, 8.7714838159599540191),
        (20.0, 1, 25.41714081407252358),
        (20.0, 2, 29.96160379162515606),
        (50.0, 1, 57.116899160119174119),
        (-0.75, 1, 1.0585082594041192372),
        (-0.75, 2, 4.284053812724698085),
        (-0.9, 1, 0.64783088075037726119),
        (-0.999, 1, 0.063261359982701727924),
    ];

    #[test]
    fn zeros_match_references() {
        for &(nu, n, want) in ZERO_REFS {
            let t = ZeroTable::compute(order(nu), n).unwrap();
            let got = t.zero(n);
            assert!(
                (got - want).abs() < 1e-10,
                "j({nu},{n}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn half_order_zeros_are_multiples_of_pi() {
        let pi = std::f64::consts::PI;
        let t = ZeroTable::compute(order(0.5), 25).unwrap();
        for (i, &z) in t.zeros().iter().enumerate() {
            assert!((z - (i + 1) as f64 * pi).abs() < 1e-10);
        }
        let t = ZeroTable::compute(order(-0.5), 25).unwrap();
        for (i, &z) in t.zeros().iter().enumerate() {
            assert!((z - ((i + 1) as f64 - 0.5) * pi).abs() < 1e-10);
        }
    }

    #[test]
    fn deep_zero_matches_reference() {
        // j_{0,10000}: exercises the asymptotic evaluation path end to end.
        let t = ZeroTable::compute(order(0.0), 10_000).unwrap();
        assert!((t.zero(10_000) - 31415.141141713507985).abs() < 1e-9);
    }

    #[test]
    fn zeros_strictly_increasing_and_certified() {
        for nu in [-0.9, -0.5, 0.0, 0.5, 1.0, 3.0, 10.0, 20.0] {
            let t = ZeroTable::compute(order(nu), 60).unwrap();
            for w in t.zeros().windows(2) {
                assert!(w[0] < w[1]);
            }
            t.validate().unwrap();
        }
    }

    #[test]
    fn interlacing_with_next_order() {
        for nu in [-0.9, -0.5, 0.0, 0.5, 1.0, 3.0, 10.0, 20.0] {
            let t0 = ZeroTable::compute(order(nu), 40).unwrap();
            let t1 = ZeroTable::compute(order(nu + 1.0), 40).unwrap();
            for n in 1..40 {
                assert!(
                    t0.zero(n) < t1.zero(n) && t1.zero(n) < t0.zero(n + 1),
                    "interlacing broken at nu={nu}, n={n}"
                );
            }
        }
    }

    #[test]
    fn breen_bracket_for_large_order() {
        for nu in [5.2, 8.0, 20.0, 50.0] {
            let j1 = ZeroTable::compute(order(nu), 1).unwrap().zero(1);
            assert!(nu + 1.0 / 7.0 < j1);
            assert!(j1 < nu / (1.0 - 3.0 * nu.powf(-2.0 / 3.0)));
        }
    }

    #[test]
    fn ratio_check_band_is_global() {
        // j/(nu+n), n >= 2, stays inside one fixed band across all orders.
        // The sup is approached as nu -> -1, n = 2, where j -> j_{1,1} ~ 3.83.
        for nu in [-0.999, -0.9, -0.5, 0.0, 0.5, 1.0, 3.0, 10.0, 20.0] {
            let t = ZeroTable::compute(order(nu), 50).unwrap();
            for r in zero_ratio_check(&t) {
                assert!(r > 1.0 && r < 3.9, "nu={nu}: r={r}");
            }
        }
    }

    #[test]
    fn first_zero_squared_over_2delta_near_one_at_small_order() {
        // j_{nu,1}^2/(2 delta) -> 1 as nu -> -1.
        let nu = -0.999;
        let j1 = ZeroTable::compute(order(nu), 1).unwrap().zero(1);
        let ratio = j1 * j1 / (2.0 * 2.0 * (nu + 1.0));
        assert!((ratio - 1.0).abs() < 0.05, "ratio = {ratio}");
    }

    #[test]
    fn mcmahon_tail_matches_direct_tail() {
        // Compare the asymptotic remainder against an explicit long sum.
        let nu = order(0.0);
        let t = ZeroTable::compute(nu, 3000).unwrap();
        let n = 100;
        let direct: f64 = (n..3000).map(|i| t.zeros()[i].powi(-2)).sum::<f64>()
            + mcmahon_tail_inv_j2(nu, 3000);
        let asym = mcmahon_tail_inv_j2(nu, n);
        assert!(
            (direct - asym).abs() < 1e-10,
            "direct {direct:e} vs asym {asym:e}"
        );
        let direct4: f64 = (n..3000).map(|i| t.zeros()[i].powi(-4)).sum::<f64>()
            + mcmahon_tail_inv_j4(nu, 3000);
        let asym4 = mcmahon_tail_inv_j4(nu, n);
        assert!((direct4 - asym4).abs() < 1e-13);
    }

    #[test]
    fn from_certified_rejects_corruption() {
        let t = ZeroTable::compute(order(0.0), 5).unwrap();
        let mut zeros = t.zeros().to_vec();
        zeros[2] += 1e-3;
        assert!(ZeroTable::from_certified(order(0.0), zeros, t.accuracy()).is_err());
    }
}
