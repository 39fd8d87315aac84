use std::sync::OnceLock;

use crate::dd::Dd;
use crate::error::{Error, Result};

use super::gamma::{gamma_unchecked, ln_gamma};
use super::Order;

/// Bessel function of the first kind, real order `nu > -1`, argument `y >= 0`.
///
/// Absolute error stays below ~1e-12 over the whole range needed by the zero
/// tables (y up to a few 1e4). The evaluation strategy is picked per call and
/// each strategy certifies its own error estimate; an uncertified result falls
/// through to the next strategy.
pub fn bessel_j(nu: Order, y: f64) -> Result<f64> {
    if !y.is_finite() || y < 0.0 {
        return Err(Error::domain(format!("bessel_j requires y >= 0, got {y}")));
    }
    Ok(bessel_j_raw(nu.get(), y))
}

/// Modified Bessel function of the first kind.
pub fn bessel_i(nu: Order, y: f64) -> Result<f64> {
    if !y.is_finite() || y < 0.0 {
        return Err(Error::domain(format!("bessel_i requires y >= 0, got {y}")));
    }
    Ok(bessel_i_raw(nu.get(), y))
}

const SERIES_Y_MAX: f64 = 40.0;
const SERIES_ERR_MAX: f64 = 2e-13;

pub(crate) fn bessel_j_raw(nu: f64, y: f64) -> f64 {
    if y == 0.0 {
        return match nu.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Equal) => 1.0,
            Some(std::cmp::Ordering::Greater) => 0.0,
            _ => f64::INFINITY,
        };
    }
    // The power series loses absolute accuracy once terms reach ~e^y, unless
    // the order keeps the terms from growing (y below the turning point).
    if y <= SERIES_Y_MAX || y <= nu + 15.0 {
        let (v, err) = series_j(nu, y);
        if err <= SERIES_ERR_MAX {
            return v;
        }
    }
    if let Some((v, _)) = hankel_j(nu, y) {
        return v;
    }
    integral_j(nu, y)
}

pub(crate) fn bessel_i_raw(nu: f64, y: f64) -> f64 {
    if y == 0.0 {
        return match nu.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Equal) => 1.0,
            Some(std::cmp::Ordering::Greater) => 0.0,
            _ => f64::INFINITY,
        };
    }
    // All terms positive: no cancellation, plain compensated summation.
    let q = 0.25 * y * y;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut comp = 0.0_f64;
    let mut m = 1.0_f64;
    loop {
        term *= q / (m * (nu + m));
        let t = term - comp;
        let s = sum + t;
        comp = (s - sum) - t;
        sum = s;
        if term < sum * 1e-18 || m > 1000.0 {
            break;
        }
        m += 1.0;
    }
    prefactor(nu, y) * sum
}

/// (y/2)^nu / Gamma(nu+1)
fn prefactor(nu: f64, y: f64) -> f64 {
    let g = nu + 1.0;
    if g < 170.0 {
        (y / 2.0).powf(nu) / gamma_unchecked(g)
    } else {
        (nu * (y / 2.0).ln() - ln_gamma(g).unwrap()).exp()
    }
}

/// Maclaurin series in double-double, with an absolute-error certificate.
fn series_j(nu: f64, y: f64) -> (f64, f64) {
    let (sum, err_rel) = maclaurin_sum(nu, y);
    let pref = prefactor(nu, y);
    let value = pref * sum;
    let err = pref * err_rel + value.abs() * 5e-14 + 1e-300;
    (value, err)
}

/// J_nu(y) Gamma(nu+1) (y/2)^{-nu}: the power series without its prefactor.
/// Equals 1 at y = 0 and stays O(1)-scaled; used where the raw prefactor
/// would overflow, e.g. series coefficients with large order.
pub(crate) fn scaled_bessel_j_raw(nu: f64, y: f64) -> f64 {
    if y == 0.0 {
        return 1.0;
    }
    if y <= SERIES_Y_MAX || y <= nu + 15.0 {
        let (sum, err) = maclaurin_sum(nu, y);
        if err <= SERIES_ERR_MAX {
            return sum;
        }
    }
    let g = nu + 1.0;
    let ln_scale = if g < 170.0 {
        gamma_unchecked(g).ln()
    } else {
        ln_gamma(g).unwrap()
    };
    bessel_j_raw(nu, y) * (ln_scale - nu * (y / 2.0).ln()).exp()
}

/// Core sum of the Maclaurin series; returns (sum, absolute error bound of
/// the sum itself).
fn maclaurin_sum(nu: f64, y: f64) -> (f64, f64) {
    let h = Dd::from(0.5).mul_f64(y);
    let q = h.mul(h);
    let mut term = Dd::from(1.0);
    let mut sum = term;
    let mut max_term = 1.0_f64;
    // Terms decrease once m(nu+m) > q.
    let m_turn = 0.5 * (-nu + (nu * nu + 4.0 * q.hi).sqrt());
    let mut m = 1usize;
    let m_cap = (m_turn as usize) + 220;
    loop {
        let denom = Dd::from(nu).add_f64(m as f64).mul_f64(m as f64);
        term = term.mul(q).div(denom).neg();
        sum = sum.add(term);
        max_term = max_term.max(term.abs());
        if (m as f64) > m_turn && term.abs() < 1e-34 * max_term.max(1.0) {
            break;
        }
        if m >= m_cap {
            break;
        }
        m += 1;
    }
    // dd accumulation error grows with the largest intermediate term.
    (sum.to_f64(), max_term * (m as f64) * 1e-30)
}

/// Large-argument asymptotic expansion. Returns None when the expansion does
/// not reach ~1e-15 before its terms start growing.
fn hankel_j(nu: f64, y: f64) -> Option<(f64, f64)> {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0_f64;
    let mut q = 0.0_f64;
    let mut t = 1.0_f64;
    let mut min_t = 1.0_f64;
    for k in 1usize..=60 {
        let kf = k as f64;
        let factor = (mu - (2.0 * kf - 1.0) * (2.0 * kf - 1.0)) / (8.0 * y * kf);
        t *= factor;
        let at = t.abs();
        if at > min_t {
            // Asymptotic tail started diverging; stop at the smallest term.
            break;
        }
        match k % 4 {
            1 => q += t,
            2 => p -= t,
            3 => q -= t,
            _ => p += t,
        }
        min_t = at;
        if at < 1e-17 {
            break;
        }
    }
    if min_t > 3e-15 {
        return None;
    }
    // Phase y - (nu/2 + 1/4) pi carried in double-double so that cancellation
    // against large y does not shift the computed zeros.
    let k = Dd::from(0.5 * nu).add_f64(0.25);
    let chi = Dd::from(y).sub(k.mul(Dd::PI));
    let (sin_hi, cos_hi) = chi.hi.sin_cos();
    let c = cos_hi - chi.lo * sin_hi;
    let s = sin_hi + chi.lo * cos_hi;
    let amp = (2.0 / (std::f64::consts::PI * y)).sqrt();
    let value = amp * (p * c - q * s);
    Some((value, amp * (2.0 * min_t + 5e-16)))
}

/// Integral representation, used in the band where neither the series nor the
/// asymptotic expansion certifies (moderate y with large order):
///   J_nu(y) = (1/pi) int_0^pi cos(nu t - y sin t) dt
///           - sin(nu pi)/pi int_0^inf exp(-nu t - y sinh t) dt
fn integral_j(nu: f64, y: f64) -> f64 {
    let (nodes, weights) = gl32();
    let pi = std::f64::consts::PI;

    // Oscillatory part: phase change per panel capped at ~4 pi.
    let panels = (((nu.abs() + y) / 4.0).ceil() as usize).max(4);
    let w = pi / panels as f64;
    let mut osc = 0.0_f64;
    for i in 0..panels {
        let a = i as f64 * w;
        let c1 = 0.5 * w;
        let c2 = a + 0.5 * w;
        let mut acc = 0.0;
        for (x, gw) in nodes.iter().zip(weights.iter()) {
            let theta = c1 * x + c2;
            acc += gw * (nu * theta - y * theta.sin()).cos();
        }
        osc += c1 * acc;
    }

    // Monotone tail part; vanishes for integer order.
    let snp = (nu - nu.round()).abs();
    let mut tail = 0.0_f64;
    if snp > 1e-14 {
        let t_max = (44.0 / y).asinh();
        let np = 4usize;
        let wt = t_max / np as f64;
        for i in 0..np {
            let a = i as f64 * wt;
            let c1 = 0.5 * wt;
            let c2 = a + 0.5 * wt;
            let mut acc = 0.0;
            for (x, gw) in nodes.iter().zip(weights.iter()) {
                let t = c1 * x + c2;
                acc += gw * (-nu * t - y * t.sinh()).exp();
            }
            tail += c1 * acc;
        }
        tail *= (nu * pi).sin();
    }
    (osc - tail) / pi
}

/// 32-point Gauss-Legendre nodes/weights on [-1, 1].
fn gl32() -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    TABLE.get_or_init(|| gauss_legendre(32))
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = -p / dp;
            z += dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0_f64;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
