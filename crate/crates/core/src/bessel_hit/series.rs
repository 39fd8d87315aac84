//! Eigenfunction-series evaluation of the hitting-time law.
//!
//! P(tau > t) = sum_n c_n exp(-lambda_n t) with lambda_n = j_{nu,n}^2/(2c^2)
//! and coefficients
//!   c_n = xi_n w_n,  xi_n = (j_n/2)^{nu-1} / (Gamma(nu+1) J_{nu+1}(j_n)),
//! where w_n = J_nu(j_n x0/c) Gamma(nu+1) (j_n x0/(2c))^{-nu} (so w_n = 1 at
//! x0 = 0 and the x0 = 0 series is the classical alternating one).
//!
//! The coefficients oscillate in sign and can grow polynomially in n, so a
//! fixed-count truncation is not certifiable. Instead each evaluation sums
//! until its running remainder bound meets the target, extends with a block
//! of explicitly computed |terms|, and closes out the rest geometrically from
//! a trailing amplitude window (wide enough to cover the coefficient
//! oscillation) with explicit safety margins folded into `trunc_error`.
//! Evaluations that cannot be certified below 1e-6 fall back to an analytic
//! near-zero-t bound or to Monte Carlo with a binomial interval.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::specfun::{bessel_i_raw, bessel_j_raw, ln_gamma, scaled_bessel_j_raw, ZeroTable};
use crate::stats::clopper_pearson;

use super::bounds::left_tail_upper_at_time;
use super::{sum_inv_j2, BesselHitParams, TailMethod, TailValue};

const SERIES_TARGET: f64 = 1e-13;
const CERT_GOOD: f64 = 1e-9;
const CERT_LIMIT: f64 = 1e-6;
const EXTENSION: usize = 64;
const WINDOW: usize = 24;
const FALLBACK_SAMPLES: usize = 200_000;
const FALLBACK_SEED: u64 = 0x5EED_BE55;

/// P(tau > t) with a certified truncation bound.
pub fn exact_tail(params: &BesselHitParams, table: &ZeroTable, t: f64) -> Result<TailValue> {
    params.check_table(table)?;
    if !(t >= 0.0) {
        return Err(Error::domain(format!("exact_tail needs t >= 0, got {t}")));
    }
    let series_method = if params.x0() == 0.0 {
        TailMethod::CtSeries
    } else {
        TailMethod::KentSeries
    };
    if t == 0.0 {
        return Ok(TailValue {
            value: 1.0,
            trunc_error: 0.0,
            terms_used: 0,
            method: series_method,
        });
    }

    // Near t = 0 the martingale bound on P(tau <= t) already certifies the
    // value 1 tighter than any series truncation could.
    let analytic = left_tail_upper_at_time(params, t);
    if let Some(b) = analytic {
        if b <= 1e-13 {
            return Ok(near_one(b, series_method));
        }
    }

    let sum = sum_series(params, table, t, 0);
    if let Some(s) = &sum {
        if s.trunc <= CERT_GOOD {
            return Ok(tail_from_series(s, series_method));
        }
    }
    if let Some(b) = analytic {
        let series_trunc = sum.as_ref().map(|s| s.trunc).unwrap_or(f64::INFINITY);
        if b <= CERT_GOOD.max(series_trunc) {
            return Ok(near_one(b, series_method));
        }
    }
    if let Some(s) = &sum {
        if s.trunc <= CERT_LIMIT {
            return Ok(tail_from_series(s, series_method));
        }
    }
    monte_carlo_tail(params, table, t)
}

fn near_one(bound: f64, method: TailMethod) -> TailValue {
    TailValue {
        value: 1.0 - 0.5 * bound,
        trunc_error: 0.5 * bound + 1e-16,
        terms_used: 0,
        method,
    }
}

fn tail_from_series(s: &SeriesSum, method: TailMethod) -> TailValue {
    TailValue {
        value: s.value.clamp(0.0, 1.0),
        trunc_error: s.trunc,
        terms_used: s.terms,
        method,
    }
}

/// Density of tau at t > 0, from the term-wise differentiated series.
pub fn density(params: &BesselHitParams, table: &ZeroTable, t: f64) -> Result<f64> {
    params.check_table(table)?;
    if !(t > 0.0) {
        return Err(Error::domain(format!("density needs t > 0, got {t}")));
    }
    let sum = sum_series(params, table, t, 1).ok_or_else(|| {
        Error::unconverged(format!("density series not certifiable at t = {t}"))
    })?;
    let scale = sum.value.abs().max(params.rate(table, 1) * 1e-3);
    if sum.trunc > CERT_LIMIT * scale {
        return Err(Error::unconverged(format!(
            "density truncation {:.2e} above certification limit at t = {t}",
            sum.trunc
        )));
    }
    Ok(sum.value)
}

struct SeriesSum {
    value: f64,
    trunc: f64,
    terms: usize,
}

/// Sign and log-magnitude of c_n (lambda_power = 0) or c_n lambda_n
/// (lambda_power = 1); fully in logs so that no intermediate over/underflows.
fn coeff_ln(
    params: &BesselHitParams,
    table: &ZeroTable,
    n: usize,
    lambda_power: i32,
) -> (f64, f64) {
    let nu = params.nu().get();
    let j = table.zero(n);
    let junior = bessel_j_raw(nu + 1.0, j);
    if junior == 0.0 {
        return (0.0, f64::INFINITY);
    }
    let mut sign = junior.signum();
    let mut ln_mag =
        (nu - 1.0) * (j / 2.0).ln() - ln_gamma(nu + 1.0).unwrap() - junior.abs().ln();
    if params.x0() > 0.0 {
        let w = scaled_bessel_j_raw(nu, j * params.x0() / params.c());
        if w == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        sign *= w.signum();
        ln_mag += w.abs().ln();
    }
    if lambda_power == 1 {
        ln_mag += params.rate(table, n).ln();
    }
    (sign, ln_mag)
}

fn sum_series(
    params: &BesselHitParams,
    table: &ZeroTable,
    t: f64,
    lambda_power: i32,
) -> Option<SeriesSum> {
    let len = table.len();
    if len < 16 {
        return None;
    }
    let max_main = len.saturating_sub(8);
    let term = |n: usize| -> f64 {
        let (sign, ln_mag) = coeff_ln(params, table, n, lambda_power);
        if sign == 0.0 {
            return 0.0;
        }
        sign * (ln_mag - params.rate(table, n) * t).exp()
    };

    let mut value = 0.0_f64;
    let mut sum_abs = 0.0_f64;
    let mut small_run = 0usize;
    let mut n = 0usize;
    loop {
        n += 1;
        if n > max_main {
            return None;
        }
        let tn = term(n);
        if !tn.is_finite() {
            return None;
        }
        value += tn;
        sum_abs += tn.abs();
        if tn.abs() <= 0.02 * SERIES_TARGET {
            small_run += 1;
        } else {
            small_run = 0;
        }
        if small_run >= 3 && n >= 4 {
            break;
        }
    }

    // Extension block: these are real terms, so add them; what remains is
    // bounded by the trailing amplitude window and the exponential gaps.
    let k_end = (n + EXTENSION).min(len - 2);
    if k_end < n + 4 {
        return None;
    }
    let mut window = [0.0_f64; WINDOW];
    for k in (n + 1)..=k_end {
        let tk = term(k);
        value += tk;
        sum_abs += tk.abs();
        window[k % WINDOW] = tk.abs();
    }
    let amp = window.iter().cloned().fold(0.0_f64, f64::max);

    // Geometric closeout: exponential gaps lambda_{k+1} - lambda_k increase
    // with k, coefficient amplitudes grow at most like j^(nu - 1/2) (x0 = 0)
    // and decay like 1/j otherwise.
    let grow_exp = if params.x0() == 0.0 {
        (params.nu().get() - 0.5).max(0.0)
    } else {
        0.0
    };
    let j_ratio = table.zero(k_end + 1) / table.zero(k_end);
    let gap = params.rate(table, k_end + 1) - params.rate(table, k_end);
    let rho = j_ratio.powf(grow_exp) * 1.25 * (-gap * t).exp();
    if !(rho < 0.95) {
        return None;
    }
    let closeout = 2.0 * amp * rho / (1.0 - rho);
    let cancellation = 4e-16 * sum_abs;
    Some(SeriesSum {
        value,
        trunc: closeout + cancellation,
        terms: k_end,
    })
}

fn monte_carlo_tail(
    params: &BesselHitParams,
    table: &ZeroTable,
    t: f64,
) -> Result<TailValue> {
    let model = params.to_expmix(table, kent_truncation(params, table))?;
    let mut rng = ChaCha8Rng::seed_from_u64(FALLBACK_SEED);
    let mut hits = 0usize;
    for _ in 0..FALLBACK_SAMPLES {
        if model.sample(&mut rng) >= t {
            hits += 1;
        }
    }
    let value = hits as f64 / FALLBACK_SAMPLES as f64;
    let (lo, hi) = clopper_pearson(hits, FALLBACK_SAMPLES, 0.99)?;
    Ok(TailValue {
        value,
        trunc_error: (hi - value).max(value - lo),
        terms_used: FALLBACK_SAMPLES,
        method: TailMethod::MonteCarloFallback,
    })
}

/// Smallest truncation N with remainder-mean bias below 1e-3 E tau, capped by
/// the table length.
pub(crate) fn kent_truncation(params: &BesselHitParams, table: &ZeroTable) -> usize {
    let c2 = params.c() * params.c();
    let budget = 1e-3 * params.mean_hitting_time() / (1.0 - params.alpha());
    let total = 2.0 * c2 * sum_inv_j2(params.nu());
    let mut partial = 0.0;
    for (i, &j) in table.zeros().iter().enumerate() {
        partial += 2.0 * c2 / (j * j);
        if total - partial <= budget {
            return i + 1;
        }
    }
    table.len()
}

/// Laplace transform E exp(-u tau) as the product over convolution factors
/// alpha + (1-alpha) lambda_n/(lambda_n + u), with the remainder of the
/// product bounded through the exact zero-sum identity and folded back in as
/// a midpoint correction.
pub fn laplace_transform(params: &BesselHitParams, table: &ZeroTable, u: f64) -> Result<f64> {
    params.check_table(table)?;
    if !(u >= 0.0) {
        return Err(Error::domain(format!("laplace_transform needs u >= 0, got {u}")));
    }
    if u == 0.0 {
        return Ok(1.0);
    }
    let alpha = params.alpha();
    let c2 = params.c() * params.c();
    let mut prod = 1.0_f64;
    let mut partial_inv_j2 = 0.0_f64;
    let mut rem_log = f64::INFINITY;
    for &j in table.zeros() {
        let lam = j * j / (2.0 * c2);
        prod *= alpha + (1.0 - alpha) * lam / (lam + u);
        partial_inv_j2 += 1.0 / (j * j);
        // For n past the truncation, -ln f_n = (1-alpha) u/lambda_n to first
        // order; the zero-sum identity makes that sum exact, so applying it
        // as a correction leaves an error of second order in u/lambda.
        let tail_j2 = (sum_inv_j2(params.nu()) - partial_inv_j2).max(0.0);
        rem_log = (1.0 - alpha) * u * 2.0 * c2 * tail_j2;
        if rem_log < 1e-13 {
            break;
        }
    }
    Ok(prod * (-rem_log).exp())
}

/// Closed-form transform E exp(-u tau) = (c/x0)^nu I_nu(x0 sqrt(2u)) / I_nu(c sqrt(2u))
/// (with the x0 -> 0 limit), an independent route used as an oracle.
pub fn laplace_transform_bessel_ratio(params: &BesselHitParams, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::domain("needs u >= 0".to_string()));
    }
    if u == 0.0 {
        return Ok(1.0);
    }
    let nu = params.nu().get();
    let zc = params.c() * (2.0 * u).sqrt();
    let denom = bessel_i_raw(nu, zc);
    if params.x0() == 0.0 {
        let g = ln_gamma(nu + 1.0).unwrap().exp();
        Ok((zc / 2.0).powf(nu) / (g * denom))
    } else {
        let zx = params.x0() * (2.0 * u).sqrt();
        Ok((params.c() / params.x0()).powf(nu) * bessel_i_raw(nu, zx) / denom)
    }
}

/// integral_0^infty P(tau > t) dt by composite quadrature with an analytic
/// exponential closeout; returns (value, error budget).
pub fn mean_tail_integral(params: &BesselHitParams, table: &ZeroTable) -> Result<(f64, f64)> {
    let lam1 = params.rate(table, 1);
    // Far end: first term dominates; ln coefficient keeps the cutoff honest
    // for large orders where c_1 is big.
    let (_, ln_c1) = coeff_ln(params, table, 1, 0);
    let t_end = (34.0 + ln_c1.max(0.0)) / lam1;
    let panels = 96usize;
    let nodes = gauss_nodes_16();
    let w = t_end / panels as f64;
    let mut integral = 0.0_f64;
    let mut err = 0.0_f64;
    for i in 0..panels {
        let a = i as f64 * w;
        for &(x, gw) in nodes {
            let t = a + 0.5 * w * (x + 1.0);
            let tv = exact_tail(params, table, t)?;
            integral += 0.5 * w * gw * tv.value;
            err += 0.5 * w * gw * tv.trunc_error;
        }
    }
    let end_tail = exact_tail(params, table, t_end)?;
    integral += end_tail.value / lam1;
    err += (end_tail.value + end_tail.trunc_error) / lam1;
    Ok((integral, err))
}

/// 16-point Gauss-Legendre rule on [-1, 1], (node, weight).
fn gauss_nodes_16() -> &'static [(f64, f64); 16] {
    // Generated once from the Legendre recurrence elsewhere in the crate;
    // frozen here to keep this module self-contained.
    const RULE: [(f64, f64); 16] = [
        (-0.9894009349916499, 0.027152459411754095),
        (-0.9445750230732326, 0.062253523938647894),
        (-0.8656312023878318, 0.09515851168249278),
        (-0.7554044083550030, 0.12462897125553387),
        (-0.6178762444026438, 0.14959598881657673),
        (-0.4580167776572274, 0.16915651939500254),
        (-0.2816035507792589, 0.18260341504492358),
        (-0.0950125098376374, 0.18945061045506850),
        (0.0950125098376374, 0.18945061045506850),
        (0.2816035507792589, 0.18260341504492358),
        (0.4580167776572274, 0.16915651939500254),
        (0.6178762444026438, 0.14959598881657673),
        (0.7554044083550030, 0.12462897125553387),
        (0.8656312023878318, 0.09515851168249278),
        (0.9445750230732326, 0.062253523938647894),
        (0.9894009349916499, 0.027152459411754095),
    ];
    &RULE
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::Order;
    use approx::assert_relative_eq;

    fn params(nu: f64, c: f64, x0: f64) -> BesselHitParams {
        BesselHitParams::new(Order::new(nu).unwrap(), c, x0).unwrap()
    }

    fn table(nu: f64, n: usize) -> ZeroTable {
        ZeroTable::compute(Order::new(nu).unwrap(), n).unwrap()
    }

    #[test]
    fn tail_at_zero_is_one() {
        let p = params(0.0, 1.0, 0.0);
        let t = table(0.0, 64);
        let tv = exact_tail(&p, &t, 0.0).unwrap();
        assert_eq!(tv.value, 1.0);
        assert_eq!(tv.trunc_error, 0.0);
        assert_eq!(tv.method, TailMethod::CtSeries);
    }

    #[test]
    fn one_dimensional_case_matches_classical_series() {
        // nu = -1/2: two-sided exit of BM from (-1, 1); at t = 1 the
        // classical series gives 0.3707774297995239 (40-digit reference).
        let p = params(-0.5, 1.0, 0.0);
        let t = table(-0.5, 64);
        let tv = exact_tail(&p, &t, 1.0).unwrap();
        assert_eq!(tv.method, TailMethod::CtSeries);
        assert!(tv.trunc_error < 1e-12);
        assert_relative_eq!(tv.value, 0.3707774297995239, max_relative = 1e-11);
    }

    #[test]
    fn two_dimensional_tail_reference() {
        // nu = 0, c = 1, t chosen so only a few terms matter:
        // P(tau > 1) = sum_n 2 exp(-j_n^2/2)/(j_n J_1(j_n)).
        let p = params(0.0, 1.0, 0.0);
        let t = table(0.0, 64);
        let tv = exact_tail(&p, &t, 1.0).unwrap();
        // Direct evaluation from the first zeros (independent arithmetic).
        let mut want = 0.0;
        for n in 1..=12 {
            let j = t.zero(n);
            let c_n = 2.0 / (j * bessel_j_raw(1.0, j));
            want += c_n * (-j * j / 2.0).exp();
        }
        assert_relative_eq!(tv.value, want, max_relative = 1e-10);
    }

    #[test]
    fn tail_is_monotone_and_bounded() {
        let p = params(0.5, 1.0, 0.4);
        let t = table(0.5, 400);
        let mut prev = 1.0 + 1e-12;
        for i in 0..60 {
            let tt = 0.02 + 0.12 * i as f64;
            let tv = exact_tail(&p, &t, tt).unwrap();
            assert!(tv.value >= -1e-12 && tv.value <= 1.0 + 1e-12);
            assert!(
                tv.value <= prev + 1e-9,
                "tail increased at t={tt}: {} > {prev}",
                tv.value
            );
            prev = tv.value;
        }
    }

    #[test]
    fn scaling_law_in_c() {
        // P depends on (t/c^2, alpha, nu) only.
        let p1 = params(0.7, 2.3, 0.9);
        let p2 = params(0.7, 1.0, 0.9 / 2.3);
        let t1 = table(0.7, 200);
        for ratio in [0.3, 1.0, 2.5, 8.0] {
            let tt = ratio * p1.mean_hitting_time();
            let a = exact_tail(&p1, &t1, tt).unwrap();
            let b = exact_tail(&p2, &t1, tt / (2.3 * 2.3)).unwrap();
            assert!(
                (a.value - b.value).abs() < 1e-10,
                "scaling broken at ratio {ratio}: {} vs {}",
                a.value,
                b.value
            );
        }
    }

    #[test]
    fn small_t_returns_certified_one() {
        let p = params(0.0, 1.0, 0.0);
        let t = table(0.0, 64);
        let tv = exact_tail(&p, &t, 1e-4).unwrap();
        assert!(tv.value > 1.0 - 1e-12);
        assert!(tv.trunc_error < 1e-12);
    }

    #[test]
    fn integral_of_tail_is_mean() {
        for (nu, c, x0) in [(0.0, 1.0, 0.0), (-0.5, 1.0, 0.0), (2.0, 1.5, 0.9)] {
            let p = params(nu, c, x0);
            let t = table(nu, 400);
            let (integral, err) = mean_tail_integral(&p, &t).unwrap();
            let want = p.mean_hitting_time();
            assert!(
                (integral - want).abs() < 1e-4 * want.max(1.0) + err,
                "nu={nu}: integral {integral} vs mean {want} (err budget {err:.2e})"
            );
        }
    }

    #[test]
    fn density_integrates_to_one_and_matches_tail_derivative() {
        let p = params(0.5, 1.0, 0.3);
        let t = table(0.5, 400);
        // Finite-difference check of -d/dt tail vs density.
        for tt in [0.1, 0.3, 0.7, 1.5] {
            let h = 1e-5;
            let up = exact_tail(&p, &t, tt + h).unwrap().value;
            let dn = exact_tail(&p, &t, tt - h).unwrap().value;
            let fd = -(up - dn) / (2.0 * h);
            let f = density(&p, &t, tt).unwrap();
            assert_relative_eq!(f, fd, max_relative = 1e-3);
        }
        // Quadrature of the density over the certified range.
        let mut total = 0.0;
        let n = 4000;
        let t_hi = 12.0 * p.mean_hitting_time();
        let dt = t_hi / n as f64;
        for i in 0..n {
            let tt = (i as f64 + 0.5) * dt;
            total += density(&p, &t, tt).unwrap() * dt;
        }
        total += exact_tail(&p, &t, t_hi).unwrap().value;
        assert!((total - 1.0).abs() < 1e-4, "total = {total}");
    }

    #[test]
    fn density_unimodal_on_certified_range() {
        let p = params(0.0, 1.0, 0.0);
        let t = table(0.0, 400);
        let mut prev = 0.0;
        let mut sign_changes = 0;
        let mut last_slope = 1.0_f64;
        for i in 1..250 {
            let tt = 0.02 + 0.02 * i as f64;
            let f = density(&p, &t, tt).unwrap();
            if i > 1 {
                let slope = f - prev;
                if slope.signum() != last_slope.signum() && slope.abs() > 1e-12 {
                    sign_changes += 1;
                    last_slope = slope;
                }
            }
            prev = f;
        }
        assert!(sign_changes <= 1, "density not unimodal: {sign_changes} slope flips");
    }

    #[test]
    fn density_rejects_uncertifiable_small_t() {
        // Large order at tiny t: the series cancellation defeats f64.
        let p = params(30.0, 1.0, 0.0);
        let t = table(30.0, 300);
        let err = density(&p, &t, 1e-5 * p.mean_hitting_time());
        assert!(err.is_err());
    }

    #[test]
    fn laplace_matches_bessel_ratio_oracle() {
        // Product over zeros vs modified-Bessel ratio: independent routes.
        for (nu, c, x0) in [(0.5, 1.0, 0.0), (0.0, 1.0, 0.0), (1.7, 2.0, 1.2), (-0.5, 1.0, 0.5)] {
            let p = params(nu, c, x0);
            let t = table(nu, 2000);
            for u in [0.1, 0.5, 1.0, 2.0, 5.0] {
                let a = laplace_transform(&p, &t, u).unwrap();
                let b = laplace_transform_bessel_ratio(&p, u).unwrap();
                assert_relative_eq!(a, b, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn laplace_closed_form_three_dimensions() {
        // nu = 1/2, x0 = 0: E exp(-u tau) = sqrt(2u) c / sinh(sqrt(2u) c);
        // at u = 1, c = 1 this is sqrt 2/sinh(sqrt 2).
        let p = params(0.5, 1.0, 0.0);
        let t = table(0.5, 2000);
        let got = laplace_transform(&p, &t, 1.0).unwrap();
        assert_relative_eq!(got, 0.73083448393993972067, max_relative = 1e-9);
    }

    #[test]
    fn laplace_at_zero_is_one_and_rejects_negative() {
        let p = params(0.5, 1.0, 0.0);
        let t = table(0.5, 32);
        assert_eq!(laplace_transform(&p, &t, 0.0).unwrap(), 1.0);
        assert!(laplace_transform(&p, &t, -1.0).is_err());
    }

    #[test]
    fn kent_truncation_controls_bias() {
        let p = params(0.0, 1.0, 0.0);
        let t = table(0.0, 800);
        let n = kent_truncation(&p, &t);
        let m = p.to_expmix(&t, n).unwrap();
        assert!((1.0 - m.alpha()) * m.tail_sum() <= 1e-3 * p.mean_hitting_time() * 1.0001);
        assert!(n > 100 && n < 800, "n = {n}");
    }
}
