use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bessel_hit::{
    self, exact_tail, f_envelope, laplace_lower_bound, laplace_transform, left_tail_lower,
    left_tail_lower_alldelta, left_tail_upper, left_tail_upper_kent, right_tail_lower,
    right_tail_lower_highdim, right_tail_lower_refined, right_tail_upper, BesselHitParams,
};
use crate::error::Result;
use crate::expmix::{moment_from_samples, ExpMixModel};
use crate::mc::{sample_bm_exit, sample_kent, sample_sde, Ball, Ellipsoid, McConfig};
use crate::specfun::{Order, ZeroTable};
use crate::stats::{clopper_pearson, ks_statistic, ks_two_sample_critical};

use super::{seed_for, GridRow, Relation, Status, VerificationReport, VerifyOptions};

const NU_GRID: &[f64] = &[-0.9, -0.5, 0.0, 0.5, 1.0, 3.0, 10.0, 20.0];
const ALPHA_GRID_SMALL: &[f64] = &[0.0, 0.3, 0.7];
const ALPHA_GRID_FULL: &[f64] = &[0.0, 0.3, 0.51, 0.7, 0.95];
const ETA_RIGHT: &[f64] = &[0.1, 0.25, 0.5, 0.75, 1.0, 2.0, 5.0, 10.0];
const ETA_LEFT: &[f64] = &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const TABLE_LEN: usize = 1200;

fn make_params(nu: f64, alpha: f64) -> BesselHitParams {
    BesselHitParams::new(Order::new(nu).unwrap(), 1.0, alpha.sqrt()).unwrap()
}

fn label(p: &BesselHitParams) -> String {
    format!("nu={} alpha={:.4}", p.nu(), p.alpha())
}

fn tables(nus: &[f64]) -> Result<BTreeMap<u64, ZeroTable>> {
    let mut map = BTreeMap::new();
    for &nu in nus {
        map.insert(
            nu.to_bits(),
            ZeroTable::compute(Order::new(nu)?, TABLE_LEN)?,
        );
    }
    Ok(map)
}

fn upper_row(
    report: &mut VerificationReport,
    check: &str,
    label: String,
    input_name: &str,
    input: f64,
    truth: f64,
    bound: f64,
    slack: f64,
    ratio: f64,
) {
    let status = if truth <= bound {
        Status::Pass
    } else if truth <= bound + slack {
        Status::Warn
    } else {
        Status::Fail
    };
    report.push_row(GridRow {
        check: check.into(),
        label,
        input_name: input_name.into(),
        input,
        truth,
        bound,
        ratio,
        status,
    });
}

fn lower_row(
    report: &mut VerificationReport,
    check: &str,
    label: String,
    input_name: &str,
    input: f64,
    truth: f64,
    bound: f64,
    slack: f64,
    ratio: f64,
) {
    let status = if bound <= truth {
        Status::Pass
    } else if bound <= truth + slack {
        Status::Warn
    } else {
        Status::Fail
    };
    report.push_row(GridRow {
        check: check.into(),
        label,
        input_name: input_name.into(),
        input,
        truth,
        bound,
        ratio,
        status,
    });
}

fn band_row(
    report: &mut VerificationReport,
    check: &str,
    label: String,
    input_name: &str,
    input: f64,
    truth: f64,
    envelope: f64,
) -> f64 {
    let ratio = truth / envelope;
    let status = if ratio.is_finite() && ratio > 0.0 {
        Status::Pass
    } else {
        Status::Fail
    };
    report.push_row(GridRow {
        check: check.into(),
        label,
        input_name: input_name.into(),
        input,
        truth,
        bound: envelope,
        ratio,
        status,
    });
    ratio
}

/// Right-tail sandwich at t = (1+eta) E tau over the full (nu, alpha, eta)
/// grid: martingale upper bound against the certified series, and all three
/// lower-bound routes.
pub fn check_right_tail_bounds(opts: &VerifyOptions) -> Result<VerificationReport> {
    let _ = opts;
    let mut report = VerificationReport::new(Relation::RightTail.id());
    let tabs = tables(NU_GRID)?;
    for &nu in NU_GRID {
        let table = &tabs[&nu.to_bits()];
        for &alpha in ALPHA_GRID_SMALL {
            let p = make_params(nu, alpha);
            for &eta in ETA_RIGHT {
                let t = (1.0 + eta) * p.mean_hitting_time();
                let tail = exact_tail(&p, table, t)?;
                let slack = tail.trunc_error + 1e-12;
                let lbl = label(&p);

                let up = right_tail_upper(&p, eta)?;
                upper_row(
                    &mut report,
                    "prop21_upper",
                    lbl.clone(),
                    "eta",
                    eta,
                    tail.value,
                    up,
                    slack,
                    up / (tail.value + slack),
                );

                let lo = right_tail_lower(&p, table, eta)?;
                lower_row(
                    &mut report,
                    "prop21_lower",
                    lbl.clone(),
                    "eta",
                    eta,
                    tail.value,
                    lo,
                    slack,
                    (tail.value + slack) / lo,
                );

                let refined = right_tail_lower_refined(&p, table, eta)?;
                lower_row(
                    &mut report,
                    "prop21_lower_refined",
                    lbl.clone(),
                    "eta",
                    eta,
                    tail.value,
                    refined,
                    slack,
                    (tail.value + slack) / refined,
                );

                if p.delta() >= 12.4 {
                    let hd = right_tail_lower_highdim(&p, eta)?;
                    lower_row(
                        &mut report,
                        "prop21_lower_highdim",
                        lbl.clone(),
                        "eta",
                        eta,
                        tail.value,
                        hd,
                        slack,
                        (tail.value + slack) / hd,
                    );
                }
            }
        }
    }
    Ok(report)
}

/// Left-tail bounds for delta in {0.5, 1.5, 3}: martingale and Kent-refined
/// upper bounds at t = (1-eta) E tau, the lower bounds at their own times,
/// and the Laplace-transform lower bound for delta > 1.
pub fn check_left_tail_bounds(opts: &VerifyOptions) -> Result<VerificationReport> {
    let _ = opts;
    let mut report = VerificationReport::new(Relation::LeftTail.id());
    let nus = [-0.75, -0.25, 0.5];
    let tabs = tables(&nus)?;
    for &nu in &nus {
        let table = &tabs[&nu.to_bits()];
        for &alpha in ALPHA_GRID_SMALL {
            let p = make_params(nu, alpha);
            let lbl = label(&p);
            for &eta in ETA_LEFT {
                let t_up = (1.0 - eta) * p.mean_hitting_time();
                let tail = exact_tail(&p, table, t_up)?;
                let p_le = 1.0 - tail.value;
                let slack = tail.trunc_error + 1e-12;

                let up = left_tail_upper(&p, eta)?;
                upper_row(
                    &mut report,
                    "prop31_upper",
                    lbl.clone(),
                    "eta",
                    eta,
                    p_le,
                    up,
                    slack,
                    up / (p_le + slack),
                );

                let up_kent = left_tail_upper_kent(&p, table, eta)?;
                upper_row(
                    &mut report,
                    "prop_last_upper",
                    lbl.clone(),
                    "eta",
                    eta,
                    p_le,
                    up_kent,
                    slack,
                    up_kent / (p_le + slack),
                );

                if p.delta() > 1.0 {
                    let (t_lo, b) = left_tail_lower(&p, eta)?;
                    let tail_lo = exact_tail(&p, table, t_lo)?;
                    let p_le_lo = 1.0 - tail_lo.value;
                    let s = tail_lo.trunc_error + 1e-12;
                    lower_row(
                        &mut report,
                        "prop31_lower",
                        lbl.clone(),
                        "eta",
                        eta,
                        p_le_lo,
                        b,
                        s,
                        (p_le_lo + s) / b,
                    );
                }

                let (t_lo, b) = left_tail_lower_alldelta(&p, table, eta)?;
                let tail_lo = exact_tail(&p, table, t_lo)?;
                let p_le_lo = 1.0 - tail_lo.value;
                let s = tail_lo.trunc_error + 1e-12;
                lower_row(
                    &mut report,
                    "prop_last_lower",
                    lbl.clone(),
                    "eta",
                    eta,
                    p_le_lo,
                    b,
                    s,
                    (p_le_lo + s) / b,
                );
            }
            if p.delta() > 1.0 {
                for u in [0.5, 1.0, 2.0, 5.0] {
                    let lt = laplace_transform(&p, table, u)?;
                    let b = laplace_lower_bound(&p, u)?;
                    lower_row(
                        &mut report,
                        "laplace_lower",
                        lbl.clone(),
                        "u",
                        u,
                        lt,
                        b,
                        1e-6 * lt,
                        lt / b,
                    );
                }
            }
        }
    }
    Ok(report)
}

fn geom_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn band_edges(ratios: &[f64]) -> (f64, f64) {
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn record_band(
    report: &mut VerificationReport,
    prefix: &str,
    base: &[f64],
    refined: &[f64],
) {
    let (lo_b, hi_b) = band_edges(base);
    let (lo_r, hi_r) = band_edges(refined);
    let drift_lo = (lo_r - lo_b).abs() / lo_b.abs().max(f64::MIN_POSITIVE);
    let drift_hi = (hi_r - hi_b).abs() / hi_b.abs().max(f64::MIN_POSITIVE);
    report.fit(&format!("{prefix}_lo"), lo_b);
    report.fit(&format!("{prefix}_hi"), hi_b);
    report.fit(&format!("{prefix}_lo_refined"), lo_r);
    report.fit(&format!("{prefix}_hi_refined"), hi_r);
    report.fit(&format!("{prefix}_drift_lo"), drift_lo);
    report.fit(&format!("{prefix}_drift_hi"), drift_hi);
    if !(lo_b.is_finite() && hi_b.is_finite() && lo_b > 0.0) {
        report.violations.push(super::Violation {
            check: prefix.into(),
            point: "band edges".into(),
            margin: f64::NAN,
        });
    }
    if drift_lo > 0.10 || drift_hi > 0.10 {
        report.violations.push(super::Violation {
            check: prefix.into(),
            point: "band stability under grid refinement".into(),
            margin: drift_lo.max(drift_hi),
        });
    }
}

/// Envelope-comparability fits: reports sup and inf of truth/envelope and
/// their stability under grid refinement.
pub fn fit_envelope_constants(
    relation: Relation,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    match relation {
        Relation::TailEnvelope => tail_envelope_band(opts),
        Relation::FEnvelope => f_envelope_band(opts),
        Relation::Moments => moment_bands(opts),
        Relation::Expmix => expmix_checks(opts),
        other => Err(crate::error::Error::precondition(format!(
            "{} is not an envelope-fit relation",
            other.id()
        ))),
    }
}

fn tail_envelope_band(opts: &VerifyOptions) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(Relation::TailEnvelope.id());
    let nus = [-0.9, -0.5, 0.0, 1.0, 3.0, 10.0];
    let tabs = tables(&nus)?;
    let mut base = vec![];
    let mut refined = vec![];
    for &nu in &nus {
        let table = &tabs[&nu.to_bits()];
        for &alpha in ALPHA_GRID_FULL {
            let p = make_params(nu, alpha);
            let mean = p.mean_hitting_time();
            let lbl = label(&p);
            for t in geom_grid(2.0 * mean, 50.0 * mean, opts.preset.t_points) {
                let truth = exact_tail(&p, table, t)?;
                let env = bessel_hit::tail_envelope(&p, table, t)?;
                base.push(band_row(
                    &mut report,
                    "thm_tails_band",
                    lbl.clone(),
                    "t_over_mean",
                    t / mean,
                    truth.value.max(truth.trunc_error),
                    env,
                ));
            }
            for t in geom_grid(2.0 * mean, 50.0 * mean, 2 * opts.preset.t_points - 1) {
                let truth = exact_tail(&p, table, t)?;
                let env = bessel_hit::tail_envelope(&p, table, t)?;
                refined.push(truth.value.max(truth.trunc_error) / env);
            }
        }
    }
    record_band(&mut report, "thm_tails_band", &base, &refined);
    Ok(report)
}

fn f_envelope_band(opts: &VerifyOptions) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(Relation::FEnvelope.id());
    let nus = [-0.9, -0.5, 0.0, 1.0, 3.0, 10.0];
    let tabs = tables(&nus)?;
    let mut base = vec![];
    let mut refined = vec![];
    let mut remark = vec![];
    for &nu in &nus {
        let table = &tabs[&nu.to_bits()];
        for &alpha in ALPHA_GRID_FULL {
            let p = make_params(nu, alpha);
            let mean = p.mean_hitting_time();
            let lbl = label(&p);
            for (pass, points) in [
                (0, opts.preset.t_points),
                (1, 2 * opts.preset.t_points - 1),
            ] {
                for t in geom_grid(2.0 * mean, 50.0 * mean, points) {
                    let truth = exact_tail(&p, table, t)?;
                    let f = f_envelope(&p, table, t)?;
                    let ratio = truth.value.max(truth.trunc_error) / f.value;
                    if pass == 0 {
                        base.push(band_row(
                            &mut report,
                            "f_envelope_band",
                            lbl.clone(),
                            "t_over_mean",
                            t / mean,
                            truth.value.max(truth.trunc_error),
                            f.value,
                        ));
                        // F ~ 1 regime: n1 >= 3 and ceil(1/ln(1/alpha)) < n2.
                        if alpha > 0.0 {
                            let cap = (1.0 / (1.0 / alpha).ln()).ceil() as usize;
                            if f.n1 >= 3 && cap < f.n2 {
                                remark.push(f.value);
                                report.push_row(GridRow {
                                    check: "f_remark".into(),
                                    label: lbl.clone(),
                                    input_name: "t_over_mean".into(),
                                    input: t / mean,
                                    truth: f.value,
                                    bound: 1.0,
                                    ratio: f.value,
                                    status: Status::Pass,
                                });
                            }
                        }
                    } else {
                        refined.push(ratio);
                    }
                }
            }
        }
    }
    record_band(&mut report, "f_envelope_band", &base, &refined);
    if !remark.is_empty() {
        let (lo, hi) = band_edges(&remark);
        report.fit("f_remark_lo", lo);
        report.fit("f_remark_hi", hi);
    }
    Ok(report)
}

/// Ordinary and central moment-envelope bands across all three alpha regimes.
/// Truth: closed forms at p = 2, Monte Carlo oracles otherwise, one shared
/// sample per parameter point.
fn moment_bands(opts: &VerifyOptions) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(Relation::Moments.id());
    let nus = [-0.9, 0.0, 1.0, 3.0, 20.0];
    let p_base = [2.0, 3.0, 4.0, 6.0, 8.0, 12.0];
    let p_refined = [2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0, 12.0];
    let tabs = tables(&nus)?;
    let mut base_m = vec![];
    let mut base_c = vec![];
    let mut ref_m = vec![];
    let mut ref_c = vec![];
    let mut slope_xy: Vec<(f64, f64)> = vec![];
    for &nu in &nus {
        let table = &tabs[&nu.to_bits()];
        for &alpha in ALPHA_GRID_FULL {
            let p = make_params(nu, alpha);
            let lbl = label(&p);
            let cfg = McConfig {
                n_paths: opts.preset.moment_paths,
                seed: seed_for(opts.seed, &format!("moments/{lbl}")),
                dt: 1e-3,
                kent_trunc: 120,
                workers: opts.workers,
            };
            let draws = sample_kent(&p, table, &cfg)?.draws;
            let mean = p.mean_hitting_time();
            let l2 = p.variance().sqrt();
            let m2 = (p.variance() + mean * mean).sqrt();
            for &pp in p_refined.iter() {
                let is_base = p_base.contains(&pp);
                // Closed forms at p = 2, Monte Carlo elsewhere.
                let (truth_m, truth_c) = if pp == 2.0 {
                    (m2, l2)
                } else {
                    (
                        moment_from_samples(&draws, pp, None)?.value,
                        moment_from_samples(&draws, pp, Some(mean))?.value,
                    )
                };
                let env_m = bessel_hit::moment_envelope(&p, table, pp)?.value;
                let env_c = bessel_hit::central_moment_envelope(&p, table, pp)?.value;
                if is_base {
                    base_m.push(band_row(
                        &mut report,
                        "thm_moments_band",
                        lbl.clone(),
                        "p",
                        pp,
                        truth_m,
                        env_m,
                    ));
                    base_c.push(band_row(
                        &mut report,
                        "momentsym_band",
                        lbl.clone(),
                        "p",
                        pp,
                        truth_c,
                        env_c,
                    ));
                    slope_xy.push((pp, (truth_c / env_c).ln()));
                }
                ref_m.push(truth_m / env_m);
                ref_c.push(truth_c / env_c);
            }
        }
    }
    record_band(&mut report, "thm_moments_band", &base_m, &ref_m);
    record_band(&mut report, "momentsym_band", &base_c, &ref_c);
    // The comparability constants may grow like C^p; report the fitted
    // exponential rate of the central-band ratio.
    let n = slope_xy.len() as f64;
    let mx = slope_xy.iter().map(|v| v.0).sum::<f64>() / n;
    let my = slope_xy.iter().map(|v| v.1).sum::<f64>() / n;
    let cov = slope_xy.iter().map(|v| (v.0 - mx) * (v.1 - my)).sum::<f64>();
    let var = slope_xy.iter().map(|v| (v.0 - mx) * (v.0 - mx)).sum::<f64>();
    report.fit("momentsym_log_ratio_slope", cov / var);
    Ok(report)
}

fn expmix_grid_models() -> Vec<(String, ExpMixModel)> {
    let mut models = vec![];
    for &alpha in &[0.0, 0.3, 0.7, 0.95] {
        let geometric: Vec<f64> = (0..30).map(|n| 0.5_f64.powi(n)).collect();
        let inv_square: Vec<f64> = (1..=60).map(|n| 1.0 / (n * n) as f64).collect();
        let flat = vec![1.0; 8];
        models.push((
            format!("geometric alpha={alpha}"),
            ExpMixModel::new(alpha, geometric).unwrap(),
        ));
        models.push((
            format!("inv_square alpha={alpha}"),
            ExpMixModel::new(alpha, inv_square).unwrap(),
        ));
        models.push((
            format!("flat8 alpha={alpha}"),
            ExpMixModel::new(alpha, flat).unwrap(),
        ));
    }
    models
}

fn empirical_ge(draws: &[f64], t: f64) -> (usize, f64) {
    let k = draws.iter().filter(|&&x| x >= t).count();
    (k, k as f64 / draws.len() as f64)
}

/// Generic-mixture checks: moment-envelope bands with one global constant,
/// the tail-envelope sandwich with fitted scale factors, and the sigma-tail
/// corollary with its constants constructed exactly as the comparability
/// argument prescribes (gamma_10 = e gamma_13, gamma_11 = beta_0 gamma_12,
/// beta = 2 ln(2 gamma_13/gamma_12)).
fn expmix_checks(opts: &VerifyOptions) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(Relation::Expmix.id());
    let n_paths = opts.preset.expmix_paths;
    let p_grid = [2.0, 3.0, 4.0, 6.0, 8.0];
    let mut ratios_m = vec![];
    let mut ratios_c = vec![];
    let mut gamma12 = f64::INFINITY;
    let mut gamma13 = 0.0_f64;
    let mut sigma_sets: Vec<(String, ExpMixModel, Vec<f64>)> = vec![];
    for (lbl, model) in expmix_grid_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(opts.seed, &format!("expmix/{lbl}")));
        let draws: Vec<f64> = (0..n_paths).map(|_| model.sample(&mut rng)).collect();
        let sigma_draws: Vec<f64> = (0..n_paths).map(|_| model.sample_sigma(&mut rng)).collect();
        let mean = model.mean();

        for &pp in &p_grid {
            let truth_m = moment_from_samples(&draws, pp, None)?.value;
            let env_m = model.moment_envelope(pp)?.value;
            ratios_m.push(band_row(
                &mut report,
                "gen_moment_band",
                lbl.clone(),
                "p",
                pp,
                truth_m,
                env_m,
            ));
            let truth_c = moment_from_samples(&draws, pp, Some(mean))?.value;
            let env_c = model.central_moment_envelope(pp)?.value;
            ratios_c.push(band_row(
                &mut report,
                "gen_central_band",
                lbl.clone(),
                "p",
                pp,
                truth_c,
                env_c,
            ));
            // Fit the sigma comparability constants over the same grid.
            let truth_s = moment_from_samples(&sigma_draws, pp, None)?.value;
            let env_s = model.sigma_moment_envelope(pp)?.value;
            let r = truth_s / env_s;
            gamma12 = gamma12.min(r);
            gamma13 = gamma13.max(r);
            band_row(
                &mut report,
                "sigma_moment_band",
                lbl.clone(),
                "p",
                pp,
                truth_s,
                env_s,
            );
        }

        // Tail-envelope sandwich on t in [2, 30] mean: fitted scale factors.
        let mut gamma_lo = f64::INFINITY;
        let mut gamma_hi = 0.0_f64;
        for t in geom_grid(2.0 * mean, 30.0 * mean, 8) {
            let env = model.tail_envelope_sum(t, 1.0)?;
            let (k, est) = empirical_ge(&draws, t);
            let (ci_lo, ci_hi) = clopper_pearson(k, draws.len(), 0.99)?;
            report.push_row(GridRow {
                check: "gen_tail_band".into(),
                label: lbl.clone(),
                input_name: "t_over_mean".into(),
                input: t / mean,
                truth: est,
                bound: env,
                ratio: ci_hi / env,
                status: Status::Pass,
            });
            gamma_hi = gamma_hi.max(ci_hi / env);
            if k >= 10 {
                gamma_lo = gamma_lo.min(ci_lo / env);
            }
        }
        report.fit(&format!("gen_tail_hi[{lbl}]"), gamma_hi);
        if gamma_lo.is_finite() {
            report.fit(&format!("gen_tail_lo[{lbl}]"), gamma_lo);
        }

        sigma_sets.push((lbl, model, sigma_draws));
    }

    let (lo_m, hi_m) = band_edges(&ratios_m);
    report.fit("gen_moment_band_lo", lo_m);
    report.fit("gen_moment_band_hi", hi_m);
    report.fit("gen_moment_c_star", hi_m.max(1.0 / lo_m));
    let (lo_c, hi_c) = band_edges(&ratios_c);
    report.fit("gen_central_band_lo", lo_c);
    report.fit("gen_central_band_hi", hi_c);

    // Sigma-tail corollary with the constants built from the fitted band.
    let beta0 = (1.0 - 2.0_f64.powf(-0.5)).sqrt();
    let gamma10 = std::f64::consts::E * gamma13;
    let gamma11 = beta0 * gamma12;
    let beta = 2.0 * (2.0 * gamma13 / gamma12).ln();
    report.fit("sigma_gamma12", gamma12);
    report.fit("sigma_gamma13", gamma13);
    report.fit("sigma_gamma10", gamma10);
    report.fit("sigma_gamma11", gamma11);
    report.fit("sigma_beta", beta);
    let min_measurable = 20.0 / n_paths as f64;
    for (lbl, model, sigma_draws) in &sigma_sets {
        for &pp in &p_grid {
            let env = model.sigma_moment_envelope(pp)?.value;
            let target_up = (-pp).exp();
            if target_up >= min_measurable {
                let (k, est) = empirical_ge(sigma_draws, gamma10 * env);
                let (ci_lo, _) = clopper_pearson(k, sigma_draws.len(), 0.99)?;
                upper_row(
                    &mut report,
                    "sigma_tail_upper",
                    lbl.clone(),
                    "p",
                    pp,
                    est,
                    target_up,
                    (est - ci_lo).max(1e-12),
                    target_up / est.max(ci_lo.max(1e-12)),
                );
            }
            let target_lo = 0.5 * (-beta * pp).exp();
            if target_lo >= min_measurable {
                let (k, est) = empirical_ge(sigma_draws, gamma11 * env);
                let (_, ci_hi) = clopper_pearson(k, sigma_draws.len(), 0.99)?;
                lower_row(
                    &mut report,
                    "sigma_tail_lower",
                    lbl.clone(),
                    "p",
                    pp,
                    est,
                    target_lo,
                    (ci_hi - est).max(1e-12),
                    est.max(1e-12) / target_lo,
                );
            }
        }
    }
    Ok(report)
}

/// Cross-validation of the samplers and the series: Kent vs SDE KS tests,
/// series-vs-sampler tail intervals, SDE vs Brownian exit at integer
/// dimension, and the dt-halving bias direction.
pub fn sampler_agreement(opts: &VerifyOptions) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(Relation::SamplerAgreement.id());
    let points = [(-0.75, 0.0), (-0.5, 0.0), (0.0, 0.5), (0.5, 0.0)];
    let nus: Vec<f64> = points.iter().map(|p| p.0).collect();
    let tabs = tables(&nus)?;
    let n = opts.preset.sampler_paths;
    for &(nu, x0) in &points {
        let p = BesselHitParams::new(Order::new(nu)?, 1.0, x0)?;
        let table = &tabs[&nu.to_bits()];
        let lbl = label(&p);
        let cfg = McConfig {
            n_paths: n,
            seed: seed_for(opts.seed, &format!("agree/{lbl}")),
            dt: p.mean_hitting_time() / 2000.0,
            kent_trunc: 0,
            workers: opts.workers,
        };
        let kent = sample_kent(&p, table, &cfg)?;
        let sde = sample_sde(&p, &cfg)?;
        let d = ks_statistic(&kent.draws, &sde.draws);
        let crit = ks_two_sample_critical(n, n, 0.01);
        upper_row(
            &mut report,
            "ks_kent_sde",
            lbl.clone(),
            "dt_div",
            2000.0,
            d,
            crit,
            0.0,
            crit / d.max(1e-12),
        );

        // dt halving: the Kent-vs-SDE mean gap must not grow beyond noise.
        let cfg_half = McConfig {
            dt: cfg.dt / 2.0,
            ..cfg.clone()
        };
        let sde_half = sample_sde(&p, &cfg_half)?;
        let (mk, sk) = kent.mean_stderr();
        let (m1, s1) = sde.mean_stderr();
        let (m2, s2) = sde_half.mean_stderr();
        let gap1 = (m1 - mk).abs();
        let gap2 = (m2 - mk).abs();
        let noise = 4.0 * (sk + s1 + s2);
        upper_row(
            &mut report,
            "sde_dt_bias",
            lbl.clone(),
            "dt_half_gap",
            cfg_half.dt,
            gap2,
            gap1 + noise,
            0.0,
            (gap1 + noise) / gap2.max(1e-12),
        );

        // Series vs the Kent sampler: certified values inside the 99% CI.
        let mean = p.mean_hitting_time();
        for mult in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let t = mult * mean;
            let tv = exact_tail(&p, table, t)?;
            let (_, ci_lo, ci_hi) = kent.empirical_tail(t)?;
            let ok = tv.value + tv.trunc_error >= ci_lo && tv.value - tv.trunc_error <= ci_hi;
            report.push_row(GridRow {
                check: "series_vs_kent".into(),
                label: lbl.clone(),
                input_name: "t_over_mean".into(),
                input: mult,
                truth: tv.value,
                bound: ci_hi,
                ratio: (tv.value.max(1e-12)) / ci_hi.max(1e-12),
                status: if ok { Status::Pass } else { Status::Fail },
            });
            if !ok {
                report.violations.push(super::Violation {
                    check: "series_vs_kent".into(),
                    point: format!("{lbl} @ t={t}"),
                    margin: (tv.value - ci_hi).max(ci_lo - tv.value),
                });
            }
        }
    }

    // delta = 3: |BM_3| exit from the unit ball has the hitting-time law.
    let p = BesselHitParams::new(Order::new(0.5)?, 1.0, 0.0)?;
    let n_bm = n.min(20_000);
    let cfg = McConfig {
        n_paths: n_bm,
        seed: seed_for(opts.seed, "agree/bm3"),
        dt: p.mean_hitting_time() / 8000.0,
        kent_trunc: 0,
        workers: opts.workers,
    };
    let sde = sample_sde(&p, &cfg)?;
    let ball = Ball { radius: 1.0 };
    let bm = sample_bm_exit(3, &[0.0, 0.0, 0.0], &ball, &cfg)?;
    let d = ks_statistic(&sde.draws, &bm.draws);
    let crit = ks_two_sample_critical(n_bm, n_bm, 0.01);
    // The BM sampler detects the exit at step ends, which leaves an
    // O(sqrt(dt)) one-sided shift; allow it explicitly on top of the
    // critical value.
    let shift_allowance = 1.2 * (cfg.dt / p.mean_hitting_time()).sqrt();
    upper_row(
        &mut report,
        "ks_sde_bm_exit",
        "nu=0.5 vs BM(3) ball".into(),
        "dt_div",
        8000.0,
        d,
        crit + shift_allowance,
        0.0,
        (crit + shift_allowance) / d.max(1e-12),
    );
    Ok(report)
}

/// Brownian exit-time bounds: d = 2 unit ball from the center at n paths,
/// plus a pathwise ball/ellipsoid/ball sandwich as the region generalization.
pub fn check_bm_exit_bounds(opts: &VerifyOptions) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(Relation::BmExit.id());
    let d = 2usize;
    let r = 1.0_f64;
    let mean = r * r / d as f64;
    let cfg = McConfig {
        n_paths: opts.preset.bm_paths,
        seed: seed_for(opts.seed, "bmexit/disk"),
        dt: mean / 2000.0,
        kent_trunc: 0,
        workers: opts.workers,
    };
    let ball = Ball { radius: r };
    let batch = sample_bm_exit(d, &[0.0, 0.0], &ball, &cfg)?;

    for &eta in ETA_LEFT {
        let t = (1.0 - eta) * mean;
        let bound = (-(d as f64) * eta * eta / (8.0 * (1.0 - eta))).exp();
        let (_, ge_lo, ge_hi) = batch.empirical_tail(t)?;
        let le_est = 1.0 - ge_hi; // conservative: lower CI of P(tau <= t)
        let le_hi = 1.0 - ge_lo;
        upper_row(
            &mut report,
            "bm_exit_left",
            "d=2 ball r=1".into(),
            "eta",
            eta,
            le_est,
            bound,
            (le_hi - le_est).max(1e-12),
            bound / le_est.max(1e-12),
        );
    }
    for eta in [0.25, 0.5, 1.0, 2.0, 5.0] {
        let t = (1.0 + eta) * mean;
        let bound = (-(d as f64) * eta * eta / (8.0 * (1.0 + eta))).exp();
        let (est, ge_lo, _) = batch.empirical_tail(t)?;
        upper_row(
            &mut report,
            "bm_exit_right",
            "d=2 ball r=1".into(),
            "eta",
            eta,
            ge_lo,
            bound,
            (est - ge_lo).max(1e-12),
            bound / ge_lo.max(1e-12),
        );
    }

    // Region between two balls: pathwise sandwich of the empirical tails.
    let cfg2 = McConfig {
        n_paths: opts.preset.bm_paths.min(20_000),
        seed: seed_for(opts.seed, "bmexit/sandwich"),
        dt: mean / 2000.0,
        kent_trunc: 0,
        workers: opts.workers,
    };
    let b0 = [0.2, 0.1];
    let inner = Ball { radius: 1.0 };
    let outer = Ball { radius: 2.0 };
    let region = Ellipsoid {
        semi_axes: vec![1.0, 2.0],
    };
    let ti = sample_bm_exit(d, &b0, &inner, &cfg2)?;
    let tm = sample_bm_exit(d, &b0, &region, &cfg2)?;
    let to = sample_bm_exit(d, &b0, &outer, &cfg2)?;
    for mult in [0.5, 1.0, 2.0, 4.0] {
        let t = mult * mean;
        let (pi, _, _) = ti.empirical_tail(t)?;
        let (pm, _, _) = tm.empirical_tail(t)?;
        let (po, _, _) = to.empirical_tail(t)?;
        let ok = pi <= pm && pm <= po;
        report.push_row(GridRow {
            check: "bm_exit_sandwich".into(),
            label: "d=2 ellipsoid(1,2) between balls 1,2".into(),
            input_name: "t_over_mean".into(),
            input: mult,
            truth: pm,
            bound: po,
            ratio: (po.max(1e-12)) / pm.max(1e-12),
            status: if ok { Status::Pass } else { Status::Fail },
        });
        if !ok {
            report.violations.push(super::Violation {
                check: "bm_exit_sandwich".into(),
                point: format!("t={t}"),
                margin: (pi - pm).max(pm - po),
            });
        }
    }
    Ok(report)
}
