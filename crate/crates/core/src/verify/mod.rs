//! Bound-verification and constant-estimation harness.
//!
//! Every relation check compares an inequality or comparability claim against
//! ground truth from the certified series or a Monte Carlo sampler. No raw
//! point comparison is ever used: each pass/fail decision folds in the series
//! truncation bound or an exact 99% binomial interval. A bound broken inside
//! that slack is a warning; broken beyond it, a violation.

mod relations;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use relations::{
    check_bm_exit_bounds, check_left_tail_bounds, check_right_tail_bounds,
    fit_envelope_constants, sampler_agreement,
};

/// Identifies a family of checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// Right-tail upper/lower bounds at t = (1+eta) E tau.
    RightTail,
    /// Left-tail bounds, each lower bound at its own evaluation time.
    LeftTail,
    /// Tail-envelope comparability band on t in [2, 50] E tau.
    TailEnvelope,
    /// F-envelope band and its F ~ 1 regime.
    FEnvelope,
    /// Ordinary and central moment-envelope bands across the alpha regimes.
    Moments,
    /// Generic exponential-mixture bands: moments, tails and sigma tails.
    Expmix,
    /// Kent vs SDE vs series cross-validation.
    SamplerAgreement,
    /// Brownian exit-time bounds for regions between two balls.
    BmExit,
}

impl Relation {
    pub fn all() -> &'static [Relation] {
        &[
            Relation::RightTail,
            Relation::LeftTail,
            Relation::TailEnvelope,
            Relation::FEnvelope,
            Relation::Moments,
            Relation::Expmix,
            Relation::SamplerAgreement,
            Relation::BmExit,
        ]
    }

    pub fn id(&self) -> &'static str {
        match self {
            Relation::RightTail => "right-tail",
            Relation::LeftTail => "left-tail",
            Relation::TailEnvelope => "tail-envelope",
            Relation::FEnvelope => "f-envelope",
            Relation::Moments => "moments",
            Relation::Expmix => "expmix",
            Relation::SamplerAgreement => "sampler-agreement",
            Relation::BmExit => "bm-exit",
        }
    }

    /// Parse a relation name; historical short tags are accepted as aliases.
    pub fn parse(name: &str) -> Result<Relation> {
        let r = match name.to_ascii_lowercase().as_str() {
            "right-tail" | "right_tail" | "prop21" => Relation::RightTail,
            "left-tail" | "left_tail" | "prop31" | "prop-last" | "prop_last" => Relation::LeftTail,
            "tail-envelope" | "tail_envelope" | "thm-tails" | "thm_tails" => {
                Relation::TailEnvelope
            }
            "f-envelope" | "f_envelope" => Relation::FEnvelope,
            "moments" | "thm-moments" | "thm_moments" | "momentsym" | "central-moments" => {
                Relation::Moments
            }
            "expmix" | "tails-tau-gen" | "tails_tau_gen" | "sigma-tail" => Relation::Expmix,
            "sampler-agreement" | "sampler_agreement" | "samplers" => Relation::SamplerAgreement,
            "bm-exit" | "bm_exit" | "brownian-exit" => Relation::BmExit,
            other => {
                return Err(Error::domain(format!("unknown relation '{other}'")));
            }
        };
        Ok(r)
    }
}

/// Numeric knobs for a verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPreset {
    pub name: String,
    /// Paths for the moment-band Monte Carlo oracles.
    pub moment_paths: usize,
    /// Paths per sampler in cross-validation checks.
    pub sampler_paths: usize,
    /// Paths for the generic-mixture checks.
    pub expmix_paths: usize,
    /// Paths for the Brownian exit checks.
    pub bm_paths: usize,
    /// Points per t-grid in envelope bands (the stability pass doubles this).
    pub t_points: usize,
}

impl GridPreset {
    pub fn default_grid() -> GridPreset {
        GridPreset {
            name: "default".into(),
            moment_paths: 1_000_000,
            sampler_paths: 100_000,
            expmix_paths: 400_000,
            bm_paths: 100_000,
            t_points: 12,
        }
    }

    pub fn quick() -> GridPreset {
        GridPreset {
            name: "quick".into(),
            moment_paths: 100_000,
            sampler_paths: 20_000,
            expmix_paths: 100_000,
            bm_paths: 20_000,
            t_points: 8,
        }
    }

    pub fn parse(name: &str) -> Result<GridPreset> {
        match name {
            "default" => Ok(GridPreset::default_grid()),
            "quick" => Ok(GridPreset::quick()),
            other => Err(Error::domain(format!("unknown grid preset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub preset: GridPreset,
    pub seed: u64,
    pub workers: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            preset: GridPreset::default_grid(),
            seed: 0xBE55E1,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Pass => "pass",
            Status::Warn => "warn",
            Status::Fail => "fail",
        };
        f.write_str(s)
    }
}

/// One grid point of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub check: String,
    /// Human-readable parameter point (problem instance or model).
    pub label: String,
    pub input_name: String,
    pub input: f64,
    pub truth: f64,
    pub bound: f64,
    pub ratio: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub point: String,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub relation_id: String,
    pub rows: Vec<GridRow>,
    pub ratios: Vec<f64>,
    pub fitted_constants: BTreeMap<String, f64>,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub(crate) fn new(relation_id: &str) -> VerificationReport {
        VerificationReport {
            relation_id: relation_id.to_string(),
            rows: vec![],
            ratios: vec![],
            fitted_constants: BTreeMap::new(),
            violations: vec![],
        }
    }

    /// A report with no violations is a pass (warnings allowed).
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn push_row(&mut self, row: GridRow) {
        self.ratios.push(row.ratio);
        if row.status == Status::Fail {
            self.violations.push(Violation {
                check: row.check.clone(),
                point: format!("{} @ {}={}", row.label, row.input_name, row.input),
                margin: row.truth - row.bound,
            });
        }
        self.rows.push(row);
    }

    pub(crate) fn fit(&mut self, name: &str, value: f64) {
        self.fitted_constants.insert(name.to_string(), value);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One CSV row per grid point.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "relation_id,check,label,input_name,input,truth,bound,ratio,status"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                self.relation_id,
                r.check,
                r.label.replace(',', ";"),
                r.input_name,
                r.input,
                r.truth,
                r.bound,
                r.ratio,
                r.status
            )?;
        }
        Ok(())
    }
}

/// Run one relation end to end.
pub fn run_relation(relation: Relation, opts: &VerifyOptions) -> Result<VerificationReport> {
    match relation {
        Relation::RightTail => check_right_tail_bounds(opts),
        Relation::LeftTail => check_left_tail_bounds(opts),
        Relation::TailEnvelope => fit_envelope_constants(Relation::TailEnvelope, opts),
        Relation::FEnvelope => fit_envelope_constants(Relation::FEnvelope, opts),
        Relation::Moments => fit_envelope_constants(Relation::Moments, opts),
        Relation::Expmix => fit_envelope_constants(Relation::Expmix, opts),
        Relation::SamplerAgreement => sampler_agreement(opts),
        Relation::BmExit => check_bm_exit_bounds(opts),
    }
}

/// Deterministic 64-bit hash for per-check seed derivation (FNV-1a).
pub(crate) fn seed_for(base: u64, salt: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ base;
    for b in salt.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
