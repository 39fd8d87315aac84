//! Zero-table cache: versioned CSV `zerocache_v1.csv` with header
//! `nu,n,zero,accuracy`, one row per zero, 17 significant digits.
//! Lookup is keyed by (nu rounded to 1e-12, n). A cached table is validated
//! on read by re-evaluating J_nu at every stored zero; corrupt entries are
//! recomputed rather than trusted.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{Order, ZeroTable, DEFAULT_ZERO_ACCURACY};

pub const CACHE_FILE: &str = "zerocache_v1.csv";

fn nu_key(nu: f64) -> i64 {
    (nu * 1e12).round() as i64
}

pub fn cache_path(dir: &Path) -> PathBuf {
    dir.join(CACHE_FILE)
}

/// Load the first `n` zeros for `nu` from the cache directory, computing and
/// persisting them if absent or invalid.
pub fn load_or_compute(dir: &Path, nu: Order, n: usize) -> Result<ZeroTable> {
    let path = cache_path(dir);
    let mut entries = read_entries(&path).unwrap_or_default();
    let key = nu_key(nu.get());

    if let Some(rows) = entries.get(&key) {
        if rows.len() >= n {
            let zeros: Vec<f64> = rows[..n].iter().map(|r| r.0).collect();
            let accuracy = rows[..n]
                .iter()
                .map(|r| r.1)
                .fold(0.0_f64, f64::max)
                .max(f64::MIN_POSITIVE);
            if let Ok(table) = ZeroTable::from_certified(nu, zeros, accuracy) {
                return Ok(table);
            }
            // Validation failed: drop the poisoned group and recompute.
            entries.remove(&key);
        }
    }

    let table = ZeroTable::compute_with_accuracy(nu, n, DEFAULT_ZERO_ACCURACY)?;
    entries.insert(
        key,
        table
            .zeros()
            .iter()
            .map(|&z| (z, table.accuracy()))
            .collect(),
    );
    write_entries(&path, &entries)?;
    Ok(table)
}

type Entries = BTreeMap<i64, Vec<(f64, f64)>>;

fn read_entries(path: &Path) -> Result<Entries> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("nu,n,zero,accuracy") => {}
        _ => return Err(Error::Cache("missing or wrong header".into())),
    }
    let mut map: Entries = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Cache(format!("bad row at line {}", lineno + 2)))
        };
        let nu = parse(parts.next())?;
        let n = parse(parts.next())? as usize;
        let zero = parse(parts.next())?;
        let accuracy = parse(parts.next())?;
        let rows = map.entry(nu_key(nu)).or_default();
        if n != rows.len() + 1 {
            return Err(Error::Cache(format!(
                "non-consecutive index n={} at line {}",
                n,
                lineno + 2
            )));
        }
        rows.push((zero, accuracy));
    }
    Ok(map)
}

fn write_entries(path: &Path, entries: &Entries) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::from("nu,n,zero,accuracy\n");
    for (key, rows) in entries {
        let nu = *key as f64 / 1e12;
        for (i, (zero, accuracy)) in rows.iter().enumerate() {
            out.push_str(&format!(
                "{:.16e},{},{:.16e},{:.16e}\n",
                nu,
                i + 1,
                zero,
                accuracy
            ));
        }
    }
    // Atomic replace: write a temp file in the same directory, then rename.
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, out)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
