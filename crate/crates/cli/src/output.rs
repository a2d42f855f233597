//! CSV output for result rows and per-slot traces.

use std::io::Write;
use std::path::Path;

use fdrelay::simulator::{running_delay, SlotRecord};
use thiserror::Error;

use crate::sweep::ResultRow;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub const RESULT_COLUMNS: [&str; 19] = [
    "scheme",
    "control",
    "sweep_variable",
    "sweep_value",
    "si_db",
    "throughput",
    "arrival_rate",
    "avg_power_dbm",
    "budget_power_dbm",
    "source_power_dbm",
    "avg_delay",
    "frac_silent",
    "frac_source",
    "frac_relay",
    "frac_full_duplex",
    "mu_final",
    "zeta_final",
    "r0",
    "seed",
];

pub const TRACE_COLUMNS: [&str; 10] = [
    "slot",
    "state",
    "r_sr",
    "r_rd",
    "consumed_power",
    "queue",
    "mu_e",
    "zeta_e",
    "running_delay",
    "queue_before",
];

/// Formats `x` with 6 significant digits, dropping trailing zeros.
/// Non-finite values become an empty field.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let mut s = format!("{x:.decimals$}");
        if s.contains('.') {
            s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        }
        s
    } else {
        format!("{x:.5e}")
    };
    // Rounding can carry into a new leading digit (e.g. 999999.7); recheck.
    if s.trim_start_matches('-').split(['.', 'e']).next().is_some_and(|d| d.trim_start_matches('0').len() > 6) {
        format!("{x:.5e}")
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

/// Writes rows as CSV with the header of [`RESULT_COLUMNS`].
pub fn write_results_to<W: Write>(rows: &[ResultRow], sweep_variable: &str, out: W) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        let f = r.state_fractions;
        w.write_record([
            r.scheme.to_string(),
            r.control.to_string(),
            sweep_variable.to_string(),
            sig6(r.sweep_value),
            sig6(r.si_db),
            sig6(r.throughput),
            sig6(r.arrival_rate),
            sig6(r.avg_power_dbm),
            opt(r.budget_power_dbm),
            sig6(r.source_power_dbm),
            opt(r.avg_delay),
            sig6(f[0]),
            sig6(f[1]),
            sig6(f[2]),
            sig6(f[3]),
            opt(r.mu_final),
            opt(r.zeta_final),
            opt(r.r0),
            r.seed.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn create(path: &Path) -> Result<std::fs::File, OutputError> {
    std::fs::File::create(path).map_err(|source| OutputError::Io { path: path.display().to_string(), source })
}

/// Writes rows to `path`.
pub fn write_results(rows: &[ResultRow], sweep_variable: &str, path: &Path) -> Result<(), OutputError> {
    write_results_to(rows, sweep_variable, create(path)?)
}

/// Writes a per-slot trace with the running Little's-law delay.
pub fn write_trace_to<W: Write>(trace: &[SlotRecord], out: W) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for (i, (r, d)) in trace.iter().zip(running_delay(trace)).enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.state.index().to_string(),
            sig6(r.r_sr),
            sig6(r.r_rd),
            sig6(r.consumed_power),
            sig6(r.queue_after),
            sig6(r.mu_e),
            sig6(r.zeta_e),
            opt(d),
            sig6(r.queue_before),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_trace(trace: &[SlotRecord], path: &Path) -> Result<(), OutputError> {
    write_trace_to(trace, create(path)?)
}
