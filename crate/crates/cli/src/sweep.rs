//! Runs every series of a config at every sweep point.

use fdrelay::channel::watts_to_dbm;
use fdrelay::schemes::Multipliers;
use fdrelay::simulator::{
    benchmark_conventional_fd, benchmark_ideal_fd, derive_seed, optimize_r0, run, Control, RunConfig, RunSummary,
    Scheme, SimError, SlotRecord,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, ControlId, ExperimentConfig, PointSettings, SchemeId, Series};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("{scheme} at sweep value {value}: {source}")]
    Run {
        scheme: &'static str,
        value: f64,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// One output line: a series evaluated at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: &'static str,
    pub control: &'static str,
    /// `NaN` when nothing is swept.
    pub sweep_value: f64,
    pub si_db: f64,
    pub throughput: f64,
    pub arrival_rate: f64,
    pub avg_power_dbm: f64,
    /// Nominal total power `P` where the point defines one.
    pub budget_power_dbm: Option<f64>,
    pub source_power_dbm: f64,
    pub avg_delay: Option<f64>,
    pub state_fractions: [f64; 4],
    pub mu_final: Option<f64>,
    pub zeta_final: Option<f64>,
    pub r0: Option<f64>,
    pub seed: u64,
}

/// A row plus the per-slot trace when one was requested.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub index: usize,
    pub row: ResultRow,
    pub trace: Option<Vec<SlotRecord>>,
}

fn control_name(c: ControlId) -> &'static str {
    match c {
        ControlId::Balance => "balance",
        ControlId::Delay => "delay",
    }
}

fn base_run(config: &ExperimentConfig, point: &PointSettings, series: &Series, scheme: Scheme, seed: u64) -> RunConfig {
    let mut rc = RunConfig::new(scheme, point.means);
    rc.slots = config.slots;
    rc.seed = seed;
    rc.warmup = config.warmup;
    rc.schedule = config.schedule();
    rc.record_trace = config.trace;
    rc.initial.mu = config.estimator.mu0;
    if let Some(z) = config.estimator.zeta0 {
        rc.initial.zeta = z;
    }
    if let Some(g) = config.estimator.zeta_gain {
        rc.zeta_gain = g;
    }
    rc.control = match series.control {
        ControlId::Balance => Control::Balance,
        // Validation guarantees a target for delay series.
        ControlId::Delay => Control::DelayTarget(point.target_delay.unwrap_or(f64::NAN)),
    };
    rc
}

fn summary_row(series: &Series, value: f64, point: &PointSettings, s: &RunSummary, r0: Option<f64>) -> ResultRow {
    ResultRow {
        scheme: series.scheme.name(),
        control: control_name(series.control),
        sweep_value: value,
        si_db: point.si_db,
        throughput: s.throughput,
        arrival_rate: s.arrival_rate,
        avg_power_dbm: watts_to_dbm(s.avg_power),
        budget_power_dbm: point.powers.budget().map(watts_to_dbm),
        source_power_dbm: watts_to_dbm(s.avg_source_power),
        avg_delay: s.avg_delay,
        state_fractions: s.state_fractions,
        mu_final: Some(s.final_mu),
        zeta_final: Some(s.final_zeta),
        r0,
        seed: s.seed,
    }
}

/// Evaluates one series at sweep point `index` with value `value`.
pub fn run_point(config: &ExperimentConfig, index: usize, value: f64, series: &Series) -> Result<PointResult, SweepError> {
    let point = config.point(value, series)?;
    let seed = derive_seed(config.seed, index as u64);
    let wrap = |source: SimError| SweepError::Run { scheme: series.scheme.name(), value, source };
    let powers = point.powers.power_set();

    let (row, trace) = match series.scheme {
        SchemeId::FdConventional | SchemeId::FdIdeal => {
            let (ps, pr) = point.powers.full_duplex();
            let total = ps + pr;
            let t = ps / total;
            let fd = if series.scheme == SchemeId::FdIdeal {
                benchmark_ideal_fd(&point.means, total, t, config.slots, seed)
            } else {
                benchmark_conventional_fd(&point.means, total, t, config.slots, seed)
            }
            .map_err(wrap)?;
            let row = ResultRow {
                scheme: series.scheme.name(),
                control: control_name(series.control),
                sweep_value: value,
                si_db: point.si_db,
                throughput: fd.rate,
                arrival_rate: fd.sr_mean,
                avg_power_dbm: watts_to_dbm(fd.avg_power),
                budget_power_dbm: point.powers.budget().map(watts_to_dbm),
                source_power_dbm: watts_to_dbm(ps),
                avg_delay: None,
                state_fractions: [0.0, 0.0, 0.0, 1.0],
                mu_final: None,
                zeta_final: None,
                r0: None,
                seed,
            };
            (row, None)
        }
        SchemeId::Fr => {
            let base = base_run(config, &point, series, Scheme::FixedRate { powers, r0: 1.0 }, seed);
            let r0 = match config.fixed_rate.r0 {
                Some(r0) => r0,
                None => optimize_r0(&RunConfig { record_trace: false, ..base }, &config.fixed_rate.grid()).map_err(wrap)?.0,
            };
            let out = run(&RunConfig { scheme: Scheme::FixedRate { powers, r0 }, ..base }).map_err(wrap)?;
            (summary_row(series, value, &point, &out.summary, Some(r0)), out.trace)
        }
        SchemeId::Ap | SchemeId::Fp | SchemeId::Hd => {
            let scheme = match series.scheme {
                SchemeId::Ap => {
                    let budget = point.powers.budget().ok_or(ConfigError::Missing("powers.total_dbm"))?;
                    Scheme::AdaptivePower { budget, fallback: powers }
                }
                SchemeId::Fp => Scheme::FixedPower { powers },
                _ => {
                    let (source_power, relay_power) = point.powers.half_duplex();
                    Scheme::HalfDuplex { source_power, relay_power }
                }
            };
            let mut rc = base_run(config, &point, series, scheme, seed);
            if series.scheme != SchemeId::Ap {
                rc.initial = Multipliers { mu: rc.initial.mu, zeta: 0.0 };
            }
            let out = run(&rc).map_err(wrap)?;
            let mut row = summary_row(series, value, &point, &out.summary, None);
            if series.scheme != SchemeId::Ap {
                row.zeta_final = None;
            }
            (row, out.trace)
        }
    };
    Ok(PointResult { index, row, trace })
}

/// Runs every (point, series) pair. Point `k` uses the seed derived from the
/// master seed and `k`, so all series at a point see the same fading trace.
/// Results come back in sweep order, series order within a point.
pub fn run_sweep_detailed(config: &ExperimentConfig) -> Result<Vec<PointResult>, SweepError> {
    let tasks: Vec<(usize, f64, Series)> = config
        .sweep_values()
        .into_iter()
        .enumerate()
        .flat_map(|(k, x)| config.series.iter().map(move |s| (k, x, *s)))
        .collect();
    tasks
        .par_iter()
        .map(|(k, x, s)| run_point(config, *k, *x, s))
        .collect()
}

/// Rows of [`run_sweep_detailed`] without traces.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>, SweepError> {
    Ok(run_sweep_detailed(config)?.into_iter().map(|r| r.row).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn one_point_sweep_equals_single_run() {
        let swept = parse_config(
            "slots = 4000\nseed = 9\n[sweep]\nvariable = \"total_power_dbm\"\nvalues = [30]\n[[series]]\nscheme = \"fp\"\n",
        )
        .unwrap();
        let single = parse_config("slots = 4000\nseed = 9\n[powers]\ntotal_dbm = 30\n[[series]]\nscheme = \"fp\"\n").unwrap();
        let a = run_sweep(&swept).unwrap();
        let b = run_sweep(&single).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].throughput, b[0].throughput);
        assert_eq!(a[0].state_fractions, b[0].state_fractions);
        assert_eq!(a[0].seed, derive_seed(9, 0));
    }

    #[test]
    fn rows_follow_sweep_then_series_order() {
        let c = parse_config(
            "slots = 1000\n[sweep]\nvariable = \"total_power_dbm\"\nvalues = [20, 25, 30]\n\
             [[series]]\nscheme = \"hd\"\n[[series]]\nscheme = \"fd_ideal\"\n",
        )
        .unwrap();
        let rows = run_sweep(&c).unwrap();
        let keys: Vec<_> = rows.iter().map(|r| (r.sweep_value, r.scheme)).collect();
        assert_eq!(
            keys,
            vec![(20.0, "hd"), (20.0, "fd_ideal"), (25.0, "hd"), (25.0, "fd_ideal"), (30.0, "hd"), (30.0, "fd_ideal")]
        );
        assert_eq!(rows[0].seed, rows[1].seed);
        assert_ne!(rows[0].seed, rows[2].seed);
        assert_eq!(rows[0].state_fractions[3], 0.0);
    }

    #[test]
    fn fixed_rate_reports_its_rate() {
        let c = parse_config(
            "slots = 2000\n[powers]\ntotal_dbm = 30\n[fixed_rate]\ngrid_start = 1\ngrid_stop = 3\ngrid_step = 1\n\
             [[series]]\nscheme = \"fr\"\n",
        )
        .unwrap();
        let row = &run_sweep(&c).unwrap()[0];
        assert!([1.0, 2.0, 3.0].contains(&row.r0.unwrap()));
    }
}
