//! Experiment configuration files.
//!
//! A config is a TOML document. Every key except `[[series]]` has a default;
//! unknown keys are rejected. Powers are given in dBm and gains in dB, and are
//! converted to linear units once, when a sweep point is resolved.

use fdrelay::adaptation::StepSchedule;
use fdrelay::channel::{db_to_linear, dbm_to_watts, ChannelMeans, LinkConfig};
use fdrelay::schemes::PowerSet;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("could not parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    /// Adaptive rate, adaptive power.
    Ap,
    /// Adaptive rate, fixed power.
    Fp,
    /// Fixed rate, fixed power.
    Fr,
    /// Buffer-aided half-duplex benchmark.
    Hd,
    /// Conventional full-duplex benchmark.
    FdConventional,
    /// Full-duplex benchmark without self-interference.
    FdIdeal,
}

impl SchemeId {
    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Ap => "ap",
            SchemeId::Fp => "fp",
            SchemeId::Fr => "fr",
            SchemeId::Hd => "hd",
            SchemeId::FdConventional => "fd_conventional",
            SchemeId::FdIdeal => "fd_ideal",
        }
    }

    pub fn is_fd_benchmark(self) -> bool {
        matches!(self, SchemeId::FdConventional | SchemeId::FdIdeal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlId {
    /// `mu` balances the relay buffer.
    #[default]
    Balance,
    /// `mu` holds the average delay at `estimator.target_delay`.
    Delay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Total power `P` in dBm.
    TotalPowerDbm,
    /// Source power in dBm, relay power held at `powers.relay_dbm`.
    SourcePowerDbm,
    /// Mean self-interference gain in dB.
    SiDb,
    /// Target delay `T0` in slots.
    TargetDelay,
}

impl SweepVariable {
    pub fn column_name(self) -> &'static str {
        match self {
            SweepVariable::TotalPowerDbm => "total_power_dbm",
            SweepVariable::SourcePowerDbm => "source_power_dbm",
            SweepVariable::SiDb => "si_db",
            SweepVariable::TargetDelay => "target_delay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    #[serde(default = "default_distance")]
    pub d_sr_m: f64,
    #[serde(default = "default_distance")]
    pub d_rd_m: f64,
    #[serde(default = "default_carrier")]
    pub carrier_freq_hz: f64,
    #[serde(default = "default_exponent")]
    pub path_loss_exp: f64,
    #[serde(default = "default_noise")]
    pub noise_dbm: f64,
    #[serde(default = "default_si")]
    pub si_db: f64,
}

fn default_distance() -> f64 {
    500.0
}
fn default_carrier() -> f64 {
    2.4e9
}
fn default_exponent() -> f64 {
    3.0
}
fn default_noise() -> f64 {
    -117.0
}
fn default_si() -> f64 {
    -133.0
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            d_sr_m: default_distance(),
            d_rd_m: default_distance(),
            carrier_freq_hz: default_carrier(),
            path_loss_exp: default_exponent(),
            noise_dbm: default_noise(),
            si_db: default_si(),
        }
    }
}

impl LinkSection {
    pub fn to_link_config(&self, si_db: f64) -> LinkConfig {
        LinkConfig {
            d_sr: self.d_sr_m,
            d_rd: self.d_rd_m,
            carrier_freq: self.carrier_freq_hz,
            path_loss_exp: self.path_loss_exp,
            noise_power: dbm_to_watts(self.noise_dbm),
            si_mean_gain: db_to_linear(si_db),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    /// Total power `P`: the AP budget and the split for FP/FR and the benchmarks.
    pub total_dbm: Option<f64>,
    /// Source share `t` of `P` in the full-duplex state.
    #[serde(default = "default_split")]
    pub split: f64,
    /// Relay power for source-power sweeps.
    pub relay_dbm: Option<f64>,
    pub ps1_dbm: Option<f64>,
    pub pr2_dbm: Option<f64>,
    pub ps3_dbm: Option<f64>,
    pub pr3_dbm: Option<f64>,
}

fn default_split() -> f64 {
    0.5
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            total_dbm: None,
            split: default_split(),
            relay_dbm: None,
            ps1_dbm: None,
            pr2_dbm: None,
            ps3_dbm: None,
            pr3_dbm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    #[serde(default = "default_step_initial")]
    pub step_initial: f64,
    #[serde(default = "default_step_horizon")]
    pub step_horizon: u64,
    #[serde(default = "default_step_floor")]
    pub step_floor: f64,
    #[serde(default = "default_mu0")]
    pub mu0: f64,
    /// Initial power price; defaults to `1 / (P ln 2)` for the AP scheme.
    pub zeta0: Option<f64>,
    /// Gain on the power-price step; defaults to `1 / (P^2 ln 2)` for the AP scheme.
    pub zeta_gain: Option<f64>,
    /// `T0` for series with `control = "delay"` when the delay is not swept.
    pub target_delay: Option<f64>,
}

fn default_step_initial() -> f64 {
    StepSchedule::gentle().initial
}
fn default_step_horizon() -> u64 {
    StepSchedule::gentle().horizon
}
fn default_step_floor() -> f64 {
    StepSchedule::gentle().floor
}
fn default_mu0() -> f64 {
    0.5
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            step_initial: default_step_initial(),
            step_horizon: default_step_horizon(),
            step_floor: default_step_floor(),
            mu0: default_mu0(),
            zeta0: None,
            zeta_gain: None,
            target_delay: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedRateSection {
    /// Fixed rate in bits/symbol; when absent it is optimized over the grid.
    pub r0: Option<f64>,
    #[serde(default = "default_grid_start")]
    pub grid_start: f64,
    #[serde(default = "default_grid_stop")]
    pub grid_stop: f64,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
}

fn default_grid_start() -> f64 {
    0.1
}
fn default_grid_stop() -> f64 {
    12.0
}
fn default_grid_step() -> f64 {
    0.1
}

impl Default for FixedRateSection {
    fn default() -> Self {
        Self {
            r0: None,
            grid_start: default_grid_start(),
            grid_stop: default_grid_stop(),
            grid_step: default_grid_step(),
        }
    }
}

impl FixedRateSection {
    pub fn grid(&self) -> Vec<f64> {
        range_values(self.grid_start, self.grid_stop, self.grid_step)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVariable,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
    /// Explicit sweep points, used instead of `start`/`stop`/`step`.
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub scheme: SchemeId,
    #[serde(default)]
    pub control: ControlId,
    /// Overrides `link.si_db` for this series.
    pub si_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_slots")]
    slots: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    warmup: u64,
    #[serde(default)]
    trace: bool,
    #[serde(default)]
    link: LinkSection,
    #[serde(default)]
    powers: PowerSection,
    #[serde(default)]
    estimator: EstimatorSection,
    #[serde(default)]
    fixed_rate: FixedRateSection,
    sweep: Option<SweepSection>,
    series: Option<Vec<Series>>,
}

fn default_slots() -> u64 {
    100_000
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub slots: u64,
    pub seed: u64,
    pub warmup: u64,
    pub trace: bool,
    pub link: LinkSection,
    pub powers: PowerSection,
    pub estimator: EstimatorSection,
    pub fixed_rate: FixedRateSection,
    pub sweep: Option<SweepSection>,
    pub series: Vec<Series>,
}

/// Evenly spaced values `start, start + step, ...` up to `stop` inclusive.
pub fn range_values(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
        return Vec::new();
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|k| start + k as f64 * step).collect()
}

/// Powers applicable at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointPowers {
    /// Total power `P` (W) with source share `t`.
    Total { total: f64, split: f64 },
    /// Source and relay powers (W) used in every state.
    SourceRelay { source: f64, relay: f64 },
    /// Explicit per-state powers (W).
    Explicit(PowerSet),
}

impl PointPowers {
    /// Per-state powers for the FP and FR schemes.
    pub fn power_set(&self) -> PowerSet {
        match *self {
            PointPowers::Total { total, split } => PowerSet {
                ps1: total,
                pr2: total,
                ps3: split * total,
                pr3: (1.0 - split) * total,
            },
            PointPowers::SourceRelay { source, relay } => PowerSet {
                ps1: source,
                pr2: relay,
                ps3: source,
                pr3: relay,
            },
            PointPowers::Explicit(p) => p,
        }
    }

    /// Source and relay powers of the half-duplex benchmark.
    pub fn half_duplex(&self) -> (f64, f64) {
        let p = self.power_set();
        (p.ps1, p.pr2)
    }

    /// Source and relay powers of the always-full-duplex benchmarks.
    pub fn full_duplex(&self) -> (f64, f64) {
        let p = self.power_set();
        (p.ps3, p.pr3)
    }

    /// Long-term budget of the AP scheme, if one is defined.
    pub fn budget(&self) -> Option<f64> {
        match *self {
            PointPowers::Total { total, .. } => Some(total),
            _ => None,
        }
    }
}

/// Everything that varies between sweep points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSettings {
    pub si_db: f64,
    pub means: ChannelMeans,
    pub powers: PointPowers,
    pub target_delay: Option<f64>,
}

impl ExperimentConfig {
    /// Sweep values, or a single `NaN` placeholder when nothing is swept.
    pub fn sweep_values(&self) -> Vec<f64> {
        match &self.sweep {
            None => vec![f64::NAN],
            Some(s) => match &s.values {
                Some(v) => v.clone(),
                None => range_values(s.start.unwrap_or(f64::NAN), s.stop.unwrap_or(f64::NAN), s.step.unwrap_or(f64::NAN)),
            },
        }
    }

    pub fn sweep_variable(&self) -> Option<SweepVariable> {
        self.sweep.as_ref().map(|s| s.variable)
    }

    pub fn schedule(&self) -> StepSchedule {
        StepSchedule {
            initial: self.estimator.step_initial,
            horizon: self.estimator.step_horizon,
            floor: self.estimator.step_floor,
        }
    }

    /// Resolves link and power settings of `series` at sweep value `x`.
    pub fn point(&self, x: f64, series: &Series) -> Result<PointSettings, ConfigError> {
        let var = self.sweep_variable();
        let si_db = if var == Some(SweepVariable::SiDb) { x } else { series.si_db.unwrap_or(self.link.si_db) };
        let means = self
            .link
            .to_link_config(si_db)
            .channel_means()
            .map_err(|e| invalid("link", e.to_string()))?;
        let p = &self.powers;
        let explicit = [p.ps1_dbm, p.pr2_dbm, p.ps3_dbm, p.pr3_dbm];
        let powers = match var {
            Some(SweepVariable::TotalPowerDbm) => PointPowers::Total { total: dbm_to_watts(x), split: p.split },
            Some(SweepVariable::SourcePowerDbm) => {
                let relay = p.relay_dbm.ok_or(ConfigError::Missing("powers.relay_dbm"))?;
                PointPowers::SourceRelay { source: dbm_to_watts(x), relay: dbm_to_watts(relay) }
            }
            _ => {
                if explicit.iter().all(Option::is_some) {
                    let [a, b, c, d] = explicit.map(|v| dbm_to_watts(v.unwrap_or_default()));
                    PointPowers::Explicit(PowerSet { ps1: a, pr2: b, ps3: c, pr3: d })
                } else if let Some(total) = p.total_dbm {
                    PointPowers::Total { total: dbm_to_watts(total), split: p.split }
                } else {
                    return Err(ConfigError::Missing("powers.total_dbm"));
                }
            }
        };
        let target_delay = if var == Some(SweepVariable::TargetDelay) { Some(x) } else { self.estimator.target_delay };
        Ok(PointSettings { si_db, means, powers, target_delay })
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.slots == 0 {
            return Err(invalid("slots", "must be at least 1"));
        }
        if self.warmup >= self.slots {
            return Err(invalid("warmup", format!("must be below slots ({})", self.slots)));
        }
        let l = &self.link;
        for (key, v) in [
            ("link.d_sr_m", l.d_sr_m),
            ("link.d_rd_m", l.d_rd_m),
            ("link.carrier_freq_hz", l.carrier_freq_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(key, format!("must be positive, got {v}")));
            }
        }
        if !(l.path_loss_exp >= 2.0 && l.path_loss_exp.is_finite()) {
            return Err(invalid("link.path_loss_exp", format!("must be at least 2, got {}", l.path_loss_exp)));
        }
        for (key, v) in [("link.noise_dbm", l.noise_dbm), ("link.si_db", l.si_db)] {
            if !v.is_finite() {
                return Err(invalid(key, "must be finite"));
            }
        }
        let p = &self.powers;
        if !(p.split > 0.0 && p.split < 1.0) {
            return Err(invalid("powers.split", format!("must lie in (0, 1), got {}", p.split)));
        }
        for (key, v) in [
            ("powers.total_dbm", p.total_dbm),
            ("powers.relay_dbm", p.relay_dbm),
            ("powers.ps1_dbm", p.ps1_dbm),
            ("powers.pr2_dbm", p.pr2_dbm),
            ("powers.ps3_dbm", p.ps3_dbm),
            ("powers.pr3_dbm", p.pr3_dbm),
        ] {
            if v.is_some_and(|v| !v.is_finite()) {
                return Err(invalid(key, "must be finite"));
            }
        }
        let e = &self.estimator;
        self.schedule()
            .validate()
            .map_err(|err| invalid("estimator.step_initial", err.to_string()))?;
        if !e.mu0.is_finite() {
            return Err(invalid("estimator.mu0", "must be finite"));
        }
        if e.zeta0.is_some_and(|z| !(z >= 0.0 && z.is_finite())) {
            return Err(invalid("estimator.zeta0", "must be finite and nonnegative"));
        }
        if e.zeta_gain.is_some_and(|z| !(z > 0.0 && z.is_finite())) {
            return Err(invalid("estimator.zeta_gain", "must be positive"));
        }
        if e.target_delay.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return Err(invalid("estimator.target_delay", "must be positive"));
        }
        let fr = &self.fixed_rate;
        if fr.r0.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
            return Err(invalid("fixed_rate.r0", "must be positive"));
        }
        if fr.grid_start <= 0.0 || fr.grid().is_empty() {
            return Err(invalid("fixed_rate.grid_start", "rate grid must be a nonempty range of positive rates"));
        }

        if let Some(s) = &self.sweep {
            match &s.values {
                Some(v) => {
                    if v.is_empty() {
                        return Err(invalid("sweep.values", "must not be empty"));
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(invalid("sweep.values", "must be finite"));
                    }
                }
                None => {
                    let start = s.start.ok_or(ConfigError::Missing("sweep.start"))?;
                    let stop = s.stop.ok_or(ConfigError::Missing("sweep.stop"))?;
                    let step = s.step.ok_or(ConfigError::Missing("sweep.step"))?;
                    if !(step > 0.0 && step.is_finite()) {
                        return Err(invalid("sweep.step", format!("must be positive, got {step}")));
                    }
                    if !(start.is_finite() && stop.is_finite()) || stop < start {
                        return Err(invalid("sweep.stop", format!("empty range {start}..{stop}")));
                    }
                }
            }
            if s.variable == SweepVariable::TargetDelay && self.sweep_values().iter().any(|&t| t <= 0.0) {
                return Err(invalid("sweep.values", "target delays must be positive"));
            }
        }
        if self.series.is_empty() {
            return Err(invalid("series", "at least one series is required"));
        }

        let var = self.sweep_variable();
        for s in &self.series {
            if let Some(si) = s.si_db {
                if !si.is_finite() {
                    return Err(invalid("series.si_db", "must be finite"));
                }
                if var == Some(SweepVariable::SiDb) {
                    return Err(invalid("series.si_db", "cannot be set while the SI is swept"));
                }
            }
            if s.control == ControlId::Delay {
                if s.scheme == SchemeId::Hd || s.scheme.is_fd_benchmark() {
                    return Err(invalid("series.control", format!("`delay` is not available for `{}`", s.scheme.name())));
                }
                if var != Some(SweepVariable::TargetDelay) && e.target_delay.is_none() {
                    return Err(ConfigError::Missing("estimator.target_delay"));
                }
            }
        }
        // Resolving every point surfaces missing power keys before any simulation starts.
        for x in self.sweep_values() {
            for s in &self.series {
                let point = self.point(x, s)?;
                if s.scheme == SchemeId::Ap && point.powers.budget().is_none() {
                    return Err(invalid(
                        "series.scheme",
                        "`ap` needs a total power budget (`powers.total_dbm` or a total-power sweep)",
                    ));
                }
                point
                    .powers
                    .power_set()
                    .validate()
                    .map_err(|err| invalid("powers", err.to_string()))?;
            }
        }
        Ok(())
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;
    let config = ExperimentConfig {
        slots: raw.slots,
        seed: raw.seed,
        warmup: raw.warmup,
        trace: raw.trace,
        link: raw.link,
        powers: raw.powers,
        estimator: raw.estimator,
        fixed_rate: raw.fixed_rate,
        sweep: raw.sweep,
        series: raw.series.ok_or(ConfigError::Missing("series"))?,
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[powers]
total_dbm = 30

[[series]]
scheme = \"fp\"
";

    #[test]
    fn defaults_follow_the_system_parameters() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.link.noise_dbm, -117.0);
        assert_eq!(c.link.path_loss_exp, 3.0);
        assert_eq!(c.link.d_sr_m, 500.0);
        assert_eq!(c.link.carrier_freq_hz, 2.4e9);
        assert_eq!(c.link.si_db, -133.0);
        assert_eq!(c.powers.split, 0.5);
        assert_eq!(c.fixed_rate.grid().len(), 120);
        assert_eq!(c.slots, 100_000);
        assert_eq!(c.series[0].control, ControlId::Balance);
    }

    #[test]
    fn point_resolution() {
        let c = parse_config(MINIMAL).unwrap();
        let p = c.point(f64::NAN, &c.series[0]).unwrap();
        assert_eq!(p.powers, PointPowers::Total { total: 1.0, split: 0.5 });
        assert_eq!(p.si_db, -133.0);
        let other = Series { si_db: Some(-110.0), ..c.series[0] };
        let rr = c.point(f64::NAN, &other).unwrap().means.rr;
        assert!((rr - 1e-11 / dbm_to_watts(-117.0)).abs() < 1e-9 * rr);
        assert!((p.means.sr - 396.2).abs() < 0.5);
        assert!((p.means.rr - 25.1).abs() < 0.1);
        let ps = p.powers.power_set();
        assert_eq!((ps.ps1, ps.pr2, ps.ps3, ps.pr3), (1.0, 1.0, 0.5, 0.5));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config(&format!("{MINIMAL}\n[link]\nnoise_dB = -100\n")).unwrap_err();
        assert!(err.to_string().contains("noise_dB"), "{err}");
        let err = parse_config(&format!("colour = 1\n{MINIMAL}")).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn empty_sweep_range_is_named() {
        let text = format!("{MINIMAL}\n[sweep]\nvariable = \"total_power_dbm\"\nstart = 40\nstop = 20\nstep = 1\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("sweep.stop"), "{err}");
        let text = format!("{MINIMAL}\n[sweep]\nvariable = \"si_db\"\nvalues = []\n");
        assert!(parse_config(&text).unwrap_err().to_string().contains("sweep.values"));
        let text = format!("{MINIMAL}\n[sweep]\nvariable = \"si_db\"\nstart = 1\nstop = 2\n");
        assert!(parse_config(&text).unwrap_err().to_string().contains("sweep.step"));
    }

    #[test]
    fn missing_and_out_of_range_keys_are_named() {
        let err = parse_config("[powers]\ntotal_dbm = 30\n").unwrap_err();
        assert!(err.to_string().contains("series"), "{err}");
        let err = parse_config("[[series]]\nscheme = \"fp\"\n").unwrap_err();
        assert!(err.to_string().contains("powers.total_dbm"), "{err}");
        let err = parse_config(&format!("slots = 0\n{MINIMAL}")).unwrap_err();
        assert!(err.to_string().contains("`slots`"), "{err}");
        let err = parse_config(&format!("{MINIMAL}\n[link]\npath_loss_exp = 1.5\n")).unwrap_err();
        assert!(err.to_string().contains("link.path_loss_exp"), "{err}");
        let err = parse_config("[powers]\ntotal_dbm = 30\nsplit = 1.0\n[[series]]\nscheme = \"fp\"\n").unwrap_err();
        assert!(err.to_string().contains("powers.split"), "{err}");
        let err = parse_config("[powers]\ntotal_dbm = 30\n[[series]]\nscheme = \"fp\"\ncontrol = \"delay\"\n").unwrap_err();
        assert!(err.to_string().contains("estimator.target_delay"), "{err}");
        let err = parse_config("[powers]\nrelay_dbm = 25\n[sweep]\nvariable = \"source_power_dbm\"\nvalues = [30]\n[[series]]\nscheme = \"ap\"\n")
            .unwrap_err();
        assert!(err.to_string().contains("series.scheme"), "{err}");
        let err = parse_config("[sweep]\nvariable = \"source_power_dbm\"\nvalues = [30]\n[[series]]\nscheme = \"fp\"\n").unwrap_err();
        assert!(err.to_string().contains("powers.relay_dbm"), "{err}");
        let err = parse_config("[powers]\ntotal_dbm = 30\n[sweep]\nvariable = \"si_db\"\nvalues = [-120]\n[[series]]\nscheme = \"fp\"\nsi_db = -110\n")
            .unwrap_err();
        assert!(err.to_string().contains("series.si_db"), "{err}");
    }

    #[test]
    fn range_values_are_not_accumulated() {
        let v = range_values(20.0, 50.0, 0.1);
        assert_eq!(v.len(), 301);
        assert_eq!(v[300], 20.0 + 300.0 * 0.1);
        assert_eq!(range_values(1.0, 1.0, 1.0), vec![1.0]);
        assert!(range_values(2.0, 1.0, 1.0).is_empty());
        assert!(range_values(1.0, 2.0, 0.0).is_empty());
    }

    #[test]
    fn explicit_and_source_relay_powers() {
        let text = "
[powers]
ps1_dbm = 24
pr2_dbm = 24
ps3_dbm = 21
pr3_dbm = 21
[estimator]
target_delay = 3
[[series]]
scheme = \"fp\"
control = \"delay\"
";
        let c = parse_config(text).unwrap();
        let p = c.point(f64::NAN, &c.series[0]).unwrap();
        let ps = p.powers.power_set();
        assert!((ps.ps1 - 0.251189).abs() < 1e-6 && (ps.pr3 - 0.125893).abs() < 1e-6);
        assert_eq!(p.target_delay, Some(3.0));

        let text = "
[powers]
relay_dbm = 25
[sweep]
variable = \"source_power_dbm\"
values = [30, 40]
[[series]]
scheme = \"hd\"
";
        let c = parse_config(text).unwrap();
        let p = c.point(40.0, &c.series[0]).unwrap();
        let (s, r) = p.powers.half_duplex();
        assert!((s - 10.0).abs() < 1e-12 && (r - dbm_to_watts(25.0)).abs() < 1e-15);
        assert_eq!(p.powers.full_duplex(), (s, r));
        assert_eq!(p.powers.budget(), None);
    }
}
