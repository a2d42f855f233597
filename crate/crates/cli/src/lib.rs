//! Experiment driver for the `fdrelay` simulator: TOML configs, parallel
//! sweeps and CSV output.

pub mod config;
pub mod output;
pub mod sweep;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use output::{write_results, write_trace};
pub use sweep::{run_sweep, run_sweep_detailed, ResultRow};

/// Checked-in figure presets, by verb name.
pub const PRESETS: [(&str, &str); 4] = [
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
