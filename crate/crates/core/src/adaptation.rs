//! Online multiplier estimation.
//!
//! The selection metrics depend on two Lagrange multipliers that are constants
//! of the channel statistics. Instead of solving for them offline, the relay
//! tracks running averages of the rates and the consumed power and nudges the
//! multipliers along the constraint violation every slot.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptationError {
    #[error("step schedule: {0}")]
    InvalidSchedule(&'static str),
}

/// Step size `delta(i)`: constant `initial` for the first `horizon` slots
/// (`min(initial, initial * horizon / i)` there), then the constant `floor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub initial: f64,
    pub horizon: u64,
    pub floor: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self { initial: 0.5, horizon: 100, floor: 0.005 }
    }
}

impl StepSchedule {
    /// Small steps throughout: `(0.01, 100, 0.001)`. The multiplier loops act on
    /// cumulative averages, so large early steps leave errors that decay slowly.
    pub const fn gentle() -> Self {
        Self { initial: 0.01, horizon: 100, floor: 0.001 }
    }

    pub fn new(initial: f64, horizon: u64, floor: f64) -> Result<Self, AdaptationError> {
        let s = Self { initial, horizon, floor };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), AdaptationError> {
        if !(self.initial > 0.0 && self.initial < 1.0) {
            return Err(AdaptationError::InvalidSchedule("initial step must lie in (0, 1)"));
        }
        if !(self.floor > 0.0 && self.floor <= self.initial) {
            return Err(AdaptationError::InvalidSchedule("floor must lie in (0, initial]"));
        }
        Ok(())
    }

    /// `delta(i)` for slot `i >= 1`.
    pub fn step_size(&self, i: u64) -> f64 {
        if i <= self.horizon {
            let i = i.max(1) as f64;
            self.initial.min(self.initial * self.horizon as f64 / i)
        } else {
            self.floor
        }
    }
}

/// Free-function form of [`StepSchedule::step_size`].
pub fn step_size(i: u64, schedule: &StepSchedule) -> f64 {
    schedule.step_size(i)
}

/// Running estimates carried from slot to slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorState {
    pub mu_e: f64,
    pub zeta_e: f64,
    /// Running mean of the S-R rate (bits/symbol).
    pub rbar_sr: f64,
    /// Running mean of the R-D rate (bits/symbol).
    pub rbar_rd: f64,
    /// Running mean of the consumed power (W).
    pub pbar: f64,
    /// Index of the current slot; 0 before the first slot.
    pub slot_index: u64,
    /// Keep `mu_e` inside `[0, 1]` (fixed-rate operation).
    pub clamp_mu: bool,
    /// Multiplies `delta(i)` in the power-price step (units 1/W^2).
    pub zeta_gain: f64,
}

impl EstimatorState {
    pub fn new(mu0: f64, zeta0: f64) -> Self {
        Self {
            mu_e: mu0,
            zeta_e: zeta0.max(0.0),
            rbar_sr: 0.0,
            rbar_rd: 0.0,
            pbar: 0.0,
            slot_index: 0,
            clamp_mu: false,
            zeta_gain: 1.0,
        }
    }

    pub fn with_zeta_gain(mut self, gain: f64) -> Self {
        self.zeta_gain = gain;
        self
    }

    pub fn clamped(mut self) -> Self {
        self.clamp_mu = true;
        self.mu_e = self.mu_e.clamp(0.0, 1.0);
        self
    }

    /// Moves to the next slot and returns its index.
    pub fn begin_slot(&mut self) -> u64 {
        self.slot_index += 1;
        self.slot_index
    }

    fn running_mean(prev: f64, x: f64, i: u64) -> f64 {
        let i = i as f64;
        (i - 1.0) / i * prev + x / i
    }

    /// Folds this slot's S-R and R-D rates into the running means. For
    /// fixed-rate operation the inputs are the decoded rates `R0 * indicator`.
    pub fn update_rate_estimates(&mut self, c_sr: f64, c_rd: f64) {
        let i = self.slot_index.max(1);
        self.rbar_sr = Self::running_mean(self.rbar_sr, c_sr, i);
        self.rbar_rd = Self::running_mean(self.rbar_rd, c_rd, i);
    }

    /// Gradient step on the rate-balance multiplier.
    pub fn update_mu(&mut self, schedule: &StepSchedule) {
        let delta = schedule.step_size(self.slot_index);
        self.set_mu(self.mu_e + delta * (self.rbar_rd - self.rbar_sr));
    }

    /// Folds the consumed power into its running mean, then takes a projected
    /// gradient step on the power price.
    pub fn update_zeta(&mut self, consumed_power: f64, budget: f64, schedule: &StepSchedule) {
        let i = self.slot_index.max(1);
        self.pbar = Self::running_mean(self.pbar, consumed_power, i);
        let delta = schedule.step_size(i) * self.zeta_gain;
        self.zeta_e = (self.zeta_e + delta * (self.pbar - budget)).max(0.0);
    }

    /// Steers `mu_e` so that the instantaneous Little's-law delay
    /// `queue / rbar_sr` tracks `target` slots. Skipped while nothing has
    /// arrived yet.
    pub fn update_mu_delay(&mut self, queue: f64, target: f64, schedule: &StepSchedule) {
        if self.rbar_sr <= 0.0 {
            return;
        }
        let delta = schedule.step_size(self.slot_index);
        self.set_mu(self.mu_e + delta * (target - queue / self.rbar_sr));
    }

    fn set_mu(&mut self, mu: f64) {
        self.mu_e = if self.clamp_mu { mu.clamp(0.0, 1.0) } else { mu };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_defaults() {
        let s = StepSchedule::default();
        assert_eq!(s.step_size(1), 0.5);
        assert!(s.step_size(1) < 1.0);
        assert_eq!(s.step_size(100), 0.5);
        assert_eq!(s.step_size(101), 0.005);
        assert_eq!(s.step_size(1_000_000), 0.005);
        let mut prev = f64::INFINITY;
        for i in 1..=10_000 {
            let d = step_size(i, &s);
            assert!(d <= prev);
            prev = d;
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(StepSchedule::new(1.0, 10, 0.1).is_err());
        assert!(StepSchedule::new(0.5, 10, 0.0).is_err());
        assert!(StepSchedule::new(0.5, 10, 0.6).is_err());
        assert!(StepSchedule::new(0.5, 10, 0.5).is_ok());
    }

    #[test]
    fn running_mean_examples() {
        let mut e = EstimatorState::new(0.5, 0.0);
        e.begin_slot();
        e.update_rate_estimates(2.0, 0.0);
        assert_eq!(e.rbar_sr, 2.0);
        e.begin_slot();
        e.update_rate_estimates(0.0, 0.0);
        assert_eq!(e.rbar_sr, 1.0);

        let mut e = EstimatorState::new(0.5, 0.0);
        for _ in 0..1000 {
            e.begin_slot();
            e.update_rate_estimates(1.25, 3.5);
        }
        assert_relative_eq!(e.rbar_sr, 1.25, max_relative = 1e-13);
        assert_relative_eq!(e.rbar_rd, 3.5, max_relative = 1e-13);
    }

    #[test]
    fn running_mean_matches_direct_sum() {
        let xs: Vec<f64> = (0..5000).map(|k| ((k * 7919) % 1000) as f64 / 37.0).collect();
        let mut e = EstimatorState::new(0.5, 0.0);
        for &x in &xs {
            e.begin_slot();
            e.update_rate_estimates(x, 0.0);
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert_relative_eq!(e.rbar_sr, mean, max_relative = 1e-12);
    }

    #[test]
    fn mu_step_examples() {
        let sched = StepSchedule::new(0.1, 1000, 0.01).unwrap();
        let mut e = EstimatorState::new(0.5, 0.0);
        e.slot_index = 3;
        e.rbar_sr = 1.0;
        e.rbar_rd = 1.0;
        e.update_mu(&sched);
        assert_eq!(e.mu_e, 0.5);
        e.rbar_rd = 1.2;
        e.update_mu(&sched);
        assert_relative_eq!(e.mu_e, 0.52, max_relative = 1e-14);
    }

    #[test]
    fn mu_clamped_in_fixed_rate_mode() {
        let sched = StepSchedule::default();
        let mut e = EstimatorState::new(0.9, 0.0).clamped();
        e.slot_index = 1;
        e.rbar_rd = 5.0;
        e.update_mu(&sched);
        assert_eq!(e.mu_e, 1.0);
        e.rbar_rd = -10.0;
        e.update_mu(&sched);
        assert_eq!(e.mu_e, 0.0);
        // Unclamped for adaptive-rate operation.
        let mut e = EstimatorState::new(0.9, 0.0);
        e.slot_index = 1;
        e.rbar_rd = 5.0;
        e.update_mu(&sched);
        assert_relative_eq!(e.mu_e, 3.4);
    }

    #[test]
    fn zeta_examples() {
        let sched = StepSchedule::default();
        let mut e = EstimatorState::new(0.5, 0.3);
        e.slot_index = 1;
        e.update_zeta(2.0, 2.0, &sched);
        assert_eq!(e.pbar, 2.0);
        assert_eq!(e.zeta_e, 0.3);

        let mut e = EstimatorState::new(0.5, 0.0);
        e.slot_index = 1;
        e.update_zeta(0.5, 2.0, &sched);
        assert_eq!(e.zeta_e, 0.0);

        let mut e = EstimatorState::new(0.5, 0.0);
        e.slot_index = 1;
        e.update_zeta(3.0, 2.0, &sched);
        assert_relative_eq!(e.zeta_e, 0.5);

        let mut e = EstimatorState::new(0.5, 0.0).with_zeta_gain(0.25);
        e.slot_index = 1;
        e.update_zeta(3.0, 2.0, &sched);
        assert_relative_eq!(e.zeta_e, 0.125);
    }

    #[test]
    fn delay_examples() {
        let sched = StepSchedule::new(0.1, 1000, 0.01).unwrap();
        let mut e = EstimatorState::new(0.5, 0.0);
        e.slot_index = 10;
        e.rbar_sr = 2.0;
        e.update_mu_delay(10.0, 5.0, &sched);
        assert_eq!(e.mu_e, 0.5);
        e.update_mu_delay(14.0, 5.0, &sched);
        assert_relative_eq!(e.mu_e, 0.3, max_relative = 1e-14);

        let mut e = EstimatorState::new(0.5, 0.0);
        e.slot_index = 1;
        e.update_mu_delay(3.0, 5.0, &sched);
        assert_eq!(e.mu_e, 0.5);
    }

    #[test]
    fn fixed_point_is_stationary() {
        let sched = StepSchedule::default();
        let mut e = EstimatorState::new(0.37, 1.2);
        for _ in 0..500 {
            e.begin_slot();
            e.update_rate_estimates(2.0, 2.0);
            e.update_zeta(0.75, 0.75, &sched);
            e.update_mu(&sched);
        }
        assert_relative_eq!(e.mu_e, 0.37, max_relative = 1e-12);
        assert_relative_eq!(e.zeta_e, 1.2, max_relative = 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn clamped_mu_and_zeta_stay_in_range(
                inputs in proptest::collection::vec((0.0..10.0f64, 0.0..10.0f64, 0.0..5.0f64, 0.0..50.0f64), 1..300),
                budget in 0.1..3.0f64,
            ) {
                let sched = StepSchedule::default();
                let mut e = EstimatorState::new(0.5, 0.0).clamped();
                for (c_sr, c_rd, p, q) in inputs {
                    e.begin_slot();
                    e.update_rate_estimates(c_sr, c_rd);
                    e.update_zeta(p, budget, &sched);
                    e.update_mu(&sched);
                    prop_assert!((0.0..=1.0).contains(&e.mu_e));
                    e.update_mu_delay(q, 3.0, &sched);
                    prop_assert!((0.0..=1.0).contains(&e.mu_e));
                    prop_assert!(e.zeta_e >= 0.0);
                    prop_assert!(e.rbar_sr >= 0.0 && e.rbar_rd >= 0.0 && e.pbar >= 0.0);
                }
            }
        }
    }
}
