//! Per-slot decision kernel.
//!
//! Each scheme reduces a slot's channel to three selection metrics, one per
//! active state, and the relay picks the largest. The adaptive-power scheme
//! also returns the per-state powers that maximize each metric.

use std::f64::consts::LN_2;

use rand::Rng;
use thiserror::Error;

use crate::channel::{rd_rate, sr_rate, ChannelSample};

/// Convergence target for the state-3 stationarity residual.
pub const SOLVER_TOLERANCE: f64 = 1e-12;
/// Iteration budget for one bisection.
pub const SOLVER_MAX_ITER: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("selection metric {index} is not finite ({value})")]
    NonFiniteMetric { index: usize, value: f64 },
    #[error("multiplier {name} = {value} is outside its admissible range")]
    InvalidMultiplier { name: &'static str, value: f64 },
    #[error("water-filling needs a positive power price, got zeta = {0}")]
    ZeroPrice(f64),
    #[error("power {name} = {value} must be non-negative and finite")]
    InvalidPower { name: &'static str, value: f64 },
    #[error("fixed rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("state-3 power solver did not converge after {iterations} iterations (relay residual {relay_residual:e}, source residual {source_residual:e})")]
    SolverDidNotConverge {
        iterations: usize,
        relay_residual: f64,
        source_residual: f64,
    },
}

/// Lagrange multipliers: `mu` prices the buffer balance, `zeta` the power budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multipliers {
    pub mu: f64,
    pub zeta: f64,
}

impl Multipliers {
    pub fn new(mu: f64, zeta: f64) -> Result<Self, SchemeError> {
        if !mu.is_finite() {
            return Err(SchemeError::InvalidMultiplier { name: "mu", value: mu });
        }
        if !(zeta >= 0.0 && zeta.is_finite()) {
            return Err(SchemeError::InvalidMultiplier { name: "zeta", value: zeta });
        }
        Ok(Self { mu, zeta })
    }

    /// `zeta ln 2 / (1 - mu)`.
    pub fn eta(&self) -> f64 {
        self.zeta * LN_2 / (1.0 - self.mu)
    }

    /// `mu / (1 - mu)`.
    pub fn rho(&self) -> f64 {
        self.mu / (1.0 - self.mu)
    }

    /// Water level of the source, `rho / eta`.
    fn source_level(&self) -> f64 {
        self.mu / (self.zeta * LN_2)
    }

    /// Water level of the relay, `1 / eta`.
    fn relay_level(&self) -> f64 {
        (1.0 - self.mu) / (self.zeta * LN_2)
    }

    fn require_price(&self) -> Result<(), SchemeError> {
        if self.zeta > 0.0 && self.zeta.is_finite() && self.mu.is_finite() {
            Ok(())
        } else {
            Err(SchemeError::ZeroPrice(self.zeta))
        }
    }
}

/// Transmit powers (W) for each state: source in states 1 and 3, relay in
/// states 2 and 3.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerSet {
    pub ps1: f64,
    pub pr2: f64,
    pub ps3: f64,
    pub pr3: f64,
}

impl PowerSet {
    pub fn new(ps1: f64, pr2: f64, ps3: f64, pr3: f64) -> Result<Self, SchemeError> {
        let p = Self { ps1, pr2, ps3, pr3 };
        p.validate()?;
        Ok(p)
    }

    /// `P_S^(1) = P_R^(2) = total`, with the full-duplex state splitting the
    /// total as `t` to the source and `1 - t` to the relay.
    pub fn split(total: f64, t: f64) -> Result<Self, SchemeError> {
        Self::new(total, total, t * total, (1.0 - t) * total)
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        for (name, value) in [("ps1", self.ps1), ("pr2", self.pr2), ("ps3", self.ps3), ("pr3", self.pr3)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(SchemeError::InvalidPower { name, value });
            }
        }
        Ok(())
    }

    /// Power drawn by both nodes together in the given state.
    pub fn consumed(&self, state: RelayState) -> f64 {
        match state {
            RelayState::Silent => 0.0,
            RelayState::SourceTransmits => self.ps1,
            RelayState::RelayTransmits => self.pr2,
            RelayState::FullDuplex => self.ps3 + self.pr3,
        }
    }
}

/// Metric values for states 1, 2 and 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionMetrics {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl SelectionMetrics {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        Self { lambda1, lambda2, lambda3 }
    }

    fn check_finite(&self) -> Result<(), SchemeError> {
        for (index, value) in [(1, self.lambda1), (2, self.lambda2), (3, self.lambda3)] {
            if !value.is_finite() {
                return Err(SchemeError::NonFiniteMetric { index, value });
            }
        }
        Ok(())
    }
}

/// Relay operating state for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelayState {
    /// Neither node transmits.
    Silent,
    /// Source transmits, relay only receives.
    SourceTransmits,
    /// Relay transmits, source is silent.
    RelayTransmits,
    /// Source transmits while the relay receives and transmits.
    FullDuplex,
}

impl RelayState {
    pub const ALL: [RelayState; 4] = [
        RelayState::Silent,
        RelayState::SourceTransmits,
        RelayState::RelayTransmits,
        RelayState::FullDuplex,
    ];

    pub fn index(self) -> usize {
        match self {
            RelayState::Silent => 0,
            RelayState::SourceTransmits => 1,
            RelayState::RelayTransmits => 2,
            RelayState::FullDuplex => 3,
        }
    }

    /// The selection indicators `(q1, q2, q3)`.
    pub fn indicators(self) -> (u8, u8, u8) {
        match self {
            RelayState::Silent => (0, 0, 0),
            RelayState::SourceTransmits => (1, 0, 0),
            RelayState::RelayTransmits => (0, 1, 0),
            RelayState::FullDuplex => (0, 0, 1),
        }
    }

    pub fn source_active(self) -> bool {
        matches!(self, RelayState::SourceTransmits | RelayState::FullDuplex)
    }

    pub fn relay_active(self) -> bool {
        matches!(self, RelayState::RelayTransmits | RelayState::FullDuplex)
    }
}

/// Decodability of a fixed-rate codeword on each link and state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OutageFlags {
    pub o_sr1: bool,
    pub o_sr3: bool,
    pub o_rd2: bool,
    pub o_rd3: bool,
}

impl OutageFlags {
    pub fn new(o_sr1: bool, o_sr3: bool, o_rd2: bool, o_rd3: bool) -> Self {
        Self { o_sr1, o_sr3, o_rd2, o_rd3 }
    }

    /// Whether the source's codeword is decoded in `state`.
    pub fn arrival(&self, state: RelayState) -> bool {
        match state {
            RelayState::SourceTransmits => self.o_sr1,
            RelayState::FullDuplex => self.o_sr3,
            _ => false,
        }
    }

    /// Whether the relay's codeword is decoded in `state`.
    pub fn departure(&self, state: RelayState) -> bool {
        match state {
            RelayState::RelayTransmits => self.o_rd2,
            RelayState::FullDuplex => self.o_rd3,
            _ => false,
        }
    }
}

fn pick(metrics: &SelectionMetrics) -> RelayState {
    let SelectionMetrics { lambda1: l1, lambda2: l2, lambda3: l3 } = *metrics;
    if l3 >= l1 && l3 >= l2 {
        RelayState::FullDuplex
    } else if l1 > l3 && l1 >= l2 {
        RelayState::SourceTransmits
    } else {
        RelayState::RelayTransmits
    }
}

/// Deterministic state selection. Ties involving state 3 go to state 3, and a
/// tie between states 1 and 2 goes to state 1.
pub fn select_state(metrics: &SelectionMetrics) -> Result<RelayState, SchemeError> {
    metrics.check_finite()?;
    Ok(pick(metrics))
}

/// State selection with uniform random resolution of exact ties among the
/// maximizing states.
pub fn select_state_randomized<R: Rng + ?Sized>(
    metrics: &SelectionMetrics,
    rng: &mut R,
) -> Result<RelayState, SchemeError> {
    metrics.check_finite()?;
    let values = [
        (RelayState::SourceTransmits, metrics.lambda1),
        (RelayState::RelayTransmits, metrics.lambda2),
        (RelayState::FullDuplex, metrics.lambda3),
    ];
    let best = values.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    let mut tied = [RelayState::Silent; 3];
    let mut n = 0;
    for &(state, v) in &values {
        if v == best {
            tied[n] = state;
            n += 1;
        }
    }
    if n == 1 {
        Ok(tied[0])
    } else {
        Ok(tied[rng.random_range(0..n)])
    }
}

/// Half-duplex selection: state 3 is unavailable, so the source transmits iff
/// its metric is at least the relay's.
pub fn select_half_duplex(lambda1: f64, lambda2: f64) -> Result<RelayState, SchemeError> {
    SelectionMetrics::new(lambda1, lambda2, 0.0).check_finite()?;
    Ok(if lambda1 >= lambda2 {
        RelayState::SourceTransmits
    } else {
        RelayState::RelayTransmits
    })
}

/// Source power in state 1: water-filling with level `rho / eta`, zero at or
/// below the threshold `gamma_sr = eta / rho`.
///
/// Also defined for `mu` outside `(0, 1)`: a non-positive level gives zero.
pub fn waterfill_source(gamma_sr: f64, m: &Multipliers) -> Result<f64, SchemeError> {
    m.require_price()?;
    Ok(waterfill(gamma_sr, m.source_level()))
}

/// Relay power in state 2: water-filling with level `1 / eta`, zero at or
/// below the threshold `gamma_rd = eta`.
pub fn waterfill_relay(gamma_rd: f64, m: &Multipliers) -> Result<f64, SchemeError> {
    m.require_price()?;
    Ok(waterfill(gamma_rd, m.relay_level()))
}

#[inline]
fn waterfill(gamma: f64, level: f64) -> f64 {
    if level > 0.0 && gamma * level > 1.0 {
        level - 1.0 / gamma
    } else {
        0.0
    }
}

/// Value of the state-3 metric at the given powers under adaptive power.
pub fn lambda3_value(ps: f64, pr: f64, sample: &ChannelSample, m: &Multipliers) -> f64 {
    m.mu * sr_rate(ps, pr, sample) + (1.0 - m.mu) * rd_rate(pr, sample) - m.zeta * (ps + pr)
}

/// Left-hand sides of the two state-3 stationarity conditions, as
/// `(relay, source)`: the derivatives of `ln 2 * lambda3` with respect to the
/// relay and the source power.
pub fn kkt_residuals(ps: f64, pr: f64, sample: &ChannelSample, m: &Multipliers) -> (f64, f64) {
    let (a, b, c) = (sample.gamma_sr, sample.gamma_rr, sample.gamma_rd);
    let si = 1.0 + pr * b;
    let total = si + ps * a;
    let k = m.zeta * LN_2;
    let relay = -m.mu * b * a * ps / (si * total) + (1.0 - m.mu) * c / (1.0 + pr * c) - k;
    let source = m.mu * a / total - k;
    (relay, source)
}

/// Powers `(P_S^(3), P_R^(3))` maximizing the state-3 metric.
///
/// For a fixed relay power the optimal source power is water-filling against
/// noise plus self-interference, `mu / (zeta ln 2) - (1 + pr gamma_rr) / gamma_sr`.
/// Substituting it leaves a one-dimensional problem in the relay power whose
/// stationarity condition, cleared of denominators, is a quadratic. Roots are
/// located by bisection on each monotone piece of that quadratic within
/// `[0, (1 - mu) / (zeta ln 2)]`, and every stationary point is compared with
/// the boundary candidates by metric value.
pub fn solve_state3_powers(sample: &ChannelSample, m: &Multipliers) -> Result<(f64, f64), SchemeError> {
    m.require_price()?;
    let (a, b, c) = (sample.gamma_sr, sample.gamma_rr, sample.gamma_rd);
    let source_level = m.source_level();
    let relay_level = m.relay_level();

    let ps_no_si = waterfill(a, source_level);
    let pr_alone = waterfill(c, relay_level);
    if b == 0.0 {
        // No self-interference: the two hops decouple.
        return Ok((ps_no_si, pr_alone));
    }

    let mut best = (0.0, 0.0);
    let mut best_value = lambda3_value(0.0, 0.0, sample, m);
    let mut consider = |ps: f64, pr: f64| {
        let v = lambda3_value(ps, pr, sample, m);
        if v > best_value {
            best_value = v;
            best = (ps, pr);
        }
    };
    consider(ps_no_si, 0.0);
    consider(0.0, pr_alone);

    // Relay power beyond which the source's optimum is zero.
    if a > 0.0 && source_level * a > 1.0 {
        let pr_cut = (source_level * a - 1.0) / b;
        consider(0.0, pr_cut);
        let source_for = |pr: f64| source_level - (1.0 + pr * b) / a;
        let hi = pr_cut.min(relay_level);
        if hi > 0.0 {
            let k = m.zeta * LN_2;
            let mu = m.mu;
            let slope = k * (b / a - 1.0);
            let reduced = |pr: f64| -mu * b / (1.0 + pr * b) + (1.0 - mu) * c / (1.0 + pr * c) + slope;
            // reduced(pr) * (1 + pr b)(1 + pr c) = qa pr^2 + qb pr + qc
            let qa = slope * b * c;
            let qb = -mu * b * c + (1.0 - mu) * b * c + slope * (b + c);
            let mut cuts = [0.0, hi, hi];
            let mut pieces = 1;
            if qa != 0.0 {
                let vertex = -qb / (2.0 * qa);
                if vertex > 0.0 && vertex < hi {
                    cuts = [0.0, vertex, hi];
                    pieces = 2;
                }
            }
            for w in cuts[..=pieces].windows(2) {
                if let Some(pr) = bisect(&reduced, w[0], w[1], |pr| {
                    let ps = source_for(pr).max(0.0);
                    kkt_residuals(ps, pr, sample, m)
                })? {
                    let ps = source_for(pr);
                    if ps > 0.0 {
                        consider(ps, pr);
                    }
                }
            }
            consider(source_for(hi).max(0.0), hi);
        }
    }
    Ok(best)
}

/// Bisection for a sign change of `f` on `[lo, hi]`. Returns `None` when the
/// endpoints do not bracket a root.
fn bisect(
    f: &impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    residuals: impl Fn(f64) -> (f64, f64),
) -> Result<Option<f64>, SchemeError> {
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(Some(lo));
    }
    if f_hi == 0.0 {
        return Ok(Some(hi));
    }
    if f_lo.signum() == f_hi.signum() {
        return Ok(None);
    }
    let lo_positive = f_lo > 0.0;
    for _ in 0..SOLVER_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid.abs() < SOLVER_TOLERANCE || hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE) {
            return Ok(Some(mid));
        }
        if (f_mid > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (relay_residual, source_residual) = residuals(0.5 * (lo + hi));
    Err(SchemeError::SolverDidNotConverge {
        iterations: SOLVER_MAX_ITER,
        relay_residual,
        source_residual,
    })
}

/// Metrics and per-state powers for adaptive-rate, adaptive-power operation.
///
/// Requires `zeta > 0`; with a zero price the caller falls back to
/// [`metrics_fixed_power`].
pub fn metrics_adaptive_power(
    sample: &ChannelSample,
    m: &Multipliers,
) -> Result<(SelectionMetrics, PowerSet), SchemeError> {
    m.require_price()?;
    let ps1 = waterfill_source(sample.gamma_sr, m)?;
    let pr2 = waterfill_relay(sample.gamma_rd, m)?;
    let (ps3, pr3) = solve_state3_powers(sample, m)?;
    let metrics = SelectionMetrics {
        lambda1: m.mu * sr_rate(ps1, 0.0, sample) - m.zeta * ps1,
        lambda2: (1.0 - m.mu) * rd_rate(pr2, sample) - m.zeta * pr2,
        lambda3: lambda3_value(ps3, pr3, sample, m),
    };
    Ok((metrics, PowerSet { ps1, pr2, ps3, pr3 }))
}

/// Metrics for adaptive-rate transmission at fixed per-state powers.
pub fn metrics_fixed_power(sample: &ChannelSample, mu: f64, powers: &PowerSet) -> Result<SelectionMetrics, SchemeError> {
    if !mu.is_finite() {
        return Err(SchemeError::InvalidMultiplier { name: "mu", value: mu });
    }
    powers.validate()?;
    Ok(fixed_power_metrics(sample, mu, powers))
}

#[inline]
pub(crate) fn fixed_power_metrics(sample: &ChannelSample, mu: f64, p: &PowerSet) -> SelectionMetrics {
    SelectionMetrics {
        lambda1: mu * sr_rate(p.ps1, 0.0, sample),
        lambda2: (1.0 - mu) * rd_rate(p.pr2, sample),
        lambda3: mu * sr_rate(p.ps3, p.pr3, sample) + (1.0 - mu) * rd_rate(p.pr3, sample),
    }
}

/// Outage indicators at rate `r0`: a flag is set when the link's capacity
/// reaches `r0` (inclusive).
pub fn outage_flags(sample: &ChannelSample, powers: &PowerSet, r0: f64) -> Result<OutageFlags, SchemeError> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(SchemeError::InvalidRate(r0));
    }
    powers.validate()?;
    Ok(outage_flags_unchecked(sample, powers, r0.exp2() - 1.0))
}

/// Compares SINRs against `2^r0 - 1` so boundary cases are exact.
#[inline]
pub(crate) fn outage_flags_unchecked(s: &ChannelSample, p: &PowerSet, snr_threshold: f64) -> OutageFlags {
    OutageFlags {
        o_sr1: p.ps1 * s.gamma_sr >= snr_threshold,
        o_sr3: p.ps3 * s.gamma_sr / (p.pr3 * s.gamma_rr + 1.0) >= snr_threshold,
        o_rd2: p.pr2 * s.gamma_rd >= snr_threshold,
        o_rd3: p.pr3 * s.gamma_rd >= snr_threshold,
    }
}

/// Metrics for fixed-rate transmission.
pub fn metrics_fixed_rate(flags: &OutageFlags, mu: f64) -> Result<SelectionMetrics, SchemeError> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(SchemeError::InvalidMultiplier { name: "mu", value: mu });
    }
    Ok(fixed_rate_metrics(flags, mu))
}

#[inline]
pub(crate) fn fixed_rate_metrics(f: &OutageFlags, mu: f64) -> SelectionMetrics {
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    SelectionMetrics {
        lambda1: mu * ind(f.o_sr1),
        lambda2: (1.0 - mu) * ind(f.o_rd2),
        lambda3: mu * ind(f.o_sr3) + (1.0 - mu) * ind(f.o_rd3),
    }
}
