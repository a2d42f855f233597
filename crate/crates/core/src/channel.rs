//! Link model: path loss, Rayleigh block fading, and per-slot capacities.
//!
//! All gains handed out of this module are *normalized*: the squared fading
//! gain divided by the receiver noise power, in 1/Watt. Multiplying by a
//! transmit power in Watts gives a linear SNR directly, so the capacity
//! functions never see the noise power.

use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("path-loss exponent must be at least 2, got {0}")]
    ExponentTooSmall(f64),
}

fn positive(name: &'static str, value: f64) -> Result<f64, ChannelError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ChannelError::NonPositive { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64, ChannelError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ChannelError::Negative { name, value })
    }
}

/// Converts a power in dBm to Watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power in Watts to dBm. Zero maps to negative infinity.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Mean squared channel gain of a link under the free-space-referenced
/// power-law model `(c / (4 pi f_c))^2 * d^-alpha`.
///
/// The exponent may be zero (pure free-space reference at 1 m); negative
/// exponents are rejected.
pub fn path_loss_mean(distance: f64, carrier_freq: f64, exponent: f64) -> Result<f64, ChannelError> {
    let d = positive("distance", distance)?;
    let f = positive("carrier_freq", carrier_freq)?;
    let alpha = non_negative("path_loss_exp", exponent)?;
    let wavelength_term = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * f);
    Ok(wavelength_term * wavelength_term * d.powf(-alpha))
}

/// Mean of the normalized gain: mean squared gain divided by noise power.
pub fn normalized_mean(mean_gain: f64, noise_power: f64) -> Result<f64, ChannelError> {
    let g = non_negative("mean_gain", mean_gain)?;
    let n = positive("noise_power", noise_power)?;
    Ok(g / n)
}

/// Physical description of the two-hop link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    /// Source-relay distance (m).
    pub d_sr: f64,
    /// Relay-destination distance (m).
    pub d_rd: f64,
    /// Carrier frequency (Hz).
    pub carrier_freq: f64,
    pub path_loss_exp: f64,
    /// Total noise power over the band (W). Shared by relay and destination.
    pub noise_power: f64,
    /// Linear mean of the self-interference channel's squared gain.
    pub si_mean_gain: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            d_sr: 500.0,
            d_rd: 500.0,
            carrier_freq: 2.4e9,
            path_loss_exp: 3.0,
            noise_power: dbm_to_watts(-117.0),
            si_mean_gain: db_to_linear(-133.0),
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        positive("d_sr", self.d_sr)?;
        positive("d_rd", self.d_rd)?;
        positive("carrier_freq", self.carrier_freq)?;
        positive("path_loss_exp", self.path_loss_exp)?;
        if self.path_loss_exp < 2.0 {
            return Err(ChannelError::ExponentTooSmall(self.path_loss_exp));
        }
        positive("noise_power", self.noise_power)?;
        positive("si_mean_gain", self.si_mean_gain)?;
        Ok(())
    }

    /// Normalized means of the three fading channels.
    pub fn channel_means(&self) -> Result<ChannelMeans, ChannelError> {
        self.validate()?;
        let sr = path_loss_mean(self.d_sr, self.carrier_freq, self.path_loss_exp)?;
        let rd = path_loss_mean(self.d_rd, self.carrier_freq, self.path_loss_exp)?;
        Ok(ChannelMeans {
            sr: normalized_mean(sr, self.noise_power)?,
            rd: normalized_mean(rd, self.noise_power)?,
            rr: normalized_mean(self.si_mean_gain, self.noise_power)?,
        })
    }
}

/// Means of the normalized gains (1/W) of the S-R, R-D and SI channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMeans {
    pub sr: f64,
    pub rd: f64,
    pub rr: f64,
}

impl ChannelMeans {
    pub fn validate(&self) -> Result<(), ChannelError> {
        non_negative("mean_sr", self.sr)?;
        non_negative("mean_rd", self.rd)?;
        non_negative("mean_rr", self.rr)?;
        Ok(())
    }
}

/// One slot's normalized squared gains (1/W).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub gamma_sr: f64,
    pub gamma_rd: f64,
    pub gamma_rr: f64,
}

impl ChannelSample {
    pub fn new(gamma_sr: f64, gamma_rd: f64, gamma_rr: f64) -> Result<Self, ChannelError> {
        Ok(Self {
            gamma_sr: non_negative("gamma_sr", gamma_sr)?,
            gamma_rd: non_negative("gamma_rd", gamma_rd)?,
            gamma_rr: non_negative("gamma_rr", gamma_rr)?,
        })
    }
}

/// A per-slot fading generator.
pub trait FadingModel {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelSample;
}

/// Rayleigh amplitude fading: every normalized power gain is exponential.
///
/// Each slot consumes exactly three draws in the order S-R, R-D, SI, so two
/// runs sharing a seed see the same trace whatever they do with it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rayleigh {
    pub means: ChannelMeans,
}

impl Rayleigh {
    pub fn new(means: ChannelMeans) -> Result<Self, ChannelError> {
        means.validate()?;
        Ok(Self { means })
    }
}

impl FadingModel for Rayleigh {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelSample {
        sample_slot(rng, self.means.sr, self.means.rd, self.means.rr)
    }
}

/// Draws one slot of independent exponential gains with the given means.
/// A zero mean yields an identically zero gain.
pub fn sample_slot<R: Rng + ?Sized>(rng: &mut R, mean_sr: f64, mean_rd: f64, mean_rr: f64) -> ChannelSample {
    let x: f64 = rng.sample(Exp1);
    let y: f64 = rng.sample(Exp1);
    let z: f64 = rng.sample(Exp1);
    ChannelSample {
        gamma_sr: mean_sr * x,
        gamma_rd: mean_rd * y,
        gamma_rr: mean_rr * z,
    }
}

/// S-R capacity (bits/symbol) with the relay's own transmission treated as
/// Gaussian interference.
pub fn capacity_sr(p_s: f64, p_r: f64, sample: &ChannelSample) -> Result<f64, ChannelError> {
    let p_s = non_negative("p_s", p_s)?;
    let p_r = non_negative("p_r", p_r)?;
    Ok(sr_rate(p_s, p_r, sample))
}

/// R-D capacity (bits/symbol).
pub fn capacity_rd(p_r: f64, sample: &ChannelSample) -> Result<f64, ChannelError> {
    let p_r = non_negative("p_r", p_r)?;
    Ok(rd_rate(p_r, sample))
}

/// Unchecked S-R capacity for the per-slot hot path.
#[inline]
pub(crate) fn sr_rate(p_s: f64, p_r: f64, s: &ChannelSample) -> f64 {
    (p_s * s.gamma_sr / (p_r * s.gamma_rr + 1.0)).ln_1p() / std::f64::consts::LN_2
}

#[inline]
pub(crate) fn rd_rate(p_r: f64, s: &ChannelSample) -> f64 {
    (p_r * s.gamma_rd).ln_1p() / std::f64::consts::LN_2
}
