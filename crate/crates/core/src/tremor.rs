//! Synthetic physiological tremor: a sinusoid in the 4-12 Hz band with a
//! random phase per channel, plus white Gaussian sensor noise.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TremorProfile {
    pub tremor_hz: f64,
    pub tremor_rms_deg: f64,
    pub noise_rms_deg: f64,
    pub seed: u64,
}

impl Default for TremorProfile {
    fn default() -> Self {
        Self {
            tremor_hz: 8.0,
            tremor_rms_deg: 0.4,
            noise_rms_deg: 0.05,
            seed: 0,
        }
    }
}

impl TremorProfile {
    pub const BAND_HZ: (f64, f64) = (4.0, 12.0);

    pub fn still(seed: u64) -> Self {
        Self {
            tremor_rms_deg: 0.0,
            noise_rms_deg: 0.0,
            seed,
            ..Self::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = Self::BAND_HZ;
        if !(lo..=hi).contains(&self.tremor_hz) {
            return Err(Error::invalid(
                "tremor_hz",
                format!("must lie in [{lo}, {hi}] Hz, got {}", self.tremor_hz),
            ));
        }
        if !(self.tremor_rms_deg.is_finite() && self.tremor_rms_deg >= 0.0) {
            return Err(Error::invalid("tremor_rms_deg", "must be finite and >= 0"));
        }
        if !(self.noise_rms_deg.is_finite() && self.noise_rms_deg >= 0.0) {
            return Err(Error::invalid("noise_rms_deg", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// One tremor sample: angular offsets added to the intended aim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TremorSample {
    pub t: f64,
    pub yaw_offset_deg: f64,
    pub pitch_offset_deg: f64,
}

/// Streaming tremor generator sampled at a fixed rate.
///
/// The stream is a pure function of the profile (including its seed) and
/// the rate: two sources built alike yield identical samples.
#[derive(Debug, Clone)]
pub struct TremorSource {
    rate_hz: f64,
    amplitude_deg: f64,
    omega: f64,
    phase_yaw: f64,
    phase_pitch: f64,
    noise: Normal<f64>,
    rng: ChaCha8Rng,
    index: u64,
}

impl TremorSource {
    pub fn new(profile: &TremorProfile, rate_hz: f64) -> Result<Self> {
        profile.validate()?;
        if !(rate_hz.is_finite() && rate_hz > 2.0 * profile.tremor_hz) {
            return Err(Error::Aliasing {
                rate_hz,
                tremor_hz: profile.tremor_hz,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
        let phase_yaw = rng.random_range(0.0..2.0 * PI);
        let phase_pitch = rng.random_range(0.0..2.0 * PI);
        let noise = Normal::new(0.0, profile.noise_rms_deg)
            .map_err(|e| Error::invalid("noise_rms_deg", e.to_string()))?;
        Ok(Self {
            rate_hz,
            amplitude_deg: SQRT_2 * profile.tremor_rms_deg,
            omega: 2.0 * PI * profile.tremor_hz,
            phase_yaw,
            phase_pitch,
            noise,
            rng,
            index: 0,
        })
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn next_sample(&mut self) -> TremorSample {
        let t = self.index as f64 / self.rate_hz;
        self.index += 1;
        let yaw = self.amplitude_deg * (self.omega * t + self.phase_yaw).sin()
            + self.noise.sample(&mut self.rng);
        let pitch = self.amplitude_deg * (self.omega * t + self.phase_pitch).sin()
            + self.noise.sample(&mut self.rng);
        TremorSample {
            t,
            yaw_offset_deg: yaw,
            pitch_offset_deg: pitch,
        }
    }
}

impl Iterator for TremorSource {
    type Item = TremorSample;

    fn next(&mut self) -> Option<TremorSample> {
        Some(self.next_sample())
    }
}

/// Tremor offsets for `duration_s` seconds at `rate_hz`, starting at t = 0.
pub fn synth_tremor(
    profile: &TremorProfile,
    duration_s: f64,
    rate_hz: f64,
) -> Result<Vec<TremorSample>> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid("duration_s", "must be finite and > 0"));
    }
    let source = TremorSource::new(profile, rate_hz)?;
    let n = (duration_s * rate_hz).round().max(1.0) as usize;
    Ok(source.take(n).collect())
}
