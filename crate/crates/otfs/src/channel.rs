//! Sparse delay-Doppler channel generation, tap quantization, time-domain
//! channel application and AWGN.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

use crate::frame::FrameParams;
use crate::transforms::SampleStream;

/// Nominal speed of light used for Doppler conversion (m/s).
pub const SPEED_OF_LIGHT: f64 = 3e8;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("channel profile has no paths")]
    EmptyProfile,
    #[error("path delay {delay}s is outside the supportable range [0, {limit}s)")]
    DelayOutOfRange { delay: f64, limit: f64 },
}

/// One continuous-valued propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    /// Path delay τ_i in seconds.
    pub delay: f64,
    /// Doppler shift ν_i in Hz.
    pub doppler: f64,
    /// Complex path gain h_i.
    pub gain: Complex64,
}

/// A path quantized to the delay-Doppler grid: integer delay tap l_τ,
/// integer Doppler tap k_ν and fractional Doppler κ ∈ (−1/2, 1/2].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapPath {
    pub delay_tap: usize,
    pub doppler_tap: i64,
    pub frac_doppler: f64,
    pub gain: Complex64,
}

impl TapPath {
    /// Doppler in grid units: k_ν + κ = ν·NT.
    pub fn doppler_taps(&self) -> f64 {
        self.doppler_tap as f64 + self.frac_doppler
    }

    /// Doppler shift in Hz reconstructed from the taps.
    pub fn doppler_hz(&self, params: &FrameParams) -> f64 {
        self.doppler_taps() * params.doppler_resolution()
    }
}

/// Power-delay profile: per-path delays in seconds and average powers in
/// dB, normalized to unit total power when `normalize` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    pub name: String,
    pub delays: Vec<f64>,
    pub powers_db: Vec<f64>,
    pub normalize: bool,
}

impl ChannelProfile {
    pub fn new(name: &str, delays: Vec<f64>, powers_db: Vec<f64>) -> Self {
        assert_eq!(delays.len(), powers_db.len(), "profile length mismatch");
        Self {
            name: name.to_string(),
            delays,
            powers_db,
            normalize: true,
        }
    }

    /// Extended Vehicular A power-delay profile (3GPP TS 36.101 Annex B).
    pub fn eva() -> Self {
        Self::new(
            "eva",
            vec![0.0, 30e-9, 150e-9, 310e-9, 370e-9, 710e-9, 1090e-9, 1730e-9, 2510e-9],
            vec![0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9],
        )
    }

    /// Four equal-power paths spread over the first delay taps of the
    /// given grid; a light-weight profile for tests and sweeps.
    pub fn synthetic_four(params: &FrameParams) -> Self {
        let dt = params.sample_interval();
        Self::new(
            "synthetic-4",
            vec![0.0, dt, 2.0 * dt, 3.0 * dt],
            vec![0.0, 0.0, 0.0, 0.0],
        )
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    /// Per-path linear powers, summing to 1 when normalized.
    pub fn linear_powers(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        if self.normalize {
            let total: f64 = p.iter().sum();
            for v in &mut p {
                *v /= total;
            }
        }
        p
    }
}

/// Maximum Doppler shift for a terminal speed in km/h at the carrier.
pub fn max_doppler_hz(speed_kmph: f64, carrier_freq: f64) -> f64 {
    (speed_kmph / 3.6) * carrier_freq / SPEED_OF_LIGHT
}

/// Draws one channel realization: Rayleigh path gains with the profile's
/// average powers and Doppler shifts ν_i = ν_max·cos(θ_i), θ_i ~ U(0, π).
pub fn generate_channel<R: Rng + ?Sized>(
    profile: &ChannelProfile,
    speed_kmph: f64,
    params: &FrameParams,
    rng: &mut R,
) -> Result<Vec<PathSpec>, ChannelError> {
    if profile.is_empty() {
        return Err(ChannelError::EmptyProfile);
    }
    let nu_max = max_doppler_hz(speed_kmph, params.carrier_freq());
    let powers = profile.linear_powers();
    let normal = StandardNormal;
    Ok(profile
        .delays
        .iter()
        .zip(&powers)
        .map(|(&delay, &power)| {
            let sigma = (power / 2.0).sqrt();
            let re: f64 = normal.sample(rng);
            let im: f64 = normal.sample(rng);
            let gain = Complex64::new(sigma * re, sigma * im);
            let theta: f64 = rng.random_range(0.0..PI);
            PathSpec {
                delay,
                doppler: nu_max * theta.cos(),
                gain,
            }
        })
        .collect())
}

/// Quantizes a path to the nearest delay sample and Doppler tap, with the
/// fractional remainder κ forced into (−1/2, 1/2].
pub fn quantize_taps(path: &PathSpec, params: &FrameParams) -> Result<TapPath, ChannelError> {
    let delay_taps = path.delay * params.bandwidth();
    let l_tau = delay_taps.round() as i64;
    if l_tau < 0 || l_tau >= params.m_delay() as i64 {
        return Err(ChannelError::DelayOutOfRange {
            delay: path.delay,
            limit: 1.0 / params.subcarrier_spacing(),
        });
    }
    let doppler_taps = path.doppler * params.frame_duration();
    // κ ∈ (−1/2, 1/2]: the half point resolves to the lower tap
    let k_nu = (doppler_taps - 0.5).ceil();
    Ok(TapPath {
        delay_tap: l_tau as usize,
        doppler_tap: k_nu as i64,
        frac_doppler: doppler_taps - k_nu,
        gain: path.gain,
    })
}

/// Applies the sparse delay-Doppler channel to a sample stream:
/// `r[u] = Σ_i h_i s[u − l_τi] e^{j2π ν_i (u − l_τi)/(MΔf)}`, with zero
/// signal before the frame (no cyclic prefix).
pub fn apply_channel_time(
    s: &SampleStream,
    taps: &[TapPath],
    params: &FrameParams,
) -> SampleStream {
    let nm = params.grid_size() as f64;
    let mut r = vec![Complex64::new(0.0, 0.0); s.len()];
    for tap in taps {
        let cycles_per_sample = tap.doppler_taps() / nm;
        for u in tap.delay_tap..s.len() {
            let src = u - tap.delay_tap;
            let phase = TAU * cycles_per_sample * src as f64;
            r[u] += tap.gain * s[src] * Complex64::from_polar(1.0, phase);
        }
    }
    r
}

/// Adds circularly-symmetric complex Gaussian noise of variance
/// σ² = 10^(−snr_db/10). A non-finite `snr_db` (the noiseless sentinel)
/// leaves the stream unchanged.
pub fn add_awgn<R: Rng + ?Sized>(r: &SampleStream, snr_db: f64, rng: &mut R) -> SampleStream {
    if !snr_db.is_finite() {
        return r.clone();
    }
    let sigma = (noise_variance(snr_db) / 2.0).sqrt();
    let normal = StandardNormal;
    r.iter()
        .map(|z| {
            let re: f64 = normal.sample(rng);
            let im: f64 = normal.sample(rng);
            z + Complex64::new(sigma * re, sigma * im)
        })
        .collect()
}

/// Noise variance implied by an SNR in dB under the unit-signal-power
/// convention used throughout.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}
