//! Monte-Carlo BER campaign runner: per-frame trials for the OTFS and
//! OFDM schemes, deterministic seeding, parameter sweeps, and CSV output.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

use crate::channel::{
    add_awgn, apply_channel_time, generate_channel, noise_variance, quantize_taps, ChannelError,
    ChannelProfile, TapPath,
};
use crate::detector::{mp_detect, DetectorConfig, DetectorError};
use crate::effective_channel::{
    build_ideal, build_ofdm, build_rect, EffectiveChannelError, IdiWindow,
    SparseEffectiveChannel,
};
use crate::frame::{Alphabet, FrameError, FrameParams};
use crate::transforms::{heisenberg_rect, isfft, sfft, wigner_rect, DelayDopplerGrid};

/// OFDM cyclic-prefix duration in seconds.
pub const OFDM_CP_SECONDS: f64 = 2.6e-6;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    EffectiveChannel(#[from] EffectiveChannelError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error("unknown channel profile {0:?}")]
    UnknownProfile(String),
    #[error("invalid campaign config: {0}")]
    BadConfig(&'static str),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

/// Transmission/detection scheme of one campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Ideal-pulse OTFS: synthesize y = Hx + w in the delay-Doppler
    /// domain and detect with the same sparse structure.
    OtfsIdeal,
    /// Rectangular-pulse waveform transmission, detected with the
    /// ICI/ISI-corrected channel.
    OtfsRectWc,
    /// Same waveform, detected with the ideal-pulse channel (phase
    /// corrections omitted).
    OtfsRectWo,
    /// CP-OFDM baseline, one OTFS frame vs N OFDM symbols.
    Ofdm,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::OtfsIdeal => "otfs-ideal",
            Scheme::OtfsRectWc => "otfs-rect-wc",
            Scheme::OtfsRectWo => "otfs-rect-wo",
            Scheme::Ofdm => "ofdm",
        };
        f.write_str(s)
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "otfs-ideal" => Ok(Scheme::OtfsIdeal),
            "otfs-rect-wc" => Ok(Scheme::OtfsRectWc),
            "otfs-rect-wo" => Ok(Scheme::OtfsRectWo),
            "ofdm" => Ok(Scheme::Ofdm),
            other => Err(format!(
                "unknown scheme {other:?} (expected otfs-ideal, otfs-rect-wc, otfs-rect-wo or ofdm)"
            )),
        }
    }
}

/// Custom power-delay profile loadable from a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub delays: Vec<f64>,
    pub powers_db: Vec<f64>,
}

fn default_n() -> usize {
    16
}
fn default_m() -> usize {
    64
}
fn default_spacing() -> f64 {
    15e3
}
fn default_carrier() -> f64 {
    4e9
}
fn default_qam() -> usize {
    4
}
fn default_frames() -> usize {
    500
}
fn default_ni() -> IdiWindow {
    IdiWindow::Limited(10)
}
fn default_profile() -> String {
    "eva".to_string()
}

/// Full description of one Monte-Carlo campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub scheme: Scheme,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_spacing")]
    pub subcarrier_spacing: f64,
    #[serde(default = "default_carrier")]
    pub carrier_freq: f64,
    #[serde(default = "default_qam")]
    pub qam: usize,
    pub snr_db: Vec<f64>,
    pub speed_kmph: Vec<f64>,
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default = "default_ni")]
    pub ni: IdiWindow,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default = "default_profile")]
    pub profile: String,
    /// Named custom profiles referenced by `profile`.
    #[serde(default)]
    pub profiles: BTreeMap<String, ProfileSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Skip the noise addition (the SNR still sets the detector's noise
    /// variance).
    #[serde(default)]
    pub noiseless: bool,
    /// Worker threads for trial parallelism; 0 = rayon default.
    #[serde(default)]
    pub threads: usize,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.frames < 1 {
            return Err(HarnessError::BadConfig("frames must be ≥ 1"));
        }
        if self.snr_db.is_empty() {
            return Err(HarnessError::BadConfig("snr_db must be non-empty"));
        }
        if self.speed_kmph.is_empty() {
            return Err(HarnessError::BadConfig("speed_kmph must be non-empty"));
        }
        self.detector.validate()?;
        Ok(())
    }

    pub fn frame_params(&self) -> Result<FrameParams, HarnessError> {
        Ok(FrameParams::new(
            self.n,
            self.m,
            self.subcarrier_spacing,
            self.carrier_freq,
        )?)
    }

    pub fn resolve_profile(&self, params: &FrameParams) -> Result<ChannelProfile, HarnessError> {
        match self.profile.as_str() {
            "eva" => Ok(ChannelProfile::eva()),
            "synthetic-4" => Ok(ChannelProfile::synthetic_four(params)),
            name => self
                .profiles
                .get(name)
                .map(|spec| ChannelProfile::new(name, spec.delays.clone(), spec.powers_db.clone()))
                .ok_or_else(|| HarnessError::UnknownProfile(name.to_string())),
        }
    }
}

/// One aggregated campaign point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub speed_kmph: f64,
    pub ni: IdiWindow,
    pub damping: f64,
    pub frames: usize,
    pub bit_errors: u64,
    pub total_bits: u64,
    pub ber: f64,
    pub mean_iterations: f64,
    pub wall_time_s: f64,
}

pub const CSV_HEADER: &str =
    "scheme,snr_db,speed_kmph,ni,damping,frames,bit_errors,total_bits,ber,mean_iterations,wall_time_s";

impl BerRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.scheme,
            self.snr_db,
            self.speed_kmph,
            self.ni,
            self.damping,
            self.frames,
            self.bit_errors,
            self.total_bits,
            self.ber,
            self.mean_iterations,
            self.wall_time_s
        )
    }
}

/// Outcome of one frame trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialOutcome {
    pub bit_errors: u64,
    pub total_bits: u64,
    pub iterations: u64,
}

/// Independent per-trial random streams. The seed depends on the SNR
/// point and trial index but deliberately not on speed, scheme, or swept
/// detector parameters, so comparisons across those axes are paired
/// (common random numbers).
fn stream_rng(master_seed: u64, snr_index: usize, trial: usize, stream: u8) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&(snr_index as u64).to_le_bytes());
    seed[16..24].copy_from_slice(&(trial as u64).to_le_bytes());
    seed[24] = stream;
    ChaCha8Rng::from_seed(seed)
}

struct TrialContext {
    scheme: Scheme,
    params: FrameParams,
    alphabet: Alphabet,
    profile: ChannelProfile,
    window: IdiWindow,
    detector: DetectorConfig,
    speed_kmph: f64,
    snr_db: f64,
    snr_index: usize,
    noiseless: bool,
    master_seed: u64,
}

impl TrialContext {
    fn noise_args(&self) -> (f64, f64) {
        // (snr passed to add_awgn, variance assumed by the detector)
        let awgn_snr = if self.noiseless {
            f64::INFINITY
        } else {
            self.snr_db
        };
        (awgn_snr, noise_variance(self.snr_db).max(1e-12))
    }

    fn draw_taps(&self, rng: &mut ChaCha8Rng) -> Result<Vec<TapPath>, HarnessError> {
        let paths = generate_channel(&self.profile, self.speed_kmph, &self.params, rng)?;
        paths
            .iter()
            .map(|p| quantize_taps(p, &self.params).map_err(HarnessError::from))
            .collect()
    }

    fn draw_symbol_indices(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        use rand::Rng;
        (0..count).map(|_| rng.random_range(0..self.alphabet.size())).collect()
    }
}

fn bit_errors_between(a: &[usize], b: &[usize]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x ^ y).count_ones() as u64)
        .sum()
}

fn detect_and_count(
    y: &[Complex64],
    h: &SparseEffectiveChannel,
    sent: &[usize],
    noise_var: f64,
    ctx: &TrialContext,
) -> Result<TrialOutcome, HarnessError> {
    let res = mp_detect(y, h, &ctx.alphabet, noise_var, &ctx.detector)?;
    Ok(TrialOutcome {
        bit_errors: bit_errors_between(sent, &res.decisions),
        total_bits: (sent.len() * ctx.alphabet.bits_per_symbol()) as u64,
        iterations: res.iterations as u64,
    })
}

/// Runs one frame: draw a channel, transmit one frame's worth of random
/// symbols through the scheme's signal path, detect, and count bit errors.
fn run_trial_ctx(ctx: &TrialContext, trial: usize) -> Result<TrialOutcome, HarnessError> {
    let mut channel_rng = stream_rng(ctx.master_seed, ctx.snr_index, trial, 0);
    let mut data_rng = stream_rng(ctx.master_seed, ctx.snr_index, trial, 1);
    let mut noise_rng = stream_rng(ctx.master_seed, ctx.snr_index, trial, 2);

    let taps = ctx.draw_taps(&mut channel_rng)?;
    let windows = vec![ctx.window; taps.len()];
    let (awgn_snr, noise_var) = ctx.noise_args();
    let params = &ctx.params;

    match ctx.scheme {
        Scheme::OtfsIdeal => {
            let sent = ctx.draw_symbol_indices(params.grid_size(), &mut data_rng);
            let x: Vec<Complex64> = sent.iter().map(|&j| ctx.alphabet.point(j)).collect();
            // the signal always sees the untruncated channel; the window
            // only limits what the detector models
            let full = vec![IdiWindow::Full; taps.len()];
            let h_signal = build_ideal(&taps, &full, params)?;
            let y = add_awgn(&h_signal.mul_vec(&x), awgn_snr, &mut noise_rng);
            let h_detect = if ctx.window == IdiWindow::Full {
                h_signal
            } else {
                build_ideal(&taps, &windows, params)?
            };
            detect_and_count(&y, &h_detect, &sent, noise_var, ctx)
        }
        Scheme::OtfsRectWc | Scheme::OtfsRectWo => {
            let sent = ctx.draw_symbol_indices(params.grid_size(), &mut data_rng);
            let x: Vec<Complex64> = sent.iter().map(|&j| ctx.alphabet.point(j)).collect();
            let grid = DelayDopplerGrid::from_flat(params, x);
            let s = heisenberg_rect(&isfft(&grid));
            let r = add_awgn(&apply_channel_time(&s, &taps, params), awgn_snr, &mut noise_rng);
            let y = sfft(&wigner_rect(&r, params)).into_flat();
            let h = match ctx.scheme {
                Scheme::OtfsRectWc => build_rect(&taps, &windows, params)?,
                _ => build_ideal(&taps, &windows, params)?,
            };
            detect_and_count(&y, &h, &sent, noise_var, ctx)
        }
        Scheme::Ofdm => run_ofdm_trial(ctx, &taps, &mut data_rng, &mut noise_rng),
    }
}

/// OFDM cyclic-prefix length in samples for the given grid.
pub fn ofdm_cp_samples(params: &FrameParams) -> usize {
    (OFDM_CP_SECONDS * params.bandwidth()).round() as usize
}

fn run_ofdm_trial(
    ctx: &TrialContext,
    taps: &[TapPath],
    data_rng: &mut ChaCha8Rng,
    noise_rng: &mut ChaCha8Rng,
) -> Result<TrialOutcome, HarnessError> {
    let params = &ctx.params;
    let m = params.m_delay();
    let n_symbols = params.n_doppler();
    let cp = ofdm_cp_samples(params);
    let (awgn_snr, noise_var) = ctx.noise_args();

    // detection channel: CP shifts every path's Doppler phase reference by
    // cp samples, folded into the gains
    let nm = params.grid_size() as f64;
    let rotated: Vec<TapPath> = taps
        .iter()
        .map(|t| TapPath {
            gain: t.gain
                * Complex64::from_polar(1.0, std::f64::consts::TAU * t.doppler_taps() * cp as f64 / nm),
            ..*t
        })
        .collect();
    let h = build_ofdm(&rotated, cp, 8, params)?;

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(m);
    let fft = planner.plan_fft_forward(m);
    let scale = 1.0 / (m as f64).sqrt();

    let mut outcome = TrialOutcome::default();
    for _ in 0..n_symbols {
        let sent = ctx.draw_symbol_indices(m, data_rng);
        let mut time: Vec<Complex64> = sent.iter().map(|&j| ctx.alphabet.point(j)).collect();
        ifft.process(&mut time);
        for v in &mut time {
            *v *= scale;
        }
        // prepend the cyclic prefix, transmit, strip it again
        let mut tx = Vec::with_capacity(cp + m);
        tx.extend_from_slice(&time[m - cp..]);
        tx.extend_from_slice(&time);
        let rx = add_awgn(&apply_channel_time(&tx, taps, params), awgn_snr, noise_rng);
        let mut y = rx[cp..].to_vec();
        fft.process(&mut y);
        for v in &mut y {
            *v *= scale;
        }
        let one = detect_and_count(&y, &h, &sent, noise_var, ctx)?;
        outcome.bit_errors += one.bit_errors;
        outcome.total_bits += one.total_bits;
        outcome.iterations += one.iterations;
    }
    // report mean iterations per detector call, like the OTFS schemes
    outcome.iterations = (outcome.iterations as f64 / n_symbols as f64).round() as u64;
    Ok(outcome)
}

/// Public single-trial entry point (one frame at the first SNR/speed of
/// the config).
pub fn run_trial(cfg: &CampaignConfig, trial_seed: usize) -> Result<TrialOutcome, HarnessError> {
    cfg.validate()?;
    let params = cfg.frame_params()?;
    let ctx = TrialContext {
        scheme: cfg.scheme,
        alphabet: Alphabet::square_qam(cfg.qam)?,
        profile: cfg.resolve_profile(&params)?,
        window: cfg.ni,
        detector: cfg.detector,
        speed_kmph: cfg.speed_kmph[0],
        snr_db: cfg.snr_db[0],
        snr_index: 0,
        noiseless: cfg.noiseless,
        master_seed: cfg.seed,
        params,
    };
    run_trial_ctx(&ctx, trial_seed)
}

fn run_point(ctx: &TrialContext, frames: usize) -> Result<(TrialOutcome, f64), HarnessError> {
    let start = Instant::now();
    let total = (0..frames)
        .into_par_iter()
        .map(|trial| run_trial_ctx(ctx, trial))
        .try_reduce(TrialOutcome::default, |a, b| {
            Ok(TrialOutcome {
                bit_errors: a.bit_errors + b.bit_errors,
                total_bits: a.total_bits + b.total_bits,
                iterations: a.iterations + b.iterations,
            })
        })?;
    Ok((total, start.elapsed().as_secs_f64()))
}

/// Runs the full (snr × speed) grid and optionally writes the CSV.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<Vec<BerRecord>, HarnessError> {
    cfg.validate()?;
    let params = cfg.frame_params()?;
    let alphabet = Alphabet::square_qam(cfg.qam)?;
    let profile = cfg.resolve_profile(&params)?;

    let run = || -> Result<Vec<BerRecord>, HarnessError> {
        let mut records = Vec::new();
        for (snr_index, &snr_db) in cfg.snr_db.iter().enumerate() {
            for &speed_kmph in &cfg.speed_kmph {
                let ctx = TrialContext {
                    scheme: cfg.scheme,
                    params: params.clone(),
                    alphabet: alphabet.clone(),
                    profile: profile.clone(),
                    window: cfg.ni,
                    detector: cfg.detector,
                    speed_kmph,
                    snr_db,
                    snr_index,
                    noiseless: cfg.noiseless,
                    master_seed: cfg.seed,
                };
                let (total, wall) = run_point(&ctx, cfg.frames)?;
                records.push(BerRecord {
                    scheme: cfg.scheme,
                    snr_db,
                    speed_kmph,
                    ni: cfg.ni,
                    damping: cfg.detector.damping,
                    frames: cfg.frames,
                    bit_errors: total.bit_errors,
                    total_bits: total.total_bits,
                    ber: total.bit_errors as f64 / total.total_bits as f64,
                    mean_iterations: total.iterations as f64 / cfg.frames as f64,
                    wall_time_s: wall,
                });
            }
        }
        Ok(records)
    };

    let records = if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|_| HarnessError::BadConfig("could not build thread pool"))?;
        pool.install(run)?
    } else {
        run()?
    };

    if let Some(path) = &cfg.out {
        write_csv(path, &records)?;
    }
    Ok(records)
}

/// Appends records to `path`, writing the header first when the file is
/// new or empty.
pub fn write_csv(path: &Path, records: &[BerRecord]) -> Result<(), HarnessError> {
    let need_header = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = File::options().create(true).append(true).open(path)?;
    let mut w = BufWriter::new(file);
    if need_header {
        writeln!(w, "{CSV_HEADER}")?;
    }
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Reruns the campaign for each window half-width, all else (including
/// seeds) fixed.
pub fn sweep_ni(
    cfg: &CampaignConfig,
    ni_list: &[IdiWindow],
) -> Result<Vec<BerRecord>, HarnessError> {
    let mut records = Vec::new();
    for &ni in ni_list {
        let mut c = cfg.clone();
        c.ni = ni;
        c.out = None;
        records.extend(run_campaign(&c)?);
    }
    if let Some(path) = &cfg.out {
        write_csv(path, &records)?;
    }
    Ok(records)
}

/// Reruns the campaign for each damping factor, all else (including
/// seeds) fixed.
pub fn sweep_damping(
    cfg: &CampaignConfig,
    delta_list: &[f64],
) -> Result<Vec<BerRecord>, HarnessError> {
    let mut records = Vec::new();
    for &delta in delta_list {
        let mut c = cfg.clone();
        c.detector.damping = delta;
        c.out = None;
        records.extend(run_campaign(&c)?);
    }
    if let Some(path) = &cfg.out {
        write_csv(path, &records)?;
    }
    Ok(records)
}
