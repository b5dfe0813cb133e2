//! Grid geometry, QAM alphabets and bit/symbol mapping shared by every
//! other module.
//!
//! The delay-Doppler grid has `N` Doppler bins (time slots) and `M` delay
//! bins (subcarriers). A grid point `(k, l)` is vectorized Doppler-major,
//! `c = k * M + l`; every matrix builder and the detector use this order.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("grid dimensions must be positive (got N={n}, M={m})")]
    EmptyGrid { n: usize, m: usize },
    #[error("subcarrier spacing and carrier frequency must be positive")]
    NonPositiveFrequency,
    #[error("maximum delay {tau_max}s exceeds the supportable 1/Δf = {limit}s")]
    DelaySpread { tau_max: f64, limit: f64 },
    #[error("maximum Doppler {nu_max}Hz exceeds the supportable 1/T = {limit}Hz")]
    DopplerSpread { nu_max: f64, limit: f64 },
    #[error("unsupported alphabet size {0} (square QAM: 4, 16, 64)")]
    UnsupportedAlphabet(usize),
    #[error("bit sequence length {got} does not match expected {expected}")]
    BitLength { got: usize, expected: usize },
    #[error("symbol count {got} does not match expected {expected}")]
    SymbolCount { got: usize, expected: usize },
}

/// OTFS frame geometry: N Doppler bins x M delay bins, subcarrier spacing
/// Δf and carrier frequency. The slot duration T is derived as 1/Δf so the
/// invariant T·Δf = 1 holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    n_doppler: usize,
    m_delay: usize,
    subcarrier_spacing: f64,
    carrier_freq: f64,
}

impl FrameParams {
    pub fn new(
        n_doppler: usize,
        m_delay: usize,
        subcarrier_spacing: f64,
        carrier_freq: f64,
    ) -> Result<Self, FrameError> {
        if n_doppler == 0 || m_delay == 0 {
            return Err(FrameError::EmptyGrid {
                n: n_doppler,
                m: m_delay,
            });
        }
        if !(subcarrier_spacing > 0.0) || !(carrier_freq > 0.0) {
            return Err(FrameError::NonPositiveFrequency);
        }
        Ok(Self {
            n_doppler,
            m_delay,
            subcarrier_spacing,
            carrier_freq,
        })
    }

    pub fn n_doppler(&self) -> usize {
        self.n_doppler
    }

    pub fn m_delay(&self) -> usize {
        self.m_delay
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.subcarrier_spacing
    }

    pub fn carrier_freq(&self) -> f64 {
        self.carrier_freq
    }

    /// Slot duration T = 1/Δf.
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing
    }

    /// Frame duration T_f = N·T.
    pub fn frame_duration(&self) -> f64 {
        self.n_doppler as f64 * self.symbol_duration()
    }

    /// Bandwidth B = M·Δf.
    pub fn bandwidth(&self) -> f64 {
        self.m_delay as f64 * self.subcarrier_spacing
    }

    /// Sample interval 1/(M·Δf): the delay resolution of the grid.
    pub fn sample_interval(&self) -> f64 {
        1.0 / self.bandwidth()
    }

    /// Doppler resolution 1/(N·T).
    pub fn doppler_resolution(&self) -> f64 {
        1.0 / self.frame_duration()
    }

    /// Samples per frame.
    pub fn grid_size(&self) -> usize {
        self.n_doppler * self.m_delay
    }
}

/// Margins left between a channel's spread and the grid's supportable
/// limits (positive when the channel fits).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportMargins {
    pub delay_margin: f64,
    pub doppler_margin: f64,
}

/// Checks that the channel spread fits the grid: ν_max < 1/T and
/// τ_max < 1/Δf. Returns the remaining margins on success.
pub fn validate_params(
    params: &FrameParams,
    tau_max: f64,
    nu_max: f64,
) -> Result<SupportMargins, FrameError> {
    let delay_limit = 1.0 / params.subcarrier_spacing();
    let doppler_limit = 1.0 / params.symbol_duration();
    if tau_max >= delay_limit {
        return Err(FrameError::DelaySpread {
            tau_max,
            limit: delay_limit,
        });
    }
    if nu_max >= doppler_limit {
        return Err(FrameError::DopplerSpread {
            nu_max,
            limit: doppler_limit,
        });
    }
    Ok(SupportMargins {
        delay_margin: delay_limit - tau_max,
        doppler_margin: doppler_limit - nu_max,
    })
}

/// Unit-average-energy square QAM with Gray-mapped bits on each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    points: Vec<Complex64>,
    bits_per_symbol: usize,
}

fn gray_encode(v: usize) -> usize {
    v ^ (v >> 1)
}

impl Alphabet {
    /// Builds the Gray-mapped square QAM constellation of size `q`
    /// (4, 16 or 64), normalized so that (1/Q)Σ|a|² = 1.
    ///
    /// Point index = symbol bit pattern: the first half of the bits select
    /// the in-phase level, the second half the quadrature level.
    pub fn square_qam(q: usize) -> Result<Self, FrameError> {
        if !matches!(q, 4 | 16 | 64) {
            return Err(FrameError::UnsupportedAlphabet(q));
        }
        let side = (q as f64).sqrt().round() as usize;
        let bits_per_axis = side.trailing_zeros() as usize;
        // E[|a|²] of un-normalized ±1, ±3, ... levels on both axes.
        let energy = 2.0 * (side * side - 1) as f64 / 3.0;
        let scale = 1.0 / energy.sqrt();

        // level amplitude carried by the Gray pattern g on one axis
        let mut axis = vec![0.0f64; side];
        for (level, a) in axis.iter_mut().enumerate() {
            *a = (2 * level) as f64 - (side - 1) as f64;
        }
        let mut points = vec![Complex64::new(0.0, 0.0); q];
        for i_level in 0..side {
            for q_level in 0..side {
                let idx = (gray_encode(i_level) << bits_per_axis) | gray_encode(q_level);
                points[idx] = Complex64::new(axis[i_level] * scale, axis[q_level] * scale);
            }
        }
        Ok(Self {
            points,
            bits_per_symbol: 2 * bits_per_axis,
        })
    }

    /// Antipodal {+1, −1} alphabet (index 0 ↦ +1), 1 bit per symbol.
    pub fn bpsk() -> Self {
        Self {
            points: vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            bits_per_symbol: 1,
        }
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    /// Index of the constellation point nearest to `z` (ties resolved
    /// toward the lowest index).
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, a) in self.points.iter().enumerate() {
            let d = (z - a).norm_sqr();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }

    /// Writes the `bits_per_symbol` bits of point `index`, MSB first.
    pub fn index_bits(&self, index: usize, out: &mut Vec<bool>) {
        for b in (0..self.bits_per_symbol).rev() {
            out.push((index >> b) & 1 == 1);
        }
    }
}

/// Maps a bit sequence onto constellation points. The bit length must be a
/// multiple of `bits_per_symbol`.
pub fn map_bits(bits: &[bool], alphabet: &Alphabet) -> Result<Vec<Complex64>, FrameError> {
    let bps = alphabet.bits_per_symbol();
    if bits.len() % bps != 0 {
        return Err(FrameError::BitLength {
            got: bits.len(),
            expected: (bits.len() / bps) * bps,
        });
    }
    Ok(bits
        .chunks(bps)
        .map(|chunk| {
            let mut idx = 0usize;
            for &b in chunk {
                idx = (idx << 1) | b as usize;
            }
            alphabet.point(idx)
        })
        .collect())
}

/// Inverse of [`map_bits`]: slices each symbol to the nearest constellation
/// point and emits its bit pattern.
pub fn demap_symbols(symbols: &[Complex64], alphabet: &Alphabet) -> Vec<bool> {
    let mut bits = Vec::with_capacity(symbols.len() * alphabet.bits_per_symbol());
    for &s in symbols {
        let idx = alphabet.nearest(s);
        alphabet.index_bits(idx, &mut bits);
    }
    bits
}

/// A position on the delay-Doppler grid with its Doppler-major
/// linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridIndex {
    pub doppler_k: usize,
    pub delay_l: usize,
}

impl GridIndex {
    pub fn linear(&self, params: &FrameParams) -> usize {
        self.doppler_k * params.m_delay() + self.delay_l
    }

    pub fn from_linear(c: usize, params: &FrameParams) -> Self {
        Self {
            doppler_k: c / params.m_delay(),
            delay_l: c % params.m_delay(),
        }
    }
}
