//! Sparse NM x NM delay-Doppler effective channels for ideal and
//! rectangular pulses, the OFDM frequency-domain matrix, and dense
//! brute-force oracles used to validate the sparse builders.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;
use std::io::{self, Write};
use thiserror::Error;

use crate::channel::{apply_channel_time, TapPath};
use crate::frame::FrameParams;
use crate::transforms::{heisenberg_rect, isfft, sfft, wigner_rect, DelayDopplerGrid};

#[derive(Debug, Error, PartialEq)]
pub enum EffectiveChannelError {
    #[error("IDI window of half-width {n_i} needs 2·{n_i}+1 ≤ N = {n}")]
    WindowTooWide { n_i: usize, n: usize },
    #[error("expected one window per path ({paths}), got {windows}")]
    WindowCount { paths: usize, windows: usize },
    #[error("dense oracle guarded to NM ≤ 4096 (requested {0})")]
    DenseTooLarge(usize),
    #[error("cyclic prefix of {cp} samples is shorter than the maximum delay tap {l_max}")]
    CpTooShort { cp: usize, l_max: usize },
}

/// Doppler window of one path: how many neighboring Doppler taps on each
/// side of the peak are kept in the sparse channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdiWindow {
    /// Keep 2·n_i + 1 taps centered on the peak.
    Limited(usize),
    /// Keep all N Doppler taps (no truncation).
    Full,
}

// serialized as the half-width integer, or the string "full"
impl serde::Serialize for IdiWindow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            IdiWindow::Limited(n_i) => s.serialize_u64(n_i as u64),
            IdiWindow::Full => s.serialize_str("full"),
        }
    }
}

impl<'de> serde::Deserialize<'de> for IdiWindow {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            HalfWidth(usize),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::HalfWidth(n_i) => Ok(IdiWindow::Limited(n_i)),
            Raw::Name(s) if s.eq_ignore_ascii_case("full") => Ok(IdiWindow::Full),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "expected a window half-width or \"full\", got {s:?}"
            ))),
        }
    }
}

impl std::fmt::Display for IdiWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            IdiWindow::Limited(n_i) => write!(f, "{n_i}"),
            IdiWindow::Full => write!(f, "full"),
        }
    }
}

impl std::str::FromStr for IdiWindow {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(IdiWindow::Full);
        }
        s.parse::<usize>()
            .map(IdiWindow::Limited)
            .map_err(|_| format!("expected a window half-width or \"full\", got {s:?}"))
    }
}

impl IdiWindow {
    pub fn validate(&self, n: usize) -> Result<(), EffectiveChannelError> {
        match *self {
            IdiWindow::Limited(n_i) if 2 * n_i + 1 > n => {
                Err(EffectiveChannelError::WindowTooWide { n_i, n })
            }
            _ => Ok(()),
        }
    }

    /// Doppler offsets `q` retained by this window on a grid of N bins.
    pub fn offsets(&self, n: usize) -> Vec<i64> {
        match *self {
            IdiWindow::Limited(n_i) => (-(n_i as i64)..=n_i as i64).collect(),
            IdiWindow::Full => {
                let lo = -((n / 2) as i64);
                (lo..lo + n as i64).collect()
            }
        }
    }

    /// Number of retained taps.
    pub fn width(&self, n: usize) -> usize {
        match *self {
            IdiWindow::Limited(n_i) => 2 * n_i + 1,
            IdiWindow::Full => n,
        }
    }
}

/// Immutable sparse NM x NM complex matrix with row- and column-major
/// adjacency, shared by the builders and the detector.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEffectiveChannel {
    dim: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseEffectiveChannel {
    /// Builds the matrix from per-row entry lists; entries landing on the
    /// same (row, col) coordinate are summed.
    pub fn from_rows(dim: usize, mut rows: Vec<Vec<(usize, Complex64)>>) -> Self {
        assert_eq!(rows.len(), dim);
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, Complex64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            *row = merged;
        }
        Self { dim, rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Non-zero entries of row `d`: the index set I(d) with coefficients.
    pub fn row(&self, d: usize) -> &[(usize, Complex64)] {
        &self.rows[d]
    }

    /// Column-major adjacency: for each column `c`, the index set J(c)
    /// with coefficients.
    pub fn columns(&self) -> Vec<Vec<(usize, Complex64)>> {
        let mut cols = vec![Vec::new(); self.dim];
        for (d, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                cols[c].push((d, v));
            }
        }
        cols
    }

    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim);
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim * self.dim];
        for (d, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out[d * self.dim + c] = v;
            }
        }
        out
    }

    /// Writes the matrix as text triplets `row col re im`, one per line.
    pub fn write_triplets<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for (d, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                writeln!(w, "{} {} {:.17e} {:.17e}", d, c, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Geometric-series IDI kernel `β(q) = Σ_{n=0}^{N−1} e^{j(2π/N)(−q−κ)n}`
/// in closed form; evaluates to N when −q−κ ≡ 0 (mod N).
pub fn beta(q: i64, kappa: f64, n: usize) -> Complex64 {
    if kappa == 0.0 {
        return if q.rem_euclid(n as i64) == 0 {
            Complex64::new(n as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    // e^{j2π(−q−κ)} = e^{−j2πκ} for integer q
    let num = Complex64::from_polar(1.0, -TAU * kappa) - 1.0;
    let den = Complex64::from_polar(1.0, TAU * (-(q as f64) - kappa) / n as f64) - 1.0;
    num / den
}

/// The Doppler-spread coefficient actually produced by the mod/demod
/// chain: `Σ_{n=0}^{N−1} e^{j(2π/N)(q+κ)n} = conj(β(q))`.
///
/// The closed forms printed alongside the sparse input-output relations
/// conjugate this fractional-Doppler phase relative to the first-principles
/// window derivation; the end-to-end waveform simulation confirms the
/// conjugated form, which all builders therefore use.
fn idi_coeff(q: i64, kappa: f64, n: usize) -> Complex64 {
    beta(q, kappa, n).conj()
}

fn mod_n(v: i64, n: usize) -> usize {
    v.rem_euclid(n as i64) as usize
}

fn check_windows(
    taps: &[TapPath],
    windows: &[IdiWindow],
    n: usize,
) -> Result<(), EffectiveChannelError> {
    if windows.len() != taps.len() {
        return Err(EffectiveChannelError::WindowCount {
            paths: taps.len(),
            windows: windows.len(),
        });
    }
    for w in windows {
        w.validate(n)?;
    }
    Ok(())
}

/// Sparse delay-Doppler channel for ideal (bi-orthogonal) pulses: each
/// path contributes `conj(β_i(q))/N · h_i · e^{−j2π ν_i τ_i}` at column
/// `([k−k_ν+q]_N, [l−l_τ]_M)` for every retained offset `q`.
pub fn build_ideal(
    taps: &[TapPath],
    windows: &[IdiWindow],
    params: &FrameParams,
) -> Result<SparseEffectiveChannel, EffectiveChannelError> {
    let (n, m) = (params.n_doppler(), params.m_delay());
    check_windows(taps, windows, n)?;
    let dim = n * m;
    let n_f = n as f64;

    // per path: (l_τ, k_ν, per-offset coefficient at its column)
    let mut path_coeffs: Vec<(usize, i64, Vec<(i64, Complex64)>)> = Vec::with_capacity(taps.len());
    for (tap, window) in taps.iter().zip(windows) {
        let dd_phase = Complex64::from_polar(
            1.0,
            -TAU * tap.doppler_taps() * tap.delay_tap as f64 / dim as f64,
        );
        let coeffs = window
            .offsets(n)
            .into_iter()
            .map(|q| {
                (
                    q,
                    idi_coeff(q, tap.frac_doppler, n) / n_f * tap.gain * dd_phase,
                )
            })
            .collect();
        path_coeffs.push((tap.delay_tap, tap.doppler_tap, coeffs));
    }

    let mut rows = vec![Vec::new(); dim];
    for k in 0..n {
        for l in 0..m {
            let row = &mut rows[k * m + l];
            for (l_tau, k_nu, coeffs) in &path_coeffs {
                let col_l = (l as i64 - *l_tau as i64).rem_euclid(m as i64) as usize;
                for &(q, v) in coeffs {
                    let col_k = mod_n(k as i64 - k_nu + q, n);
                    row.push((col_k * m + col_l, v));
                }
            }
        }
    }
    Ok(SparseEffectiveChannel::from_rows(dim, rows))
}

/// Sparse delay-Doppler channel for rectangular pulses: the ideal-pulse
/// structure with the ICI/ISI effects folded in as the per-entry phases of
/// the two-branch coefficient α.
pub fn build_rect(
    taps: &[TapPath],
    windows: &[IdiWindow],
    params: &FrameParams,
) -> Result<SparseEffectiveChannel, EffectiveChannelError> {
    let (n, m) = (params.n_doppler(), params.m_delay());
    check_windows(taps, windows, n)?;
    let dim = n * m;
    let n_f = n as f64;

    struct PathRect {
        l_tau: usize,
        k_nu: i64,
        // per delay bin l: the wrapped input column [l − l_τ]_M
        col_l: Vec<usize>,
        // per delay bin l: gain · e^{j2π((l−l_τ)/M)((k_ν+κ)/N)} / N
        scale_l: Vec<Complex64>,
        // per offset q: conj(β(q)) and conj(β(q)) − 1
        kernels: Vec<(i64, Complex64, Complex64)>,
    }
    let paths: Vec<PathRect> = taps
        .iter()
        .zip(windows)
        .map(|(tap, window)| PathRect {
            l_tau: tap.delay_tap,
            k_nu: tap.doppler_tap,
            col_l: (0..m)
                .map(|l| (l as i64 - tap.delay_tap as i64).rem_euclid(m as i64) as usize)
                .collect(),
            scale_l: (0..m)
                .map(|l| {
                    // ICI/ISI phase: e^{j2π((l−l_τ)/M)((k_ν+κ)/N)}
                    let tf_phase = Complex64::from_polar(
                        1.0,
                        TAU * (l as f64 - tap.delay_tap as f64) / m as f64 * tap.doppler_taps()
                            / n_f,
                    );
                    tap.gain * tf_phase / n_f
                })
                .collect(),
            kernels: window
                .offsets(n)
                .into_iter()
                .map(|q| {
                    let b = idi_coeff(q, tap.frac_doppler, n);
                    (q, b, b - 1.0)
                })
                .collect(),
        })
        .collect();
    // N-th roots of unity: e^{−j2πr/N} for the ISI-branch phase
    let roots: Vec<Complex64> = (0..n)
        .map(|r| Complex64::from_polar(1.0, -TAU * r as f64 / n_f))
        .collect();

    let mut rows = vec![Vec::new(); dim];
    for p in &paths {
        for k in 0..n {
            for &(q, b, b_minus_1) in &p.kernels {
                let col_k = mod_n(k as i64 - p.k_nu + q, n);
                let isi = b_minus_1 * roots[col_k];
                let col_base = col_k * m;
                for l in 0..m {
                    let alpha = if l >= p.l_tau { b } else { isi };
                    rows[k * m + l].push((col_base + p.col_l[l], p.scale_l[l] * alpha));
                }
            }
        }
    }
    Ok(SparseEffectiveChannel::from_rows(dim, rows))
}

/// Dense NM x NM ideal-pulse channel evaluated by direct summation of the
/// time-frequency window transform, with no Doppler truncation. Quadratic
/// in the frame size; guarded to NM ≤ 4096.
pub fn dense_ideal_oracle(
    taps: &[TapPath],
    params: &FrameParams,
) -> Result<Vec<Complex64>, EffectiveChannelError> {
    let (n, m) = (params.n_doppler(), params.m_delay());
    let dim = n * m;
    if dim > 4096 {
        return Err(EffectiveChannelError::DenseTooLarge(dim));
    }

    // per-path Doppler and delay window sums, tabulated over the wrapped
    // index differences (both are N- resp. M-periodic in the difference)
    struct PathTables {
        scaled_gain: Complex64,
        g: Vec<Complex64>,
        f: Vec<Complex64>,
    }
    let tables: Vec<PathTables> = taps
        .iter()
        .map(|tap| {
            let mut g = vec![Complex64::new(0.0, 0.0); n];
            for (dk, slot) in g.iter_mut().enumerate() {
                let arg = dk as f64 - tap.doppler_taps();
                *slot = (0..n)
                    .map(|nn| Complex64::from_polar(1.0, -TAU * arg * nn as f64 / n as f64))
                    .sum();
            }
            let mut f = vec![Complex64::new(0.0, 0.0); m];
            for (dl, slot) in f.iter_mut().enumerate() {
                let arg = dl as f64 - tap.delay_tap as f64;
                *slot = (0..m)
                    .map(|mm| Complex64::from_polar(1.0, TAU * arg * mm as f64 / m as f64))
                    .sum();
            }
            let dd_phase = Complex64::from_polar(
                1.0,
                -TAU * tap.doppler_taps() * tap.delay_tap as f64 / dim as f64,
            );
            PathTables {
                scaled_gain: tap.gain * dd_phase / dim as f64,
                g,
                f,
            }
        })
        .collect();

    let mut h = vec![Complex64::new(0.0, 0.0); dim * dim];
    for k in 0..n {
        for l in 0..m {
            let d = k * m + l;
            for kp in 0..n {
                for lp in 0..m {
                    let c = kp * m + lp;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for t in &tables {
                        let dk = (k as i64 - kp as i64).rem_euclid(n as i64) as usize;
                        let dl = (l as i64 - lp as i64).rem_euclid(m as i64) as usize;
                        acc += t.scaled_gain * t.g[dk] * t.f[dl];
                    }
                    h[d * dim + c] = acc;
                }
            }
        }
    }
    Ok(h)
}

/// Exact end-to-end simulated response with rectangular pulses:
/// `sfft(wigner(channel(heisenberg(isfft(x)))))`. Ground truth for
/// [`build_rect`].
pub fn waveform_oracle(
    x: &DelayDopplerGrid,
    taps: &[TapPath],
    params: &FrameParams,
) -> DelayDopplerGrid {
    let s = heisenberg_rect(&isfft(x));
    let r = apply_channel_time(&s, taps, params);
    sfft(&wigner_rect(&r, params))
}

/// OFDM frequency-domain channel `W H_t W^H` for one CP-protected OFDM
/// symbol of M subcarriers, sparsified to the diagonal plus the `2·b_off`
/// largest off-diagonal entries per row.
pub fn build_ofdm(
    taps: &[TapPath],
    cp_samples: usize,
    b_off: usize,
    params: &FrameParams,
) -> Result<SparseEffectiveChannel, EffectiveChannelError> {
    let m = params.m_delay();
    let nm = params.grid_size() as f64;
    if let Some(l_max) = taps.iter().map(|t| t.delay_tap).max() {
        if cp_samples < l_max {
            return Err(EffectiveChannelError::CpTooShort {
                cp: cp_samples,
                l_max,
            });
        }
    }

    // B = H_t W^H: row p has one term per path at q = (p − l_τ) mod M
    let mut b = vec![Complex64::new(0.0, 0.0); m * m];
    let inv_sqrt_m = 1.0 / (m as f64).sqrt();
    for p in 0..m {
        for tap in taps {
            let q = (p as i64 - tap.delay_tap as i64).rem_euclid(m as i64) as usize;
            // e^{j2π q ν_i/(MΔf)} with ν in cycles per sample
            let ht = tap.gain
                * Complex64::from_polar(1.0, TAU * q as f64 * tap.doppler_taps() / nm);
            for col in 0..m {
                b[p * m + col] += ht
                    * Complex64::from_polar(1.0, TAU * q as f64 * col as f64 / m as f64)
                    * inv_sqrt_m;
            }
        }
    }
    // H_ofdm = W B: unitary forward DFT down each column
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let mut col = vec![Complex64::new(0.0, 0.0); m];
    let mut h_ofdm = vec![Complex64::new(0.0, 0.0); m * m];
    for c in 0..m {
        for p in 0..m {
            col[p] = b[p * m + c];
        }
        fft.process(&mut col);
        for p in 0..m {
            h_ofdm[p * m + c] = col[p] * inv_sqrt_m;
        }
    }

    let keep_off = 2 * b_off;
    let mut rows = vec![Vec::new(); m];
    for (p, row) in rows.iter_mut().enumerate() {
        let mut off: Vec<(usize, Complex64)> = (0..m)
            .filter(|&c| c != p)
            .map(|c| (c, h_ofdm[p * m + c]))
            .collect();
        off.sort_by(|a, b| b.1.norm_sqr().partial_cmp(&a.1.norm_sqr()).unwrap());
        off.truncate(keep_off);
        row.push((p, h_ofdm[p * m + p]));
        row.extend(off);
    }
    Ok(SparseEffectiveChannel::from_rows(m, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameParams;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn params(n: usize, m: usize) -> FrameParams {
        FrameParams::new(n, m, 15e3, 4e9).unwrap()
    }

    fn random_taps(n_paths: usize, params: &FrameParams, seed: u64) -> Vec<TapPath> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = params.n_doppler() as i64;
        (0..n_paths)
            .map(|i| TapPath {
                delay_tap: i, // distinct delay taps keep entries collision-free
                doppler_tap: rng.random_range(-n / 4..=n / 4),
                frac_doppler: rng.random_range(-0.5..0.5),
                gain: c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            })
            .collect()
    }

    fn random_grid(params: &FrameParams, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..params.grid_size())
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn beta_direct(q: i64, kappa: f64, n: usize) -> Complex64 {
        (0..n)
            .map(|nn| {
                Complex64::from_polar(1.0, TAU / n as f64 * (-(q as f64) - kappa) * nn as f64)
            })
            .sum()
    }

    #[test]
    fn beta_integer_doppler_is_n_or_zero() {
        let n = 16;
        assert_eq!(beta(0, 0.0, n), c(16.0, 0.0));
        assert_eq!(beta(16, 0.0, n), c(16.0, 0.0));
        assert_eq!(beta(-32, 0.0, n), c(16.0, 0.0));
        for q in 1..16 {
            assert_eq!(beta(q, 0.0, n), c(0.0, 0.0));
            assert_eq!(beta(-q, 0.0, n), c(0.0, 0.0));
        }
    }

    #[test]
    fn beta_half_tap_value_pinned() {
        // Σ_{n=0}^{3} e^{−jπn/4} = 1 − j(1 + √2)
        let b = beta(0, 0.5, 4);
        assert!((b.re - 1.0).abs() < 1e-12, "re = {}", b.re);
        assert!((b.im + 1.0 + 2f64.sqrt()).abs() < 1e-12, "im = {}", b.im);
    }

    #[test]
    fn beta_matches_direct_sum() {
        for &n in &[4usize, 15, 16, 128] {
            for &kappa in &[-0.499, -0.25, 0.1, 0.37, 0.5] {
                for q in -(n as i64)..=(n as i64) {
                    let closed = beta(q, kappa, n);
                    let direct = beta_direct(q, kappa, n);
                    assert!(
                        (closed - direct).norm() < 1e-9 * n as f64,
                        "n={n} q={q} κ={kappa}: {closed} vs {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn beta_is_periodic_in_q() {
        for q in -8..8 {
            let a = beta(q, 0.3, 8);
            let b = beta(q + 8, 0.3, 8);
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn window_offsets() {
        assert_eq!(IdiWindow::Limited(2).offsets(16), vec![-2, -1, 0, 1, 2]);
        assert_eq!(IdiWindow::Full.offsets(8), vec![-4, -3, -2, -1, 0, 1, 2, 3]);
        assert_eq!(IdiWindow::Full.width(8), 8);
        assert_eq!(IdiWindow::Limited(3).width(8), 7);
        // Full covers each Doppler residue exactly once
        let offs = IdiWindow::Full.offsets(16);
        let mut res: Vec<usize> = offs.iter().map(|&q| mod_n(q, 16)).collect();
        res.sort_unstable();
        assert_eq!(res, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn window_too_wide_rejected() {
        assert_eq!(
            IdiWindow::Limited(8).validate(16),
            Err(EffectiveChannelError::WindowTooWide { n_i: 8, n: 16 })
        );
        assert!(IdiWindow::Limited(7).validate(16).is_ok());
        assert!(IdiWindow::Full.validate(16).is_ok());
    }

    #[test]
    fn window_count_mismatch_rejected() {
        let p = params(8, 8);
        let taps = random_taps(3, &p, 1);
        let err = build_ideal(&taps, &[IdiWindow::Full; 2], &p).unwrap_err();
        assert_eq!(
            err,
            EffectiveChannelError::WindowCount {
                paths: 3,
                windows: 2
            }
        );
    }

    #[test]
    fn sparse_matrix_merges_duplicates_and_multiplies() {
        let rows = vec![
            vec![(0, c(1.0, 0.0)), (1, c(0.5, 0.0)), (0, c(0.0, 1.0))],
            vec![(1, c(2.0, 0.0))],
        ];
        let h = SparseEffectiveChannel::from_rows(2, rows);
        assert_eq!(h.row(0), &[(0, c(1.0, 1.0)), (1, c(0.5, 0.0))]);
        assert_eq!(h.nonzeros(), 3);
        let y = h.mul_vec(&[c(1.0, 0.0), c(0.0, 1.0)]);
        assert_eq!(y, vec![c(1.0, 1.5), c(0.0, 2.0)]);
        let dense = h.to_dense();
        assert_eq!(dense[0], c(1.0, 1.0));
        assert_eq!(dense[1], c(0.5, 0.0));
        assert_eq!(dense[3], c(2.0, 0.0));
        let cols = h.columns();
        assert_eq!(cols[1], vec![(0, c(0.5, 0.0)), (1, c(2.0, 0.0))]);
    }

    #[test]
    fn triplet_export_roundtrips() {
        let p = params(4, 4);
        let taps = random_taps(2, &p, 7);
        let h = build_ideal(&taps, &[IdiWindow::Limited(1); 2], &p).unwrap();
        let mut buf = Vec::new();
        h.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut count = 0usize;
        for line in text.lines() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(parts.len(), 4);
            let (r, cidx) = (
                parts[0].parse::<usize>().unwrap(),
                parts[1].parse::<usize>().unwrap(),
            );
            let v = c(parts[2].parse().unwrap(), parts[3].parse().unwrap());
            let stored = h.row(r).iter().find(|&&(cc, _)| cc == cidx).unwrap().1;
            assert!((stored - v).norm() < 1e-12);
            count += 1;
        }
        assert_eq!(count, h.nonzeros());
    }

    #[test]
    fn structural_sparsity_is_sum_of_window_widths() {
        let p = params(8, 16);
        let taps = random_taps(3, &p, 11);
        let windows = [IdiWindow::Limited(1), IdiWindow::Limited(3), IdiWindow::Full];
        let s: usize = windows.iter().map(|w| w.width(8)).sum();
        for h in [
            build_ideal(&taps, &windows, &p).unwrap(),
            build_rect(&taps, &windows, &p).unwrap(),
        ] {
            for d in 0..h.dim() {
                assert_eq!(h.row(d).len(), s, "row {d}");
            }
            for (cidx, col) in h.columns().iter().enumerate() {
                assert_eq!(col.len(), s, "column {cidx}");
            }
        }
    }

    #[test]
    fn ideal_builder_matches_dense_oracle() {
        let p = params(8, 8);
        let taps = random_taps(3, &p, 21);
        let h = build_ideal(&taps, &[IdiWindow::Full; 3], &p).unwrap();
        let dense = h.to_dense();
        let oracle = dense_ideal_oracle(&taps, &p).unwrap();
        let err: f64 = dense
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let norm: f64 = oracle.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / norm < 1e-10, "relative error {}", err / norm);
    }

    #[test]
    fn ideal_builder_integer_doppler_single_entry_per_path() {
        // with κ = 0 every off-peak window coefficient is exactly zero,
        // so a wider window adds no structural weight
        let p = params(8, 8);
        let taps = vec![TapPath {
            delay_tap: 2,
            doppler_tap: 3,
            frac_doppler: 0.0,
            gain: c(0.8, -0.3),
        }];
        let h = build_ideal(&taps, &[IdiWindow::Limited(2)], &p).unwrap();
        for d in 0..h.dim() {
            let live: Vec<_> = h.row(d).iter().filter(|&&(_, v)| v.norm() > 0.0).collect();
            assert_eq!(live.len(), 1);
            let (col, v) = *live[0];
            let (k, l) = (d / 8, d % 8);
            assert_eq!(col, ((k + 8 - 3) % 8) * 8 + (l + 8 - 2) % 8);
            let expect = taps[0].gain
                * Complex64::from_polar(1.0, -TAU * 3.0 * 2.0 / 64.0);
            assert!((v - expect).norm() < 1e-12);
        }
    }

    fn fixed_two_path_taps() -> Vec<TapPath> {
        vec![
            TapPath {
                delay_tap: 1,
                doppler_tap: 2,
                frac_doppler: 0.37,
                gain: c(0.8, -0.4),
            },
            TapPath {
                delay_tap: 4,
                doppler_tap: -1,
                frac_doppler: -0.21,
                gain: c(-0.3, 0.55),
            },
        ]
    }

    fn rect_vs_waveform_rel_err(n: usize, m: usize, window: IdiWindow, seed: u64) -> f64 {
        let p = params(n, m);
        let taps = fixed_two_path_taps();
        let h = build_rect(&taps, &vec![window; taps.len()], &p).unwrap();
        let x = random_grid(&p, seed + 1);
        let via_h = h.mul_vec(&x);
        let grid = DelayDopplerGrid::from_flat(&p, x);
        let via_wave = waveform_oracle(&grid, &taps, &p);
        let err: f64 = via_h
            .iter()
            .zip(via_wave.as_flat())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        err / via_wave
            .as_flat()
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn rect_builder_full_window_matches_waveform_oracle_exactly() {
        // with no Doppler truncation the two-branch closed form reproduces
        // the sampled zero-prefix transmission exactly
        let e = rect_vs_waveform_rel_err(32, 16, IdiWindow::Full, 33);
        assert!(e < 1e-10, "relative error {e}");
    }

    #[test]
    fn rect_builder_truncation_error_shrinks_with_n() {
        // truncating one Doppler tap leaves an O(1/N) residue
        let e16 = rect_vs_waveform_rel_err(16, 16, IdiWindow::Limited(7), 55);
        let e64 = rect_vs_waveform_rel_err(64, 16, IdiWindow::Limited(31), 55);
        assert!(e64 < e16, "error should shrink with N: {e16} -> {e64}");
        assert!(e64 < 3e-2, "residual too large: {e64}");
    }

    #[test]
    fn rect_builder_integer_doppler_exact_vs_waveform() {
        // integer Doppler still spreads the ISI rows (the β(q)−1 terms are
        // −1 for q ≠ 0), so exactness needs the full window
        let p = params(16, 16);
        let taps = vec![
            TapPath {
                delay_tap: 0,
                doppler_tap: 2,
                frac_doppler: 0.0,
                gain: c(0.7, 0.1),
            },
            TapPath {
                delay_tap: 5,
                doppler_tap: -3,
                frac_doppler: 0.0,
                gain: c(-0.2, 0.6),
            },
        ];
        let h = build_rect(&taps, &[IdiWindow::Full; 2], &p).unwrap();
        let x = random_grid(&p, 77);
        let via_h = h.mul_vec(&x);
        let grid = DelayDopplerGrid::from_flat(&p, x);
        let via_wave = waveform_oracle(&grid, &taps, &p);
        for (a, b) in via_h.iter().zip(via_wave.as_flat()) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn dense_oracle_guards_size() {
        let p = params(128, 64);
        let taps = random_taps(1, &p, 1);
        assert_eq!(
            dense_ideal_oracle(&taps, &p).unwrap_err(),
            EffectiveChannelError::DenseTooLarge(8192)
        );
    }

    #[test]
    fn ofdm_lti_channel_is_diagonal_frequency_response() {
        let p = params(4, 16);
        let taps = vec![
            TapPath {
                delay_tap: 0,
                doppler_tap: 0,
                frac_doppler: 0.0,
                gain: c(1.0, 0.0),
            },
            TapPath {
                delay_tap: 3,
                doppler_tap: 0,
                frac_doppler: 0.0,
                gain: c(0.4, -0.2),
            },
        ];
        let h = build_ofdm(&taps, 4, 4, &p).unwrap();
        assert_eq!(h.dim(), 16);
        let dense = h.to_dense();
        for row in 0..16 {
            for col in 0..16 {
                let v = dense[row * 16 + col];
                if row == col {
                    // Σ_i h_i e^{−j2π·row·l_i/M}
                    let expect: Complex64 = taps
                        .iter()
                        .map(|t| {
                            t.gain
                                * Complex64::from_polar(
                                    1.0,
                                    -TAU * row as f64 * t.delay_tap as f64 / 16.0,
                                )
                        })
                        .sum();
                    assert!((v - expect).norm() < 1e-12, "row {row}: {v} vs {expect}");
                } else {
                    assert!(v.norm() < 1e-12, "off-diagonal leak at ({row},{col})");
                }
            }
        }
    }

    #[test]
    fn ofdm_rows_keep_diagonal_plus_bounded_off_diagonals() {
        let p = params(4, 32);
        let mut taps = random_taps(3, &p, 91);
        for t in &mut taps {
            t.frac_doppler = 0.31; // force Doppler so rows are dense pre-sparsify
        }
        let b_off = 3;
        let h = build_ofdm(&taps, 4, b_off, &p).unwrap();
        for d in 0..h.dim() {
            let row = h.row(d);
            assert!(row.len() <= 1 + 2 * b_off);
            assert!(row.iter().any(|&(cc, _)| cc == d), "diagonal kept in row {d}");
        }
    }

    #[test]
    fn ofdm_rejects_short_cyclic_prefix() {
        let p = params(4, 16);
        let taps = vec![TapPath {
            delay_tap: 6,
            doppler_tap: 0,
            frac_doppler: 0.0,
            gain: c(1.0, 0.0),
        }];
        assert_eq!(
            build_ofdm(&taps, 5, 4, &p).unwrap_err(),
            EffectiveChannelError::CpTooShort { cp: 5, l_max: 6 }
        );
    }
}

