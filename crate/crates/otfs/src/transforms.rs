//! Discrete ISFFT/SFFT and the sampled Heisenberg/Wigner transforms for
//! rectangular pulses, plus cross-ambiguity diagnostics.
//!
//! All four transforms are unitary with the normalizations chosen here, so
//! the noiseless loopback `sfft(wigner(heisenberg(isfft(x))))` is exactly
//! the identity. Samples are taken at `t = u / (M Δf)`, M per time slot,
//! no cyclic prefix.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

use crate::channel::TapPath;
use crate::frame::FrameParams;

/// N x M complex grid in the delay-Doppler domain, indexed `[k][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDopplerGrid {
    n: usize,
    m: usize,
    data: Vec<Complex64>,
}

/// N x M complex grid in the time-frequency domain, indexed `[n][m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFreqGrid {
    n: usize,
    m: usize,
    data: Vec<Complex64>,
}

macro_rules! grid_impl {
    ($t:ty) => {
        impl $t {
            pub fn zeros(params: &FrameParams) -> Self {
                Self {
                    n: params.n_doppler(),
                    m: params.m_delay(),
                    data: vec![Complex64::new(0.0, 0.0); params.grid_size()],
                }
            }

            /// Builds a grid from a flat Doppler-major vector (`c = k·M + l`).
            pub fn from_flat(params: &FrameParams, data: Vec<Complex64>) -> Self {
                assert_eq!(data.len(), params.grid_size(), "grid size mismatch");
                Self {
                    n: params.n_doppler(),
                    m: params.m_delay(),
                    data,
                }
            }

            pub fn rows(&self) -> usize {
                self.n
            }

            pub fn cols(&self) -> usize {
                self.m
            }

            pub fn at(&self, row: usize, col: usize) -> Complex64 {
                self.data[row * self.m + col]
            }

            pub fn at_mut(&mut self, row: usize, col: usize) -> &mut Complex64 {
                &mut self.data[row * self.m + col]
            }

            pub fn as_flat(&self) -> &[Complex64] {
                &self.data
            }

            pub fn into_flat(self) -> Vec<Complex64> {
                self.data
            }

            pub fn energy(&self) -> f64 {
                self.data.iter().map(|z| z.norm_sqr()).sum()
            }
        }
    };
}

grid_impl!(DelayDopplerGrid);
grid_impl!(TimeFreqGrid);

/// Length-NM baseband sample stream at interval 1/(MΔf); index `u = n·M + p`.
pub type SampleStream = Vec<Complex64>;

fn fft_columns(data: &mut [Complex64], n: usize, m: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for l in 0..m {
        for k in 0..n {
            col[k] = data[k * m + l];
        }
        fft.process(&mut col);
        for k in 0..n {
            data[k * m + l] = col[k];
        }
    }
}

fn fft_rows(data: &mut [Complex64], n: usize, m: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(m)
    } else {
        planner.plan_fft_forward(m)
    };
    for row in 0..n {
        fft.process(&mut data[row * m..(row + 1) * m]);
    }
}

/// Inverse symplectic finite Fourier transform:
/// `X[n,m] = (1/√(NM)) Σ_k Σ_l x[k,l] e^{j2π(nk/N − ml/M)}`.
pub fn isfft(x: &DelayDopplerGrid) -> TimeFreqGrid {
    let (n, m) = (x.rows(), x.cols());
    let mut data = x.data.clone();
    fft_columns(&mut data, n, m, true);
    fft_rows(&mut data, n, m, false);
    let scale = 1.0 / ((n * m) as f64).sqrt();
    for z in &mut data {
        *z *= scale;
    }
    TimeFreqGrid { n, m, data }
}

/// Symplectic finite Fourier transform, the inverse of [`isfft`]:
/// `y[k,l] = (1/√(NM)) Σ_n Σ_m Y[n,m] e^{−j2π(nk/N − ml/M)}`.
pub fn sfft(y: &TimeFreqGrid) -> DelayDopplerGrid {
    let (n, m) = (y.rows(), y.cols());
    let mut data = y.data.clone();
    fft_columns(&mut data, n, m, false);
    fft_rows(&mut data, n, m, true);
    let scale = 1.0 / ((n * m) as f64).sqrt();
    for z in &mut data {
        *z *= scale;
    }
    DelayDopplerGrid { n, m, data }
}

/// Sampled Heisenberg transform with a rectangular transmit pulse:
/// `s[n·M + p] = (1/√M) Σ_m X[n,m] e^{j2πmp/M}` (per-block unitary IDFT).
pub fn heisenberg_rect(x: &TimeFreqGrid) -> SampleStream {
    let (n, m) = (x.rows(), x.cols());
    let mut data = x.data.clone();
    fft_rows(&mut data, n, m, true);
    let scale = 1.0 / (m as f64).sqrt();
    for z in &mut data {
        *z *= scale;
    }
    data
}

/// Sampled Wigner transform (matched filter) for a rectangular receive
/// pulse: `Y[n,m] = (1/√M) Σ_p r[n·M + p] e^{−j2πmp/M}`.
pub fn wigner_rect(r: &SampleStream, params: &FrameParams) -> TimeFreqGrid {
    let (n, m) = (params.n_doppler(), params.m_delay());
    assert_eq!(r.len(), n * m, "sample stream length mismatch");
    let mut data = r.clone();
    fft_rows(&mut data, n, m, false);
    let scale = 1.0 / (m as f64).sqrt();
    for z in &mut data {
        *z *= scale;
    }
    TimeFreqGrid { n, m, data }
}

/// Which part of the rectangular-pulse cross-ambiguity to evaluate: the
/// same-slot (ICI) or previous-slot (ISI) contribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmbiguityKind {
    Ici,
    Isi,
}

/// Sampled cross-ambiguity of the rectangular pulse pair for one channel
/// path at subcarrier offset `delta_m = m − m'`.
///
/// The ICI sum runs over `p = 0 .. M−1−l_τ`, the ISI sum over
/// `p = M−l_τ .. M−1`; together they partition the M sample positions.
pub fn ambiguity_rect(
    kind: AmbiguityKind,
    delta_m: i64,
    path: &TapPath,
    params: &FrameParams,
) -> Complex64 {
    let n = params.n_doppler() as f64;
    let m = params.m_delay();
    let l_tau = path.delay_tap;
    // (m − m') − ν_i/Δf with ν_i = (k_ν + κ)/(NT)
    let offset = delta_m as f64 - path.doppler_taps() / n;
    let (lo, hi, shift) = match kind {
        AmbiguityKind::Ici => (0, m - l_tau, l_tau as f64),
        AmbiguityKind::Isi => (m - l_tau, m, l_tau as f64 - m as f64),
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for p in lo..hi {
        let phase = -TAU * offset * (p as f64 + shift) / m as f64;
        acc += Complex64::from_polar(1.0, phase);
    }
    acc / m as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(n: usize, m: usize) -> FrameParams {
        FrameParams::new(n, m, 15e3, 4e9).unwrap()
    }

    fn random_grid(p: &FrameParams, rng: &mut ChaCha8Rng) -> DelayDopplerGrid {
        let data = (0..p.grid_size())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        DelayDopplerGrid::from_flat(p, data)
    }

    /// O((NM)²) double-sum evaluation of the ISFFT.
    fn isfft_direct(x: &DelayDopplerGrid) -> TimeFreqGrid {
        let (n, m) = (x.rows(), x.cols());
        let mut out = vec![Complex64::new(0.0, 0.0); n * m];
        let scale = 1.0 / ((n * m) as f64).sqrt();
        for nn in 0..n {
            for mm in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    for l in 0..m {
                        let ph = TAU
                            * (nn as f64 * k as f64 / n as f64 - mm as f64 * l as f64 / m as f64);
                        acc += x.at(k, l) * Complex64::from_polar(1.0, ph);
                    }
                }
                out[nn * m + mm] = acc * scale;
            }
        }
        TimeFreqGrid { n, m, data: out }
    }

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn isfft_impulse_is_flat() {
        let p = params(2, 2);
        let mut x = DelayDopplerGrid::zeros(&p);
        *x.at_mut(0, 0) = Complex64::new(1.0, 0.0);
        let big_x = isfft(&x);
        for z in big_x.as_flat() {
            assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn isfft_single_doppler_tone() {
        let p = params(2, 2);
        let mut x = DelayDopplerGrid::zeros(&p);
        *x.at_mut(1, 0) = Complex64::new(1.0, 0.0);
        let big_x = isfft(&x);
        for n in 0..2 {
            for m in 0..2 {
                let expect = 0.5 * if n == 0 { 1.0 } else { -1.0 };
                assert!((big_x.at(n, m) - Complex64::new(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn isfft_matches_direct_sum() {
        let p = params(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_grid(&p, &mut rng);
        let fast = isfft(&x);
        let slow = isfft_direct(&x);
        assert!(max_err(fast.as_flat(), slow.as_flat()) < 1e-12);
    }

    #[test]
    fn sfft_inverts_isfft() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (n, m) in [(2, 2), (4, 8), (16, 3)] {
            let p = params(n, m);
            let x = random_grid(&p, &mut rng);
            let back = sfft(&isfft(&x));
            assert!(max_err(back.as_flat(), x.as_flat()) < 1e-12);
        }
    }

    #[test]
    fn sfft_flat_gives_impulse() {
        let p = params(2, 2);
        let y = TimeFreqGrid::from_flat(&p, vec![Complex64::new(0.5, 0.0); 4]);
        let x = sfft(&y);
        assert!((x.at(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        for c in 1..4 {
            assert!(x.as_flat()[c].norm() < 1e-14);
        }
    }

    #[test]
    fn heisenberg_dc_subcarrier() {
        let p = params(3, 4);
        let mut x = TimeFreqGrid::zeros(&p);
        for n in 0..3 {
            *x.at_mut(n, 0) = Complex64::new(1.0, 0.0);
        }
        let s = heisenberg_rect(&x);
        for z in &s {
            assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn heisenberg_parseval_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = params(4, 8);
        let x = random_grid(&p, &mut rng);
        let tf = isfft(&x);
        let s = heisenberg_rect(&tf);
        let energy: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        assert!((energy - tf.energy()).abs() < 1e-12);
        let back = wigner_rect(&s, &p);
        assert!(max_err(back.as_flat(), tf.as_flat()) < 1e-12);
    }

    #[test]
    fn wigner_of_zeros_is_zero() {
        let p = params(2, 4);
        let y = wigner_rect(&vec![Complex64::new(0.0, 0.0); 8], &p);
        assert!(y.energy() == 0.0);
    }

    #[test]
    fn full_loopback_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = params(8, 16);
        let x = random_grid(&p, &mut rng);
        let back = sfft(&wigner_rect(&heisenberg_rect(&isfft(&x)), &p));
        assert!(max_err(back.as_flat(), x.as_flat()) < 1e-12);
    }

    fn tap(l_tau: usize, k_nu: i64, kappa: f64) -> TapPath {
        TapPath {
            delay_tap: l_tau,
            doppler_tap: k_nu,
            frac_doppler: kappa,
            gain: Complex64::new(1.0, 0.0),
        }
    }

    #[test]
    fn ambiguity_trivial_cases() {
        let p = params(8, 16);
        let a = ambiguity_rect(AmbiguityKind::Ici, 0, &tap(0, 0, 0.0), &p);
        assert!((a - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        // no delay => empty ISI sum
        let a = ambiguity_rect(AmbiguityKind::Isi, 3, &tap(0, 1, 0.2), &p);
        assert_eq!(a, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn ici_magnitude_decays_with_subcarrier_offset() {
        let p = params(16, 32);
        let path = tap(2, 1, 0.3);
        let mags: Vec<f64> = (0..5)
            .map(|dm| ambiguity_rect(AmbiguityKind::Ici, dm, &path, &p).norm())
            .collect();
        for w in mags.windows(2) {
            assert!(w[1] < w[0], "expected decay: {mags:?}");
        }
    }

    #[test]
    fn ici_isi_ranges_partition_samples() {
        // Σ_p over the ICI range plus Σ_p over the ISI range (without the
        // T-shift in the exponent) equals the full-period geometric sum.
        let p = params(8, 16);
        let path = tap(5, 1, 0.4);
        let m = p.m_delay();
        let offset = 2.0 - path.doppler_taps() / p.n_doppler() as f64;
        let full: Complex64 = (0..m)
            .map(|pp| Complex64::from_polar(1.0, -TAU * offset * (pp + path.delay_tap) as f64 / m as f64))
            .sum();
        let ici: Complex64 = (0..m - path.delay_tap)
            .map(|pp| Complex64::from_polar(1.0, -TAU * offset * (pp + path.delay_tap) as f64 / m as f64))
            .sum();
        let isi: Complex64 = (m - path.delay_tap..m)
            .map(|pp| Complex64::from_polar(1.0, -TAU * offset * (pp + path.delay_tap) as f64 / m as f64))
            .sum();
        assert!((ici + isi - full).norm() < 1e-12);
    }

    #[test]
    fn ambiguity_zero_delay_matches_geometric_form() {
        // l_τ = 0, Δm = 0: A_ici = (1/M) Σ_p e^{j2πν p/(MΔf)}
        let p = params(8, 16);
        let path = tap(0, 0, 0.37);
        let a = ambiguity_rect(AmbiguityKind::Ici, 0, &path, &p);
        let m = p.m_delay() as f64;
        let theta = TAU * path.doppler_taps() / (p.n_doppler() as f64 * m);
        let direct: Complex64 = (0..p.m_delay())
            .map(|pp| Complex64::from_polar(1.0, theta * pp as f64))
            .sum::<Complex64>()
            / m;
        assert!((a - direct).norm() < 1e-13);
    }
}
