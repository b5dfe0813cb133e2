//! Property-based invariant checks over randomized inputs.

use num_complex::Complex64;
use otfs::{
    apply_channel_time, beta, build_ideal, build_rect, demap_symbols, isfft, map_bits, mp_detect,
    noise_variance, quantize_taps, sfft, Alphabet, DelayDopplerGrid, DetectorConfig, FrameParams,
    IdiWindow, PathSpec, TapPath,
};
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn params(n: usize, m: usize) -> FrameParams {
    FrameParams::new(n, m, 15e3, 4e9).unwrap()
}

prop_compose! {
    fn complex_unit()(re in -1.0f64..1.0, im in -1.0f64..1.0) -> Complex64 {
        Complex64::new(re, im)
    }
}

prop_compose! {
    fn grid_dims()(n in prop::sample::select(vec![2usize, 3, 4, 8, 16]),
                   m in prop::sample::select(vec![2usize, 3, 4, 8, 16])) -> (usize, usize) {
        (n, m)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// SFFT inverts ISFFT and both conserve energy.
    #[test]
    fn isfft_sfft_roundtrip_and_parseval((n, m) in grid_dims(), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = params(n, m);
        let x: Vec<Complex64> = (0..n * m)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let grid = DelayDopplerGrid::from_flat(&p, x.clone());
        let tf = isfft(&grid);
        prop_assert!((tf.energy() - grid.energy()).abs() < 1e-9 * grid.energy().max(1.0));
        let back = sfft(&tf).into_flat();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    /// The normalized Dirichlet magnitude |sin(Nθ)/(N sin θ)| stays under
    /// the linear-plus-constant envelope ((N−1)/N)|cos θ| + 1/N.
    #[test]
    fn doppler_leakage_magnitude_envelope(n in 1usize..64, t in 0.001f64..0.999) {
        let theta = t * PI; // avoid the removable singularities at 0, π
        let n_f = n as f64;
        let lhs = ((n_f * theta).sin() / (n_f * theta.sin())).abs();
        let rhs = (n_f - 1.0) / n_f * theta.cos().abs() + 1.0 / n_f;
        prop_assert!(lhs <= rhs + 1e-12, "n={n} theta={theta}: {lhs} > {rhs}");
    }

    /// beta matches its defining finite geometric sum.
    #[test]
    fn doppler_leakage_matches_direct_sum(n in 1usize..32, q in -32i64..32, kappa in -0.5f64..0.5) {
        let direct: Complex64 = (0..n)
            .map(|s| Complex64::from_polar(1.0, TAU / n as f64 * (-(q as f64) - kappa) * s as f64))
            .sum();
        let closed = beta(q, kappa, n);
        prop_assert!((closed - direct).norm() < 1e-9 * (n as f64));
    }

    /// With integer Doppler only, widening the window adds only exact zeros:
    /// the effective channel acts identically on every input.
    #[test]
    fn integer_doppler_channel_is_window_independent(seed in any::<u64>(), half in 1usize..4) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (8usize, 8usize);
        let p = params(n, m);
        let taps = vec![
            TapPath { delay_tap: rng.random_range(0..m), doppler_tap: rng.random_range(-3..4),
                      frac_doppler: 0.0, gain: Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) },
        ];
        let tight = build_ideal(&taps, &[IdiWindow::Limited(0)], &p).unwrap();
        let wide = build_ideal(&taps, &[IdiWindow::Limited(half)], &p).unwrap();
        let x: Vec<Complex64> = (0..n * m)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let (a, b) = (tight.mul_vec(&x), wide.mul_vec(&x));
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).norm() < 1e-12);
        }
    }

    /// At zero delay the rectangular-pulse channel differs from the ideal
    /// one entrywise by exactly the published extra phase
    /// e^{j2π(l/M)(k_ν+κ)/N} on the input grid column.
    #[test]
    fn zero_delay_rect_is_ideal_with_phase(seed in any::<u64>(), k_nu in -3i64..4, kappa in -0.49f64..0.49) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (8usize, 8usize);
        let p = params(n, m);
        let taps = vec![TapPath {
            delay_tap: 0,
            doppler_tap: k_nu,
            frac_doppler: kappa,
            gain: Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
        }];
        let windows = [IdiWindow::Full];
        let ideal = build_ideal(&taps, &windows, &p).unwrap().to_dense();
        let rect = build_rect(&taps, &windows, &p).unwrap().to_dense();
        let nu = (k_nu as f64 + kappa) / n as f64;
        for row in 0..n * m {
            for col in 0..n * m {
                let l = col % m;
                let phase = Complex64::from_polar(1.0, TAU * l as f64 / m as f64 * nu);
                let r = rect[row * n * m + col];
                let i = ideal[row * n * m + col];
                prop_assert!((r - i * phase).norm() < 1e-12 * (1.0 + i.norm()));
            }
        }
    }

    /// Exact-tap physical paths quantize losslessly (κ = 0).
    #[test]
    fn exact_grid_paths_quantize_losslessly(l in 0usize..16, k in -8i64..8) {
        let (n, m) = (16usize, 16usize);
        let p = params(n, m);
        let spec = PathSpec {
            delay: l as f64 / p.bandwidth(),
            doppler: k as f64 * p.doppler_resolution(),
            gain: Complex64::new(1.0, 0.0),
        };
        let tap = quantize_taps(&spec, &p).unwrap();
        prop_assert_eq!(tap.delay_tap, l);
        prop_assert_eq!(tap.doppler_tap, k);
        prop_assert!(tap.frac_doppler.abs() < 1e-9);
    }

    /// The time-domain channel is linear in its input.
    #[test]
    fn channel_application_is_linear(seed in any::<u64>(), scale in complex_unit()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = params(4, 8);
        let taps = vec![TapPath {
            delay_tap: rng.random_range(0..8),
            doppler_tap: rng.random_range(-2..3),
            frac_doppler: rng.random::<f64>() - 0.5,
            gain: Complex64::new(0.3, -0.7),
        }];
        let s: Vec<Complex64> = (0..32)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let scaled: Vec<Complex64> = s.iter().map(|v| v * scale).collect();
        let a = apply_channel_time(&scaled, &taps, &p);
        let b = apply_channel_time(&s, &taps, &p);
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v * scale).norm() < 1e-12);
        }
    }

    /// Bit mapping and hard demapping invert each other.
    #[test]
    fn bit_mapping_roundtrips(bits in prop::collection::vec(any::<bool>(), 0..96), q in prop::sample::select(vec![4usize, 16, 64])) {
        let alphabet = Alphabet::square_qam(q).unwrap();
        let bps = alphabet.bits_per_symbol();
        let bits = &bits[..bits.len() - bits.len() % bps];
        let symbols = map_bits(bits, &alphabet).unwrap();
        prop_assert_eq!(demap_symbols(&symbols, &alphabet), bits.to_vec());
    }

    /// Detector outputs stay within their contracts on random well-posed
    /// problems: in-alphabet decisions and a unit-interval eta trace.
    #[test]
    fn detector_outputs_respect_contracts(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (2usize, 4usize);
        let p = params(n, m);
        let taps = vec![TapPath {
            delay_tap: rng.random_range(0..m),
            doppler_tap: rng.random_range(-1..2),
            frac_doppler: rng.random::<f64>() - 0.5,
            gain: Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 2.0,
        }];
        let h = build_ideal(&taps, &[IdiWindow::Full], &p).unwrap();
        let alphabet = Alphabet::square_qam(4).unwrap();
        let x: Vec<Complex64> = (0..n * m)
            .map(|_| alphabet.point(rng.random_range(0..4)))
            .collect();
        let y = h.mul_vec(&x);
        let res = mp_detect(&y, &h, &alphabet, noise_variance(15.0), &DetectorConfig::default()).unwrap();
        prop_assert_eq!(res.decisions.len(), n * m);
        prop_assert!(res.decisions.iter().all(|&d| d < alphabet.size()));
        prop_assert!(!res.eta_trace.is_empty());
        prop_assert!(res.eta_trace.iter().all(|&e| (0.0..=1.0).contains(&e)));
        prop_assert_eq!(res.iterations, res.eta_trace.len());
    }
}
