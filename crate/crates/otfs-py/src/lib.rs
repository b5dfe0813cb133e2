//! Python bindings for the `otfs` delay-Doppler simulation library.
//!
//! Exposes the frame/alphabet types, the modulation transforms, channel
//! generation, the sparse effective-channel builders, the message-passing
//! detector, and the Monte-Carlo campaign runner.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use otfs::harness::{run_campaign, CampaignConfig, CSV_HEADER};
use otfs::{
    add_awgn, apply_channel_time, build_ideal, build_ofdm, build_rect, generate_channel,
    heisenberg_rect, isfft, map_oracle, mp_detect, noise_variance, quantize_taps, sfft,
    wigner_rect, Alphabet, ChannelProfile, DelayDopplerGrid, DetectorConfig, FrameParams,
    IdiWindow, SparseEffectiveChannel, TapPath,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Doppler window argument: an integer half-width or the string "full".
fn parse_window(ob: &Bound<'_, PyAny>) -> PyResult<IdiWindow> {
    if let Ok(half) = ob.extract::<usize>() {
        return Ok(IdiWindow::Limited(half));
    }
    let s: String = ob.extract()?;
    s.parse::<IdiWindow>().map_err(value_err)
}

/// Delay-Doppler frame geometry.
#[pyclass(name = "FrameParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyFrameParams {
    inner: FrameParams,
}

#[pymethods]
impl PyFrameParams {
    #[new]
    #[pyo3(signature = (n, m, subcarrier_spacing=15e3, carrier_freq=4e9))]
    fn new(n: usize, m: usize, subcarrier_spacing: f64, carrier_freq: f64) -> PyResult<Self> {
        Ok(Self {
            inner: FrameParams::new(n, m, subcarrier_spacing, carrier_freq)
                .map_err(value_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n_doppler()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m_delay()
    }

    #[getter]
    fn subcarrier_spacing(&self) -> f64 {
        self.inner.subcarrier_spacing()
    }

    #[getter]
    fn carrier_freq(&self) -> f64 {
        self.inner.carrier_freq()
    }

    #[getter]
    fn grid_size(&self) -> usize {
        self.inner.grid_size()
    }

    #[getter]
    fn bandwidth(&self) -> f64 {
        self.inner.bandwidth()
    }

    #[getter]
    fn doppler_resolution(&self) -> f64 {
        self.inner.doppler_resolution()
    }

    fn __repr__(&self) -> String {
        format!(
            "FrameParams(n={}, m={}, subcarrier_spacing={}, carrier_freq={})",
            self.inner.n_doppler(),
            self.inner.m_delay(),
            self.inner.subcarrier_spacing(),
            self.inner.carrier_freq()
        )
    }
}

/// Unit-energy Gray-mapped modulation alphabet.
#[pyclass(name = "Alphabet", frozen, from_py_object)]
#[derive(Clone)]
struct PyAlphabet {
    inner: Alphabet,
}

#[pymethods]
impl PyAlphabet {
    /// Square QAM with q in {4, 16, 64}.
    #[staticmethod]
    fn square_qam(q: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Alphabet::square_qam(q).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn bpsk() -> Self {
        Self {
            inner: Alphabet::bpsk(),
        }
    }

    fn points(&self) -> Vec<Complex64> {
        self.inner.points().to_vec()
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn bits_per_symbol(&self) -> usize {
        self.inner.bits_per_symbol()
    }

    fn point(&self, index: usize) -> PyResult<Complex64> {
        if index >= self.inner.size() {
            return Err(PyValueError::new_err(format!(
                "index {index} out of range for alphabet of size {}",
                self.inner.size()
            )));
        }
        Ok(self.inner.point(index))
    }

    /// Index of the closest constellation point.
    fn nearest(&self, z: Complex64) -> usize {
        self.inner.nearest(z)
    }

    fn __len__(&self) -> usize {
        self.inner.size()
    }

    fn __repr__(&self) -> String {
        format!("Alphabet(size={})", self.inner.size())
    }
}

/// One quantized channel path: integer delay/Doppler taps, the fractional
/// Doppler remainder, and the complex gain.
#[pyclass(name = "TapPath", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyTapPath {
    inner: TapPath,
}

#[pymethods]
impl PyTapPath {
    #[new]
    fn new(delay_tap: usize, doppler_tap: i64, frac_doppler: f64, gain: Complex64) -> Self {
        Self {
            inner: TapPath {
                delay_tap,
                doppler_tap,
                frac_doppler,
                gain,
            },
        }
    }

    #[getter]
    fn delay_tap(&self) -> usize {
        self.inner.delay_tap
    }

    #[getter]
    fn doppler_tap(&self) -> i64 {
        self.inner.doppler_tap
    }

    #[getter]
    fn frac_doppler(&self) -> f64 {
        self.inner.frac_doppler
    }

    #[getter]
    fn gain(&self) -> Complex64 {
        self.inner.gain
    }

    /// Total Doppler in grid taps (integer part plus fraction).
    fn doppler_taps(&self) -> f64 {
        self.inner.doppler_taps()
    }

    fn __repr__(&self) -> String {
        format!(
            "TapPath(delay_tap={}, doppler_tap={}, frac_doppler={:.6}, gain={:+.6}{:+.6}j)",
            self.inner.delay_tap,
            self.inner.doppler_tap,
            self.inner.frac_doppler,
            self.inner.gain.re,
            self.inner.gain.im
        )
    }
}

/// Sparse NM x NM effective delay-Doppler channel.
#[pyclass(name = "EffectiveChannel", frozen)]
struct PyEffectiveChannel {
    inner: SparseEffectiveChannel,
}

#[pymethods]
impl PyEffectiveChannel {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn nonzeros(&self) -> usize {
        self.inner.nonzeros()
    }

    /// Sparse matrix-vector product `H @ x`.
    fn mul_vec(&self, x: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "expected a vector of length {}, got {}",
                self.inner.dim(),
                x.len()
            )));
        }
        Ok(self.inner.mul_vec(&x))
    }

    /// Row-major dense copy of the matrix (length dim*dim).
    fn to_dense(&self) -> Vec<Complex64> {
        self.inner.to_dense()
    }

    /// All structural entries as (row, col, value) triplets.
    fn triplets(&self) -> Vec<(usize, usize, Complex64)> {
        (0..self.inner.dim())
            .flat_map(|d| {
                self.inner
                    .row(d)
                    .iter()
                    .map(move |&(c, v)| (d, c, v))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "EffectiveChannel(dim={}, nonzeros={})",
            self.inner.dim(),
            self.inner.nonzeros()
        )
    }
}

/// ISFFT + rectangular-pulse synthesis: delay-Doppler grid (flat, row k
/// holding Doppler bin k) to NM time samples.
#[pyfunction]
fn modulate(x: Vec<Complex64>, params: &PyFrameParams) -> PyResult<Vec<Complex64>> {
    let p = &params.inner;
    if x.len() != p.grid_size() {
        return Err(PyValueError::new_err(format!(
            "expected {} grid values, got {}",
            p.grid_size(),
            x.len()
        )));
    }
    let grid = DelayDopplerGrid::from_flat(p, x);
    Ok(heisenberg_rect(&isfft(&grid)))
}

/// Matched-filter receiver: NM time samples back to the delay-Doppler grid.
#[pyfunction]
fn demodulate(r: Vec<Complex64>, params: &PyFrameParams) -> PyResult<Vec<Complex64>> {
    let p = &params.inner;
    if r.len() != p.grid_size() {
        return Err(PyValueError::new_err(format!(
            "expected {} samples, got {}",
            p.grid_size(),
            r.len()
        )));
    }
    Ok(sfft(&wigner_rect(&r, p)).into_flat())
}

/// Draw a random multipath channel and quantize it to grid taps.
///
/// `delays`/`powers_db` describe the power-delay profile; omit both for the
/// Extended Vehicular A profile. Doppler shifts follow the Jakes model at
/// the given speed. Deterministic in `seed`.
#[pyfunction]
#[pyo3(signature = (speed_kmph, params, seed, delays=None, powers_db=None))]
fn draw_channel(
    speed_kmph: f64,
    params: &PyFrameParams,
    seed: u64,
    delays: Option<Vec<f64>>,
    powers_db: Option<Vec<f64>>,
) -> PyResult<Vec<PyTapPath>> {
    let profile = match (delays, powers_db) {
        (None, None) => ChannelProfile::eva(),
        (Some(d), Some(p)) => ChannelProfile::new("custom", d, p),
        _ => {
            return Err(PyValueError::new_err(
                "provide both delays and powers_db, or neither",
            ))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths =
        generate_channel(&profile, speed_kmph, &params.inner, &mut rng).map_err(value_err)?;
    paths
        .iter()
        .map(|spec| {
            quantize_taps(spec, &params.inner)
                .map(|inner| PyTapPath { inner })
                .map_err(value_err)
        })
        .collect()
}

fn unwrap_taps(taps: &[PyTapPath]) -> Vec<TapPath> {
    taps.iter().map(|t| t.inner).collect()
}

/// Pass time samples through the multipath channel (zero-prefix model).
#[pyfunction]
fn apply_channel(
    samples: Vec<Complex64>,
    taps: Vec<PyTapPath>,
    params: &PyFrameParams,
) -> Vec<Complex64> {
    apply_channel_time(&samples, &unwrap_taps(&taps), &params.inner)
}

/// Add complex AWGN at the given SNR (dB, relative to unit signal power).
/// Deterministic in `seed`.
#[pyfunction]
fn add_noise(samples: Vec<Complex64>, snr_db: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    add_awgn(&samples, snr_db, &mut rng)
}

/// Effective channel for ideal bi-orthogonal pulses. `window` is an integer
/// Doppler half-width per path or "full".
#[pyfunction]
fn effective_channel_ideal(
    taps: Vec<PyTapPath>,
    window: &Bound<'_, PyAny>,
    params: &PyFrameParams,
) -> PyResult<PyEffectiveChannel> {
    let w = parse_window(window)?;
    let taps = unwrap_taps(&taps);
    let windows = vec![w; taps.len()];
    Ok(PyEffectiveChannel {
        inner: build_ideal(&taps, &windows, &params.inner).map_err(value_err)?,
    })
}

/// Effective channel for rectangular pulses, including the ICI/ISI phase
/// corrections.
#[pyfunction]
fn effective_channel_rect(
    taps: Vec<PyTapPath>,
    window: &Bound<'_, PyAny>,
    params: &PyFrameParams,
) -> PyResult<PyEffectiveChannel> {
    let w = parse_window(window)?;
    let taps = unwrap_taps(&taps);
    let windows = vec![w; taps.len()];
    Ok(PyEffectiveChannel {
        inner: build_rect(&taps, &windows, &params.inner).map_err(value_err)?,
    })
}

/// Per-symbol frequency-domain channel for the CP-OFDM baseline, sparsified
/// to the diagonal plus the `2*b_off` largest off-diagonals per row.
#[pyfunction]
#[pyo3(signature = (taps, cp_samples, params, b_off=8))]
fn effective_channel_ofdm(
    taps: Vec<PyTapPath>,
    cp_samples: usize,
    params: &PyFrameParams,
    b_off: usize,
) -> PyResult<PyEffectiveChannel> {
    Ok(PyEffectiveChannel {
        inner: build_ofdm(&unwrap_taps(&taps), cp_samples, b_off, &params.inner)
            .map_err(value_err)?,
    })
}

/// Gaussian message-passing detection of `y = H x + w`.
///
/// Returns a dict with `decisions` (alphabet indices), `iterations`,
/// `eta_trace`, and `stop` ("converged" | "degraded" | "max-iters").
#[pyfunction]
#[pyo3(signature = (y, h, alphabet, noise_var, damping=0.7, max_iters=30, gamma=0.1, epsilon=0.2))]
#[allow(clippy::too_many_arguments)]
fn detect<'py>(
    py: Python<'py>,
    y: Vec<Complex64>,
    h: &PyEffectiveChannel,
    alphabet: &PyAlphabet,
    noise_var: f64,
    damping: f64,
    max_iters: usize,
    gamma: f64,
    epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = DetectorConfig {
        damping,
        max_iters,
        gamma,
        epsilon,
    };
    let res = mp_detect(&y, &h.inner, &alphabet.inner, noise_var, &cfg).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("decisions", res.decisions)?;
    out.set_item("iterations", res.iterations)?;
    out.set_item("eta_trace", res.eta_trace)?;
    out.set_item("stop", format!("{:?}", res.stop).to_lowercase())?;
    Ok(out)
}

/// Brute-force exact MAP detection (tiny dimensions only).
#[pyfunction]
fn detect_map(
    y: Vec<Complex64>,
    h: &PyEffectiveChannel,
    alphabet: &PyAlphabet,
    noise_var: f64,
) -> PyResult<Vec<usize>> {
    map_oracle(&y, &h.inner.to_dense(), &alphabet.inner, noise_var).map_err(value_err)
}

/// Noise variance (per complex dimension total) for an SNR in dB.
#[pyfunction]
#[pyo3(name = "noise_variance")]
fn noise_variance_py(snr_db: f64) -> f64 {
    noise_variance(snr_db)
}

/// Closed-form Doppler-leakage kernel over `n` time slots.
#[pyfunction]
fn doppler_leakage(q: i64, kappa: f64, n: usize) -> Complex64 {
    otfs::beta(q, kappa, n)
}

/// Run a full Monte-Carlo BER campaign from a TOML config string; returns
/// the CSV text (header plus one row per SNR/speed grid point).
#[pyfunction]
fn run_campaign_toml(config: &str) -> PyResult<String> {
    let cfg: CampaignConfig = toml::from_str(config).map_err(value_err)?;
    let records = run_campaign(&cfg).map_err(value_err)?;
    let mut out = String::from(CSV_HEADER);
    for r in &records {
        out.push('\n');
        out.push_str(&r.csv_row());
    }
    Ok(out)
}

#[pymodule]
fn otfs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFrameParams>()?;
    m.add_class::<PyAlphabet>()?;
    m.add_class::<PyTapPath>()?;
    m.add_class::<PyEffectiveChannel>()?;
    m.add_function(wrap_pyfunction!(modulate, m)?)?;
    m.add_function(wrap_pyfunction!(demodulate, m)?)?;
    m.add_function(wrap_pyfunction!(draw_channel, m)?)?;
    m.add_function(wrap_pyfunction!(apply_channel, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(effective_channel_ideal, m)?)?;
    m.add_function(wrap_pyfunction!(effective_channel_rect, m)?)?;
    m.add_function(wrap_pyfunction!(effective_channel_ofdm, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(detect_map, m)?)?;
    m.add_function(wrap_pyfunction!(noise_variance_py, m)?)?;
    m.add_function(wrap_pyfunction!(doppler_leakage, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign_toml, m)?)?;
    Ok(())
}
