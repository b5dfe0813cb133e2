//! Gaussian message-passing detector on the sparse effective channel's
//! factor graph, plus an exhaustive MAP oracle for small systems.

use num_complex::Complex64;
use thiserror::Error;

use crate::effective_channel::SparseEffectiveChannel;
use crate::frame::Alphabet;

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("received vector has {got} entries, channel dimension is {dim}")]
    DimensionMismatch { got: usize, dim: usize },
    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error("invalid detector config: {0}")]
    BadConfig(&'static str),
    #[error("MAP enumeration of {q}^{dim} hypotheses exceeds the 2^20 guard")]
    MapTooLarge { q: usize, dim: usize },
}

/// Tuning knobs of the message-passing detector.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Damping factor Δ ∈ (0, 1]: convex weight of the fresh pmf message.
    pub damping: f64,
    /// Iteration cap.
    pub max_iters: usize,
    /// Convergence threshold: a variable counts as converged when its
    /// posterior puts mass ≥ 1 − gamma on one symbol.
    pub gamma: f64,
    /// Stopping slack: stop when the indicator drops more than epsilon
    /// below its best value.
    pub epsilon: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            damping: 0.7,
            max_iters: 30,
            gamma: 0.1,
            epsilon: 0.2,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(DetectorError::BadConfig("damping must be in (0, 1]"));
        }
        if self.max_iters < 1 {
            return Err(DetectorError::BadConfig("max_iters must be ≥ 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(DetectorError::BadConfig("gamma must be in (0, 1)"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(DetectorError::BadConfig("epsilon must be ≥ 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Every variable's posterior concentrated (indicator reached 1).
    Converged,
    /// The indicator fell more than epsilon below its best value.
    Degraded,
    /// Iteration cap reached.
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct DetectorResult {
    /// Decided alphabet indices, one per variable.
    pub decisions: Vec<usize>,
    /// Iterations actually run.
    pub iterations: usize,
    /// Convergence indicator after each iteration.
    pub eta_trace: Vec<f64>,
    pub stop: StopReason,
}

impl DetectorResult {
    /// Decided constellation points.
    pub fn symbols(&self, alphabet: &Alphabet) -> Vec<Complex64> {
        self.decisions.iter().map(|&j| alphabet.point(j)).collect()
    }
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// Joint interference-cancellation and detection by Gaussian message
/// passing: observation nodes send interference means/variances, variable
/// nodes send damped symbol pmfs, and decisions track the best value of
/// the convergence indicator.
pub fn mp_detect(
    y: &[Complex64],
    h: &SparseEffectiveChannel,
    alphabet: &Alphabet,
    noise_var: f64,
    cfg: &DetectorConfig,
) -> Result<DetectorResult, DetectorError> {
    cfg.validate()?;
    let dim = h.dim();
    if y.len() != dim {
        return Err(DetectorError::DimensionMismatch {
            got: y.len(),
            dim,
        });
    }
    if !(noise_var > 0.0) {
        return Err(DetectorError::NonPositiveNoise(noise_var));
    }
    let q = alphabet.size();
    let points = alphabet.points();
    let abs2: Vec<f64> = points.iter().map(|a| a.norm_sqr()).collect();

    // Fast path for 4-point constant-modulus alphabets (QPSK): up to a
    // symbol-independent shift that cancels in every softmax, the per-edge
    // log-likelihoods are ±a ± b, so messages need two exponentials per
    // edge instead of four and column totals reduce to two running sums.
    struct QpskSigns {
        scale: f64,
        sr: [f64; 4],
        si: [f64; 4],
    }
    let qpsk = if q == 4 {
        let s = points[0].re.abs();
        let const_mod = points
            .iter()
            .all(|p| (p.re.abs() - s).abs() < 1e-12 && (p.im.abs() - s).abs() < 1e-12);
        let mut combos: Vec<(bool, bool)> = points
            .iter()
            .map(|p| (p.re >= 0.0, p.im >= 0.0))
            .collect();
        combos.sort();
        combos.dedup();
        if const_mod && s > 0.0 && combos.len() == 4 {
            let mut sr = [0.0; 4];
            let mut si = [0.0; 4];
            for j in 0..4 {
                sr[j] = points[j].re.signum();
                si[j] = points[j].im.signum();
            }
            Some(QpskSigns { scale: s, sr, si })
        } else {
            None
        }
    } else {
        None
    };

    // flat edge arrays, ordered row-major; col_edges indexes them per column
    let mut edge_row = Vec::new();
    let mut edge_h = Vec::new();
    let mut col_edges = vec![Vec::new(); dim];
    for d in 0..dim {
        for &(c, v) in h.row(d) {
            col_edges[c].push(edge_row.len());
            edge_row.push(d);
            edge_h.push(v);
        }
    }
    let n_edges = edge_h.len();

    // pmf messages variable → observation, initialized uniform
    let mut pmf = vec![1.0 / q as f64; n_edges * q];
    // interference messages observation → variable (same edge)
    let mut mu = vec![Complex64::new(0.0, 0.0); n_edges];
    let mut var = vec![noise_var; n_edges];
    // per-edge log-likelihood table for the current iteration (generic
    // path) or its ±a ± b coefficients (QPSK path)
    let mut loglik = vec![0.0f64; if qpsk.is_some() { 0 } else { n_edges * q }];
    let mut ab = vec![(0.0f64, 0.0f64); if qpsk.is_some() { n_edges } else { 0 }];

    let mut decisions = vec![0usize; dim];
    let mut eta_trace = Vec::new();
    let mut eta_best = -1.0f64;
    let mut eta_prev = -1.0f64;
    let mut iterations = 0;
    let mut stop = StopReason::MaxIters;

    let mut posterior = vec![0.0f64; q];
    let mut posteriors_argmax = vec![0usize; dim];
    let mut row_start = vec![0usize; dim + 1];
    for e in 0..n_edges {
        row_start[edge_row[e] + 1] = e + 1;
    }
    for d in 0..dim {
        row_start[d + 1] = row_start[d + 1].max(row_start[d]);
    }

    for iter in 1..=cfg.max_iters {
        iterations = iter;

        // observation pass: leave-one-out interference mean and variance
        for d in 0..dim {
            let edges = row_start[d]..row_start[d + 1];
            let mut tot_mean = Complex64::new(0.0, 0.0);
            let mut tot_var = 0.0f64;
            for e in edges.clone() {
                let p = &pmf[e * q..(e + 1) * q];
                let mut m = Complex64::new(0.0, 0.0);
                let mut m2 = 0.0f64;
                for j in 0..q {
                    m += p[j] * points[j];
                    m2 += p[j] * abs2[j];
                }
                let hv = edge_h[e];
                tot_mean += hv * m;
                tot_var += hv.norm_sqr() * (m2 - m.norm_sqr());
                // stash this edge's own contribution for the subtraction
                mu[e] = hv * m;
                var[e] = hv.norm_sqr() * (m2 - m.norm_sqr());
            }
            for e in edges {
                mu[e] = tot_mean - mu[e];
                // interference variance is a sum of non-negative terms plus
                // noise; clamp against cancellation in the subtraction
                var[e] = (noise_var + tot_var - var[e]).max(noise_var);
            }
        }

        let mut converged = 0usize;
        if let Some(qp) = &qpsk {
            // per-edge coefficients: loglik_j ≡ sr_j·a + si_j·b up to a
            // symbol-independent shift that cancels in every softmax
            for e in 0..n_edges {
                let centered = y[edge_row[e]] - mu[e];
                let cross = centered * edge_h[e].conj();
                let g = 2.0 * qp.scale / var[e];
                ab[e] = (g * cross.re, g * cross.im);
            }

            // variable pass: leave-one-out sums; softmax over ±α ± β needs
            // only exp(−2|α|) and exp(−2|β|), both in (0, 1]
            for c in 0..dim {
                let (mut at, mut bt) = (0.0f64, 0.0f64);
                for &e in &col_edges[c] {
                    at += ab[e].0;
                    bt += ab[e].1;
                }
                for &e in &col_edges[c] {
                    let alpha = at - ab[e].0;
                    let beta = bt - ab[e].1;
                    let ga = (-2.0 * alpha.abs()).exp();
                    let gb = (-2.0 * beta.abs()).exp();
                    let mut sum = 0.0f64;
                    for j in 0..4 {
                        let va = if qp.sr[j] * alpha >= 0.0 { 1.0 } else { ga };
                        let vb = if qp.si[j] * beta >= 0.0 { 1.0 } else { gb };
                        posterior[j] = va * vb;
                        sum += posterior[j];
                    }
                    for j in 0..4 {
                        let fresh = posterior[j] / sum;
                        let slot = &mut pmf[e * 4 + j];
                        *slot = cfg.damping * fresh + (1.0 - cfg.damping) * *slot;
                    }
                }
                let ga = (-2.0 * at.abs()).exp();
                let gb = (-2.0 * bt.abs()).exp();
                if 1.0 / ((1.0 + ga) * (1.0 + gb)) >= 1.0 - cfg.gamma {
                    converged += 1;
                }
                for j in 0..4 {
                    posterior[j] = qp.sr[j] * at + qp.si[j] * bt;
                }
                posteriors_argmax[c] = argmax_lowest(&posterior);
            }
        } else {
            // per-edge Gaussian log likelihoods of each symbol hypothesis,
            // with |z - h a|² expanded so the inner loop is real arithmetic
            for e in 0..n_edges {
                let centered = y[edge_row[e]] - mu[e];
                let hv = edge_h[e];
                let inv_var = 1.0 / var[e];
                let cross = centered * hv.conj();
                let c0 = centered.norm_sqr();
                let h2 = hv.norm_sqr();
                let lk = &mut loglik[e * q..(e + 1) * q];
                for j in 0..q {
                    let a = points[j];
                    let dot = cross.re * a.re + cross.im * a.im;
                    lk[j] = -(c0 - 2.0 * dot + h2 * abs2[j]) * inv_var;
                }
            }

            // variable pass: leave-one-out products (log-domain sums), then
            // damped pmf update; the full product gives the posterior and η
            let mut total = vec![0.0f64; q];
            for c in 0..dim {
                total.fill(0.0);
                for &e in &col_edges[c] {
                    for j in 0..q {
                        total[j] += loglik[e * q + j];
                    }
                }
                for &e in &col_edges[c] {
                    let mut mx = f64::NEG_INFINITY;
                    for j in 0..q {
                        let l = total[j] - loglik[e * q + j];
                        posterior[j] = l;
                        mx = mx.max(l);
                    }
                    let mut sum = 0.0f64;
                    for j in 0..q {
                        posterior[j] = (posterior[j] - mx).exp();
                        sum += posterior[j];
                    }
                    for j in 0..q {
                        let fresh = posterior[j] / sum;
                        let slot = &mut pmf[e * q + j];
                        *slot = cfg.damping * fresh + (1.0 - cfg.damping) * *slot;
                    }
                }
                let mx = total.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0f64;
                for j in 0..q {
                    posterior[j] = (total[j] - mx).exp();
                    sum += posterior[j];
                }
                let best = argmax_lowest(&posterior);
                if posterior[best] / sum >= 1.0 - cfg.gamma {
                    converged += 1;
                }
                posteriors_argmax[c] = best;
            }
        }
        let eta = converged as f64 / dim as f64;
        eta_trace.push(eta);

        if iter == 1 || eta > eta_prev {
            decisions.copy_from_slice(&posteriors_argmax);
        }
        eta_prev = eta;
        eta_best = eta_best.max(eta);

        if eta == 1.0 {
            stop = StopReason::Converged;
            break;
        }
        if eta < eta_best - cfg.epsilon {
            stop = StopReason::Degraded;
            break;
        }
    }

    Ok(DetectorResult {
        decisions,
        iterations,
        eta_trace,
        stop,
    })
}

/// Exact maximum-likelihood detection by exhaustive enumeration:
/// argmin ‖y − H x‖² over all alphabet vectors. Guarded to Q^dim ≤ 2^20;
/// ties resolve to the lexicographically lowest index vector.
pub fn map_oracle(
    y: &[Complex64],
    h_dense: &[Complex64],
    alphabet: &Alphabet,
    noise_var: f64,
) -> Result<Vec<usize>, DetectorError> {
    let dim = y.len();
    if h_dense.len() != dim * dim {
        return Err(DetectorError::DimensionMismatch {
            got: h_dense.len(),
            dim: dim * dim,
        });
    }
    if !(noise_var > 0.0) {
        return Err(DetectorError::NonPositiveNoise(noise_var));
    }
    let q = alphabet.size();
    let combos = (q as f64).powi(dim as i32);
    if combos > (1u64 << 20) as f64 {
        return Err(DetectorError::MapTooLarge { q, dim });
    }
    let points = alphabet.points();

    // odometer enumeration with incremental residual updates
    let mut digits = vec![0usize; dim];
    let mut residual: Vec<Complex64> = (0..dim)
        .map(|d| {
            y[d] - (0..dim)
                .map(|c| h_dense[d * dim + c] * points[0])
                .sum::<Complex64>()
        })
        .collect();
    let mut best_cost = residual.iter().map(|r| r.norm_sqr()).sum::<f64>();
    let mut best = digits.clone();

    'outer: loop {
        // advance the odometer (most-significant digit first so that the
        // enumeration is lexicographic and ties keep the lowest vector)
        let mut pos = dim;
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            if digits[pos] + 1 < q {
                let old = points[digits[pos]];
                digits[pos] += 1;
                let delta = points[digits[pos]] - old;
                for d in 0..dim {
                    residual[d] -= h_dense[d * dim + pos] * delta;
                }
                break;
            }
            let delta = points[0] - points[digits[pos]];
            digits[pos] = 0;
            for d in 0..dim {
                residual[d] -= h_dense[d * dim + pos] * delta;
            }
        }
        let cost = residual.iter().map(|r| r.norm_sqr()).sum::<f64>();
        if cost < best_cost {
            best_cost = cost;
            best = digits.clone();
        }
    }
    Ok(best)
}
