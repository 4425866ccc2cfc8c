//! Discrete fractional Brownian motion.
//!
//! The production generator is the random-phase spectral method: unit-step
//! increments `W_0 … W_{N-1}` are synthesised from the truncated power
//! spectral density of fractional Gaussian noise,
//!
//! ```text
//! W_k = sqrt(2/N) Σ_{j=-N/2}^{N/2-1} sqrt(S_N(j/N)) cos(2πjk/N + φ_j)
//! ```
//!
//! with i.i.d. phases `φ_j ~ U(0, 2π)`, then accumulated and rescaled by
//! `(T/N)^H`. The sum is evaluated with one inverse FFT; the literal
//! double sum is kept as [`SpectralGenerator::increments_direct`] for
//! cross-checking.
//!
//! The spectral increments are exactly stationary with a circulant
//! autocovariance (`R_W(m)` for `|m| < N/2`, wrapped beyond), so they only
//! approximate fBm at long lags. Note also that every `j ≠ 0` term cancels in
//! `Σ_k W_k`, which makes the terminal value `B_T` a scaled cosine of the
//! single phase `φ_0`.
//!
//! [`ExactGenerator`] factorises the exact covariance matrix instead and is
//! used as an oracle for the spectral one.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Largest grid accepted by the dense exact generator.
pub const EXACT_MAX_STEPS: usize = 2048;

fn check_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("hurst must lie in (0, 1), got {hurst}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmSpec {
    pub hurst: f64,
    /// Number of increments `N`.
    pub n_steps: usize,
    pub horizon: f64,
    pub seed: u64,
}

impl FbmSpec {
    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst)?;
        if self.n_steps < 2 {
            return Err(Error::domain("n_steps must be at least 2"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::domain("horizon must be positive"));
        }
        Ok(())
    }

    /// Samples path `path_index` of this spec from its own stream.
    pub fn sample(&self, kind: GeneratorKind, path_index: u64) -> Result<GaussianPath> {
        self.validate()?;
        let generator = FbmGenerator::new(kind, self.hurst, self.n_steps, self.horizon)?;
        Ok(generator.sample(&mut rng::stream(self.seed, path_index, 0)))
    }
}

/// A sampled path on the grid `t_n = nT/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl GaussianPath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("path is never empty")
    }
}

/// Equidistant grid `t_n = n T / N`, `n = 0..=N`.
pub fn time_grid(horizon: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps)
        .map(|n| horizon * n as f64 / n_steps as f64)
        .collect()
}

/// `Cov(B_t, B_s) = ½(|t|^{2H} + |s|^{2H} − |t−s|^{2H})`.
pub fn fbm_covariance(t: f64, s: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    let h2 = 2.0 * hurst;
    Ok(0.5 * (t.abs().powf(h2) + s.abs().powf(h2) - (t - s).abs().powf(h2)))
}

fn autocov(lag: i64, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let m = lag as f64;
    0.5 * ((m + 1.0).abs().powf(h2) + (m - 1.0).abs().powf(h2) - 2.0 * m.abs().powf(h2))
}

/// Autocovariance `R_W(m)` of unit-step fBm increments.
pub fn increment_autocovariance(lag: i64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    Ok(autocov(lag, hurst))
}

/// Power spectral density truncated to lags `-n/2 ..= n/2 - 1`.
///
/// The result can dip slightly below zero; callers taking square roots must
/// clamp.
pub fn spectral_density_truncated(freq: f64, hurst: f64, n: usize) -> Result<f64> {
    check_hurst(hurst)?;
    if n == 0 || n % 2 != 0 {
        return Err(Error::domain(format!("n must be even and positive, got {n}")));
    }
    if freq.abs() > 0.5 {
        return Err(Error::domain(format!("|freq| must be at most 1/2, got {freq}")));
    }
    let half = (n / 2) as i64;
    Ok((-half..half)
        .map(|m| autocov(m, hurst) * (2.0 * PI * m as f64 * freq).cos())
        .sum())
}

/// Clamping report for the spectral amplitudes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiagnostics {
    /// Number of frequency bins whose density was negative and set to zero.
    pub clamped_bins: usize,
    /// Most negative density value before clamping (0 if nothing clamped).
    pub most_negative: f64,
}

/// Spectral increment generator for one `(H, N)` pair.
///
/// Amplitudes and the FFT plan are computed once and shared by all paths.
#[derive(Clone)]
pub struct SpectralGenerator {
    hurst: f64,
    n: usize,
    n_even: usize,
    /// `sqrt(max(S_N(j/N), 0))` indexed by `j + N/2`.
    amplitudes: Vec<f64>,
    diagnostics: SpectralDiagnostics,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGenerator")
            .field("hurst", &self.hurst)
            .field("n", &self.n)
            .field("diagnostics", &self.diagnostics)
            .finish()
    }
}

impl SpectralGenerator {
    /// Generator of `n` increments. Odd `n` synthesises `n + 1` and drops the
    /// last one.
    pub fn new(hurst: f64, n: usize) -> Result<Self> {
        check_hurst(hurst)?;
        if n == 0 {
            return Err(Error::domain("number of increments must be positive"));
        }
        let n_even = n + n % 2;
        let half = (n_even / 2) as i64;
        let mut diagnostics = SpectralDiagnostics::default();
        let amplitudes = (-half..half)
            .map(|j| {
                let s = spectral_density_truncated(j as f64 / n_even as f64, hurst, n_even)
                    .expect("frequency and length validated above");
                if s < 0.0 {
                    diagnostics.clamped_bins += 1;
                    diagnostics.most_negative = diagnostics.most_negative.min(s);
                    0.0
                } else {
                    s.sqrt()
                }
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_inverse(n_even);
        Ok(Self {
            hurst,
            n,
            n_even,
            amplitudes,
            diagnostics,
            fft,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Number of increments returned per draw.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of phases consumed per draw (the even synthesis length).
    pub fn n_phases(&self) -> usize {
        self.n_even
    }

    pub fn diagnostics(&self) -> SpectralDiagnostics {
        self.diagnostics
    }

    /// Draws phases for `j = -N/2, …, N/2 - 1` in that order.
    pub fn draw_phases<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.n_even)
            .map(|_| 2.0 * PI * rng.sample::<f64, _>(Open01))
            .collect()
    }

    pub fn increments<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let phases = self.draw_phases(rng);
        self.increments_from_phases(&phases)
    }

    /// FFT evaluation for given phases.
    pub fn increments_from_phases(&self, phases: &[f64]) -> Vec<f64> {
        assert_eq!(phases.len(), self.n_even, "one phase per frequency bin");
        let n = self.n_even;
        let half = n / 2;
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for (p, (&amp, &phi)) in self.amplitudes.iter().zip(phases).enumerate() {
            // p = j + N/2; bin index is j mod N
            let bin = (p + half) % n;
            buf[bin] = Complex::from_polar(amp, phi);
        }
        self.fft.process(&mut buf);
        let scale = (2.0 / n as f64).sqrt();
        buf.iter().take(self.n).map(|c| scale * c.re).collect()
    }

    /// Literal O(N²) evaluation of the trigonometric sum.
    pub fn increments_direct(&self, phases: &[f64]) -> Vec<f64> {
        assert_eq!(phases.len(), self.n_even, "one phase per frequency bin");
        let n = self.n_even as i64;
        let half = n / 2;
        let scale = (2.0 / n as f64).sqrt();
        (0..self.n as i64)
            .map(|k| {
                let sum: f64 = (-half..half)
                    .zip(self.amplitudes.iter().zip(phases))
                    .map(|(j, (&amp, &phi))| {
                        let angle = 2.0 * PI * (j * k).rem_euclid(n) as f64 / n as f64;
                        amp * (angle.cos() * phi.cos() - angle.sin() * phi.sin())
                    })
                    .sum();
                scale * sum
            })
            .collect()
    }

    /// Population covariance of increments `k` and `k + lag` under this
    /// generator: `(1/N) Σ_j S⁺(j/N) cos(2πj·lag/N)` with clamped densities.
    pub fn increment_covariance(&self, lag: i64) -> f64 {
        let n = self.n_even as i64;
        let half = n / 2;
        (-half..half)
            .zip(&self.amplitudes)
            .map(|(j, &a)| a * a * (2.0 * PI * (j * lag).rem_euclid(n) as f64 / n as f64).cos())
            .sum::<f64>()
            / n as f64
    }

    pub fn path<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> GaussianPath {
        let increments = self.increments(rng);
        assemble(&increments, horizon, self.hurst)
    }
}

/// Spectral increments for an even `n`; see [`SpectralGenerator`] for odd
/// lengths and repeated draws.
pub fn generate_increments_spectral<R: Rng + ?Sized>(
    hurst: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::domain(format!("n must be even and positive, got {n}")));
    }
    Ok(SpectralGenerator::new(hurst, n)?.increments(rng))
}

fn assemble(increments: &[f64], horizon: f64, hurst: f64) -> GaussianPath {
    let n = increments.len();
    let scale = (horizon / n as f64).powf(hurst);
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for w in increments {
        acc += w;
        values.push(scale * acc);
    }
    GaussianPath {
        times: time_grid(horizon, n),
        values,
    }
}

/// Accumulates unit-step increments and rescales them to `[0, horizon]`.
pub fn assemble_fbm_path(increments: &[f64], horizon: f64, hurst: f64) -> Result<GaussianPath> {
    if increments.is_empty() {
        return Err(Error::domain("increment sequence is empty"));
    }
    if !(horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    Ok(assemble(increments, horizon, hurst))
}

/// Cholesky-based generator with the exact fBm covariance on the grid.
#[derive(Debug, Clone)]
pub struct ExactGenerator {
    hurst: f64,
    horizon: f64,
    n: usize,
    /// Lower Cholesky factor, row-major packed: row `i` holds `i + 1` entries.
    factor: Vec<f64>,
}

impl ExactGenerator {
    pub fn new(hurst: f64, n_steps: usize, horizon: f64) -> Result<Self> {
        check_hurst(hurst)?;
        if n_steps == 0 || n_steps > EXACT_MAX_STEPS {
            return Err(Error::domain(format!(
                "exact generator needs 1 <= n_steps <= {EXACT_MAX_STEPS}, got {n_steps}"
            )));
        }
        if !(horizon > 0.0) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        let times = time_grid(horizon, n_steps);
        let n = n_steps;
        let row = |i: usize| i * (i + 1) / 2;
        let mut factor = vec![0.0; row(n)];
        for i in 0..n {
            for j in 0..=i {
                let cov = fbm_covariance(times[i + 1], times[j + 1], hurst)?;
                let dot: f64 = (0..j).map(|k| factor[row(i) + k] * factor[row(j) + k]).sum();
                let v = cov - dot;
                if i == j {
                    if !(v > 0.0) {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: v });
                    }
                    factor[row(i) + i] = v.sqrt();
                } else {
                    factor[row(i) + j] = v / factor[row(j) + j];
                }
            }
        }
        Ok(Self {
            hurst,
            horizon,
            n,
            factor,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn path<R: Rng + ?Sized>(&self, rng: &mut R) -> GaussianPath {
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        let mut values = Vec::with_capacity(self.n + 1);
        values.push(0.0);
        for i in 0..self.n {
            let start = i * (i + 1) / 2;
            let row = &self.factor[start..start + i + 1];
            values.push(row.iter().zip(&z).map(|(l, z)| l * z).sum());
        }
        GaussianPath {
            times: time_grid(self.horizon, self.n),
            values,
        }
    }
}

/// One-shot exact path; prefer [`ExactGenerator`] for repeated draws.
pub fn generate_fbm_exact<R: Rng + ?Sized>(
    hurst: f64,
    n_steps: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<GaussianPath> {
    Ok(ExactGenerator::new(hurst, n_steps, horizon)?.path(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    #[default]
    Spectral,
    Exact,
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Self::Spectral),
            "exact" => Ok(Self::Exact),
            other => Err(Error::config(
                "generator",
                format!("expected \"spectral\" or \"exact\", got \"{other}\""),
            )),
        }
    }
}

/// Path generator for a fixed `(H, N, T)`.
#[derive(Debug, Clone)]
pub enum FbmGenerator {
    Spectral {
        generator: SpectralGenerator,
        horizon: f64,
    },
    Exact(ExactGenerator),
}

impl FbmGenerator {
    pub fn new(kind: GeneratorKind, hurst: f64, n_steps: usize, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        match kind {
            GeneratorKind::Spectral => Ok(Self::Spectral {
                generator: SpectralGenerator::new(hurst, n_steps)?,
                horizon,
            }),
            GeneratorKind::Exact => Ok(Self::Exact(ExactGenerator::new(hurst, n_steps, horizon)?)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GaussianPath {
        match self {
            Self::Spectral { generator, horizon } => generator.path(*horizon, rng),
            Self::Exact(g) => g.path(rng),
        }
    }
}
