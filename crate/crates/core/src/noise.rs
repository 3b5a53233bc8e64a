//! Sum-of-sines 1/f frequency noise, its spectrum and Ramsey dephasing.
//!
//! `δ(t) = γ Σ_i f_i^{-1/2} sin(2π f_i t + φ_i)` in Hz; simulations use the
//! angular value `2π·10⁻⁹·δ` in rad/ns.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagate::TimeGrid;

/// splitmix64 step applied to `master + (index + 1)·φ64`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// How component frequencies are drawn from the band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencySampling {
    /// Uniform density; with `f^{-1/2}` amplitudes the PSD falls as `1/f`.
    Uniform,
    /// Uniform in `ln f`; with `f^{-1/2}` amplitudes the PSD falls as `1/f²`.
    LogUniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OneOverFConfig {
    pub gamma: f64,
    pub f_min_khz: f64,
    pub f_max_khz: f64,
    pub n_components: usize,
    pub seed: u64,
    pub sampling: FrequencySampling,
    /// Component amplitude law `γ·f^{-exponent}`; 0.5 gives 1/f, 0 is white.
    pub amplitude_exponent: f64,
}

impl Default for OneOverFConfig {
    fn default() -> Self {
        Self {
            gamma: 1e6,
            f_min_khz: 1.0,
            f_max_khz: 100.0,
            n_components: 200,
            seed: 0,
            sampling: FrequencySampling::Uniform,
            amplitude_exponent: 0.5,
        }
    }
}

impl OneOverFConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_min_khz > 0.0 && self.f_min_khz < self.f_max_khz) {
            return Err(Error::Domain(format!("band [{}, {}] kHz is invalid", self.f_min_khz, self.f_max_khz)));
        }
        if self.n_components == 0 {
            return Err(Error::Domain("n_components must be at least 1".into()));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Domain("gamma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// One drawn set of sine components.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRealization {
    pub freqs_hz: Vec<f64>,
    pub phases: Vec<f64>,
    /// Component amplitudes in Hz.
    pub amplitudes: Vec<f64>,
}

impl NoiseRealization {
    pub fn draw(cfg: &OneOverFConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (cfg.f_min_khz * 1e3, cfg.f_max_khz * 1e3);
        let mut freqs_hz = Vec::with_capacity(cfg.n_components);
        let mut phases = Vec::with_capacity(cfg.n_components);
        for _ in 0..cfg.n_components {
            let u: f64 = rng.gen();
            freqs_hz.push(match cfg.sampling {
                FrequencySampling::Uniform => lo + u * (hi - lo),
                FrequencySampling::LogUniform => lo * (hi / lo).powf(u),
            });
            phases.push(rng.gen_range(0.0..2.0 * PI));
        }
        let amplitudes = freqs_hz.iter().map(|f| cfg.gamma * f.powf(-cfg.amplitude_exponent)).collect();
        Self { freqs_hz, phases, amplitudes }
    }

    /// Explicit components, mostly for tests.
    pub fn from_components(freqs_hz: Vec<f64>, phases: Vec<f64>, amplitudes: Vec<f64>) -> Self {
        Self { freqs_hz, phases, amplitudes }
    }

    /// `δ(t)` in Hz at `t` ns.
    pub fn delta_hz(&self, t_ns: f64) -> f64 {
        let t = t_ns * 1e-9;
        self.freqs_hz
            .iter()
            .zip(&self.phases)
            .zip(&self.amplitudes)
            .map(|((f, p), a)| a * (2.0 * PI * f * t + p).sin())
            .sum()
    }

    /// `δ(t)` in rad/ns.
    pub fn delta(&self, t_ns: f64) -> f64 {
        2.0 * PI * 1e-9 * self.delta_hz(t_ns)
    }

    /// Accumulated phase `∫_0^t δ dt'` in rad, exact.
    pub fn phase(&self, t_ns: f64) -> f64 {
        let t = t_ns * 1e-9;
        self.freqs_hz
            .iter()
            .zip(&self.phases)
            .zip(&self.amplitudes)
            .map(|((f, p), a)| a / f * (p.cos() - (2.0 * PI * f * t + p).cos()))
            .sum()
    }

    /// Time-domain variance `Σ A²/2` in Hz².
    pub fn variance_hz2(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a / 2.0).sum()
    }
}

/// `δ(t_k)` in rad/ns on every grid node, using `cfg.seed`.
pub fn sample_trajectory(cfg: &OneOverFConfig, grid: &TimeGrid) -> Result<Vec<f64>> {
    cfg.validate()?;
    let r = NoiseRealization::draw(cfg, cfg.seed);
    Ok(grid.nodes().iter().map(|&t| r.delta(t)).collect())
}

/// Ensemble-averaged one-sided periodogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    /// Log-binned centre frequencies (kHz).
    pub freqs_khz: Vec<f64>,
    /// PSD in Hz²/Hz per bin.
    pub psd: Vec<f64>,
    /// Log-log slope over the fit band.
    pub slope: f64,
    pub fit_band_khz: (f64, f64),
    /// `∫ PSD df` over the raw periodogram (Hz²).
    pub integrated_power: f64,
    /// Mean time-domain variance of the realizations (Hz²).
    pub time_variance: f64,
    pub warning: Option<String>,
}

/// Periodogram estimate; the slope is fitted over `fit_band_khz`, or over the
/// band interior (a factor 2 inside each edge) when `None`.
pub fn psd_estimate(cfg: &OneOverFConfig, realizations: usize, fit_band_khz: Option<(f64, f64)>) -> Result<PsdEstimate> {
    cfg.validate()?;
    if realizations < 10 {
        return Err(Error::Domain(format!("need at least 10 realizations, got {realizations}")));
    }
    let (lo, hi) = (cfg.f_min_khz * 1e3, cfg.f_max_khz * 1e3);
    let warning = (hi / lo < 4.0).then(|| format!("band spans {:.2} octaves; slope fit is unreliable", (hi / lo).log2()));
    let fs = 4.0 * hi;
    let n = ((8.0 * fs / lo).ceil() as usize).next_power_of_two();
    let dt_ns = 1e9 / fs;
    let window: Vec<f64> = (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos()).collect();
    let wsum2: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);

    let spectra: Vec<(Vec<f64>, f64)> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let real = NoiseRealization::draw(cfg, derive_seed(cfg.seed, r));
            let mut buf: Vec<Complex<f64>> =
                (0..n).map(|k| Complex::new(real.delta_hz(k as f64 * dt_ns) * window[k], 0.0)).collect();
            fft.process(&mut buf);
            let scale = 2.0 / (fs * wsum2);
            let p = buf[..n / 2].iter().map(|z| z.norm_sqr() * scale).collect();
            (p, real.variance_hz2())
        })
        .collect();
    let mut mean = vec![0.0; n / 2];
    let mut time_variance = 0.0;
    for (p, v) in &spectra {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x / realizations as f64;
        }
        time_variance += v / realizations as f64;
    }
    let df = fs / n as f64;
    let integrated_power = mean.iter().sum::<f64>() * df;

    // log bins, 20 per decade, inside the band
    let per_decade = 20.0;
    let n_bins = ((hi / lo).log10() * per_decade).ceil() as usize;
    let mut freqs_khz = Vec::new();
    let mut psd = Vec::new();
    for b in 0..n_bins {
        let f0 = lo * 10f64.powf(b as f64 / per_decade);
        let f1 = (lo * 10f64.powf((b + 1) as f64 / per_decade)).min(hi);
        let idx: Vec<usize> = (1..n / 2).filter(|&k| (k as f64 * df) >= f0 && (k as f64 * df) < f1).collect();
        if idx.is_empty() {
            continue;
        }
        psd.push(idx.iter().map(|&k| mean[k]).sum::<f64>() / idx.len() as f64);
        freqs_khz.push((f0 * f1).sqrt() / 1e3);
    }
    let band = fit_band_khz.unwrap_or((2.0 * cfg.f_min_khz, cfg.f_max_khz / 2.0));
    let pts: Vec<(f64, f64)> = freqs_khz
        .iter()
        .zip(&psd)
        .filter(|(f, p)| **f >= band.0 && **f <= band.1 && **p > 0.0)
        .map(|(f, p)| (f.ln(), p.ln()))
        .collect();
    let slope = if pts.len() >= 2 { linear_fit(&pts).0 } else { f64::NAN };
    Ok(PsdEstimate { freqs_khz, psd, slope, fit_band_khz: band, integrated_power, time_variance, warning })
}

/// Least-squares `(slope, intercept)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fitted Gaussian decay `exp(−(t/T2)²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamseyFit {
    /// `f64::INFINITY` when no decay is visible.
    pub t2_us: f64,
    pub rms_residual: f64,
    /// `(delay ns, coherence)`.
    pub curve: Vec<(f64, f64)>,
}

/// Mean coherence `|⟨exp(iΦ(t))⟩|` over independent realizations.
pub fn ramsey_curve(cfg: &OneOverFConfig, delays_ns: &[f64], realizations: usize) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    if realizations == 0 {
        return Err(Error::Domain("need at least one realization".into()));
    }
    let sums: Vec<Vec<(f64, f64)>> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let real = NoiseRealization::draw(cfg, derive_seed(cfg.seed, r));
            delays_ns.iter().map(|&t| {
                let p = real.phase(t);
                (p.cos(), p.sin())
            }).collect()
        })
        .collect();
    Ok(delays_ns
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (c, s) = sums.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v[k].0, acc.1 + v[k].1));
            (t, c.hypot(s) / realizations as f64)
        })
        .collect())
}

/// Least-squares Gaussian fit of a coherence curve; returns `(T2 ns, rms)`.
pub fn fit_gaussian_decay(curve: &[(f64, f64)]) -> Result<(f64, f64)> {
    let t_max = curve.iter().map(|c| c.0).fold(0.0, f64::max);
    if curve.iter().all(|c| (1.0 - c.1).abs() < 1e-9) {
        return Ok((f64::INFINITY, 0.0));
    }
    let t_min = curve.iter().map(|c| c.0).filter(|t| *t > 0.0).fold(f64::INFINITY, f64::min);
    if !t_min.is_finite() {
        return Err(Error::FitFailed { message: "no positive delays".into(), curve: curve.to_vec() });
    }
    let sse = |ln_t2: f64| -> f64 {
        let t2 = ln_t2.exp();
        curve.iter().map(|(t, c)| (c - (-(t / t2).powi(2)).exp()).powi(2)).sum()
    };
    // coarse scan then golden section on ln T2
    let (a, b) = ((t_min / 10.0).ln(), (t_max * 100.0).ln());
    let n = 400;
    let mut best = a;
    for k in 0..=n {
        let x = a + (b - a) * k as f64 / n as f64;
        if sse(x) < sse(best) {
            best = x;
        }
    }
    let h = (b - a) / n as f64;
    let (mut lo, mut hi) = (best - h, best + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = hi - g * (hi - lo);
        let d = lo + g * (hi - lo);
        if sse(c) < sse(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    let ln_t2 = 0.5 * (lo + hi);
    let rms = (sse(ln_t2) / curve.len() as f64).sqrt();
    if !rms.is_finite() || rms > 0.05 {
        return Err(Error::FitFailed { message: format!("Gaussian fit residual {rms:.3e} too large"), curve: curve.to_vec() });
    }
    Ok((ln_t2.exp(), rms))
}

/// Simulated Ramsey experiment with a Gaussian-envelope fit.
pub fn ramsey_t2(cfg: &OneOverFConfig, delays_ns: &[f64], realizations: usize) -> Result<RamseyFit> {
    let curve = ramsey_curve(cfg, delays_ns, realizations)?;
    let (t2, rms) = fit_gaussian_decay(&curve)?;
    Ok(RamseyFit { t2_us: t2 / 1e3, rms_residual: rms, curve })
}

/// `J_0(x) = (1/π)∫_0^π cos(x sin τ) dτ`; the trapezoid rule is spectrally
/// accurate for this periodic integrand.
fn bessel_j0(x: f64) -> f64 {
    let m = 64 + (2.0 * x.abs()) as usize;
    let h = PI / m as f64;
    let mut s = 0.5 * (1.0 + 1.0);
    for k in 1..m {
        s += (x * (k as f64 * h).sin()).cos();
    }
    s / m as f64
}

/// Ensemble-mean coherence predicted for independent uniform phases and
/// frequencies: each component contributes `E_f[J_0(2(A/f)|sin πft|)]`.
pub fn expected_coherence(cfg: &OneOverFConfig, t_ns: f64) -> f64 {
    let t = t_ns * 1e-9;
    let (lo, hi) = (cfg.f_min_khz * 1e3, cfg.f_max_khz * 1e3);
    let m = 600;
    let mut acc = 0.0;
    for k in 0..=m {
        let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let u = k as f64 / m as f64;
        // expectation over the sampling variable u ~ U(0, 1)
        let f = match cfg.sampling {
            FrequencySampling::Uniform => lo + u * (hi - lo),
            FrequencySampling::LogUniform => lo * (hi / lo).powf(u),
        };
        let a = cfg.gamma * f.powf(-cfg.amplitude_exponent);
        acc += w * bessel_j0(2.0 * a / f * (PI * f * t).sin().abs());
    }
    let mean = acc / (3.0 * m as f64);
    mean.powi(cfg.n_components as i32)
}

/// Finds `γ` such that the Gaussian fit of the expected coherence gives the
/// requested `T2`.
pub fn calibrate_gamma(cfg: &OneOverFConfig, target_t2_us: f64) -> Result<f64> {
    cfg.validate()?;
    let target_ns = target_t2_us * 1e3;
    let delays: Vec<f64> = (0..=60).map(|k| 3.0 * target_ns * k as f64 / 60.0).collect();
    let fitted = |gamma: f64| -> Result<f64> {
        let c = cfg.with_gamma(gamma);
        let curve: Vec<(f64, f64)> = delays.iter().map(|&t| (t, expected_coherence(&c, t))).collect();
        Ok(fit_gaussian_decay(&curve)?.0)
    };
    // T2 falls monotonically with γ; bisect in ln γ
    let (mut lo, mut hi) = (1e2f64.ln(), 1e10f64.ln());
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if fitted(mid.exp())? > target_ns {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Evenly spaced delays over `[0, span_us]` (inclusive), in ns.
pub fn delays_ns(span_us: f64, points: usize) -> Vec<f64> {
    (0..=points).map(|k| span_us * 1e3 * k as f64 / points as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gamma_is_silent() {
        let cfg = OneOverFConfig { gamma: 0.0, ..Default::default() };
        let grid = TimeGrid::new(1000.0, 100).unwrap();
        assert!(sample_trajectory(&cfg, &grid).unwrap().iter().all(|&d| d == 0.0));
        let fit = ramsey_t2(&cfg, &delays_ns(10.0, 20), 5).unwrap();
        assert!(fit.t2_us.is_infinite());
    }

    #[test]
    fn single_component_formula() {
        let r = NoiseRealization::from_components(vec![2e4], vec![0.0], vec![1e6 / 2e4f64.sqrt()]);
        let t_ns = 12_500.0; // quarter period of 20 kHz
        assert!((r.delta_hz(t_ns) - 1e6 / 2e4f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn phase_is_integral_of_delta() {
        let cfg = OneOverFConfig::default();
        let r = NoiseRealization::draw(&cfg, 3);
        let t = 4000.0;
        let n = 4000;
        let h = t / n as f64;
        let simpson: f64 = (0..=n)
            .map(|k| {
                let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                w * r.delta(k as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((simpson - r.phase(t)).abs() < 1e-8 * (1.0 + simpson.abs()));
    }

    #[test]
    fn trajectories_depend_on_seed() {
        let grid = TimeGrid::new(1e4, 50).unwrap();
        let a = sample_trajectory(&OneOverFConfig::default(), &grid).unwrap();
        let b = sample_trajectory(&OneOverFConfig::default(), &grid).unwrap();
        let c = sample_trajectory(&OneOverFConfig::default().with_seed(1), &grid).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn seed_stream_is_distinct() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(s.len(), 1000);
    }

    #[test]
    fn bessel_reference_values() {
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-13);
        assert!((bessel_j0(10.0) + 0.245_935_764_451_348_3).abs() < 1e-12);
    }

    #[test]
    fn narrow_band_warns() {
        let cfg = OneOverFConfig { f_min_khz: 10.0, f_max_khz: 30.0, ..Default::default() };
        let est = psd_estimate(&cfg, 10, None).unwrap();
        assert!(est.warning.is_some());
        assert!(psd_estimate(&cfg, 9, None).is_err());
    }

    #[test]
    fn fit_recovers_gaussian() {
        let curve: Vec<(f64, f64)> = (0..50).map(|k| {
            let t = k as f64 * 300.0;
            (t, (-(t / 5000.0f64).powi(2)).exp())
        }).collect();
        let (t2, rms) = fit_gaussian_decay(&curve).unwrap();
        assert!((t2 - 5000.0).abs() < 1e-3);
        assert!(rms < 1e-9);
    }

    #[test]
    fn fit_failure_carries_curve() {
        let curve: Vec<(f64, f64)> = (0..20).map(|k| (k as f64 * 100.0, if k % 2 == 0 { 1.0 } else { 0.0 })).collect();
        match fit_gaussian_decay(&curve) {
            Err(Error::FitFailed { curve: c, .. }) => assert_eq!(c.len(), 20),
            other => panic!("unexpected {other:?}"),
        }
    }
}
