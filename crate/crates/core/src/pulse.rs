//! Bandwidth-limited Fourier control pulses and the bundled pulse library.
//!
//! A pulse is `Ω(t) = sin(πt/T)·(a_0 + Σ_j a_j cos(2πjt/T + φ_j))`, with all
//! amplitudes in rad/ns.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Default number of samples used to locate the pulse peak.
pub const PEAK_SAMPLES: usize = 4096;

/// Target X rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    Xpi,
    Xpi2,
    X2pi,
}

impl Gate {
    pub const ALL: [Gate; 3] = [Gate::Xpi, Gate::Xpi2, Gate::X2pi];

    pub fn angle(self) -> f64 {
        match self {
            Gate::Xpi => PI,
            Gate::Xpi2 => PI / 2.0,
            Gate::X2pi => 2.0 * PI,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Gate::Xpi => "Xpi",
            Gate::Xpi2 => "Xpi2",
            Gate::X2pi => "X2pi",
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Gate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Gate::ALL
            .into_iter()
            .find(|g| g.label() == s)
            .ok_or_else(|| Error::Domain(format!("unknown gate label '{s}', expected one of Xpi, Xpi2, X2pi")))
    }
}

/// Anything that can be sampled as a drive amplitude on `[0, duration]`.
pub trait Waveform: Sync {
    fn duration(&self) -> f64;

    /// Amplitude at `t`; callers guarantee `0 ≤ t ≤ duration`.
    fn amplitude(&self, t: f64) -> f64;

    /// `∫ Ω dt` by composite Simpson quadrature.
    fn area(&self) -> f64 {
        let n = 4096;
        let h = self.duration() / n as f64;
        let mut acc = self.amplitude(0.0) + self.amplitude(self.duration());
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * self.amplitude(k as f64 * h);
        }
        acc * h / 3.0
    }

    /// Peak `|Ω|` from dense sampling refined by golden-section search.
    fn peak(&self) -> f64 {
        peak_abs(|t| self.amplitude(t), self.duration(), PEAK_SAMPLES)
    }
}

/// Fourier-ansatz coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    #[serde(rename = "T_ns")]
    pub t_gate: f64,
    pub a: Vec<f64>,
    pub phi: Vec<f64>,
}

impl PulseParams {
    pub fn new(t_gate: f64, a: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let p = Self { t_gate, a, phi };
        p.validate()?;
        Ok(p)
    }

    /// Only the envelope term: `Ω = a0·sin(πt/T)`.
    pub fn envelope(t_gate: f64, a0: f64) -> Self {
        Self { t_gate, a: vec![a0], phi: vec![] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_gate > 0.0 && self.t_gate.is_finite()) {
            return Err(Error::Domain(format!("gate time must be positive, got {}", self.t_gate)));
        }
        if self.a.is_empty() {
            return Err(Error::Domain("amplitude vector is empty".into()));
        }
        if self.phi.len() + 1 != self.a.len() {
            return Err(Error::Domain(format!(
                "expected {} phases for {} amplitudes, got {}",
                self.a.len() - 1,
                self.a.len(),
                self.phi.len()
            )));
        }
        if self.a.iter().chain(&self.phi).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Harmonic count `n`.
    pub fn n(&self) -> usize {
        self.phi.len()
    }

    /// Checked evaluation; `t` outside `[0, T]` is a domain error.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.t_gate).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", self.t_gate)));
        }
        Ok(self.eval_unchecked(t))
    }

    pub fn eval_unchecked(&self, t: f64) -> f64 {
        if t == 0.0 || t == self.t_gate {
            return 0.0;
        }
        let x = t / self.t_gate;
        let mut s = self.a[0];
        for (j, (aj, pj)) in self.a[1..].iter().zip(&self.phi).enumerate() {
            s += aj * (2.0 * PI * (j + 1) as f64 * x + pj).cos();
        }
        (PI * x).sin() * s
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { t_gate: self.t_gate, a: self.a.iter().map(|v| v * factor).collect(), phi: self.phi.clone() }
    }

    /// Flattened `[a_0..a_n, φ_1..φ_n]`.
    pub fn to_vector(&self) -> Vec<f64> {
        self.a.iter().chain(&self.phi).copied().collect()
    }

    pub fn from_vector(t_gate: f64, n: usize, v: &[f64]) -> Self {
        Self { t_gate, a: v[..=n].to_vec(), phi: v[n + 1..2 * n + 1].to_vec() }
    }

    /// Area-preserving stretch `Ω(t) → Ω(t/s)/s`.
    pub fn stretched(&self, s: f64) -> Self {
        Self { t_gate: self.t_gate * s, a: self.a.iter().map(|v| v / s).collect(), phi: self.phi.clone() }
    }
}

impl Waveform for PulseParams {
    fn duration(&self) -> f64 {
        self.t_gate
    }

    fn amplitude(&self, t: f64) -> f64 {
        self.eval_unchecked(t)
    }

    // sin(πu) is symmetric about u = 1/2 and sin(2πju) antisymmetric, so only
    // the cosine parts survive: ∫_0^1 sin(πu)cos(2πju) du = 2 / (π(1 − 4j²)).
    fn area(&self) -> f64 {
        let mut s = self.a[0];
        for (j, (aj, pj)) in self.a[1..].iter().zip(&self.phi).enumerate() {
            let j = (j + 1) as f64;
            s += aj * pj.cos() / (1.0 - 4.0 * j * j);
        }
        2.0 * self.t_gate / PI * s
    }
}

/// Raised-cosine reference pulse `Ω = (θ/T)(1 − cos 2πt/T)` with area `θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosinePulse {
    pub t_gate: f64,
    pub angle: f64,
}

impl CosinePulse {
    pub fn new(t_gate: f64, angle: f64) -> Self {
        Self { t_gate, angle }
    }

    pub fn for_gate(gate: Gate, t_gate: f64) -> Self {
        Self::new(t_gate, gate.angle())
    }
}

impl Waveform for CosinePulse {
    fn duration(&self) -> f64 {
        self.t_gate
    }

    fn amplitude(&self, t: f64) -> f64 {
        self.angle / self.t_gate * (1.0 - (2.0 * PI * t / self.t_gate).cos())
    }

    fn area(&self) -> f64 {
        self.angle
    }

    fn peak(&self) -> f64 {
        2.0 * self.angle.abs() / self.t_gate
    }
}

/// Area-preserving stretch of another waveform: `Ω_s(t) = Ω(t/s)/s`.
#[derive(Clone, Copy, Debug)]
pub struct Stretched<'a, W: Waveform + ?Sized> {
    pub inner: &'a W,
    pub factor: f64,
}

impl<W: Waveform + ?Sized> Waveform for Stretched<'_, W> {
    fn duration(&self) -> f64 {
        self.inner.duration() * self.factor
    }

    fn amplitude(&self, t: f64) -> f64 {
        self.inner.amplitude((t / self.factor).min(self.inner.duration())) / self.factor
    }
}

/// Piecewise-zero waveform, used for idle qubits.
#[derive(Clone, Copy, Debug)]
pub struct Idle(pub f64);

impl Waveform for Idle {
    fn duration(&self) -> f64 {
        self.0
    }

    fn amplitude(&self, _t: f64) -> f64 {
        0.0
    }
}

fn peak_abs(f: impl Fn(f64) -> f64, duration: f64, samples: usize) -> f64 {
    let h = duration / samples as f64;
    let (mut best_k, mut best) = (0, 0.0);
    for k in 0..=samples {
        let v = f(k as f64 * h).abs();
        if v > best {
            best = v;
            best_k = k;
        }
    }
    if best == 0.0 {
        return 0.0;
    }
    // golden-section refinement on the bracketing interval
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = (best_k as f64 - 1.0).max(0.0) * h;
    let mut hi = ((best_k + 1) as f64 * h).min(duration);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c).abs(), f(d).abs());
    for _ in 0..60 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c).abs();
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d).abs();
        }
    }
    best.max(fc).max(fd)
}

/// Maximum `|Ω(t)|` over the pulse.
pub fn max_amplitude(params: &PulseParams) -> f64 {
    params.peak()
}

/// Multiplies all amplitudes so that the peak equals `cap`.
pub fn rescale_pulse(params: &PulseParams, cap: f64) -> Result<PulseParams> {
    if !(cap > 0.0) {
        return Err(Error::Domain(format!("amplitude cap must be positive, got {cap}")));
    }
    let peak = max_amplitude(params);
    if peak == 0.0 || !peak.is_finite() {
        return Err(Error::Degenerate("pulse is identically zero".into()));
    }
    Ok(params.scaled(cap / peak))
}

pub fn pulse_area(params: &PulseParams) -> f64 {
    params.area()
}

/// One published robust pulse.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseLibraryEntry {
    pub gate: Gate,
    pub relative_amplitude: f64,
    pub params: PulseParams,
}

#[derive(Serialize, Deserialize)]
struct RawEntry {
    gate: String,
    relative_amplitude: f64,
    #[serde(rename = "T_ns")]
    t_gate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    a: Vec<f64>,
    phi: Vec<f64>,
}

impl RawEntry {
    fn into_entry(self) -> Result<PulseLibraryEntry> {
        let gate: Gate = self.gate.parse()?;
        if let Some(n) = self.n {
            if self.phi.len() != n || self.a.len() != n + 1 {
                return Err(Error::Domain(format!(
                    "n = {n} but got {} amplitudes and {} phases",
                    self.a.len(),
                    self.phi.len()
                )));
            }
        }
        if !(self.relative_amplitude > 0.0) {
            return Err(Error::Domain("relative_amplitude must be positive".into()));
        }
        Ok(PulseLibraryEntry {
            gate,
            relative_amplitude: self.relative_amplitude,
            params: PulseParams::new(self.t_gate, self.a, self.phi)?,
        })
    }
}

/// Parses a library document. An empty document yields an empty list.
pub fn parse_library(text: &str) -> Result<Vec<PulseLibraryEntry>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse { entry: "document".into(), message: e.to_string() })?;
    let entries = doc
        .get("entries")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse { entry: "document".into(), message: "missing 'entries' array".into() })?;
    entries
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let name = match v.get("gate").and_then(Value::as_str) {
                Some(g) => format!("entries[{k}] ({g})"),
                None => format!("entries[{k}]"),
            };
            let raw: RawEntry = serde_json::from_value(v.clone())
                .map_err(|e| Error::Parse { entry: name.clone(), message: e.to_string() })?;
            raw.into_entry().map_err(|e| Error::Parse { entry: name, message: e.to_string() })
        })
        .collect()
}

pub fn load_library(path: impl AsRef<Path>) -> Result<Vec<PulseLibraryEntry>> {
    parse_library(&std::fs::read_to_string(path)?)
}

/// Serializes entries in the library schema.
pub fn library_to_json(entries: &[PulseLibraryEntry]) -> Result<String> {
    let raw: Vec<RawEntry> = entries
        .iter()
        .map(|e| RawEntry {
            gate: e.gate.label().to_string(),
            relative_amplitude: e.relative_amplitude,
            t_gate: e.params.t_gate,
            n: Some(e.params.n()),
            a: e.params.a.clone(),
            phi: e.params.phi.clone(),
        })
        .collect();
    let doc = serde_json::json!({
        "units": {
            "T_ns": "ns",
            "a": "rad/ns",
            "phi": "rad",
            "relative_amplitude": "peak amplitude divided by the Zeeman difference (dimensionless)"
        },
        "entries": raw,
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn save_library(path: impl AsRef<Path>, entries: &[PulseLibraryEntry]) -> Result<()> {
    std::fs::write(path, library_to_json(entries)?)?;
    Ok(())
}

pub const BUNDLED_LIBRARY: &str = include_str!("../data/pulse_library.json");

/// The nine bundled robust pulses.
pub fn bundled_library() -> Vec<PulseLibraryEntry> {
    parse_library(BUNDLED_LIBRARY).expect("bundled library is valid")
}

/// First bundled pulse for `gate` with the given gate time.
pub fn library_pulse(gate: Gate, t_gate: f64) -> Option<PulseLibraryEntry> {
    bundled_library().into_iter().find(|e| e.gate == gate && (e.params.t_gate - t_gate).abs() < 1e-9)
}
