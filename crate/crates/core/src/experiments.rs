//! Figure-level experiments: coupling sweeps, 1/f noise, parallel lattice
//! gates, the conditional-phase gate, Euler angles and entropy growth.
//!
//! Infidelities are full-register average gate infidelities.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{embed, kron_all, rx, rz, Operator, C64, ONE, ZERO};
use crate::model::{crosstalk_report, block_diagonalize, lattice_hamiltonian, LatticeModel, Partition, RotatingFrame, TwoQubitModel};
use crate::noise::{derive_seed, linear_fit, NoiseRealization, OneOverFConfig};
use crate::propagate::{evolve_final, gate_fidelity, TimeGrid, STEPS_PER_NS};
use crate::pulse::{library_pulse, CosinePulse, Gate, PulseParams, Waveform};
use crate::statevector::{entanglement_entropy, DriveTerm, LatticeDynamics};

/// A labeled sweep curve with everything needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub label: String,
    pub x_label: String,
    pub x_unit: String,
    pub y_label: String,
    pub y_unit: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub y_stderr: Vec<f64>,
    pub seed: u64,
    pub metadata: Value,
}

impl ExperimentResult {
    pub fn new(label: &str, x: (&str, &str), y: (&str, &str), seed: u64) -> Self {
        Self {
            label: label.into(),
            x_label: x.0.into(),
            x_unit: x.1.into(),
            y_label: y.0.into(),
            y_unit: y.1.into(),
            x: vec![],
            y: vec![],
            y_stderr: vec![],
            seed,
            metadata: Value::Null,
        }
    }

    pub fn push(&mut self, x: f64, y: f64, err: f64) {
        self.x.push(x);
        self.y.push(y);
        self.y_stderr.push(err);
    }

    /// `x,y,y_stderr` rows with shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,y_stderr\n");
        for ((x, y), e) in self.x.iter().zip(&self.y).zip(&self.y_stderr) {
            let _ = writeln!(s, "{x:e},{y:e},{e:e}");
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<stem>.csv` and `<stem>.json`.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, self.to_json()? + "\n")?;
        Ok((csv, json))
    }

    /// Least-squares slope of `ln y` against `ln x` for `x` in `[lo, hi]`.
    pub fn log_slope(&self, lo: f64, hi: f64) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .x
            .iter()
            .zip(&self.y)
            .filter(|(x, y)| **x >= lo * (1.0 - 1e-9) && **x <= hi * (1.0 + 1e-9) && **x > 0.0 && **y > 0.0)
            .map(|(x, y)| (x.ln(), y.ln()))
            .collect();
        if pts.len() < 2 {
            return f64::NAN;
        }
        linear_fit(&pts).0
    }

    /// `y` at the point nearest to `x`.
    pub fn y_at(&self, x: f64) -> f64 {
        let k = self
            .x
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
            .map(|(k, _)| k)
            .expect("empty result");
        self.y[k]
    }
}

/// Robust (published) or trivial (raised-cosine) pulses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseKind {
    Robust,
    Trivial,
}

/// Gate-time of the pulse family used on lattices.
pub const LATTICE_GATE_TIME: f64 = 50.0;

/// Waveform for `gate` from the chosen family at 50 ns.
pub fn family_pulse(kind: PulseKind, gate: Gate) -> Box<dyn Waveform + Send> {
    match kind {
        PulseKind::Robust => Box::new(library_pulse(gate, LATTICE_GATE_TIME).expect("bundled 50 ns pulse").params),
        PulseKind::Trivial => Box::new(CosinePulse::for_gate(gate, LATTICE_GATE_TIME)),
    }
}

fn steps_for(duration: f64) -> usize {
    ((duration * STEPS_PER_NS).ceil() as usize).max(1)
}

/// Infidelity of the pair Hamiltonian against `I ⊗ R_x(angle)` per coupling.
pub fn fidelity_vs_coupling(pulse: &dyn Waveform, angle: f64, model: &TwoQubitModel, j_values: &[f64]) -> Result<ExperimentResult> {
    let peak = pulse.peak();
    let target = Operator::identity(2).kron(&rx(angle));
    let grid = TimeGrid::new(pulse.duration(), steps_for(pulse.duration()))?;
    let ys: Vec<f64> = j_values
        .par_iter()
        .map(|&j| {
            let m = TwoQubitModel::new(model.ez, model.dez, j)?;
            let u = evolve_final(&RotatingFrame::new(m, pulse), grid)?;
            Ok(1.0 - gate_fidelity(&u, &target)?)
        })
        .collect::<Result<_>>()?;
    let mut r = ExperimentResult::new("fidelity_vs_coupling", ("J/Omega_m", "1"), ("infidelity", "1"), 0);
    for (&j, y) in j_values.iter().zip(ys) {
        r.push(j / peak, y, 0.0);
    }
    r.metadata = serde_json::json!({
        "model": model, "J": j_values, "angle": angle, "peak": peak,
        "gate_time_ns": pulse.duration(), "steps": grid.steps,
    });
    Ok(r)
}

/// Mean infidelity with independent 1/f offsets `δ_i/2·Z_i` on both qubits.
pub fn fidelity_under_1f(
    pulse: &dyn Waveform,
    angle: f64,
    model: &TwoQubitModel,
    noise: &OneOverFConfig,
    j_values: &[f64],
    realizations: usize,
) -> Result<ExperimentResult> {
    if realizations < 100 {
        return Err(Error::Domain(format!("need at least 100 realizations, got {realizations}")));
    }
    noise.validate()?;
    let peak = pulse.peak();
    let target = Operator::identity(2).kron(&rx(angle));
    let grid = TimeGrid::new(pulse.duration(), steps_for(pulse.duration()))?;
    let mut r = ExperimentResult::new("fidelity_under_1f", ("J/Omega_m", "1"), ("infidelity", "1"), noise.seed);
    for &j in j_values {
        let m = TwoQubitModel::new(model.ez, model.dez, j)?;
        let samples: Vec<f64> = (0..realizations as u64)
            .into_par_iter()
            .map(|k| {
                let n1 = NoiseRealization::draw(noise, derive_seed(noise.seed, 2 * k));
                let n2 = NoiseRealization::draw(noise, derive_seed(noise.seed, 2 * k + 1));
                let d1 = |t: f64| n1.delta(t);
                let d2 = |t: f64| n2.delta(t);
                let h = RotatingFrame { model: m, pulse, detuning: Some([&d1, &d2]) };
                let u = evolve_final(&h, grid)?;
                Ok(1.0 - gate_fidelity(&u, &target)?)
            })
            .collect::<Result<_>>()?;
        let (mean, se) = mean_stderr(&samples);
        r.push(j / peak, mean, se);
    }
    r.metadata = serde_json::json!({
        "model": model, "J": j_values, "angle": angle, "peak": peak, "noise": noise,
        "realizations": realizations, "gate_time_ns": pulse.duration(), "steps": grid.steps,
    });
    Ok(r)
}

/// Dephasing-limited estimate for an idle spectator over `t_gate`:
/// `1 − F ≈ (d/(d+1))·(T/T2)²/2` with `d = 4`.
pub fn dephasing_limit(t_gate_ns: f64, t2_us: f64) -> f64 {
    0.4 * (t_gate_ns / (t2_us * 1e3)).powi(2)
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Options for lattice gate experiments.
#[derive(Clone, Debug, Default)]
pub struct LatticeOptions {
    /// Neighbor crosstalk terms (default on).
    pub no_crosstalk: bool,
    /// Add three-body terms from [`three_body_terms`] at each coupling.
    pub three_body: bool,
    /// Override of `Ω_m` used to express `J/Ω_m`.
    pub omega_m: Option<f64>,
    pub steps_per_ns: Option<f64>,
}

fn lattice_dynamics(lat: &LatticeModel, driven: &[usize], opts: &LatticeOptions) -> Result<LatticeDynamics> {
    if !opts.three_body || driven.is_empty() || lat.j == 0.0 {
        return LatticeDynamics::new(lat, !opts.no_crosstalk);
    }
    let mut terms: Vec<DriveTerm> =
        (0..lat.n_qubits).map(|q| DriveTerm { flipped: q, source: q, zs: vec![], coeff: 0.5, detuning: 0.0 }).collect();
    if !opts.no_crosstalk {
        for &(a, b) in &lat.edges {
            for (i, j) in [(a, b), (b, a)] {
                terms.push(DriveTerm { flipped: i, source: j, zs: vec![j], coeff: lat.beta_for(i, j), detuning: lat.detuning(i, j) });
            }
        }
    }
    terms.extend(three_body_terms(&perturbed_reference(lat), lat, driven)?);
    LatticeDynamics::from_terms(lat, terms)
}

/// Lab-frame copy of `lat` for block diagonalization: frequencies shifted by
/// 5 rad/ns plus `0.01·i²` so that no two computational states coincide.
pub fn perturbed_reference(lat: &LatticeModel) -> LatticeModel {
    let omegas = lat.omegas.iter().enumerate().map(|(i, w)| 5.0 + w + 0.01 * (i * i) as f64).collect();
    LatticeModel { omegas, beta: None, ..lat.clone() }
}

/// Three-body terms `C3·Ω_k (cos Δ t X_i + sin Δ t Y_i) Z_j Z_l` from an exact
/// block diagonalization of `reference` (a lab-frame lattice with
/// non-degenerate frequencies), with carriers taken from `lat`.
pub fn three_body_terms(reference: &LatticeModel, lat: &LatticeModel, driven: &[usize]) -> Result<Vec<DriveTerm>> {
    let h = lattice_hamiltonian(reference)?;
    let bd = block_diagonalize(&h, &Partition::computational(reference.n_qubits))?;
    let mut out = Vec::new();
    for &k in driven {
        let rep = crosstalk_report(&bd, &[k])?;
        for (&(i, j, l), &c) in &rep.c3 {
            out.push(DriveTerm { flipped: i, source: k, zs: vec![j, l], coeff: c, detuning: if i == k { 0.0 } else { lat.detuning(i, k) } });
        }
    }
    Ok(out)
}

/// Per-qubit assignment; `None` idles the qubit.
pub type Assignment = Vec<Option<Gate>>;

/// True when two adjacent qubits carry non-identity rotations at once.
pub fn drives_adjacent(lat: &LatticeModel, assignment: &Assignment) -> bool {
    let active = |q: usize| matches!(assignment[q], Some(g) if g != Gate::X2pi);
    lat.edges.iter().any(|&(a, b)| active(a) && active(b))
}

/// Mean peak of the non-identity gate pulses (all pulses if only identities).
pub fn assignment_omega_m(assignment: &Assignment, kind: PulseKind) -> f64 {
    let gates: Vec<Gate> = assignment.iter().flatten().copied().collect();
    let chosen: Vec<Gate> = {
        let rot: Vec<Gate> = gates.iter().copied().filter(|g| *g != Gate::X2pi).collect();
        if rot.is_empty() { gates } else { rot }
    };
    if chosen.is_empty() {
        return 0.0;
    }
    chosen.iter().map(|&g| family_pulse(kind, g).peak()).sum::<f64>() / chosen.len() as f64
}

fn assignment_target(assignment: &Assignment) -> Operator {
    let ops: Vec<Operator> = assignment.iter().map(|g| g.map_or(Operator::identity(2), |g| rx(g.angle()))).collect();
    kron_all(&ops)
}

/// Parallel single-qubit gates on a lattice, infidelity vs `J/Ω_m`.
///
/// `Ω_m` defaults to the robust pulses of the assignment for either family,
/// so robust and trivial runs at the same ratio share the same coupling.
pub fn parallel_gate_fidelity(
    lat: &LatticeModel,
    assignment: &Assignment,
    kind: PulseKind,
    j_ratios: &[f64],
    opts: &LatticeOptions,
) -> Result<ExperimentResult> {
    if assignment.len() != lat.n_qubits {
        return Err(Error::DimensionMismatch { expected: lat.n_qubits, found: assignment.len() });
    }
    let omega_m = opts.omega_m.unwrap_or_else(|| assignment_omega_m(assignment, PulseKind::Robust));
    let pulses: Vec<Option<Box<dyn Waveform + Send>>> = assignment.iter().map(|g| g.map(|g| family_pulse(kind, g))).collect();
    let drives: Vec<Option<&dyn Waveform>> = pulses.iter().map(|p| p.as_deref().map(|w| w as &dyn Waveform)).collect();
    let target = assignment_target(assignment);
    let steps = ((LATTICE_GATE_TIME * opts.steps_per_ns.unwrap_or(STEPS_PER_NS)).ceil()) as usize;
    let warning = drives_adjacent(lat, assignment);
    let mut r = ExperimentResult::new("parallel_gate_fidelity", ("J/Omega_m", "1"), ("infidelity", "1"), 0);
    for &x in j_ratios {
        let l = lat.with_coupling(x * omega_m);
        let driven: Vec<usize> = (0..lat.n_qubits).filter(|&q| assignment[q].is_some()).collect();
        let dynm = lattice_dynamics(&l, &driven, opts)?;
        let u = dynm.layer_unitary(&drives, LATTICE_GATE_TIME, steps);
        r.push(x, 1.0 - gate_fidelity(&u, &target)?, 0.0);
    }
    r.metadata = serde_json::json!({
        "lattice": lat,
        "assignment": assignment.iter().map(|g| g.map(|g| g.label())).collect::<Vec<_>>(),
        "pulse_kind": kind, "omega_m": omega_m, "steps": steps,
        "crosstalk": !opts.no_crosstalk, "three_body": opts.three_body,
        "adjacent_drive_warning": warning,
    });
    Ok(r)
}

/// How neighbors of the gate pair are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZzArm {
    /// Robust `X_2π` echoes on neighbors.
    Robust,
    /// Raised-cosine `X_2π` echoes on neighbors.
    Trivial,
    /// No pulses anywhere.
    Undressed,
}

/// `exp(−i φ/2 Z_a Z_b)` on an `n`-qubit register.
pub fn conditional_phase_target(n: usize, a: usize, b: usize, phi: f64) -> Operator {
    let dim = 1usize << n;
    let bit = |q: usize| 1usize << (n - 1 - q);
    let entries: Vec<C64> = (0..dim)
        .map(|x| {
            let same = (x & bit(a) == 0) == (x & bit(b) == 0);
            C64::from_polar(1.0, if same { -phi / 2.0 } else { phi / 2.0 })
        })
        .collect();
    Operator::diagonal(&entries)
}

/// `φ = (arg U01 + arg U10 − arg U00 − arg U11)/2` on the pair with all
/// other qubits in `|0⟩`.
pub fn extract_conditional_phase(u: &Operator, n: usize, a: usize, b: usize) -> f64 {
    let bit = |q: usize| 1usize << (n - 1 - q);
    let d = |x: usize| u.get(x, x);
    let (u00, u01, u10, u11) = (d(0), d(bit(b)), d(bit(a)), d(bit(a) | bit(b)));
    let z = u01 * u10 * u00.conj() * u11.conj();
    z.arg() / 2.0
}

/// Conditional-phase gate on `pair` with `φ = JT/2`; neighbors of the pair
/// receive `X_2π` echoes per `arm`. `y` is the infidelity; the extracted
/// phase is stored in the metadata.
pub fn zz_gate_fidelity(
    lat: &LatticeModel,
    pair: (usize, usize),
    t_gate: f64,
    arm: ZzArm,
    j_ratios: &[f64],
    opts: &LatticeOptions,
) -> Result<ExperimentResult> {
    let (a, b) = pair;
    if !lat.are_adjacent(a, b) {
        return Err(Error::Domain(format!("qubits {a} and {b} are not coupled")));
    }
    let mut echo: Vec<usize> = lat.neighbors(a).into_iter().chain(lat.neighbors(b)).filter(|&q| q != a && q != b).collect();
    echo.sort_unstable();
    echo.dedup();
    let omega_m = opts.omega_m.unwrap_or_else(|| family_pulse(PulseKind::Robust, Gate::X2pi).peak());
    let kind = match arm {
        ZzArm::Trivial => Some(PulseKind::Trivial),
        ZzArm::Robust => Some(PulseKind::Robust),
        ZzArm::Undressed => None,
    };
    let echo_pulse: Option<Box<dyn Waveform + Send>> = kind.map(|k| match k {
        PulseKind::Robust => Box::new(library_pulse(Gate::X2pi, t_gate).map(|e| e.params).unwrap_or_else(|| stretched_x2pi(t_gate))) as Box<dyn Waveform + Send>,
        PulseKind::Trivial => Box::new(CosinePulse::for_gate(Gate::X2pi, t_gate)),
    });
    let drives: Vec<Option<&dyn Waveform>> = (0..lat.n_qubits)
        .map(|q| if echo.contains(&q) { echo_pulse.as_deref().map(|w| w as &dyn Waveform) } else { None })
        .collect();
    let steps = ((t_gate * opts.steps_per_ns.unwrap_or(STEPS_PER_NS)).ceil()) as usize;
    let mut r = ExperimentResult::new("zz_gate_fidelity", ("J/Omega_m", "1"), ("infidelity", "1"), 0);
    let mut phases = Vec::new();
    for &x in j_ratios {
        let j = x * omega_m;
        let l = lat.with_coupling(j);
        let u = lattice_dynamics(&l, &echo, opts)?.layer_unitary(&drives, t_gate, steps);
        let phi = j * t_gate / 2.0;
        let target = conditional_phase_target(lat.n_qubits, a, b, phi);
        r.push(x, 1.0 - gate_fidelity(&u, &target)?, 0.0);
        phases.push(serde_json::json!({"target": phi, "extracted": extract_conditional_phase(&u, lat.n_qubits, a, b)}));
    }
    r.metadata = serde_json::json!({
        "lattice": lat, "pair": [a, b], "gate_time_ns": t_gate, "arm": arm, "echo_qubits": echo,
        "omega_m": omega_m, "steps": steps, "three_body": opts.three_body, "conditional_phase": phases,
    });
    Ok(r)
}

fn stretched_x2pi(t_gate: f64) -> PulseParams {
    let base = library_pulse(Gate::X2pi, LATTICE_GATE_TIME).expect("bundled 50 ns pulse").params;
    base.stretched(t_gate / LATTICE_GATE_TIME)
}

/// Euler angles `(α, β, λ)` with `U ≃ Z_β·X_{π/2}·Z_α·X_{−π/2}·Z_λ` up to
/// global phase, `Z_φ = exp(−iφZ/2)`, `X_θ = exp(−iθX/2)`.
///
/// Since `X_{π/2} Z_α X_{−π/2} = exp(iαY/2)`, this is the ZYZ form with the
/// middle angle negated. Branches: `α ∈ [−π, 0]`; when the off-diagonal
/// vanishes `λ = 0`, when the diagonal vanishes `λ = 0` as well.
pub fn euler_decompose(u: &Operator) -> Result<(f64, f64, f64)> {
    if u.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: u.dim() });
    }
    let det = u.get(0, 0) * u.get(1, 1) - u.get(0, 1) * u.get(1, 0);
    if det.norm() < 1e-12 {
        return Err(Error::Degenerate("matrix is singular".into()));
    }
    let s = u.scale_c(ONE / det.sqrt());
    let (a, c, d) = (s.get(0, 0), s.get(1, 0), s.get(1, 1));
    let gamma = 2.0 * c.norm().atan2(a.norm());
    let (beta, lambda) = if c.norm() < 1e-12 {
        (2.0 * d.arg(), 0.0)
    } else if a.norm() < 1e-12 {
        (2.0 * c.arg(), 0.0)
    } else {
        let (sum, diff) = (2.0 * d.arg(), 2.0 * c.arg());
        ((sum + diff) / 2.0, (sum - diff) / 2.0)
    };
    Ok((-gamma, beta, lambda))
}

/// `Z_β·X_{π/2}·Z_α·X_{−π/2}·Z_λ`.
pub fn euler_unitary(alpha: f64, beta: f64, lambda: f64) -> Operator {
    &(&(&(&rz(beta) * &rx(PI / 2.0)) * &rz(alpha)) * &rx(-PI / 2.0)) * &rz(lambda)
}

/// `1 − |Tr(V†U)|/2`, zero when equal up to global phase.
pub fn phase_insensitive_distance(u: &Operator, v: &Operator) -> f64 {
    let tr: C64 = v.0.iter().zip(u.0.iter()).map(|(a, b)| a.conj() * b).sum();
    (1.0 - tr.norm() / u.dim() as f64).max(0.0)
}

/// Bipartitions of the lattice used for entropy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cut {
    /// Odd-indexed qubits (a checkerboard on the ladder).
    EvenOdd,
    /// The first half of the qubits (the top row on the ladder).
    UpperLower,
}

impl Cut {
    pub fn subsystem(self, n: usize) -> Vec<usize> {
        match self {
            Cut::EvenOdd => (0..n).filter(|q| q % 2 == 1).collect(),
            Cut::UpperLower => (0..n / 2).collect(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Cut::EvenOdd => "even-odd",
            Cut::UpperLower => "upper-lower",
        }
    }
}

/// Random single-qubit circuit description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitSpec {
    pub depth: usize,
    pub gate_time: f64,
    pub pulse_kind: PulseKind,
    pub cuts: Vec<Cut>,
    pub crosstalk: bool,
    pub steps_per_ns: f64,
}

impl Default for CircuitSpec {
    fn default() -> Self {
        Self {
            depth: 200,
            gate_time: LATTICE_GATE_TIME,
            pulse_kind: PulseKind::Robust,
            cuts: vec![Cut::EvenOdd, Cut::UpperLower],
            crosstalk: true,
            steps_per_ns: 10.0,
        }
    }
}

/// Per-cut entropy curves plus the worst norm drift seen.
#[derive(Clone, Debug)]
pub struct EntropyResult {
    pub curves: Vec<(Cut, ExperimentResult)>,
    pub max_norm_drift: f64,
}

/// Gates for one realization, `layers × qubits`.
pub fn random_gates(n: usize, depth: usize, seed: u64) -> Vec<Vec<Gate>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..depth).map(|_| (0..n).map(|_| Gate::ALL[rng.gen_range(0..3)]).collect()).collect()
}

/// Mean entanglement entropy after each layer of random X rotations,
/// starting from all spins down.
pub fn entropy_growth(lat: &LatticeModel, spec: &CircuitSpec, realizations: usize, seed: u64) -> Result<EntropyResult> {
    if spec.depth == 0 {
        return Err(Error::Domain("depth must be at least 1".into()));
    }
    if realizations == 0 {
        return Err(Error::Domain("need at least one realization".into()));
    }
    if (spec.gate_time - LATTICE_GATE_TIME).abs() > 1e-9 {
        return Err(Error::Domain(format!("only {LATTICE_GATE_TIME} ns layers are supported")));
    }
    let n = lat.n_qubits;
    let dynm = LatticeDynamics::new(lat, spec.crosstalk)?;
    let pulses: Vec<Box<dyn Waveform + Send>> = Gate::ALL.iter().map(|&g| family_pulse(spec.pulse_kind, g)).collect();
    let steps = ((spec.gate_time * spec.steps_per_ns).ceil() as usize).max(1);
    let subsystems: Vec<Vec<usize>> = spec.cuts.iter().map(|c| c.subsystem(n)).collect();

    let runs: Vec<(Vec<Vec<f64>>, f64)> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let gates = random_gates(n, spec.depth, derive_seed(seed, r));
            let mut psi = vec![ZERO; 1 << n];
            psi[(1 << n) - 1] = ONE;
            let mut per_cut = vec![Vec::with_capacity(spec.depth); subsystems.len()];
            let mut drift: f64 = 0.0;
            for (layer, row) in gates.iter().enumerate() {
                let drives: Vec<Option<&dyn Waveform>> =
                    row.iter().map(|g| Some(pulses[Gate::ALL.iter().position(|x| x == g).unwrap()].as_ref() as &dyn Waveform)).collect();
                dynm.evolve_layer(&mut psi, &drives, layer as f64 * spec.gate_time, spec.gate_time, steps);
                let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                drift = drift.max((norm - 1.0).abs());
                for (k, sub) in subsystems.iter().enumerate() {
                    per_cut[k].push(entanglement_entropy(&psi, n, sub));
                }
            }
            (per_cut, drift)
        })
        .collect();

    let max_norm_drift = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let curves = spec
        .cuts
        .iter()
        .enumerate()
        .map(|(k, &cut)| {
            let mut res = ExperimentResult::new(&format!("entropy_{}", cut.label()), ("layer", "1"), ("entropy", "nat"), seed);
            for layer in 0..spec.depth {
                let vals: Vec<f64> = runs.iter().map(|r| r.0[k][layer]).collect();
                let (m, se) = mean_stderr(&vals);
                res.push((layer + 1) as f64, m, se);
            }
            res.metadata = serde_json::json!({
                "lattice": lat, "circuit": spec, "cut": cut, "subsystem": subsystems[k],
                "realizations": realizations, "steps_per_layer": steps, "max_norm_drift": max_norm_drift,
            });
            (cut, res)
        })
        .collect();
    Ok(EntropyResult { curves, max_norm_drift })
}

/// Single-qubit operator on qubit `q` of `n`, re-exported for callers
/// building custom targets.
pub fn on_qubit(op: &Operator, q: usize, n: usize) -> Operator {
    embed(op, q, n)
}
