//! Error-curve geometry: interaction-picture noise paths in the Pauli frame,
//! the total error distance and the first-order error unitary.
//!
//! A curve stores the real coefficients `r_ν` of `R(t) = Σ_ν r_ν σ_ν`, with
//! `σ_ν` running over all `4^n` Pauli strings. Because the strings are
//! orthogonal with `Tr(σ_ν σ_μ) = 2^n δ_νμ`,
//! `‖R‖_F² = Σ_ν r_ν² · 2^n`, so the Euclidean norm of the coefficient vector
//! equals `2^{-n/2}·‖R‖_F`. The distance below therefore uses the plain
//! coefficient norm.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{real_pauli_coefficients, Operator, Pauli, PauliString, C64, I};
use crate::model::{effective_noise_channels, NoiseChannel, TwoQubitModel, XDrive};
use crate::propagate::{evolve, TimeGrid, Trajectory, STEPS_PER_NS};
use crate::pulse::{PulseParams, Stretched, Waveform};

/// Integrated noise path of one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorCurve {
    pub channel: String,
    pub epsilon: f64,
    pub n_qubits: usize,
    /// Pauli coefficient vector at every grid node.
    pub path: Vec<Vec<f64>>,
}

impl ErrorCurve {
    pub fn final_point(&self) -> &[f64] {
        self.path.last().expect("curve is never empty")
    }

    /// Euclidean norm of `r(T)`.
    pub fn final_norm(&self) -> f64 {
        norm(self.final_point())
    }

    /// `(x, y, z)` components of a single-qubit curve.
    pub fn xyz(&self, k: usize) -> [f64; 3] {
        let p = &self.path[k];
        [p[1], p[2], p[3]]
    }

    /// Operator `r(T)·σ`.
    pub fn final_operator(&self) -> Operator {
        let dim = 1usize << self.n_qubits;
        let mut op = Operator::zeros(dim);
        for (idx, &c) in self.final_point().iter().enumerate() {
            if c != 0.0 {
                op += &PauliString::from_index(idx, self.n_qubits).matrix().scale(c);
            }
        }
        op
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `r(t)·σ = ∫ v(τ)·U0(τ)†·N·U0(τ) dτ`, trapezoidal on the trajectory grid.
/// `v` must hold one sample per grid node.
pub fn error_curve(traj: &Trajectory, v: &[f64], noise_op: &Operator, channel: &str, epsilon: f64) -> Result<ErrorCurve> {
    if noise_op.dim() != traj.dim() {
        return Err(Error::DimensionMismatch { expected: traj.dim(), found: noise_op.dim() });
    }
    if v.len() != traj.unitaries.len() {
        return Err(Error::DimensionMismatch { expected: traj.unitaries.len(), found: v.len() });
    }
    let n_qubits = noise_op.n_qubits().ok_or_else(|| Error::Domain("dimension is not a power of two".into()))?;
    let integrand: Vec<Vec<f64>> = traj
        .unitaries
        .iter()
        .zip(v)
        .map(|(u, &vk)| real_pauli_coefficients(&noise_op.conjugate_by(u)).map(|c| c.into_iter().map(|x| x * vk).collect()))
        .collect::<Result<_>>()?;
    let half_dt = traj.grid.dt() / 2.0;
    let mut path = Vec::with_capacity(integrand.len());
    let mut r = vec![0.0; integrand[0].len()];
    path.push(r.clone());
    for w in integrand.windows(2) {
        for (ri, (a, b)) in r.iter_mut().zip(w[0].iter().zip(&w[1])) {
            *ri += half_dt * (a + b);
        }
        path.push(r.clone());
    }
    Ok(ErrorCurve { channel: channel.to_string(), epsilon, n_qubits, path })
}

/// `D = Σ_μ ‖r_μ(T)‖`, without the channel strengths.
pub fn error_distance(curves: &[ErrorCurve]) -> Result<f64> {
    if curves.is_empty() {
        return Err(Error::Domain("error distance needs at least one curve".into()));
    }
    Ok(curves.iter().map(ErrorCurve::final_norm).sum())
}

/// `Σ_μ ε_μ ‖r_μ(T)‖`.
pub fn weighted_error_distance(curves: &[ErrorCurve]) -> Result<f64> {
    if curves.is_empty() {
        return Err(Error::Domain("error distance needs at least one curve".into()));
    }
    Ok(curves.iter().map(|c| c.epsilon * c.final_norm()).sum())
}

/// `I − i Σ_μ ε_μ r_μ(T)·σ`.
pub fn first_order_error_unitary(curves: &[ErrorCurve]) -> Result<Operator> {
    let n = curves.first().map(|c| c.n_qubits).ok_or_else(|| Error::Domain("no curves".into()))?;
    if let Some(c) = curves.iter().find(|c| c.n_qubits != n) {
        return Err(Error::DimensionMismatch { expected: 1 << n, found: 1 << c.n_qubits });
    }
    let mut g = Operator::zeros(1 << n);
    for c in curves {
        g += &c.final_operator().scale(c.epsilon);
    }
    Ok(&Operator::identity(1 << n) - &g.scale_c(I))
}

/// Single-qubit curves of the three effective channels for `Ω/2·X` driving.
pub fn channel_curves(model: &TwoQubitModel, pulse: &dyn Waveform, grid: TimeGrid) -> Result<Vec<ErrorCurve>> {
    let traj = evolve(&XDrive(pulse), grid)?;
    let times = grid.nodes();
    let z = Pauli::Z.matrix();
    effective_noise_channels(model)
        .iter()
        .map(|ch| error_curve(&traj, &ch.sample(pulse, &times), &z, ch.label(), ch.epsilon))
        .collect()
}

/// Two-qubit curves with noise operators `ZZ`, `XZ`, `YZ` under `Ω/2·IX`.
pub fn two_qubit_channel_curves(model: &TwoQubitModel, pulse: &dyn Waveform, grid: TimeGrid) -> Result<Vec<ErrorCurve>> {
    let single = evolve(&XDrive(pulse), grid)?;
    let id = Operator::identity(2);
    let traj = Trajectory { grid, unitaries: single.unitaries.iter().map(|u| id.kron(u)).collect() };
    let times = grid.nodes();
    effective_noise_channels(model)
        .iter()
        .map(|ch: &NoiseChannel| {
            let op = PauliString(vec![ch.kind.spectator_pauli(), Pauli::Z]).matrix();
            error_curve(&traj, &ch.sample(pulse, &times), &op, ch.label(), ch.epsilon)
        })
        .collect()
}

/// One point of an amplitude sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub scale: f64,
    /// Peak amplitude of the stretched pulse (rad/ns).
    pub peak: f64,
    pub distance: f64,
}

/// `D` of the area-preserving stretch `Ω(t) → Ω(t/s)/s` for each scale `s`.
pub fn amplitude_sweep_distance(pulse: &PulseParams, model: &TwoQubitModel, scales: &[f64]) -> Result<Vec<SweepPoint>> {
    if let Some(s) = scales.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::Domain(format!("scale factors must be positive, got {s}")));
    }
    let base_peak = pulse.peak();
    scales
        .par_iter()
        .map(|&s| {
            let stretched = Stretched { inner: pulse, factor: s };
            let grid = TimeGrid::with_rate(stretched.duration(), STEPS_PER_NS)?;
            let d = error_distance(&channel_curves(model, &stretched, grid)?)?;
            Ok(SweepPoint { scale: s, peak: base_peak / s, distance: d })
        })
        .collect()
}

/// Fast single-qubit path used by the optimizer: the X drive commutes with
/// itself, so `U0(t_k) = R_x(A_k)` with `A_k` the midpoint-accumulated area,
/// and `U0†ZU0 = cos A·Z + sin A·Y`.
pub(crate) struct XDriveGeometry {
    pub angle: f64,
    /// Final `(y, z)` components per channel.
    pub finals: Vec<[f64; 2]>,
}

pub(crate) fn x_drive_geometry(pulse: &dyn Waveform, channels: &[NoiseChannel], grid: TimeGrid) -> XDriveGeometry {
    let dt = grid.dt();
    let mut angles = Vec::with_capacity(grid.steps + 1);
    let mut a = 0.0;
    angles.push(a);
    for k in 0..grid.steps {
        a += pulse.amplitude(grid.midpoint(k)) * dt;
        angles.push(a);
    }
    let amps: Vec<f64> = (0..=grid.steps).map(|k| pulse.amplitude(grid.node(k))).collect();
    let finals = channels
        .iter()
        .map(|ch| {
            let mut acc = [0.0; 2];
            for k in 0..=grid.steps {
                let w = if k == 0 || k == grid.steps { 0.5 } else { 1.0 };
                let v = ch.profile(grid.node(k), amps[k]) * w * dt;
                acc[0] += v * angles[k].sin();
                acc[1] += v * angles[k].cos();
            }
            acc
        })
        .collect();
    XDriveGeometry { angle: a, finals }
}

/// `R_x(angle)` written out.
pub(crate) fn rx_of(angle: f64) -> Operator {
    let c = C64::new((angle / 2.0).cos(), 0.0);
    let s = C64::new(0.0, -(angle / 2.0).sin());
    Operator::from_rows(&[&[c, s], &[s, c]])
}
