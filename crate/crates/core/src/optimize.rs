//! Robust pulse synthesis: descent on `C = (1 − F) + D_ε` followed by a
//! Levenberg–Marquardt polish on the smooth residual vector.
//!
//! `D_ε` weights each channel by its strength at a reference coupling, so the
//! static `ZZ` channel and the two crosstalk channels are commensurate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::errgeo::{rx_of, x_drive_geometry};
use crate::error::{Error, Result};
use crate::linalg::{Operator, C64};
use crate::model::{effective_noise_channels, NoiseChannel, TwoQubitModel};
use crate::propagate::{gate_fidelity, TimeGrid};
use crate::pulse::{max_amplitude, PulseParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub eta: f64,
    pub max_iters: usize,
    pub step_size: f64,
    pub grad_epsilon: f64,
    /// Peak amplitude `u` after rescaling (rad/ns).
    pub amplitude_cap: f64,
    pub harmonics: usize,
    pub seed: u64,
    pub steps_per_ns: f64,
    /// Levenberg–Marquardt iterations after the descent phase.
    pub polish_iters: usize,
    /// Coupling that sets the channel weights, as a fraction of `ΔE_z`.
    pub reference_coupling_ratio: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            eta: 1e-4,
            max_iters: 300,
            step_size: 1e-2,
            grad_epsilon: 1e-6,
            amplitude_cap: 0.5,
            harmonics: 5,
            seed: 0,
            steps_per_ns: 40.0,
            polish_iters: 400,
            reference_coupling_ratio: 0.1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::Domain(format!("eta must be positive, got {}", self.eta)));
        }
        if self.max_iters == 0 {
            return Err(Error::Domain("max_iters must be at least 1".into()));
        }
        if !(1e-8..=1e-4).contains(&self.grad_epsilon) {
            return Err(Error::Domain(format!("grad_epsilon {} outside [1e-8, 1e-4]", self.grad_epsilon)));
        }
        if !(self.amplitude_cap >= 0.0) {
            return Err(Error::Domain("amplitude_cap must be non-negative".into()));
        }
        if !(self.step_size > 0.0) || !(self.steps_per_ns > 0.0) {
            return Err(Error::Domain("step_size and steps_per_ns must be positive".into()));
        }
        Ok(())
    }
}

/// Cost and its parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub cost: f64,
    pub fidelity: f64,
    /// Unweighted distance `Σ‖r_μ(T)‖`.
    pub distance: f64,
    pub weighted_distance: f64,
}

/// Everything needed to score a parameter vector.
#[derive(Clone, Debug)]
pub struct CostContext {
    pub target: Operator,
    pub channels: Vec<NoiseChannel>,
    pub grid: TimeGrid,
    pub cap: f64,
    pub t_gate: f64,
    pub harmonics: usize,
}

impl CostContext {
    pub fn new(target: &Operator, t_gate: f64, model: &TwoQubitModel, cfg: &OptimizerConfig) -> Result<Self> {
        if target.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: target.dim() });
        }
        // Weights come from the reference coupling; carriers use the J → 0
        // splitting so that the curves close where the plateau is measured.
        let reference = model.with_coupling(cfg.reference_coupling_ratio * model.dez);
        let mut channels = effective_noise_channels(&reference).to_vec();
        for ch in &mut channels {
            ch.dressed_splitting = model.dez;
        }
        Ok(Self {
            target: target.clone(),
            channels,
            grid: TimeGrid::with_rate(t_gate, cfg.steps_per_ns)?,
            cap: cfg.amplitude_cap,
            t_gate,
            harmonics: cfg.harmonics,
        })
    }

    /// Step 2 of the loop: scale so that the peak equals the cap.
    pub fn rescale(&self, p: &PulseParams) -> PulseParams {
        let peak = max_amplitude(p);
        if peak == 0.0 || self.cap == 0.0 {
            p.scaled(0.0)
        } else {
            p.scaled(self.cap / peak)
        }
    }

    pub fn params(&self, v: &[f64]) -> PulseParams {
        PulseParams::from_vector(self.t_gate, self.harmonics, v)
    }

    pub fn breakdown(&self, v: &[f64]) -> CostBreakdown {
        let p = self.rescale(&self.params(v));
        let geo = x_drive_geometry(&p, &self.channels, self.grid);
        let fidelity = gate_fidelity(&rx_of(geo.angle), &self.target).expect("2x2");
        let norms: Vec<f64> = geo.finals.iter().map(|f| f[0].hypot(f[1])).collect();
        let distance = norms.iter().sum();
        let weighted: f64 = norms.iter().zip(&self.channels).map(|(n, c)| n * c.epsilon).sum();
        CostBreakdown { cost: (1.0 - fidelity) + weighted, fidelity, distance, weighted_distance: weighted }
    }

    pub fn cost(&self, v: &[f64]) -> f64 {
        self.breakdown(v).cost
    }

    /// Smooth residuals: phase-aligned unitary error (real and imaginary
    /// parts) and the weighted final curve components.
    pub fn residuals(&self, v: &[f64]) -> Vec<f64> {
        let p = self.rescale(&self.params(v));
        let geo = x_drive_geometry(&p, &self.channels, self.grid);
        let u = rx_of(geo.angle);
        let overlap: C64 = self.target.0.iter().zip(u.0.iter()).map(|(a, b)| a.conj() * b).sum();
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
        let mut out = Vec::with_capacity(8 + 2 * self.channels.len());
        let diff: Vec<C64> = u.0.iter().zip(self.target.0.iter()).map(|(a, b)| a / phase - b).collect();
        out.extend(diff.iter().map(|z| z.re));
        out.extend(diff.iter().map(|z| z.im));
        for (f, c) in geo.finals.iter().zip(&self.channels) {
            out.push(c.epsilon * f[0]);
            out.push(c.epsilon * f[1]);
        }
        out
    }
}

/// `C = (1 − F) + D_ε` after rescaling to the cap.
pub fn cost(params: &PulseParams, target: &Operator, model: &TwoQubitModel, cfg: &OptimizerConfig) -> Result<CostBreakdown> {
    params.validate()?;
    let mut cfg = cfg.clone();
    cfg.harmonics = params.n();
    let ctx = CostContext::new(target, params.t_gate, model, &cfg)?;
    Ok(ctx.breakdown(&params.to_vector()))
}

/// Central differences of `f` with step `h`, coordinates in parallel.
pub fn central_gradient(f: &(dyn Fn(&[f64]) -> f64 + Sync), v: &[f64], h: f64) -> Vec<f64> {
    (0..v.len())
        .into_par_iter()
        .map(|i| {
            let mut up = v.to_vec();
            let mut dn = v.to_vec();
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

/// Gradient of the cost over `[a_0..a_n, φ_1..φ_n]`.
pub fn gradient(params: &PulseParams, target: &Operator, model: &TwoQubitModel, cfg: &OptimizerConfig) -> Result<Vec<f64>> {
    params.validate()?;
    let mut cfg = cfg.clone();
    cfg.harmonics = params.n();
    let ctx = CostContext::new(target, params.t_gate, model, &cfg)?;
    Ok(central_gradient(&|v| ctx.cost(v), &params.to_vector(), cfg.grad_epsilon))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    /// Rescaled to the amplitude cap.
    pub params: PulseParams,
    pub cost_history: Vec<f64>,
    pub final_cost: f64,
    pub final_fidelity: f64,
    pub final_distance: f64,
    pub final_weighted_distance: f64,
    pub descent_iterations: usize,
    pub polish_iterations: usize,
    pub converged: bool,
}

/// Seeded starting point whose area is close to `angle`.
pub fn initial_params(angle: f64, t_gate: f64, harmonics: usize, seed: u64) -> PulseParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps: Vec<f64> = (0..harmonics).map(|_| rng.gen_range(-0.1..=0.1)).collect();
    let phis: Vec<f64> = (0..harmonics).map(|_| rng.gen_range(-0.1..=0.1)).collect();
    // area = 2T/π·(a0 + Σ a_j cos φ_j / (1 − 4j²))
    let harmonic_part: f64 = amps
        .iter()
        .zip(&phis)
        .enumerate()
        .map(|(j, (a, p))| {
            let j = (j + 1) as f64;
            a * p.cos() / (1.0 - 4.0 * j * j)
        })
        .sum();
    let a0 = angle * std::f64::consts::PI / (2.0 * t_gate) - harmonic_part;
    let mut a = vec![a0];
    a.extend(amps);
    PulseParams { t_gate, a, phi: phis }
}

struct Progress {
    v: Vec<f64>,
    cost: f64,
    history: Vec<f64>,
}

fn descend(ctx: &CostContext, cfg: &OptimizerConfig, state: &mut Progress) -> usize {
    let mut step = cfg.step_size;
    let mut iters = 0;
    while iters < cfg.max_iters && state.cost >= cfg.eta {
        let g = central_gradient(&|v| ctx.cost(v), &state.v, cfg.grad_epsilon);
        let gg: f64 = g.iter().map(|x| x * x).sum();
        if gg == 0.0 || !gg.is_finite() {
            break;
        }
        let mut s = 4.0 * step;
        let mut accepted = None;
        for _ in 0..20 {
            let trial: Vec<f64> = state.v.iter().zip(&g).map(|(v, gi)| v - s * gi).collect();
            let c = ctx.cost(&trial);
            if c <= state.cost - 1e-4 * s * gg {
                accepted = Some((trial, c));
                break;
            }
            s *= 0.5;
        }
        let Some((v, c)) = accepted else { break };
        state.v = v;
        state.cost = c;
        state.history.push(c);
        step = s;
        iters += 1;
    }
    iters
}

fn levenberg_marquardt(ctx: &CostContext, cfg: &OptimizerConfig, state: &mut Progress, iters: usize) -> usize {
    let h = 1e-7;
    let mut lambda = 1e-3;
    let mut done = 0;
    while done < iters && state.cost >= cfg.eta {
        let r0 = DVector::from_vec(ctx.residuals(&state.v));
        let cols: Vec<Vec<f64>> = (0..state.v.len())
            .into_par_iter()
            .map(|i| {
                let mut up = state.v.clone();
                let mut dn = state.v.clone();
                up[i] += h;
                dn[i] -= h;
                let (ru, rd) = (ctx.residuals(&up), ctx.residuals(&dn));
                ru.iter().zip(&rd).map(|(a, b)| (a - b) / (2.0 * h)).collect()
            })
            .collect();
        let jac = DMatrix::from_fn(r0.len(), state.v.len(), |r, c| cols[c][r]);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r0;
        let mut accepted = false;
        while lambda < 1e12 {
            let mut damped = jtj.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
            }
            if let Some(delta) = damped.lu().solve(&(-&g)) {
                let trial: Vec<f64> = state.v.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
                let c = ctx.cost(&trial);
                if c < state.cost {
                    state.v = trial;
                    state.cost = c;
                    state.history.push(c);
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
        done += 1;
    }
    done
}

fn finish(ctx: &CostContext, cfg: &OptimizerConfig, state: Progress, descent: usize, polish: usize) -> SynthesisResult {
    let b = ctx.breakdown(&state.v);
    SynthesisResult {
        params: ctx.rescale(&ctx.params(&state.v)),
        cost_history: state.history,
        final_cost: b.cost,
        final_fidelity: b.fidelity,
        final_distance: b.distance,
        final_weighted_distance: b.weighted_distance,
        descent_iterations: descent,
        polish_iterations: polish,
        converged: b.cost < cfg.eta,
    }
}

/// Runs descent then polish from a seeded start. Non-convergence is reported
/// through `converged`, not as an error.
pub fn synthesize(angle: f64, t_gate: f64, cfg: &OptimizerConfig, model: &TwoQubitModel) -> Result<SynthesisResult> {
    cfg.validate()?;
    if !(t_gate > 0.0) {
        return Err(Error::Domain(format!("gate time must be positive, got {t_gate}")));
    }
    let target = rx_of(angle);
    let ctx = CostContext::new(&target, t_gate, model, cfg)?;
    let v = initial_params(angle, t_gate, cfg.harmonics, cfg.seed).to_vector();
    let cost0 = ctx.cost(&v);
    let mut state = Progress { v, cost: cost0, history: vec![cost0] };
    let descent = descend(&ctx, cfg, &mut state);
    let polish = levenberg_marquardt(&ctx, cfg, &mut state, cfg.polish_iters);
    Ok(finish(&ctx, cfg, state, descent, polish))
}

/// Levenberg–Marquardt refinement of an existing pulse at the configured cap.
pub fn polish(params: &PulseParams, angle: f64, cfg: &OptimizerConfig, model: &TwoQubitModel) -> Result<SynthesisResult> {
    cfg.validate()?;
    params.validate()?;
    let mut cfg = cfg.clone();
    cfg.harmonics = params.n();
    let ctx = CostContext::new(&rx_of(angle), params.t_gate, model, &cfg)?;
    let v = params.to_vector();
    let cost0 = ctx.cost(&v);
    let mut state = Progress { v, cost: cost0, history: vec![cost0] };
    let polish = levenberg_marquardt(&ctx, &cfg, &mut state, cfg.polish_iters);
    Ok(finish(&ctx, &cfg, state, 0, polish))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::{library_pulse, Gate, Waveform};
    use std::f64::consts::PI;

    fn model() -> TwoQubitModel {
        TwoQubitModel::reference(0.02)
    }

    #[test]
    fn zero_pulse_cost_floor() {
        let p = PulseParams::new(50.0, vec![0.0, 0.0], vec![0.0]).unwrap();
        let c = cost(&p, &rx_of(PI), &model(), &OptimizerConfig::default()).unwrap();
        assert!(c.cost >= 2.0 / 3.0);
        assert!((c.fidelity - 1.0 / 3.0).abs() < 1e-12);
        assert!(c.weighted_distance > 0.0);
    }

    #[test]
    fn library_pulse_cost_is_small() {
        let e = library_pulse(Gate::Xpi, 50.0).unwrap();
        let c = cost(&e.params, &rx_of(PI), &model(), &OptimizerConfig::default()).unwrap();
        assert!(c.cost < 0.02, "{c:?}");
    }

    #[test]
    fn gradient_of_quadratic() {
        let f = |v: &[f64]| 3.0 * v[0] * v[0] - 2.0 * v[0] * v[1] + v[1];
        let g = central_gradient(&f, &[0.4, -1.1], 1e-5);
        assert!((g[0] - (6.0 * 0.4 + 2.2)).abs() < 1e-6);
        assert!((g[1] - (-0.8 + 1.0)).abs() < 1e-6);
    }

    #[test]
    fn gradient_is_deterministic() {
        let e = library_pulse(Gate::Xpi, 50.0).unwrap();
        let cfg = OptimizerConfig::default();
        let a = gradient(&e.params, &rx_of(PI), &model(), &cfg).unwrap();
        let b = gradient(&e.params, &rx_of(PI), &model(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infinite_eta_returns_immediately() {
        let cfg = OptimizerConfig { eta: f64::INFINITY, ..Default::default() };
        let r = synthesize(PI, 50.0, &cfg, &model()).unwrap();
        assert!(r.converged);
        assert_eq!(r.cost_history.len(), 1);
    }

    #[test]
    fn zero_cap_is_infeasible() {
        let cfg = OptimizerConfig { amplitude_cap: 0.0, max_iters: 5, polish_iters: 2, ..Default::default() };
        let r = synthesize(2.0 * PI, 50.0, &cfg, &model()).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig { eta: 0.0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { max_iters: 0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { grad_epsilon: 1e-3, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn initial_area_matches_target() {
        let p = initial_params(PI, 50.0, 5, 7);
        assert!((p.area() - PI).abs() < 1e-12);
        assert_eq!(p, initial_params(PI, 50.0, 5, 7));
    }
}
