//! Time-ordered evolution on uniform grids and gate-fidelity metrics.

use crate::error::{Error, Result};
use crate::linalg::{expm_step, Operator, C64};

/// Default temporal resolution for gate simulations.
pub const STEPS_PER_NS: f64 = 40.0;

/// Uniform grid `t_k = k·T/N`, `k = 0..=N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub total: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(total: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Domain("time grid needs at least one step".into()));
        }
        if !(total >= 0.0 && total.is_finite()) {
            return Err(Error::Domain(format!("invalid total time {total}")));
        }
        Ok(Self { total, steps })
    }

    /// Grid with `rate` steps per ns (rounded up, at least one step).
    pub fn with_rate(total: f64, rate: f64) -> Result<Self> {
        Self::new(total, ((total * rate).ceil() as usize).max(1))
    }

    /// Grid at the default resolution.
    pub fn for_duration(total: f64) -> Result<Self> {
        Self::with_rate(total, STEPS_PER_NS)
    }

    pub fn dt(&self) -> f64 {
        self.total / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.total * k as f64 / self.steps as f64
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.node(k)).collect()
    }

    /// Index of the node closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        ((t / self.dt()).round().max(0.0) as usize).min(self.steps)
    }
}

/// Time-dependent operator source.
pub trait Hamiltonian: Sync {
    fn dim(&self) -> usize;
    fn at(&self, t: f64) -> Operator;
}

/// Wraps a closure as a [`Hamiltonian`].
pub struct FnHamiltonian<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64) -> Operator + Sync> Hamiltonian for FnHamiltonian<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn at(&self, t: f64) -> Operator {
        (self.f)(t)
    }
}

/// Time-independent operator.
pub struct Constant(pub Operator);

impl Hamiltonian for Constant {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn at(&self, _t: f64) -> Operator {
        self.0.clone()
    }
}

/// Unitaries at every grid node, starting from the identity.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub unitaries: Vec<Operator>,
}

impl Trajectory {
    pub fn final_unitary(&self) -> &Operator {
        self.unitaries.last().expect("trajectory is never empty")
    }

    pub fn at_node(&self, k: usize) -> &Operator {
        &self.unitaries[k]
    }

    pub fn dim(&self) -> usize {
        self.unitaries[0].dim()
    }

    /// Identity trajectory, handy as a null control.
    pub fn identity(grid: TimeGrid, dim: usize) -> Self {
        Self { grid, unitaries: vec![Operator::identity(dim); grid.steps + 1] }
    }
}

fn checked_sample(h: &dyn Hamiltonian, t: f64) -> Result<Operator> {
    let m = h.at(t);
    let res = m.hermiticity_residual();
    if res > 1e-12 * (1.0 + m.frobenius_norm()) {
        return Err(Error::NotHermitian { residual: res });
    }
    Ok(m)
}

/// Midpoint piecewise-constant propagation, storing every node.
pub fn evolve(h: &dyn Hamiltonian, grid: TimeGrid) -> Result<Trajectory> {
    let dt = grid.dt();
    let mut unitaries = Vec::with_capacity(grid.steps + 1);
    let mut u = Operator::identity(h.dim());
    unitaries.push(u.clone());
    for k in 0..grid.steps {
        let step = expm_step(&checked_sample(h, grid.midpoint(k))?, dt);
        u = &step * &u;
        unitaries.push(u.clone());
    }
    Ok(Trajectory { grid, unitaries })
}

/// Same as [`evolve`] but keeps only the final unitary.
pub fn evolve_final(h: &dyn Hamiltonian, grid: TimeGrid) -> Result<Operator> {
    evolve_range(h, grid, 0, grid.steps, Operator::identity(h.dim()))
}

/// Propagates `start` over grid steps `from..to`.
pub fn evolve_range(h: &dyn Hamiltonian, grid: TimeGrid, from: usize, to: usize, start: Operator) -> Result<Operator> {
    let dt = grid.dt();
    let mut u = start;
    for k in from..to {
        let step = expm_step(&checked_sample(h, grid.midpoint(k))?, dt);
        u = &step * &u;
    }
    Ok(u)
}

/// Average gate fidelity `(|Tr(V†U)|² + d) / (d(d+1))`.
pub fn gate_fidelity(u: &Operator, target: &Operator) -> Result<f64> {
    if u.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), found: u.dim() });
    }
    let d = u.dim() as f64;
    let overlap: C64 = target.0.iter().zip(u.0.iter()).map(|(v, w)| v.conj() * w).sum();
    Ok(((overlap.norm_sqr() + d) / (d * (d + 1.0))).min(1.0))
}

/// `t ↦ U0(t)†·V(t)·U0(t)` with `U0` taken at the nearest stored node.
pub struct InteractionPicture<'a> {
    pub v: &'a dyn Hamiltonian,
    pub traj: &'a Trajectory,
}

impl Hamiltonian for InteractionPicture<'_> {
    fn dim(&self) -> usize {
        self.v.dim()
    }

    fn at(&self, t: f64) -> Operator {
        let u = self.traj.at_node(self.traj.grid.nearest(t));
        self.v.at(t).conjugate_by(u)
    }
}

pub fn interaction_picture<'a>(v: &'a dyn Hamiltonian, traj: &'a Trajectory) -> Result<InteractionPicture<'a>> {
    if v.dim() != traj.dim() {
        return Err(Error::DimensionMismatch { expected: traj.dim(), found: v.dim() });
    }
    Ok(InteractionPicture { v, traj })
}
