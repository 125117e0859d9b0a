//! Implicit front-fixing solver for the rescaled Fisher-Stefan problem
//!
//! ```text
//! u_t = u_xx + lambda u (1 - u),   0 < x < s(t)
//! u_x = 0 at x = 0,   u = 0 and ds/dt = -kappa u_x at x = s(t)
//! ```
//!
//! The moving domain is mapped to `y = x / s(t)` in `[0, 1]`, discretised on
//! a graded [`Mesh`](crate::mesh::Mesh) and advanced with backward Euler.
//! Each step is a Newton solve for the nodal values together with the new
//! interface position.

mod discretization;
mod run;
mod tridiag;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

pub use discretization::{step, Discretization};
pub use run::{run, run_with, NewtonStats, RunOptions, RunOutput, Snapshot};

/// Initial density on the unit interval (before any motion, `s = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `alpha` on `[0, 1)`, zero at the interface.
    Step { alpha: f64 },
    /// Linear ramp `2 m0 (1 - y)` with integral `m0`.
    Ramp { m0: f64 },
    /// Values on an arbitrary `[0, 1]` grid, linearly interpolated onto the mesh.
    Tabulated { y: Vec<f64>, u: Vec<f64> },
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialCondition::Step { alpha } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::invalid("ic.alpha", "must lie in (0, 1]"));
                }
            }
            InitialCondition::Ramp { m0 } => {
                if !(*m0 > 0.0 && *m0 <= 0.5) {
                    return Err(Error::invalid("ic.m0", "must lie in (0, 1/2]"));
                }
            }
            InitialCondition::Tabulated { y, u } => {
                if y.len() != u.len() || y.len() < 2 {
                    return Err(Error::invalid(
                        "ic.u",
                        "need matching y and u arrays with at least 2 entries",
                    ));
                }
                if y[0] != 0.0 || y[y.len() - 1] != 1.0 || y.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("ic.y", "must increase strictly from 0 to 1"));
                }
                if u.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::invalid("ic.u", "values must lie in [0, 1]"));
                }
                if u[u.len() - 1] != 0.0 {
                    return Err(Error::invalid("ic.u", "final value must be 0"));
                }
            }
        }
        Ok(())
    }

    /// `M(0) = integral of F over [0, 1]`: exact for step and ramp, trapezoid for tables.
    pub fn initial_mass(&self) -> f64 {
        match self {
            InitialCondition::Step { alpha } => *alpha,
            InitialCondition::Ramp { m0 } => *m0,
            InitialCondition::Tabulated { y, u } => trapezoid(y, u),
        }
    }

    /// Nodal values on `mesh`.
    pub fn sample(&self, mesh: &Mesh) -> Vec<f64> {
        self.sample_nodes(mesh.nodes())
    }

    pub(crate) fn sample_nodes(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let mut u: Vec<f64> = match self {
            InitialCondition::Step { alpha } => vec![*alpha; n],
            InitialCondition::Ramp { m0 } => y.iter().map(|&yi| 2.0 * m0 * (1.0 - yi)).collect(),
            InitialCondition::Tabulated { y: ty, u: tu } => {
                y.iter().map(|&yi| interpolate(ty, tu, yi)).collect()
            }
        };
        u[n - 1] = 0.0;
        u
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v <= x);
    if k == 0 {
        return ys[0];
    }
    if k >= xs.len() {
        return ys[ys.len() - 1];
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (x - x0) / (x1 - x0);
    ys[k - 1] * (1.0 - w) + ys[k] * w
}

pub(crate) fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2)
        .zip(f.windows(2))
        .map(|(xw, fw)| 0.5 * (xw[1] - xw[0]) * (fw[0] + fw[1]))
        .sum()
}

/// Physical parameters of one run, in rescaled units (`s(0) = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub kappa: f64,
    pub lambda: f64,
    pub ic: InitialCondition,
    pub t_end: f64,
    /// Terminate once `|ds/dt|` exceeds this.
    pub blowup_speed_threshold: f64,
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.kappa.is_finite() || self.kappa == 0.0 {
            return Err(Error::invalid("kappa", "must be finite and nonzero"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", "must be >= 0"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("t_end", "must be positive"));
        }
        if self.blowup_speed_threshold.is_nan() || self.blowup_speed_threshold <= 0.0 {
            return Err(Error::invalid("blowup_speed_threshold", "must be positive"));
        }
        self.ic.validate()
    }
}

/// Map between the original variables, where the front starts at `s0`, and
/// the rescaled ones with `s(0) = 1`: `x = s0 x~`, `t = s0^2 t~`, and the
/// growth rate becomes `lambda = s0^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub s0: f64,
}

impl Scaling {
    pub fn new(s0: f64) -> Result<Self> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::invalid("s0", "must be positive"));
        }
        Ok(Self { s0 })
    }

    pub fn lambda(&self) -> f64 {
        self.s0 * self.s0
    }

    pub fn length(&self) -> f64 {
        self.s0
    }

    pub fn time(&self) -> f64 {
        self.s0 * self.s0
    }

    /// Rescaled speed to original speed.
    pub fn speed(&self) -> f64 {
        1.0 / self.s0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepperParams {
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
}

impl StepperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("stepper.dt", "must be positive"));
        }
        if self.newton_tol.is_nan() || self.newton_tol <= 0.0 {
            return Err(Error::invalid("stepper.newton_tol", "must be positive"));
        }
        if self.newton_max_iters < 2 {
            return Err(Error::invalid("stepper.newton_max_iters", "must be >= 2"));
        }
        Ok(())
    }
}

impl Default for StepperParams {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            newton_tol: 1e-10,
            newton_max_iters: 50,
        }
    }
}

/// Nodal solution, interface position and time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub s: f64,
    pub t: f64,
}

/// Lower and upper bound on nodal values before a step is flagged unstable.
pub const DENSITY_BOUNDS: (f64, f64) = (-0.05, 1.05);

pub fn make_initial_state(mesh: &Mesh, ic: &InitialCondition) -> State {
    State {
        u: ic.sample(mesh),
        s: 1.0,
        t: 0.0,
    }
}

/// `M = integral of u over [0, s]`, trapezoid rule on the mapped mesh.
pub fn mass(state: &State, mesh: &Mesh) -> f64 {
    state.s * trapezoid(mesh.nodes(), &state.u)
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TerminationEvent {
    ReachedTEnd { t: f64 },
    SpeedExceeded { t: f64, s: f64, dsdt: f64 },
    InterfaceHitOrigin { t: f64 },
    NewtonFailed { t: f64 },
    InstabilityDetected { t: f64 },
    MassVanished { t: f64, s: f64 },
}

impl TerminationEvent {
    pub fn time(&self) -> f64 {
        match *self {
            TerminationEvent::ReachedTEnd { t }
            | TerminationEvent::SpeedExceeded { t, .. }
            | TerminationEvent::InterfaceHitOrigin { t }
            | TerminationEvent::NewtonFailed { t }
            | TerminationEvent::InstabilityDetected { t }
            | TerminationEvent::MassVanished { t, .. } => t,
        }
    }

    /// Solver breakdown rather than a physical outcome.
    pub fn is_failure(&self) -> bool {
        matches!(
            self,
            TerminationEvent::NewtonFailed { .. } | TerminationEvent::InstabilityDetected { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            TerminationEvent::ReachedTEnd { .. } => "reached_t_end",
            TerminationEvent::SpeedExceeded { .. } => "speed_exceeded",
            TerminationEvent::InterfaceHitOrigin { .. } => "interface_hit_origin",
            TerminationEvent::NewtonFailed { .. } => "newton_failed",
            TerminationEvent::InstabilityDetected { .. } => "instability_detected",
            TerminationEvent::MassVanished { .. } => "mass_vanished",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub s: f64,
    /// Backward difference of `s` over the producing step; NaN for the initial sample.
    pub dsdt: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub samples: Vec<TraceSample>,
    pub termination: TerminationEvent,
}

impl Trace {
    pub fn last(&self) -> Option<&TraceSample> {
        self.samples.last()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|p| p.t)
    }

    /// Rescale lengths and times: `x -> x * length`, `t -> t * time`.
    ///
    /// Converting a rescaled run back to the original variables uses
    /// `length = s0` and `time = s0^2`.
    pub fn rescaled(&self, length: f64, time: f64) -> Trace {
        let speed = length / time;
        let samples = self
            .samples
            .iter()
            .map(|p| TraceSample {
                t: p.t * time,
                s: p.s * length,
                dsdt: p.dsdt * speed,
                mass: p.mass * length,
            })
            .collect();
        let termination = match self.termination {
            TerminationEvent::ReachedTEnd { t } => TerminationEvent::ReachedTEnd { t: t * time },
            TerminationEvent::SpeedExceeded { t, s, dsdt } => TerminationEvent::SpeedExceeded {
                t: t * time,
                s: s * length,
                dsdt: dsdt * speed,
            },
            TerminationEvent::InterfaceHitOrigin { t } => {
                TerminationEvent::InterfaceHitOrigin { t: t * time }
            }
            TerminationEvent::NewtonFailed { t } => TerminationEvent::NewtonFailed { t: t * time },
            TerminationEvent::InstabilityDetected { t } => {
                TerminationEvent::InstabilityDetected { t: t * time }
            }
            TerminationEvent::MassVanished { t, s } => TerminationEvent::MassVanished {
                t: t * time,
                s: s * length,
            },
        };
        Trace {
            samples,
            termination,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, MeshSpec};

    fn default_mesh() -> Mesh {
        build_mesh(&MeshSpec::default()).unwrap()
    }

    #[test]
    fn step_initial_state() {
        let mesh = default_mesh();
        let st = make_initial_state(&mesh, &InitialCondition::Step { alpha: 0.5 });
        assert_eq!(st.s, 1.0);
        assert_eq!(st.t, 0.0);
        let n = st.u.len();
        assert!(st.u[..n - 1].iter().all(|&v| v == 0.5));
        assert_eq!(st.u[n - 1], 0.0);
        let m = mass(&st, &mesh);
        assert!((m - 0.5 * (1.0 - 0.5e-6)).abs() < 1e-12, "{m}");
    }

    #[test]
    fn ramp_initial_state() {
        let mesh = default_mesh();
        let st = make_initial_state(&mesh, &InitialCondition::Ramp { m0: 0.5 });
        for (u, y) in st.u.iter().zip(mesh.nodes()) {
            assert!((u - (1.0 - y)).abs() < 1e-15);
        }
        assert!((mass(&st, &mesh) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_table_has_zero_mass() {
        let mesh = default_mesh();
        let ic = InitialCondition::Tabulated {
            y: vec![0.0, 0.5, 1.0],
            u: vec![0.0; 3],
        };
        ic.validate().unwrap();
        assert_eq!(mass(&make_initial_state(&mesh, &ic), &mesh), 0.0);
        assert_eq!(ic.initial_mass(), 0.0);
    }

    #[test]
    fn mass_of_linear_profile_scales_with_s() {
        let mesh = default_mesh();
        let mut st = make_initial_state(&mesh, &InitialCondition::Ramp { m0: 0.5 });
        st.s = 2.0;
        assert!((mass(&st, &mesh) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mass_matches_refined_simpson_oracle() {
        let mesh = build_mesh(&MeshSpec::new(1001, 1e-5).unwrap()).unwrap();
        let f = |y: f64| (1.0 - y * y) * (1.0 + 0.3 * (3.0 * y).sin());
        let state = State {
            u: mesh.nodes().iter().map(|&y| f(y)).collect(),
            s: 1.3,
            t: 0.0,
        };
        // Composite Simpson on each cell of the piecewise-linear interpolant
        // refined 10x; exact for the interpolant, independent of the trapezoid path.
        let y = mesh.nodes();
        let mut oracle = 0.0;
        for k in 0..y.len() - 1 {
            let (a, b) = (y[k], y[k + 1]);
            let lin = |x: f64| state.u[k] + (state.u[k + 1] - state.u[k]) * (x - a) / (b - a);
            let m = 10;
            let h = (b - a) / m as f64;
            for j in 0..m {
                let x0 = a + j as f64 * h;
                oracle += h / 6.0 * (lin(x0) + 4.0 * lin(x0 + 0.5 * h) + lin(x0 + h));
            }
        }
        oracle *= state.s;
        assert!((mass(&state, &mesh) - oracle).abs() < 1e-6);
        // And against the exact integral of the smooth function.
        let exact = {
            let n = 200_000;
            let h = 1.0 / n as f64;
            (0..n)
                .map(|j| {
                    let x0 = j as f64 * h;
                    h / 6.0 * (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h))
                })
                .sum::<f64>()
                * state.s
        };
        assert!((mass(&state, &mesh) - exact).abs() < 1e-4);
    }

    #[test]
    fn config_validation_names_fields() {
        let mut cfg = ProblemConfig {
            kappa: -0.5,
            lambda: -1.0,
            ic: InitialCondition::Step { alpha: 1.0 },
            t_end: 1.0,
            blowup_speed_threshold: 1e4,
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("lambda"));
        cfg.lambda = 0.0;
        cfg.kappa = 0.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("kappa"));
        cfg.kappa = -0.5;
        cfg.ic = InitialCondition::Ramp { m0: 0.75 };
        assert!(cfg.validate().unwrap_err().to_string().contains("ic.m0"));
    }

    #[test]
    fn rescaling_round_trip() {
        let trace = Trace {
            samples: vec![TraceSample {
                t: 1e-6,
                s: 0.99,
                dsdt: -5000.0,
                mass: 0.4,
            }],
            termination: TerminationEvent::ReachedTEnd { t: 1e-6 },
        };
        let unscaled = trace.rescaled(1000.0, 1e6);
        let p = unscaled.samples[0];
        assert!((p.t - 1.0).abs() < 1e-12);
        assert!((p.s - 990.0).abs() < 1e-9);
        assert!((p.dsdt + 5.0).abs() < 1e-12);
    }
}
