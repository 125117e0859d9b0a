//! Numerical laboratory for the Fisher-Stefan moving boundary problem with a
//! negative leakage coefficient.
//!
//! * [`mesh`]: geometrically graded mesh on the front-fixed domain.
//! * [`solver`]: implicit Newton time stepping of the front-fixed system.
//! * [`phaseplane`]: retreating travelling waves from the saddle at `(1, 0)`.
//! * [`analysis`]: outcome classification, blow-up extrapolation and the
//!   closed-form predictions (extinction position, blow-up scalings).
//! * [`checks`]: the built-in acceptance suite, also behind `fstefan check`.
//! * [`output`]: CSV writers shared by the command-line tool.

pub mod analysis;
pub mod checks;
pub mod error;
pub mod mesh;
pub mod output;
pub mod phaseplane;
pub mod solver;

pub use analysis::{classify, estimate_blowup, Classification, ScalingFit, Verdict};
pub use error::{Error, Result};
pub use mesh::{build_mesh, solve_expansion_ratio, Mesh, MeshSpec};
pub use phaseplane::{
    asymptotic_kappa, asymptotic_profile, c_from_kappa, find_v_star, integrate_from_saddle,
    kappa_from_c, PhasePoint, Trajectory, WaveResult,
};
pub use solver::{
    make_initial_state, mass, run, run_with, step, Discretization, InitialCondition, ProblemConfig,
    RunOptions, RunOutput, Scaling, State, StepperParams, TerminationEvent, Trace, TraceSample,
};
