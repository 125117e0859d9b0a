use serde::{Deserialize, Serialize};

use super::discretization::Discretization;
use super::{
    ProblemConfig, State, StepperParams, TerminationEvent, Trace, TraceSample,
};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Extinction is declared once both mass and interface speed drop below this.
pub const EXTINCTION_LEVEL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    /// Record every `sample_every`-th step (the final step is always recorded).
    pub sample_every: usize,
    /// Times at which to keep a full profile. Each is taken at the first step
    /// with `t >= time - dt/2`.
    pub snapshot_times: Vec<f64>,
}

impl RunOptions {
    pub fn every(sample_every: usize) -> Self {
        Self {
            sample_every,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Requested time.
    pub requested: f64,
    pub state: State,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NewtonStats {
    pub steps: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    /// Steps that needed the halved-dt retry.
    pub retries: usize,
}

impl NewtonStats {
    pub fn mean_iterations(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total_iterations as f64 / self.steps as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub snapshots: Vec<Snapshot>,
    pub final_state: State,
    pub newton: NewtonStats,
}

/// Runs to termination and returns the sampled trace.
pub fn run(
    cfg: &ProblemConfig,
    mesh: &Mesh,
    params: &StepperParams,
    sample_every: usize,
) -> Result<Trace> {
    let disc = Discretization::new(mesh);
    Ok(run_with(&disc, cfg, params, &RunOptions::every(sample_every))?.trace)
}

enum StepOutcome {
    Done(State, usize),
    Failed(Error),
}

fn advance_with_retry(
    disc: &Discretization,
    state: &State,
    cfg: &ProblemConfig,
    params: &StepperParams,
    speed_hint: Option<f64>,
    stats: &mut NewtonStats,
) -> StepOutcome {
    match disc.advance(state, cfg, params.dt, params, speed_hint) {
        Ok((next, iters)) => StepOutcome::Done(next, iters),
        Err(Error::NewtonFailed { .. }) => {
            stats.retries += 1;
            let half = 0.5 * params.dt;
            let first = match disc.advance(state, cfg, half, params, speed_hint) {
                Ok(v) => v,
                Err(e) => return StepOutcome::Failed(e),
            };
            let hint = (first.0.s - state.s) / half;
            match disc.advance(&first.0, cfg, half, params, Some(hint)) {
                Ok((next, iters)) => StepOutcome::Done(next, first.1 + iters),
                Err(e) => StepOutcome::Failed(e),
            }
        }
        Err(e) => StepOutcome::Failed(e),
    }
}

/// Runs with a prebuilt (possibly perturbed) discretisation.
///
/// Solver breakdowns end the run with a failure [`TerminationEvent`]; only
/// invalid inputs produce an `Err`.
pub fn run_with(
    disc: &Discretization,
    cfg: &ProblemConfig,
    params: &StepperParams,
    opts: &RunOptions,
) -> Result<RunOutput> {
    cfg.validate()?;
    params.validate()?;
    if opts.sample_every == 0 {
        return Err(Error::InvalidParameter {
            field: "output.sample_every".into(),
            reason: "must be >= 1".into(),
        });
    }

    let mut state = State {
        u: cfg.ic.sample_nodes(disc.nodes()),
        s: 1.0,
        t: 0.0,
    };
    let dt = params.dt;
    let n_steps = (cfg.t_end / dt - 1e-9).ceil().max(1.0) as u64;

    let mut snap_times = opts.snapshot_times.clone();
    snap_times.sort_by(f64::total_cmp);
    let mut snap_iter = snap_times.into_iter().peekable();
    let mut snapshots = Vec::new();
    let mut take_snapshots = |state: &State, snapshots: &mut Vec<Snapshot>| {
        while let Some(&ts) = snap_iter.peek() {
            if state.t >= ts - 0.5 * dt {
                snapshots.push(Snapshot {
                    requested: ts,
                    state: state.clone(),
                });
                snap_iter.next();
            } else {
                break;
            }
        }
    };
    take_snapshots(&state, &mut snapshots);

    let mut samples = vec![TraceSample {
        t: 0.0,
        s: state.s,
        dsdt: f64::NAN,
        mass: disc.mass(&state),
    }];
    let mut stats = NewtonStats::default();
    let mut speed: Option<f64> = None;
    let mut termination = TerminationEvent::ReachedTEnd { t: 0.0 };

    for k in 1..=n_steps {
        let t_new = k as f64 * dt;
        let next = match advance_with_retry(disc, &state, cfg, params, speed, &mut stats) {
            StepOutcome::Done(mut next, iters) => {
                next.t = t_new;
                stats.steps += 1;
                stats.total_iterations += iters;
                stats.max_iterations = stats.max_iterations.max(iters);
                next
            }
            StepOutcome::Failed(err) => {
                termination = match err {
                    Error::InstabilityDetected { .. } => {
                        TerminationEvent::InstabilityDetected { t: t_new }
                    }
                    _ => TerminationEvent::NewtonFailed { t: t_new },
                };
                break;
            }
        };

        let dsdt = (next.s - state.s) / dt;
        let m = disc.mass(&next);
        state = next;
        speed = Some(dsdt);
        take_snapshots(&state, &mut snapshots);

        let stop = if dsdt.abs() > cfg.blowup_speed_threshold {
            Some(TerminationEvent::SpeedExceeded {
                t: t_new,
                s: state.s,
                dsdt,
            })
        } else if state.s <= disc.dy_min() {
            Some(TerminationEvent::InterfaceHitOrigin { t: t_new })
        } else if m.abs() < EXTINCTION_LEVEL && dsdt.abs() < EXTINCTION_LEVEL {
            Some(TerminationEvent::MassVanished {
                t: t_new,
                s: state.s,
            })
        } else if k == n_steps {
            Some(TerminationEvent::ReachedTEnd { t: t_new })
        } else {
            None
        };

        if stop.is_some() || k % opts.sample_every as u64 == 0 {
            samples.push(TraceSample {
                t: t_new,
                s: state.s,
                dsdt,
                mass: m,
            });
        }
        if let Some(event) = stop {
            termination = event;
            break;
        }
    }

    Ok(RunOutput {
        trace: Trace {
            samples,
            termination,
        },
        snapshots,
        final_state: state,
        newton: stats,
    })
}
