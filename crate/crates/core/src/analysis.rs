//! Post-processing of solver traces: outcome classification, blow-up
//! extrapolation, scaling fits and the closed-form predictions for the
//! rescaled problem.
//!
//! Every function here expects traces in rescaled units (`s(0) = 1`) unless
//! stated otherwise. Results carrying times or lengths can be mapped back to
//! the original variables with the `rescaled` helpers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{InitialCondition, ProblemConfig, TerminationEvent, Trace, TraceSample};

/// Minimum number of samples in the blow-up regression window.
pub const MIN_BLOWUP_POINTS: usize = 20;
/// Minimum number of samples for a log-log slope.
pub const MIN_SLOPE_POINTS: usize = 10;
/// Relative speed change below which the front is taken to be a travelling wave.
pub const PLATEAU_TOLERANCE: f64 = 1e-4;
/// Fraction of the trace (by sample count) inspected for the plateau.
pub const PLATEAU_FRACTION: f64 = 0.2;

/// `Q = M(0) + 1 / kappa`.
pub fn superheating_q(ic: &InitialCondition, kappa: f64) -> Result<f64> {
    if kappa == 0.0 || !kappa.is_finite() {
        return Err(Error::invalid("kappa", "must be finite and nonzero"));
    }
    Ok(ic.initial_mass() + 1.0 / kappa)
}

/// Final interface position `1 + kappa M(0)` when `lambda = 0` and `Q < 0`.
pub fn predict_extinction_boundary(ic: &InitialCondition, kappa: f64) -> Result<f64> {
    let q = superheating_q(ic, kappa)?;
    if q >= 0.0 {
        return Err(Error::Regime(format!(
            "Q = {q} >= 0: the front does not come to rest (blow-up regime)"
        )));
    }
    Ok(1.0 + kappa * ic.initial_mass())
}

/// Trapezoid integral of `M` over the sampled times.
pub fn mass_time_integral(trace: &Trace) -> f64 {
    trace
        .samples
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].mass + w[1].mass))
        .sum()
}

/// Extinction position including the logistic source in its linearised form:
/// `kappa (Q + lambda * integral of M dt)`.
pub fn skellam_extinction_estimate(
    trace: &Trace,
    ic: &InitialCondition,
    kappa: f64,
    lambda: f64,
) -> Result<f64> {
    if !matches!(trace.termination, TerminationEvent::MassVanished { .. }) {
        return Err(Error::Regime(format!(
            "run ended with {} rather than extinction",
            trace.termination.name()
        )));
    }
    let q = superheating_q(ic, kappa)?;
    Ok(kappa * (q + lambda * mass_time_integral(trace)))
}

/// Largest violation of `s = -kappa (M - Q)` along the trace.
///
/// The identity is exact for `lambda = 0`; for `lambda > 0` the residual grows
/// with time.
pub fn conservation_residual(trace: &Trace, q: f64, kappa: f64) -> f64 {
    trace
        .samples
        .iter()
        .map(|p| (p.s + kappa * (p.mass - q)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
        rms: (sse / nf).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    pub t_c: f64,
    pub s_c: f64,
    /// Time span of the samples used.
    pub window: (f64, f64),
    pub n_points: usize,
    /// Fit of `(ds/dt)^-2` against `t`.
    pub speed_fit: LineFit,
    /// Fit of `s` against `(t_c - t)^(1/2)`.
    pub position_fit: LineFit,
}

impl BlowupEstimate {
    pub fn rescaled(&self, length: f64, time: f64) -> Self {
        Self {
            t_c: self.t_c * time,
            s_c: self.s_c * length,
            window: (self.window.0 * time, self.window.1 * time),
            ..*self
        }
    }
}

/// Index where the terminal window starts: the contiguous run of samples at
/// the end with retreating speed at least a tenth of the final speed.
fn terminal_decade(samples: &[TraceSample]) -> Option<usize> {
    let last = samples.last()?;
    let v_end = -last.dsdt;
    if !(v_end > 0.0 && v_end.is_finite()) {
        return None;
    }
    let mut i = samples.len() - 1;
    while i > 0 {
        let v = -samples[i - 1].dsdt;
        if !(v.is_finite() && v >= 0.1 * v_end) {
            break;
        }
        i -= 1;
    }
    Some(i)
}

/// Extrapolates the blow-up time and position from a trace that ended on the
/// speed threshold.
///
/// Near blow-up `ds/dt ~ -(t_c - t)^(-1/2)`, so `(ds/dt)^-2` is linear in `t`
/// and vanishes at `t_c`. The regression runs over the last decade of speeds;
/// if the fitted `t_c` does not lie beyond the final sample the earliest half
/// of the window is dropped and the fit repeated. `s_c` is the intercept of
/// `s` regressed on `(t_c - t)^(1/2)`.
pub fn estimate_blowup(trace: &Trace) -> Result<BlowupEstimate> {
    if !matches!(trace.termination, TerminationEvent::SpeedExceeded { .. }) {
        return Err(Error::Regime(format!(
            "run ended with {}, not on the speed threshold",
            trace.termination.name()
        )));
    }
    let samples = &trace.samples;
    let mut start = terminal_decade(samples)
        .ok_or_else(|| Error::InsufficientData("final speed is not a finite retreat".into()))?;
    let t_last = samples[samples.len() - 1].t;

    loop {
        let window = &samples[start..];
        if window.len() < MIN_BLOWUP_POINTS {
            return Err(Error::InsufficientData(format!(
                "{} samples in the terminal window, need {MIN_BLOWUP_POINTS}",
                window.len()
            )));
        }
        let t: Vec<f64> = window.iter().map(|p| p.t).collect();
        let w: Vec<f64> = window.iter().map(|p| p.dsdt.powi(-2)).collect();
        let speed_fit = fit_line(&t, &w)
            .ok_or_else(|| Error::InsufficientData("degenerate time window".into()))?;
        if speed_fit.slope >= 0.0 {
            return Err(Error::InsufficientData(
                "speed is not growing over the terminal window".into(),
            ));
        }
        let t_c = -speed_fit.intercept / speed_fit.slope;
        if t_c > t_last {
            let root: Vec<f64> = t.iter().map(|ti| (t_c - ti).sqrt()).collect();
            let s: Vec<f64> = window.iter().map(|p| p.s).collect();
            let position_fit = fit_line(&root, &s)
                .ok_or_else(|| Error::InsufficientData("degenerate position window".into()))?;
            return Ok(BlowupEstimate {
                t_c,
                s_c: position_fit.intercept,
                window: (t[0], t_last),
                n_points: window.len(),
                speed_fit,
                position_fit,
            });
        }
        if window.len() / 2 < MIN_BLOWUP_POINTS {
            return Err(Error::InsufficientData(format!(
                "extrapolated t_c = {t_c} does not exceed the last sample t = {t_last}"
            )));
        }
        start += window.len() / 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingQuantity {
    /// `ln(-ds/dt)` against `ln(t_c - t)`.
    Speed,
    /// `ln(s - s_c)` against `ln(t_c - t)`.
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub quantity: ScalingQuantity,
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
}

/// Log-log slope over the blow-up estimate's window.
pub fn fit_loglog_slope(
    trace: &Trace,
    blowup: &BlowupEstimate,
    quantity: ScalingQuantity,
) -> Result<ScalingFit> {
    let (t_lo, t_hi) = blowup.window;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for p in &trace.samples {
        if p.t < t_lo || p.t > t_hi || p.t >= blowup.t_c {
            continue;
        }
        let value = match quantity {
            ScalingQuantity::Speed => -p.dsdt,
            ScalingQuantity::Position => p.s - blowup.s_c,
        };
        if value > 0.0 && value.is_finite() {
            x.push((blowup.t_c - p.t).ln());
            y.push(value.ln());
        }
    }
    if x.len() < MIN_SLOPE_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable samples for the {quantity:?} slope, need {MIN_SLOPE_POINTS}",
            x.len()
        )));
    }
    let fit = fit_line(&x, &y).ok_or_else(|| Error::InsufficientData("degenerate window".into()))?;
    Ok(ScalingFit {
        quantity,
        slope: fit.slope,
        intercept: fit.intercept,
        window: (t_lo, t_hi),
        r_squared: fit.r_squared,
        n_points: x.len(),
    })
}

/// `s ~ s_c + 2 (t_c - t)^(1/2) (ln(-ln(t_c - t)))^(1/2)`, valid for
/// `0 < t_c - t < 1/e`.
pub fn blowup_scaling_law(t: f64, t_c: f64, s_c: f64) -> Result<f64> {
    let tau = t_c - t;
    if !(tau > 0.0 && tau <= (-1.0f64).exp()) {
        return Err(Error::Regime(format!(
            "t_c - t = {tau} outside (0, 1/e]"
        )));
    }
    let inner = (-tau.ln()).ln().max(0.0);
    Ok(s_c + 2.0 * tau.sqrt() * inner.sqrt())
}

/// Limiting density profile at blow-up,
/// `u ~ -(1/kappa) (1 + 1 / (2 ln(-ln(s_c - x))))`, for `0 < s_c - x < 1/e`.
pub fn blowup_profile(x: f64, s_c: f64, kappa: f64) -> Result<f64> {
    let d = s_c - x;
    if !(d > 0.0 && d < (-1.0f64).exp()) {
        return Err(Error::Regime(format!("s_c - x = {d} outside (0, 1/e)")));
    }
    if kappa == 0.0 {
        return Err(Error::invalid("kappa", "must be nonzero"));
    }
    Ok(-(1.0 + 0.5 / (-d.ln()).ln()) / kappa)
}

/// Crude profile just before blow-up, `u ~ 1 - exp(-s_dot (x - s))`.
pub fn near_blowup_wave_profile(x: f64, s: f64, s_dot: f64) -> Result<f64> {
    if s_dot.is_nan() || s_dot >= 0.0 {
        return Err(Error::Regime("requires a retreating front (s_dot < 0)".into()));
    }
    if x > s {
        return Err(Error::Regime(format!("x = {x} lies beyond the front s = {s}")));
    }
    Ok(1.0 - (-s_dot * (x - s)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    TravellingWave { speed: f64 },
    FiniteTimeBlowup { t_c: f64, s_c: f64 },
    Extinction { s_e: f64 },
    CompleteMelting { t_e: f64 },
    Undetermined,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::TravellingWave { .. } => "travelling_wave",
            Verdict::FiniteTimeBlowup { .. } => "finite_time_blowup",
            Verdict::Extinction { .. } => "extinction",
            Verdict::CompleteMelting { .. } => "complete_melting",
            Verdict::Undetermined => "undetermined",
        }
    }

    pub fn rescaled(&self, length: f64, time: f64) -> Self {
        match *self {
            Verdict::TravellingWave { speed } => Verdict::TravellingWave {
                speed: speed * length / time,
            },
            Verdict::FiniteTimeBlowup { t_c, s_c } => Verdict::FiniteTimeBlowup {
                t_c: t_c * time,
                s_c: s_c * length,
            },
            Verdict::Extinction { s_e } => Verdict::Extinction { s_e: s_e * length },
            Verdict::CompleteMelting { t_e } => Verdict::CompleteMelting { t_e: t_e * time },
            Verdict::Undetermined => Verdict::Undetermined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Diagnostics {
    pub termination: String,
    /// Superheating parameter of the run's initial condition.
    pub q: f64,
    pub q_negative: bool,
    /// `lambda (t_c - t)` at the start of the blow-up window; the near-blow-up
    /// asymptotics need this to be small.
    pub lambda_time_to_blowup: Option<f64>,
    pub blowup: Option<BlowupEstimate>,
    pub speed_slope: Option<ScalingFit>,
    pub position_slope: Option<ScalingFit>,
    /// Relative change of `ds/dt` over the plateau window.
    pub plateau_change: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    #[serde(flatten)]
    pub verdict: Verdict,
    pub diagnostics: Diagnostics,
}

impl Classification {
    /// Maps times and lengths back to the original variables.
    pub fn rescaled(&self, length: f64, time: f64) -> Self {
        let mut diagnostics = self.diagnostics.clone();
        diagnostics.blowup = diagnostics.blowup.map(|b| b.rescaled(length, time));
        for fit in [&mut diagnostics.speed_slope, &mut diagnostics.position_slope]
            .into_iter()
            .flatten()
        {
            fit.window = (fit.window.0 * time, fit.window.1 * time);
        }
        Self {
            verdict: self.verdict.rescaled(length, time),
            diagnostics,
        }
    }
}

/// Relative change of `ds/dt` across the final fraction of the samples.
fn plateau_change(samples: &[TraceSample]) -> Option<(f64, f64)> {
    let usable: Vec<&TraceSample> = samples.iter().filter(|p| p.dsdt.is_finite()).collect();
    let n = usable.len();
    let k = ((n as f64) * PLATEAU_FRACTION).ceil() as usize;
    if k < 2 {
        return None;
    }
    let window = &usable[n - k..];
    let last = window[k - 1].dsdt;
    if last == 0.0 {
        return None;
    }
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.dsdt), hi.max(p.dsdt))
        });
    Some(((hi - lo) / last.abs(), last))
}

/// Reduces a finished run to a single verdict. Never fails: anything that
/// cannot be decided is [`Verdict::Undetermined`] with a note saying why.
pub fn classify(trace: &Trace, cfg: &ProblemConfig) -> Classification {
    let q = cfg.ic.initial_mass() + 1.0 / cfg.kappa;
    let mut diag = Diagnostics {
        termination: trace.termination.name().to_string(),
        q,
        q_negative: q < 0.0,
        ..Diagnostics::default()
    };

    let verdict = match trace.termination {
        TerminationEvent::SpeedExceeded { .. } => match estimate_blowup(trace) {
            Ok(est) => {
                diag.lambda_time_to_blowup = Some(cfg.lambda * (est.t_c - est.window.0));
                diag.speed_slope = fit_loglog_slope(trace, &est, ScalingQuantity::Speed).ok();
                diag.position_slope =
                    fit_loglog_slope(trace, &est, ScalingQuantity::Position).ok();
                diag.blowup = Some(est);
                Verdict::FiniteTimeBlowup {
                    t_c: est.t_c,
                    s_c: est.s_c,
                }
            }
            Err(e) => {
                diag.notes.push(format!("blow-up extrapolation failed: {e}"));
                Verdict::Undetermined
            }
        },
        TerminationEvent::MassVanished { s, .. } => Verdict::Extinction { s_e: s },
        TerminationEvent::InterfaceHitOrigin { t } => Verdict::CompleteMelting { t_e: t },
        TerminationEvent::ReachedTEnd { .. } => match plateau_change(&trace.samples) {
            Some((change, speed)) => {
                diag.plateau_change = Some(change);
                if change < PLATEAU_TOLERANCE && speed < 0.0 {
                    Verdict::TravellingWave { speed }
                } else {
                    diag.notes
                        .push("interface speed has not settled; run longer".to_string());
                    Verdict::Undetermined
                }
            }
            None => {
                diag.notes.push("too few samples to judge a plateau".to_string());
                Verdict::Undetermined
            }
        },
        TerminationEvent::NewtonFailed { .. } | TerminationEvent::InstabilityDetected { .. } => {
            diag.notes
                .push(format!("solver stopped with {}", trace.termination.name()));
            Verdict::Undetermined
        }
    };
    Classification {
        verdict,
        diagnostics: diag,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64, s: f64, dsdt: f64, mass: f64) -> TraceSample {
        TraceSample { t, s, dsdt, mass }
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.5];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 2.0]).is_none());
    }

    #[test]
    fn plateau_detection() {
        let flat: Vec<TraceSample> = (0..50)
            .map(|k| sample(k as f64, 1.0 - 0.5 * k as f64, -0.5, 1.0))
            .collect();
        let (change, speed) = plateau_change(&flat).unwrap();
        assert_eq!(change, 0.0);
        assert_eq!(speed, -0.5);
        let accel: Vec<TraceSample> = (0..50)
            .map(|k| sample(k as f64, 1.0, -0.5 - 0.01 * k as f64, 1.0))
            .collect();
        assert!(plateau_change(&accel).unwrap().0 > 1e-3);
    }

    #[test]
    fn terminal_decade_skips_initial_transient() {
        let mut samples = vec![sample(0.0, 1.0, f64::NAN, 1.0), sample(0.1, 0.9, -50.0, 1.0)];
        samples.push(sample(0.2, 0.9, -1.0, 1.0));
        for k in 0..5 {
            samples.push(sample(0.3 + 0.1 * k as f64, 0.9, -10.0 * (k + 1) as f64, 1.0));
        }
        // last speed 50, window keeps speeds >= 5 from the tail backwards
        assert_eq!(terminal_decade(&samples), Some(3));
    }
}
