//! Retreating travelling waves in the phase plane.
//!
//! A wave `u = U(z)`, `z = x - c t`, with `c < 0` satisfies
//!
//! ```text
//! U' = V,   V' = -c V - U (1 - U)
//! ```
//!
//! with `U -> 1` behind the front. The relevant orbit leaves the saddle at
//! `(1, 0)` into the fourth quadrant (`U` decreasing, `V <= 0`) and is cut off
//! where it meets the `V`-axis at `V*`. The Stefan condition then fixes the
//! leakage coefficient as `kappa = -c / V*`.
//!
//! Integration runs forward in `z` along the unstable eigenvector of the
//! saddle with Heun's method at a constant step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DZ: f64 = 1e-4;
pub const DEFAULT_LAUNCH_OFFSET: f64 = 1e-6;
pub const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub z: f64,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Samples from the launch point (`z = 0`) to the first one with `U <= 0`.
    pub samples: Vec<PhasePoint>,
    pub c: f64,
    pub launch_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveResult {
    pub c: f64,
    pub v_star: f64,
    pub kappa: f64,
}

/// Positive eigenvalue of the saddle linearisation.
fn unstable_eigenvalue(c: f64) -> f64 {
    0.5 * (-c + (c * c + 4.0).sqrt())
}

fn rhs(c: f64, u: f64, v: f64) -> (f64, f64) {
    (v, -c * v - u * (1.0 - u))
}

fn check_inputs(c: f64, dz: f64, launch_offset: f64) -> Result<()> {
    if !(c < 0.0 && c.is_finite()) {
        return Err(Error::invalid("c", "wave speed must be negative and finite"));
    }
    if !(dz > 0.0 && dz <= 1e-3) {
        return Err(Error::invalid("dz", "must lie in (0, 1e-3]"));
    }
    if !(launch_offset > 0.0 && launch_offset <= 1e-4) {
        return Err(Error::invalid("launch_offset", "must lie in (0, 1e-4]"));
    }
    Ok(())
}

/// Drives the Heun integration, handing every accepted point to `visit`.
/// Returns the last two points (the bracketing pair for the crossing).
fn shoot(
    c: f64,
    dz: f64,
    launch_offset: f64,
    mut visit: impl FnMut(PhasePoint),
) -> Result<(PhasePoint, PhasePoint)> {
    let mu = unstable_eigenvalue(c);
    let norm = (1.0 + mu * mu).sqrt();
    let mut p = PhasePoint {
        z: 0.0,
        u: 1.0 - launch_offset / norm,
        v: -launch_offset * mu / norm,
    };
    visit(p);
    for k in 1..=MAX_STEPS {
        let (du1, dv1) = rhs(c, p.u, p.v);
        let (up, vp) = (p.u + dz * du1, p.v + dz * dv1);
        let (du2, dv2) = rhs(c, up, vp);
        let next = PhasePoint {
            z: k as f64 * dz,
            u: p.u + 0.5 * dz * (du1 + du2),
            v: p.v + 0.5 * dz * (dv1 + dv2),
        };
        if !(next.u.is_finite() && next.v.is_finite()) {
            break;
        }
        visit(next);
        if next.u <= 0.0 {
            return Ok((p, next));
        }
        p = next;
    }
    Err(Error::NoCrossing { steps: MAX_STEPS })
}

pub fn integrate_from_saddle(c: f64, dz: f64, launch_offset: f64) -> Result<Trajectory> {
    check_inputs(c, dz, launch_offset)?;
    let mut samples = Vec::new();
    shoot(c, dz, launch_offset, |p| samples.push(p))?;
    Ok(Trajectory {
        samples,
        c,
        launch_offset,
    })
}

/// Lands exactly on `U = 0` with a shortened Heun step from `a`, the last
/// sample with `U > 0`; `b` is the full-step sample beyond the axis.
///
/// Over a fractional step `h` the Heun update for `U` is the quadratic
/// `U + h V + h^2 F / 2` (with `F = V'` at `a`), so the landing step is a
/// root in `(0, dz]`. Linear interpolation between `a` and `b` is the fallback
/// should no such root exist. The partial step keeps the crossing error a
/// smooth function of `dz`, so Richardson-style comparisons behave.
fn crossing(c: f64, a: &PhasePoint, b: &PhasePoint) -> PhasePoint {
    let dz = b.z - a.z;
    let (_, f) = rhs(c, a.u, a.v);
    let h = landing_step(a.u, a.v, f, dz).unwrap_or_else(|| dz * a.u / (a.u - b.u));
    let (du1, dv1) = rhs(c, a.u, a.v);
    let (_, dv2) = rhs(c, a.u + h * du1, a.v + h * dv1);
    PhasePoint {
        z: a.z + h,
        u: 0.0,
        v: a.v + 0.5 * h * (dv1 + dv2),
    }
}

fn landing_step(u: f64, v: f64, f: f64, dz: f64) -> Option<f64> {
    // 0.5 f h^2 + v h + u = 0, written to avoid cancellation
    let disc = v * v - 2.0 * f * u;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (v - disc.sqrt()); // v < 0 so this is the large-magnitude root term
    let roots = [q / (0.5 * f), u / q];
    roots
        .into_iter()
        .filter(|h| h.is_finite() && *h > 0.0 && *h <= dz * (1.0 + 1e-12))
        .reduce(f64::min)
}

/// The point where the trajectory meets `U = 0`.
pub fn find_crossing(traj: &Trajectory) -> Result<PhasePoint> {
    let steps = traj.samples.len();
    let k = traj
        .samples
        .iter()
        .position(|p| p.u <= 0.0)
        .ok_or(Error::NoCrossing { steps })?;
    if k == 0 {
        return Err(Error::NoCrossing { steps });
    }
    Ok(crossing(traj.c, &traj.samples[k - 1], &traj.samples[k]))
}

pub fn find_v_star(traj: &Trajectory) -> Result<f64> {
    find_crossing(traj).map(|p| p.v)
}

/// Step used by [`kappa_from_c`]: the default, shrunk for fast waves so that
/// `|c| dz` stays small.
pub fn default_dz(c: f64) -> f64 {
    DEFAULT_DZ.min(1e-2 / c.abs())
}

/// `V*` without storing the trajectory.
pub fn v_star(c: f64, dz: f64, launch_offset: f64) -> Result<f64> {
    check_inputs(c, dz, launch_offset)?;
    let (a, b) = shoot(c, dz, launch_offset, |_| {})?;
    Ok(crossing(c, &a, &b).v)
}

pub fn kappa_from_c(c: f64) -> Result<WaveResult> {
    let v_star = v_star(c, default_dz(c), DEFAULT_LAUNCH_OFFSET)?;
    Ok(WaveResult {
        c,
        v_star,
        kappa: -c / v_star,
    })
}

/// Inverts [`kappa_from_c`] by bisection in `ln|c|`.
///
/// The search starts on `[-1e4, -1e-4]` and widens by decades (down to
/// `-1e-8` and up to `-1e8`) when `kappa` falls outside. A midpoint whose
/// `kappa` leaves the current bracket means the map is not monotone there,
/// which is reported as [`Error::NotBracketed`].
pub fn c_from_kappa(kappa: f64, tol: f64) -> Result<f64> {
    if !(kappa > -1.0 && kappa < 0.0) {
        return Err(Error::invalid("kappa", "must lie in (-1, 0)"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let k_of = |ln_abs_c: f64| kappa_from_c(-ln_abs_c.exp()).map(|w| w.kappa);

    // kappa decreases towards -1 as |c| grows
    let (mut lo, mut hi) = (1e-4f64.ln(), 1e4f64.ln());
    let mut k_lo = k_of(lo)?;
    let mut k_hi = k_of(hi)?;
    let not_bracketed = |lo: f64, hi: f64| Error::NotBracketed {
        kappa,
        c_lo: -hi.exp(),
        c_hi: -lo.exp(),
    };
    while k_lo < kappa {
        if lo <= 1e-8f64.ln() {
            return Err(not_bracketed(lo, hi));
        }
        hi = lo;
        k_hi = k_lo;
        lo -= std::f64::consts::LN_10;
        k_lo = k_of(lo)?;
    }
    while k_hi > kappa {
        if hi >= 1e8f64.ln() {
            return Err(not_bracketed(lo, hi));
        }
        lo = hi;
        k_lo = k_hi;
        hi += std::f64::consts::LN_10;
        k_hi = k_of(hi)?;
    }

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let k_mid = k_of(mid)?;
        if !(k_hi <= k_mid && k_mid <= k_lo) {
            return Err(not_bracketed(lo, hi));
        }
        if (k_mid - kappa).abs() < tol {
            return Ok(-mid.exp());
        }
        if k_mid > kappa {
            lo = mid;
            k_lo = k_mid;
        } else {
            hi = mid;
            k_hi = k_mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (k_of(mid)? - kappa).abs() < tol {
        Ok(-mid.exp())
    } else {
        Err(not_bracketed(lo, hi))
    }
}

/// Large-speed limit `kappa ~ -1 + 1 / (2 c^2)`.
pub fn asymptotic_kappa(c: f64) -> f64 {
    -1.0 + 1.0 / (2.0 * c * c)
}

/// Large-speed approximation of the wave profile, with the front at `z = 0`
/// and the bulk at `z < 0`.
pub fn asymptotic_profile(c: f64, z: f64) -> f64 {
    let e = (-c * z).exp();
    1.0 - e + e * (2.0 * c * z - 1.0 + e) / (2.0 * c * c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn launch_point_lies_on_unstable_direction() {
        let traj = integrate_from_saddle(-2.0, 1e-4, 1e-6).unwrap();
        let p = traj.samples[0];
        let mu = unstable_eigenvalue(-2.0);
        assert!(((1.0 - p.u).hypot(p.v) - 1e-6).abs() < 1e-15);
        assert!((p.v / (p.u - 1.0) - mu).abs() < 1e-6);
        // eigenvalue equation of [[0, 1], [1, -c]]
        assert!((mu * mu - 2.0 * mu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(integrate_from_saddle(0.5, 1e-4, 1e-6).is_err());
        assert!(integrate_from_saddle(-1.0, 1e-2, 1e-6).is_err());
        assert!(integrate_from_saddle(-1.0, 1e-4, 1e-3).is_err());
        assert!(c_from_kappa(-1.5, 1e-6).is_err());
        assert!(c_from_kappa(0.2, 1e-6).is_err());
    }

    #[test]
    fn crossing_lands_between_bracketing_samples() {
        let traj = integrate_from_saddle(-1.0, 1e-3, 1e-6).unwrap();
        let n = traj.samples.len();
        let (a, b) = (traj.samples[n - 2], traj.samples[n - 1]);
        let p = find_crossing(&traj).unwrap();
        assert!(a.z < p.z && p.z <= b.z);
        assert!(b.v.min(a.v) <= p.v && p.v <= b.v.max(a.v));
        // close to the chord through the two samples
        let w = a.u / (a.u - b.u);
        assert!((p.v - (a.v + w * (b.v - a.v))).abs() < 1e-6);

        let short = Trajectory {
            samples: traj.samples[..1].to_vec(),
            ..traj
        };
        assert!(matches!(find_v_star(&short), Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn landing_step_solves_the_quadratic() {
        let (u, v, f) = (0.01, -2.0, 0.7);
        let h = landing_step(u, v, f, 0.1).unwrap();
        assert!((u + h * v + 0.5 * f * h * h).abs() < 1e-17);
        assert!(landing_step(u, v, f, 1e-4).is_none());
    }

    #[test]
    fn asymptotic_formulas() {
        assert_eq!(asymptotic_kappa(-1.0), -0.5);
        assert!((asymptotic_kappa(-10.0) + 0.995).abs() < 1e-15);
        assert!((asymptotic_kappa(-5.0) + 0.98).abs() < 1e-15);
        for c in [-0.3, -5.0, -40.0] {
            assert_eq!(asymptotic_profile(c, 0.0), 0.0);
        }
        // c = -5, z = -0.2: e^{-cz} = e^{-1}, bracket = 2 - 1 + e^{-1}
        let e = (-1.0f64).exp();
        let want = 1.0 - e + e * (1.0 + e) / 50.0;
        assert!((asymptotic_profile(-5.0, -0.2) - want).abs() < 1e-15);
        assert!((want - 0.642_185).abs() < 1e-6);
    }
}
