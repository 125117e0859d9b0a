//! Plain-text writers for traces, profiles and phase-plane tables.
//!
//! Floats are written with 17 significant digits so that a CSV round-trips to
//! the same `f64` values.

use std::io::{self, Write};

use crate::phaseplane::{asymptotic_kappa, Trajectory, WaveResult};
use crate::solver::{State, Trace};

/// Formats with 17 significant digits (`NaN` for missing values).
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_trace_csv<W: Write>(mut w: W, trace: &Trace) -> io::Result<()> {
    writeln!(w, "t,s,dsdt,M")?;
    for p in &trace.samples {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(p.t),
            fmt_f64(p.s),
            fmt_f64(p.dsdt),
            fmt_f64(p.mass)
        )?;
    }
    Ok(())
}

/// Profile on the mapped mesh, with `x = s y`. `length` converts `x` to the
/// caller's units (1 for rescaled output).
pub fn write_profile_csv<W: Write>(
    mut w: W,
    nodes: &[f64],
    state: &State,
    length: f64,
) -> io::Result<()> {
    writeln!(w, "y,x,u")?;
    let s = state.s * length;
    for (y, u) in nodes.iter().zip(&state.u) {
        writeln!(w, "{},{},{}", fmt_f64(*y), fmt_f64(y * s), fmt_f64(*u))?;
    }
    Ok(())
}

pub fn write_wave_table_csv<W: Write>(mut w: W, rows: &[WaveResult]) -> io::Result<()> {
    writeln!(w, "c,v_star,kappa,kappa_asymptotic")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(r.c),
            fmt_f64(r.v_star),
            fmt_f64(r.kappa),
            fmt_f64(asymptotic_kappa(r.c))
        )?;
    }
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    writeln!(w, "z,U,V")?;
    for p in &traj.samples {
        writeln!(w, "{},{},{}", fmt_f64(p.z), fmt_f64(p.u), fmt_f64(p.v))?;
    }
    Ok(())
}
