//! `phaseplane` and `check`.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Result};
use fisher_stefan::checks::{run_selected, CheckOptions, CRITERIA};
use fisher_stefan::output::{write_trajectory_csv, write_wave_table_csv};
use fisher_stefan::phaseplane::{
    default_dz, integrate_from_saddle, v_star, DEFAULT_LAUNCH_OFFSET,
};
use fisher_stefan::{asymptotic_kappa, WaveResult};
use rayon::prelude::*;
use serde_json::json;

use crate::outdir::{write_atomic, Bundle};

pub struct PhaseArgs<'a> {
    pub c: &'a [f64],
    pub dz: Option<f64>,
    pub trajectories: bool,
}

pub fn phaseplane(args: &PhaseArgs, root: &Path) -> Result<u8> {
    let started = Instant::now();
    if args.c.is_empty() {
        bail!("invalid `--c`: the grid is empty");
    }
    if let Some(c) = args.c.iter().find(|c| !(**c < 0.0 && c.is_finite())) {
        bail!("invalid `--c`: {c} is not a negative wave speed");
    }

    let rows: Vec<(WaveResult, Option<Vec<u8>>)> = args
        .c
        .par_iter()
        .map(|&c| {
            let dz = args.dz.unwrap_or_else(|| default_dz(c));
            let vs = v_star(c, dz, DEFAULT_LAUNCH_OFFSET)?;
            let traj = if args.trajectories {
                let mut csv = Vec::new();
                write_trajectory_csv(&mut csv, &integrate_from_saddle(c, dz, DEFAULT_LAUNCH_OFFSET)?)?;
                Some(csv)
            } else {
                None
            };
            let wave = WaveResult {
                c,
                v_star: vs,
                kappa: -c / vs,
            };
            Ok((wave, traj))
        })
        .collect::<Result<_>>()?;

    let waves: Vec<WaveResult> = rows.iter().map(|(w, _)| *w).collect();
    let mut table = Vec::new();
    write_wave_table_csv(&mut table, &waves)?;

    let mut bundle = Bundle::default();
    bundle.add("waves.csv", table);
    for (wave, traj) in rows {
        if let Some(csv) = traj {
            bundle.add(format!("trajectory_c{}.csv", wave.c), csv);
        }
    }
    bundle.seal(
        &json!({"c": args.c, "dz": args.dz, "trajectories": args.trajectories}),
        started.elapsed(),
    )?;
    let dir = root.join("phaseplane");
    bundle.write_to(&dir)?;

    println!("{:>12} {:>12} {:>10} {:>10}", "c", "v_star", "kappa", "kappa_asy");
    for w in &waves {
        println!(
            "{:>12.6} {:>12.6} {:>10.6} {:>10.6}",
            w.c,
            w.v_star,
            w.kappa,
            asymptotic_kappa(w.c)
        );
    }
    println!("{}", dir.join("waves.csv").display());
    Ok(0)
}

pub struct CheckArgs<'a> {
    pub only: &'a [u32],
    pub json: Option<&'a Path>,
    pub mutate: Option<f64>,
}

pub fn check(args: &CheckArgs) -> Result<u8> {
    if let Some(bad) = args.only.iter().find(|id| !CRITERIA.contains(id)) {
        bail!("invalid `--only`: no criterion {bad}");
    }
    if let Some(f) = args.mutate {
        if !(f.is_finite() && f > 0.0) {
            bail!("invalid `--mutate`: factor must be positive");
        }
    }
    let ids = if args.only.is_empty() {
        &CRITERIA[..]
    } else {
        args.only
    };
    let report = run_selected(
        ids,
        &CheckOptions {
            stencil_perturbation: args.mutate,
        },
    );
    for r in &report.results {
        println!("{}", r.line());
        for d in &r.details {
            println!("      {d}");
        }
    }
    println!("{} passed, {} failed", report.passed, report.failed);

    if let Some(path) = args.json {
        let mut bytes = serde_json::to_vec_pretty(&report)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)?;
    }
    Ok(if report.all_passed() { 0 } else { 1 })
}
