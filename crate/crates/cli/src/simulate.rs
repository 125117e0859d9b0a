//! `simulate` and `sweep`.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use fisher_stefan::output::{fmt_f64, write_profile_csv, write_trace_csv};
use fisher_stefan::solver::NewtonStats;
use fisher_stefan::{
    build_mesh, classify, run_with, Classification, Discretization, TerminationEvent, Verdict,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{self, RunConfig};
use crate::outdir::{Bundle, VERSION};

/// Outcome of one run, in the units the config was written in.
pub struct RunRecord {
    pub bundle: Bundle,
    pub termination: TerminationEvent,
    pub verdict: Verdict,
}

impl RunRecord {
    pub fn exit_code(&self) -> u8 {
        if self.termination.is_failure() {
            2
        } else {
            0
        }
    }
}

#[derive(Serialize)]
struct FinalState {
    t: f64,
    s: f64,
    mass: f64,
}

#[derive(Serialize)]
struct NewtonSummary {
    #[serde(flatten)]
    stats: NewtonStats,
    mean_iterations: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    tool: &'static str,
    version: &'static str,
    /// `original` when the config set `s0`, else `rescaled`.
    units: &'static str,
    config: &'a RunConfig,
    termination: TerminationEvent,
    #[serde(rename = "final")]
    final_state: FinalState,
    newton: NewtonSummary,
    classification: &'a Classification,
    profiles: Vec<String>,
}

fn profile_name(t: f64) -> String {
    format!("profile_t{t}.csv")
}

/// Runs one config and renders every output file, without writing anything.
pub fn execute(cfg: &RunConfig) -> Result<RunRecord> {
    let started = Instant::now();
    let resolved = cfg.resolve()?;
    let mesh = build_mesh(&resolved.mesh)?;
    let disc = Discretization::new(&mesh);
    let out = run_with(&disc, &resolved.problem, &resolved.stepper, &resolved.options)?;
    let (length, time) = resolved.units();

    let classification = classify(&out.trace, &resolved.problem).rescaled(length, time);
    let trace = out.trace.rescaled(length, time);

    let mut bundle = Bundle::default();
    let mut csv = Vec::new();
    write_trace_csv(&mut csv, &trace)?;
    bundle.add("trace.csv", csv);

    let mut profiles = Vec::new();
    for snap in &out.snapshots {
        // Name the file after the time as the user wrote it, not the
        // round-tripped rescaled value.
        let requested = cfg
            .output
            .snapshot_times
            .iter()
            .copied()
            .find(|t| t / time == snap.requested)
            .unwrap_or(snap.requested * time);
        let name = profile_name(requested);
        if profiles.contains(&name) {
            continue;
        }
        let mut csv = Vec::new();
        write_profile_csv(&mut csv, disc.nodes(), &snap.state, length)?;
        bundle.add(name.clone(), csv);
        profiles.push(name);
    }
    let mut csv = Vec::new();
    write_profile_csv(&mut csv, disc.nodes(), &out.final_state, length)?;
    bundle.add("profile_final.csv", csv);
    profiles.push("profile_final.csv".to_string());

    let last = trace.last().copied().context("run produced no samples")?;
    let summary = Summary {
        tool: "fstefan",
        version: VERSION,
        units: if resolved.scaling.is_some() {
            "original"
        } else {
            "rescaled"
        },
        config: cfg,
        termination: trace.termination,
        final_state: FinalState {
            t: last.t,
            s: last.s,
            mass: last.mass,
        },
        newton: NewtonSummary {
            stats: out.newton,
            mean_iterations: out.newton.mean_iterations(),
        },
        classification: &classification,
        profiles,
    };
    bundle.add_json("summary.json", &summary)?;
    bundle.seal(&serde_json::to_value(cfg)?, started.elapsed())?;

    Ok(RunRecord {
        bundle,
        termination: trace.termination,
        verdict: classification.verdict,
    })
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .with_context(|| format!("cannot derive an output name from {}", path.display()))
}

pub fn simulate(config_path: &Path, root: &Path) -> Result<u8> {
    let cfg = config::load(config_path)?;
    let record = execute(&cfg)?;
    let dir = root.join(stem(config_path)?);
    record.bundle.write_to(&dir)?;
    println!(
        "{}: {} ({})",
        dir.display(),
        describe(&record.verdict),
        record.termination.name()
    );
    Ok(record.exit_code())
}

fn describe(v: &Verdict) -> String {
    match *v {
        Verdict::TravellingWave { speed } => format!("travelling wave, speed {speed:.6}"),
        Verdict::FiniteTimeBlowup { t_c, s_c } => {
            format!("finite-time blow-up, t_c {t_c:.6}, s_c {s_c:.6}")
        }
        Verdict::Extinction { s_e } => format!("extinction, s_e {s_e:.6}"),
        Verdict::CompleteMelting { t_e } => format!("complete melting, t_e {t_e:.6}"),
        Verdict::Undetermined => "undetermined".to_string(),
    }
}

/// Directory name for one sweep member, e.g. `kappa=-1.05`.
fn member_name(parameter: &str, value: f64) -> String {
    format!("{parameter}={value}")
}

fn aggregate_row(parameter_value: f64, rec: &RunRecord) -> String {
    let nan = f64::NAN;
    let (speed, t_c, s_c, s_e, t_e) = match rec.verdict {
        Verdict::TravellingWave { speed } => (speed, nan, nan, nan, nan),
        Verdict::FiniteTimeBlowup { t_c, s_c } => (nan, t_c, s_c, nan, nan),
        Verdict::Extinction { s_e } => (nan, nan, nan, s_e, nan),
        Verdict::CompleteMelting { t_e } => (nan, nan, nan, nan, t_e),
        Verdict::Undetermined => (nan, nan, nan, nan, nan),
    };
    format!(
        "{},{},{},{},{},{},{},{}\n",
        fmt_f64(parameter_value),
        rec.verdict.name(),
        rec.termination.name(),
        fmt_f64(speed),
        fmt_f64(t_c),
        fmt_f64(s_c),
        fmt_f64(s_e),
        fmt_f64(t_e)
    )
}

pub fn sweep(config_path: &Path, root: &Path) -> Result<u8> {
    let started = Instant::now();
    let (base, spec) = config::load_sweep(config_path)?;
    let mut values = spec.values.clone();
    values.sort_by(f64::total_cmp);
    if values.windows(2).any(|w| w[0] == w[1]) {
        bail!("invalid `sweep.values`: contains duplicates");
    }

    // Parse and validate every member before starting any run.
    let members: Vec<(f64, RunConfig)> = values
        .iter()
        .map(|&v| {
            let mut value = base.clone();
            config::set_path(&mut value, &spec.parameter, v)?;
            let cfg = config::parse(value)
                .with_context(|| format!("{} = {v}", spec.parameter))?;
            cfg.resolve()
                .with_context(|| format!("{} = {v}", spec.parameter))?;
            Ok((v, cfg))
        })
        .collect::<Result<_>>()?;

    let records: Vec<RunRecord> = members
        .par_iter()
        .map(|(_, cfg)| execute(cfg))
        .collect::<Result<_>>()?;

    let mut bundle = Bundle::default();
    let mut csv = format!(
        "{},verdict,termination,speed,t_c,s_c,s_e,t_e\n",
        spec.parameter
    );
    let mut exit = 0;
    for ((v, _), rec) in members.iter().zip(records) {
        csv.push_str(&aggregate_row(*v, &rec));
        exit = exit.max(rec.exit_code());
        println!(
            "{}: {} ({})",
            member_name(&spec.parameter, *v),
            describe(&rec.verdict),
            rec.termination.name()
        );
        bundle.nest(&member_name(&spec.parameter, *v), rec.bundle);
    }
    bundle.add("sweep.csv", csv.into_bytes());

    let mut echo = base;
    if let Value::Object(map) = &mut echo {
        map.insert("sweep".to_string(), serde_json::to_value(&spec)?);
    }
    bundle.seal(&echo, started.elapsed())?;
    let dir = root.join(stem(config_path)?);
    bundle.write_to(&dir)?;
    println!("{}", dir.join("sweep.csv").display());
    Ok(exit)
}
