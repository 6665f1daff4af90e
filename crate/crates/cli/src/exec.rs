//! Mode dispatch and file emission.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde_json::json;

use krflow_core::classflow::{classify_singularity, mmp_run, ClassPath, Nu};
use krflow_core::diagnostics::run_with_diagnostics;
use krflow_core::fields::PeriodicGrid;
use krflow_core::flow::{FlowProblem, SampleSchedule, StepControl, Termination};
use krflow_core::lattice::{geometry_from_json, RationalClass, SurfaceGeometry};
use krflow_core::rational::parse_rational;

use crate::config::{CustomRun, Mode, Overrides, RunConfig};
use crate::scenario::{
    build_family, metric_field, registry_names, run_scenario, scalar_field, ScenarioOutput,
};

pub struct ExecReport {
    pub exit_code: i32,
    pub written: Vec<PathBuf>,
}

/// Execute a validated configuration, writing outputs under `config.out`.
pub fn execute(config: &RunConfig) -> Result<ExecReport> {
    match &config.mode {
        Mode::Scenario { name } => {
            let output = run_scenario(name, &config.overrides)?;
            let written = write_output(&config.out.join(name), &output)?;
            Ok(ExecReport {
                exit_code: output.exit_code,
                written,
            })
        }
        Mode::AllScenarios => execute_all(config),
        Mode::Run { custom } => {
            let output = run_custom(custom, &config.overrides)?;
            let written = write_output(&config.out.join("custom_run"), &output)?;
            Ok(ExecReport {
                exit_code: output.exit_code,
                written,
            })
        }
        Mode::Classify { geometry, class } => {
            let (geom, omega0) = load_geometry_and_class(geometry, class)?;
            let path = ClassPath::new(&geom, omega0, Nu::Zero)?;
            let report = classify_singularity(&geom, &path)?;
            let body = serde_json::to_vec_pretty(&json!({
                "mode": "classify",
                "report": report,
            }))?;
            let written = write_output(
                &config.out.clone(),
                &ScenarioOutput {
                    files: vec![("classify_report.json".into(), body)],
                    exit_code: 0,
                },
            )?;
            Ok(ExecReport {
                exit_code: 0,
                written,
            })
        }
        Mode::Mmp { geometry, class } => {
            let (geom, omega0) = load_geometry_and_class(geometry, class)?;
            let trace = mmp_run(&geom, omega0)?;
            let body = serde_json::to_vec_pretty(&json!({
                "mode": "mmp",
                "trace": trace,
            }))?;
            let written = write_output(
                &config.out.clone(),
                &ScenarioOutput {
                    files: vec![("mmp_report.json".into(), body)],
                    exit_code: 0,
                },
            )?;
            Ok(ExecReport {
                exit_code: 0,
                written,
            })
        }
    }
}

fn execute_all(config: &RunConfig) -> Result<ExecReport> {
    let names = registry_names();
    let jobs = config.jobs.max(1).min(names.len());
    let results: Vec<(usize, Result<ScenarioOutput>)> = if jobs <= 1 {
        names
            .iter()
            .enumerate()
            .map(|(i, name)| (i, run_scenario(name, &config.overrides)))
            .collect()
    } else {
        // Independent presets; a shared counter hands out work.
        let counter = std::sync::atomic::AtomicUsize::new(0);
        let mut results: Vec<(usize, Result<ScenarioOutput>)> = Vec::new();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for _ in 0..jobs {
                let counter = &counter;
                let names = &names;
                let overrides = &config.overrides;
                handles.push(scope.spawn(move || {
                    let mut local = Vec::new();
                    loop {
                        let i = counter.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= names.len() {
                            break;
                        }
                        local.push((i, run_scenario(names[i], overrides)));
                    }
                    local
                }));
            }
            for h in handles {
                results.extend(h.join().expect("scenario worker panicked"));
            }
        });
        results.sort_by_key(|(i, _)| *i);
        results
    };

    let mut written = Vec::new();
    let mut exit_code = 0;
    for (i, result) in results {
        let output = result.with_context(|| format!("scenario `{}`", names[i]))?;
        exit_code = exit_code.max(output.exit_code);
        written.extend(write_output(&config.out.join(names[i]), &output)?);
    }
    Ok(ExecReport { exit_code, written })
}

/// Run a custom flow configuration (config-file `run` mode).
pub fn run_custom(custom: &CustomRun, overrides: &Overrides) -> Result<ScenarioOutput> {
    let n = overrides.n.unwrap_or(custom.n);
    let t_end = overrides.t_end.unwrap_or(custom.t_end);
    let grid = PeriodicGrid::new(n)?;
    let nu = match custom.nu {
        0 => Nu::Zero,
        1 => Nu::One,
        other => return Err(anyhow!("nu must be 0 or 1, got {other}")),
    };
    let problem = FlowProblem::new(
        grid,
        build_family(&custom.family, grid),
        metric_field(&custom.omega_density, grid),
        nu,
        scalar_field(&custom.phi0, grid),
        custom
            .degeneracy_profile
            .as_ref()
            .map(|s| scalar_field(s, grid)),
    )?;
    let cfg = krflow_core::diagnostics::DiagnosticsConfig {
        tolerance: overrides
            .tolerance
            .or(custom.tolerance)
            .unwrap_or(1e-6),
        curvature_slack: 0.0,
        mabuchi: custom.mabuchi,
        degeneracy: custom.degeneracy_check.as_ref().map(|d| {
            krflow_core::diagnostics::DegeneracyCheck {
                epsilon: d.epsilon,
                s_floor: d.s_floor,
                c_cap: d.c_cap,
            }
        }),
    };
    let ctrl = StepControl {
        dt_cap_c: custom.dt_cap_c,
        dt_max: custom.dt_max,
        ..Default::default()
    };
    let run = run_with_diagnostics(
        &problem,
        t_end,
        &SampleSchedule::Every(custom.sample_every),
        &ctrl,
        cfg,
    )?;
    let exit_code = match run.termination {
        Termination::Completed => 0,
        Termination::SingularityReached { .. } => 2,
    };
    let mut csv = String::new();
    csv.push_str(krflow_core::diagnostics::DiagnosticsRecord::CSV_HEADER);
    csv.push('\n');
    for rec in &run.records {
        csv.push_str(&rec.csv_line());
        csv.push('\n');
    }
    let summary = json!({
        "mode": "run",
        "n": n,
        "t_end": t_end,
        "termination": match run.termination {
            Termination::Completed => json!({"kind": "completed"}),
            Termination::SingularityReached { t } => json!({"kind": "singularity_reached", "t": t}),
        },
        "steps": run.steps_taken,
        "samples": run.records.len(),
    });
    // Final-state field snapshots (header line + row-major samples).
    let phi_snap = run.final_state.phi.to_snapshot();
    let density_snap = problem.metric_at(&run.final_state)?.to_snapshot();
    Ok(ScenarioOutput {
        files: vec![
            ("trajectory.csv".into(), csv.into_bytes()),
            (
                "estimates.json".into(),
                serde_json::to_vec_pretty(&run.report)?,
            ),
            ("summary.json".into(), serde_json::to_vec_pretty(&summary)?),
            ("phi_final.snap.csv".into(), phi_snap.into_bytes()),
            ("density_final.snap.csv".into(), density_snap.into_bytes()),
        ],
        exit_code,
    })
}

fn load_geometry_and_class(
    geometry: &Path,
    class: &[String],
) -> Result<(SurfaceGeometry, RationalClass)> {
    let text = fs::read_to_string(geometry)
        .with_context(|| format!("reading geometry file {}", geometry.display()))?;
    let geom = geometry_from_json(&text)?;
    let coords = class
        .iter()
        .map(|s| parse_rational(s).map_err(|e| anyhow!("class coordinate `{s}`: {e}")))
        .collect::<Result<Vec<_>>>()?;
    Ok((geom, RationalClass::new(coords)))
}

fn write_output(dir: &Path, output: &ScenarioOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, bytes) in &output.files {
        let path = dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
