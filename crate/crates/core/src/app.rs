//! Drivers behind the command-line subcommands. Every output is CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ConvergenceAxis, Experiment, RunConfig};
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::schemes::{integrate_with, RunReport, SchemeConfig, TimeGrid};
use crate::verify::{
    convergence_study, self_checks, stability_experiment, CheckOutcome, ConvergenceSetup, ManufacturedProblem,
};

pub const NORMS_HEADER: &str = "step,t,norm,envelope_rho_cumulative,violation_flag";

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: RunReport,
    pub files: Vec<PathBuf>,
}

pub fn snapshot_name(step: usize) -> String {
    format!("field_{step:04}.csv")
}

/// `norms.csv` body for a (possibly partial) run.
pub fn norms_csv(report: &RunReport) -> String {
    let envelope = report.cumulative_envelope();
    let mut out = String::from(NORMS_HEADER);
    out.push('\n');
    for (n, norm) in report.norm_history.iter().enumerate() {
        let flag = if n == 0 { false } else { report.violation_flags[n - 1] };
        let _ = writeln!(
            out,
            "{n},{},{norm},{},{}",
            n as f64 * report.tau,
            envelope[n],
            u8::from(flag)
        );
    }
    out
}

/// Header row of `x1` centers, then one row per `x2` center.
pub fn field_csv(field: &GridField) -> String {
    let g = field.grid();
    let mut out = String::from("x2\\x1");
    for i1 in 0..g.n1() {
        let _ = write!(out, ",{}", g.x1(i1));
    }
    out.push('\n');
    for i2 in 0..g.n2() {
        let _ = write!(out, "{}", g.x2(i2));
        for i1 in 0..g.n1() {
            let _ = write!(out, ",{}", field.get(i1, i2));
        }
        out.push('\n');
    }
    out
}

fn write(path: PathBuf, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, text)?;
    files.push(path);
    Ok(())
}

/// Integrate the configured problem, writing `norms.csv` and snapshots into
/// `out_dir`. On a failed step the rows completed so far are still written
/// before the error is returned.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let problem = config.problem()?;
    let y0 = config.initial()?;
    let every = config.output.snapshot_every;
    let mut files = Vec::new();

    let result = integrate_with(&config.scheme_config(), &problem, &y0, &config.time_grid()?, |n, _, y| {
        if every > 0 && n % every == 0 {
            write(out_dir.join(snapshot_name(n)), &field_csv(y), &mut files)?;
        }
        Ok(())
    });
    let norms = out_dir.join("norms.csv");
    match result {
        Ok(report) => {
            write(norms, &norms_csv(&report), &mut files)?;
            Ok(RunSummary { report, files })
        }
        Err(Error::StepFailed { step, source, partial }) => {
            fs::write(&norms, norms_csv(&partial))?;
            Err(Error::StepFailed { step, source, partial })
        }
        Err(e) => Err(e),
    }
}

/// Run the configured experiment and write `report.csv`.
pub fn sweep(config: &RunConfig, out_dir: &Path) -> Result<PathBuf> {
    config.validate()?;
    let text = match &config.experiment {
        None => {
            return Err(Error::ConfigInvalid(vec![
                "experiment: sweep needs an [experiment] section".into(),
            ]))
        }
        Some(Experiment::Stability { tau_delta, schemes, steps }) => {
            let base = config.scheme_config();
            let configs: Vec<SchemeConfig> = schemes
                .iter()
                .map(|e| SchemeConfig {
                    kind: e.kind,
                    sigma: e.sigma,
                    ..base
                })
                .collect();
            stability_experiment(&config.problem()?, &config.initial()?, tau_delta, &configs, *steps)?.to_csv()
        }
        Some(Experiment::Convergence {
            axis: ConvergenceAxis::Space,
            levels,
            velocity_a,
            velocity_b,
            ..
        }) => {
            let problem =
                ManufacturedProblem::steady_convection_diffusion(config.domain.l1, config.domain.l2, *velocity_a, *velocity_b);
            let setup = ConvergenceSetup::Space {
                problem: &problem,
                base_n1: config.grid.n1,
                base_n2: config.grid.n2,
            };
            convergence_study(&setup, *levels)?.to_csv()
        }
        Some(Experiment::Convergence {
            axis: ConvergenceAxis::Time,
            levels,
            reference_factor,
            ..
        }) => {
            let problem = config.problem()?;
            let initial = config.initial()?;
            let setup = ConvergenceSetup::Time {
                source: &problem,
                initial: &initial,
                scheme: config.scheme_config(),
                t_end: TimeGrid::new(config.scheme.tau, config.scheme.steps)?.end(),
                base_steps: config.scheme.steps,
                reference_factor: *reference_factor,
            };
            convergence_study(&setup, *levels)?.to_csv()
        }
    };
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("report.csv");
    fs::write(&path, text)?;
    Ok(path)
}

pub fn check(seed: u64) -> Result<Vec<CheckOutcome>> {
    self_checks(seed)
}
