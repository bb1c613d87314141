//! Command dispatch and output files.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use thiserror::Error;

use super::config::{Command, ConfigError, Format, RunSpec};
use super::report::{Report, ReportRow};
use crate::analytics::chernoff_skeleton_from;
use crate::error::Error;
use crate::model::{a2_coefficient, analytic_constants, validate, ValidatedModel};
use crate::montecarlo::{
    row_seed, verify_chernoff, verify_lemma2, verify_mgf, verify_spatial_tail, verify_velocity,
};
use crate::path::{simulate, statistic_at, StatisticKind};
use crate::rng::Stream;
use crate::skeleton::{cycle_statistic, lln_check, sample_skeleton, sample_skeleton_covering};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_BOUND_VIOLATED: i32 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Run(Error::Io(_)) => EXIT_CONFIG,
            RunError::Run(_) => EXIT_DOMAIN,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: Report,
    /// Lines for standard output.
    pub messages: Vec<String>,
    pub files: Vec<PathBuf>,
    pub exit_code: i32,
}

struct Executed {
    report: Report,
    messages: Vec<String>,
    /// Per-run artifacts written next to the report.
    artifacts: Vec<(&'static str, Vec<u8>)>,
    domain_rows: bool,
}

/// Runs a validated configuration and writes its files into `spec.output.dir`.
pub fn run(spec: &RunSpec, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let model = validate(spec.model.clone())?;
    let started = Instant::now();
    let executed = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Io(format!("thread pool: {e}")))?
            .install(|| execute(spec, &model))?,
        None => execute(spec, &model)?,
    };
    let wall = started.elapsed().as_secs_f64();

    let dir = &spec.output.dir;
    fs::create_dir_all(dir).map_err(Error::from)?;
    let mut files = Vec::new();
    let report_path = match spec.output.format {
        Format::Csv => {
            let p = dir.join("report.csv");
            executed.report.write_csv(BufWriter::new(create(&p)?))?;
            p
        }
        Format::Json => {
            let p = dir.join("report.json");
            executed.report.write_json(BufWriter::new(create(&p)?))?;
            p
        }
    };
    files.push(report_path);
    for (name, bytes) in &executed.artifacts {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(Error::from)?;
        files.push(p);
    }
    let meta = json!({
        "command": spec.command.name().as_str(),
        "seed": spec.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_seconds": wall,
        "threads": opts.threads.unwrap_or_else(rayon::current_num_threads),
    });
    let meta_path = dir.join("meta.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&meta).expect("value serializes"))
        .map_err(Error::from)?;
    files.push(meta_path);

    let exit_code = if executed.report.any_violated() {
        EXIT_BOUND_VIOLATED
    } else if executed.domain_rows {
        EXIT_DOMAIN
    } else {
        EXIT_OK
    };
    Ok(RunOutcome {
        report: executed.report,
        messages: executed.messages,
        files,
        exit_code,
    })
}

fn create(p: &Path) -> Result<File, Error> {
    File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
}

fn execute(spec: &RunSpec, model: &ValidatedModel) -> Result<Executed, Error> {
    let seed = spec.seed;
    let mut rows = Vec::new();
    let mut messages = Vec::new();
    let mut artifacts = Vec::new();
    let mut details = serde_json::Value::Null;
    let mut domain_rows = false;

    match &spec.command {
        Command::Check => {
            let c = analytic_constants(model);
            messages.push(format!(
                "transient: {}, velocity_star: {:.6}",
                c.transient, c.velocity_star
            ));
            rows.push(ReportRow::analytic("mean_cycle", c.mean_cycle));
            rows.push(ReportRow::analytic("velocity_star", c.velocity_star));
            rows.push(ReportRow::analytic("a_hat_max", c.a_hat_max));
            rows.push(ReportRow::analytic("c1_max", c.c1_max));
            rows.push(ReportRow::analytic("transient", if c.transient { 1.0 } else { 0.0 }));
            if let Ok(v) = model.constant_drift_velocity() {
                rows.push(ReportRow::analytic("velocity_constant_drift", v));
            }
            details = serde_json::to_value(c).expect("constants serialize");
        }
        Command::Skeleton(p) => {
            let sk = sample_skeleton(model, p.n_cycles, &mut Stream::new(seed))?;
            let mut row = ReportRow::observed(format!("cycle_statistic[n={}]", p.n_cycles), cycle_statistic(&sk)?);
            row.analytic = Some(analytic_constants(model).mean_cycle);
            rows.push(row);
            let mut buf = Vec::new();
            sk.write_csv(&mut buf)?;
            artifacts.push(("skeleton.csv", buf));
        }
        Command::Simulate(p) => {
            let method = super::config::MethodParams {
                method: p.method,
                dt: p.dt,
            }
            .sim_method();
            let mut rng = Stream::new(seed);
            let sk = sample_skeleton_covering(model, p.horizon, &mut rng)?;
            let traj = simulate(method, model, &sk, p.horizon, &mut rng)?;
            let velocity = statistic_at(&traj, StatisticKind::VelocityAtHorizon)?;
            let mut row = ReportRow::observed(format!("velocity_at_horizon[t={}]", p.horizon), velocity);
            row.analytic = model.constant_drift_velocity().ok();
            rows.push(row);
            if let Ok(v) = statistic_at(&traj, StatisticKind::SkeletonVelocity) {
                rows.push(ReportRow::observed("skeleton_velocity", v));
            }
            rows.push(ReportRow::observed(
                "min_over_path",
                statistic_at(&traj, StatisticKind::MinOverPath)?,
            ));
            // Diagnostic only: the velocity should not exceed sup b_+.
            let mut diag = ReportRow::observed("velocity_vs_sup_b_plus", velocity);
            diag.analytic = Some(model.spec().sup_b_plus);
            rows.push(diag);
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)?;
            artifacts.push(("trajectory.csv", buf));
        }
        Command::VerifyMgf(p) => {
            for r in verify_mgf(model, &p.formulas, &p.lambdas, &p.ns, p.n_samples, seed) {
                match &r.outcome {
                    Ok(b) => rows.push(b.into()),
                    Err(e @ Error::Domain(_)) => {
                        domain_rows = true;
                        let tag = match r.formula {
                            crate::montecarlo::MgfFormula::Deficit => "mgf_deficit",
                            crate::montecarlo::MgfFormula::Excess => "mgf_excess",
                        };
                        rows.push(ReportRow::failed(
                            format!("{tag}[lambda={},n={}]", r.lambda, r.n),
                            &e.to_string(),
                        ));
                    }
                    Err(e) => return Err(e.clone()),
                }
            }
        }
        Command::VerifyLln(p) => {
            for k in 0..p.repeats {
                let mut rng = Stream::new(row_seed(seed, k));
                let r = lln_check(model, p.n_cycles, p.tolerance, &mut rng)?;
                let mut row: ReportRow = (&r).into();
                if p.repeats > 1 {
                    row.quantity = format!("{}[repeat={k}]", row.quantity);
                }
                rows.push(row);
            }
        }
        Command::Chernoff(p) => {
            let s = model.spec();
            let results = if p.n_samples >= 2 {
                verify_chernoff(model, p.direction, p.epsilon, &p.ns, p.lambda_cap, p.n_samples, seed)?
                    .into_iter()
                    .map(|(ch, b)| (ch, Some(b)))
                    .collect::<Vec<_>>()
            } else {
                p.ns.iter()
                    .map(|&n| {
                        chernoff_skeleton_from(
                            p.direction,
                            p.epsilon,
                            n,
                            s.lambda_plus,
                            s.lambda_minus,
                            p.lambda_cap,
                            s.z0,
                        )
                        .map(|ch| (ch, None))
                    })
                    .collect::<Result<Vec<_>, _>>()?
            };
            let mut per_n = Vec::new();
            for (&n, (ch, b)) in p.ns.iter().zip(&results) {
                match b {
                    Some(b) => rows.push(b.into()),
                    None => rows.push(ReportRow::analytic(format!("chernoff_bound[eps={},n={n}]", p.epsilon), ch.bound)),
                }
                per_n.push(json!({"n": n, "result": ch}));
            }
            if let Some((ch, _)) = results.first() {
                rows.push(ReportRow::analytic("lambda_star", ch.lambda_star));
                rows.push(ReportRow::analytic("kappa", ch.kappa));
                if ch.boundary_hit {
                    messages.push(format!("warning: optimum at lambda cap {}", p.lambda_cap));
                }
            }
            details = json!({"direction": p.direction, "epsilon": p.epsilon, "per_n": per_n});
        }
        Command::EscapeRate(p) => {
            let method = super::config::MethodParams {
                method: p.method,
                dt: p.dt,
            }
            .sim_method();
            let r = verify_velocity(model, p.horizon, method, p.n_samples, seed)?;
            rows.push((&r).into());
        }
        Command::VerifyLemma2(p) => {
            let s = model.spec();
            let method = super::config::MethodParams {
                method: p.method,
                dt: p.dt,
            }
            .sim_method();
            let a2 = a2_coefficient(p.a_hat, s.r_plus, s.r_minus, s.lambda_plus, s.lambda_minus);
            rows.push(ReportRow::analytic("a2", a2.value));
            let r = verify_lemma2(model, p.lambda, p.a_hat, p.n_cycles, method, p.n_samples, seed, p.slack)?;
            rows.push((&r).into());
            details = json!({"a2": a2.value, "a2_in_window": a2.in_window, "cutoff": r.threshold});
        }
        Command::VerifyTail(p) => {
            let method = super::config::MethodParams {
                method: p.method,
                dt: p.dt,
            }
            .sim_method();
            let t = verify_spatial_tail(model, p.c0, p.epsilon, &p.horizons, method, p.n_samples, seed)?;
            rows.extend(t.rows.iter().map(ReportRow::from));
            let mut summary = ReportRow::analytic("tail_decay", 0.0);
            summary.analytic = None;
            summary.estimate = t.fit.map(|f| f.slope);
            summary.verdict = Some(t.verdict);
            rows.push(summary);
            details = json!({"fit": t.fit, "below_resolution": t.below_resolution, "verdict": t.verdict});
        }
    }

    Ok(Executed {
        report: Report {
            command: spec.command.name().as_str().into(),
            rows,
            details,
        },
        messages,
        artifacts,
        domain_rows,
    })
}
