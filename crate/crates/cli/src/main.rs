//! Batch front-end: scenario ingestion, pipeline orchestration, trace
//! persistence, and reproducibility controls.
//!
//! All flags can also be supplied through `CRITICALITY_*` environment
//! variables (e.g. `CRITICALITY_SCENARIO`, `CRITICALITY_TARGET`).
//! Exit codes: 0 success, 1 numerical failure, 2 configuration error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use criticality::newton::{iterate_from_power, run_newton, ToleranceSchedule, UpdateBackend};
use criticality::ops::OperatorSet;
use criticality::pipeline::{build_oracle, run_pipeline, PipelineConfig, TraceRow};
use criticality::power::{estimate_gap, estimate_norm_c, run_power, TolerancePolicy};
use criticality::scenario::{scen_const, scen_het, scen_ref, Scenario};
use criticality::solver::{solve_b, CertifiedMap, TransportMap};
use criticality::spectral::{sandwich_check, verify_dr_bound};
use criticality::{MatKind, Weighting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleArg {
    Quad,
    Lin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug, Parser)]
#[command(
    name = "criticality",
    about = "Accuracy-controlled criticality eigensolver",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Scenario file path, or one of the built-in names
    /// `scen-const`, `scen-het`, `scen-ref`.
    #[arg(
        long,
        global = true,
        env = "CRITICALITY_SCENARIO",
        default_value = "scen-const"
    )]
    scenario: String,

    /// Output directory for traces and summaries.
    #[arg(long, global = true, env = "CRITICALITY_OUT", default_value = "out")]
    out: PathBuf,

    /// Seed for every sampled diagnostic; a fixed seed with one thread gives
    /// byte-identical traces.
    #[arg(long, global = true, env = "CRITICALITY_SEED", default_value_t = 0)]
    seed: u64,

    /// Final accuracy target. Defaults to the scenario's `newton.target`
    /// when present, else 1e-8.
    #[arg(long, global = true, env = "CRITICALITY_TARGET")]
    target: Option<f64>,

    /// Update-tolerance schedule for the `newton` subcommand. Defaults to
    /// the scenario's `newton.schedule` when present, else `lin`.
    #[arg(long, global = true, env = "CRITICALITY_SCHEDULE", value_enum)]
    schedule: Option<ScheduleArg>,

    /// Linear-schedule reduction factor. Defaults to the scenario's
    /// `newton.zeta` when present, else 0.5.
    #[arg(long, global = true, env = "CRITICALITY_ZETA")]
    zeta: Option<f64>,

    /// Dense-oracle cross checking (true errors, budgets).
    #[arg(long, global = true, env = "CRITICALITY_ORACLE", value_enum, default_value_t = Toggle::Off)]
    oracle: Toggle,

    /// Intra-operator worker threads. More than one disables the
    /// byte-determinism guarantee on wallclock columns.
    #[arg(long, global = true, env = "CRITICALITY_THREADS", default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Validate the standing assumptions on the optical parameters.
    Check,
    /// One certified source solve with a unit source.
    Source,
    /// Power iteration from a flat start.
    Power,
    /// Power warm-up followed by Newton with the configured schedule.
    Newton,
    /// Full pipeline: power warm-up, linear Newton, quadratic finish.
    Pipeline,
    /// Emit the dense spectral report and constant budget as JSON.
    Diagnose,
    /// Dense cross-checks of the matrix-free machinery.
    Oracle,
}

#[derive(Debug, Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    kind: &'static str,
}

fn error_kind(e: &criticality::Error) -> &'static str {
    use criticality::Error::*;
    match e {
        InvalidGrid(_) | ShapeMismatch(_) | InvalidOptics(_) | Scenario(_) | Io(_) | Json(_)
        | InvalidInput(_) | UnsupportedP(_) => "config",
        _ => "numerical",
    }
}

fn load_scenario(name: &str) -> Result<Scenario, criticality::Error> {
    match name {
        "scen-const" => Ok(scen_const()),
        "scen-het" => Ok(scen_het()),
        "scen-ref" => Ok(scen_ref()),
        path => Scenario::from_path(Path::new(path)),
    }
}

fn write_trace(out: &Path, rows: &[TraceRow]) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    let mut f = std::fs::File::create(out.join("trace.jsonl"))?;
    for row in rows {
        serde_json::to_writer(&mut f, row).map_err(std::io::Error::other)?;
        writeln!(f)?;
    }
    Ok(())
}

fn write_summary(out: &Path, summary: &serde_json::Value) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(summary)? + "\n",
    )?;
    // Flat CSV companion: one header line, one value line.
    let mut keys = Vec::new();
    let mut vals = Vec::new();
    flatten("", summary, &mut keys, &mut vals);
    let mut csv = String::new();
    csv.push_str(&keys.join(","));
    csv.push('\n');
    csv.push_str(&vals.join(","));
    csv.push('\n');
    std::fs::write(out.join("summary.csv"), csv)?;
    Ok(())
}

fn flatten(prefix: &str, v: &serde_json::Value, keys: &mut Vec<String>, vals: &mut Vec<String>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, inner) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, inner, keys, vals);
            }
        }
        serde_json::Value::Array(_) => {
            // Arrays stay in the JSON summary only.
        }
        other => {
            keys.push(prefix.to_string());
            vals.push(other.to_string().trim_matches('"').to_string());
        }
    }
}

fn run(cli: &Cli) -> Result<(), criticality::Error> {
    let scenario = load_scenario(&cli.scenario)?;
    let base = if cli.scenario.ends_with(".json") {
        Path::new(&cli.scenario).parent().map(PathBuf::from)
    } else {
        None
    };
    let space = scenario.build_with_base(base.as_deref())?;
    let ops = OperatorSet::with_threads(space.clone(), cli.threads);
    let oracle_on = cli.oracle == Toggle::On;
    let deterministic = cli.threads <= 1;
    let started = std::time::Instant::now();

    // Flag > scenario section > built-in default.
    let newton_spec = scenario.newton.clone().unwrap_or_default();
    let target = cli.target.or(newton_spec.target).unwrap_or(1e-8);
    let zeta = cli.zeta.or(newton_spec.zeta).unwrap_or(0.5);
    let schedule = cli
        .schedule
        .unwrap_or_else(|| match newton_spec.schedule.as_deref() {
            Some("quad") => ScheduleArg::Quad,
            _ => ScheduleArg::Lin,
        });
    let oracle_backend = matches!(newton_spec.backend.as_deref(), Some("oracle"));

    match cli.cmd {
        Cmd::Check => {
            let rep = *space.assumptions();
            let measured = ops.measured_contraction_norm(300);
            let summary = serde_json::json!({
                "subcommand": "check",
                "scenario": cli.scenario,
                "assumptions": rep,
                "measured_contraction_norm": measured,
                "wallclock_ms": started.elapsed().as_millis() as u64,
            });
            write_trace(&cli.out, &[])?;
            write_summary(&cli.out, &summary)?;
            println!(
                "alpha = {}, M = {}, c_f = {}, rho = {}",
                rep.alpha, rep.big_m, rep.c_f, rep.rho
            );
            if !rep.pass {
                return Err(criticality::Error::NotContractive { rho: rep.rho });
            }
        }
        Cmd::Source => {
            let q = space.constant(1.0);
            let res = solve_b(&ops, &q, target)?;
            let rows = vec![TraceRow {
                phase: "source".into(),
                iter: res.iterations as usize,
                lambda: None,
                rayleigh: None,
                residual_norm: None,
                eta: Some(target),
                certified_bound: Some(res.bound),
                oracle_error: None,
                c_applications: 0,
                wallclock_ms: 0,
            }];
            let mut true_error = None;
            if oracle_on {
                let b = ops.materialize(MatKind::B, criticality::ops::DEFAULT_DENSE_CAP)?;
                let exact = b
                    .matrix()
                    .clone()
                    .lu()
                    .solve(&criticality::dense::field_to_vec(&q))
                    .ok_or(criticality::Error::SingularSystem { lambda: f64::NAN })?;
                let exact = criticality::dense::vec_to_field(
                    &exact,
                    (space.n_cells(), space.n_ordinates()),
                );
                true_error = Some(space.distance(&res.value, &exact, Weighting::Sigma));
            }
            let summary = serde_json::json!({
                "subcommand": "source",
                "scenario": cli.scenario,
                "eta": target,
                "certified_bound": res.bound,
                "iterations": res.iterations,
                "true_error": true_error,
                "solution_norm": space.norm(&res.value, Weighting::Sigma),
                "counters": ops.counters(),
                "wallclock_ms": started.elapsed().as_millis() as u64,
            });
            write_trace(&cli.out, &rows)?;
            write_summary(&cli.out, &summary)?;
            println!(
                "source solve: bound {:e} in {} iterations",
                res.bound, res.iterations
            );
        }
        Cmd::Power => {
            let map = TransportMap::new(&ops);
            let a0 = space.constant(1.0);
            let trace = run_power(
                &map,
                &a0,
                target,
                TolerancePolicy::Proportional { factor: 0.1 },
                500,
            )?;
            let oracle_ctx = if oracle_on {
                Some(build_oracle(&ops, 2.0)?)
            } else {
                None
            };
            let mut rows = Vec::new();
            for (i, s) in trace.steps.iter().enumerate() {
                let oracle_error = oracle_ctx.as_ref().map(|ctx| {
                    let u1 = criticality::dense::vec_to_field(&ctx.report.u1, ctx.report.shape);
                    map.norm(&trace.iterates[i + 1].sub(&u1))
                });
                rows.push(TraceRow {
                    phase: "power".into(),
                    iter: i,
                    lambda: Some(1.0 / s.rayleigh),
                    rayleigh: Some(s.rayleigh),
                    residual_norm: Some(s.increment),
                    eta: Some(s.eta_apply),
                    certified_bound: None,
                    oracle_error,
                    c_applications: s.c_applications,
                    wallclock_ms: if deterministic {
                        0
                    } else {
                        started.elapsed().as_millis() as u64
                    },
                });
            }
            let gap = estimate_gap(&trace).ok();
            let norm_interval = estimate_norm_c(&ops, 1e-10, 30)?;
            let summary = serde_json::json!({
                "subcommand": "power",
                "scenario": cli.scenario,
                "steps": trace.steps.len(),
                "converged": trace.converged,
                "final_rayleigh": trace.final_rayleigh,
                "final_lambda": 1.0 / trace.final_rayleigh,
                "distance_estimate": trace.distance_estimate,
                "gap_estimate": gap,
                "norm_interval": { "lo": norm_interval.0, "hi": norm_interval.1 },
                "oracle_mu1": oracle_ctx.as_ref().map(|c| c.report.mu1),
                "counters": ops.counters(),
                "wallclock_ms": started.elapsed().as_millis() as u64,
            });
            write_trace(&cli.out, &rows)?;
            write_summary(&cli.out, &summary)?;
            println!(
                "power: {} steps, rayleigh {:.8}, distance estimate {:e}",
                trace.steps.len(),
                trace.final_rayleigh,
                trace.distance_estimate
            );
        }
        Cmd::Newton => {
            let map = TransportMap::new(&ops);
            let oracle_ctx = if oracle_on {
                Some(build_oracle(&ops, 2.0)?)
            } else {
                None
            };
            let a0 = space.constant(1.0);
            let warm = run_power(
                &map,
                &a0,
                1e-30,
                TolerancePolicy::Proportional { factor: 0.1 },
                10,
            )?;
            let init = iterate_from_power(&map, &warm.final_iterate, 1e-10, 2.0)?;
            let (omega, beta_hat, beta_bar, gamma) = match &oracle_ctx {
                Some(c) => (
                    c.budget.omega,
                    c.beta_hat,
                    c.budget.beta_bar,
                    c.budget.gamma,
                ),
                None => (1e-3, 40.0, 40.0, 1.0),
            };
            let sched = match schedule {
                ScheduleArg::Lin => ToleranceSchedule::Linear { omega, zeta },
                ScheduleArg::Quad => ToleranceSchedule::Quadratic {
                    omega,
                    beta_bar,
                    gamma,
                },
            };
            let oracle_ref = oracle_ctx.as_ref().map(|c| &c.reference);
            let dense_for_updates = if oracle_backend {
                Some(match &oracle_ctx {
                    Some(c) => c.dense.clone(),
                    None => ops.materialize(MatKind::C, criticality::ops::DEFAULT_DENSE_CAP)?,
                })
            } else {
                None
            };
            let backend = match &dense_for_updates {
                Some(d) => UpdateBackend::Oracle(d),
                None => UpdateBackend::Descent,
            };
            let trace = run_newton(&map, init, sched, target, backend, beta_hat, oracle_ref)?;
            let rows: Vec<TraceRow> = trace
                .rows
                .iter()
                .map(|r| TraceRow {
                    phase: "newton".into(),
                    iter: r.step,
                    lambda: Some(r.lambda),
                    rayleigh: None,
                    residual_norm: Some(r.residual_norm),
                    eta: Some(r.eta),
                    certified_bound: Some(r.e_hat),
                    oracle_error: r.oracle_error,
                    c_applications: r.c_applications,
                    wallclock_ms: if deterministic {
                        0
                    } else {
                        started.elapsed().as_millis() as u64
                    },
                })
                .collect();
            let summary = serde_json::json!({
                "subcommand": "newton",
                "scenario": cli.scenario,
                "schedule": format!("{schedule:?}"),
                "zeta": zeta,
                "target": target,
                "converged": trace.converged,
                "lambda": trace.final_lambda,
                "e_hat": trace.final_e_hat,
                "oracle_error": rows.last().and_then(|r| r.oracle_error),
                "counters": ops.counters(),
                "wallclock_ms": started.elapsed().as_millis() as u64,
            });
            write_trace(&cli.out, &rows)?;
            write_summary(&cli.out, &summary)?;
            println!(
                "newton: lambda {:.10}, e_hat {:e}",
                trace.final_lambda, trace.final_e_hat
            );
        }
        Cmd::Pipeline => {
            let cfg = PipelineConfig {
                target,
                zeta,
                oracle: oracle_on,
                record_wallclock: !deterministic,
                ..PipelineConfig::default()
            };
            let result = run_pipeline(&ops, &cfg)?;
            let summary = serde_json::json!({
                "subcommand": "pipeline",
                "scenario": cli.scenario,
                "target": target,
                "converged": result.converged,
                "lambda": result.lambda,
                "e_hat": result.e_hat,
                "oracle_error": result.oracle_error,
                "counters": ops.counters(),
                "wallclock_ms": started.elapsed().as_millis() as u64,
            });
            write_trace(&cli.out, &result.rows)?;
            write_summary(&cli.out, &summary)?;
            println!(
                "pipeline: lambda {:.10}, certified e_hat {:e}{}",
                result.lambda,
                result.e_hat,
                result
                    .oracle_error
                    .map(|e| format!(", true error {e:e}"))
                    .unwrap_or_default()
            );
            if !result.converged {
                return Err(criticality::Error::Divergence(0));
            }
        }
        Cmd::Diagnose => {
            let ctx = build_oracle(&ops, 2.0)?;
            let sandwich = sandwich_check(&ctx.report)?;
            let dr = verify_dr_bound(&ctx.dense, &ctx.report, &ctx.budget, 2.0, 50, cli.seed);
            let report = &ctx.report;
            let doc = serde_json::json!({
                "subcommand": "diagnose",
                "scenario": cli.scenario,
                "report": {
                    "mu1": report.mu1,
                    "mu2": { "re": report.mu2.re, "im": report.mu2.im },
                    "lambda_circ": report.lambda_circ,
                    "eigenvalues": report.eigenvalues.iter().take(16)
                        .map(|z| serde_json::json!({"re": z.re, "im": z.im})).collect::<Vec<_>>(),
                    "theta": report.theta,
                    "delta": report.delta,
                    "delta_bar": report.delta_bar,
                    "q_ratio": report.q_ratio,
                    "dist_complements": report.dist_complements,
                    "c_norm": report.c_norm,
                    "residuals": [report.residual_mu1, report.residual_mu1_star, report.residual_mu2_star],
                    "u1": report.u1.as_slice(),
                    "u1_star": report.u1_star.as_slice(),
                },
                "budget": ctx.budget,
                "sandwich": sandwich,
                "dr_bound_check": dr,
                "beta_hat": ctx.beta_hat,
                "wallclock_ms": started.elapsed().as_millis() as u64,
            });
            std::fs::create_dir_all(&cli.out)?;
            std::fs::write(
                cli.out.join("diagnose.json"),
                serde_json::to_string_pretty(&doc)? + "\n",
            )?;
            write_summary(&cli.out, &doc)?;
            println!(
                "diagnose: mu1 {:.8}, theta {:.6}, delta {:.6}, beta_bar {:.3}",
                report.mu1, report.theta, report.delta, ctx.budget.beta_bar
            );
        }
        Cmd::Oracle => {
            let ctx = build_oracle(&ops, 2.0)?;
            let measured = ops.measured_contraction_norm(400);
            let rho = space.assumptions().rho;
            let (lo, hi) = estimate_norm_c(&ops, 1e-10, 30)?;
            // The crude certified bound on the inverse of B holds in the
            // plain metric; the weighted norm is measured, not assumed.
            let b = ops.materialize(MatKind::B, criticality::ops::DEFAULT_DENSE_CAP)?;
            let b_inv_measured = 1.0
                / b.similarity_matrix()
                    .singular_values()
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
            let b_inv_bound = criticality::solver::b_inverse_bound(&ops);
            let sandwich = sandwich_check(&ctx.report)?;
            let dr = verify_dr_bound(&ctx.dense, &ctx.report, &ctx.budget, 2.0, 50, cli.seed);
            let contraction_ok = measured <= rho + 1e-8;
            let norm_ok = lo <= ctx.report.c_norm + 1e-9 && ctx.report.c_norm <= hi + 1e-9;
            let b_inv_ok = b_inv_measured <= b_inv_bound + 1e-9;
            let pass = contraction_ok && norm_ok && b_inv_ok && sandwich.pass && dr.pass;
            let summary = serde_json::json!({
                "subcommand": "oracle",
                "scenario": cli.scenario,
                "measured_contraction": measured,
                "rho": rho,
                "contraction_ok": contraction_ok,
                "norm_interval": { "lo": lo, "dense": ctx.report.c_norm, "hi": hi, "ok": norm_ok },
                "b_inverse_weighted": { "measured": b_inv_measured, "certified_bound": b_inv_bound },
                "sandwich": sandwich,
                "dr_bound_check": dr,
                "pass": pass,
                "wallclock_ms": started.elapsed().as_millis() as u64,
            });
            write_trace(&cli.out, &[])?;
            write_summary(&cli.out, &summary)?;
            println!(
                "oracle cross-checks: {}",
                if pass { "pass" } else { "FAIL" }
            );
            if !pass {
                return Err(criticality::Error::CertificateFail(
                    "oracle cross-checks failed".into(),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = ErrorRecord {
                error: &e.to_string(),
                kind: error_kind(&e),
            };
            eprintln!(
                "{}",
                serde_json::to_string(&record).unwrap_or_else(|_| e.to_string())
            );
            if error_kind(&e) == "config" {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
