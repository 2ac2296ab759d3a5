//! The four subcommands: run, sweep, checkgrad, metrics.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use fairgrad::aggregate::Aggregator;
use fairgrad::gradcheck::{check_gradients, DEFAULT_FD_STEP};
use fairgrad::metrics::MetricTable;
use fairgrad::optimizer::{run, RunResult, Termination};
use fairgrad::rng::child_seed;
use fairgrad::types::ExperimentConfig;
use nalgebra::DVector;

use crate::output::{
    write_json, write_trajectory_csv, RunSummary, SweepChildSummary, SweepSummary,
};
use crate::problems::{build_problem, sample_check_points, CorruptGradients, ProblemSpec};
use crate::{CheckgradArgs, MetricsArgs, RunArgs, SweepArgs};

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_NOT_CONVERGED: i32 = 2;

/// Exit-code severity for the sweep join: usage errors dominate
/// non-convergence, which dominates success.
fn worse(a: i32, b: i32) -> i32 {
    let rank = |c: i32| match c {
        EXIT_USAGE => 2,
        EXIT_NOT_CONVERGED => 1,
        _ => 0,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

fn exit_code_for(termination: Termination) -> i32 {
    match termination {
        Termination::Stationary => EXIT_OK,
        Termination::BudgetExhausted | Termination::SolverFailure => EXIT_NOT_CONVERGED,
    }
}

/// Configuration after merging file, environment, and flags, remembering
/// which fields the file itself pinned.
struct ResolvedConfig {
    config: ExperimentConfig,
    file_set: HashSet<String>,
}

fn load_config_file(path: &Path) -> Result<(ExperimentConfig, HashSet<String>), String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| format!("config file {} is not valid JSON: {e}", path.display()))?;
    let object = value
        .as_object()
        .ok_or_else(|| format!("config file {} must hold a JSON object", path.display()))?;
    let keys: HashSet<String> = object.keys().cloned().collect();
    let config: ExperimentConfig = serde_json::from_value(value.clone())
        .map_err(|e| format!("config file {}: {e}", path.display()))?;
    Ok((config, keys))
}

fn seed_from_env() -> Result<Option<u64>, String> {
    match std::env::var("FAIRGRAD_SEED") {
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| format!("FAIRGRAD_SEED must be an unsigned integer, got `{text}`")),
        Err(_) => Ok(None),
    }
}

/// Merges config sources. Precedence per field: flag > config file >
/// (seed only) FAIRGRAD_SEED > built-in default.
fn resolve_config(args: &crate::ConfigOverrides) -> Result<ResolvedConfig, String> {
    let (mut config, file_set) = match &args.config {
        Some(path) => load_config_file(path)?,
        None => (ExperimentConfig::default(), HashSet::new()),
    };
    if args.seed.is_none() && !file_set.contains("seed") {
        if let Some(seed) = seed_from_env()? {
            config.seed = seed;
        }
    }
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(v) = args.method {
        config.method = v;
    }
    if let Some(v) = args.step_rule {
        config.step_rule = v;
    }
    if let Some(v) = args.lr {
        config.learning_rate = v;
    }
    if let Some(v) = args.steps {
        config.max_steps = v;
    }
    if let Some(v) = args.tol {
        config.stationarity_tol = v;
    }
    if let Some(v) = args.check_every {
        config.check_every = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.w_min {
        config.w_min = v;
    }
    if let Some(v) = args.solver_mode {
        config.solver_mode = v;
    }
    if let Some(v) = args.solver_tol_factor {
        config.solver_tol_factor = v;
    }
    if let Some(v) = args.fair_loss_alpha {
        config.fair_loss_alpha = Some(v);
    }
    if let Some(v) = args.loss_floor {
        config.loss_floor = Some(v);
    }
    if let Some(v) = args.pcgrad_reduce {
        config.pcgrad_reduce = v;
    }
    if let Some(v) = args.dwa_temperature {
        config.dwa_temperature = v;
    }
    if let Some(v) = args.smoothness {
        config.smoothness_l = v;
    }
    Ok(ResolvedConfig { config, file_set })
}

fn parse_point(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| format!("--x0 entry `{part}` is not a number"))
        })
        .collect()
}

/// Fills in the initial point and (for quadratics under the theoretical
/// rule) the exact smoothness constant, honouring flag-over-file precedence.
fn finalize_config(
    config: &mut ExperimentConfig,
    file_set: &HashSet<String>,
    spec: &ProblemSpec,
    args: &crate::RunArgs,
) -> Result<(), String> {
    if let Some(text) = &args.x0 {
        config.initial_point = Some(parse_point(text)?);
    } else if args.problem_args.start.is_some() || !file_set.contains("initial_point") {
        config.initial_point = Some(spec.default_start.clone());
    }
    if let (Some(l), None, false) = (
        spec.smoothness,
        args.overrides.smoothness,
        file_set.contains("smoothness_l"),
    ) {
        if config.step_rule == fairgrad::types::StepRule::Theoretical {
            config.smoothness_l = l;
        }
    }
    config.validate().map_err(|e| e.to_string())
}

fn write_run_artifacts(
    dir: &Path,
    problem_name: &str,
    start_name: Option<&str>,
    config: &ExperimentConfig,
    result: &RunResult,
) -> Result<i32, String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let dim = result.final_point.len();
    let tasks = result.final_losses.len();
    write_trajectory_csv(&dir.join("trajectory.csv"), dim, tasks, &result.trajectory)
        .map_err(|e| format!("cannot write trajectory.csv: {e}"))?;
    let exit_code = exit_code_for(result.termination);
    let final_stationarity = result
        .trajectory
        .iter()
        .rev()
        .map(|r| r.stationarity)
        .find(|s| !s.is_nan())
        .unwrap_or(f64::NAN);
    let final_sigma_min = result
        .trajectory
        .last()
        .map(|r| r.sigma_min)
        .unwrap_or(f64::NAN);
    let summary = RunSummary {
        problem: problem_name.to_string(),
        start: start_name.map(str::to_string),
        config: config.clone(),
        final_point: result.final_point.iter().cloned().collect(),
        final_losses: result.final_losses.iter().cloned().collect(),
        termination: result.termination.to_string(),
        steps: result.steps,
        solver_flags: result.solver_flags,
        mean_min_gain: result.mean_min_gain,
        mean_min_gain_normalized: result.mean_min_gain_normalized,
        final_stationarity,
        final_sigma_min,
        wall_seconds: result.wall_seconds,
        exit_code,
        failure: result.failure.clone(),
    };
    write_json(&dir.join("summary.json"), &summary)
        .map_err(|e| format!("cannot write summary.json: {e}"))?;
    Ok(exit_code)
}

pub fn cmd_run(args: &RunArgs) -> i32 {
    match run_once(args) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_USAGE
        }
    }
}

fn run_once(args: &RunArgs) -> Result<i32, String> {
    let resolved = resolve_config(&args.overrides)?;
    let mut config = resolved.config;
    let spec = build_problem(
        &args.problem_args.problem,
        args.problem_args.start.as_deref(),
        args.problem_args.tasks,
        args.problem_args.dim,
        args.problem_args.cond,
        config.seed,
    )?;
    finalize_config(&mut config, &resolved.file_set, &spec, args)?;
    let result = run(spec.problem.as_ref(), &config).map_err(|e| e.to_string())?;
    let code = write_run_artifacts(
        &args.out,
        &args.problem_args.problem,
        spec.start_name.as_deref(),
        &config,
        &result,
    )?;
    println!(
        "{} after {} steps (final losses {:?}); artifacts in {}",
        result.termination,
        result.steps,
        result.final_losses.iter().cloned().collect::<Vec<f64>>(),
        args.out.display()
    );
    Ok(code)
}

pub fn cmd_sweep(args: &SweepArgs) -> i32 {
    match sweep_all(args) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_USAGE
        }
    }
}

fn parse_alphas(text: &str) -> Result<Vec<f64>, String> {
    let alphas: Vec<f64> = text
        .split(',')
        .filter(|part| !part.trim().is_empty())
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| format!("--alphas entry `{part}` is not a number"))
        })
        .collect::<Result<_, _>>()?;
    if alphas.is_empty() {
        return Err("--alphas must list at least one value".into());
    }
    Ok(alphas)
}

fn sweep_all(args: &SweepArgs) -> Result<i32, String> {
    let alphas = parse_alphas(&args.alphas)?;
    let resolved = resolve_config(&args.run.overrides)?;
    let base_seed = resolved.config.seed;

    fs::create_dir_all(&args.run.out)
        .map_err(|e| format!("cannot create {}: {e}", args.run.out.display()))?;

    let children: Vec<Result<(SweepChildSummary, i32), String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = alphas
            .iter()
            .enumerate()
            .map(|(index, &alpha)| {
                let config = resolved.config.clone();
                let file_set = resolved.file_set.clone();
                scope.spawn(move || {
                    sweep_child(args, alpha, index, base_seed, config, file_set)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep child panicked"))
            .collect()
    });

    let mut worst = EXIT_OK;
    let mut summaries = Vec::new();
    for child in children {
        match child {
            Ok((summary, code)) => {
                println!(
                    "alpha {}: exit {code}, min-gain {:.6e} (normalized {:.6e})",
                    summary.alpha, summary.mean_min_gain, summary.mean_min_gain_normalized
                );
                worst = worse(worst, code);
                summaries.push(summary);
            }
            Err(message) => {
                eprintln!("error: {message}");
                worst = worse(worst, EXIT_USAGE);
            }
        }
    }
    let sweep_summary = SweepSummary {
        alphas,
        static_mode: args.static_mode,
        children: summaries,
        exit_code: worst,
    };
    write_json(&args.run.out.join("sweep_summary.json"), &sweep_summary)
        .map_err(|e| format!("cannot write sweep_summary.json: {e}"))?;
    Ok(worst)
}

fn sweep_child(
    args: &SweepArgs,
    alpha: f64,
    index: usize,
    base_seed: u64,
    mut config: ExperimentConfig,
    file_set: HashSet<String>,
) -> Result<(SweepChildSummary, i32), String> {
    config.alpha = alpha;
    config.seed = child_seed(base_seed, index as u64);
    // The problem instance comes from the base seed so every child
    // optimizes the same landscape.
    let spec = build_problem(
        &args.run.problem_args.problem,
        args.run.problem_args.start.as_deref(),
        args.run.problem_args.tasks,
        args.run.problem_args.dim,
        args.run.problem_args.cond,
        base_seed,
    )?;
    finalize_config(&mut config, &file_set, &spec, &args.run)?;

    if args.static_mode {
        let point = DVector::from_vec(
            config
                .initial_point
                .clone()
                .expect("finalize_config always sets a start"),
        );
        let losses = spec.problem.losses(&point);
        let gradients = spec.problem.gradients(&point).map_err(|e| e.to_string())?;
        let mut aggregator = Aggregator::new(&config);
        let step = aggregator
            .aggregate(&losses, &gradients)
            .map_err(|e| e.to_string())?;
        let d = step.direction.vector();
        let min_gain = (0..gradients.task_count())
            .map(|i| gradients.matrix().column(i).dot(d))
            .fold(f64::INFINITY, f64::min);
        let norm = d.norm();
        let normalized = if norm > 0.0 { min_gain / norm } else { 0.0 };
        let code = if step.flagged { EXIT_NOT_CONVERGED } else { EXIT_OK };
        return Ok((
            SweepChildSummary {
                alpha,
                dir: None,
                exit_code: code,
                termination: None,
                steps: None,
                final_losses: None,
                mean_min_gain: min_gain,
                mean_min_gain_normalized: normalized,
            },
            code,
        ));
    }

    let result = run(spec.problem.as_ref(), &config).map_err(|e| e.to_string())?;
    let dir_name = format!("alpha_{alpha}");
    let dir = args.run.out.join(&dir_name);
    let code = write_run_artifacts(
        &dir,
        &args.run.problem_args.problem,
        spec.start_name.as_deref(),
        &config,
        &result,
    )?;
    Ok((
        SweepChildSummary {
            alpha,
            dir: Some(dir_name),
            exit_code: code,
            termination: Some(result.termination.to_string()),
            steps: Some(result.steps),
            final_losses: Some(result.final_losses.iter().cloned().collect()),
            mean_min_gain: result.mean_min_gain,
            mean_min_gain_normalized: result.mean_min_gain_normalized,
        },
        code,
    ))
}

pub fn cmd_checkgrad(args: &CheckgradArgs) -> i32 {
    match checkgrad(args) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_USAGE
        }
    }
}

fn checkgrad(args: &CheckgradArgs) -> Result<i32, String> {
    let seed = match (args.seed, seed_from_env()?) {
        (Some(s), _) => s,
        (None, Some(s)) => s,
        (None, None) => 0,
    };
    let spec = build_problem(
        &args.problem_args.problem,
        args.problem_args.start.as_deref(),
        args.problem_args.tasks,
        args.problem_args.dim,
        args.problem_args.cond,
        seed,
    )?;
    let points = sample_check_points(
        &args.problem_args.problem,
        args.problem_args.dim,
        args.samples,
        child_seed(seed, 2),
    )?;
    let report = if args.corrupt {
        let corrupted = CorruptGradients(spec.problem);
        check_gradients(&corrupted, &points, DEFAULT_FD_STEP).map_err(|e| e.to_string())?
    } else {
        check_gradients(spec.problem.as_ref(), &points, DEFAULT_FD_STEP)
            .map_err(|e| e.to_string())?
    };
    println!(
        "checked {} points; max relative error {:.3e}",
        report.points_checked, report.max_rel_error
    );
    if report.max_rel_error <= 1e-5 {
        Ok(EXIT_OK)
    } else {
        println!("gradient check FAILED (tolerance 1e-5)");
        Ok(EXIT_NOT_CONVERGED)
    }
}

pub fn cmd_metrics(args: &MetricsArgs) -> i32 {
    match metrics(args) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_USAGE
        }
    }
}

fn metrics(args: &MetricsArgs) -> Result<i32, String> {
    let text = fs::read_to_string(&args.table)
        .map_err(|e| format!("cannot read {}: {e}", args.table.display()))?;
    let table = MetricTable::parse_csv(&text, &args.baseline).map_err(|e| e.to_string())?;
    println!("method,delta_m_percent,mean_rank");
    for method in &table.methods {
        if method == &args.baseline {
            continue;
        }
        let delta = table.delta_m_percent(method).map_err(|e| e.to_string())?;
        let rank = table.mean_rank(method).map_err(|e| e.to_string())?;
        println!("{method},{delta:.6},{rank:.6}");
    }
    Ok(EXIT_OK)
}
