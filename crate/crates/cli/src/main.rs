//! Experiment runner: every estimator as a subcommand with reproducible
//! configuration and tabular output.
//!
//! Exit codes: 0 ok, 1 config error, 2 invariant breach,
//! 3 truncation-dominated result.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;

use config::{Command, ExperimentConfig, GlobalOpts, OutputFormat};
use stirsim_core::contact::{self, LambdaCConfig};
use stirsim_core::csv;
use stirsim_core::dist::DistributionSpec;
use stirsim_core::exclusion::{self, ExcursionTarget, TrackedSet, WalkKind};
use stirsim_core::genealogy::{self, CoupledOptions, CriterionVerdict};
use stirsim_core::green;
use stirsim_core::renewal::{self, RenewalSpec};
use stirsim_core::report::EstimateReport;
use stirsim_core::stream::SeededStream;
use stirsim_core::suite;

#[derive(Parser, Debug)]
#[command(
    name = "stirsim",
    about = "Estimator suite for the contact process with stirring and its auxiliary processes",
    version
)]
struct Cli {
    /// JSON config file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    globals: GlobalOpts,
    #[command(subcommand)]
    command: Option<Command>,
}

/// How a run ended, mapped to the exit code.
enum RunStatus {
    Ok,
    TruncationDominated,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(RunStatus::Ok) => ExitCode::from(0),
        Ok(RunStatus::TruncationDominated) => ExitCode::from(3),
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = if err.is::<genealogy::InvariantViolation>() { 2 } else { 1 };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<RunStatus> {
    let mut globals = cli.globals;
    let mut command = cli.command;

    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let file: ExperimentConfig =
            serde_json::from_str(&text).context("config file is not a valid experiment config")?;
        globals.merge_under(&file.globals);
        if command.is_none() {
            command = Some(file.command);
        }
    }
    let command = command.ok_or_else(|| anyhow!("no subcommand given (flag or config file)"))?;

    if let Some(workers) = globals.workers {
        if workers > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build_global()
                .context("worker pool already initialized")?;
        }
    }

    let resolved = ExperimentConfig { command: command.clone(), globals: globals.clone() };
    execute(&resolved)
}

struct Output {
    target: Option<PathBuf>,
    lines: Vec<String>,
}

impl Output {
    fn new(target: Option<PathBuf>) -> Self {
        Output { target, lines: Vec::new() }
    }

    fn push(&mut self, line: String) {
        self.lines.push(line);
    }

    fn finish(self) -> Result<()> {
        let body = self.lines.join("\n") + "\n";
        match self.target {
            Some(path) => std::fs::write(&path, body)
                .with_context(|| format!("cannot write {}", path.display()))?,
            None => {
                std::io::stdout().write_all(body.as_bytes())?;
            }
        }
        Ok(())
    }
}

fn parse_dist(text: &str) -> Result<DistributionSpec> {
    text.parse::<DistributionSpec>().map_err(|e| anyhow!("{e}"))
}

fn parse_horizons(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let v: f64 = part
            .trim()
            .parse()
            .map_err(|_| anyhow!("bad horizon '{part}' (expected a number)"))?;
        if v <= 0.0 {
            bail!("horizons must be positive, got {v}");
        }
        out.push(v);
    }
    if out.is_empty() {
        bail!("horizon list is empty");
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn emit_estimate(
    config: &ExperimentConfig,
    kind: &str,
    d: usize,
    horizon: f64,
    report: &EstimateReport,
) -> Result<()> {
    let seed = config.globals.seed();
    let mut out = Output::new(config.globals.out.clone());
    match config.globals.format() {
        OutputFormat::Csv => {
            out.push(csv::provenance_comment(seed));
            out.push(csv::ESTIMATE_HEADER.to_string());
            out.push(csv::estimate_row(kind, d, horizon, report, seed));
        }
        OutputFormat::Json => {
            let summary = serde_json::json!({
                "kind": kind,
                "d": d,
                "horizon": horizon,
                "report": report,
                "seed": seed,
            });
            out.push(serde_json::to_string_pretty(&summary)?);
        }
    }
    out.finish()?;
    println!("{kind}: {:.6} ± {:.6} ({} reps)", report.mean, report.std_error, report.n_reps);
    Ok(())
}

fn execute(config: &ExperimentConfig) -> Result<RunStatus> {
    let seed = config.globals.seed();
    let reps = config.globals.reps();

    match &config.command {
        Command::ExcursionMean { kind, d } => {
            let target = match kind.as_str() {
                "x" => ExcursionTarget::ExclusionExit,
                "y" => ExcursionTarget::FreeExit,
                "y-n0" => ExcursionTarget::FreeNeighborTime,
                "y-0" => ExcursionTarget::FreeOriginTime,
                other => bail!("unknown excursion kind '{other}' (x | y | y-n0 | y-0)"),
            };
            validate_dim(*d)?;
            let base = SeededStream::new(seed, format!("cli/excursion/{kind}/d{d}"));
            let report = exclusion::excursion_mean(target, *d, reps, &base);
            emit_estimate(config, &format!("excursion-{kind}"), *d, 0.0, &report)?;
            Ok(RunStatus::Ok)
        }
        Command::LocalTime { kind, tracked, t, d } => {
            let walk = parse_walk_kind(kind)?;
            let tracked_set = match tracked.as_str() {
                "n0" => TrackedSet::Neighbors,
                "n0bar" => TrackedSet::NeighborsAndOrigin,
                other => bail!("unknown tracked set '{other}' (n0 | n0bar)"),
            };
            validate_dim(*d)?;
            if *t < 0.0 {
                bail!("horizon must be nonnegative");
            }
            let base = SeededStream::new(seed, format!("cli/local-time/{kind}/{tracked}/d{d}"));
            let report = exclusion::local_time_estimate(walk, tracked_set, *t, *d, reps, &base);
            emit_estimate(config, &format!("local-time-{kind}-{tracked}"), *d, *t, &report)?;
            Ok(RunStatus::Ok)
        }
        Command::GreenConstant { steps } => {
            let g = green::green_constant_d3();
            let base = SeededStream::new(seed, "cli/green");
            let walk = green::green_walk_estimate(*steps, reps, &base);
            let mut out = Output::new(config.globals.out.clone());
            match config.globals.format() {
                OutputFormat::Csv => {
                    out.push(csv::provenance_comment(seed));
                    out.push(csv::ESTIMATE_HEADER.to_string());
                    let quad = EstimateReport {
                        n_reps: 0,
                        mean: g,
                        std_error: 0.0,
                        extra: Default::default(),
                    };
                    out.push(csv::estimate_row("green-quadrature", 3, 0.0, &quad, seed));
                    out.push(csv::estimate_row("green-walk", 3, *steps as f64, &walk, seed));
                }
                OutputFormat::Json => {
                    out.push(serde_json::to_string_pretty(&serde_json::json!({
                        "green_quadrature": g,
                        "pair_adjacency_constant": green::pair_adjacency_constant_d3(),
                        "green_walk": walk,
                        "seed": seed,
                    }))?);
                }
            }
            out.finish()?;
            println!(
                "G(0,0) = {g:.6} (quadrature); walk cross-check {:.6} ± {:.6}; (G-1)/2 = {:.6}",
                walk.mean,
                walk.std_error,
                green::pair_adjacency_constant_d3()
            );
            Ok(RunStatus::Ok)
        }
        Command::RenewalRatio { u1, u2, v, t } => {
            let spec = RenewalSpec {
                u1: parse_dist(u1)?,
                u2: parse_dist(u2)?,
                v: parse_dist(v)?,
            };
            if *t <= 0.0 {
                bail!("horizon must be positive");
            }
            let base = SeededStream::new(seed, "cli/renewal-ratio");
            let est = renewal::kappa_ratio(&spec, *t, reps, &base);
            if let Some(warning) = &est.warning {
                eprintln!("warning: {warning}");
            }
            emit_estimate(config, "renewal-ratio", 0, *t, &est.report)?;
            Ok(RunStatus::Ok)
        }
        Command::DeltaMax { u2, k } => {
            let u2 = parse_dist(u2)?;
            let base = SeededStream::new(seed, "cli/delta-max");
            let report = renewal::delta_max_statistic(&u2, *k, reps, &base)
                .map_err(|e| anyhow!("{e}"))?;
            emit_estimate(config, "delta-max", 0, *k as f64, &report)?;
            Ok(RunStatus::Ok)
        }
        Command::NtSublinearity { u, v, horizons } => {
            let spec = RenewalSpec {
                u1: parse_dist(u)?,
                u2: parse_dist(u)?,
                v: parse_dist(v)?,
            };
            let grid = parse_horizons(horizons)?;
            let base = SeededStream::new(seed, "cli/nt-sublinearity");
            let series = renewal::cycle_rate_series(&spec, &grid, reps, &base);
            let mut out = Output::new(config.globals.out.clone());
            match config.globals.format() {
                OutputFormat::Csv => {
                    out.push(csv::provenance_comment(seed));
                    out.push(csv::ESTIMATE_HEADER.to_string());
                    for (t, r) in grid.iter().zip(series.iter()) {
                        out.push(csv::estimate_row("nt-over-t", 0, *t, r, seed));
                    }
                }
                OutputFormat::Json => {
                    out.push(serde_json::to_string_pretty(&serde_json::json!({
                        "horizons": grid,
                        "series": series,
                        "seed": seed,
                    }))?);
                }
            }
            out.finish()?;
            for (t, r) in grid.iter().zip(series.iter()) {
                println!("E[N_t]/t at t={t}: {:.6} ± {:.6}", r.mean, r.std_error);
            }
            Ok(RunStatus::Ok)
        }
        Command::PsiMean { lambda, t, cap } => {
            if *lambda < 0.0 || *t < 0.0 {
                bail!("lambda and t must be nonnegative");
            }
            let base = SeededStream::new(seed, "cli/psi-mean");
            let mut truncated = 0u64;
            let samples: Vec<f64> = stirsim_core::report::run_replications_map(&base, reps, |s| {
                let run = genealogy::evolve_psi(*lambda, &[*t], *cap, s);
                (run.counts[0] as f64, run.truncated)
            })
            .into_iter()
            .map(|(count, trunc)| {
                if trunc {
                    truncated += 1;
                }
                count
            })
            .collect();
            let report = EstimateReport::from_samples(&samples)
                .with_extra("truncated_fraction", truncated as f64 / reps as f64);
            emit_estimate(config, "psi-mean", 0, *t, &report)?;
            let frac = truncated as f64 / reps as f64;
            if frac > 0.0 {
                eprintln!("warning: {truncated} of {reps} replications hit the population cap");
            }
            if frac > 0.5 {
                return Ok(RunStatus::TruncationDominated);
            }
            Ok(RunStatus::Ok)
        }
        Command::CoupledRun { lambda, n_stir, d, t, checkpoints, cap, trace } => {
            validate_dim(*d)?;
            if *lambda < 0.0 || *n_stir < 0.0 || *t <= 0.0 {
                bail!("lambda, n-stir must be nonnegative and t positive");
            }
            let grid = match checkpoints {
                Some(text) => {
                    let mut g = parse_horizons(text)?;
                    if *g.last().unwrap() < *t {
                        g.push(*t);
                    }
                    g
                }
                None => vec![*t],
            };
            let base = SeededStream::new(seed, "cli/coupled-run");
            let opts = CoupledOptions { pop_cap: *cap, record_events: trace.is_some() };
            let mut truncated = 0u64;
            let mut free_rows: Vec<Vec<u64>> = Vec::new();
            let mut thinned_rows: Vec<Vec<u64>> = Vec::new();
            for i in 0..reps {
                let s = base.substream(format!("rep/{i}"));
                let run = genealogy::evolve_coupled(*lambda, *n_stir, *d, &grid, &opts, &s)
                    .map_err(anyhow::Error::new)?;
                if run.truncated {
                    truncated += 1;
                }
                if i == 0 {
                    if let (Some(path), Some(events)) = (trace, &run.events) {
                        let mut lines = vec![
                            csv::provenance_comment(seed),
                            csv::EVENT_LOG_HEADER.to_string(),
                        ];
                        lines.extend(events.iter().map(csv::event_log_row));
                        std::fs::write(path, lines.join("\n") + "\n")
                            .with_context(|| format!("cannot write {}", path.display()))?;
                    }
                }
                free_rows.push(run.free_counts);
                thinned_rows.push(run.thinned_counts);
            }
            let mut out = Output::new(config.globals.out.clone());
            let col_mean = |rows: &[Vec<u64>], j: usize| {
                let vals: Vec<f64> = rows.iter().map(|r| r[j] as f64).collect();
                EstimateReport::from_samples(&vals)
            };
            match config.globals.format() {
                OutputFormat::Csv => {
                    out.push(csv::provenance_comment(seed));
                    out.push(csv::ESTIMATE_HEADER.to_string());
                    for (j, cp) in grid.iter().enumerate() {
                        out.push(csv::estimate_row("coupled-free", *d, *cp, &col_mean(&free_rows, j), seed));
                        out.push(csv::estimate_row(
                            "coupled-thinned",
                            *d,
                            *cp,
                            &col_mean(&thinned_rows, j),
                            seed,
                        ));
                    }
                }
                OutputFormat::Json => {
                    let free: Vec<EstimateReport> =
                        (0..grid.len()).map(|j| col_mean(&free_rows, j)).collect();
                    let thinned: Vec<EstimateReport> =
                        (0..grid.len()).map(|j| col_mean(&thinned_rows, j)).collect();
                    out.push(serde_json::to_string_pretty(&serde_json::json!({
                        "checkpoints": grid,
                        "free": free,
                        "thinned": thinned,
                        "truncated": truncated,
                        "seed": seed,
                    }))?);
                }
            }
            out.finish()?;
            let last = grid.len() - 1;
            println!(
                "coupled at t={}: free {:.4}, thinned {:.4} ({} runs, {} truncated)",
                grid[last],
                col_mean(&free_rows, last).mean,
                col_mean(&thinned_rows, last).mean,
                reps,
                truncated
            );
            if truncated as f64 / reps as f64 > 0.5 {
                return Ok(RunStatus::TruncationDominated);
            }
            Ok(RunStatus::Ok)
        }
        Command::EventE { lambda, n_stir } => {
            validate_window(*n_stir)?;
            let base = SeededStream::new(seed, "cli/event-e");
            let report = genealogy::estimate_event_e(*lambda, *n_stir, reps, &base);
            let formula = genealogy::event_e_probability(*lambda, *n_stir);
            emit_estimate(config, "event-e", 0, 0.0, &report)?;
            println!("closed form: {formula:.6e}");
            Ok(RunStatus::Ok)
        }
        Command::EventI { lambda, n_stir, d } | Command::EventJ { lambda, n_stir, d } => {
            validate_dim(*d)?;
            validate_window(*n_stir)?;
            let is_i = matches!(config.command, Command::EventI { .. });
            let name = if is_i { "event-i" } else { "event-j" };
            let base = SeededStream::new(seed, format!("cli/{name}"));
            let est = if is_i {
                genealogy::estimate_event_i(*lambda, *n_stir, *d, reps, &base)
            } else {
                genealogy::estimate_event_j(*lambda, *n_stir, *d, reps, &base)
            };
            if est.audit_violations > 0 {
                return Err(anyhow::Error::new(genealogy::InvariantViolation {
                    time: 0.0,
                    what: format!(
                        "{} fresh-descendant audit violations on {} occurrences",
                        est.audit_violations, est.occurrences
                    ),
                }));
            }
            emit_estimate(config, name, *d, 0.0, &est.report)?;
            println!("occurrences: {}", est.occurrences);
            Ok(RunStatus::Ok)
        }
        Command::Criterion { lambda, n_stir, d, p_i } => {
            validate_dim(*d)?;
            validate_window(*n_stir)?;
            let (verdict, p_lower) = match p_i {
                Some(p) => {
                    if !(0.0..=1.0).contains(p) {
                        bail!("p-i must lie in [0, 1]");
                    }
                    (genealogy::extinction_criterion(*lambda, *n_stir, *p), *p)
                }
                None => {
                    let base = SeededStream::new(seed, "cli/criterion");
                    let est = genealogy::estimate_event_i(*lambda, *n_stir, *d, reps, &base);
                    let lower = (est.report.mean - 3.0 * est.report.std_error).clamp(0.0, 1.0);
                    (
                        genealogy::extinction_criterion_from_estimate(*lambda, *n_stir, &est.report),
                        lower,
                    )
                }
            };
            let t_star = genealogy::collision_window(*n_stir);
            let bound = (t_star * (lambda - 1.0)).exp() - 2.0 * p_lower;
            println!(
                "criterion at lambda={lambda}, N={n_stir}: bound {bound:.6} -> {}",
                match verdict {
                    CriterionVerdict::ExtinctGuaranteed => "extinct-guaranteed",
                    CriterionVerdict::Inconclusive => "inconclusive",
                }
            );
            Ok(RunStatus::Ok)
        }
        Command::Survival { lambda, n_stir, d, t, cap } => {
            validate_dim(*d)?;
            if *lambda < 0.0 || *n_stir < 0.0 || *t <= 0.0 {
                bail!("lambda, n-stir must be nonnegative and t positive");
            }
            let base = SeededStream::new(seed, "cli/survival");
            let est = contact::survival_probability(*lambda, *n_stir, *d, *t, *cap, reps, &base);
            let mut out = Output::new(config.globals.out.clone());
            match config.globals.format() {
                OutputFormat::Csv => {
                    out.push(csv::provenance_comment(seed));
                    out.push(csv::SURVIVAL_HEADER.to_string());
                    out.push(csv::survival_row(*d, *n_stir, *lambda, *t, *cap, &est, seed));
                }
                OutputFormat::Json => {
                    out.push(serde_json::to_string_pretty(&serde_json::json!({
                        "report": est.report,
                        "cap_fraction": est.cap_fraction,
                        "alive_fraction": est.alive_fraction,
                        "seed": seed,
                    }))?);
                }
            }
            out.finish()?;
            println!(
                "survival: {:.4} ± {:.4} (cap-censored fraction {:.4})",
                est.report.mean, est.report.std_error, est.cap_fraction
            );
            if est.cap_fraction > 0.5 {
                return Ok(RunStatus::TruncationDominated);
            }
            Ok(RunStatus::Ok)
        }
        Command::LambdaC { n_stir, d, t, cap, threshold, tol, reps_per_probe, lo, hi } => {
            validate_dim(*d)?;
            if !(0.0..1.0).contains(threshold) {
                bail!("threshold must lie in [0, 1)");
            }
            if *tol <= 0.0 {
                bail!("tolerance must be positive");
            }
            let lc = LambdaCConfig {
                d: *d,
                n_stir: *n_stir,
                horizon: *t,
                pop_cap: *cap,
                survival_threshold: *threshold,
                tolerance: *tol,
                reps_per_probe: *reps_per_probe,
                lo: *lo,
                hi: *hi,
            };
            let base = SeededStream::new(seed, "cli/lambda-c");
            let bracket = contact::estimate_lambda_c(&lc, &base).map_err(|e| anyhow!("{e}"))?;
            let mut out = Output::new(config.globals.out.clone());
            match config.globals.format() {
                OutputFormat::Csv => {
                    out.push(csv::provenance_comment(seed));
                    out.push(csv::PROBE_HEADER.to_string());
                    for probe in &bracket.probes {
                        out.push(csv::probe_row(probe));
                    }
                }
                OutputFormat::Json => {
                    out.push(serde_json::to_string_pretty(&serde_json::json!({
                        "lo": bracket.lo,
                        "hi": bracket.hi,
                        "probes": bracket.probes.len(),
                        "seed": seed,
                    }))?);
                }
            }
            out.finish()?;
            println!(
                "lambda-c proxy bracket: [{:.4}, {:.4}] after {} probes \
                 (finite-horizon proxy at T={t}, cap={cap}, threshold={threshold})",
                bracket.lo,
                bracket.hi,
                bracket.probes.len()
            );
            Ok(RunStatus::Ok)
        }
        Command::Bound { d, n_stir } => {
            if !(*d == 2 || *d == 3) {
                bail!("the bound is stated for d in {{2, 3}}");
            }
            if *n_stir <= std::f64::consts::E {
                bail!("the bound needs stirring rate > e");
            }
            let bound = contact::asymptotic_lower_bound(*d, *n_stir);
            println!("asymptotic lower bound at d={d}, N={n_stir}: {bound:.8}");
            Ok(RunStatus::Ok)
        }
        Command::Suite { name } => {
            let outcomes = suite::suite_bundle(name, seed).ok_or_else(|| {
                anyhow!(
                    "unknown suite '{name}' (expected one of {:?})",
                    suite::SUITE_NAMES
                )
            })?;
            let mut all_pass = true;
            for outcome in &outcomes {
                println!("{}", outcome.line());
                all_pass &= outcome.pass;
            }
            if !all_pass {
                return Err(anyhow::Error::new(genealogy::InvariantViolation {
                    time: 0.0,
                    what: format!("suite '{name}' has failing criteria"),
                }));
            }
            Ok(RunStatus::Ok)
        }
    }
}

fn parse_walk_kind(kind: &str) -> Result<WalkKind> {
    match kind {
        "x" => Ok(WalkKind::ExclusionDifference),
        "y" => Ok(WalkKind::FreeDifference),
        other => bail!("unknown walk kind '{other}' (x | y)"),
    }
}

fn validate_dim(d: usize) -> Result<()> {
    if !(1..=3).contains(&d) {
        bail!("dimension must be 1, 2 or 3, got {d}");
    }
    Ok(())
}

fn validate_window(n_stir: f64) -> Result<()> {
    if n_stir <= std::f64::consts::E {
        bail!("the collision window 1/log N needs N > e, got {n_stir}");
    }
    Ok(())
}
