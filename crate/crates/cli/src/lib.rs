//! Command-line driver: configuration, pipeline orchestration, artifacts and
//! exit codes.
//!
//! Exit codes: `0` success, `1` invalid input or I/O failure, `2` a
//! verification failed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use congested_flow::battery::{run_battery, BatteryOptions, Fault};
use congested_flow::bench::{growth_ratio, linear, n_log_n, time_evolve, time_projection, time_projection_feasible, Timing};
use congested_flow::cone::{project_onto_cone, qp_oracle_project, SpacingCone};
use congested_flow::dynamics::{evolve, pressure_measure, EventTimeline};
use congested_flow::eulerian::{pressure_pushforward, test_family};
use congested_flow::fields::{build_fields, convergence_study, FieldTrace};
use congested_flow::initdata::quantile_sample;
use congested_flow::report::{Check, Report};
use congested_flow::scenarios::{
    check_manifest, rebound_solution, selection_test, sticky_solution, two_block_datum, AnalyticSolution,
    SelectionReport,
};

use config::{ConfigError, Resolved};

#[derive(Debug, Parser)]
#[command(name = "congested-flow", version, about = "Sticky particles under a maximal packing constraint")]
pub struct Cli {
    /// Scenario configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory; overrides `output` in the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Treat warnings (e.g. non-monotone convergence) as failures.
    #[arg(long, global = true)]
    pub strict: bool,

    /// Corrupt the input of one verification check (negative control).
    #[arg(long, global = true, value_name = "FAULT")]
    pub inject: Option<String>,

    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, value_name = "K", env = "CONGESTED_FLOW_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve one discretization and write events, states, multipliers,
    /// pressure and Eulerian snapshots.
    Simulate,
    /// Self-convergence table over `n_list`.
    Converge,
    /// Full invariant battery; writes verification.json.
    Verify,
    /// Two-block collision: selection test and both analytic continuations.
    Appendixc {
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [64, 256, 1024])]
        n_list: Vec<usize>,
    },
    /// Time the projection kernel and the solver.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [1000, 10000, 100000])]
        sizes: Vec<usize>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Library(congested_flow::Error),
    Io(io::Error),
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "invalid configuration: {e}"),
            CliError::Library(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<congested_flow::Error> for CliError {
    fn from(e: congested_flow::Error) -> Self {
        CliError::Library(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Library(congested_flow::Error::InvariantViolation(_))
            | CliError::Library(congested_flow::Error::InternalConsistency(_)) => 2,
            _ => 1,
        }
    }
}

/// Runs the command and returns the exit code.
pub fn run(cli: Cli) -> u8 {
    match dispatch(&cli) {
        Ok(passed) => {
            if passed {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let fault = cli
        .inject
        .as_deref()
        .map(|s| s.parse::<Fault>())
        .transpose()?;
    match &cli.command {
        Command::Simulate => {
            let r = load(cli)?;
            let out = out_dir(cli, r.output.as_deref(), true)?;
            simulate(&r, out.as_deref(), fault)
        }
        Command::Converge => {
            let r = load(cli)?;
            let out = out_dir(cli, r.output.as_deref(), true)?;
            converge(&r, out.as_deref(), cli.strict)
        }
        Command::Verify => {
            let r = load(cli)?;
            let out = out_dir(cli, r.output.as_deref(), false)?;
            verify(&r, out.as_deref(), fault)
        }
        Command::Appendixc { eta, n_list } => appendixc(*eta, n_list, out_dir(cli, None, false)?.as_deref()),
        Command::Bench { sizes } => bench(sizes, out_dir(cli, None, false)?.as_deref()),
    }
}

fn load(cli: &Cli) -> Result<Resolved, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    Ok(config::load(path)?)
}

fn out_dir(cli: &Cli, from_config: Option<&Path>, required: bool) -> Result<Option<PathBuf>, CliError> {
    let dir = cli.out.clone().or_else(|| from_config.map(Path::to_path_buf));
    if let Some(d) = &dir {
        std::fs::create_dir_all(d)?;
    } else if required {
        return Err(CliError::Usage("no output directory: pass --out DIR or set `output`".into()));
    }
    Ok(dir)
}

struct Run {
    timeline: EventTimeline,
    trace: FieldTrace,
}

fn run_pipeline(r: &Resolved, n: usize) -> Result<Run, CliError> {
    let (x0, u0) = quantile_sample(&r.datum, n)?;
    let cone = SpacingCone::canonical(n)?;
    let timeline = evolve(&x0, &u0, &cone, r.horizon)?;
    let trace = build_fields(&timeline, r.padding)?;
    Ok(Run { timeline, trace })
}

#[derive(Debug, Serialize)]
struct VerificationReport<'a> {
    command: &'a str,
    scenario: &'a str,
    n: usize,
    horizon: f64,
    seed: u64,
    inject: Option<&'a str>,
    passed: bool,
    checks: &'a [Check],
}

fn battery_report(r: &Resolved, run: &Run, fault: Option<Fault>) -> Result<Report, CliError> {
    let opts = BatteryOptions {
        sample_times: r.sample_times.clone(),
        semigroup_pairs: r.verify.semigroup_pairs,
        seed: r.seed,
        weak_tol: r.verify.weak_tol,
        fault,
    };
    let mut report = run_battery(&run.trace, &opts)?;
    if let Some(s) = &r.scenario {
        for m in check_manifest(s, &run.timeline) {
            report.push(
                Check::at_most(format!("manifest.{}", m.key), (m.measured - m.expected).abs(), m.tolerance)
                    .with_detail(format!("measured {}, expected {}", m.measured, m.expected)),
            );
        }
    }
    Ok(report)
}

fn print_report(report: &Report) {
    for c in &report.checks {
        println!(
            "{:4} {:32} {:>12.4e} (threshold {:.1e}){}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold,
            if c.detail.is_empty() { String::new() } else { format!("  {}", c.detail) }
        );
    }
}

fn write_report(path: &Path, command: &str, r: &Resolved, n: usize, fault: Option<Fault>, report: &Report) -> io::Result<()> {
    let inject = fault.map(|f| Fault::NAMES[f as usize]);
    output::write_json(
        path,
        &VerificationReport {
            command,
            scenario: &r.label,
            n,
            horizon: r.horizon,
            seed: r.seed,
            inject,
            passed: report.passed(),
            checks: &report.checks,
        },
    )
}

fn simulate(r: &Resolved, out: Option<&Path>, fault: Option<Fault>) -> Result<bool, CliError> {
    let out = out.expect("required");
    let n = r.require_n("simulate")?;
    let run = run_pipeline(r, n)?;
    let tl = &run.timeline;
    output::write_events(&out.join("events.csv"), tl)?;
    output::write_states(&out.join("states.csv"), tl, &r.sample_times)?;
    output::write_multipliers(&out.join("multipliers.csv"), tl, &r.sample_times)?;
    output::write_pressure_atoms(&out.join("pressure_atoms.csv"), run.trace.pressure(), n)?;
    output::write_pressure(&out.join("pressure.csv"), &pressure_pushforward(&run.trace))?;
    output::write_snapshots(&out.join("snapshots.csv"), tl, &r.sample_times, r.padding)?;
    println!(
        "{}: n = {n}, horizon = {}, {} events, pressure mass {:.6}",
        r.label,
        r.horizon,
        tl.events().len(),
        run.trace.pressure().total_mass()
    );
    if !r.verify.enabled {
        return Ok(true);
    }
    let report = battery_report(r, &run, fault)?;
    write_report(&out.join("report.json"), "simulate", r, n, fault, &report)?;
    print_report(&report);
    Ok(report.passed())
}

/// Random instances of the projection against the exhaustive oracle.
fn oracle_suite(seed: u64) -> Result<Vec<Check>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut diff = 0.0f64;
    let mut certs = true;
    for m in 2..=8 {
        let cone = SpacingCone::canonical(m)?;
        for _ in 0..50 {
            let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = project_onto_cone(&cone, &y)?;
            let (q, cert) = qp_oracle_project(&cone, &y)?;
            certs &= cert.passed;
            diff = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(diff, f64::max);
        }
    }
    Ok(vec![
        Check::at_most("cone_oracle_suite", diff, 1e-9),
        Check::flag("cone_oracle_suite_certificates", certs),
    ])
}

fn verify(r: &Resolved, out: Option<&Path>, fault: Option<Fault>) -> Result<bool, CliError> {
    let n = r.require_n("verify")?;
    let run = run_pipeline(r, n)?;
    let mut report = battery_report(r, &run, fault)?;
    for c in oracle_suite(r.seed)? {
        report.push(c);
    }
    if let Some(dir) = out {
        write_report(&dir.join("verification.json"), "verify", r, n, fault, &report)?;
    }
    print_report(&report);
    Ok(report.passed())
}

#[derive(Debug, Serialize)]
struct ConvergenceSummaryRow {
    n: usize,
    sup_dist_x: f64,
    sup_dist_u: f64,
    sup_dist_lambda: f64,
    pressure_mass: f64,
    events: usize,
}

#[derive(Debug, Serialize)]
struct ConvergenceSummaryFile {
    scenario: String,
    reference_n: usize,
    summaries: Vec<ConvergenceSummaryRow>,
    rate_x: Option<f64>,
    rate_u: Option<f64>,
    rate_lambda: Option<f64>,
    x_monotone: bool,
    pressure_mass_ratio: Option<f64>,
    warnings: Vec<String>,
}

fn converge(r: &Resolved, out: Option<&Path>, strict: bool) -> Result<bool, CliError> {
    let out = out.expect("required");
    let n_list = r.require_n_list("converge")?;
    let table = convergence_study(&r.datum, &n_list, r.horizon, &r.sample_times, r.padding)?;
    output::write_convergence(&out.join("convergence.csv"), &table)?;
    let mut warnings = Vec::new();
    let monotone = table.x_monotone();
    if !monotone {
        warnings.push("sup-in-time L2 distance of X is not decreasing in n".to_string());
    }
    let summary = ConvergenceSummaryFile {
        scenario: r.label.clone(),
        reference_n: table.reference_n,
        summaries: table
            .summaries
            .iter()
            .map(|s| ConvergenceSummaryRow {
                n: s.n,
                sup_dist_x: s.sup_dist_x,
                sup_dist_u: s.sup_dist_u,
                sup_dist_lambda: s.sup_dist_lambda,
                pressure_mass: s.pressure_mass,
                events: s.events,
            })
            .collect(),
        rate_x: table.rate_x,
        rate_u: table.rate_u,
        rate_lambda: table.rate_lambda,
        x_monotone: monotone,
        pressure_mass_ratio: table.pressure_mass_ratio(),
        warnings: warnings.clone(),
    };
    output::write_json(&out.join("convergence_summary.json"), &summary)?;
    println!("reference n = {}", table.reference_n);
    for s in &summary.summaries {
        println!(
            "n = {:>7}  sup dist X {:.4e}  U {:.4e}  Lambda {:.4e}  pressure mass {:.6}",
            s.n, s.sup_dist_x, s.sup_dist_u, s.sup_dist_lambda, s.pressure_mass
        );
    }
    match table.rate_x {
        Some(rate) => println!("empirical rate for X: {rate:.3}"),
        None => println!("no rate fit (fewer than two resolutions below the reference)"),
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(!(strict && !warnings.is_empty()))
}

#[derive(Debug, Serialize)]
struct BranchCheck {
    name: &'static str,
    max_weak_residual: f64,
    complementarity_defect: f64,
    min_pressure: f64,
    max_oleinik_ratio: f64,
    pressure_mass: f64,
    passed: bool,
}

fn branch_check(sol: &AnalyticSolution, horizon: f64) -> BranchCheck {
    let family = test_family(horizon, -1.0, 2.0 + sol.eta());
    let mut res = 0.0f64;
    for phi in &family {
        res = res.max(sol.weak_residual_mass(phi, horizon).abs());
        res = res.max(sol.weak_residual_momentum(phi, horizon).abs());
    }
    let oleinik = (1..=100)
        .map(|k| sol.oleinik_ratio(horizon * k as f64 / 100.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let complementarity = sol.complementarity_defect();
    let min_p = sol.min_pressure();
    BranchCheck {
        name: sol.name(),
        max_weak_residual: res,
        complementarity_defect: complementarity,
        min_pressure: min_p,
        max_oleinik_ratio: oleinik,
        pressure_mass: sol.pressure_mass(),
        passed: res <= 1e-8 && complementarity <= 1e-10 && min_p >= 0.0 && oleinik < 1.0,
    }
}

#[derive(Debug, Serialize)]
struct AppendixCReport {
    eta: f64,
    collision_time: f64,
    branches: Vec<BranchCheck>,
    selection: Vec<SelectionReport>,
    both_branches_admissible: bool,
    sticky_selected: bool,
    passed: bool,
}

fn appendixc(eta: f64, n_list: &[usize], out: Option<&Path>) -> Result<bool, CliError> {
    two_block_datum(eta)?;
    if let Some(&n) = n_list.iter().find(|&&n| n < 2) {
        return Err(CliError::Usage(format!("--n-list entries need at least 2 particles, got {n}")));
    }
    let sticky = sticky_solution(eta)?;
    let rebound = rebound_solution(eta)?;
    let horizon = sticky.collision_time() + 0.5;
    let branches = vec![branch_check(&sticky, horizon), branch_check(&rebound, horizon)];
    let mut selection = Vec::new();
    for &n in n_list {
        selection.push(selection_test(eta, n)?);
        if let Some(dir) = out {
            let (x0, u0) = quantile_sample(&two_block_datum(eta)?, n)?;
            let tl = evolve(&x0, &u0, &SpacingCone::canonical(n)?, horizon)?;
            let profile = pressure_measure(&tl)?.summed_profile(n);
            let rows: Vec<_> = profile
                .iter()
                .enumerate()
                .map(|(k, &p)| {
                    let w = k as f64 / n as f64;
                    (w, p, sticky.pressure_profile(w), rebound.pressure_profile(w))
                })
                .collect();
            output::write_profiles(&dir.join(format!("profile_n{n}.csv")), &rows)?;
        }
    }
    let both = branches.iter().all(|b| b.passed);
    let sticky_selected = selection.iter().all(|s| s.passed);
    let report = AppendixCReport {
        eta,
        collision_time: sticky.collision_time(),
        both_branches_admissible: both,
        sticky_selected,
        passed: both && sticky_selected,
        branches,
        selection,
    };
    if let Some(dir) = out {
        output::write_json(&dir.join("appendixc.json"), &report)?;
    }
    println!("eta = {eta}, t* = {}", report.collision_time);
    for b in &report.branches {
        println!(
            "{:8} weak residual {:.2e}, complementarity {:.1e}, min P {}, max Oleinik {:.4}, mass {:.6}: {}",
            b.name,
            b.max_weak_residual,
            b.complementarity_defect,
            b.min_pressure,
            b.max_oleinik_ratio,
            b.pressure_mass,
            if b.passed { "admissible" } else { "FAIL" }
        );
    }
    for s in &report.selection {
        println!(
            "n = {:>6}: final merge {}, post velocity {:.1e}, dist sticky {:.1e}, dist rebound {:.4}, \
             mass {:.6}, profile L1 {:.1e}: {}",
            s.n,
            s.final_merge_time,
            s.max_post_velocity,
            s.dist_sticky_u,
            s.dist_rebound_u,
            s.pressure_mass,
            s.profile_l1_error,
            if s.passed { "sticky" } else { "FAIL" }
        );
    }
    Ok(report.passed)
}

/// Allowed excess of the measured growth over the model growth.
pub const BENCH_RATIO: f64 = 1.5;

#[derive(Debug, Serialize)]
struct BenchReport {
    projection: Vec<Timing>,
    projection_feasible: Vec<Timing>,
    evolve: Vec<Timing>,
    projection_growth_vs_linear: Option<f64>,
    evolve_growth_vs_n_log_n: Option<f64>,
    monotone: bool,
    /// Feasible input is never slower than random input of the same size.
    pass_through_cheaper: bool,
    passed: bool,
}

fn bench(sizes: &[usize], out: Option<&Path>) -> Result<bool, CliError> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.is_empty() || sizes[0] < 2 {
        return Err(CliError::Usage("--sizes needs entries of at least 2".into()));
    }
    let projection: Vec<Timing> = sizes.iter().map(|&n| time_projection(n, 0)).collect::<Result<_, _>>()?;
    let feasible: Vec<Timing> = sizes.iter().map(|&n| time_projection_feasible(n)).collect::<Result<_, _>>()?;
    let evolve_t: Vec<Timing> = sizes.iter().map(|&n| time_evolve(n, 0)).collect::<Result<_, _>>()?;
    let pg = growth_ratio(&projection, linear);
    let eg = growth_ratio(&evolve_t, n_log_n);
    let monotone = projection.windows(2).all(|w| w[1].seconds > w[0].seconds)
        && evolve_t.windows(2).all(|w| w[1].seconds > w[0].seconds);
    let pass_through_cheaper = feasible.iter().zip(&projection).all(|(f, p)| f.seconds <= p.seconds);
    let passed = monotone
        && pass_through_cheaper
        && pg.is_none_or(|g| g <= BENCH_RATIO)
        && eg.is_none_or(|g| g <= BENCH_RATIO);
    let report = BenchReport {
        projection,
        projection_feasible: feasible,
        evolve: evolve_t,
        projection_growth_vs_linear: pg,
        evolve_growth_vs_n_log_n: eg,
        monotone,
        pass_through_cheaper,
        passed,
    };
    if let Some(dir) = out {
        let mut rows = Vec::new();
        for (kind, ts) in [
            ("projection", &report.projection),
            ("projection_feasible", &report.projection_feasible),
            ("evolve", &report.evolve),
        ] {
            for t in ts {
                rows.push(vec![kind.to_string(), t.n.to_string(), output::float(t.seconds)]);
            }
        }
        output::write_rows(&dir.join("bench.csv"), &["kind", "n", "seconds"], &rows)?;
        output::write_json(&dir.join("bench.json"), &report)?;
    }
    println!("{:>10} {:>14} {:>14} {:>14}", "n", "projection", "feasible", "evolve");
    for ((p, f), e) in report.projection.iter().zip(&report.projection_feasible).zip(&report.evolve) {
        println!("{:>10} {:>14.4e} {:>14.4e} {:>14.4e}", p.n, p.seconds, f.seconds, e.seconds);
    }
    match (pg, eg) {
        (Some(p), Some(e)) => println!(
            "worst growth: projection {p:.2} x linear, evolve {e:.2} x n log n (limit {BENCH_RATIO})"
        ),
        _ => println!("single size: no ratio test"),
    }
    Ok(passed)
}
