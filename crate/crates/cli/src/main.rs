//! Command-line runner: scenario simulation, the 1-D solver demo,
//! calibration fitting, and config linting.
//!
//! Exit codes are scriptable: 0 success, 1 a run that started but failed
//! (non-convergence, model domain violations, artifact write failures),
//! 2 unusable input (missing or invalid config, malformed dataset).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mbsa::demo::{run_demo, DemoConfig};
use mbsa::harness::PhaseName;
use mbsa::io::{self, ReportDocument};
use mbsa::magnetic::{calibrate, CalibrationConfig, CalibrationData};
use mbsa::scenario::{
    GrooveConfig, GrooveScenario, MagneticConfig, MagneticScenario, ScenarioConfig,
    ScenarioError,
};
use mbsa::solver::SolverStatus;
use mbsa::topography::Contour;

/// Rig geometry used by `calibrate` when no rig file is given. Identical to
/// the bundled magnetic scenario so results line up with `simulate`.
const DEFAULT_RIG: &str = include_str!("../scenarios/magnetic.json");

#[derive(Parser)]
#[command(
    name = "mbsa",
    version,
    about = "Reconstructs surface topography from resonance-frequency scans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the 1-D fixed-point demo against gradient descent; write both traces.
    Demo1d(Demo1dArgs),
    /// Run a scenario file end to end and write all artifacts.
    Simulate(SimulateArgs),
    /// Fit interaction constants to a frequency-vs-gap dataset.
    Calibrate(CalibrateArgs),
    /// Parse and validate a scenario file without running it.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Demo1dArgs {
    /// Output directory for the trace files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Fixed-point step factor; values at or past the stability edge are
    /// allowed so divergence can be demonstrated.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Iteration cap for the fixed-point run.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the noise seed; ignored when the scenario is noiseless.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the solver step factor.
    #[arg(long)]
    beta: Option<f64>,
    /// Overrides the solver iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Dataset CSV with columns gap_m, omega_rad_s.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the result JSON.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Magnetic scenario file describing the rig; bundled rig when omitted.
    #[arg(long)]
    rig: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    /// Unusable input: exit 2.
    Usage(String),
    /// A run that started but did not finish cleanly: exit 1.
    Run(String),
}

fn usage(e: impl std::error::Error) -> Failure {
    Failure::Usage(describe(&e))
}

fn run_failure(e: impl std::error::Error) -> Failure {
    Failure::Run(describe(&e))
}

/// Error text with its cause chain, skipping causes a layer above already
/// spelled out.
fn describe(top: &dyn std::error::Error) -> String {
    let mut out = top.to_string();
    let mut current = top.source();
    while let Some(cause) = current {
        let text = cause.to_string();
        if !out.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
        current = cause.source();
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.quiet;
    let result = match cli.command {
        Command::Demo1d(args) => demo1d(&args, quiet),
        Command::Simulate(args) => simulate(&args, quiet),
        Command::Calibrate(args) => run_calibration(&args, quiet),
        Command::Validate(args) => validate(&args, quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn ensure_out_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path)
        .map_err(|e| Failure::Usage(format!("cannot create output directory {}: {e}", path.display())))
}

fn demo1d(args: &Demo1dArgs, quiet: bool) -> Result<(), Failure> {
    if !(args.beta.is_finite() && args.beta > 0.0) {
        return Err(Failure::Usage(format!("--beta must be positive, got {}", args.beta)));
    }
    if args.max_iter == 0 {
        return Err(Failure::Usage("--max-iter must be at least 1".to_string()));
    }
    ensure_out_dir(&args.out)?;
    let config = DemoConfig { beta: args.beta, max_iter: args.max_iter, ..DemoConfig::default() };
    let outcome = run_demo(&config).map_err(run_failure)?;

    io::write_trace_csv(&args.out.join("demo_mbsa_trace.csv"), &outcome.trace)
        .map_err(run_failure)?;
    io::write_gd_trace_csv(&args.out.join("demo_gd_trace.csv"), &outcome.gd)
        .map_err(run_failure)?;

    if !quiet {
        println!(
            "fixed point: {} after {} iterations, x = {}, |f(x)| = {:e}",
            outcome.trace.status(),
            outcome.trace.len(),
            outcome.final_x,
            outcome.final_residual
        );
        let gd = outcome.gd_final();
        println!(
            "gradient descent: stopped at x = {} with f = {} after {} iterations",
            gd.x, gd.f_value, gd.iter
        );
    }
    match outcome.trace.status() {
        SolverStatus::Converged => Ok(()),
        status => Err(Failure::Run(format!(
            "fixed-point iteration ended with status {status} after {} iterations; partial traces written to {}",
            outcome.trace.len(),
            args.out.display()
        ))),
    }
}

fn simulate(args: &SimulateArgs, quiet: bool) -> Result<(), Failure> {
    let mut config = io::read_scenario_json(&args.config).map_err(usage)?;
    apply_overrides(&mut config, args);
    ensure_out_dir(&args.out)?;
    match config {
        ScenarioConfig::VdwGroove(groove) => run_groove(&groove, &args.out, quiet),
        ScenarioConfig::Magnetic(magnetic) => run_magnetic(&magnetic, &args.out, quiet),
    }
}

fn apply_overrides(config: &mut ScenarioConfig, args: &SimulateArgs) {
    let (solver, noise) = match config {
        ScenarioConfig::VdwGroove(c) => (&mut c.solver, &mut c.noise),
        ScenarioConfig::Magnetic(c) => (&mut c.solver, &mut c.noise),
    };
    if let Some(beta) = args.beta {
        solver.beta = beta;
    }
    if let Some(max_iter) = args.max_iter {
        solver.max_iter = max_iter;
    }
    if let (Some(seed), Some(spec)) = (args.seed, noise.as_mut()) {
        spec.seed = seed;
    }
}

/// Prefixes the failing phase when the underlying message does not already
/// name it, so exit-1 diagnostics always locate the failure.
fn groove_run_error(e: ScenarioError) -> Failure {
    let phase = match &e {
        ScenarioError::PhaseFailed { completed, .. } => {
            PhaseName::EXECUTION_ORDER.get(completed.len()).copied()
        }
        _ => None,
    };
    let text = describe(&e);
    match phase {
        Some(name) if !text.contains(&name.to_string()) => {
            Failure::Run(format!("{name} phase: {text}"))
        }
        _ => Failure::Run(text),
    }
}

fn run_groove(config: &GrooveConfig, out: &Path, quiet: bool) -> Result<(), Failure> {
    let scenario = GrooveScenario::build(config).map_err(usage)?;
    let report = scenario.reconstruct_full().map_err(groove_run_error)?;

    for phase in &report.phases {
        let path = out.join(format!("trace_{}.csv", phase.name));
        io::write_trace_csv(&path, &phase.trace).map_err(run_failure)?;
        if !quiet {
            println!(
                "phase {}: {} in {} iterations, final residual {:e}",
                phase.name,
                phase.trace.status(),
                phase.trace.len(),
                phase.trace.final_record().error_norm
            );
        }
    }
    io::write_contour_csv(&out.join("contour.csv"), &report.contour).map_err(run_failure)?;
    io::write_json(&out.join("report.json"), &ReportDocument::from_groove(&report))
        .map_err(run_failure)?;
    if let Some(errors) = &report.errors {
        io::write_histogram_csv(&out.join("histogram.csv"), errors).map_err(run_failure)?;
        if !quiet {
            println!(
                "segment errors: median {:.4}%, max {:.4}%",
                errors.median_pct(),
                errors.max_pct()
            );
        }
    }
    if !quiet {
        println!("artifacts written to {}", out.display());
    }
    Ok(())
}

fn run_magnetic(config: &MagneticConfig, out: &Path, quiet: bool) -> Result<(), Failure> {
    let scenario = MagneticScenario::build(config).map_err(usage)?;
    let outcome = scenario.run().map_err(run_failure)?;

    for part in [&outcome.perpendicular, &outcome.parallel] {
        let path = out.join(format!("trace_{}.csv", part.part));
        io::write_trace_csv(&path, &part.trace).map_err(run_failure)?;
        if !quiet {
            println!(
                "part {}: {} in {} iterations, final residual {:e}",
                part.part,
                part.trace.status(),
                part.trace.len(),
                part.trace.final_record().error_norm
            );
        }
    }
    let profile: Vec<(f64, f64)> = outcome
        .perpendicular
        .stations
        .iter()
        .zip(&outcome.perpendicular.estimates)
        .map(|(&s, &g)| (s, g))
        .collect();
    let contour = Contour::from_points(&profile)
        .map_err(|e| Failure::Run(format!("estimated board profile is degenerate: {e}")))?;
    io::write_contour_csv(&out.join("contour.csv"), &contour).map_err(run_failure)?;
    io::write_json(&out.join("report.json"), &ReportDocument::from_magnetic(&outcome))
        .map_err(run_failure)?;
    io::write_histogram_csv(&out.join("histogram.csv"), &outcome.errors).map_err(run_failure)?;
    if !quiet {
        println!(
            "magnet gap errors: median {:.4}%, max {:.4}%",
            outcome.errors.median_pct(),
            outcome.errors.max_pct()
        );
        println!("artifacts written to {}", out.display());
    }
    Ok(())
}

/// The dataset column is in metres; the rig geometry works in millimetres.
fn to_rig_units(data: &CalibrationData) -> Result<CalibrationData, Failure> {
    let gaps_mm: Vec<f64> = data.gaps().iter().map(|g| g * 1000.0).collect();
    CalibrationData::new(gaps_mm, data.omegas().to_vec())
        .map_err(|e| Failure::Usage(describe(&e)))
}

fn run_calibration(args: &CalibrateArgs, quiet: bool) -> Result<(), Failure> {
    let dataset = io::read_calibration_csv(&args.config).map_err(usage)?;
    let data = to_rig_units(&dataset)?;

    let rig_config = match &args.rig {
        Some(path) => io::read_scenario_json(path).map_err(usage)?,
        None => serde_json::from_str(DEFAULT_RIG).expect("bundled rig parses"),
    };
    let ScenarioConfig::Magnetic(rig_config) = rig_config else {
        return Err(Failure::Usage("--rig must name a magnetic scenario".to_string()));
    };
    let rig = MagneticScenario::build(&rig_config).map_err(usage)?.model().clone();

    ensure_out_dir(&args.out)?;
    let result = calibrate(&rig, &data, &CalibrationConfig::default()).map_err(run_failure)?;
    io::write_json(&args.out.join("calibration.json"), &result).map_err(run_failure)?;
    if !quiet {
        println!(
            "calibrated C = {}, n = {}, omega0 = {} rad/s ({} iterations, residual {:e})",
            result.c, result.n, result.omega0, result.iterations, result.residual_norm
        );
    }
    Ok(())
}

fn validate(args: &ValidateArgs, quiet: bool) -> Result<(), Failure> {
    let config = io::read_scenario_json(&args.config).map_err(usage)?;
    let summary = match &config {
        ScenarioConfig::VdwGroove(groove) => {
            GrooveScenario::build(groove).map_err(usage)?;
            let phases = &groove.phases;
            let n = phases.outer_surface.segments
                + phases.lower_sidewall.segments
                + phases.upper_sidewall.segments
                + phases.base.segments;
            format!("vdw_groove scenario: 4 phases, {n} segments total")
        }
        ScenarioConfig::Magnetic(magnetic) => {
            MagneticScenario::build(magnetic).map_err(usage)?;
            format!(
                "magnetic scenario: {} board magnets read twice",
                magnetic.board.count
            )
        }
    };
    if !quiet {
        println!("{}: {summary}", args.config.display());
    }
    Ok(())
}
