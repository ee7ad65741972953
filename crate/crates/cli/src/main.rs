//! `wgfb`: command-line front end of the waveguide-feedback simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use waveguide_feedback::ensemble::{
    execute, validate, Command, ConfigBuilder, Preset, RunConfig, ValidateOptions,
};
use waveguide_feedback::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "wgfb",
    version,
    about = "Quantum trajectories of a driven emitter with delayed coherent feedback"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (`run.master_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores (`run.threads`).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (`output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Start from a figure preset: fig2 to fig7, fig9, fig10.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Trajectory count relative to the published one (presets), or the
    /// scale of the validation suite.
    #[arg(long, global = true)]
    scale: Option<f64>,
    /// Override any key, e.g. `--set model.phi=3.14159`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Output photon flux and emitter population against time.
    Flux,
    /// Probabilities of 0, 1 and 2 photons in the loop against time.
    Loopprob,
    /// Waiting-time distribution of output detections.
    Wtd,
    /// Steady-state second-order correlation g2(t2).
    G2,
    /// Steady-state first-order correlation G1(t2) and g1(t2).
    G1,
    /// Incoherent output spectrum.
    Spectrum,
    /// One set of ensembles per value of `sweep.parameter`.
    Sweep,
    /// Oracle comparisons and invariant checks.
    Validate,
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut builder = ConfigBuilder::new();
    if let Some(name) = &cli.preset {
        let preset: Preset = name.parse()?;
        builder = match cli.scale {
            Some(scale) => builder.preset_scaled(preset, scale)?,
            None => builder.preset(preset)?,
        };
    }
    if let Some(path) = &cli.config {
        builder = builder.file(path)?;
    }
    for assignment in &cli.overrides {
        builder = builder.set(assignment)?;
    }
    if let Some(seed) = cli.seed {
        builder = builder.set(&format!("run.master_seed={seed}"))?;
    }
    if let Some(threads) = cli.threads {
        builder = builder.set(&format!("run.threads={threads}"))?;
    }
    if let Some(out) = &cli.out {
        let dir = toml::Value::String(out.display().to_string());
        builder = builder.set(&format!("output.dir={dir}"))?;
    }
    builder.build()
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParams(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn run_validate(cli: &Cli) -> ExitCode {
    let defaults = ValidateOptions::default();
    let opts = ValidateOptions {
        scale: cli.scale.unwrap_or(defaults.scale),
        master_seed: cli.seed.unwrap_or(defaults.master_seed),
        threads: cli.threads.unwrap_or(defaults.threads),
    };
    if !(opts.scale.is_finite() && opts.scale > 0.0) {
        eprintln!("error: --scale must be > 0");
        return ExitCode::from(EXIT_CONFIG);
    }
    let report = validate(&opts);
    for c in &report.checks {
        println!(
            "{} {:<22} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if report.passed() {
        println!("all {} checks passed", report.checks.len());
        ExitCode::SUCCESS
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        println!("{failed} of {} checks failed", report.checks.len());
        ExitCode::from(EXIT_VALIDATION)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let command = match cli.command {
        Cmd::Flux => Command::Flux,
        Cmd::Loopprob => Command::LoopProb,
        Cmd::Wtd => Command::Wtd,
        Cmd::G2 => Command::G2,
        Cmd::G1 => Command::G1,
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Sweep => Command::Sweep,
        Cmd::Validate => return run_validate(&cli),
    };
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match execute(command, &config) {
        Ok(manifest) => {
            let n: usize = manifest.ensembles.iter().map(|r| r.completed).sum();
            println!(
                "{}: {} trajectories in {:.1} s; wrote {} to {}",
                manifest.command,
                n,
                manifest.elapsed_seconds,
                manifest.outputs.join(", "),
                config.output.dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{} failed: {e}", command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
