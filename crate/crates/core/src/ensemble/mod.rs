//! Configuration, parallel ensembles, presets, file output and validation.
//!
//! [`execute`] runs one command against a validated [`RunConfig`] and
//! writes its CSV files plus a `manifest.json` into `output.dir`. Output
//! files depend only on the configuration, the master seed and the crate
//! version; the thread count never changes a byte.

mod config;
mod output;
mod presets;
mod runner;
mod tasks;
mod validate;

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::correlations::{g1_normalized, SpectrumSeries};
use crate::dynamics::Engine;
use crate::{Error, Result};

pub use config::{
    parse_override, sweep_point, ConfigBuilder, OutputFormat, OutputSettings, RunConfig,
    RunSettings, SweepSpec, WtdSettings,
};
pub use output::{
    correlation_csv, ensemble_csv, series_csv, spectrum_csv, sweep_csv, wtd_csv, OutputDir,
};
pub use presets::{Preset, DEFAULT_SCALE};
pub use runner::{run_tasks, EnsembleRecord, TaskSettings};
pub use tasks::{
    g1_ensemble, g2_ensemble, run_ensemble, spectrum_from, steady_state_time, steady_summary,
    sweep, wtd_ensemble, G1Result, G2Result, SteadyStateTime, SteadySummary, SweepRow, SweepTable,
    TrajectoryEnsemble, PILOT_SEED_OFFSET,
};
pub use validate::{
    closure_checks, coarse_step_rejected, collision_equivalence, collision_params, compare_series,
    counting_identity, dt_halving, halving_params, markovian_limit, markovian_params,
    model_std_error, regression_g2, shift_mutation, threaded_determinism, validate, ErrorModel,
    ValidateOptions, ValidationReport, ROUNDING_FLOOR,
};

/// The ensemble commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Output flux and TLS population against time.
    Flux,
    /// Loop photon-number probabilities against time.
    LoopProb,
    /// Waiting-time histogram.
    Wtd,
    G2,
    G1,
    Spectrum,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Flux => "flux",
            Command::LoopProb => "loopprob",
            Command::Wtd => "wtd",
            Command::G2 => "g2",
            Command::G1 => "g1",
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config: RunConfig,
    /// Steady-state time used by correlation commands.
    pub t_ss: Option<f64>,
    /// Seed bookkeeping of every ensemble run, pilot included.
    pub ensembles: Vec<EnsembleRecord>,
    pub outputs: Vec<String>,
    /// Command-specific scalars (steady-state populations, spectrum plateau).
    pub summary: serde_json::Value,
    pub started_unix_seconds: f64,
    pub elapsed_seconds: f64,
    pub error: Option<String>,
}

struct Context<'a> {
    config: &'a RunConfig,
    out: OutputDir,
    ensembles: Vec<EnsembleRecord>,
    t_ss: Option<f64>,
    summary: serde_json::Value,
}

impl Context<'_> {
    fn csv(&mut self, name: &str, contents: String) -> Result<()> {
        if self.config.output.csv() {
            self.out.write(name, &contents)?;
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if self.config.output.json() {
            self.out.write_json(name, value)?;
        }
        Ok(())
    }

    fn steady_state(&mut self, engine: &Engine) -> Result<f64> {
        let s = tasks::steady_state_time(engine, &self.config.run, &self.config.correlation)?;
        self.ensembles.extend(s.pilot);
        self.t_ss = Some(s.t_ss);
        Ok(s.t_ss)
    }
}

fn spectrum_summary(s: &SpectrumSeries) -> serde_json::Value {
    serde_json::json!({
        "coherent_term": s.coherent_term,
        "plateau_residual": s.plateau_residual,
        "plateau_reached": s.plateau_reached,
        "window": s.window,
        "t2_max": s.t2_max,
    })
}

fn run_command(command: Command, ctx: &mut Context<'_>) -> Result<()> {
    let config = ctx.config;
    if command == Command::Sweep {
        let table = tasks::sweep(config)?;
        for row in &table.rows {
            ctx.ensembles.extend(row.records.iter().cloned());
        }
        ctx.csv("sweep.csv", sweep_csv(&table))?;
        ctx.json("sweep.json", &table)?;
        return Ok(());
    }
    let engine = Engine::new(config.engine_params())?;
    match command {
        Command::Flux | Command::LoopProb => {
            let mut run = config.run.clone();
            run.observables.flux |= command == Command::Flux;
            run.observables.tls_population |= command == Command::Flux;
            run.observables.loop_probabilities |= command == Command::LoopProb;
            let ens = tasks::run_ensemble(&engine, &run, None)?;
            ctx.ensembles.push(ens.record.clone());
            if let Some(s) = &ens.flux {
                ctx.csv("flux.csv", ensemble_csv(s))?;
                ctx.json("flux.json", s)?;
            }
            if let Some(s) = &ens.tls_population {
                ctx.csv("tls_population.csv", ensemble_csv(s))?;
                ctx.json("tls_population.json", s)?;
            }
            if let Some(ps) = &ens.loop_probabilities {
                for (n, s) in ps.iter().enumerate() {
                    ctx.csv(&format!("loop_p{n}.csv"), ensemble_csv(s))?;
                }
                ctx.json("loop_probabilities.json", ps)?;
            }
        }
        Command::Wtd => {
            let ens = tasks::wtd_ensemble(&engine, config)?;
            ctx.ensembles.push(ens.record.clone());
            let h = ens.wtd.expect("wtd requested");
            if !h.is_valid() {
                return Err(Error::EmptyHistogram(
                    "no trajectory recorded two detections",
                ));
            }
            ctx.csv("wtd.csv", wtd_csv(&h, ens.record.completed))?;
            ctx.json("wtd.json", &h)?;
            ctx.summary = serde_json::json!({ "n_events": h.n_events, "bin_width": h.bin_width });
        }
        Command::G2 => {
            let t_ss = ctx.steady_state(&engine)?;
            let r = tasks::g2_ensemble(&engine, &config.run, &config.correlation, t_ss)?;
            ctx.ensembles.push(r.record.clone());
            ctx.csv("g2.csv", correlation_csv(&r.g2))?;
            ctx.csv("g2_unnormalized.csv", correlation_csv(&r.big_g2))?;
            ctx.json("g2.json", &r.g2)?;
            ctx.summary = serde_json::json!({
                "output_population": r.output_population.0,
                "output_population_std_error": r.output_population.1,
                "skipped": r.g2.skipped,
                "estimator": config.correlation.estimator,
            });
        }
        Command::G1 | Command::Spectrum => {
            let t_ss = ctx.steady_state(&engine)?;
            let r = tasks::g1_ensemble(&engine, &config.run, &config.correlation, t_ss)?;
            ctx.ensembles.push(r.record.clone());
            let ens = &r.ensemble;
            ctx.csv("g1_unnormalized.csv", correlation_csv(&ens.g1))?;
            match g1_normalized(&ens.g1, &ens.lead_population) {
                Ok(g1) => ctx.csv("g1.csv", correlation_csv(&g1))?,
                // without emission only G1 is defined
                Err(Error::ZeroFlux) => {}
                Err(e) => return Err(e),
            }
            ctx.json("g1_unnormalized.json", &ens.g1)?;
            let mut summary = serde_json::json!({
                "coherence_re": ens.coherence.re,
                "coherence_im": ens.coherence.im,
                "followers_lost": ens.followers_lost,
                "batches": ens.batches.len(),
            });
            if command == Command::Spectrum {
                let s = tasks::spectrum_from(ens, engine.dt(), &config.correlation)?;
                ctx.csv("spectrum.csv", spectrum_csv(&s))?;
                ctx.json("spectrum.json", &s)?;
                summary["spectrum"] = spectrum_summary(&s);
            }
            ctx.summary = summary;
        }
        Command::Sweep => unreachable!("handled above"),
    }
    Ok(())
}

/// Runs `command` and writes its outputs and `manifest.json` (the manifest
/// also on failure, with the error recorded).
pub fn execute(command: Command, config: &RunConfig) -> Result<RunManifest> {
    config.validate()?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64());
    let clock = Instant::now();
    let mut ctx = Context {
        config,
        out: OutputDir::create(&config.output.dir)?,
        ensembles: Vec::new(),
        t_ss: None,
        summary: serde_json::Value::Null,
    };
    let result = run_command(command, &mut ctx);
    let mut manifest = RunManifest {
        command: command.name().to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        t_ss: ctx.t_ss,
        ensembles: ctx.ensembles,
        outputs: ctx.out.written().to_vec(),
        summary: ctx.summary,
        started_unix_seconds: started,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        error: result.as_ref().err().map(|e| e.to_string()),
    };
    manifest.outputs.push("manifest.json".into());
    ctx.out.write_json("manifest.json", &manifest)?;
    result.map(|()| manifest)
}
