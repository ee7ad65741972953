//! Ensemble-level observables built on [`run_tasks`].

use serde::{Deserialize, Serialize};

use super::config::{sweep_point, RunConfig, RunSettings};
use super::runner::{run_tasks, EnsembleRecord, TaskSettings};
use crate::correlations::{
    detuning_grid, g1_trajectory, g2_trajectory, incoherent_spectrum, CorrelationSeries,
    CorrelationSettings, G1Accumulator, G1Ensemble, G2Accumulator, SpectrumSeries,
};
use crate::dynamics::{run_trajectory, steps_for, Engine, EventRecord, ObservableSet};
use crate::observables::{
    default_wtd_bin_width, detect_steady_state, waiting_time_distribution, EnsembleSeries,
    SeriesAccumulator, WtdHistogram,
};
use crate::{Error, Result};

/// Pilot ensembles draw from `master_seed + PILOT_SEED_OFFSET` so they never
/// share streams with the main run.
pub const PILOT_SEED_OFFSET: u64 = 0x5049_4c4f_5400_0000;

impl RunSettings {
    pub fn task_settings(&self) -> TaskSettings {
        TaskSettings {
            master_seed: self.master_seed,
            threads: self.threads,
            abort_tolerance: self.abort_tolerance,
            max_attempts: self.max_attempts,
        }
    }
}

fn times(n_steps: usize, dt: f64) -> Vec<f64> {
    (1..=n_steps).map(|s| s as f64 * dt).collect()
}

fn delays(len: usize, dt: f64) -> Vec<f64> {
    (0..len).map(|m| m as f64 * dt).collect()
}

/// Per-step ensemble averages and, optionally, the pooled waiting times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub flux: Option<EnsembleSeries>,
    pub tls_population: Option<EnsembleSeries>,
    /// `p(0, t)`, `p(1, t)`, `p(2, t)`.
    pub loop_probabilities: Option<[EnsembleSeries; 3]>,
    pub wtd: Option<WtdHistogram>,
    pub record: EnsembleRecord,
}

/// Runs `run.n_trajectories` plain trajectories to `run.t_end`. With
/// `wtd_bin_width` set, detection records are kept and histogrammed.
pub fn run_ensemble(
    engine: &Engine,
    run: &RunSettings,
    wtd_bin_width: Option<f64>,
) -> Result<TrajectoryEnsemble> {
    run_ensemble_labeled("trajectories", engine, run, run.observables, wtd_bin_width)
}

fn run_ensemble_labeled(
    label: &str,
    engine: &Engine,
    run: &RunSettings,
    set: ObservableSet,
    wtd_bin_width: Option<f64>,
) -> Result<TrajectoryEnsemble> {
    let dt = engine.dt();
    let n_steps = steps_for(run.t_end, dt);
    let mut flux = set.flux.then(|| SeriesAccumulator::new(n_steps));
    let mut tls = set.tls_population.then(|| SeriesAccumulator::new(n_steps));
    let mut loops = set
        .loop_probabilities
        .then(|| [0, 1, 2].map(|_| SeriesAccumulator::new(n_steps)));
    let mut records: Vec<EventRecord> = Vec::new();
    let keep_records = wtd_bin_width.is_some();
    let mut column = vec![0.0; n_steps];
    let record = run_tasks(
        label,
        run.n_trajectories,
        &run.task_settings(),
        |stream| run_trajectory(engine, stream, run.t_end, set),
        |_, out| {
            if let Some(acc) = flux.as_mut() {
                acc.push(&out.flux)?;
            }
            if let Some(acc) = tls.as_mut() {
                acc.push(&out.tls_population)?;
            }
            if let Some(accs) = loops.as_mut() {
                for (n, acc) in accs.iter_mut().enumerate() {
                    for (c, p) in column.iter_mut().zip(&out.loop_probabilities) {
                        *c = p[n];
                    }
                    acc.push(&column)?;
                }
            }
            if keep_records {
                records.push(out.record);
            }
            Ok(())
        },
    )?;
    let t = times(n_steps, dt);
    let finish = |acc: Option<SeriesAccumulator>| acc.map(|a| a.finish(t.clone())).transpose();
    let loop_probabilities = match loops {
        Some([a, b, c]) => Some([
            a.finish(t.clone())?,
            b.finish(t.clone())?,
            c.finish(t.clone())?,
        ]),
        None => None,
    };
    let wtd = wtd_bin_width
        .map(|w| waiting_time_distribution(&records, dt, w))
        .transpose()?;
    Ok(TrajectoryEnsemble {
        flux: finish(flux)?,
        tls_population: finish(tls)?,
        loop_probabilities,
        wtd,
        record,
    })
}

/// Pooled waiting-time histogram with the configured or default bin width.
pub fn wtd_ensemble(engine: &Engine, config: &RunConfig) -> Result<TrajectoryEnsemble> {
    let width = config
        .wtd
        .bin_width
        .unwrap_or_else(|| default_wtd_bin_width(engine.dt()));
    run_ensemble_labeled(
        "wtd",
        engine,
        &config.run,
        ObservableSet::none(),
        Some(width),
    )
}

/// Steady-state time: the configured value, or detected on the mean flux of
/// a pilot ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateTime {
    pub t_ss: f64,
    pub pilot: Option<EnsembleRecord>,
}

pub fn steady_state_time(
    engine: &Engine,
    run: &RunSettings,
    settings: &CorrelationSettings,
) -> Result<SteadyStateTime> {
    if let Some(t_ss) = settings.t_ss {
        return Ok(SteadyStateTime { t_ss, pilot: None });
    }
    let pilot_run = RunSettings {
        n_trajectories: settings.pilot_trajectories,
        t_end: settings.pilot_t_end,
        master_seed: run.master_seed.wrapping_add(PILOT_SEED_OFFSET),
        ..run.clone()
    };
    let set = ObservableSet {
        flux: true,
        ..ObservableSet::none()
    };
    let pilot = run_ensemble_labeled("pilot", engine, &pilot_run, set, None)?;
    let flux = pilot.flux.as_ref().expect("flux selected");
    let t_ss = detect_steady_state(flux, settings.steady_rel_tol, settings.steady_window)?;
    Ok(SteadyStateTime {
        t_ss,
        pilot: Some(pilot.record),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2Result {
    /// Normalized `g2(t2)`.
    pub g2: CorrelationSeries,
    /// `G2(t2)` in output-bin units.
    pub big_g2: CorrelationSeries,
    /// `<B0^dag B0>_ss` and its standard error.
    pub output_population: (f64, f64),
    pub record: EnsembleRecord,
}

pub fn g2_ensemble(
    engine: &Engine,
    run: &RunSettings,
    settings: &CorrelationSettings,
    t_ss: f64,
) -> Result<G2Result> {
    let len = steps_for(settings.t2_max, engine.dt()) + 1;
    let mut acc = G2Accumulator::new(len);
    let record = run_tasks(
        "g2",
        run.n_trajectories,
        &run.task_settings(),
        |stream| g2_trajectory(engine, stream, t_ss, settings.t2_max),
        |_, t| acc.push(&t),
    )?;
    let (g2, big_g2) = acc.finish(delays(len, engine.dt()), settings.estimator)?;
    Ok(G2Result {
        g2,
        big_g2,
        output_population: acc.output_population(),
        record,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct G1Result {
    pub ensemble: G1Ensemble,
    pub record: EnsembleRecord,
}

pub fn g1_ensemble(
    engine: &Engine,
    run: &RunSettings,
    settings: &CorrelationSettings,
    t_ss: f64,
) -> Result<G1Result> {
    let len = steps_for(settings.t2_max, engine.dt()) + 1;
    let batch = (run.n_trajectories / settings.n_batches.max(1)).max(1);
    let mut acc = G1Accumulator::new(len, batch);
    let record = run_tasks(
        "g1",
        run.n_trajectories,
        &run.task_settings(),
        |stream| g1_trajectory(engine, stream, t_ss, settings.t2_max),
        |_, t| acc.push(&t),
    )?;
    Ok(G1Result {
        ensemble: acc.finish(delays(len, engine.dt()))?,
        record,
    })
}

/// Incoherent spectrum on the configured grid from a `G1` ensemble.
pub fn spectrum_from(
    g1: &G1Ensemble,
    dt: f64,
    settings: &CorrelationSettings,
) -> Result<SpectrumSeries> {
    let grid = detuning_grid(settings.detuning_max, settings.n_detunings);
    incoherent_spectrum(g1, dt, &grid, settings.window)
}

/// Time averages over `[t_ss, t_ss + window)` taken per trajectory, then
/// averaged over the ensemble; the standard errors are therefore honest
/// despite the correlation between neighbouring steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadySummary {
    pub t_ss: f64,
    pub window: f64,
    pub flux: (f64, f64),
    /// `(mean, std_error)` of `p(0)`, `p(1)`, `p(2)`.
    pub loop_probabilities: [(f64, f64); 3],
    pub record: EnsembleRecord,
}

pub fn steady_summary(
    engine: &Engine,
    run: &RunSettings,
    t_ss: f64,
    window: f64,
) -> Result<SteadySummary> {
    let dt = engine.dt();
    let first = steps_for(t_ss, dt).saturating_sub(1);
    let t_end = t_ss + window;
    let set = ObservableSet {
        flux: true,
        loop_probabilities: true,
        ..ObservableSet::none()
    };
    let mut acc = SeriesAccumulator::new(4);
    let record = run_tasks(
        "steady",
        run.n_trajectories,
        &run.task_settings(),
        |stream| {
            let out = run_trajectory(engine, stream, t_end, set)?;
            let n = (out.flux.len() - first) as f64;
            let mut avg = [0.0; 4];
            for s in first..out.flux.len() {
                avg[0] += out.flux[s];
                for k in 0..3 {
                    avg[k + 1] += out.loop_probabilities[s][k];
                }
            }
            Ok(avg.map(|v| v / n))
        },
        |_, avg| acc.push(&avg),
    )?;
    let mean = acc.mean();
    let se = acc.std_error();
    Ok(SteadySummary {
        t_ss,
        window,
        flux: (mean[0], se[0]),
        loop_probabilities: [(mean[1], se[1]), (mean[2], se[2]), (mean[3], se[3])],
        record,
    })
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    /// `None` when the point succeeded.
    pub error: Option<String>,
    pub t_ss: f64,
    /// `g2` at the first nonzero delay, one step.
    pub g2_dt: (f64, f64),
    pub flux: (f64, f64),
    pub loop_probabilities: [(f64, f64); 3],
    pub records: Vec<EnsembleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

fn sweep_row(config: &RunConfig, value: f64) -> Result<SweepRow> {
    let sweep = config.sweep.as_ref().expect("sweep present");
    let model = sweep_point(&config.model, &sweep.parameter, value, sweep.keep_dt)?;
    let point = RunConfig {
        model,
        ..config.clone()
    };
    let engine = Engine::new(point.engine_params())?;
    let steady = steady_state_time(&engine, &config.run, &config.correlation)?;
    let mut records: Vec<EnsembleRecord> = steady.pilot.into_iter().collect();
    let summary = steady_summary(
        &engine,
        &config.run,
        steady.t_ss,
        config.correlation.steady_window,
    )?;
    let short = CorrelationSettings {
        t2_max: engine.dt(),
        ..config.correlation.clone()
    };
    let g2 = g2_ensemble(&engine, &config.run, &short, steady.t_ss)?;
    let (v, e) = g2.g2.first_step().expect("two delays");
    records.push(summary.record);
    records.push(g2.record);
    Ok(SweepRow {
        value,
        error: None,
        t_ss: steady.t_ss,
        g2_dt: (v.re, e.re),
        flux: summary.flux,
        loop_probabilities: summary.loop_probabilities,
        records,
    })
}

/// One set of ensembles per sweep value. A failing point is recorded in
/// its row and does not stop the sweep.
pub fn sweep(config: &RunConfig) -> Result<SweepTable> {
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("no [sweep] section".into()))?;
    let rows = spec
        .values
        .iter()
        .map(|&value| {
            sweep_row(config, value).unwrap_or_else(|e| SweepRow {
                value,
                error: Some(e.to_string()),
                t_ss: f64::NAN,
                g2_dt: (f64::NAN, f64::NAN),
                flux: (f64::NAN, f64::NAN),
                loop_probabilities: [(f64::NAN, f64::NAN); 3],
                records: Vec::new(),
            })
        })
        .collect();
    Ok(SweepTable {
        parameter: spec.parameter.clone(),
        rows,
    })
}
