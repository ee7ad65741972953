//! The `validate` suite: oracle comparisons, invariants and a mutation test.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::config::{ConfigBuilder, RunSettings};
use super::tasks::{g2_ensemble, run_ensemble, steady_summary};
use crate::correlations::CorrelationSettings;
use crate::dynamics::{run_trajectory, Engine, ObservableSet, ShiftRule, StreamId};
use crate::model::ModelParams;
use crate::observables::{loop_photon_probabilities, waiting_time_distribution};
use crate::oracle::{
    binned_regression, unconditional_collision_evolve, Agreement, TlsMasterEquation,
};
use crate::Result;

/// Floor added to statistical tolerances so that steps where every
/// trajectory agrees (zero standard error) compare at rounding level.
pub const ROUNDING_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    /// Multiplies every trajectory count.
    pub scale: f64,
    pub master_seed: u64,
    pub threads: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            scale: 1.0,
            master_seed: 2024,
            threads: 0,
        }
    }
}

impl ValidateOptions {
    fn run(&self, n: usize, t_end: f64) -> RunSettings {
        RunSettings {
            n_trajectories: ((n as f64 * self.scale).round() as usize).max(2),
            t_end,
            master_seed: self.master_seed,
            threads: self.threads,
            ..RunSettings::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Agreement>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Pointwise `|value - reference| <= k * se + allowance` over a series.
pub fn compare_series(
    name: &str,
    value: &[f64],
    se: &[f64],
    reference: &[f64],
    k: f64,
    allowance: f64,
) -> Agreement {
    let mut worst = 0.0f64;
    let mut worst_at = 0;
    for (i, ((v, e), r)) in value.iter().zip(se).zip(reference).enumerate() {
        let ratio = (v - r).abs() / (k * e + allowance);
        if !(ratio <= worst) {
            worst = ratio;
            worst_at = i;
        }
    }
    let ok = value.len() == reference.len() && value.len() == se.len() && worst <= 1.0;
    Agreement {
        name: name.to_string(),
        passed: ok,
        worst_ratio: worst,
        detail: if value.is_empty() {
            "empty series".into()
        } else {
            format!(
                "worst at index {worst_at}: {} vs {} (se {}, {k} se + {allowance:e})",
                value[worst_at], reference[worst_at], se[worst_at]
            )
        },
    }
}

/// How the per-step tolerance of an oracle comparison is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorModel {
    /// Sample standard error of the ensemble.
    Sample,
    /// The larger of the sample error and `range * sqrt(m (1 - m) / n)` with
    /// `m` the oracle mean in units of `range`: the largest standard error
    /// any `[0, range]`-valued quantity with that mean can have. Unlike the
    /// sample error it stays positive at early steps where rare outcomes
    /// (a detection with probability far below `1 / n`) were never drawn.
    Bounded,
}

/// Standard errors under `model` for a `[0, range]`-valued observable.
pub fn model_std_error(
    model: ErrorModel,
    sample: &[f64],
    reference: &[f64],
    range: f64,
    n: usize,
) -> Vec<f64> {
    match model {
        ErrorModel::Sample => sample.to_vec(),
        ErrorModel::Bounded => sample
            .iter()
            .zip(reference)
            .map(|(&se, &r)| {
                let m = (r / range).clamp(0.0, 1.0);
                se.max(range * (m * (1.0 - m) / n as f64).sqrt())
            })
            .collect(),
    }
}

fn failed(name: &str, e: impl std::fmt::Display) -> Agreement {
    Agreement {
        name: name.to_string(),
        passed: false,
        worst_ratio: f64::INFINITY,
        detail: e.to_string(),
    }
}

fn check(name: &str, passed: bool, detail: String) -> Agreement {
    Agreement {
        name: name.to_string(),
        passed,
        worst_ratio: if passed { 0.0 } else { f64::INFINITY },
        detail,
    }
}

/// Markovian-limit parameters: no loop, `Omega = 2 pi gamma`, `dt = 0.01`.
pub fn markovian_params() -> ModelParams {
    ModelParams::without_feedback(1.0, 0.01).with_omega(2.0 * PI)
}

/// Engine TLS population without feedback against the continuous Lindblad
/// solution, within `5 se + allowance`. `allowance` absorbs the step
/// discretization; zero demands agreement at the statistical level alone.
pub fn markovian_limit(
    opts: &ValidateOptions,
    n_trajectories: usize,
    t_end: f64,
    allowance: f64,
    model: ErrorModel,
) -> Result<Agreement> {
    let params = markovian_params();
    let engine = Engine::new(params.clone())?;
    let run = RunSettings {
        observables: ObservableSet {
            tls_population: true,
            ..ObservableSet::none()
        },
        ..opts.run(n_trajectories, t_end)
    };
    let ens = run_ensemble(&engine, &run, None)?;
    let tls = ens.tls_population.expect("selected");
    let reference =
        TlsMasterEquation::markovian(&params).excited_population_series(params.dt(), tls.len());
    let se = model_std_error(model, &tls.std_error, &reference, 1.0, tls.n_trajectories);
    Ok(compare_series(
        "markovian_limit",
        &tls.mean,
        &se,
        &reference,
        5.0,
        allowance + ROUNDING_FLOOR,
    ))
}

/// Forced-detection `g2` without feedback against quantum regression on
/// the collision map, within three standard errors.
pub fn regression_g2(
    opts: &ValidateOptions,
    n_trajectories: usize,
    t2_max: f64,
) -> Result<Agreement> {
    let params = markovian_params();
    let engine = Engine::new(params.clone())?;
    let settings = CorrelationSettings {
        t_ss: Some(10.0),
        t2_max,
        ..CorrelationSettings::default()
    };
    let g2 = g2_ensemble(&engine, &opts.run(n_trajectories, 1.0), &settings, 10.0)?;
    let reference = binned_regression(&params, t2_max)?.g2_normalized();
    Ok(compare_series(
        "regression_g2",
        &g2.g2.real(),
        &g2.g2.real_error(),
        &reference,
        3.0,
        ROUNDING_FLOOR,
    ))
}

/// Short loop used against the density-matrix oracle.
pub fn collision_params() -> ModelParams {
    ModelParams::symmetric(1.0, 0.2, 4)
        .with_omega(0.4 * PI)
        .with_phi(PI)
}

/// Flux and loop probabilities of `engine` against the unconditional
/// collision evolution, within four standard errors per step.
pub fn collision_equivalence(
    engine: &Engine,
    run: &RunSettings,
    model: ErrorModel,
) -> Result<Vec<Agreement>> {
    let oracle = unconditional_collision_evolve(engine.params(), run.t_end)?;
    let ens = run_ensemble(
        engine,
        &RunSettings {
            observables: ObservableSet {
                flux: true,
                loop_probabilities: true,
                ..ObservableSet::none()
            },
            ..run.clone()
        },
        None,
    )?;
    let flux = ens.flux.expect("selected");
    let loops = ens.loop_probabilities.expect("selected");
    let n = flux.n_trajectories;
    let se = model_std_error(model, &flux.std_error, &oracle.flux, 1.0 / engine.dt(), n);
    let mut out = vec![compare_series(
        "collision_flux",
        &flux.mean,
        &se,
        &oracle.flux,
        4.0,
        ROUNDING_FLOOR,
    )];
    for (k, series) in loops.iter().enumerate() {
        let reference: Vec<f64> = oracle.loop_probabilities.iter().map(|p| p[k]).collect();
        let se = model_std_error(model, &series.std_error, &reference, 1.0, n);
        out.push(compare_series(
            &format!("collision_p{k}"),
            &series.mean,
            &se,
            &reference,
            4.0,
            ROUNDING_FLOOR,
        ));
    }
    Ok(out)
}

/// A loop with every channel switched on.
fn busy_params() -> ModelParams {
    ModelParams::symmetric(1.0, 0.08, 8)
        .with_omega(2.0 * PI)
        .with_phi(PI)
        .with_gamma0(0.1)
        .with_gamma_prime(0.5)
}

/// Norm and probability closure after every step, and norm preservation of
/// the bin shift, on a few trajectories.
pub fn closure_checks(
    opts: &ValidateOptions,
    n_trajectories: usize,
    t_end: f64,
) -> Result<Vec<Agreement>> {
    let engine = Engine::new(busy_params())?;
    let steps = crate::dynamics::steps_for(t_end, engine.dt());
    let (mut norm_err, mut prob_err, mut shift_err) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..n_trajectories {
        let mut rng = StreamId::new(opts.master_seed, k as u64).rng();
        let mut psi = engine.initial_state();
        for _ in 0..steps {
            // the step sequence spelled out to observe the shift in isolation
            engine.qt_substep(&mut psi, &mut rng)?;
            engine.measure_output_bin(&mut psi, &mut rng)?;
            let before = psi.norm_sqr();
            engine.shift_bins(&mut psi)?;
            shift_err = shift_err.max((psi.norm_sqr() - before).abs());
            psi.normalize()?;
            norm_err = norm_err.max((psi.norm_sqr() - 1.0).abs());
            let p = loop_photon_probabilities(engine.basis(), &psi);
            prob_err = prob_err.max((p.iter().sum::<f64>() - 1.0).abs());
        }
    }
    Ok(vec![
        check(
            "norm_closure",
            norm_err <= 1e-10,
            format!("max |<psi|psi> - 1| = {norm_err:e}"),
        ),
        check(
            "probability_closure",
            prob_err <= 1e-10,
            format!("max |p0 + p1 + p2 - 1| = {prob_err:e}"),
        ),
        check(
            "shift_norm",
            shift_err <= 1e-12,
            format!("max norm change in shift = {shift_err:e}"),
        ),
    ])
}

/// Every delay between consecutive detections lands in exactly one
/// histogram bin.
pub fn counting_identity(
    opts: &ValidateOptions,
    n_trajectories: usize,
    t_end: f64,
) -> Result<Agreement> {
    let engine = Engine::new(busy_params())?;
    let mut records = Vec::new();
    for k in 0..n_trajectories {
        records.push(
            run_trajectory(
                &engine,
                StreamId::new(opts.master_seed, k as u64),
                t_end,
                ObservableSet::none(),
            )?
            .record,
        );
    }
    let h = waiting_time_distribution(&records, engine.dt(), 0.1)?;
    let expected: u64 = records
        .iter()
        .map(|r| (r.detection_steps().count() as u64).saturating_sub(1))
        .sum();
    let total: u64 = h.counts.iter().sum();
    let norm: f64 = h.normalized.iter().sum();
    Ok(check(
        "counting_identity",
        total == expected && h.n_events == expected && (norm - 1.0).abs() < 1e-12,
        format!("{total} histogram entries, {expected} delays, normalized sum {norm}"),
    ))
}

/// Same ensemble on one thread and on several: identical results.
pub fn threaded_determinism(opts: &ValidateOptions, n_trajectories: usize) -> Result<Agreement> {
    let engine = Engine::new(busy_params())?;
    let one = RunSettings {
        threads: 1,
        ..opts.run(n_trajectories, 3.0)
    };
    let many = RunSettings {
        threads: 4,
        ..one.clone()
    };
    let a = run_ensemble(&engine, &one, Some(0.1))?;
    let b = run_ensemble(&engine, &many, Some(0.1))?;
    Ok(check(
        "threaded_determinism",
        a == b,
        format!("1 vs 4 threads over {n_trajectories} trajectories"),
    ))
}

/// Parameters of the step-halving check and the two bin counts compared.
pub fn halving_params() -> (ModelParams, ModelParams) {
    let coarse = ModelParams::symmetric(1.0, 0.1, 5).with_omega(0.4 * PI);
    let mut fine = coarse.clone();
    fine.n_bins = 10;
    (coarse, fine)
}

/// Steady flux at `dt` and `dt / 2`: relative change below 2%.
pub fn dt_halving(opts: &ValidateOptions, n_trajectories: usize) -> Result<Agreement> {
    let (coarse, fine) = halving_params();
    let run = opts.run(n_trajectories, 1.0);
    let a = steady_summary(&Engine::new(coarse)?, &run, 5.0, 20.0)?;
    let b = steady_summary(&Engine::new(fine)?, &run, 5.0, 20.0)?;
    let rel = (a.flux.0 - b.flux.0).abs() / b.flux.0;
    Ok(Agreement {
        name: "dt_halving".into(),
        passed: rel < 0.02,
        worst_ratio: rel / 0.02,
        detail: format!(
            "flux {:.5} +- {:.5} (dt = 0.02) vs {:.5} +- {:.5} (dt = 0.01): {:.2}%",
            a.flux.0,
            a.flux.1,
            b.flux.0,
            b.flux.1,
            100.0 * rel
        ),
    })
}

/// A bin shift that skips a bin must be caught by the oracle comparison or
/// the shift's own occupancy check. Passes when the mutant fails.
pub fn shift_mutation(opts: &ValidateOptions, n_trajectories: usize) -> Result<Agreement> {
    let mutant = Engine::new(collision_params())?.with_shift_rule(ShiftRule::SkipOne);
    let run = opts.run(n_trajectories, 3.0);
    let outcome = match collision_equivalence(&mutant, &run, ErrorModel::Bounded) {
        Err(e) => format!("mutant aborted: {e}"),
        Ok(checks) => {
            let failing: Vec<String> = checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name.clone())
                .collect();
            if failing.is_empty() {
                return Ok(check(
                    "shift_mutation",
                    false,
                    "skipping shift went unnoticed".into(),
                ));
            }
            format!("mutant fails {}", failing.join(", "))
        }
    };
    Ok(check("shift_mutation", true, outcome))
}

/// `dt * gamma = 0.5` must be refused at configuration time.
pub fn coarse_step_rejected() -> Agreement {
    let result = ConfigBuilder::new()
        .set("model.tau=1.0")
        .and_then(|b| b.set("model.n_bins=2"))
        .and_then(|b| b.build());
    check(
        "coarse_step_rejected",
        result.is_err(),
        match result {
            Err(e) => format!("rejected: {e}"),
            Ok(_) => "accepted dt * gamma = 0.5".into(),
        },
    )
}

/// Full suite. Trajectory counts are multiplied by `opts.scale`.
pub fn validate(opts: &ValidateOptions) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push =
        |name: &str, r: Result<Agreement>| checks.push(r.unwrap_or_else(|e| failed(name, e)));
    // the engine steps in dt; allow the first-order step error
    let allowance = markovian_params().dt();
    push(
        "markovian_limit",
        markovian_limit(opts, 2000, 5.0, allowance, ErrorModel::Bounded),
    );
    push("regression_g2", regression_g2(opts, 2000, 6.0));
    let mut extend = |name: &str, r: Result<Vec<Agreement>>| match r {
        Ok(v) => checks.extend(v),
        Err(e) => checks.push(failed(name, e)),
    };
    let collision = Engine::new(collision_params())
        .and_then(|e| collision_equivalence(&e, &opts.run(20_000, 3.0), ErrorModel::Bounded));
    extend("collision", collision);
    extend("closure", closure_checks(opts, 20, 4.0));
    let mut push =
        |name: &str, r: Result<Agreement>| checks.push(r.unwrap_or_else(|e| failed(name, e)));
    push("counting_identity", counting_identity(opts, 50, 10.0));
    push("threaded_determinism", threaded_determinism(opts, 300));
    push("dt_halving", dt_halving(opts, 4000));
    push("shift_mutation", shift_mutation(opts, 2000));
    checks.push(coarse_step_rejected());
    ValidationReport { checks }
}
