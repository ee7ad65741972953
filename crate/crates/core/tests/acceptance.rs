//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion with the
//! measured values and the pinned tolerances, then exits non-zero if any
//! line failed. Runs without the libtest harness so the report is always
//! shown.
//!
//! Lines tagged `+` are supplementary: they repeat a criterion under a
//! stated change of method so a literal failure can be told apart from a
//! physics failure. They count towards the exit status like any other line.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use waveguide_feedback::correlations::{
    bunching_phases, resonance_spacing, CorrelationSettings, G2Estimator, ResonanceReading,
    SpectrumSeries, Window,
};
use waveguide_feedback::dynamics::Engine;
use waveguide_feedback::ensemble::{
    closure_checks, collision_equivalence, collision_params, counting_identity, dt_halving,
    g1_ensemble, g2_ensemble, markovian_limit, regression_g2, run_ensemble, spectrum_from,
    steady_summary, threaded_determinism, ErrorModel, RunSettings, SteadySummary,
    ValidateOptions,
};
use waveguide_feedback::model::{reduce_phase, ModelParams};
use waveguide_feedback::observables::WtdHistogram;
use waveguide_feedback::Result;

const SEED: u64 = 7_340_033;

// Criterion tolerances.
const C1_TRAJECTORIES: usize = 2000;
const C1_T_END: f64 = 5.0;
const C1_MAX_SECONDS: f64 = 120.0;
const C2_TRAJECTORIES: usize = 20_000;
const C2_T_END: f64 = 4.0;
const C2_MAX_SECONDS: f64 = 600.0;
const C4_TRAJECTORIES: usize = 2000;
const C4_T2_MAX: f64 = 6.0;
const SPECTRUM_TRAJECTORIES: usize = 5000;
const C5_PEAK_TOLERANCE: f64 = 0.2;
const C6_CENTRAL_RATIO_MAX: f64 = 0.2;
const C6_HEIGHT_RATIO: (f64, f64) = (0.5, 2.0);
const C7_TRAJECTORIES: usize = 2000;
const C7_ANTIBUNCHED_MAX: f64 = 0.5;
const C7_BUNCHED_MIN: f64 = 1.5;
const C8_TRAJECTORIES: usize = 2000;
const C8_WEAK: (f64, f64) = (0.03, 0.01);
const C8_STRONG: (f64, f64) = (0.11, 0.02);
const C9_TRAJECTORIES: usize = 2000;
const C9_FLUX_NO_DEPHASING: (f64, f64) = (0.45, 0.03);
const C9_FLUX_DEPHASING: (f64, f64) = (0.34, 0.03);
const C9_RATIO: (f64, f64) = (10.0, 40.0);
const C10_TRAJECTORIES: usize = 2000;
const C10_FIRST_BIN_MAX: f64 = 0.1;
const C10_TAIL: f64 = 20.0;
const C11_TRAJECTORIES: usize = 1000;
const C11_PHASE_TOLERANCE: f64 = 0.15 * PI;
const C12_SPACING_TOLERANCE: f64 = 0.1;
const C13_HALVING_TRAJECTORIES: usize = 4000;
/// Combined standard errors a local maximum must stand above its
/// surroundings to count as a peak.
const PEAK_SIGNIFICANCE: f64 = 2.0;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome { passed, detail }
    }
}

struct Report {
    failures: usize,
    total: usize,
}

impl Report {
    fn line(&mut self, id: &str, name: &str, seconds: f64, outcome: Result<Outcome>) {
        let outcome = outcome.unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        self.total += 1;
        if !outcome.passed {
            self.failures += 1;
        }
        println!(
            "{} {id:<4} {name:<44} [{seconds:6.1} s] {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }

    fn run(&mut self, id: &str, name: &str, f: impl FnOnce() -> Result<Outcome>) {
        let clock = Instant::now();
        let outcome = f();
        self.line(id, name, clock.elapsed().as_secs_f64(), outcome);
    }
}

fn run(n: usize, t_end: f64, seed: u64) -> RunSettings {
    RunSettings {
        n_trajectories: n,
        t_end,
        master_seed: seed,
        ..RunSettings::default()
    }
}

fn opts(seed: u64) -> ValidateOptions {
    ValidateOptions {
        scale: 1.0,
        master_seed: seed,
        threads: 0,
    }
}

fn no_feedback(omega: f64) -> ModelParams {
    ModelParams::without_feedback(1.0, 0.01).with_omega(omega)
}

fn short_loop(omega: f64, phi: f64) -> ModelParams {
    ModelParams::symmetric(1.0, 0.1, 10)
        .with_omega(omega)
        .with_phi(phi)
}

fn spectrum_settings(t_ss: f64, t2_max: f64) -> CorrelationSettings {
    CorrelationSettings {
        t_ss: Some(t_ss),
        t2_max,
        window: Window::Exponential,
        detuning_max: 15.0,
        n_detunings: 601,
        n_batches: 50,
        ..CorrelationSettings::default()
    }
}

fn spectrum(
    params: ModelParams,
    n: usize,
    seed: u64,
    settings: &CorrelationSettings,
) -> Result<SpectrumSeries> {
    let engine = Engine::new(params)?;
    let t_ss = settings.t_ss.expect("fixed steady-state time");
    let g1 = g1_ensemble(&engine, &run(n, 1.0, seed), settings, t_ss)?;
    spectrum_from(&g1.ensemble, engine.dt(), settings)
}

/// `g2` one step after a detection.
fn g2_first_step(params: ModelParams, n: usize, seed: u64, t_ss: f64) -> Result<(f64, f64)> {
    let engine = Engine::new(params)?;
    let settings = CorrelationSettings {
        t_ss: Some(t_ss),
        t2_max: engine.dt(),
        ..CorrelationSettings::default()
    };
    let r = g2_ensemble(&engine, &run(n, 1.0, seed), &settings, t_ss)?;
    Ok((r.g2.values[1].re, r.g2.std_error[1].re))
}

fn summary(params: ModelParams, n: usize, seed: u64, t_ss: f64, window: f64) -> Result<SteadySummary> {
    steady_summary(&Engine::new(params)?, &run(n, 1.0, seed), t_ss, window)
}

// ---------------------------------------------------------------------------
// Peak analysis on sampled curves with standard errors.

#[derive(Debug, Clone, Copy)]
struct Peak {
    index: usize,
    /// Parabolic refinement of the grid maximum.
    position: f64,
    height: f64,
    /// Height above the higher of the two surrounding minima, in combined
    /// standard errors.
    significance: f64,
}

fn refine(x: &[f64], y: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= y.len() {
        return x[i];
    }
    let curvature = y[i - 1] - 2.0 * y[i] + y[i + 1];
    if curvature >= 0.0 {
        return x[i];
    }
    let h = x[i + 1] - x[i];
    x[i] + 0.5 * h * (y[i - 1] - y[i + 1]) / curvature
}

/// Local maxima with their topographic prominence measured in combined
/// standard errors of the peak and the saddle that bounds it.
fn peaks(x: &[f64], y: &[f64], se: &[f64]) -> Vec<Peak> {
    let n = y.len();
    let mut out = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(y[i] > y[i - 1] && y[i] >= y[i + 1]) {
            continue;
        }
        let saddle = |range: &mut dyn Iterator<Item = usize>| {
            let mut low = i;
            for j in range {
                if y[j] > y[i] {
                    break;
                }
                if y[j] < y[low] {
                    low = j;
                }
            }
            low
        };
        let left = saddle(&mut (0..i).rev());
        let right = saddle(&mut (i + 1..n));
        let base = if y[left] > y[right] { left } else { right };
        let combined = (se[i].powi(2) + se[base].powi(2)).sqrt();
        let rise = y[i] - y[base];
        out.push(Peak {
            index: i,
            position: refine(x, y, i),
            height: y[i],
            significance: if combined > 0.0 { rise / combined } else { f64::INFINITY },
        });
    }
    out
}

/// Where `y` first drops below `level` walking from `i` in direction `step`,
/// linearly interpolated.
fn crossing(x: &[f64], y: &[f64], i: usize, level: f64, step: isize) -> Option<f64> {
    let mut j = i;
    loop {
        let next = j as isize + step;
        if next < 0 || next as usize >= y.len() {
            return None;
        }
        let k = next as usize;
        if y[k] < level {
            let f = (y[j] - level) / (y[j] - y[k]);
            return Some(x[j] + f * (x[k] - x[j]));
        }
        j = k;
    }
}

fn fwhm(x: &[f64], y: &[f64], i: usize) -> Option<f64> {
    let half = 0.5 * y[i];
    Some(crossing(x, y, i, half, 1)? - crossing(x, y, i, half, -1)?)
}

/// Twice the distance from a side peak to its outer half-maximum point.
fn outer_width(x: &[f64], y: &[f64], i: usize) -> Option<f64> {
    let step = if x[i] > 0.0 { 1 } else { -1 };
    Some(2.0 * (crossing(x, y, i, 0.5 * y[i], step)? - x[i]).abs())
}

fn center_index(s: &SpectrumSeries) -> usize {
    s.detunings.len() / 2
}

/// Highest local maximum with `lo <= |detuning| <= hi` on each side.
fn side_peaks(s: &SpectrumSeries, lo: f64, hi: f64) -> [Option<Peak>; 2] {
    let all = peaks(&s.detunings, &s.values, &s.std_error);
    let pick = |sign: f64| {
        all.iter()
            .filter(|p| {
                let v = sign * p.position;
                v >= lo && v <= hi
            })
            .copied()
            .max_by(|a, b| a.height.total_cmp(&b.height))
    };
    [pick(-1.0), pick(1.0)]
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = reduce_phase(a - b);
    d.min(2.0 * PI - d)
}

fn within(value: f64, (target, tol): (f64, f64)) -> bool {
    (value - target).abs() <= tol
}

// ---------------------------------------------------------------------------
// Criteria.

fn c1(model: ErrorModel) -> Result<Outcome> {
    let clock = Instant::now();
    let a = markovian_limit(&opts(SEED + 1), C1_TRAJECTORIES, C1_T_END, 0.0, model)?;
    let seconds = clock.elapsed().as_secs_f64();
    Ok(Outcome::new(
        a.passed && seconds < C1_MAX_SECONDS,
        format!(
            "worst |diff|/(5 se) = {:.3}; {}; runtime {seconds:.0} s (< {C1_MAX_SECONDS} s)",
            a.worst_ratio, a.detail
        ),
    ))
}

fn c2(model: ErrorModel) -> Result<Outcome> {
    let clock = Instant::now();
    let engine = Engine::new(collision_params())?;
    let checks = collision_equivalence(&engine, &run(C2_TRAJECTORIES, C2_T_END, SEED + 2), model)?;
    let seconds = clock.elapsed().as_secs_f64();
    let passed = checks.iter().all(|c| c.passed) && seconds < C2_MAX_SECONDS;
    let parts: Vec<String> = checks
        .iter()
        .map(|c| format!("{} {:.3}", c.name.trim_start_matches("collision_"), c.worst_ratio))
        .collect();
    let worst = checks
        .iter()
        .max_by(|a, b| a.worst_ratio.total_cmp(&b.worst_ratio))
        .expect("four checks");
    Ok(Outcome::new(
        passed,
        format!(
            "worst |diff|/(4 se): {}; worst {}: {}; runtime {seconds:.0} s (< {C2_MAX_SECONDS} s)",
            parts.join(", "),
            worst.name,
            worst.detail
        ),
    ))
}

fn c3() -> Result<Outcome> {
    let configs = [
        ("no feedback", no_feedback(2.0 * PI)),
        ("short loop phi=0", short_loop(2.0 * PI, 0.0)),
        ("short loop phi=pi", short_loop(2.0 * PI, PI)),
        (
            "channels and detuning",
            short_loop(2.0 * PI, PI)
                .with_delta(5.0)
                .with_gamma0(0.1)
                .with_gamma_prime(0.5),
        ),
        (
            "tau=0.5 phi=1.1pi",
            ModelParams::symmetric(1.0, 0.5, 20)
                .with_omega(0.4 * PI)
                .with_phi(1.1 * PI),
        ),
        (
            "tau=2",
            ModelParams::symmetric(1.0, 2.0, 40).with_omega(2.0 * PI),
        ),
    ];
    let mut bad = Vec::new();
    let mut checked = 0;
    for (k, (name, params)) in configs.into_iter().enumerate() {
        let engine = Engine::new(params)?;
        for estimator in [G2Estimator::Weighted, G2Estimator::Unweighted] {
            let settings = CorrelationSettings {
                t_ss: Some(5.0),
                t2_max: 0.5,
                estimator,
                ..CorrelationSettings::default()
            };
            let r = g2_ensemble(&engine, &run(200, 1.0, SEED + 30 + k as u64), &settings, 5.0)?;
            checked += 1;
            let (g, big) = (r.g2.values[0], r.big_g2.values[0]);
            if g.re != 0.0 || g.im != 0.0 || big.re != 0.0 || big.im != 0.0 {
                bad.push(format!("{name} ({estimator:?}): g2(0) = {g}"));
            }
        }
    }
    Ok(Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!("g2(0) == 0 bit-exactly in {checked} ensembles (6 configurations x 2 estimators)")
        } else {
            bad.join("; ")
        },
    ))
}

fn c4() -> Result<Outcome> {
    let a = regression_g2(&opts(SEED + 4), C4_TRAJECTORIES, C4_T2_MAX)?;
    Ok(Outcome::new(
        a.passed,
        format!("worst |diff|/(3 se) = {:.3}; {}", a.worst_ratio, a.detail),
    ))
}

struct Spectra {
    no_feedback: SpectrumSeries,
    phi_pi: SpectrumSeries,
    phi_zero: SpectrumSeries,
}

fn short_loop_spectra() -> Result<Spectra> {
    let settings = spectrum_settings(10.0, 10.0);
    Ok(Spectra {
        no_feedback: spectrum(no_feedback(2.0 * PI), SPECTRUM_TRAJECTORIES, SEED + 5, &settings)?,
        phi_pi: spectrum(short_loop(2.0 * PI, PI), SPECTRUM_TRAJECTORIES, SEED + 6, &settings)?,
        phi_zero: spectrum(short_loop(2.0 * PI, 0.0), SPECTRUM_TRAJECTORIES, SEED + 7, &settings)?,
    })
}

fn c5(s: &SpectrumSeries) -> Result<Outcome> {
    let omega = 2.0 * PI;
    let [lower, upper] = side_peaks(s, 0.5 * omega, 1.5 * omega);
    let (Some(lower), Some(upper)) = (lower, upper) else {
        return Ok(Outcome::new(false, "side peaks not found".into()));
    };
    let passed = (lower.position + omega).abs() <= C5_PEAK_TOLERANCE
        && (upper.position - omega).abs() <= C5_PEAK_TOLERANCE;
    Ok(Outcome::new(
        passed,
        format!(
            "side peaks at {:.3} and {:.3} (+-Omega = +-{omega:.3}, tolerance {C5_PEAK_TOLERANCE}); \
             significance {:.0} and {:.0} se",
            lower.position, upper.position, lower.significance, upper.significance
        ),
    ))
}

fn c6(sp: &Spectra) -> Result<Outcome> {
    let omega = 2.0 * PI;
    let (nf, pi, zero) = (&sp.no_feedback, &sp.phi_pi, &sp.phi_zero);
    let c = center_index(nf);
    let central_ratio = pi.values[c] / nf.values[c];
    let filtered = central_ratio <= C6_CENTRAL_RATIO_MAX;

    let x = &nf.detunings;
    let nf_width = fwhm(x, &nf.values, c);
    let zero_width = fwhm(x, &zero.values, c);
    let nf_sides = side_peaks(nf, 0.5 * omega, 1.5 * omega);
    let zero_sides = side_peaks(zero, 0.25 * omega, 1.5 * omega);
    let mut broadened = matches!((nf_width, zero_width), (Some(a), Some(b)) if b > a);
    let mut widths = vec![format!(
        "central FWHM {:.2} -> {:.2}",
        nf_width.unwrap_or(f64::NAN),
        zero_width.unwrap_or(f64::NAN)
    )];
    // the infinite-delay reference also sends the loop-side half of the
    // emission to the output, incoherently: twice the output-only baseline
    let mut heights = vec![zero.values[c] / (2.0 * nf.values[c])];
    for (side, (a, b)) in ["lower", "upper"].iter().zip(nf_sides.iter().zip(&zero_sides)) {
        match (a, b) {
            (Some(a), Some(b)) => {
                let wa = outer_width(x, &nf.values, a.index);
                let wb = outer_width(x, &zero.values, b.index);
                broadened &= matches!((wa, wb), (Some(wa), Some(wb)) if wb > wa);
                widths.push(format!(
                    "{side} side width {:.2} -> {:.2} (at {:.2}, {:.1} se)",
                    wa.unwrap_or(f64::NAN),
                    wb.unwrap_or(f64::NAN),
                    b.position,
                    b.significance
                ));
                heights.push(b.height / (2.0 * a.height));
            }
            _ => {
                broadened = false;
                widths.push(format!("{side} side peak not resolved"));
            }
        }
    }
    let comparable = heights.len() == 3
        && heights
            .iter()
            .all(|&h| h >= C6_HEIGHT_RATIO.0 && h <= C6_HEIGHT_RATIO.1);
    Ok(Outcome::new(
        filtered && broadened && comparable,
        format!(
            "phi=pi central S(0) ratio {central_ratio:.4} (<= {C6_CENTRAL_RATIO_MAX}); phi=0: {}; \
             height ratios vs infinite-delay reference {:.2?} (in [{}, {}])",
            widths.join(", "),
            heights,
            C6_HEIGHT_RATIO.0,
            C6_HEIGHT_RATIO.1
        ),
    ))
}

fn c7() -> Result<Vec<(f64, f64)>> {
    Ok(vec![
        g2_first_step(short_loop(2.0 * PI, 0.0), C7_TRAJECTORIES, SEED + 8, 10.0)?,
        g2_first_step(short_loop(2.0 * PI, PI), C7_TRAJECTORIES, SEED + 9, 10.0)?,
    ])
}

fn c7_outcome(g: &[(f64, f64)]) -> Outcome {
    let ((a, ea), (b, eb)) = (g[0], g[1]);
    Outcome::new(
        a < C7_ANTIBUNCHED_MAX && b > C7_BUNCHED_MIN,
        format!(
            "g2(dt): phi=0 {a:.4} +- {ea:.4} (< {C7_ANTIBUNCHED_MAX}), phi=pi {b:.3} +- {eb:.3} (> {C7_BUNCHED_MIN})"
        ),
    )
}

fn c8() -> Result<Outcome> {
    // dt = 0.05
    let long = |omega| ModelParams::symmetric(1.0, 2.5, 50).with_omega(omega);
    let weak = summary(long(0.4 * PI), C8_TRAJECTORIES, SEED + 10, 15.0, 10.0)?;
    let strong = summary(long(2.0 * PI), C8_TRAJECTORIES, SEED + 11, 15.0, 10.0)?;
    let (pw, ew) = weak.loop_probabilities[2];
    let (ps, es) = strong.loop_probabilities[2];
    Ok(Outcome::new(
        within(pw, C8_WEAK) && within(ps, C8_STRONG),
        format!(
            "p2(t_ss): Omega=0.4pi {pw:.4} +- {ew:.4} ({} +- {}), Omega=2pi {ps:.4} +- {es:.4} ({} +- {}); \
             p1 {:.3} / {:.3}",
            C8_WEAK.0,
            C8_WEAK.1,
            C8_STRONG.0,
            C8_STRONG.1,
            weak.loop_probabilities[1].0,
            strong.loop_probabilities[1].0
        ),
    ))
}

struct FluxRuns {
    zero: SteadySummary,
    zero_dephased: SteadySummary,
    pi: SteadySummary,
    pi_dephased: SteadySummary,
    pi_off_chip: SteadySummary,
}

fn flux_runs() -> Result<FluxRuns> {
    let p = |phi: f64| short_loop(0.4 * PI, phi);
    let s = |params, seed| summary(params, C9_TRAJECTORIES, seed, 10.0, 20.0);
    Ok(FluxRuns {
        zero: s(p(0.0), SEED + 12)?,
        zero_dephased: s(p(0.0).with_gamma_prime(1.0), SEED + 13)?,
        pi: s(p(PI), SEED + 14)?,
        pi_dephased: s(p(PI).with_gamma_prime(1.0), SEED + 15)?,
        pi_off_chip: s(p(PI).with_gamma0(0.1), SEED + 16)?,
    })
}

fn c9(f: &FluxRuns) -> Outcome {
    let (a, ea) = f.zero.flux;
    let (b, eb) = f.zero_dephased.flux;
    let ratio = f.pi_dephased.flux.0 / f.pi.flux.0;
    Outcome::new(
        within(a, C9_FLUX_NO_DEPHASING)
            && within(b, C9_FLUX_DEPHASING)
            && ratio >= C9_RATIO.0
            && ratio <= C9_RATIO.1,
        format!(
            "phi=0 flux {a:.4} +- {ea:.4} ({} +- {}), dephased {b:.4} +- {eb:.4} ({} +- {}); \
             phi=pi flux {:.5} -> {:.4}, ratio {ratio:.1} (in [{}, {}])",
            C9_FLUX_NO_DEPHASING.0,
            C9_FLUX_NO_DEPHASING.1,
            C9_FLUX_DEPHASING.0,
            C9_FLUX_DEPHASING.1,
            f.pi.flux.0,
            f.pi_dephased.flux.0,
            C9_RATIO.0,
            C9_RATIO.1
        ),
    )
}

fn wtd(params: ModelParams, seed: u64) -> Result<WtdHistogram> {
    let engine = Engine::new(params)?;
    let width = 5.0 * engine.dt();
    let e = run_ensemble(&engine, &run(C10_TRAJECTORIES, 60.0, seed), Some(width))?;
    Ok(e.wtd.expect("requested"))
}

fn c10() -> Result<Outcome> {
    let nf = wtd(no_feedback(2.0 * PI), SEED + 17)?;
    let fb = wtd(short_loop(2.0 * PI, PI), SEED + 18)?;
    let (Some(nf_peak), Some(fb_peak)) = (nf.peak_bin(), fb.peak_bin()) else {
        return Ok(Outcome::new(false, "no waiting times recorded".into()));
    };
    let first = nf.counts[0] as f64 / nf.counts[nf_peak] as f64;
    let fb_peak_at = fb.bin_centers()[fb_peak];
    let tail = fb.support_end();
    Ok(Outcome::new(
        first < C10_FIRST_BIN_MAX && fb_peak_at < 0.1 && tail > C10_TAIL,
        format!(
            "no feedback: first/peak bin {first:.4} (< {C10_FIRST_BIN_MAX}), peak at {:.3}; \
             phi=pi: peak bin at {fb_peak_at:.3} (< tau = 0.1), last delay bin ends at {tail:.2} (> {C10_TAIL}); \
             {} and {} delays",
            nf.bin_centers()[nf_peak],
            nf.n_events,
            fb.n_events
        ),
    ))
}

fn c11_sweep(tau: f64, n_bins: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let phis: Vec<f64> = (0..20).map(|k| k as f64 * 0.1 * PI).collect();
    let mut g = Vec::new();
    let mut e = Vec::new();
    for (k, &phi) in phis.iter().enumerate() {
        let params = ModelParams::symmetric(1.0, tau, n_bins)
            .with_omega(0.4 * PI)
            .with_phi(phi);
        let (v, se) = g2_first_step(params, C11_TRAJECTORIES, seed + k as u64, 15.0)?;
        g.push(v);
        e.push(se);
    }
    Ok((phis, g, e))
}

fn c11() -> Result<Outcome> {
    let omega = 0.4 * PI;
    let mut passed = true;
    let mut parts = Vec::new();
    // dt = 0.05 in both sweeps
    for (tau, n_bins, seed) in [(0.5, 10, SEED + 100), (1.0, 20, SEED + 200)] {
        let (phis, g, e) = c11_sweep(tau, n_bins, seed)?;
        let n = g.len();
        // solutions of Omega tau / 2 - phi = (2k - 1) pi, with the mirror
        // image under phi -> -phi
        let targets = bunching_phases(omega, tau);
        let mut maxima = Vec::new();
        for i in 0..n {
            let (l, r) = ((i + n - 1) % n, (i + 1) % n);
            let above = |j: usize| {
                g[i] - g[j] > PEAK_SIGNIFICANCE * (e[i].powi(2) + e[j].powi(2)).sqrt()
            };
            if above(l) && above(r) {
                maxima.push(phis[i]);
            }
        }
        let nearest = |m: f64| {
            targets
                .iter()
                .map(|&t| circular_distance(m, t))
                .fold(f64::INFINITY, f64::min)
        };
        let ok = !maxima.is_empty()
            && maxima
                .iter()
                .all(|&m| nearest(m) <= C11_PHASE_TOLERANCE + 1e-9);
        passed &= ok;
        let imax = (0..n).max_by(|&a, &b| g[a].total_cmp(&g[b])).expect("non-empty");
        parts.push(format!(
            "tau={tau}: significant maxima at {:.2?} pi, predicted {:.2?} pi (tolerance 0.15 pi); \
             largest g2 {:.2} +- {:.2} at {:.1} pi",
            maxima.iter().map(|m| m / PI).collect::<Vec<_>>(),
            targets.iter().map(|t| t / PI).collect::<Vec<_>>(),
            g[imax],
            e[imax],
            phis[imax] / PI
        ));
    }
    Ok(Outcome::new(passed, parts.join("; ")))
}

fn c12() -> Result<Outcome> {
    let tau = 2.0;
    let params = ModelParams::symmetric(1.0, tau, 40)
        .with_omega(2.0 * PI)
        .with_phi(PI);
    let s = spectrum(params, SPECTRUM_TRAJECTORIES, SEED + 19, &spectrum_settings(15.0, 20.0))?;
    let top = s.values.iter().cloned().fold(0.0, f64::max);
    let found: Vec<Peak> = peaks(&s.detunings, &s.values, &s.std_error)
        .into_iter()
        .filter(|p| {
            p.significance > PEAK_SIGNIFICANCE && p.position.abs() <= 10.0 && p.height >= 0.05 * top
        })
        .collect();
    if found.len() < 3 {
        return Ok(Outcome::new(
            false,
            format!("only {} significant peaks", found.len()),
        ));
    }
    // least-squares slope of position against peak order
    let m = found.len() as f64;
    let xs: Vec<f64> = (0..found.len()).map(|k| k as f64).collect();
    let (mx, my) = (
        xs.iter().sum::<f64>() / m,
        found.iter().map(|p| p.position).sum::<f64>() / m,
    );
    let spacing = xs
        .iter()
        .zip(&found)
        .map(|(x, p)| (x - mx) * (p.position - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let gaps: Vec<f64> = found.windows(2).map(|w| w[1].position - w[0].position).collect();
    let readings = [ResonanceReading::Angular, ResonanceReading::Literal];
    let errors: Vec<f64> = readings
        .iter()
        .map(|&r| (spacing / resonance_spacing(tau, r) - 1.0).abs())
        .collect();
    let best = if errors[0] <= errors[1] { 0 } else { 1 };
    let predicted = resonance_spacing(tau, readings[best]);
    let offset = PI / tau;
    let offsets: Vec<f64> = found
        .iter()
        .map(|p| {
            let k = ((p.position - offset) / predicted).round();
            (p.position - offset - k * predicted) / predicted
        })
        .collect();
    Ok(Outcome::new(
        errors[best] <= C12_SPACING_TOLERANCE,
        format!(
            "peaks at {:.2?}; gaps {:.2?}; fitted spacing {spacing:.3}; \
             angular reading 2pi/tau = {:.3} (error {:.1}%), literal 1/tau = {:.3} (error {:.1}%); \
             matching reading: {:?}; offsets from its resonances {:.2?} spacings",
            found.iter().map(|p| p.position).collect::<Vec<_>>(),
            gaps,
            resonance_spacing(tau, ResonanceReading::Angular),
            100.0 * errors[0],
            resonance_spacing(tau, ResonanceReading::Literal),
            100.0 * errors[1],
            readings[best],
            offsets
        ),
    ))
}

fn c13() -> Result<Outcome> {
    let o = opts(SEED + 21);
    let mut checks = closure_checks(&o, 20, 4.0)?;
    checks.push(counting_identity(&o, 50, 10.0)?);
    checks.push(threaded_determinism(&o, 300)?);
    checks.push(dt_halving(&o, C13_HALVING_TRAJECTORIES)?);
    let passed = checks.iter().all(|c| c.passed);
    let parts: Vec<String> = checks
        .iter()
        .map(|c| {
            format!(
                "{} {} ({})",
                c.name,
                if c.passed { "ok" } else { "FAILED" },
                c.detail
            )
        })
        .collect();
    Ok(Outcome::new(passed, parts.join("; ")))
}

/// Off-chip decay barely moves the filtered flux; dephasing multiplies it.
fn fig4(f: &FluxRuns) -> Outcome {
    let base = f.pi.flux.0;
    let off_chip = f.pi_off_chip.flux.0 / base - 1.0;
    let dephased = f.pi_dephased.flux.0 / base;
    Outcome::new(
        off_chip.abs() < 0.1 && dephased > 5.0,
        format!(
            "phi=pi flux {base:.5}: gamma0=0.1 changes it by {:+.1}% (|.| < 10%), gamma'=1 by x{dephased:.1} (> 5)",
            100.0 * off_chip
        ),
    )
}

/// Detuned, dephased triplet: asymmetric without feedback, central peak
/// filtered at `phi = pi`, broadened at `phi = 0`.
fn fig5() -> Result<Outcome> {
    let p = |params: ModelParams| params.with_delta(5.0).with_gamma_prime(0.5);
    let settings = spectrum_settings(10.0, 10.0);
    let n = 2000;
    let nf = spectrum(p(no_feedback(2.0 * PI)), n, SEED + 22, &settings)?;
    let pi = spectrum(p(short_loop(2.0 * PI, PI)), n, SEED + 23, &settings)?;
    let zero = spectrum(p(short_loop(2.0 * PI, 0.0)), n, SEED + 24, &settings)?;
    let c = center_index(&nf);
    let generalized = (2.0 * PI).hypot(5.0);
    let [lo, hi] = side_peaks(&nf, 0.5 * generalized, 1.5 * generalized);
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Ok(Outcome::new(false, "side peaks not found without feedback".into()));
    };
    let asym = (hi.height - lo.height)
        / (nf.std_error[hi.index].powi(2) + nf.std_error[lo.index].powi(2)).sqrt();
    let x = &nf.detunings;
    let (w_nf, w_zero) = (fwhm(x, &nf.values, c), fwhm(x, &zero.values, c));
    let broadened = matches!((w_nf, w_zero), (Some(a), Some(b)) if b > a);
    let filtered = pi.values[c] < nf.values[c];
    Ok(Outcome::new(
        asym.abs() > 3.0 && filtered && broadened,
        format!(
            "no feedback side peaks {:.4} at {:.2} / {:.4} at {:.2} (asymmetry {asym:.1} se, > 3); \
             S(0) phi=pi {:.4} < no feedback {:.4}; central FWHM phi=0 {:.2} > {:.2}",
            lo.height,
            lo.position,
            hi.height,
            hi.position,
            pi.values[c],
            nf.values[c],
            w_zero.unwrap_or(f64::NAN),
            w_nf.unwrap_or(f64::NAN)
        ),
    ))
}

/// Loop occupancy grows with the delay and the drive and shrinks with the
/// dissipation channels.
fn fig8() -> Result<Outcome> {
    let n = 1000;
    // dt = 0.05 throughout
    let p = |tau: f64, omega: f64| {
        ModelParams::symmetric(1.0, tau, (tau / 0.05).round() as usize).with_omega(omega)
    };
    let short = summary(p(0.5, 0.4 * PI), n, SEED + 25, 15.0, 10.0)?;
    let long = summary(p(1.0, 0.4 * PI), n, SEED + 26, 15.0, 10.0)?;
    let strong = summary(p(1.0, 2.0 * PI), n, SEED + 27, 15.0, 10.0)?;
    let lossy = summary(
        p(1.0, 0.4 * PI).with_gamma0(0.1).with_gamma_prime(0.5),
        n,
        SEED + 28,
        15.0,
        10.0,
    )?;
    let gt = |a: (f64, f64), b: (f64, f64)| a.0 - b.0 > 2.0 * (a.1.powi(2) + b.1.powi(2)).sqrt();
    let [_, p1s, p2s] = short.loop_probabilities;
    let [_, p1l, p2l] = long.loop_probabilities;
    let [_, _, p2d] = strong.loop_probabilities;
    let [_, p1x, p2x] = lossy.loop_probabilities;
    let checks = [
        ("p1 grows with tau", gt(p1l, p1s)),
        ("p2 grows with tau", gt(p2l, p2s)),
        ("p2 grows with Omega", gt(p2d, p2l)),
        ("channels lower p1", gt(p1l, p1x)),
        ("channels lower p2", gt(p2l, p2x)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Ok(Outcome::new(
        failed.is_empty(),
        format!(
            "(p1, p2): tau=0.5 ({:.4}, {:.5}), tau=1 ({:.4}, {:.5}), tau=1 Omega=2pi p2 {:.5}, \
             tau=1 with gamma0=0.1 gamma'=0.5 ({:.4}, {:.5}); orderings at 2 se{}",
            p1s.0,
            p2s.0,
            p1l.0,
            p2l.0,
            p2d.0,
            p1x.0,
            p2x.0,
            if failed.is_empty() {
                " all hold".to_string()
            } else {
                format!(" failing: {}", failed.join(", "))
            }
        ),
    ))
}

fn main() -> ExitCode {
    let mut r = Report {
        failures: 0,
        total: 0,
    };
    let clock = Instant::now();
    r.run("C1", "markovian limit vs Lindblad", || c1(ErrorModel::Sample));
    r.run("C1+", "markovian limit, bounded standard error", || {
        c1(ErrorModel::Bounded)
    });
    r.run("C2", "collision oracle equivalence", || c2(ErrorModel::Sample));
    r.run("C2+", "collision oracle, bounded standard error", || {
        c2(ErrorModel::Bounded)
    });
    r.run("C3", "g2(0) truncation identity", c3);
    r.run("C4", "no-feedback g2 vs quantum regression", c4);

    let clock_spectra = Instant::now();
    let spectra = short_loop_spectra();
    let spectra_seconds = clock_spectra.elapsed().as_secs_f64();
    match &spectra {
        Ok(sp) => {
            r.line("C5", "Mollow side peaks", spectra_seconds / 3.0, c5(&sp.no_feedback));
            r.line("C6", "feedback spectral filtering", spectra_seconds, c6(sp));
        }
        Err(e) => {
            r.line("C5", "Mollow side peaks", spectra_seconds, Err(e.clone()));
            r.line("C6", "feedback spectral filtering", 0.0, Err(e.clone()));
        }
    }
    drop(spectra);

    r.run("C7", "bunching switch", || c7().map(|g| c7_outcome(&g)));
    r.run("C8", "loop occupancy at tau = 2.5", c8);

    let clock_flux = Instant::now();
    let flux = flux_runs();
    let flux_seconds = clock_flux.elapsed().as_secs_f64();
    match &flux {
        Ok(f) => r.line("C9", "dephasing and the steady flux", flux_seconds, Ok(c9(f))),
        Err(e) => r.line("C9", "dephasing and the steady flux", flux_seconds, Err(e.clone())),
    }

    r.run("C10", "waiting-time distribution shapes", c10);
    r.run("C11", "phase-matching maxima of g2(dt)", c11);
    r.run("C12", "loop resonances in the spectrum", c12);
    r.run("C13", "invariant suite", c13);

    match &flux {
        Ok(f) => r.line("P4", "off-chip decay vs dephasing (flux)", 0.0, Ok(fig4(f))),
        Err(e) => r.line("P4", "off-chip decay vs dephasing (flux)", 0.0, Err(e.clone())),
    }
    r.run("P5", "detuned dephased triplet", fig5);
    r.run("P8", "loop occupancy orderings", fig8);

    println!(
        "{} of {} lines passed in {:.0} s",
        r.total - r.failures,
        r.total,
        clock.elapsed().as_secs_f64()
    );
    if r.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
