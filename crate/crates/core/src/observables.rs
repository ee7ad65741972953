//! Instantaneous and record-based observables.

use serde::{Deserialize, Serialize};

use crate::dynamics::EventRecord;
use crate::model::{Basis, ModelParams, Sector, StateVector};
use crate::{Error, Result, C64};

/// `<B_j^dag B_j>`: probability of a photon in bin `j`.
pub fn bin_population(basis: &Basis, state: &StateVector, j: usize) -> Result<f64> {
    if j >= basis.n_bins() {
        return Err(Error::BinOutOfRange {
            index: j,
            n_bins: basis.n_bins(),
        });
    }
    let amps = state.amplitudes();
    if j == 0 {
        return Ok(basis
            .bin0_occupied()
            .iter()
            .map(|&s| amps[2 * s].norm_sqr() + amps[2 * s + 1].norm_sqr())
            .sum());
    }
    Ok(basis
        .sectors()
        .iter()
        .enumerate()
        .filter(|(_, sector)| sector.contains(j))
        .map(|(s, _)| amps[2 * s].norm_sqr() + amps[2 * s + 1].norm_sqr())
        .sum())
}

/// Output flux `n_B0 = <B_0^dag B_0> / dt` (per unit time).
pub fn output_flux(params: &ModelParams, basis: &Basis, state: &StateVector) -> Result<f64> {
    Ok(bin_population(basis, state, 0)? / params.dt())
}

/// `(p0, p1, p2)`: probabilities of zero, one and two photons in the loop.
pub fn loop_photon_probabilities(basis: &Basis, state: &StateVector) -> [f64; 3] {
    let amps = state.amplitudes();
    let one_end = 2 * (1 + basis.n_bins());
    let sum = |xs: &[C64]| xs.iter().map(|a| a.norm_sqr()).sum::<f64>();
    [
        sum(&amps[..2]),
        sum(&amps[2..one_end]),
        sum(&amps[one_end..]),
    ]
}

/// `<s+ s->`: excited-state population of the emitter.
pub fn tls_population(state: &StateVector) -> f64 {
    state
        .amplitudes()
        .iter()
        .skip(1)
        .step_by(2)
        .map(|a| a.norm_sqr())
        .sum()
}

/// `<bra| B_0^dag |ket>`, i.e. the overlap of `B_0 |bra>` with `|ket>`.
pub fn output_transition(basis: &Basis, bra: &StateVector, ket: &StateVector) -> C64 {
    let (b, k) = (bra.amplitudes(), ket.amplitudes());
    basis
        .bin0_occupied()
        .iter()
        .zip(basis.bin0_removed())
        .map(|(&s, &r)| b[2 * s].conj() * k[2 * r] + b[2 * s + 1].conj() * k[2 * r + 1])
        .sum()
}

/// `<B_0>` of a (not necessarily normalized) state.
pub fn output_coherence(basis: &Basis, state: &StateVector) -> Result<C64> {
    let n = state.norm_sqr();
    if n == 0.0 {
        return Err(Error::ZeroNorm("output coherence"));
    }
    Ok(output_transition(basis, state, state).conj() / n)
}

/// Mean and standard error of an observable on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSeries {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub n_trajectories: usize,
}

impl EnsembleSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Average and combined standard error over samples with `times >= t0`.
    /// The errors are combined as if independent, which understates them for
    /// correlated samples; use it for summaries, not tests of significance.
    pub fn tail_mean(&self, t0: f64) -> Option<(f64, f64)> {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.times[i] >= t0 - 1e-12)
            .collect();
        if idx.is_empty() {
            return None;
        }
        let n = idx.len() as f64;
        let mean = idx.iter().map(|&i| self.mean[i]).sum::<f64>() / n;
        let se = idx.iter().map(|&i| self.std_error[i]).sum::<f64>() / n;
        Some((mean, se))
    }
}

/// Streaming mean/variance (Welford) over equal-length series. Samples must
/// be pushed in a fixed order for bitwise-reproducible results.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesAccumulator {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl SeriesAccumulator {
    pub fn new(len: usize) -> Self {
        SeriesAccumulator {
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<()> {
        if sample.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: sample.len(),
            });
        }
        self.n += 1;
        let n = self.n as f64;
        for ((m, q), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(sample) {
            let d = x - *m;
            *m += d / n;
            *q += d * (x - *m);
        }
        Ok(())
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Sample standard deviation over `sqrt(n)`; zero for fewer than two samples.
    pub fn std_error(&self) -> Vec<f64> {
        if self.n < 2 {
            return vec![0.0; self.mean.len()];
        }
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|q| (q.max(0.0) / (n - 1.0) / n).sqrt())
            .collect()
    }

    pub fn finish(&self, times: Vec<f64>) -> Result<EnsembleSeries> {
        if times.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: times.len(),
            });
        }
        Ok(EnsembleSeries {
            times,
            mean: self.mean.clone(),
            std_error: self.std_error(),
            n_trajectories: self.n,
        })
    }
}

/// Pooled histogram of delays between consecutive output detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtdHistogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// `counts / n_events`.
    pub normalized: Vec<f64>,
    /// Number of delays (not detections).
    pub n_events: u64,
}

impl WtdHistogram {
    pub fn is_valid(&self) -> bool {
        self.n_events > 0
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|k| (k as f64 + 0.5) * self.bin_width)
            .collect()
    }

    /// Index of the most populated bin.
    pub fn peak_bin(&self) -> Option<usize> {
        if !self.is_valid() {
            return None;
        }
        let mut best = 0;
        for (k, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = k;
            }
        }
        Some(best)
    }

    /// Upper edge of the last non-empty bin.
    pub fn support_end(&self) -> f64 {
        self.counts
            .iter()
            .rposition(|&c| c > 0)
            .map_or(0.0, |k| (k + 1) as f64 * self.bin_width)
    }
}

/// Default waiting-time bin width: five steps.
pub fn default_wtd_bin_width(dt: f64) -> f64 {
    5.0 * dt
}

/// Histogram of the delays between consecutive detections in each record,
/// pooled over records. With no delays the histogram is returned empty and
/// reports `is_valid() == false`.
pub fn waiting_time_distribution<'a, I>(records: I, dt: f64, bin_width: f64) -> Result<WtdHistogram>
where
    I: IntoIterator<Item = &'a EventRecord>,
{
    if !(dt > 0.0 && bin_width > 0.0 && dt.is_finite() && bin_width.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "dt = {dt} and bin_width = {bin_width} must be > 0"
        )));
    }
    let mut counts: Vec<u64> = Vec::new();
    let mut n_events = 0u64;
    for record in records {
        let mut last: Option<u64> = None;
        for step in record.detection_steps() {
            if let Some(prev) = last {
                let delay = (step - prev) as f64 * dt;
                // delays are exact step multiples; the nudge keeps k*width in bin k
                let k = (delay / bin_width + 1e-9).floor() as usize;
                if counts.len() <= k {
                    counts.resize(k + 1, 0);
                }
                counts[k] += 1;
                n_events += 1;
            }
            last = Some(step);
        }
    }
    let normalized = if n_events > 0 {
        counts.iter().map(|&c| c as f64 / n_events as f64).collect()
    } else {
        Vec::new()
    };
    Ok(WtdHistogram {
        bin_width,
        counts,
        normalized,
        n_events,
    })
}

/// Defaults for steady-state detection: 2% relative change between windows
/// of length `2 / gamma`.
pub const STEADY_STATE_REL_TOL: f64 = 0.02;
pub const STEADY_STATE_WINDOW: f64 = 2.0;

/// Earliest time after which the windowed mean of `series` is stable.
///
/// Adjacent windows `[a, a + w)` and `[a + w, a + 2w)` are compared for every
/// start sample `a`; the first `a` with a relative change below `rel_tol`
/// yields `t_ss = end of the first window`, rounded up to a whole step.
pub fn detect_steady_state(series: &EnsembleSeries, rel_tol: f64, window: f64) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::NoSteadyState("series too short".into()));
    }
    let dt = series.times[1] - series.times[0];
    let w = (window / dt).round().max(1.0) as usize;
    if 2 * w > series.len() {
        return Err(Error::NoSteadyState(format!(
            "series of {} samples cannot hold two windows of {w}",
            series.len()
        )));
    }
    // prefix sums make every window mean O(1)
    let mut prefix = Vec::with_capacity(series.len() + 1);
    prefix.push(0.0);
    for &x in &series.mean {
        prefix.push(prefix.last().unwrap() + x);
    }
    let window_mean = |a: usize| (prefix[a + w] - prefix[a]) / w as f64;
    for a in 0..=series.len() - 2 * w {
        let first = window_mean(a);
        let second = window_mean(a + w);
        let scale = first.abs().max(second.abs());
        let change = (second - first).abs();
        if change <= rel_tol * scale || scale == 0.0 {
            let t = series.times[a + w - 1];
            return Ok((t / dt - 1e-9).ceil() * dt);
        }
    }
    Err(Error::NoSteadyState(format!(
        "windowed mean still changing by more than {rel_tol} at the end of the series; extend t_end"
    )))
}

/// `p(1) + 2 p(2)`: the mean loop photon number.
pub fn mean_loop_photons(probabilities: [f64; 3]) -> f64 {
    probabilities[1] + 2.0 * probabilities[2]
}

/// Sectors containing bin `j`, mostly useful for diagnostics.
pub fn sectors_with_bin(basis: &Basis, j: usize) -> impl Iterator<Item = Sector> + '_ {
    basis
        .sectors()
        .iter()
        .copied()
        .filter(move |s| s.contains(j))
}
