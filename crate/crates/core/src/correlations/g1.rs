use super::{CorrelationKind, CorrelationSeries, Moments};
use crate::dynamics::{steps_for, uniform, Engine, EventRecord, StreamId};
use crate::model::StateVector;
use crate::observables::{output_coherence, output_transition};
use crate::{Error, Result, C64};

/// One lead/follower pair.
#[derive(Debug, Clone, PartialEq)]
pub struct G1Trajectory {
    /// `<lead| B0^dag |follower> / <lead|lead>` at delays `0..=m_max`.
    pub g1: Vec<C64>,
    /// Lead output-bin population at the same points.
    pub lead_population: Vec<f64>,
    /// Lead `<B0>` at the same points.
    pub lead_coherence: Vec<C64>,
    /// The follower was annihilated by a projection; the remaining values
    /// are exact zeros.
    pub follower_lost: bool,
}

/// Applies the same emitter substep to lead and follower, with the jump
/// (if any) chosen by the lead.
fn paired_substep<R: rand::Rng + ?Sized>(
    engine: &Engine,
    lead: &mut StateVector,
    follower: &mut StateVector,
    rng: &mut R,
) -> Result<()> {
    let u = uniform(rng);
    match engine.choose_jump(lead, u)? {
        Some(kind) => {
            engine.apply_jump(kind, lead);
            engine.apply_jump(kind, follower);
            let n = lead.normalize()?;
            follower.scale(1.0 / n);
        }
        None => {
            engine.evolve_no_jump(lead)?;
            engine.evolve_no_jump(follower)?;
        }
    }
    Ok(())
}

/// Measurement chosen by the lead, applied to both; shift; rescale both by
/// the lead's norm.
fn paired_completion<R: rand::Rng + ?Sized>(
    engine: &Engine,
    lead: &mut StateVector,
    follower: &mut StateVector,
    rng: &mut R,
) -> Result<()> {
    let u = uniform(rng);
    let detected = u < engine.output_population(lead)?;
    engine.project_output(lead, detected);
    engine.project_output(follower, detected);
    engine.shift_bins(lead)?;
    engine.shift_bins(follower)?;
    let n = lead.normalize()?;
    follower.scale(1.0 / n);
    Ok(())
}

/// Lead/follower protocol: run to `t_ss`, split off `B0 |lead>` after the
/// emitter substep of the last step, then record `G1` for `t2_max`.
///
/// The lead draws its randomness exactly like a plain trajectory on the
/// same stream, so it is an unbiased sample of the steady state.
pub fn g1_trajectory(
    engine: &Engine,
    stream: StreamId,
    t_ss: f64,
    t2_max: f64,
) -> Result<G1Trajectory> {
    let dt = engine.dt();
    let basis = engine.basis();
    let n_ss = steps_for(t_ss, dt).max(1);
    let m_max = steps_for(t2_max, dt);
    let mut rng = stream.rng();
    let mut lead = engine.initial_state();
    let mut record = EventRecord::new();
    for s in 0..n_ss - 1 {
        engine.step(&mut lead, &mut rng, s as u64, &mut record)?;
    }
    engine.qt_substep(&mut lead, &mut rng)?;
    let mut follower = lead.clone();
    engine.annihilate_output(&mut follower);

    let mut out = G1Trajectory {
        g1: Vec::with_capacity(m_max + 1),
        lead_population: Vec::with_capacity(m_max + 1),
        lead_coherence: Vec::with_capacity(m_max + 1),
        follower_lost: false,
    };
    for m in 0..=m_max {
        if m > 0 {
            paired_substep(engine, &mut lead, &mut follower, &mut rng)?;
        }
        let lead_norm = lead.norm_sqr();
        out.g1
            .push(output_transition(basis, &lead, &follower) / lead_norm);
        out.lead_population.push(engine.output_population(&lead)?);
        out.lead_coherence.push(output_coherence(basis, &lead)?);
        if m < m_max {
            paired_completion(engine, &mut lead, &mut follower, &mut rng)?;
            if !out.follower_lost && follower.norm_sqr() == 0.0 {
                out.follower_lost = true;
            }
        }
    }
    if !follower.is_finite() {
        return Err(Error::NonFinite("follower propagation"));
    }
    Ok(out)
}

/// Ensemble `G1` with lead statistics and per-batch means for spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct G1Ensemble {
    /// Unnormalized `G1`, output-bin units.
    pub g1: CorrelationSeries,
    /// Mean lead output-bin population per delay.
    pub lead_population: Vec<f64>,
    /// `<B0>_ss`, averaged over leads and delays.
    pub coherence: C64,
    /// `G1` means of contiguous trajectory batches.
    pub batches: Vec<Vec<C64>>,
    pub followers_lost: usize,
}

impl G1Ensemble {
    /// `|<B0>_ss|^2`, the coherent part removed from spectra.
    pub fn coherent_term(&self) -> f64 {
        self.coherence.norm_sqr()
    }
}

/// Streaming reduction of lead/follower pairs, pushed in trajectory order.
#[derive(Debug, Clone, PartialEq)]
pub struct G1Accumulator {
    re: Vec<Moments>,
    im: Vec<Moments>,
    population: Vec<Moments>,
    coherence: (Moments, Moments),
    batch_size: usize,
    batches: Vec<Vec<C64>>,
    current: Vec<C64>,
    in_current: usize,
    lost: usize,
}

impl G1Accumulator {
    /// `batch_size` trajectories per spectrum batch; a trailing partial
    /// batch is dropped from the batch list.
    pub fn new(len: usize, batch_size: usize) -> Self {
        G1Accumulator {
            re: vec![Moments::default(); len],
            im: vec![Moments::default(); len],
            population: vec![Moments::default(); len],
            coherence: (Moments::default(), Moments::default()),
            batch_size: batch_size.max(1),
            batches: Vec::new(),
            current: vec![C64::new(0.0, 0.0); len],
            in_current: 0,
            lost: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.coherence.0.n
    }

    pub fn push(&mut self, t: &G1Trajectory) -> Result<()> {
        let len = self.re.len();
        if t.g1.len() != len || t.lead_population.len() != len || t.lead_coherence.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: t.g1.len(),
            });
        }
        for m in 0..len {
            self.re[m].push(t.g1[m].re);
            self.im[m].push(t.g1[m].im);
            self.population[m].push(t.lead_population[m]);
            self.current[m] += t.g1[m];
        }
        let mean_coh = t.lead_coherence.iter().sum::<C64>() / len as f64;
        self.coherence.0.push(mean_coh.re);
        self.coherence.1.push(mean_coh.im);
        if t.follower_lost {
            self.lost += 1;
        }
        self.in_current += 1;
        if self.in_current == self.batch_size {
            let scale = 1.0 / self.batch_size as f64;
            self.batches
                .push(self.current.iter().map(|v| v * scale).collect());
            self.current
                .iter_mut()
                .for_each(|v| *v = C64::new(0.0, 0.0));
            self.in_current = 0;
        }
        Ok(())
    }

    pub fn finish(&self, delays: Vec<f64>) -> Result<G1Ensemble> {
        if delays.len() != self.re.len() {
            return Err(Error::DimensionMismatch {
                expected: self.re.len(),
                got: delays.len(),
            });
        }
        if self.count() == 0 {
            return Err(Error::ZeroFlux);
        }
        let g1 = CorrelationSeries {
            kind: CorrelationKind::FirstOrder,
            delays,
            values: self
                .re
                .iter()
                .zip(&self.im)
                .map(|(r, i)| C64::new(r.mean, i.mean))
                .collect(),
            std_error: self
                .re
                .iter()
                .zip(&self.im)
                .map(|(r, i)| C64::new(r.std_error(), i.std_error()))
                .collect(),
            n_trajectories: self.count(),
            skipped: 0,
        };
        Ok(G1Ensemble {
            g1,
            lead_population: self.population.iter().map(|p| p.mean).collect(),
            coherence: C64::new(self.coherence.0.mean, self.coherence.1.mean),
            batches: self.batches.clone(),
            followers_lost: self.lost,
        })
    }
}

/// `g1(t2) = G1(t2) / sqrt(n(t2) n(0))` with the lead populations `n`.
/// Errors are scaled with the same denominators.
pub fn g1_normalized(g1: &CorrelationSeries, lead_population: &[f64]) -> Result<CorrelationSeries> {
    if lead_population.len() != g1.len() {
        return Err(Error::DimensionMismatch {
            expected: g1.len(),
            got: lead_population.len(),
        });
    }
    let n0 = lead_population[0];
    if n0 <= 0.0 || lead_population.iter().any(|&n| n <= 0.0) {
        return Err(Error::ZeroFlux);
    }
    let scale: Vec<f64> = lead_population
        .iter()
        .map(|&n| 1.0 / (n * n0).sqrt())
        .collect();
    Ok(CorrelationSeries {
        kind: CorrelationKind::FirstOrderNormalized,
        delays: g1.delays.clone(),
        values: g1.values.iter().zip(&scale).map(|(v, s)| v * *s).collect(),
        std_error: g1
            .std_error
            .iter()
            .zip(&scale)
            .map(|(v, s)| v * *s)
            .collect(),
        n_trajectories: g1.n_trajectories,
        skipped: g1.skipped,
    })
}
