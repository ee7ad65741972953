use serde::{Deserialize, Serialize};

use super::{CorrelationKind, CorrelationSeries, Moments};
use crate::dynamics::{steps_for, uniform, Engine, EventRecord, StreamId};
use crate::observables::bin_population;
use crate::{Error, Result, C64};

/// How trajectories are combined into `g2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum G2Estimator {
    /// `mean(w G) / mean(w)^2` with `w` the output-bin population at the
    /// forced step. Each forced trajectory represents `B0 rho B0^dag`
    /// only after weighting by `w`.
    #[default]
    Weighted,
    /// `mean(G) / mean(w)`: every forced trajectory counts equally. Biased
    /// when `w` and the later emission are correlated.
    Unweighted,
}

/// One forced-detection trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct G2Trajectory {
    /// `<B0^dag B0>` just before the forced annihilation.
    pub weight: f64,
    /// Output-bin population of the renormalized post-detection trajectory
    /// at delays `0, dt, ..., m_max dt`; all zero when skipped.
    pub values: Vec<f64>,
    /// The output bin was exactly empty, so there was nothing to annihilate.
    pub skipped: bool,
}

/// Runs to `t_ss`, forces a detection in the last step and records the
/// output-bin population for `t2_max` afterwards.
pub fn g2_trajectory(
    engine: &Engine,
    stream: StreamId,
    t_ss: f64,
    t2_max: f64,
) -> Result<G2Trajectory> {
    let dt = engine.dt();
    let n_ss = steps_for(t_ss, dt).max(1);
    let m_max = steps_for(t2_max, dt);
    let mut rng = stream.rng();
    let mut psi = engine.initial_state();
    let mut record = EventRecord::new();
    for s in 0..n_ss - 1 {
        engine.step(&mut psi, &mut rng, s as u64, &mut record)?;
    }
    let forced = (n_ss - 1) as u64;
    engine.qt_substep(&mut psi, &mut rng)?;
    let weight = engine.output_population(&psi)?;
    // keep the two-draws-per-step stream layout
    let _ = uniform(&mut rng);
    engine.annihilate_output(&mut psi);
    let mut values = vec![0.0; m_max + 1];
    if psi.norm_sqr() == 0.0 {
        return Ok(G2Trajectory {
            weight: 0.0,
            values,
            skipped: true,
        });
    }
    values[0] = bin_population(engine.basis(), &psi, 0)? / psi.norm_sqr();
    engine.shift_bins(&mut psi)?;
    psi.normalize()?;
    for (m, value) in values.iter_mut().enumerate().skip(1) {
        engine.qt_substep(&mut psi, &mut rng)?;
        *value = engine.output_population(&psi)?;
        engine.complete_step(&mut psi, &mut rng, forced + m as u64, &mut record)?;
    }
    Ok(G2Trajectory {
        weight,
        values,
        skipped: false,
    })
}

/// Streaming reduction of forced-detection trajectories. Push in a fixed
/// order for reproducible output.
#[derive(Debug, Clone, PartialEq)]
pub struct G2Accumulator {
    weight: Moments,
    // weighted: moments of a = w G and co-moment with w
    a_mean: Vec<f64>,
    a_m2: Vec<f64>,
    aw_c: Vec<f64>,
    // unweighted: moments of G over non-skipped trajectories
    plain: Vec<Moments>,
    skipped: usize,
}

impl G2Accumulator {
    pub fn new(len: usize) -> Self {
        G2Accumulator {
            weight: Moments::default(),
            a_mean: vec![0.0; len],
            a_m2: vec![0.0; len],
            aw_c: vec![0.0; len],
            plain: vec![Moments::default(); len],
            skipped: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.weight.n
    }

    pub fn push(&mut self, t: &G2Trajectory) -> Result<()> {
        if t.values.len() != self.a_mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.a_mean.len(),
                got: t.values.len(),
            });
        }
        self.weight.push(t.weight);
        let n = self.weight.n as f64;
        let w_new = self.weight.mean;
        for (m, &g) in t.values.iter().enumerate() {
            let a = t.weight * g;
            let da = a - self.a_mean[m];
            self.a_mean[m] += da / n;
            self.a_m2[m] += da * (a - self.a_mean[m]);
            self.aw_c[m] += da * (t.weight - w_new);
        }
        if t.skipped {
            self.skipped += 1;
        } else {
            for (acc, &g) in self.plain.iter_mut().zip(&t.values) {
                acc.push(g);
            }
        }
        Ok(())
    }

    /// Steady-state output-bin population `<B0^dag B0>_ss` and its error.
    pub fn output_population(&self) -> (f64, f64) {
        (self.weight.mean, self.weight.std_error())
    }

    /// Normalized `g2` and the unnormalized `G2`, both on `delays`.
    pub fn finish(
        &self,
        delays: Vec<f64>,
        estimator: G2Estimator,
    ) -> Result<(CorrelationSeries, CorrelationSeries)> {
        if delays.len() != self.a_mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.a_mean.len(),
                got: delays.len(),
            });
        }
        let w = self.weight.mean;
        if self.weight.n == 0 || w <= 0.0 {
            return Err(Error::ZeroFlux);
        }
        let n = self.weight.n as f64;
        let len = delays.len();
        let mut g2 = Vec::with_capacity(len);
        let mut g2_err = Vec::with_capacity(len);
        let mut big = Vec::with_capacity(len);
        let mut big_err = Vec::with_capacity(len);
        match estimator {
            G2Estimator::Weighted => {
                let var_w = if n > 1.0 {
                    self.weight.m2 / (n - 1.0)
                } else {
                    0.0
                };
                for m in 0..len {
                    let a = self.a_mean[m];
                    let (var_a, cov) = if n > 1.0 {
                        (self.a_m2[m] / (n - 1.0), self.aw_c[m] / (n - 1.0))
                    } else {
                        (0.0, 0.0)
                    };
                    // delta method on a / w^2
                    let var_z = var_a / w.powi(4) + 4.0 * a * a * var_w / w.powi(6)
                        - 4.0 * a * cov / w.powi(5);
                    g2.push(a / (w * w));
                    g2_err.push((var_z.max(0.0) / n).sqrt());
                    big.push(a);
                    big_err.push((var_a.max(0.0) / n).sqrt());
                }
            }
            G2Estimator::Unweighted => {
                for acc in &self.plain {
                    g2.push(acc.mean / w);
                    g2_err.push(acc.std_error() / w);
                    big.push(acc.mean * w);
                    big_err.push(acc.std_error() * w);
                }
            }
        }
        let series = |kind, values: Vec<f64>, errors: Vec<f64>| CorrelationSeries {
            kind,
            delays: delays.clone(),
            values: values.into_iter().map(|v| C64::new(v, 0.0)).collect(),
            std_error: errors.into_iter().map(|v| C64::new(v, 0.0)).collect(),
            n_trajectories: self.weight.n,
            skipped: self.skipped,
        };
        Ok((
            series(CorrelationKind::SecondOrderNormalized, g2, g2_err),
            series(CorrelationKind::SecondOrder, big, big_err),
        ))
    }
}
