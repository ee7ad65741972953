//! The emitter without feedback as a two-level master equation.
//!
//! Superoperators act on column-stacked density matrices,
//! `vec(A X B) = (B^T kron A) vec(X)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DensityMatrix;
use crate::dynamics::steps_for;
use crate::model::ModelParams;
use crate::{Error, Result, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `sigma^-` on `{|g>, |e>}`.
fn lower() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)])
}

fn excited_projector() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)])
}

fn vec_of(m: &DMatrix<C64>) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

fn unvec(v: &DVector<C64>, n: usize) -> DMatrix<C64> {
    DMatrix::from_column_slice(n, n, v.as_slice())
}

/// Dissipator of one collapse operator as an `n^2 x n^2` superoperator.
pub(crate) fn dissipator(op: &DMatrix<C64>) -> DMatrix<C64> {
    let n = op.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let cdc = op.adjoint() * op;
    op.conjugate().kronecker(op) - (id.kronecker(&cdc) + cdc.transpose().kronecker(&id)) * c(0.5)
}

/// `-i [H, .]` as a superoperator.
pub(crate) fn commutator(h: &DMatrix<C64>) -> DMatrix<C64> {
    let n = h.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    (id.kronecker(h) - h.transpose().kronecker(&id)) * C64::new(0.0, -1.0)
}

/// Driven two-level emitter with radiative decay and pure dephasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsMasterEquation {
    pub omega: f64,
    pub delta: f64,
    /// Total `sigma^-` rate.
    pub decay: f64,
    /// `sigma^+ sigma^-` rate.
    pub dephasing: f64,
}

impl TlsMasterEquation {
    /// The feedback-free limit of `params`: the emitter decays into both
    /// waveguide directions and off chip.
    pub fn markovian(params: &ModelParams) -> Self {
        TlsMasterEquation {
            omega: params.omega,
            delta: params.delta,
            decay: params.gamma_l + params.gamma_r + params.gamma0,
            dephasing: params.gamma_prime,
        }
    }

    pub fn hamiltonian(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.0),
                c(0.5 * self.omega),
                c(0.5 * self.omega),
                c(self.delta),
            ],
        )
    }

    pub fn liouvillian(&self) -> DMatrix<C64> {
        let mut l = commutator(&self.hamiltonian());
        l += dissipator(&(lower() * c(self.decay.sqrt())));
        l += dissipator(&(excited_projector() * c(self.dephasing.sqrt())));
        l
    }

    /// `exp(L t)`.
    pub fn propagator(&self, t: f64) -> DMatrix<C64> {
        (self.liouvillian() * c(t)).exp()
    }

    pub fn evolve(&self, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        if rho0.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: rho0.dim(),
            });
        }
        let v = self.propagator(t) * vec_of(&rho0.0);
        let rho = unvec(&v, 2);
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("master-equation propagation"));
        }
        Ok(DensityMatrix(rho))
    }

    pub fn ground() -> DensityMatrix {
        DensityMatrix(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0), c(0.0), c(0.0), c(0.0)],
        ))
    }

    /// `rho_ee` at `dt, 2 dt, ..., n dt` starting from the ground state.
    pub fn excited_population_series(&self, dt: f64, n: usize) -> Vec<f64> {
        let p = self.propagator(dt);
        let mut v = vec_of(&Self::ground().0);
        (0..n)
            .map(|_| {
                v = &p * &v;
                v[3].re
            })
            .collect()
    }

    /// Null space of the Liouvillian with the trace fixed to one.
    pub fn steady_state(&self) -> Result<DensityMatrix> {
        let mut l = self.liouvillian();
        // replace the rho_gg row by Tr rho = rho_gg + rho_ee
        for j in 0..4 {
            l[(0, j)] = c(0.0);
        }
        l[(0, 0)] = c(1.0);
        l[(0, 3)] = c(1.0);
        let mut rhs = DVector::<C64>::zeros(4);
        rhs[0] = c(1.0);
        let v = l
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NoSteadyState("singular Liouvillian".into()))?;
        Ok(DensityMatrix(unvec(&v, 2)))
    }
}

/// Output-bin correlation functions of the feedback-free emitter.
///
/// All quantities are bin populations (per step), the units the trajectory
/// protocols produce: `G2` is the unnormalized second-order function, `G1`
/// the first-order one, `output_population = <B0^dag B0>_ss` and
/// `coherence_sqr = |<B0>_ss|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSeries {
    pub delays: Vec<f64>,
    pub g1: Vec<C64>,
    pub g2: Vec<f64>,
    pub output_population: f64,
    pub coherence_sqr: f64,
}

impl RegressionSeries {
    pub fn g2_normalized(&self) -> Vec<f64> {
        let n2 = self.output_population * self.output_population;
        self.g2.iter().map(|g| g / n2).collect()
    }

    pub fn g1_normalized(&self) -> Vec<C64> {
        self.g1.iter().map(|g| g / self.output_population).collect()
    }
}

/// Quantum-regression correlations of the continuous master equation,
/// sampled at `t2 = m dt` and scaled to output-bin units with `gamma_R dt`.
pub fn regression_correlations(params: &ModelParams, t2_max: f64) -> Result<RegressionSeries> {
    params.validate()?;
    let me = TlsMasterEquation::markovian(params);
    let dt = params.dt();
    let m_max = steps_for(t2_max, dt);
    let rho = me.steady_state()?.0;
    let sm = lower();
    let sp = sm.adjoint();
    let pe = excited_projector();
    let step = me.propagator(dt);
    let mut x1 = vec_of(&(&sm * &rho));
    let mut x2 = vec_of(&(&sm * &rho * &sp));
    let eta = params.gamma_r * dt;
    let mut g1 = Vec::with_capacity(m_max + 1);
    let mut g2 = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        if m > 0 {
            x1 = &step * x1;
            x2 = &step * x2;
        }
        g1.push((&sp * unvec(&x1, 2)).trace() * eta);
        g2.push((&pe * unvec(&x2, 2)).trace().re * eta * eta);
    }
    let coherence = (&sm * &rho).trace();
    Ok(RegressionSeries {
        delays: (0..=m_max).map(|m| m as f64 * dt).collect(),
        g1,
        g2,
        output_population: eta * rho[(1, 1)].re,
        coherence_sqr: eta * coherence.norm_sqr(),
    })
}

/// Emitter plus the output bin during one feedback-free collision step.
/// Joint index `tls + 2 * photon`.
struct BinnedStep {
    propagator: DMatrix<C64>,
    jumps: Vec<DMatrix<C64>>,
    dt: f64,
}

impl BinnedStep {
    fn new(params: &ModelParams) -> Self {
        let dt = params.dt();
        let id2 = DMatrix::<C64>::identity(2, 2);
        let b = lower(); // same matrix shape annihilates the bin photon
        let sm = id2.kronecker(&lower());
        let pe = id2.kronecker(&excited_projector());
        let lambda = C64::from_polar((params.gamma_r / dt).sqrt(), params.phi());
        let coupling = b.kronecker(&lower().adjoint()) * lambda;
        let loss = params.gamma_l + params.gamma0 + params.gamma_prime;
        let h = id2.kronecker(&TlsMasterEquation::markovian(params).hamiltonian())
            + &coupling
            + coupling.adjoint()
            - &pe * C64::new(0.0, 0.5 * loss);
        let propagator = (h * C64::new(0.0, -dt)).exp();
        let jumps = [
            (params.gamma_l + params.gamma0, sm.clone()),
            (params.gamma_prime, pe.clone()),
        ]
        .into_iter()
        .filter(|(rate, _)| *rate > 0.0)
        .map(|(rate, op)| op * c(rate.sqrt()))
        .collect();
        BinnedStep {
            propagator,
            jumps,
            dt,
        }
    }

    /// Joint operator after the emitter substep, starting from `x` with the
    /// bin empty.
    fn mid(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let mut joint = DMatrix::<C64>::zeros(4, 4);
        joint.view_mut((0, 0), (2, 2)).copy_from(x);
        let mut out = &self.propagator * &joint * self.propagator.adjoint();
        for j in &self.jumps {
            out += j * &joint * j.adjoint() * c(self.dt);
        }
        out
    }

    /// Trace over the bin.
    fn reduce(joint: &DMatrix<C64>) -> DMatrix<C64> {
        joint.view((0, 0), (2, 2)) + joint.view((2, 2), (2, 2))
    }

    fn full(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        Self::reduce(&self.mid(x))
    }

    fn bin_population(joint: &DMatrix<C64>) -> f64 {
        joint[(2, 2)].re + joint[(3, 3)].re
    }

    /// `Tr[B0^dag X]`: bra photon, ket empty.
    fn b0_dag_trace(joint: &DMatrix<C64>) -> C64 {
        joint[(0, 2)] + joint[(1, 3)]
    }

    /// `Tr[B0 X]`: ket photon, bra empty.
    fn b0_trace(joint: &DMatrix<C64>) -> C64 {
        joint[(2, 0)] + joint[(3, 1)]
    }

    fn steady_state(&self) -> Result<DMatrix<C64>> {
        let mut rho = TlsMasterEquation::ground().0;
        for _ in 0..10_000_000usize {
            let mut next = self.full(&rho);
            let tr = next.trace();
            next /= tr;
            let change = (&next - &rho).iter().map(|z| z.norm()).fold(0.0, f64::max);
            rho = next;
            if change < 1e-15 {
                return Ok(rho);
            }
        }
        Err(Error::NoSteadyState(
            "collision map did not converge".into(),
        ))
    }
}

/// Quantum-regression correlations of the feedback-free collision map itself,
/// with the same step structure and timing as the trajectory protocols:
/// values at delay `m dt` are taken after the emitter substep of the `m`-th
/// step following the forced detection, and the delay-0 values belong to the
/// forced step. Converges to [`regression_correlations`] as `dt -> 0`.
pub fn binned_regression(params: &ModelParams, t2_max: f64) -> Result<RegressionSeries> {
    params.validate()?;
    let step = BinnedStep::new(params);
    let dt = params.dt();
    let m_max = steps_for(t2_max, dt);
    let rho = step.steady_state()?;
    let mid = step.mid(&rho);
    let output_population = BinnedStep::bin_population(&mid);
    // the lead's per-step renormalization, averaged over the steady state
    let renorm = 1.0 / step.full(&rho).trace().re;

    // photon detected and removed: TLS block with the bin occupied
    let mut post: DMatrix<C64> = mid.view((2, 2), (2, 2)).into_owned();
    // follower = B0 lead: ket with the photon, bra without
    let mut follower: DMatrix<C64> = mid.view((2, 0), (2, 2)) * c(renorm);

    let mut g1 = vec![c(output_population)];
    let mut g2 = vec![0.0];
    for _ in 1..=m_max {
        let m2 = step.mid(&post);
        g2.push(BinnedStep::bin_population(&m2));
        let keep = post.trace();
        post = BinnedStep::reduce(&m2);
        let tr = post.trace();
        post *= keep / tr;

        let m1 = step.mid(&follower);
        g1.push(BinnedStep::b0_dag_trace(&m1));
        follower = BinnedStep::reduce(&m1) * c(renorm);
    }
    Ok(RegressionSeries {
        delays: (0..=m_max).map(|m| m as f64 * dt).collect(),
        g1,
        g2,
        output_population,
        coherence_sqr: BinnedStep::b0_trace(&mid).norm_sqr(),
    })
}
