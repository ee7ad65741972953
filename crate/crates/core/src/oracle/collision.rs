//! Unconditional density-matrix evolution of emitter plus loop.
//!
//! Loop configurations are bitmasks over the `N` bins (bit `j` = photon in
//! bin `j`) with at most two bits set. The joint index is
//! `tls * n_masks + mask_position`, deliberately unlike the engine layout.
//! Each step applies `rho -> K rho K^dag + dt sum_c C rho C^dag` with
//! `K = exp(-i H_eff dt)`, reads the output flux, traces out bin 0, moves
//! every photon one bin forward and renormalizes the trace.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::DensityMatrix;
use crate::dynamics::steps_for;
use crate::model::{FeedbackMode, ModelParams};
use crate::{Error, Result, C64};

/// Largest loop the dense oracle accepts.
pub const ORACLE_MAX_BINS: usize = 8;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Per-step oracle observables on the trajectory engine's time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionSeries {
    pub times: Vec<f64>,
    /// `Tr[P_bin0 rho]/dt` after the emitter substep.
    pub flux: Vec<f64>,
    pub tls_population: Vec<f64>,
    pub loop_probabilities: Vec<[f64; 3]>,
    pub purity: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CollisionOracle {
    n_bins: usize,
    masks: Vec<u32>,
    position: HashMap<u32, usize>,
    dt: f64,
    propagator: DMatrix<C64>,
    jumps: Vec<DMatrix<C64>>,
    hamiltonian: DMatrix<C64>,
}

impl CollisionOracle {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let n = params.n_bins;
        if n > ORACLE_MAX_BINS {
            return Err(Error::OracleLimit(format!("{n} bins > {ORACLE_MAX_BINS}")));
        }
        let masks: Vec<u32> = (0u32..1 << n).filter(|m| m.count_ones() <= 2).collect();
        let position = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        let mut oracle = CollisionOracle {
            n_bins: n,
            masks,
            position,
            dt: params.dt(),
            propagator: DMatrix::zeros(0, 0),
            jumps: Vec::new(),
            hamiltonian: DMatrix::zeros(0, 0),
        };
        oracle.hamiltonian = oracle.build_hamiltonian(params);
        oracle.propagator = (&oracle.hamiltonian * C64::new(0.0, -oracle.dt)).exp();
        oracle.jumps = oracle.build_jumps(params);
        Ok(oracle)
    }

    pub fn dim(&self) -> usize {
        2 * self.masks.len()
    }

    fn index(&self, excited: bool, mask: u32) -> Option<usize> {
        self.position
            .get(&mask)
            .map(|&p| p + if excited { self.masks.len() } else { 0 })
    }

    /// Dense `H_eff` (including the anti-Hermitian loss term).
    pub fn hamiltonian(&self) -> &DMatrix<C64> {
        &self.hamiltonian
    }

    /// Basis label of a joint index: `(excited, mask)`.
    pub fn label(&self, index: usize) -> (bool, u32) {
        let m = self.masks.len();
        (index >= m, self.masks[index % m])
    }

    fn build_hamiltonian(&self, p: &ModelParams) -> DMatrix<C64> {
        let dim = self.dim();
        let mut h = DMatrix::<C64>::zeros(dim, dim);
        let loss = p.gamma0
            + p.gamma_prime
            + match p.feedback {
                FeedbackMode::Loop => 0.0,
                FeedbackMode::None => p.gamma_l,
            };
        let dt = self.dt;
        let into_loop = match p.feedback {
            FeedbackMode::Loop => c((p.gamma_l / dt).sqrt()),
            FeedbackMode::None => c(0.0),
        };
        let output = C64::from_polar((p.gamma_r / dt).sqrt(), p.phi());
        for &mask in &self.masks {
            let g = self.index(false, mask).unwrap();
            let e = self.index(true, mask).unwrap();
            h[(e, e)] += C64::new(p.delta, -0.5 * loss);
            h[(e, g)] += c(0.5 * p.omega);
            h[(g, e)] += c(0.5 * p.omega);
            // lambda_b s+ B_b and its conjugate s- B_b^dag
            for (bin, lambda) in [(self.n_bins - 1, into_loop), (0, output)] {
                if mask & (1 << bin) == 0 {
                    continue;
                }
                let from = self.index(false, mask).unwrap();
                let to = self.index(true, mask & !(1 << bin)).unwrap();
                h[(to, from)] += lambda;
                h[(from, to)] += lambda.conj();
            }
        }
        h
    }

    fn build_jumps(&self, p: &ModelParams) -> Vec<DMatrix<C64>> {
        let dim = self.dim();
        let mut lower = DMatrix::<C64>::zeros(dim, dim);
        let mut excited = DMatrix::<C64>::zeros(dim, dim);
        for &mask in &self.masks {
            let g = self.index(false, mask).unwrap();
            let e = self.index(true, mask).unwrap();
            lower[(g, e)] = c(1.0);
            excited[(e, e)] = c(1.0);
        }
        let decay = p.gamma0
            + match p.feedback {
                FeedbackMode::Loop => 0.0,
                FeedbackMode::None => p.gamma_l,
            };
        [(decay, lower), (p.gamma_prime, excited)]
            .into_iter()
            .filter(|(rate, _)| *rate > 0.0)
            .map(|(rate, op)| op * c(rate.sqrt()))
            .collect()
    }

    /// Ground-state emitter with an empty loop.
    pub fn initial(&self) -> DensityMatrix {
        let dim = self.dim();
        let mut rho = DMatrix::<C64>::zeros(dim, dim);
        rho[(0, 0)] = c(1.0);
        DensityMatrix(rho)
    }

    fn emitter_substep(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = &self.propagator * rho * self.propagator.adjoint();
        for j in &self.jumps {
            out += j * rho * j.adjoint() * c(self.dt);
        }
        out
    }

    /// Traces out bin 0 and relabels bin `j` as `j - 1`.
    fn trace_and_shift(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let dim = self.dim();
        let mut out = DMatrix::<C64>::zeros(dim, dim);
        for a in 0..dim {
            let (ea, ma) = self.label(a);
            for b in 0..dim {
                let (eb, mb) = self.label(b);
                if (ma & 1) != (mb & 1) {
                    continue;
                }
                let ta = self.index(ea, ma >> 1).unwrap();
                let tb = self.index(eb, mb >> 1).unwrap();
                out[(ta, tb)] += rho[(a, b)];
            }
        }
        out
    }

    fn bin0_population(&self, rho: &DMatrix<C64>) -> f64 {
        (0..self.dim())
            .filter(|&a| self.label(a).1 & 1 == 1)
            .map(|a| rho[(a, a)].re)
            .sum()
    }

    fn observables(&self, rho: &DMatrix<C64>) -> (f64, [f64; 3]) {
        let mut excited = 0.0;
        let mut p = [0.0; 3];
        for a in 0..self.dim() {
            let (e, m) = self.label(a);
            let w = rho[(a, a)].re;
            if e {
                excited += w;
            }
            p[m.count_ones() as usize] += w;
        }
        (excited, p)
    }

    /// One full step; returns the new state and the mid-step flux.
    pub fn step(&self, rho: &DensityMatrix) -> (DensityMatrix, f64) {
        let mid = self.emitter_substep(&rho.0);
        let flux = self.bin0_population(&mid) / mid.trace().re / self.dt;
        let mut next = self.trace_and_shift(&mid);
        let tr = next.trace();
        next /= tr;
        (DensityMatrix(next), flux)
    }

    pub fn evolve(&self, t_end: f64) -> CollisionSeries {
        let n = steps_for(t_end, self.dt);
        let mut rho = self.initial();
        let mut out = CollisionSeries {
            times: Vec::with_capacity(n),
            flux: Vec::with_capacity(n),
            tls_population: Vec::with_capacity(n),
            loop_probabilities: Vec::with_capacity(n),
            purity: Vec::with_capacity(n),
        };
        for s in 0..n {
            let (next, flux) = self.step(&rho);
            rho = next;
            let (excited, p) = self.observables(&rho.0);
            out.times.push((s + 1) as f64 * self.dt);
            out.flux.push(flux);
            out.tls_population.push(excited);
            out.loop_probabilities.push(p);
            out.purity.push(rho.purity());
        }
        out
    }
}

/// Convenience wrapper: build the oracle and evolve it.
pub fn unconditional_collision_evolve(params: &ModelParams, t_end: f64) -> Result<CollisionSeries> {
    Ok(CollisionOracle::new(params)?.evolve(t_end))
}
