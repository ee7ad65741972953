use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::hamiltonian::apply_into;
use crate::model::{Basis, ModelParams, Sector};
use crate::C64;

/// How `exp(-i H_eff dt)` is applied between jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Exact exponential of each invariant block.
    #[default]
    ExactBlocks,
    /// Classical 4th-order Runge–Kutta with fixed substeps per `dt`.
    Rk4 { substeps: usize },
}

/// A set of equal-sized blocks sharing one propagator matrix.
#[derive(Debug, Clone)]
struct BlockFamily {
    size: usize,
    /// Row-major `size x size`.
    matrix: Vec<C64>,
    /// Concatenated global indices, `size` per block.
    members: Vec<usize>,
}

/// Applies the no-jump evolution over one time step.
///
/// The emitter only talks to bins 0 and `N - 1`. Photons elsewhere in the
/// loop are spectators during a step, so `H_eff` is block diagonal with one
/// block per spectator configuration: 8 states with no spectator, 6 with one,
/// 2 with two. All blocks of a kind share the same matrix, so the exact
/// exponential costs three small matrix exponentials up front and O(dim)
/// work per step.
#[derive(Debug, Clone)]
pub struct Propagator {
    integrator: Integrator,
    families: Vec<BlockFamily>,
    params: ModelParams,
    basis: Basis,
}

impl Propagator {
    pub fn new(params: &ModelParams, basis: &Basis, integrator: Integrator) -> Self {
        let families = match integrator {
            Integrator::ExactBlocks => build_families(params, basis),
            Integrator::Rk4 { .. } => Vec::new(),
        };
        Propagator {
            integrator,
            families,
            params: params.clone(),
            basis: basis.clone(),
        }
    }

    pub fn integrator(&self) -> Integrator {
        self.integrator
    }

    pub fn apply(&self, amps: &mut [C64]) {
        match self.integrator {
            Integrator::ExactBlocks => self.apply_blocks(amps),
            Integrator::Rk4 { substeps } => self.apply_rk4(amps, substeps.max(1)),
        }
    }

    fn apply_blocks(&self, amps: &mut [C64]) {
        let mut buf = [C64::new(0.0, 0.0); 8];
        for fam in &self.families {
            let k = fam.size;
            for idx in fam.members.chunks_exact(k) {
                for (b, &i) in buf.iter_mut().zip(idx) {
                    *b = amps[i];
                }
                for (r, &target) in idx.iter().enumerate() {
                    let row = &fam.matrix[r * k..(r + 1) * k];
                    amps[target] = row.iter().zip(&buf[..k]).map(|(u, x)| u * x).sum();
                }
            }
        }
    }

    fn apply_rk4(&self, amps: &mut [C64], substeps: usize) {
        let h = self.params.dt() / substeps as f64;
        let dim = amps.len();
        let zero = C64::new(0.0, 0.0);
        let (mut k1, mut k2, mut k3, mut k4) = (
            vec![zero; dim],
            vec![zero; dim],
            vec![zero; dim],
            vec![zero; dim],
        );
        let mut tmp = vec![zero; dim];
        let f = |x: &[C64], out: &mut [C64]| apply_into(&self.params, &self.basis, x, out);
        for _ in 0..substeps {
            f(amps, &mut k1);
            for ((t, a), k) in tmp.iter_mut().zip(amps.iter()).zip(&k1) {
                *t = a + k * (0.5 * h);
            }
            f(&tmp, &mut k2);
            for ((t, a), k) in tmp.iter_mut().zip(amps.iter()).zip(&k2) {
                *t = a + k * (0.5 * h);
            }
            f(&tmp, &mut k3);
            for ((t, a), k) in tmp.iter_mut().zip(amps.iter()).zip(&k3) {
                *t = a + k * h;
            }
            f(&tmp, &mut k4);
            for (j, a) in amps.iter_mut().enumerate() {
                *a += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (h / 6.0);
            }
        }
    }
}

/// Partition of the basis into spectator blocks, each listed as
/// (active occupancy, tls) in a fixed order.
fn blocks(basis: &Basis) -> BTreeMap<usize, Vec<Vec<usize>>> {
    let n = basis.n_bins();
    let last = n - 1;
    let mut by_size: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
    for sector in basis.sectors() {
        // enumerate each block once, from the sector holding only spectators
        let spectators_only = match *sector {
            Sector::Vacuum => true,
            Sector::One(j) => j != 0 && j != last,
            Sector::Two(j, k) => j != 0 && j != last && k != 0 && k != last,
        };
        if !spectators_only {
            continue;
        }
        let mut members = Vec::with_capacity(8);
        let actives: [&[usize]; 4] = [&[], &[0], &[last], &[0, last]];
        for active in actives {
            let mut s = Some(*sector);
            for &bin in active {
                s = s.and_then(|s| s.add(bin));
            }
            if let Some(s) = s {
                let idx = basis.sector_index(s).expect("valid sector");
                members.push(2 * idx);
                members.push(2 * idx + 1);
            }
        }
        by_size.entry(members.len()).or_default().push(members);
    }
    by_size
}

fn build_families(params: &ModelParams, basis: &Basis) -> Vec<BlockFamily> {
    let dt = params.dt();
    let dim = basis.dim();
    let zero = C64::new(0.0, 0.0);
    let mut families = Vec::new();
    for (size, list) in blocks(basis) {
        // probe the Hamiltonian on one representative block
        let rep = &list[0];
        let mut h = DMatrix::<C64>::zeros(size, size);
        let mut unit = vec![zero; dim];
        let mut out = vec![zero; dim];
        for (c, &col) in rep.iter().enumerate() {
            unit[col] = C64::new(1.0, 0.0);
            apply_into(params, basis, &unit, &mut out);
            unit[col] = zero;
            for (r, &row) in rep.iter().enumerate() {
                h[(r, c)] = out[row];
            }
        }
        // h holds -i H_eff; the step propagator is exp(-i H_eff dt)
        let u = (h * C64::new(dt, 0.0)).exp();
        let mut matrix = Vec::with_capacity(size * size);
        for r in 0..size {
            for c in 0..size {
                matrix.push(u[(r, c)]);
            }
        }
        families.push(BlockFamily {
            size,
            matrix,
            members: list.into_iter().flatten().collect(),
        });
    }
    families
}
