use crate::model::{Basis, FeedbackMode, ModelParams, Sector, StateVector};
use crate::C64;

/// Bin couplings `lambda_{N-1}` (into the loop) and `lambda_0` (output side).
pub(crate) fn couplings(params: &ModelParams) -> (f64, C64) {
    let dt = params.dt();
    let loop_side = match params.feedback {
        FeedbackMode::Loop => (params.gamma_l / dt).sqrt(),
        FeedbackMode::None => 0.0,
    };
    let output_side = C64::from_polar((params.gamma_r / dt).sqrt(), params.phi());
    (loop_side, output_side)
}

/// Writes `-i H_eff psi` into `out`.
///
/// `H_eff = delta s+s- + (Omega/2)(s+ + s-)
///        + [lambda_{N-1} s+ B_{N-1} + lambda_0 s+ B_0 + h.c.]
///        - (i/2) Gamma s+s-`
/// where `Gamma` collects the jump channels. Terms that would put a third
/// photon in the loop or a second photon in a bin have no target in the
/// truncated basis and are dropped together with their conjugates.
pub(crate) fn apply_into(params: &ModelParams, basis: &Basis, psi: &[C64], out: &mut [C64]) {
    let i = C64::new(0.0, 1.0);
    let n = basis.n_bins();
    let (lambda_loop, lambda_out) = couplings(params);
    let diag_e = C64::new(params.delta, -0.5 * params.markovian_decay());
    let half_omega = 0.5 * params.omega;

    for (s, chunk) in out.chunks_exact_mut(2).enumerate() {
        let g = psi[2 * s];
        let e = psi[2 * s + 1];
        chunk[0] = -i * (half_omega * e);
        chunk[1] = -i * (half_omega * g + diag_e * e);
    }

    let mut couple = |bin: usize, lambda: C64| {
        if lambda == C64::new(0.0, 0.0) {
            return;
        }
        for (s, sector) in basis.sectors().iter().enumerate() {
            if let Some(rest) = sector.remove(bin) {
                let r = sector_index(basis, rest);
                // s+ B_bin : |g, s> -> |e, rest>
                out[2 * r + 1] += -i * lambda * psi[2 * s];
                // s- B_bin^dag : |e, rest> -> |g, s>
                out[2 * s] += -i * lambda.conj() * psi[2 * r + 1];
            }
        }
    };
    couple(n - 1, C64::new(lambda_loop, 0.0));
    couple(0, lambda_out);
}

fn sector_index(basis: &Basis, s: Sector) -> usize {
    basis
        .sector_index(s)
        .expect("sector derived from a valid sector")
}

/// `-i H_eff |psi>` for the full truncated space.
pub fn apply_effective_hamiltonian(
    params: &ModelParams,
    basis: &Basis,
    state: &StateVector,
) -> StateVector {
    let mut out = StateVector::zeros(basis);
    apply_into(params, basis, state.amplitudes(), out.amplitudes_mut());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Tls;
    use std::f64::consts::PI;

    #[test]
    fn undriven_lossless_is_zero() {
        let p = ModelParams::symmetric(0.0, 0.1, 4);
        let b = Basis::new(4).unwrap();
        let mut psi = StateVector::zeros(&b);
        for (k, a) in psi.amplitudes_mut().iter_mut().enumerate() {
            *a = C64::new(k as f64, -(k as f64) / 3.0);
        }
        let d = apply_effective_hamiltonian(&p, &b, &psi);
        assert!(d.amplitudes().iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn drive_only_reaches_excited_vacuum() {
        let p = ModelParams::symmetric(1.0, 0.1, 4).with_omega(0.4 * PI);
        let b = Basis::new(4).unwrap();
        let psi = StateVector::ground(&b);
        let d = apply_effective_hamiltonian(&p, &b, &psi);
        let target = b.index_of(Tls::Excited, Sector::Vacuum).unwrap();
        for (k, a) in d.amplitudes().iter().enumerate() {
            if k == target {
                assert!((a - C64::new(0.0, -0.2 * PI)).norm() < 1e-15);
            } else {
                assert_eq!(*a, C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn excited_vacuum_emits_into_both_coupled_bins() {
        let p = ModelParams::symmetric(1.0, 0.1, 5).with_phi(0.3);
        let b = Basis::new(5).unwrap();
        let psi = StateVector::basis_state(&b, Tls::Excited, Sector::Vacuum).unwrap();
        let d = apply_effective_hamiltonian(&p, &b, &psi);
        let dt = p.dt();
        let into_loop = d.amplitude(&b, Tls::Ground, Sector::One(4)).unwrap();
        let into_out = d.amplitude(&b, Tls::Ground, Sector::One(0)).unwrap();
        assert!((into_loop - C64::new(0.0, -(0.5 / dt).sqrt())).norm() < 1e-12);
        let expected = -C64::new(0.0, 1.0) * C64::from_polar((0.5 / dt).sqrt(), -0.3);
        assert!((into_out - expected).norm() < 1e-12);
        assert!(d.amplitude(&b, Tls::Ground, Sector::One(2)).unwrap().norm() == 0.0);
    }

    #[test]
    fn no_third_photon() {
        let p = ModelParams::symmetric(1.0, 0.1, 5);
        let b = Basis::new(5).unwrap();
        let psi = StateVector::basis_state(&b, Tls::Excited, Sector::Two(1, 2)).unwrap();
        let d = apply_effective_hamiltonian(&p, &b, &psi);
        // only the excited diagonal survives, and here it is zero
        assert!(d.amplitudes().iter().all(|a| a.norm() == 0.0));
    }
}
