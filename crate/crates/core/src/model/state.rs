use crate::model::{Basis, Sector, Tls};
use crate::{Error, Result, C64};

/// Dense amplitudes over the truncated emitter ⊗ loop basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zeros(basis: &Basis) -> Self {
        StateVector {
            amps: vec![C64::new(0.0, 0.0); basis.dim()],
        }
    }

    /// Emitter in the ground state, empty loop.
    pub fn ground(basis: &Basis) -> Self {
        let mut s = Self::zeros(basis);
        s.amps[0] = C64::new(1.0, 0.0);
        s
    }

    pub fn basis_state(basis: &Basis, tls: Tls, sector: Sector) -> Result<Self> {
        let mut s = Self::zeros(basis);
        s.amps[basis.index_of(tls, sector)?] = C64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(basis: &Basis, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: amps.len(),
            });
        }
        Ok(StateVector { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn amplitude(&self, basis: &Basis, tls: Tls, sector: Sector) -> Result<C64> {
        Ok(self.amps[basis.index_of(tls, sector)?])
    }

    pub fn set_amplitude(
        &mut self,
        basis: &Basis,
        tls: Tls,
        sector: Sector,
        value: C64,
    ) -> Result<()> {
        let i = basis.index_of(tls, sector)?;
        self.amps[i] = value;
        Ok(())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.amps
            .iter()
            .all(|a| a.re.is_finite() && a.im.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.amps {
            *a *= factor;
        }
    }

    /// Rescales to unit norm and returns the norm it had before.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if !n.is_finite() {
            return Err(Error::NonFinite("normalize"));
        }
        if n == 0.0 {
            return Err(Error::ZeroNorm("normalize"));
        }
        self.scale(1.0 / n);
        Ok(n)
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ground_is_unit_vector_at_origin() {
        let b = Basis::new(4).unwrap();
        let s = StateVector::ground(&b);
        assert_eq!(s.dim(), 22);
        assert_eq!(s.amplitudes()[0], C64::new(1.0, 0.0));
        assert_eq!(s.norm(), 1.0);
    }

    #[test]
    fn normalize_unit_vector_unchanged() {
        let b = Basis::new(3).unwrap();
        let mut s = StateVector::basis_state(&b, Tls::Excited, Sector::Two(0, 2)).unwrap();
        let before = s.clone();
        assert_eq!(s.normalize().unwrap(), 1.0);
        assert_eq!(s, before);
    }

    #[test]
    fn normalize_half_scaled() {
        let b = Basis::new(3).unwrap();
        let mut s = StateVector::basis_state(&b, Tls::Ground, Sector::One(1)).unwrap();
        s.amplitudes_mut()[0] = C64::new(0.0, 1.0);
        let direction = s.clone().normalized().unwrap();
        s.scale(0.5);
        let n = s.normalize().unwrap();
        assert!((n - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        for (a, b) in s.amplitudes().iter().zip(direction.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_norm_rejected() {
        let b = Basis::new(3).unwrap();
        let mut s = StateVector::zeros(&b);
        assert_eq!(s.normalize(), Err(Error::ZeroNorm("normalize")));
    }

    #[test]
    fn wrong_length_rejected() {
        let b = Basis::new(3).unwrap();
        assert!(StateVector::from_amplitudes(&b, vec![C64::new(1.0, 0.0); 3]).is_err());
    }

    proptest! {
        #[test]
        fn normalize_unit_and_idempotent(
            parts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 22)
        ) {
            let b = Basis::new(4).unwrap();
            let amps: Vec<C64> = parts.iter().map(|&(r, i)| C64::new(r, i)).collect();
            prop_assume!(amps.iter().any(|a| a.norm() > 1e-3));
            let mut s = StateVector::from_amplitudes(&b, amps).unwrap();
            s.normalize().unwrap();
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
            let once = s.clone();
            s.normalize().unwrap();
            for (a, c) in s.amplitudes().iter().zip(once.amplitudes()) {
                prop_assert!((a - c).norm() < 1e-15);
            }
        }
    }
}
