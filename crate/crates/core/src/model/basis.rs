use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Emitter level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tls {
    Ground,
    Excited,
}

impl Tls {
    fn offset(self) -> usize {
        match self {
            Tls::Ground => 0,
            Tls::Excited => 1,
        }
    }
}

/// Photon configuration of the loop: no photon, one photon in bin `j`, or two
/// photons in distinct bins `j < k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    Vacuum,
    One(usize),
    Two(usize, usize),
}

impl Sector {
    pub fn photons(self) -> usize {
        match self {
            Sector::Vacuum => 0,
            Sector::One(_) => 1,
            Sector::Two(..) => 2,
        }
    }

    pub fn contains(self, bin: usize) -> bool {
        match self {
            Sector::Vacuum => false,
            Sector::One(j) => j == bin,
            Sector::Two(j, k) => j == bin || k == bin,
        }
    }

    /// The configuration with the photon in `bin` removed.
    pub fn remove(self, bin: usize) -> Option<Sector> {
        match self {
            Sector::One(j) if j == bin => Some(Sector::Vacuum),
            Sector::Two(j, k) if j == bin => Some(Sector::One(k)),
            Sector::Two(j, k) if k == bin => Some(Sector::One(j)),
            _ => None,
        }
    }

    /// The configuration with a photon added to the empty `bin`; `None` when
    /// the bin is occupied or the loop already holds two photons.
    pub fn add(self, bin: usize) -> Option<Sector> {
        match self {
            Sector::Vacuum => Some(Sector::One(bin)),
            Sector::One(j) if j < bin => Some(Sector::Two(j, bin)),
            Sector::One(j) if j > bin => Some(Sector::Two(bin, j)),
            _ => None,
        }
    }
}

/// Flat indexing of the truncated emitter ⊗ loop space.
///
/// Layout is sector-major: index `2 * s + tls`, with sectors ordered vacuum,
/// `One(0..N)`, then the two-photon block in lexicographic `(j, k)` order.
/// Lookup tables for the operations that touch the output bin are built once.
#[derive(Debug, Clone)]
pub struct Basis {
    n_bins: usize,
    sectors: Vec<Sector>,
    /// Sectors with a photon in bin 0.
    bin0_occupied: Vec<usize>,
    /// For each entry of `bin0_occupied`, the sector with that photon removed.
    bin0_removed: Vec<usize>,
    /// `shift_source[t]` is the sector that moves into sector `t` when every
    /// photon advances one bin; `None` for sectors occupying bin `N - 1`.
    shift_source: Vec<Option<usize>>,
}

impl Basis {
    pub fn new(n_bins: usize) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::InvalidParams(format!(
                "n_bins = {n_bins} must be >= 2"
            )));
        }
        let mut sectors = Vec::with_capacity(1 + n_bins + n_bins * (n_bins - 1) / 2);
        sectors.push(Sector::Vacuum);
        sectors.extend((0..n_bins).map(Sector::One));
        for j in 0..n_bins {
            for k in j + 1..n_bins {
                sectors.push(Sector::Two(j, k));
            }
        }
        let mut basis = Basis {
            n_bins,
            sectors,
            bin0_occupied: Vec::new(),
            bin0_removed: Vec::new(),
            shift_source: Vec::new(),
        };
        for (s, sector) in basis.sectors.iter().enumerate() {
            if let Some(rest) = sector.remove(0) {
                basis.bin0_occupied.push(s);
                basis.bin0_removed.push(basis.sector_index_unchecked(rest));
            }
        }
        basis.shift_source = basis
            .sectors
            .iter()
            .map(|&sector| {
                let up = match sector {
                    Sector::Vacuum => Some(Sector::Vacuum),
                    Sector::One(j) if j + 1 < n_bins => Some(Sector::One(j + 1)),
                    Sector::Two(j, k) if k + 1 < n_bins => Some(Sector::Two(j + 1, k + 1)),
                    _ => None,
                };
                up.map(|s| basis.sector_index_unchecked(s))
            })
            .collect();
        Ok(basis)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_sectors(&self) -> usize {
        self.sectors.len()
    }

    /// `2 (1 + N + N(N-1)/2)`.
    pub fn dim(&self) -> usize {
        2 * self.sectors.len()
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    fn pair_offset(&self, j: usize) -> usize {
        // number of pairs (j', k) with j' < j
        j * self.n_bins - j * (j + 1) / 2
    }

    fn sector_index_unchecked(&self, sector: Sector) -> usize {
        let n = self.n_bins;
        match sector {
            Sector::Vacuum => 0,
            Sector::One(j) => 1 + j,
            Sector::Two(j, k) => 1 + n + self.pair_offset(j) + (k - j - 1),
        }
    }

    pub fn sector_index(&self, sector: Sector) -> Result<usize> {
        let n = self.n_bins;
        match sector {
            Sector::Vacuum => {}
            Sector::One(j) if j >= n => {
                return Err(Error::BinOutOfRange {
                    index: j,
                    n_bins: n,
                })
            }
            Sector::One(_) => {}
            Sector::Two(j, k) => {
                if j >= k {
                    return Err(Error::UnorderedPair(j, k));
                }
                if k >= n {
                    return Err(Error::BinOutOfRange {
                        index: k,
                        n_bins: n,
                    });
                }
            }
        }
        Ok(self.sector_index_unchecked(sector))
    }

    pub fn index_of(&self, tls: Tls, sector: Sector) -> Result<usize> {
        Ok(2 * self.sector_index(sector)? + tls.offset())
    }

    /// Inverse of [`Basis::index_of`].
    pub fn state_at(&self, index: usize) -> Option<(Tls, Sector)> {
        let sector = *self.sectors.get(index / 2)?;
        let tls = if index % 2 == 0 {
            Tls::Ground
        } else {
            Tls::Excited
        };
        Some((tls, sector))
    }

    pub(crate) fn bin0_occupied(&self) -> &[usize] {
        &self.bin0_occupied
    }

    pub(crate) fn bin0_removed(&self) -> &[usize] {
        &self.bin0_removed
    }

    pub(crate) fn shift_source(&self) -> &[Option<usize>] {
        &self.shift_source
    }
}
