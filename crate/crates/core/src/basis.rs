//! Hilbert-space bases: full spin chains, spin-flip/translation symmetry
//! sectors, and the Dicke (collective spin) basis.
//!
//! Computational basis convention: site `i` of an `n`-site chain is bit
//! `n - 1 - i` of the state index, and bit value 0 is spin up (`σ^z = +1`).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Largest chain length for which sector tables (of size `2^n`) are built.
pub const MAX_SECTOR_SITES: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisMode {
    FullChain {
        n: usize,
        periodic: bool,
    },
    /// Translation-momentum sector of a periodic chain, optionally also
    /// resolved by spin-flip parity `Π_j σ^x_j`.
    SymmetricSector {
        n: usize,
        parity: Option<Parity>,
        momentum: i64,
    },
    Dicke {
        n: usize,
    },
}

/// Orbit data for one symmetry sector.
///
/// Every computational state belongs to exactly one orbit; `orbit_of[s]` is
/// the index of the sector vector built from that orbit (or `None` when the
/// projection onto the sector vanishes) and `coeff[s] = <s|a>`.
#[derive(Debug)]
pub struct SectorTable {
    n: usize,
    orbit_of: Vec<Option<u32>>,
    coeff: Vec<C64>,
    members: Vec<Vec<usize>>,
}

impl SectorTable {
    fn build(n: usize, parity: Option<Parity>, momentum: i64) -> Self {
        let size = 1usize << n;
        let mut orbit_of = vec![None; size];
        let mut coeff = vec![C64::new(0.0, 0.0); size];
        let mut visited = vec![false; size];
        let mut members = Vec::new();
        let kappa = 2.0 * PI * momentum as f64 / n as f64;
        let flips: &[u32] = if parity.is_some() { &[0, 1] } else { &[0] };
        let p = parity.map_or(1.0, Parity::sign);

        for seed in 0..size {
            if visited[seed] {
                continue;
            }
            // |a> ∝ Σ_{j,q} e^{-iκj} p^q T^j P^q |seed>
            let mut amps: Vec<(usize, C64)> = Vec::new();
            for &q in flips {
                let base = if q == 1 { flip_all(seed, n) } else { seed };
                let mut s = base;
                for j in 0..n {
                    let w = C64::from_polar(1.0, -kappa * j as f64) * p.powi(q as i32);
                    match amps.iter_mut().find(|(t, _)| *t == s) {
                        Some(entry) => entry.1 += w,
                        None => amps.push((s, w)),
                    }
                    s = translate(s, n);
                }
            }
            for &(s, _) in &amps {
                visited[s] = true;
            }
            let norm2: f64 = amps.iter().map(|(_, a)| a.norm_sqr()).sum();
            if norm2 < 1e-20 {
                continue;
            }
            let inv = 1.0 / norm2.sqrt();
            let index = members.len() as u32;
            let mut list = Vec::with_capacity(amps.len());
            for (s, a) in amps {
                if a.norm_sqr() * inv * inv < 1e-28 {
                    continue;
                }
                orbit_of[s] = Some(index);
                coeff[s] = a * inv;
                list.push(s);
            }
            members.push(list);
        }
        SectorTable { n, orbit_of, coeff, members }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.members.len()
    }

    /// Sector index and amplitude `<s|a>` of computational state `s`.
    pub fn locate(&self, s: usize) -> Option<(usize, C64)> {
        self.orbit_of[s].map(|a| (a as usize, self.coeff[s]))
    }

    /// Computational states with nonzero amplitude in sector vector `a`.
    pub fn members(&self, a: usize) -> &[usize] {
        &self.members[a]
    }

    pub fn amplitude(&self, s: usize) -> C64 {
        self.coeff[s]
    }
}

/// Rotate site contents `i -> i + 1 (mod n)`.
pub fn translate(s: usize, n: usize) -> usize {
    (s >> 1) | ((s & 1) << (n - 1))
}

/// Global spin flip `Π σ^x`.
pub fn flip_all(s: usize, n: usize) -> usize {
    s ^ ((1usize << n) - 1)
}

#[derive(Clone)]
pub struct SpinBasis {
    mode: BasisMode,
    sector: Option<Arc<SectorTable>>,
}

impl PartialEq for SpinBasis {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode
    }
}

impl fmt::Debug for SpinBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}[dim {}]", self.mode, self.dimension())
    }
}

impl fmt::Display for SpinBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl SpinBasis {
    pub fn full_chain(n: usize, periodic: bool) -> Result<Self> {
        if n == 0 || n > MAX_SECTOR_SITES {
            return Err(Error::InvalidBasis(format!("chain length {n} not in 1..={MAX_SECTOR_SITES}")));
        }
        Ok(SpinBasis { mode: BasisMode::FullChain { n, periodic }, sector: None })
    }

    pub fn sector(n: usize, parity: Option<Parity>, momentum: i64) -> Result<Self> {
        if n == 0 || n > MAX_SECTOR_SITES {
            return Err(Error::InvalidBasis(format!("chain length {n} not in 1..={MAX_SECTOR_SITES}")));
        }
        let table = SectorTable::build(n, parity, momentum);
        if table.dim() == 0 {
            return Err(Error::InvalidBasis(format!(
                "empty sector: n = {n}, parity = {parity:?}, momentum = {momentum}"
            )));
        }
        Ok(SpinBasis { mode: BasisMode::SymmetricSector { n, parity, momentum }, sector: Some(Arc::new(table)) })
    }

    pub fn dicke(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidBasis("Dicke basis needs n >= 1".into()));
        }
        Ok(SpinBasis { mode: BasisMode::Dicke { n }, sector: None })
    }

    pub fn from_mode(mode: &BasisMode) -> Result<Self> {
        match *mode {
            BasisMode::FullChain { n, periodic } => Self::full_chain(n, periodic),
            BasisMode::SymmetricSector { n, parity, momentum } => Self::sector(n, parity, momentum),
            BasisMode::Dicke { n } => Self::dicke(n),
        }
    }

    pub fn mode(&self) -> &BasisMode {
        &self.mode
    }

    pub fn sites(&self) -> usize {
        match self.mode {
            BasisMode::FullChain { n, .. } | BasisMode::SymmetricSector { n, .. } | BasisMode::Dicke { n } => n,
        }
    }

    pub fn dimension(&self) -> usize {
        match (&self.mode, &self.sector) {
            (BasisMode::FullChain { n, .. }, _) => 1 << n,
            (BasisMode::SymmetricSector { .. }, Some(t)) => t.dim(),
            (BasisMode::Dicke { n }, _) => n + 1,
            (BasisMode::SymmetricSector { .. }, None) => unreachable!("sector basis without table"),
        }
    }

    pub fn sector_table(&self) -> Option<&SectorTable> {
        self.sector.as_deref()
    }

    pub fn is_dicke(&self) -> bool {
        matches!(self.mode, BasisMode::Dicke { .. })
    }

    /// Total spin `S = n / 2` (meaningful for the Dicke basis).
    pub fn total_spin(&self) -> f64 {
        self.sites() as f64 / 2.0
    }

    /// Spin-flip partner of each basis index when the flip acts as a
    /// permutation (full chains and Dicke states); `None` otherwise.
    pub fn flip_permutation(&self) -> Option<Vec<usize>> {
        match self.mode {
            BasisMode::FullChain { n, .. } => Some((0..1usize << n).map(|s| flip_all(s, n)).collect()),
            BasisMode::Dicke { n } => Some((0..=n).map(|i| n - i).collect()),
            BasisMode::SymmetricSector { .. } => None,
        }
    }

    /// Whether the flip parity is already fixed by the basis.
    pub fn parity(&self) -> Option<Parity> {
        match self.mode {
            BasisMode::SymmetricSector { parity, .. } => parity,
            _ => None,
        }
    }

    pub(crate) fn ensure_same(&self, other: &SpinBasis) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::BasisMismatch { left: format!("{self}"), right: format!("{other}") })
        }
    }
}
