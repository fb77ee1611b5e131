use crate::basis::SpinBasis;
use crate::linalg::cdot;
use crate::{CVector, Error, Result, C64};

/// A pure state expressed in a [`SpinBasis`].
#[derive(Clone, Debug)]
pub struct StateVector {
    basis: SpinBasis,
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(basis: SpinBasis, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != basis.dimension() {
            return Err(Error::DimensionMismatch { expected: basis.dimension(), actual: amplitudes.len() });
        }
        Ok(StateVector { basis, amplitudes })
    }

    /// Normalizes the amplitudes before wrapping them.
    pub fn normalized(basis: SpinBasis, mut amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if n == 0.0 {
            return Err(Error::Numerical("cannot normalize the zero vector".into()));
        }
        amplitudes /= C64::new(n, 0.0);
        Self::new(basis, amplitudes)
    }

    pub fn basis(&self) -> &SpinBasis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &StateVector) -> Result<C64> {
        self.basis.ensure_same(&other.basis)?;
        Ok(cdot(&self.amplitudes, &other.amplitudes))
    }

    pub(crate) fn ensure_normalized(&self, tol: f64) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() > tol {
            Err(Error::UnnormalizedWeight { norm })
        } else {
            Ok(())
        }
    }
}
