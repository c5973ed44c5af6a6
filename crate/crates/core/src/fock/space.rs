use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layout of a truncated multimode bosonic Hilbert space.
///
/// Basis states are ordered row-major over modes with mode 0 varying slowest,
/// so `|n0, n1, n2>` sits at `n0 * d1 * d2 + n1 * d2 + n2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FockSpace {
    dims: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl FockSpace {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::arg("a Fock space needs at least one mode"));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::arg(format!("mode dimension {d} is below 2")));
        }
        let mut strides = vec![1usize; dims.len()];
        for k in (0..dims.len() - 1).rev() {
            strides[k] = strides[k + 1]
                .checked_mul(dims[k + 1])
                .ok_or_else(|| Error::arg("total dimension overflows"))?;
        }
        let total = strides[0]
            .checked_mul(dims[0])
            .ok_or_else(|| Error::arg("total dimension overflows"))?;
        Ok(Self {
            dims,
            strides,
            total,
        })
    }

    pub fn uniform(modes: usize, dim: usize) -> Result<Self> {
        Self::new(vec![dim; modes])
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.strides[mode]
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.dims.len() {
            Ok(())
        } else {
            Err(Error::arg(format!(
                "mode {mode} out of range for a {}-mode space",
                self.dims.len()
            )))
        }
    }

    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.dims.len() {
            return Err(Error::Dimension(format!(
                "{} occupations given for a {}-mode space",
                occupations.len(),
                self.dims.len()
            )));
        }
        let mut idx = 0;
        for (k, (&n, &d)) in occupations.iter().zip(&self.dims).enumerate() {
            if n >= d {
                return Err(Error::arg(format!(
                    "occupation {n} of mode {k} exceeds truncation {d}"
                )));
            }
            idx += n * self.strides[k];
        }
        Ok(idx)
    }

    /// Occupation of one mode in basis state `index`.
    #[inline]
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % self.dims[mode]
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        (0..self.dims.len())
            .map(|k| self.occupation(index, k))
            .collect()
    }

    pub fn total_excitation(&self, index: usize) -> usize {
        (0..self.dims.len())
            .map(|k| self.occupation(index, k))
            .sum()
    }

    /// Largest total excitation that fits in every mode without truncation.
    pub fn faithful_excitation(&self) -> usize {
        self.dims.iter().min().copied().unwrap_or(1) - 1
    }
}

impl TryFrom<Vec<usize>> for FockSpace {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<FockSpace> for Vec<usize> {
    fn from(space: FockSpace) -> Self {
        space.dims
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_mode_zero_slowest() {
        let s = FockSpace::new([2, 3, 4]).unwrap();
        assert_eq!(s.total_dim(), 24);
        assert_eq!(s.index_of(&[1, 0, 0]).unwrap(), 12);
        assert_eq!(s.index_of(&[0, 1, 0]).unwrap(), 4);
        assert_eq!(s.index_of(&[0, 0, 1]).unwrap(), 1);
        assert_eq!(s.occupations(23), vec![1, 2, 3]);
    }

    #[test]
    fn bijection_round_trips() {
        let s = FockSpace::new([3, 2, 5]).unwrap();
        for i in 0..s.total_dim() {
            assert_eq!(s.index_of(&s.occupations(i)).unwrap(), i);
        }
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(FockSpace::new([2, 1]).is_err());
        assert!(FockSpace::new(Vec::<usize>::new()).is_err());
        let s = FockSpace::uniform(3, 3).unwrap();
        assert!(s.index_of(&[3, 0, 0]).is_err());
        assert!(s.index_of(&[0, 0]).is_err());
        assert!(s.check_mode(3).is_err());
    }
}
