use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{FockSpace, LinearOp};
use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-9;

/// Pure state on a [`FockSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    space: FockSpace,
    amps: DVector<Complex64>,
}

impl Ket {
    /// Wraps amplitudes, requiring unit norm to 1e-9.
    pub fn new(space: &FockSpace, amps: DVector<Complex64>) -> Result<Self> {
        let ket = Self::from_raw(space, amps)?;
        let norm = ket.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::arg(format!("state norm {norm} differs from 1")));
        }
        Ok(ket)
    }

    /// Wraps amplitudes without a norm check (truncated states, intermediate results).
    pub fn from_raw(space: &FockSpace, amps: DVector<Complex64>) -> Result<Self> {
        if amps.len() != space.total_dim() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for dimension {}",
                amps.len(),
                space.total_dim()
            )));
        }
        Ok(Self {
            space: space.clone(),
            amps,
        })
    }

    pub fn basis(space: &FockSpace, occupations: &[usize]) -> Result<Self> {
        let idx = space.index_of(occupations)?;
        let mut amps = DVector::zeros(space.total_dim());
        amps[idx] = Complex64::new(1.0, 0.0);
        Ok(Self {
            space: space.clone(),
            amps,
        })
    }

    pub fn vacuum(space: &FockSpace) -> Self {
        Self::basis(space, &vec![0; space.n_modes()]).expect("vacuum always fits")
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amps
    }

    pub fn amplitude(&self, occupations: &[usize]) -> Result<Complex64> {
        Ok(self.amps[self.space.index_of(occupations)?])
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn inner(&self, other: &Ket) -> Result<Complex64> {
        same_space(&self.space, &other.space)?;
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn fidelity(&self, other: &Ket) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Probability of the basis state with the given occupations.
    pub fn probability(&self, occupations: &[usize]) -> Result<f64> {
        Ok(self.amplitude(occupations)?.norm_sqr())
    }

    /// Largest total excitation carried with nonzero weight.
    pub fn max_excitation(&self) -> usize {
        (0..self.amps.len())
            .filter(|&i| self.amps[i] != Complex64::new(0.0, 0.0))
            .map(|i| self.space.total_excitation(i))
            .max()
            .unwrap_or(0)
    }
}

/// Mixed state on a [`FockSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOp {
    space: FockSpace,
    matrix: DMatrix<Complex64>,
}

impl DensityOp {
    /// Validates Hermiticity (1e-10), unit trace (1e-8) and positivity (-1e-8).
    pub fn new(space: &FockSpace, matrix: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self::from_raw(space, matrix)?;
        let herm = (&rho.matrix - rho.matrix.adjoint()).map(|z| z.norm()).max();
        if herm > 1e-10 {
            return Err(Error::arg(format!(
                "density matrix not Hermitian ({herm:e})"
            )));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::arg(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let min = rho.min_eigenvalue();
        if min < -1e-8 {
            return Err(Error::arg(format!(
                "density matrix eigenvalue {min} is negative"
            )));
        }
        Ok(rho)
    }

    pub fn from_raw(space: &FockSpace, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = space.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Dimension(format!(
                "{}x{} density matrix for dimension {n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            space: space.clone(),
            matrix,
        })
    }

    pub fn from_ket(ket: &Ket) -> Self {
        Self {
            space: ket.space.clone(),
            matrix: &ket.amps * ket.amps.adjoint(),
        }
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().min()
    }

    pub fn probability(&self, occupations: &[usize]) -> Result<f64> {
        let i = self.space.index_of(occupations)?;
        Ok(self.matrix[(i, i)].re)
    }
}

fn same_space(a: &FockSpace, b: &FockSpace) -> Result<()> {
    if a != b {
        return Err(Error::arg(format!(
            "state spaces differ: {:?} vs {:?}",
            a.mode_dims(),
            b.mode_dims()
        )));
    }
    Ok(())
}

/// States that can evaluate operator expectation values.
pub trait Expect {
    fn space(&self) -> &FockSpace;
    fn expect(&self, op: &LinearOp) -> Result<Complex64>;
    /// Diagonal weight `<occ|rho|occ>` of one basis state.
    fn basis_weight(&self, index: usize) -> f64;
}

impl Expect for Ket {
    fn space(&self) -> &FockSpace {
        &self.space
    }

    fn expect(&self, op: &LinearOp) -> Result<Complex64> {
        same_space(&self.space, op.space())?;
        let mut y = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        op.apply_slice(self.amps.as_slice(), &mut y);
        Ok(self.amps.iter().zip(&y).map(|(a, b)| a.conj() * b).sum())
    }

    fn basis_weight(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }
}

impl Expect for DensityOp {
    fn space(&self) -> &FockSpace {
        &self.space
    }

    fn expect(&self, op: &LinearOp) -> Result<Complex64> {
        same_space(&self.space, op.space())?;
        Ok(op.entries().map(|(r, c, v)| v * self.matrix[(c, r)]).sum())
    }

    fn basis_weight(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }
}

/// `<psi|O|psi>` or `Tr(rho O)`; imaginary part is dropped to 1e-10 for flagged Hermitian operators.
pub fn expectation<S: Expect + ?Sized>(state: &S, op: &LinearOp) -> Result<Complex64> {
    let v = state.expect(op)?;
    if op.is_flagged_hermitian() && v.im.abs() <= 1e-10 * v.re.abs().max(1.0) {
        Ok(Complex64::new(v.re, 0.0))
    } else {
        Ok(v)
    }
}

/// Amplitude of `|n_j, n_k>` on the mode pair with every other mode in vacuum.
pub fn project_pair(
    state: &Ket,
    modes: (usize, usize),
    occupations: (usize, usize),
) -> Result<Complex64> {
    let space = state.space();
    space.check_mode(modes.0)?;
    space.check_mode(modes.1)?;
    if modes.0 == modes.1 {
        return Err(Error::arg("pair modes must differ"));
    }
    let mut occ = vec![0; space.n_modes()];
    occ[modes.0] = occupations.0;
    occ[modes.1] = occupations.1;
    state.amplitude(&occ)
}
