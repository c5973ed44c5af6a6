use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::FockSpace;
use crate::error::{Error, Result};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const HERMITIAN_TOL: f64 = 1e-10;

/// Complex operator on a [`FockSpace`], stored as compressed sparse rows.
///
/// Ladder operators and the Hamiltonians built from them have a handful of
/// entries per row, so CSR keeps products and matrix-vector applications cheap.
/// `to_dense` gives the reference representation.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOp {
    space: FockSpace,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
    hermitian: bool,
}

impl LinearOp {
    /// Builds from (row, col, value) triplets; duplicates are summed, exact zeros dropped.
    pub fn from_triplets(
        space: &FockSpace,
        triplets: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Result<Self> {
        let n = space.total_dim();
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::Dimension(format!(
                    "entry ({r}, {c}) outside a {n}-dimensional space"
                )));
            }
            rows[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != C0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            space: space.clone(),
            indptr,
            indices,
            values,
            hermitian: false,
        })
    }

    pub fn zeros(space: &FockSpace) -> Self {
        Self {
            space: space.clone(),
            indptr: vec![0; space.total_dim() + 1],
            indices: Vec::new(),
            values: Vec::new(),
            hermitian: true,
        }
    }

    pub fn identity(space: &FockSpace) -> Self {
        Self::diagonal(space, &vec![1.0; space.total_dim()]).expect("length matches")
    }

    /// Real diagonal operator; flagged Hermitian.
    pub fn diagonal(space: &FockSpace, diag: &[f64]) -> Result<Self> {
        if diag.len() != space.total_dim() {
            return Err(Error::Dimension(format!(
                "diagonal of length {} for dimension {}",
                diag.len(),
                space.total_dim()
            )));
        }
        let mut op = Self::from_triplets(
            space,
            diag.iter()
                .enumerate()
                .map(|(i, &d)| (i, i, Complex64::new(d, 0.0))),
        )?;
        op.hermitian = true;
        Ok(op)
    }

    pub fn from_dense(space: &FockSpace, m: &DMatrix<Complex64>) -> Result<Self> {
        let n = space.total_dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for dimension {n}",
                m.nrows(),
                m.ncols()
            )));
        }
        Self::from_triplets(
            space,
            (0..n).flat_map(|r| (0..n).map(move |c| (r, c, m[(r, c)]))),
        )
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_flagged_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Sets the Hermitian flag after verifying the property to 1e-10.
    pub fn into_hermitian(mut self) -> Result<Self> {
        if !self.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::arg("operator is not Hermitian to 1e-10"));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => C0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut op = Self::from_triplets(
            &self.space,
            self.entries().map(|(r, c, v)| (c, r, v.conj())),
        )
        .expect("same space");
        op.hermitian = self.hermitian;
        op
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest absolute row sum, an upper bound on the spectral norm for Hermitian operators.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        self.entries()
            .all(|(r, c, v)| (v - self.get(c, r).conj()).norm() <= tol * scale)
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries().all(|(r, c, _)| r == c)
    }

    pub fn diagonal_values(&self) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// True when every nonzero entry connects basis states of equal total excitation.
    pub fn conserves_excitation(&self) -> bool {
        self.entries()
            .all(|(r, c, _)| self.space.total_excitation(r) == self.space.total_excitation(c))
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::arg(format!(
                "operator spaces differ: {:?} vs {:?}",
                self.space.mode_dims(),
                other.space.mode_dims()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        let mut op = Self::from_triplets(&self.space, self.entries().chain(other.entries()))?;
        op.hermitian = self.hermitian && other.hermitian;
        Ok(op)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut op =
            Self::from_triplets(&self.space, self.entries().map(|(r, c, v)| (r, c, v * s)))
                .expect("same space");
        op.hermitian = self.hermitian && s.im == 0.0;
        op
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Operator product `self * other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        let n = self.dim();
        let mut acc = vec![C0; n];
        let mut marker = vec![usize::MAX; n];
        let mut touched = Vec::new();
        let mut triplets = Vec::new();
        for r in 0..n {
            touched.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if marker[c] != r {
                        marker[c] = r;
                        acc[c] = C0;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                triplets.push((r, c, acc[c]));
            }
        }
        Self::from_triplets(&self.space, triplets)
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// `y = self * x` on raw amplitude slices.
    pub fn apply_slice(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn apply(&self, x: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "vector of length {} for dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let mut y = DVector::zeros(self.dim());
        self.apply_slice(x.as_slice(), y.as_mut_slice());
        Ok(y)
    }

    /// Dense block of the operator on the given basis indices (rows and columns).
    pub fn restrict(&self, basis: &[usize]) -> DMatrix<Complex64> {
        let mut pos = vec![usize::MAX; self.dim()];
        for (p, &i) in basis.iter().enumerate() {
            pos[i] = p;
        }
        let mut m = DMatrix::zeros(basis.len(), basis.len());
        for (p, &r) in basis.iter().enumerate() {
            for (c, v) in self.row(r) {
                if pos[c] != usize::MAX {
                    m[(p, pos[c])] = v;
                }
            }
        }
        m
    }

    /// Largest entrywise difference from another operator on the same space.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }
}

fn ladder(space: &FockSpace, mode: usize, raise: bool) -> Result<LinearOp> {
    space.check_mode(mode)?;
    let d = space.mode_dims()[mode];
    let stride = space.stride(mode);
    let triplets = (0..space.total_dim()).filter_map(|i| {
        let n = space.occupation(i, mode);
        if raise {
            (n + 1 < d).then(|| (i + stride, i, Complex64::new(((n + 1) as f64).sqrt(), 0.0)))
        } else {
            (n > 0).then(|| (i - stride, i, Complex64::new((n as f64).sqrt(), 0.0)))
        }
    });
    LinearOp::from_triplets(space, triplets)
}

/// Annihilation operator `m` acting on one mode.
pub fn annihilation(space: &FockSpace, mode: usize) -> Result<LinearOp> {
    ladder(space, mode, false)
}

/// Creation operator `m†` acting on one mode.
pub fn creation(space: &FockSpace, mode: usize) -> Result<LinearOp> {
    ladder(space, mode, true)
}

pub fn number(space: &FockSpace, mode: usize) -> Result<LinearOp> {
    space.check_mode(mode)?;
    let diag: Vec<f64> = (0..space.total_dim())
        .map(|i| space.occupation(i, mode) as f64)
        .collect();
    LinearOp::diagonal(space, &diag)
}

pub fn total_number(space: &FockSpace) -> LinearOp {
    let diag: Vec<f64> = (0..space.total_dim())
        .map(|i| space.total_excitation(i) as f64)
        .collect();
    LinearOp::diagonal(space, &diag).expect("length matches")
}

/// Total parity `(-1)^N`.
pub fn parity(space: &FockSpace) -> LinearOp {
    let diag: Vec<f64> = (0..space.total_dim())
        .map(|i| {
            if space.total_excitation(i) % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    LinearOp::diagonal(space, &diag).expect("length matches")
}

/// Lifts a single-mode operator to `I ⊗ … ⊗ local ⊗ … ⊗ I`.
pub fn embed(space: &FockSpace, mode: usize, local: &LinearOp) -> Result<LinearOp> {
    space.check_mode(mode)?;
    let d = space.mode_dims()[mode];
    if local.dim() != d {
        return Err(Error::arg(format!(
            "local operator of dimension {} for mode {mode} of dimension {d}",
            local.dim()
        )));
    }
    let stride = space.stride(mode);
    let mut columns: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); d];
    for (r, c, v) in local.entries() {
        columns[c].push((r, v));
    }
    let triplets = (0..space.total_dim()).flat_map(|i| {
        let n = space.occupation(i, mode);
        columns[n]
            .iter()
            .map(move |&(r, v)| (i + r * stride - n * stride, i, v))
    });
    let mut op = LinearOp::from_triplets(space, triplets)?;
    op.hermitian = local.hermitian;
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-14
    }

    #[test]
    fn single_mode_annihilation_entries() {
        let s = FockSpace::new([3]).unwrap();
        let a = annihilation(&s, 0).unwrap();
        assert!(close(a.get(0, 1).re, 1.0));
        assert!(close(a.get(1, 2).re, 2f64.sqrt()));
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn creation_is_adjoint_of_annihilation() {
        let s = FockSpace::new([3, 4]).unwrap();
        for mode in 0..2 {
            let a = annihilation(&s, mode).unwrap();
            let ad = creation(&s, mode).unwrap();
            assert_eq!(a.adjoint(), ad);
        }
        let ad = creation(&s, 1).unwrap();
        for n in 0..3 {
            let v = ad.get(
                s.index_of(&[0, n + 1]).unwrap(),
                s.index_of(&[0, n]).unwrap(),
            );
            assert!(close(v.re, ((n + 1) as f64).sqrt()));
        }
    }

    #[test]
    fn number_operator_is_diagonal_count() {
        let s = FockSpace::new([4]).unwrap();
        let a = annihilation(&s, 0).unwrap();
        let n = creation(&s, 0).unwrap().mul(&a).unwrap();
        for k in 0..4 {
            assert!(close(n.get(k, k).re, k as f64));
        }
        assert_eq!(n.nnz(), 3);
        assert!(number(&s, 0).unwrap().max_abs_diff(&n).unwrap() < 1e-14);
    }

    #[test]
    fn embed_identity_and_number() {
        let s = FockSpace::new([3, 2, 3]).unwrap();
        let local_id = LinearOp::identity(&FockSpace::new([2]).unwrap());
        assert_eq!(embed(&s, 1, &local_id).unwrap(), LinearOp::identity(&s));
        let local_n = number(&FockSpace::new([3]).unwrap(), 0).unwrap();
        let n0 = embed(&s, 0, &local_n).unwrap();
        let i = s.index_of(&[2, 0, 0]).unwrap();
        assert!(close(n0.get(i, i).re, 2.0));
        assert_eq!(n0, number(&s, 0).unwrap());
        assert!(embed(&s, 0, &local_id).is_err());
    }

    #[test]
    fn embedded_ladder_matches_direct() {
        let s = FockSpace::new([3, 4, 2]).unwrap();
        for mode in 0..3 {
            let local = annihilation(&FockSpace::new([s.mode_dims()[mode]]).unwrap(), 0).unwrap();
            assert_eq!(
                embed(&s, mode, &local).unwrap(),
                annihilation(&s, mode).unwrap()
            );
        }
    }

    #[test]
    fn different_modes_commute() {
        let s = FockSpace::uniform(3, 3).unwrap();
        let c = annihilation(&s, 0)
            .unwrap()
            .commutator(&creation(&s, 1).unwrap())
            .unwrap();
        assert_eq!(c.nnz(), 0);
    }

    #[test]
    fn hermitian_flag_is_verified() {
        let s = FockSpace::uniform(2, 3).unwrap();
        assert!(annihilation(&s, 0).unwrap().into_hermitian().is_err());
        let x = annihilation(&s, 0)
            .unwrap()
            .add(&creation(&s, 0).unwrap())
            .unwrap();
        assert!(x.into_hermitian().unwrap().is_flagged_hermitian());
    }

    #[test]
    fn mul_matches_dense() {
        let s = FockSpace::new([3, 3]).unwrap();
        let a = annihilation(&s, 0)
            .unwrap()
            .add(&creation(&s, 1).unwrap())
            .unwrap();
        let b = creation(&s, 0).unwrap().scale(Complex64::new(0.3, -1.2));
        let dense = a.to_dense() * b.to_dense();
        let diff = (a.mul(&b).unwrap().to_dense() - dense)
            .map(|z| z.norm())
            .max();
        assert!(diff < 1e-14);
    }

    #[test]
    fn restrict_extracts_block() {
        let s = FockSpace::uniform(3, 2).unwrap();
        let hop = creation(&s, 0)
            .unwrap()
            .mul(&annihilation(&s, 1).unwrap())
            .unwrap();
        let basis = [
            s.index_of(&[1, 0, 0]).unwrap(),
            s.index_of(&[0, 1, 0]).unwrap(),
        ];
        let b = hop.restrict(&basis);
        assert!(close(b[(0, 1)].re, 1.0));
        assert!(close(b[(1, 0)].norm(), 0.0));
    }

    #[test]
    fn parity_and_total_number() {
        let s = FockSpace::uniform(2, 3).unwrap();
        let p = parity(&s);
        let i = s.index_of(&[1, 2]).unwrap();
        assert!(close(p.get(i, i).re, -1.0));
        assert!(close(total_number(&s).get(i, i).re, 3.0));
    }
}
