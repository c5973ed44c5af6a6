//! Invariant-subspace bookkeeping shared by the integrators.

use num_complex::Complex64;

use crate::fock::{FockSpace, LinearOp};
use crate::model::{DiagonalDrive, Hamiltonian};

/// Static part restricted to an invariant block, in local CSR form.
pub(super) struct Block {
    pub basis: Vec<usize>,
    /// `occ[i * n_modes + k]` is the occupation of mode `k` in local state `i`.
    pub occ: Vec<usize>,
    pub n_modes: usize,
    max_occ: Vec<usize>,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[p] * x[self.indices[p]];
            }
            *out = acc;
        }
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.dim())
            .map(|r| {
                (self.indptr[r]..self.indptr[r + 1])
                    .map(|p| self.values[p].norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn dense(&self) -> nalgebra::DMatrix<Complex64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for r in 0..n {
            for p in self.indptr[r]..self.indptr[r + 1] {
                m[(r, self.indices[p])] = self.values[p];
            }
        }
        m
    }

    pub fn occupation(&self, i: usize, k: usize) -> usize {
        self.occ[i * self.n_modes + k]
    }

    /// Interaction-picture phases `e^{-iθ_a(t)}` for every local state.
    pub fn phases(&self, frame: &DriveFrame, t: f64, out: &mut [Complex64]) {
        // powers of the per-mode factors, so each state costs one product per mode
        let tables: Vec<Option<Vec<Complex64>>> = frame
            .mode_factors(t)
            .into_iter()
            .enumerate()
            .map(|(k, w)| {
                w.map(|w| {
                    let top = self.max_occ[k];
                    let mut pow = Vec::with_capacity(top + 1);
                    let mut acc = Complex64::new(1.0, 0.0);
                    for _ in 0..=top {
                        pow.push(acc);
                        acc *= w;
                    }
                    pow
                })
            })
            .collect();
        for (i, o) in out.iter_mut().enumerate() {
            let mut p = Complex64::new(1.0, 0.0);
            for (k, table) in tables.iter().enumerate() {
                if let Some(table) = table {
                    p *= table[self.occupation(i, k)];
                }
            }
            *o = p;
        }
    }
}

/// Accumulated phase of each mode under the diagonal drives.
pub(super) struct DriveFrame {
    drives: Vec<DiagonalDrive>,
    n_modes: usize,
}

impl DriveFrame {
    pub fn new(h: &Hamiltonian) -> Self {
        Self {
            drives: h.drives().to_vec(),
            n_modes: h.space().n_modes(),
        }
    }

    pub fn is_static(&self) -> bool {
        self.drives.is_empty()
    }

    pub fn period(&self) -> Option<f64> {
        self.drives
            .iter()
            .map(|d| std::f64::consts::TAU / d.omega)
            .reduce(f64::min)
    }

    /// Upper bound on how fast any hopping coefficient rotates in this frame.
    pub fn bandwidth(&self) -> f64 {
        let mut amp = vec![0.0_f64; self.n_modes];
        for d in &self.drives {
            amp[d.mode] += d.amplitude.abs();
        }
        let mut sorted = amp;
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted.iter().take(2).sum()
    }

    /// `e^{-iΘ_k(t)}` per mode, `None` for undriven modes.
    fn mode_factors(&self, t: f64) -> Vec<Option<Complex64>> {
        let mut theta: Vec<Option<f64>> = vec![None; self.n_modes];
        for d in &self.drives {
            *theta[d.mode].get_or_insert(0.0) += d.integral(t);
        }
        theta
            .into_iter()
            .map(|th| th.map(|th| Complex64::from_polar(1.0, -th)))
            .collect()
    }
}

/// Groups basis indices by total excitation when the generator conserves it,
/// otherwise returns the whole space as one block.
pub(super) fn partition(space: &FockSpace, conserving: bool) -> Vec<Vec<usize>> {
    if !conserving {
        return vec![(0..space.total_dim()).collect()];
    }
    let top: usize = space.mode_dims().iter().map(|d| d - 1).sum();
    let mut sectors = vec![Vec::new(); top + 1];
    for i in 0..space.total_dim() {
        sectors[space.total_excitation(i)].push(i);
    }
    sectors
}

/// Restricts `op` to `basis`, which must be invariant under it.
pub(super) fn restrict(op: &LinearOp, basis: Vec<usize>) -> Block {
    let space = op.space();
    let n_modes = space.n_modes();
    let mut local = std::collections::HashMap::with_capacity(basis.len());
    for (p, &i) in basis.iter().enumerate() {
        local.insert(i, p);
    }
    let mut indptr = Vec::with_capacity(basis.len() + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    indptr.push(0);
    for &r in &basis {
        for (c, v) in op.row(r) {
            let p = *local
                .get(&c)
                .expect("block must be invariant under the generator");
            indices.push(p);
            values.push(v);
        }
        indptr.push(indices.len());
    }
    let mut occ = Vec::with_capacity(basis.len() * n_modes);
    for &i in &basis {
        occ.extend((0..n_modes).map(|k| space.occupation(i, k)));
    }
    let max_occ = (0..n_modes)
        .map(|k| {
            occ.iter()
                .skip(k)
                .step_by(n_modes)
                .copied()
                .max()
                .unwrap_or(0)
        })
        .collect();
    Block {
        basis,
        occ,
        n_modes,
        max_occ,
        indptr,
        indices,
        values,
    }
}
