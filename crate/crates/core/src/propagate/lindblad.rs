use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::blocks::{restrict, Block, DriveFrame};
use super::{check_times, TimeGrid, DRIFT_TOL, STEP_PHASE};
use crate::error::{Error, Result};
use crate::fock::DensityOp;
use crate::model::Hamiltonian;

/// Output density matrices are dense on the full space, so keep it modest.
const MAX_FULL_DIM: usize = 2048;
/// Largest excitation-restricted block integrated as a dense matrix.
const MAX_BLOCK_DIM: usize = 1500;
/// Up to this block size positivity is checked at every sample.
const EIGEN_CHECK_DIM: usize = 256;
const POSITIVITY_TOL: f64 = 1e-8;
const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Amplitude damping `κ Σ_k D[m_k]` on the listed modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladParams {
    pub kappa: f64,
    pub decay_modes: Vec<usize>,
}

impl LindbladParams {
    pub fn new(kappa: f64, decay_modes: Vec<usize>) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::arg(format!(
                "damping rate must be finite and non-negative, got {kappa}"
            )));
        }
        Ok(Self { kappa, decay_modes })
    }

    pub fn all_modes(kappa: f64, n_modes: usize) -> Result<Self> {
        Self::new(kappa, (0..n_modes).collect())
    }
}

struct Dissipator {
    kappa: f64,
    /// `(local source, local target, √n)` for every lowering move.
    jumps: Vec<Vec<(usize, f64)>>,
    /// Total decaying occupation per local state.
    loss: Vec<f64>,
}

struct Workspace<'a> {
    block: &'a Block,
    frame: &'a DriveFrame,
    diss: Dissipator,
    p: Vec<Complex64>,
    coef: Vec<Complex64>,
    a: DMatrix<Complex64>,
}

impl Workspace<'_> {
    fn set_time(&mut self, t: f64) {
        if self.frame.is_static() {
            return;
        }
        self.block.phases(self.frame, t, &mut self.p);
        let b = self.block;
        for r in 0..b.dim() {
            for q in b.indptr[r]..b.indptr[r + 1] {
                self.coef[q] = self.p[r].conj() * b.values[q] * self.p[b.indices[q]];
            }
        }
    }

    fn derivative(&mut self, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let b = self.block;
        let n = b.dim();
        self.a.fill(C0);
        for c in 0..n {
            for r in 0..n {
                let mut acc = C0;
                for q in b.indptr[r]..b.indptr[r + 1] {
                    acc += self.coef[q] * rho[(b.indices[q], c)];
                }
                self.a[(r, c)] = acc;
            }
        }
        let mi = Complex64::new(0.0, -1.0);
        for c in 0..n {
            for r in 0..n {
                out[(r, c)] = mi * (self.a[(r, c)] - self.a[(c, r)].conj());
            }
        }
        let k = self.diss.kappa;
        if k == 0.0 {
            return;
        }
        for c in 0..n {
            for r in 0..n {
                out[(r, c)] -= rho[(r, c)] * (0.5 * k * (self.diss.loss[r] + self.diss.loss[c]));
            }
        }
        for (r, jr) in self.diss.jumps.iter().enumerate() {
            for (c, jc) in self.diss.jumps.iter().enumerate() {
                let v = rho[(r, c)];
                if v == C0 {
                    continue;
                }
                // m_k ρ m_k† only pairs moves on the same mode, stored in the same slot
                for (&(tr, sr), &(tc, sc)) in jr.iter().zip(jc) {
                    if tr != usize::MAX && tc != usize::MAX {
                        out[(tr, tc)] += v * (k * sr * sc);
                    }
                }
            }
        }
    }
}

/// Master-equation evolution of `rho0` (given at `times[0]`), observed at each sample.
pub fn evolve_lindblad_observe<T>(
    h: &Hamiltonian,
    rho0: &DensityOp,
    lb: &LindbladParams,
    times: &[f64],
    steps_per_period: usize,
    mut observe: impl FnMut(f64, &DensityOp) -> Result<T>,
) -> Result<Vec<T>> {
    check_times(times)?;
    let space = h.space();
    if rho0.space() != space {
        return Err(Error::arg(
            "initial state and Hamiltonian live on different spaces",
        ));
    }
    let lb = LindbladParams::new(lb.kappa, lb.decay_modes.clone())?;
    for &m in &lb.decay_modes {
        space.check_mode(m)?;
    }
    if steps_per_period < super::MIN_STEPS_PER_PERIOD {
        return Err(Error::arg("too few steps per drive period"));
    }
    let full = space.total_dim();
    if full > MAX_FULL_DIM {
        return Err(Error::Unsupported(format!(
            "density-matrix propagation limited to total dimension {MAX_FULL_DIM}, got {full}"
        )));
    }

    // excitation-conserving dynamics plus decay never leaves the initial excitation range
    let basis: Vec<usize> = if h.conserves_excitation() {
        let top = (0..full)
            .filter(|&i| rho0.matrix()[(i, i)] != C0)
            .map(|i| space.total_excitation(i))
            .max()
            .unwrap_or(0);
        (0..full)
            .filter(|&i| space.total_excitation(i) <= top)
            .collect()
    } else {
        (0..full).collect()
    };
    if basis.len() > MAX_BLOCK_DIM {
        return Err(Error::Unsupported(format!(
            "density block of dimension {} exceeds {MAX_BLOCK_DIM}",
            basis.len()
        )));
    }
    let block = restrict(h.static_part(), basis);
    let n = block.dim();
    let frame = DriveFrame::new(h);

    let local: HashMap<usize, usize> = block
        .basis
        .iter()
        .enumerate()
        .map(|(p, &i)| (i, p))
        .collect();
    let mut jumps = vec![Vec::with_capacity(lb.decay_modes.len()); n];
    let mut loss = vec![0.0; n];
    for (i, &g) in block.basis.iter().enumerate() {
        for &m in &lb.decay_modes {
            let occ = block.occupation(i, m);
            loss[i] += occ as f64;
            jumps[i].push(if occ > 0 {
                (local[&(g - space.stride(m))], (occ as f64).sqrt())
            } else {
                (usize::MAX, 0.0)
            });
        }
    }
    let rate =
        block.norm_inf() + frame.bandwidth() + lb.kappa * loss.iter().copied().fold(0.0, f64::max);
    let h_max = match frame.period() {
        Some(period) if rate > 0.0 => (period / steps_per_period as f64).min(STEP_PHASE / rate),
        Some(period) => period / steps_per_period as f64,
        None if rate > 0.0 => 0.02 / rate,
        None => f64::INFINITY,
    };

    let mut ws = Workspace {
        block: &block,
        frame: &frame,
        diss: Dissipator {
            kappa: lb.kappa,
            jumps,
            loss,
        },
        p: vec![Complex64::new(1.0, 0.0); n],
        coef: block.values.clone(),
        a: DMatrix::zeros(n, n),
    };

    ws.set_time(times[0]);
    let mut rho = DMatrix::from_fn(n, n, |r, c| {
        ws.p[r].conj() * rho0.matrix()[(block.basis[r], block.basis[c])] * ws.p[c]
    });
    let trace0 = rho.trace().re;
    let (mut k1, mut k2, mut k3, mut k4) = (
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
    );
    let mut out = Vec::with_capacity(times.len());

    for (s, &tb) in times.iter().enumerate() {
        if s > 0 {
            let ta = times[s - 1];
            let count = if h_max.is_finite() {
                ((tb - ta) / h_max).ceil().max(1.0) as usize
            } else {
                1
            };
            let dt = (tb - ta) / count as f64;
            for j in 0..count {
                let t = ta + j as f64 * dt;
                ws.set_time(t);
                ws.derivative(&rho, &mut k1);
                ws.set_time(t + 0.5 * dt);
                let tmp = &rho + &k1 * Complex64::new(0.5 * dt, 0.0);
                ws.derivative(&tmp, &mut k2);
                let tmp = &rho + &k2 * Complex64::new(0.5 * dt, 0.0);
                ws.derivative(&tmp, &mut k3);
                ws.set_time(t + dt);
                let tmp = &rho + &k3 * Complex64::new(dt, 0.0);
                ws.derivative(&tmp, &mut k4);
                rho += (&k1 + (&k2 + &k3) * Complex64::new(2.0, 0.0) + &k4)
                    * Complex64::new(dt / 6.0, 0.0);
            }
            let tr = rho.trace().re;
            if (tr - trace0).abs() > DRIFT_TOL {
                return Err(Error::Integration {
                    t: tb,
                    reason: format!("trace drifted by {:e}; step too coarse", tr - trace0),
                });
            }
        }
        let herm = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
        if n <= EIGEN_CHECK_DIM || s + 1 == times.len() {
            let min = herm.clone().symmetric_eigenvalues().min();
            if min < -POSITIVITY_TOL {
                return Err(Error::Integration {
                    t: tb,
                    reason: format!("density matrix lost positivity (eigenvalue {min:e})"),
                });
            }
        }
        ws.set_time(tb);
        let mut m = DMatrix::from_element(full, full, C0);
        for (r, &gr) in block.basis.iter().enumerate() {
            for (c, &gc) in block.basis.iter().enumerate() {
                m[(gr, gc)] = ws.p[r] * herm[(r, c)] * ws.p[c].conj();
            }
        }
        out.push(observe(tb, &DensityOp::from_raw(space, m)?)?);
    }
    Ok(out)
}

/// Density matrices on the sample grid.
pub fn evolve_lindblad(
    h: &Hamiltonian,
    rho0: &DensityOp,
    lb: &LindbladParams,
    grid: &TimeGrid,
) -> Result<Vec<(f64, DensityOp)>> {
    grid.validate()?;
    evolve_lindblad_observe(
        h,
        rho0,
        lb,
        &grid.times(),
        grid.steps_per_drive_period,
        |t, r| Ok((t, r.clone())),
    )
}
