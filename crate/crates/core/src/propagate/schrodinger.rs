use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use super::blocks::{partition, restrict, Block, DriveFrame};
use super::{check_times, TimeGrid, DRIFT_TOL, STEP_PHASE};
use crate::error::{Error, Result};
use crate::fock::{FockSpace, Ket};
use crate::linalg::hermitian_eigen;
use crate::model::Hamiltonian;
use crate::states::{Ensemble, PreparedState};

/// Largest block that is diagonalised for exact static stepping.
const MAX_EIGEN_DIM: usize = 4096;
/// Final-state infidelity allowed between a run and its step-halved rerun.
pub const CONVERGENCE_TOL: f64 = 1e-8;
/// Drift allowed on a rarely populated mixture component.
pub const MAX_COMPONENT_DRIFT: f64 = 1e-2;
const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Per-block amplitudes at every sample time.
struct Evolved {
    pieces: Vec<(Vec<usize>, Vec<Vec<Complex64>>)>,
}

impl Evolved {
    fn ket(&self, space: &FockSpace, sample: usize) -> Result<Ket> {
        let mut v = DVector::from_element(space.total_dim(), C0);
        for (basis, snaps) in &self.pieces {
            for (&i, &a) in basis.iter().zip(&snaps[sample]) {
                v[i] = a;
            }
        }
        Ket::from_raw(space, v)
    }
}

fn evolve_pieces(
    h: &Hamiltonian,
    psi0: &Ket,
    times: &[f64],
    steps: usize,
    drift_tol: f64,
) -> Result<Evolved> {
    check_times(times)?;
    if psi0.space() != h.space() {
        return Err(Error::arg(
            "initial state and Hamiltonian live on different spaces",
        ));
    }
    if steps < super::MIN_STEPS_PER_PERIOD {
        return Err(Error::arg(format!(
            "at least {} steps per drive period are required",
            super::MIN_STEPS_PER_PERIOD
        )));
    }
    let frame = DriveFrame::new(h);
    let amps = psi0.amplitudes();
    let active: Vec<Vec<usize>> = partition(h.space(), h.conserves_excitation())
        .into_iter()
        .filter(|b| b.iter().any(|&i| amps[i] != C0))
        .collect();
    let pieces = active
        .into_par_iter()
        .map(|basis| {
            let block = restrict(h.static_part(), basis);
            let x0: Vec<Complex64> = block.basis.iter().map(|&i| amps[i]).collect();
            let snaps = if frame.is_static() {
                eigen_run(&block, &x0, times)?
            } else {
                rk4_run(&block, &frame, &x0, times, steps, drift_tol)?
            };
            Ok((block.basis, snaps))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evolved { pieces })
}

fn eigen_run(block: &Block, x0: &[Complex64], times: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    let n = block.dim();
    if n > MAX_EIGEN_DIM {
        return Err(Error::Unsupported(format!(
            "static block of dimension {n} exceeds the {MAX_EIGEN_DIM} limit for exact stepping"
        )));
    }
    let (e, v) = hermitian_eigen(&block.dense())?;
    let c = v.adjoint() * DVector::from_column_slice(x0);
    let t0 = times[0];
    Ok(times
        .iter()
        .map(|&t| {
            let rotated = DVector::from_fn(n, |k, _| {
                c[k] * Complex64::from_polar(1.0, -e[k] * (t - t0))
            });
            (&v * rotated).iter().copied().collect()
        })
        .collect())
}

struct Rk4Buffers {
    p: Vec<Complex64>,
    tmp: Vec<Complex64>,
    z: Vec<Complex64>,
}

impl Rk4Buffers {
    /// `out = -i p* ⊙ S (p ⊙ y)` with `self.p` already set.
    fn derivative(&mut self, block: &Block, y: &[Complex64], out: &mut [Complex64]) {
        for ((t, &p), &y) in self.tmp.iter_mut().zip(&self.p).zip(y) {
            *t = p * y;
        }
        block.apply(&self.tmp, &mut self.z);
        for ((o, &p), &z) in out.iter_mut().zip(&self.p).zip(&self.z) {
            *o = Complex64::new(0.0, -1.0) * p.conj() * z;
        }
    }
}

fn rk4_run(
    block: &Block,
    frame: &DriveFrame,
    x0: &[Complex64],
    times: &[f64],
    steps: usize,
    drift_tol: f64,
) -> Result<Vec<Vec<Complex64>>> {
    let n = block.dim();
    let period = frame.period().expect("driven frame has a period");
    let mut h_max = period / steps as f64;
    let bandwidth = frame.bandwidth();
    if bandwidth > 0.0 {
        h_max = h_max.min(STEP_PHASE / bandwidth);
    }
    let s_norm = block.norm_inf();
    if s_norm > 0.0 {
        h_max = h_max.min(0.5 / s_norm);
    }
    let mut buf = Rk4Buffers {
        p: vec![C0; n],
        tmp: vec![C0; n],
        z: vec![C0; n],
    };
    let (mut k1, mut k2, mut k3, mut k4, mut ys) = (
        vec![C0; n],
        vec![C0; n],
        vec![C0; n],
        vec![C0; n],
        vec![C0; n],
    );

    block.phases(frame, times[0], &mut buf.p);
    let mut y: Vec<Complex64> = x0.iter().zip(&buf.p).map(|(x, p)| p.conj() * x).collect();
    let norm0: f64 = y.iter().map(|a| a.norm_sqr()).sum();
    let mut out = Vec::with_capacity(times.len());
    out.push(x0.to_vec());

    for w in times.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let count = ((tb - ta) / h_max).ceil().max(1.0) as usize;
        let h = (tb - ta) / count as f64;
        for j in 0..count {
            // `buf.p` still holds the phases at `t` from the previous step
            let t = ta + j as f64 * h;
            buf.derivative(block, &y, &mut k1);
            block.phases(frame, t + 0.5 * h, &mut buf.p);
            for i in 0..n {
                ys[i] = y[i] + k1[i] * (0.5 * h);
            }
            buf.derivative(block, &ys, &mut k2);
            for i in 0..n {
                ys[i] = y[i] + k2[i] * (0.5 * h);
            }
            buf.derivative(block, &ys, &mut k3);
            block.phases(frame, ta + (j + 1) as f64 * h, &mut buf.p);
            for i in 0..n {
                ys[i] = y[i] + k3[i] * h;
            }
            buf.derivative(block, &ys, &mut k4);
            for i in 0..n {
                y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }
        }
        let norm: f64 = y.iter().map(|a| a.norm_sqr()).sum();
        if (norm - norm0).abs() > drift_tol {
            return Err(Error::Integration {
                t: tb,
                reason: format!("norm drifted by {:e}; step too coarse", norm - norm0),
            });
        }
        block.phases(frame, tb, &mut buf.p);
        out.push(y.iter().zip(&buf.p).map(|(y, p)| p * y).collect());
    }
    Ok(out)
}

/// Evolves `psi0` (given at `times[0]`) and hands each sample to `observe`.
///
/// `steps_per_period` sets the RK4 density for driven generators; static
/// generators are stepped exactly.
pub fn evolve_observe<T>(
    h: &Hamiltonian,
    psi0: &Ket,
    times: &[f64],
    steps_per_period: usize,
    mut observe: impl FnMut(f64, &Ket) -> Result<T>,
) -> Result<Vec<T>> {
    let ev = evolve_pieces(h, psi0, times, steps_per_period, DRIFT_TOL)?;
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| observe(t, &ev.ket(h.space(), i)?))
        .collect()
}

/// States on the sample grid.
pub fn evolve_schrodinger(h: &Hamiltonian, psi0: &Ket, grid: &TimeGrid) -> Result<Vec<(f64, Ket)>> {
    grid.validate()?;
    evolve_observe(
        h,
        psi0,
        &grid.times(),
        grid.steps_per_drive_period,
        |t, k| Ok((t, k.clone())),
    )
}

/// Final-state infidelity between runs at the grid's step density and at twice it.
pub fn convergence_defect(h: &Hamiltonian, psi0: &Ket, grid: &TimeGrid) -> Result<f64> {
    grid.validate()?;
    let times = grid.times();
    let last = times.len() - 1;
    let (a, b) = rayon::join(
        || evolve_pieces(h, psi0, &times, grid.steps_per_drive_period, DRIFT_TOL),
        || evolve_pieces(h, psi0, &times, 2 * grid.steps_per_drive_period, DRIFT_TOL),
    );
    let a = a?.ket(h.space(), last)?;
    let b = b?.ket(h.space(), last)?;
    Ok((1.0 - a.fidelity(&b)?).abs())
}

/// [`evolve_schrodinger`] plus the step-halving check.
pub fn evolve_verified(h: &Hamiltonian, psi0: &Ket, grid: &TimeGrid) -> Result<Vec<(f64, Ket)>> {
    let defect = convergence_defect(h, psi0, grid)?;
    if defect >= CONVERGENCE_TOL {
        return Err(Error::Integration {
            t: grid.t_end,
            reason: format!("halving the step changed the final fidelity by {defect:e}"),
        });
    }
    evolve_schrodinger(h, psi0, grid)
}

fn component_pieces(
    h: &Hamiltonian,
    components: &[(f64, Ket)],
    times: &[f64],
    steps_per_period: usize,
) -> Result<Vec<Evolved>> {
    components
        .par_iter()
        .map(|(p, k)| {
            let tol = (DRIFT_TOL / p).min(MAX_COMPONENT_DRIFT);
            evolve_pieces(h, k, times, steps_per_period, tol)
        })
        .collect()
}

fn observe_components<T>(
    h: &Hamiltonian,
    state: &PreparedState,
    components: &[(f64, Ket)],
    evolved: &[Evolved],
    times: &[f64],
    mut observe: impl FnMut(f64, &PreparedState) -> Result<T>,
) -> Result<Vec<T>> {
    let space = h.space();
    let pure = matches!(state, PreparedState::Pure(_));
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let kets = evolved
                .iter()
                .map(|e| e.ket(space, i))
                .collect::<Result<Vec<_>>>()?;
            let snapshot = if pure {
                PreparedState::Pure(kets.into_iter().next().expect("one component"))
            } else {
                PreparedState::Mixed(Ensemble {
                    components: components.iter().map(|(p, _)| *p).zip(kets).collect(),
                })
            };
            observe(t, &snapshot)
        })
        .collect()
}

/// Like [`evolve_observe`] for pure states or factored mixtures; each
/// component of a mixture evolves independently.
///
/// The norm-drift check applies to the mixture: a component of weight `p`
/// may drift by `DRIFT_TOL / p`, capped at [`MAX_COMPONENT_DRIFT`].
pub fn evolve_ensemble_observe<T>(
    h: &Hamiltonian,
    state: &PreparedState,
    times: &[f64],
    steps_per_period: usize,
    observe: impl FnMut(f64, &PreparedState) -> Result<T>,
) -> Result<Vec<T>> {
    let components = state.components();
    let evolved = component_pieces(h, &components, times, steps_per_period)?;
    observe_components(h, state, &components, &evolved, times, observe)
}

/// [`evolve_ensemble_observe`] plus a rerun to the final time at twice the
/// step density; returns the weighted final-state infidelity `Σ p_k (1 − F_k)`
/// between the two runs alongside the observations.
pub fn evolve_ensemble_checked<T>(
    h: &Hamiltonian,
    state: &PreparedState,
    times: &[f64],
    steps_per_period: usize,
    observe: impl FnMut(f64, &PreparedState) -> Result<T>,
) -> Result<(Vec<T>, f64)> {
    check_times(times)?;
    let components = state.components();
    let ends = [times[0], *times.last().expect("checked")];
    let (coarse, fine) = rayon::join(
        || component_pieces(h, &components, times, steps_per_period),
        || component_pieces(h, &components, &ends, 2 * steps_per_period),
    );
    let (coarse, fine) = (coarse?, fine?);
    let last = times.len() - 1;
    let mut defect = 0.0;
    for ((p, _), (a, b)) in components.iter().zip(coarse.iter().zip(&fine)) {
        let a = a.ket(h.space(), last)?;
        let b = b.ket(h.space(), 1)?;
        defect += p * (1.0 - a.fidelity(&b)?).abs();
    }
    let out = observe_components(h, state, &components, &coarse, times, observe)?;
    Ok((out, defect))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{effective_model, Chirality, DriveParams};
    use crate::fock::{number, total_number, Expect, LinearOp};
    use crate::model::{chiral_effective, floquet_drive};

    fn space() -> FockSpace {
        FockSpace::uniform(3, 3).unwrap()
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let s = space();
        let psi = Ket::basis(&s, &[1, 0, 1]).unwrap();
        let h = Hamiltonian::Static(LinearOp::zeros(&s));
        let grid = TimeGrid::span(5.0, 4).unwrap();
        for (_, k) in evolve_schrodinger(&h, &psi, &grid).unwrap() {
            assert_eq!(k, psi);
        }
    }

    #[test]
    fn static_stepping_matches_driven_path_with_zero_amplitude() {
        let s = space();
        let model = effective_model(
            &DriveParams::chiral(20.0, Chirality::Clockwise).unwrap(),
            1.0,
        )
        .unwrap();
        let hs = chiral_effective(&model, &s).unwrap();
        let driven = crate::model::DrivenHamiltonian::new(
            hs.clone(),
            vec![crate::model::DiagonalDrive {
                mode: 0,
                amplitude: 0.0,
                omega: 20.0,
                phase: 0.0,
            }],
        )
        .unwrap();
        let psi = Ket::basis(&s, &[1, 0, 0]).unwrap();
        let grid = TimeGrid::span(30.0, 3).unwrap();
        let a = evolve_schrodinger(&Hamiltonian::Static(hs), &psi, &grid).unwrap();
        let b = evolve_schrodinger(&Hamiltonian::Driven(driven), &psi, &grid).unwrap();
        for ((_, x), (_, y)) in a.iter().zip(&b) {
            assert!((x.amplitudes() - y.amplitudes()).norm() < 1e-9);
        }
    }

    #[test]
    fn drive_conserves_excitation_and_norm() {
        let s = space();
        let d = DriveParams::chiral(20.0, Chirality::Clockwise).unwrap();
        let h: Hamiltonian = floquet_drive(&d, 1.0, &s).unwrap().into();
        let psi = Ket::basis(&s, &[2, 0, 0]).unwrap();
        let n = total_number(&s);
        let grid = TimeGrid::span(10.0, 6).unwrap();
        for (_, k) in evolve_schrodinger(&h, &psi, &grid).unwrap() {
            assert!((k.norm() - 1.0).abs() < 1e-9);
            assert!((k.expect(&n).unwrap().re - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn coarse_interval_is_subdivided() {
        let s = space();
        let d = DriveParams::chiral(20.0, Chirality::Clockwise).unwrap();
        let h: Hamiltonian = floquet_drive(&d, 1.0, &s).unwrap().into();
        let psi = Ket::basis(&s, &[1, 0, 0]).unwrap();
        let grid = TimeGrid::span(3.0, 2).unwrap();
        assert!(convergence_defect(&h, &psi, &grid).unwrap() < CONVERGENCE_TOL);
    }

    #[test]
    fn mixture_components_evolve_independently() {
        let s = space();
        let model = effective_model(
            &DriveParams::chiral(20.0, Chirality::Clockwise).unwrap(),
            1.0,
        )
        .unwrap();
        let h: Hamiltonian = chiral_effective(&model, &s).unwrap().into();
        let a = Ket::basis(&s, &[1, 0, 0]).unwrap();
        let b = Ket::basis(&s, &[2, 0, 0]).unwrap();
        let mix = PreparedState::Mixed(Ensemble {
            components: vec![(0.25, a.clone()), (0.75, b.clone())],
        });
        let times = [0.0, 7.0, 19.0];
        let n1 = number(&s, 1).unwrap();
        let got =
            evolve_ensemble_observe(&h, &mix, &times, 200, |_, st| Ok(st.expect(&n1)?.re)).unwrap();
        let ea = evolve_observe(&h, &a, &times, 200, |_, k| Ok(k.expect(&n1)?.re)).unwrap();
        let eb = evolve_observe(&h, &b, &times, 200, |_, k| Ok(k.expect(&n1)?.re)).unwrap();
        for i in 0..3 {
            assert!((got[i] - (0.25 * ea[i] + 0.75 * eb[i])).abs() < 1e-12);
        }
    }
}
