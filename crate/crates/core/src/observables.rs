//! Transfer populations, pair concurrence, loop currents and trace utilities.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{chiral_root, compact_matrix, EffectiveModel, HoppingPhases};
use crate::fock::{annihilation, creation, project_pair, Expect, FockSpace, Ket, LinearOp};
use crate::model::{quadratic_form, Hamiltonian};
use crate::propagate::evolve_ensemble_observe;
use crate::states::{build_state, PreparedState, StateSpec};

/// Allowed slack on `Σ|C_n|² = 1` for population coefficients.
const COEFF_NORM_TOL: f64 = 1e-9;
/// Time samples per period in the maximal-current scan.
pub const SCAN_SAMPLES: usize = 1000;

/// Weight of `|C_n|`-supported Fock states of `mode`, all other modes in vacuum:
/// `P_j = Σ_{C_n ≠ 0} |<n_j, 0...|φ>|²`.
pub fn population<S: Expect + ?Sized>(state: &S, mode: usize, coeffs: &[Complex64]) -> Result<f64> {
    let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > COEFF_NORM_TOL {
        return Err(Error::arg(format!(
            "population coefficients must be normalised (Σ|C_n|² = {norm})"
        )));
    }
    let space = state.space();
    space.check_mode(mode)?;
    let dim = space.mode_dims()[mode];
    let stride = space.stride(mode);
    Ok(coeffs
        .iter()
        .enumerate()
        .take(dim)
        .filter(|(_, c)| c.norm_sqr() > 0.0)
        .map(|(n, _)| state.basis_weight(n * stride))
        .sum())
}

/// Populations of several modes at once.
pub fn populations<S: Expect + ?Sized>(
    state: &S,
    modes: &[usize],
    coeffs: &[Complex64],
) -> Result<Vec<f64>> {
    modes
        .iter()
        .map(|&m| population(state, m, coeffs))
        .collect()
}

/// Two-mode entangled content of a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    /// `{|00>, |11>}`
    Bell,
    /// `{|0N>, |N0>}`
    Noon(usize),
}

/// `C_jk = 2 |<a|φ>_jk| |<b|φ>_jk|` over the pair's two-state support, third mode in vacuum.
pub fn concurrence(state: &Ket, pair: (usize, usize), kind: PairKind) -> Result<f64> {
    let (a, b) = match kind {
        PairKind::Bell => ((0, 0), (1, 1)),
        PairKind::Noon(n) if n > 0 => ((0, n), (n, 0)),
        PairKind::Noon(_) => return Err(Error::arg("NOON order must be at least 1")),
    };
    let x = project_pair(state, pair, a)?;
    let y = project_pair(state, pair, b)?;
    Ok(2.0 * x.norm() * y.norm())
}

/// `Î_kj = i e^{-iφ_kj} m_k m_j† - i e^{iφ_kj} m_k† m_j` for a given hopping phase.
pub fn current_from_phase(
    space: &FockSpace,
    pair: (usize, usize),
    phi_kj: f64,
) -> Result<LinearOp> {
    let (k, j) = pair;
    if k == j {
        return Err(Error::arg("current needs two distinct modes"));
    }
    let forward = annihilation(space, k)?.mul(&creation(space, j)?)?;
    let a = forward.scale(Complex64::from_polar(1.0, -phi_kj) * Complex64::i());
    a.add(&a.adjoint())?.into_hermitian()
}

/// Dimensionless current from mode `k` to mode `j` of a three-mode model.
pub fn current_operator(
    model: &EffectiveModel,
    pair: (usize, usize),
    space: &FockSpace,
) -> Result<LinearOp> {
    current_for_phases(&model.hopping, pair, space)
}

pub fn current_for_phases(
    phases: &HoppingPhases,
    pair: (usize, usize),
    space: &FockSpace,
) -> Result<LinearOp> {
    if space.n_modes() != 3 {
        return Err(Error::Dimension("loop currents need three modes".into()));
    }
    current_from_phase(space, pair, phases.pair(pair.0, pair.1)?)
}

/// `Î = Î_12 + Î_23 + Î_31`.
pub fn circle_current(phases: &HoppingPhases, space: &FockSpace) -> Result<LinearOp> {
    let a = current_for_phases(phases, (0, 1), space)?;
    let b = current_for_phases(phases, (1, 2), space)?;
    let c = current_for_phases(phases, (2, 0), space)?;
    a.add(&b)?.add(&c)?.into_hermitian()
}

/// Maximum of `<Î_23(t)>` over one period `2π/√3` of the unit-coupling compact
/// Hamiltonian, for each loop phase in `phi_grid`.
pub fn max_current_scan(phi_grid: &[f64], spec: &StateSpec) -> Result<Vec<(f64, f64)>> {
    max_current_scan_with(phi_grid, spec, SCAN_SAMPLES)
}

pub fn max_current_scan_with(
    phi_grid: &[f64],
    spec: &StateSpec,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    let space = spec.default_space(3)?;
    max_current_scan_state(phi_grid, &build_state(spec, &space)?, samples)
}

/// [`max_current_scan_with`] for an already prepared three-mode state.
pub fn max_current_scan_state(
    phi_grid: &[f64],
    state: &PreparedState,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    if samples < SCAN_SAMPLES {
        return Err(Error::arg(format!(
            "the scan needs at least {SCAN_SAMPLES} samples"
        )));
    }
    let space = state.space().clone();
    if space.n_modes() != 3 {
        return Err(Error::Dimension(
            "the current scan needs three modes".into(),
        ));
    }
    let period = 2.0 * std::f64::consts::PI / 3f64.sqrt();
    let times: Vec<f64> = (0..samples)
        .map(|i| period * i as f64 / (samples - 1) as f64)
        .collect();
    let f = chiral_root();
    phi_grid
        .par_iter()
        .map(|&flux| {
            let m = compact_matrix(flux, f);
            let dm = nalgebra::DMatrix::from_fn(3, 3, |r, c| m[(r, c)]);
            let h = Hamiltonian::Static(quadratic_form(&space, &dm)?);
            let op = current_for_phases(&HoppingPhases::compact(flux, f), (1, 2), &space)?;
            let trace =
                evolve_ensemble_observe(&h, state, &times, 200, |_, st| Ok(st.expect(&op)?.re))?;
            Ok((flux, trace.into_iter().fold(f64::NEG_INFINITY, f64::max)))
        })
        .collect()
}

/// Populations of the listed modes over time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationTrace {
    pub times: Vec<f64>,
    /// Zero-based modes, one series each.
    pub modes: Vec<usize>,
    /// `values[i][s]`: population of `modes[i]` at `times[s]`.
    pub values: Vec<Vec<f64>>,
}

impl PopulationTrace {
    pub fn new(modes: Vec<usize>) -> Self {
        let values = vec![Vec::new(); modes.len()];
        Self {
            times: Vec::new(),
            modes,
            values,
        }
    }

    pub fn push<S: Expect + ?Sized>(
        &mut self,
        t: f64,
        state: &S,
        coeffs: &[Complex64],
    ) -> Result<()> {
        let p = populations(state, &self.modes, coeffs)?;
        if let Some(bad) = p.iter().find(|&&v| !(-1e-12..=1.0 + 1e-9).contains(&v)) {
            return Err(Error::Integration {
                t,
                reason: format!("population {bad} outside [0, 1]"),
            });
        }
        self.times.push(t);
        for (series, v) in self.values.iter_mut().zip(p) {
            series.push(v);
        }
        Ok(())
    }

    /// Series for a zero-based mode.
    pub fn series(&self, mode: usize) -> Option<&[f64]> {
        self.modes
            .iter()
            .position(|&m| m == mode)
            .map(|i| self.values[i].as_slice())
    }

    /// Largest pointwise difference against another trace on the same grid.
    pub fn max_deviation(&self, other: &Self) -> Result<f64> {
        if self.times.len() != other.times.len() || self.modes != other.modes {
            return Err(Error::arg("traces are not on the same grid"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }
}

/// `<Î_23>` and the circle current over time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurrentTrace {
    pub times: Vec<f64>,
    pub i23: Vec<f64>,
    pub circle: Vec<f64>,
}

impl CurrentTrace {
    /// Standard deviation of the circle current.
    pub fn circle_spread(&self) -> f64 {
        let n = self.circle.len() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let mean = self.circle.iter().sum::<f64>() / n;
        (self.circle.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
    }
}

/// Indices of strict interior local maxima.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .collect()
}

/// First local maximum that exceeds `threshold`, as `(index, value)`.
pub fn first_peak_above(values: &[f64], threshold: f64) -> Option<(usize, f64)> {
    local_maxima(values)
        .into_iter()
        .find(|&i| values[i] > threshold)
        .map(|i| (i, values[i]))
}

/// Maximum of each excursion above `threshold`, as `(index, value)`.
///
/// An excursion starts above `threshold` and ends once the signal falls
/// below half of it, so ripples riding on one excursion, including those
/// that graze the threshold, never split it. An excursion still open at the
/// end of the samples has no resolved peak and is dropped.
pub fn excursion_peaks(values: &[f64], threshold: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut current: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match current {
            Some((_, w)) if v > w => current = Some((i, v)),
            Some(p) if v < 0.5 * threshold => {
                out.push(p);
                current = None;
            }
            Some(_) => {}
            None if v > threshold => current = Some((i, v)),
            None => {}
        }
    }
    out
}

/// Angular frequency in `[w_min, w_max]` with the largest periodogram power.
pub fn dominant_frequency(times: &[f64], values: &[f64], w_min: f64, w_max: f64) -> Result<f64> {
    if times.len() != values.len() || times.len() < 4 {
        return Err(Error::arg("need at least four matched samples"));
    }
    if !(w_min > 0.0 && w_max > w_min) {
        return Err(Error::arg(
            "frequency window must satisfy 0 < w_min < w_max",
        ));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let power = |w: f64| {
        let s: Complex64 = times
            .iter()
            .zip(values)
            .map(|(&t, &v)| Complex64::from_polar(v - mean, -w * t))
            .sum();
        s.norm_sqr()
    };
    let n = 4000;
    let dw = (w_max - w_min) / n as f64;
    let best = (0..=n)
        .map(|i| w_min + dw * i as f64)
        .map(|w| (w, power(w)))
        .fold(
            (w_min, f64::NEG_INFINITY),
            |a, b| if b.1 > a.1 { b } else { a },
        );
    // golden-section refinement inside the winning bin
    let (mut a, mut b) = ((best.0 - dw).max(w_min), (best.0 + dw).min(w_max));
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if power(c) > power(d) {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(0.5 * (a + b))
}

/// Pure-state view used where an observable needs amplitudes.
pub fn pure(state: &PreparedState) -> Result<&Ket> {
    state
        .as_pure()
        .ok_or_else(|| Error::arg("observable needs a pure state"))
}
