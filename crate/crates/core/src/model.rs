//! Hamiltonian builders: the cavity-magnon model, its dispersive reduction,
//! the Floquet drive and the effective chiral, error and Kerr variants.
//!
//! Cavity builders put the photon in mode 0 and magnons after it; all other
//! builders act on magnon-only spaces.

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{DriveParams, EffectiveModel};
use crate::fock::{annihilation, creation, number, FockSpace, LinearOp};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Parameters of the photon plus `n_magnons` magnon model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityModelParams {
    pub omega_a: f64,
    pub omega_m: f64,
    pub g_am: f64,
    pub n_magnons: usize,
    /// Per-magnon multipliers of `g_am`; all ones for identical spheres.
    pub coupling_scales: Vec<f64>,
}

impl CavityModelParams {
    pub fn new(omega_a: f64, omega_m: f64, g_am: f64, n_magnons: usize) -> Result<Self> {
        if !(g_am > 0.0) {
            return Err(Error::arg("photon-magnon coupling must be positive"));
        }
        if n_magnons == 0 {
            return Err(Error::arg("at least one magnon mode is needed"));
        }
        Ok(Self {
            omega_a,
            omega_m,
            g_am,
            n_magnons,
            coupling_scales: vec![1.0; n_magnons],
        })
    }

    /// Unequal couplings `g_am·(1, 1+δ, 1−δ)` for three magnons.
    pub fn with_coupling_error(mut self, delta: f64) -> Result<Self> {
        if self.n_magnons != 3 {
            return Err(Error::arg(
                "coupling asymmetry is defined for three magnons",
            ));
        }
        ErrorParams::new(delta, 0.0)?;
        self.coupling_scales = vec![1.0, 1.0 + delta, 1.0 - delta];
        Ok(self)
    }

    /// Signed dispersive hopping `g_am² / (ω_m − ω_a)`.
    pub fn dispersive_coupling(&self) -> Result<f64> {
        let detuning = self.omega_m - self.omega_a;
        if detuning == 0.0 {
            return Err(Error::arg("dispersive coupling needs a nonzero detuning"));
        }
        Ok(self.g_am * self.g_am / detuning)
    }

    fn check_space(&self, space: &FockSpace) -> Result<()> {
        if space.n_modes() != self.n_magnons + 1 {
            return Err(Error::Dimension(format!(
                "cavity model with {} magnons needs {} modes, space has {}",
                self.n_magnons,
                self.n_magnons + 1,
                space.n_modes()
            )));
        }
        if self.coupling_scales.len() != self.n_magnons {
            return Err(Error::arg("one coupling scale per magnon is required"));
        }
        Ok(())
    }
}

/// Systematic error knobs: coupling asymmetry `δ` and Kerr coefficient `K`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorParams {
    pub delta: f64,
    pub kerr: f64,
}

impl ErrorParams {
    pub fn new(delta: f64, kerr: f64) -> Result<Self> {
        if !(delta.abs() < 1.0) {
            return Err(Error::arg(format!(
                "coupling asymmetry {delta} must satisfy |δ| < 1"
            )));
        }
        if !kerr.is_finite() {
            return Err(Error::arg("Kerr coefficient must be finite"));
        }
        Ok(Self { delta, kerr })
    }
}

/// `Σ_kj M_kj m_k† m_j` over the first `M.nrows()` modes.
pub fn quadratic_form(space: &FockSpace, m: &DMatrix<Complex64>) -> Result<LinearOp> {
    if m.nrows() != m.ncols() || m.nrows() > space.n_modes() {
        return Err(Error::Dimension(format!(
            "{}x{} coefficient matrix on {} modes",
            m.nrows(),
            m.ncols(),
            space.n_modes()
        )));
    }
    let mut h = LinearOp::zeros(space);
    for k in 0..m.nrows() {
        let ck = creation(space, k)?;
        for j in 0..m.ncols() {
            if m[(k, j)] != c(0.0) {
                let term = ck.mul(&annihilation(space, j)?)?.scale(m[(k, j)]);
                h = h.add(&term)?;
            }
        }
    }
    Ok(h)
}

fn matrix3_to_dynamic(m: &Matrix3<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(3, 3, |r, col| m[(r, col)])
}

fn require_three_modes(space: &FockSpace) -> Result<()> {
    if space.n_modes() != 3 {
        return Err(Error::Dimension(format!(
            "three magnon modes required, space has {}",
            space.n_modes()
        )));
    }
    Ok(())
}

/// Photon plus magnons in the rotating-wave approximation.
pub fn full_cavity_magnon(params: &CavityModelParams, space: &FockSpace) -> Result<LinearOp> {
    params.check_space(space)?;
    let a = annihilation(space, 0)?;
    let mut h = number(space, 0)?.scale_real(params.omega_a);
    for k in 1..=params.n_magnons {
        let g = params.g_am * params.coupling_scales[k - 1];
        h = h.add(&number(space, k)?.scale_real(params.omega_m))?;
        let hop = a.mul(&creation(space, k)?)?;
        h = h.add(&hop.add(&hop.adjoint())?.scale_real(g))?;
    }
    h.into_hermitian()
}

/// Photon plus magnons with counter-rotating terms `g (a + a†)(m + m†)`.
pub fn full_with_counter_rotating(
    params: &CavityModelParams,
    space: &FockSpace,
) -> Result<LinearOp> {
    params.check_space(space)?;
    let x_a = annihilation(space, 0)?.add(&creation(space, 0)?)?;
    let mut h = number(space, 0)?.scale_real(params.omega_a);
    for k in 1..=params.n_magnons {
        let g = params.g_am * params.coupling_scales[k - 1];
        h = h.add(&number(space, k)?.scale_real(params.omega_m))?;
        let x_m = annihilation(space, k)?.add(&creation(space, k)?)?;
        h = h.add(&x_a.mul(&x_m)?.scale_real(g))?;
    }
    h.into_hermitian()
}

/// All-to-all hopping `g Σ_{k<j} (m_k m_j† + h.c.)` on every mode of the space.
pub fn effective_static(g: f64, space: &FockSpace) -> Result<LinearOp> {
    let n = space.n_modes();
    let m = DMatrix::from_fn(n, n, |r, col| if r == col { c(0.0) } else { c(g) });
    quadratic_form(space, &m)?.into_hermitian()
}

/// Effective chiral Hamiltonian whose single-excitation block is `model.matrix`.
pub fn chiral_effective(model: &EffectiveModel, space: &FockSpace) -> Result<LinearOp> {
    require_three_modes(space)?;
    quadratic_form(space, &matrix3_to_dynamic(&model.matrix))?.into_hermitian()
}

/// Coefficient matrix with hoppings (1,2), (1,3), (2,3) scaled by `1−δ²`, `1+δ`, `1−δ`.
pub fn error_matrix(model: &EffectiveModel, delta: f64) -> Result<Matrix3<Complex64>> {
    ErrorParams::new(delta, 0.0)?;
    let mut m = model.matrix;
    for (k, j, s) in [
        (0, 1, 1.0 - delta * delta),
        (0, 2, 1.0 + delta),
        (1, 2, 1.0 - delta),
    ] {
        m[(k, j)] *= s;
        m[(j, k)] *= s;
    }
    Ok(m)
}

/// Effective chiral Hamiltonian with unequal photon-magnon couplings.
pub fn error_effective(model: &EffectiveModel, delta: f64, space: &FockSpace) -> Result<LinearOp> {
    require_three_modes(space)?;
    quadratic_form(space, &matrix3_to_dynamic(&error_matrix(model, delta)?))?.into_hermitian()
}

/// `K Σ_k n_k²`.
pub fn kerr_term(kerr: f64, space: &FockSpace) -> LinearOp {
    let diag: Vec<f64> = (0..space.total_dim())
        .map(|i| {
            kerr * (0..space.n_modes())
                .map(|k| (space.occupation(i, k) as f64).powi(2))
                .sum::<f64>()
        })
        .collect();
    LinearOp::diagonal(space, &diag).expect("length matches")
}

/// Static hopping plus Kerr nonlinearity.
pub fn kerr_hamiltonian(g: f64, kerr: f64, space: &FockSpace) -> Result<LinearOp> {
    effective_static(g, space)?.add(&kerr_term(kerr, space))
}

/// One cosine modulation `A cos(ωt + φ)` of a mode's number operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalDrive {
    pub mode: usize,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

impl DiagonalDrive {
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t + self.phase).cos()
    }

    /// `∫_0^t A cos(ωs + φ) ds`.
    pub fn integral(&self, t: f64) -> f64 {
        self.amplitude / self.omega * ((self.omega * t + self.phase).sin() - self.phase.sin())
    }
}

/// Static operator plus diagonal cosine drives; `at(t)` assembles the full operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DrivenHamiltonian {
    static_part: LinearOp,
    drives: Vec<DiagonalDrive>,
}

impl DrivenHamiltonian {
    pub fn new(static_part: LinearOp, drives: Vec<DiagonalDrive>) -> Result<Self> {
        let space = static_part.space().clone();
        for d in &drives {
            space.check_mode(d.mode)?;
            if !(d.omega > 0.0) {
                return Err(Error::arg("drive frequency must be positive"));
            }
        }
        Ok(Self {
            static_part: static_part.into_hermitian()?,
            drives,
        })
    }

    pub fn space(&self) -> &FockSpace {
        self.static_part.space()
    }

    pub fn static_part(&self) -> &LinearOp {
        &self.static_part
    }

    pub fn drives(&self) -> &[DiagonalDrive] {
        &self.drives
    }

    /// Shortest drive period.
    pub fn period(&self) -> Option<f64> {
        self.drives
            .iter()
            .map(|d| std::f64::consts::TAU / d.omega)
            .reduce(f64::min)
    }

    /// Adds a time-independent term.
    pub fn with_static(&self, extra: &LinearOp) -> Result<Self> {
        Self::new(self.static_part.add(extra)?, self.drives.clone())
    }

    /// Diagonal of the drive part at time `t`.
    pub fn drive_diagonal(&self, t: f64) -> Vec<f64> {
        let space = self.space();
        let values: Vec<(usize, f64)> = self.drives.iter().map(|d| (d.mode, d.value(t))).collect();
        (0..space.total_dim())
            .map(|i| {
                values
                    .iter()
                    .map(|&(k, v)| v * space.occupation(i, k) as f64)
                    .sum()
            })
            .collect()
    }

    pub fn at(&self, t: f64) -> LinearOp {
        let diag = LinearOp::diagonal(self.space(), &self.drive_diagonal(t)).expect("same space");
        self.static_part.add(&diag).expect("same space")
    }
}

/// Time-independent or periodically driven generator.
#[derive(Clone, Debug, PartialEq)]
pub enum Hamiltonian {
    Static(LinearOp),
    Driven(DrivenHamiltonian),
}

impl Hamiltonian {
    pub fn space(&self) -> &FockSpace {
        match self {
            Hamiltonian::Static(h) => h.space(),
            Hamiltonian::Driven(h) => h.space(),
        }
    }

    pub fn at(&self, t: f64) -> LinearOp {
        match self {
            Hamiltonian::Static(h) => h.clone(),
            Hamiltonian::Driven(h) => h.at(t),
        }
    }

    /// Time-independent part (the whole operator when static).
    pub fn static_part(&self) -> &LinearOp {
        match self {
            Hamiltonian::Static(h) => h,
            Hamiltonian::Driven(h) => h.static_part(),
        }
    }

    pub fn drives(&self) -> &[DiagonalDrive] {
        match self {
            Hamiltonian::Static(_) => &[],
            Hamiltonian::Driven(h) => h.drives(),
        }
    }

    pub fn conserves_excitation(&self) -> bool {
        self.static_part().conserves_excitation()
    }

    pub fn with_static(&self, extra: &LinearOp) -> Result<Self> {
        Ok(match self {
            Hamiltonian::Static(h) => Hamiltonian::Static(h.add(extra)?.into_hermitian()?),
            Hamiltonian::Driven(h) => Hamiltonian::Driven(h.with_static(extra)?),
        })
    }
}

impl From<LinearOp> for Hamiltonian {
    fn from(h: LinearOp) -> Self {
        Hamiltonian::Static(h)
    }
}

impl From<DrivenHamiltonian> for Hamiltonian {
    fn from(h: DrivenHamiltonian) -> Self {
        Hamiltonian::Driven(h)
    }
}

/// Magnon loop under `Δ Σ cos(ωt + φ_k) n_k + g Σ_{k<j}(m_k m_j† + h.c.)`.
pub fn floquet_drive(drive: &DriveParams, g: f64, space: &FockSpace) -> Result<DrivenHamiltonian> {
    if space.n_modes() != drive.n_modes() {
        return Err(Error::Dimension(format!(
            "drive has {} phases, space has {} modes",
            drive.n_modes(),
            space.n_modes()
        )));
    }
    let drives = drive
        .phases
        .iter()
        .enumerate()
        .map(|(mode, &phase)| DiagonalDrive {
            mode,
            amplitude: drive.delta_amp,
            omega: drive.omega_drive,
            phase,
        })
        .collect();
    DrivenHamiltonian::new(effective_static(g, space)?, drives)
}

/// The driven Hamiltonian evaluated at time `t`.
pub fn floquet_drive_hamiltonian(
    drive: &DriveParams,
    g: f64,
    space: &FockSpace,
    t: f64,
) -> Result<LinearOp> {
    floquet_drive(drive, g, space)?.at(t).into_hermitian()
}
