//! Floquet bookkeeping for the periodically driven magnon loop: drive
//! parameters, Jacobi–Anger pair parameters, the second-order effective
//! coefficient matrix and its loop phase.

mod bessel;

use std::f64::consts::{PI, TAU};

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use bessel::{bessel_j, bessel_j_upto};

use crate::error::{Error, Result};

/// Harmonics kept in every Floquet series.
pub const SERIES_NMAX: u32 = 60;
const SERIES_CUTOFF: f64 = 1e-14;
const TRIAD_TOL: f64 = 1e-9;
const ROOT_TOL: f64 = 1e-9;

/// Circulation sense of the drive phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chirality {
    /// Phases `(2π/3, 4π/3, 2π)`.
    Clockwise,
    /// Phases `(2π/3, 2π, 4π/3)`.
    Anticlockwise,
    None,
}

impl Chirality {
    pub fn phases(self) -> Option<[f64; 3]> {
        match self {
            Chirality::Clockwise => Some([TAU / 3.0, 2.0 * TAU / 3.0, TAU]),
            Chirality::Anticlockwise => Some([TAU / 3.0, TAU, 2.0 * TAU / 3.0]),
            Chirality::None => None,
        }
    }

    /// Accepts `cw`, `acw`, `none` and the long names.
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cw" | "clockwise" => Ok(Chirality::Clockwise),
            "acw" | "ccw" | "anticlockwise" => Ok(Chirality::Anticlockwise),
            "none" => Ok(Chirality::None),
            other => Err(Error::arg(format!("unknown chirality `{other}`"))),
        }
    }
}

/// Cosine drive `Δ cos(ωt + φ_k)` on each magnon frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub delta_amp: f64,
    pub omega_drive: f64,
    pub phases: Vec<f64>,
}

impl DriveParams {
    pub fn new(delta_amp: f64, omega_drive: f64, phases: Vec<f64>) -> Result<Self> {
        if !(omega_drive > 0.0 && omega_drive.is_finite()) {
            return Err(Error::arg(format!(
                "drive frequency {omega_drive} must be positive"
            )));
        }
        if !delta_amp.is_finite() {
            return Err(Error::arg("drive amplitude must be finite"));
        }
        if phases.is_empty() || phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::arg("drive phases must be finite and non-empty"));
        }
        Ok(Self {
            delta_amp,
            omega_drive,
            phases,
        })
    }

    /// Drive tuned to `J0(f) = 0` with the given circulation.
    pub fn chiral(omega_drive: f64, chirality: Chirality) -> Result<Self> {
        let phases = chirality
            .phases()
            .ok_or_else(|| Error::arg("a chiral drive needs a circulation sense"))?;
        Self::new(
            chiral_root() * omega_drive / 3f64.sqrt(),
            omega_drive,
            phases.to_vec(),
        )
    }

    pub fn n_modes(&self) -> usize {
        self.phases.len()
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega_drive
    }
}

/// Jacobi–Anger parameters of one magnon pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairParams {
    pub f: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Phase of `g_kj = g e^{-iβ_kj}`.
    pub g_phase: f64,
}

/// Pair parameters for modes `k`, `j` (zero-based).
///
/// `α` is taken on the branch that makes `f sin(ωt + α)` equal
/// `(Δ/ω)[sin(ωt + φ_k) − sin(ωt + φ_j)]` for the signed `f`.
pub fn pair_params(drive: &DriveParams, k: usize, j: usize) -> Result<PairParams> {
    let n = drive.n_modes();
    if k >= n || j >= n || k == j {
        return Err(Error::arg(format!("invalid pair ({k}, {j}) for {n} modes")));
    }
    let (pk, pj) = (drive.phases[k], drive.phases[j]);
    let ratio = drive.delta_amp / drive.omega_drive;
    let f = 2.0 * ratio * (0.5 * (pj - pk)).sin();
    let (ds, dc) = (pk.sin() - pj.sin(), pk.cos() - pj.cos());
    if ds.abs() < 1e-12 && dc.abs() < 1e-12 {
        return Err(Error::UndefinedPhase { k, j });
    }
    let s = if f < 0.0 { -1.0 } else { 1.0 };
    let beta = ratio * ds;
    Ok(PairParams {
        f,
        alpha: (s * ds).atan2(s * dc),
        beta,
        g_phase: -beta,
    })
}

/// Smallest positive zero of `J0`, by bisection on `[2, 3]`.
pub fn chiral_root() -> f64 {
    let (mut lo, mut hi) = (2.0_f64, 3.0_f64);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if bessel_j(0, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `g_eff = (2g²/ω) Σ J_n(f)² sin(nπ/3) / n`.
pub fn g_eff_series(f: f64, g: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::arg("drive frequency must be positive"));
    }
    let j = bessel_j_upto(SERIES_NMAX, f);
    let mut sum = 0.0;
    for n in 1..=SERIES_NMAX as usize {
        let term = j[n] * j[n] / n as f64 * (n as f64 * PI / 3.0).sin();
        sum += term;
        if n % 3 != 0 && term.abs() < SERIES_CUTOFF {
            break;
        }
    }
    Ok(2.0 * g * g / omega * sum)
}

/// Phases of the three hoppings `(1,2)`, `(2,3)`, `(3,1)` in the compact form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoppingPhases {
    pub phi_12: f64,
    pub phi_23: f64,
    pub phi_31: f64,
}

impl HoppingPhases {
    /// Gauge used by the compact matrix: `φ = −Φ/3`, `φ12 = −φ − f`, `φ23 = φ31 = −φ + f/2`.
    pub fn compact(flux: f64, f: f64) -> Self {
        let phi = -flux / 3.0;
        Self {
            phi_12: -phi - f,
            phi_23: -phi + 0.5 * f,
            phi_31: -phi + 0.5 * f,
        }
    }

    /// Phase for an ordered pair, with `φ_kj = −φ_jk`.
    pub fn pair(&self, k: usize, j: usize) -> Result<f64> {
        match (k, j) {
            (0, 1) => Ok(self.phi_12),
            (1, 0) => Ok(-self.phi_12),
            (1, 2) => Ok(self.phi_23),
            (2, 1) => Ok(-self.phi_23),
            (2, 0) => Ok(self.phi_31),
            (0, 2) => Ok(-self.phi_31),
            _ => Err(Error::arg(format!("no hopping between modes {k} and {j}"))),
        }
    }

    pub fn loop_phase(&self) -> f64 {
        wrap_phase(self.phi_12 + self.phi_23 + self.phi_31)
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Coefficient matrix `M` of `H = Σ M_kj m_k† m_j` from phases and a magnitude.
pub fn matrix_from_phases(magnitude: f64, phases: &HoppingPhases) -> Matrix3<Complex64> {
    let e = |x: f64| Complex64::from_polar(magnitude, x);
    let mut m = Matrix3::zeros();
    m[(0, 1)] = e(phases.phi_12);
    m[(1, 0)] = e(-phases.phi_12);
    m[(1, 2)] = e(phases.phi_23);
    m[(2, 1)] = e(-phases.phi_23);
    m[(2, 0)] = e(phases.phi_31);
    m[(0, 2)] = e(-phases.phi_31);
    m
}

/// Unit-magnitude compact coefficient matrix for loop phase `flux`.
pub fn compact_matrix(flux: f64, f: f64) -> Matrix3<Complex64> {
    matrix_from_phases(1.0, &HoppingPhases::compact(flux, f))
}

/// Everything the effective theory derives from a three-mode drive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModel {
    pub g: f64,
    pub omega: f64,
    /// Common Bessel argument `|f_kj|`; the mean magnitude when the triad is not uniform.
    pub f: f64,
    pub g_eff: f64,
    /// Effective coupling `G`.
    pub coupling: Complex64,
    /// `arg G`.
    pub phi: f64,
    /// Closed-loop phase `Φ` in `(−π, π]`.
    pub flux: f64,
    pub hopping: HoppingPhases,
    pub chirality: Chirality,
    /// Second-order coefficient matrix of `H = Σ M_kj m_k† m_j`.
    pub matrix: Matrix3<Complex64>,
}

impl EffectiveModel {
    /// Chiral transfer period `2π/(√3 g_eff)`.
    pub fn transfer_period(&self) -> f64 {
        TAU / (3f64.sqrt() * self.g_eff.abs())
    }

    /// One-third period, the first transfer time `t3`.
    pub fn t3(&self) -> f64 {
        self.transfer_period() / 3.0
    }

    /// Two-thirds period, the second transfer time `t2`.
    pub fn t2(&self) -> f64 {
        2.0 * self.transfer_period() / 3.0
    }
}

enum Triad {
    Clockwise,
    Anticlockwise,
    General,
}

fn classify_triad(phases: &[f64]) -> Triad {
    let d1 = (phases[1] - phases[0]).rem_euclid(TAU);
    let d2 = (phases[2] - phases[0]).rem_euclid(TAU);
    let near = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(TAU);
        d < TRIAD_TOL || TAU - d < TRIAD_TOL
    };
    if near(d1, TAU / 3.0) && near(d2, 2.0 * TAU / 3.0) {
        Triad::Clockwise
    } else if near(d1, 2.0 * TAU / 3.0) && near(d2, TAU / 3.0) {
        Triad::Anticlockwise
    } else {
        Triad::General
    }
}

/// Single-particle matrices `h_n` of the Fourier components `H_n`.
fn harmonic_matrices(drive: &DriveParams, g: f64) -> Result<Vec<Matrix3<Complex64>>> {
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let mut h = vec![Matrix3::<Complex64>::zeros(); SERIES_NMAX as usize + 1];
    for &(k, j) in &pairs {
        let p = pair_params(drive, k, j)?;
        let bessel = bessel_j_upto(SERIES_NMAX, p.f);
        let gkj = Complex64::from_polar(g, p.g_phase);
        for (n, hn) in h.iter_mut().enumerate() {
            let rot = Complex64::from_polar(1.0, n as f64 * p.alpha);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            hn[(k, j)] += gkj * bessel[n] * rot;
            hn[(j, k)] += gkj.conj() * (sign * bessel[n]) * rot;
        }
    }
    Ok(h)
}

/// Second-order effective matrix `h_0 + Σ_n [h_n, h_n†] / (nω)`.
pub fn second_order_matrix(drive: &DriveParams, g: f64) -> Result<Matrix3<Complex64>> {
    if drive.n_modes() != 3 {
        return Err(Error::Unsupported(format!(
            "effective theory is built for three modes, got {}",
            drive.n_modes()
        )));
    }
    let h = harmonic_matrices(drive, g)?;
    let mut m = h[0];
    for (n, hn) in h.iter().enumerate().skip(1) {
        let hm = hn.adjoint();
        m += (hn * hm - hm * hn) / Complex64::new(n as f64 * drive.omega_drive, 0.0);
    }
    Ok((m + m.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Fills an [`EffectiveModel`] from the drive; only three modes are supported.
pub fn effective_model(drive: &DriveParams, g: f64) -> Result<EffectiveModel> {
    let matrix = second_order_matrix(drive, g)?;
    let fs = [
        pair_params(drive, 0, 1)?.f.abs(),
        pair_params(drive, 0, 2)?.f.abs(),
        pair_params(drive, 1, 2)?.f.abs(),
    ];
    let hopping = HoppingPhases {
        phi_12: matrix[(0, 1)].arg(),
        phi_23: matrix[(1, 2)].arg(),
        phi_31: matrix[(2, 0)].arg(),
    };
    let flux = hopping.loop_phase();
    let triad = classify_triad(&drive.phases);
    let (f, g_eff, coupling, chirality) = match triad {
        Triad::Clockwise | Triad::Anticlockwise => {
            let f = fs[0];
            let g_eff = g_eff_series(f, g, drive.omega_drive)?;
            let j0 = bessel_j(0, f);
            let (sign, chiral) = match triad {
                Triad::Clockwise => (1.0, Chirality::Clockwise),
                _ => (-1.0, Chirality::Anticlockwise),
            };
            let chirality = if drive.delta_amp != 0.0 && j0.abs() < ROOT_TOL {
                chiral
            } else {
                Chirality::None
            };
            (f, g_eff, Complex64::new(g * j0, sign * g_eff), chirality)
        }
        Triad::General => {
            let mag =
                (matrix[(0, 1)].norm() * matrix[(1, 2)].norm() * matrix[(2, 0)].norm()).cbrt();
            let coupling = Complex64::from_polar(mag, -flux / 3.0);
            (
                fs.iter().sum::<f64>() / 3.0,
                coupling.im,
                coupling,
                Chirality::None,
            )
        }
    };
    Ok(EffectiveModel {
        g,
        omega: drive.omega_drive,
        f,
        g_eff,
        coupling,
        phi: coupling.arg(),
        flux,
        hopping,
        chirality,
        matrix,
    })
}

/// The model's coefficient matrix.
pub fn coefficient_matrix(model: &EffectiveModel) -> Matrix3<Complex64> {
    model.matrix
}

/// Scale estimates for the second- and third-order terms of the expansion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corrections {
    pub second_order: f64,
    pub third_order_bound: f64,
}

pub fn correction_magnitudes(drive: &DriveParams, g: f64) -> Result<Corrections> {
    let model = effective_model(drive, g)?;
    let j = bessel_j_upto(SERIES_NMAX, model.f);
    let mut sum = 0.0;
    for n in 1..20usize {
        for m in 1..=(20 - n) {
            sum += (j[n] * j[m] * j[n + m]).abs() / (n + m) as f64;
        }
    }
    let w = drive.omega_drive;
    Ok(Corrections {
        second_order: model.g_eff.abs(),
        third_order_bound: g.abs().powi(3) / (w * w) * sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cw(delta: f64, omega: f64) -> DriveParams {
        DriveParams::new(
            delta,
            omega,
            Chirality::Clockwise.phases().unwrap().to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn root_is_a_zero_of_j0() {
        let r = chiral_root();
        assert!(bessel_j(0, r).abs() <= 1e-12);
        assert!((r - 2.404_825_557_695_77).abs() < 1e-13);
    }

    #[test]
    fn paper_pair_parameters() {
        let d = cw(10.0, 20.0);
        let f = 3f64.sqrt() * 10.0 / 20.0;
        let p12 = pair_params(&d, 0, 1).unwrap();
        let p13 = pair_params(&d, 0, 2).unwrap();
        let p23 = pair_params(&d, 1, 2).unwrap();
        for p in [p12, p13, p23] {
            assert!((p.f - f).abs() < 1e-14);
        }
        assert!((p12.alpha - PI / 2.0).abs() < 1e-12);
        assert!((p13.alpha - 5.0 * PI / 6.0).abs() < 1e-12);
        assert!((wrap_phase(p23.alpha - 7.0 * PI / 6.0)).abs() < 1e-12);
        assert!((p12.beta - f).abs() < 1e-12);
        assert!((p23.beta + f / 2.0).abs() < 1e-12);
        assert!((p13.beta - f / 2.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_phases_are_undefined() {
        let d = DriveParams::new(1.0, 20.0, vec![0.3, 0.3, 1.0]).unwrap();
        assert!(matches!(
            pair_params(&d, 0, 1),
            Err(Error::UndefinedPhase { k: 0, j: 1 })
        ));
    }

    #[test]
    fn g_eff_vanishes_without_drive() {
        assert_eq!(g_eff_series(0.0, 1.0, 20.0).unwrap(), 0.0);
        assert!(g_eff_series(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_drive_is_real_symmetric() {
        let m = effective_model(&cw(0.0, 20.0), 1.0).unwrap();
        assert!((m.coupling - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(m.flux.abs() < 1e-14);
        assert_eq!(m.chirality, Chirality::None);
    }

    #[test]
    fn four_modes_are_refused() {
        let d = DriveParams::new(1.0, 20.0, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            effective_model(&d, 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn compact_phases_sum_to_flux() {
        for flux in [-2.0, 0.0, 0.7, PI / 2.0, 3.0] {
            let h = HoppingPhases::compact(flux, 2.4);
            assert!((wrap_phase(h.loop_phase() - flux)).abs() < 1e-12);
        }
    }

    #[test]
    fn chirality_parsing() {
        assert_eq!(Chirality::parse("cw").unwrap(), Chirality::Clockwise);
        assert_eq!(Chirality::parse("ACW").unwrap(), Chirality::Anticlockwise);
        assert!(Chirality::parse("up").is_err());
    }
}
