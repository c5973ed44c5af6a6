use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{Chirality, EffectiveModel};
use crate::fock::{FockSpace, Ket};
use crate::linalg::hermitian_eigen;
use crate::states::{Ensemble, PreparedState};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Heisenberg-picture mode map: `m_j(t) = Σ_k T_jk m_k(0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub t: f64,
    pub matrix: Matrix3<Complex64>,
}

impl TransferMatrix {
    pub fn unitarity_error(&self) -> f64 {
        (self.matrix * self.matrix.adjoint() - Matrix3::identity())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn to_dmatrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(3, 3, |r, c| self.matrix[(r, c)])
    }
}

/// Real transfer weights `(x, y, z)`; they satisfy `x + y + z = 3` and `x² + y² + z² = 9`.
pub fn transfer_weights(g_eff: f64, t: f64) -> (f64, f64, f64) {
    use std::f64::consts::FRAC_PI_3;
    let th = 3f64.sqrt() * g_eff * t;
    (
        1.0 + 2.0 * th.cos(),
        1.0 - 2.0 * (th + FRAC_PI_3).cos(),
        1.0 - 2.0 * (th - FRAC_PI_3).cos(),
    )
}

/// Closed-form `T(t) = exp(-iMt)` for a chiral model.
pub fn analytic_transfer(model: &EffectiveModel, t: f64) -> Result<TransferMatrix> {
    let (x, y, z) = transfer_weights(model.g_eff, t);
    let f = model.f;
    let e = |phase: f64, w: f64| Complex64::from_polar(w / 3.0, phase);
    let cw = Matrix3::new(
        e(0.0, x),
        e(-f, z),
        e(-f / 2.0, y),
        e(f, y),
        e(0.0, x),
        e(f / 2.0, z),
        e(f / 2.0, z),
        e(-f / 2.0, y),
        e(0.0, x),
    );
    let matrix = match model.chirality {
        Chirality::Clockwise => cw,
        Chirality::Anticlockwise => {
            let p = [0usize, 2, 1];
            Matrix3::from_fn(|r, c| cw[(p[r], p[c])])
        }
        Chirality::None => {
            return Err(Error::Unsupported(
                "closed-form transfer needs a chiral model".into(),
            ))
        }
    };
    Ok(TransferMatrix { t, matrix })
}

/// `exp(-iMt)` for any Hermitian single-particle matrix, by diagonalisation.
pub fn mode_propagator(m: &DMatrix<Complex64>, t: f64) -> Result<DMatrix<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(
            "single-particle matrix must be square".into(),
        ));
    }
    let (e, v) = hermitian_eigen(m)?;
    let phases = DMatrix::from_diagonal(&DVector::from_fn(m.nrows(), |k, _| {
        Complex64::from_polar(1.0, -e[k] * t)
    }));
    Ok(&v * phases * v.adjoint())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Applies a linear mode map to a state: each creation operator `m_k†` is
/// replaced by `Σ_j T_jk m_j†`, which is exact for quadratic generators.
pub fn transform_state(t: &DMatrix<Complex64>, psi0: &Ket) -> Result<Ket> {
    let space = psi0.space();
    let nm = space.n_modes();
    if t.nrows() != nm || t.ncols() != nm {
        return Err(Error::Dimension(format!(
            "{}x{} mode map on {nm} modes",
            t.nrows(),
            t.ncols()
        )));
    }
    let total = space.total_dim();
    let mut result = DVector::from_element(total, C0);
    let mut cur = vec![C0; total];
    let mut next = vec![C0; total];
    let amps = psi0.amplitudes();
    let min_dim = space
        .mode_dims()
        .iter()
        .copied()
        .min()
        .expect("at least one mode");
    for src in 0..total {
        let c = amps[src];
        if c == C0 {
            continue;
        }
        let occ = space.occupations(src);
        let n_tot: usize = occ.iter().sum();
        if n_tot >= min_dim {
            return Err(Error::Truncation {
                what: format!("{n_tot}-excitation component"),
                required: n_tot + 1,
                got: min_dim,
            });
        }
        // polynomial in the m_j†, stored at the index of its exponent vector
        let norm: f64 = occ.iter().map(|&n| factorial(n)).product();
        let mut support = vec![0usize];
        cur[0] = c / norm.sqrt();
        for (k, &nk) in occ.iter().enumerate() {
            for _ in 0..nk {
                let mut grown = Vec::new();
                for &i in &support {
                    let v = cur[i];
                    for j in 0..nm {
                        let target = i + space.stride(j);
                        if next[target] == C0 {
                            grown.push(target);
                        }
                        next[target] += t[(j, k)] * v;
                    }
                    cur[i] = C0;
                }
                grown.sort_unstable();
                grown.dedup();
                std::mem::swap(&mut cur, &mut next);
                support = grown;
            }
        }
        for &i in &support {
            let w: f64 = space.occupations(i).iter().map(|&n| factorial(n)).product();
            result[i] += cur[i] * w.sqrt();
            cur[i] = C0;
        }
    }
    Ket::from_raw(space, result)
}

/// Closed-form evolved state of a chiral model at time `t`.
pub fn analytic_state(model: &EffectiveModel, psi0: &Ket, t: f64) -> Result<Ket> {
    check_three(psi0.space())?;
    transform_state(&analytic_transfer(model, t)?.to_dmatrix(), psi0)
}

/// [`analytic_state`] applied componentwise to a pure state or mixture.
pub fn analytic_prepared(
    model: &EffectiveModel,
    state: &PreparedState,
    t: f64,
) -> Result<PreparedState> {
    let tm = analytic_transfer(model, t)?.to_dmatrix();
    check_three(state.space())?;
    Ok(match state {
        PreparedState::Pure(k) => PreparedState::Pure(transform_state(&tm, k)?),
        PreparedState::Mixed(e) => PreparedState::Mixed(Ensemble {
            components: e
                .components
                .iter()
                .map(|(p, k)| Ok((*p, transform_state(&tm, k)?)))
                .collect::<Result<_>>()?,
        }),
    })
}

fn check_three(space: &FockSpace) -> Result<()> {
    if space.n_modes() != 3 {
        return Err(Error::Dimension(format!(
            "the chiral transfer acts on three modes, space has {}",
            space.n_modes()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{effective_model, DriveParams};
    use std::f64::consts::PI;

    fn model(ch: Chirality) -> EffectiveModel {
        effective_model(&DriveParams::chiral(20.0, ch).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn identity_at_zero() {
        let t = analytic_transfer(&model(Chirality::Clockwise), 0.0).unwrap();
        assert!((t.matrix - Matrix3::identity())
            .iter()
            .all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn weights_satisfy_sum_rules() {
        for i in 0..50 {
            let (x, y, z) = transfer_weights(0.0313, i as f64 * 3.7);
            assert!((x + y + z - 3.0).abs() < 1e-12);
            assert!((x * x + y * y + z * z - 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_is_the_matrix_exponential() {
        for ch in [Chirality::Clockwise, Chirality::Anticlockwise] {
            let m = model(ch);
            let md = DMatrix::from_fn(3, 3, |r, c| m.matrix[(r, c)]);
            for &t in &[0.3, 11.0, 38.6, 97.0] {
                let a = analytic_transfer(&m, t).unwrap().to_dmatrix();
                let b = mode_propagator(&md, t).unwrap();
                assert!((a - b).iter().all(|z| z.norm() < 1e-12), "{ch:?} t={t}");
            }
        }
    }

    #[test]
    fn unsupported_without_chirality() {
        let d =
            DriveParams::new(0.0, 20.0, Chirality::Clockwise.phases().unwrap().to_vec()).unwrap();
        let m = effective_model(&d, 1.0).unwrap();
        assert!(analytic_transfer(&m, 1.0).is_err());
    }

    #[test]
    fn periodic_in_transfer_period() {
        let m = model(Chirality::Clockwise);
        let p = 2.0 * PI / (3f64.sqrt() * m.g_eff);
        let a = analytic_transfer(&m, 5.0).unwrap();
        let b = analytic_transfer(&m, 5.0 + p).unwrap();
        assert!((a.matrix - b.matrix).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn transform_of_single_excitation_reads_a_column() {
        let s = FockSpace::uniform(3, 2).unwrap();
        let m = model(Chirality::Clockwise);
        let t = analytic_transfer(&m, 17.0).unwrap();
        let k = analytic_state(&m, &Ket::basis(&s, &[1, 0, 0]).unwrap(), 17.0).unwrap();
        for j in 0..3 {
            let mut occ = [0; 3];
            occ[j] = 1;
            assert!((k.amplitude(&occ).unwrap() - t.matrix[(j, 0)]).norm() < 1e-15);
        }
    }

    #[test]
    fn too_small_space_is_a_truncation_error() {
        let s = FockSpace::new(vec![3, 2, 2]).unwrap();
        let psi = Ket::basis(&s, &[2, 0, 0]).unwrap();
        let m = model(Chirality::Clockwise);
        assert!(matches!(
            analytic_state(&m, &psi, 1.0),
            Err(Error::Truncation { .. })
        ));
    }
}
