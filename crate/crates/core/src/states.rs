//! Initial states: Fock, coherent, cat, thermal, arbitrary single-mode
//! superpositions, and Bell or NOON pairs.
//!
//! Truncation is never renormalised away. A state whose weight beyond the
//! truncation reaches 1e-10 is rejected with the dimension it needs.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Expect, FockSpace, Ket, LinearOp};

/// Largest tolerated weight outside the truncated basis.
pub const TAIL_TOL: f64 = 1e-10;
const MAX_SEARCH_DIM: usize = 400;

/// What to prepare.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateKind {
    Fock {
        n: usize,
    },
    Coherent {
        #[serde(deserialize_with = "scalar_or_pair")]
        beta: Complex64,
    },
    Cat {
        #[serde(deserialize_with = "scalar_or_pair")]
        zeta: Complex64,
    },
    Thermal {
        nbar: f64,
    },
    /// Amplitudes `C_n` of `Σ C_n |n>` on one mode.
    Superposition {
        #[serde(deserialize_with = "scalars_or_pairs")]
        coeffs: Vec<Complex64>,
    },
    Bell,
    Noon {
        n: usize,
    },
}

/// Config files may write a real amplitude as `1.0` instead of `[1.0, 0.0]`.
#[derive(Deserialize)]
#[serde(untagged)]
enum ComplexInput {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexInput> for Complex64 {
    fn from(c: ComplexInput) -> Self {
        match c {
            ComplexInput::Real(re) => Complex64::new(re, 0.0),
            ComplexInput::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

fn scalar_or_pair<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Complex64, D::Error> {
    ComplexInput::deserialize(d).map(Into::into)
}

fn scalars_or_pairs<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Vec<Complex64>, D::Error> {
    Vec::<ComplexInput>::deserialize(d).map(|v| v.into_iter().map(Into::into).collect())
}

/// Target modes: one mode for single-mode kinds, a pair for Bell and NOON.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetModes {
    Single(usize),
    Pair(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    #[serde(flatten)]
    pub kind: StateKind,
    pub modes: TargetModes,
}

impl StateSpec {
    pub fn single(kind: StateKind, mode: usize) -> Self {
        Self {
            kind,
            modes: TargetModes::Single(mode),
        }
    }

    pub fn fock(n: usize) -> Self {
        Self::single(StateKind::Fock { n }, 0)
    }

    pub fn coherent(beta: f64) -> Self {
        Self::single(
            StateKind::Coherent {
                beta: Complex64::new(beta, 0.0),
            },
            0,
        )
    }

    pub fn cat(zeta: f64) -> Self {
        Self::single(
            StateKind::Cat {
                zeta: Complex64::new(zeta, 0.0),
            },
            0,
        )
    }

    pub fn thermal(nbar: f64) -> Self {
        Self::single(StateKind::Thermal { nbar }, 0)
    }

    pub fn bell(j: usize, k: usize) -> Self {
        Self {
            kind: StateKind::Bell,
            modes: TargetModes::Pair(j, k),
        }
    }

    pub fn noon(n: usize, j: usize, k: usize) -> Self {
        Self {
            kind: StateKind::Noon { n },
            modes: TargetModes::Pair(j, k),
        }
    }

    /// `(1/√3) Σ_{n=1..3} |n>` on mode 0.
    pub fn equal_superposition_123() -> Self {
        let a = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
        Self::single(
            StateKind::Superposition {
                coeffs: vec![Complex64::new(0.0, 0.0), a, a, a],
            },
            0,
        )
    }

    pub fn is_pair(&self) -> bool {
        matches!(self.kind, StateKind::Bell | StateKind::Noon { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.kind, self.modes) {
            (StateKind::Bell | StateKind::Noon { .. }, TargetModes::Pair(j, k)) if j != k => {}
            (StateKind::Bell | StateKind::Noon { .. }, _) => {
                return Err(Error::arg("Bell and NOON states need two distinct modes"))
            }
            (_, TargetModes::Single(_)) => {}
            (_, TargetModes::Pair(..)) => {
                return Err(Error::arg("single-mode states take one target mode"))
            }
        }
        match &self.kind {
            StateKind::Thermal { nbar } if !(*nbar >= 0.0 && nbar.is_finite()) => Err(Error::arg(
                "thermal occupation must be finite and non-negative",
            )),
            StateKind::Noon { n } if *n == 0 => Err(Error::arg("NOON order must be at least 1")),
            StateKind::Superposition { coeffs } => {
                let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
                if (norm - 1.0).abs() > 1e-12 {
                    Err(Error::arg(format!(
                        "superposition coefficients have norm² {norm}"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Single-mode Fock weights `p_n` for `n < dim` (pair kinds: the total-excitation profile).
    pub fn fock_weights(&self, dim: usize) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match &self.kind {
            StateKind::Thermal { nbar } => thermal_weights(*nbar, dim),
            StateKind::Bell | StateKind::Noon { .. } => {
                let n = self.max_excitation().expect("pair kinds are finite");
                (0..dim)
                    .map(|k| if k == 0 || k == n { 0.5 } else { 0.0 })
                    .collect()
            }
            _ => self
                .pure_amplitudes(dim)?
                .iter()
                .map(|c| c.norm_sqr())
                .collect(),
        })
    }

    /// Initial-state coefficients `C_n` used by population measures.
    ///
    /// Thermal states use `√p_n`, which gives the same `|C_n|²` weights.
    pub fn population_coefficients(&self, dim: usize) -> Result<Vec<Complex64>> {
        self.validate()?;
        match &self.kind {
            StateKind::Thermal { nbar } => Ok(thermal_weights(*nbar, dim)
                .into_iter()
                .map(|p| Complex64::new(p.sqrt(), 0.0))
                .collect()),
            StateKind::Bell | StateKind::Noon { .. } => Err(Error::arg(
                "population coefficients are defined for single-mode states",
            )),
            _ => self.pure_amplitudes(dim),
        }
    }

    fn pure_amplitudes(&self, dim: usize) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        match &self.kind {
            StateKind::Fock { n } => {
                if *n >= dim {
                    return Err(truncation(self, *n + 1, dim));
                }
                out[*n] = Complex64::new(1.0, 0.0);
            }
            StateKind::Coherent { beta } => {
                let pref = (-0.5 * beta.norm_sqr()).exp();
                let mut term = Complex64::new(pref, 0.0);
                for (n, o) in out.iter_mut().enumerate() {
                    if n > 0 {
                        term *= beta / (n as f64).sqrt();
                    }
                    *o = term;
                }
            }
            StateKind::Cat { zeta } => {
                let r2 = zeta.norm_sqr();
                let norm = (2.0 + 2.0 * (-2.0 * r2).exp()).sqrt();
                let mut term = Complex64::new((-0.5 * r2).exp(), 0.0);
                for (n, o) in out.iter_mut().enumerate() {
                    if n > 0 {
                        term *= zeta / (n as f64).sqrt();
                    }
                    if n % 2 == 0 {
                        *o = term * 2.0 / norm;
                    }
                }
            }
            StateKind::Superposition { coeffs } => {
                let top = coeffs.iter().rposition(|c| c.norm_sqr() > 0.0).unwrap_or(0);
                if top >= dim {
                    return Err(truncation(self, top + 1, dim));
                }
                out[..coeffs.len().min(dim)].copy_from_slice(&coeffs[..coeffs.len().min(dim)]);
            }
            StateKind::Thermal { .. } | StateKind::Bell | StateKind::Noon { .. } => {
                return Err(Error::arg("not a pure single-mode state"))
            }
        }
        Ok(out)
    }

    /// Largest excitation number with nonzero weight, when finite.
    pub fn max_excitation(&self) -> Option<usize> {
        match &self.kind {
            StateKind::Fock { n } => Some(*n),
            StateKind::Bell => Some(2),
            StateKind::Noon { n } => Some(*n),
            StateKind::Superposition { coeffs } => {
                Some(coeffs.iter().rposition(|c| c.norm_sqr() > 0.0).unwrap_or(0))
            }
            StateKind::Coherent { beta } if beta.norm_sqr() == 0.0 => Some(0),
            StateKind::Cat { zeta } if zeta.norm_sqr() == 0.0 => Some(0),
            StateKind::Thermal { nbar } if *nbar == 0.0 => Some(0),
            _ => None,
        }
    }

    /// Smallest per-mode dimension with tail weight below [`TAIL_TOL`].
    ///
    /// Every mode gets this dimension because excitation-conserving dynamics
    /// can move the full excitation into any single mode.
    pub fn required_dim(&self) -> Result<usize> {
        self.validate()?;
        if let Some(n) = self.max_excitation() {
            return Ok((n + 1).max(2));
        }
        for d in 2..MAX_SEARCH_DIM {
            let w = self.fock_weights(d)?;
            if 1.0 - w.iter().sum::<f64>() < TAIL_TOL {
                return Ok(d);
            }
        }
        Err(Error::arg("state needs an unreasonably large truncation"))
    }

    /// Uniform default space for the given mode count.
    pub fn default_space(&self, n_modes: usize) -> Result<FockSpace> {
        FockSpace::uniform(n_modes, self.required_dim()?)
    }

    /// Closed-form mean excitation.
    pub fn mean_excitation(&self) -> f64 {
        match &self.kind {
            StateKind::Fock { n } => *n as f64,
            StateKind::Coherent { beta } => beta.norm_sqr(),
            StateKind::Cat { zeta } => {
                let r2 = zeta.norm_sqr();
                r2 * (1.0 - (-2.0 * r2).exp()) / (1.0 + (-2.0 * r2).exp())
            }
            StateKind::Thermal { nbar } => *nbar,
            StateKind::Superposition { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(n, c)| n as f64 * c.norm_sqr())
                .sum(),
            StateKind::Bell => 1.0,
            StateKind::Noon { n } => *n as f64,
        }
    }
}

fn truncation(spec: &StateSpec, required: usize, got: usize) -> Error {
    Error::Truncation {
        what: format!("{:?}", spec.kind),
        required,
        got,
    }
}

fn thermal_weights(nbar: f64, dim: usize) -> Vec<f64> {
    let q = nbar / (1.0 + nbar);
    let mut p = 1.0 / (1.0 + nbar);
    (0..dim)
        .map(|_| {
            let v = p;
            p *= q;
            v
        })
        .collect()
}

/// Incoherent mixture `Σ_i p_i |ψ_i><ψ_i|` kept in factored form.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub components: Vec<(f64, Ket)>,
}

impl Ensemble {
    pub fn space(&self) -> &FockSpace {
        self.components[0].1.space()
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|(p, _)| p).sum()
    }

    /// Dense density matrix; only sensible for small spaces.
    pub fn to_density(&self) -> Result<crate::fock::DensityOp> {
        let space = self.space();
        let n = space.total_dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for (p, k) in &self.components {
            let a = k.amplitudes();
            m += a * a.adjoint() * Complex64::new(*p, 0.0);
        }
        crate::fock::DensityOp::new(space, m)
    }
}

impl Expect for Ensemble {
    fn space(&self) -> &FockSpace {
        Ensemble::space(self)
    }

    fn expect(&self, op: &LinearOp) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, k) in &self.components {
            acc += k.expect(op)? * *p;
        }
        Ok(acc)
    }

    fn basis_weight(&self, index: usize) -> f64 {
        self.components
            .iter()
            .map(|(p, k)| p * k.basis_weight(index))
            .sum()
    }
}

/// Output of [`build_state`]: a ket, or a factored mixture for thermal states.
#[derive(Clone, Debug, PartialEq)]
pub enum PreparedState {
    Pure(Ket),
    Mixed(Ensemble),
}

impl PreparedState {
    pub fn space(&self) -> &FockSpace {
        match self {
            PreparedState::Pure(k) => k.space(),
            PreparedState::Mixed(e) => e.space(),
        }
    }

    pub fn as_pure(&self) -> Option<&Ket> {
        match self {
            PreparedState::Pure(k) => Some(k),
            PreparedState::Mixed(_) => None,
        }
    }

    /// Components with weights; a pure state is one component of weight 1.
    pub fn components(&self) -> Vec<(f64, Ket)> {
        match self {
            PreparedState::Pure(k) => vec![(1.0, k.clone())],
            PreparedState::Mixed(e) => e.components.clone(),
        }
    }
}

impl Expect for PreparedState {
    fn space(&self) -> &FockSpace {
        PreparedState::space(self)
    }

    fn expect(&self, op: &LinearOp) -> Result<Complex64> {
        match self {
            PreparedState::Pure(k) => k.expect(op),
            PreparedState::Mixed(e) => e.expect(op),
        }
    }

    fn basis_weight(&self, index: usize) -> f64 {
        match self {
            PreparedState::Pure(k) => k.basis_weight(index),
            PreparedState::Mixed(e) => e.basis_weight(index),
        }
    }
}

fn check_tail(spec: &StateSpec, space: &FockSpace, weights: &[f64]) -> Result<()> {
    let tail = 1.0 - weights.iter().sum::<f64>();
    if tail >= TAIL_TOL {
        return Err(truncation(spec, spec.required_dim()?, weights.len()));
    }
    // excitation-conserving dynamics can pile everything into one mode
    let need = spec.required_dim()?;
    if let Some(&d) = space.mode_dims().iter().find(|&&d| d < need) {
        return Err(truncation(spec, need, d));
    }
    Ok(())
}

/// Prepares `spec` on `space`, other modes in vacuum.
pub fn build_state(spec: &StateSpec, space: &FockSpace) -> Result<PreparedState> {
    spec.validate()?;
    if spec.is_pair() {
        let (j, k) = match spec.modes {
            TargetModes::Pair(j, k) => (j, k),
            TargetModes::Single(_) => unreachable!("validated"),
        };
        return build_entangled_pair(&spec.kind, (j, k), space).map(PreparedState::Pure);
    }
    let mode = match spec.modes {
        TargetModes::Single(m) => m,
        TargetModes::Pair(..) => unreachable!("validated"),
    };
    space.check_mode(mode)?;
    let dim = space.mode_dims()[mode];
    let weights = spec.fock_weights(dim)?;
    check_tail(spec, space, &weights)?;
    let stride = space.stride(mode);
    match &spec.kind {
        StateKind::Thermal { .. } => {
            let components = weights
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(n, &p)| {
                    let mut occ = vec![0; space.n_modes()];
                    occ[mode] = n;
                    Ok((p, Ket::basis(space, &occ)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PreparedState::Mixed(Ensemble { components }))
        }
        _ => {
            let amps = spec.pure_amplitudes(dim)?;
            let mut v = DVector::zeros(space.total_dim());
            for (n, a) in amps.into_iter().enumerate() {
                v[n * stride] = a;
            }
            Ok(PreparedState::Pure(Ket::from_raw(space, v)?))
        }
    }
}

/// `(|00> + |11>)/√2` or `(|0N> + |N0>)/√2` on modes `(j, k)`, other modes in vacuum.
pub fn build_entangled_pair(
    kind: &StateKind,
    modes: (usize, usize),
    space: &FockSpace,
) -> Result<Ket> {
    let (j, k) = modes;
    space.check_mode(j)?;
    space.check_mode(k)?;
    if j == k {
        return Err(Error::arg("pair modes must differ"));
    }
    let (a, b) = match kind {
        StateKind::Bell => ((0, 0), (1, 1)),
        StateKind::Noon { n } if *n > 0 => ((0, *n), (*n, 0)),
        _ => return Err(Error::arg("entangled pairs are Bell or NOON states")),
    };
    let spec = StateSpec {
        kind: kind.clone(),
        modes: TargetModes::Pair(j, k),
    };
    let need = spec.required_dim()?;
    if let Some(&d) = space.mode_dims().iter().find(|&&d| d < need) {
        return Err(truncation(&spec, need, d));
    }
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut v = DVector::zeros(space.total_dim());
    for (nj, nk) in [a, b] {
        let mut occ = vec![0; space.n_modes()];
        occ[j] = nj;
        occ[k] = nk;
        v[space.index_of(&occ)?] = h;
    }
    Ket::new(space, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expectation, number};

    #[test]
    fn coherent_zero_is_vacuum() {
        let s = FockSpace::uniform(3, 3).unwrap();
        let st = build_state(&StateSpec::coherent(0.0), &s).unwrap();
        assert_eq!(st.as_pure().unwrap(), &Ket::vacuum(&s));
    }

    #[test]
    fn thermal_weights_halve() {
        let w = StateSpec::thermal(1.0).fock_weights(4).unwrap();
        assert_eq!(&w[..3], &[0.5, 0.25, 0.125]);
    }

    #[test]
    fn default_dimensions_follow_tail_bound() {
        assert_eq!(StateSpec::coherent(1.0).required_dim().unwrap(), 13);
        assert_eq!(StateSpec::cat(1.0).required_dim().unwrap(), 13);
        assert_eq!(StateSpec::thermal(1.0).required_dim().unwrap(), 34);
        assert_eq!(StateSpec::noon(5, 0, 2).required_dim().unwrap(), 6);
        assert_eq!(StateSpec::fock(1).required_dim().unwrap(), 2);
        assert_eq!(StateSpec::bell(0, 2).required_dim().unwrap(), 3);
    }

    #[test]
    fn short_truncation_names_required_dim() {
        let s = FockSpace::uniform(3, 12).unwrap();
        match build_state(&StateSpec::coherent(1.0), &s) {
            Err(Error::Truncation { required, .. }) => assert_eq!(required, 13),
            other => panic!("expected truncation error, got {other:?}"),
        }
        let s = FockSpace::uniform(3, 3).unwrap();
        assert!(build_state(&StateSpec::fock(3), &s).is_err());
    }

    #[test]
    fn cat_mean_excitation_is_tanh() {
        let spec = StateSpec::cat(1.0);
        let s = spec.default_space(3).unwrap();
        let st = build_state(&spec, &s).unwrap();
        let n = expectation(st.as_pure().unwrap(), &number(&s, 0).unwrap())
            .unwrap()
            .re;
        assert!((n - 1f64.tanh()).abs() < 1e-9);
        assert!((spec.mean_excitation() - 1f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn unnormalized_superposition_is_rejected() {
        let spec = StateSpec::single(
            StateKind::Superposition {
                coeffs: vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
            },
            0,
        );
        assert!(spec.required_dim().is_err());
    }

    #[test]
    fn bell_and_noon_layout() {
        let s = FockSpace::uniform(3, 6).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = build_entangled_pair(&StateKind::Bell, (0, 2), &s).unwrap();
        assert!((bell.amplitude(&[0, 0, 0]).unwrap().re - h).abs() < 1e-15);
        assert!((bell.amplitude(&[1, 0, 1]).unwrap().re - h).abs() < 1e-15);
        let noon = build_entangled_pair(&StateKind::Noon { n: 5 }, (0, 2), &s).unwrap();
        assert!((noon.amplitude(&[0, 0, 5]).unwrap().re - h).abs() < 1e-15);
        assert!((noon.amplitude(&[5, 0, 0]).unwrap().re - h).abs() < 1e-15);
        let one = build_entangled_pair(&StateKind::Noon { n: 1 }, (0, 2), &s).unwrap();
        assert!((one.amplitude(&[1, 0, 0]).unwrap().re - h).abs() < 1e-15);
        assert!((one.amplitude(&[0, 0, 1]).unwrap().re - h).abs() < 1e-15);
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = StateSpec::noon(5, 0, 2);
        let text = toml::to_string(&spec).unwrap();
        let back: StateSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let spec = StateSpec::coherent(1.0);
        let back: StateSpec = toml::from_str(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let short: StateSpec = toml::from_str("kind = \"coherent\"\nbeta = 1\nmodes = 0").unwrap();
        assert_eq!(short, spec);
    }
}
