use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::Chirality;
use crate::states::{StateKind, StateSpec, TargetModes};

/// Named experiment presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioId {
    Fig2,
    Fig3a,
    Fig3b,
    Fig3c,
    Fig3d,
    Fig4a,
    Fig4b,
    Fig4c,
    Fig4d,
    Fig5a,
    Fig5b,
    Fig6a,
    Fig6b,
    Fig7a,
    Fig7b,
    Fig8a,
    Fig8b,
    Fig9a,
    Fig9b,
    Custom,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 20] = [
        ScenarioId::Fig2,
        ScenarioId::Fig3a,
        ScenarioId::Fig3b,
        ScenarioId::Fig3c,
        ScenarioId::Fig3d,
        ScenarioId::Fig4a,
        ScenarioId::Fig4b,
        ScenarioId::Fig4c,
        ScenarioId::Fig4d,
        ScenarioId::Fig5a,
        ScenarioId::Fig5b,
        ScenarioId::Fig6a,
        ScenarioId::Fig6b,
        ScenarioId::Fig7a,
        ScenarioId::Fig7b,
        ScenarioId::Fig8a,
        ScenarioId::Fig8b,
        ScenarioId::Fig9a,
        ScenarioId::Fig9b,
        ScenarioId::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        use ScenarioId::*;
        match self {
            Fig2 => "fig2",
            Fig3a => "fig3a",
            Fig3b => "fig3b",
            Fig3c => "fig3c",
            Fig3d => "fig3d",
            Fig4a => "fig4a",
            Fig4b => "fig4b",
            Fig4c => "fig4c",
            Fig4d => "fig4d",
            Fig5a => "fig5a",
            Fig5b => "fig5b",
            Fig6a => "fig6a",
            Fig6b => "fig6b",
            Fig7a => "fig7a",
            Fig7b => "fig7b",
            Fig8a => "fig8a",
            Fig8b => "fig8b",
            Fig9a => "fig9a",
            Fig9b => "fig9b",
            Custom => "custom",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::config("scenario", format!("unknown scenario `{s}`")))
    }
}

/// Which Hamiltonian generates the dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Time-periodic drive on the bare hopping loop.
    Drive,
    /// Static effective chiral Hamiltonian.
    Effective,
    /// Closed-form transfer of the effective Hamiltonian.
    Analytic,
    /// Effective Hamiltonian with unequal couplings.
    Error,
    /// Unit-coupling compact form with a free loop phase.
    Compact,
    /// Photon plus two magnons, with and without counter-rotating terms.
    Cavity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Populations,
    Concurrence,
    Current,
    MaxCurrent,
    /// `P3(t3)` and `P2(t2)` across coupling asymmetries.
    TransferError,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Phi,
    Kappa,
    Delta,
    OmegaM,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Phi => "phi",
            SweepAxis::Kappa => "kappa",
            SweepAxis::Delta => "delta",
            SweepAxis::OmegaM => "omega_m",
        }
    }

    /// Metrics collected into the sweep summary.
    pub fn summary_columns(self) -> &'static [&'static str] {
        match self {
            SweepAxis::Phi => &["I23_max"],
            SweepAxis::Kappa => &["P3_peak"],
            SweepAxis::Delta => &["P3_t3", "P2_t2"],
            SweepAxis::OmegaM => &["max_deviation"],
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "phi" => Ok(SweepAxis::Phi),
            "kappa" => Ok(SweepAxis::Kappa),
            "delta" => Ok(SweepAxis::Delta),
            "omega_m" | "omega-m" => Ok(SweepAxis::OmegaM),
            other => Err(Error::config(
                "sweep.axis",
                format!("unknown axis `{other}`"),
            )),
        }
    }
}

/// Frequencies are in units of the bare hopping `g`; cavity frequencies in units of `g_am`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub g: f64,
    /// Drive frequency `ω`.
    pub omega: f64,
    pub chirality: Chirality,
    /// Drive amplitude `Δ`; defaults to the chiral value `f ω / √3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_amp: Option<f64>,
    /// Per-mode drive phases; default from the chirality.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
    pub kerr: f64,
    /// Coupling asymmetry `δ`.
    pub delta: f64,
    /// Loop phase of the compact form.
    pub flux: f64,
    pub omega_m: f64,
    /// `ω_a − ω_m`.
    pub detuning: f64,
    pub g_am: f64,
    /// Photon truncation; chosen adaptively when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photon_dim: Option<usize>,
    pub magnon_dim: usize,
    /// Also emit the closed-form trace and its deviation.
    pub compare_analytic: bool,
}

/// One initial state. Mode labels are 1-based; for the cavity variant they
/// count magnons, the photon sitting before them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateEntry {
    pub label: String,
    #[serde(flatten)]
    pub kind: StateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
}

impl StateEntry {
    pub fn new(label: &str, kind: StateKind) -> Self {
        let pair = matches!(kind, StateKind::Bell | StateKind::Noon { .. });
        Self {
            label: label.into(),
            kind,
            mode: (!pair).then_some(1),
            pair: pair.then_some([1, 3]),
            dims: None,
        }
    }

    /// Zero-based state description.
    pub fn spec(&self) -> Result<StateSpec> {
        let field = format!("states.{}", self.label);
        let is_pair = matches!(self.kind, StateKind::Bell | StateKind::Noon { .. });
        let modes = match (is_pair, self.mode, self.pair) {
            (false, Some(m), None) if m >= 1 => TargetModes::Single(m - 1),
            (false, None, None) => TargetModes::Single(0),
            (true, None, Some([j, k])) if j >= 1 && k >= 1 && j != k => {
                TargetModes::Pair(j - 1, k - 1)
            }
            (false, _, _) => {
                return Err(Error::config(
                    field,
                    "single-mode states take one 1-based `mode`",
                ))
            }
            (true, _, _) => {
                return Err(Error::config(
                    field,
                    "entangled states take `pair = [j, k]` with distinct 1-based modes",
                ))
            }
        };
        let spec = StateSpec {
            kind: self.kind.clone(),
            modes,
        };
        spec.validate()
            .map_err(|e| Error::config(format!("states.{}", self.label), e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Defaults to 2.5 transfer periods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub n_samples: usize,
    pub steps_per_period: usize,
    /// Rerun each driven population run at twice the step density and fail on
    /// disagreement; on by default.
    pub verify: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenConfig {
    /// Damping rate in units of `g`.
    pub kappa: f64,
    /// 1-based decaying modes.
    pub decay_modes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveConfig {
    pub measure: Measure,
    /// Uniform loop-phase grid over `[0, 2π]` for the current scan.
    pub phi_points: usize,
    /// Explicit loop phases, overriding `phi_points`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_values: Option<Vec<f64>>,
    /// Asymmetries scanned by `transfer_error`.
    pub deltas: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<SweepAxis>,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

/// A complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    pub model: ModelConfig,
    pub states: Vec<StateEntry>,
    pub grid: GridConfig,
    pub open: OpenConfig,
    pub observe: ObserveConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

/// Command-line overrides, applied after the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    /// `ω/g` for driven variants, `ω_m/g_am` for the cavity.
    pub omega_ratio: Option<f64>,
    pub kappa: Option<f64>,
    pub delta: Option<f64>,
    pub dims: Option<Vec<usize>>,
    pub chirality: Option<Chirality>,
}

fn coherent(beta: f64) -> StateKind {
    StateKind::Coherent {
        beta: Complex64::new(beta, 0.0),
    }
}

fn cat(zeta: f64) -> StateKind {
    StateKind::Cat {
        zeta: Complex64::new(zeta, 0.0),
    }
}

fn transfer_states() -> Vec<StateEntry> {
    vec![
        StateEntry::new("fock1", StateKind::Fock { n: 1 }),
        StateEntry::new("coherent1", coherent(1.0)),
        StateEntry::new("cat1", cat(1.0)),
    ]
}

impl ScenarioConfig {
    /// The preset for `id`, with optional fields still unset.
    pub fn preset(id: ScenarioId) -> Self {
        use ScenarioId::*;
        let mut c = Self {
            scenario: id,
            model: ModelConfig {
                variant: Variant::Drive,
                g: 1.0,
                omega: 20.0,
                chirality: Chirality::Clockwise,
                delta_amp: None,
                phases: None,
                kerr: 0.0,
                delta: 0.0,
                flux: FRAC_PI_2,
                omega_m: 200.0,
                detuning: 10.0,
                g_am: 1.0,
                photon_dim: None,
                magnon_dim: 4,
                compare_analytic: false,
            },
            states: vec![StateEntry::new("fock1", StateKind::Fock { n: 1 })],
            grid: GridConfig {
                t_end: None,
                n_samples: 1000,
                steps_per_period: 200,
                verify: true,
            },
            open: OpenConfig {
                kappa: 0.0,
                decay_modes: vec![1, 2, 3],
            },
            observe: ObserveConfig {
                measure: Measure::Populations,
                phi_points: 101,
                phi_values: None,
                deltas: vec![0.0, 0.05, 0.1, 0.15, 0.2],
            },
            sweep: SweepConfig::default(),
            output: OutputConfig {
                dir: PathBuf::from("out").join(id.as_str()),
            },
        };
        let single = |label: &str, kind| vec![StateEntry::new(label, kind)];
        match id {
            Fig2 => {
                let a = 1.0 / 3f64.sqrt();
                c.states = single(
                    "superposition",
                    StateKind::Superposition {
                        coeffs: [0.0, a, a, a].map(|x| Complex64::new(x, 0.0)).to_vec(),
                    },
                );
                c.model.compare_analytic = true;
            }
            Fig3a | Fig4a => {}
            Fig3b | Fig4b => c.states = single("coherent1", coherent(1.0)),
            Fig3c | Fig4c => c.states = single("cat1", cat(1.0)),
            Fig3d | Fig4d => c.states = single("thermal1", StateKind::Thermal { nbar: 1.0 }),
            Fig5a => {
                c.states = single("bell", StateKind::Bell);
                c.observe.measure = Measure::Concurrence;
            }
            Fig5b => {
                c.states = single("noon5", StateKind::Noon { n: 5 });
                c.observe.measure = Measure::Concurrence;
            }
            Fig6a => {
                c.model.variant = Variant::Compact;
                c.observe.measure = Measure::MaxCurrent;
                c.states = transfer_states();
            }
            Fig6b => {
                c.model.variant = Variant::Compact;
                c.observe.measure = Measure::MaxCurrent;
                c.states = (1..=4)
                    .map(|n| StateEntry::new(&format!("fock{n}"), StateKind::Fock { n }))
                    .collect();
            }
            Fig7a | Fig7b => {
                c.open.kappa = if id == Fig7a { 0.001 } else { 0.01 };
            }
            Fig8a | Fig8b => {
                c.model.variant = Variant::Error;
                c.observe.measure = Measure::TransferError;
                c.states = transfer_states();
            }
            Fig9a | Fig9b => {
                c.model.variant = Variant::Cavity;
                c.model.omega_m = if id == Fig9a { 100.0 } else { 200.0 };
                c.grid.n_samples = 2000;
            }
            Custom => {}
        }
        if matches!(id, Fig4a | Fig4b | Fig4c | Fig4d) {
            c.model.chirality = Chirality::Anticlockwise;
        }
        c
    }

    /// Preset for `id` with a TOML document merged over it key by key.
    /// A `scenario` key in the document takes precedence over `id`.
    pub fn from_toml_str(text: &str, id: Option<ScenarioId>) -> Result<Self> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
        let id = match user.get("scenario") {
            Some(v) => v
                .as_str()
                .ok_or_else(|| Error::config("scenario", "must be a string"))?
                .parse()?,
            None => id.unwrap_or(ScenarioId::Custom),
        };
        let mut base = toml::Table::try_from(Self::preset(id))
            .map_err(|e| Error::config("config", e.to_string()))?;
        deep_merge(&mut base, user);
        base.insert("scenario".into(), toml::Value::String(id.as_str().into()));
        toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(error_field(&e), e.message().to_string()))
    }

    /// Loads a TOML config or replays the `config` of a JSON run manifest.
    pub fn load(path: &Path, id: Option<ScenarioId>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::config("manifest", e.to_string()))?;
            let cfg = v.get("config").cloned().unwrap_or(v);
            return serde_json::from_value(cfg)
                .map_err(|e| Error::config("manifest.config", e.to_string()));
        }
        Self::from_toml_str(&text, id)
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        if let Some(r) = o.omega_ratio {
            if self.model.variant == Variant::Cavity {
                self.model.omega_m = r;
            } else {
                self.model.omega = r;
                // the chiral amplitude follows the frequency
                self.model.delta_amp = None;
            }
        }
        if let Some(k) = o.kappa {
            self.open.kappa = k;
        }
        if let Some(d) = o.delta {
            self.model.delta = d;
            self.observe.deltas = vec![d];
        }
        if let Some(d) = &o.dims {
            for s in &mut self.states {
                s.dims = Some(d.clone());
            }
        }
        if let Some(ch) = o.chirality {
            self.model.chirality = ch;
            self.model.phases = None;
            self.model.delta_amp = None;
        }
    }

    /// Sets one sweep coordinate.
    pub fn apply_axis(&mut self, axis: SweepAxis, value: f64) {
        match axis {
            SweepAxis::Phi => {
                self.model.flux = value;
                self.observe.phi_values = Some(vec![value]);
            }
            SweepAxis::Kappa => self.open.kappa = value,
            SweepAxis::Delta => {
                self.model.delta = value;
                self.observe.deltas = vec![value];
            }
            SweepAxis::OmegaM => self.model.omega_m = value,
        }
    }

    pub fn n_modes(&self) -> usize {
        3
    }

    /// Checks field-level consistency; everything here maps to exit code 2.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(
                    field,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        positive("model.g", m.g)?;
        positive("model.omega", m.omega)?;
        if !m.kerr.is_finite() {
            return Err(Error::config("model.kerr", "must be finite"));
        }
        if !(m.delta.abs() < 1.0) {
            return Err(Error::config("model.delta", "must satisfy |δ| < 1"));
        }
        if !m.flux.is_finite() {
            return Err(Error::config("model.flux", "must be finite"));
        }
        if let Some(d) = m.delta_amp {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::config(
                    "model.delta_amp",
                    "must be finite and non-negative",
                ));
            }
        }
        if let Some(p) = &m.phases {
            if p.len() != 3 || p.iter().any(|x| !x.is_finite()) {
                return Err(Error::config("model.phases", "needs three finite phases"));
            }
        }
        if m.chirality == Chirality::None
            && matches!(
                m.variant,
                Variant::Drive | Variant::Effective | Variant::Analytic | Variant::Error
            )
            && (m.phases.is_none() || m.delta_amp.is_none())
        {
            return Err(Error::config(
                "model.chirality",
                "`none` needs explicit `phases` and `delta_amp`",
            ));
        }
        if m.variant == Variant::Cavity {
            positive("model.omega_m", m.omega_m)?;
            positive("model.g_am", m.g_am)?;
            if m.detuning == 0.0 || !m.detuning.is_finite() {
                return Err(Error::config(
                    "model.detuning",
                    "must be finite and nonzero",
                ));
            }
            if m.omega_m + m.detuning <= 0.0 {
                return Err(Error::config(
                    "model.detuning",
                    "photon frequency must stay positive",
                ));
            }
            if m.magnon_dim < 2 {
                return Err(Error::config("model.magnon_dim", "must be at least 2"));
            }
            if matches!(m.photon_dim, Some(d) if d < 2) {
                return Err(Error::config("model.photon_dim", "must be at least 2"));
            }
        }

        let g = &self.grid;
        if let Some(t) = g.t_end {
            positive("grid.t_end", t)?;
        }
        if g.n_samples < 2 {
            return Err(Error::config(
                "grid.n_samples",
                "at least two samples are needed",
            ));
        }
        if g.steps_per_period < crate::propagate::MIN_STEPS_PER_PERIOD {
            return Err(Error::config(
                "grid.steps_per_period",
                format!(
                    "at least {} are required",
                    crate::propagate::MIN_STEPS_PER_PERIOD
                ),
            ));
        }

        let o = &self.open;
        if !(o.kappa >= 0.0 && o.kappa.is_finite()) {
            return Err(Error::config(
                "open.kappa",
                "must be finite and non-negative",
            ));
        }
        if o.decay_modes.iter().any(|&k| k == 0 || k > self.n_modes()) {
            return Err(Error::config(
                "open.decay_modes",
                "modes are 1-based, 1..=3",
            ));
        }

        if self.states.is_empty() {
            return Err(Error::config("states", "at least one state is required"));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.states {
            if s.label.is_empty()
                || !s
                    .label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(Error::config(
                    "states.label",
                    format!(
                        "`{}` must be non-empty ASCII letters, digits, `_` or `-`",
                        s.label
                    ),
                ));
            }
            if !seen.insert(&s.label) {
                return Err(Error::config(
                    "states.label",
                    format!("duplicate label `{}`", s.label),
                ));
            }
            let spec = s.spec()?;
            let field = format!("states.{}", s.label);
            let modes: Vec<usize> = match spec.modes {
                TargetModes::Single(k) => vec![k],
                TargetModes::Pair(j, k) => vec![j, k],
            };
            let n_targets = if m.variant == Variant::Cavity { 2 } else { 3 };
            if modes.iter().any(|&k| k >= n_targets) {
                return Err(Error::config(
                    field,
                    format!("modes are 1-based, 1..={n_targets}"),
                ));
            }
            if let Some(d) = &s.dims {
                let want = if m.variant == Variant::Cavity {
                    3
                } else {
                    self.n_modes()
                };
                if d.len() != want || d.iter().any(|&x| x < 2) {
                    return Err(Error::config(
                        format!("states.{}.dims", s.label),
                        format!("needs {want} dimensions, each at least 2"),
                    ));
                }
            }
        }

        let ob = &self.observe;
        let pairs = self.states.iter().all(|s| s.pair.is_some());
        let singles = self.states.iter().all(|s| s.pair.is_none());
        let need = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config("observe.measure", msg.to_string()))
            }
        };
        match ob.measure {
            Measure::Populations => need(singles, "populations need single-mode states")?,
            Measure::Concurrence => {
                need(pairs, "concurrence needs Bell or NOON states")?;
                need(
                    m.variant != Variant::Cavity,
                    "concurrence is not defined for the cavity",
                )?;
            }
            Measure::Current => need(
                singles && !matches!(m.variant, Variant::Cavity | Variant::Analytic),
                "currents need single-mode states and a loop Hamiltonian",
            )?,
            Measure::MaxCurrent => need(
                singles && m.variant == Variant::Compact,
                "the current scan runs on the compact variant with single-mode states",
            )?,
            Measure::TransferError => need(
                singles && m.variant == Variant::Error,
                "transfer_error runs on the error variant with single-mode states",
            )?,
        }
        if m.variant == Variant::Cavity && ob.measure != Measure::Populations {
            return Err(Error::config(
                "observe.measure",
                "the cavity records populations",
            ));
        }
        if o.kappa > 0.0
            && (ob.measure != Measure::Populations
                || m.variant == Variant::Analytic
                || m.variant == Variant::Cavity)
        {
            return Err(Error::config(
                "open.kappa",
                "damping applies to population runs of the numeric loop variants",
            ));
        }
        if ob.measure == Measure::MaxCurrent && ob.phi_values.is_none() && ob.phi_points < 2 {
            return Err(Error::config("observe.phi_points", "at least two points"));
        }
        if let Some(v) = &ob.phi_values {
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config("observe.phi_values", "needs finite values"));
            }
        }
        if ob.measure == Measure::TransferError
            && (ob.deltas.is_empty() || ob.deltas.iter().any(|d| !(d.abs() < 1.0)))
        {
            return Err(Error::config("observe.deltas", "needs values with |δ| < 1"));
        }
        if let Some(axis) = self.sweep.axis {
            check_axis(self, axis)?;
        }
        Ok(())
    }

    /// Loop phases scanned by `max_current`.
    pub fn phi_grid(&self) -> Vec<f64> {
        match &self.observe.phi_values {
            Some(v) => v.clone(),
            None => {
                let n = self.observe.phi_points;
                (0..n)
                    .map(|i| 2.0 * PI * i as f64 / (n - 1) as f64)
                    .collect()
            }
        }
    }
}

/// Rejects sweeps whose axis has no effect on the configured measurement.
pub fn check_axis(cfg: &ScenarioConfig, axis: SweepAxis) -> Result<()> {
    let (m, ob) = (&cfg.model, &cfg.observe);
    let ok = match axis {
        SweepAxis::Phi => ob.measure == Measure::MaxCurrent,
        SweepAxis::Kappa => {
            ob.measure == Measure::Populations
                && !matches!(m.variant, Variant::Analytic | Variant::Cavity)
        }
        SweepAxis::Delta => ob.measure == Measure::TransferError,
        SweepAxis::OmegaM => m.variant == Variant::Cavity,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::config(
            "sweep.axis",
            format!("axis `{axis}` does not apply to scenario {}", cfg.scenario),
        ))
    }
}

fn deep_merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => deep_merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn error_field(e: &toml::de::Error) -> String {
    // serde reports the offending key inside the message; keep the top-level hint generic
    let msg = e.message();
    msg.split('`')
        .nth(1)
        .map(|s| s.to_string())
        .unwrap_or_else(|| "config".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in ScenarioId::ALL {
            assert_eq!(id.as_str().parse::<ScenarioId>().unwrap(), id);
        }
        assert!("fig10".parse::<ScenarioId>().is_err());
    }

    #[test]
    fn presets_are_valid() {
        for id in ScenarioId::ALL {
            ScenarioConfig::preset(id).validate().unwrap();
        }
    }

    #[test]
    fn toml_merges_over_preset() {
        let c = ScenarioConfig::from_toml_str(
            "scenario = \"fig3a\"\n[model]\nomega = 40.0\n[grid]\nn_samples = 50\n",
            None,
        )
        .unwrap();
        assert_eq!(c.scenario, ScenarioId::Fig3a);
        assert_eq!(c.model.omega, 40.0);
        assert_eq!(c.model.chirality, Chirality::Clockwise);
        assert_eq!(c.grid.n_samples, 50);
        assert_eq!(c.grid.steps_per_period, 200);
    }

    #[test]
    fn states_replace_the_preset_list() {
        let c = ScenarioConfig::from_toml_str(
            "[[states]]\nlabel = \"c\"\nkind = \"coherent\"\nbeta = [0.5, 0.5]\nmode = 2\n",
            Some(ScenarioId::Fig6a),
        )
        .unwrap();
        assert_eq!(c.states.len(), 1);
        assert_eq!(c.states[0].spec().unwrap().modes, TargetModes::Single(1));
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let e = ScenarioConfig::from_toml_str("[model]\nomgea = 3.0\n", None).unwrap_err();
        assert!(matches!(e, Error::Config { .. }), "{e}");
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = ScenarioConfig::preset(ScenarioId::Fig3a);
        c.grid.steps_per_period = 10;
        match c.validate().unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "grid.steps_per_period"),
            e => panic!("{e}"),
        }
        let mut c = ScenarioConfig::preset(ScenarioId::Fig3a);
        c.states[0].mode = Some(0);
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::preset(ScenarioId::Fig5a);
        c.observe.measure = Measure::Populations;
        assert!(c.validate().is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut c = ScenarioConfig::preset(ScenarioId::Fig8a);
        c.apply_overrides(&Overrides {
            delta: Some(0.1),
            chirality: Some(Chirality::Anticlockwise),
            dims: Some(vec![5, 5, 5]),
            ..Default::default()
        });
        assert_eq!(c.observe.deltas, vec![0.1]);
        assert_eq!(c.model.chirality, Chirality::Anticlockwise);
        assert!(c.states.iter().all(|s| s.dims == Some(vec![5, 5, 5])));
    }

    #[test]
    fn axis_must_fit_the_measure() {
        let c = ScenarioConfig::preset(ScenarioId::Fig6a);
        assert!(check_axis(&c, SweepAxis::Phi).is_ok());
        assert!(check_axis(&c, SweepAxis::Kappa).is_err());
    }

    #[test]
    fn config_serializes_to_toml_and_back() {
        for id in ScenarioId::ALL {
            let c = ScenarioConfig::preset(id);
            let text = toml::to_string(&c).unwrap();
            assert_eq!(
                ScenarioConfig::from_toml_str(&text, None).unwrap(),
                c,
                "{id}"
            );
        }
    }
}
