use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{check_axis, Measure, ScenarioConfig, SweepAxis, Variant};
use super::table::Table;
use crate::error::{Error, Result};
use crate::floquet::{
    chiral_root, compact_matrix, effective_model, DriveParams, EffectiveModel, HoppingPhases,
};
use crate::fock::{DensityOp, Expect, FockSpace};
use crate::model::{
    chiral_effective, error_effective, floquet_drive, full_cavity_magnon,
    full_with_counter_rotating, kerr_term, quadratic_form, CavityModelParams, Hamiltonian,
};
use crate::observables::{
    circle_current, concurrence, current_for_phases, dominant_frequency, excursion_peaks,
    max_current_scan_state, pure, PairKind, PopulationTrace, SCAN_SAMPLES,
};
use crate::propagate::{
    analytic_prepared, evolve_ensemble_checked, evolve_ensemble_observe, evolve_lindblad_observe,
    LindbladParams, TimeGrid, CONVERGENCE_TOL, DRIFT_TOL, MIN_STEPS_PER_PERIOD,
};
use crate::states::{build_state, PreparedState, StateKind, StateSpec, TargetModes};

/// Default horizon in transfer periods.
pub const DEFAULT_PERIODS: f64 = 2.5;
/// Photon truncation is doubled until the traces change by less than this.
pub const PHOTON_TOL: f64 = 1e-6;
const PHOTON_START: usize = 4;
const PHOTON_MAX: usize = 64;
const MARKER_TOL: f64 = 1e-12;

pub type Metrics = BTreeMap<String, f64>;

/// Quantities derived from the model before any evolution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_amp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_eff: Option<f64>,
    /// `G` as `[re, im]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_phase: Option<f64>,
    /// Closed-loop phase `Φ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flux: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transfer_period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_a: Option<f64>,
    /// Signed dispersive hopping `g_am²/(ω_m − ω_a)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_dispersive: Option<f64>,
}

impl Derived {
    /// `(name, value)` pairs of the populated fields, in display order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: Option<f64>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        put("f", self.f);
        put("delta_amp", self.delta_amp);
        put("omega", self.omega);
        put("g_eff", self.g_eff);
        put("G_re", self.coupling.map(|c| c[0]));
        put("G_im", self.coupling.map(|c| c[1]));
        put("G_phase", self.coupling_phase);
        put("Phi", self.flux);
        put("transfer_period", self.transfer_period);
        put("t3", self.t3);
        put("t2", self.t2);
        put("omega_a", self.omega_a);
        put("g_dispersive", self.g_dispersive);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorInfo {
    pub method: String,
    pub steps_per_period: usize,
    pub min_steps_per_period: usize,
    pub drift_tol: f64,
    pub step_halving_check: bool,
}

/// Everything needed to reproduce and interpret one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Fully materialized configuration; replaying it reproduces the CSVs.
    pub config: ScenarioConfig,
    pub derived: Derived,
    pub integrator: IntegratorInfo,
    pub outputs: Vec<String>,
    /// Per-state summary numbers.
    pub metrics: BTreeMap<String, Metrics>,
    pub wall_time_s: f64,
}

/// In-memory result of [`run`].
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub derived: Derived,
    pub integrator: IntegratorInfo,
    /// `(file stem, table)` per curve.
    pub tables: Vec<(String, Table)>,
    pub metrics: BTreeMap<String, Metrics>,
}

impl RunOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn metric(&self, label: &str, name: &str) -> Option<f64> {
        self.metrics.get(label)?.get(name).copied()
    }
}

struct Setup {
    derived: Derived,
    drive: Option<DriveParams>,
    model: Option<EffectiveModel>,
    cavity: Option<CavityModelParams>,
}

fn is_loop_drive(v: Variant) -> bool {
    matches!(
        v,
        Variant::Drive | Variant::Effective | Variant::Analytic | Variant::Error
    )
}

fn setup(cfg: &ScenarioConfig) -> Result<Setup> {
    let m = &cfg.model;
    let third = |period: f64| (period, period / 3.0, 2.0 * period / 3.0);
    if is_loop_drive(m.variant) {
        let phases = match &m.phases {
            Some(p) => p.clone(),
            None => m.chirality.phases().expect("validated").to_vec(),
        };
        let delta_amp = m.delta_amp.unwrap_or(chiral_root() * m.omega / 3f64.sqrt());
        let drive = DriveParams::new(delta_amp, m.omega, phases)
            .map_err(|e| Error::config("model", e.to_string()))?;
        let model = effective_model(&drive, m.g)?;
        let (p, t3, t2) = third(model.transfer_period());
        let derived = Derived {
            f: Some(model.f),
            delta_amp: Some(drive.delta_amp),
            omega: Some(drive.omega_drive),
            g_eff: Some(model.g_eff),
            coupling: Some([model.coupling.re, model.coupling.im]),
            coupling_phase: Some(model.phi),
            flux: Some(model.flux),
            transfer_period: Some(p),
            t3: Some(t3),
            t2: Some(t2),
            ..Default::default()
        };
        return Ok(Setup {
            derived,
            drive: Some(drive),
            model: Some(model),
            cavity: None,
        });
    }
    match m.variant {
        Variant::Compact => {
            let (p, t3, t2) = third(std::f64::consts::TAU / 3f64.sqrt());
            Ok(Setup {
                derived: Derived {
                    f: Some(chiral_root()),
                    g_eff: Some(1.0),
                    flux: Some(m.flux),
                    transfer_period: Some(p),
                    t3: Some(t3),
                    t2: Some(t2),
                    ..Default::default()
                },
                drive: None,
                model: None,
                cavity: None,
            })
        }
        Variant::Cavity => {
            let omega_a = m.omega_m + m.detuning;
            let params = CavityModelParams::new(omega_a, m.omega_m, m.g_am, 2)
                .map_err(|e| Error::config("model", e.to_string()))?;
            let g = params.dispersive_coupling()?;
            Ok(Setup {
                derived: Derived {
                    omega_a: Some(omega_a),
                    g_dispersive: Some(g),
                    transfer_period: Some(std::f64::consts::PI / g.abs()),
                    ..Default::default()
                },
                drive: None,
                model: None,
                cavity: Some(params),
            })
        }
        _ => unreachable!("loop variants handled above"),
    }
}

/// Validates and fills every default so the result is self-describing.
/// The photon truncation of the cavity variant is settled by [`run`].
pub fn materialize(cfg: &ScenarioConfig) -> Result<ScenarioConfig> {
    cfg.validate()?;
    let mut c = cfg.clone();
    let s = setup(&c)?;
    if let Some(d) = &s.drive {
        c.model.delta_amp = Some(d.delta_amp);
        c.model.phases = Some(d.phases.clone());
    }
    if c.grid.t_end.is_none() {
        c.grid.t_end = Some(DEFAULT_PERIODS * s.derived.transfer_period.expect("always set"));
    }
    let cavity = c.model.variant == Variant::Cavity;
    for e in &mut c.states {
        if e.dims.is_some() {
            continue;
        }
        let spec = e.spec()?;
        if cavity {
            if let Some(p) = c.model.photon_dim {
                e.dims = Some(vec![p, c.model.magnon_dim, c.model.magnon_dim]);
            }
        } else {
            let d = spec
                .required_dim()
                .map_err(|err| Error::config(format!("states.{}", e.label), err.to_string()))?;
            e.dims = Some(vec![d; 3]);
        }
    }
    Ok(c)
}

/// Derived quantities of a config without evolving anything.
pub fn info(cfg: &ScenarioConfig) -> Result<Derived> {
    cfg.validate()?;
    Ok(setup(cfg)?.derived)
}

/// Evolution times: the output grid merged with the marker times.
struct Schedule {
    times: Vec<f64>,
    grid: Vec<f64>,
    grid_idx: Vec<usize>,
    marker_idx: Vec<(&'static str, usize)>,
}

impl Schedule {
    fn new(grid: Vec<f64>, markers: &[(&'static str, f64)]) -> Self {
        let mut times: Vec<f64> = grid
            .iter()
            .copied()
            .chain(markers.iter().map(|m| m.1))
            .collect();
        times.sort_by(f64::total_cmp);
        let close = |a: f64, b: f64| (a - b).abs() <= MARKER_TOL * a.abs().max(1.0);
        times.dedup_by(|a, b| close(*a, *b));
        let find = |t: f64| {
            times
                .iter()
                .position(|&x| close(x, t))
                .expect("merged above")
        };
        let grid_idx = grid.iter().map(|&t| find(t)).collect();
        let marker_idx = markers.iter().map(|&(n, t)| (n, find(t))).collect();
        Self {
            times,
            grid,
            grid_idx,
            marker_idx,
        }
    }
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    setup: &'a Setup,
    sched: Schedule,
}

impl Ctx<'_> {
    fn steps(&self) -> usize {
        self.cfg.grid.steps_per_period
    }

    fn model(&self) -> Result<&EffectiveModel> {
        self.setup
            .model
            .as_ref()
            .ok_or_else(|| Error::config("model.variant", "needs a driven loop model"))
    }

    fn hopping(&self) -> Result<HoppingPhases> {
        Ok(match self.cfg.model.variant {
            Variant::Compact => HoppingPhases::compact(self.cfg.model.flux, chiral_root()),
            _ => self.model()?.hopping,
        })
    }

    fn hamiltonian(&self, space: &FockSpace, delta: f64) -> Result<Hamiltonian> {
        let m = &self.cfg.model;
        let h: Hamiltonian = match m.variant {
            Variant::Drive => {
                floquet_drive(self.setup.drive.as_ref().expect("loop drive"), m.g, space)?.into()
            }
            Variant::Effective => chiral_effective(self.model()?, space)?.into(),
            Variant::Error => error_effective(self.model()?, delta, space)?.into(),
            Variant::Compact => {
                let cm = compact_matrix(m.flux, chiral_root());
                let dm = DMatrix::from_fn(3, 3, |r, c| cm[(r, c)]);
                quadratic_form(space, &dm)?.into_hermitian()?.into()
            }
            Variant::Analytic | Variant::Cavity => {
                return Err(Error::Unsupported(
                    "no numeric loop Hamiltonian for this variant".into(),
                ))
            }
        };
        if m.kerr != 0.0 {
            h.with_static(&kerr_term(m.kerr, space))
        } else {
            Ok(h)
        }
    }

    fn markers(&self) -> Vec<(&'static str, f64)> {
        let d = &self.setup.derived;
        [("t3", d.t3), ("t2", d.t2)]
            .into_iter()
            .filter_map(|(n, t)| t.map(|t| (n, t)))
            .collect()
    }
}

struct Prepared {
    spec: StateSpec,
    space: FockSpace,
    state: PreparedState,
}

fn prepare(label: &str, spec: StateSpec, dims: Vec<usize>) -> Result<Prepared> {
    let ctx = |e: Error| match e {
        Error::Truncation { .. } | Error::Argument(_) | Error::Dimension(_) => {
            Error::config(format!("states.{label}"), e.to_string())
        }
        e => e,
    };
    let space = FockSpace::new(dims).map_err(ctx)?;
    let state = build_state(&spec, &space).map_err(ctx)?;
    Ok(Prepared { spec, space, state })
}

fn target(spec: &StateSpec) -> usize {
    match spec.modes {
        TargetModes::Single(k) => k,
        TargetModes::Pair(j, _) => j,
    }
}

fn density(state: &PreparedState) -> Result<DensityOp> {
    match state {
        PreparedState::Pure(k) => Ok(DensityOp::from_ket(k)),
        PreparedState::Mixed(e) => e.to_density(),
    }
}

fn put(m: &mut Metrics, k: impl Into<String>, v: f64) {
    m.insert(k.into(), v);
}

/// Runs a scenario in memory.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let mut cfg = materialize(cfg)?;
    let setup = setup(&cfg)?;
    let grid = TimeGrid::new(
        0.0,
        cfg.grid.t_end.expect("materialized"),
        cfg.grid.n_samples,
        cfg.grid.steps_per_period,
    )?;
    let mut tables = Vec::new();
    let mut metrics = BTreeMap::new();
    let measure = cfg.observe.measure;
    let variant = cfg.model.variant;

    if variant == Variant::Cavity {
        let photon = match cfg.model.photon_dim {
            Some(p) => p,
            None => choose_photon_dim(&cfg, &setup, &grid)?,
        };
        cfg.model.photon_dim = Some(photon);
        for e in &mut cfg.states {
            e.dims
                .get_or_insert_with(|| vec![photon, cfg.model.magnon_dim, cfg.model.magnon_dim]);
        }
        for e in &cfg.states {
            let (full, rwa, m) = cavity_run(&setup, e, &grid)?;
            tables.push((format!("{}_full", e.label), full));
            tables.push((format!("{}_rwa", e.label), rwa));
            metrics.insert(e.label.clone(), m);
        }
    } else {
        let ctx = Ctx {
            cfg: &cfg,
            setup: &setup,
            sched: Schedule::new(grid.times(), &[]),
        };
        let ctx = Ctx {
            sched: Schedule::new(grid.times(), &ctx.markers()),
            ..ctx
        };
        for e in &cfg.states {
            let p = prepare(&e.label, e.spec()?, e.dims.clone().expect("materialized"))?;
            let (mut ts, m) = match measure {
                Measure::Populations => populations_run(&ctx, &p)?,
                Measure::Concurrence => concurrence_run(&ctx, &p)?,
                Measure::Current => current_run(&ctx, &p)?,
                Measure::MaxCurrent => max_current_run(&ctx, &p)?,
                Measure::TransferError => transfer_error_run(&ctx, &p)?,
            };
            for (suffix, t) in ts.drain(..) {
                tables.push((format!("{}{suffix}", e.label), t));
            }
            metrics.insert(e.label.clone(), m);
        }
    }

    let method = match (variant, measure) {
        (Variant::Analytic, _) => "closed-form mode transfer",
        (_, Measure::MaxCurrent) | (_, Measure::TransferError) => "exact eigen stepping",
        _ if cfg.open.kappa > 0.0 => "RK4 master equation, interaction frame",
        (Variant::Drive, _) => "RK4 in the drive interaction frame",
        _ => "exact eigen stepping",
    };
    let integrator = IntegratorInfo {
        method: method.into(),
        steps_per_period: cfg.grid.steps_per_period,
        min_steps_per_period: MIN_STEPS_PER_PERIOD,
        drift_tol: DRIFT_TOL,
        step_halving_check: cfg.grid.verify,
    };
    Ok(RunOutput {
        config: cfg,
        derived: setup.derived,
        integrator,
        tables,
        metrics,
    })
}

fn grid_rows(ctx: &Ctx, series: &[Vec<f64>]) -> Vec<Vec<f64>> {
    ctx.sched
        .grid
        .iter()
        .zip(&ctx.sched.grid_idx)
        .map(|(&t, &i)| {
            std::iter::once(t)
                .chain(series.iter().map(|s| s[i]))
                .collect()
        })
        .collect()
}

fn table_from(header: &[&str], rows: Vec<Vec<f64>>) -> Result<Table> {
    let mut t = Table::new(header);
    for r in rows {
        t.push(r)?;
    }
    Ok(t)
}

fn marker_metrics(ctx: &Ctx, names: &[&str], series: &[Vec<f64>], m: &mut Metrics) {
    for &(marker, i) in &ctx.sched.marker_idx {
        for (n, s) in names.iter().zip(series) {
            put(m, format!("{n}_{marker}"), s[i]);
        }
    }
}

fn populations_run(ctx: &Ctx, p: &Prepared) -> Result<(Vec<(String, Table)>, Metrics)> {
    let cfg = ctx.cfg;
    let coeffs = p
        .spec
        .population_coefficients(p.space.mode_dims()[target(&p.spec)])?;
    let times = &ctx.sched.times;
    let mut metrics = Metrics::new();

    let analytic_trace = |model: &EffectiveModel| -> Result<PopulationTrace> {
        let mut tr = PopulationTrace::new(vec![0, 1, 2]);
        for &t in times {
            tr.push(t, &analytic_prepared(model, &p.state, t)?, &coeffs)?;
        }
        Ok(tr)
    };

    let trace = if cfg.model.variant == Variant::Analytic {
        analytic_trace(ctx.model()?)?
    } else {
        let h = ctx.hamiltonian(&p.space, cfg.model.delta)?;
        let mut tr = PopulationTrace::new(vec![0, 1, 2]);
        if cfg.open.kappa > 0.0 {
            let lb = LindbladParams::new(
                cfg.open.kappa,
                cfg.open.decay_modes.iter().map(|k| k - 1).collect(),
            )?;
            let rho = density(&p.state)?;
            evolve_lindblad_observe(&h, &rho, &lb, times, ctx.steps(), |t, r| {
                tr.push(t, r, &coeffs)
            })?;
            if cfg.grid.verify {
                let mut fine = PopulationTrace::new(vec![0, 1, 2]);
                evolve_lindblad_observe(&h, &rho, &lb, times, 2 * ctx.steps(), |t, r| {
                    fine.push(t, r, &coeffs)
                })?;
                let d = tr.max_deviation(&fine)?;
                put(&mut metrics, "step_halving_defect", d);
                if d >= DRIFT_TOL {
                    return Err(Error::Integration {
                        t: *times.last().expect("non-empty"),
                        reason: format!("halving the step moved populations by {d:e}"),
                    });
                }
            }
        } else {
            let observe = |t: f64, s: &PreparedState| tr.push(t, s, &coeffs);
            if cfg.grid.verify {
                let (_, d) = evolve_ensemble_checked(&h, &p.state, times, ctx.steps(), observe)?;
                put(&mut metrics, "step_halving_defect", d);
                if d >= CONVERGENCE_TOL {
                    return Err(Error::Integration {
                        t: *times.last().expect("non-empty"),
                        reason: format!("halving the step changed the final fidelity by {d:e}"),
                    });
                }
            } else {
                evolve_ensemble_observe(&h, &p.state, times, ctx.steps(), observe)?;
            }
        }
        tr
    };

    let header = ["t", "P1", "P2", "P3"];
    let mut tables = vec![(
        String::new(),
        table_from(&header, grid_rows(ctx, &trace.values))?,
    )];
    marker_metrics(ctx, &header[1..], &trace.values, &mut metrics);
    let grid_series = |tr: &PopulationTrace, j: usize| -> Vec<f64> {
        ctx.sched
            .grid_idx
            .iter()
            .map(|&i| tr.values[j][i])
            .collect()
    };
    for (j, name) in [(1, "P2"), (2, "P3")] {
        let peaks = excursion_peaks(&grid_series(&trace, j), 0.5);
        if let Some(&(_, v)) = peaks.first() {
            put(&mut metrics, format!("{name}_peak"), v);
        }
        put(
            &mut metrics,
            format!("{name}_peak_count"),
            peaks.len() as f64,
        );
    }
    if cfg.model.compare_analytic && cfg.model.variant != Variant::Analytic {
        let model = ctx.model()?;
        let an = analytic_trace(model)?;
        let rows = grid_rows(ctx, &an.values);
        let dev = (0..3)
            .flat_map(|j| {
                let (a, b) = (grid_series(&trace, j), grid_series(&an, j));
                a.into_iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max);
        put(&mut metrics, "max_deviation", dev);
        tables.push(("_analytic".into(), table_from(&header, rows)?));
    }
    Ok((tables, metrics))
}

fn concurrence_run(ctx: &Ctx, p: &Prepared) -> Result<(Vec<(String, Table)>, Metrics)> {
    let kind = match p.spec.kind {
        StateKind::Bell => PairKind::Bell,
        StateKind::Noon { n } => PairKind::Noon(n),
        _ => {
            return Err(Error::config(
                "observe.measure",
                "concurrence needs a pair state",
            ))
        }
    };
    let pairs = [(0, 2), (2, 1), (1, 0)];
    let names = ["C13", "C32", "C21"];
    let h = ctx.hamiltonian(&p.space, ctx.cfg.model.delta)?;
    let rows = evolve_ensemble_observe(&h, &p.state, &ctx.sched.times, ctx.steps(), |_, s| {
        let k = pure(s)?;
        pairs
            .iter()
            .map(|&pr| concurrence(k, pr, kind))
            .collect::<Result<Vec<_>>>()
    })?;
    let series: Vec<Vec<f64>> = (0..3)
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let mut m = Metrics::new();
    marker_metrics(ctx, &names, &series, &mut m);
    if let Some(t3) = ctx.setup.derived.t3 {
        for (n, s) in names.iter().zip(&series) {
            let peak = ctx
                .sched
                .times
                .iter()
                .zip(s)
                .filter(|(&t, _)| t <= t3 * (1.0 + MARKER_TOL))
                .map(|(_, &v)| v)
                .fold(0.0, f64::max);
            put(&mut m, format!("{n}_max_leg1"), peak);
        }
    }
    let mut header = vec!["t"];
    header.extend(names);
    Ok((
        vec![(String::new(), table_from(&header, grid_rows(ctx, &series))?)],
        m,
    ))
}

fn current_run(ctx: &Ctx, p: &Prepared) -> Result<(Vec<(String, Table)>, Metrics)> {
    let hp = ctx.hopping()?;
    let i23 = current_for_phases(&hp, (1, 2), &p.space)?;
    let circle = circle_current(&hp, &p.space)?;
    let h = ctx.hamiltonian(&p.space, ctx.cfg.model.delta)?;
    let rows = evolve_ensemble_observe(&h, &p.state, &ctx.sched.times, ctx.steps(), |_, s| {
        Ok([s.expect(&i23)?.re, s.expect(&circle)?.re])
    })?;
    let series: Vec<Vec<f64>> = (0..2)
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let mut m = Metrics::new();
    let on_grid =
        |j: usize| -> Vec<f64> { ctx.sched.grid_idx.iter().map(|&i| series[j][i]).collect() };
    let (i23_grid, circle_grid) = (on_grid(0), on_grid(1));
    put(
        &mut m,
        "I23_max",
        i23_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let n = circle_grid.len() as f64;
    let mean = circle_grid.iter().sum::<f64>() / n;
    let spread = (circle_grid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    put(&mut m, "circle_mean", mean);
    put(&mut m, "circle_spread", spread);
    marker_metrics(ctx, &["I23", "Icircle"], &series, &mut m);
    Ok((
        vec![(
            String::new(),
            table_from(&["t", "I23", "Icircle"], grid_rows(ctx, &series))?,
        )],
        m,
    ))
}

fn max_current_run(ctx: &Ctx, p: &Prepared) -> Result<(Vec<(String, Table)>, Metrics)> {
    let scan = max_current_scan_state(&ctx.cfg.phi_grid(), &p.state, SCAN_SAMPLES)?;
    let mut t = Table::new(&["phi", "I23_max"]);
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for &(phi, v) in &scan {
        t.push(vec![phi, v])?;
        if v > best.1 {
            best = (phi, v);
        }
    }
    let mut m = Metrics::new();
    put(&mut m, "I23_max", best.1);
    put(&mut m, "phi_at_max", best.0);
    put(&mut m, "mean_excitation", p.spec.mean_excitation());
    Ok((vec![(String::new(), t)], m))
}

fn transfer_error_run(ctx: &Ctx, p: &Prepared) -> Result<(Vec<(String, Table)>, Metrics)> {
    let d = &ctx.setup.derived;
    let (t3, t2) = (d.t3.expect("loop model"), d.t2.expect("loop model"));
    let coeffs = p
        .spec
        .population_coefficients(p.space.mode_dims()[target(&p.spec)])?;
    let deltas = &ctx.cfg.observe.deltas;
    let rows = deltas
        .par_iter()
        .map(|&delta| {
            let h = ctx.hamiltonian(&p.space, delta)?;
            let mut tr = PopulationTrace::new(vec![1, 2]);
            evolve_ensemble_observe(&h, &p.state, &[0.0, t3, t2], ctx.steps(), |t, s| {
                tr.push(t, s, &coeffs)
            })?;
            Ok(vec![delta, tr.values[1][1], tr.values[0][2]])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut m = Metrics::new();
    if let [row] = rows.as_slice() {
        put(&mut m, "P3_t3", row[1]);
        put(&mut m, "P2_t2", row[2]);
    } else {
        put(
            &mut m,
            "P3_t3_min",
            rows.iter().map(|r| r[1]).fold(f64::INFINITY, f64::min),
        );
        put(
            &mut m,
            "P2_t2_min",
            rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min),
        );
    }
    Ok((
        vec![(
            String::new(),
            table_from(&["delta", "P3_t3", "P2_t2"], rows)?,
        )],
        m,
    ))
}

/// Cavity-space state: magnon label `k` (zero-based) sits at space mode `k + 1`.
fn cavity_state(e: &super::config::StateEntry, dims: Vec<usize>) -> Result<Prepared> {
    let mut spec = e.spec()?;
    spec.modes = match spec.modes {
        TargetModes::Single(k) => TargetModes::Single(k + 1),
        TargetModes::Pair(j, k) => TargetModes::Pair(j + 1, k + 1),
    };
    prepare(&e.label, spec, dims)
}

fn cavity_traces(
    params: &CavityModelParams,
    p: &Prepared,
    times: &[f64],
) -> Result<(PopulationTrace, PopulationTrace)> {
    let coeffs = p
        .spec
        .population_coefficients(p.space.mode_dims()[target(&p.spec)])?;
    let full = Hamiltonian::Static(full_with_counter_rotating(params, &p.space)?);
    let rwa = Hamiltonian::Static(full_cavity_magnon(params, &p.space)?);
    let trace = |h: &Hamiltonian| -> Result<PopulationTrace> {
        let mut tr = PopulationTrace::new(vec![1, 2]);
        evolve_ensemble_observe(h, &p.state, times, MIN_STEPS_PER_PERIOD, |t, s| {
            tr.push(t, s, &coeffs)
        })?;
        Ok(tr)
    };
    let (a, b) = rayon::join(|| trace(&full), || trace(&rwa));
    Ok((a?, b?))
}

fn choose_photon_dim(cfg: &ScenarioConfig, setup: &Setup, grid: &TimeGrid) -> Result<usize> {
    let params = setup.cavity.as_ref().expect("cavity variant");
    let times = grid.times();
    let magnon = cfg.model.magnon_dim;
    let mut d = cfg
        .states
        .iter()
        .map(|e| e.spec().and_then(|s| s.required_dim()))
        .try_fold(PHOTON_START, |a, r| r.map(|r| a.max(r)))?;
    let mut last_change = f64::NAN;
    while 2 * d <= PHOTON_MAX {
        let mut change: f64 = 0.0;
        for e in &cfg.states {
            let coarse = cavity_state(e, vec![d, magnon, magnon])?;
            let fine = cavity_state(e, vec![2 * d, magnon, magnon])?;
            let (a, _) = cavity_traces(params, &coarse, &times)?;
            let (b, _) = cavity_traces(params, &fine, &times)?;
            change = change.max(a.max_deviation(&b)?);
        }
        if change < PHOTON_TOL {
            return Ok(d);
        }
        last_change = change;
        d *= 2;
    }
    Err(Error::Integration {
        t: grid.t_end,
        reason: format!(
            "photon truncation not converged at dimension {PHOTON_MAX} (last change {last_change:e})"
        ),
    })
}

fn cavity_run(
    setup: &Setup,
    e: &super::config::StateEntry,
    grid: &TimeGrid,
) -> Result<(Table, Table, Metrics)> {
    let params = setup.cavity.as_ref().expect("cavity variant");
    let p = cavity_state(e, e.dims.clone().expect("set by run"))?;
    let times = grid.times();
    let (full, rwa) = cavity_traces(params, &p, &times)?;
    let header = ["t", "P1", "P2"];
    let rows = |tr: &PopulationTrace| -> Result<Table> {
        table_from(
            &header,
            times
                .iter()
                .enumerate()
                .map(|(i, &t)| vec![t, tr.values[0][i], tr.values[1][i]])
                .collect(),
        )
    };
    let mut m = Metrics::new();
    put(&mut m, "max_deviation", full.max_deviation(&rwa)?);
    let two_g = 2.0 * setup.derived.g_dispersive.expect("cavity").abs();
    put(&mut m, "two_g", two_g);
    put(
        &mut m,
        "rabi_frequency",
        dominant_frequency(&times, &full.values[0], 0.25 * two_g, 4.0 * two_g)?,
    );
    put(
        &mut m,
        "rabi_frequency_rwa",
        dominant_frequency(&times, &rwa.values[0], 0.25 * two_g, 4.0 * two_g)?,
    );
    Ok((rows(&full)?, rows(&rwa)?, m))
}

fn write_outputs(dir: &Path, out: &RunOutput) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for (stem, t) in &out.tables {
        let name = format!("{stem}.csv");
        std::fs::write(dir.join(&name), t.to_csv())?;
        names.push(name);
    }
    Ok(names)
}

/// Runs a scenario and writes its CSVs and `manifest.json` to `output.dir`.
pub fn execute(cfg: &ScenarioConfig) -> Result<RunManifest> {
    let start = Instant::now();
    let out = run(cfg)?;
    let dir = out.config.output.dir.clone();
    let mut outputs = write_outputs(&dir, &out)?;
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        tool: "chiralmag".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: out.config,
        derived: out.derived,
        integrator: out.integrator,
        outputs,
        metrics: out.metrics,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}

/// Result of a sweep: one manifest per value plus the summary file names.
#[derive(Clone, Debug)]
pub struct SweepReport {
    pub manifests: Vec<RunManifest>,
    pub summaries: Vec<String>,
}

/// Runs `cfg` once per value of `axis`, each in its own subdirectory, and
/// writes `sweep_<axis>_<label>.csv` summaries. An empty list does nothing.
pub fn sweep(cfg: &ScenarioConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepReport> {
    if values.is_empty() {
        return Ok(SweepReport {
            manifests: Vec::new(),
            summaries: Vec::new(),
        });
    }
    cfg.validate()?;
    check_axis(cfg, axis)?;
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::config(
            "sweep.values",
            format!("non-finite value {v}"),
        ));
    }
    let root = cfg.output.dir.clone();
    let manifests = values
        .par_iter()
        .map(|&v| {
            let mut c = cfg.clone();
            c.sweep.axis = Some(axis);
            c.sweep.values = vec![v];
            c.apply_axis(axis, v);
            c.output.dir = root.join(format!("{axis}_{v}"));
            execute(&c)
        })
        .collect::<Result<Vec<_>>>()?;

    let columns = axis.summary_columns();
    let mut summaries = Vec::new();
    for e in &cfg.states {
        let mut header = vec![axis.as_str()];
        header.extend(columns);
        let mut t = Table::new(&header);
        for (&v, m) in values.iter().zip(&manifests) {
            let mut row = vec![v];
            for c in columns {
                let x = m
                    .metrics
                    .get(&e.label)
                    .and_then(|mm| mm.get(*c))
                    .ok_or_else(|| {
                        Error::config("sweep.axis", format!("run did not produce metric `{c}`"))
                    })?;
                row.push(*x);
            }
            t.push(row)?;
        }
        let name = format!("sweep_{axis}_{}.csv", e.label);
        std::fs::write(root.join(&name), t.to_csv())?;
        summaries.push(name);
    }
    Ok(SweepReport {
        manifests,
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::super::config::ScenarioId;
    use super::*;
    use crate::floquet::Chirality;

    fn quick(id: ScenarioId) -> ScenarioConfig {
        let mut c = ScenarioConfig::preset(id);
        c.grid.n_samples = 60;
        c
    }

    #[test]
    fn schedule_merges_markers() {
        let s = Schedule::new(vec![0.0, 1.0, 2.0], &[("t3", 0.5), ("t2", 2.0)]);
        assert_eq!(s.times, vec![0.0, 0.5, 1.0, 2.0]);
        assert_eq!(s.grid_idx, vec![0, 2, 3]);
        assert_eq!(s.marker_idx, vec![("t3", 1), ("t2", 3)]);
    }

    #[test]
    fn materialize_fills_defaults() {
        let c = materialize(&ScenarioConfig::preset(ScenarioId::Fig3a)).unwrap();
        assert!(c.model.delta_amp.is_some() && c.model.phases.is_some());
        assert_eq!(c.states[0].dims, Some(vec![2, 2, 2]));
        let d = info(&c).unwrap();
        let p = d.transfer_period.unwrap();
        assert!((c.grid.t_end.unwrap() - 2.5 * p).abs() < 1e-12);
        assert!((d.t3.unwrap() - p / 3.0).abs() < 1e-12);
    }

    #[test]
    fn effective_run_reports_markers() {
        let mut c = quick(ScenarioId::Fig3a);
        c.model.variant = Variant::Effective;
        let out = run(&c).unwrap();
        let p3 = out.metric("fock1", "P3_t3").unwrap();
        let p2 = out.metric("fock1", "P2_t3").unwrap();
        assert!((p3 + p2 + out.metric("fock1", "P1_t3").unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(out.table("fock1").unwrap().rows.len(), 60);
    }

    #[test]
    fn analytic_variant_matches_effective() {
        let mut a = quick(ScenarioId::Fig3b);
        a.model.variant = Variant::Analytic;
        let mut b = a.clone();
        b.model.variant = Variant::Effective;
        let (ra, rb) = (run(&a).unwrap(), run(&b).unwrap());
        let (ta, tb) = (
            ra.table("coherent1").unwrap(),
            rb.table("coherent1").unwrap(),
        );
        for (x, y) in ta.rows.iter().zip(&tb.rows) {
            for (u, v) in x.iter().zip(y) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let c = quick(ScenarioId::Fig5a);
        let (a, b) = (run(&c).unwrap(), run(&c).unwrap());
        assert_eq!(a.tables[0].1.to_csv(), b.tables[0].1.to_csv());
    }

    #[test]
    fn empty_sweep_is_a_no_op() {
        let mut c = quick(ScenarioId::Fig8a);
        c.output.dir = "/nonexistent/never/created".into();
        let r = sweep(&c, SweepAxis::Delta, &[]).unwrap();
        assert!(r.manifests.is_empty() && r.summaries.is_empty());
        assert!(!c.output.dir.exists());
    }

    #[test]
    fn info_for_cavity_uses_the_dispersive_coupling() {
        let d = info(&ScenarioConfig::preset(ScenarioId::Fig9b)).unwrap();
        assert!((d.g_dispersive.unwrap() + 0.1).abs() < 1e-12);
        assert!((d.transfer_period.unwrap() - std::f64::consts::PI / 0.1).abs() < 1e-9);
    }

    #[test]
    fn chirality_none_needs_explicit_drive() {
        let mut c = quick(ScenarioId::Custom);
        c.model.chirality = Chirality::None;
        assert!(run(&c).unwrap_err().is_config());
    }
}
