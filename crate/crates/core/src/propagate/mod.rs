//! Time evolution: closed-system Schrödinger dynamics, Lindblad master
//! equation, and the closed-form transfer oracle of the chiral model.
//!
//! Driven generators are integrated with fixed-step RK4 in the interaction
//! picture of the diagonal drive, so the step only has to resolve the drive
//! period rather than the large modulation amplitude. Static generators are
//! stepped exactly through an eigendecomposition. Excitation-conserving
//! generators are split into total-excitation sectors that evolve in parallel.

mod analytic;
mod blocks;
mod lindblad;
mod schrodinger;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use analytic::{
    analytic_prepared, analytic_state, analytic_transfer, mode_propagator, transfer_weights,
    transform_state, TransferMatrix,
};
pub use lindblad::{evolve_lindblad, evolve_lindblad_observe, LindbladParams};
pub use schrodinger::{
    convergence_defect, evolve_ensemble_checked, evolve_ensemble_observe, evolve_observe,
    evolve_schrodinger, evolve_verified, CONVERGENCE_TOL, MAX_COMPONENT_DRIFT,
};

/// Minimum RK4 steps per drive period.
pub const MIN_STEPS_PER_PERIOD: usize = 200;
/// Norm or trace drift that aborts an integration.
pub const DRIFT_TOL: f64 = 1e-6;
/// RK4 step times the fastest rate in the drive frame; keeps the per-step
/// norm loss near 1e-10 and the step-halving defect under tolerance.
pub(crate) const STEP_PHASE: f64 = 0.05;

/// Uniform output grid plus the integrator resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_samples: usize,
    pub steps_per_drive_period: usize,
}

impl TimeGrid {
    pub fn new(
        t_start: f64,
        t_end: f64,
        n_samples: usize,
        steps_per_drive_period: usize,
    ) -> Result<Self> {
        let grid = Self {
            t_start,
            t_end,
            n_samples,
            steps_per_drive_period,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// `[0, t_end]` with the minimum step density.
    pub fn span(t_end: f64, n_samples: usize) -> Result<Self> {
        Self::new(0.0, t_end, n_samples, MIN_STEPS_PER_PERIOD)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_end > self.t_start) {
            return Err(Error::arg(format!(
                "time grid needs t_end > t_start (got {} .. {})",
                self.t_start, self.t_end
            )));
        }
        if self.n_samples < 2 {
            return Err(Error::arg("time grid needs at least two samples"));
        }
        if self.steps_per_drive_period < MIN_STEPS_PER_PERIOD {
            return Err(Error::arg(format!(
                "at least {MIN_STEPS_PER_PERIOD} steps per drive period are required"
            )));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.n_samples - 1;
        let span = self.t_end - self.t_start;
        (0..=n)
            .map(|i| {
                if i == n {
                    self.t_end
                } else {
                    self.t_start + span * i as f64 / n as f64
                }
            })
            .collect()
    }

    /// Same samples with twice the step density.
    pub fn refined(&self) -> Self {
        Self {
            steps_per_drive_period: 2 * self.steps_per_drive_period,
            ..self.clone()
        }
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::arg("no sample times"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::arg("sample times must be finite"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("sample times must be strictly increasing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_times_hit_endpoints() {
        let g = TimeGrid::new(1.0, 2.0, 5, 200).unwrap();
        assert_eq!(g.times(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(TimeGrid::new(1.0, 1.0, 5, 200).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1, 200).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 5, 199).is_err());
        assert!(check_times(&[0.0, 1.0, 1.0]).is_err());
    }
}
