//! Executable checks of the model's closed-form laws and limit theorems.
//!
//! Random streams: an experiment seeded with `rng` draws path `i` of its
//! primary ensemble from `rng.path(0, i)`. The convergence harness uses block
//! `j + 1` for the `j`-th scale and block [`CONTINUOUS_BLOCK`] for the
//! continuous reference.

mod convergence;
mod decay;
mod ensembles;
mod lindblad;
mod noise;
pub mod stats;

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::belavkin_diffusive::solve_diffusive_with;
use crate::belavkin_jump::{solve_jump_with, JumpObservation};
use crate::ensemble::RngStream;
use crate::error::{invalid, Result};
use crate::model::{ContinuousModel, MeasurementKind};
use crate::qmath::{CMat2, WaveFunction};

pub use convergence::{convergence_harness, ConvergenceChecks, ConvergenceReport, ConvergenceRow, KS_RESOLUTION};
pub use decay::{
    decay_experiment, supermartingale_check, DecayOptions, DecayPoint, DecayReport, JumpDecayStats,
    SupermartingaleBin, SupermartingaleReport, ThresholdFraction,
};
pub use ensembles::{discrete_expectation_check, unravelling_check, ExpectationReport, UnravellingReport};
pub use lindblad::{jump_term, lindblad, lindblad_superop, master_flow, MasterFlow};
pub use noise::{
    noise_increments, noise_partial_sum, noise_statistics, NoiseIncrement, NoiseStatistics,
};

/// Stream block of the continuous reference ensemble in the convergence
/// harness.
pub const CONTINUOUS_BLOCK: u64 = 1 << 20;

/// Which continuous-time limit is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContinuousKind {
    Jump,
    Diffusive,
}

impl ContinuousKind {
    /// Measurement setup whose scaling limit this is.
    pub fn measurement(self) -> MeasurementKind {
        match self {
            ContinuousKind::Jump => MeasurementKind::Poisson,
            ContinuousKind::Diffusive => MeasurementKind::Diffusive,
        }
    }

    pub fn observable(self) -> CMat2 {
        self.measurement().observable()
    }
}

impl From<MeasurementKind> for ContinuousKind {
    fn from(k: MeasurementKind) -> Self {
        match k {
            MeasurementKind::Poisson => ContinuousKind::Jump,
            MeasurementKind::Diffusive => ContinuousKind::Diffusive,
        }
    }
}

/// Index of `t` on the grid `0, dt, …, T` used by the continuous solvers.
pub fn grid_index(t: f64, horizon: f64, dt: f64) -> Result<usize> {
    let grid = crate::belavkin_jump::time_grid(horizon, dt);
    let k = (t / dt).round() as usize;
    let tol = 1e-9 * t.abs().max(1.0);
    if k < grid.len() && (grid[k] - t).abs() <= tol {
        return Ok(k);
    }
    if (grid[grid.len() - 1] - t).abs() <= tol {
        return Ok(grid.len() - 1);
    }
    Err(invalid(format!("time {t} is not on the solver grid of step {dt}")))
}

/// State of one continuous trajectory at `t`.
pub fn continuous_final_state(
    kind: ContinuousKind,
    model: &ContinuousModel,
    psi0: &WaveFunction,
    t: f64,
    dt: f64,
    rng: RngStream,
) -> Result<WaveFunction> {
    Ok(match kind {
        ContinuousKind::Jump => solve_jump_with(model, *psi0, t, dt, rng, |_| ControlFlow::Continue(()))?.state,
        ContinuousKind::Diffusive => {
            solve_diffusive_with(model, psi0, t, dt, rng, |_| ControlFlow::Continue(()))?.state
        }
    })
}

/// `|y|²` of one continuous trajectory at the grid indices `ks` (ascending).
pub fn continuous_y2_at(
    kind: ContinuousKind,
    model: &ContinuousModel,
    psi0: &WaveFunction,
    ks: &[usize],
    horizon: f64,
    dt: f64,
    rng: RngStream,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(ks.len());
    let mut next = 0;
    let mut take = |k: usize, psi: &WaveFunction| {
        while next < ks.len() && ks[next] == k {
            out.push(psi.y().norm_sqr());
            next += 1;
        }
        if next == ks.len() {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    };
    match kind {
        ContinuousKind::Jump => {
            solve_jump_with(model, *psi0, horizon, dt, rng, |obs| match obs {
                JumpObservation::Grid { k, state, .. } => take(k, state),
                JumpObservation::Candidate { .. } => ControlFlow::Continue(()),
            })?;
        }
        ContinuousKind::Diffusive => {
            solve_diffusive_with(model, psi0, horizon, dt, rng, |obs| take(obs.k, obs.state))?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_lookup() {
        assert_eq!(grid_index(0.5, 2.0, 1e-3).unwrap(), 500);
        assert_eq!(grid_index(2.0, 2.0, 1e-3).unwrap(), 2000);
        assert_eq!(grid_index(1.05, 1.05, 0.1).unwrap(), 11);
        assert!(grid_index(0.5004, 2.0, 1e-3).is_err());
    }

    #[test]
    fn y2_samples_follow_grid() {
        let m = ContinuousModel::equilibrium();
        let e = WaveFunction::excited();
        for kind in [ContinuousKind::Jump, ContinuousKind::Diffusive] {
            let v = continuous_y2_at(kind, &m, &e, &[0, 0, 10, 20], 1.0, 1e-2, RngStream::new(1, 0)).unwrap();
            assert_eq!(v.len(), 4);
            assert_eq!(v[0], 1.0);
            let last = continuous_final_state(kind, &m, &e, 0.2, 1e-2, RngStream::new(1, 0)).unwrap();
            assert!((last.y().norm_sqr() - v[3]).abs() < 1e-12);
        }
    }
}
