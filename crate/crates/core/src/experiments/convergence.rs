use serde::{Deserialize, Serialize};

use super::ensembles::mean_and_se;
use super::lindblad::MasterFlow;
use super::stats::{ks_two_sample, ks_two_sample_se, monotone_with_one_inversion};
use super::{continuous_final_state, ContinuousKind, CONTINUOUS_BLOCK};
use crate::discrete::{DiscreteModel, InitialState};
use crate::ensemble::{try_map_paths, Execution, RngStream};
use crate::error::{invalid, Result};
use crate::model::{ContinuousModel, ModelSpec, ReferenceState, SystemParams};
use crate::qmath::{trace_distance, DensityMatrix, WaveFunction};
use crate::table::Table;

/// `|y|²` samples are snapped to this grid before the KS comparison, so that
/// atoms hit by both schemes (0 after an emission, 1 on the no-jump branch)
/// stay ties instead of being split by rounding residue.
pub const KS_RESOLUTION: f64 = 1e-12;

fn snap(v: f64) -> f64 {
    (v / KS_RESOLUTION).round() * KS_RESOLUTION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub steps: usize,
    /// Two-sample KS distance between discrete and continuous `|y_t|²`.
    pub ks: f64,
    pub ks_se: f64,
    /// Trace distance of the discrete mean state to `e^{tL}(ρ₀)`.
    pub distance: f64,
    pub distance_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub kind: ContinuousKind,
    pub t: f64,
    pub paths: usize,
    pub dt: f64,
    pub rows: Vec<ConvergenceRow>,
    /// The continuous ensemble's own distance to the master flow.
    pub continuous_distance: f64,
    pub continuous_distance_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceChecks {
    pub ks_monotone: bool,
    pub ks_final: bool,
    pub distance_monotone: bool,
    pub distance_final: bool,
}

impl ConvergenceChecks {
    pub fn passed(&self) -> bool {
        self.ks_monotone && self.ks_final && self.distance_monotone && self.distance_final
    }
}

impl ConvergenceReport {
    pub fn checks(&self, ks_max: f64, distance_max: f64) -> ConvergenceChecks {
        let ks: Vec<f64> = self.rows.iter().map(|r| r.ks).collect();
        let ks_se: Vec<f64> = self.rows.iter().map(|r| r.ks_se).collect();
        let d: Vec<f64> = self.rows.iter().map(|r| r.distance).collect();
        let d_se: Vec<f64> = self.rows.iter().map(|r| r.distance_se).collect();
        let last = self.rows.last();
        ConvergenceChecks {
            ks_monotone: monotone_with_one_inversion(&ks, &ks_se),
            ks_final: last.is_some_and(|r| r.ks < ks_max),
            distance_monotone: monotone_with_one_inversion(&d, &d_se),
            distance_final: last.is_some_and(|r| r.distance < distance_max),
        }
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            ("n", "1"),
            ("steps", "1"),
            ("ks", "1"),
            ("ks_se", "1"),
            ("distance", "1"),
            ("distance_se", "1"),
        ]);
        for r in &self.rows {
            t.push(vec![r.n as f64, r.steps as f64, r.ks, r.ks_se, r.distance, r.distance_se]);
        }
        t
    }
}

/// For each `n`, `paths` discrete trajectories of `⌊nt⌋` steps of the
/// √n-scaled interaction (zero-temperature reference) compared with `paths`
/// solutions of the limit equation at `t`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_harness(
    kind: ContinuousKind,
    system: &SystemParams,
    psi0: &WaveFunction,
    t: f64,
    n_list: &[u64],
    paths: usize,
    dt: f64,
    rng: RngStream,
    exec: Execution,
) -> Result<ConvergenceReport> {
    if n_list.len() < 2 {
        return Err(invalid("convergence harness needs at least two values of n"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return Err(invalid("n_list must be strictly increasing and positive"));
    }
    if !(t.is_finite() && t > 0.0 && t <= 2.0) {
        return Err(invalid("comparison time must lie in (0, 2]"));
    }
    if paths < 2 {
        return Err(invalid("convergence harness needs at least two paths"));
    }
    let limit = ContinuousModel::scaled_limit(system)?;
    let oracle = MasterFlow::new(&limit).at(psi0.dyad().matrix(), t)?;

    let continuous = try_map_paths(exec, paths, |i| {
        continuous_final_state(kind, &limit, psi0, t, dt, rng.path(CONTINUOUS_BLOCK, i))
    })?;
    let cont_y2: Vec<f64> = continuous.iter().map(|s| snap(s.y().norm_sqr())).collect();
    let cont_dyads: Vec<DensityMatrix> = continuous.iter().map(WaveFunction::dyad).collect();
    let (cont_mean, continuous_distance_se) = mean_and_se(&cont_dyads);

    let mut rows = Vec::with_capacity(n_list.len());
    for (j, &n) in n_list.iter().enumerate() {
        let spec = ModelSpec::scaled(*system, ReferenceState::ground(), kind.observable(), n)?;
        let model = DiscreteModel::new(&spec)?;
        let steps = (n as f64 * t + 1e-9).floor() as usize;
        let finals = try_map_paths(exec, paths, |i| {
            model.walk(InitialState::Pure(*psi0), steps, rng.path(j as u64 + 1, i), |_, _| {}).map(|s| s.density())
        })?;
        let y2: Vec<f64> = finals.iter().map(|r| snap(r.excited_population())).collect();
        let (mean, distance_se) = mean_and_se(&finals);
        rows.push(ConvergenceRow {
            n,
            steps,
            ks: ks_two_sample(&y2, &cont_y2)?,
            ks_se: ks_two_sample_se(paths, paths),
            distance: trace_distance(&mean, oracle.matrix())?,
            distance_se,
        });
    }
    Ok(ConvergenceReport {
        kind,
        t,
        paths,
        dt,
        rows,
        continuous_distance: trace_distance(&cont_mean, oracle.matrix())?,
        continuous_distance_se,
    })
}
