use serde::{Deserialize, Serialize};

use super::lindblad::MasterFlow;
use super::{continuous_final_state, ContinuousKind};
use crate::discrete::{DiscreteModel, InitialState};
use crate::ensemble::{try_map_paths, Execution, RngStream};
use crate::error::{invalid, Result};
use crate::model::{ContinuousModel, ModelSpec};
use crate::qmath::{trace_distance, CMat2, DensityMatrix};

/// Paths below which reported distances carry no accuracy promise.
pub const RELIABLE_PATHS: usize = 100;

/// Mean of `ρ_i` and the standard error of its distance to a fixed target:
/// `√(Var((ρ₀₀−ρ₁₁)/2) + Var(Re ρ₀₁) + Var(Im ρ₀₁)) / √M`.
pub(crate) fn mean_and_se(states: &[DensityMatrix]) -> (CMat2, f64) {
    let m = states.len() as f64;
    let mean = states.iter().fold(CMat2::zero(), |acc, r| acc + *r.matrix()).scale_re(1.0 / m);
    if states.len() < 2 {
        return (mean, 0.0);
    }
    let comps = |r: &CMat2| [0.5 * (r.0[0][0].re - r.0[1][1].re), r.0[0][1].re, r.0[0][1].im];
    let mu = comps(&mean);
    let mut var = [0.0; 3];
    for r in states {
        let c = comps(r.matrix());
        for i in 0..3 {
            var[i] += (c[i] - mu[i]) * (c[i] - mu[i]);
        }
    }
    let total: f64 = var.iter().map(|v| v / (m - 1.0)).sum();
    (mean, (total / m).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnravellingReport {
    pub kind: ContinuousKind,
    pub t: f64,
    pub dt: f64,
    pub paths: usize,
    /// Trace distance of the mean dyad to `e^{tL}(ρ₀)`.
    pub distance: f64,
    pub stderr: f64,
    pub mean: CMat2,
    pub oracle: CMat2,
    /// Whether `paths ≥ 100`.
    pub reliable: bool,
}

/// Mean dyad of `paths` solutions at `t` against the master flow.
#[allow(clippy::too_many_arguments)]
pub fn unravelling_check(
    kind: ContinuousKind,
    model: &ContinuousModel,
    psi0: &crate::qmath::WaveFunction,
    t: f64,
    paths: usize,
    dt: f64,
    rng: RngStream,
    exec: Execution,
) -> Result<UnravellingReport> {
    if paths < 2 {
        return Err(invalid("unravelling check needs at least two paths"));
    }
    let oracle = MasterFlow::new(model).at(psi0.dyad().matrix(), t)?;
    let finals = try_map_paths(exec, paths, |i| {
        continuous_final_state(kind, model, psi0, t, dt, rng.path(0, i)).map(|s| s.dyad())
    })?;
    let (mean, stderr) = mean_and_se(&finals);
    Ok(UnravellingReport {
        kind,
        t,
        dt,
        paths,
        distance: trace_distance(&mean, oracle.matrix())?,
        stderr,
        mean,
        oracle: *oracle.matrix(),
        reliable: paths >= RELIABLE_PATHS,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationReport {
    pub steps: usize,
    pub paths: usize,
    /// Trace distance of the Monte Carlo mean of `ρ_n` to `Φⁿ(ρ₀)`.
    pub distance: f64,
    pub stderr: f64,
    pub mean: CMat2,
    pub oracle: CMat2,
    pub reliable: bool,
}

/// Mean of the discrete trajectory after `steps` steps against the iterated
/// channel.
pub fn discrete_expectation_check(
    spec: &ModelSpec,
    init: InitialState,
    steps: usize,
    paths: usize,
    rng: RngStream,
    exec: Execution,
) -> Result<ExpectationReport> {
    if paths < 2 {
        return Err(invalid("expectation check needs at least two paths"));
    }
    let model = DiscreteModel::new(spec)?;
    let rho0 = match init {
        InitialState::Pure(psi) => psi.dyad(),
        InitialState::Mixed(rho) => rho,
    };
    let oracle = model.channel.iterate(rho0.matrix(), steps);
    let finals = try_map_paths(exec, paths, |i| {
        model.walk(init, steps, rng.path(0, i), |_, _| {}).map(|s| s.density())
    })?;
    let (mean, stderr) = mean_and_se(&finals);
    Ok(ExpectationReport {
        steps,
        paths,
        distance: trace_distance(&mean, &oracle)?,
        stderr,
        mean,
        oracle,
        reliable: paths >= RELIABLE_PATHS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{diffusive_observable, poisson_observable, ReferenceState, SystemParams};
    use crate::qmath::WaveFunction;

    #[test]
    fn fixed_points_are_exact() {
        let m = ContinuousModel::equilibrium();
        let g = WaveFunction::ground();
        for kind in [ContinuousKind::Jump, ContinuousKind::Diffusive] {
            let r = unravelling_check(kind, &m, &g, 1.0, 100, 1e-3, RngStream::new(1, 0), Execution::default())
                .unwrap();
            assert!(r.distance < 1e-8 && r.reliable);
        }
        for a in [poisson_observable(), diffusive_observable()] {
            let spec = ModelSpec::scaled(SystemParams::equilibrium(), ReferenceState::ground(), a, 1000).unwrap();
            let r = discrete_expectation_check(&spec, InitialState::Pure(g), 50, 100, RngStream::new(2, 0), Execution::default())
                .unwrap();
            assert!(r.distance < 1e-10);
        }
    }

    #[test]
    fn zero_steps_is_exact() {
        let spec = ModelSpec::scaled(SystemParams::equilibrium(), ReferenceState::ground(), poisson_observable(), 10)
            .unwrap();
        let r = discrete_expectation_check(
            &spec,
            InitialState::Pure(WaveFunction::excited()),
            0,
            10,
            RngStream::new(3, 0),
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(r.distance, 0.0);
        assert!(!r.reliable);
    }

    #[test]
    fn small_ensembles_report_stderr() {
        let m = ContinuousModel::equilibrium();
        let r = unravelling_check(
            ContinuousKind::Diffusive,
            &m,
            &WaveFunction::excited(),
            0.5,
            10,
            1e-2,
            RngStream::new(4, 0),
            Execution::Sequential,
        )
        .unwrap();
        assert!(r.stderr > 0.0 && !r.reliable);
        assert!(unravelling_check(ContinuousKind::Jump, &m, &WaveFunction::excited(), 0.5, 1, 1e-2, RngStream::new(4, 0), Execution::Sequential).is_err());
    }

    #[test]
    fn mixed_reference_uses_density_trajectories() {
        let spec = ModelSpec::scaled(
            SystemParams::equilibrium(),
            ReferenceState::new(0.8, 0.2).unwrap(),
            diffusive_observable(),
            20,
        )
        .unwrap();
        let init = InitialState::Mixed(WaveFunction::excited().dyad());
        let r = discrete_expectation_check(&spec, init, 20, 4000, RngStream::new(5, 0), Execution::default()).unwrap();
        assert!(r.distance < 4.0 * r.stderr + 1e-3, "{} vs {}", r.distance, r.stderr);
    }
}
