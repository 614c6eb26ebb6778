use serde::{Deserialize, Serialize};

use super::stats::{mean_se, variance};
use crate::discrete::{DiscreteModel, DiscreteTrajectory, InitialState};
use crate::ensemble::{try_map_paths, Execution, RngStream};
use crate::error::{invalid, Error, Result};
use crate::model::{MeasurementKind, ModelSpec};

/// Centred, normalized outcome of step `k → k+1`:
/// `X_{k+1} = −(1^{k+1}₁ − q_{k+1}) / √(p_{k+1} q_{k+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseIncrement {
    pub k: usize,
    /// `1^{k+1}₁`.
    pub indicator: u8,
    pub p: f64,
    pub q: f64,
    pub value: f64,
}

impl NoiseIncrement {
    pub fn new(k: usize, indicator: u8, p: f64, q: f64) -> Result<Self> {
        if !(p > 0.0 && q > 0.0) {
            return Err(invalid(format!("step {k}: noise increment needs p, q > 0 (p = {p}, q = {q})")));
        }
        let value = match indicator {
            0 => (q / p).sqrt(),
            1 => -(p / q).sqrt(),
            _ => return Err(invalid("outcome indicator must be 0 or 1")),
        };
        Ok(NoiseIncrement { k, indicator, p, q, value })
    }

    /// `(E[X | past], E[X² | past])` from the two-point law.
    pub fn conditional_moments(&self) -> (f64, f64) {
        let (a, b) = ((self.q / self.p).sqrt(), -(self.p / self.q).sqrt());
        (self.p * a + self.q * b, self.p * a * a + self.q * b * b)
    }
}

fn require_diffusive(traj: &DiscreteTrajectory) -> Result<()> {
    if traj.kind != MeasurementKind::Diffusive {
        return Err(invalid("noise increments are defined for the diffusive measurement setup only"));
    }
    Ok(())
}

pub fn noise_increments(traj: &DiscreteTrajectory) -> Result<Vec<NoiseIncrement>> {
    require_diffusive(traj)?;
    traj.outcomes
        .iter()
        .zip(&traj.probabilities)
        .enumerate()
        .map(|(k, (o, pq))| NoiseIncrement::new(k, *o, pq[0], pq[1]))
        .collect()
}

fn scale_of(tau: f64) -> Result<f64> {
    let n = (1.0 / tau).round();
    if n < 1.0 || (n * tau - 1.0).abs() > 1e-9 {
        return Err(invalid("partial sums need τ = 1/n for an integer n"));
    }
    Ok(n)
}

/// `W_n(t) = n^{−1/2} Σ_{k < ⌊nt⌋} X_{k+1}`.
pub fn noise_partial_sum(traj: &DiscreteTrajectory, t: f64) -> Result<f64> {
    require_diffusive(traj)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("partial-sum time must be finite and non-negative"));
    }
    let n = scale_of(traj.tau)?;
    let count = (n * t + 1e-9).floor() as usize;
    if count > traj.outcomes.len() {
        return Err(invalid(format!("trajectory has {} steps, W_n({t}) needs {count}", traj.outcomes.len())));
    }
    let incs = noise_increments(traj)?;
    Ok(incs[..count].iter().map(|x| x.value).sum::<f64>() / n.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseStatistics {
    pub n: u64,
    pub steps: usize,
    pub paths: usize,
    /// Pooled over all `paths·steps` increments.
    pub mean: f64,
    pub variance: f64,
    /// Largest `|E[X|past]|` and `|E[X²|past] − 1|` over all steps.
    pub max_conditional_mean: f64,
    pub max_conditional_variance_defect: f64,
    /// `W_n(steps/n)` sample moments.
    pub w_mean: f64,
    pub w_variance: f64,
}

/// Pooled moments of `X_k` and of the endpoint partial sum over an ensemble
/// of discrete trajectories.
pub fn noise_statistics(
    spec: &ModelSpec,
    init: InitialState,
    steps: usize,
    paths: usize,
    rng: RngStream,
    exec: Execution,
) -> Result<NoiseStatistics> {
    if spec.measurement_kind() != MeasurementKind::Diffusive {
        return Err(invalid("noise statistics need the diffusive measurement setup"));
    }
    if paths < 2 || steps == 0 {
        return Err(invalid("noise statistics need at least two paths and one step"));
    }
    let n = scale_of(spec.tau)?;
    let model = DiscreteModel::new(spec)?;
    let per_path = try_map_paths(exec, paths, |i| {
        let mut xs = Vec::with_capacity(steps);
        let mut cond = (0.0f64, 0.0f64);
        let mut err = None;
        model.walk(init, steps, rng.path(0, i), |k, step| {
            match NoiseIncrement::new(k, step.outcome, step.probabilities[0], step.probabilities[1]) {
                Ok(x) => {
                    let (m, v) = x.conditional_moments();
                    cond = (cond.0.max(m.abs()), cond.1.max((v - 1.0).abs()));
                    xs.push(x.value);
                }
                Err(e) => {
                    err.get_or_insert(e);
                }
            }
        })?;
        if let Some(e) = err {
            return Err::<_, Error>(e);
        }
        Ok((xs, cond))
    })?;
    let mut all = Vec::with_capacity(paths * steps);
    let mut ws = Vec::with_capacity(paths);
    let (mut cm, mut cv) = (0.0f64, 0.0f64);
    for (xs, (m, v)) in &per_path {
        ws.push(xs.iter().sum::<f64>() / n.sqrt());
        all.extend_from_slice(xs);
        cm = cm.max(*m);
        cv = cv.max(*v);
    }
    Ok(NoiseStatistics {
        n: n as u64,
        steps,
        paths,
        mean: mean_se(&all)?.mean,
        variance: variance(&all)?,
        max_conditional_mean: cm,
        max_conditional_variance_defect: cv,
        w_mean: mean_se(&ws)?.mean,
        w_variance: variance(&ws)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::run_discrete;
    use crate::model::{diffusive_observable, poisson_observable, ReferenceState, SystemParams};
    use crate::qmath::WaveFunction;

    fn spec(a: crate::qmath::CMat2, n: u64) -> ModelSpec {
        ModelSpec::scaled(SystemParams::equilibrium(), ReferenceState::ground(), a, n).unwrap()
    }

    #[test]
    fn two_point_values_and_moments() {
        let x0 = NoiseIncrement::new(0, 0, 0.7, 0.3).unwrap();
        let x1 = NoiseIncrement::new(0, 1, 0.7, 0.3).unwrap();
        assert!((x0.value - (0.3f64 / 0.7).sqrt()).abs() < 1e-15);
        assert!((x1.value + (0.7f64 / 0.3).sqrt()).abs() < 1e-15);
        let (m, v) = x0.conditional_moments();
        assert!(m.abs() < 1e-15 && (v - 1.0).abs() < 1e-15);
        assert!(NoiseIncrement::new(0, 0, 1.0, 0.0).is_err());
    }

    #[test]
    fn partial_sum_edges() {
        let s = spec(diffusive_observable(), 100);
        let t = run_discrete(&s, InitialState::Pure(WaveFunction::excited()), 100, RngStream::new(1, 0)).unwrap();
        assert_eq!(noise_partial_sum(&t, 0.0).unwrap(), 0.0);
        let incs = noise_increments(&t).unwrap();
        let full: f64 = incs.iter().map(|x| x.value).sum::<f64>() / 10.0;
        assert!((noise_partial_sum(&t, 1.0).unwrap() - full).abs() < 1e-12);
        assert!(noise_partial_sum(&t, 1.5).is_err());
        let p = run_discrete(&spec(poisson_observable(), 100), InitialState::Pure(WaveFunction::excited()), 10, RngStream::new(1, 0))
            .unwrap();
        assert!(noise_partial_sum(&p, 0.05).is_err());
    }

    #[test]
    fn pooled_moments() {
        let s = spec(diffusive_observable(), 1000);
        let st = noise_statistics(&s, InitialState::Pure(WaveFunction::excited()), 1000, 200, RngStream::new(2, 0), Execution::default())
            .unwrap();
        let count = (st.paths * st.steps) as f64;
        assert!(st.mean.abs() < 4.0 / count.sqrt());
        assert!((st.variance - 1.0).abs() < 0.02);
        assert!(st.max_conditional_mean < 1e-12 && st.max_conditional_variance_defect < 1e-12);
    }
}
