use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::stats::{ks_one_sample, mean_se, MeanSe};
use super::{continuous_y2_at, grid_index, ContinuousKind};
use crate::belavkin_jump::{solve_jump_with, JumpObservation};
use crate::ensemble::{try_map_paths, Execution, RngStream};
use crate::error::{invalid, Error, Result};
use crate::model::ContinuousModel;
use crate::qmath::WaveFunction;
use crate::table::Table;

/// `|y| ≤` this counts as absorbed in the ground state.
pub const ABSORPTION_TOL: f64 = 1e-12;
/// Slack of the pathwise monotonicity check of `|y_t|²` between jumps.
pub const MONOTONE_TOL: f64 = 1e-9;
const LAW_SLACK: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    /// Jump kind: paths without a jump are followed up to this time for the
    /// first-jump statistics.
    pub first_jump_cap: f64,
    /// Jump kind: how long each path is observed after its first jump.
    pub absorption_window: f64,
    /// Bin width of the first-jump histogram.
    pub histogram_bin: f64,
    pub thresholds: [f64; 2],
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions { first_jump_cap: 50.0, absorption_window: 1.0, histogram_bin: 0.25, thresholds: [1e-1, 1e-2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    /// `|y₀|² e^{−t}`.
    pub reference: f64,
    pub deviation: f64,
    /// `|deviation| ≤ 3·se + 0.01`.
    pub within: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFraction {
    pub epsilon: f64,
    /// Fraction of paths with `|y_T|² < ε` at the last grid time.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpDecayStats {
    /// First-jump times of the paths that jumped before the cap.
    pub first_jump_times: Vec<f64>,
    pub jumped_fraction: f64,
    /// `|y₀|²(1 − e^{−cap})`, the probability of a jump before the cap.
    pub expected_jumped_fraction: f64,
    pub mean_first_jump: Option<MeanSe>,
    /// KS distance of the first-jump times to `Exp(1)` conditioned on the cap.
    pub ks_exponential: Option<f64>,
    pub histogram: Vec<[f64; 3]>,
    /// Jumped paths with `|y| ≤ 1e−12` at every observation after `T₁`.
    pub absorbed_paths: usize,
    /// Paths whose `|y_t|²` increased by more than `1e−9` before `T₁`.
    pub monotonicity_violations: usize,
    pub total_jumps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub kind: ContinuousKind,
    pub y0_squared: f64,
    pub dt: f64,
    pub paths: usize,
    pub points: Vec<DecayPoint>,
    pub max_abs_deviation: f64,
    pub law_holds: bool,
    /// Evidence, not proof, of almost-sure convergence to the ground state.
    pub threshold_fractions: Vec<ThresholdFraction>,
    pub jump: Option<JumpDecayStats>,
    /// `|y_t|²` per grid time (outer) and path (inner).
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

impl DecayReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            ("t", "time"),
            ("mean_y2", "1"),
            ("stderr_y2", "1"),
            ("reference", "1"),
            ("deviation", "1"),
        ]);
        for p in &self.points {
            t.push(vec![p.t, p.mean, p.se, p.reference, p.deviation]);
        }
        t
    }

    /// `|y|²` samples at the grid time `t`.
    pub fn samples_at(&self, t: f64) -> Option<&[f64]> {
        let i = self.points.iter().position(|p| (p.t - t).abs() <= 1e-12 * t.abs().max(1.0))?;
        Some(&self.samples[i])
    }
}

struct JumpPath {
    y2: Vec<f64>,
    first_jump: Option<f64>,
    absorbed: bool,
    monotone: bool,
    jumps: u64,
}

fn jump_path(
    model: &ContinuousModel,
    psi0: &WaveFunction,
    ks: &[usize],
    t_max: f64,
    dt: f64,
    opts: &DecayOptions,
    rng: RngStream,
) -> Result<JumpPath> {
    let mut p = JumpPath { y2: Vec::with_capacity(ks.len()), first_jump: None, absorbed: true, monotone: true, jumps: 0 };
    let mut next = 0usize;
    let mut last_y2 = psi0.y().norm_sqr();
    let horizon = t_max.max(opts.first_jump_cap) + opts.absorption_window;
    solve_jump_with(model, *psi0, horizon, dt, rng, |obs| {
        match obs {
            JumpObservation::Candidate { event, state, .. } => {
                if event.accepted {
                    p.jumps += 1;
                    p.first_jump.get_or_insert(event.time);
                }
                if p.first_jump.is_some() && state.y().norm() > ABSORPTION_TOL {
                    p.absorbed = false;
                }
                ControlFlow::Continue(())
            }
            JumpObservation::Grid { k, t, state, intensity, .. } => {
                let y2 = state.y().norm_sqr();
                while next < ks.len() && ks[next] == k {
                    p.y2.push(y2);
                    next += 1;
                }
                match p.first_jump {
                    Some(_) if state.y().norm() > ABSORPTION_TOL => p.absorbed = false,
                    None if y2 > last_y2 + MONOTONE_TOL => p.monotone = false,
                    _ => {}
                }
                last_y2 = y2;
                let done = t >= t_max
                    && match p.first_jump {
                        Some(t1) => t >= t1 + opts.absorption_window,
                        None => t >= opts.first_jump_cap || intensity == 0.0,
                    };
                if done {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            }
        }
    })?;
    if p.y2.len() != ks.len() {
        return Err(Error::InternalConsistency("jump path stopped before the last grid time".into()));
    }
    Ok(p)
}

fn histogram(times: &[f64], width: f64, cap: f64) -> Vec<[f64; 3]> {
    let bins = (cap / width).ceil().max(1.0) as usize;
    let mut counts = vec![0usize; bins];
    for t in times {
        let b = ((t / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let last = counts.iter().rposition(|c| *c > 0).map_or(0, |i| i + 1);
    (0..last).map(|b| [b as f64 * width, (b + 1) as f64 * width, counts[b] as f64]).collect()
}

/// Return-to-equilibrium experiment for the equilibrium model
/// `H = diag(1, 0)`, `C = a¹₀`: mean `|y_t|²` against `|y₀|² e^{−t}` on
/// `t_grid`, plus first-jump statistics for the jump kind.
#[allow(clippy::too_many_arguments)]
pub fn decay_experiment(
    kind: ContinuousKind,
    model: &ContinuousModel,
    psi0: &WaveFunction,
    t_grid: &[f64],
    paths: usize,
    dt: f64,
    rng: RngStream,
    exec: Execution,
    opts: &DecayOptions,
) -> Result<DecayReport> {
    let eq = ContinuousModel::equilibrium();
    if (model.hamiltonian - eq.hamiltonian).max_abs() > 1e-12 || (model.coupling - eq.coupling).max_abs() > 1e-12 {
        return Err(Error::UnsupportedConfiguration(
            "decay experiment is defined for H = diag(1,0), C = a¹₀ only".into(),
        ));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("t_grid must be a non-empty list of non-negative times"));
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("t_grid must be strictly increasing"));
    }
    if paths < 2 {
        return Err(invalid("decay experiment needs at least two paths"));
    }
    if !(opts.first_jump_cap > 0.0 && opts.absorption_window > 0.0 && opts.histogram_bin > 0.0) {
        return Err(invalid("decay options must be positive"));
    }
    let t_max = t_grid[t_grid.len() - 1];
    let horizon = if t_max > 0.0 { t_max } else { dt };
    let ks: Vec<usize> = t_grid.iter().map(|t| grid_index(*t, horizon, dt)).collect::<Result<_>>()?;
    if t_grid.iter().zip(&ks).any(|(t, k)| (*k as f64 * dt - t).abs() > 1e-9 * t.max(1.0)) {
        return Err(invalid("t_grid entries must be multiples of dt"));
    }
    let y0_squared = psi0.y().norm_sqr();

    let (per_path, jump) = match kind {
        ContinuousKind::Diffusive => {
            let v = try_map_paths(exec, paths, |i| continuous_y2_at(kind, model, psi0, &ks, horizon, dt, rng.path(0, i)))?;
            (v, None)
        }
        ContinuousKind::Jump => {
            let runs = try_map_paths(exec, paths, |i| jump_path(model, psi0, &ks, horizon, dt, opts, rng.path(0, i)))?;
            let first: Vec<f64> = runs.iter().filter_map(|r| r.first_jump).collect();
            let cap = opts.first_jump_cap;
            let norm = 1.0 - (-cap).exp();
            let stats = JumpDecayStats {
                jumped_fraction: first.len() as f64 / paths as f64,
                expected_jumped_fraction: y0_squared * norm,
                mean_first_jump: if first.is_empty() { None } else { Some(mean_se(&first)?) },
                ks_exponential: if first.is_empty() {
                    None
                } else {
                    Some(ks_one_sample(&first, |t| (1.0 - (-t).exp()) / norm)?)
                },
                histogram: histogram(&first, opts.histogram_bin, cap),
                absorbed_paths: runs.iter().filter(|r| r.first_jump.is_some() && r.absorbed).count(),
                monotonicity_violations: runs.iter().filter(|r| !r.monotone).count(),
                total_jumps: runs.iter().map(|r| r.jumps).sum(),
                first_jump_times: first,
            };
            (runs.into_iter().map(|r| r.y2).collect(), Some(stats))
        }
    };

    let samples: Vec<Vec<f64>> = (0..ks.len()).map(|j| per_path.iter().map(|p| p[j]).collect()).collect();
    let mut points = Vec::with_capacity(ks.len());
    for (t, ys) in t_grid.iter().zip(&samples) {
        let m = mean_se(ys)?;
        let reference = y0_squared * (-t).exp();
        let deviation = m.mean - reference;
        points.push(DecayPoint {
            t: *t,
            mean: m.mean,
            se: m.se,
            reference,
            deviation,
            within: deviation.abs() <= 3.0 * m.se + LAW_SLACK,
        });
    }
    let last = &samples[samples.len() - 1];
    let threshold_fractions = opts
        .thresholds
        .iter()
        .map(|eps| ThresholdFraction {
            epsilon: *eps,
            fraction: last.iter().filter(|y| **y < *eps).count() as f64 / paths as f64,
        })
        .collect();
    Ok(DecayReport {
        kind,
        y0_squared,
        dt,
        paths,
        max_abs_deviation: points.iter().map(|p| p.deviation.abs()).fold(0.0, f64::max),
        law_holds: points.iter().all(|p| p.within),
        points,
        threshold_fractions,
        jump,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupermartingaleBin {
    pub decile: usize,
    pub paths: usize,
    pub mean_s: f64,
    pub mean_t: f64,
    pub se_t: f64,
    /// `mean_t ≤ mean_s + 3·se_t`.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupermartingaleReport {
    pub s: f64,
    pub t: f64,
    pub bins: Vec<SupermartingaleBin>,
    pub passed: bool,
}

/// Bins paths by the decile of `|y_s|²` and checks that the conditional mean
/// of `|y_t|²` does not exceed the bin mean of `|y_s|²` beyond `3·SE`.
pub fn supermartingale_check(y2_s: &[f64], y2_t: &[f64], s: f64, t: f64) -> Result<SupermartingaleReport> {
    if t.partial_cmp(&s) != Some(std::cmp::Ordering::Greater) {
        return Err(invalid("supermartingale check needs t > s"));
    }
    if y2_s.len() != y2_t.len() {
        return Err(invalid("paired samples must have equal length"));
    }
    if y2_s.len() < 1000 {
        return Err(invalid(format!("supermartingale check needs at least 1000 paths, got {}", y2_s.len())));
    }
    let mut order: Vec<usize> = (0..y2_s.len()).collect();
    order.sort_by(|a, b| y2_s[*a].total_cmp(&y2_s[*b]));
    let m = order.len();
    let mut bins = Vec::with_capacity(10);
    for d in 0..10 {
        let idx = &order[d * m / 10..(d + 1) * m / 10];
        let ys: Vec<f64> = idx.iter().map(|i| y2_s[*i]).collect();
        let yt: Vec<f64> = idx.iter().map(|i| y2_t[*i]).collect();
        let ms = mean_se(&ys)?;
        let mt = mean_se(&yt)?;
        bins.push(SupermartingaleBin {
            decile: d,
            paths: idx.len(),
            mean_s: ms.mean,
            mean_t: mt.mean,
            se_t: mt.se,
            pass: mt.mean <= ms.mean + 3.0 * mt.se + 1e-12,
        });
    }
    let passed = bins.iter().all(|b| b.pass);
    Ok(SupermartingaleReport { s, t, bins, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::CMat2;

    #[test]
    fn ground_state_stays_put() {
        let m = ContinuousModel::equilibrium();
        for kind in [ContinuousKind::Jump, ContinuousKind::Diffusive] {
            let r = decay_experiment(
                kind,
                &m,
                &WaveFunction::ground(),
                &[0.5, 1.0],
                50,
                1e-3,
                RngStream::new(1, 0),
                Execution::default(),
                &DecayOptions::default(),
            )
            .unwrap();
            assert!(r.samples.iter().flatten().all(|y| *y == 0.0));
            assert!(r.law_holds);
            if let Some(j) = r.jump {
                assert_eq!(j.total_jumps, 0);
                assert!(j.first_jump_times.is_empty());
            }
        }
    }

    #[test]
    fn rejects_other_models() {
        let m = ContinuousModel::new(CMat2::zero(), CMat2::identity()).unwrap();
        let err = decay_experiment(
            ContinuousKind::Diffusive,
            &m,
            &WaveFunction::excited(),
            &[1.0],
            10,
            1e-3,
            RngStream::new(0, 0),
            Execution::Sequential,
            &DecayOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnsupportedConfiguration(_)));
    }

    #[test]
    fn jump_kind_absorbs_and_is_monotone() {
        let m = ContinuousModel::equilibrium();
        let psi = WaveFunction::normalize(crate::qmath::CVec2::real(0.6, 0.8)).unwrap();
        let r = decay_experiment(
            ContinuousKind::Jump,
            &m,
            &psi,
            &[0.5, 1.0],
            400,
            1e-2,
            RngStream::new(2, 0),
            Execution::default(),
            &DecayOptions::default(),
        )
        .unwrap();
        let j = r.jump.unwrap();
        assert_eq!(j.absorbed_paths, j.first_jump_times.len());
        assert_eq!(j.monotonicity_violations, 0);
        assert!((j.jumped_fraction - j.expected_jumped_fraction).abs() < 4.0 * (0.64 * 0.36 / 400.0f64).sqrt());
        assert_eq!(j.histogram.iter().map(|b| b[2] as usize).sum::<usize>(), j.first_jump_times.len());
    }

    #[test]
    fn deterministic_start_supermartingale() {
        let ys = vec![1.0; 1000];
        let yt: Vec<f64> = (0..1000).map(|i| (i % 2) as f64 * 0.8).collect();
        let r = supermartingale_check(&ys, &yt, 0.0, 1.0).unwrap();
        assert!(r.passed);
        assert!(supermartingale_check(&ys[..999], &yt[..999], 0.0, 1.0).is_err());
        assert!(supermartingale_check(&ys, &yt, 1.0, 1.0).is_err());
        let bad: Vec<f64> = vec![1.2; 1000];
        assert!(!supermartingale_check(&ys, &bad, 0.0, 1.0).unwrap().passed);
    }
}
