//! Jump-type Belavkin equation, solved by thinning a dominating Poisson
//! process: candidates arrive at rate `Λ = ‖C‖²_op` with marks uniform on
//! `[0, Λ)`, and a candidate is a jump iff its mark lies below the left-limit
//! intensity `μ = ⟨ψ, C†Cψ⟩`.

use std::ops::ControlFlow;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::ensemble::{PathRng, RngStream};
use crate::error::{invalid, Error, Result};
use crate::experiments::{jump_term, lindblad};
use crate::model::ContinuousModel;
use crate::qmath::{CMat2, CVec2, DensityMatrix, WaveFunction};
use crate::table::Table;

/// Smallest intensity at which a jump may be applied.
pub const JUMP_GUARD: f64 = 1e-12;
const RANGE_SLACK: f64 = 1e-9;

/// `μ = ⟨ψ, C†Cψ⟩`.
pub fn intensity(psi: &WaveFunction, model: &ContinuousModel) -> f64 {
    let mu = psi.expectation(model.coupling_sq()).re;
    debug_assert!(mu >= -RANGE_SLACK && mu <= model.rate_bound() * (1.0 + RANGE_SLACK) + RANGE_SLACK);
    mu.max(0.0)
}

/// `(−iH − ½(C†C − μ))ψ`, tangent to the unit sphere.
pub fn drift_no_jump(psi: &WaveFunction, model: &ContinuousModel) -> CVec2 {
    vector_field(psi.vec(), model)
}

fn vector_field(v: &CVec2, model: &ContinuousModel) -> CVec2 {
    let sq = model.coupling_sq().apply(v);
    let mu = v.inner(&sq).re;
    model.neg_i_h().apply(v) - sq.scale_re(0.5) + v.scale_re(0.5 * mu)
}

/// `Cψ/√μ`.
pub fn apply_jump(psi: &WaveFunction, model: &ContinuousModel) -> Result<WaveFunction> {
    let mu = intensity(psi, model);
    if mu < JUMP_GUARD {
        return Err(Error::ImpossibleJump { mu, guard: JUMP_GUARD });
    }
    Ok(WaveFunction::from_unit(model.coupling.apply(psi.vec()).scale_re(1.0 / mu.sqrt())))
}

/// `L(ρ) − 𝓙(ρ) + Tr[𝓙(ρ)]ρ`.
fn density_field(rho: &CMat2, model: &ContinuousModel) -> CMat2 {
    let j = jump_term(rho, model);
    lindblad(rho, model) - j + rho.scale_re(j.trace().re)
}

/// A state the jump equation can be solved for.
pub trait JumpState: Copy + Send + Sync {
    fn intensity(&self, model: &ContinuousModel) -> f64;
    /// One classical fourth-order step of the no-jump flow followed by
    /// renormalization; returns the new state and the deviation from unit
    /// norm (trace) before renormalization.
    fn flow_step(&self, model: &ContinuousModel, h: f64) -> Result<(Self, f64)>;
    fn jump(&self, model: &ContinuousModel) -> Result<Self>;
}

impl JumpState for WaveFunction {
    fn intensity(&self, model: &ContinuousModel) -> f64 {
        intensity(self, model)
    }

    fn flow_step(&self, model: &ContinuousModel, h: f64) -> Result<(Self, f64)> {
        let v = *self.vec();
        let k1 = vector_field(&v, model);
        let k2 = vector_field(&(v + k1.scale_re(0.5 * h)), model);
        let k3 = vector_field(&(v + k2.scale_re(0.5 * h)), model);
        let k4 = vector_field(&(v + k3.scale_re(h)), model);
        let next = v + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(h / 6.0);
        let deviation = (next.norm() - 1.0).abs();
        Ok((WaveFunction::normalize(next)?, deviation))
    }

    fn jump(&self, model: &ContinuousModel) -> Result<Self> {
        apply_jump(self, model)
    }
}

impl JumpState for DensityMatrix {
    fn intensity(&self, model: &ContinuousModel) -> f64 {
        (*model.coupling_sq() * *self.matrix()).trace().re.max(0.0)
    }

    fn flow_step(&self, model: &ContinuousModel, h: f64) -> Result<(Self, f64)> {
        let r = *self.matrix();
        let k1 = density_field(&r, model);
        let k2 = density_field(&(r + k1.scale_re(0.5 * h)), model);
        let k3 = density_field(&(r + k2.scale_re(0.5 * h)), model);
        let k4 = density_field(&(r + k3.scale_re(h)), model);
        let next = r + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(h / 6.0);
        let deviation = (next.trace().re - 1.0).abs();
        Ok((DensityMatrix::renormalize(next)?, deviation))
    }

    fn jump(&self, model: &ContinuousModel) -> Result<Self> {
        let j = jump_term(self.matrix(), model);
        let mu = j.trace().re;
        if mu < JUMP_GUARD {
            return Err(Error::ImpossibleJump { mu, guard: JUMP_GUARD });
        }
        DensityMatrix::renormalize(j)
    }
}

/// Homogeneous marked Poisson process of rate `Λ` with marks uniform on
/// `[0, Λ)`.
#[derive(Debug, Clone)]
pub struct PoissonMeasureSampler {
    rate: f64,
    time: f64,
    exp: Option<Exp<f64>>,
    rng: PathRng,
}

impl PoissonMeasureSampler {
    pub fn new(rate: f64, rng: RngStream) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(invalid("dominating rate must be finite and non-negative"));
        }
        let exp = if rate > 0.0 { Some(Exp::new(rate).map_err(|e| invalid(e.to_string()))?) } else { None };
        Ok(PoissonMeasureSampler { rate, time: 0.0, exp, rng: rng.rng() })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Next candidate `(T̃_i, ξ_i)`; `None` when `Λ = 0`.
    pub fn next_candidate(&mut self) -> Option<(f64, f64)> {
        let exp = self.exp.as_ref()?;
        let mut gap = exp.sample(&mut self.rng);
        while gap <= 0.0 {
            gap = exp.sample(&mut self.rng);
        }
        self.time += gap;
        let mark = self.rng.random::<f64>() * self.rate;
        Some((self.time, mark))
    }
}

/// One candidate of the dominating process and whether it became a jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateEvent {
    pub index: u64,
    pub time: f64,
    pub mark: f64,
    /// Left-limit intensity the mark was compared against.
    pub intensity: f64,
    pub accepted: bool,
}

/// What the solver reports to an observer.
#[derive(Debug, Clone, Copy)]
pub enum JumpObservation<'a, S> {
    /// State at grid point `k` (time `t`), after every candidate at `t' ≤ t`.
    Grid { k: usize, t: f64, state: &'a S, intensity: f64, count: u64, compensator: f64 },
    /// A candidate; `state` is the post-event state.
    Candidate { event: CandidateEvent, state: &'a S, pre_intensity: f64 },
}

/// Final status of a solver run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRunSummary<S> {
    pub state: S,
    pub t: f64,
    pub count: u64,
    pub stopped_early: bool,
    /// Largest pre-renormalization deviation over all no-jump substeps.
    pub max_norm_defect: f64,
    /// Largest substep taken.
    pub max_substep: f64,
}

fn grid_len(horizon: f64, dt: f64) -> usize {
    (horizon / dt - 1e-9).ceil().max(1.0) as usize
}

fn grid_time(k: usize, steps: usize, horizon: f64, dt: f64) -> f64 {
    if k == steps {
        horizon
    } else {
        k as f64 * dt
    }
}

/// Grid `0, dt, 2dt, …, T` used by the continuous solvers (the last step may
/// be shorter).
pub fn time_grid(horizon: f64, dt: f64) -> Vec<f64> {
    let steps = grid_len(horizon, dt);
    (0..=steps).map(|k| grid_time(k, steps, horizon, dt)).collect()
}

fn check_grid(model: &ContinuousModel, horizon: f64, dt: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid("horizon T must be finite and positive"));
    }
    let lambda = model.rate_bound();
    let max_dt = 1e-2 * if lambda > 0.0 { 1.0f64.max(1.0 / lambda) } else { 1.0 };
    if !(dt.is_finite() && dt > 0.0 && dt <= max_dt * (1.0 + 1e-12)) {
        return Err(invalid(format!("dt must lie in (0, {max_dt}]")));
    }
    Ok(())
}

struct Flow<'m, S> {
    model: &'m ContinuousModel,
    dt: f64,
    state: S,
    t: f64,
    compensator: f64,
    max_norm_defect: f64,
    max_substep: f64,
}

impl<S: JumpState> Flow<'_, S> {
    fn advance_to(&mut self, target: f64) -> Result<()> {
        let span = target - self.t;
        if span <= 0.0 {
            return Ok(());
        }
        let n = (span / self.dt - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let mut mu = self.state.intensity(self.model);
        for _ in 0..n {
            let (next, dev) = self.state.flow_step(self.model, h)?;
            let mu_next = next.intensity(self.model);
            self.compensator += 0.5 * h * (mu + mu_next);
            self.max_norm_defect = self.max_norm_defect.max(dev);
            self.state = next;
            mu = mu_next;
        }
        self.max_substep = self.max_substep.max(h);
        self.t = target;
        Ok(())
    }
}

/// Runs the thinning solver on `[0, T]`, reporting every grid point and
/// candidate to `observe`, which may stop the run early.
pub fn solve_jump_with<S, F>(
    model: &ContinuousModel,
    init: S,
    horizon: f64,
    dt: f64,
    rng: RngStream,
    mut observe: F,
) -> Result<JumpRunSummary<S>>
where
    S: JumpState,
    F: FnMut(JumpObservation<'_, S>) -> ControlFlow<()>,
{
    check_grid(model, horizon, dt)?;
    let mut sampler = PoissonMeasureSampler::new(model.rate_bound(), rng)?;
    let steps = grid_len(horizon, dt);
    let mut flow = Flow { model, dt, state: init, t: 0.0, compensator: 0.0, max_norm_defect: 0.0, max_substep: 0.0 };
    let mut count = 0u64;
    let mut index = 0u64;
    let mut next = sampler.next_candidate();
    let summary = |flow: &Flow<'_, S>, count, stopped_early| JumpRunSummary {
        state: flow.state,
        t: flow.t,
        count,
        stopped_early,
        max_norm_defect: flow.max_norm_defect,
        max_substep: flow.max_substep,
    };

    let first = JumpObservation::Grid {
        k: 0,
        t: 0.0,
        state: &flow.state,
        intensity: flow.state.intensity(model),
        count: 0,
        compensator: 0.0,
    };
    if observe(first).is_break() {
        return Ok(summary(&flow, count, true));
    }
    for k in 1..=steps {
        let target = grid_time(k, steps, horizon, dt);
        while let Some((time, mark)) = next.filter(|c| c.0 <= target) {
            flow.advance_to(time)?;
            let mu = flow.state.intensity(model);
            let accepted = mark < mu;
            if accepted {
                flow.state = flow.state.jump(model)?;
                count += 1;
            }
            index += 1;
            let event = CandidateEvent { index, time, mark, intensity: mu, accepted };
            if observe(JumpObservation::Candidate { event, state: &flow.state, pre_intensity: mu }).is_break() {
                return Ok(summary(&flow, count, true));
            }
            next = sampler.next_candidate();
        }
        flow.advance_to(target)?;
        let obs = JumpObservation::Grid {
            k,
            t: target,
            state: &flow.state,
            intensity: flow.state.intensity(model),
            count,
            compensator: flow.compensator,
        };
        if observe(obs).is_break() {
            return Ok(summary(&flow, count, true));
        }
    }
    Ok(summary(&flow, count, false))
}

/// Recorded solution of the jump equation on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpTrajectory<S> {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<S>,
    /// `μ_t` at the grid points.
    pub intensity: Vec<f64>,
    /// `Ñ_t` at the grid points.
    pub counts: Vec<u64>,
    /// `∫₀ᵗ μ_s ds` at the grid points (trapezoidal on the substeps).
    pub compensator: Vec<f64>,
    /// Accepted jump times `T₁ < T₂ < …`.
    pub jump_times: Vec<f64>,
    pub events: Vec<CandidateEvent>,
    pub max_norm_defect: f64,
    pub rng: RngStream,
}

impl<S> JumpTrajectory<S> {
    pub fn events_table(&self) -> Table {
        let mut t = Table::new(&[("i", "1"), ("T_i", "time"), ("xi_i", "1/time"), ("accepted", "bool")]);
        for e in &self.events {
            t.push(vec![e.index as f64, e.time, e.mark, f64::from(u8::from(e.accepted))]);
        }
        t
    }
}

impl JumpTrajectory<WaveFunction> {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            ("t", "time"),
            ("re_x", "1"),
            ("im_x", "1"),
            ("re_y", "1"),
            ("im_y", "1"),
            ("mu", "1/time"),
            ("N_t", "count"),
        ]);
        for i in 0..self.times.len() {
            let s = &self.states[i];
            t.push(vec![
                self.times[i],
                s.x().re,
                s.x().im,
                s.y().re,
                s.y().im,
                self.intensity[i],
                self.counts[i] as f64,
            ]);
        }
        t
    }
}

impl JumpTrajectory<DensityMatrix> {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            ("t", "time"),
            ("rho00", "1"),
            ("re_rho01", "1"),
            ("im_rho01", "1"),
            ("rho11", "1"),
            ("mu", "1/time"),
            ("N_t", "count"),
        ]);
        for i in 0..self.times.len() {
            let m = self.states[i].matrix().0;
            t.push(vec![
                self.times[i],
                m[0][0].re,
                m[0][1].re,
                m[0][1].im,
                m[1][1].re,
                self.intensity[i],
                self.counts[i] as f64,
            ]);
        }
        t
    }
}

fn record<S: JumpState>(
    model: &ContinuousModel,
    init: S,
    horizon: f64,
    dt: f64,
    rng: RngStream,
) -> Result<JumpTrajectory<S>> {
    let mut traj = JumpTrajectory {
        dt,
        times: Vec::new(),
        states: Vec::new(),
        intensity: Vec::new(),
        counts: Vec::new(),
        compensator: Vec::new(),
        jump_times: Vec::new(),
        events: Vec::new(),
        max_norm_defect: 0.0,
        rng,
    };
    let summary = solve_jump_with(model, init, horizon, dt, rng, |obs| {
        match obs {
            JumpObservation::Grid { t, state, intensity, count, compensator, .. } => {
                traj.times.push(t);
                traj.states.push(*state);
                traj.intensity.push(intensity);
                traj.counts.push(count);
                traj.compensator.push(compensator);
            }
            JumpObservation::Candidate { event, .. } => {
                if event.accepted {
                    traj.jump_times.push(event.time);
                }
                traj.events.push(event);
            }
        }
        ControlFlow::Continue(())
    })?;
    traj.max_norm_defect = summary.max_norm_defect;
    Ok(traj)
}

/// Wave-function form.
pub fn solve_jump_sde(
    model: &ContinuousModel,
    psi0: &WaveFunction,
    horizon: f64,
    dt: f64,
    rng: RngStream,
) -> Result<JumpTrajectory<WaveFunction>> {
    record(model, *psi0, horizon, dt, rng)
}

/// Density-matrix form: `dρ = (L(ρ) − CρC† + Tr[CρC†]ρ)dt` between jumps and
/// `ρ → CρC†/Tr[CρC†]` at jumps.
pub fn solve_jump_density(
    model: &ContinuousModel,
    rho0: &DensityMatrix,
    horizon: f64,
    dt: f64,
    rng: RngStream,
) -> Result<JumpTrajectory<DensityMatrix>> {
    record(model, *rho0, horizon, dt, rng)
}
