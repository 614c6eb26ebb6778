//! Diffusive Belavkin equation
//! `dψ = (−iH − ½(C†C − 2νC + ν²))ψ dt + (C − ν)ψ dW`, `ν = Re⟨ψ, Cψ⟩`,
//! integrated by Euler–Maruyama with renormalization after every step.

use std::ops::ControlFlow;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ensemble::RngStream;
use crate::error::{invalid, Result};
use crate::experiments::lindblad;
use crate::model::ContinuousModel;
use crate::qmath::{CMat2, CVec2, DensityMatrix, WaveFunction};
use crate::belavkin_jump::time_grid;
use crate::table::Table;

const RANGE_SLACK: f64 = 1e-9;

/// `ν = Re⟨ψ, Cψ⟩`.
pub fn nu(psi: &WaveFunction, model: &ContinuousModel) -> f64 {
    let v = psi.expectation(&model.coupling).re;
    debug_assert!(v.abs() <= model.rate_bound().sqrt() * (1.0 + RANGE_SLACK) + RANGE_SLACK);
    v
}

fn drift_at(v: &CVec2, nu: f64, model: &ContinuousModel) -> CVec2 {
    let c = model.coupling.apply(v);
    let csq = model.coupling_sq().apply(v);
    model.neg_i_h().apply(v) - (csq - c.scale_re(2.0 * nu) + v.scale_re(nu * nu)).scale_re(0.5)
}

fn diffusion_at(v: &CVec2, nu: f64, model: &ContinuousModel) -> CVec2 {
    model.coupling.apply(v) - v.scale_re(nu)
}

/// `(−iH − ½(C†C − 2νC + ν²))ψ`.
pub fn drift_diffusive(psi: &WaveFunction, model: &ContinuousModel) -> CVec2 {
    drift_at(psi.vec(), nu(psi, model), model)
}

/// `(C − ν)ψ`.
pub fn diffusion_diffusive(psi: &WaveFunction, model: &ContinuousModel) -> CVec2 {
    diffusion_at(psi.vec(), nu(psi, model), model)
}

/// `normalize(ψ + drift·dt + diffusion·ΔW)`, with the deviation of the
/// unnormalized norm from one.
pub fn em_step(psi: &WaveFunction, dt: f64, dw: f64, model: &ContinuousModel) -> Result<(WaveFunction, f64)> {
    if !(dt.is_finite() && dt >= 0.0 && dw.is_finite()) {
        return Err(invalid("em_step needs dt ≥ 0 and a finite increment"));
    }
    let v = psi.vec();
    let n = nu(psi, model);
    let next = *v + drift_at(v, n, model).scale_re(dt) + diffusion_at(v, n, model).scale_re(dw);
    let deviation = (next.norm() - 1.0).abs();
    Ok((WaveFunction::normalize(next)?, deviation))
}

/// Discretization of the density-matrix equation
/// `dρ = L(ρ)dt + (Cρ + ρC† − Tr[(C+C†)ρ]ρ)dW`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityScheme {
    /// `ρ + L(ρ)dt + (Cρ + ρC† − 2νρ)ΔW`, Hermitized and trace-renormalized.
    /// Replaces `ΔW²` by `dt` in the `CρC†` term, so it drifts away from the
    /// wave-function path by `O(√dt)` under shared increments.
    EulerMaruyama,
    /// `MρM†/Tr[MρM†]` with `M = I + (−iH − ½(C†C − 2νC + ν²))dt + (C − ν)ΔW`;
    /// same Itô expansion, positivity preserving, and the exact image of the
    /// wave-function step under `ψ ↦ |ψ⟩⟨ψ|`.
    #[default]
    Kraus,
}

fn density_nu(rho: &CMat2, model: &ContinuousModel) -> f64 {
    (model.coupling * *rho).trace().re
}

/// One step of the density-matrix equation; returns the new state and
/// `|Tr − 1|` before renormalization.
pub fn density_step(
    rho: &DensityMatrix,
    dt: f64,
    dw: f64,
    model: &ContinuousModel,
    scheme: DensityScheme,
) -> Result<(DensityMatrix, f64)> {
    if !(dt.is_finite() && dt >= 0.0 && dw.is_finite()) {
        return Err(invalid("density step needs dt ≥ 0 and a finite increment"));
    }
    let r = *rho.matrix();
    let nu = density_nu(&r, model);
    let next = match scheme {
        DensityScheme::EulerMaruyama => {
            let noise = model.coupling * r + r * *model.coupling_adj() - r.scale_re(2.0 * nu);
            r + lindblad(&r, model).scale_re(dt) + noise.scale_re(dw)
        }
        DensityScheme::Kraus => {
            let id = CMat2::identity();
            let c = model.coupling;
            let a = model.neg_i_h() - (*model.coupling_sq() - c.scale_re(2.0 * nu) + id.scale_re(nu * nu)).scale_re(0.5);
            let m = id + a.scale_re(dt) + (c - id.scale_re(nu)).scale_re(dw);
            m.sandwich(&r)
        }
    };
    let deviation = (next.trace().re - 1.0).abs();
    Ok((DensityMatrix::renormalize(next)?, deviation))
}

/// Recorded solution on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusivePath<S> {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<S>,
    /// `ν_t` at the grid points.
    pub nu: Vec<f64>,
    /// `dw[k]` is the increment over `(t_{k−1}, t_k]`; `dw[0] = 0`.
    pub dw: Vec<f64>,
    /// Largest pre-renormalization deviation over the path.
    pub max_norm_defect: f64,
    pub rng: RngStream,
}

impl DiffusivePath<WaveFunction> {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            ("t", "time"),
            ("re_x", "1"),
            ("im_x", "1"),
            ("re_y", "1"),
            ("im_y", "1"),
            ("nu", "1/sqrt(time)"),
            ("dW", "sqrt(time)"),
        ]);
        for i in 0..self.times.len() {
            let s = &self.states[i];
            t.push(vec![self.times[i], s.x().re, s.x().im, s.y().re, s.y().im, self.nu[i], self.dw[i]]);
        }
        t
    }
}

impl DiffusivePath<DensityMatrix> {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            ("t", "time"),
            ("rho00", "1"),
            ("re_rho01", "1"),
            ("im_rho01", "1"),
            ("rho11", "1"),
            ("nu", "1/sqrt(time)"),
            ("dW", "sqrt(time)"),
        ]);
        for i in 0..self.times.len() {
            let m = self.states[i].matrix().0;
            t.push(vec![self.times[i], m[0][0].re, m[0][1].re, m[0][1].im, m[1][1].re, self.nu[i], self.dw[i]]);
        }
        t
    }
}

fn check_grid(horizon: f64, dt: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid("horizon T must be finite and positive"));
    }
    if !(dt.is_finite() && dt > 0.0 && dt <= 1e-2 * (1.0 + 1e-12)) {
        return Err(invalid("dt must lie in (0, 0.01]"));
    }
    Ok(())
}

/// `(h_k, ΔW_k)` over the solver grid `0, dt, …, T`, drawn lazily from the
/// path stream; `ΔW_k ~ N(0, h_k)`.
pub fn increment_stream(horizon: f64, dt: f64, rng: RngStream) -> Result<impl Iterator<Item = (f64, f64)>> {
    check_grid(horizon, dt)?;
    let grid = time_grid(horizon, dt);
    let mut rng = rng.rng();
    Ok((1..grid.len()).map(move |k| {
        let h = grid[k] - grid[k - 1];
        let z: f64 = StandardNormal.sample(&mut rng);
        (h, z * h.sqrt())
    }))
}

/// Brownian increments over the solver grid, identical to those a solver run
/// with the same stream consumes.
pub fn brownian_increments(horizon: f64, dt: f64, rng: RngStream) -> Result<Vec<f64>> {
    Ok(increment_stream(horizon, dt, rng)?.map(|(_, dw)| dw).collect())
}

/// State at grid point `k` reported to an observer.
#[derive(Debug, Clone, Copy)]
pub struct DiffusiveObservation<'a, S> {
    pub k: usize,
    pub t: f64,
    pub state: &'a S,
    pub nu: f64,
    /// Increment over `(t_{k−1}, t_k]`; zero at `k = 0`.
    pub dw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusiveRunSummary<S> {
    pub state: S,
    pub t: f64,
    pub stopped_early: bool,
    /// Largest pre-renormalization deviation over the steps taken.
    pub max_norm_defect: f64,
}

fn drive<S, F>(
    init: S,
    steps: impl Iterator<Item = (f64, f64)>,
    nu_of: impl Fn(&S) -> f64,
    step: impl Fn(&S, f64, f64) -> Result<(S, f64)>,
    mut observe: F,
) -> Result<DiffusiveRunSummary<S>>
where
    S: Copy,
    F: FnMut(DiffusiveObservation<'_, S>) -> ControlFlow<()>,
{
    let mut out = DiffusiveRunSummary { state: init, t: 0.0, stopped_early: false, max_norm_defect: 0.0 };
    let first = DiffusiveObservation { k: 0, t: 0.0, state: &out.state, nu: nu_of(&out.state), dw: 0.0 };
    if observe(first).is_break() {
        out.stopped_early = true;
        return Ok(out);
    }
    for (k, (h, dw)) in steps.enumerate() {
        let (next, dev) = step(&out.state, h, dw)?;
        out.max_norm_defect = out.max_norm_defect.max(dev);
        out.state = next;
        out.t += h;
        let obs = DiffusiveObservation { k: k + 1, t: out.t, state: &out.state, nu: nu_of(&out.state), dw };
        if observe(obs).is_break() {
            out.stopped_early = true;
            break;
        }
    }
    Ok(out)
}

/// Wave-function solver reporting every grid point to `observe`.
pub fn solve_diffusive_with<F>(
    model: &ContinuousModel,
    psi0: &WaveFunction,
    horizon: f64,
    dt: f64,
    rng: RngStream,
    observe: F,
) -> Result<DiffusiveRunSummary<WaveFunction>>
where
    F: FnMut(DiffusiveObservation<'_, WaveFunction>) -> ControlFlow<()>,
{
    let steps = increment_stream(horizon, dt, rng)?;
    drive(*psi0, steps, |s| nu(s, model), |s, h, dw| em_step(s, h, dw, model), observe)
}

/// Density-matrix solver reporting every grid point to `observe`.
pub fn solve_diffusive_density_observed<F>(
    model: &ContinuousModel,
    rho0: &DensityMatrix,
    horizon: f64,
    dt: f64,
    rng: RngStream,
    scheme: DensityScheme,
    observe: F,
) -> Result<DiffusiveRunSummary<DensityMatrix>>
where
    F: FnMut(DiffusiveObservation<'_, DensityMatrix>) -> ControlFlow<()>,
{
    let steps = increment_stream(horizon, dt, rng)?;
    drive(
        *rho0,
        steps,
        |r| density_nu(r.matrix(), model),
        |r, h, dw| density_step(r, h, dw, model, scheme),
        observe,
    )
}

fn recorder<S: Copy>(dt: f64, rng: RngStream) -> DiffusivePath<S> {
    DiffusivePath { dt, times: Vec::new(), states: Vec::new(), nu: Vec::new(), dw: Vec::new(), max_norm_defect: 0.0, rng }
}

impl<S: Copy> DiffusivePath<S> {
    fn push(&mut self, obs: DiffusiveObservation<'_, S>) -> ControlFlow<()> {
        self.times.push(obs.t);
        self.states.push(*obs.state);
        self.nu.push(obs.nu);
        self.dw.push(obs.dw);
        ControlFlow::Continue(())
    }
}

/// Wave-function form on `[0, T]`.
pub fn solve_diffusive_sde(
    model: &ContinuousModel,
    psi0: &WaveFunction,
    horizon: f64,
    dt: f64,
    rng: RngStream,
) -> Result<DiffusivePath<WaveFunction>> {
    let mut path = recorder(dt, rng);
    let summary = solve_diffusive_with(model, psi0, horizon, dt, rng, |o| path.push(o))?;
    path.max_norm_defect = summary.max_norm_defect;
    Ok(path)
}

/// Density-matrix form with the default scheme.
pub fn solve_diffusive_density(
    model: &ContinuousModel,
    rho0: &DensityMatrix,
    horizon: f64,
    dt: f64,
    rng: RngStream,
) -> Result<DiffusivePath<DensityMatrix>> {
    solve_diffusive_density_with(model, rho0, horizon, dt, rng, DensityScheme::default())
}

pub fn solve_diffusive_density_with(
    model: &ContinuousModel,
    rho0: &DensityMatrix,
    horizon: f64,
    dt: f64,
    rng: RngStream,
    scheme: DensityScheme,
) -> Result<DiffusivePath<DensityMatrix>> {
    let mut path = recorder(dt, rng);
    let summary = solve_diffusive_density_observed(model, rho0, horizon, dt, rng, scheme, |o| path.push(o))?;
    path.max_norm_defect = summary.max_norm_defect;
    Ok(path)
}

/// Wave-function states at `0, dt, 2dt, …` driven by explicit increments.
pub fn em_path_from_increments(
    model: &ContinuousModel,
    psi0: &WaveFunction,
    dt: f64,
    increments: &[f64],
) -> Result<Vec<WaveFunction>> {
    let mut out = Vec::with_capacity(increments.len() + 1);
    drive(
        *psi0,
        increments.iter().map(|dw| (dt, *dw)),
        |s| nu(s, model),
        |s, h, dw| em_step(s, h, dw, model),
        |o| {
            out.push(*o.state);
            ControlFlow::Continue(())
        },
    )?;
    Ok(out)
}
