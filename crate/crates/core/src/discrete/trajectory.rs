use rand::Rng;
use serde::{Deserialize, Serialize};

use super::channel::{build_unitary, kraus_channel, measurement_superops, KrausChannel, MeasurementSuperops};
use crate::ensemble::RngStream;
use crate::error::{Error, Result};
use crate::model::{MeasurementKind, ModelSpec};
use crate::qmath::{DensityMatrix, WaveFunction};
use crate::table::Table;

/// Branches with probability below this cannot be selected by a correct draw.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-14;
/// Accepted deviation of `p + q` from one before renormalization.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Outcome of one measured interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step<S> {
    pub outcome: u8,
    pub state: S,
    /// `[p, q]` evaluated on the state before the step.
    pub probabilities: [f64; 2],
}

fn draw(probabilities: [f64; 2], u: f64) -> Result<u8> {
    let [p, q] = probabilities;
    let defect = (p + q - 1.0).abs();
    if defect > NORMALIZATION_TOL {
        return Err(Error::InternalConsistency(format!("branch probabilities sum to 1 {defect:+e}")));
    }
    let outcome = u8::from(u >= p);
    if probabilities[outcome as usize] < MIN_BRANCH_PROBABILITY {
        return Err(Error::InternalConsistency(format!(
            "selected branch {outcome} has probability {:e}",
            probabilities[outcome as usize]
        )));
    }
    Ok(outcome)
}

/// One step `ρ → 𝓛_i(ρ)/Tr 𝓛_i(ρ)` driven by the uniform draw `u ∈ [0, 1)`;
/// outcome 0 iff `u < Tr 𝓛₀(ρ)`.
pub fn step_density_with(rho: &DensityMatrix, sup: &MeasurementSuperops, u: f64) -> Result<Step<DensityMatrix>> {
    let branches = [sup.branch(0, rho.matrix()), sup.branch(1, rho.matrix())];
    let probabilities = [branches[0].trace().re, branches[1].trace().re];
    let outcome = draw(probabilities, u)?;
    let state = DensityMatrix::renormalize(branches[outcome as usize])?;
    Ok(Step { outcome, state, probabilities })
}

pub fn step_density<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    sup: &MeasurementSuperops,
    rng: &mut R,
) -> Result<Step<DensityMatrix>> {
    step_density_with(rho, sup, rng.random::<f64>())
}

/// One step `ψ → F_iψ/‖F_iψ‖` with probability `‖F_iψ‖²`.
pub fn step_pure_with(psi: &WaveFunction, sup: &MeasurementSuperops, u: f64) -> Result<Step<WaveFunction>> {
    let f = sup.kraus_vectors.as_ref().ok_or_else(|| {
        Error::UnsupportedConfiguration("pure-state trajectories need the zero-temperature reference η = |X₀⟩⟨X₀|".into())
    })?;
    let images = [f[0].apply(psi.vec()), f[1].apply(psi.vec())];
    let probabilities = [images[0].norm_sqr(), images[1].norm_sqr()];
    let outcome = draw(probabilities, u)?;
    let image = images[outcome as usize];
    let state = WaveFunction::from_unit(image.scale_re(1.0 / probabilities[outcome as usize].sqrt()));
    Ok(Step { outcome, state, probabilities })
}

pub fn step_pure<R: Rng + ?Sized>(
    psi: &WaveFunction,
    sup: &MeasurementSuperops,
    rng: &mut R,
) -> Result<Step<WaveFunction>> {
    step_pure_with(psi, sup, rng.random::<f64>())
}

/// Initial condition of a discrete trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    Pure(WaveFunction),
    Mixed(DensityMatrix),
}

/// Current state of a discrete trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DiscreteState {
    Pure(WaveFunction),
    Mixed(DensityMatrix),
}

impl DiscreteState {
    pub fn density(&self) -> DensityMatrix {
        match self {
            DiscreteState::Pure(psi) => psi.dyad(),
            DiscreteState::Mixed(rho) => *rho,
        }
    }
}

impl From<InitialState> for DiscreteState {
    fn from(s: InitialState) -> Self {
        match s {
            InitialState::Pure(psi) => DiscreteState::Pure(psi),
            InitialState::Mixed(rho) => DiscreteState::Mixed(rho),
        }
    }
}

/// Recorded discrete quantum trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTrajectory {
    pub kind: MeasurementKind,
    pub tau: f64,
    /// `ω₁ … ω_k`.
    pub outcomes: Vec<u8>,
    /// `k + 1` states, starting with the initial one.
    pub states: Vec<DiscreteState>,
    /// `[p_{j+1}, q_{j+1}]` for each step.
    pub probabilities: Vec<[f64; 2]>,
    pub rng: RngStream,
}

impl DiscreteTrajectory {
    /// One row per step: outcome, `[p, q]` before it and the state after it.
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            ("k", "1"),
            ("t", "time"),
            ("outcome", "1"),
            ("p", "1"),
            ("q", "1"),
            ("rho00", "1"),
            ("re_rho01", "1"),
            ("im_rho01", "1"),
            ("rho11", "1"),
        ]);
        for (k, (w, pq)) in self.outcomes.iter().zip(&self.probabilities).enumerate() {
            let rho = self.states[k + 1].density();
            let m = rho.matrix();
            t.push(vec![
                (k + 1) as f64,
                (k + 1) as f64 * self.tau,
                f64::from(*w),
                pq[0],
                pq[1],
                m.0[0][0].re,
                m.0[0][1].re,
                m.0[0][1].im,
                m.0[1][1].re,
            ]);
        }
        t
    }
}

/// Unitary, channel and measurement maps of one [`ModelSpec`], built once
/// and shared by every trajectory of an ensemble.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    pub spec: ModelSpec,
    pub channel: KrausChannel,
    pub superops: MeasurementSuperops,
}

impl DiscreteModel {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        let u = build_unitary(spec)?;
        let channel = kraus_channel(&u, &spec.reference);
        let superops = measurement_superops(&u, &spec.reference, &spec.observable)?;
        Ok(DiscreteModel { spec: *spec, channel, superops })
    }

    fn check_initial(&self, init: &InitialState) -> Result<()> {
        if matches!(init, InitialState::Pure(_)) && self.superops.kraus_vectors.is_none() {
            return Err(Error::UnsupportedConfiguration(
                "pure-state trajectories need the zero-temperature reference η = |X₀⟩⟨X₀|".into(),
            ));
        }
        Ok(())
    }

    pub fn step_with(&self, state: &DiscreteState, u: f64) -> Result<Step<DiscreteState>> {
        Ok(match state {
            DiscreteState::Pure(psi) => {
                let s = step_pure_with(psi, &self.superops, u)?;
                Step { outcome: s.outcome, state: DiscreteState::Pure(s.state), probabilities: s.probabilities }
            }
            DiscreteState::Mixed(rho) => {
                let s = step_density_with(rho, &self.superops, u)?;
                Step { outcome: s.outcome, state: DiscreteState::Mixed(s.state), probabilities: s.probabilities }
            }
        })
    }

    /// Runs `steps` steps calling `observe(k, &step)` after each, without
    /// recording; returns the final state.
    pub fn walk<F>(&self, init: InitialState, steps: usize, rng: RngStream, mut observe: F) -> Result<DiscreteState>
    where
        F: FnMut(usize, &Step<DiscreteState>),
    {
        self.check_initial(&init)?;
        let mut rng = rng.rng();
        let mut state = DiscreteState::from(init);
        for k in 0..steps {
            let step = self.step_with(&state, rng.random::<f64>())?;
            observe(k, &step);
            state = step.state;
        }
        Ok(state)
    }

    pub fn run(&self, init: InitialState, steps: usize, rng: RngStream) -> Result<DiscreteTrajectory> {
        let mut outcomes = Vec::with_capacity(steps);
        let mut states = Vec::with_capacity(steps + 1);
        let mut probabilities = Vec::with_capacity(steps);
        states.push(DiscreteState::from(init));
        self.walk(init, steps, rng, |_, step| {
            outcomes.push(step.outcome);
            states.push(step.state);
            probabilities.push(step.probabilities);
        })?;
        Ok(DiscreteTrajectory {
            kind: self.spec.measurement_kind(),
            tau: self.spec.tau,
            outcomes,
            states,
            probabilities,
            rng,
        })
    }
}

pub fn run_discrete(spec: &ModelSpec, init: InitialState, steps: usize, rng: RngStream) -> Result<DiscreteTrajectory> {
    DiscreteModel::new(spec)?.run(init, steps, rng)
}
