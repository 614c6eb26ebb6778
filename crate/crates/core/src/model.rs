//! Physical parameters shared by the discrete and continuous dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::qmath::{CMat2, C64, I, ONE, ZERO};

const PARAM_HERMITIAN_TOL: f64 = 1e-12;
const PROBABILITY_SUM_TOL: f64 = 1e-12;
const EQUILIBRIUM_TOL: f64 = 1e-12;

/// System Hamiltonian, coupling operator and environment level energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub hamiltonian: CMat2,
    pub coupling: CMat2,
    pub gamma0: f64,
    pub gamma1: f64,
}

impl SystemParams {
    pub fn new(hamiltonian: CMat2, coupling: CMat2, gamma0: f64, gamma1: f64) -> Result<Self> {
        let p = SystemParams { hamiltonian, coupling, gamma0, gamma1 };
        p.validate()?;
        Ok(p)
    }

    /// `H = diag(1, 0)`, `C = a¹₀ = [[0,1],[0,0]]`, `γ₀ = γ₁ = 0`.
    pub fn equilibrium() -> Self {
        SystemParams {
            hamiltonian: CMat2::diag(ONE, ZERO),
            coupling: lowering(),
            gamma0: 0.0,
            gamma1: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.hamiltonian.is_finite() || !self.coupling.is_finite() {
            return Err(invalid("H and C must have finite entries"));
        }
        if !self.gamma0.is_finite() || !self.gamma1.is_finite() {
            return Err(invalid("gamma0 and gamma1 must be finite"));
        }
        if self.hamiltonian.hermitian_defect() > PARAM_HERMITIAN_TOL * self.hamiltonian.max_abs().max(1.0) {
            return Err(invalid("H must be Hermitian"));
        }
        Ok(())
    }

    /// Whether `(H, C)` is the return-to-equilibrium model (γ's are free).
    pub fn is_equilibrium(&self) -> bool {
        let eq = Self::equilibrium();
        (self.hamiltonian - eq.hamiltonian).max_abs() <= EQUILIBRIUM_TOL
            && (self.coupling - eq.coupling).max_abs() <= EQUILIBRIUM_TOL
    }
}

/// `a¹₀ = [[0,1],[0,0]]`, carrying `X = (0,1)` to `Ω = (1,0)`.
pub fn lowering() -> CMat2 {
    CMat2::from_real([[0.0, 1.0], [0.0, 0.0]])
}

/// `a¹₁ = diag(0, 1)`: diagonal in the reference basis, jump-type limit.
pub fn poisson_observable() -> CMat2 {
    CMat2::from_real([[0.0, 0.0], [0.0, 1.0]])
}

/// `σₓ = a⁰₁ + a¹₀`: non-diagonal, diffusive limit.
pub fn diffusive_observable() -> CMat2 {
    CMat2::from_real([[0.0, 1.0], [1.0, 0.0]])
}

/// Diagonal environment state `η = diag(η₀, η₁)` in the basis `X₀, X₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceState {
    pub eta0: f64,
    pub eta1: f64,
}

impl ReferenceState {
    pub fn new(eta0: f64, eta1: f64) -> Result<Self> {
        if !(eta0.is_finite() && eta1.is_finite()) || eta0 < 0.0 || eta1 < 0.0 {
            return Err(invalid("eta entries must be finite and non-negative"));
        }
        if (eta0 + eta1 - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(invalid(format!("eta must sum to 1, got {}", eta0 + eta1)));
        }
        Ok(ReferenceState { eta0, eta1 })
    }

    /// `η = |X₀⟩⟨X₀|` (zero temperature).
    pub fn ground() -> Self {
        ReferenceState { eta0: 1.0, eta1: 0.0 }
    }

    pub fn weights(&self) -> [f64; 2] {
        [self.eta0, self.eta1]
    }

    pub fn is_pure_ground(&self) -> bool {
        self.eta1 == 0.0
    }
}

/// Which continuous limit an observable leads to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementKind {
    /// Observable diagonal in the reference basis; counting-process limit.
    Poisson,
    /// Observable with off-diagonal part; Brownian limit.
    Diffusive,
}

impl MeasurementKind {
    pub fn of_observable(a: &CMat2) -> Self {
        if a.0[0][1].norm() <= PARAM_HERMITIAN_TOL && a.0[1][0].norm() <= PARAM_HERMITIAN_TOL {
            MeasurementKind::Poisson
        } else {
            MeasurementKind::Diffusive
        }
    }

    /// Canonical observable for this kind.
    pub fn observable(self) -> CMat2 {
        match self {
            MeasurementKind::Poisson => poisson_observable(),
            MeasurementKind::Diffusive => diffusive_observable(),
        }
    }
}

/// Full specification of one repeated interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub system: SystemParams,
    pub reference: ReferenceState,
    pub observable: CMat2,
    /// Interaction duration `τ`.
    pub tau: f64,
    /// Prefactor of `C⊗a⁰₁ + C†⊗a¹₀` in the total Hamiltonian.
    pub coupling_scale: f64,
}

impl ModelSpec {
    pub fn new(
        system: SystemParams,
        reference: ReferenceState,
        observable: CMat2,
        tau: f64,
        coupling_scale: f64,
    ) -> Result<Self> {
        let spec = ModelSpec { system, reference, observable, tau, coupling_scale };
        spec.validate()?;
        Ok(spec)
    }

    /// `τ = 1/n` with coupling renormalized by `√n`.
    pub fn scaled(system: SystemParams, reference: ReferenceState, observable: CMat2, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("interaction scale n must be at least 1"));
        }
        let n = n as f64;
        Self::new(system, reference, observable, 1.0 / n, n.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        ReferenceState::new(self.reference.eta0, self.reference.eta1)?;
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(invalid("tau must be finite and positive"));
        }
        if !self.coupling_scale.is_finite() {
            return Err(invalid("coupling scale must be finite"));
        }
        if !self.observable.is_finite()
            || self.observable.hermitian_defect() > PARAM_HERMITIAN_TOL * self.observable.max_abs().max(1.0)
        {
            return Err(invalid("observable A must be Hermitian"));
        }
        Ok(())
    }

    pub fn measurement_kind(&self) -> MeasurementKind {
        MeasurementKind::of_observable(&self.observable)
    }
}

/// `(H, C)` of a continuous-time equation, with the quantities every solver
/// step needs precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousModel {
    pub hamiltonian: CMat2,
    pub coupling: CMat2,
    coupling_adj: CMat2,
    coupling_sq: CMat2,
    rate_bound: f64,
}

impl ContinuousModel {
    pub fn new(hamiltonian: CMat2, coupling: CMat2) -> Result<Self> {
        SystemParams::new(hamiltonian, coupling, 0.0, 0.0)?;
        let coupling_adj = coupling.adjoint();
        let op = coupling.op_norm();
        Ok(ContinuousModel {
            hamiltonian,
            coupling,
            coupling_adj,
            coupling_sq: coupling_adj * coupling,
            rate_bound: op * op,
        })
    }

    /// The equation with the system's own `(H, C)`.
    pub fn from_system(system: &SystemParams) -> Result<Self> {
        Self::new(system.hamiltonian, system.coupling)
    }

    /// Limit of the √n-scaled repeated interaction: `U⁰₁(n) ≈ −iC/√n`, so
    /// the effective channel operator is `−iC`.
    pub fn scaled_limit(system: &SystemParams) -> Result<Self> {
        Self::new(system.hamiltonian, system.coupling.scale(-I))
    }

    pub fn equilibrium() -> Self {
        Self::from_system(&SystemParams::equilibrium()).expect("equilibrium model is valid")
    }

    pub fn coupling_adj(&self) -> &CMat2 {
        &self.coupling_adj
    }

    /// `C†C`.
    pub fn coupling_sq(&self) -> &CMat2 {
        &self.coupling_sq
    }

    /// `‖C‖²_op`, an upper bound of the jump intensity on unit vectors.
    pub fn rate_bound(&self) -> f64 {
        self.rate_bound
    }

    /// `−iH`.
    pub(crate) fn neg_i_h(&self) -> CMat2 {
        self.hamiltonian.scale(C64::new(0.0, -1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_state_validation() {
        assert!(ReferenceState::new(0.5, 0.6).is_err());
        assert!(ReferenceState::new(-0.1, 1.1).is_err());
        assert!(ReferenceState::new(0.25, 0.75).is_ok());
    }

    #[test]
    fn measurement_kinds() {
        assert_eq!(MeasurementKind::of_observable(&poisson_observable()), MeasurementKind::Poisson);
        assert_eq!(MeasurementKind::of_observable(&diffusive_observable()), MeasurementKind::Diffusive);
    }

    #[test]
    fn non_hermitian_hamiltonian_rejected() {
        let h = CMat2::from_real([[1.0, 2.0], [0.0, 0.0]]);
        assert!(SystemParams::new(h, lowering(), 0.0, 0.0).is_err());
    }

    #[test]
    fn scaled_spec() {
        let s = ModelSpec::scaled(SystemParams::equilibrium(), ReferenceState::ground(), poisson_observable(), 100)
            .unwrap();
        assert!((s.tau - 0.01).abs() < 1e-18 && (s.coupling_scale - 10.0).abs() < 1e-15);
        assert!(ModelSpec::scaled(SystemParams::equilibrium(), ReferenceState::ground(), poisson_observable(), 0)
            .is_err());
    }

    #[test]
    fn rate_bound_is_squared_operator_norm() {
        let m = ContinuousModel::new(CMat2::zero(), lowering().scale_re(2.0)).unwrap();
        assert!((m.rate_bound() - 4.0).abs() < 1e-14);
    }
}
