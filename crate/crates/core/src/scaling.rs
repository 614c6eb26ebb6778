//! The √n-scaled interaction `U(n)` and its first-order block expansion.

use serde::{Deserialize, Serialize};

use crate::discrete::{build_unitary, measurement_superops, InteractionUnitary};
use crate::ensemble::{try_map_paths, Execution};
use crate::error::{invalid, Result};
use crate::model::{ContinuousModel, MeasurementKind, ModelSpec, ReferenceState, SystemParams};
use crate::qmath::{CMat2, WaveFunction, C64};
use crate::table::Table;

/// `U(n) = exp(−i H_tot / n)` with the coupling renormalized by `√n`.
pub fn build_scaled_unitary(system: &SystemParams, n: u64) -> Result<InteractionUnitary> {
    let spec = ModelSpec::scaled(*system, ReferenceState::ground(), CMat2::zero(), n)?;
    build_unitary(&spec)
}

/// First-order approximants of the blocks of `U(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticBlocks {
    /// `I + (−iH − iγ₀ − ½C†C)/n`.
    pub u00: CMat2,
    /// `−iC/√n`.
    pub u01: CMat2,
    /// `−iC†/√n`.
    pub u10: CMat2,
    /// `I + (−iH − iγ₁ − ½CC†)/n`.
    pub u11: CMat2,
}

pub fn asymptotic_blocks(system: &SystemParams, n: u64) -> Result<AsymptoticBlocks> {
    if n == 0 {
        return Err(invalid("interaction scale n must be at least 1"));
    }
    system.validate()?;
    let inv_n = 1.0 / n as f64;
    let minus_i = C64::new(0.0, -1.0);
    let c = system.coupling;
    let cd = c.adjoint();
    let diag = |gamma: f64, sq: CMat2| {
        let gen = system.hamiltonian.scale(minus_i) + CMat2::identity().scale(C64::new(0.0, -gamma)) - sq.scale_re(0.5);
        CMat2::identity() + gen.scale_re(inv_n)
    };
    Ok(AsymptoticBlocks {
        u00: diag(system.gamma0, cd * c),
        u01: c.scale(minus_i * inv_n.sqrt()),
        u10: cd.scale(minus_i * inv_n.sqrt()),
        u11: diag(system.gamma1, c * cd),
    })
}

/// Spectral-norm residuals of the block expansion at one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub n: u64,
    pub r00: f64,
    pub r01: f64,
    pub r10: f64,
    pub r11: f64,
}

impl ResidualRow {
    /// `n·r⁰₀`.
    pub fn n_r00(&self) -> f64 {
        self.n as f64 * self.r00
    }

    /// `n^{3/2}·r⁰₁`.
    pub fn n32_r01(&self) -> f64 {
        (self.n as f64).powf(1.5) * self.r01
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
}

/// Shape of the residual curves over a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidualChecks {
    /// `n·r⁰₀` strictly decreasing over the whole scan.
    pub diagonal_decreasing: bool,
    /// `n^{3/2}·r⁰₁` finite and below the bound everywhere.
    pub off_diagonal_bounded: bool,
    /// `n^{3/2}·r⁰₁` non-increasing over the rows with `n ≥ from_n`.
    pub off_diagonal_non_increasing: bool,
}

impl ResidualChecks {
    pub fn passed(&self) -> bool {
        self.diagonal_decreasing && self.off_diagonal_bounded && self.off_diagonal_non_increasing
    }
}

impl ResidualReport {
    pub fn checks(&self, from_n: u64, bound: f64) -> ResidualChecks {
        let diag: Vec<f64> = self.rows.iter().map(ResidualRow::n_r00).collect();
        let tail: Vec<f64> = self.rows.iter().filter(|r| r.n >= from_n).map(ResidualRow::n32_r01).collect();
        ResidualChecks {
            diagonal_decreasing: diag.windows(2).all(|w| w[1] < w[0]),
            off_diagonal_bounded: self.rows.iter().all(|r| r.n32_r01().is_finite() && r.n32_r01() < bound),
            off_diagonal_non_increasing: tail.windows(2).all(|w| w[1] <= w[0]),
        }
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            ("n", "1"),
            ("r00", "1"),
            ("r01", "1"),
            ("r10", "1"),
            ("r11", "1"),
            ("n_r00", "1"),
            ("n32_r01", "1"),
        ]);
        for r in &self.rows {
            t.push(vec![r.n as f64, r.r00, r.r01, r.r10, r.r11, r.n_r00(), r.n32_r01()]);
        }
        t
    }
}

pub fn residual_row(system: &SystemParams, n: u64) -> Result<ResidualRow> {
    let u = build_scaled_unitary(system, n)?;
    let a = asymptotic_blocks(system, n)?;
    Ok(ResidualRow {
        n,
        r00: (*u.block(0, 0) - a.u00).op_norm(),
        r01: (*u.block(0, 1) - a.u01).op_norm(),
        r10: (*u.block(1, 0) - a.u10).op_norm(),
        r11: (*u.block(1, 1) - a.u11).op_norm(),
    })
}

/// Residuals over a strictly increasing list of at least two scales.
pub fn residual_scan(system: &SystemParams, n_list: &[u64]) -> Result<ResidualReport> {
    if n_list.len() < 2 {
        return Err(invalid("residual scan needs at least two values of n"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_list must be strictly increasing"));
    }
    let rows = try_map_paths(Execution::default(), n_list.len(), |i| residual_row(system, n_list[i as usize]))?;
    for r in &rows {
        if ![r.r00, r.r01, r.r10, r.r11].iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(crate::Error::InternalConsistency(format!("non-finite residual at n = {}", r.n)));
        }
    }
    Ok(ResidualReport { rows })
}

/// Exact one-step probabilities and their first-order approximations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityExpansion {
    pub p_exact: f64,
    pub q_exact: f64,
    pub p_asym: f64,
    pub q_asym: f64,
}

/// `q ≈ μ/n` for the Poisson observable `a¹₁`; `p ≈ ½ + ν/√n` for `σₓ`.
///
/// The effective channel operator of the scaled interaction is `−iC`, so `ν`
/// is evaluated as `Re⟨ψ, −iCψ⟩ = Im⟨ψ, Cψ⟩`.
pub fn discrete_probability_expansion(
    system: &SystemParams,
    psi: &WaveFunction,
    kind: MeasurementKind,
    n: u64,
) -> Result<ProbabilityExpansion> {
    let spec = ModelSpec::scaled(*system, ReferenceState::ground(), kind.observable(), n)?;
    let u = build_unitary(&spec)?;
    let sup = measurement_superops(&u, &spec.reference, &spec.observable)?;
    let [p_exact, q_exact] = sup.probabilities(psi.dyad().matrix());
    let limit = ContinuousModel::scaled_limit(system)?;
    let n = n as f64;
    let (p_asym, q_asym) = match kind {
        MeasurementKind::Poisson => {
            let mu = crate::belavkin_jump::intensity(psi, &limit);
            (1.0 - mu / n, mu / n)
        }
        MeasurementKind::Diffusive => {
            let nu = crate::belavkin_diffusive::nu(psi, &limit);
            (0.5 + nu / n.sqrt(), 0.5 - nu / n.sqrt())
        }
    };
    Ok(ProbabilityExpansion { p_exact, q_exact, p_asym, q_asym })
}
