use serde::{Deserialize, Serialize};

use super::{CMat2, CVec2, C64, ONE, ZERO};
use crate::error::{invalid, Result};

/// Accepted deviation of `‖ψ‖` from one for a wave function.
pub const UNIT_NORM_TOL: f64 = 1e-9;
const DENSITY_TOL: f64 = 1e-9;
const DIFF_HERMITIAN_TOL: f64 = 1e-10;

/// Unit vector in ℂ², the pure state `(x, y)` of the two-level system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction(CVec2);

impl WaveFunction {
    pub fn new(v: CVec2) -> Result<Self> {
        if !v.is_finite() {
            return Err(invalid("wave function has non-finite amplitudes"));
        }
        let dev = (v.norm() - 1.0).abs();
        if dev > UNIT_NORM_TOL {
            return Err(invalid(format!("wave function norm deviates from 1 by {dev:e}")));
        }
        Ok(WaveFunction(v))
    }

    /// Rescales a non-zero finite vector to unit norm.
    pub fn normalize(v: CVec2) -> Result<Self> {
        let n = v.norm();
        if !v.is_finite() || n == 0.0 || !n.is_finite() {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        Ok(WaveFunction(v.scale_re(1.0 / n)))
    }

    pub(crate) fn from_unit(v: CVec2) -> Self {
        WaveFunction(v)
    }

    /// `Ω = (1, 0)`, the invariant state of the return-to-equilibrium model.
    pub fn ground() -> Self {
        WaveFunction(CVec2::new(ONE, ZERO))
    }

    /// `X = (0, 1)`.
    pub fn excited() -> Self {
        WaveFunction(CVec2::new(ZERO, ONE))
    }

    pub fn vec(&self) -> &CVec2 {
        &self.0
    }

    pub fn x(&self) -> C64 {
        self.0 .0[0]
    }

    pub fn y(&self) -> C64 {
        self.0 .0[1]
    }

    pub fn dyad(&self) -> DensityMatrix {
        DensityMatrix(self.0.outer(&self.0))
    }

    /// `⟨ψ, Mψ⟩`.
    pub fn expectation(&self, m: &CMat2) -> C64 {
        self.0.inner(&m.apply(&self.0))
    }
}

/// Hermitian, positive semidefinite, trace-one 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix(CMat2);

impl DensityMatrix {
    pub fn new(m: CMat2) -> Result<Self> {
        if !m.is_finite() {
            return Err(invalid("density matrix has non-finite entries"));
        }
        if m.hermitian_defect() > DENSITY_TOL {
            return Err(invalid("density matrix is not Hermitian"));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > DENSITY_TOL {
            return Err(invalid(format!("density matrix trace is {tr}, expected 1")));
        }
        let h = m.hermitian_part();
        if min_eigenvalue(&h) < -DENSITY_TOL {
            return Err(invalid("density matrix is not positive semidefinite"));
        }
        Ok(DensityMatrix(m))
    }

    /// Hermitian part of `m` divided by its trace.
    pub fn renormalize(m: CMat2) -> Result<Self> {
        let h = m.hermitian_part();
        let tr = h.trace().re;
        if !h.is_finite() || tr <= 0.0 || !tr.is_finite() {
            return Err(invalid("cannot renormalize a matrix with non-positive trace"));
        }
        Ok(DensityMatrix(h.scale_re(1.0 / tr)))
    }

    pub(crate) fn from_trusted(m: CMat2) -> Self {
        DensityMatrix(m)
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(CMat2::identity().scale_re(0.5))
    }

    pub fn matrix(&self) -> &CMat2 {
        &self.0
    }

    /// `⟨X|ρ|X⟩`, the excited population.
    pub fn excited_population(&self) -> f64 {
        self.0 .0[1][1].re
    }
}

impl AsRef<CMat2> for DensityMatrix {
    fn as_ref(&self) -> &CMat2 {
        &self.0
    }
}

fn min_eigenvalue(h: &CMat2) -> f64 {
    let a = h.0[0][0].re;
    let d = h.0[1][1].re;
    let mean = 0.5 * (a + d);
    mean - (0.25 * (a - d) * (a - d) + h.0[0][1].norm_sqr()).sqrt()
}

/// `|ψ⟩⟨ψ|` for a vector that must be of unit norm.
pub fn dyad(psi: &CVec2) -> Result<DensityMatrix> {
    Ok(WaveFunction::new(*psi)?.dyad())
}

/// `½‖ρ − σ‖₁` from the eigenvalues of the Hermitian difference.
pub fn trace_distance(rho: &CMat2, sigma: &CMat2) -> Result<f64> {
    let d = *rho - *sigma;
    if !d.is_finite() || d.hermitian_defect() > DIFF_HERMITIAN_TOL {
        return Err(invalid("trace_distance: difference is not Hermitian"));
    }
    let a = d.0[0][0].re;
    let b = d.0[1][1].re;
    let mean = 0.5 * (a + b);
    let off = 0.5 * (d.0[0][1] + d.0[1][0].conj());
    let radius = (0.25 * (a - b) * (a - b) + off.norm_sqr()).sqrt();
    Ok(0.5 * ((mean + radius).abs() + (mean - radius).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn dyads_of_basis_and_superposition() {
        assert_eq!(*WaveFunction::ground().dyad().matrix(), CMat2::from_real([[1.0, 0.0], [0.0, 0.0]]));
        assert_eq!(*WaveFunction::excited().dyad().matrix(), CMat2::from_real([[0.0, 0.0], [0.0, 1.0]]));
        let psi = CVec2::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2));
        let expected = CMat2([
            [C64::new(0.5, 0.0), C64::new(0.0, -0.5)],
            [C64::new(0.0, 0.5), C64::new(0.5, 0.0)],
        ]);
        assert!((*dyad(&psi).unwrap().matrix() - expected).max_abs() < 1e-15);
    }

    #[test]
    fn dyad_rejects_non_unit() {
        assert!(dyad(&CVec2::real(1.0, 1.0)).is_err());
    }

    #[test]
    fn trace_distance_reference_values() {
        let g = WaveFunction::ground().dyad();
        let e = WaveFunction::excited().dyad();
        let mixed = DensityMatrix::maximally_mixed();
        assert_eq!(trace_distance(g.matrix(), g.matrix()).unwrap(), 0.0);
        assert!((trace_distance(g.matrix(), e.matrix()).unwrap() - 1.0).abs() < 1e-15);
        assert!((trace_distance(mixed.matrix(), g.matrix()).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trace_distance_rejects_non_hermitian_difference() {
        let m = CMat2::from_real([[0.5, 0.3], [0.0, 0.5]]);
        assert!(trace_distance(&m, &CMat2::identity().scale_re(0.5)).is_err());
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(CMat2::from_real([[0.6, 0.0], [0.0, 0.6]])).is_err());
        assert!(DensityMatrix::new(CMat2::from_real([[1.5, 0.0], [0.0, -0.5]])).is_err());
        assert!(DensityMatrix::new(CMat2::from_real([[0.7, 0.1], [0.1, 0.3]])).is_ok());
    }

    pub(crate) fn unit_vector() -> impl Strategy<Value = CVec2> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-zero", |(a, b, c, d)| a * a + b * b + c * c + d * d > 1e-3)
            .prop_map(|(a, b, c, d)| {
                let v = CVec2::new(C64::new(a, b), C64::new(c, d));
                v.scale_re(1.0 / v.norm())
            })
    }

    proptest! {
        #[test]
        fn dyad_is_phase_invariant(v in unit_vector(), theta in 0.0..std::f64::consts::TAU) {
            let a = dyad(&v).unwrap();
            let b = dyad(&v.scale(C64::from_polar(1.0, theta))).unwrap();
            prop_assert!((*a.matrix() - *b.matrix()).max_abs() < 1e-12);
            prop_assert!((a.matrix().trace().re - 1.0).abs() < 1e-12);
        }

        #[test]
        fn trace_distance_is_a_metric(u in unit_vector(), v in unit_vector(), w in unit_vector()) {
            let (a, b, c) = (dyad(&u).unwrap(), dyad(&v).unwrap(), dyad(&w).unwrap());
            let ab = trace_distance(a.matrix(), b.matrix()).unwrap();
            let ba = trace_distance(b.matrix(), a.matrix()).unwrap();
            let bc = trace_distance(b.matrix(), c.matrix()).unwrap();
            let ac = trace_distance(a.matrix(), c.matrix()).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        }
    }
}
