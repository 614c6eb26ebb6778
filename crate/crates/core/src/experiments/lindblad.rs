use crate::error::{invalid, Result};
use crate::model::ContinuousModel;
use crate::qmath::{mat_exp, CMat2, CMat4, DensityMatrix, C64};

/// `L(ρ) = −i[H,ρ] − ½{C†C, ρ} + CρC†`.
pub fn lindblad(rho: &CMat2, model: &ContinuousModel) -> CMat2 {
    let neg_i_h = model.neg_i_h();
    let sq = model.coupling_sq();
    neg_i_h * *rho + *rho * neg_i_h.adjoint() - (*sq * *rho + *rho * *sq).scale_re(0.5)
        + model.coupling.sandwich(rho)
}

/// `𝓙(ρ) = CρC†`.
pub fn jump_term(rho: &CMat2, model: &ContinuousModel) -> CMat2 {
    model.coupling.sandwich(rho)
}

fn vectorize(m: &CMat2) -> [C64; 4] {
    [m.0[0][0], m.0[0][1], m.0[1][0], m.0[1][1]]
}

/// Matrix of `L` acting on row-major `vec(ρ)`.
pub fn lindblad_superop(model: &ContinuousModel) -> CMat4 {
    let mut s = CMat4::zero();
    for col in 0..4 {
        let unit = CMat2::unit(col / 2, col % 2);
        let image = vectorize(&lindblad(&unit, model));
        for (row, v) in image.into_iter().enumerate() {
            s.0[row][col] = v;
        }
    }
    s
}

/// `ρ₀ ↦ e^{tL}(ρ₀)` through the exponential of the 4×4 superoperator.
#[derive(Debug, Clone, Copy)]
pub struct MasterFlow {
    generator: CMat4,
}

impl MasterFlow {
    pub fn new(model: &ContinuousModel) -> Self {
        MasterFlow { generator: lindblad_superop(model) }
    }

    pub fn propagator(&self, t: f64) -> Result<CMat4> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(invalid("master flow time must be finite and non-negative"));
        }
        mat_exp(&self.generator, t)
    }

    pub fn at(&self, rho0: &CMat2, t: f64) -> Result<DensityMatrix> {
        let p = self.propagator(t)?;
        let v = vectorize(rho0);
        let mut out = CMat2::zero();
        for (row, slot) in [(0, (0, 0)), (1, (0, 1)), (2, (1, 0)), (3, (1, 1))] {
            out.0[slot.0][slot.1] = (0..4).map(|c| p.0[row][c] * v[c]).sum();
        }
        Ok(DensityMatrix::from_trusted(out.hermitian_part()))
    }
}

pub fn master_flow(rho0: &DensityMatrix, t: f64, model: &ContinuousModel) -> Result<DensityMatrix> {
    MasterFlow::new(model).at(rho0.matrix(), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::{build_unitary, kraus_channel};
    use crate::model::{poisson_observable, ModelSpec, ReferenceState, SystemParams};
    use crate::qmath::{trace_distance, CVec2, WaveFunction};

    fn tilted() -> DensityMatrix {
        WaveFunction::normalize(CVec2::new(C64::new(0.6, 0.1), C64::new(0.3, -0.7))).unwrap().dyad()
    }

    fn generic() -> ContinuousModel {
        ContinuousModel::new(
            CMat2::from_real([[0.4, -0.2], [-0.2, 1.1]]),
            CMat2([[C64::new(0.1, 0.3), C64::new(0.8, 0.0)], [C64::new(0.0, -0.2), C64::new(0.5, 0.1)]]),
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_generator_values() {
        let m = ContinuousModel::equilibrium();
        let g = WaveFunction::ground().dyad();
        assert_eq!(lindblad(g.matrix(), &m).max_abs(), 0.0);
        let e = lindblad(WaveFunction::excited().dyad().matrix(), &m);
        assert_eq!(e.0[1][1].re, -1.0);
        assert_eq!(e.0[0][0].re, 1.0);
    }

    #[test]
    fn generator_is_traceless_and_hermitian() {
        let m = generic();
        let l = lindblad(tilted().matrix(), &m);
        assert!(l.trace().norm() < 1e-12);
        assert!(l.hermitian_defect() < 1e-12);
    }

    #[test]
    fn superop_matches_generator() {
        let m = generic();
        let s = lindblad_superop(&m);
        let r = tilted();
        let v = vectorize(r.matrix());
        let direct = vectorize(&lindblad(r.matrix(), &m));
        for row in 0..4 {
            let x: C64 = (0..4).map(|c| s.0[row][c] * v[c]).sum();
            assert!((x - direct[row]).norm() < 1e-14);
        }
    }

    #[test]
    fn amplitude_damping_closed_form() {
        let m = ContinuousModel::equilibrium();
        let e = WaveFunction::excited().dyad();
        assert_eq!(master_flow(&e, 0.0, &m).unwrap(), e);
        for t in [0.1, 1.0, 3.0] {
            let r = master_flow(&e, t, &m).unwrap();
            assert!((r.excited_population() - (-t).exp()).abs() < 1e-12);
        }
        assert!((master_flow(&e, 1.0, &m).unwrap().excited_population() - 0.36788).abs() < 5e-6);
        let g = WaveFunction::ground().dyad();
        assert!(trace_distance(master_flow(&g, 2.0, &m).unwrap().matrix(), g.matrix()).unwrap() < 1e-15);
        // Coherence decays at rate ½ and rotates at the level splitting.
        let r0 = tilted();
        let r = master_flow(&r0, 1.3, &m).unwrap();
        let expected = r0.matrix().0[0][1] * C64::from_polar((-0.65f64).exp(), -1.3);
        assert!((r.matrix().0[0][1] - expected).norm() < 1e-12);
    }

    #[test]
    fn flow_semigroup() {
        let m = generic();
        let f = MasterFlow::new(&m);
        let r0 = tilted();
        let ab = f.at(f.at(r0.matrix(), 0.7).unwrap().matrix(), 0.4).unwrap();
        let direct = f.at(r0.matrix(), 1.1).unwrap();
        assert!((*ab.matrix() - *direct.matrix()).max_abs() < 1e-9);
        assert!(f.at(r0.matrix(), -1.0).is_err());
    }

    #[test]
    fn channel_is_first_order_in_generator() {
        let system = SystemParams::equilibrium();
        let limit = ContinuousModel::scaled_limit(&system).unwrap();
        let r0 = tilted();
        let mut last = f64::INFINITY;
        for n in [10u64, 100, 1000, 10_000] {
            let spec = ModelSpec::scaled(system, ReferenceState::ground(), poisson_observable(), n).unwrap();
            let phi = kraus_channel(&build_unitary(&spec).unwrap(), &spec.reference);
            let nf = n as f64;
            let rem = phi.apply(r0.matrix()) - *r0.matrix() - lindblad(r0.matrix(), &limit).scale_re(1.0 / nf);
            let scaled = nf * rem.op_norm();
            assert!(scaled < last, "n = {n}: {scaled}");
            last = scaled;
        }
    }
}
