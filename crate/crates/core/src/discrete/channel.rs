use crate::error::Result;
use crate::model::{ModelSpec, ReferenceState};
use crate::qmath::{mat_exp, spectral_decompose, CMat2, CMat4, SpectralPair, C64};

/// `H⊗I + I⊗diag(γ₀,γ₁) + s·(C⊗a⁰₁ + C†⊗a¹₀)` with `a⁰₁ = |X₁⟩⟨X₀|`.
pub fn build_total_hamiltonian(spec: &ModelSpec, coupling_scale: f64) -> CMat4 {
    let sys = &spec.system;
    let up = CMat2::unit(1, 0);
    let env_energy = CMat2::diag(C64::new(sys.gamma0, 0.0), C64::new(sys.gamma1, 0.0));
    let interaction = CMat4::tensor(&sys.coupling, &up) + CMat4::tensor(&sys.coupling.adjoint(), &up.adjoint());
    CMat4::tensor(&sys.hamiltonian, &CMat2::identity())
        + CMat4::tensor(&CMat2::identity(), &env_energy)
        + interaction.scale(C64::new(coupling_scale, 0.0))
}

/// `U = exp(−iτH_tot)` split into the blocks `U^i_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionUnitary {
    pub full: CMat4,
    /// `blocks[i][j] = U^i_j`, carrying environment level `X_i` into `X_j`:
    /// `U(ψ⊗X_i) = Σ_j U^i_j ψ ⊗ X_j`.
    pub blocks: [[CMat2; 2]; 2],
}

impl InteractionUnitary {
    pub fn from_matrix(full: CMat4) -> Self {
        let mut blocks = [[CMat2::zero(); 2]; 2];
        for (from, row) in blocks.iter_mut().enumerate() {
            for (to, b) in row.iter_mut().enumerate() {
                *b = full.block(to, from);
            }
        }
        InteractionUnitary { full, blocks }
    }

    /// `U^from_to`.
    pub fn block(&self, from: usize, to: usize) -> &CMat2 {
        &self.blocks[from][to]
    }

    /// Largest spectral-norm violation of the block unitarity relations
    /// `Σ_k (U^i_k)†U^j_k = δ_ij I` (from `U†U = I`) and
    /// `Σ_k U^k_i (U^k_j)† = δ_ij I` (from `UU† = I`).
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let delta = if i == j { CMat2::identity() } else { CMat2::zero() };
                let mut left = CMat2::zero();
                let mut right = CMat2::zero();
                for k in 0..2 {
                    left += self.blocks[i][k].adjoint() * self.blocks[j][k];
                    right += self.blocks[k][i] * self.blocks[k][j].adjoint();
                }
                worst = worst.max((left - delta).op_norm()).max((right - delta).op_norm());
            }
        }
        worst
    }
}

pub fn build_unitary(spec: &ModelSpec) -> Result<InteractionUnitary> {
    spec.validate()?;
    let h_tot = build_total_hamiltonian(spec, spec.coupling_scale);
    let u = mat_exp(&h_tot.scale(C64::new(0.0, -1.0)), spec.tau)?;
    Ok(InteractionUnitary::from_matrix(u))
}

/// Unconditioned one-step map `Φ(ρ) = Tr_env U(ρ⊗η)U† = Σ_{m,j} η_m U^m_j ρ (U^m_j)†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    /// `√η_m U^m_j` for every `m` with `η_m > 0`.
    pub operators: Vec<CMat2>,
}

impl KrausChannel {
    pub fn apply(&self, rho: &CMat2) -> CMat2 {
        self.operators.iter().fold(CMat2::zero(), |acc, k| acc + k.sandwich(rho))
    }

    pub fn iterate(&self, rho: &CMat2, steps: usize) -> CMat2 {
        (0..steps).fold(*rho, |r, _| self.apply(&r))
    }

    /// `max ‖Σ K†K − I‖`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let sum = self.operators.iter().fold(CMat2::zero(), |acc, k| acc + k.adjoint() * *k);
        (sum - CMat2::identity()).op_norm()
    }
}

pub fn kraus_channel(u: &InteractionUnitary, eta: &ReferenceState) -> KrausChannel {
    let mut operators = Vec::with_capacity(4);
    for (m, w) in eta.weights().into_iter().enumerate() {
        if w > 0.0 {
            for j in 0..2 {
                operators.push(u.block(m, j).scale_re(w.sqrt()));
            }
        }
    }
    KrausChannel { operators }
}

/// The pair `(𝓛₀, 𝓛₁)` of conditional one-step maps for an indirect
/// measurement of `A` on the environment copy.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSuperops {
    pub unitary: InteractionUnitary,
    pub reference: ReferenceState,
    pub spectral: SpectralPair,
    /// `F₀, F₁` with `𝓛_i(|ψ⟩⟨ψ|) = |F_iψ⟩⟨F_iψ|`; present when `η = |X₀⟩⟨X₀|`.
    pub kraus_vectors: Option<[CMat2; 2]>,
}

impl MeasurementSuperops {
    /// `𝓛_i(ρ) = Σ_m η_m Σ_{k,l} ⟨X_l|P_i|X_k⟩ U^m_k ρ (U^m_l)†`.
    pub fn branch(&self, i: usize, rho: &CMat2) -> CMat2 {
        let p = &self.spectral.projectors[i];
        let mut out = CMat2::zero();
        for (m, w) in self.reference.weights().into_iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for k in 0..2 {
                for l in 0..2 {
                    let coeff = p.0[l][k] * w;
                    if coeff == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let term = *self.unitary.block(m, k) * *rho * self.unitary.block(m, l).adjoint();
                    out += term.scale(coeff);
                }
            }
        }
        out
    }

    /// `[Tr 𝓛₀(ρ), Tr 𝓛₁(ρ)]`.
    pub fn probabilities(&self, rho: &CMat2) -> [f64; 2] {
        [self.branch(0, rho).trace().re, self.branch(1, rho).trace().re]
    }
}

pub fn measurement_superops(
    u: &InteractionUnitary,
    eta: &ReferenceState,
    observable: &CMat2,
) -> Result<MeasurementSuperops> {
    let spectral = spectral_decompose(observable)?;
    let kraus_vectors = eta.is_pure_ground().then(|| {
        // F_i = Σ_k ⟨α_i, X_k⟩ U⁰_k
        spectral.alpha.map(|a| {
            u.block(0, 0).scale(a.0[0].conj()) + u.block(0, 1).scale(a.0[1].conj())
        })
    });
    Ok(MeasurementSuperops { unitary: *u, reference: *eta, spectral, kraus_vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{diffusive_observable, poisson_observable, SystemParams};
    use crate::qmath::{dyad, CVec2, WaveFunction, I, ONE, ZERO};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn equilibrium(n: u64, observable: CMat2) -> ModelSpec {
        ModelSpec::scaled(SystemParams::equilibrium(), ReferenceState::ground(), observable, n).unwrap()
    }

    fn generic(eta: ReferenceState, observable: CMat2) -> ModelSpec {
        let h = CMat2([[C64::new(0.7, 0.0), C64::new(0.2, -0.4)], [C64::new(0.2, 0.4), C64::new(-0.3, 0.0)]]);
        let c = CMat2([[C64::new(0.1, 0.3), C64::new(0.9, 0.0)], [C64::new(-0.2, 0.1), C64::new(0.4, -0.5)]]);
        let system = SystemParams::new(h, c, 0.3, -0.8).unwrap();
        ModelSpec::new(system, eta, observable, 0.05, 3.0).unwrap()
    }

    fn random_density(rng: &mut ChaCha8Rng) -> CMat2 {
        let mut m = CMat2::zero();
        for r in 0..2 {
            for c in 0..2 {
                m.0[r][c] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        let g = m * m.adjoint();
        g.scale_re(1.0 / g.trace().re)
    }

    #[test]
    fn zero_parameters_give_zero_hamiltonian() {
        let system = SystemParams::new(CMat2::zero(), CMat2::zero(), 0.0, 0.0).unwrap();
        let spec = ModelSpec::new(system, ReferenceState::ground(), poisson_observable(), 0.1, 1.0).unwrap();
        assert_eq!(build_total_hamiltonian(&spec, 1.0), CMat4::zero());
    }

    #[test]
    fn uncoupled_hamiltonian_is_block_diagonal() {
        let spec = generic(ReferenceState::ground(), poisson_observable());
        let h = build_total_hamiltonian(&spec, 0.0);
        assert_eq!(h.block(0, 1), CMat2::zero());
        assert_eq!(h.block(1, 0), CMat2::zero());
        let g0 = CMat2::identity().scale_re(spec.system.gamma0);
        assert!((h.block(0, 0) - spec.system.hamiltonian - g0).max_abs() < 1e-15);
        assert!(build_total_hamiltonian(&spec, 3.0).hermitian_defect() < 1e-12);
    }

    #[test]
    fn ground_times_vacuum_is_an_eigenvector() {
        let spec = equilibrium(16, poisson_observable());
        let h = build_total_hamiltonian(&spec, 4.0);
        for r in 0..4 {
            let expected = if r == 0 { ONE } else { ZERO };
            assert_eq!(h.0[r][0], expected);
        }
        let u = build_unitary(&spec).unwrap();
        let ground = CVec2::new(ONE, ZERO);
        let tau = spec.tau;
        assert!((u.block(0, 0).apply(&ground) - ground.scale(C64::from_polar(1.0, -tau))).norm() < 1e-15);
        assert_eq!(u.block(0, 1).apply(&ground), CVec2::zero());
    }

    #[test]
    fn small_tau_is_close_to_identity() {
        let mut spec = generic(ReferenceState::ground(), poisson_observable());
        spec.tau = 1e-4;
        let h = build_total_hamiltonian(&spec, spec.coupling_scale);
        let u = build_unitary(&spec).unwrap();
        let norm_h = h.norm1();
        assert!((u.full - CMat4::identity()).norm1() <= 2.0 * spec.tau * norm_h);
    }

    #[test]
    fn block_unitarity() {
        for spec in [
            generic(ReferenceState::ground(), poisson_observable()),
            equilibrium(1000, diffusive_observable()),
        ] {
            let u = build_unitary(&spec).unwrap();
            assert!(u.unitarity_defect() < 1e-12, "{}", u.unitarity_defect());
            let s = (*u.block(0, 0)).adjoint() * *u.block(0, 0) + (*u.block(0, 1)).adjoint() * *u.block(0, 1);
            assert!((s - CMat2::identity()).op_norm() < 1e-12);
        }
    }

    #[test]
    fn channel_fixes_ground_in_equilibrium() {
        let spec = equilibrium(50, poisson_observable());
        let u = build_unitary(&spec).unwrap();
        let phi = kraus_channel(&u, &spec.reference);
        let g = WaveFunction::ground().dyad();
        assert!((phi.apply(g.matrix()) - *g.matrix()).max_abs() < 1e-15);
    }

    #[test]
    fn channel_equals_sum_of_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for eta in [ReferenceState::ground(), ReferenceState::new(0.7, 0.3).unwrap()] {
            for a in [poisson_observable(), diffusive_observable(), complex_observable()] {
                let spec = generic(eta, a);
                let u = build_unitary(&spec).unwrap();
                let phi = kraus_channel(&u, &eta);
                let sup = measurement_superops(&u, &eta, &a).unwrap();
                assert!(phi.trace_preservation_defect() < 1e-12);
                let mut worst: f64 = 0.0;
                for r in 0..2 {
                    for c in 0..2 {
                        let e = CMat2::unit(r, c);
                        let d = phi.apply(&e) - sup.branch(0, &e) - sup.branch(1, &e);
                        worst = worst.max(d.max_abs());
                    }
                }
                for _ in 0..20 {
                    let rho = random_density(&mut rng);
                    let d = phi.apply(&rho) - sup.branch(0, &rho) - sup.branch(1, &rho);
                    worst = worst.max(d.max_abs());
                    assert!((phi.apply(&rho).trace().re - 1.0).abs() < 1e-12);
                    let [p, q] = sup.probabilities(&rho);
                    assert!((p + q - 1.0).abs() < 1e-12);
                }
                assert!(worst < 1e-12, "{worst}");
            }
        }
    }

    fn complex_observable() -> CMat2 {
        CMat2([[C64::new(0.2, 0.0), C64::new(0.3, 0.6)], [C64::new(0.3, -0.6), C64::new(-1.0, 0.0)]])
    }

    #[test]
    fn kraus_vectors_reproduce_branches_on_dyads() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for a in [poisson_observable(), diffusive_observable(), complex_observable()] {
            let spec = generic(ReferenceState::ground(), a);
            let u = build_unitary(&spec).unwrap();
            let sup = measurement_superops(&u, &spec.reference, &a).unwrap();
            let f = sup.kraus_vectors.unwrap();
            let norms = (*u.block(0, 0)).adjoint() * *u.block(0, 0) + (*u.block(0, 1)).adjoint() * *u.block(0, 1);
            assert!((f[0].adjoint() * f[0] + f[1].adjoint() * f[1] - norms).max_abs() < 1e-12);
            for _ in 0..100 {
                let v = CVec2::new(
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                );
                let psi = WaveFunction::normalize(v).unwrap();
                let rho = psi.dyad();
                for i in 0..2 {
                    let fv = f[i].apply(psi.vec());
                    assert!((fv.outer(&fv) - sup.branch(i, rho.matrix())).max_abs() < 1e-12);
                }
                let total = f[0].apply(psi.vec()).norm_sqr() + f[1].apply(psi.vec()).norm_sqr();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn no_kraus_vectors_at_positive_temperature() {
        let eta = ReferenceState::new(0.9, 0.1).unwrap();
        let spec = generic(eta, poisson_observable());
        let u = build_unitary(&spec).unwrap();
        assert!(measurement_superops(&u, &eta, &poisson_observable()).unwrap().kraus_vectors.is_none());
    }

    #[test]
    fn degenerate_observable_propagates() {
        let spec = equilibrium(10, poisson_observable());
        let u = build_unitary(&spec).unwrap();
        assert!(measurement_superops(&u, &spec.reference, &CMat2::identity()).is_err());
    }

    #[test]
    fn equilibrium_probabilities_at_ground() {
        let g = WaveFunction::ground().dyad();
        let spec = equilibrium(100, poisson_observable());
        let u = build_unitary(&spec).unwrap();
        let sup = measurement_superops(&u, &spec.reference, &spec.observable).unwrap();
        assert_eq!(sup.probabilities(g.matrix())[1], 0.0);
        let f1 = sup.kraus_vectors.unwrap()[1];
        assert_eq!(f1.apply(WaveFunction::ground().vec()).norm_sqr(), 0.0);

        let spec = equilibrium(100, diffusive_observable());
        let u = build_unitary(&spec).unwrap();
        let sup = measurement_superops(&u, &spec.reference, &spec.observable).unwrap();
        assert!((sup.probabilities(g.matrix())[0] - 0.5).abs() < 1e-15);
        let sum = (*u.block(0, 0) + *u.block(0, 1)).apply(WaveFunction::ground().vec());
        assert!((0.5 * sum.norm_sqr() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn semigroup_law() {
        let eta = ReferenceState::new(0.8, 0.2).unwrap();
        let spec = generic(eta, poisson_observable());
        let phi = kraus_channel(&build_unitary(&spec).unwrap(), &eta);
        let rho = dyad(&CVec2::new(C64::new(0.6, 0.0), I * 0.8)).unwrap();
        let a = phi.iterate(rho.matrix(), 17);
        let b = phi.iterate(&phi.iterate(rho.matrix(), 5), 12);
        assert!((a - b).max_abs() < 1e-12);
    }
}
