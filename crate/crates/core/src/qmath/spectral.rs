use super::{CMat2, CVec2, C64};
use crate::error::{invalid, Error, Result};

/// Relative eigenvalue gap below which an observable counts as a multiple
/// of the identity.
pub const DEGENERACY_GAP: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-12;
const LABEL_TIE_TOL: f64 = 1e-12;

/// Eigen-decomposition `A = λ₀P₀ + λ₁P₁` of a non-degenerate Hermitian 2×2 matrix.
///
/// Outcome labels follow the environment reference vector `X₀ = (1, 0)`:
/// `P₀` is the eigenprojector with the larger weight `⟨X₀|P|X₀⟩`, ties broken
/// by the larger `Re ⟨X₀|P|X₁⟩` and then `Im ⟨X₀|P|X₁⟩`. For `A = a¹₁` this
/// gives `P₀ = a⁰₀`; for `A = σₓ` it gives `P₀ = ½[[1,1],[1,1]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPair {
    pub eigenvalues: [f64; 2],
    pub projectors: [CMat2; 2],
    /// Unit eigenvectors; `alpha[0] = (μ, ν)` with `μ` real and non-negative
    /// (or `ν` real positive when `μ = 0`), and `alpha[1] = (ν̄, −μ̄)`.
    pub alpha: [CVec2; 2],
}

impl SpectralPair {
    pub fn mu(&self) -> C64 {
        self.alpha[0].0[0]
    }

    pub fn nu(&self) -> C64 {
        self.alpha[0].0[1]
    }

    pub fn reconstruct(&self) -> CMat2 {
        self.projectors[0].scale_re(self.eigenvalues[0]) + self.projectors[1].scale_re(self.eigenvalues[1])
    }
}

pub fn spectral_decompose(a: &CMat2) -> Result<SpectralPair> {
    if !a.is_finite() {
        return Err(invalid("spectral_decompose: non-finite observable"));
    }
    if a.hermitian_defect() > HERMITIAN_TOL * a.max_abs().max(1.0) {
        return Err(invalid("spectral_decompose: observable is not Hermitian"));
    }
    let d0 = a.0[0][0].re;
    let d1 = a.0[1][1].re;
    let off = 0.5 * (a.0[0][1] + a.0[1][0].conj());
    let mean = 0.5 * (d0 + d1);
    let radius = (0.25 * (d0 - d1) * (d0 - d1) + off.norm_sqr()).sqrt();
    let norm = mean.abs() + radius;
    let gap = 2.0 * radius;
    let threshold = DEGENERACY_GAP * norm;
    if norm == 0.0 || gap < threshold {
        return Err(Error::DegenerateObservable { gap, threshold });
    }

    // P± = ½(I ± (A − mean·I)/r)
    let shifted = CMat2([
        [C64::new(d0 - mean, 0.0), off],
        [off.conj(), C64::new(d1 - mean, 0.0)],
    ]);
    let upper = (CMat2::identity() + shifted.scale_re(1.0 / radius)).scale_re(0.5);
    let lower = CMat2::identity() - upper;

    let key = |p: &CMat2| (p.0[0][0].re, p.0[0][1].re, p.0[0][1].im);
    let (ku, kl) = (key(&upper), key(&lower));
    let upper_first = if (ku.0 - kl.0).abs() > LABEL_TIE_TOL {
        ku.0 > kl.0
    } else if (ku.1 - kl.1).abs() > LABEL_TIE_TOL {
        ku.1 > kl.1
    } else {
        ku.2 >= kl.2
    };
    let (eigenvalues, p0) = if upper_first {
        ([mean + radius, mean - radius], upper)
    } else {
        ([mean - radius, mean + radius], lower)
    };
    let p1 = CMat2::identity() - p0;

    let alpha0 = unit_range_vector(&p0);
    let (mu, nu) = (alpha0.0[0], alpha0.0[1]);
    let alpha1 = CVec2::new(nu.conj(), -mu.conj());

    Ok(SpectralPair { eigenvalues, projectors: [p0, p1], alpha: [alpha0, alpha1] })
}

/// Unit vector spanning the range of a rank-one projector, phase-fixed.
fn unit_range_vector(p: &CMat2) -> CVec2 {
    let col = if p.0[0][0].re >= p.0[1][1].re { 0 } else { 1 };
    let v = CVec2::new(p.0[0][col], p.0[1][col]);
    let v = v.scale_re(1.0 / v.norm());
    let lead = if v.0[0].norm() > LABEL_TIE_TOL { v.0[0] } else { v.0[1] };
    v.scale(lead.conj() / lead.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diagonal_observable() {
        let a = CMat2::from_real([[0.0, 0.0], [0.0, 1.0]]);
        let s = spectral_decompose(&a).unwrap();
        assert_eq!(s.eigenvalues, [0.0, 1.0]);
        assert!((s.projectors[0] - CMat2::from_real([[1.0, 0.0], [0.0, 0.0]])).max_abs() < 1e-15);
        assert!((s.mu() - 1.0).norm() < 1e-15 && s.nu().norm() < 1e-15);
    }

    #[test]
    fn sigma_x_observable() {
        let a = CMat2::from_real([[0.0, 1.0], [1.0, 0.0]]);
        let s = spectral_decompose(&a).unwrap();
        assert_eq!(s.eigenvalues, [1.0, -1.0]);
        let half = CMat2::from_real([[0.5, 0.5], [0.5, 0.5]]);
        assert!((s.projectors[0] - half).max_abs() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.mu() - r).norm() < 1e-15 && (s.nu() - r).norm() < 1e-15);
    }

    #[test]
    fn multiples_of_identity_are_degenerate() {
        for a in [CMat2::identity(), CMat2::zero(), CMat2::identity().scale_re(-3.0)] {
            assert!(matches!(spectral_decompose(&a), Err(Error::DegenerateObservable { .. })));
        }
        let near = CMat2::from_real([[1.0, 1e-12], [1e-12, 1.0]]);
        assert!(matches!(spectral_decompose(&near), Err(Error::DegenerateObservable { .. })));
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = CMat2::from_real([[0.0, 1.0], [0.0, 0.0]]);
        assert!(matches!(spectral_decompose(&a), Err(Error::InvalidArgument(_))));
    }

    fn hermitian() -> impl Strategy<Value = CMat2> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, d, br, bi)| {
            CMat2([
                [C64::new(a, 0.0), C64::new(br, bi)],
                [C64::new(br, -bi), C64::new(d, 0.0)],
            ])
        })
    }

    proptest! {
        #[test]
        fn projector_identities(a in hermitian()) {
            prop_assume!(spectral_decompose(&a).is_ok());
            let s = spectral_decompose(&a).unwrap();
            let [p0, p1] = s.projectors;
            let tol = 1e-12;
            prop_assert!((p0 * p0 - p0).max_abs() < tol);
            prop_assert!((p1 * p1 - p1).max_abs() < tol);
            prop_assert!(p0.hermitian_defect() < tol);
            prop_assert!((p0 + p1 - CMat2::identity()).max_abs() < tol);
            prop_assert!((p0 * p1).max_abs() < tol);
            prop_assert!((s.alpha[0].norm() - 1.0).abs() < tol);
            prop_assert!((s.alpha[0].outer(&s.alpha[0]) - p0).max_abs() < tol);
            prop_assert!((s.alpha[1].outer(&s.alpha[1]) - p1).max_abs() < tol);
            prop_assert!((s.reconstruct() - a).max_abs() <= 1e-12 * (1.0 + a.op_norm()));
        }
    }
}
