//! Small dense complex linear algebra for a qubit coupled to a two-level
//! environment: 2-vectors, 2×2 and 4×4 matrices, the Hermitian spectral
//! decomposition, the matrix exponential and state metrics.
//!
//! Every type here is `Copy` and every operation is pure.

mod expm;
mod spectral;
mod state;

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

pub use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use expm::mat_exp;
pub use spectral::{spectral_decompose, SpectralPair, DEGENERACY_GAP};
pub use state::{dyad, trace_distance, DensityMatrix, WaveFunction, UNIT_NORM_TOL};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// A pair of complex amplitudes `(c0, c1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CVec2(pub [C64; 2]);

impl CVec2 {
    pub const fn new(c0: C64, c1: C64) -> Self {
        CVec2([c0, c1])
    }

    pub fn real(c0: f64, c1: f64) -> Self {
        CVec2([C64::new(c0, 0.0), C64::new(c1, 0.0)])
    }

    pub fn zero() -> Self {
        CVec2([ZERO; 2])
    }

    /// `⟨self, other⟩`, antilinear in the first slot.
    pub fn inner(&self, other: &CVec2) -> C64 {
        self.0[0].conj() * other.0[0] + self.0[1].conj() * other.0[1]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0[0].norm_sqr() + self.0[1].norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        CVec2([self.0[0] * s, self.0[1] * s])
    }

    pub fn scale_re(&self, s: f64) -> Self {
        CVec2([self.0[0] * s, self.0[1] * s])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `|self⟩⟨other|`.
    pub fn outer(&self, other: &CVec2) -> CMat2 {
        let mut m = [[ZERO; 2]; 2];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, z) in row.iter_mut().enumerate() {
                *z = self.0[r] * other.0[c].conj();
            }
        }
        CMat2(m)
    }
}

impl Add for CVec2 {
    type Output = CVec2;
    fn add(self, rhs: CVec2) -> CVec2 {
        CVec2([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1]])
    }
}

impl Sub for CVec2 {
    type Output = CVec2;
    fn sub(self, rhs: CVec2) -> CVec2 {
        CVec2([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1]])
    }
}

/// Row-major 2×2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CMat2(pub [[C64; 2]; 2]);

impl CMat2 {
    pub fn zero() -> Self {
        CMat2([[ZERO; 2]; 2])
    }

    pub fn identity() -> Self {
        Self::diag(ONE, ONE)
    }

    pub fn diag(a: C64, b: C64) -> Self {
        CMat2([[a, ZERO], [ZERO, b]])
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        CMat2([
            [C64::new(m[0][0], 0.0), C64::new(m[0][1], 0.0)],
            [C64::new(m[1][0], 0.0), C64::new(m[1][1], 0.0)],
        ])
    }

    /// Matrix unit `|r⟩⟨c|`.
    pub fn unit(r: usize, c: usize) -> Self {
        let mut m = Self::zero();
        m.0[r][c] = ONE;
        m
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        CMat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        CMat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn apply(&self, v: &CVec2) -> CVec2 {
        let m = &self.0;
        CVec2([
            m[0][0] * v.0[0] + m[0][1] * v.0[1],
            m[1][0] * v.0[0] + m[1][1] * v.0[1],
        ])
    }

    /// `self · ρ · self†`.
    pub fn sandwich(&self, rho: &CMat2) -> CMat2 {
        *self * *rho * self.adjoint()
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from `self†`.
    pub fn hermitian_defect(&self) -> f64 {
        (*self - self.adjoint()).max_abs()
    }

    /// `½(M + M†)`.
    pub fn hermitian_part(&self) -> CMat2 {
        (*self + self.adjoint()).scale_re(0.5)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Spectral norm (largest singular value).
    pub fn op_norm(&self) -> f64 {
        let g = self.adjoint() * *self;
        let a = g.0[0][0].re;
        let d = g.0[1][1].re;
        let b = g.0[0][1];
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        (mean + radius).max(0.0).sqrt()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Add for CMat2 {
    type Output = CMat2;
    fn add(self, rhs: CMat2) -> CMat2 {
        let mut out = self;
        out += rhs;
        out
    }
}

impl AddAssign for CMat2 {
    fn add_assign(&mut self, rhs: CMat2) {
        for r in 0..2 {
            for c in 0..2 {
                self.0[r][c] += rhs.0[r][c];
            }
        }
    }
}

impl Sub for CMat2 {
    type Output = CMat2;
    fn sub(self, rhs: CMat2) -> CMat2 {
        self + (-rhs)
    }
}

impl Neg for CMat2 {
    type Output = CMat2;
    fn neg(self) -> CMat2 {
        self.scale_re(-1.0)
    }
}

impl Mul for CMat2 {
    type Output = CMat2;
    fn mul(self, rhs: CMat2) -> CMat2 {
        let a = &self.0;
        let b = &rhs.0;
        CMat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// Row-major 4×4 complex matrix on `system ⊗ environment`.
///
/// Basis order is `Ω⊗X₀, X⊗X₀, Ω⊗X₁, X⊗X₁`, so the flat index of
/// `|s⟩⊗|e⟩` is `2e + s` and the 2×2 block in block-row `a`, block-column
/// `b` is the system operator carrying environment level `b` into level `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CMat4(pub [[C64; 4]; 4]);

impl CMat4 {
    pub fn zero() -> Self {
        CMat4([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for k in 0..4 {
            m.0[k][k] = ONE;
        }
        m
    }

    pub fn diag(d: [C64; 4]) -> Self {
        let mut m = Self::zero();
        for (k, v) in d.into_iter().enumerate() {
            m.0[k][k] = v;
        }
        m
    }

    /// `sys ⊗ env` in the repository basis order.
    pub fn tensor(sys: &CMat2, env: &CMat2) -> Self {
        let mut m = Self::zero();
        for a in 0..2 {
            for b in 0..2 {
                for s in 0..2 {
                    for t in 0..2 {
                        m.0[2 * a + s][2 * b + t] = env.0[a][b] * sys.0[s][t];
                    }
                }
            }
        }
        m
    }

    /// Block `(row, col)` as a system operator.
    pub fn block(&self, row: usize, col: usize) -> CMat2 {
        let m = &self.0;
        CMat2([
            [m[2 * row][2 * col], m[2 * row][2 * col + 1]],
            [m[2 * row + 1][2 * col], m[2 * row + 1][2 * col + 1]],
        ])
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero();
        for r in 0..4 {
            for c in 0..4 {
                out.0[r][c] = self.0[c][r].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|z| *z *= s);
        out
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..4)
            .map(|c| (0..4).map(|r| self.0[r][c].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `max |(M†M − I)_{rc}|`.
    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint() * *self - Self::identity()).max_abs()
    }

    pub fn hermitian_defect(&self) -> f64 {
        (*self - self.adjoint()).max_abs()
    }
}

impl Add for CMat4 {
    type Output = CMat4;
    fn add(self, rhs: CMat4) -> CMat4 {
        let mut out = self;
        for r in 0..4 {
            for c in 0..4 {
                out.0[r][c] += rhs.0[r][c];
            }
        }
        out
    }
}

impl Sub for CMat4 {
    type Output = CMat4;
    fn sub(self, rhs: CMat4) -> CMat4 {
        self + rhs.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for CMat4 {
    type Output = CMat4;
    fn mul(self, rhs: CMat4) -> CMat4 {
        let mut out = Self::zero();
        for r in 0..4 {
            for k in 0..4 {
                let a = self.0[r][k];
                if a == ZERO {
                    continue;
                }
                for c in 0..4 {
                    out.0[r][c] += a * rhs.0[k][c];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_places_blocks_by_environment_level() {
        let sys = CMat2::from_real([[1.0, 2.0], [3.0, 4.0]]);
        let env = CMat2::unit(1, 0); // |X1><X0|
        let m = CMat4::tensor(&sys, &env);
        assert_eq!(m.block(1, 0), sys);
        assert_eq!(m.block(0, 0), CMat2::zero());
        assert_eq!(m.block(0, 1), CMat2::zero());
    }

    #[test]
    fn op_norm_of_lowering_operator() {
        let c = CMat2::from_real([[0.0, 1.0], [0.0, 0.0]]);
        assert!((c.op_norm() - 1.0).abs() < 1e-15);
        let d = CMat2::from_real([[3.0, 0.0], [0.0, -5.0]]);
        assert!((d.op_norm() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn outer_and_inner_agree() {
        let a = CVec2::new(C64::new(0.3, 0.1), C64::new(-0.2, 0.7));
        let b = CVec2::new(C64::new(1.0, -0.5), C64::new(0.4, 0.2));
        let m = a.outer(&b);
        // <b| (|a><b|) |b> = <b,a> <b,b>
        let lhs = b.inner(&m.apply(&b));
        let rhs = b.inner(&a) * b.norm_sqr();
        assert!((lhs - rhs).norm() < 1e-15);
    }
}
