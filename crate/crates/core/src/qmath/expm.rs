use super::{CMat4, C64};
use crate::error::{invalid, Result};

/// Taylor degree used on the scaled matrix.
const TAYLOR_DEGREE: u32 = 18;
/// After scaling, `‖A‖₁ ≤ SCALED_NORM`; the truncation remainder is then
/// below `0.5¹⁹/19! ≈ 2e−23`.
const SCALED_NORM: f64 = 0.5;

/// `exp(t·M)` by scaling and squaring with a truncated Taylor kernel.
pub fn mat_exp(m: &CMat4, t: f64) -> Result<CMat4> {
    if !m.is_finite() || !t.is_finite() {
        return Err(invalid("mat_exp: non-finite input"));
    }
    let a = m.scale(C64::new(t, 0.0));
    let norm = a.norm1();
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let a = a.scale(C64::new(0.5f64.powi(squarings), 0.0));

    let id = CMat4::identity();
    let mut p = id;
    for k in (1..=TAYLOR_DEGREE).rev() {
        p = id + (a * p).scale(C64::new(1.0 / f64::from(k), 0.0));
    }
    for _ in 0..squarings {
        p = p * p;
    }
    Ok(p)
}
