//! The one-parameter family of disk automorphisms relating the virtual MLO
//! half-disk to the real MLO image.
//!
//! For a disk of radius `H` and `b ∈ [0, 1)` the map is
//!
//! ```text
//!          ζ − bH (b − i)/(1 − ib)
//! f(ζ) = ---------------------------
//!         (1 + ib)/(1 − ib) − ibζ/H
//! ```
//!
//! which fixes `H` and sends the origin to `ibH`. Clearing the inner
//! denominators gives `f(ζ) = (Aζ + B)/(Cζ + D)` with
//! `A = 1 − ib`, `B = bH(i − b)`, `C = −ib(1 − ib)/H`, `D = 1 + ib`,
//! and the inverse is `(Dw − B)/(A − Cw)`.

use num_complex::Complex64;

use crate::error::{Error, Result};

const DISK_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusParams {
    b: f64,
    h: f64,
}

impl MobiusParams {
    pub fn new(b: f64, h: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&b) {
            return Err(Error::validation(
                "b",
                format!("must lie in [0, 1), got {b}"),
            ));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::validation("H", format!("must be positive, got {h}")));
        }
        Ok(MobiusParams { b, h })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    fn coefficients(&self) -> [Complex64; 4] {
        let i = Complex64::i();
        let b = self.b;
        let h = self.h;
        let one_m = Complex64::new(1.0, -b);
        [
            one_m,
            b * h * (i - b),
            -i * b * one_m / h,
            Complex64::new(1.0, b),
        ]
    }

    fn check_disk(&self, op: &'static str, z: Complex64) -> Result<()> {
        let r = z.norm();
        if !r.is_finite() || r > self.h * (1.0 + DISK_SLACK) {
            return Err(Error::domain(
                op,
                format!("|{z}| = {r} exceeds the disk radius {}", self.h),
            ));
        }
        Ok(())
    }
}

/// `b = b_c / H`.
pub fn mobius_param_from_case(b_c: f64, h: f64) -> Result<MobiusParams> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::validation("H", format!("must be positive, got {h}")));
    }
    if !(0.0..h).contains(&b_c) {
        return Err(Error::validation(
            "bc",
            format!("must lie in [0, {h}), got {b_c}"),
        ));
    }
    MobiusParams::new(b_c / h, h)
}

pub fn mobius_forward(zeta: Complex64, m: &MobiusParams) -> Result<Complex64> {
    m.check_disk("mobius_forward", zeta)?;
    let [a, b, c, d] = m.coefficients();
    Ok((a * zeta + b) / (c * zeta + d))
}

pub fn mobius_inverse(w: Complex64, m: &MobiusParams) -> Result<Complex64> {
    m.check_disk("mobius_inverse", w)?;
    let [a, b, c, d] = m.coefficients();
    Ok((d * w - b) / (a - c * w))
}
