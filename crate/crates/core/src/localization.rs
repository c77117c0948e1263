//! Closed-form localization on the symmetrized breast.
//!
//! The nodule sits at height `h = z_n` on the horizontal chord `LR` of the
//! sphere of radius `a` through `x = x_n`. The chord ratio `rho = |LP|/|LR|`
//! read from the MLO view and the chord angle `theta` determine the layer
//! factor `lf = |OP|/a` through
//!
//! ```text
//! lf² = 1 − 4ρ(1 − ρ)(1 − (h/a)²)cos²θ,      cos²θ = 1 − x_n²/(a² − z_n²)
//! ```
//!
//! and the missing depth coordinate is `y_n = (1 − 2ρ)√(a² − x_n² − z_n²)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{BreastMeasurements, NodulePosition, Point3, Side, SurgeryTarget, TargetMethod};

/// Radicands in `[-RADICAND_SLACK, 0)` are rounding noise and clamp to zero.
pub const RADICAND_SLACK: f64 = 1e-12;

/// Layer factor at or above which the nodule is treated as lying on the skin.
pub const SKIN_LF: f64 = 0.97;
/// MLO chord length (cm) at or below which the extremes count as coincident.
pub const SKIN_CHORD_CM: f64 = 0.5;

/// Skin points at the ends of the nodule's horizontal chord.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordExtremes {
    /// Front end, `y > 0`.
    pub l: Point3,
    /// Back end, `y < 0`.
    pub r: Point3,
    pub mlo_l: Complex64,
    pub mlo_r: Complex64,
}

impl ChordExtremes {
    pub fn mlo_length(&self) -> f64 {
        (self.mlo_r - self.mlo_l).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoResult {
    pub rho: f64,
    pub side: Side,
}

fn clamp_radicand(op: &'static str, v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -RADICAND_SLACK {
        Ok(0.0)
    } else {
        Err(Error::domain(op, format!("negative radicand {v:.3e}")))
    }
}

/// Maps CC view coordinates to the nodule's `(x_n, z_n)` at SRG.
pub fn mk_nodule_cc(cc: (f64, f64), m: &BreastMeasurements) -> Result<(f64, f64)> {
    let (x_c, z_c) = cc;
    let hc = m.h_c();
    if x_c * x_c + z_c * z_c > hc * hc * (1.0 + 1e-12) {
        return Err(Error::domain(
            "mk_nodule_cc",
            format!("({x_c}, {z_c}) lies outside the CC contour of radius {hc}"),
        ));
    }
    Ok((m.x_r() * x_c / hc, m.z_r() * z_c / hc))
}

pub fn cos2_theta(x_n: f64, z_n: f64, a: f64) -> Result<f64> {
    let span = a * a - z_n * z_n;
    if !(span > 0.0) {
        return Err(Error::domain(
            "cos2_theta",
            format!("height {z_n} is not below the radius {a}"),
        ));
    }
    let v = clamp_radicand("cos2_theta", 1.0 - x_n * x_n / span).map_err(|_| {
        Error::domain(
            "cos2_theta",
            format!("nodule ({x_n}, {z_n}) lies outside the symmetrized breast of radius {a}"),
        )
    })?;
    Ok(v.min(1.0))
}

fn chord_weight(h: f64, a: f64, cos2theta: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::validation("a", format!("must be positive, got {a}")));
    }
    if !(0.0..a).contains(&h) {
        return Err(Error::validation(
            "h",
            format!("must lie in [0, {a}), got {h}"),
        ));
    }
    if !(0.0..=1.0).contains(&cos2theta) {
        return Err(Error::validation(
            "cos2theta",
            format!("must lie in [0, 1], got {cos2theta}"),
        ));
    }
    let t = h / a;
    Ok((1.0 - t * t) * cos2theta)
}

pub fn layer_factor(rho: f64, h: f64, a: f64, cos2theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::validation(
            "rho",
            format!("must lie in [0, 1], got {rho}"),
        ));
    }
    let k = chord_weight(h, a, cos2theta)?;
    let lf2 = clamp_radicand("layer_factor", 1.0 - 4.0 * rho * (1.0 - rho) * k)?;
    Ok(lf2.sqrt().min(1.0))
}

/// Smallest attainable layer factor, reached at `rho = 0.5`.
pub fn min_layer_factor(h: f64, a: f64, cos2theta: f64) -> Result<f64> {
    layer_factor(0.5, h, a, cos2theta)
}

/// Inverts the layer-factor relation for `rho` on the requested side.
pub fn rho_from_layer_factor(
    lf: f64,
    h: f64,
    a: f64,
    cos2theta: f64,
    side: Side,
) -> Result<RhoResult> {
    if !(lf.is_finite() && (0.0..=1.0).contains(&lf)) {
        return Err(Error::validation(
            "lf",
            format!("must lie in [0, 1], got {lf}"),
        ));
    }
    let k = chord_weight(h, a, cos2theta)?;
    let deficit = 1.0 - lf * lf;
    let min = (1.0 - k).max(0.0).sqrt();
    // ρ(1 − ρ) = q, attainable for q ≤ 1/4
    let disc = if deficit <= 0.0 {
        1.0
    } else if k > 0.0 {
        clamp_radicand("rho_from_layer_factor", 1.0 - deficit / k)
            .map_err(|_| Error::NoSolution { lf, min })?
    } else {
        return Err(Error::NoSolution { lf, min });
    };
    let q = deficit.max(0.0) / (4.0 * k.max(f64::MIN_POSITIVE));
    let small = 2.0 * q / (1.0 + disc.sqrt());
    let rho = match side {
        Side::Front => small,
        Side::Back => 1.0 - small,
    };
    Ok(RhoResult { rho, side })
}

/// Chord ratio measured as a straight-line distance in the virtual MLO plane.
pub fn rho_from_views(
    p_virtual: Complex64,
    mlo_l: Complex64,
    mlo_r: Complex64,
) -> Result<RhoResult> {
    let span = (mlo_r - mlo_l).norm();
    if !(span > 1e-9) {
        return Err(Error::DegenerateExtremes { distance: span });
    }
    let rho = ((p_virtual - mlo_l).norm() / span).clamp(0.0, 1.0);
    Ok(RhoResult {
        rho,
        side: Side::of_rho(rho),
    })
}

pub fn reconstruct_y(rho: f64, x_n: f64, z_n: f64, a: f64) -> Result<f64> {
    let rad = clamp_radicand("reconstruct_y", a * a - x_n * x_n - z_n * z_n)?;
    Ok((1.0 - 2.0 * rho) * rad.sqrt())
}

/// Polar angle of `(x, y)` in degrees within `[-180, 180)`, signed by `y`.
pub(crate) fn phase_deg(x: f64, y: f64) -> f64 {
    let rho = x.hypot(y);
    if rho == 0.0 {
        return 0.0;
    }
    let p = (x / rho).clamp(-1.0, 1.0).acos().to_degrees();
    wrap_deg(if y < 0.0 { -p } else { p })
}

/// `(r, p, d)` for a nodule inside the sphere of radius `a`.
pub fn surgery_target(n: &NodulePosition, a: f64) -> Result<SurgeryTarget> {
    let v = n.position;
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::domain(
            "surgery_target",
            "nodule at the origin has no direction",
        ));
    }
    if norm > a * (1.0 + 1e-9) {
        return Err(Error::domain(
            "surgery_target",
            format!("nodule at distance {norm} lies outside the radius {a}"),
        ));
    }
    Ok(SurgeryTarget {
        r: a * (v.z / norm).clamp(-1.0, 1.0).acos(),
        p: phase_deg(v.x, v.y),
        d: (a - norm).max(0.0),
        method: TargetMethod::ClosedForm,
        approximate: false,
    })
}

/// Chord angle in degrees measured from `Oy`; `side` and the sign of `x_n`
/// pick the quadrant.
pub fn theta_deg(x_n: f64, cos2theta: f64, side: Side) -> f64 {
    let c = side.sign() * cos2theta.clamp(0.0, 1.0).sqrt();
    let s = (1.0 - c * c).max(0.0).sqrt().copysign(x_n);
    s.atan2(c).to_degrees()
}

fn wrap_deg(p: f64) -> f64 {
    if p >= 180.0 {
        p - 360.0
    } else if p < -180.0 {
        p + 360.0
    } else {
        p
    }
}

/// Target for a nodule practically on the skin: `d = 0`, the radius is the
/// great-circle arc down to height `z_n` and `p = 90° − θ`.
pub fn skin_shortcut(x_n: f64, z_n: f64, a: f64, side: Side) -> Result<SurgeryTarget> {
    if !(a > 0.0) {
        return Err(Error::validation("a", format!("must be positive, got {a}")));
    }
    let r = a * (z_n / a).clamp(-1.0, 1.0).acos();
    let p = if a * a - z_n * z_n <= RADICAND_SLACK * a * a {
        0.0
    } else {
        wrap_deg(90.0 - theta_deg(x_n, cos2_theta(x_n, z_n, a)?, side))
    };
    Ok(SurgeryTarget {
        r,
        p,
        d: 0.0,
        method: TargetMethod::ClosedForm,
        approximate: false,
    })
}

/// Nodule position assembled from `(x_n, z_n)` and `rho`.
pub fn nodule_from_rho(rho: f64, x_n: f64, z_n: f64, a: f64) -> Result<NodulePosition> {
    let y_n = reconstruct_y(rho, x_n, z_n, a)?;
    Ok(NodulePosition::new(Point3::new(x_n, y_n, z_n), rho, a))
}
