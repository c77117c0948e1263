//! Forward models predicting view coordinates from an SRG nodule, and the
//! layer-factor refinement loop built on them.
//!
//! The MLO image plane is `Ozw`, where `Ow` runs along the bisectrix `y = x`
//! towards negative `x`, so `w = −(x + y)/√2` before scaling.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::localization::{
    min_layer_factor, reconstruct_y, rho_from_layer_factor, surgery_target, ChordExtremes,
    RADICAND_SLACK,
};
use crate::model::{BreastMeasurements, CaseInputs, NodulePosition, Point3, Side, SurgeryTarget};
use crate::phantom::AffineFit;

pub const DEFAULT_TOL_CM: f64 = 0.05;
pub const DEFAULT_LF_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 60;

/// Predicts where an SRG nodule shows up in the CC and virtual MLO views.
pub trait ForwardProjector {
    fn name(&self) -> &'static str;

    /// `(x_c, z_c)` in the CRC frame.
    fn predict_cc(&self, nodule: Point3, m: &BreastMeasurements) -> (f64, f64);

    /// `w + iz` in the virtual MLO plane.
    fn predict_mlo(&self, nodule: Point3, m: &BreastMeasurements) -> Complex64;
}

/// Accepts a projector after checking that it sends the origin to the origin.
pub fn register_projector<P: ForwardProjector + ?Sized>(
    p: &P,
    m: &BreastMeasurements,
) -> Result<()> {
    let (x, z) = p.predict_cc(Point3::zeros(), m);
    if x != 0.0 || z != 0.0 {
        return Err(Error::validation(
            "projector",
            format!(
                "`{}` maps the origin to ({x}, {z}) in the CC view",
                p.name()
            ),
        ));
    }
    Ok(())
}

/// Linear surrogate for the compression: each axis is dilated so the SRG
/// radii reach the compressed radius `H_c`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AffineProjector {
    coupling: Option<Matrix3<f64>>,
    mlo_scale: Option<f64>,
}

impl AffineProjector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the cross-axis coupling of a phantom fit, normalized by `k` so
    /// that only the departure from uniform dilation remains.
    pub fn with_coupling(mut self, fit: &AffineFit, k: f64) -> Self {
        self.coupling = Some(fit.c / k);
        self
    }

    pub fn with_mlo_scale(mut self, s_w: f64) -> Self {
        self.mlo_scale = Some(s_w);
        self
    }

    pub fn cc_scales(m: &BreastMeasurements) -> (f64, f64) {
        (m.h_c() / m.x_r(), m.h_c() / m.z_r())
    }

    /// `H_c` over the mean of `x_r` and `y_r` unless overridden.
    pub fn mlo_scale(&self, m: &BreastMeasurements) -> f64 {
        self.mlo_scale
            .unwrap_or_else(|| m.h_c() / (0.5 * (m.x_r() + m.y_r())))
    }
}

impl ForwardProjector for AffineProjector {
    fn name(&self) -> &'static str {
        "affine"
    }

    fn predict_cc(&self, p: Point3, m: &BreastMeasurements) -> (f64, f64) {
        let q = match &self.coupling {
            // row-vector convention: q = p · C
            Some(c) => c.transpose() * p,
            None => p,
        };
        let (sx, sz) = Self::cc_scales(m);
        (sx * q.x, sz * q.z)
    }

    fn predict_mlo(&self, p: Point3, m: &BreastMeasurements) -> Complex64 {
        let (_, sz) = Self::cc_scales(m);
        let w = -(p.x + p.y) * FRAC_1_SQRT_2;
        Complex64::new(self.mlo_scale(m) * w, sz * p.z)
    }
}

/// One observed `(y_n → CC view)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPair {
    pub y_n: f64,
    pub cc: (f64, f64),
}

/// Empirical CC response calibrated on two simulated layer factors of one
/// nodule: affine in `y_n`, proportional to `x_n` and `z_n` relative to the
/// calibration nodule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedProjector {
    base: (f64, f64),
    alpha: (f64, f64),
    beta: (f64, f64),
    mlo: AffineProjector,
}

impl CalibratedProjector {
    /// `base` is the calibration nodule's `(x_n, z_n)`.
    pub fn new(base: (f64, f64), first: CalibrationPair, second: CalibrationPair) -> Result<Self> {
        if !(base.0 > 0.0 && base.1 > 0.0) {
            return Err(Error::validation(
                "cal_xn",
                format!(
                    "calibration nodule ({}, {}) must have positive x and z",
                    base.0, base.1
                ),
            ));
        }
        let dy = second.y_n - first.y_n;
        if !(dy.abs() > 1e-9) {
            return Err(Error::validation(
                "cal_y2",
                "calibration depths must differ",
            ));
        }
        let beta = (
            (second.cc.0 - first.cc.0) / dy,
            (second.cc.1 - first.cc.1) / dy,
        );
        let alpha = (
            first.cc.0 - beta.0 * first.y_n,
            first.cc.1 - beta.1 * first.y_n,
        );
        Ok(CalibratedProjector {
            base,
            alpha,
            beta,
            mlo: AffineProjector::new(),
        })
    }

    pub fn with_mlo(mut self, mlo: AffineProjector) -> Self {
        self.mlo = mlo;
        self
    }

    pub fn coefficients(&self) -> ((f64, f64), (f64, f64)) {
        (self.alpha, self.beta)
    }
}

/// Reference calibration: nodule `(4.07, ·, 2.13)` in a sphere of radius
/// 6.75, simulated at `rho = 0.317` and `rho = 0.2`.
impl Default for CalibratedProjector {
    fn default() -> Self {
        let (x, z, a): (f64, f64, f64) = (4.07, 2.13, 6.75);
        let half = (a * a - x * x - z * z).sqrt();
        CalibratedProjector::new(
            (x, z),
            CalibrationPair {
                y_n: (1.0 - 2.0 * 0.317) * half,
                cc: (4.94, 2.82),
            },
            CalibrationPair {
                y_n: (1.0 - 2.0 * 0.2) * half,
                cc: (5.95, 3.26),
            },
        )
        .expect("reference calibration is well posed")
    }
}

impl ForwardProjector for CalibratedProjector {
    fn name(&self) -> &'static str {
        "calibrated"
    }

    fn predict_cc(&self, p: Point3, _m: &BreastMeasurements) -> (f64, f64) {
        (
            p.x / self.base.0 * (self.alpha.0 + self.beta.0 * p.y),
            p.z / self.base.1 * (self.alpha.1 + self.beta.1 * p.y),
        )
    }

    fn predict_mlo(&self, p: Point3, m: &BreastMeasurements) -> Complex64 {
        self.mlo.predict_mlo(p, m)
    }
}

pub fn predict_views<P: ForwardProjector + ?Sized>(
    n: Point3,
    m: &BreastMeasurements,
    proj: &P,
) -> ((f64, f64), Complex64) {
    (proj.predict_cc(n, m), proj.predict_mlo(n, m))
}

/// Skin points at the ends of the nodule's chord and their MLO images.
pub fn chord_extremes<P: ForwardProjector + ?Sized>(
    x_n: f64,
    z_n: f64,
    m: &BreastMeasurements,
    proj: &P,
) -> Result<ChordExtremes> {
    let a = m.mean_radius();
    let rad = a * a - x_n * x_n - z_n * z_n;
    let half = rad.max(0.0).sqrt();
    if rad <= RADICAND_SLACK * a * a {
        return Err(Error::DegenerateChord { half_length: half });
    }
    let l = Point3::new(x_n, half, z_n);
    let r = Point3::new(x_n, -half, z_n);
    Ok(ChordExtremes {
        l,
        r,
        mlo_l: proj.predict_mlo(l, m),
        mlo_r: proj.predict_mlo(r, m),
    })
}

/// Output of the closed-form pass that seeds the refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineStart {
    pub x_n: f64,
    pub z_n: f64,
    pub a: f64,
    pub cos2theta: f64,
    pub side: Side,
    pub lf: f64,
    /// Observed MLO position mapped back into the virtual plane.
    pub p_virtual: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub tol_cm: f64,
    pub lf_tol: f64,
    pub max_iter: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            tol_cm: DEFAULT_TOL_CM,
            lf_tol: DEFAULT_LF_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementResult {
    pub lf_final: f64,
    pub rho_final: f64,
    pub nodule: NodulePosition,
    pub target: SurgeryTarget,
    pub iterations: usize,
    /// `|predicted x_c − observed x_c|`, the quantity the loop drives to zero.
    pub cc_residual: f64,
    /// Full CC distance including the `z` component.
    pub cc_distance: f64,
    pub predicted_cc: (f64, f64),
    pub predicted_mlo: Complex64,
    /// Distance to the observed MLO position in the virtual plane. Reported only.
    pub mlo_residual: f64,
    pub converged: bool,
    /// `[lo, hi]` after each bisection step.
    pub brackets: Vec<(f64, f64)>,
    pub diagnostic: Option<String>,
}

#[derive(Clone, Copy)]
struct Probe {
    lf: f64,
    rho: f64,
    nodule: Point3,
    cc: (f64, f64),
    residual: f64,
}

/// Bisects the layer factor until the predicted CC `x` matches the observed
/// one, keeping the chord side of the closed-form pass.
pub fn refine_layer_factor<P: ForwardProjector + ?Sized>(
    start: &RefineStart,
    case: &CaseInputs,
    m: &BreastMeasurements,
    proj: &P,
    opts: &RefineOptions,
) -> Result<RefinementResult> {
    if !(opts.tol_cm > 0.0) {
        return Err(Error::validation("tol_cm", "must be positive"));
    }
    let (x_n, z_n, a) = (start.x_n, start.z_n, start.a);
    let lf_min = min_layer_factor(z_n, a, start.cos2theta)?;
    let probe = |lf: f64| -> Result<Probe> {
        let lf = lf.clamp(lf_min, 1.0);
        let rho = rho_from_layer_factor(lf, z_n, a, start.cos2theta, start.side)?.rho;
        let nodule = Point3::new(x_n, reconstruct_y(rho, x_n, z_n, a)?, z_n);
        let cc = proj.predict_cc(nodule, m);
        Ok(Probe {
            lf,
            rho,
            nodule,
            cc,
            residual: cc.0 - case.cc.0,
        })
    };

    let first = probe(start.lf)?;
    let mut brackets = Vec::new();
    let mut iterations = 0;
    let mut diagnostic = None;
    let mut best = first;

    if best.residual.abs() > opts.tol_cm {
        let mut lo = probe(lf_min)?;
        let mut hi = probe(1.0)?;
        if lo.residual.signum() == hi.residual.signum() {
            diagnostic = Some(format!(
                "CC residual does not change sign over lf in [{:.4}, 1] ({:+.4} .. {:+.4})",
                lf_min, lo.residual, hi.residual
            ));
            for p in [lo, hi] {
                if p.residual.abs() < best.residual.abs() {
                    best = p;
                }
            }
        } else {
            let lo_sign = lo.residual.signum();
            // the closed-form start already narrows the bracket
            if first.residual.signum() == lo_sign {
                lo = first;
            } else {
                hi = first;
            }
            brackets.push((lo.lf, hi.lf));
            while iterations < opts.max_iter && hi.lf - lo.lf > opts.lf_tol {
                iterations += 1;
                let mid = probe(0.5 * (lo.lf + hi.lf))?;
                if mid.residual.signum() == lo_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
                brackets.push((lo.lf, hi.lf));
                if mid.residual.abs() < best.residual.abs() {
                    best = mid;
                }
                if mid.residual.abs() <= opts.tol_cm {
                    break;
                }
            }
        }
    }

    let nodule = NodulePosition::new(best.nodule, best.rho, a);
    let target = surgery_target(&nodule, a)?;
    let predicted_mlo = proj.predict_mlo(best.nodule, m);
    let dz = best.cc.1 - case.cc.1;
    Ok(RefinementResult {
        lf_final: best.lf,
        rho_final: best.rho,
        nodule,
        target,
        iterations,
        cc_residual: best.residual.abs(),
        cc_distance: best.residual.hypot(dz),
        predicted_cc: best.cc,
        predicted_mlo,
        mlo_residual: (predicted_mlo - start.p_virtual).norm(),
        converged: best.residual.abs() <= opts.tol_cm,
        brackets,
        diagnostic,
    })
}
