//! Patient measurements, case inputs and the value types shared by the
//! localization pipeline.
//!
//! All lengths are centimetres. The surgery (SRG) frame has its origin at the
//! centre of the breast base, `Oz` vertical with the nipple at `(0, 0, z_r)`,
//! `Oy` sagittal and `Ox` lateral. Right-breast cases are expected to be
//! mirrored in `x` by the caller before they reach this crate.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// Relative spread of the three radii above which a case gets a warning.
pub const RADII_DISPARITY_WARN: f64 = 0.11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreastMeasurements {
    x_r: f64,
    y_r: f64,
    z_r: f64,
    h_c: f64,
    lat_x: f64,
    lat_z: f64,
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::validation(
            field,
            format!("must be positive, got {v}"),
        ))
    }
}

impl BreastMeasurements {
    /// Builds measurements from already-deduced radii.
    ///
    /// `h_c` is the characteristic radius of the compressed (CRC) contour.
    pub fn from_radii(
        x_r: f64,
        y_r: f64,
        z_r: f64,
        h_c: f64,
        lat_x: f64,
        lat_z: f64,
    ) -> Result<Self> {
        let m = BreastMeasurements {
            x_r: positive("x_r", x_r)?,
            y_r: positive("y_r", y_r)?,
            z_r: positive("z_r", z_r)?,
            h_c: positive("H_c", h_c)?,
            lat_x: positive("lat_x", lat_x)?,
            lat_z: positive("lat_z", lat_z)?,
        };
        Ok(m)
    }

    pub fn x_r(&self) -> f64 {
        self.x_r
    }
    pub fn y_r(&self) -> f64 {
        self.y_r
    }
    pub fn z_r(&self) -> f64 {
        self.z_r
    }
    pub fn h_c(&self) -> f64 {
        self.h_c
    }
    pub fn lat_x(&self) -> f64 {
        self.lat_x
    }
    pub fn lat_z(&self) -> f64 {
        self.lat_z
    }

    pub fn mean_radius(&self) -> f64 {
        mean_radius(self)
    }

    pub fn symmetrized(&self) -> SymmetrizedBreast {
        SymmetrizedBreast {
            a: self.mean_radius(),
            nipple: Point3::new(0.0, 0.0, self.z_r),
        }
    }

    /// Largest pairwise difference of the radii relative to the largest one.
    pub fn radii_disparity(&self) -> f64 {
        let r = [self.x_r, self.y_r, self.z_r];
        let max = r.iter().cloned().fold(f64::MIN, f64::max);
        let min = r.iter().cloned().fold(f64::MAX, f64::min);
        (max - min) / max
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let spread = self.radii_disparity();
        if spread > RADII_DISPARITY_WARN {
            out.push(format!(
                "radii differ by {:.1}% (symmetrized model assumes at most {:.0}%)",
                spread * 100.0,
                RADII_DISPARITY_WARN * 100.0
            ));
        }
        if self.h_c < self.x_r.max(self.z_r) {
            out.push(format!(
                "compressed radius {:.4} is smaller than the SRG radii ({:.4}, {:.4}); compression should spread the breast",
                self.h_c, self.x_r, self.z_r
            ));
        }
        out
    }
}

/// Deduces radii from tape measurements.
///
/// `fthrx - brsep` spans four quarter-arcs of the lateral radius; the vertical
/// and CRC arcs are half circumferences, hence the division by π.
pub fn build_measurements(
    fthrx: f64,
    brsep: f64,
    vertical_arc: f64,
    crc_arc: f64,
    lat_x: f64,
    lat_z: f64,
) -> Result<BreastMeasurements> {
    positive("fthrx", fthrx)?;
    positive("brsep", brsep)?;
    positive("vertical_arc", vertical_arc)?;
    positive("crc_arc", crc_arc)?;
    if fthrx <= brsep {
        return Err(Error::validation(
            "fthrx",
            format!("front thorax {fthrx} must exceed breast separation {brsep}"),
        ));
    }
    let y_r = vertical_arc / PI;
    BreastMeasurements::from_radii((fthrx - brsep) / 4.0, y_r, y_r, crc_arc / PI, lat_x, lat_z)
}

pub fn mean_radius(m: &BreastMeasurements) -> f64 {
    (m.x_r + m.y_r + m.z_r) / 3.0
}

/// The sphere of the mean radius standing in for the half-ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetrizedBreast {
    pub a: f64,
    pub nipple: Point3,
}

/// Which end of the skin-to-skin chord the nodule is nearer to.
///
/// `Front` means `y_n > 0`, equivalently `rho < 0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Front,
    Back,
}

impl Side {
    pub fn of_rho(rho: f64) -> Side {
        if rho < 0.5 {
            Side::Front
        } else {
            Side::Back
        }
    }

    pub fn flipped(self) -> Side {
        match self {
            Side::Front => Side::Back,
            Side::Back => Side::Front,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Side::Front => 1.0,
            Side::Back => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Front => "front",
            Side::Back => "back",
        }
    }
}

/// Observed nodule coordinates in both views.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseInputs {
    /// `(x_c, z_c)` in the CRC frame.
    pub cc: (f64, f64),
    /// `(p_w, p_z)` in the real MLO image.
    pub mlo: (f64, f64),
    /// Height at which `Oz` crosses the pectoralis muscle in the MLO image.
    pub b_c: f64,
    /// Characteristic radius of the MLO image.
    pub h_mlo: f64,
}

impl CaseInputs {
    /// Validates observations against `m`. `h_mlo` defaults to `H_c`.
    pub fn new(
        cc: (f64, f64),
        mlo: (f64, f64),
        b_c: f64,
        h_mlo: Option<f64>,
        m: &BreastMeasurements,
    ) -> Result<Self> {
        let h_mlo = match h_mlo {
            Some(h) => positive("H", h)?,
            None => m.h_c,
        };
        let (x_c, z_c) = cc;
        if !(x_c.is_finite() && z_c.is_finite()) {
            return Err(Error::validation("xc", "not finite"));
        }
        if x_c * x_c + z_c * z_c > m.h_c * m.h_c {
            return Err(Error::validation(
                "xc",
                format!(
                    "CC point ({x_c}, {z_c}) lies outside the contour of radius {}",
                    m.h_c
                ),
            ));
        }
        if !(mlo.0.is_finite() && mlo.1.is_finite()) {
            return Err(Error::validation("pw", "not finite"));
        }
        if !(0.0..h_mlo).contains(&b_c) {
            return Err(Error::validation(
                "bc",
                format!("must lie in [0, {h_mlo}), got {b_c}"),
            ));
        }
        Ok(CaseInputs {
            cc,
            mlo,
            b_c,
            h_mlo,
        })
    }
}

/// A nodule in the SRG frame together with its layer factor and chord ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodulePosition {
    pub position: Point3,
    pub lf: f64,
    pub rho: f64,
}

impl NodulePosition {
    /// `lf` is derived as `|position| / a`.
    pub fn new(position: Point3, rho: f64, a: f64) -> Self {
        NodulePosition {
            position,
            lf: position.norm() / a,
            rho,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMethod {
    ClosedForm,
    GeodesicNumeric,
}

impl TargetMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetMethod::ClosedForm => "closed_form",
            TargetMethod::GeodesicNumeric => "geodesic_numeric",
        }
    }
}

/// Polar surgery coordinates centred at the nipple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurgeryTarget {
    /// Geodesic radius from the nipple, cm.
    pub r: f64,
    /// Phase in degrees, in `[-180, 180)`.
    pub p: f64,
    /// Cut depth, cm.
    pub d: f64,
    pub method: TargetMethod,
    /// Set when the numeric geodesic fell back to a mesh estimate.
    pub approximate: bool,
}
