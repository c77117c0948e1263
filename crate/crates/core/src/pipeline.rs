//! End-to-end localization of one case and its report.
//!
//! Stages carry the simulator's command names: `coors` (radii), `mk` (CC
//! view to SRG), `mlo` (view mapping and extremes), `frho` (chord ratio and
//! layer factor) and `cnt` (surgery target).

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::casefile::{CaseFile, GeodesicChoice};
use crate::conformal::{mobius_inverse, mobius_param_from_case};
use crate::error::{Error, Result};
use crate::forward::{
    chord_extremes, refine_layer_factor, register_projector, RefineOptions, RefineStart,
    RefinementResult,
};
use crate::geodesic::{surgery_target_numeric, EllipsoidSurface};
use crate::localization::{
    cos2_theta, layer_factor, min_layer_factor, mk_nodule_cc, nodule_from_rho, rho_from_views,
    skin_shortcut, surgery_target, ChordExtremes, SKIN_CHORD_CM, SKIN_LF,
};
use crate::model::{BreastMeasurements, CaseInputs, NodulePosition, Point3, Side, SurgeryTarget};

/// Chord ratios this close to 0.5 leave the side undecided.
pub const SIDE_AMBIGUITY: f64 = 0.02;
/// MLO mismatch the simulator still accepts.
pub const MLO_RESIDUAL_WARN_CM: f64 = 1.5;
pub const DEFAULT_GEODESIC_TOL: f64 = 1e-6;

/// Front-end switches layered over the case file's own settings.
#[derive(Debug, Clone, Default)]
pub struct LocateOverrides {
    pub projector: Option<crate::casefile::ProjectorChoice>,
    pub geodesic: Option<GeodesicChoice>,
    pub flip_side: bool,
    pub no_refine: bool,
}

impl LocateOverrides {
    /// The case with these switches applied.
    pub fn apply(&self, case: &CaseFile) -> CaseFile {
        let mut c = case.clone();
        if let Some(p) = self.projector {
            c.projector = p;
        }
        if let Some(g) = self.geodesic {
            c.geodesic = g;
        }
        c.flip_side |= self.flip_side;
        c.refine &= !self.no_refine;
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefineStatus {
    Disabled,
    /// Nodule is on the skin; nothing to refine.
    Skipped,
    Done(Box<RefinementResult>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    /// Effective case, overrides included.
    pub case: CaseFile,
    pub measurements: BreastMeasurements,
    pub a: f64,
    pub x_n: f64,
    pub z_n: f64,
    pub cos2theta: f64,
    pub mobius_b: f64,
    pub h_mlo: f64,
    /// Observed MLO point mapped into the virtual plane.
    pub p_virtual: Complex64,
    pub extremes: ChordExtremes,
    /// `override` or the projector name.
    pub extremes_source: &'static str,
    pub projector: &'static str,
    pub rho: f64,
    pub side: Side,
    pub lf: f64,
    pub lf_min: f64,
    pub shortcut: bool,
    pub nodule: NodulePosition,
    pub target: SurgeryTarget,
    /// Target on the other side of the chord when the side is ambiguous.
    pub alternate: Option<SurgeryTarget>,
    pub refinement: RefineStatus,
    pub warnings: Vec<String>,
}

fn target_for(
    nodule: &NodulePosition,
    a: f64,
    case: &CaseFile,
    m: &BreastMeasurements,
) -> Result<SurgeryTarget> {
    match case.geodesic {
        GeodesicChoice::Closed => surgery_target(nodule, a),
        GeodesicChoice::Numeric => {
            let surface = EllipsoidSurface::new(m.x_r(), m.y_r(), m.z_r())?;
            surgery_target_numeric(nodule, &surface, DEFAULT_GEODESIC_TOL)
        }
    }
}

pub fn locate(case: &CaseFile, overrides: &LocateOverrides) -> Result<CaseReport> {
    let case = overrides.apply(case);
    let m = case.measurements()?;
    let inputs = CaseInputs::new((case.xc, case.zc), (case.pw, case.pz), case.bc, case.h, &m)?;
    let a = m.mean_radius();
    let mut warnings = m.warnings();

    let (x_n, z_n) = mk_nodule_cc(inputs.cc, &m)?;
    let cos2theta = cos2_theta(x_n, z_n, a)?;

    let mobius = mobius_param_from_case(inputs.b_c, inputs.h_mlo)?;
    let p_virtual = mobius_inverse(Complex64::new(inputs.mlo.0, inputs.mlo.1), &mobius)?;

    let proj = case.build_projector()?;
    register_projector(proj.as_ref(), &m)?;
    let (extremes, extremes_source) = match &case.extremes {
        Some(o) => {
            let half = (a * a - x_n * x_n - z_n * z_n).max(0.0).sqrt();
            let ext = ChordExtremes {
                l: Point3::new(x_n, half, z_n),
                r: Point3::new(x_n, -half, z_n),
                mlo_l: Complex64::new(o.l.0, o.l.1),
                mlo_r: Complex64::new(o.r.0, o.r.1),
            };
            (ext, "override")
        }
        None => (chord_extremes(x_n, z_n, &m, proj.as_ref())?, proj.name()),
    };

    let (from, to) = if case.flip_side {
        (extremes.mlo_r, extremes.mlo_l)
    } else {
        (extremes.mlo_l, extremes.mlo_r)
    };
    let rho_res = rho_from_views(p_virtual, from, to)?;
    let (rho, side) = (rho_res.rho, rho_res.side);
    let lf = layer_factor(rho, z_n, a, cos2theta)?;
    let lf_min = min_layer_factor(z_n, a, cos2theta)?;
    let nodule = nodule_from_rho(rho, x_n, z_n, a)?;

    let shortcut = lf >= SKIN_LF || extremes.mlo_length() <= SKIN_CHORD_CM;
    let target = if shortcut {
        warnings.push(format!(
            "nodule treated as lying on the skin (lf {lf:.4}, |LR| {:.4} cm): d = 0",
            extremes.mlo_length()
        ));
        skin_shortcut(x_n, z_n, a, side)?
    } else {
        target_for(&nodule, a, &case, &m)?
    };

    let alternate = if (rho - 0.5).abs() < SIDE_AMBIGUITY {
        warnings.push(format!(
            "rho {rho:.4} is within {SIDE_AMBIGUITY} of 0.5: the chord side is ambiguous, both targets reported"
        ));
        let other = nodule_from_rho(1.0 - rho, x_n, z_n, a)?;
        Some(if shortcut {
            skin_shortcut(x_n, z_n, a, side.flipped())?
        } else {
            target_for(&other, a, &case, &m)?
        })
    } else {
        None
    };

    let refinement = if !case.refine {
        RefineStatus::Disabled
    } else if shortcut {
        RefineStatus::Skipped
    } else {
        let start = RefineStart {
            x_n,
            z_n,
            a,
            cos2theta,
            side,
            lf,
            p_virtual,
        };
        let mut r = refine_layer_factor(
            &start,
            &inputs,
            &m,
            proj.as_ref(),
            &RefineOptions::default(),
        )?;
        if case.geodesic == GeodesicChoice::Numeric {
            r.target = target_for(&r.nodule, a, &case, &m)?;
        }
        if let Some(d) = &r.diagnostic {
            warnings.push(format!("refinement did not bracket a solution: {d}"));
        } else if !r.converged {
            warnings.push(format!(
                "refinement stopped at CC residual {:.4} cm after {} iterations",
                r.cc_residual, r.iterations
            ));
        }
        if r.mlo_residual > MLO_RESIDUAL_WARN_CM {
            warnings.push(format!(
                "predicted MLO position is {:.4} cm from the observed one (acceptable up to {MLO_RESIDUAL_WARN_CM} cm)",
                r.mlo_residual
            ));
        }
        RefineStatus::Done(Box::new(r))
    };

    Ok(CaseReport {
        projector: proj.name(),
        case,
        measurements: m,
        a,
        x_n,
        z_n,
        cos2theta,
        mobius_b: mobius.b(),
        h_mlo: inputs.h_mlo,
        p_virtual,
        extremes,
        extremes_source,
        rho,
        side,
        lf,
        lf_min,
        shortcut,
        nodule,
        target,
        alternate,
        refinement,
        warnings,
    })
}

/// Reads and locates a case file in one go.
pub fn locate_file(
    path: impl AsRef<std::path::Path>,
    overrides: &LocateOverrides,
) -> Result<CaseReport> {
    locate(&crate::casefile::load_case(path)?, overrides)
}

fn len4(v: f64) -> String {
    format!("{:.4}", v + 0.0)
}

fn ang3(v: f64) -> String {
    format!("{:.3}", v + 0.0)
}

fn ratio6(v: f64) -> String {
    format!("{:.6}", v + 0.0)
}

impl CaseReport {
    /// Refined target when refinement ran, the closed-form one otherwise.
    pub fn final_target(&self) -> &SurgeryTarget {
        match &self.refinement {
            RefineStatus::Done(r) => &r.target,
            _ => &self.target,
        }
    }

    /// Ordered `(key, value)` pairs of the machine block, inputs first.
    pub fn machine_entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .case
            .to_text()
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        let m = &self.measurements;
        put("coors.x_r", len4(m.x_r()));
        put("coors.y_r", len4(m.y_r()));
        put("coors.z_r", len4(m.z_r()));
        put("coors.h_c", len4(m.h_c()));
        put("coors.a", len4(self.a));
        put("mk.x_n", len4(self.x_n));
        put("mk.z_n", len4(self.z_n));
        put("mk.cos2theta", ratio6(self.cos2theta));
        put("mlo.b", ratio6(self.mobius_b));
        put("mlo.h", len4(self.h_mlo));
        put("mlo.p_w", len4(self.p_virtual.re));
        put("mlo.p_z", len4(self.p_virtual.im));
        put("mlo.extremes", self.extremes_source.to_string());
        put("mlo.l_w", len4(self.extremes.mlo_l.re));
        put("mlo.l_z", len4(self.extremes.mlo_l.im));
        put("mlo.r_w", len4(self.extremes.mlo_r.re));
        put("mlo.r_z", len4(self.extremes.mlo_r.im));
        put("mlo.chord", len4(self.extremes.mlo_length()));
        put("frho.rho", ratio6(self.rho));
        put("frho.side", self.side.as_str().to_string());
        put("frho.lf", ratio6(self.lf));
        put("frho.lf_min", ratio6(self.lf_min));
        put("frho.y_n", len4(self.nodule.position.y));
        let t = &self.target;
        put("cnt.method", t.method.as_str().to_string());
        put("cnt.shortcut", self.shortcut.to_string());
        put("cnt.approximate", t.approximate.to_string());
        put("cnt.r", len4(t.r));
        put("cnt.p", ang3(t.p));
        put("cnt.d", len4(t.d));
        if let Some(alt) = &self.alternate {
            put("cnt.alt_r", len4(alt.r));
            put("cnt.alt_p", ang3(alt.p));
            put("cnt.alt_d", len4(alt.d));
        }
        match &self.refinement {
            RefineStatus::Disabled => put("refine.status", "disabled".into()),
            RefineStatus::Skipped => put("refine.status", "skipped".into()),
            RefineStatus::Done(r) => {
                put(
                    "refine.status",
                    if r.converged {
                        "converged"
                    } else {
                        "not-converged"
                    }
                    .into(),
                );
                put("refine.projector", self.projector.to_string());
                put("refine.iterations", r.iterations.to_string());
                put("refine.lf", ratio6(r.lf_final));
                put("refine.rho", ratio6(r.rho_final));
                put("refine.y_n", len4(r.nodule.position.y));
                put("refine.cc_x", len4(r.predicted_cc.0));
                put("refine.cc_z", len4(r.predicted_cc.1));
                put("refine.cc_residual", len4(r.cc_residual));
                put("refine.mlo_residual", len4(r.mlo_residual));
                put("refine.r", len4(r.target.r));
                put("refine.p", ang3(r.target.p));
                put("refine.d", len4(r.target.d));
            }
        }
        put("warnings.count", self.warnings.len().to_string());
        for (i, w) in self.warnings.iter().enumerate() {
            put(&format!("warning.{}", i + 1), w.replace('#', "no."));
        }
        out
    }

    pub fn machine_block(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.machine_entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn human_report(&self) -> String {
        let mut s = String::new();
        let m = &self.measurements;
        let c = &self.case;
        let _ = writeln!(
            s,
            "input    CC ({}, {}) cm, MLO ({}, {}) cm, bc {} cm",
            c.xc, c.zc, c.pw, c.pz, c.bc
        );
        let _ = writeln!(
            s,
            "coors    radii x {} y {} z {} cm, H_c {} cm, a {} cm",
            len4(m.x_r()),
            len4(m.y_r()),
            len4(m.z_r()),
            len4(m.h_c()),
            len4(self.a)
        );
        let _ = writeln!(
            s,
            "mk       (x_n, z_n) = ({}, {}) cm, cos²θ {}",
            len4(self.x_n),
            len4(self.z_n),
            ratio6(self.cos2theta)
        );
        let _ = writeln!(
            s,
            "mlo      b {}, P' = {} {:+.4}i cm; extremes ({}) L {} {:+.4}i, R {} {:+.4}i, |LR| {} cm",
            ratio6(self.mobius_b),
            len4(self.p_virtual.re),
            self.p_virtual.im,
            self.extremes_source,
            len4(self.extremes.mlo_l.re),
            self.extremes.mlo_l.im,
            len4(self.extremes.mlo_r.re),
            self.extremes.mlo_r.im,
            len4(self.extremes.mlo_length())
        );
        let _ = writeln!(
            s,
            "frho     rho {} ({}), lf {} (min {}), y_n {} cm",
            ratio6(self.rho),
            self.side.as_str(),
            ratio6(self.lf),
            ratio6(self.lf_min),
            len4(self.nodule.position.y)
        );
        let t = &self.target;
        let _ = writeln!(
            s,
            "cnt      r {} cm, p {}°, d {} cm  [{}{}{}]",
            len4(t.r),
            ang3(t.p),
            len4(t.d),
            t.method.as_str(),
            if self.shortcut { ", skin" } else { "" },
            if t.approximate { ", approximate" } else { "" }
        );
        if let Some(alt) = &self.alternate {
            let _ = writeln!(
                s,
                "         other side: r {} cm, p {}°, d {} cm",
                len4(alt.r),
                ang3(alt.p),
                len4(alt.d)
            );
        }
        match &self.refinement {
            RefineStatus::Disabled => {
                let _ = writeln!(s, "refine   disabled");
            }
            RefineStatus::Skipped => {
                let _ = writeln!(s, "refine   skipped (nodule on the skin)");
            }
            RefineStatus::Done(r) => {
                let _ = writeln!(
                    s,
                    "refine   {} after {} iterations with `{}`: lf {}, rho {}",
                    if r.converged { "converged" } else { "stopped" },
                    r.iterations,
                    self.projector,
                    ratio6(r.lf_final),
                    ratio6(r.rho_final)
                );
                let _ = writeln!(
                    s,
                    "         predicted CC ({}, {}) cm, CC residual {} cm, MLO residual {} cm",
                    len4(r.predicted_cc.0),
                    len4(r.predicted_cc.1),
                    len4(r.cc_residual),
                    len4(r.mlo_residual)
                );
                let _ = writeln!(
                    s,
                    "         r {} cm, p {}°, d {} cm",
                    len4(r.target.r),
                    ang3(r.target.p),
                    len4(r.target.d)
                );
            }
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Checks that a machine block re-parsed as a case gives the same outputs.
pub fn reparse_matches(report: &CaseReport) -> Result<bool> {
    let again = crate::casefile::parse_case(&report.machine_block())?;
    let second = locate(&again, &LocateOverrides::default())?;
    if second.case != report.case {
        return Err(Error::validation(
            "case",
            "machine block did not reproduce the case",
        ));
    }
    Ok(second.machine_block() == report.machine_block())
}
