//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers or text and returns JSON, so the page
//! needs no generated TypeScript types. The `*_json` functions hold the logic
//! and are what the native tests call.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use tumorloc::localization::{layer_factor, min_layer_factor, rho_from_layer_factor};
use tumorloc::model::Side;
use tumorloc::pipeline::RefineStatus;
use tumorloc::{
    mobius_forward, mobius_inverse, parse_case, GeodesicChoice, LocateOverrides, MobiusParams,
    ProjectorChoice,
};

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Grid {
    h: f64,
    /// Images of circles |ζ| = const.
    circles: Vec<Vec<[f64; 2]>>,
    /// Images of rays arg ζ = const.
    rays: Vec<Vec<[f64; 2]>>,
}

pub fn mobius_grid_json(b: f64, h: f64, rings: usize, spokes: usize) -> Result<String, String> {
    let m = MobiusParams::new(b, h).map_err(|e| e.to_string())?;
    let f = |z: Complex64| {
        let w = mobius_forward(z, &m).expect("grid stays inside the disk");
        [w.re, w.im]
    };
    const SAMPLES: usize = 96;
    let circles = (1..=rings)
        .map(|k| {
            let r = h * k as f64 / rings as f64;
            (0..=SAMPLES)
                .map(|i| f(Complex64::from_polar(r, TAU * i as f64 / SAMPLES as f64)))
                .collect()
        })
        .collect();
    let rays = (0..spokes)
        .map(|k| {
            let t = TAU * k as f64 / spokes as f64;
            (0..=SAMPLES)
                .map(|i| f(Complex64::from_polar(h * i as f64 / SAMPLES as f64, t)))
                .collect()
        })
        .collect();
    to_json(&Grid { h, circles, rays })
}

#[derive(Serialize)]
struct MappedPoint {
    re: f64,
    im: f64,
}

pub fn mobius_point_json(
    b: f64,
    h: f64,
    re: f64,
    im: f64,
    inverse: bool,
) -> Result<String, String> {
    let m = MobiusParams::new(b, h).map_err(|e| e.to_string())?;
    let z = Complex64::new(re, im);
    let w = if inverse {
        mobius_inverse(z, &m)
    } else {
        mobius_forward(z, &m)
    }
    .map_err(|e| e.to_string())?;
    to_json(&MappedPoint { re: w.re, im: w.im })
}

#[derive(Serialize)]
struct Curve {
    rho: Vec<f64>,
    lf: Vec<f64>,
    lf_min: f64,
    /// Front-side chord ratio giving `target_lf`, if attainable.
    target_rho: Option<f64>,
}

pub fn layer_factor_curve_json(
    h: f64,
    a: f64,
    cos2theta: f64,
    target_lf: f64,
    n: usize,
) -> Result<String, String> {
    let n = n.max(2);
    let rho: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let lf = rho
        .iter()
        .map(|&r| layer_factor(r, h, a, cos2theta))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    to_json(&Curve {
        lf_min: min_layer_factor(h, a, cos2theta).map_err(|e| e.to_string())?,
        target_rho: rho_from_layer_factor(target_lf, h, a, cos2theta, Side::Front)
            .ok()
            .map(|r| r.rho),
        rho,
        lf,
    })
}

#[derive(Serialize)]
struct Target {
    r: f64,
    p: f64,
    d: f64,
}

#[derive(Serialize)]
struct Located {
    x_n: f64,
    y_n: f64,
    z_n: f64,
    a: f64,
    rho: f64,
    lf: f64,
    /// Virtual-plane MLO point and the extremes, for drawing.
    p_virtual: [f64; 2],
    l: [f64; 2],
    r: [f64; 2],
    target: Target,
    refined: Option<Target>,
    refined_lf: Option<f64>,
    warnings: Vec<String>,
    report: String,
    machine: String,
}

pub fn locate_json(
    case_text: &str,
    projector: &str,
    flip_side: bool,
    numeric_geodesic: bool,
    refine: bool,
) -> Result<String, String> {
    let case = parse_case(case_text).map_err(|e| e.to_string())?;
    let overrides = LocateOverrides {
        projector: ProjectorChoice::parse(projector),
        geodesic: numeric_geodesic.then_some(GeodesicChoice::Numeric),
        flip_side,
        no_refine: !refine,
    };
    let rep = tumorloc::locate(&case, &overrides).map_err(|e| e.to_string())?;
    let t = |s: &tumorloc::SurgeryTarget| Target {
        r: s.r,
        p: s.p,
        d: s.d,
    };
    let (refined, refined_lf) = match &rep.refinement {
        RefineStatus::Done(r) => (Some(t(&r.target)), Some(r.lf_final)),
        _ => (None, None),
    };
    let c = |z: Complex64| [z.re, z.im];
    to_json(&Located {
        x_n: rep.x_n,
        y_n: rep.nodule.position.y,
        z_n: rep.z_n,
        a: rep.a,
        rho: rep.rho,
        lf: rep.lf,
        p_virtual: c(rep.p_virtual),
        l: c(rep.extremes.mlo_l),
        r: c(rep.extremes.mlo_r),
        target: t(&rep.target),
        refined,
        refined_lf,
        warnings: rep.warnings.clone(),
        report: rep.human_report(),
        machine: rep.machine_block(),
    })
}

/// The worked example case, for pre-filling the page.
#[wasm_bindgen]
pub fn example_case() -> String {
    include_str!("../../core/data/case_0023_1.txt").to_string()
}

#[wasm_bindgen]
pub fn mobius_grid(b: f64, h: f64, rings: usize, spokes: usize) -> Result<String, JsValue> {
    mobius_grid_json(b, h, rings, spokes).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn mobius_point(b: f64, h: f64, re: f64, im: f64, inverse: bool) -> Result<String, JsValue> {
    mobius_point_json(b, h, re, im, inverse).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn layer_factor_curve(
    h: f64,
    a: f64,
    cos2theta: f64,
    target_lf: f64,
    n: usize,
) -> Result<String, JsValue> {
    layer_factor_curve_json(h, a, cos2theta, target_lf, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn locate(
    case_text: &str,
    projector: &str,
    flip_side: bool,
    numeric_geodesic: bool,
    refine: bool,
) -> Result<String, JsValue> {
    locate_json(case_text, projector, flip_side, numeric_geodesic, refine)
        .map_err(|e| JsValue::from_str(&e))
}
