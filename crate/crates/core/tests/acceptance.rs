//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p tumorloc --test acceptance`.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tumorloc::forward::{CalibratedProjector, ForwardProjector, RefineOptions};
use tumorloc::localization::{
    cos2_theta, layer_factor, min_layer_factor, mk_nodule_cc, nodule_from_rho,
    rho_from_layer_factor, rho_from_views, surgery_target,
};
use tumorloc::model::Side;
use tumorloc::phantom::{TrajectoryDataset, TrajectoryRecord};
use tumorloc::pipeline::RefineStatus;
use tumorloc::{
    fit_affine, geodesic_from_nipple, load_case, load_trajectories, locate, mobius_forward,
    mobius_inverse, mobius_param_from_case, BreastMeasurements, EllipsoidSurface, LocateOverrides,
    MobiusParams, Point3, ProjectorChoice,
};

type Outcome = Result<String, String>;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn within(label: &str, got: f64, want: f64, tol: f64) -> Result<String, String> {
    let line = format!("{label} = {got:.6} (want {want} ± {tol:e})");
    if (got - want).abs() <= tol {
        Ok(line)
    } else {
        Err(line)
    }
}

/// Runs every check, keeping all messages; fails if any check failed.
fn all(checks: Vec<Result<String, String>>) -> Outcome {
    let failed = checks.iter().any(|c| c.is_err());
    let text = checks
        .into_iter()
        .map(|c| match c {
            Ok(s) => s,
            Err(s) => format!("FAILED {s}"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    if failed {
        Err(text)
    } else {
        Ok(text)
    }
}

fn example_measurements() -> BreastMeasurements {
    BreastMeasurements::from_radii(6.25, 7.0, 7.0, 10.5, 9.17, 9.4).unwrap()
}

fn phantom_fit() -> Outcome {
    let fit = fit_affine(&load_trajectories(data("phantom_nodules.csv")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let printed = [[1.20, -0.07, 0.02], [0.02, 1.31, 0.12], [-0.05, 0.00, 1.15]];
    let mut checks = Vec::new();
    let mut mismatches = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            let rounded = (fit.c[(i, j)] * 100.0).round() / 100.0 + 0.0;
            if rounded != printed[i][j] {
                mismatches.push(format!("C{}{} = {:.4}", i + 1, j + 1, fit.c[(i, j)]));
            }
        }
    }
    checks.push(if mismatches.is_empty() {
        Ok("C matches the printed matrix at 2 decimals".into())
    } else {
        Err(format!("C differs: {}", mismatches.join(", ")))
    });
    let max = (fit.max_abs_residual * 100.0).round() / 100.0;
    checks.push(within("max |E| (2 dp)", max, 0.41, 1e-9));
    let (label, axis) = fit.max_residual_location;
    let loc = format!("max |E| at nodule {label}, axis {}", ["x", "y", "z"][axis]);
    checks.push(if (label, axis) == ('B', 1) {
        Ok(loc)
    } else {
        Err(loc)
    });
    all(checks)
}

fn layer_factor_criterion() -> Outcome {
    let lf = layer_factor(0.317, 2.13, 6.75, 0.6).map_err(|e| e.to_string())?;
    let rho =
        rho_from_layer_factor(0.81, 2.13, 6.75, 0.6, Side::Front).map_err(|e| e.to_string())?;
    all(vec![
        within("lf", lf, 0.73, 0.005),
        within("rho(lf=0.81)", rho.rho, 0.20, 0.005),
    ])
}

fn surgery_targets() -> Outcome {
    let mut checks = Vec::new();
    for (rho, want) in [
        (0.317, [7.5921, 23.977, 1.8125]),
        (0.2, [7.9024, 36.096, 1.2812]),
    ] {
        let n = nodule_from_rho(rho, 4.07, 2.13, 6.75).map_err(|e| e.to_string())?;
        let t = surgery_target(&n, 6.75).map_err(|e| e.to_string())?;
        checks.push(within(&format!("r(rho={rho})"), t.r, want[0], 0.002));
        checks.push(within(&format!("p(rho={rho})"), t.p, want[1], 0.002));
        checks.push(within(&format!("d(rho={rho})"), t.d, want[2], 0.002));
    }
    all(checks)
}

fn mobius_goldens() -> Outcome {
    let m = MobiusParams::new(0.09, 10.5).unwrap();
    let fh = mobius_forward(Complex64::new(10.5, 0.0), &m).unwrap();
    let f0 = mobius_forward(Complex64::new(0.0, 0.0), &m).unwrap();
    let p = mobius_inverse(Complex64::new(1.2, 4.7), &m).unwrap();
    let q = mobius_inverse(Complex64::new(-5.2073, 5.5955), &m).unwrap();
    all(vec![
        within("|f(H) - H|", (fh - 10.5).norm(), 0.0, 1e-12),
        within(
            "|f(0) - ibH|",
            (f0 - Complex64::new(0.0, 0.945)).norm(),
            0.0,
            1e-12,
        ),
        within("Re f^-1(1.2+4.7i)", p.re, 0.57, 0.05),
        within("Im f^-1(1.2+4.7i)", p.im, 4.1, 0.05),
        within("Re f^-1(-5.2073+5.5955i)", q.re, -6.4193, 5e-4),
        within("Im f^-1(-5.2073+5.5955i)", q.im, 3.5287, 5e-4),
    ])
}

fn mk_mapping() -> Outcome {
    let (x, z) = mk_nodule_cc((6.83, 3.20), &example_measurements()).map_err(|e| e.to_string())?;
    all(vec![
        within("x_n", x, 4.07, 0.005),
        within("z_n", z, 2.13, 0.005),
    ])
}

fn rho_from_example_views() -> Outcome {
    let m = mobius_param_from_case(0.95, 10.5).map_err(|e| e.to_string())?;
    let p = mobius_inverse(Complex64::new(-5.2, 6.1), &m).map_err(|e| e.to_string())?;
    let l = Complex64::new(-7.47, 6.22);
    let r = Complex64::new(-0.332, 4.25);
    let rho = rho_from_views(p, l, r).map_err(|e| e.to_string())?.rho;
    let line = format!("rho = {rho:.4} (want [0.30, 0.33])");
    if (0.30..=0.33).contains(&rho) {
        Ok(line)
    } else {
        Err(line)
    }
}

fn skin_shortcut_criterion() -> Outcome {
    // Observed MLO point placed exactly on the image of R: rho = 1.
    let mut case = load_case(data("case_0023_1.txt")).map_err(|e| e.to_string())?;
    let m = mobius_param_from_case(case.bc, 10.5).unwrap();
    let w = mobius_forward(Complex64::new(-0.332, 4.25), &m).unwrap();
    case.pw = w.re;
    case.pz = w.im;
    let rep = locate(&case, &LocateOverrides::default()).map_err(|e| e.to_string())?;
    let shortcut = if rep.shortcut && rep.rho == 1.0 {
        Ok(format!("skin shortcut taken at rho {}", rep.rho))
    } else {
        Err(format!("no shortcut (rho {}, lf {})", rep.rho, rep.lf))
    };
    all(vec![
        shortcut,
        within("r", rep.target.r, 8.44, 0.01),
        within("p", rep.target.p, -37.0, 0.5),
        within("d", rep.target.d, 0.0, 0.0),
    ])
}

fn refinement() -> Outcome {
    let cal = CalibratedProjector::default();
    let m = example_measurements();
    let half = (6.75f64 * 6.75 - 4.07 * 4.07 - 2.13 * 2.13).sqrt();
    let first = cal.predict_cc(Point3::new(4.07, (1.0 - 2.0 * 0.317) * half, 2.13), &m);
    let second = cal.predict_cc(Point3::new(4.07, (1.0 - 2.0 * 0.2) * half, 2.13), &m);
    let mut checks = vec![
        within("cal x_c(lf=0.73)", first.0, 4.94, 1e-9),
        within("cal z_c(lf=0.73)", first.1, 2.82, 1e-9),
        within("cal x_c(lf=0.81)", second.0, 5.95, 1e-9),
        within("cal z_c(lf=0.81)", second.1, 3.26, 1e-9),
    ];

    let case = load_case(data("case_0023_1.txt")).map_err(|e| e.to_string())?;
    let over = LocateOverrides {
        projector: Some(ProjectorChoice::Calibrated),
        ..Default::default()
    };
    let rep = locate(&case, &over).map_err(|e| e.to_string())?;
    let RefineStatus::Done(r) = &rep.refinement else {
        return Err("refinement did not run".into());
    };
    checks.push(if r.converged {
        Ok(format!(
            "converged in {} iterations at lf {:.4}",
            r.iterations, r.lf_final
        ))
    } else {
        Err(format!("not converged: {:?}", r.diagnostic))
    });

    let monotone = r.brackets.windows(2).all(|w| {
        let ((lo0, hi0), (lo1, hi1)) = (w[0], w[1]);
        lo1 >= lo0 && hi1 <= hi0 && (hi1 - lo1) <= 0.5 * (hi0 - lo0) + 1e-12
    });
    checks.push(if monotone && !r.brackets.is_empty() {
        Ok(format!(
            "{} brackets, each half the previous",
            r.brackets.len()
        ))
    } else {
        Err(format!(
            "brackets not shrinking monotonically: {:?}",
            r.brackets
        ))
    });
    let lf_min = min_layer_factor(rep.z_n, rep.a, rep.cos2theta).unwrap();
    let bound = ((1.0 - lf_min) / RefineOptions::default().lf_tol)
        .log2()
        .ceil() as usize;
    checks.push(if r.iterations <= bound {
        Ok(format!("iterations {} <= {bound}", r.iterations))
    } else {
        Err(format!("iterations {} > {bound}", r.iterations))
    });
    checks.push(within("final CC residual", r.cc_residual, 0.0, 0.05));
    let verdict = if r.mlo_residual <= 1.5 {
        "within"
    } else {
        "beyond (warning only)"
    };
    checks.push(Ok(format!(
        "MLO residual {:.4} cm, {verdict} the 1.5 cm bound",
        r.mlo_residual
    )));
    all(checks)
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checks = Vec::new();

    // layer-factor inversion
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 500 {
        let a = rng.random_range(3.0..10.0);
        let h = rng.random_range(0.0..0.95) * a;
        let c2 = rng.random_range(0.0..=1.0);
        let rho: f64 = rng.random_range(0.0..=1.0);
        if (1.0 - 2.0 * rho).abs() <= 1e-6 {
            continue;
        }
        n += 1;
        let lf = layer_factor(rho, h, a, c2).unwrap();
        let side = Side::of_rho(rho);
        let back = rho_from_layer_factor(lf, h, a, c2, side).unwrap().rho;
        // where the chord weight vanishes every rho gives lf = 1
        let k = (1.0 - (h / a).powi(2)) * c2;
        if k > 1e-6 {
            worst = worst.max((back - rho).abs());
        }
    }
    checks.push(within(
        "layer-factor round trip, worst of 500",
        worst,
        0.0,
        1e-9,
    ));

    // norm identity
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let a: f64 = rng.random_range(3.0..10.0);
        let z = rng.random_range(0.0..0.95) * a;
        let x = rng.random_range(-0.99..0.99) * (a * a - z * z).sqrt();
        let rho = rng.random_range(0.0..=1.0);
        let nod = nodule_from_rho(rho, x, z, a).unwrap();
        let lf = layer_factor(rho, z, a, cos2_theta(x, z, a).unwrap()).unwrap();
        worst = worst.max((nod.position.norm() - lf * a).abs() / a);
    }
    checks.push(within("|P| = lf·a, worst of 500", worst, 0.0, 1e-9));

    // Möbius round trip
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let b = rng.random_range(0.0..0.95);
        let h = rng.random_range(1.0..20.0);
        let m = MobiusParams::new(b, h).unwrap();
        let z = Complex64::from_polar(
            h * rng.random_range(0.0f64..=1.0).sqrt(),
            rng.random_range(-PI..PI),
        );
        let back = mobius_inverse(mobius_forward(z, &m).unwrap(), &m).unwrap();
        worst = worst.max((back - z).norm() / h.max(1.0));
    }
    checks.push(within(
        "Möbius round trip, worst of 1000",
        worst,
        0.0,
        1e-10,
    ));

    // least squares against the normal equations
    let mut worst: f64 = 0.0;
    let mut fits = 0;
    while fits < 200 {
        let rows = rng.random_range(4..=12);
        let recs: Vec<TrajectoryRecord> = (0..rows)
            .map(|i| TrajectoryRecord {
                label: (b'A' + i as u8) as char,
                before: Point3::from_fn(|_, _| rng.random_range(-5.0..5.0)),
                after: Point3::from_fn(|_, _| rng.random_range(-5.0..5.0)),
            })
            .collect();
        let d = TrajectoryDataset::new(recs).unwrap();
        let Ok(fit) = fit_affine(&d) else { continue };
        let sv = fit.b.clone().svd(false, false).singular_values;
        if sv.min() <= 1e-2 * sv.max() {
            continue;
        }
        fits += 1;
        let to_rows = |m: &nalgebra::DMatrix<f64>| {
            (0..m.nrows())
                .map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]])
                .collect::<Vec<_>>()
        };
        let oracle = common::normal_equations(&to_rows(&fit.b), &to_rows(&fit.a));
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((fit.c[(i, j)] - oracle[i][j]).abs());
            }
        }
    }
    checks.push(within(
        "least squares vs normal equations, worst of 200",
        worst,
        0.0,
        1e-8,
    ));

    // geodesics
    let rel_tol = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = rng.random_range(1.0..12.0);
        let t = rng.random_range(0.0..FRAC_PI_2);
        let p = common::surface_point([a; 3], t, rng.random_range(-PI..PI));
        let g = geodesic_from_nipple(
            &EllipsoidSurface::sphere(a).unwrap(),
            &Point3::from(p),
            rel_tol,
        )
        .unwrap();
        if t > 0.0 {
            worst = worst.max((g.length - a * t).abs() / (a * t));
        }
    }
    checks.push(within(
        "sphere geodesic relative error, worst of 1000",
        worst,
        0.0,
        rel_tol,
    ));

    let radii = [6.25, 7.0, 7.0];
    let oracle = common::MeshOracle::new(radii, 160);
    let surface = EllipsoidSurface::new(radii[0], radii[1], radii[2]).unwrap();
    let mut worst_ratio: f64 = 0.0;
    let mut below_chord = false;
    for _ in 0..10 {
        let p = common::surface_point(
            radii,
            rng.random_range(0.05..FRAC_PI_2),
            rng.random_range(-PI..PI),
        );
        let g = geodesic_from_nipple(&surface, &Point3::from(p), rel_tol)
            .unwrap()
            .length;
        worst_ratio = worst_ratio.max(g / oracle.distance(p));
        below_chord |= g < common::chord([0.0, 0.0, radii[2]], p);
    }
    let line = format!(
        "geodesic / mesh oracle ({} triangles) at most {worst_ratio:.4}, never below chord: {}",
        oracle.triangles(),
        !below_chord
    );
    checks.push(if worst_ratio <= 1.01 && !below_chord {
        Ok(line)
    } else {
        Err(line)
    });
    all(checks)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("phantom fit", phantom_fit),
        ("layer factor", layer_factor_criterion),
        ("surgery targets", surgery_targets),
        ("Möbius goldens", mobius_goldens),
        ("mk mapping", mk_mapping),
        ("rho from views", rho_from_example_views),
        ("skin shortcut", skin_shortcut_criterion),
        ("refinement", refinement),
        ("property suites", property_suites),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS — {detail}", i + 1),
            Err(detail) => {
                println!("criterion {} ({name}): FAIL — {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", criteria.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
