//! Geodesic distance from the nipple on the upper half-ellipsoid.
//!
//! Geodesics are integrated as unit-speed curves constrained to
//! `x²/A² + y²/B² + z²/C² = 1`, whose acceleration is normal to the surface:
//!
//! ```text
//! p'' = −(vᵀDv / |Dp|²) · Dp,     D = diag(1/A², 1/B², 1/C²)
//! ```
//!
//! Starting at the apex `(0, 0, C)` with horizontal direction `α`, the curve
//! is followed down to the target height. The launch angle is found by
//! bisection on the azimuthal miss at that height, and the step count is
//! doubled until the length settles.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::localization::phase_deg;
use crate::model::{NodulePosition, Point3, SurgeryTarget, TargetMethod};

const ON_SURFACE_TOL: f64 = 1e-6;
const MIN_STEPS: usize = 32;
const MAX_STEPS: usize = 1 << 15;
const FALLBACK_RESOLUTION: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidSurface {
    radii: Vector3<f64>,
}

impl EllipsoidSurface {
    pub fn new(x_r: f64, y_r: f64, z_r: f64) -> Result<Self> {
        for (name, v) in [("x_r", x_r), ("y_r", y_r), ("z_r", z_r)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    name,
                    format!("must be positive, got {v}"),
                ));
            }
        }
        Ok(EllipsoidSurface {
            radii: Vector3::new(x_r, y_r, z_r),
        })
    }

    pub fn sphere(a: f64) -> Result<Self> {
        Self::new(a, a, a)
    }

    pub fn radii(&self) -> Vector3<f64> {
        self.radii
    }

    pub fn apex(&self) -> Point3 {
        Point3::new(0.0, 0.0, self.radii.z)
    }

    fn weights(&self) -> Vector3<f64> {
        self.radii.map(|r| 1.0 / (r * r))
    }

    /// `√(pᵀDp)`: 1 on the surface, below 1 inside.
    pub fn level(&self, p: &Point3) -> f64 {
        p.component_mul(&self.weights()).dot(p).sqrt()
    }

    /// Point where the ray from the origin through `p` leaves the surface.
    pub fn radial_point(&self, p: &Point3) -> Point3 {
        p / self.level(p)
    }

    fn azimuth(&self, p: &Point3) -> f64 {
        (p.y / self.radii.y).atan2(p.x / self.radii.x)
    }

    fn scaled(&self, s: f64) -> Self {
        EllipsoidSurface {
            radii: self.radii * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicLength {
    pub length: f64,
    /// Set when shooting failed and the length comes from a coarse mesh.
    pub approximate: bool,
}

type State = [f64; 6];

fn accel(surface: &EllipsoidSurface, s: &State) -> Vector3<f64> {
    let w = surface.weights();
    let p = Vector3::new(s[0], s[1], s[2]);
    let v = Vector3::new(s[3], s[4], s[5]);
    let dp = p.component_mul(&w);
    let lambda = v.component_mul(&w).dot(&v) / dp.norm_squared();
    -lambda * dp
}

fn deriv(surface: &EllipsoidSurface, s: &State) -> State {
    let a = accel(surface, s);
    [s[3], s[4], s[5], a.x, a.y, a.z]
}

fn axpy(s: &State, k: &State, h: f64) -> State {
    std::array::from_fn(|i| s[i] + h * k[i])
}

fn rk4(surface: &EllipsoidSurface, s: &State, h: f64) -> State {
    let k1 = deriv(surface, s);
    let k2 = deriv(surface, &axpy(s, &k1, 0.5 * h));
    let k3 = deriv(surface, &axpy(s, &k2, 0.5 * h));
    let k4 = deriv(surface, &axpy(s, &k3, h));
    std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Pulls the state back onto the surface with a unit tangent velocity.
fn project(surface: &EllipsoidSurface, s: &State) -> State {
    let mut p = Vector3::new(s[0], s[1], s[2]);
    p /= surface.level(&p);
    let n = p.component_mul(&surface.weights()).normalize();
    let mut v = Vector3::new(s[3], s[4], s[5]);
    v -= n * v.dot(&n);
    v.normalize_mut();
    [p.x, p.y, p.z, v.x, v.y, v.z]
}

/// Follows the geodesic launched at angle `alpha` down to height `z_target`.
/// Returns the end point and the arc length, or `None` if the height is not
/// reached within half a circumference.
fn shoot(surface: &EllipsoidSurface, alpha: f64, z_target: f64, h: f64) -> Option<(Point3, f64)> {
    let c = surface.radii.z;
    let mut s: State = [0.0, 0.0, c, alpha.cos(), alpha.sin(), 0.0];
    let mut len = 0.0;
    let limit = PI * surface.radii.max();
    while len < limit {
        let next = project(surface, &rk4(surface, &s, h));
        if next[2] <= z_target {
            // locate the crossing inside this step
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if rk4(surface, &s, mid)[2] > z_target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tau = 0.5 * (lo + hi);
            let end = project(surface, &rk4(surface, &s, tau));
            return Some((Point3::new(end[0], end[1], end[2]), len + tau));
        }
        s = next;
        len += h;
    }
    None
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Solves for the launch angle at a fixed step count.
fn shoot_to(surface: &EllipsoidSurface, target: &Point3, steps: usize) -> Option<f64> {
    let target_az = surface.azimuth(target);
    let polar = (target.z / surface.radii.z).clamp(-1.0, 1.0).acos();
    let h = surface.radii.max() * polar / steps as f64;
    let miss = |alpha: f64| {
        shoot(surface, alpha, target.z, h)
            .map(|(end, len)| (wrap_angle(surface.azimuth(&end) - target_az), len))
    };

    let mut lo = target_az - 0.5 * PI;
    let mut hi = target_az + 0.5 * PI;
    let (m_lo, _) = miss(lo)?;
    let (m_hi, _) = miss(hi)?;
    if !(m_lo < 0.0 && m_hi > 0.0) {
        return None;
    }
    let mut best = None;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        let (m, len) = miss(mid)?;
        best = Some(len);
        if m == 0.0 || hi - lo < 1e-14 {
            break;
        }
        if m < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

fn validate_target(surface: &EllipsoidSurface, target: &Point3) -> Result<()> {
    if target.z < 0.0 {
        return Err(Error::domain(
            "geodesic_from_nipple",
            format!("target height {} is below the breast base", target.z),
        ));
    }
    let level = surface.level(target);
    if (level - 1.0).abs() > ON_SURFACE_TOL {
        return Err(Error::domain(
            "geodesic_from_nipple",
            format!("target is not on the surface (level {level})"),
        ));
    }
    Ok(())
}

/// Geodesic distance from the apex to a point on the upper half-surface.
pub fn geodesic_from_nipple(
    surface: &EllipsoidSurface,
    target: &Point3,
    rel_tol: f64,
) -> Result<GeodesicLength> {
    validate_target(surface, target)?;
    if !(rel_tol > 0.0) {
        return Err(Error::validation("rel_tol", "must be positive"));
    }
    let r = surface.radii;
    if (target.x / r.x).hypot(target.y / r.y) <= 1e-12 {
        return Ok(GeodesicLength {
            length: 0.0,
            approximate: false,
        });
    }

    let mut steps = MIN_STEPS;
    let mut prev = shoot_to(surface, target, steps);
    while let Some(coarse) = prev {
        if steps >= MAX_STEPS {
            break;
        }
        steps *= 2;
        let Some(fine) = shoot_to(surface, target, steps) else {
            break;
        };
        if (fine - coarse).abs() <= rel_tol * fine {
            return Ok(GeodesicLength {
                length: fine,
                approximate: false,
            });
        }
        prev = Some(fine);
    }
    Ok(GeodesicLength {
        length: mesh_distance(surface, target, FALLBACK_RESOLUTION),
        approximate: true,
    })
}

/// Like [`geodesic_from_nipple`] but with all radii and the target scaled by `s`.
pub fn geodesic_scaled(
    surface: &EllipsoidSurface,
    target: &Point3,
    s: f64,
    rel_tol: f64,
) -> Result<GeodesicLength> {
    geodesic_from_nipple(&surface.scaled(s), &(target * s), rel_tol)
}

/// `(r, p, d)` measured on the half-ellipsoid: the skin point is where the
/// ray from the origin through the nodule exits, `r` is the geodesic length
/// to it and `d` the straight distance from it to the nodule.
///
/// The phase keeps the planar angle of `(x_n, y_n)`.
pub fn surgery_target_numeric(
    n: &NodulePosition,
    surface: &EllipsoidSurface,
    rel_tol: f64,
) -> Result<SurgeryTarget> {
    let v = n.position;
    if v.norm() == 0.0 {
        return Err(Error::domain(
            "surgery_target_numeric",
            "nodule at the origin has no direction",
        ));
    }
    if v.z < 0.0 {
        return Err(Error::domain(
            "surgery_target_numeric",
            format!("nodule height {} is below the breast base", v.z),
        ));
    }
    if surface.level(&v) > 1.0 + 1e-9 {
        return Err(Error::domain(
            "surgery_target_numeric",
            "nodule lies outside the surface",
        ));
    }
    let skin = surface.radial_point(&v);
    let g = geodesic_from_nipple(surface, &skin, rel_tol)?;
    Ok(SurgeryTarget {
        r: g.length,
        p: phase_deg(v.x, v.y),
        d: (skin - v).norm(),
        method: TargetMethod::GeodesicNumeric,
        approximate: g.approximate,
    })
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Shortest path along a latitude/longitude grid with diagonal links.
/// Only used when shooting fails; accurate to a few percent.
fn mesh_distance(surface: &EllipsoidSurface, target: &Point3, res: usize) -> f64 {
    let r = surface.radii;
    let n_lat = res;
    let n_lon = 4 * res;
    let vertex = |i: usize, j: usize| {
        let t = 0.5 * PI * i as f64 / n_lat as f64;
        let f = TAU * j as f64 / n_lon as f64;
        Point3::new(
            r.x * t.sin() * f.cos(),
            r.y * t.sin() * f.sin(),
            r.z * t.cos(),
        )
    };
    // index 0 is the apex, then rings 1..=n_lat
    let id = |i: usize, j: usize| 1 + (i - 1) * n_lon + (j % n_lon);
    let count = 1 + n_lat * n_lon;
    let mut pts = vec![surface.apex(); count];
    for i in 1..=n_lat {
        for j in 0..n_lon {
            pts[id(i, j)] = vertex(i, j);
        }
    }
    let target_id = count;
    pts.push(*target);

    let t = (target.z / r.z).clamp(-1.0, 1.0).acos();
    let f = surface.azimuth(target).rem_euclid(TAU);
    let ti = ((t / (0.5 * PI)) * n_lat as f64).floor() as usize;
    let tj = ((f / TAU) * n_lon as f64).floor() as usize;
    let mut target_links = Vec::new();
    for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let i = (ti + di).min(n_lat);
        if i == 0 {
            target_links.push(0);
        } else {
            target_links.push(id(i, tj + dj));
        }
    }

    let neighbours = |u: usize, out: &mut Vec<usize>| {
        out.clear();
        if u == 0 {
            out.extend((0..n_lon).map(|j| id(1, j)));
            return;
        }
        if u == target_id {
            out.extend(target_links.iter().copied());
            return;
        }
        let i = 1 + (u - 1) / n_lon;
        let j = (u - 1) % n_lon;
        for di in [-1i64, 0, 1] {
            for dj in [-1i64, 0, 1] {
                if di == 0 && dj == 0 {
                    continue;
                }
                let ni = i as i64 + di;
                if ni < 0 || ni > n_lat as i64 {
                    continue;
                }
                let nj = (j as i64 + dj).rem_euclid(n_lon as i64) as usize;
                out.push(if ni == 0 { 0 } else { id(ni as usize, nj) });
            }
        }
        if target_links.contains(&u) {
            out.push(target_id);
        }
    };

    let mut dist = vec![f64::INFINITY; pts.len()];
    let mut heap = BinaryHeap::new();
    let mut adj = Vec::with_capacity(16);
    dist[0] = 0.0;
    heap.push(Entry(0.0, 0));
    while let Some(Entry(d, u)) = heap.pop() {
        if u == target_id {
            return d;
        }
        if d > dist[u] {
            continue;
        }
        neighbours(u, &mut adj);
        for &v in &adj {
            let nd = d + (pts[u] - pts[v]).norm();
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    dist[target_id]
}
