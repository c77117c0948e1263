//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, TAU};

/// Shortest edge path from the apex to `target` on a triangulated
/// latitude/longitude mesh of the upper half-ellipsoid. Each grid quad is cut
/// along one diagonal; the target is joined to the corners of its quad.
pub struct MeshOracle {
    radii: [f64; 3],
    n_lat: usize,
    n_lon: usize,
    pts: Vec<[f64; 3]>,
}

impl MeshOracle {
    pub fn new(radii: [f64; 3], n_lat: usize) -> Self {
        let n_lon = 4 * n_lat;
        let mut pts = vec![[0.0, 0.0, radii[2]]];
        for i in 1..=n_lat {
            let t = FRAC_PI_2 * i as f64 / n_lat as f64;
            for j in 0..n_lon {
                let f = TAU * j as f64 / n_lon as f64;
                pts.push([
                    radii[0] * t.sin() * f.cos(),
                    radii[1] * t.sin() * f.sin(),
                    radii[2] * t.cos(),
                ]);
            }
        }
        MeshOracle {
            radii,
            n_lat,
            n_lon,
            pts,
        }
    }

    pub fn triangles(&self) -> usize {
        self.n_lon + 2 * self.n_lon * (self.n_lat - 1)
    }

    fn id(&self, i: usize, j: usize) -> usize {
        if i == 0 {
            0
        } else {
            1 + (i - 1) * self.n_lon + j % self.n_lon
        }
    }

    fn edges(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.pts.len()];
        let mut link = |a: usize, b: usize| {
            if a != b && !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        };
        for i in 0..self.n_lat {
            for j in 0..self.n_lon {
                let a = self.id(i, j);
                let b = self.id(i, j + 1);
                let c = self.id(i + 1, j);
                let d = self.id(i + 1, j + 1);
                link(a, b);
                link(a, c);
                link(c, d);
                link(b, c);
            }
        }
        adj
    }

    pub fn distance(&self, target: [f64; 3]) -> f64 {
        let r = self.radii;
        let t = (target[2] / r[2]).clamp(-1.0, 1.0).acos();
        let f = (target[1] / r[1]).atan2(target[0] / r[0]).rem_euclid(TAU);
        let ti = ((t / FRAC_PI_2 * self.n_lat as f64).floor() as usize).min(self.n_lat - 1);
        let tj = (f / TAU * self.n_lon as f64).floor() as usize;
        let corners = [
            self.id(ti, tj),
            self.id(ti, tj + 1),
            self.id(ti + 1, tj),
            self.id(ti + 1, tj + 1),
        ];

        let mut adj = self.edges();
        let mut pts = self.pts.clone();
        let tid = pts.len();
        pts.push(target);
        adj.push(Vec::new());
        for c in corners {
            adj[c].push(tid);
            adj[tid].push(c);
        }

        let len = |a: usize, b: usize| {
            let (p, q) = (pts[a], pts[b]);
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
        };
        let mut dist = vec![f64::INFINITY; pts.len()];
        let mut heap = BinaryHeap::new();
        dist[0] = 0.0;
        heap.push(Reverse((0u64, 0usize)));
        while let Some(Reverse((bits, u))) = heap.pop() {
            let d = f64::from_bits(bits);
            if u == tid {
                return d;
            }
            if d > dist[u] {
                continue;
            }
            for &v in &adj[u] {
                let nd = d + len(u, v);
                if nd < dist[v] {
                    dist[v] = nd;
                    // non-negative floats order like their bit patterns
                    heap.push(Reverse((nd.to_bits(), v)));
                }
            }
        }
        dist[tid]
    }
}

fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Arc length of the ellipse `(u sin t, w cos t)` from `t = 0` to `t_end`.
pub fn ellipse_arc(u: f64, w: f64, t_end: f64) -> f64 {
    integrate(
        &|t: f64| (u * t.cos()).hypot(w * t.sin()),
        0.0,
        t_end,
        1e-13,
    )
}

/// Solves the 3×3 normal equations `(BᵀB) C = BᵀA` through the adjugate.
pub fn normal_equations(b: &[[f64; 3]], a: &[[f64; 3]]) -> [[f64; 3]; 3] {
    let mut btb = [[0.0; 3]; 3];
    let mut bta = [[0.0; 3]; 3];
    for (rb, ra) in b.iter().zip(a) {
        for i in 0..3 {
            for j in 0..3 {
                btb[i][j] += rb[i] * rb[j];
                bta[i][j] += rb[i] * ra[j];
            }
        }
    }
    let m = btb;
    let cof =
        |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let det = m[0][0] * adj[0][0] + m[0][1] * adj[1][0] + m[0][2] * adj[2][0];
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| adj[i][k] * bta[k][j]).sum::<f64>() / det;
        }
    }
    c
}

/// Point on the upper half-ellipsoid at polar angle `t` and azimuth `f`.
pub fn surface_point(radii: [f64; 3], t: f64, f: f64) -> [f64; 3] {
    [
        radii[0] * t.sin() * f.cos(),
        radii[1] * t.sin() * f.sin(),
        radii[2] * t.cos(),
    ]
}

pub fn chord(p: [f64; 3], q: [f64; 3]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}
