//! Phantom nodule trajectories and the linear compression model fitted to
//! them.
//!
//! Coordinates are in the phantom `OXYZ` frame. Before fitting, `Y` is
//! shifted by the lower-plate offset so that the plate sits at zero; in that
//! frame the displacement is close to linear with no translation term.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, Matrix3};

use crate::error::{Error, Result};
use crate::model::Point3;

pub const DEFAULT_PLATE_OFFSET: f64 = 2.25;
pub const DEFAULT_K: f64 = 1.22;

const MIN_RECORDS: usize = 4;
const HEADER: [&str; 7] = ["label", "xb", "yb", "zb", "xa", "ya", "za"];

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub label: char,
    pub before: Point3,
    pub after: Point3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    records: Vec<TrajectoryRecord>,
    plate_offset: f64,
}

impl TrajectoryDataset {
    pub fn new(records: Vec<TrajectoryRecord>) -> Result<Self> {
        if records.len() < MIN_RECORDS {
            return Err(Error::validation(
                "records",
                format!("need at least {MIN_RECORDS} nodules, got {}", records.len()),
            ));
        }
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.label) {
                return Err(Error::validation(
                    "label",
                    format!("duplicate label `{}`", r.label),
                ));
            }
        }
        Ok(TrajectoryDataset {
            records,
            plate_offset: DEFAULT_PLATE_OFFSET,
        })
    }

    pub fn with_plate_offset(mut self, offset: f64) -> Self {
        self.plate_offset = offset;
        self
    }

    pub fn records(&self) -> &[TrajectoryRecord] {
        &self.records
    }

    pub fn plate_offset(&self) -> f64 {
        self.plate_offset
    }

    /// Parses `label,xb,yb,zb,xa,ya,za` rows. The `y` columns hold signed `Y`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(reader);

        let mut records = Vec::new();
        let mut header_seen = false;
        for row in rdr.records() {
            let row = row.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
            if !header_seen {
                if row.iter().ne(HEADER.iter().copied()) {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected header `{}`", HEADER.join(",")),
                    });
                }
                header_seen = true;
                continue;
            }
            if row.len() != HEADER.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, got {}", HEADER.len(), row.len()),
                });
            }
            let mut chars = row[0].chars();
            let label = match (chars.next(), chars.next()) {
                (Some(c), None) if c.is_ascii_alphabetic() => c,
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("label `{}` is not a single letter", &row[0]),
                    })
                }
            };
            let mut v = [0.0; 6];
            for (slot, field) in v.iter_mut().zip(row.iter().skip(1)) {
                *slot = field.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{field}` is not a number"),
                })?;
            }
            records.push(TrajectoryRecord {
                label,
                before: Point3::new(v[0], v[1], v[2]),
                after: Point3::new(v[3], v[4], v[5]),
            });
        }
        if !header_seen {
            return Err(Error::Parse {
                line: 1,
                message: "empty trajectory file".into(),
            });
        }
        TrajectoryDataset::new(records)
    }
}

pub fn load_trajectories(path: impl AsRef<Path>) -> Result<TrajectoryDataset> {
    let file = std::fs::File::open(path)?;
    TrajectoryDataset::from_csv_reader(file)
}

/// Least-squares linear map `after ≈ before · C` (row vectors).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFit {
    pub c: Matrix3<f64>,
    /// Shifted before-coordinates, one nodule per row.
    pub b: DMatrix<f64>,
    /// Shifted after-coordinates, one nodule per row.
    pub a: DMatrix<f64>,
    /// `a - b * c`.
    pub residuals: DMatrix<f64>,
    pub labels: Vec<char>,
    pub max_abs_residual: f64,
    /// Nodule label and axis index (0 = x, 1 = y, 2 = z) of the largest residual.
    pub max_residual_location: (char, usize),
}

impl AffineFit {
    pub fn frobenius_residual(&self) -> f64 {
        self.residuals.norm()
    }

    /// Largest entry of `|C − k·I|`.
    pub fn diagonal_gap_to(&self, k: f64) -> f64 {
        (self.c - Matrix3::identity() * k).abs().max()
    }
}

pub fn fit_affine(d: &TrajectoryDataset) -> Result<AffineFit> {
    let n = d.records.len();
    let shift = Point3::new(0.0, d.plate_offset, 0.0);
    let b = DMatrix::from_fn(n, 3, |i, j| (d.records[i].before + shift)[j]);
    let a = DMatrix::from_fn(n, 3, |i, j| (d.records[i].after + shift)[j]);

    let svd = b.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smax > 0.0) || smin <= 1e-10 * smax {
        return Err(Error::Singular(format!(
            "before-coordinates have rank < 3 (singular values {smin:.3e} .. {smax:.3e})"
        )));
    }
    let sol = svd
        .solve(&a, 0.0)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let c = Matrix3::from_fn(|i, j| sol[(i, j)]);

    let residuals = &a - &b * sol;
    let labels: Vec<char> = d.records.iter().map(|r| r.label).collect();
    let mut max_abs_residual = 0.0;
    let mut loc = (labels[0], 0);
    for i in 0..n {
        for j in 0..3 {
            let v = residuals[(i, j)].abs();
            if v > max_abs_residual {
                max_abs_residual = v;
                loc = (labels[i], j);
            }
        }
    }
    Ok(AffineFit {
        c,
        b,
        a,
        residuals,
        labels,
        max_abs_residual,
        max_residual_location: loc,
    })
}

/// Distance of the fitted matrix from `1.22·I`.
pub fn diagonal_gap(f: &AffineFit) -> f64 {
    f.diagonal_gap_to(DEFAULT_K)
}

/// Uniform compression between plates: `(x, y, z) → (kx, (plate_y − y)/k, kz)`.
///
/// The reduction in height on release is some `c` slightly below `1/k`; it is
/// not modelled separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomCompression {
    k: f64,
    plate_y: f64,
}

impl Default for PhantomCompression {
    fn default() -> Self {
        PhantomCompression {
            k: DEFAULT_K,
            plate_y: -DEFAULT_PLATE_OFFSET,
        }
    }
}

impl PhantomCompression {
    pub fn new(k: f64, plate_y: f64) -> Result<Self> {
        if !(k.is_finite() && k > 1.0) {
            return Err(Error::validation("k", format!("must exceed 1, got {k}")));
        }
        if !(plate_y.is_finite() && plate_y < 0.0) {
            return Err(Error::validation(
                "plate_y",
                format!("must be negative, got {plate_y}"),
            ));
        }
        Ok(PhantomCompression { k, plate_y })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn inv_k(&self) -> f64 {
        1.0 / self.k
    }

    pub fn plate_y(&self) -> f64 {
        self.plate_y
    }

    pub fn invert(&self, p: Point3) -> Point3 {
        Point3::new(p.x / self.k, self.plate_y - self.k * p.y, p.z / self.k)
    }
}

pub fn apply_phantom_compression(p: Point3, c: &PhantomCompression) -> Point3 {
    Point3::new(c.k * p.x, (c.plate_y - p.y) / c.k, c.k * p.z)
}
