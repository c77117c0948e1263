//! Flat `key = value` case files.
//!
//! ```text
//! # case 0023-1
//! fthrx = 30.0
//! brsep = 5.0
//! ...
//! ```
//!
//! Keys may appear in any order, `#` starts a comment and numbers must carry
//! a decimal point so files read the same under every locale. Keys with a dot
//! in them (`cnt.r`, `mk.x_n`, ...) are report outputs and are skipped, which
//! lets a machine report be fed back in as a case.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::forward::{AffineProjector, CalibratedProjector, CalibrationPair, ForwardProjector};
use crate::model::{build_measurements, BreastMeasurements};

const TAPE_KEYS: [&str; 4] = ["fthrx", "brsep", "vertical_arc", "crc_arc"];
const RADII_KEYS: [&str; 4] = ["xr", "yr", "zr", "hc"];
const OBS_KEYS: [&str; 7] = ["lat_x", "lat_z", "xc", "zc", "pw", "pz", "bc"];
const EXTREME_KEYS: [&str; 4] = ["lw", "lz", "rw", "rz"];
const CAL_KEYS: [&str; 8] = [
    "cal_x0", "cal_z0", "cal_y1", "cal_cc1x", "cal_cc1z", "cal_y2", "cal_cc2x", "cal_cc2z",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectorChoice {
    #[default]
    Affine,
    Calibrated,
}

impl ProjectorChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            ProjectorChoice::Affine => "affine",
            ProjectorChoice::Calibrated => "calibrated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "affine" => Some(ProjectorChoice::Affine),
            "calibrated" => Some(ProjectorChoice::Calibrated),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeodesicChoice {
    #[default]
    Closed,
    Numeric,
}

impl GeodesicChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            GeodesicChoice::Closed => "closed",
            GeodesicChoice::Numeric => "numeric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "closed" => Some(GeodesicChoice::Closed),
            "numeric" => Some(GeodesicChoice::Numeric),
            _ => None,
        }
    }
}

/// How the breast radii are specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementSource {
    /// `fthrx, brsep, vertical_arc, crc_arc`
    Tape([f64; 4]),
    /// `xr, yr, zr, hc`, bypassing the tape conversion.
    Radii([f64; 4]),
}

/// MLO images of the chord extremes `(lw + i lz, rw + i rz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremesOverride {
    pub l: (f64, f64),
    pub r: (f64, f64),
}

/// Two-point calibration for the calibrated projector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationKeys {
    pub base: (f64, f64),
    pub first: CalibrationPair,
    pub second: CalibrationPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseFile {
    pub source: MeasurementSource,
    pub lat_x: f64,
    pub lat_z: f64,
    pub xc: f64,
    pub zc: f64,
    pub pw: f64,
    pub pz: f64,
    pub bc: f64,
    /// MLO disk radius; `H_c` when absent.
    pub h: Option<f64>,
    pub projector: ProjectorChoice,
    pub geodesic: GeodesicChoice,
    pub flip_side: bool,
    pub refine: bool,
    pub extremes: Option<ExtremesOverride>,
    pub calibration: Option<CalibrationKeys>,
}

enum Value {
    Num(f64),
    Word(String),
}

fn parse_value(line: usize, key: &str, raw: &str) -> Result<Value> {
    let starts_numeric = raw
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.'));
    if !starts_numeric {
        return Ok(Value::Word(raw.to_string()));
    }
    if raw.contains(',') {
        return Err(Error::Parse {
            line,
            message: format!("`{key}`: use a decimal point, not a comma, in `{raw}`"),
        });
    }
    if !raw.contains('.') {
        return Err(Error::Parse {
            line,
            message: format!("`{key}`: numbers need a decimal point (`{raw}` -> `{raw}.0`)"),
        });
    }
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Value::Num)
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("`{key}`: `{raw}` is not a number"),
        })
}

fn is_known(key: &str) -> bool {
    TAPE_KEYS
        .iter()
        .chain(&RADII_KEYS)
        .chain(&OBS_KEYS)
        .chain(&EXTREME_KEYS)
        .chain(&CAL_KEYS)
        .any(|k| *k == key)
        || matches!(key, "H" | "projector" | "geodesic" | "flip_side" | "refine")
}

struct Entries {
    values: BTreeMap<String, (usize, Value)>,
}

impl Entries {
    fn num(&self, key: &str) -> Result<f64> {
        match self.values.get(key) {
            None => Err(Error::MissingKey(key.to_string())),
            Some((_, Value::Num(v))) => Ok(*v),
            Some((line, Value::Word(w))) => Err(Error::Parse {
                line: *line,
                message: format!("`{key}` expects a number, got `{w}`"),
            }),
        }
    }

    fn opt_num(&self, key: &str) -> Result<Option<f64>> {
        if self.values.contains_key(key) {
            self.num(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn word(&self, key: &str) -> Option<(usize, &str)> {
        match self.values.get(key) {
            Some((line, Value::Word(w))) => Some((*line, w.as_str())),
            Some((line, Value::Num(_))) => Some((*line, "")),
            None => None,
        }
    }

    fn any(&self, keys: &[&str]) -> bool {
        keys.iter().any(|k| self.values.contains_key(*k))
    }

    fn all<const N: usize>(&self, keys: [&str; N]) -> Result<[f64; N]> {
        let mut out = [0.0; N];
        for (slot, key) in out.iter_mut().zip(keys) {
            *slot = self.num(key)?;
        }
        Ok(out)
    }

    fn choice<T>(
        &self,
        key: &str,
        parse: fn(&str) -> Option<T>,
        allowed: &str,
    ) -> Result<Option<T>> {
        match self.word(key) {
            None => Ok(None),
            Some((line, w)) => parse(w).map(Some).ok_or_else(|| Error::Parse {
                line,
                message: format!("`{key}` must be one of {allowed}"),
            }),
        }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

pub fn parse_case(text: &str) -> Result<CaseFile> {
    let mut values = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if key.contains('.') {
            continue;
        }
        if !is_known(key) {
            return Err(Error::Parse {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        if value.is_empty() {
            return Err(Error::Parse {
                line,
                message: format!("`{key}` has no value"),
            });
        }
        let parsed = parse_value(line, key, value)?;
        if let Some((first, _)) = values.insert(key.to_string(), (line, parsed)) {
            return Err(Error::Parse {
                line,
                message: format!("`{key}` already set on line {first}"),
            });
        }
    }
    let e = Entries { values };

    // complete radii win over tape measurements
    let source = if RADII_KEYS.iter().all(|k| e.values.contains_key(*k)) {
        MeasurementSource::Radii(e.all(RADII_KEYS)?)
    } else {
        MeasurementSource::Tape(e.all(TAPE_KEYS)?)
    };
    let [lat_x, lat_z, xc, zc, pw, pz, bc] = e.all(OBS_KEYS)?;

    let extremes = if e.any(&EXTREME_KEYS) {
        let [lw, lz, rw, rz] = e.all(EXTREME_KEYS)?;
        Some(ExtremesOverride {
            l: (lw, lz),
            r: (rw, rz),
        })
    } else {
        None
    };
    let calibration = if e.any(&CAL_KEYS) {
        let [x0, z0, y1, c1x, c1z, y2, c2x, c2z] = e.all(CAL_KEYS)?;
        Some(CalibrationKeys {
            base: (x0, z0),
            first: CalibrationPair {
                y_n: y1,
                cc: (c1x, c1z),
            },
            second: CalibrationPair {
                y_n: y2,
                cc: (c2x, c2z),
            },
        })
    } else {
        None
    };

    Ok(CaseFile {
        source,
        lat_x,
        lat_z,
        xc,
        zc,
        pw,
        pz,
        bc,
        h: e.opt_num("H")?,
        projector: e
            .choice(
                "projector",
                ProjectorChoice::parse,
                "`affine`, `calibrated`",
            )?
            .unwrap_or_default(),
        geodesic: e
            .choice("geodesic", GeodesicChoice::parse, "`closed`, `numeric`")?
            .unwrap_or_default(),
        flip_side: e
            .choice("flip_side", parse_bool, "`true`, `false`")?
            .unwrap_or(false),
        refine: e
            .choice("refine", parse_bool, "`true`, `false`")?
            .unwrap_or(true),
        extremes,
        calibration,
    })
}

pub fn load_case(path: impl AsRef<Path>) -> Result<CaseFile> {
    parse_case(&std::fs::read_to_string(path)?)
}

/// Shortest decimal text that reads back to exactly `v`, always with a
/// decimal point.
pub fn exact(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('.') {
        s
    } else if let Some(pos) = s.find('e') {
        format!("{}.0{}", &s[..pos], &s[pos..])
    } else {
        format!("{s}.0")
    }
}

impl CaseFile {
    pub fn measurements(&self) -> Result<BreastMeasurements> {
        match self.source {
            MeasurementSource::Tape([fthrx, brsep, varc, crc]) => {
                build_measurements(fthrx, brsep, varc, crc, self.lat_x, self.lat_z)
            }
            MeasurementSource::Radii([xr, yr, zr, hc]) => {
                BreastMeasurements::from_radii(xr, yr, zr, hc, self.lat_x, self.lat_z)
            }
        }
    }

    pub fn build_projector(&self) -> Result<Box<dyn ForwardProjector>> {
        Ok(match self.projector {
            ProjectorChoice::Affine => Box::new(AffineProjector::new()),
            ProjectorChoice::Calibrated => match &self.calibration {
                Some(c) => Box::new(CalibratedProjector::new(c.base, c.first, c.second)?),
                None => Box::new(CalibratedProjector::default()),
            },
        })
    }

    /// Canonical case text; parsing it gives back `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        match self.source {
            MeasurementSource::Tape(v) => {
                TAPE_KEYS.iter().zip(v).for_each(|(k, v)| put(k, exact(v)))
            }
            MeasurementSource::Radii(v) => {
                RADII_KEYS.iter().zip(v).for_each(|(k, v)| put(k, exact(v)))
            }
        }
        let obs = [
            self.lat_x, self.lat_z, self.xc, self.zc, self.pw, self.pz, self.bc,
        ];
        OBS_KEYS.iter().zip(obs).for_each(|(k, v)| put(k, exact(v)));
        if let Some(h) = self.h {
            put("H", exact(h));
        }
        put("projector", self.projector.as_str().to_string());
        put("geodesic", self.geodesic.as_str().to_string());
        put("flip_side", self.flip_side.to_string());
        put("refine", self.refine.to_string());
        if let Some(x) = &self.extremes {
            let v = [x.l.0, x.l.1, x.r.0, x.r.1];
            EXTREME_KEYS
                .iter()
                .zip(v)
                .for_each(|(k, v)| put(k, exact(v)));
        }
        if let Some(c) = &self.calibration {
            let v = [
                c.base.0,
                c.base.1,
                c.first.y_n,
                c.first.cc.0,
                c.first.cc.1,
                c.second.y_n,
                c.second.cc.0,
                c.second.cc.1,
            ];
            CAL_KEYS.iter().zip(v).for_each(|(k, v)| put(k, exact(v)));
        }
        out
    }
}
