//! Reverse localization of a breast tumour: from its positions in the CC and
//! MLO mammograms to surgery coordinates `(r, p, d)` — geodesic distance from
//! the nipple, phase angle and cut depth.
//!
//! All lengths are centimetres. The surgery (SRG) frame has its origin at the
//! centre of the breast base, `Oz` vertical through the nipple, `Oy`
//! sagittal and `Ox` lateral.

pub mod casefile;
pub mod conformal;
pub mod error;
pub mod forward;
pub mod geodesic;
pub mod localization;
pub mod model;
pub mod phantom;
pub mod pipeline;

pub use casefile::{load_case, parse_case, CaseFile, GeodesicChoice, ProjectorChoice};
pub use conformal::{mobius_forward, mobius_inverse, mobius_param_from_case, MobiusParams};
pub use error::{Error, ErrorKind, Result};
pub use forward::{AffineProjector, CalibratedProjector, ForwardProjector};
pub use geodesic::{geodesic_from_nipple, surgery_target_numeric, EllipsoidSurface};
pub use model::{BreastMeasurements, NodulePosition, Point3, Side, SurgeryTarget};
pub use phantom::{fit_affine, load_trajectories, AffineFit, TrajectoryDataset};
pub use pipeline::{locate, locate_file, CaseReport, LocateOverrides};
