//! Moving object detection in sequences of 3D lidar scans.
//!
//! Every point of a scan is tested against the beams of the scans that
//! precede and follow it. Beam evidence is expressed as Dempster–Shafer
//! masses over `{empty, occupied, unknown}`, fused per scan, snapped to a
//! distance-weighted discrete belief, and fused again across the window.
//! A point whose fused belief is predominantly *empty* was observed in space
//! that other scans saw through, so it belongs to something that moved.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`scan_io`] — scans, poses, calibration, rasters, label files, CSV tables.
//! * [`preprocess`] — pose application, far-point crop, window dedup, ICP.
//! * [`ground`] — ring-propagated tile grid ground removal.
//! * [`evidential`] — the belief algebra.
//! * [`motion`] — octree-indexed window classification.
//! * [`validation`] — image/depth patch tests that demote false positives.
//! * [`evaluation`] — precision/recall, object counts, ROC sweeps.
//! * [`synth`] — ray-cast labeled scenes used as ground truth.
//! * [`pipeline`] — the streaming detector that ties the stages together.
//!
//! With the default `parallel` feature the hot loops run on rayon; without it
//! the same code paths run sequentially and produce identical output.

pub mod error;
pub mod evaluation;
pub mod evidential;
pub mod ground;
pub mod motion;
mod par;
pub mod pipeline;
pub mod preprocess;
pub mod scan_io;
pub mod spatial;
pub mod synth;
pub mod validation;

pub use error::{Error, Result};
pub use evidential::Belief;
pub use scan_io::{Label, LidarPoint, Pose, Raster, ScanRecord};
