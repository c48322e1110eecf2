use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};

/// Distance from orthonormality that is silently repaired on read.
const REPAIR_TOLERANCE: f64 = 1e-3;
/// Distance from orthonormality accepted without repair.
const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

/// Rigid transform `p ↦ R·p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose, rejecting rotations that are not orthonormal within 1e-6.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let dev = orthonormal_deviation(&rotation);
        if dev > ORTHONORMAL_TOLERANCE {
            return Err(Error::InvalidPose(format!(
                "rotation deviates from orthonormal by {dev:e}"
            )));
        }
        Ok(Pose {
            rotation,
            translation,
        })
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation about +Z by `yaw` radians followed by translation `t`.
    pub fn from_yaw(yaw: f64, t: Vector3<f64>) -> Self {
        Pose {
            rotation: *Rotation3::from_axis_angle(&Vector3::z_axis(), yaw).matrix(),
            translation: t,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Largest per-entry deviation of `RᵀR` from identity, plus `|det R - 1|`.
    pub fn orthonormal_deviation(&self) -> f64 {
        orthonormal_deviation(&self.rotation)
    }

    /// Row-major 3×4 `[R | t]`.
    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        ]
    }

    /// Parses a row-major `[R | t]`, repairing rotations within 1e-3 of
    /// orthonormal and rejecting anything farther.
    pub fn from_row_major(v: &[f64; 12]) -> Result<Pose> {
        let rotation = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        let translation = Vector3::new(v[3], v[7], v[11]);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPose("non-finite entry".into()));
        }
        let dev = orthonormal_deviation(&rotation);
        if dev > REPAIR_TOLERANCE {
            return Err(Error::InvalidPose(format!(
                "rotation deviates from orthonormal by {dev:e}"
            )));
        }
        let rotation = if dev > 0.0 {
            reorthonormalize(&rotation)
        } else {
            rotation
        };
        Ok(Pose {
            rotation,
            translation,
        })
    }
}

fn orthonormal_deviation(r: &Matrix3<f64>) -> f64 {
    let gram = r.transpose() * r - Matrix3::identity();
    let max_entry = gram.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    max_entry.max((r.determinant() - 1.0).abs())
}

/// Nearest rotation in the Frobenius sense (polar decomposition via SVD).
fn reorthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut out = u * vt;
    if out.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        out = u * vt;
    }
    out
}

pub fn parse_pose_text(text: &str) -> Result<Vec<Pose>> {
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: format!("bad number {tok:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let arr: [f64; 12] = values.as_slice().try_into().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("expected 12 numbers, found {}", values.len()),
        })?;
        poses.push(Pose::from_row_major(&arr)?);
    }
    Ok(poses)
}

/// One pose per line, 12 whitespace-separated numbers (row-major 3×4).
pub fn read_pose_file(path: impl AsRef<Path>) -> Result<Vec<Pose>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pose_text(&text)
}

pub fn format_poses(poses: &[Pose]) -> String {
    let mut out = String::new();
    for pose in poses {
        let row = pose.to_row_major();
        let line: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn write_pose_file(path: impl AsRef<Path>, poses: &[Pose]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_poses(poses)).map_err(|e| Error::io(path, e))
}
