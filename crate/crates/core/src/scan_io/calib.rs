use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix3x4;

use super::Pose;
use crate::error::{Error, Result};

/// Pinhole camera rigidly mounted on the lidar.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraCalib {
    /// 3×4 camera matrix mapping camera-frame homogeneous points to pixels.
    pub projection: Matrix3x4<f64>,
    /// Focal length in pixels.
    pub f_xy: f64,
    pub image_size: (usize, usize),
    /// Lidar frame → camera frame.
    pub lidar_to_camera: Pose,
}

impl CameraCalib {
    /// Square-pixel pinhole `[K | 0]` with focal `f` and principal point `(cx, cy)`.
    pub fn pinhole(
        f: f64,
        cx: f64,
        cy: f64,
        image_size: (usize, usize),
        lidar_to_camera: Pose,
    ) -> Result<Self> {
        #[rustfmt::skip]
        let projection = Matrix3x4::new(
            f, 0.0, cx, 0.0,
            0.0, f, cy, 0.0,
            0.0, 0.0, 1.0, 0.0,
        );
        let calib = CameraCalib {
            projection,
            f_xy: f,
            image_size,
            lidar_to_camera,
        };
        calib.validate()?;
        Ok(calib)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_xy > 0.0) {
            return Err(Error::InvalidParams(format!("focal length {} must be > 0", self.f_xy)));
        }
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return Err(Error::InvalidParams("image size must be positive".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let p: Vec<String> = (0..3)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .map(|(r, c)| format!("{:e}", self.projection[(r, c)]))
            .collect();
        let tr: Vec<String> = self
            .lidar_to_camera
            .to_row_major()
            .iter()
            .map(|x| format!("{x:e}"))
            .collect();
        let _ = writeln!(out, "P: {}", p.join(" "));
        let _ = writeln!(out, "Tr: {}", tr.join(" "));
        let _ = writeln!(out, "size: {} {}", self.image_size.0, self.image_size.1);
        out
    }

    /// Parses `key: values` lines with keys `P` (12 numbers), `Tr` (12 numbers)
    /// and `size` (width height). Unknown keys are ignored so KITTI-style files
    /// with extra entries still load.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut projection = None;
        let mut tr = None;
        let mut size = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, rest)) = line.split_once(':') else {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "expected `key: values`".into(),
                });
            };
            let nums = || -> Result<Vec<f64>> {
                rest.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>().map_err(|e| Error::Parse {
                            line: i + 1,
                            msg: format!("bad number {t:?}: {e}"),
                        })
                    })
                    .collect()
            };
            match key.trim() {
                "P" | "P2" => {
                    let v = nums()?;
                    if v.len() != 12 {
                        return Err(Error::Parse {
                            line: i + 1,
                            msg: format!("P needs 12 numbers, found {}", v.len()),
                        });
                    }
                    projection = Some(Matrix3x4::from_row_slice(&v));
                }
                "Tr" | "Tr_velo_to_cam" => {
                    let v = nums()?;
                    let arr: [f64; 12] = v.as_slice().try_into().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("Tr needs 12 numbers, found {}", v.len()),
                    })?;
                    tr = Some(Pose::from_row_major(&arr)?);
                }
                "size" => {
                    let v = nums()?;
                    if v.len() != 2 || v.iter().any(|x| x.fract() != 0.0 || *x <= 0.0) {
                        return Err(Error::Parse {
                            line: i + 1,
                            msg: "size needs two positive integers".into(),
                        });
                    }
                    size = Some((v[0] as usize, v[1] as usize));
                }
                _ => {}
            }
        }
        let projection: Matrix3x4<f64> =
            projection.ok_or_else(|| Error::Format("calibration lacks P".into()))?;
        let calib = CameraCalib {
            f_xy: projection[(0, 0)],
            projection,
            image_size: size.ok_or_else(|| Error::Format("calibration lacks size".into()))?,
            lidar_to_camera: tr.ok_or_else(|| Error::Format("calibration lacks Tr".into()))?,
        };
        calib.validate()?;
        Ok(calib)
    }
}

pub fn read_camera_calib(path: impl AsRef<Path>) -> Result<CameraCalib> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CameraCalib::from_text(&text)
}

pub fn write_camera_calib(path: impl AsRef<Path>, calib: &CameraCalib) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, calib.to_text()).map_err(|e| Error::io(path, e))
}
