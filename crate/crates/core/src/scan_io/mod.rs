//! File formats: KITTI-layout scans, pose lists, camera calibration,
//! PGM/PPM rasters, one-byte-per-point label files and CSV tables.

mod calib;
mod pose;
mod raster;

use std::path::Path;

use nalgebra::Vector3;

pub use calib::{read_camera_calib, write_camera_calib, CameraCalib};
pub use pose::{format_poses, parse_pose_text, read_pose_file, write_pose_file, Pose};
pub use raster::{read_raster, write_raster, Raster};

use crate::error::{Error, Result};

const RECORD_BYTES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LidarPoint {
    pub position: Vector3<f64>,
    pub intensity: f32,
}

impl LidarPoint {
    pub fn new(x: f64, y: f64, z: f64, intensity: f32) -> Self {
        LidarPoint {
            position: Vector3::new(x, y, z),
            intensity,
        }
    }
}

/// One lidar revolution.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRecord {
    pub points: Vec<LidarPoint>,
    pub frame_index: usize,
    /// Sensor position in the scan's own frame; zero for raw scans.
    pub sensor_origin: Vector3<f64>,
}

impl ScanRecord {
    pub fn new(points: Vec<LidarPoint>, frame_index: usize) -> Self {
        ScanRecord {
            points,
            frame_index,
            sensor_origin: Vector3::zeros(),
        }
    }

    pub fn from_positions(positions: &[Vector3<f64>], frame_index: usize) -> Self {
        let points = positions
            .iter()
            .map(|&position| LidarPoint {
                position,
                intensity: 0.0,
            })
            .collect();
        Self::new(points, frame_index)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = &Vector3<f64>> + '_ {
        self.points.iter().map(|p| &p.position)
    }

    /// Keeps the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> ScanRecord {
        ScanRecord {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            frame_index: self.frame_index,
            sensor_origin: self.sensor_origin,
        }
    }

    /// Little-endian `f32` quadruples `(x, y, z, intensity)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.points.len() * RECORD_BYTES);
        for p in &self.points {
            for v in [
                p.position.x as f32,
                p.position.y as f32,
                p.position.z as f32,
                p.intensity,
            ] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], frame_index: usize) -> Result<Self> {
        if bytes.len() % RECORD_BYTES != 0 {
            return Err(Error::MalformedScan(format!(
                "size {} is not a multiple of {RECORD_BYTES}",
                bytes.len()
            )));
        }
        let mut points = Vec::with_capacity(bytes.len() / RECORD_BYTES);
        for (i, rec) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
            let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
            let (x, y, z, intensity) = (f(0), f(1), f(2), f(3));
            if ![x, y, z, intensity].iter().all(|v| v.is_finite()) {
                return Err(Error::MalformedScan(format!("non-finite value in point {i}")));
            }
            points.push(LidarPoint::new(x as f64, y as f64, z as f64, intensity));
        }
        Ok(ScanRecord::new(points, frame_index))
    }
}

pub fn read_scan(path: impl AsRef<Path>, frame_index: usize) -> Result<ScanRecord> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ScanRecord::from_bytes(&bytes, frame_index)
}

pub fn write_scan(path: impl AsRef<Path>, scan: &ScanRecord) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scan.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Per-point classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Label {
    Static = 0,
    Moving = 1,
    Ground = 2,
    /// Removed before classification (cropped or duplicate).
    Dropped = 3,
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::Static),
            1 => Ok(Label::Moving),
            2 => Ok(Label::Ground),
            3 => Ok(Label::Dropped),
            other => Err(Error::Format(format!("label value {other} > 3"))),
        }
    }
}

pub type LabelArray = Vec<Label>;

pub fn labels_to_bytes(labels: &[Label]) -> Vec<u8> {
    labels.iter().map(|&l| l as u8).collect()
}

pub fn labels_from_bytes(bytes: &[u8]) -> Result<LabelArray> {
    bytes.iter().map(|&b| Label::try_from(b)).collect()
}

pub fn read_label_file(path: impl AsRef<Path>) -> Result<LabelArray> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    labels_from_bytes(&bytes)
}

pub fn write_label_file(path: impl AsRef<Path>, labels: &[Label]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, labels_to_bytes(labels)).map_err(|e| Error::io(path, e))
}

/// One row of the per-frame metrics table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub frame: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
}

pub const METRICS_HEADER: [&str; 6] = ["frame", "tp", "fp", "fn", "precision", "recall"];

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.frame.to_string(),
            r.tp.to_string(),
            r.fp.to_string(),
            r.fn_.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_path(path.as_ref())?;
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(METRICS_HEADER) {
        return Err(Error::Format(format!("unexpected metrics header {headers:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<&str> {
            rec.get(i)
                .ok_or_else(|| Error::Format("short metrics row".into()))
        };
        let int = |i: usize| -> Result<usize> {
            field(i)?
                .parse()
                .map_err(|_| Error::Format(format!("bad integer in column {i}")))
        };
        let float = |i: usize| -> Result<f64> {
            field(i)?
                .parse()
                .map_err(|_| Error::Format(format!("bad number in column {i}")))
        };
        rows.push(MetricsRow {
            frame: int(0)?,
            tp: int(1)?,
            fp: int(2)?,
            fn_: int(3)?,
            precision: float(4)?,
            recall: float(5)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(vals: &[f32]) -> Vec<u8> {
        vals.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn single_record() {
        let scan = ScanRecord::from_bytes(&encode(&[1.0, 2.0, 3.0, 0.5]), 4).unwrap();
        assert_eq!(scan.len(), 1);
        assert_eq!(scan.points[0].position, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(scan.points[0].intensity, 0.5);
        assert_eq!(scan.frame_index, 4);
    }

    #[test]
    fn empty_file_is_empty_scan() {
        assert!(ScanRecord::from_bytes(&[], 0).unwrap().is_empty());
    }

    #[test]
    fn seventeen_bytes_is_malformed() {
        let err = ScanRecord::from_bytes(&[0u8; 17], 0).unwrap_err();
        assert!(matches!(err, Error::MalformedScan(_)));
    }

    #[test]
    fn nan_is_malformed() {
        let err = ScanRecord::from_bytes(&encode(&[1.0, f32::NAN, 3.0, 0.5]), 0).unwrap_err();
        assert!(matches!(err, Error::MalformedScan(_)));
    }

    #[test]
    fn label_bytes() {
        let labels = vec![Label::Static, Label::Moving, Label::Ground];
        let bytes = labels_to_bytes(&labels);
        assert_eq!(bytes, vec![0x00, 0x01, 0x02]);
        assert_eq!(labels_from_bytes(&bytes).unwrap(), labels);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(labels_from_bytes(&[0, 4]), Err(Error::Format(_))));
    }

    #[test]
    fn metrics_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![MetricsRow {
            frame: 3,
            tp: 10,
            fp: 2,
            fn_: 1,
            precision: 10.0 / 12.0,
            recall: 10.0 / 11.0,
        }];
        write_metrics_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("frame,tp,fp,fn,precision,recall\n"));
        assert_eq!(read_metrics_csv(&path).unwrap(), rows);
    }
}
