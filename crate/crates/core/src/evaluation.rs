//! Precision/recall against projected ground-truth masks or per-point
//! labels, object-level detection counts, and parameter sweeps.

use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::scan_io::{Label, MetricsRow, Raster};
use crate::validation::{disk_offsets, project_to_camera, CameraFrame};

/// Counts and rates for one frame (or an aggregate of frames).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrameEval {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
}

impl FrameEval {
    /// Precision is 1 when nothing was predicted, recall is 1 when nothing
    /// was there to find.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            1.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        FrameEval {
            tp,
            fp,
            fn_,
            precision,
            recall,
        }
    }

    pub fn to_row(&self, frame: usize) -> MetricsRow {
        MetricsRow {
            frame,
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
            precision: self.precision,
            recall: self.recall,
        }
    }
}

/// Sums the counts of several frames.
pub fn aggregate<'a, I: IntoIterator<Item = &'a FrameEval>>(evals: I) -> FrameEval {
    let (tp, fp, fn_) = evals
        .into_iter()
        .fold((0, 0, 0), |(a, b, c), e| (a + e.tp, b + e.fp, c + e.fn_));
    FrameEval::from_counts(tp, fp, fn_)
}

fn stamp_disk(mask: &mut Raster, x: usize, y: usize, disk: &[(i64, i64)]) {
    for &(dx, dy) in disk {
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if nx >= 0 && ny >= 0 && (nx as usize) < mask.width && (ny as usize) < mask.height {
            mask.set(nx as usize, ny as usize, 0, 1.0);
        }
    }
}

/// Binary mask of Moving points projected into the image and dilated by a
/// disk of `dilation` pixels.
pub fn labels_to_mask(
    labels: &[Label],
    points: &[Vector3<f64>],
    frame: &CameraFrame,
    dilation: usize,
) -> Raster {
    let (w, h) = frame.calib.image_size;
    let mut mask = Raster::new(w, h, 1, 0.0);
    let disk = disk_offsets(dilation);
    for (p, l) in points.iter().zip(labels) {
        if *l != Label::Moving {
            continue;
        }
        if let Some((x, y)) = project_to_camera(p, frame).pixel() {
            stamp_disk(&mut mask, x, y, &disk);
        }
    }
    mask
}

/// Point-level counts against a ground-truth mask. Only points that project
/// into the image take part. A point is ground-truth moving when it lands on
/// a non-zero mask pixel.
pub fn prf_frame(
    labels: &[Label],
    points: &[Vector3<f64>],
    frame: &CameraFrame,
    gt_mask: &Raster,
) -> Result<FrameEval> {
    if (gt_mask.width, gt_mask.height) != frame.calib.image_size {
        return Err(Error::SizeMismatch(format!(
            "mask is {}x{}, camera image is {}x{}",
            gt_mask.width, gt_mask.height, frame.calib.image_size.0, frame.calib.image_size.1
        )));
    }
    if labels.len() != points.len() {
        return Err(Error::SizeMismatch(format!(
            "{} labels for {} points",
            labels.len(),
            points.len()
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, l) in points.iter().zip(labels) {
        let Some((x, y)) = project_to_camera(p, frame).pixel() else {
            continue;
        };
        let truth = (0..gt_mask.channels).any(|c| gt_mask.get(x, y, c) > 0.0);
        match (*l == Label::Moving, truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(FrameEval::from_counts(tp, fp, fn_))
}

/// Point-level counts against per-point ground truth.
pub fn prf_points(labels: &[Label], truth: &[Label]) -> Result<FrameEval> {
    if labels.len() != truth.len() {
        return Err(Error::SizeMismatch(format!(
            "{} labels for {} ground-truth labels",
            labels.len(),
            truth.len()
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (l, t) in labels.iter().zip(truth) {
        match (*l == Label::Moving, *t == Label::Moving) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(FrameEval::from_counts(tp, fp, fn_))
}

/// Fractions used to call an object detected.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectThresholds {
    /// Share of an object's points that must be Moving in a frame.
    pub point_fraction: f64,
    /// Share of visible frames that must pass the point test.
    pub frame_fraction: f64,
}

impl Default for ObjectThresholds {
    fn default() -> Self {
        ObjectThresholds {
            point_fraction: 0.5,
            frame_fraction: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ObjectCount {
    pub visible_frames: usize,
    pub passing_frames: usize,
    pub detected: bool,
    pub partial: bool,
}

/// One frame's labels, points and camera.
pub struct LabeledView<'a> {
    pub labels: &'a [Label],
    pub points: &'a [Vector3<f64>],
    pub frame: &'a CameraFrame,
}

/// Detected / partially detected status per object. `gt_objects[f][o]` is the
/// mask of object `o` in frame `f`. An object is visible in a frame when at
/// least one point projects into its mask.
pub fn object_counts(
    views: &[LabeledView<'_>],
    gt_objects: &[Vec<Raster>],
    thresholds: &ObjectThresholds,
) -> Result<Vec<ObjectCount>> {
    if views.len() != gt_objects.len() {
        return Err(Error::SizeMismatch(format!(
            "{} frames of labels, {} frames of object masks",
            views.len(),
            gt_objects.len()
        )));
    }
    let objects = gt_objects.iter().map(Vec::len).max().unwrap_or(0);
    let mut counts = vec![ObjectCount::default(); objects];
    let mut any_hit = vec![false; objects];
    for (view, masks) in views.iter().zip(gt_objects) {
        let pixels: Vec<Option<(usize, usize)>> = view
            .points
            .iter()
            .map(|p| project_to_camera(p, view.frame).pixel())
            .collect();
        for (o, mask) in masks.iter().enumerate() {
            let (mut inside, mut moving) = (0usize, 0usize);
            for (px, l) in pixels.iter().zip(view.labels) {
                if let Some((x, y)) = *px {
                    if x < mask.width && y < mask.height && mask.get(x, y, 0) > 0.0 {
                        inside += 1;
                        if *l == Label::Moving {
                            moving += 1;
                        }
                    }
                }
            }
            if inside == 0 {
                continue;
            }
            counts[o].visible_frames += 1;
            if moving > 0 {
                any_hit[o] = true;
            }
            if moving as f64 >= thresholds.point_fraction * inside as f64 {
                counts[o].passing_frames += 1;
            }
        }
    }
    for (c, hit) in counts.iter_mut().zip(any_hit) {
        c.detected = c.visible_frames > 0
            && c.passing_frames as f64 >= thresholds.frame_fraction * c.visible_frames as f64;
        c.partial = !c.detected && hit;
    }
    Ok(counts)
}

/// Grid of noise parameters to sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSpec {
    pub sigma_r_range: (f64, f64),
    pub theta_range: (f64, f64),
    pub sigma_r_steps: usize,
    pub theta_steps: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            sigma_r_range: (0.1, 0.45),
            theta_range: (0.0035, 0.0088),
            sigma_r_steps: 3,
            theta_steps: 3,
        }
    }
}

fn axis(range: (f64, f64), steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| {
            let t = i as f64 / (steps - 1) as f64;
            range.0 * (1.0 - t) + range.1 * t
        })
        .collect()
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: (f64, f64)| r.0 < r.1 && r.0 > 0.0;
        if !ok(self.sigma_r_range) || !ok(self.theta_range) {
            return Err(Error::InvalidParams("sweep ranges need 0 < lo < hi".into()));
        }
        if self.sigma_r_steps < 2 || self.theta_steps < 2 {
            return Err(Error::InvalidParams("sweep needs at least 2 steps per axis".into()));
        }
        Ok(())
    }

    /// Grid cells in row order: `sigma_r` outer, `theta` inner.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let thetas = axis(self.theta_range, self.theta_steps);
        axis(self.sigma_r_range, self.sigma_r_steps)
            .into_iter()
            .flat_map(|s| thetas.iter().map(move |&t| (s, t)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocRow {
    pub sigma_r: f64,
    pub theta: f64,
    pub precision: f64,
    pub recall: f64,
}

pub const ROC_HEADER: [&str; 4] = ["sigma_r", "theta", "precision", "recall"];

/// Evaluates every grid cell with `run(sigma_r, theta)`, in grid order.
pub fn roc_sweep<F>(spec: &SweepSpec, mut run: F) -> Result<Vec<RocRow>>
where
    F: FnMut(f64, f64) -> Result<FrameEval>,
{
    spec.validate()?;
    spec.cells()
        .into_iter()
        .map(|(sigma_r, theta)| {
            let e = run(sigma_r, theta)?;
            Ok(RocRow {
                sigma_r,
                theta,
                precision: e.precision,
                recall: e.recall,
            })
        })
        .collect()
}

pub fn write_roc_csv(path: impl AsRef<Path>, rows: &[RocRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ROC_HEADER)?;
    for r in rows {
        w.write_record([
            r.sigma_r.to_string(),
            r.theta.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_roc_csv(path: impl AsRef<Path>) -> Result<Vec<RocRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ROC_HEADER {
        return Err(Error::Format(format!("unexpected ROC header {header:?}")));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or(Error::Parse {
                        line: i + 2,
                        msg: format!("column {} is not a number", ROC_HEADER[k]),
                    })
            };
            Ok(RocRow {
                sigma_r: num(0)?,
                theta: num(1)?,
                precision: num(2)?,
                recall: num(3)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan_io::{CameraCalib, Pose};

    fn frame() -> CameraFrame {
        let calib = CameraCalib::pinhole(100.0, 50.0, 50.0, (100, 100), Pose::identity()).unwrap();
        CameraFrame::new(0, calib, Pose::identity())
    }

    /// Points on a plane at z = 10 spread over the image, left half x < 0.
    fn grid_points() -> Vec<Vector3<f64>> {
        (0..10)
            .flat_map(|i| (0..10).map(move |j| Vector3::new(-4.5 + i as f64, -4.5 + j as f64, 10.0)))
            .collect()
    }

    fn left_half_mask() -> Raster {
        let mut m = Raster::new(100, 100, 1, 0.0);
        for y in 0..100 {
            for x in 0..50 {
                m.set(x, y, 0, 1.0);
            }
        }
        m
    }

    #[test]
    fn conventions() {
        let e = FrameEval::from_counts(0, 0, 5);
        assert_eq!((e.precision, e.recall), (1.0, 0.0));
        let e = FrameEval::from_counts(0, 0, 0);
        assert_eq!((e.precision, e.recall), (1.0, 1.0));
    }

    #[test]
    fn mask_based_counts() {
        let f = frame();
        let pts = grid_points();
        let mask = left_half_mask();
        let truth: Vec<Label> = pts
            .iter()
            .map(|p| if p.x < 0.0 { Label::Moving } else { Label::Static })
            .collect();
        let perfect = prf_frame(&truth, &pts, &f, &mask).unwrap();
        assert_eq!((perfect.precision, perfect.recall), (1.0, 1.0));

        let none = vec![Label::Static; pts.len()];
        let e = prf_frame(&none, &pts, &f, &mask).unwrap();
        assert_eq!((e.precision, e.recall), (1.0, 0.0));

        let all = vec![Label::Moving; pts.len()];
        let e = prf_frame(&all, &pts, &f, &mask).unwrap();
        assert_eq!((e.tp, e.fp, e.fn_), (50, 50, 0));
        assert_eq!(e.precision, 0.5);

        let wrong = Raster::new(10, 10, 1, 0.0);
        assert!(prf_frame(&all, &pts, &f, &wrong).is_err());
    }

    #[test]
    fn masks_from_labels() {
        let f = frame();
        let pts = grid_points();
        let none = vec![Label::Static; pts.len()];
        assert_eq!(labels_to_mask(&none, &pts, &f, 4).nonzero_pixels(), 0);
        let mut one = none.clone();
        one[44] = Label::Moving;
        let m = labels_to_mask(&one, &pts, &f, 4);
        assert_eq!(m.nonzero_pixels(), disk_offsets(4).len());
        let all = vec![Label::Moving; pts.len()];
        assert!(labels_to_mask(&all, &pts, &f, 1).nonzero_pixels() >= pts.len());
    }

    #[test]
    fn objects() {
        let f = frame();
        let pts = grid_points();
        let mask = left_half_mask();
        let objects = vec![vec![mask.clone()]; 4];
        let run = |labels: &[Label]| {
            let views: Vec<LabeledView> = (0..4)
                .map(|_| LabeledView {
                    labels,
                    points: &pts,
                    frame: &f,
                })
                .collect();
            object_counts(&views, &objects, &ObjectThresholds::default()).unwrap()[0]
        };
        let all = vec![Label::Moving; pts.len()];
        let c = run(&all);
        assert!(c.detected && !c.partial);
        let none = vec![Label::Static; pts.len()];
        let c = run(&none);
        assert!(!c.detected && !c.partial);
        // 15 of the 50 object points: 30% coverage.
        let mut some = none.clone();
        let inside: Vec<usize> = (0..pts.len()).filter(|&i| pts[i].x < 0.0).take(15).collect();
        for i in inside {
            some[i] = Label::Moving;
        }
        let c = run(&some);
        assert!(!c.detected && c.partial);
    }

    #[test]
    fn sweep_grid() {
        let spec = SweepSpec {
            sigma_r_steps: 2,
            theta_steps: 2,
            ..Default::default()
        };
        let rows = roc_sweep(&spec, |_, _| Ok(FrameEval::from_counts(1, 1, 0))).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].sigma_r, rows[0].theta), (0.1, 0.0035));
        assert_eq!((rows[3].sigma_r, rows[3].theta), (0.45, 0.0088));
        let bad = SweepSpec {
            sigma_r_range: (0.2, 0.2),
            ..Default::default()
        };
        assert!(roc_sweep(&bad, |_, _| Ok(FrameEval::default())).is_err());
    }

    #[test]
    fn roc_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roc.csv");
        let rows = vec![RocRow {
            sigma_r: 0.1,
            theta: 0.0035,
            precision: 0.5,
            recall: 0.25,
        }];
        write_roc_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("sigma_r,theta,precision,recall\n"));
        assert_eq!(read_roc_csv(&path).unwrap(), rows);
    }
}
