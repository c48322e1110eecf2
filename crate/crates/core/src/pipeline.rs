//! Streaming detector: crop, ground removal, alignment, window
//! classification and optional image validation, one frame at a time.
//!
//! Labels for frame `k` are produced once frame `k + K` has been pushed, or
//! when the stream is finished.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::evidential::{DiscretizeParams, OccupancyParams};
use crate::ground::{remove_ground, GroundParams};
use crate::motion::{Detector, ScanWindow, WindowParams, WindowScan};
use crate::preprocess::{apply_pose, crop_far, icp_refine, DedupIndex, PreprocessParams};
use crate::scan_io::{
    read_camera_calib, read_pose_file, read_raster, read_scan, CameraCalib, Label, Pose, Raster,
    ScanRecord,
};
use crate::synth::SyntheticSequence;
use crate::validation::{build_depthmap, validate_candidates, CameraFrame, ValidationParams};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineConfig {
    pub preprocess: PreprocessParams,
    pub ground: GroundParams,
    pub occupancy: OccupancyParams,
    pub discretize: DiscretizeParams,
    pub window: WindowParams,
    /// Image validation; `None` skips it.
    pub validation: Option<ValidationParams>,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.ground.validate()?;
        self.occupancy.validate()?;
        self.discretize.validate()?;
        self.window.validate()?;
        if let Some(v) = &self.validation {
            v.validate()?;
        }
        Ok(())
    }
}

/// One frame handed to the pipeline.
#[derive(Clone, Debug)]
pub struct FrameInput {
    /// Points in the sensor frame.
    pub scan: ScanRecord,
    /// Sensor-to-world pose, if known.
    pub pose: Option<Pose>,
    pub image: Option<Raster>,
}

/// Wall-clock seconds spent per stage on one frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTiming {
    pub preprocess: f64,
    pub ground: f64,
    pub index: f64,
    pub dedup: f64,
    pub detect: f64,
    pub validate: f64,
}

impl StageTiming {
    pub const HEADER: [&'static str; 8] = [
        "frame",
        "preprocess",
        "ground",
        "index",
        "dedup",
        "detect",
        "validate",
        "total",
    ];

    pub fn total(&self) -> f64 {
        self.preprocess + self.ground + self.index + self.dedup + self.detect + self.validate
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameOutput {
    /// Position of the frame in the stream.
    pub frame: usize,
    /// One label per point of the raw input scan.
    pub labels: Vec<Label>,
    pub pose: Pose,
    pub timing: StageTiming,
}

struct FrameState {
    index: usize,
    raw_len: usize,
    /// Raw indices of points surviving the crop.
    cropped_to_raw: Vec<usize>,
    /// Per cropped point: `Ground` or `Static`.
    ground_labels: Vec<Label>,
    /// Cropped indices of non-ground points, in working-cloud order.
    work_to_cropped: Vec<usize>,
    /// Cropped cloud in the world frame, ground included.
    world_full: Vec<Vector3<f64>>,
    scan: Arc<WindowScan>,
    pose: Pose,
    camera: Option<CameraFrame>,
    depth_done: bool,
    timing: StageTiming,
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

pub struct Pipeline {
    config: PipelineConfig,
    detector: Detector,
    calib: Option<CameraCalib>,
    buffer: VecDeque<FrameState>,
    /// Static points kept from recently emitted frames, oldest first.
    retained: VecDeque<ScanRecord>,
    pushed: usize,
    next_emit: usize,
    last_pose: Option<Pose>,
    last_work: Option<ScanRecord>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, calib: Option<CameraCalib>) -> Result<Self> {
        config.validate()?;
        if config.validation.is_some() && calib.is_none() {
            return Err(Error::InvalidParams(
                "image validation needs camera calibration".into(),
            ));
        }
        let detector = Detector::new(
            config.occupancy.clone(),
            config.discretize.clone(),
            config.window.clone(),
        )?;
        Ok(Pipeline {
            config,
            detector,
            calib,
            buffer: VecDeque::new(),
            retained: VecDeque::new(),
            pushed: 0,
            next_emit: 0,
            last_pose: None,
            last_work: None,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn detector(&self) -> &Detector {
        &self.detector
    }

    /// Adds the next frame and returns the frames whose window is now complete.
    pub fn push(&mut self, input: FrameInput) -> Result<Vec<FrameOutput>> {
        let index = self.pushed;
        let mut timing = StageTiming::default();

        let t = Instant::now();
        let mut sensor = input.scan;
        sensor.sensor_origin = Vector3::zeros();
        let (cropped, cropped_to_raw) = crop_far(&sensor, &self.config.preprocess);
        timing.preprocess += secs(t);

        let t = Instant::now();
        let (_, ground_labels) = remove_ground(&cropped, &self.config.ground);
        let work_to_cropped: Vec<usize> = (0..cropped.len())
            .filter(|&i| ground_labels[i] != Label::Ground)
            .collect();
        let stripped = cropped.select(&work_to_cropped);
        timing.ground = secs(t);

        let t = Instant::now();
        let pose = self.resolve_pose(index, input.pose, &stripped)?;
        let work = apply_pose(&stripped, &pose);
        let world_full: Vec<Vector3<f64>> =
            cropped.positions().map(|p| pose.transform_point(p)).collect();
        timing.preprocess += secs(t);

        let t = Instant::now();
        let mut indexed = work.clone();
        indexed.frame_index = index;
        let scan = Arc::new(WindowScan::new(
            &indexed,
            self.config.window.neighbor_angle_mult,
        ));
        timing.index = secs(t);

        let camera = self.calib.as_ref().map(|c| {
            let mut f = CameraFrame::new(index, c.clone(), pose);
            f.image = input.image;
            f
        });
        self.buffer.push_back(FrameState {
            index,
            raw_len: sensor.len(),
            cropped_to_raw,
            ground_labels,
            work_to_cropped,
            world_full,
            scan,
            pose,
            camera,
            depth_done: false,
            timing,
        });
        self.last_pose = Some(pose);
        self.last_work = Some(work);
        self.pushed += 1;

        let mut out = Vec::new();
        while self.next_emit + self.config.window.k_half < self.pushed {
            out.push(self.emit()?);
        }
        Ok(out)
    }

    /// Emits every frame still waiting for its window.
    pub fn finish(&mut self) -> Result<Vec<FrameOutput>> {
        let mut out = Vec::new();
        while self.next_emit < self.pushed {
            out.push(self.emit()?);
        }
        Ok(out)
    }

    fn resolve_pose(&self, index: usize, given: Option<Pose>, stripped: &ScanRecord) -> Result<Pose> {
        let pp = &self.config.preprocess;
        if !pp.icp_enabled {
            return given.ok_or_else(|| {
                Error::InvalidParams(format!("frame {index} has no pose and ICP is disabled"))
            });
        }
        let init = given.or(self.last_pose).unwrap_or_else(Pose::identity);
        match &self.last_work {
            Some(target) if !stripped.is_empty() && !target.is_empty() => {
                icp_refine(stripped, target, &init, pp)
            }
            _ => Ok(init),
        }
    }

    fn emit(&mut self) -> Result<FrameOutput> {
        let c = self.next_emit;
        let k = self.config.window.k_half;
        let pos = self
            .buffer
            .iter()
            .position(|f| f.index == c)
            .expect("center frame is buffered");
        let lo = c.saturating_sub(k);
        let hi = c + k;

        let t = Instant::now();
        let dedup = DedupIndex::new(self.retained.iter(), &self.config.preprocess);
        let center = &self.buffer[pos];
        let work_pts = center.scan.endpoints();
        let is_dup: Vec<bool> = work_pts.iter().map(|p| dedup.is_duplicate(p)).collect();
        let kept: Vec<usize> = (0..work_pts.len()).filter(|&i| !is_dup[i]).collect();
        let query: Vec<Vector3<f64>> = kept.iter().map(|&i| work_pts[i]).collect();
        let dedup_time = secs(t);

        let t = Instant::now();
        let others: Vec<Arc<WindowScan>> = self
            .buffer
            .iter()
            .filter(|f| f.index != c && f.index >= lo && f.index <= hi)
            .map(|f| f.scan.clone())
            .collect();
        let window = ScanWindow::new(center.scan.clone(), others);
        let mut labels = self.detector.detect_points(&window, &query);
        let detect_time = secs(t);

        let t = Instant::now();
        if let Some(vp) = self.config.validation.clone() {
            if labels.contains(&Label::Moving) {
                for f in self.buffer.iter_mut() {
                    if f.index >= lo && f.index <= hi && !f.depth_done {
                        f.depth_done = true;
                        if let Some(cam) = f.camera.as_mut() {
                            match build_depthmap(&f.world_full, cam, &vp) {
                                Ok(d) => cam.depth = Some(d),
                                Err(e) => log::debug!("no depth map: {e}"),
                            }
                        }
                    }
                }
                let center = &self.buffer[pos];
                if let Some(cam) = &center.camera {
                    let other_cams: Vec<&CameraFrame> = self
                        .buffer
                        .iter()
                        .filter(|f| f.index != c && f.index >= lo && f.index <= hi)
                        .filter_map(|f| f.camera.as_ref())
                        .collect();
                    labels = validate_candidates(&labels, &query, cam, &other_cams, &vp)?;
                }
            }
        }
        let validate_time = secs(t);

        let center = &self.buffer[pos];
        let mut raw = vec![Label::Dropped; center.raw_len];
        for (ci, &ri) in center.cropped_to_raw.iter().enumerate() {
            raw[ri] = center.ground_labels[ci];
        }
        for (wi, &ci) in center.work_to_cropped.iter().enumerate() {
            if is_dup[wi] {
                raw[center.cropped_to_raw[ci]] = Label::Dropped;
            }
        }
        for (qi, &wi) in kept.iter().enumerate() {
            raw[center.cropped_to_raw[center.work_to_cropped[wi]]] = labels[qi];
        }

        let still: Vec<Vector3<f64>> = query
            .iter()
            .zip(&labels)
            .filter(|(_, l)| **l != Label::Moving)
            .map(|(p, _)| *p)
            .collect();
        self.retained.push_back(ScanRecord::from_positions(&still, c));
        while self.retained.len() > self.config.preprocess.dedup_window {
            self.retained.pop_front();
        }

        let mut timing = center.timing;
        timing.dedup = dedup_time;
        timing.detect = detect_time;
        timing.validate = validate_time;
        let out = FrameOutput {
            frame: c,
            labels: raw,
            pose: center.pose,
            timing,
        };
        self.next_emit += 1;
        let keep_from = self.next_emit.saturating_sub(k);
        while self.buffer.front().is_some_and(|f| f.index < keep_from) {
            self.buffer.pop_front();
        }
        Ok(out)
    }
}

/// A sequence held in memory: sensor-frame scans plus whatever side data exists.
#[derive(Clone, Debug, Default)]
pub struct SequenceInput {
    pub scans: Vec<ScanRecord>,
    pub poses: Option<Vec<Pose>>,
    pub calib: Option<CameraCalib>,
    pub images: Option<Vec<Raster>>,
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    files.sort();
    Ok(files)
}

impl SequenceInput {
    /// Reads `velodyne/*.bin`, and `poses.txt`, `calib.txt`, `image/*.ppm` when
    /// present.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let scans = sorted_files(&dir.join("velodyne"), "bin")?
            .iter()
            .enumerate()
            .map(|(i, p)| read_scan(p, i))
            .collect::<Result<Vec<_>>>()?;
        let poses_path = dir.join("poses.txt");
        let poses = if poses_path.exists() {
            let poses = read_pose_file(&poses_path)?;
            if poses.len() < scans.len() {
                return Err(Error::InvalidParams(format!(
                    "{} poses for {} scans",
                    poses.len(),
                    scans.len()
                )));
            }
            Some(poses)
        } else {
            None
        };
        let calib_path = dir.join("calib.txt");
        let calib = if calib_path.exists() {
            Some(read_camera_calib(&calib_path)?)
        } else {
            None
        };
        let image_dir = dir.join("image");
        let images = if image_dir.is_dir() {
            let images = sorted_files(&image_dir, "ppm")?
                .iter()
                .map(read_raster)
                .collect::<Result<Vec<_>>>()?;
            if images.len() != scans.len() {
                return Err(Error::InvalidParams(format!(
                    "{} images for {} scans",
                    images.len(),
                    scans.len()
                )));
            }
            Some(images)
        } else {
            None
        };
        Ok(SequenceInput {
            scans,
            poses,
            calib,
            images,
        })
    }

    pub fn from_synthetic(seq: &SyntheticSequence) -> Self {
        SequenceInput {
            scans: seq.scans.clone(),
            poses: Some(seq.poses.clone()),
            calib: seq.calib.clone(),
            images: (!seq.images.is_empty()).then(|| seq.images.clone()),
        }
    }

    pub fn len(&self) -> usize {
        self.scans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scans.is_empty()
    }

    pub fn frame(&self, i: usize) -> FrameInput {
        FrameInput {
            scan: self.scans[i].clone(),
            pose: self.poses.as_ref().map(|p| p[i]),
            image: self.images.as_ref().map(|v| v[i].clone()),
        }
    }
}

/// Runs the whole sequence and returns the outputs in frame order.
pub fn run_sequence(input: &SequenceInput, config: &PipelineConfig) -> Result<Vec<FrameOutput>> {
    if config.validation.is_some() && input.images.is_none() {
        return Err(Error::InvalidParams("image validation needs images".into()));
    }
    let mut pipe = Pipeline::new(config.clone(), input.calib.clone())?;
    let mut out = Vec::with_capacity(input.len());
    for i in 0..input.len() {
        out.extend(pipe.push(input.frame(i))?);
    }
    out.extend(pipe.finish()?);
    Ok(out)
}
