use std::path::{Path, PathBuf};
use std::sync::mpsc::sync_channel;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::Vector3;

use evident_motion::evaluation::{
    aggregate, prf_frame, prf_points, roc_sweep, write_roc_csv, FrameEval, SweepSpec,
};
use evident_motion::pipeline::{
    run_sequence, FrameInput, FrameOutput, Pipeline, PipelineConfig, SequenceInput, StageTiming,
};
use evident_motion::preprocess::crop_far;
use evident_motion::scan_io::{
    read_camera_calib, read_label_file, read_pose_file, read_raster, read_scan, write_label_file,
    write_metrics_csv, write_raster, CameraCalib,
};
use evident_motion::synth::{generate_sequence, scenes};
use evident_motion::validation::{build_depthmap, CameraFrame, ValidationParams};
use evident_motion::{Label, Pose};

use crate::{Scene, Truth};

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    files.sort();
    Ok(files)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn frame_name(frame: usize, ext: &str) -> String {
    format!("{frame:06}.{ext}")
}

/// Paths and small side files of a sequence directory. Scans and images are
/// read on demand.
struct Layout {
    dir: PathBuf,
    scans: Vec<PathBuf>,
    poses: Option<Vec<Pose>>,
    calib: Option<CameraCalib>,
    images: Option<Vec<PathBuf>>,
}

impl Layout {
    fn open(dir: &Path) -> Result<Self> {
        let scans = sorted_files(&dir.join("velodyne"), "bin")?;
        if scans.is_empty() {
            bail!("no scans in {}", dir.join("velodyne").display());
        }
        let poses_path = dir.join("poses.txt");
        let poses = if poses_path.exists() {
            let poses = read_pose_file(&poses_path)
                .with_context(|| format!("reading {}", poses_path.display()))?;
            if poses.len() < scans.len() {
                bail!(
                    "{} has {} poses for {} scans",
                    poses_path.display(),
                    poses.len(),
                    scans.len()
                );
            }
            Some(poses)
        } else {
            None
        };
        let calib_path = dir.join("calib.txt");
        let calib = if calib_path.exists() {
            Some(
                read_camera_calib(&calib_path)
                    .with_context(|| format!("reading {}", calib_path.display()))?,
            )
        } else {
            None
        };
        let image_dir = dir.join("image");
        let images = if image_dir.is_dir() {
            let images = sorted_files(&image_dir, "ppm")?;
            if images.len() != scans.len() {
                bail!(
                    "{} has {} images for {} scans",
                    image_dir.display(),
                    images.len(),
                    scans.len()
                );
            }
            Some(images)
        } else {
            None
        };
        Ok(Layout {
            dir: dir.to_path_buf(),
            scans,
            poses,
            calib,
            images,
        })
    }

    fn len(&self) -> usize {
        self.scans.len()
    }

    fn scan(&self, i: usize) -> Result<evident_motion::ScanRecord> {
        let path = self
            .scans
            .get(i)
            .ok_or_else(|| anyhow!("frame {i} is past the last scan ({} scans)", self.len()))?;
        read_scan(path, i).with_context(|| format!("reading {}", path.display()))
    }

    fn pose(&self, i: usize) -> Result<Pose> {
        self.poses
            .as_ref()
            .map(|p| p[i])
            .ok_or_else(|| anyhow!("{} has no poses.txt", self.dir.display()))
    }

    fn calib(&self) -> Result<&CameraCalib> {
        self.calib
            .as_ref()
            .ok_or_else(|| anyhow!("{} has no calib.txt", self.dir.display()))
    }

    fn frame(&self, i: usize) -> Result<FrameInput> {
        let image = match &self.images {
            Some(paths) => {
                let p = &paths[i];
                Some(read_raster(p).with_context(|| format!("reading {}", p.display()))?)
            }
            None => None,
        };
        Ok(FrameInput {
            scan: self.scan(i)?,
            pose: self.poses.as_ref().map(|p| p[i]),
            image,
        })
    }

    fn check_for(&self, config: &PipelineConfig) -> Result<()> {
        if self.poses.is_none() && !config.preprocess.icp_enabled {
            bail!(
                "{} has no poses.txt and ICP is disabled (pass --icp to estimate poses)",
                self.dir.display()
            );
        }
        if config.validation.is_some() {
            if self.images.is_none() {
                bail!(
                    "{} has no image/ directory but image validation is enabled (pass --no-image-validation)",
                    self.dir.display()
                );
            }
            self.calib()?;
        }
        Ok(())
    }
}

fn timing_row(out: &FrameOutput) -> [String; 8] {
    let t: &StageTiming = &out.timing;
    [
        out.frame.to_string(),
        t.preprocess.to_string(),
        t.ground.to_string(),
        t.index.to_string(),
        t.dedup.to_string(),
        t.detect.to_string(),
        t.validate.to_string(),
        t.total().to_string(),
    ]
}

pub fn detect(input: &Path, output: &Path, config: &PipelineConfig) -> Result<()> {
    let layout = Layout::open(input)?;
    layout.check_for(config)?;
    let label_dir = output.join("labels");
    create_dir(&label_dir)?;
    let timing_path = output.join("timing.csv");
    let mut timing = csv::Writer::from_path(&timing_path)
        .with_context(|| format!("creating {}", timing_path.display()))?;
    timing.write_record(StageTiming::HEADER)?;

    let mut pipe = Pipeline::new(config.clone(), layout.calib.clone())?;
    let mut moving = 0usize;
    let mut total_secs = 0.0;
    let mut emitted = 0usize;
    let mut write = |out: FrameOutput| -> Result<()> {
        let path = label_dir.join(frame_name(out.frame, "bin"));
        write_label_file(&path, &out.labels)
            .with_context(|| format!("writing {}", path.display()))?;
        timing.write_record(timing_row(&out))?;
        let m = out.labels.iter().filter(|&&l| l == Label::Moving).count();
        log::debug!(
            "frame {}: {} moving of {}, {:.3} s",
            out.frame,
            m,
            out.labels.len(),
            out.timing.total()
        );
        moving += m;
        total_secs += out.timing.total();
        emitted += 1;
        Ok(())
    };

    // One frame of read-ahead so disk reads overlap detection; outputs still
    // come out in frame order.
    std::thread::scope(|s| -> Result<()> {
        let (tx, rx) = sync_channel::<Result<FrameInput>>(1);
        let layout = &layout;
        s.spawn(move || {
            for i in 0..layout.len() {
                let item = layout.frame(i);
                let failed = item.is_err();
                if tx.send(item).is_err() || failed {
                    break;
                }
            }
        });
        for (i, item) in rx.into_iter().enumerate() {
            for out in pipe
                .push(item?)
                .with_context(|| format!("processing frame {i}"))?
            {
                write(out)?;
            }
        }
        Ok(())
    })?;
    for out in pipe.finish()? {
        write(out)?;
    }
    timing
        .flush()
        .with_context(|| format!("writing {}", timing_path.display()))?;

    log::info!(
        "{emitted} frames labeled, {moving} moving points, {:.3} s per frame",
        total_secs / emitted.max(1) as f64
    );
    Ok(())
}

/// Scores label arrays against the ground truth stored in a sequence directory.
struct Scorer {
    layout: Layout,
    points: bool,
}

impl Scorer {
    fn new(input: &Path, truth: Truth) -> Result<Self> {
        let layout = Layout::open(input)?;
        let has_points = input.join("gt_labels").is_dir();
        let has_masks = input.join("gt_mask").is_dir();
        let points = match truth {
            Truth::Points => true,
            Truth::Mask => false,
            Truth::Auto if has_points => true,
            Truth::Auto if has_masks => false,
            Truth::Auto => bail!("{} has neither gt_labels/ nor gt_mask/", input.display()),
        };
        if !points {
            layout.calib()?;
            layout.pose(0)?;
        }
        Ok(Scorer { layout, points })
    }

    fn score(&self, frame: usize, labels: &[Label]) -> Result<FrameEval> {
        let dir = &self.layout.dir;
        if self.points {
            let path = dir.join("gt_labels").join(frame_name(frame, "bin"));
            let truth =
                read_label_file(&path).with_context(|| format!("reading {}", path.display()))?;
            return prf_points(labels, &truth).with_context(|| format!("scoring frame {frame}"));
        }
        let pose = self.layout.pose(frame)?;
        let world: Vec<Vector3<f64>> = self
            .layout
            .scan(frame)?
            .positions()
            .map(|p| pose.transform_point(p))
            .collect();
        let camera = CameraFrame::new(frame, self.layout.calib()?.clone(), pose);
        let path = dir.join("gt_mask").join(frame_name(frame, "pgm"));
        let mask = read_raster(&path).with_context(|| format!("reading {}", path.display()))?;
        prf_frame(labels, &world, &camera, &mask).with_context(|| format!("scoring frame {frame}"))
    }
}

pub fn eval(input: &Path, labels: &Path, output: &Path, truth: Truth) -> Result<()> {
    let scorer = Scorer::new(input, truth)?;
    let files = sorted_files(labels, "bin")?;
    if files.is_empty() {
        bail!("no label files in {}", labels.display());
    }
    let mut evals = Vec::with_capacity(files.len());
    let mut rows = Vec::with_capacity(files.len());
    for path in &files {
        let frame: usize = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| anyhow!("{} is not named by frame number", path.display()))?;
        let l = read_label_file(path).with_context(|| format!("reading {}", path.display()))?;
        let e = scorer.score(frame, &l)?;
        rows.push(e.to_row(frame));
        evals.push(e);
    }
    create_dir(output)?;
    let path = output.join("metrics.csv");
    write_metrics_csv(&path, &rows).with_context(|| format!("writing {}", path.display()))?;
    let all = aggregate(&evals);
    log::info!(
        "{} frames: precision {:.4}, recall {:.4} (tp {}, fp {}, fn {})",
        evals.len(),
        all.precision,
        all.recall,
        all.tp,
        all.fp,
        all.fn_
    );
    Ok(())
}

pub fn roc(
    input: &Path,
    output: &Path,
    config: &PipelineConfig,
    spec: &SweepSpec,
    truth: Truth,
) -> Result<()> {
    let scorer = Scorer::new(input, truth)?;
    scorer.layout.check_for(config)?;
    let seq =
        SequenceInput::from_dir(input).with_context(|| format!("reading {}", input.display()))?;
    let rows = roc_sweep(spec, |sigma_r, theta| {
        let mut c = config.clone();
        c.occupancy.sigma_r = sigma_r;
        c.occupancy.theta_scale = theta;
        let out = run_sequence(&seq, &c).map_err(|e| {
            evident_motion::Error::InvalidParams(format!("sigma_r {sigma_r}, theta {theta}: {e}"))
        })?;
        let evals = out
            .iter()
            .map(|o| scorer.score(o.frame, &o.labels))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| evident_motion::Error::InvalidParams(format!("{e:#}")))?;
        let all = aggregate(&evals);
        log::info!(
            "sigma_r {sigma_r:.4}, theta {theta:.5}: precision {:.4}, recall {:.4}",
            all.precision,
            all.recall
        );
        Ok(all)
    })?;
    create_dir(output)?;
    let path = output.join("roc.csv");
    write_roc_csv(&path, &rows).with_context(|| format!("writing {}", path.display()))
}

pub fn synth(scene: Scene, frames: usize, seed: u64, output: &Path) -> Result<()> {
    let spec = match scene {
        Scene::Street => scenes::street(frames, true),
        Scene::StreetStatic => scenes::street(frames, false),
        Scene::Validation => scenes::validation(frames, false),
        Scene::ValidationChecker => scenes::validation(frames, true),
        Scene::DenseRoom => scenes::dense_room(frames),
    };
    let seq = generate_sequence(&spec, seed)?;
    create_dir(output)?;
    seq.write_to_dir(output)
        .with_context(|| format!("writing sequence to {}", output.display()))?;
    let points: usize = seq.scans.iter().map(|s| s.len()).sum();
    let moving: usize = seq
        .gt_labels
        .iter()
        .flatten()
        .filter(|&&l| l == Label::Moving)
        .count();
    log::info!("{frames} frames, {points} points, {moving} moving");
    Ok(())
}

pub fn depthmap(
    input: &Path,
    frame: usize,
    output: &Path,
    config: &PipelineConfig,
    params: &ValidationParams,
) -> Result<()> {
    let layout = Layout::open(input)?;
    let scan = layout.scan(frame)?;
    let pose = layout.pose(frame)?;
    let calib = layout.calib()?.clone();
    let (cropped, _) = crop_far(&scan, &config.preprocess);
    let world: Vec<Vector3<f64>> = cropped
        .positions()
        .map(|p| pose.transform_point(p))
        .collect();
    let camera = CameraFrame::new(frame, calib, pose);
    let depth = build_depthmap(&world, &camera, params)
        .with_context(|| format!("building depth map from {}", layout.scans[frame].display()))?;
    create_dir(output)?;
    let path = output.join(format!("depth_{}", frame_name(frame, "pgm")));
    write_raster(&path, &depth.raster).with_context(|| format!("writing {}", path.display()))?;
    log::info!("frame {frame}: depth normalized by {:.2} m", depth.d_max);
    Ok(())
}
