//! Ray-cast synthetic scenes with exact ground truth: a ground surface,
//! axis-aligned boxes that may move at constant velocity, a spinning lidar
//! and an optional pinhole camera.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::par;
use crate::scan_io::{
    write_camera_calib, write_label_file, write_pose_file, write_raster, write_scan, CameraCalib,
    Label, LidarPoint, Pose, Raster, ScanRecord,
};

/// Ground surface under the scene.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GroundSpec {
    None,
    Flat { height: f64 },
    /// Plane rising along +x by `percent` per hundred meters, at `height` over x = 0.
    Slope { percent: f64, height: f64 },
    /// Flat at `height` for x < `at_x`, `rise` higher beyond, joined by a vertical riser.
    Step { at_x: f64, height: f64, rise: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneBox {
    /// Center at frame 0.
    pub center: Vector3<f64>,
    pub size: Vector3<f64>,
    pub color: [f64; 3],
    /// Displacement per frame.
    pub velocity: Vector3<f64>,
    /// Checker square side in meters, if textured.
    pub checker: Option<f64>,
}

impl SceneBox {
    pub fn fixed(center: Vector3<f64>, size: Vector3<f64>, color: [f64; 3]) -> Self {
        SceneBox {
            center,
            size,
            color,
            velocity: Vector3::zeros(),
            checker: None,
        }
    }

    pub fn is_moving(&self) -> bool {
        self.velocity != Vector3::zeros()
    }

    /// Corner-to-corner bounds at `frame`.
    pub fn bounds_at(&self, frame: usize) -> (Vector3<f64>, Vector3<f64>) {
        let c = self.center + self.velocity * frame as f64;
        (c - self.size / 2.0, c + self.size / 2.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LidarSpec {
    pub azimuth_res: f64,
    /// Half-open azimuth interval swept, radians, counter-clockwise from +x.
    pub azimuth_range: (f64, f64),
    /// Elevation of each laser, radians above the sensor's xy plane.
    pub elevations: Vec<f64>,
    pub max_range: f64,
}

impl LidarSpec {
    /// Full turn with `rings` lasers evenly spread over `[lo, hi]`.
    pub fn spinning(azimuth_res: f64, rings: usize, lo: f64, hi: f64, max_range: f64) -> Self {
        let elevations = (0..rings)
            .map(|i| {
                if rings == 1 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (rings - 1) as f64
                }
            })
            .collect();
        LidarSpec {
            azimuth_res,
            azimuth_range: (-std::f64::consts::PI, std::f64::consts::PI),
            elevations,
            max_range,
        }
    }

    pub fn azimuths(&self) -> Vec<f64> {
        let (lo, hi) = self.azimuth_range;
        let n = ((hi - lo) / self.azimuth_res - 1e-9).ceil().max(0.0) as usize;
        (0..n).map(|i| lo + i as f64 * self.azimuth_res).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub ground: GroundSpec,
    pub ground_color: [f64; 3],
    pub ground_checker: Option<f64>,
    pub background: [f64; 3],
    pub boxes: Vec<SceneBox>,
    /// Lidar pose per frame; a single pose is reused for every frame.
    pub sensor_path: Vec<Pose>,
    pub lidar: LidarSpec,
    /// Camera and its lidar-to-camera mount.
    pub camera: Option<CameraCalib>,
    pub frames: usize,
    pub noise_sigma: f64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.lidar.azimuth_res > 0.0) {
            return bad("azimuth_res must be positive");
        }
        if self.frames < 1 {
            return bad("a scene needs at least one frame");
        }
        if self.sensor_path.len() != 1 && self.sensor_path.len() != self.frames {
            return bad("sensor path must hold one pose or one per frame");
        }
        if !(self.noise_sigma >= 0.0) || !(self.lidar.max_range > 0.0) {
            return bad("noise_sigma must be non-negative and max_range positive");
        }
        if let Some(c) = &self.camera {
            c.validate()?;
        }
        Ok(())
    }

    pub fn sensor_pose(&self, frame: usize) -> Pose {
        if self.sensor_path.len() == 1 {
            self.sensor_path[0]
        } else {
            self.sensor_path[frame]
        }
    }

    /// Ids of boxes with non-zero velocity, in box order.
    pub fn moving_boxes(&self) -> Vec<usize> {
        (0..self.boxes.len()).filter(|&i| self.boxes[i].is_moving()).collect()
    }
}

/// What a ray struck.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Surface {
    Ground,
    Box(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub surface: Surface,
    /// Outward normal of the struck face.
    pub normal: Vector3<f64>,
}

/// Entry distance of a ray into an axis-aligned box, with the entry face
/// normal. Rays starting inside the box do not hit it.
pub fn ray_box(
    o: &Vector3<f64>,
    d: &Vector3<f64>,
    lo: &Vector3<f64>,
    hi: &Vector3<f64>,
) -> Option<(f64, Vector3<f64>)> {
    let mut t_in = f64::NEG_INFINITY;
    let mut t_out = f64::INFINITY;
    let mut axis = 0;
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a] < lo[a] || o[a] > hi[a] {
                return None;
            }
            continue;
        }
        let t1 = (lo[a] - o[a]) / d[a];
        let t2 = (hi[a] - o[a]) / d[a];
        let (near, far) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        if near > t_in {
            t_in = near;
            axis = a;
        }
        t_out = t_out.min(far);
    }
    if t_in > t_out || !(t_in > 1e-9) {
        return None;
    }
    let mut n = Vector3::zeros();
    n[axis] = -d[axis].signum();
    Some((t_in, n))
}

fn ray_ground(o: &Vector3<f64>, d: &Vector3<f64>, g: &GroundSpec) -> Option<(f64, Vector3<f64>)> {
    let plane = |grade: f64, h: f64| -> Option<f64> {
        // z = h + grade·x
        let denom = d.z - grade * d.x;
        if denom == 0.0 {
            return None;
        }
        let t = (h + grade * o.x - o.z) / denom;
        (t > 1e-9).then_some(t)
    };
    match *g {
        GroundSpec::None => None,
        GroundSpec::Flat { height } => plane(0.0, height).map(|t| (t, Vector3::z())),
        GroundSpec::Slope { percent, height } => {
            let grade = percent / 100.0;
            plane(grade, height).map(|t| (t, Vector3::new(-grade, 0.0, 1.0).normalize()))
        }
        GroundSpec::Step { at_x, height, rise } => {
            let mut best: Option<(f64, Vector3<f64>)> = None;
            let mut keep = |t: f64, n: Vector3<f64>| {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, n));
                }
            };
            if let Some(t) = plane(0.0, height) {
                if o.x + t * d.x < at_x {
                    keep(t, Vector3::z());
                }
            }
            if let Some(t) = plane(0.0, height + rise) {
                if o.x + t * d.x >= at_x {
                    keep(t, Vector3::z());
                }
            }
            if d.x != 0.0 {
                let t = (at_x - o.x) / d.x;
                let z = o.z + t * d.z;
                if t > 1e-9 && z >= height.min(height + rise) && z <= height.max(height + rise) {
                    keep(t, Vector3::new(-d.x.signum(), 0.0, 0.0));
                }
            }
            best
        }
    }
}

/// Nearest surface along a ray at `frame`, within `max_t`.
pub fn cast_ray(
    spec: &SceneSpec,
    frame: usize,
    o: &Vector3<f64>,
    d: &Vector3<f64>,
    max_t: f64,
) -> Option<RayHit> {
    let mut best: Option<RayHit> = ray_ground(o, d, &spec.ground).map(|(t, normal)| RayHit {
        t,
        surface: Surface::Ground,
        normal,
    });
    for (i, b) in spec.boxes.iter().enumerate() {
        let (lo, hi) = b.bounds_at(frame);
        if let Some((t, normal)) = ray_box(o, d, &lo, &hi) {
            if best.is_none_or(|h| t < h.t) {
                best = Some(RayHit {
                    t,
                    surface: Surface::Box(i),
                    normal,
                });
            }
        }
    }
    best.filter(|h| h.t <= max_t)
}

/// Shading of a hit: base color, checker modulation and a per-face factor so
/// that adjacent faces differ.
fn shade(spec: &SceneSpec, frame: usize, hit: &RayHit, p: &Vector3<f64>) -> [f64; 3] {
    let (color, checker, local) = match hit.surface {
        Surface::Ground => (spec.ground_color, spec.ground_checker, *p),
        Surface::Box(i) => {
            let b = &spec.boxes[i];
            (b.color, b.checker, p - b.bounds_at(frame).0)
        }
    };
    let mut k = 0.6 + 0.4 * hit.normal.z.abs() + 0.25 * hit.normal.x.abs();
    if let Some(side) = checker {
        let parity = (0..3)
            .filter(|&a| hit.normal[a].abs() < 0.5)
            .map(|a| (local[a] / side + 1e-9).floor() as i64)
            .sum::<i64>()
            .rem_euclid(2);
        k *= if parity == 0 { 1.0 } else { 0.35 };
    }
    let k = k.min(1.0);
    [color[0] * k, color[1] * k, color[2] * k]
}

/// Everything generated for one scene.
#[derive(Clone, Debug)]
pub struct SyntheticSequence {
    /// Scans in the sensor frame, positions rounded to `f32` as on disk.
    pub scans: Vec<ScanRecord>,
    /// Sensor-to-world pose per frame.
    pub poses: Vec<Pose>,
    /// Per point: `Moving` if it lies on a moving box, else `Static`.
    pub gt_labels: Vec<Vec<Label>>,
    /// Per point: which box (if any) it lies on.
    pub hit_boxes: Vec<Vec<Option<usize>>>,
    pub calib: Option<CameraCalib>,
    pub images: Vec<Raster>,
    /// Pixels showing any moving box.
    pub gt_masks: Vec<Raster>,
    /// Per frame, one mask per moving box (in [`SceneSpec::moving_boxes`] order).
    pub object_masks: Vec<Vec<Raster>>,
}

impl SyntheticSequence {
    pub fn len(&self) -> usize {
        self.scans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scans.is_empty()
    }

    /// Writes the sequence in the directory layout the detector reads.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let mk = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
        for sub in ["velodyne", "gt_labels"] {
            mk(&dir.join(sub))?;
        }
        for (i, s) in self.scans.iter().enumerate() {
            write_scan(dir.join("velodyne").join(format!("{i:06}.bin")), s)?;
            write_label_file(dir.join("gt_labels").join(format!("{i:06}.bin")), &self.gt_labels[i])?;
        }
        write_pose_file(dir.join("poses.txt"), &self.poses)?;
        if let Some(c) = &self.calib {
            write_camera_calib(dir.join("calib.txt"), c)?;
            mk(&dir.join("image"))?;
            mk(&dir.join("gt_mask"))?;
            for (i, img) in self.images.iter().enumerate() {
                write_raster(dir.join("image").join(format!("{i:06}.ppm")), img)?;
                write_raster(dir.join("gt_mask").join(format!("{i:06}.pgm")), &self.gt_masks[i])?;
                for (o, m) in self.object_masks[i].iter().enumerate() {
                    let od = dir.join("gt_objects").join(format!("{o:02}"));
                    mk(&od)?;
                    write_raster(od.join(format!("{i:06}.pgm")), m)?;
                }
            }
        }
        Ok(())
    }
}

fn round_f32(p: Vector3<f64>) -> Vector3<f64> {
    p.map(|c| c as f32 as f64)
}

fn frame_seed(seed: u64, frame: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (frame as u64).wrapping_add(0xD1B5_4A32_D192_ED03)
}

struct ScanOut {
    scan: ScanRecord,
    labels: Vec<Label>,
    hits: Vec<Option<usize>>,
}

fn generate_scan(spec: &SceneSpec, frame: usize, seed: u64) -> ScanOut {
    let pose = spec.sensor_pose(frame);
    let azimuths = spec.lidar.azimuths();
    let dirs: Vec<Vector3<f64>> = spec
        .lidar
        .elevations
        .iter()
        .flat_map(|&el| {
            azimuths
                .iter()
                .map(move |&az| Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()))
        })
        .collect();
    let hits: Vec<Option<RayHit>> = par::map(&dirs, |d| {
        cast_ray(spec, frame, &pose.translation, &(pose.rotation * d), spec.lidar.max_range)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, frame));
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).expect("finite sigma");
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for (d, hit) in dirs.iter().zip(&hits) {
        let Some(hit) = hit else { continue };
        let mut p = d * hit.t;
        if spec.noise_sigma > 0.0 {
            p += Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        }
        let id = match hit.surface {
            Surface::Box(i) => Some(i),
            Surface::Ground => None,
        };
        let moving = id.is_some_and(|i| spec.boxes[i].is_moving());
        let p = round_f32(p);
        points.push(LidarPoint {
            position: p,
            intensity: 0.5,
        });
        labels.push(if moving { Label::Moving } else { Label::Static });
        ids.push(id);
    }
    ScanOut {
        scan: ScanRecord::new(points, frame),
        labels,
        hits: ids,
    }
}

struct Render {
    image: Raster,
    mask: Raster,
    objects: Vec<Raster>,
}

fn render(spec: &SceneSpec, calib: &CameraCalib, frame: usize) -> Render {
    let (w, h) = calib.image_size;
    // Camera → world.
    let cam_to_world = spec.sensor_pose(frame).compose(&calib.lidar_to_camera.inverse());
    let k: Matrix3<f64> = calib.projection.fixed_view::<3, 3>(0, 0).into_owned();
    let k_inv = k.try_inverse().unwrap_or_else(Matrix3::identity);
    let origin = cam_to_world.translation;
    let moving = spec.moving_boxes();
    let rows: Vec<Vec<Option<RayHit>>> = par::map_range(h, |y| {
        (0..w)
            .map(|x| {
                let dc = k_inv * Vector3::new(x as f64 + 0.5, y as f64 + 0.5, 1.0);
                let d = (cam_to_world.rotation * dc).normalize();
                cast_ray(spec, frame, &origin, &d, f64::INFINITY)
            })
            .collect()
    });
    let mut image = Raster::new(w, h, 3, 0.0);
    let mut mask = Raster::new(w, h, 1, 0.0);
    let mut objects = vec![Raster::new(w, h, 1, 0.0); moving.len()];
    for (y, row) in rows.iter().enumerate() {
        for (x, hit) in row.iter().enumerate() {
            let color = match hit {
                None => spec.background,
                Some(hit) => {
                    let dc = k_inv * Vector3::new(x as f64 + 0.5, y as f64 + 0.5, 1.0);
                    let d = (cam_to_world.rotation * dc).normalize();
                    let p = origin + d * hit.t;
                    if let Surface::Box(i) = hit.surface {
                        if let Some(o) = moving.iter().position(|&m| m == i) {
                            mask.set(x, y, 0, 1.0);
                            objects[o].set(x, y, 0, 1.0);
                        }
                    }
                    shade(spec, frame, hit, &p)
                }
            };
            for (c, v) in color.iter().enumerate() {
                image.set(x, y, c, v.clamp(0.0, 1.0));
            }
        }
    }
    Render {
        image,
        mask,
        objects,
    }
}

/// Ray-casts every frame of `spec`. Noise is drawn from a per-frame stream
/// derived from `seed`, so frames are independent and the output does not
/// depend on scheduling.
pub fn generate_sequence(spec: &SceneSpec, seed: u64) -> Result<SyntheticSequence> {
    spec.validate()?;
    let mut seq = SyntheticSequence {
        scans: Vec::with_capacity(spec.frames),
        poses: Vec::with_capacity(spec.frames),
        gt_labels: Vec::with_capacity(spec.frames),
        hit_boxes: Vec::with_capacity(spec.frames),
        calib: spec.camera.clone(),
        images: Vec::new(),
        gt_masks: Vec::new(),
        object_masks: Vec::new(),
    };
    for f in 0..spec.frames {
        let out = generate_scan(spec, f, seed);
        seq.scans.push(out.scan);
        seq.gt_labels.push(out.labels);
        seq.hit_boxes.push(out.hits);
        seq.poses.push(spec.sensor_pose(f));
        if let Some(calib) = &spec.camera {
            let r = render(spec, calib, f);
            seq.images.push(r.image);
            seq.gt_masks.push(r.mask);
            seq.object_masks.push(r.objects);
        }
    }
    Ok(seq)
}

/// Forward-looking camera on a lidar with x forward, y left, z up.
pub fn forward_camera(f: f64, size: (usize, usize)) -> CameraCalib {
    #[rustfmt::skip]
    let r = Matrix3::new(
        0.0, -1.0, 0.0,
        0.0, 0.0, -1.0,
        1.0, 0.0, 0.0,
    );
    let mount = Pose {
        rotation: r,
        translation: Vector3::zeros(),
    };
    CameraCalib::pinhole(f, size.0 as f64 / 2.0, size.1 as f64 / 2.0, size, mount)
        .expect("positive focal length and size")
}

/// Ready-made scenes used by the tests, benches and the `synth` command.
pub mod scenes {
    use super::*;

    pub const SENSOR_HEIGHT: f64 = 1.73;

    fn gray(v: f64) -> [f64; 3] {
        [v, v, v]
    }

    /// Sensor creeping forward along +x at `speed` m/frame, `SENSOR_HEIGHT`
    /// above a ground of the given grade.
    pub fn creeping_path(frames: usize, speed: f64, percent: f64) -> Vec<Pose> {
        (0..frames)
            .map(|f| {
                let x = f as f64 * speed;
                Pose::from_translation(Vector3::new(x, 0.0, percent / 100.0 * x + SENSOR_HEIGHT))
            })
            .collect()
    }

    fn street_lidar() -> LidarSpec {
        LidarSpec::spinning(0.0035, 40, (-16.0f64).to_radians(), 8.0f64.to_radians(), 60.0)
    }

    fn ground_z(percent: f64, x: f64) -> f64 {
        percent / 100.0 * x
    }

    /// Street-like scene on a 6% grade: a back wall, side walls and static
    /// boxes, plus (optionally) a van crossing in front of the back wall at
    /// 1 m/frame.
    pub fn street(frames: usize, with_mover: bool) -> SceneSpec {
        let pct = 6.0;
        let on_ground = |x: f64, y: f64, size: Vector3<f64>| {
            Vector3::new(x, y, ground_z(pct, x) + size.z / 2.0)
        };
        let mut boxes = vec![
            // back wall
            SceneBox::fixed(
                Vector3::new(21.0, 0.0, ground_z(pct, 21.0) + 2.5),
                Vector3::new(0.6, 40.0, 6.0),
                [0.7, 0.6, 0.5],
            ),
            // side walls
            SceneBox::fixed(Vector3::new(6.0, 14.0, 1.0), Vector3::new(36.0, 0.6, 7.0), [0.5, 0.55, 0.7]),
            SceneBox::fixed(Vector3::new(6.0, -14.0, 1.0), Vector3::new(36.0, 0.6, 7.0), [0.55, 0.7, 0.5]),
        ];
        let statics = [
            (8.0, 6.0, Vector3::new(1.6, 1.6, 1.2), [0.8, 0.3, 0.3]),
            (11.0, -7.0, Vector3::new(2.0, 1.2, 1.8), [0.3, 0.3, 0.8]),
            (4.0, -5.0, Vector3::new(1.0, 1.0, 1.0), [0.9, 0.8, 0.2]),
            (13.0, 9.0, Vector3::new(1.5, 3.0, 2.2), [0.3, 0.7, 0.7]),
        ];
        for (x, y, size, color) in statics {
            boxes.push(SceneBox::fixed(on_ground(x, y, size), size, color));
        }
        if with_mover {
            let size = Vector3::new(2.0, 4.0, 2.6);
            let start_y = -(frames as f64) / 2.0;
            boxes.push(SceneBox {
                center: on_ground(17.0, start_y, size),
                size,
                color: [0.9, 0.5, 0.1],
                velocity: Vector3::new(0.0, 1.0, 0.0),
                checker: None,
            });
        }
        SceneSpec {
            ground: GroundSpec::Slope {
                percent: pct,
                height: 0.0,
            },
            ground_color: gray(0.4),
            ground_checker: None,
            background: [0.6, 0.8, 1.0],
            boxes,
            sensor_path: creeping_path(frames, 0.1, pct),
            lidar: street_lidar(),
            camera: Some(forward_camera(400.0, (640, 240))),
            frames,
            noise_sigma: 0.015,
        }
    }

    /// Flat ground with a static box and a box moving across the camera view
    /// at 0.4 m/frame; `checker` textures every surface.
    pub fn validation(frames: usize, checker: bool) -> SceneSpec {
        let tex = checker.then_some(0.25);
        let mut wall = SceneBox::fixed(
            Vector3::new(24.0, 0.0, 2.5),
            Vector3::new(0.6, 40.0, 5.0),
            [0.2, 0.5, 0.8],
        );
        wall.checker = tex;
        let mut still = SceneBox::fixed(
            Vector3::new(10.0, 0.5, 1.0),
            Vector3::new(2.0, 2.0, 2.0),
            [0.85, 0.2, 0.2],
        );
        still.checker = tex;
        // Stays left of the static box so it never passes behind it; raised
        // off the ground like a vehicle body.
        let mover = SceneBox {
            center: Vector3::new(14.0, -11.0, 1.6),
            size: Vector3::new(2.0, 3.0, 2.4),
            color: [0.95, 0.75, 0.1],
            velocity: Vector3::new(0.0, 0.4, 0.0),
            checker: tex,
        };
        SceneSpec {
            ground: GroundSpec::Flat { height: 0.0 },
            ground_color: gray(0.35),
            ground_checker: tex.map(|_| 0.5),
            background: [0.6, 0.8, 1.0],
            boxes: vec![wall, still, mover],
            sensor_path: creeping_path(frames, 0.02, 0.0),
            lidar: street_lidar(),
            camera: Some(forward_camera(400.0, (640, 240))),
            frames,
            noise_sigma: 0.01,
        }
    }

    /// Closed room sized so that each scan holds roughly 100k non-ground
    /// points, with two boxes moving inside.
    pub fn dense_room(frames: usize) -> SceneSpec {
        let wall = |c: Vector3<f64>, s: Vector3<f64>| SceneBox::fixed(c, s, gray(0.6));
        let boxes = vec![
            wall(Vector3::new(16.0, 0.0, 3.0), Vector3::new(0.5, 33.0, 6.0)),
            wall(Vector3::new(-16.0, 0.0, 3.0), Vector3::new(0.5, 33.0, 6.0)),
            wall(Vector3::new(0.0, 16.0, 3.0), Vector3::new(33.0, 0.5, 6.0)),
            wall(Vector3::new(0.0, -16.0, 3.0), Vector3::new(33.0, 0.5, 6.0)),
            wall(Vector3::new(0.0, 0.0, 6.25), Vector3::new(33.0, 33.0, 0.5)),
            SceneBox::fixed(Vector3::new(6.0, 5.0, 1.0), Vector3::new(2.0, 2.0, 2.0), [0.8, 0.3, 0.3]),
            SceneBox {
                center: Vector3::new(9.0, -8.0, 1.2),
                size: Vector3::new(2.0, 4.0, 2.4),
                color: [0.9, 0.5, 0.1],
                velocity: Vector3::new(0.0, 0.8, 0.0),
                checker: None,
            },
            SceneBox {
                center: Vector3::new(-6.0, 8.0, 1.0),
                size: Vector3::new(3.0, 1.5, 2.0),
                color: [0.2, 0.8, 0.3],
                velocity: Vector3::new(0.6, 0.0, 0.0),
                checker: None,
            },
        ];
        SceneSpec {
            ground: GroundSpec::Flat { height: 0.0 },
            ground_color: gray(0.4),
            ground_checker: None,
            background: gray(0.0),
            boxes,
            sensor_path: creeping_path(frames, 0.1, 0.0),
            lidar: LidarSpec::spinning(0.00314, 64, (-8.0f64).to_radians(), 24.0f64.to_radians(), 60.0),
            camera: None,
            frames,
            noise_sigma: 0.015,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_scene() -> SceneSpec {
        SceneSpec {
            ground: GroundSpec::None,
            ground_color: [0.4; 3],
            ground_checker: None,
            background: [0.1, 0.2, 0.3],
            boxes: vec![],
            sensor_path: vec![Pose::from_translation(Vector3::new(0.0, 0.0, 1.5))],
            lidar: LidarSpec::spinning(0.01, 8, -0.3, 0.1, 50.0),
            camera: Some(forward_camera(100.0, (64, 48))),
            frames: 1,
            noise_sigma: 0.0,
        }
    }

    #[test]
    fn horizontal_rays_miss_flat_ground() {
        let mut s = empty_scene();
        s.ground = GroundSpec::Flat { height: 0.0 };
        s.lidar = LidarSpec::spinning(0.01, 1, 0.0, 0.0, 50.0);
        let seq = generate_sequence(&s, 1).unwrap();
        assert!(seq.scans[0].is_empty());
    }

    #[test]
    fn static_box_is_static() {
        let mut s = empty_scene();
        s.boxes.push(SceneBox::fixed(Vector3::new(10.0, 0.0, 1.5), Vector3::new(1.0, 4.0, 3.0), [1.0, 0.0, 0.0]));
        let seq = generate_sequence(&s, 1).unwrap();
        assert!(!seq.scans[0].is_empty());
        assert!(seq.gt_labels[0].iter().all(|&l| l == Label::Static));
        assert_eq!(seq.gt_masks[0].nonzero_pixels(), 0);
    }

    #[test]
    fn moving_box_translates() {
        let mut s = empty_scene();
        s.frames = 2;
        s.noise_sigma = 0.01;
        s.lidar = LidarSpec::spinning(0.002, 16, -0.2, 0.2, 50.0);
        s.boxes.push(SceneBox {
            center: Vector3::new(10.0, 0.0, 1.5),
            size: Vector3::new(6.0, 6.0, 2.0),
            color: [1.0; 3],
            velocity: Vector3::new(1.0, 0.0, 0.0),
            checker: None,
        });
        let seq = generate_sequence(&s, 5).unwrap();
        assert!(seq.gt_labels.iter().flatten().all(|&l| l == Label::Moving));
        // Only the near face is visible, so the cloud moves with the box.
        let centroid = |f: usize| {
            let s = &seq.scans[f];
            s.positions().sum::<Vector3<f64>>() / s.len() as f64
        };
        let shift = centroid(1) - centroid(0);
        assert!((shift.x - 1.0).abs() < 0.01, "{shift:?}");
    }

    #[test]
    fn points_lie_on_surfaces() {
        let mut s = empty_scene();
        s.ground = GroundSpec::Slope {
            percent: 10.0,
            height: 0.0,
        };
        s.noise_sigma = 0.02;
        let b = SceneBox::fixed(Vector3::new(8.0, 1.0, 1.5), Vector3::new(2.0, 2.0, 2.0), [1.0; 3]);
        s.boxes.push(b.clone());
        let seq = generate_sequence(&s, 9).unwrap();
        let pose = seq.poses[0];
        for (p, id) in seq.scans[0].positions().zip(&seq.hit_boxes[0]) {
            let w = pose.transform_point(p);
            let dist = match id {
                Some(_) => {
                    let (lo, hi) = b.bounds_at(0);
                    let outside = (lo - w).sup(&(w - hi)).sup(&Vector3::zeros()).norm();
                    if outside > 0.0 {
                        outside
                    } else {
                        (w - lo).inf(&(hi - w)).min()
                    }
                }
                None => (w.z - 0.1 * w.x).abs() / (1.0f64 + 0.01).sqrt(),
            };
            assert!(dist <= 3.0 * 0.02 * 3f64.sqrt(), "{w:?} {dist}");
        }
    }

    #[test]
    fn render_cases() {
        let s = empty_scene();
        let seq = generate_sequence(&s, 0).unwrap();
        let img = &seq.images[0];
        assert!((0..img.height).all(|y| (0..img.width).all(|x| img.get(x, y, 2) == 0.3)));

        let mut s = empty_scene();
        s.boxes.push(SceneBox::fixed(Vector3::new(10.0, 0.0, 1.5), Vector3::new(1.0, 3.0, 3.0), [1.0, 0.0, 0.0]));
        s.boxes.push(SceneBox::fixed(Vector3::new(5.0, 0.0, 1.5), Vector3::new(0.5, 0.5, 0.5), [0.0, 1.0, 0.0]));
        let seq = generate_sequence(&s, 0).unwrap();
        let img = &seq.images[0];
        let (cx, cy) = (32, 24);
        assert!(img.get(cx, cy, 1) > 0.0 && img.get(cx, cy, 0) == 0.0);
        // Further out only the far box covers the pixel.
        let x = cx + 10;
        assert!(img.get(x, cy, 0) > 0.0 && img.get(x, cy, 1) == 0.0);
    }

    #[test]
    fn ray_box_faces() {
        let lo = Vector3::new(1.0, -1.0, -1.0);
        let hi = Vector3::new(3.0, 1.0, 1.0);
        let (t, n) = ray_box(&Vector3::zeros(), &Vector3::x(), &lo, &hi).unwrap();
        assert_eq!(t, 1.0);
        assert_eq!(n, -Vector3::x());
        assert!(ray_box(&Vector3::zeros(), &-Vector3::x(), &lo, &hi).is_none());
        assert!(ray_box(&Vector3::new(2.0, 0.0, 0.0), &Vector3::x(), &lo, &hi).is_none());
    }

    #[test]
    fn step_ground() {
        let g = GroundSpec::Step {
            at_x: 5.0,
            height: 0.0,
            rise: 0.5,
        };
        let o = Vector3::new(0.0, 0.0, 0.25);
        let (t, n) = ray_ground(&o, &Vector3::x(), &g).unwrap();
        assert_eq!((t, n), (5.0, -Vector3::x()));
        let d = Vector3::new(1.0, 0.0, -0.1).normalize();
        let (t, _) = ray_ground(&o, &d, &g).unwrap();
        assert!((o + d * t).z.abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let s = scenes::street(3, true);
        let a = generate_sequence(&s, 4).unwrap();
        let b = generate_sequence(&s, 4).unwrap();
        assert_eq!(a.scans, b.scans);
        assert_eq!(a.images, b.images);
    }
}
