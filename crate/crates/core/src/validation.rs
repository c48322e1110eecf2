//! Image and depth-map patch tests that demote moving candidates whose
//! appearance does not change across the window.

use nalgebra::{Vector3, Vector4};

use crate::error::{Error, Result};
use crate::par;
use crate::scan_io::{CameraCalib, Label, Pose, Raster};

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationParams {
    /// Physical height of a patch, meters.
    pub patch_height_h: f64,
    pub ncc_tau: f64,
    /// Gray standard deviation at or below which a patch counts as uniform.
    pub uniform_std: f64,
    pub dilation_radius: usize,
    pub ncc_search_radius: usize,
    /// Mean squared depth difference below which depth patches match.
    pub ssd_tau: f64,
}

impl Default for ValidationParams {
    fn default() -> Self {
        ValidationParams {
            patch_height_h: 0.15,
            ncc_tau: 0.1,
            uniform_std: 0.02,
            dilation_radius: 4,
            ncc_search_radius: 2,
            ssd_tau: 0.01,
        }
    }
}

impl ValidationParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.patch_height_h > 0.0
            && self.ncc_tau > 0.0
            && self.uniform_std > 0.0
            && self.dilation_radius > 0
            && self.ncc_search_radius > 0
            && self.ssd_tau > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams("validation parameters must be positive".into()))
        }
    }
}

/// Normalized depth raster and the distance it was normalized by.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub raster: Raster,
    pub d_max: f64,
}

/// Camera view for one scan of the window.
#[derive(Clone, Debug)]
pub struct CameraFrame {
    pub frame_index: usize,
    pub calib: CameraCalib,
    /// Lidar pose in the world at acquisition time.
    pub pose: Pose,
    pub image: Option<Raster>,
    pub depth: Option<DepthMap>,
}

impl CameraFrame {
    pub fn new(frame_index: usize, calib: CameraCalib, pose: Pose) -> Self {
        CameraFrame {
            frame_index,
            calib,
            pose,
            image: None,
            depth: None,
        }
    }

    /// World → camera transform.
    pub fn world_to_camera(&self) -> Pose {
        self.calib.lidar_to_camera.compose(&self.pose.inverse())
    }

    /// Camera center in world coordinates.
    pub fn camera_center(&self) -> Vector3<f64> {
        self.world_to_camera().inverse().translation
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    /// Sub-pixel image coordinates and camera-to-point distance.
    Visible { u: f64, v: f64, distance: f64 },
    Behind,
    Outside,
}

impl Projection {
    /// Integer pixel containing the projection.
    pub fn pixel(&self) -> Option<(usize, usize)> {
        match *self {
            Projection::Visible { u, v, .. } => Some((u.floor() as usize, v.floor() as usize)),
            _ => None,
        }
    }
}

/// Projects a world point into the camera of `frame`.
pub fn project_to_camera(p: &Vector3<f64>, frame: &CameraFrame) -> Projection {
    project_with(&frame.world_to_camera(), &frame.calib, p)
}

pub(crate) fn project_with(world_to_camera: &Pose, calib: &CameraCalib, p: &Vector3<f64>) -> Projection {
    let pc = world_to_camera.transform_point(p);
    let h = calib.projection * Vector4::new(pc.x, pc.y, pc.z, 1.0);
    if !(h.z > 0.0) {
        return Projection::Behind;
    }
    let u = h.x / h.z;
    let v = h.y / h.z;
    let (w, ht) = calib.image_size;
    if !(u >= 0.0 && v >= 0.0 && u < w as f64 && v < ht as f64) {
        return Projection::Outside;
    }
    Projection::Visible {
        u,
        v,
        distance: pc.norm(),
    }
}

/// Patch side in pixels for a patch of physical height `h` seen at distance
/// `d`: the nearest odd integer (ties upward), at least 3.
pub fn patch_side(h: f64, d: f64, f_xy: f64) -> usize {
    let raw = h / d * f_xy;
    let k = ((raw - 1.0) / 2.0 + 0.5).floor().max(0.0);
    let side = 2 * (k.min(1e6) as usize) + 1;
    side.max(3)
}

/// Square patch of `raster` centered on `pixel`, with coordinates clamped to
/// the raster edge.
pub fn extract_patch(
    raster: &Raster,
    projection: &Projection,
    f_xy: f64,
    params: &ValidationParams,
) -> Result<Raster> {
    let Projection::Visible { distance, .. } = *projection else {
        return Err(Error::NoPatch);
    };
    let (cx, cy) = projection.pixel().ok_or(Error::NoPatch)?;
    if cx >= raster.width || cy >= raster.height || !(distance > 0.0) {
        return Err(Error::NoPatch);
    }
    let side = patch_side(params.patch_height_h, distance, f_xy);
    Ok(crop_clamped(raster, cx, cy, side))
}

fn crop_clamped(raster: &Raster, cx: usize, cy: usize, side: usize) -> Raster {
    let half = (side / 2) as i64;
    let mut out = Raster::new(side, side, raster.channels, 0.0);
    let max_x = raster.width as i64 - 1;
    let max_y = raster.height as i64 - 1;
    for py in 0..side {
        let y = (cy as i64 + py as i64 - half).clamp(0, max_y) as usize;
        for px in 0..side {
            let x = (cx as i64 + px as i64 - half).clamp(0, max_x) as usize;
            for c in 0..raster.channels {
                out.set(px, py, c, raster.get(x, y, c));
            }
        }
    }
    out
}

/// Bilinear resample of a square patch to `side × side`.
pub fn resize_bilinear(patch: &Raster, side: usize) -> Raster {
    if patch.width == side && patch.height == side {
        return patch.clone();
    }
    let mut out = Raster::new(side, side, patch.channels, 0.0);
    let sx = patch.width as f64 / side as f64;
    let sy = patch.height as f64 / side as f64;
    for y in 0..side {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (patch.height - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(patch.height - 1);
        let ty = fy - y0 as f64;
        for x in 0..side {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (patch.width - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(patch.width - 1);
            let tx = fx - x0 as f64;
            for c in 0..patch.channels {
                let top = patch.get(x0, y0, c) * (1.0 - tx) + patch.get(x1, y0, c) * tx;
                let bot = patch.get(x0, y1, c) * (1.0 - tx) + patch.get(x1, y1, c) * tx;
                out.set(x, y, c, (top * (1.0 - ty) + bot * ty).clamp(0.0, 1.0));
            }
        }
    }
    out
}

/// Brings two patches to the smaller of their sides.
pub fn match_sizes(a: Raster, b: Raster) -> (Raster, Raster) {
    let side = a.width.min(b.width);
    (resize_bilinear(&a, side), resize_bilinear(&b, side))
}

pub fn gray_std(patch: &Raster) -> f64 {
    let n = patch.pixel_count() as f64;
    let grays: Vec<f64> = (0..patch.height)
        .flat_map(|y| (0..patch.width).map(move |x| (x, y)))
        .map(|(x, y)| patch.gray(x, y))
        .collect();
    let mean = grays.iter().sum::<f64>() / n;
    (grays.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn is_uniform(patch: &Raster, params: &ValidationParams) -> bool {
    gray_std(patch) <= params.uniform_std
}

/// Per-channel `1 − max NCC` over integer shifts of `b` relative to `a`.
/// `None` marks a channel whose correlation is undefined because one of the
/// patches is flat in it.
pub fn ncc_dissimilarity(a: &Raster, b: &Raster, params: &ValidationParams) -> Result<Vec<Option<f64>>> {
    if a.width != b.width || a.height != b.height || a.channels != b.channels {
        return Err(Error::SizeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        )));
    }
    Ok((0..a.channels)
        .map(|c| channel_ncc(a, b, c, params.ncc_search_radius as i64))
        .collect())
}

fn channel_ncc(a: &Raster, b: &Raster, c: usize, radius: i64) -> Option<f64> {
    let flat = |r: &Raster| {
        let first = r.get(0, 0, c);
        (0..r.height).all(|y| (0..r.width).all(|x| r.get(x, y, c) == first))
    };
    if flat(a) || flat(b) {
        return None;
    }
    let (w, h) = (a.width as i64, a.height as i64);
    let min_overlap = (w * h + 1) / 2;
    let mut best: Option<f64> = None;
    for dv in -radius..=radius {
        for du in -radius..=radius {
            let x0 = 0.max(-du);
            let x1 = w.min(w - du);
            let y0 = 0.max(-dv);
            let y1 = h.min(h - dv);
            if x1 <= x0 || y1 <= y0 || (x1 - x0) * (y1 - y0) < min_overlap {
                continue;
            }
            let n = ((x1 - x0) * (y1 - y0)) as f64;
            let (mut ma, mut mb) = (0.0, 0.0);
            for y in y0..y1 {
                for x in x0..x1 {
                    ma += a.get(x as usize, y as usize, c);
                    mb += b.get((x + du) as usize, (y + dv) as usize, c);
                }
            }
            ma /= n;
            mb /= n;
            let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
            for y in y0..y1 {
                for x in x0..x1 {
                    let da = a.get(x as usize, y as usize, c) - ma;
                    let db = b.get((x + du) as usize, (y + dv) as usize, c) - mb;
                    sab += da * db;
                    saa += da * da;
                    sbb += db * db;
                }
            }
            if saa <= 0.0 || sbb <= 0.0 {
                continue;
            }
            let ncc = (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0);
            best = Some(best.map_or(ncc, |b: f64| b.max(ncc)));
        }
    }
    best.map(|m| 1.0 - m)
}

/// Per-pixel nearest camera-to-point distance, normalized by the largest
/// projected distance and spread by a disk of `dilation_radius` pixels in
/// which the nearest depth wins. Pixels no point reaches are 1.
pub fn build_depthmap(
    points: &[Vector3<f64>],
    frame: &CameraFrame,
    params: &ValidationParams,
) -> Result<DepthMap> {
    let (w, h) = frame.calib.image_size;
    let to_cam = frame.world_to_camera();
    let mut nearest = vec![f64::INFINITY; w * h];
    let mut d_max: f64 = 0.0;
    for p in points {
        if let Projection::Visible { u, v, distance } = project_with(&to_cam, &frame.calib, p) {
            let i = v.floor() as usize * w + u.floor() as usize;
            nearest[i] = nearest[i].min(distance);
            d_max = d_max.max(distance);
        }
    }
    if !(d_max > 0.0) {
        return Err(Error::EmptyDepthmap {
            frame: frame.frame_index,
        });
    }
    let samples = min_disk_dilate(&nearest, w, h, params.dilation_radius)
        .into_iter()
        .map(|d| if d.is_finite() { d / d_max } else { 1.0 })
        .collect();
    Ok(DepthMap {
        raster: Raster {
            width: w,
            height: h,
            channels: 1,
            samples,
        },
        d_max,
    })
}

/// Offsets of a digital disk of the given radius.
pub(crate) fn disk_offsets(radius: usize) -> Vec<(i64, i64)> {
    let r = radius as i64;
    (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect()
}

fn min_disk_dilate(values: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    let disk = disk_offsets(radius);
    let mut out = values.to_vec();
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for &(dx, dy) in &disk {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if v < out[j] {
                out[j] = v;
            }
        }
    }
    out
}

/// Shifts a depth map by the camera translation between two frames, in units
/// of the map's normalizing distance.
pub fn correct_depthmap(depth: &DepthMap, t_k: &Vector3<f64>, t_l: &Vector3<f64>) -> Raster {
    let shift = (t_k - t_l).norm() / depth.d_max;
    let mut out = depth.raster.clone();
    for s in &mut out.samples {
        *s = (*s + shift).clamp(0.0, 1.0);
    }
    out
}

/// Mean squared sample difference.
pub fn ssd_dissimilarity(a: &Raster, b: &Raster) -> Result<f64> {
    if a.samples.len() != b.samples.len() || a.width != b.width {
        return Err(Error::SizeMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let n = a.samples.len() as f64;
    Ok(a.samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / n)
}

/// Which test decided a pair of views.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Color,
    Depth,
}

/// Outcome of comparing a point's neighborhood between the center frame and
/// one other frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairVerdict {
    pub route: Route,
    pub similar: bool,
}

/// Compares the neighborhood of `p` in `center` and `other`. `None` when the
/// pair carries no usable evidence.
pub fn compare_views(
    p: &Vector3<f64>,
    center: &CameraFrame,
    other: &CameraFrame,
    params: &ValidationParams,
) -> Option<PairVerdict> {
    let pk = project_to_camera(p, center);
    let pl = project_to_camera(p, other);
    if pk.pixel().is_none() || pl.pixel().is_none() {
        return None;
    }
    if let (Some(ik), Some(il)) = (&center.image, &other.image) {
        let a = extract_patch(ik, &pk, center.calib.f_xy, params).ok()?;
        let b = extract_patch(il, &pl, other.calib.f_xy, params).ok()?;
        let (a, b) = match_sizes(a, b);
        if !is_uniform(&a, params) && !is_uniform(&b, params) {
            let scores = ncc_dissimilarity(&a, &b, params).ok()?;
            if scores.iter().all(Option::is_some) {
                let similar = scores.iter().flatten().all(|&e| e < params.ncc_tau);
                return Some(PairVerdict {
                    route: Route::Color,
                    similar,
                });
            }
        }
    }
    let (dk, dl) = (center.depth.as_ref()?, other.depth.as_ref()?);
    let a = extract_patch(&dk.raster, &pk, center.calib.f_xy, params).ok()?;
    let corrected = correct_depthmap(dl, &center.camera_center(), &other.camera_center());
    let b = extract_patch(&corrected, &pl, other.calib.f_xy, params).ok()?;
    let (a, b) = match_sizes(a, b);
    let similar = ssd_dissimilarity(&a, &b).ok()? < params.ssd_tau;
    Some(PairVerdict {
        route: Route::Depth,
        similar,
    })
}

/// Demotes a candidate when every usable view pair looks the same.
pub fn point_is_false_positive(
    p: &Vector3<f64>,
    center: &CameraFrame,
    others: &[&CameraFrame],
    params: &ValidationParams,
) -> bool {
    let mut usable = 0usize;
    for other in others {
        if let Some(v) = compare_views(p, center, other, params) {
            if !v.similar {
                return false;
            }
            usable += 1;
        }
    }
    usable > 0
}

/// Returns `labels` with false-positive Moving points turned Static, judged
/// from the `center` view against the `others`.
pub fn validate_candidates(
    labels: &[Label],
    points: &[Vector3<f64>],
    center: &CameraFrame,
    others: &[&CameraFrame],
    params: &ValidationParams,
) -> Result<Vec<Label>> {
    if labels.len() != points.len() {
        return Err(Error::SizeMismatch(format!(
            "{} labels for {} points",
            labels.len(),
            points.len()
        )));
    }
    let candidates: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] == Label::Moving)
        .collect();
    let demote = par::map(&candidates, |&i| {
        point_is_false_positive(&points[i], center, others, params)
    });
    let mut out = labels.to_vec();
    for (&i, d) in candidates.iter().zip(demote) {
        if d {
            out[i] = Label::Static;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calib() -> CameraCalib {
        CameraCalib::pinhole(500.0, 320.0, 240.0, (640, 480), Pose::identity()).unwrap()
    }

    fn frame() -> CameraFrame {
        CameraFrame::new(0, calib(), Pose::identity())
    }

    fn patch_from(side: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Raster {
        let mut r = Raster::new(side, side, 3, 0.0);
        for y in 0..side {
            for x in 0..side {
                for (c, v) in f(x, y).iter().enumerate() {
                    r.set(x, y, c, *v);
                }
            }
        }
        r
    }

    #[test]
    fn projection_cases() {
        let f = frame();
        match project_to_camera(&Vector3::new(0.0, 0.0, 10.0), &f) {
            Projection::Visible { u, v, distance } => {
                assert_eq!((u, v, distance), (320.0, 240.0, 10.0));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(project_to_camera(&Vector3::new(0.0, 0.0, -1.0), &f), Projection::Behind);
        // u = 320 + 500·x/10 = 645 = width + 5
        assert_eq!(project_to_camera(&Vector3::new(6.5, 0.0, 10.0), &f), Projection::Outside);
    }

    #[test]
    fn patch_side_rule() {
        assert_eq!(patch_side(0.15, 15.0, 750.0), 7);
        assert_eq!(patch_side(0.15, 1.125, 750.0), 101);
        assert_eq!(patch_side(0.15, 0.15 * 750.0 / 1.2, 750.0), 3);
        assert_eq!(patch_side(1.0, 1.0, 5.0), 5);
        assert_eq!(patch_side(1.0, 1.0, 6.0), 7);
    }

    #[test]
    fn extract_clamps_at_border() {
        let img = patch_from(10, |x, y| [x as f64 / 10.0, y as f64 / 10.0, 0.0]);
        let p = Projection::Visible {
            u: 0.2,
            v: 0.2,
            distance: 1.0,
        };
        let params = ValidationParams::default();
        let patch = extract_patch(&img, &p, 0.15 * 20.0, &params).unwrap();
        assert_eq!(patch.width, 3);
        assert_eq!(patch.get(0, 0, 0), 0.0);
        assert_eq!(patch.get(2, 2, 1), 0.1);
        assert!(matches!(extract_patch(&img, &Projection::Outside, 1.0, &params), Err(Error::NoPatch)));
    }

    #[test]
    fn uniformity() {
        let params = ValidationParams::default();
        assert!(is_uniform(&patch_from(5, |_, _| [0.3; 3]), &params));
        let checker = patch_from(4, |x, y| [((x + y) % 2) as f64; 3]);
        assert!((gray_std(&checker) - 0.5).abs() < 1e-12);
        assert!(!is_uniform(&checker, &params));
        // Two-level pattern with spread 0.019 on either side of the mean.
        let g = patch_from(4, |x, _| [if x < 2 { 0.5 - 0.019 } else { 0.5 + 0.019 }; 3]);
        let s = gray_std(&g);
        assert!((s - 0.019).abs() < 1e-12);
        assert!(is_uniform(&g, &params));
    }

    #[test]
    fn ncc_cases() {
        let params = ValidationParams::default();
        let a = patch_from(7, |x, y| [((x * 3 + y * 5) % 7) as f64 / 7.0, (x % 3) as f64 / 3.0, (y % 2) as f64]);
        let e = ncc_dissimilarity(&a, &a, &params).unwrap();
        assert!(e.iter().all(|c| *c == Some(0.0)), "{e:?}");

        let ramp = patch_from(7, |x, _| [x as f64 / 6.0; 3]);
        let inv = patch_from(7, |x, _| [1.0 - x as f64 / 6.0; 3]);
        let e = ncc_dissimilarity(&ramp, &inv, &params).unwrap();
        for c in e {
            assert!((c.unwrap() - 2.0).abs() < 1e-12);
        }

        let flat_red = patch_from(7, |x, y| [0.4, x as f64 / 6.0, y as f64 / 6.0]);
        let e = ncc_dissimilarity(&flat_red, &a, &params).unwrap();
        assert_eq!(e[0], None);
        assert!(e[1].is_some() && e[2].is_some());
    }

    #[test]
    fn ncc_ignores_gain_and_bias() {
        let params = ValidationParams::default();
        let a = patch_from(9, |x, y| [((x * 7 + y * 3) % 5) as f64 / 5.0; 3]);
        let b = patch_from(9, |x, y| [0.1 + 0.5 * ((x * 7 + y * 3) % 5) as f64 / 5.0; 3]);
        for c in ncc_dissimilarity(&a, &b, &params).unwrap() {
            assert!(c.unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn depthmap_single_point_and_min_rule() {
        let params = ValidationParams::default();
        let f = frame();
        // A far point in the image corner fixes the normalization at 25 m.
        let pts = [Vector3::new(0.0, 0.0, 10.0), Vector3::new(-12.0, -9.0, 20.0)];
        let d = build_depthmap(&pts, &f, &params).unwrap();
        assert_eq!(d.d_max, 25.0);
        let near = d.raster.samples.iter().filter(|&&s| s == 0.4).count();
        assert_eq!(near, disk_offsets(4).len());
        assert_eq!(d.raster.get(320, 240, 0), 0.4);
        assert_eq!(d.raster.get(324, 240, 0), 0.4);
        assert_eq!(d.raster.get(325, 240, 0), 1.0);

        let two = [Vector3::new(0.0, 0.0, 5.0), Vector3::new(0.0, 0.0, 10.0)];
        let d = build_depthmap(&two, &f, &params).unwrap();
        assert_eq!(d.raster.get(320, 240, 0), 0.5);
    }

    #[test]
    fn depthmap_empty_is_error() {
        let f = CameraFrame::new(7, calib(), Pose::identity());
        let err = build_depthmap(&[Vector3::new(0.0, 0.0, -3.0)], &f, &ValidationParams::default());
        assert!(matches!(err, Err(Error::EmptyDepthmap { frame: 7 })));
    }

    #[test]
    fn depthmap_fills_plane() {
        let params = ValidationParams::default();
        let f = frame();
        // Plane at z = 10 sampled every 0.05 m: about 2.5 px apart.
        let pts: Vec<Vector3<f64>> = (0..40)
            .flat_map(|i| (0..40).map(move |j| Vector3::new(-1.0 + 0.05 * i as f64, -1.0 + 0.05 * j as f64, 10.0)))
            .collect();
        let sparse_holes = {
            let mut seen = vec![false; 640 * 480];
            for p in &pts {
                if let Some((x, y)) = project_to_camera(p, &f).pixel() {
                    seen[y * 640 + x] = true;
                }
            }
            (195..285).flat_map(|y| (275..360).map(move |x| (x, y))).filter(|(x, y)| !seen[y * 640 + x]).count()
        };
        let d = build_depthmap(&pts, &f, &params).unwrap();
        let holes = (195..285)
            .flat_map(|y| (275..360).map(move |x| (x, y)))
            .filter(|&(x, y)| d.raster.get(x, y, 0) >= 1.0)
            .count();
        assert!(sparse_holes > 1000);
        assert_eq!(holes, 0);
    }

    #[test]
    fn depth_correction() {
        let d = DepthMap {
            raster: Raster::from_samples(2, 1, 1, vec![0.3, 0.995]).unwrap(),
            d_max: 50.0,
        };
        let t = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(correct_depthmap(&d, &t, &t), d.raster);
        let c = correct_depthmap(&d, &Vector3::zeros(), &Vector3::new(0.0, 1.0, 0.0));
        assert!((c.samples[0] - 0.32).abs() < 1e-12);
        assert_eq!(c.samples[1], 1.0);
    }

    #[test]
    fn ssd_cases() {
        let zeros = Raster::new(4, 4, 1, 0.0);
        let ones = Raster::new(4, 4, 1, 1.0);
        assert_eq!(ssd_dissimilarity(&zeros, &zeros).unwrap(), 0.0);
        assert_eq!(ssd_dissimilarity(&zeros, &ones).unwrap(), 1.0);
        let mut half = zeros.clone();
        for s in half.samples.iter_mut().take(8) {
            *s = 0.5;
        }
        assert_eq!(ssd_dissimilarity(&zeros, &half).unwrap(), 0.125);
    }

    #[test]
    fn resize_to_smaller() {
        let a = patch_from(9, |x, _| [x as f64 / 8.0; 3]);
        let b = patch_from(5, |_, _| [0.0; 3]);
        let (a2, b2) = match_sizes(a, b);
        assert_eq!((a2.width, b2.width), (5, 5));
        assert!((a2.get(2, 2, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invisible_candidates_keep_label() {
        let params = ValidationParams::default();
        let f0 = frame();
        let mut f1 = frame();
        f1.frame_index = 1;
        let labels = vec![Label::Moving, Label::Static];
        let pts = vec![Vector3::new(0.0, 0.0, -5.0), Vector3::new(0.0, 0.0, 5.0)];
        let out = validate_candidates(&labels, &pts, &f0, &[&f1], &params).unwrap();
        assert_eq!(out, labels);
    }
}
