//! World-frame alignment, far-point cropping, duplicate suppression against
//! recent scans, and a basic point-to-point ICP for sequences without poses.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::par;
use crate::scan_io::{Pose, ScanRecord};
use crate::spatial::VoxelGrid;

/// Pose change below which ICP stops iterating.
const ICP_CONVERGENCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessParams {
    /// Per-axis crop distance from the sensor, meters.
    pub crop_tau: f64,
    /// Number of recent scans checked for duplicates.
    pub dedup_window: usize,
    /// Two points closer than this are duplicates, meters.
    pub dedup_radius: f64,
    pub icp_enabled: bool,
    pub icp_max_iter: usize,
    pub icp_corr_dist: f64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams {
            crop_tau: 30.0,
            dedup_window: 10,
            dedup_radius: 0.1,
            icp_enabled: false,
            icp_max_iter: 20,
            icp_corr_dist: 1.0,
        }
    }
}

impl PreprocessParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.crop_tau > 0.0) {
            return Err(Error::InvalidParams("crop_tau must be > 0".into()));
        }
        if !(self.dedup_radius > 0.0) {
            return Err(Error::InvalidParams("dedup_radius must be > 0".into()));
        }
        if !(self.icp_corr_dist > 0.0) {
            return Err(Error::InvalidParams("icp_corr_dist must be > 0".into()));
        }
        Ok(())
    }
}

/// Maps every point and the sensor origin through `pose`.
pub fn apply_pose(scan: &ScanRecord, pose: &Pose) -> ScanRecord {
    let mut out = scan.clone();
    for p in &mut out.points {
        p.position = pose.transform_point(&p.position);
    }
    out.sensor_origin = pose.transform_point(&scan.sensor_origin);
    out
}

/// Drops points farther than `crop_tau` from the sensor along any axis.
/// The boundary is inclusive. Returns the survivors and their original indices.
pub fn crop_far(scan: &ScanRecord, params: &PreprocessParams) -> (ScanRecord, Vec<usize>) {
    let o = scan.sensor_origin;
    let tau = params.crop_tau;
    let kept: Vec<usize> = scan
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let d = p.position - o;
            d.x.abs() <= tau && d.y.abs() <= tau && d.z.abs() <= tau
        })
        .map(|(i, _)| i)
        .collect();
    (scan.select(&kept), kept)
}

/// Index over the points of the most recent `dedup_window` scans.
pub struct DedupIndex {
    grid: VoxelGrid,
    radius: f64,
}

impl DedupIndex {
    /// `recent` is ordered oldest first; only the last `dedup_window` count.
    pub fn new<'a, I>(recent: I, params: &PreprocessParams) -> Self
    where
        I: IntoIterator<Item = &'a ScanRecord>,
        I::IntoIter: DoubleEndedIterator,
    {
        let points: Vec<Vector3<f64>> = recent
            .into_iter()
            .rev()
            .take(params.dedup_window)
            .flat_map(|s| s.positions().copied())
            .collect();
        DedupIndex {
            grid: VoxelGrid::new(points, params.dedup_radius),
            radius: params.dedup_radius,
        }
    }

    pub fn is_duplicate(&self, p: &Vector3<f64>) -> bool {
        self.grid.any_within(p, self.radius)
    }

    pub fn filter(&self, scan: &ScanRecord) -> (ScanRecord, Vec<usize>) {
        let dup = par::map(&scan.points, |p| self.is_duplicate(&p.position));
        let kept: Vec<usize> = (0..scan.len()).filter(|&i| !dup[i]).collect();
        (scan.select(&kept), kept)
    }
}

/// Keeps a point iff no point of the `dedup_window` most recent scans lies
/// within `dedup_radius`. All clouds must share the world frame.
pub fn dedup_window(
    scan: &ScanRecord,
    recent: &[ScanRecord],
    params: &PreprocessParams,
) -> (ScanRecord, Vec<usize>) {
    DedupIndex::new(recent, params).filter(scan)
}

/// Point-to-point ICP: returns the pose mapping `source` onto `target`,
/// starting from `init`.
pub fn icp_refine(
    source: &ScanRecord,
    target: &ScanRecord,
    init: &Pose,
    params: &PreprocessParams,
) -> Result<Pose> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::DegenerateRegistration { found: 0 });
    }
    let grid = VoxelGrid::new(target.positions().copied().collect(), params.icp_corr_dist);
    let src: Vec<Vector3<f64>> = source.positions().copied().collect();
    let mut pose = *init;
    for _ in 0..params.icp_max_iter {
        let moved: Vec<Vector3<f64>> = src.iter().map(|p| pose.transform_point(p)).collect();
        let matches: Vec<Option<usize>> = par::map(&moved, |p| {
            grid.nearest_within(p, params.icp_corr_dist).map(|(i, _)| i)
        });
        let pairs: Vec<(Vector3<f64>, Vector3<f64>)> = moved
            .iter()
            .zip(&matches)
            .filter_map(|(p, m)| m.map(|j| (*p, grid.points()[j])))
            .collect();
        if pairs.len() < 3 {
            return Err(Error::DegenerateRegistration { found: pairs.len() });
        }
        let delta = best_rigid_fit(&pairs);
        pose = delta.compose(&pose);
        let change = (delta.rotation - Matrix3::identity()).norm() + delta.translation.norm();
        if change < ICP_CONVERGENCE {
            break;
        }
    }
    Ok(pose)
}

/// Least-squares rigid transform taking the first element of each pair onto
/// the second (Kabsch).
fn best_rigid_fit(pairs: &[(Vector3<f64>, Vector3<f64>)]) -> Pose {
    let n = pairs.len() as f64;
    let (cs, ct) = pairs.iter().fold(
        (Vector3::zeros(), Vector3::zeros()),
        |(a, b): (Vector3<f64>, Vector3<f64>), (s, t)| (a + s, b + t),
    );
    let (cs, ct) = (cs / n, ct / n);
    let h = pairs.iter().fold(Matrix3::zeros(), |acc, (s, t)| {
        acc + (s - cs) * (t - ct).transpose()
    });
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = vt.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let mut v = vt.transpose();
        v.column_mut(2).neg_mut();
        r = v * u.transpose();
    }
    Pose {
        rotation: r,
        translation: ct - r * cs,
    }
}
