//! Scans prepared for beam queries, and the window of scans around the one
//! being classified.

use std::sync::Arc;

use nalgebra::Vector3;

use crate::evidential::{ray_angle, BeamGeometry};
use crate::scan_io::ScanRecord;
use crate::spatial::VoxelGrid;

/// Beams sampled when estimating the angular resolution of a scan.
const LAMBDA_SAMPLES: usize = 4096;
/// Starting search radius (radians) for the angular resolution estimate.
const LAMBDA_PROBE: f64 = 0.004;
/// Fallback angular resolution when a scan has too few beams to measure.
const LAMBDA_FALLBACK: f64 = 0.0035;

/// One scan of the window: world-frame beam endpoints, their origin and an
/// index over beam directions.
#[derive(Clone, Debug)]
pub struct WindowScan {
    frame_index: usize,
    origin: Vector3<f64>,
    endpoints: Vec<Vector3<f64>>,
    farthest: f64,
    lambda: Option<f64>,
    /// Unit directions of the beams; positions match `endpoints`, except that
    /// zero-length beams are parked far off the unit sphere.
    directions: VoxelGrid,
}

impl WindowScan {
    /// `scan` must be in the world frame with `sensor_origin` set.
    pub fn new(scan: &ScanRecord, neighbor_angle_mult: f64) -> Self {
        let origin = scan.sensor_origin;
        let endpoints: Vec<Vector3<f64>> = scan.positions().copied().collect();
        let farthest = endpoints
            .iter()
            .map(|p| (p - origin).norm())
            .fold(0.0, f64::max);
        let dirs: Vec<Vector3<f64>> = endpoints
            .iter()
            .map(|p| {
                let d = p - origin;
                let n = d.norm();
                if n > 0.0 {
                    d / n
                } else {
                    Vector3::repeat(1e6)
                }
            })
            .collect();
        let lambda = estimate_lambda(&dirs);
        // Two cone widths per cell: a query box then spans at most 2 cells per axis.
        let cell = 2.0 * neighbor_angle_mult * lambda.unwrap_or(LAMBDA_FALLBACK);
        WindowScan {
            frame_index: scan.frame_index,
            origin,
            endpoints,
            farthest,
            lambda,
            directions: VoxelGrid::new(dirs, cell),
        }
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn origin(&self) -> &Vector3<f64> {
        &self.origin
    }

    pub fn endpoints(&self) -> &[Vector3<f64>] {
        &self.endpoints
    }

    pub fn len(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }

    /// Distance from the origin to the farthest return.
    pub fn farthest(&self) -> f64 {
        self.farthest
    }

    /// Median angular gap to the nearest neighboring beam, if measurable.
    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn beam(&self, i: usize) -> BeamGeometry {
        BeamGeometry {
            origin: self.origin,
            endpoint: self.endpoints[i],
        }
    }

    /// Beams within `cone` radians of the ray origin→`p`, nearest first (ties
    /// by beam index), at most `cap`. Fills `out` with `(angle, beam index)`.
    pub fn beams_in_cone(&self, p: &Vector3<f64>, cone: f64, cap: usize, out: &mut Vec<(f64, u32)>) {
        out.clear();
        let d = p - self.origin;
        let n = d.norm();
        if n == 0.0 || self.endpoints.is_empty() {
            return;
        }
        let u = d / n;
        // Chord length bounds the direction-space distance of any beam in the cone.
        let reach = 2.0 * (0.5 * cone).sin() * (1.0 + 1e-9) + 1e-12;
        self.directions.for_each_within(&u, reach, |j, _| {
            let q = self.endpoints[j] - self.origin;
            let theta = ray_angle(&d, &q);
            if theta <= cone {
                out.push((theta, j as u32));
            }
        });
        out.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.truncate(cap);
    }
}

/// Median nearest-neighbor chord between unit beam directions, over an evenly
/// strided subsample. The chord equals the angle to within 1e-6 relative at
/// lidar resolutions.
fn estimate_lambda(dirs: &[Vector3<f64>]) -> Option<f64> {
    let valid: Vec<Vector3<f64>> = dirs
        .iter()
        .filter(|d| d.x.abs() <= 1.0 + 1e-9)
        .copied()
        .collect();
    if valid.len() < 2 {
        return None;
    }
    let stride = (valid.len() / LAMBDA_SAMPLES).max(1);
    let mut probe = LAMBDA_PROBE;
    while probe < 1.0 {
        let grid = VoxelGrid::new(valid.clone(), probe);
        let mut gaps: Vec<f64> = Vec::new();
        let mut tried = 0usize;
        for (i, d) in valid.iter().enumerate().step_by(stride) {
            tried += 1;
            let mut best = f64::INFINITY;
            grid.for_each_within(d, probe, |j, d2| {
                if j != i && d2 > 0.0 {
                    best = best.min(d2);
                }
            });
            if best.is_finite() {
                gaps.push(best.sqrt());
            }
        }
        if gaps.len() * 2 >= tried {
            gaps.sort_unstable_by(f64::total_cmp);
            return Some(gaps[gaps.len() / 2]);
        }
        probe *= 2.0;
    }
    None
}

/// The scan under classification plus the scans before and after it.
#[derive(Clone, Debug)]
pub struct ScanWindow {
    pub center: Arc<WindowScan>,
    /// Ordered by frame index; the center scan is not included.
    pub others: Vec<Arc<WindowScan>>,
    /// Sensor angular resolution used to size the neighbor cone, radians.
    pub lambda_theta: f64,
}

impl ScanWindow {
    /// Angular resolution is the median over the scans that have one.
    pub fn new(center: Arc<WindowScan>, mut others: Vec<Arc<WindowScan>>) -> Self {
        others.sort_by_key(|s| s.frame_index());
        let mut lambdas: Vec<f64> = std::iter::once(&center)
            .chain(others.iter())
            .filter_map(|s| s.lambda())
            .collect();
        lambdas.sort_unstable_by(f64::total_cmp);
        let lambda_theta = if lambdas.is_empty() {
            LAMBDA_FALLBACK
        } else {
            lambdas[lambdas.len() / 2]
        };
        ScanWindow {
            center,
            others,
            lambda_theta,
        }
    }

    pub fn with_lambda_theta(mut self, lambda: f64) -> Self {
        self.lambda_theta = lambda;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fan(n: usize, spacing: f64) -> ScanRecord {
        let pts: Vec<Vector3<f64>> = (0..n)
            .map(|i| {
                let a = i as f64 * spacing;
                Vector3::new(10.0 * a.cos(), 10.0 * a.sin(), 0.0)
            })
            .collect();
        ScanRecord::from_positions(&pts, 0)
    }

    #[test]
    fn lambda_of_a_fan() {
        let s = WindowScan::new(&fan(500, 0.002), 3.0);
        assert!((s.lambda().unwrap() - 0.002).abs() < 1e-6);
    }

    #[test]
    fn cone_matches_brute_force() {
        let s = WindowScan::new(&fan(2000, 0.001), 3.0);
        let mut out = Vec::new();
        let p = Vector3::new(7.0 * 0.5f64.cos(), 7.0 * 0.5f64.sin(), 0.003);
        s.beams_in_cone(&p, 0.02, 1000, &mut out);
        let mut want: Vec<(f64, u32)> = (0..s.len())
            .map(|j| (ray_angle(&p, &s.endpoints()[j]), j as u32))
            .filter(|(t, _)| *t <= 0.02)
            .collect();
        want.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        assert_eq!(out, want);
        assert!(out.len() > 30);
    }
}
