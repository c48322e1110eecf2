//! Window classification of center-scan points as static or moving.
//!
//! Each point is tested against the beams of every other scan in the window.
//! Dense octree leaves are classified from a random sample of their points and
//! the majority verdict is spread to the whole leaf.

mod octree;
mod window;

pub use octree::{Leaf, OctreeIndex};
pub use window::{ScanWindow, WindowScan};

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evidential::{
    beam_relation, build_smoothing_tables, compare, depth_weight_l, discretize, fuse, Belief,
    BeamGeometry, ConvTables, DiscretizeParams, OccupancyParams,
};
use crate::par;
use crate::scan_io::Label;

/// How per-scan evidence is turned into a verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DetectionMode {
    /// Discretize each scan's occupancy, fuse across scans, moving if `empty`
    /// dominates.
    #[default]
    Discretized,
    /// Compare the center scan's occupancy with each other scan and take the
    /// majority of conflict verdicts.
    PairwiseConflict,
}

impl std::str::FromStr for DetectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discretized" => Ok(DetectionMode::Discretized),
            "pairwise" => Ok(DetectionMode::PairwiseConflict),
            other => Err(Error::InvalidParams(format!(
                "unknown mode `{other}` (expected discretized or pairwise)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowParams {
    /// Scans on each side of the center scan.
    pub k_half: usize,
    pub octree_resolution: f64,
    pub leaf_sample_fraction: f64,
    pub leaf_majority: f64,
    /// Leaves with fewer points than this are classified point by point.
    pub tau_np: usize,
    /// Neighbor cone half-angle in units of the sensor angular resolution.
    pub neighbor_angle_mult: f64,
    pub neighbor_cap: usize,
    pub seed: u64,
    pub mode: DetectionMode,
    /// Classify every point individually, bypassing leaf voting.
    pub exhaustive: bool,
}

impl Default for WindowParams {
    fn default() -> Self {
        WindowParams {
            k_half: 10,
            octree_resolution: 0.3,
            leaf_sample_fraction: 1.0 / 6.0,
            leaf_majority: 0.5,
            tau_np: 6,
            neighbor_angle_mult: 3.0,
            neighbor_cap: 32,
            seed: 0,
            mode: DetectionMode::Discretized,
            exhaustive: false,
        }
    }
}

impl WindowParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.k_half < 1 {
            return bad("k_half must be at least 1");
        }
        if !(self.octree_resolution > 0.0) {
            return bad("octree_resolution must be positive");
        }
        if !(self.leaf_sample_fraction > 0.0 && self.leaf_sample_fraction <= 1.0) {
            return bad("leaf_sample_fraction must be in (0, 1]");
        }
        if !(self.leaf_majority > 0.0 && self.leaf_majority <= 1.0) {
            return bad("leaf_majority must be in (0, 1]");
        }
        if self.tau_np < 1 {
            return bad("tau_np must be at least 1");
        }
        if !(self.neighbor_angle_mult > 0.0) {
            return bad("neighbor_angle_mult must be positive");
        }
        if self.neighbor_cap < 1 {
            return bad("neighbor_cap must be at least 1");
        }
        Ok(())
    }
}

/// Everything the classifier needs besides the window itself.
#[derive(Clone, Debug)]
pub struct Detector {
    pub occupancy: OccupancyParams,
    pub discretize: DiscretizeParams,
    pub window: WindowParams,
    tables: ConvTables,
}

impl Detector {
    pub fn new(
        occupancy: OccupancyParams,
        discretize: DiscretizeParams,
        window: WindowParams,
    ) -> Result<Self> {
        occupancy.validate()?;
        discretize.validate()?;
        window.validate()?;
        let tables = build_smoothing_tables(&occupancy)?;
        Ok(Detector {
            occupancy,
            discretize,
            window,
            tables,
        })
    }

    pub fn tables(&self) -> &ConvTables {
        &self.tables
    }

    /// Neighbor cone half-angle for a window.
    pub fn cone(&self, window: &ScanWindow) -> f64 {
        self.window.neighbor_angle_mult * window.lambda_theta
    }

    /// Fused smoothed belief of the beams of `scan` around `p`.
    pub fn point_occupancy_in_scan(
        &self,
        p: &Vector3<f64>,
        scan: &WindowScan,
        window: &ScanWindow,
    ) -> Belief {
        let mut scratch = Vec::new();
        self.occupancy_with(p, scan, self.cone(window), &mut scratch)
    }

    fn occupancy_with(
        &self,
        p: &Vector3<f64>,
        scan: &WindowScan,
        cone: f64,
        scratch: &mut Vec<(f64, u32)>,
    ) -> Belief {
        scan.beams_in_cone(p, cone, self.window.neighbor_cap, scratch);
        let mut acc = Belief::VACUOUS;
        for &(_, j) in scratch.iter() {
            let Ok(rel) = beam_relation(p, &scan.beam(j as usize)) else {
                continue;
            };
            let f = fuse(acc, self.tables.belief(rel, &self.occupancy));
            if f.total_conflict {
                log::debug!("total conflict fusing beams of frame {}", scan.frame_index());
            }
            acc = f.belief;
        }
        acc
    }

    /// Per-scan evidence snapped to the depth-weighted discrete belief.
    fn scan_evidence(
        &self,
        p: &Vector3<f64>,
        scan: &WindowScan,
        cone: f64,
        scratch: &mut Vec<(f64, u32)>,
    ) -> Belief {
        let occ = self.occupancy_with(p, scan, cone, scratch);
        if scratch.is_empty() {
            return Belief::VACUOUS;
        }
        match depth_weight_l(p, scan.farthest(), scan.origin(), &self.discretize) {
            Ok(l) => discretize(occ, l),
            Err(_) => Belief::VACUOUS,
        }
    }

    pub fn classify_point(&self, p: &Vector3<f64>, window: &ScanWindow) -> Label {
        let mut scratch = Vec::new();
        self.classify_with(p, window, self.cone(window), &mut scratch)
    }

    fn classify_with(
        &self,
        p: &Vector3<f64>,
        window: &ScanWindow,
        cone: f64,
        scratch: &mut Vec<(f64, u32)>,
    ) -> Label {
        if window.others.is_empty() {
            return Label::Static;
        }
        let moving = match self.window.mode {
            DetectionMode::Discretized => {
                let mut acc = Belief::VACUOUS;
                for scan in &window.others {
                    let b = self.scan_evidence(p, scan, cone, scratch);
                    acc = fuse(acc, b).belief;
                }
                acc.e > acc.o && acc.e > acc.u
            }
            DetectionMode::PairwiseConflict => {
                let own = self.occupancy_with(p, &window.center, cone, scratch);
                let votes = window
                    .others
                    .iter()
                    .filter(|scan| {
                        let b = self.scan_evidence(p, scan, cone, scratch);
                        compare(own, b).is_moving()
                    })
                    .count();
                2 * votes > window.others.len()
            }
        };
        if moving {
            Label::Moving
        } else {
            Label::Static
        }
    }

    /// Labels for the points of one leaf, in the leaf's index order. Leaf
    /// indices refer to `points`.
    pub fn classify_leaf(&self, leaf: &Leaf, points: &[Vector3<f64>], window: &ScanWindow) -> Vec<Label> {
        let cone = self.cone(window);
        let mut scratch = Vec::new();
        let n = leaf.indices.len();
        if self.window.exhaustive || n < self.window.tau_np {
            return leaf
                .indices
                .iter()
                .map(|&i| self.classify_with(&points[i], window, cone, &mut scratch))
                .collect();
        }
        let tested = ceil_count(n as f64 * self.window.leaf_sample_fraction).clamp(1, n);
        let needed = ceil_count(tested as f64 * self.window.leaf_majority).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(leaf_seed(self.window.seed, leaf.coords));
        let mut picks = rand::seq::index::sample(&mut rng, n, tested).into_vec();
        picks.sort_unstable();
        let moving = picks
            .iter()
            .filter(|&&k| {
                self.classify_with(&points[leaf.indices[k]], window, cone, &mut scratch)
                    == Label::Moving
            })
            .count();
        let label = if moving >= needed {
            Label::Moving
        } else {
            Label::Static
        };
        vec![label; n]
    }

    /// Labels every point of the window's center scan.
    pub fn detect_window(&self, window: &ScanWindow) -> Vec<Label> {
        self.detect_points(window, window.center.endpoints())
    }

    /// Labels `points` (normally a subset of the center scan) against the
    /// window's evidence.
    pub fn detect_points(&self, window: &ScanWindow, points: &[Vector3<f64>]) -> Vec<Label> {
        let mut labels = vec![Label::Static; points.len()];
        if points.is_empty() {
            return labels;
        }
        let tree = OctreeIndex::build(points, self.window.octree_resolution);
        let per_leaf = par::map(tree.leaves(), |leaf| self.classify_leaf(leaf, points, window));
        for (leaf, ls) in tree.leaves().iter().zip(per_leaf) {
            for (&i, l) in leaf.indices.iter().zip(ls) {
                labels[i] = l;
            }
        }
        labels
    }
}

/// Beams of `scan` near the ray from its origin to `p`, nearest first.
pub fn candidate_beams(
    p: &Vector3<f64>,
    scan: &WindowScan,
    window: &ScanWindow,
    params: &WindowParams,
) -> Vec<BeamGeometry> {
    let mut found = Vec::new();
    scan.beams_in_cone(
        p,
        params.neighbor_angle_mult * window.lambda_theta,
        params.neighbor_cap,
        &mut found,
    );
    found.iter().map(|&(_, j)| scan.beam(j as usize)).collect()
}

/// `ceil` that ignores floating-point dust just above an integer.
fn ceil_count(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

fn leaf_seed(seed: u64, coords: [i64; 3]) -> u64 {
    let mut h = splitmix(seed);
    for c in coords {
        h = splitmix(h ^ c as u64);
    }
    h
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
