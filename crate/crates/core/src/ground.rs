//! Ground removal on a 2D tile grid.
//!
//! Points are binned into square XY tiles. Starting from the tile under the
//! sensor (or the populated tile nearest to it), tiles are visited ring by
//! ring in Chebyshev distance. Each tile inherits a propagated ground height
//! `ĥ` from already-visited tiles of the inner ring and is ground iff
//!
//! ```text
//! H - h < s   and   H < ĥ + s
//! ```
//!
//! where `H`/`h` are the tile's max/min heights and `s` is the largest height
//! step allowed between adjacent tiles. Ground tiles pass on `H`, all others
//! relay `ĥ` unchanged.
//!
//! Lidar returns thin out with range, so a tile may have no populated inner
//! neighbor. Such a tile looks for visited inner tiles up to `max_gap` tiles
//! away and scales the step allowance by that distance.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scan_io::{Label, LabelArray, ScanRecord};

pub type TileKey = (i64, i64);

#[derive(Clone, Debug, PartialEq)]
pub struct GroundParams {
    /// Tile side, meters.
    pub cell_size: f64,
    /// Largest height step between neighboring tiles, meters.
    pub slope_s: f64,
    /// Farthest (in tiles) a tile may look inward for a propagated height.
    pub max_gap: i64,
}

impl Default for GroundParams {
    fn default() -> Self {
        GroundParams {
            cell_size: 0.4,
            slope_s: 0.09,
            max_gap: 10,
        }
    }
}

impl GroundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) || !(self.slope_s > 0.0) {
            return Err(Error::InvalidParams(
                "ground cell_size and slope_s must be > 0".into(),
            ));
        }
        if self.max_gap < 1 {
            return Err(Error::InvalidParams("ground max_gap must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellStats {
    pub h_max: f64,
    pub h_min: f64,
    /// Height inherited from the inner ring.
    pub propagated: f64,
    /// Height passed on to the outer ring.
    pub ground_height: f64,
    pub is_ground: bool,
    /// Reached by propagation. Unreached tiles are never ground.
    pub visited: bool,
    pub point_indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundGrid {
    pub cell_size: f64,
    pub slope_s: f64,
    pub max_gap: i64,
    pub cells: BTreeMap<TileKey, CellStats>,
}

impl GroundGrid {
    pub fn tile_of(&self, x: f64, y: f64) -> TileKey {
        tile_of(x, y, self.cell_size)
    }

    pub fn ground_cells(&self) -> impl Iterator<Item = (&TileKey, &CellStats)> {
        self.cells.iter().filter(|(_, c)| c.is_ground)
    }
}

#[inline]
fn tile_of(x: f64, y: f64, cell: f64) -> TileKey {
    ((x / cell).floor() as i64, (y / cell).floor() as i64)
}

/// Bins the points into tiles and records per-tile height extremes.
pub fn build_height_grid(scan: &ScanRecord, params: &GroundParams) -> GroundGrid {
    let mut cells: BTreeMap<TileKey, CellStats> = BTreeMap::new();
    for (i, p) in scan.points.iter().enumerate() {
        let z = p.position.z;
        let key = tile_of(p.position.x, p.position.y, params.cell_size);
        cells
            .entry(key)
            .and_modify(|c| {
                c.h_max = c.h_max.max(z);
                c.h_min = c.h_min.min(z);
                c.point_indices.push(i);
            })
            .or_insert_with(|| CellStats {
                h_max: z,
                h_min: z,
                propagated: z,
                ground_height: z,
                is_ground: false,
                visited: false,
                point_indices: vec![i],
            });
    }
    GroundGrid {
        cell_size: params.cell_size,
        slope_s: params.slope_s,
        max_gap: params.max_gap,
        cells,
    }
}

fn chebyshev(a: TileKey, b: TileKey) -> i64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

fn seed_tile(grid: &GroundGrid) -> Option<TileKey> {
    if grid.cells.contains_key(&(0, 0)) {
        return Some((0, 0));
    }
    let c = grid.cell_size;
    grid.cells
        .keys()
        .map(|&(i, j)| {
            let (x, y) = ((i as f64 + 0.5) * c, (j as f64 + 0.5) * c);
            ((x * x + y * y), (i, j))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, k)| k)
}

/// Ring-by-ring ground classification. Deterministic for a given grid.
pub fn classify_cells(mut grid: GroundGrid) -> GroundGrid {
    let Some(seed) = seed_tile(&grid) else {
        return grid;
    };
    let s = grid.slope_s;
    let max_gap = grid.max_gap;

    let mut rings: BTreeMap<i64, Vec<TileKey>> = BTreeMap::new();
    for &key in grid.cells.keys() {
        rings.entry(chebyshev(key, seed)).or_default().push(key);
    }

    {
        let cell = grid.cells.get_mut(&seed).unwrap();
        cell.propagated = cell.h_min;
        apply_rule(cell, cell.h_min, s, s);
    }

    for (&ring, keys) in rings.range(1..) {
        // Cells of one ring only read inner rings, so updates are staged.
        let updates: Vec<(TileKey, Option<(f64, i64)>)> = keys
            .iter()
            .map(|&key| (key, inherited_height(&grid, key, seed, ring, max_gap)))
            .collect();
        for (key, inherited) in updates {
            let cell = grid.cells.get_mut(&key).unwrap();
            match inherited {
                Some((h_hat, gap)) => {
                    cell.propagated = h_hat;
                    apply_rule(cell, h_hat, s, s * gap as f64);
                }
                None => {
                    cell.visited = false;
                    cell.is_ground = false;
                    cell.propagated = cell.h_min;
                    cell.ground_height = cell.h_min;
                }
            }
        }
    }
    grid
}

/// `span` bounds the tile's own height range; `step` bounds its rise over `h_hat`.
fn apply_rule(cell: &mut CellStats, h_hat: f64, span: f64, step: f64) {
    cell.visited = true;
    cell.is_ground = cell.h_max - cell.h_min < span && cell.h_max < h_hat + step;
    cell.ground_height = if cell.is_ground { cell.h_max } else { h_hat };
}

/// Max ground height over visited tiles strictly inside `ring`, taken from the
/// smallest neighborhood (Chebyshev radius `g <= max_gap`) that has any.
fn inherited_height(
    grid: &GroundGrid,
    key: TileKey,
    seed: TileKey,
    ring: i64,
    max_gap: i64,
) -> Option<(f64, i64)> {
    for g in 1..=max_gap {
        let mut best: Option<f64> = None;
        for di in -g..=g {
            for dj in -g..=g {
                if di.abs().max(dj.abs()) != g {
                    continue;
                }
                let nb = (key.0 + di, key.1 + dj);
                let nb_ring = chebyshev(nb, seed);
                let inner = if g == 1 { nb_ring == ring - 1 } else { nb_ring < ring };
                if !inner {
                    continue;
                }
                if let Some(c) = grid.cells.get(&nb) {
                    if c.visited {
                        best = Some(best.map_or(c.ground_height, |b: f64| b.max(c.ground_height)));
                    }
                }
            }
        }
        if let Some(h) = best {
            return Some((h, g));
        }
    }
    None
}

/// Labels points of ground tiles `Ground` and removes them from the working
/// cloud. Everything else is labeled `Static`.
pub fn strip_ground(scan: &ScanRecord, grid: &GroundGrid) -> (ScanRecord, LabelArray) {
    let mut labels = vec![Label::Static; scan.len()];
    for (_, cell) in grid.ground_cells() {
        for &i in &cell.point_indices {
            labels[i] = Label::Ground;
        }
    }
    let kept: Vec<usize> = (0..scan.len())
        .filter(|&i| labels[i] != Label::Ground)
        .collect();
    (scan.select(&kept), labels)
}

/// Grid build, classification and stripping in one call.
pub fn remove_ground(scan: &ScanRecord, params: &GroundParams) -> (ScanRecord, LabelArray) {
    let grid = classify_cells(build_height_grid(scan, params));
    strip_ground(scan, &grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn grid_of(pts: &[[f64; 3]]) -> GroundGrid {
        let positions: Vec<Vector3<f64>> =
            pts.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect();
        build_height_grid(&ScanRecord::from_positions(&positions, 0), &GroundParams::default())
    }

    #[test]
    fn min_max_per_tile() {
        let g = grid_of(&[[0.1, 0.1, 0.0], [0.2, 0.2, 0.05]]);
        let c = &g.cells[&(0, 0)];
        assert_eq!((c.h_min, c.h_max), (0.0, 0.05));
    }

    #[test]
    fn empty_scan_empty_grid() {
        let g = grid_of(&[]);
        assert!(g.cells.is_empty());
        assert!(classify_cells(g).cells.is_empty());
    }

    #[test]
    fn floor_convention_at_tile_boundary() {
        let g = grid_of(&[[0.4, 0.0, 0.0]]);
        assert!(g.cells.contains_key(&(1, 0)));
    }

    #[test]
    fn seed_cell_rule() {
        let g = classify_cells(grid_of(&[[0.1, 0.1, 0.0], [0.2, 0.2, 0.05]]));
        assert!(g.cells[&(0, 0)].is_ground);
        assert_eq!(g.cells[&(0, 0)].ground_height, 0.05);
    }

    #[test]
    fn tall_span_is_not_ground() {
        let g = classify_cells(grid_of(&[[0.1, 0.1, 0.0], [0.2, 0.2, 0.5]]));
        assert!(!g.cells[&(0, 0)].is_ground);
        assert_eq!(g.cells[&(0, 0)].ground_height, 0.0);
    }

    #[test]
    fn curb_is_not_ground() {
        // Seed at height 0, next tile is a flat curb 0.14..0.16 high.
        let g = classify_cells(grid_of(&[
            [0.1, 0.1, 0.0],
            [0.5, 0.1, 0.14],
            [0.6, 0.2, 0.16],
        ]));
        let curb = &g.cells[&(1, 0)];
        assert!(curb.h_max - curb.h_min < 0.09);
        assert!(!curb.is_ground);
        assert_eq!(curb.propagated, 0.0);
        assert_eq!(curb.ground_height, 0.0);
    }

    #[test]
    fn ramp_propagates() {
        // Ten tiles rising 0.08 each; each tile holds a single sample.
        let pts: Vec<[f64; 3]> = (0..10)
            .map(|i| [i as f64 * 0.4 + 0.2, 0.2, i as f64 * 0.08])
            .collect();
        let g = classify_cells(grid_of(&pts));
        assert!(g.cells.values().all(|c| c.is_ground));
        // Iterating the rule by hand: ground height tracks the ramp.
        assert!((g.cells[&(9, 0)].ground_height - 0.72).abs() < 1e-12);
    }

    #[test]
    fn seed_falls_back_to_nearest_populated_tile() {
        let g = classify_cells(grid_of(&[[3.1, 0.1, -1.7], [3.5, 0.1, -1.68]]));
        assert!(g.cells.values().all(|c| c.is_ground));
    }

    #[test]
    fn gap_bridging_scales_allowance() {
        // Seed, then a tile three tiles out and 0.2 higher: within 3 * 0.09.
        let g = classify_cells(grid_of(&[[0.1, 0.1, 0.0], [1.3, 0.1, 0.2]]));
        assert!(g.cells[&(3, 0)].is_ground);
        // Same distance but 0.3 higher exceeds 0.27.
        let g = classify_cells(grid_of(&[[0.1, 0.1, 0.0], [1.3, 0.1, 0.3]]));
        assert!(!g.cells[&(3, 0)].is_ground);
    }

    #[test]
    fn islands_beyond_max_gap_stay() {
        let g = classify_cells(grid_of(&[[0.1, 0.1, 0.0], [20.1, 0.1, 0.0]]));
        let island = &g.cells[&(50, 0)];
        assert!(!island.visited && !island.is_ground);
    }

    #[test]
    fn strip_counts_match_ground_tiles() {
        let mut pts = Vec::new();
        for i in 0..30 {
            for j in 0..30 {
                let (x, y) = (i as f64 * 0.1 - 1.5, j as f64 * 0.1 - 1.5);
                let z = if (0.5..1.0).contains(&x) && (0.5..1.0).contains(&y) { 0.6 } else { 0.0 };
                pts.push([x, y, z]);
            }
        }
        let grid = classify_cells(grid_of(&pts));
        let positions: Vec<Vector3<f64>> =
            pts.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect();
        let scan = ScanRecord::from_positions(&positions, 0);
        let (kept, labels) = strip_ground(&scan, &grid);
        let expected: usize = grid.ground_cells().map(|(_, c)| c.point_indices.len()).sum();
        let removed = labels.iter().filter(|&&l| l == Label::Ground).count();
        assert_eq!(removed, expected);
        assert_eq!(kept.len(), scan.len() - expected);
        assert!(removed > 0 && removed < scan.len());
    }

    #[test]
    fn all_ground_and_no_ground_extremes() {
        let flat: Vec<[f64; 3]> = (0..10).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect();
        let positions: Vec<Vector3<f64>> =
            flat.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect();
        let scan = ScanRecord::from_positions(&positions, 0);
        let (kept, labels) = remove_ground(&scan, &GroundParams::default());
        assert!(kept.is_empty());
        assert!(labels.iter().all(|&l| l == Label::Ground));

        let grid = build_height_grid(&scan, &GroundParams::default());
        let (kept, labels) = strip_ground(&scan, &grid);
        assert_eq!(kept, scan);
        assert!(labels.iter().all(|&l| l == Label::Static));
    }
}
