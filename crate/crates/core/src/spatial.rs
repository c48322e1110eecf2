//! Uniform hash grid over 3D points for fixed-radius queries.

use nalgebra::Vector3;
use rustc_hash::FxHashMap;

type CellKey = [i64; 3];

/// Points bucketed into cubic cells. Bucket contents are stored contiguously
/// (indices and a copy of the positions) in cell order.
#[derive(Clone, Debug)]
pub struct VoxelGrid {
    cell: f64,
    points: Vec<Vector3<f64>>,
    order: Vec<u32>,
    sorted: Vec<Vector3<f64>>,
    buckets: FxHashMap<CellKey, (u32, u32)>,
}

impl VoxelGrid {
    /// `cell` must be positive.
    pub fn new(points: Vec<Vector3<f64>>, cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let mut keyed: Vec<(CellKey, u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (key_of(p, cell), i as u32))
            .collect();
        keyed.sort_unstable();
        let mut buckets = FxHashMap::default();
        let mut start = 0usize;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start + 1;
            while end < keyed.len() && keyed[end].0 == key {
                end += 1;
            }
            buckets.insert(key, (start as u32, end as u32));
            start = end;
        }
        let order: Vec<u32> = keyed.into_iter().map(|(_, i)| i).collect();
        let sorted = order.iter().map(|&i| points[i as usize]).collect();
        VoxelGrid {
            cell,
            points,
            order,
            sorted,
            buckets,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Visits every point whose cell intersects the axis-aligned box of
    /// half-side `reach` around `q`. No distance filtering.
    #[inline]
    pub fn for_each_candidate(&self, q: &Vector3<f64>, reach: f64, mut f: impl FnMut(usize)) {
        let lo = key_of(&q.add_scalar(-reach), self.cell);
        let hi = key_of(&q.add_scalar(reach), self.cell);
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    if let Some(&(s, e)) = self.buckets.get(&[x, y, z]) {
                        for &i in &self.order[s as usize..e as usize] {
                            f(i as usize);
                        }
                    }
                }
            }
        }
    }

    /// Visits points with `|p - q| <= radius`, passing index and squared distance.
    #[inline]
    pub fn for_each_within(&self, q: &Vector3<f64>, radius: f64, mut f: impl FnMut(usize, f64)) {
        let r2 = radius * radius;
        let lo = key_of(&q.add_scalar(-radius), self.cell);
        let hi = key_of(&q.add_scalar(radius), self.cell);
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    if let Some(&(s, e)) = self.buckets.get(&[x, y, z]) {
                        let (s, e) = (s as usize, e as usize);
                        for (p, &i) in self.sorted[s..e].iter().zip(&self.order[s..e]) {
                            let d2 = (p - q).norm_squared();
                            if d2 <= r2 {
                                f(i as usize, d2);
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn any_within(&self, q: &Vector3<f64>, radius: f64) -> bool {
        let r2 = radius * radius;
        let lo = key_of(&q.add_scalar(-radius), self.cell);
        let hi = key_of(&q.add_scalar(radius), self.cell);
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    if let Some(&(s, e)) = self.buckets.get(&[x, y, z]) {
                        let hit = self.order[s as usize..e as usize]
                            .iter()
                            .any(|&i| (self.points[i as usize] - q).norm_squared() <= r2);
                        if hit {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    /// Closest point within `radius`; ties go to the lower index.
    pub fn nearest_within(&self, q: &Vector3<f64>, radius: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        self.for_each_within(q, radius, |i, d2| match best {
            Some((bi, bd)) if bd < d2 || (bd == d2 && bi < i) => {}
            _ => best = Some((i, d2)),
        });
        best.map(|(i, d2)| (i, d2.sqrt()))
    }
}

#[inline]
fn key_of(p: &Vector3<f64>, cell: f64) -> CellKey {
    [
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    ]
}
