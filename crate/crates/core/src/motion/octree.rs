//! Point octree whose leaves are cubes of side `resolution`.

use nalgebra::Vector3;

const EMPTY: u32 = u32::MAX;

#[derive(Clone, Debug)]
enum Node {
    Internal { children: [u32; 8] },
    Leaf { leaf: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    /// Integer cell coordinates at the finest level, relative to the root corner.
    pub coords: [i64; 3],
    /// Indices into the indexed point array.
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct OctreeIndex {
    origin: Vector3<f64>,
    resolution: f64,
    depth: u32,
    nodes: Vec<Node>,
    leaves: Vec<Leaf>,
}

impl OctreeIndex {
    /// Builds the tree over `points`. The root cube is anchored at the bounding
    /// box minimum and has side `resolution · 2^depth`, strictly larger than the
    /// largest extent, so every point falls in exactly one leaf.
    pub fn build(points: &[Vector3<f64>], resolution: f64) -> Self {
        assert!(resolution > 0.0, "octree resolution must be positive");
        let mut tree = OctreeIndex {
            origin: Vector3::zeros(),
            resolution,
            depth: 0,
            nodes: Vec::new(),
            leaves: Vec::new(),
        };
        if points.is_empty() {
            return tree;
        }
        let (lo, hi) = points.iter().fold(
            (points[0], points[0]),
            |(lo, hi), p| (lo.inf(p), hi.sup(p)),
        );
        let extent = (hi - lo).max();
        let mut depth = 0u32;
        while resolution * (1u64 << depth) as f64 <= extent {
            depth += 1;
        }
        tree.origin = lo;
        tree.depth = depth;
        let mut idx: Vec<usize> = (0..points.len()).collect();
        tree.nodes.push(Node::Leaf { leaf: EMPTY });
        tree.subdivide(0, points, &mut idx, [0, 0, 0], 0);
        tree
    }

    fn subdivide(
        &mut self,
        node: usize,
        points: &[Vector3<f64>],
        idx: &mut [usize],
        cell: [i64; 3],
        level: u32,
    ) {
        if level == self.depth {
            let leaf = self.leaves.len() as u32;
            let mut indices = idx.to_vec();
            indices.sort_unstable();
            self.leaves.push(Leaf {
                coords: cell,
                indices,
            });
            self.nodes[node] = Node::Leaf { leaf };
            return;
        }
        // Child cells at the next level are `2 * cell + bit`; the split plane
        // sits at the far edge of the lower child.
        let child_side = self.resolution * (1u64 << (self.depth - level - 1)) as f64;
        let origin = self.origin;
        let octant = |p: &Vector3<f64>| -> usize {
            let mut o = 0;
            for axis in 0..3 {
                let split = origin[axis] + (2 * cell[axis] + 1) as f64 * child_side;
                if p[axis] >= split {
                    o |= 1 << axis;
                }
            }
            o
        };
        idx.sort_by_cached_key(|&i| octant(&points[i]));
        let mut children = [EMPTY; 8];
        let mut start = 0;
        while start < idx.len() {
            let oct = octant(&points[idx[start]]);
            let mut end = start + 1;
            while end < idx.len() && octant(&points[idx[end]]) == oct {
                end += 1;
            }
            let child = self.nodes.len();
            self.nodes.push(Node::Leaf { leaf: EMPTY });
            children[oct] = child as u32;
            let child_cell = [
                2 * cell[0] + (oct & 1) as i64,
                2 * cell[1] + ((oct >> 1) & 1) as i64,
                2 * cell[2] + ((oct >> 2) & 1) as i64,
            ];
            self.subdivide(child, points, &mut idx[start..end], child_cell, level + 1);
            start = end;
        }
        self.nodes[node] = Node::Internal { children };
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Number of indexed points.
    pub fn len(&self) -> usize {
        self.leaves.iter().map(|l| l.indices.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    /// Axis-aligned bounds `(min, max)` of a leaf cell.
    pub fn leaf_bounds(&self, leaf: &Leaf) -> (Vector3<f64>, Vector3<f64>) {
        let lo = self.origin
            + Vector3::new(
                leaf.coords[0] as f64,
                leaf.coords[1] as f64,
                leaf.coords[2] as f64,
            ) * self.resolution;
        (lo, lo.add_scalar(self.resolution))
    }

    /// Descends to the leaf containing `p`, if that leaf is populated.
    pub fn leaf_of(&self, p: &Vector3<f64>) -> Option<&Leaf> {
        let mut node = self.nodes.first()?;
        let mut cell = [0i64; 3];
        let mut level = 0;
        loop {
            match node {
                Node::Leaf { leaf } => {
                    return (*leaf != EMPTY).then(|| &self.leaves[*leaf as usize]);
                }
                Node::Internal { children } => {
                    let child_side = self.resolution * (1u64 << (self.depth - level - 1)) as f64;
                    let mut oct = 0;
                    for axis in 0..3 {
                        let split = self.origin[axis] + (2 * cell[axis] + 1) as f64 * child_side;
                        let bit = (p[axis] >= split) as i64;
                        oct |= (bit as usize) << axis;
                        cell[axis] = 2 * cell[axis] + bit;
                    }
                    let c = children[oct];
                    if c == EMPTY {
                        return None;
                    }
                    node = &self.nodes[c as usize];
                    level += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn singleton() {
        let t = OctreeIndex::build(&[Vector3::new(1.0, 2.0, 3.0)], 0.3);
        assert_eq!(t.leaves().len(), 1);
        assert_eq!(t.leaves()[0].indices, vec![0]);
    }

    #[test]
    fn far_points_split() {
        let t = OctreeIndex::build(&[Vector3::zeros(), Vector3::new(10.0, 0.0, 0.0)], 0.3);
        assert_eq!(t.leaves().len(), 2);
    }

    #[test]
    fn empty() {
        let t = OctreeIndex::build(&[], 0.3);
        assert!(t.is_empty());
        assert!(t.leaf_of(&Vector3::zeros()).is_none());
    }

    #[test]
    fn unit_cube_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vector3<f64>> = (0..2000)
            .map(|_| Vector3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let t = OctreeIndex::build(&pts, 0.3);
        assert_eq!(t.len(), pts.len());
        let mut seen = vec![0u32; pts.len()];
        for leaf in t.leaves() {
            let (lo, hi) = t.leaf_bounds(leaf);
            assert!((hi - lo).max() <= 0.3 + 1e-12);
            for &i in &leaf.indices {
                seen[i] += 1;
                let p = pts[i];
                assert!((0..3).all(|a| p[a] >= lo[a] - 1e-12 && p[a] < hi[a] + 1e-12));
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        // Brute-force recount: bucket by floor((p - min) / res).
        let lo = pts.iter().fold(pts[0], |a, p| a.inf(p));
        let mut cells = std::collections::BTreeSet::new();
        for p in &pts {
            let k = (p - lo) / 0.3;
            cells.insert([k.x.floor() as i64, k.y.floor() as i64, k.z.floor() as i64]);
        }
        assert_eq!(cells.len(), t.leaves().len());
        for (i, p) in pts.iter().enumerate().take(100) {
            assert!(t.leaf_of(p).unwrap().indices.contains(&i));
        }
    }
}
