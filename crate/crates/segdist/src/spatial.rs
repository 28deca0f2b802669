//! Exact nearest-neighbor search over per-class ground-truth points.
//!
//! One kd-tree per class rather than one global tree with label filtering:
//! every query is class-conditioned, and separate trees keep query cost
//! independent of the other classes' density. Distances are squared until
//! the public boundary, where a single square root converts to meters.
//! Queries are exact; only the distance value is consumed, so neighbor
//! ties need no tie-breaking.

use rayon::prelude::*;

use crate::error::ValidationError;
use crate::model::{ClassId, ClassPartition, LabeledCloud, Position};

const BUCKET_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Split { dim: u8, value: f64, right: u32 },
    Leaf { start: u32, len: u32 },
}

/// Static kd-tree over a copied set of 3D points.
#[derive(Debug, Clone)]
pub struct KdTree {
    nodes: Vec<Node>,
    points: Vec<Position>,
}

#[inline]
fn dist2(a: &Position, b: &Position) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    /// Builds a tree over `points`. The slice is copied; empty input is
    /// the caller's problem (see [`ClassIndexSet`] which marks empty
    /// classes instead of building trees for them).
    pub fn build(mut points: Vec<Position>) -> Self {
        assert!(!points.is_empty(), "KdTree::build on empty point set");
        let mut nodes = Vec::with_capacity(2 * points.len() / BUCKET_SIZE + 1);
        build_recursive(&mut nodes, &mut points, 0);
        Self { nodes, points }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exact minimum squared distance from `query` to any indexed point.
    pub fn nearest_dist2(&self, query: &Position) -> f64 {
        let mut best = f64::INFINITY;
        self.search(0, query, &mut best);
        best
    }

    fn search(&self, node: usize, query: &Position, best: &mut f64) {
        match self.nodes[node] {
            Node::Leaf { start, len } => {
                for p in &self.points[start as usize..(start + len) as usize] {
                    let d2 = dist2(p, query);
                    if d2 < *best {
                        *best = d2;
                    }
                }
            }
            Node::Split { dim, value, right } => {
                let delta = query[dim as usize] - value;
                let (near, far) = if delta < 0.0 {
                    (node + 1, right as usize)
                } else {
                    (right as usize, node + 1)
                };
                self.search(near, query, best);
                // Every point on the far side is at least |delta| away
                // along the split axis, so the subtree can be skipped
                // without giving up exactness.
                if delta * delta < *best {
                    self.search(far, query, best);
                }
            }
        }
    }
}

/// Recursively splits `points[..]`; `offset` is the slice's start in the
/// final reordered point array.
fn build_recursive(nodes: &mut Vec<Node>, points: &mut [Position], offset: u32) {
    if points.len() <= BUCKET_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            len: points.len() as u32,
        });
        return;
    }

    // Split the widest axis at the median. After select_nth_unstable the
    // left half holds coordinates <= value and the right half >= value,
    // which is exactly the invariant the pruning test relies on.
    let dim = widest_dimension(points);
    let mid = points.len() / 2;
    points.select_nth_unstable_by(mid, |a, b| {
        a[dim].partial_cmp(&b[dim]).expect("finite coordinates")
    });
    let value = points[mid][dim];

    let pos = nodes.len();
    nodes.push(Node::Split {
        dim: dim as u8,
        value,
        right: 0,
    });
    let (left, right) = points.split_at_mut(mid);
    build_recursive(nodes, left, offset);
    let right_index = nodes.len() as u32;
    build_recursive(nodes, right, offset + mid as u32);
    if let Node::Split { right: r, .. } = &mut nodes[pos] {
        *r = right_index;
    }
}

fn widest_dimension(points: &[Position]) -> usize {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let spans = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let mut dim = 0;
    for d in 1..3 {
        if spans[d] > spans[dim] {
            dim = d;
        }
    }
    dim
}

/// One nearest-neighbor index per declared class, built over the full
/// cloud's ground truth. Classes with no ground-truth points carry an
/// empty marker; queries against them report [`f64::INFINITY`].
#[derive(Debug)]
pub struct ClassIndexSet {
    trees: Vec<Option<KdTree>>,
    cloud_len: usize,
}

/// Builds the per-class indexes. Construction parallelizes across classes;
/// the resulting set is immutable and safe for concurrent queries.
pub fn build_class_indexes(cloud: &LabeledCloud, partition: &ClassPartition) -> ClassIndexSet {
    let positions = cloud.positions();
    let trees = (0..partition.n_classes())
        .into_par_iter()
        .map(|c| {
            let indices = partition.indices(ClassId(c as u16));
            if indices.is_empty() {
                None
            } else {
                let pts: Vec<Position> =
                    indices.iter().map(|&i| positions[i as usize]).collect();
                Some(KdTree::build(pts))
            }
        })
        .collect();
    ClassIndexSet {
        trees,
        cloud_len: cloud.len(),
    }
}

impl ClassIndexSet {
    #[inline]
    pub fn n_classes(&self) -> usize {
        self.trees.len()
    }

    /// Number of ground-truth points indexed for `class`.
    pub fn class_size(&self, class: ClassId) -> usize {
        self.trees[class.index()].as_ref().map_or(0, KdTree::len)
    }

    /// Size of the cloud these indexes were built from. Scoped evaluation
    /// checks this to enforce that distance queries always reference the
    /// full scene.
    #[inline]
    pub fn cloud_len(&self) -> usize {
        self.cloud_len
    }

    /// Exact distance in meters from `query` to the nearest ground-truth
    /// point of `class`; `f64::INFINITY` iff that class has no points.
    pub fn nearest_distance(
        &self,
        class: ClassId,
        query: &Position,
    ) -> Result<f64, ValidationError> {
        let tree = self
            .trees
            .get(class.index())
            .ok_or(ValidationError::UnknownClass {
                label: class.0 as u32,
                index: 0,
                n_classes: self.trees.len(),
            })?;
        Ok(match tree {
            Some(t) => t.nearest_dist2(query).sqrt(),
            None => f64::INFINITY,
        })
    }
}

/// Linear-scan exact nearest distance; the verification oracle for the
/// kd-tree path. `f64::INFINITY` on an empty point list.
pub fn brute_force_nearest(points: &[Position], query: &Position) -> f64 {
    let mut best = f64::INFINITY;
    for p in points {
        let d2 = dist2(p, query);
        if d2 < best {
            best = d2;
        }
    }
    best.sqrt()
}
