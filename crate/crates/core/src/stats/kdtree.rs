//! Exact nearest-neighbour search over a static point set.

use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;

/// Squared Euclidean distance, summed in axis order. Both the tree and any
/// brute-force comparison must use this so results agree bit for bit.
#[inline]
pub fn squared_distance<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for k in 0..D {
        let d = a[k] - b[k];
        s += d * d;
    }
    s
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// A k-d tree over borrowed points.
pub struct KdTree<'a, const D: usize> {
    points: &'a [[f64; D]],
    order: Vec<usize>,
    root: Node,
}

impl<'a, const D: usize> KdTree<'a, D> {
    pub fn new(points: &'a [[f64; D]]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = build(points, &mut order, 0, 0);
        Self { points, order, root }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the closest point to `query`, skipping
    /// index `exclude`. Ties go to the lower index.
    pub fn nearest(&self, query: &[f64; D], exclude: Option<usize>) -> Option<(usize, f64)> {
        let mut best = None;
        self.search(&self.root, query, exclude, &mut best);
        best
    }

    fn search(&self, node: &Node, q: &[f64; D], exclude: Option<usize>, best: &mut Option<(usize, f64)>) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let d = squared_distance(q, &self.points[i]);
                    let better = match *best {
                        None => true,
                        Some((bi, bd)) => d < bd || (d == bd && i < bi),
                    };
                    if better {
                        *best = Some((i, d));
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, exclude, best);
                // <= keeps equidistant candidates on the far side reachable
                if best.is_none_or(|(_, bd)| diff * diff <= bd) {
                    self.search(far, q, exclude, best);
                }
            }
        }
    }
}

fn build<const D: usize>(points: &[[f64; D]], order: &mut [usize], offset: usize, depth: usize) -> Node {
    let n = order.len();
    if n <= LEAF_SIZE {
        return Node::Leaf {
            start: offset,
            end: offset + n,
        };
    }
    // split on the axis of largest spread
    let axis = (0..D)
        .max_by(|&a, &b| {
            let spread = |k: usize| {
                let (lo, hi) = order.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(points[i][k]), hi.max(points[i][k]))
                });
                hi - lo
            };
            spread(a).total_cmp(&spread(b))
        })
        .unwrap_or(depth % D);
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[order[mid]][axis];
    let (l, r) = order.split_at_mut(mid);
    Node::Split {
        axis,
        value,
        left: Box::new(build(points, l, offset, depth + 1)),
        right: Box::new(build(points, r, offset + mid, depth + 1)),
    }
}

/// Distance from every point to its closest other point.
pub fn nearest_neighbor_distances<const D: usize>(points: &[[f64; D]]) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let tree = KdTree::new(points);
    Ok(points
        .par_iter()
        .enumerate()
        .map(|(i, p)| tree.nearest(p, Some(i)).map_or(f64::NAN, |(_, d)| d.sqrt()))
        .collect())
}

/// Nearest-neighbour distances using only the lateral (x, y) coordinates.
pub fn lateral_nearest_neighbor_distances(points: &[[f64; 3]]) -> Result<Vec<f64>> {
    let flat: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    nearest_neighbor_distances(&flat)
}
