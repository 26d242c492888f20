//! Exact KD-tree over fixed-length descriptors.
//!
//! Nearest-neighbour answers are ordered by `(squared distance, tie key)`,
//! with the squared distance accumulated in the same order as
//! [`squared_distance`], so the tree reproduces an exhaustive scan exactly,
//! ties included. Candidates can be filtered by a predicate during search.

use std::cmp::Ordering;

use crate::descriptor::squared_distance;
use crate::scalar::Scalar;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: T,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree<T> {
    dims: usize,
    points: Vec<T>,
    /// Caller-supplied tie-break key per point, smaller wins.
    keys: Vec<u64>,
    /// Leaf ranges index into this permutation of point ids.
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

/// Best candidate found so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest<T> {
    pub index: usize,
    pub squared_distance: T,
}

fn better<T: Scalar>(d2: T, key: u64, best: Option<(T, u64)>) -> bool {
    match best {
        None => true,
        Some((bd, bk)) => match d2.partial_cmp(&bd) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) => key < bk,
            _ => false,
        },
    }
}

impl<T: Scalar> KdTree<T> {
    /// Builds a tree over `points` (each of length `dims`). `keys[i]` breaks
    /// distance ties between points, smaller first. Point values must be finite.
    pub fn build(dims: usize, points: Vec<T>, keys: Vec<u64>) -> Self {
        assert!(dims > 0 || points.is_empty());
        let n = points.len().checked_div(dims).unwrap_or(0);
        assert_eq!(n * dims, points.len());
        assert_eq!(keys.len(), n);
        let mut tree = Self {
            dims,
            points,
            keys,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build_node(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn point(&self, index: usize) -> &[T] {
        &self.points[index * self.dims..(index + 1) * self.dims]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }

        // split on the dimension with the widest spread
        let dim = (0..self.dims)
            .map(|d| {
                let (lo, hi) = self.order[start..end].iter().fold(
                    (T::infinity(), T::neg_infinity()),
                    |(lo, hi), &i| {
                        let v = self.points[i * self.dims + d];
                        (lo.min(v), hi.max(v))
                    },
                );
                (d, hi - lo)
            })
            .fold((0, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0;

        let mid = start + (end - start) / 2;
        let points = &self.points;
        let dims = self.dims;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * dims + dim]
                .partial_cmp(&points[b * dims + dim])
                .unwrap_or(Ordering::Equal)
        });
        let value = self.points[self.order[mid] * dims + dim];

        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    /// Nearest point to `query` among those accepted by `eligible`.
    pub fn nearest_where(
        &self,
        query: &[T],
        eligible: impl Fn(usize) -> bool,
    ) -> Option<Nearest<T>> {
        assert_eq!(query.len(), self.dims);
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(T, u64, usize)> = None;
        self.search(0, query, &eligible, &mut best);
        best.map(|(d2, _, index)| Nearest {
            index,
            squared_distance: d2,
        })
    }

    fn search(
        &self,
        node: usize,
        query: &[T],
        eligible: &impl Fn(usize) -> bool,
        best: &mut Option<(T, u64, usize)>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if !eligible(i) {
                        continue;
                    }
                    let d2 = squared_distance(query, self.point(i));
                    if better(d2, self.keys[i], best.map(|(d, k, _)| (d, k))) {
                        *best = Some((d2, self.keys[i], i));
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = query[dim] - value;
                let (near, far) = if diff < T::zero() {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, query, eligible, best);
                // Points across the plane are at least diff² away; equal bounds
                // may still hide a tie with a smaller key.
                let bound = diff * diff;
                if best.is_none_or(|(d2, _, _)| bound <= d2) {
                    self.search(far, query, eligible, best);
                }
            }
        }
    }
}
