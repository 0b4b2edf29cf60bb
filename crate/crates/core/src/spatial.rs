//! Exact k-nearest-neighbor and fixed-radius queries.
//!
//! The accelerated mode is a k-d tree with per-node bounding boxes. Answers
//! are exact: both modes compute distances with [`distance`] and prune only
//! when a box lower bound strictly exceeds the current bound, so they return
//! bit-identical results. Ties are not broken; repeated distances are
//! reported as they are.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

const LEAF_SIZE: usize = 12;

/// Euclidean distance. Every query path goes through this function so that
/// accelerated and brute-force answers agree to the bit.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        s += t * t;
    }
    s
}

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    // child node ids; `usize::MAX` for leaves
    left: usize,
    right: usize,
}

/// k-d tree over a point cloud. Leaves hold contiguous copies of their
/// points so scans stay cache friendly.
#[derive(Debug, Clone)]
struct KdTree {
    dim: usize,
    nodes: Vec<Node>,
    // bounding boxes, 2 * dim values per node: lo then hi
    boxes: Vec<f64>,
    order: Vec<usize>,
    coords: Vec<f64>,
}

impl KdTree {
    fn build(cloud: &PointCloud) -> Self {
        let dim = cloud.ambient_dim();
        let n = cloud.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut tree = KdTree {
            dim,
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
            boxes: Vec::new(),
            order: Vec::new(),
            coords: Vec::new(),
        };
        if n > 0 {
            tree.build_node(cloud, &mut order, 0, n);
        }
        tree.coords = Vec::with_capacity(n * dim);
        for &i in &order {
            tree.coords.extend_from_slice(cloud.point(i));
        }
        tree.order = order;
        tree
    }

    fn build_node(&mut self, cloud: &PointCloud, order: &mut [usize], start: usize, end: usize) -> usize {
        let dim = self.dim;
        let id = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            left: usize::MAX,
            right: usize::MAX,
        });
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in &order[start..end] {
            for (j, &v) in cloud.point(i).iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        self.boxes.extend_from_slice(&lo);
        self.boxes.extend_from_slice(&hi);
        if end - start <= LEAF_SIZE {
            return id;
        }
        let split_dim = (0..dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[split_dim] <= lo[split_dim] {
            // all points coincide
            return id;
        }
        let mid = start + (end - start) / 2;
        order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            cloud.point(a)[split_dim].total_cmp(&cloud.point(b)[split_dim])
        });
        let left = self.build_node(cloud, order, start, mid);
        let right = self.build_node(cloud, order, mid, end);
        self.nodes[id].left = left;
        self.nodes[id].right = right;
        id
    }

    #[inline]
    fn box_lower_bound(&self, node: usize, q: &[f64]) -> f64 {
        let base = node * 2 * self.dim;
        let lo = &self.boxes[base..base + self.dim];
        let hi = &self.boxes[base + self.dim..base + 2 * self.dim];
        let mut s = 0.0;
        for j in 0..self.dim {
            let c = q[j].clamp(lo[j], hi[j]);
            let t = q[j] - c;
            s += t * t;
        }
        s
    }

    #[inline]
    fn leaf_point(&self, slot: usize) -> &[f64] {
        &self.coords[slot * self.dim..(slot + 1) * self.dim]
    }

    fn knn(&self, q: &[f64], exclude: Option<usize>, heap: &mut Candidates) {
        if self.nodes.is_empty() {
            return;
        }
        self.knn_node(0, q, exclude, heap);
    }

    fn knn_node(&self, node: usize, q: &[f64], exclude: Option<usize>, heap: &mut Candidates) {
        let nd = &self.nodes[node];
        if nd.left == usize::MAX {
            for slot in nd.start..nd.end {
                let id = self.order[slot];
                if Some(id) == exclude {
                    continue;
                }
                heap.offer(squared_distance(q, self.leaf_point(slot)), id);
            }
            return;
        }
        let dl = self.box_lower_bound(nd.left, q);
        let dr = self.box_lower_bound(nd.right, q);
        let (first, df, second, ds) = if dl <= dr {
            (nd.left, dl, nd.right, dr)
        } else {
            (nd.right, dr, nd.left, dl)
        };
        if df <= heap.bound() {
            self.knn_node(first, q, exclude, heap);
        }
        if ds <= heap.bound() {
            self.knn_node(second, q, exclude, heap);
        }
    }

    fn within(&self, q: &[f64], r: f64, exclude: Option<usize>, out: &mut Vec<usize>) {
        if self.nodes.is_empty() {
            return;
        }
        // pruning only; membership is decided by `distance(..) <= r`
        let prune = r * r * (1.0 + 1e-12) + f64::MIN_POSITIVE;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            if self.box_lower_bound(node, q) > prune {
                continue;
            }
            let nd = &self.nodes[node];
            if nd.left == usize::MAX {
                for slot in nd.start..nd.end {
                    let id = self.order[slot];
                    if Some(id) != exclude && distance(q, self.leaf_point(slot)) <= r {
                        out.push(id);
                    }
                }
            } else {
                stack.push(nd.left);
                stack.push(nd.right);
            }
        }
    }
}

/// Bounded sorted candidate list for k-NN search, keyed by squared distance.
#[derive(Debug)]
struct Candidates {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Candidates {
    fn new(k: usize) -> Self {
        Candidates {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    fn bound(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].0
        }
    }

    #[inline]
    fn offer(&mut self, d2: f64, id: usize) {
        if self.k == 0 || d2 >= self.bound() && self.items.len() >= self.k {
            return;
        }
        let pos = self.items.partition_point(|&(v, _)| v <= d2);
        self.items.insert(pos, (d2, id));
        self.items.truncate(self.k);
    }
}

/// Query structure over an immutable point cloud.
#[derive(Debug, Clone)]
pub struct SpatialIndex<'a> {
    cloud: &'a PointCloud,
    tree: Option<KdTree>,
}

impl<'a> SpatialIndex<'a> {
    /// Builds the accelerated (k-d tree) index.
    pub fn build(cloud: &'a PointCloud) -> Self {
        SpatialIndex {
            cloud,
            tree: Some(KdTree::build(cloud)),
        }
    }

    /// Oracle mode: every query scans all points.
    pub fn brute_force(cloud: &'a PointCloud) -> Self {
        SpatialIndex { cloud, tree: None }
    }

    pub fn is_brute_force(&self) -> bool {
        self.tree.is_none()
    }

    pub fn cloud(&self) -> &'a PointCloud {
        self.cloud
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    fn check_id(&self, i: usize) -> Result<()> {
        if i < self.cloud.len() {
            Ok(())
        } else {
            Err(Error::InvalidPointId {
                id: i,
                len: self.cloud.len(),
            })
        }
    }

    /// Distances `N_1 <= ... <= N_k` from point `i` to the rest of the
    /// cloud. Missing neighbors are `+inf`.
    pub fn knn_distances(&self, i: usize, k: usize) -> Result<Vec<f64>> {
        self.check_id(i)?;
        let mut out = Vec::with_capacity(k);
        self.knn_distances_into(self.cloud.point(i), k, Some(i), &mut out);
        Ok(out)
    }

    /// k-NN distances from an arbitrary location, optionally skipping one id.
    /// `out` is cleared and filled with exactly `k` values.
    pub fn knn_distances_into(&self, q: &[f64], k: usize, exclude: Option<usize>, out: &mut Vec<f64>) {
        out.clear();
        for (d, _) in self.knn_query(q, k, exclude) {
            out.push(d);
        }
        out.resize(k, f64::INFINITY);
    }

    /// Up to `k` nearest `(distance, id)` pairs in nondecreasing distance order.
    pub fn knn_query(&self, q: &[f64], k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        let mut heap = Candidates::new(k);
        match &self.tree {
            Some(tree) => tree.knn(q, exclude, &mut heap),
            None => {
                for (id, p) in self.cloud.iter().enumerate() {
                    if Some(id) != exclude {
                        heap.offer(squared_distance(q, p), id);
                    }
                }
            }
        }
        heap.items.into_iter().map(|(d2, id)| (d2.sqrt(), id)).collect()
    }

    /// Ids `j != i` with `|y_j - y_i| <= r`, sorted ascending.
    pub fn neighbors_within(&self, i: usize, r: f64) -> Result<Vec<usize>> {
        self.check_id(i)?;
        if !(r >= 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be >= 0, got {r}")));
        }
        Ok(self.within_query(self.cloud.point(i), r, Some(i)))
    }

    /// Ids within the closed ball of radius `r` around `q`, sorted ascending.
    pub fn within_query(&self, q: &[f64], r: f64, exclude: Option<usize>) -> Vec<usize> {
        let mut out = Vec::new();
        match &self.tree {
            Some(tree) => tree.within(q, r, exclude, &mut out),
            None => {
                for (id, p) in self.cloud.iter().enumerate() {
                    if Some(id) != exclude && distance(q, p) <= r {
                        out.push(id);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}
