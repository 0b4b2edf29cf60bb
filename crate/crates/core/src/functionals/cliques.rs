//! Clique counting in fixed-radius neighborhood graphs.
//!
//! Cliques are enumerated in increasing vertex order by intersecting sorted
//! forward adjacency lists, so each clique is counted exactly once. Only
//! counts are kept.

use crate::spatial::{distance, SpatialIndex};

/// Forward adjacency of the closed-ball graph: `fwd[v]` holds the sorted ids
/// `w > v` with `|y_v - y_w| <= radius`.
#[derive(Debug, Clone)]
pub struct RadiusGraph {
    fwd: Vec<Vec<usize>>,
}

impl RadiusGraph {
    pub fn build(index: &SpatialIndex<'_>, radius: f64) -> Self {
        let cloud = index.cloud();
        let fwd = (0..cloud.len())
            .map(|v| {
                index
                    .within_query(cloud.point(v), radius, Some(v))
                    .into_iter()
                    .filter(|&w| w > v)
                    .collect()
            })
            .collect();
        RadiusGraph { fwd }
    }

    /// Graph on an explicit point list using pairwise distances.
    pub fn from_points(points: &[&[f64]], radius: f64) -> Self {
        let n = points.len();
        let fwd = (0..n)
            .map(|v| {
                (v + 1..n)
                    .filter(|&w| distance(points[v], points[w]) <= radius)
                    .collect()
            })
            .collect();
        RadiusGraph { fwd }
    }

    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }

    pub fn edge_count(&self) -> u64 {
        self.fwd.iter().map(|l| l.len() as u64).sum()
    }

    /// Number of cliques with `size` vertices.
    pub fn count_cliques(&self, size: usize) -> u64 {
        match size {
            0 => 1,
            1 => self.fwd.len() as u64,
            _ => (0..self.fwd.len())
                .map(|v| self.extend(&self.fwd[v], size - 1))
                .sum(),
        }
    }

    /// Number of `size`-subsets of the sorted id list `cand` that are
    /// pairwise adjacent.
    pub fn count_cliques_within(&self, cand: &[usize], size: usize) -> u64 {
        self.extend(cand, size)
    }

    fn extend(&self, cand: &[usize], size: usize) -> u64 {
        if size == 0 {
            return 1;
        }
        if cand.len() < size {
            return 0;
        }
        if size == 1 {
            return cand.len() as u64;
        }
        let mut total = 0;
        let mut next = Vec::new();
        for (idx, &v) in cand.iter().enumerate() {
            let rest = &cand[idx + 1..];
            if rest.len() < size - 1 {
                break;
            }
            intersect_sorted(rest, &self.fwd[v], &mut next);
            if size == 2 {
                total += next.len() as u64;
            } else if next.len() >= size - 1 {
                total += self.extend(&next, size - 1);
            }
        }
        total
    }
}

fn intersect_sorted(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

/// Number of cliques with `size` vertices among `points`, all pairwise
/// within `radius`.
pub fn count_cliques_among(points: &[&[f64]], radius: f64, size: usize) -> u64 {
    RadiusGraph::from_points(points, radius).count_cliques(size)
}
