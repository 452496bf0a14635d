//! Cloud-to-cloud accuracy, completeness and F-score, plus the depth-map
//! error ratio.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::PointCloud;
use crate::raster::DepthMap;

pub const DEFAULT_MAX_DIST: f64 = 20.0;

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Static 3-d tree over a borrowed point set. Queries return the nearest point
/// with ties broken by smallest index, so results equal a linear scan exactly.
pub struct KdTree<'a> {
    points: &'a [[f64; 3]],
    /// Point indices, permuted so that every node's points are contiguous.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

const LEAF_SIZE: usize = 8;

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [[f64; 3]]) -> Self {
        let mut tree = Self {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split along the widest axis at the median
        let slice = &self.order[start..end];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in slice {
            for k in 0..3 {
                lo[k] = lo[k].min(self.points[i][k]);
                hi[k] = hi[k].max(self.points[i][k]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let mid = (end - start) / 2;
        let points = self.points;
        self.order[start..end]
            .select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let value = points[self.order[start + mid]][axis];
        self.nodes.push(Node::Leaf { start, end }); // placeholder
        let left = self.build_node(start, start + mid);
        let right = self.build_node(start + mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Index and squared distance of the nearest point; `None` for an empty tree.
    pub fn nearest(&self, query: &[f64; 3]) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, query, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &[f64; 3], best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist2(q, &self.points[i]);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // equality must still be explored: a tie with a smaller index may sit there
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Distance from every query point to its nearest target point.
pub fn nearest_distances(queries: &[[f64; 3]], targets: &[[f64; 3]]) -> Vec<f64> {
    let tree = KdTree::build(targets);
    queries
        .par_iter()
        .map(|q| tree.nearest(q).map_or(f64::INFINITY, |(_, d2)| d2.sqrt()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudMetrics {
    /// Mean reconstruction-to-reference distance over distances ≤ max_dist.
    pub accuracy: f64,
    /// Mean reference-to-reconstruction distance over distances ≤ max_dist.
    pub completeness: f64,
    pub overall: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub threshold: f64,
    pub max_dist: f64,
}

/// Mean of the distances not exceeding `max_dist`; `max_dist` when all exceed it.
fn capped_mean(distances: &[f64], max_dist: f64) -> f64 {
    let (sum, n) = distances
        .iter()
        .filter(|&&d| d <= max_dist)
        .fold((0.0, 0usize), |(s, n), &d| (s + d, n + 1));
    if n == 0 {
        max_dist
    } else {
        sum / n as f64
    }
}

fn fraction_below(distances: &[f64], threshold: f64) -> f64 {
    distances.iter().filter(|&&d| d < threshold).count() as f64 / distances.len() as f64
}

/// Metrics from precomputed nearest-neighbor distances in both directions.
pub fn metrics_from_distances(
    recon_to_gt: &[f64],
    gt_to_recon: &[f64],
    max_dist: f64,
    threshold: f64,
) -> CloudMetrics {
    let accuracy = capped_mean(recon_to_gt, max_dist);
    let completeness = capped_mean(gt_to_recon, max_dist);
    let precision = fraction_below(recon_to_gt, threshold);
    let recall = fraction_below(gt_to_recon, threshold);
    let fscore = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    CloudMetrics {
        accuracy,
        completeness,
        overall: (accuracy + completeness) / 2.0,
        precision,
        recall,
        fscore,
        threshold,
        max_dist,
    }
}

pub fn cloud_distance_metrics(
    reconstructed: &PointCloud,
    ground_truth: &PointCloud,
    max_dist: f64,
    fscore_threshold: f64,
) -> Result<CloudMetrics> {
    if reconstructed.is_empty() {
        return Err(Error::EmptyCloud("reconstructed cloud".into()));
    }
    if ground_truth.is_empty() {
        return Err(Error::EmptyCloud("ground-truth cloud".into()));
    }
    if !(max_dist > 0.0 && fscore_threshold > 0.0) {
        return Err(Error::InvalidArgument(
            "max_dist and threshold must be positive".into(),
        ));
    }
    let r2g = nearest_distances(&reconstructed.points, &ground_truth.points);
    let g2r = nearest_distances(&ground_truth.points, &reconstructed.points);
    Ok(metrics_from_distances(&r2g, &g2r, max_dist, fscore_threshold))
}

/// Fraction of mutually valid pixels with |pred − gt| < threshold.
pub fn depth_error_ratio(pred: &DepthMap, gt: &DepthMap, threshold: f64) -> Result<f64> {
    if pred.dims() != gt.dims() {
        return Err(Error::DimensionMismatch {
            expected: gt.dims(),
            actual: pred.dims(),
        });
    }
    let (w, h) = gt.dims();
    let (mut hits, mut total) = (0usize, 0usize);
    for y in 0..h {
        for x in 0..w {
            if let (Some(p), Some(g)) = (pred.get(x, y), gt.get(x, y)) {
                total += 1;
                if ((p as f64) - (g as f64)).abs() < threshold {
                    hits += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::NoValidPixels("no mutually valid pixels".into()));
    }
    Ok(hits as f64 / total as f64)
}

impl CloudMetrics {
    /// `key=value` lines in a fixed order.
    pub fn to_key_value(&self) -> String {
        format!(
            "accuracy={}\ncompleteness={}\noverall={}\nprecision={}\nrecall={}\nfscore={}\nthreshold={}\nmax_dist={}\n",
            self.accuracy,
            self.completeness,
            self.overall,
            self.precision,
            self.recall,
            self.fscore,
            self.threshold,
            self.max_dist
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}
