//! Capacity-bounded K-means over user positions and UAV association.
//!
//! Plain Lloyd iterations run first; clusters that overflow the capacity
//! then shed points one at a time to the nearest cluster with room.

use crate::error::{Error, Result};
use rand::Rng;

pub type Point = [f64; 2];

const MAX_LLOYD_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// `labels[k]` is the cluster (after association: the UAV) serving user `k`.
    pub labels: Vec<usize>,
    pub centroids: Vec<Point>,
    /// Slot at which the assignment was computed.
    pub epoch: usize,
    /// Within-cluster sum of squared distances after each Lloyd iteration,
    /// before rebalancing.
    pub lloyd_objective: Vec<f64>,
}

impl ClusterAssignment {
    pub fn clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == cluster)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.clusters()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Serving indicator `v_{u,k}`.
    pub fn serves(&self, cluster: usize, user: usize) -> bool {
        self.labels[user] == cluster
    }
}

fn dist2(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Index of the nearest centroid among `allowed`, ties to the lowest index.
fn nearest(p: &Point, centroids: &[Point], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (c, centroid) in centroids.iter().enumerate() {
        if !allowed(c) {
            continue;
        }
        let d = dist2(p, centroid);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((c, d));
        }
    }
    best.map(|(c, _)| c)
}

/// Sum of squared distances from each point to the mean of its cluster.
pub fn sse(points: &[Point], labels: &[usize], clusters: usize) -> f64 {
    let centroids = centroids_of(points, labels, &vec![[0.0, 0.0]; clusters]);
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| dist2(p, &centroids[l]))
        .sum()
}

/// Cluster means; empty clusters keep their previous centroid.
fn centroids_of(points: &[Point], labels: &[usize], previous: &[Point]) -> Vec<Point> {
    let mut sums = vec![[0.0, 0.0]; previous.len()];
    let mut counts = vec![0usize; previous.len()];
    for (p, &l) in points.iter().zip(labels) {
        sums[l][0] += p[0];
        sums[l][1] += p[1];
        counts[l] += 1;
    }
    sums.iter()
        .zip(&counts)
        .zip(previous)
        .map(|((s, &n), prev)| {
            if n == 0 {
                *prev
            } else {
                [s[0] / n as f64, s[1] / n as f64]
            }
        })
        .collect()
}

/// Greedy max-min seeding: a random first centre, then repeatedly the point
/// farthest from all chosen centres (ties to the lowest index).
fn farthest_point_seeds<R: Rng + ?Sized>(points: &[Point], k: usize, rng: &mut R) -> Vec<Point> {
    let mut seeds = vec![points[rng.random_range(0..points.len())]];
    let mut min_d: Vec<f64> = points.iter().map(|p| dist2(p, &seeds[0])).collect();
    while seeds.len() < k {
        let mut pick = 0;
        for (i, &d) in min_d.iter().enumerate() {
            if d > min_d[pick] {
                pick = i;
            }
        }
        let next = points[pick];
        for (d, p) in min_d.iter_mut().zip(points) {
            *d = d.min(dist2(p, &next));
        }
        seeds.push(next);
    }
    seeds
}

fn lloyd(points: &[Point], mut centroids: Vec<Point>) -> (Vec<usize>, Vec<Point>, Vec<f64>) {
    let mut labels: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let next: Vec<usize> = points
            .iter()
            .map(|p| nearest(p, &centroids, |_| true).expect("at least one centroid"))
            .collect();
        let changed = next != labels;
        labels = next;
        centroids = centroids_of(points, &labels, &centroids);
        history.push(
            points
                .iter()
                .zip(&labels)
                .map(|(p, &l)| dist2(p, &centroids[l]))
                .sum(),
        );
        if !changed {
            break;
        }
    }
    (labels, centroids, history)
}

/// Moves points out of overflowing clusters until every cluster holds at
/// most `cap`. The point that gives up the least (own-centroid distance
/// minus distance to the nearest non-full centroid, largest first) leaves.
fn rebalance(points: &[Point], labels: &mut [usize], centroids: &[Point], cap: usize) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    while let Some(over) = (0..k).find(|&c| sizes[c] > cap) {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if labels[i] != over {
                continue;
            }
            let target = nearest(p, centroids, |c| c != over && sizes[c] < cap)
                .expect("feasibility checked by caller");
            let gap = dist2(p, &centroids[over]).sqrt() - dist2(p, &centroids[target]).sqrt();
            if best.is_none_or(|(_, _, g)| gap > g) {
                best = Some((i, target, gap));
            }
        }
        let (i, target, _) = best.expect("overflowing cluster is non-empty");
        labels[i] = target;
        sizes[over] -= 1;
        sizes[target] += 1;
    }
}

/// First-improvement local search over single moves into non-full clusters
/// and pairwise swaps, on exact SSE, until no step lowers it.
fn refine(points: &[Point], labels: &mut [usize], clusters: usize, cap: usize) {
    let mut sizes = vec![0usize; clusters];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let mut best = sse(points, labels, clusters);
    let tol = 1e-9 * best.max(1.0);
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..points.len() {
            for c in 0..clusters {
                let from = labels[i];
                if c == from || sizes[c] >= cap {
                    continue;
                }
                labels[i] = c;
                let trial = sse(points, labels, clusters);
                if trial < best - tol {
                    best = trial;
                    sizes[from] -= 1;
                    sizes[c] += 1;
                    improved = true;
                } else {
                    labels[i] = from;
                }
            }
            for j in i + 1..points.len() {
                if labels[i] == labels[j] {
                    continue;
                }
                labels.swap(i, j);
                let trial = sse(points, labels, clusters);
                if trial < best - tol {
                    best = trial;
                    improved = true;
                } else {
                    labels.swap(i, j);
                }
            }
        }
    }
}

/// Capacity-bounded K-means.
///
/// Fails when `clusters * cap` cannot hold every point.
pub fn kmeans_capped<R: Rng + ?Sized>(
    points: &[Point],
    clusters: usize,
    cap: usize,
    rng: &mut R,
) -> Result<ClusterAssignment> {
    if clusters == 0 || clusters.saturating_mul(cap) < points.len() {
        return Err(Error::ClusteringInfeasible {
            users: points.len(),
            clusters,
            cap,
        });
    }
    if points.is_empty() {
        return Ok(ClusterAssignment {
            labels: Vec::new(),
            centroids: vec![[0.0, 0.0]; clusters],
            epoch: 0,
            lloyd_objective: Vec::new(),
        });
    }
    let seeds = farthest_point_seeds(points, clusters, rng);
    let (mut labels, centroids, history) = lloyd(points, seeds);
    rebalance(points, &mut labels, &centroids, cap);
    refine(points, &mut labels, clusters, cap);
    let centroids = centroids_of(points, &labels, &centroids);
    Ok(ClusterAssignment {
        labels,
        centroids,
        epoch: 0,
        lloyd_objective: history,
    })
}

/// Matches clusters to UAVs by repeatedly taking the globally closest
/// (UAV, centroid) pair. Returns `uav_of_cluster`.
pub fn associate(uav_positions: &[Point], centroids: &[Point]) -> Vec<usize> {
    assert_eq!(uav_positions.len(), centroids.len());
    let n = centroids.len();
    let mut uav_of = vec![usize::MAX; n];
    let mut uav_taken = vec![false; n];
    for _ in 0..n {
        let mut best: Option<(usize, usize, f64)> = None;
        for (u, pos) in uav_positions.iter().enumerate() {
            if uav_taken[u] {
                continue;
            }
            for (c, centroid) in centroids.iter().enumerate() {
                if uav_of[c] != usize::MAX {
                    continue;
                }
                let d = dist2(pos, centroid);
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((u, c, d));
                }
            }
        }
        let (u, c, _) = best.expect("unmatched pair remains");
        uav_of[c] = u;
        uav_taken[u] = true;
    }
    uav_of
}

/// Relabels an assignment so that cluster index equals serving UAV id.
pub fn relabel_by_uav(assignment: ClusterAssignment, uav_of_cluster: &[usize]) -> ClusterAssignment {
    let mut centroids = vec![[0.0, 0.0]; assignment.centroids.len()];
    for (c, &u) in uav_of_cluster.iter().enumerate() {
        centroids[u] = assignment.centroids[c];
    }
    ClusterAssignment {
        labels: assignment.labels.iter().map(|&l| uav_of_cluster[l]).collect(),
        centroids,
        ..assignment
    }
}

pub fn recluster_due(slot: usize, period: usize) -> bool {
    debug_assert!(period > 0);
    slot.is_multiple_of(period)
}
