//! Time-varying partitioning of the field into clusters of similar loops.
//!
//! Each loop is described by its effective power and mean HTF temperature.
//! Features are z-score normalized, clustered with seeded k-means++ / Lloyd,
//! and the number of clusters is chosen by maximizing the
//! Calinski-Harabasz index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::thermal::{effective_power, ExogenousInputs, FieldState, LoopParams};

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_RESTARTS: usize = 10;
/// Normalized points closer than this to their mean count as coincident.
pub const COINCIDENCE_RADIUS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("cluster count {k} outside [{lo}, {hi}]")]
    ClusterCount { k: usize, lo: usize, hi: usize },
    #[error("assignment has {got} labels for {expected} points")]
    Length { got: usize, expected: usize },
    #[error("invalid partition: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePoint {
    /// η·S·I, W.
    pub effective_power: f64,
    /// (T_out + T_in)/2, °C.
    pub mean_temp: f64,
}

impl FeaturePoint {
    pub fn as_array(&self) -> [f64; 2] {
        [self.effective_power, self.mean_temp]
    }
}

pub fn build_feature_dataset(field: &FieldState, exo: &ExogenousInputs, params: &[LoopParams]) -> Vec<FeaturePoint> {
    field
        .loops
        .iter()
        .zip(params)
        .enumerate()
        .map(|(i, (s, p))| FeaturePoint {
            effective_power: effective_power(p, exo.irradiance[i]),
            mean_temp: 0.5 * (s.t_out + field.t_in),
        })
        .collect()
}

/// Per-dimension z-scores. A dimension whose spread is negligible relative
/// to its magnitude maps to zero.
pub fn normalize(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = points.len() as f64;
    let mut out = vec![[0.0; 2]; points.len()];
    for d in 0..2 {
        let mean = points.iter().map(|p| p[d]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std <= 1e-9 * mean.abs().max(1.0) {
            continue;
        }
        for (o, p) in out.iter_mut().zip(points) {
            o[d] = (p[d] - mean) / std;
        }
    }
    out
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
    /// Within-cluster sum of squares of the returned clustering.
    pub wcss: f64,
    /// WCSS after every Lloyd iteration of the winning restart.
    pub wcss_history: Vec<f64>,
}

fn nearest(p: &[f64; 2], centroids: &[[f64; 2]]) -> usize {
    let mut best = 0;
    let mut best_d = dist2(p, &centroids[0]);
    for (c, cen) in centroids.iter().enumerate().skip(1) {
        let d = dist2(p, cen);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn wcss(points: &[[f64; 2]], assignment: &[usize], centroids: &[[f64; 2]]) -> f64 {
    points.iter().zip(assignment).map(|(p, &a)| dist2(p, &centroids[a])).sum()
}

fn plus_plus_init(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut chosen = vec![rng.gen_range(0..points.len())];
    while chosen.len() < k {
        let d: Vec<f64> =
            points.iter().map(|p| chosen.iter().map(|&c| dist2(p, &points[c])).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen_range(0.0..total);
            let mut pick = None;
            for (i, &di) in d.iter().enumerate() {
                if di > 0.0 && r < di {
                    pick = Some(i);
                    break;
                }
                r -= di;
            }
            pick.unwrap_or_else(|| d.iter().rposition(|&x| x > 0.0).expect("positive total"))
        } else {
            (0..points.len()).find(|i| !chosen.contains(i)).expect("k ≤ n")
        };
        chosen.push(next);
    }
    chosen.iter().map(|&i| points[i]).collect()
}

fn lloyd(points: &[[f64; 2]], mut centroids: Vec<[f64; 2]>) -> KMeansResult {
    let k = centroids.len();
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut history = Vec::new();
    for _ in 0..KMEANS_MAX_ITER {
        let mut sums = vec![[0.0; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            }
        }
        history.push(wcss(points, &assignment, &centroids));
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let w = wcss(points, &assignment, &centroids);
    KMeansResult { assignment, centroids, wcss: w, wcss_history: history }
}

/// Best of [`KMEANS_RESTARTS`] seeded k-means++ / Lloyd runs on points that
/// are used as given (no normalization).
pub fn kmeans_raw(points: &[[f64; 2]], k: usize, seed: u64) -> Result<KMeansResult, PartitionError> {
    if k == 0 || k > points.len() {
        return Err(PartitionError::ClusterCount { k, lo: 1, hi: points.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..KMEANS_RESTARTS {
        let r = lloyd(points, plus_plus_init(points, k, &mut rng));
        if best.as_ref().is_none_or(|b| r.wcss < b.wcss) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// k-means on z-score normalized features. Centroids are reported in
/// normalized coordinates.
pub fn kmeans_cluster(points: &[FeaturePoint], k: usize, seed: u64) -> Result<KMeansResult, PartitionError> {
    let raw: Vec<[f64; 2]> = points.iter().map(FeaturePoint::as_array).collect();
    kmeans_raw(&normalize(&raw), k, seed)
}

/// `(B/(k−1)) / (W/(n−k))`; `+∞` when the within-cluster scatter vanishes.
pub fn calinski_harabasz(points: &[[f64; 2]], assignment: &[usize], normalized: bool) -> Result<f64, PartitionError> {
    let n = points.len();
    if assignment.len() != n {
        return Err(PartitionError::Length { got: assignment.len(), expected: n });
    }
    let owned;
    let pts = if normalized {
        owned = normalize(points);
        &owned
    } else {
        points
    };
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    let mut sums = vec![[0.0; 2]; k];
    for (p, &a) in pts.iter().zip(assignment) {
        counts[a] += 1;
        sums[a][0] += p[0];
        sums[a][1] += p[1];
    }
    let used = counts.iter().filter(|&&c| c > 0).count();
    if used < 2 || used + 1 > n {
        return Err(PartitionError::ClusterCount { k: used, lo: 2, hi: n.saturating_sub(1) });
    }
    let mean = [pts.iter().map(|p| p[0]).sum::<f64>() / n as f64, pts.iter().map(|p| p[1]).sum::<f64>() / n as f64];
    let cent: Vec<[f64; 2]> = (0..k)
        .map(|c| if counts[c] > 0 { [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64] } else { mean })
        .collect();
    let b: f64 = (0..k).map(|c| counts[c] as f64 * dist2(&cent[c], &mean)).sum();
    let w = wcss(pts, assignment, &cent);
    if w == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((b / (used - 1) as f64) / (w / (n - used) as f64))
}

/// Disjoint clusters covering loops `0..n`, in canonical order: members
/// ascending, clusters ordered by their smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub clusters: Vec<Vec<usize>>,
    /// Simulation step at which the partition was selected.
    pub epoch: usize,
}

impl Partition {
    pub fn new(mut clusters: Vec<Vec<usize>>, epoch: usize) -> Self {
        for c in &mut clusters {
            c.sort_unstable();
        }
        clusters.retain(|c| !c.is_empty());
        clusters.sort_by_key(|c| c[0]);
        Self { clusters, epoch }
    }

    pub fn singletons(n: usize, epoch: usize) -> Self {
        Self::new((0..n).map(|i| vec![i]).collect(), epoch)
    }

    pub fn whole(n: usize, epoch: usize) -> Self {
        Self::new(vec![(0..n).collect()], epoch)
    }

    pub fn from_assignment(assignment: &[usize], epoch: usize) -> Self {
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let mut clusters = vec![Vec::new(); k];
        for (i, &a) in assignment.iter().enumerate() {
            clusters[a].push(i);
        }
        Self::new(clusters, epoch)
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Same clusters, ignoring the epoch.
    pub fn same_clusters(&self, other: &Partition) -> bool {
        self.clusters == other.clusters
    }

    /// Cluster index of every loop.
    pub fn labels(&self, n_loops: usize) -> Vec<usize> {
        let mut l = vec![usize::MAX; n_loops];
        for (c, members) in self.clusters.iter().enumerate() {
            for &i in members {
                l[i] = c;
            }
        }
        l
    }

    pub fn validate(&self, n_loops: usize, n_cl_max: usize) -> Result<(), PartitionError> {
        if self.clusters.is_empty() || self.clusters.len() > n_cl_max {
            return Err(PartitionError::Invalid(format!("{} clusters, expected 1..={n_cl_max}", self.clusters.len())));
        }
        let mut seen = vec![false; n_loops];
        for c in &self.clusters {
            if c.is_empty() {
                return Err(PartitionError::Invalid("empty cluster".into()));
            }
            for &i in c {
                if i >= n_loops || seen[i] {
                    return Err(PartitionError::Invalid(format!("loop {i} out of range or repeated")));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(PartitionError::Invalid(format!("loop {i} not covered")));
        }
        Ok(())
    }
}

/// Candidate counts `2..=min(n_cl_max, n−1)` are clustered and scored by
/// Calinski-Harabasz; the best score wins with ties going to the lowest
/// count. Coincident points give a single cluster.
pub fn select_partition(points: &[FeaturePoint], n_cl_max: usize, seed: u64, epoch: usize) -> Partition {
    let n = points.len();
    let raw: Vec<[f64; 2]> = points.iter().map(FeaturePoint::as_array).collect();
    let norm = normalize(&raw);
    let coincident = norm.iter().all(|p| p[0].hypot(p[1]) <= COINCIDENCE_RADIUS);
    if n_cl_max <= 1 || n <= 1 || coincident {
        return Partition::whole(n, epoch);
    }
    let hi = n_cl_max.min(n - 1);
    if hi < 2 {
        // two distinct loops and room for both
        return Partition::singletons(n, epoch);
    }
    let scored: Vec<(usize, f64, Vec<usize>)> = (2..=hi)
        .into_par_iter()
        .map(|k| {
            let km = kmeans_raw(&norm, k, seed.wrapping_add(k as u64)).expect("k within range");
            let score = calinski_harabasz(&norm, &km.assignment, false).unwrap_or(f64::NEG_INFINITY);
            (k, score, km.assignment)
        })
        .collect();
    let mut best = &scored[0];
    for s in &scored[1..] {
        if s.1 > best.1 {
            best = s;
        }
    }
    Partition::from_assignment(&best.2, epoch)
}
