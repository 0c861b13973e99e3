//! Min-max scaling, k-means with k-means++ seeding, and elbow selection of
//! the cluster count.
//!
//! Point sets are passed as flat row-major `&[f64]` buffers together with
//! their dimension.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const MAX_LLOYD_ITERATIONS: usize = 300;
pub const ELBOW_RESTARTS: usize = 3;
/// Seeded k-means++ starts per final fit; the lowest inertia wins.
pub const KMEANS_INITS: usize = 10;
pub const DEFAULT_K_MIN: usize = 2;
pub const DEFAULT_K_MAX: usize = 25;

/// Per-dimension min-max scaler onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit(points: &[f64], dim: usize) -> Result<Self> {
        check_shape(points, dim)?;
        if points.is_empty() {
            return Err(Error::usage("cannot fit a scaler on an empty point set"));
        }
        let mut min = points[..dim].to_vec();
        let mut max = min.clone();
        for p in points.chunks_exact(dim) {
            for j in 0..dim {
                min[j] = min[j].min(p[j]);
                max[j] = max[j].max(p[j]);
            }
        }
        Ok(Scaler { min, max })
    }

    pub fn dimension(&self) -> usize {
        self.min.len()
    }

    /// Constant dimensions map to 0.5. Points outside the fitted range are
    /// not clipped.
    pub fn transform(&self, points: &[f64]) -> Vec<f64> {
        let dim = self.dimension();
        let mut out = Vec::with_capacity(points.len());
        for p in points.chunks_exact(dim) {
            for j in 0..dim {
                let span = self.max[j] - self.min[j];
                out.push(if span > 0.0 { (p[j] - self.min[j]) / span } else { 0.5 });
            }
        }
        out
    }

    pub fn inverse(&self, scaled: &[f64]) -> Vec<f64> {
        scaled
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let j = i % self.dimension();
                let span = self.max[j] - self.min[j];
                if span > 0.0 {
                    self.min[j] + v * span
                } else {
                    self.min[j]
                }
            })
            .collect()
    }
}

fn check_shape(points: &[f64], dim: usize) -> Result<()> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::usage(format!(
            "{} values do not form points of dimension {dim}",
            points.len()
        )));
    }
    Ok(())
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by squared Euclidean distance; ties go to the lowest index.
#[inline]
fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub k: usize,
    pub dim: usize,
    /// `k x dim`, row-major.
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step, first entry from the seeding.
    pub inertia_history: Vec<f64>,
}

/// Best of [`KMEANS_INITS`] runs of k-means++ seeding plus Lloyd
/// iterations; ties keep the earliest start.
pub fn kmeans_fit(points: &[f64], dim: usize, k: usize, seed: u64) -> Result<KMeansFit> {
    let mut best = kmeans_single(points, dim, k, seed)?;
    for r in 1..KMEANS_INITS {
        let fit = kmeans_single(points, dim, k, seed::derive_indexed(seed, "kmeans/init", r as u64))?;
        if fit.inertia < best.inertia {
            best = fit;
        }
    }
    Ok(best)
}

/// One k-means++ seeding followed by Lloyd iterations.
pub fn kmeans_single(points: &[f64], dim: usize, k: usize, seed: u64) -> Result<KMeansFit> {
    check_shape(points, dim)?;
    let n = points.len() / dim;
    if k == 0 || k > n {
        return Err(Error::usage(format!("k = {k} must be in [1, {n}]")));
    }
    let mut rng = seed::rng(seed);
    let init = kmeans_plus_plus(points, dim, k, &mut rng);
    Ok(lloyd(points, dim, init))
}

/// Greedy k-means++: each new centre is the best of `2 + ln k` candidates
/// drawn with probability proportional to squared distance.
fn kmeans_plus_plus(points: &[f64], dim: usize, k: usize, rng: &mut seed::Rng) -> Vec<f64> {
    let n = points.len() / dim;
    let trials = 2 + (k as f64).ln() as usize;
    let point = |i: usize| &points[i * dim..(i + 1) * dim];

    let first = rng.random_range(0..n);
    let mut centroids = point(first).to_vec();
    let mut closest: Vec<f64> = (0..n).map(|i| sq_dist(point(i), point(first))).collect();
    let mut potential: f64 = closest.iter().sum();
    let mut cumulative = vec![0.0; n];

    for _ in 1..k {
        let candidates: Vec<usize> = if potential > 0.0 {
            let mut acc = 0.0;
            for (c, d) in cumulative.iter_mut().zip(&closest) {
                acc += d;
                *c = acc;
            }
            (0..trials)
                .map(|_| {
                    let r = rng.random::<f64>() * acc;
                    cumulative.partition_point(|&c| c <= r).min(n - 1)
                })
                .collect()
        } else {
            // every point coincides with a centre already
            vec![rng.random_range(0..n)]
        };

        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for cand in candidates {
            let dists: Vec<f64> = closest
                .iter()
                .enumerate()
                .map(|(i, &c)| c.min(sq_dist(point(i), point(cand))))
                .collect();
            let pot: f64 = dists.iter().sum();
            if best.as_ref().is_none_or(|b| pot < b.1) {
                best = Some((cand, pot, dists));
            }
        }
        let (chosen, pot, dists) = best.expect("at least one candidate");
        centroids.extend_from_slice(point(chosen));
        closest = dists;
        potential = pot;
    }
    centroids
}

/// Lloyd iterations from the given centres until the assignment is stable
/// or [`MAX_LLOYD_ITERATIONS`] is reached. Clusters left empty are reseeded
/// at the point farthest from its own centroid.
pub fn lloyd(points: &[f64], dim: usize, mut centroids: Vec<f64>) -> KMeansFit {
    let n = points.len() / dim;
    let k = centroids.len() / dim;
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iteration = 0;

    loop {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, p) in points.chunks_exact(dim).enumerate() {
            let (j, d) = nearest(p, &centroids, dim);
            if assignments[i] != j {
                assignments[i] = j;
                changed = true;
            }
            inertia += d;
        }
        history.push(inertia);
        iteration += 1;
        if !changed || iteration >= MAX_LLOYD_ITERATIONS {
            return KMeansFit {
                k,
                dim,
                centroids,
                assignments,
                inertia,
                inertia_history: history,
            };
        }

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (p, &j) in points.chunks_exact(dim).zip(&assignments) {
            counts[j] += 1;
            for (s, v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for t in 0..dim {
                    centroids[j * dim + t] = sums[j * dim + t] / counts[j] as f64;
                }
            }
        }
        if counts.contains(&0) {
            let mut spread: Vec<f64> = points
                .chunks_exact(dim)
                .zip(&assignments)
                .map(|(p, &j)| sq_dist(p, &centroids[j * dim..(j + 1) * dim]))
                .collect();
            for j in (0..k).filter(|&j| counts[j] == 0) {
                let far = argmax_first(&spread);
                centroids[j * dim..(j + 1) * dim].copy_from_slice(&points[far * dim..(far + 1) * dim]);
                spread[far] = 0.0;
            }
        }
    }
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Result of scanning `k` over a range.
#[derive(Debug, Clone)]
pub struct ElbowScan {
    pub k: usize,
    pub trace: Vec<(usize, f64)>,
}

/// Fit k-means for every `k` in `[k_min, k_max]` (best of three seeded
/// restarts each) and return the knee of the inertia curve.
pub fn select_k_elbow(points: &[f64], dim: usize, k_min: usize, k_max: usize, seed: u64) -> Result<ElbowScan> {
    check_shape(points, dim)?;
    let n = points.len() / dim;
    if k_min < 2 || k_max < k_min || k_max > n {
        return Err(Error::usage(format!(
            "k range [{k_min}, {k_max}] invalid for {n} points (need 2 <= k_min <= k_max <= N)"
        )));
    }

    let mut best: Vec<KMeansFit> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            (0..ELBOW_RESTARTS)
                .map(|r| {
                    let s = seed::derive_indexed(seed, &format!("elbow/k{k}"), r as u64);
                    kmeans_single(points, dim, k, s).expect("k validated above")
                })
                .reduce(|a, b| if b.inertia < a.inertia { b } else { a })
                .expect("at least one restart")
        })
        .collect();

    // Restarts alone do not guarantee a monotone curve. Where k+1 came out
    // worse than k, also try k's solution plus a centre at its worst-served
    // point; Lloyd from there cannot end above k's inertia.
    for i in 1..best.len() {
        if best[i].inertia > best[i - 1].inertia {
            let prev = &best[i - 1];
            let far = points
                .chunks_exact(dim)
                .zip(&prev.assignments)
                .map(|(p, &j)| sq_dist(p, &prev.centroids[j * dim..(j + 1) * dim]))
                .collect::<Vec<_>>();
            let far = argmax_first(&far);
            let mut init = prev.centroids.clone();
            init.extend_from_slice(&points[far * dim..(far + 1) * dim]);
            let warm = lloyd(points, dim, init);
            if warm.inertia < best[i].inertia {
                best[i] = warm;
            }
        }
    }

    let trace: Vec<(usize, f64)> = best.iter().map(|f| (f.k, f.inertia)).collect();
    let k = knee(&trace);
    Ok(ElbowScan { k, trace })
}

/// Knee of a decreasing `(k, inertia)` curve: after normalising both axes to
/// `[0, 1]`, the point lying farthest below the chord joining the first and
/// last points. Returns the first `k` when fewer than three points are given
/// or when no point lies below the chord.
pub fn knee(trace: &[(usize, f64)]) -> usize {
    let Some(&(k_first, _)) = trace.first() else {
        return 0;
    };
    if trace.len() < 3 {
        log::warn!("elbow needs at least 3 candidate k values, got {}; using k = {k_first}", trace.len());
        return k_first;
    }
    let k_last = trace[trace.len() - 1].0;
    let lo = trace.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    let hi = trace.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) || k_last == k_first {
        return k_first;
    }
    let xs: Vec<f64> = trace
        .iter()
        .map(|t| (t.0 - k_first) as f64 / (k_last - k_first) as f64)
        .collect();
    let ys: Vec<f64> = trace.iter().map(|t| (t.1 - lo) / (hi - lo)).collect();
    let (y0, y1) = (ys[0], ys[ys.len() - 1]);
    let norm = (1.0 + (y1 - y0) * (y1 - y0)).sqrt();

    let mut best = (k_first, 0.0);
    for (i, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
        let below = (y0 + (y1 - y0) * x - y) / norm;
        if below > best.1 + 1e-12 {
            best = (trace[i].0, below);
        }
    }
    best.0
}

/// How the cluster count is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSelection {
    Auto { k_min: usize, k_max: usize },
    Fixed(usize),
}

impl Default for KSelection {
    fn default() -> Self {
        KSelection::Auto {
            k_min: DEFAULT_K_MIN,
            k_max: DEFAULT_K_MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub k: usize,
    pub inertia: f64,
}

/// A fitted scaler and centroids, shared by every trajectory of one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    pub seed: u64,
    pub scaler: Scaler,
    /// `c` rows of scaled coordinates.
    pub centroids: Vec<Vec<f64>>,
    pub k_selection_trace: Vec<TracePoint>,
}

impl ClusterModel {
    /// Scale `points`, pick `k`, and fit the final k-means model.
    pub fn fit(points: &[f64], dim: usize, selection: KSelection, seed: u64) -> Result<Self> {
        let scaler = Scaler::fit(points, dim)?;
        let scaled = scaler.transform(points);
        let (k, trace) = match selection {
            KSelection::Fixed(k) => (k, Vec::new()),
            KSelection::Auto { k_min, k_max } => {
                let scan = select_k_elbow(&scaled, dim, k_min, k_max, seed)?;
                (scan.k, scan.trace)
            }
        };
        let fit = kmeans_fit(&scaled, dim, k, seed)?;
        Ok(Self::from_parts(scaler, &fit, trace, seed))
    }

    pub fn from_parts(scaler: Scaler, fit: &KMeansFit, trace: Vec<(usize, f64)>, seed: u64) -> Self {
        let trace = if trace.is_empty() {
            vec![(fit.k, fit.inertia)]
        } else {
            trace
        };
        ClusterModel {
            problem: None,
            seed,
            scaler,
            centroids: fit.centroids.chunks_exact(fit.dim).map(<[f64]>::to_vec).collect(),
            k_selection_trace: trace.into_iter().map(|(k, inertia)| TracePoint { k, inertia }).collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.scaler.dimension()
    }

    pub fn num_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn flat_centroids(&self) -> Vec<f64> {
        self.centroids.concat()
    }

    /// Centroids mapped back to the original coordinate space.
    pub fn raw_centroids(&self) -> Vec<Vec<f64>> {
        self.centroids.iter().map(|c| self.scaler.inverse(c)).collect()
    }

    /// Scale raw points and assign each to its nearest centroid.
    pub fn assign(&self, points: &[f64], dim: usize) -> Result<Vec<usize>> {
        if dim != self.dimension() {
            return Err(Error::usage(format!(
                "points have dimension {dim}, cluster model expects {}",
                self.dimension()
            )));
        }
        check_shape(points, dim)?;
        let centroids = self.flat_centroids();
        Ok(self
            .scaler
            .transform(points)
            .chunks_exact(dim)
            .map(|p| nearest(p, &centroids, dim).0)
            .collect())
    }

    /// Short content hash identifying this model; representations built
    /// against different models are not comparable.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model serializes");
        seed::sha256_hex(&bytes)[..16].to_string()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        if d == 0 || self.scaler.max.len() != d || self.centroids.is_empty() {
            return Err(Error::usage("cluster model needs a non-empty scaler and at least one centroid"));
        }
        if self.centroids.iter().any(|c| c.len() != d) {
            return Err(Error::usage("centroid dimension does not match the scaler"));
        }
        if self.scaler.min.iter().zip(&self.scaler.max).any(|(a, b)| a > b) {
            return Err(Error::usage("scaler has min > max"));
        }
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let model: ClusterModel = crate::io::read_json(path)?;
        model.validate().map_err(|e| Error::Structure {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(model)
    }
}
