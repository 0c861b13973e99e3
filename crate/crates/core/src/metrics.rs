//! Cosine similarity between representations, algorithm stability across
//! seeds, and pairwise algorithm similarity across problems and seeds.
//!
//! Sums are always taken in a canonical order (sorted by problem, then seed)
//! so that results do not depend on the order inputs are supplied in.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::TrajectoryRepresentation;

/// `u . v / (|u| |v|)`, clamped to `[-1, 1]`. A zero vector has similarity 0
/// with everything.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::usage(format!(
            "cosine similarity of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let uu: f64 = u.iter().map(|a| a * a).sum();
    let vv: f64 = v.iter().map(|b| b * b).sum();
    if uu == 0.0 || vv == 0.0 {
        log::warn!("cosine similarity with a zero vector; defined as 0");
        return Ok(0.0);
    }
    // sqrt(uu * vv) rather than sqrt(uu) * sqrt(vv): gives exactly 1 for u == v
    Ok((dot / (uu * vv).sqrt()).clamp(-1.0, 1.0))
}

/// Cosine similarity of two count vectors, computed from the exact reduced
/// fraction `(u . v)^2 / (|u|^2 |v|^2)`. Scaling either vector by a positive
/// integer, swapping the arguments, or comparing a vector with itself gives
/// bit-identical results. A zero vector has similarity 0 with everything.
pub fn count_cosine(u: &[u32], v: &[u32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::usage(format!(
            "cosine similarity of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let dot: u128 = u.iter().zip(v).map(|(&a, &b)| u128::from(a) * u128::from(b)).sum();
    let uu: u128 = u.iter().map(|&a| u128::from(a) * u128::from(a)).sum();
    let vv: u128 = v.iter().map(|&b| u128::from(b) * u128::from(b)).sum();
    if uu == 0 || vv == 0 {
        log::warn!("cosine similarity with a zero vector; defined as 0");
        return Ok(0.0);
    }
    if dot == 0 {
        return Ok(0.0);
    }
    // reduce dot/uu and dot/vv separately so nothing overflows
    let g1 = gcd(dot, uu);
    let g2 = gcd(dot, vv);
    let (n1, d1) = (dot / g1, uu / g1);
    let (n2, d2) = (dot / g2, vv / g2);
    let g3 = gcd(n1, d2);
    let g4 = gcd(n2, d1);
    let num = (n1 / g3).checked_mul(n2 / g4);
    let den = (d1 / g4).checked_mul(d2 / g3);
    let ratio = match (num, den) {
        (Some(n), Some(d)) => n as f64 / d as f64,
        _ => (dot as f64 / uu as f64) * (dot as f64 / vv as f64),
    };
    Ok(ratio.sqrt().min(1.0))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn check_comparable(a: &TrajectoryRepresentation, b: &TrajectoryRepresentation) -> Result<()> {
    if a.model != b.model {
        return Err(Error::usage(format!(
            "representations built against different cluster models ({} vs {})",
            a.model, b.model
        )));
    }
    if a.iterations() != b.iterations() || a.clusters() != b.clusters() {
        return Err(Error::usage(format!(
            "representation shapes differ: {}x{} vs {}x{}",
            a.iterations(),
            a.clusters(),
            b.iterations(),
            b.clusters()
        )));
    }
    Ok(())
}

/// Cosine similarity of two comparable representations.
pub fn representation_similarity(a: &TrajectoryRepresentation, b: &TrajectoryRepresentation) -> Result<f64> {
    check_comparable(a, b)?;
    count_cosine(a.flat(), b.flat())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub algorithm: String,
    pub problem: String,
    /// Seeds in ascending order; indexes `pairwise`.
    pub seeds: Vec<u64>,
    pub score: f64,
    pub pairwise: Vec<Vec<f64>>,
}

/// Mean cosine similarity over all pairs of distinct seeds of one algorithm
/// on one problem.
///
/// Averaging over ordered pairs `k != l` and over unordered pairs gives the
/// same value because cosine is symmetric; the unordered mean is computed.
pub fn stability(reps: &[&TrajectoryRepresentation]) -> Result<StabilityReport> {
    if reps.len() < 2 {
        return Err(Error::usage("stability needs representations from at least two seeds"));
    }
    let first = reps[0];
    for r in reps {
        if r.algorithm != first.algorithm || r.problem != first.problem {
            return Err(Error::usage(format!(
                "stability mixes ({}, {}) with ({}, {})",
                first.algorithm, first.problem, r.algorithm, r.problem
            )));
        }
        check_comparable(first, r)?;
    }
    let mut sorted: Vec<&TrajectoryRepresentation> = reps.to_vec();
    sorted.sort_by_key(|r| r.seed);
    if sorted.windows(2).any(|w| w[0].seed == w[1].seed) {
        return Err(Error::usage("stability needs distinct seeds"));
    }
    let vectors: Vec<&[u32]> = sorted.iter().map(|r| r.flat()).collect();
    let n = vectors.len();
    let mut pairwise = vec![vec![0.0; n]; n];
    let mut total = 0.0;
    for i in 0..n {
        pairwise[i][i] = count_cosine(vectors[i], vectors[i])?;
        for j in i + 1..n {
            let s = count_cosine(vectors[i], vectors[j])?;
            pairwise[i][j] = s;
            pairwise[j][i] = s;
            total += s;
        }
    }
    Ok(StabilityReport {
        algorithm: first.algorithm.clone(),
        problem: first.problem.clone(),
        seeds: sorted.iter().map(|r| r.seed).collect(),
        score: total / (n * (n - 1) / 2) as f64,
        pairwise,
    })
}

/// Behaviour when one algorithm lacks a `(problem, seed)` cell the other has.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Missing {
    #[default]
    Fail,
    /// Drop the cell and average over the rest.
    Skip,
}

/// How problems are weighted when averaging similarity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// Every `(instance, seed)` cell weighs the same.
    #[default]
    Instance,
    /// Average within each problem class first, then across classes.
    Class,
}

/// Problem class of an instance id: `sphere-d2-i3` -> `sphere-d2`. Ids
/// without an instance suffix are their own class.
pub fn problem_class(problem: &str) -> &str {
    match problem.rsplit_once("-i") {
        Some((class, inst)) if !inst.is_empty() && inst.bytes().all(|b| b.is_ascii_digit()) => class,
        _ => problem,
    }
}

type CellKey<'a> = (&'a str, u64);

fn cells<'a>(reps: &[&'a TrajectoryRepresentation]) -> Result<BTreeMap<CellKey<'a>, &'a TrajectoryRepresentation>> {
    let mut out = BTreeMap::new();
    for r in reps {
        if out.insert((r.problem.as_str(), r.seed), *r).is_some() {
            return Err(Error::usage(format!(
                "duplicate representation for {} on {} with seed {}",
                r.algorithm, r.problem, r.seed
            )));
        }
    }
    Ok(out)
}

/// Same-seed cosine similarities of two algorithms, keyed by `(problem, seed)`.
fn paired_cells(
    a: &[&TrajectoryRepresentation],
    b: &[&TrajectoryRepresentation],
    missing: Missing,
) -> Result<BTreeMap<(String, u64), f64>> {
    let ca = cells(a)?;
    let cb = cells(b)?;
    let keys: BTreeSet<CellKey> = ca.keys().chain(cb.keys()).copied().collect();
    let mut out = BTreeMap::new();
    for key in keys {
        match (ca.get(&key), cb.get(&key)) {
            (Some(x), Some(y)) => {
                out.insert((key.0.to_string(), key.1), representation_similarity(x, y)?);
            }
            _ if missing == Missing::Skip => {}
            (x, y) => {
                let who = x.or(y).expect("key came from one side");
                return Err(Error::usage(format!(
                    "no counterpart for {} on {} with seed {}",
                    who.algorithm, key.0, key.1
                )));
            }
        }
    }
    Ok(out)
}

fn aggregate(cells: &BTreeMap<(String, u64), f64>, granularity: Granularity) -> Result<f64> {
    if cells.is_empty() {
        return Err(Error::usage("no (problem, seed) cells to compare"));
    }
    match granularity {
        Granularity::Instance => Ok(cells.values().sum::<f64>() / cells.len() as f64),
        Granularity::Class => {
            let mut by_class: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
            for ((problem, _), v) in cells {
                let e = by_class.entry(problem_class(problem)).or_default();
                e.0 += v;
                e.1 += 1;
            }
            Ok(by_class.values().map(|(s, n)| s / *n as f64).sum::<f64>() / by_class.len() as f64)
        }
    }
}

/// Mean same-seed cosine similarity between two algorithms over all shared
/// `(problem, seed)` cells.
pub fn similarity(
    a: &[&TrajectoryRepresentation],
    b: &[&TrajectoryRepresentation],
    missing: Missing,
    granularity: Granularity,
) -> Result<f64> {
    aggregate(&paired_cells(a, b, missing)?, granularity)
}

/// One agglomeration step of the clustermap dendrogram. Node ids below
/// `n` are leaves; step `i` creates node `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub algorithms: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Same matrix restricted to each problem.
    #[serde(default)]
    pub per_problem: BTreeMap<String, Vec<Vec<f64>>>,
    /// Display order of `algorithms` from average-linkage clustering on
    /// `1 - similarity`.
    pub leaf_order: Vec<usize>,
    pub merges: Vec<Merge>,
}

impl SimilarityMatrix {
    /// Build from a symmetric matrix and compute the leaf ordering.
    pub fn from_values(algorithms: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = algorithms.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::usage("similarity matrix must be square and match its labels"));
        }
        for i in 0..n {
            for j in 0..n {
                if !values[i][j].is_finite() || (values[i][j] - values[j][i]).abs() > 1e-12 {
                    return Err(Error::usage(format!("similarity matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        let (leaf_order, merges) = average_linkage_order(&values);
        Ok(SimilarityMatrix {
            algorithms,
            values,
            per_problem: BTreeMap::new(),
            leaf_order,
            merges,
        })
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.algorithms.iter().position(|x| x == a)?;
        let j = self.algorithms.iter().position(|x| x == b)?;
        Some(self.values[i][j])
    }

    /// Labels and values permuted into leaf order.
    pub fn reordered(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let labels = self.leaf_order.iter().map(|&i| self.algorithms[i].clone()).collect();
        let values = self
            .leaf_order
            .iter()
            .map(|&i| self.leaf_order.iter().map(|&j| self.values[i][j]).collect())
            .collect();
        (labels, values)
    }
}

/// Leaf order of the average-linkage dendrogram over `1 - similarity`.
pub fn average_linkage_order(similarity: &[Vec<f64>]) -> (Vec<usize>, Vec<Merge>) {
    let n = similarity.len();
    if n < 2 {
        return ((0..n).collect(), Vec::new());
    }
    let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            condensed.push((1.0 - similarity[i][j]).max(0.0));
        }
    }
    let dendrogram = kodama::linkage(&mut condensed, n, kodama::Method::Average);
    let merges: Vec<Merge> = dendrogram
        .steps()
        .iter()
        .map(|s| Merge {
            left: s.cluster1,
            right: s.cluster2,
            distance: s.dissimilarity,
            size: s.size,
        })
        .collect();

    let mut order = Vec::with_capacity(n);
    let mut stack = vec![n + merges.len() - 1];
    while let Some(node) = stack.pop() {
        if node < n {
            order.push(node);
        } else {
            let m = merges[node - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    (order, merges)
}

/// Pairwise similarity of every algorithm present in `reps`.
pub fn similarity_matrix(
    reps: &[TrajectoryRepresentation],
    missing: Missing,
    granularity: Granularity,
) -> Result<SimilarityMatrix> {
    let mut by_alg: BTreeMap<&str, Vec<&TrajectoryRepresentation>> = BTreeMap::new();
    for r in reps {
        by_alg.entry(r.algorithm.as_str()).or_default().push(r);
    }
    let algorithms: Vec<String> = by_alg.keys().map(|s| s.to_string()).collect();
    let groups: Vec<&Vec<&TrajectoryRepresentation>> = by_alg.values().collect();
    let problems: BTreeSet<&str> = reps.iter().map(|r| r.problem.as_str()).collect();
    let n = algorithms.len();

    let mut values = vec![vec![0.0; n]; n];
    let mut per_problem: BTreeMap<String, Vec<Vec<f64>>> =
        problems.iter().map(|p| (p.to_string(), vec![vec![0.0; n]; n])).collect();
    for i in 0..n {
        for j in i..n {
            let paired = paired_cells(groups[i], groups[j], missing)?;
            let v = aggregate(&paired, granularity)?;
            values[i][j] = v;
            values[j][i] = v;
            for (problem, matrix) in per_problem.iter_mut() {
                let subset: BTreeMap<(String, u64), f64> = paired
                    .iter()
                    .filter(|((p, _), _)| p == problem)
                    .map(|(k, v)| (k.clone(), *v))
                    .collect();
                let v = if subset.is_empty() {
                    f64::NAN
                } else {
                    aggregate(&subset, Granularity::Instance)?
                };
                matrix[i][j] = v;
                matrix[j][i] = v;
            }
        }
    }
    let mut matrix = SimilarityMatrix::from_values(algorithms, values)?;
    matrix.per_problem = per_problem;
    Ok(matrix)
}

/// Stability per `(problem, algorithm)`; `None` where fewer than two seeds
/// exist. Rows are problems, columns algorithms, both sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub problems: Vec<String>,
    pub algorithms: Vec<String>,
    pub scores: Vec<Vec<Option<f64>>>,
}

impl StabilityTable {
    pub fn get(&self, problem: &str, algorithm: &str) -> Option<f64> {
        let i = self.problems.iter().position(|p| p == problem)?;
        let j = self.algorithms.iter().position(|a| a == algorithm)?;
        self.scores[i][j]
    }

    /// Arithmetic mean of instance scores within each problem class.
    pub fn by_class(&self) -> StabilityTable {
        let mut classes: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, p) in self.problems.iter().enumerate() {
            classes.entry(problem_class(p)).or_default().push(i);
        }
        let scores = classes
            .values()
            .map(|rows| {
                (0..self.algorithms.len())
                    .map(|j| {
                        let vals: Vec<f64> = rows.iter().filter_map(|&i| self.scores[i][j]).collect();
                        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                    })
                    .collect()
            })
            .collect();
        StabilityTable {
            problems: classes.keys().map(|s| s.to_string()).collect(),
            algorithms: self.algorithms.clone(),
            scores,
        }
    }
}

pub fn stability_table(reps: &[TrajectoryRepresentation]) -> Result<StabilityTable> {
    let mut groups: BTreeMap<(&str, &str), Vec<&TrajectoryRepresentation>> = BTreeMap::new();
    for r in reps {
        groups.entry((r.problem.as_str(), r.algorithm.as_str())).or_default().push(r);
    }
    let problems: Vec<String> = reps.iter().map(|r| r.problem.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let algorithms: Vec<String> = reps.iter().map(|r| r.algorithm.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut scores = vec![vec![None; algorithms.len()]; problems.len()];
    for ((p, a), group) in groups {
        if group.len() < 2 {
            continue;
        }
        let i = problems.iter().position(|x| x == p).expect("collected above");
        let j = algorithms.iter().position(|x| x == a).expect("collected above");
        scores[i][j] = Some(stability(&group)?.score);
    }
    Ok(StabilityTable {
        problems,
        algorithms,
        scores,
    })
}
