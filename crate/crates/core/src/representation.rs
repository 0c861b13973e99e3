//! Per-iteration cluster-membership counts of a trajectory.
//!
//! The representation of a trajectory with `b` iterations under a model with
//! `c` clusters is a `b x c` count matrix, flattened iteration-major into a
//! vector of `b * c` values: `flat[i * c + j] = counts[i][j]`.
//!
//! On disk, representations are CSV with header
//! `algorithm,problem,seed,iteration,cluster_0,...,cluster_{c-1}` and a
//! sidecar `<file>.meta.json` naming the cluster model used for each problem.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryRepresentation {
    pub algorithm: String,
    pub problem: String,
    pub seed: u64,
    /// Fingerprint of the cluster model the counts were built against.
    pub model: String,
    population: usize,
    clusters: usize,
    /// `b x c` counts, iteration-major; doubles as the flat vector.
    counts: Vec<u32>,
}

impl TrajectoryRepresentation {
    /// Count assignments (`b * s` cluster indices, iteration-major) per
    /// iteration and cluster.
    pub fn from_assignments(
        algorithm: impl Into<String>,
        problem: impl Into<String>,
        seed: u64,
        model: impl Into<String>,
        (b, s, c): (usize, usize, usize),
        assignments: &[usize],
    ) -> Result<Self> {
        if assignments.len() != b * s {
            return Err(Error::usage(format!(
                "{} assignments for {b} iterations of {s} solutions",
                assignments.len()
            )));
        }
        if c == 0 {
            return Err(Error::usage("a representation needs at least one cluster"));
        }
        let mut counts = vec![0u32; b * c];
        for (i, row) in assignments.chunks_exact(s.max(1)).enumerate() {
            for &j in row {
                if j >= c {
                    return Err(Error::usage(format!("cluster index {j} out of range for {c} clusters")));
                }
                counts[i * c + j] += 1;
            }
        }
        Ok(TrajectoryRepresentation {
            algorithm: algorithm.into(),
            problem: problem.into(),
            seed,
            model: model.into(),
            population: s,
            clusters: c,
            counts,
        })
    }

    pub fn iterations(&self) -> usize {
        self.counts.len() / self.clusters
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn population(&self) -> usize {
        self.population
    }

    /// The flattened `b * c` vector.
    pub fn flat(&self) -> &[u32] {
        &self.counts
    }

    pub fn row(&self, iteration: usize) -> &[u32] {
        &self.counts[iteration * self.clusters..(iteration + 1) * self.clusters]
    }

    pub fn matrix(&self) -> Vec<Vec<u32>> {
        self.counts.chunks_exact(self.clusters).map(<[u32]>::to_vec).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Assign every solution of `trajectory` with `model` and count per iteration.
pub fn build_representation(trajectory: &Trajectory, model: &ClusterModel) -> Result<TrajectoryRepresentation> {
    let (b, s, d) = trajectory.shape();
    if d != model.dimension() {
        return Err(Error::usage(format!(
            "trajectory dimension {d} does not match cluster model dimension {}",
            model.dimension()
        )));
    }
    let assignments = model.assign(trajectory.data(), d)?;
    TrajectoryRepresentation::from_assignments(
        trajectory.algorithm.clone(),
        trajectory.problem.clone(),
        trajectory.seed,
        model.fingerprint(),
        (b, s, model.num_clusters()),
        &assignments,
    )
}

/// Which cluster model each problem's representations were built against.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepresentationMeta {
    pub models: BTreeMap<String, ModelRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRef {
    pub file: String,
    pub fingerprint: String,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    csv_path.with_file_name(name)
}

/// Render representations as CSV text. All must share the cluster count.
pub fn representations_csv(reps: &[TrajectoryRepresentation]) -> Result<Vec<u8>> {
    let c = reps.first().map_or(0, |r| r.clusters);
    if reps.iter().any(|r| r.clusters != c) {
        return Err(Error::usage("one representation file cannot mix cluster counts"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["algorithm".to_string(), "problem".into(), "seed".into(), "iteration".into()];
    header.extend((0..c).map(|j| format!("cluster_{j}")));
    w.write_record(&header).map_err(|e| Error::usage(e.to_string()))?;
    for r in reps {
        for i in 0..r.iterations() {
            let mut row = vec![r.algorithm.clone(), r.problem.clone(), r.seed.to_string(), i.to_string()];
            row.extend(r.row(i).iter().map(u32::to_string));
            w.write_record(&row).map_err(|e| Error::usage(e.to_string()))?;
        }
    }
    w.into_inner().map_err(|e| Error::usage(e.to_string()))
}

/// Write the CSV and its model sidecar.
pub fn write_representations(reps: &[TrajectoryRepresentation], path: &Path, meta: &RepresentationMeta) -> Result<()> {
    crate::io::write_file(path, &representations_csv(reps)?)?;
    crate::io::write_json(&sidecar_path(path), meta)
}

/// Read representations and bind each to its model fingerprint from the
/// sidecar. Without a sidecar, each problem is assumed to have used a single
/// model.
pub fn read_representations(path: &Path) -> Result<Vec<TrajectoryRepresentation>> {
    let sidecar = sidecar_path(path);
    let meta = if sidecar.exists() {
        Some(crate::io::read_json::<RepresentationMeta>(&sidecar)?)
    } else {
        log::warn!("{} has no sidecar; assuming one cluster model per problem", path.display());
        None
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reps = read_representations_from(file, &path.display().to_string())?;
    for r in &mut reps {
        r.model = match meta.as_ref().and_then(|m| m.models.get(&r.problem)) {
            Some(m) => m.fingerprint.clone(),
            None if meta.is_some() => {
                return Err(Error::Structure {
                    path: sidecar.display().to_string(),
                    message: format!("no model listed for problem `{}`", r.problem),
                })
            }
            None => format!("unbound:{}", r.problem),
        };
    }
    Ok(reps)
}

pub fn read_representations_from<R: Read>(input: R, name: &str) -> Result<Vec<TrajectoryRepresentation>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: name.to_string(),
        line,
        message,
    };
    let header = match records.next() {
        None => return Ok(Vec::new()),
        Some(r) => r.map_err(|e| parse_err(1, e.to_string()))?,
    };
    let fixed = ["algorithm", "problem", "seed", "iteration"];
    if header.len() <= fixed.len()
        || fixed.iter().enumerate().any(|(i, f)| header[i].trim() != *f)
        || (fixed.len()..header.len()).any(|i| header[i].trim() != format!("cluster_{}", i - fixed.len()))
    {
        return Err(parse_err(1, "expected header algorithm,problem,seed,iteration,cluster_0,...".into()));
    }
    let c = header.len() - fixed.len();

    let mut order: Vec<(String, String, u64)> = Vec::new();
    let mut rows: HashMap<(String, String, u64), BTreeMap<usize, Vec<u32>>> = HashMap::new();
    for record in records {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", header.len(), record.len())));
        }
        let int = |i: usize| {
            record[i]
                .trim()
                .parse::<u64>()
                .map_err(|_| parse_err(line, format!("`{}` is not a non-negative integer", &record[i])))
        };
        let seed = int(2)?;
        let iteration = int(3)? as usize;
        let counts = (0..c)
            .map(|j| int(fixed.len() + j).map(|v| v as u32))
            .collect::<Result<Vec<u32>>>()?;
        let key = (record[0].to_string(), record[1].to_string(), seed);
        let group = rows.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            BTreeMap::new()
        });
        if group.insert(iteration, counts).is_some() {
            return Err(parse_err(line, format!("duplicate iteration {iteration}")));
        }
    }

    let mut out = Vec::with_capacity(order.len());
    for key in order {
        let group = rows.remove(&key).expect("grouped above");
        let structural = |message: String| Error::Structure {
            path: name.to_string(),
            message: format!("representation ({}, {}, seed {}): {message}", key.0, key.1, key.2),
        };
        let b = group.len();
        if group.keys().copied().ne(0..b) {
            return Err(structural("iterations are not contiguous from 0".into()));
        }
        let sums: Vec<u64> = group.values().map(|r| r.iter().map(|&v| u64::from(v)).sum()).collect();
        if sums.iter().any(|&s| s != sums[0]) {
            return Err(structural("iteration rows do not all sum to the same population size".into()));
        }
        out.push(TrajectoryRepresentation {
            algorithm: key.0.clone(),
            problem: key.1.clone(),
            seed: key.2,
            model: String::new(),
            population: sums[0] as usize,
            clusters: c,
            counts: group.into_values().flatten().collect(),
        });
    }
    Ok(out)
}
