//! Trajectory data model, merging, and the trajectory CSV format.
//!
//! A trajectory file holds one row per candidate solution:
//!
//! ```text
//! algorithm,problem,seed,iteration,slot,fitness,x0,x1,...,x{d-1}
//! ```
//!
//! Iterations and slots are 0-based and contiguous within each
//! `(algorithm, problem, seed)` group. Groups are returned in order of first
//! appearance; rows within a group may come in any order.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FIXED_COLUMNS: [&str; 6] = ["algorithm", "problem", "seed", "iteration", "slot", "fitness"];

/// One seeded run: `iterations x population x dimension` solutions plus
/// their objective values. Iteration 0 is the initial population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub algorithm: String,
    pub problem: String,
    pub seed: u64,
    iterations: usize,
    population: usize,
    dimension: usize,
    /// Row-major `[iteration][slot][coordinate]`.
    data: Vec<f64>,
    /// Row-major `[iteration][slot]`.
    fitness: Vec<f64>,
}

impl Trajectory {
    pub fn new(
        algorithm: impl Into<String>,
        problem: impl Into<String>,
        seed: u64,
        shape: (usize, usize, usize),
        data: Vec<f64>,
        fitness: Vec<f64>,
    ) -> Result<Self> {
        let (b, s, d) = shape;
        if b == 0 || s == 0 || d == 0 {
            return Err(Error::usage(format!("trajectory shape {b}x{s}x{d} has an empty axis")));
        }
        if data.len() != b * s * d || fitness.len() != b * s {
            return Err(Error::usage(format!(
                "trajectory shape {b}x{s}x{d} does not match {} coordinates and {} fitness values",
                data.len(),
                fitness.len()
            )));
        }
        if data.iter().chain(&fitness).any(|v| !v.is_finite()) {
            return Err(Error::usage("trajectory contains non-finite values"));
        }
        Ok(Trajectory {
            algorithm: algorithm.into(),
            problem: problem.into(),
            seed,
            iterations: b,
            population: s,
            dimension: d,
            data,
            fitness,
        })
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.iterations, self.population, self.dimension)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    /// All solutions of one iteration, `population x dimension` row-major.
    pub fn iteration(&self, i: usize) -> &[f64] {
        let len = self.population * self.dimension;
        &self.data[i * len..(i + 1) * len]
    }

    pub fn iteration_fitness(&self, i: usize) -> &[f64] {
        &self.fitness[i * self.population..(i + 1) * self.population]
    }

    pub fn solution(&self, iteration: usize, slot: usize) -> &[f64] {
        let start = (iteration * self.population + slot) * self.dimension;
        &self.data[start..start + self.dimension]
    }

    /// Permute the slots of one iteration; used to check order invariance.
    pub fn permute_iteration(&mut self, iteration: usize, order: &[usize]) {
        assert_eq!(order.len(), self.population);
        let d = self.dimension;
        let old = self.iteration(iteration).to_vec();
        let old_fit = self.iteration_fitness(iteration).to_vec();
        let base = iteration * self.population;
        for (new_slot, &old_slot) in order.iter().enumerate() {
            self.data[(base + new_slot) * d..(base + new_slot + 1) * d]
                .copy_from_slice(&old[old_slot * d..(old_slot + 1) * d]);
            self.fitness[base + new_slot] = old_fit[old_slot];
        }
    }
}

/// Where a merged point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Provenance {
    /// Index into the list passed to [`merge`].
    pub trajectory: usize,
    pub iteration: usize,
    pub slot: usize,
}

/// All candidate solutions of a set of trajectories on one problem.
#[derive(Debug, Clone)]
pub struct MergedSolutionSet {
    pub problem: String,
    pub dimension: usize,
    /// `len() x dimension`, row-major.
    pub points: Vec<f64>,
    pub provenance: Vec<Provenance>,
    /// `(algorithm, seed)` per merged trajectory, indexed by `Provenance::trajectory`.
    pub sources: Vec<(String, u64)>,
}

impl MergedSolutionSet {
    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    pub fn point(&self, row: usize) -> &[f64] {
        &self.points[row * self.dimension..(row + 1) * self.dimension]
    }
}

/// Stack every solution of every trajectory, in input order, then iteration,
/// then slot.
pub fn merge<'a, I>(trajectories: I) -> Result<MergedSolutionSet>
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    let mut iter = trajectories.into_iter().peekable();
    let first = iter
        .peek()
        .ok_or_else(|| Error::usage("cannot merge an empty list of trajectories"))?;
    let mut merged = MergedSolutionSet {
        problem: first.problem.clone(),
        dimension: first.dimension,
        points: Vec::new(),
        provenance: Vec::new(),
        sources: Vec::new(),
    };
    for (index, t) in iter.enumerate() {
        if t.dimension != merged.dimension {
            return Err(Error::usage(format!(
                "cannot merge trajectories of dimension {} and {}",
                merged.dimension, t.dimension
            )));
        }
        if t.problem != merged.problem {
            return Err(Error::usage(format!(
                "cannot merge trajectories of different problems (`{}` and `{}`)",
                merged.problem, t.problem
            )));
        }
        merged.points.extend_from_slice(&t.data);
        for iteration in 0..t.iterations {
            for slot in 0..t.population {
                merged.provenance.push(Provenance {
                    trajectory: index,
                    iteration,
                    slot,
                });
            }
        }
        merged.sources.push((t.algorithm.clone(), t.seed));
    }
    Ok(merged)
}

pub fn write_trajectories(trajectories: &[Trajectory], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_trajectories_to(trajectories, &mut buf)?;
    crate::io::write_file(path, &buf)
}

/// Serialize to any writer. All trajectories must share a dimension.
pub fn write_trajectories_to<W: Write>(trajectories: &[Trajectory], out: W) -> Result<()> {
    let Some(first) = trajectories.first() else {
        return Ok(());
    };
    let d = first.dimension;
    if let Some(t) = trajectories.iter().find(|t| t.dimension != d) {
        return Err(Error::usage(format!(
            "one file cannot mix dimensions {d} and {}",
            t.dimension
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..d).map(|i| format!("x{i}")));
    w.write_record(&header).map_err(csv_write_error)?;
    let mut row: Vec<String> = Vec::with_capacity(6 + d);
    for t in trajectories {
        for i in 0..t.iterations {
            for s in 0..t.population {
                row.clear();
                row.push(t.algorithm.clone());
                row.push(t.problem.clone());
                row.push(t.seed.to_string());
                row.push(i.to_string());
                row.push(s.to_string());
                row.push(t.fitness[i * t.population + s].to_string());
                row.extend(t.solution(i, s).iter().map(|v| v.to_string()));
                w.write_record(&row).map_err(csv_write_error)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectories_from(file, &path.display().to_string())
}

struct Group {
    algorithm: String,
    problem: String,
    seed: u64,
    rows: Vec<(usize, usize, f64, Vec<f64>, u64)>,
}

/// Parse trajectory CSV from a reader; `name` is used in error messages.
pub fn read_trajectories_from<R: Read>(input: R, name: &str) -> Result<Vec<Trajectory>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();

    let header = match records.next() {
        None => return Ok(Vec::new()),
        Some(r) => r.map_err(|e| csv_read_error(name, e))?,
    };
    let dimension = parse_header(&header, name)?;
    let width = FIXED_COLUMNS.len() + dimension;

    let parse_err = |line: u64, message: String| Error::Parse {
        path: name.to_string(),
        line,
        message,
    };

    let mut groups: Vec<Group> = Vec::new();
    let mut lookup: HashMap<(String, String, u64), usize> = HashMap::new();
    for record in records {
        let record = record.map_err(|e| csv_read_error(name, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let field_u64 = |i: usize| {
            record[i]
                .trim()
                .parse::<u64>()
                .map_err(|_| parse_err(line, format!("`{}` is not a valid {}", &record[i], FIXED_COLUMNS[i])))
        };
        let field_f64 = |i: usize, what: &str| {
            let raw = record[i].trim();
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_err(line, format!("`{raw}` is not a finite number ({what})"))),
            }
        };
        let seed = field_u64(2)?;
        let iteration = field_u64(3)? as usize;
        let slot = field_u64(4)? as usize;
        let fitness = field_f64(5, "fitness")?;
        let x = (0..dimension)
            .map(|j| field_f64(FIXED_COLUMNS.len() + j, &format!("x{j}")))
            .collect::<Result<Vec<f64>>>()?;

        let key = (record[0].to_string(), record[1].to_string(), seed);
        let idx = *lookup.entry(key).or_insert_with(|| {
            groups.push(Group {
                algorithm: record[0].to_string(),
                problem: record[1].to_string(),
                seed,
                rows: Vec::new(),
            });
            groups.len() - 1
        });
        groups[idx].rows.push((iteration, slot, fitness, x, line));
    }

    groups
        .into_iter()
        .map(|g| assemble(g, dimension, name))
        .collect()
}

fn parse_header(header: &csv::StringRecord, name: &str) -> Result<usize> {
    let bad = |message: String| Error::Parse {
        path: name.to_string(),
        line: 1,
        message,
    };
    if header.len() <= FIXED_COLUMNS.len() {
        return Err(bad("header needs the fixed columns plus at least x0".into()));
    }
    for (i, expected) in FIXED_COLUMNS.iter().enumerate() {
        if header[i].trim() != *expected {
            return Err(bad(format!("column {} must be `{expected}`, found `{}`", i + 1, &header[i])));
        }
    }
    let dimension = header.len() - FIXED_COLUMNS.len();
    for j in 0..dimension {
        let got = header[FIXED_COLUMNS.len() + j].trim();
        if got != format!("x{j}") {
            return Err(bad(format!("expected coordinate column `x{j}`, found `{got}`")));
        }
    }
    Ok(dimension)
}

fn assemble(group: Group, d: usize, name: &str) -> Result<Trajectory> {
    let structural = |message: String| Error::Structure {
        path: name.to_string(),
        message: format!(
            "trajectory ({}, {}, seed {}): {message}",
            group.algorithm, group.problem, group.seed
        ),
    };
    let b = group.rows.iter().map(|r| r.0).max().unwrap_or(0) + 1;
    let s = group.rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
    if group.rows.len() != b * s {
        return Err(structural(format!(
            "{} rows do not fill a {b} x {s} iteration/slot grid",
            group.rows.len()
        )));
    }
    let mut data = vec![0.0; b * s * d];
    let mut fitness = vec![0.0; b * s];
    let mut seen = vec![false; b * s];
    for (iteration, slot, fit, x, line) in &group.rows {
        let cell = iteration * s + slot;
        if std::mem::replace(&mut seen[cell], true) {
            return Err(structural(format!(
                "duplicate iteration {iteration}, slot {slot} at line {line}"
            )));
        }
        fitness[cell] = *fit;
        data[cell * d..(cell + 1) * d].copy_from_slice(x);
    }
    Trajectory::new(
        group.algorithm.clone(),
        group.problem.clone(),
        group.seed,
        (b, s, d),
        data,
        fitness,
    )
    .map_err(|e| structural(e.to_string()))
}

fn csv_read_error(name: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: name.to_string(),
        line,
        message: e.to_string(),
    }
}

fn csv_write_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        other => Error::usage(format!("csv write failed: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn make(alg: &str, seed: u64, b: usize, s: usize, d: usize) -> Trajectory {
        let data = (0..b * s * d).map(|i| i as f64 * 0.25 - 3.0).collect();
        let fitness = (0..b * s).map(|i| (i as f64).sqrt()).collect();
        Trajectory::new(alg, "sphere-d2-i1", seed, (b, s, d), data, fitness).unwrap()
    }

    fn round_trip(ts: &[Trajectory]) -> Vec<Trajectory> {
        let mut buf = Vec::new();
        write_trajectories_to(ts, &mut buf).unwrap();
        read_trajectories_from(buf.as_slice(), "mem").unwrap()
    }

    #[test]
    fn merge_counts_rows() {
        let mut ts = Vec::new();
        for alg in ["a", "b", "c"] {
            for seed in 0..5 {
                ts.push(make(alg, seed, 20, 50, 2));
            }
        }
        let m = merge(&ts).unwrap();
        assert_eq!(m.len(), 15000);
        assert_eq!(m.points.len(), 30000);
        assert_eq!(m.sources.len(), 15);
    }

    #[test]
    fn merge_singleton_and_prefix_stability() {
        let one = make("a", 0, 1, 1, 2);
        assert_eq!(merge([&one]).unwrap().len(), 1);

        let t1 = make("a", 0, 3, 4, 2);
        let t2 = make("b", 1, 2, 4, 2);
        let m1 = merge([&t1]).unwrap();
        let m12 = merge([&t1, &t2]).unwrap();
        assert_eq!(m1.points[..], m12.points[..m1.points.len()]);
        assert_eq!(m1.provenance[..], m12.provenance[..m1.len()]);
        assert_eq!(m12.provenance[m1.len()], Provenance { trajectory: 1, iteration: 0, slot: 0 });
    }

    #[test]
    fn merge_provenance_maps_back() {
        let ts = vec![make("a", 0, 3, 4, 2), make("b", 1, 2, 5, 2)];
        let m = merge(&ts).unwrap();
        let mut seen = std::collections::HashSet::new();
        for (row, p) in m.provenance.iter().enumerate() {
            assert!(seen.insert(*p));
            assert_eq!(m.point(row), ts[p.trajectory].solution(p.iteration, p.slot));
        }
        assert_eq!(seen.len(), 3 * 4 + 2 * 5);
    }

    #[test]
    fn merge_rejects_mixed_inputs() {
        let a = make("a", 0, 2, 2, 2);
        let b = make("b", 0, 2, 2, 3);
        assert!(matches!(merge([&a, &b]), Err(Error::Usage(_))));
        let mut c = make("c", 0, 2, 2, 2);
        c.problem = "other".into();
        assert!(matches!(merge([&a, &c]), Err(Error::Usage(_))));
        assert!(merge(std::iter::empty::<&Trajectory>()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ts = vec![make("de_rand_1_bin", 3, 20, 50, 2), make("woa", 4, 2, 3, 2)];
        assert_eq!(round_trip(&ts), ts);
    }

    #[test]
    fn empty_inputs() {
        assert!(read_trajectories_from(&b""[..], "empty").unwrap().is_empty());
        let header_only = b"algorithm,problem,seed,iteration,slot,fitness,x0,x1\n";
        assert!(read_trajectories_from(&header_only[..], "h").unwrap().is_empty());
    }

    #[test]
    fn missing_coordinate_names_line() {
        let text = "algorithm,problem,seed,iteration,slot,fitness,x0,x1\n\
                    a,p,0,0,0,1.0,0.5,0.5\n\
                    a,p,0,0,1,1.0,0.5\n";
        let err = read_trajectories_from(text.as_bytes(), "f.csv").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_names_line() {
        let text = "algorithm,problem,seed,iteration,slot,fitness,x0\na,p,0,0,0,abc,0.5\n";
        let err = read_trajectories_from(text.as_bytes(), "f.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn structural_gaps_are_rejected() {
        // slot 1 of iteration 1 is missing
        let text = "algorithm,problem,seed,iteration,slot,fitness,x0\n\
                    a,p,0,0,0,1,0\na,p,0,0,1,1,0\na,p,0,1,0,1,0\n";
        let err = read_trajectories_from(text.as_bytes(), "f.csv").unwrap_err();
        assert!(matches!(err, Error::Structure { .. }), "{err}");

        let dup = "algorithm,problem,seed,iteration,slot,fitness,x0\na,p,0,0,0,1,0\na,p,0,0,0,1,0\n";
        assert!(read_trajectories_from(dup.as_bytes(), "f.csv").is_err());
    }

    #[test]
    fn rows_in_any_order() {
        let text = "algorithm,problem,seed,iteration,slot,fitness,x0\n\
                    a,p,0,1,1,4,4\na,p,0,0,0,1,1\na,p,0,1,0,3,3\na,p,0,0,1,2,2\n";
        let ts = read_trajectories_from(text.as_bytes(), "f.csv").unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn bad_header() {
        let text = "algo,problem,seed,iteration,slot,fitness,x0\n";
        assert!(matches!(
            read_trajectories_from(text.as_bytes(), "f.csv"),
            Err(Error::Parse { line: 1, .. })
        ));
        let text = "algorithm,problem,seed,iteration,slot,fitness,y0\n";
        assert!(read_trajectories_from(text.as_bytes(), "f.csv").is_err());
    }
}
