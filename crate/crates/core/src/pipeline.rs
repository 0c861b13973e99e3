//! End-to-end experiments: run every algorithm on every problem instance
//! with a shared set of seeds, fit one cluster model per problem, build
//! representations, and compute stability and similarity.
//!
//! Problems are independent. Within a problem, runs are parallel, the
//! clustering stages form a barrier, and representations are parallel
//! again. Every random stream is derived from the master seed by label, so
//! adding an algorithm or a problem never changes the seeds of the others.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{self, AlgorithmConfig, AlgorithmId};
use crate::clustering::{kmeans_fit, select_k_elbow, ClusterModel, KSelection, Scaler, DEFAULT_K_MAX, DEFAULT_K_MIN};
use crate::error::{Error, Result};
use crate::metrics::{self, Granularity, Missing, SimilarityMatrix, StabilityTable};
use crate::problems::{FunctionId, ProblemInstance};
use crate::representation::{self, ModelRef, RepresentationMeta, TrajectoryRepresentation};
use crate::seed;
use crate::trajectory::{self, Trajectory};
use crate::viz::{self, FinalPopulations, ToPlotTable};

/// Environment variable that replaces the configured master seed.
pub const SEED_ENV: &str = "CLUSTOPT_SEED";

/// `k = "auto"` or `k = <integer>` in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KChoice {
    #[default]
    Auto,
    Fixed(usize),
}

impl FromStr for KChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(KChoice::Auto),
            other => other
                .parse()
                .map(KChoice::Fixed)
                .map_err(|_| Error::Config(format!("k must be `auto` or a positive integer, got `{other}`"))),
        }
    }
}

impl fmt::Display for KChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KChoice::Auto => f.write_str("auto"),
            KChoice::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl Serialize for KChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KChoice::Auto => s.serialize_str("auto"),
            KChoice::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for KChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(k) => Ok(KChoice::Fixed(k as usize)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// An algorithm by name, optionally with parameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgorithmEntry {
    Name(String),
    Detailed {
        name: String,
        #[serde(default)]
        parameters: BTreeMap<String, f64>,
    },
}

impl AlgorithmEntry {
    fn name(&self) -> &str {
        match self {
            AlgorithmEntry::Name(n) | AlgorithmEntry::Detailed { name: n, .. } => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub functions: Vec<String>,
    pub dimensions: Vec<usize>,
    /// Instance seeds; each yields one shifted (and possibly rotated) problem.
    pub instances: Vec<u64>,
    pub algorithms: Vec<AlgorithmEntry>,
    pub population_size: usize,
    /// Recorded iterations per run; `None` means `10 * d`.
    pub iterations: Option<usize>,
    /// Number of run seeds derived from the master seed.
    pub runs: usize,
    /// Explicit run seeds, used instead of derived ones when non-empty.
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub k: KChoice,
    pub k_min: usize,
    pub k_max: usize,
    pub missing: Missing,
    pub granularity: Granularity,
    /// Render one SVG heatmap per trajectory.
    pub heatmaps: bool,
    /// Trajectory CSVs to cluster alongside (or instead of) built-in runs.
    pub external_trajectories: Vec<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            functions: Vec::new(),
            dimensions: vec![2],
            instances: vec![1],
            algorithms: Vec::new(),
            population_size: algorithms::DEFAULT_POPULATION,
            iterations: None,
            runs: 5,
            seeds: Vec::new(),
            master_seed: 0,
            k: KChoice::Auto,
            k_min: DEFAULT_K_MIN,
            k_max: DEFAULT_K_MAX,
            missing: Missing::Fail,
            granularity: Granularity::Instance,
            heatmaps: false,
            external_trajectories: Vec::new(),
            output_dir: None,
            jobs: None,
        }
    }
}

/// A validated config, expanded into concrete work.
#[derive(Debug, Clone)]
pub struct Plan {
    pub instances: Vec<ProblemInstance>,
    pub algorithms: Vec<AlgorithmConfig>,
    pub seeds: Vec<u64>,
    pub k: KSelection,
}

impl ExperimentConfig {
    /// Parse TOML, or JSON when the extension is `.json`. Relative external
    /// trajectory paths resolve against the config file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        let name = path.display().to_string();
        let mut config = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str::<Self>(&text).map_err(|e| Error::Parse {
                path: name,
                line: e.line() as u64,
                message: e.to_string(),
            })?
        } else {
            Self::from_toml(&text, &name)?
        };
        if let Some(base) = path.parent() {
            for p in &mut config.external_trajectories {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn from_toml(text: &str, name: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1);
            Error::Parse {
                path: name.to_string(),
                line,
                message: e.message().to_string(),
            }
        })
    }

    /// Apply `CLUSTOPT_SEED` if set.
    pub fn with_env_overrides(mut self) -> Result<Self> {
        if let Ok(value) = std::env::var(SEED_ENV) {
            self.master_seed = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}=`{value}` is not an unsigned integer")))?;
        }
        Ok(self)
    }

    /// SHA-256 of the settings that affect results (not output location or
    /// thread count).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        canonical.jobs = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        seed::sha256_hex(&bytes)
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.runs as u64).map(|j| seed::derive_indexed(self.master_seed, "run", j)).collect()
        } else {
            self.seeds.clone()
        }
    }

    pub fn plan(&self) -> Result<Plan> {
        if self.functions.is_empty() && self.external_trajectories.is_empty() {
            return Err(Error::Config("no functions and no external trajectories configured".into()));
        }
        if !self.functions.is_empty() {
            if self.algorithms.is_empty() {
                return Err(Error::Config("no algorithms configured".into()));
            }
            if self.dimensions.is_empty() || self.dimensions.contains(&0) {
                return Err(Error::Config("dimensions must be a non-empty list of positive integers".into()));
            }
            if self.instances.is_empty() {
                return Err(Error::Config("instances must not be empty".into()));
            }
        }
        let seeds = self.run_seeds();
        if seeds.is_empty() && !self.functions.is_empty() {
            return Err(Error::Config("at least one run seed is required".into()));
        }
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            return Err(Error::Config("run seeds must be distinct".into()));
        }

        let mut functions = Vec::new();
        for f in &self.functions {
            let id: FunctionId = f.parse()?;
            if functions.contains(&id) {
                return Err(Error::Config(format!("function `{id}` listed twice")));
            }
            functions.push(id);
        }
        let mut instances = Vec::new();
        for &f in &functions {
            for &d in &self.dimensions {
                for &i in &self.instances {
                    instances.push(ProblemInstance::new(f, d, i)?);
                }
            }
        }
        let ids: BTreeSet<String> = instances.iter().map(ProblemInstance::id).collect();
        if ids.len() != instances.len() {
            return Err(Error::Config("duplicate problem instances (repeated dimension or instance?)".into()));
        }

        let mut algs = Vec::new();
        for entry in &self.algorithms {
            let id: AlgorithmId = entry.name().parse()?;
            if algs.iter().any(|a: &AlgorithmConfig| a.algorithm == id) {
                return Err(Error::Config(format!("algorithm `{id}` listed twice")));
            }
            let mut cfg = AlgorithmConfig::new(id);
            cfg.population_size = self.population_size;
            cfg.iterations = self.iterations;
            if let AlgorithmEntry::Detailed { parameters, .. } = entry {
                cfg.parameters = parameters.clone();
            }
            cfg.validate()?;
            algs.push(cfg);
        }

        let k = match self.k {
            KChoice::Fixed(0) => return Err(Error::Config("k must be positive".into())),
            KChoice::Fixed(k) => KSelection::Fixed(k),
            KChoice::Auto => {
                if self.k_min < 2 || self.k_max < self.k_min {
                    return Err(Error::Config(format!(
                        "k range [{}, {}] invalid (need 2 <= k_min <= k_max)",
                        self.k_min, self.k_max
                    )));
                }
                KSelection::Auto {
                    k_min: self.k_min,
                    k_max: self.k_max,
                }
            }
        };
        Ok(Plan {
            instances,
            algorithms: algs,
            seeds,
            k,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Run,
    Merge,
    Scale,
    Elbow,
    Fit,
    Represent,
    Metrics,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Run,
        Stage::Merge,
        Stage::Scale,
        Stage::Elbow,
        Stage::Fit,
        Stage::Represent,
        Stage::Metrics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Run => "run",
            Stage::Merge => "merge",
            Stage::Scale => "scale",
            Stage::Elbow => "elbow",
            Stage::Fit => "fit",
            Stage::Represent => "represent",
            Stage::Metrics => "metrics",
        }
    }
}

pub type StageTimings = BTreeMap<Stage, Duration>;

/// Everything produced for one problem.
#[derive(Debug, Clone)]
pub struct ProblemOutcome {
    pub problem: String,
    pub dimension: usize,
    pub model: ClusterModel,
    pub trajectories: Vec<Trajectory>,
    pub representations: Vec<TrajectoryRepresentation>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    /// Sorted by problem id.
    pub problems: Vec<ProblemOutcome>,
    pub stability: StabilityTable,
    /// Over every problem; `None` when there are no representations.
    pub similarity: Option<SimilarityMatrix>,
    /// Restricted to one dimension, present when several dimensions ran.
    pub similarity_by_dimension: BTreeMap<usize, SimilarityMatrix>,
    pub metrics_time: Duration,
    /// Set once outputs have been written.
    pub manifest: Option<Manifest>,
}

impl ExperimentResult {
    pub fn problem(&self, id: &str) -> Option<&ProblemOutcome> {
        self.problems.iter().find(|p| p.problem == id)
    }

    pub fn representations(&self) -> impl Iterator<Item = &TrajectoryRepresentation> {
        self.problems.iter().flat_map(|p| &p.representations)
    }
}

struct Unit {
    problem: String,
    instance: Option<ProblemInstance>,
    external: Vec<Trajectory>,
}

fn timed<T>(timings: &mut StageTimings, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    *timings.entry(stage).or_default() += start.elapsed();
    out
}

fn process(unit: Unit, plan: &Plan, master_seed: u64) -> Result<ProblemOutcome> {
    let owned = unit.problem.clone();
    let problem = owned.as_str();
    let staged = |stage: Stage| move |e: Error| e.in_stage(stage.name(), problem);
    let mut timings = StageTimings::new();

    let trajectories = timed(&mut timings, Stage::Run, || {
        let mut out: Vec<Trajectory> = match &unit.instance {
            Some(instance) => {
                let jobs: Vec<(&AlgorithmConfig, u64)> = plan
                    .algorithms
                    .iter()
                    .flat_map(|a| plan.seeds.iter().map(move |&s| (a, s)))
                    .collect();
                jobs.par_iter()
                    .map(|(cfg, s)| algorithms::run(cfg, instance, *s).map(|r| r.trajectory))
                    .collect::<Result<_>>()?
            }
            None => Vec::new(),
        };
        let mut seen: BTreeSet<(String, u64)> = out.iter().map(|t| (t.algorithm.clone(), t.seed)).collect();
        for t in unit.external {
            if !seen.insert((t.algorithm.clone(), t.seed)) {
                return Err(Error::Config(format!(
                    "trajectory for {} with seed {} supplied twice",
                    t.algorithm, t.seed
                )));
            }
            out.push(t);
        }
        Ok(out)
    })
    .map_err(staged(Stage::Run))?;
    log::info!("{}: {} trajectories", unit.problem, trajectories.len());

    let merged = timed(&mut timings, Stage::Merge, || trajectory::merge(&trajectories)).map_err(staged(Stage::Merge))?;
    let dim = merged.dimension;
    let (scaler, scaled) = timed(&mut timings, Stage::Scale, || {
        let scaler = Scaler::fit(&merged.points, dim)?;
        let scaled = scaler.transform(&merged.points);
        Ok((scaler, scaled))
    })
    .map_err(staged(Stage::Scale))?;
    drop(merged);

    let kmeans_seed = seed::derive(master_seed, &format!("kmeans/{}", unit.problem));
    let (k, trace) = timed(&mut timings, Stage::Elbow, || match plan.k {
        KSelection::Fixed(k) => Ok((k, Vec::new())),
        KSelection::Auto { k_min, k_max } => {
            let n = scaled.len() / dim;
            let scan = select_k_elbow(&scaled, dim, k_min, k_max.min(n), kmeans_seed)?;
            Ok((scan.k, scan.trace))
        }
    })
    .map_err(staged(Stage::Elbow))?;
    let model = timed(&mut timings, Stage::Fit, || {
        let fit = kmeans_fit(&scaled, dim, k, kmeans_seed)?;
        let mut model = ClusterModel::from_parts(scaler, &fit, trace, kmeans_seed);
        model.problem = Some(unit.problem.clone());
        Ok(model)
    })
    .map_err(staged(Stage::Fit))?;
    log::info!("{}: k = {}", unit.problem, model.num_clusters());

    let representations = timed(&mut timings, Stage::Represent, || {
        trajectories
            .par_iter()
            .map(|t| representation::build_representation(t, &model))
            .collect::<Result<Vec<_>>>()
    })
    .map_err(staged(Stage::Represent))?;

    Ok(ProblemOutcome {
        problem: unit.problem,
        dimension: dim,
        model,
        trajectories,
        representations,
        timings,
    })
}

fn build_units(config: &ExperimentConfig, plan: &Plan) -> Result<Vec<Unit>> {
    let mut units: BTreeMap<String, Unit> = plan
        .instances
        .iter()
        .map(|inst| {
            (
                inst.id(),
                Unit {
                    problem: inst.id(),
                    instance: Some(inst.clone()),
                    external: Vec::new(),
                },
            )
        })
        .collect();
    for path in &config.external_trajectories {
        for t in trajectory::read_trajectories(path)? {
            let unit = units.entry(t.problem.clone()).or_insert_with(|| Unit {
                problem: t.problem.clone(),
                instance: None,
                external: Vec::new(),
            });
            unit.external.push(t);
        }
    }
    Ok(units.into_values().collect())
}

/// Run the configured experiment and, when `output_dir` is set, write every
/// artifact plus `manifest.json` there.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let plan = config.plan()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = config.jobs.filter(|&j| j > 0) {
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;

    let units = build_units(config, &plan)?;
    let problems = pool.install(|| {
        units
            .into_par_iter()
            .map(|u| process(u, &plan, config.master_seed))
            .collect::<Result<Vec<_>>>()
    })?;

    let start = Instant::now();
    let metrics = compute_metrics(&problems, config).map_err(|e| e.in_stage(Stage::Metrics.name(), "*"))?;
    let metrics_time = start.elapsed();

    let mut result = ExperimentResult {
        config: config.clone(),
        seeds: plan.seeds,
        problems,
        stability: metrics.0,
        similarity: metrics.1,
        similarity_by_dimension: metrics.2,
        metrics_time,
        manifest: None,
    };
    if let Some(dir) = &config.output_dir {
        result.manifest = Some(write_outputs(&result, dir)?);
    }
    Ok(result)
}

type Metrics = (StabilityTable, Option<SimilarityMatrix>, BTreeMap<usize, SimilarityMatrix>);

fn compute_metrics(problems: &[ProblemOutcome], config: &ExperimentConfig) -> Result<Metrics> {
    let reps: Vec<TrajectoryRepresentation> = problems.iter().flat_map(|p| p.representations.iter().cloned()).collect();
    let stability = metrics::stability_table(&reps)?;
    if reps.is_empty() {
        return Ok((stability, None, BTreeMap::new()));
    }
    let similarity = metrics::similarity_matrix(&reps, config.missing, config.granularity)?;
    let dims: BTreeSet<usize> = problems.iter().map(|p| p.dimension).collect();
    let mut by_dim = BTreeMap::new();
    if dims.len() > 1 {
        for d in dims {
            let subset: Vec<TrajectoryRepresentation> = problems
                .iter()
                .filter(|p| p.dimension == d)
                .flat_map(|p| p.representations.iter().cloned())
                .collect();
            by_dim.insert(d, metrics::similarity_matrix(&subset, config.missing, config.granularity)?);
        }
    }
    Ok((stability, Some(similarity), by_dim))
}

/// Wall-clock time per stage, summed over problems.
pub fn timing_report(result: &ExperimentResult) -> Vec<StageTiming> {
    let mut totals: StageTimings = Stage::ALL.iter().map(|&s| (s, Duration::ZERO)).collect();
    for p in &result.problems {
        for (stage, d) in &p.timings {
            *totals.entry(*stage).or_default() += *d;
        }
    }
    *totals.entry(Stage::Metrics).or_default() += result.metrics_time;
    totals
        .into_iter()
        .map(|(stage, d)| StageTiming {
            stage,
            seconds: d.as_secs_f64(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestProblem {
    pub problem: String,
    pub dimension: usize,
    pub k: usize,
    pub model: String,
    pub fingerprint: String,
    pub trajectories: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub run_seeds: Vec<u64>,
    pub problems: Vec<ManifestProblem>,
    /// `problem/algorithm` pairs with fewer than two seeds.
    pub stability_absent: Vec<String>,
    /// Sorted by path.
    pub files: Vec<ManifestFile>,
    /// SHA-256 over the file inventory; equal across identical reruns.
    pub content_hash: String,
    /// Varies between runs; excluded from `content_hash`.
    pub timings: Vec<StageTiming>,
}

/// File-name-safe form of a problem or algorithm id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Manifest> {
    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    let mut problems = Vec::new();
    for p in &result.problems {
        let stem = file_stem(&p.problem);
        let stage_err = |e: Error| e.in_stage("write", &p.problem);

        let mut buf = Vec::new();
        trajectory::write_trajectories_to(&p.trajectories, &mut buf).map_err(stage_err)?;
        files.insert(format!("trajectories/{stem}.csv"), buf);

        let model_file = format!("models/{stem}.json");
        files.insert(model_file.clone(), json_bytes(&p.model)?);

        let reps_file = format!("representations/{stem}.csv");
        files.insert(reps_file.clone(), representation::representations_csv(&p.representations)?);
        let mut meta = RepresentationMeta::default();
        meta.models.insert(
            p.problem.clone(),
            ModelRef {
                file: format!("../{model_file}"),
                fingerprint: p.model.fingerprint(),
            },
        );
        files.insert(format!("{reps_file}.meta.json"), json_bytes(&meta)?);

        files.insert(
            format!("final_populations/{stem}.csv"),
            FinalPopulations(&p.trajectories).to_plot_table().to_csv()?,
        );
        if result.config.heatmaps {
            for r in &p.representations {
                let spec = viz::HeatmapSpec::new(r, &p.model).map_err(stage_err)?;
                files.insert(
                    format!("heatmaps/{stem}/{}-seed{}.svg", file_stem(&r.algorithm), r.seed),
                    viz::heatmap_svg(&spec).into_bytes(),
                );
            }
        }
        problems.push(ManifestProblem {
            problem: p.problem.clone(),
            dimension: p.dimension,
            k: p.model.num_clusters(),
            model: model_file,
            fingerprint: p.model.fingerprint(),
            trajectories: p.trajectories.len(),
        });
    }

    let stab = &result.stability;
    files.insert("stability.csv".into(), stab.to_plot_table().to_csv()?);
    files.insert("stability_by_class.csv".into(), stab.by_class().to_plot_table().to_csv()?);
    files.insert(
        "stability.svg".into(),
        viz::stability_svg(stab, "Algorithm stability per problem").into_bytes(),
    );
    if let Some(sim) = &result.similarity {
        files.insert("similarity.csv".into(), sim.to_plot_table().to_csv()?);
        files.insert("similarity.json".into(), json_bytes(sim)?);
        files.insert("similarity.svg".into(), viz::clustermap_svg(sim, "Algorithm similarity").into_bytes());
    }
    for (d, sim) in &result.similarity_by_dimension {
        files.insert(format!("similarity_d{d}.csv"), sim.to_plot_table().to_csv()?);
        files.insert(
            format!("similarity_d{d}.svg"),
            viz::clustermap_svg(sim, &format!("Algorithm similarity, {d}d")).into_bytes(),
        );
    }

    let mut config = result.config.clone();
    config.output_dir = None;
    config.jobs = None;
    files.insert("config.json".into(), json_bytes(&config)?);

    for (rel, bytes) in &files {
        crate::io::write_file(&dir.join(rel), bytes)?;
    }

    let inventory: Vec<ManifestFile> = files
        .iter()
        .map(|(path, bytes)| ManifestFile {
            path: path.clone(),
            sha256: seed::sha256_hex(bytes),
            bytes: bytes.len() as u64,
        })
        .collect();
    let listing: String = inventory.iter().map(|f| format!("{}\t{}\n", f.path, f.sha256)).collect();

    let mut absent = Vec::new();
    for (i, p) in stab.problems.iter().enumerate() {
        for (j, a) in stab.algorithms.iter().enumerate() {
            if stab.scores[i][j].is_none() {
                absent.push(format!("{p}/{a}"));
            }
        }
    }

    let manifest = Manifest {
        generator: format!("clustopt {}", env!("CARGO_PKG_VERSION")),
        config_hash: result.config.hash(),
        master_seed: result.config.master_seed,
        run_seeds: result.seeds.clone(),
        problems,
        stability_absent: absent,
        files: inventory,
        content_hash: seed::sha256_hex(listing.as_bytes()),
        timings: timing_report(result),
    };
    crate::io::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            functions: vec!["sphere".into(), "linear_slope".into()],
            dimensions: vec![2],
            instances: vec![1],
            algorithms: ["de_rand_1_bin", "de_best_1_bin", "woa", "aeo"]
                .iter()
                .map(|s| AlgorithmEntry::Name(s.to_string()))
                .collect(),
            population_size: 50,
            iterations: Some(20),
            runs: 5,
            master_seed: 7,
            k_max: 10,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn counts_follow_config_arithmetic() {
        let result = run_experiment(&small()).unwrap();
        assert_eq!(result.problems.len(), 2);
        assert_eq!(result.representations().count(), 2 * 4 * 5);
        assert_eq!(result.stability.problems.len(), 2);
        assert_eq!(result.stability.algorithms.len(), 4);
        let sim = result.similarity.as_ref().unwrap();
        assert_eq!(sim.values.len(), 4);
        assert!(result.similarity_by_dimension.is_empty());
    }

    #[test]
    fn single_seed_leaves_stability_absent() {
        let mut cfg = small();
        cfg.functions = vec!["sphere".into()];
        cfg.algorithms = vec![AlgorithmEntry::Name("woa".into())];
        cfg.runs = 1;
        let result = run_experiment(&cfg).unwrap();
        assert_eq!(result.stability.scores, vec![vec![None]]);
        assert_eq!(result.similarity.unwrap().values, vec![vec![1.0]]);
    }

    #[test]
    fn seeds_do_not_depend_on_algorithm_list() {
        let a = small();
        let mut b = small();
        b.algorithms.truncate(1);
        assert_eq!(a.run_seeds(), b.run_seeds());
        let ra = run_experiment(&a).unwrap();
        let rb = run_experiment(&b).unwrap();
        let ta = &ra.problems[0].trajectories[0];
        let tb = &rb.problems[0].trajectories[0];
        assert_eq!(ta, tb);
    }

    #[test]
    fn problems_are_isolated() {
        let both = run_experiment(&small()).unwrap();
        let mut cfg = small();
        cfg.functions.truncate(1);
        let alone = run_experiment(&cfg).unwrap();
        let a = alone.problem("sphere-d2-i1").unwrap();
        let b = both.problem("sphere-d2-i1").unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.representations, b.representations);
    }

    #[test]
    fn config_parses_from_toml() {
        let text = r#"
functions = ["sphere", "rastrigin"]
dimensions = [2, 5]
instances = [1, 2]
runs = 3
master_seed = 11
k = 4

[[algorithms]]
name = "de_rand_1_bin"
parameters = { F = 0.5 }

[[algorithms]]
name = "woa"
"#;
        let cfg = ExperimentConfig::from_toml(text, "exp.toml").unwrap();
        assert_eq!(cfg.k, KChoice::Fixed(4));
        let plan = cfg.plan().unwrap();
        assert_eq!(plan.instances.len(), 8);
        assert_eq!(plan.algorithms[0].parameters["F"], 0.5);
        assert_eq!(plan.seeds.len(), 3);

        let auto = ExperimentConfig::from_toml("k = \"auto\"\nfunctions = [\"sphere\"]\nalgorithms = [\"aeo\"]", "x").unwrap();
        assert_eq!(auto.k, KChoice::Auto);

        let err = ExperimentConfig::from_toml("functions = [\"sphere\"]\nbogus = 1\n", "x").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = small();
        cfg.functions.push("nope".into());
        assert!(matches!(cfg.plan(), Err(Error::Config(_))));
        let mut cfg = small();
        cfg.algorithms = vec![AlgorithmEntry::Detailed {
            name: "woa".into(),
            parameters: [("F".to_string(), 0.5)].into(),
        }];
        assert!(cfg.plan().is_err());
        let mut cfg = small();
        cfg.k_min = 1;
        assert!(cfg.plan().is_err());
    }

    #[test]
    fn stage_failures_name_the_problem() {
        let mut cfg = small();
        cfg.functions = vec!["sphere".into()];
        cfg.population_size = 3;
        let err = run_experiment(&cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));

        let units = vec![Unit {
            problem: "p".into(),
            instance: None,
            external: Vec::new(),
        }];
        let plan = small().plan().unwrap();
        let err = process(units.into_iter().next().unwrap(), &plan, 0).unwrap_err();
        assert!(err.to_string().contains("stage `merge` failed for problem `p`"), "{err}");
    }
}
