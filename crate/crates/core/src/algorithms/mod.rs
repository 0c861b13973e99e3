//! Population-based optimizers instrumented to record every population.
//!
//! A run of `b` iterations records the initial population as iteration 0
//! followed by `b - 1` update steps. Every step evaluates exactly `s` new
//! candidates, so a run costs exactly `b * s` objective evaluations.
//! Proposals are clamped to the problem bounds before evaluation.

mod aeo;
mod de;
mod woa;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::ProblemInstance;
use crate::seed::{self, Rng};
use crate::trajectory::Trajectory;

pub use aeo::Aeo;
pub use de::{De, DeVariant};
pub use woa::{encircle, spiral, Woa};

pub const DEFAULT_POPULATION: usize = 50;
pub const MIN_POPULATION: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlgorithmId {
    #[serde(rename = "de_rand_1_bin")]
    DeRand1Bin,
    #[serde(rename = "de_best_1_bin")]
    DeBest1Bin,
    #[serde(rename = "woa")]
    Woa,
    #[serde(rename = "aeo")]
    Aeo,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 4] = [
        AlgorithmId::DeRand1Bin,
        AlgorithmId::DeBest1Bin,
        AlgorithmId::Woa,
        AlgorithmId::Aeo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::DeRand1Bin => "de_rand_1_bin",
            AlgorithmId::DeBest1Bin => "de_best_1_bin",
            AlgorithmId::Woa => "woa",
            AlgorithmId::Aeo => "aeo",
        }
    }

    fn parameter_names(self) -> &'static [&'static str] {
        match self {
            AlgorithmId::DeRand1Bin | AlgorithmId::DeBest1Bin => &["F", "CR"],
            AlgorithmId::Woa => &["b"],
            AlgorithmId::Aeo => &[],
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '/'], "_");
        AlgorithmId::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub algorithm: AlgorithmId,
    #[serde(default = "default_population")]
    pub population_size: usize,
    /// Recorded iterations `b`, including the initial population. `None`
    /// means `10 * d`.
    #[serde(default)]
    pub iterations: Option<usize>,
    /// Overrides for `F`/`CR` (DE) or `b` (WOA spiral constant).
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

fn default_population() -> usize {
    DEFAULT_POPULATION
}

impl AlgorithmConfig {
    pub fn new(algorithm: AlgorithmId) -> Self {
        AlgorithmConfig {
            algorithm,
            population_size: DEFAULT_POPULATION,
            iterations: None,
            parameters: BTreeMap::new(),
        }
    }

    pub fn with_budget(mut self, population_size: usize, iterations: usize) -> Self {
        self.population_size = population_size;
        self.iterations = Some(iterations);
        self
    }

    pub fn with_parameter(mut self, name: &str, value: f64) -> Self {
        self.parameters.insert(name.to_string(), value);
        self
    }

    pub fn iterations_for(&self, dimension: usize) -> usize {
        self.iterations.unwrap_or(10 * dimension)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < MIN_POPULATION {
            return Err(Error::Config(format!(
                "population size {} is below the minimum of {MIN_POPULATION}",
                self.population_size
            )));
        }
        if self.iterations == Some(0) {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        let known = self.algorithm.parameter_names();
        for (name, value) in &self.parameters {
            if !known.contains(&name.as_str()) {
                return Err(Error::Config(format!(
                    "{} has no parameter `{name}` (known: {known:?})",
                    self.algorithm
                )));
            }
            if !value.is_finite() {
                return Err(Error::Config(format!("parameter `{name}` must be finite")));
            }
        }
        if let Some(cr) = self.parameters.get("CR") {
            if !(0.0..=1.0).contains(cr) {
                return Err(Error::Config(format!("CR = {cr} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    fn param(&self, name: &str, default: f64) -> f64 {
        self.parameters.get(name).copied().unwrap_or(default)
    }
}

/// The output of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: AlgorithmId,
    pub problem: String,
    pub seed: u64,
    pub evaluations: usize,
    pub trajectory: Trajectory,
}

/// A population with its objective values.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub dim: usize,
    /// `size x dim`, row-major.
    pub positions: Vec<f64>,
    pub fitness: Vec<f64>,
}

impl Population {
    pub fn size(&self) -> usize {
        self.fitness.len()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// Index of the lowest fitness, first on ties.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (i, f) in self.fitness.iter().enumerate() {
            if *f < self.fitness[best] {
                best = i;
            }
        }
        best
    }

    fn replace(&mut self, i: usize, x: &[f64], f: f64) {
        self.positions[i * self.dim..(i + 1) * self.dim].copy_from_slice(x);
        self.fitness[i] = f;
    }
}

/// Clamps, evaluates, and counts; fails on a non-finite value.
pub struct Objective<'a> {
    problem: &'a ProblemInstance,
    algorithm: AlgorithmId,
    iteration: usize,
    evaluations: usize,
}

impl<'a> Objective<'a> {
    pub fn new(problem: &'a ProblemInstance, algorithm: AlgorithmId) -> Self {
        Objective {
            problem,
            algorithm,
            iteration: 0,
            evaluations: 0,
        }
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn problem(&self) -> &ProblemInstance {
        self.problem
    }

    pub fn eval(&mut self, slot: usize, x: &mut [f64]) -> Result<f64> {
        self.problem.clamp(x);
        let value = self.problem.evaluate_unchecked(x);
        self.evaluations += 1;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                algorithm: self.algorithm.to_string(),
                problem: self.problem.id(),
                iteration: self.iteration,
                slot,
                value,
            });
        }
        Ok(value)
    }
}

/// Per-step inputs shared by all update rules.
pub struct StepContext<'r, 'o, 'p> {
    pub rng: &'r mut Rng,
    /// 1-based index of this update step.
    pub step: usize,
    /// Number of update steps in the run (`b - 1`).
    pub total_steps: usize,
    pub objective: &'o mut Objective<'p>,
}

/// One population update rule.
pub trait Search {
    fn step(&mut self, population: &Population, ctx: &mut StepContext<'_, '_, '_>) -> Result<Population>;
}

/// `s` points uniform in the problem bounds. The same seed gives the same
/// population for every algorithm.
pub fn init_population(instance: &ProblemInstance, seed: u64, s: usize) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    draw_population(instance, s, &mut rng)
}

fn draw_population(instance: &ProblemInstance, s: usize, rng: &mut Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(s * instance.dimension);
    for _ in 0..s {
        out.extend(uniform_point(instance, rng));
    }
    out
}

pub(crate) fn uniform_point(instance: &ProblemInstance, rng: &mut Rng) -> Vec<f64> {
    instance
        .lower
        .iter()
        .zip(&instance.upper)
        .map(|(lo, hi)| rng.random_range(*lo..=*hi))
        .collect()
}

fn build_search(config: &AlgorithmConfig) -> Box<dyn Search> {
    match config.algorithm {
        AlgorithmId::DeRand1Bin | AlgorithmId::DeBest1Bin => {
            let variant = if config.algorithm == AlgorithmId::DeRand1Bin {
                DeVariant::Rand1Bin
            } else {
                DeVariant::Best1Bin
            };
            Box::new(De {
                variant,
                f: config.param("F", de::DEFAULT_F),
                cr: config.param("CR", de::DEFAULT_CR),
            })
        }
        AlgorithmId::Woa => Box::new(Woa::new(config.param("b", woa::DEFAULT_SPIRAL))),
        AlgorithmId::Aeo => Box::new(Aeo),
    }
}

/// Execute one seeded run and record its full trajectory.
pub fn run(config: &AlgorithmConfig, instance: &ProblemInstance, seed: u64) -> Result<RunRecord> {
    config.validate()?;
    let s = config.population_size;
    let d = instance.dimension;
    let b = config.iterations_for(d);
    if b == 0 {
        return Err(Error::Config("iterations must be at least 1".into()));
    }

    let mut rng = seed::rng(seed);
    let mut objective = Objective::new(instance, config.algorithm);
    let mut positions = draw_population(instance, s, &mut rng);
    let mut fitness = Vec::with_capacity(s);
    for (slot, x) in positions.chunks_exact_mut(d).enumerate() {
        fitness.push(objective.eval(slot, x)?);
    }
    let mut population = Population { dim: d, positions, fitness };

    let mut data = Vec::with_capacity(b * s * d);
    let mut fit_log = Vec::with_capacity(b * s);
    data.extend_from_slice(&population.positions);
    fit_log.extend_from_slice(&population.fitness);

    let mut search = build_search(config);
    for step in 1..b {
        objective.iteration = step;
        let mut ctx = StepContext {
            rng: &mut rng,
            step,
            total_steps: b - 1,
            objective: &mut objective,
        };
        population = search.step(&population, &mut ctx)?;
        data.extend_from_slice(&population.positions);
        fit_log.extend_from_slice(&population.fitness);
    }

    let trajectory = Trajectory::new(config.algorithm.name(), instance.id(), seed, (b, s, d), data, fit_log)?;
    Ok(RunRecord {
        algorithm: config.algorithm,
        problem: instance.id(),
        seed,
        evaluations: objective.evaluations(),
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::FunctionId;

    fn sphere(d: usize) -> ProblemInstance {
        ProblemInstance::new(FunctionId::Sphere, d, 1).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_in_bounds() {
        let p = sphere(3);
        assert_eq!(init_population(&p, 3, 10), init_population(&p, 3, 10));
        for seed in 0..100 {
            assert!(init_population(&p, seed, 20).iter().all(|v| (-5.0..=5.0).contains(v)));
        }
    }

    #[test]
    fn all_algorithms_share_the_initial_population() {
        let p = sphere(2);
        let init = init_population(&p, 17, 12);
        for alg in AlgorithmId::ALL {
            let r = run(&AlgorithmConfig::new(alg).with_budget(12, 3), &p, 17).unwrap();
            assert_eq!(r.trajectory.iteration(0), &init[..], "{alg}");
        }
    }

    #[test]
    fn shape_budget_and_bounds() {
        for f in FunctionId::ALL {
            let p = ProblemInstance::new(f, 2, 2).unwrap();
            for alg in AlgorithmId::ALL {
                let r = run(&AlgorithmConfig::new(alg).with_budget(50, 20), &p, 5).unwrap();
                assert_eq!(r.trajectory.shape(), (20, 50, 2));
                assert_eq!(r.evaluations, 20 * 50);
                assert!(r.trajectory.data().iter().all(|v| (-5.0..=5.0).contains(v)));
            }
        }
    }

    #[test]
    fn default_budget_is_ten_d() {
        let p = sphere(3);
        let r = run(&AlgorithmConfig::new(AlgorithmId::Woa), &p, 0).unwrap();
        assert_eq!(r.trajectory.shape(), (30, 50, 3));
        assert_eq!(r.evaluations, 500 * 3);
    }

    #[test]
    fn single_iteration_is_the_initial_population() {
        let p = sphere(2);
        for alg in AlgorithmId::ALL {
            let r = run(&AlgorithmConfig::new(alg).with_budget(4, 1), &p, 9).unwrap();
            assert_eq!(r.trajectory.data(), &init_population(&p, 9, 4)[..]);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let p = ProblemInstance::new(FunctionId::Weierstrass, 3, 1).unwrap();
        for alg in AlgorithmId::ALL {
            let c = AlgorithmConfig::new(alg).with_budget(10, 8);
            assert_eq!(run(&c, &p, 4).unwrap(), run(&c, &p, 4).unwrap());
        }
    }

    #[test]
    fn config_validation() {
        let p = sphere(2);
        let small = AlgorithmConfig::new(AlgorithmId::DeRand1Bin).with_budget(3, 5);
        assert!(matches!(run(&small, &p, 0), Err(Error::Config(_))));
        let zero = AlgorithmConfig::new(AlgorithmId::Woa).with_budget(10, 0);
        assert!(run(&zero, &p, 0).is_err());
        let unknown = AlgorithmConfig::new(AlgorithmId::Aeo).with_parameter("F", 0.5);
        assert!(unknown.validate().is_err());
        assert!("pso".parse::<AlgorithmId>().is_err());
        assert_eq!("DE/rand/1/bin".parse::<AlgorithmId>().unwrap(), AlgorithmId::DeRand1Bin);
    }
}
