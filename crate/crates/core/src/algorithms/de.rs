//! Differential evolution with binomial crossover and greedy selection.

use rand::Rng as _;

use super::{Population, Search, StepContext};
use crate::error::Result;
use crate::seed::Rng;

pub const DEFAULT_F: f64 = 0.8;
pub const DEFAULT_CR: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeVariant {
    /// `v = x_r1 + F (x_r2 - x_r3)`
    Rand1Bin,
    /// `v = x_best + F (x_r2 - x_r3)`
    Best1Bin,
}

#[derive(Debug, Clone)]
pub struct De {
    pub variant: DeVariant,
    pub f: f64,
    pub cr: f64,
}

/// `count` distinct indices in `0..n`, all different from `exclude`.
fn distinct(rng: &mut Rng, n: usize, exclude: usize, count: usize) -> [usize; 3] {
    let mut out = [usize::MAX; 3];
    let mut filled = 0;
    while filled < count {
        let r = rng.random_range(0..n);
        if r != exclude && !out[..filled].contains(&r) {
            out[filled] = r;
            filled += 1;
        }
    }
    out
}

impl Search for De {
    fn step(&mut self, pop: &Population, ctx: &mut StepContext<'_, '_, '_>) -> Result<Population> {
        let n = pop.size();
        let d = pop.dim;
        let best = pop.best();
        let mut next = pop.clone();
        let mut trial = vec![0.0; d];

        for i in 0..n {
            // Both variants consume the stream identically, so same-seed runs
            // differ only in the base vector.
            let [r1, r2, r3] = distinct(ctx.rng, n, i, 3);
            let base = match self.variant {
                DeVariant::Rand1Bin => pop.position(r1),
                DeVariant::Best1Bin => pop.position(best),
            };
            let (b, c) = (pop.position(r2), pop.position(r3));
            let donor: Vec<f64> = (0..d).map(|j| base[j] + self.f * (b[j] - c[j])).collect();
            let forced = ctx.rng.random_range(0..d);
            let parent = pop.position(i);
            for j in 0..d {
                let take = j == forced || ctx.rng.random::<f64>() < self.cr;
                trial[j] = if take { donor[j] } else { parent[j] };
            }
            let f = ctx.objective.eval(i, &mut trial)?;
            if f <= pop.fitness[i] {
                next.replace(i, &trial, f);
            }
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run, AlgorithmConfig, AlgorithmId, Objective};
    use crate::problems::{FunctionId, ProblemInstance};
    use crate::seed;

    fn step_once(de: &mut De, pop: &Population, problem: &ProblemInstance) -> Population {
        let mut rng = seed::rng(1);
        let mut obj = Objective::new(problem, AlgorithmId::DeRand1Bin);
        let mut ctx = StepContext {
            rng: &mut rng,
            step: 1,
            total_steps: 5,
            objective: &mut obj,
        };
        de.step(pop, &mut ctx).unwrap()
    }

    fn evaluated(problem: &ProblemInstance, positions: Vec<f64>) -> Population {
        let d = problem.dimension;
        let fitness = positions.chunks(d).map(|x| problem.evaluate(x).unwrap()).collect();
        Population { dim: d, positions, fitness }
    }

    #[test]
    fn zero_mutation_and_crossover_touches_one_coordinate() {
        let p = ProblemInstance::new(FunctionId::Rastrigin, 4, 1).unwrap();
        let pop = evaluated(&p, crate::algorithms::init_population(&p, 2, 8));
        let mut de = De { variant: DeVariant::Rand1Bin, f: 0.0, cr: 0.0 };
        let next = step_once(&mut de, &pop, &p);
        for i in 0..pop.size() {
            let changed = (0..4).filter(|&j| next.position(i)[j] != pop.position(i)[j]).count();
            assert!(changed <= 1);
            assert!(next.fitness[i] <= pop.fitness[i]);
        }
    }

    #[test]
    fn degenerate_population_is_a_fixed_point() {
        let p = ProblemInstance::new(FunctionId::Sphere, 3, 1).unwrap();
        let pop = evaluated(&p, [1.0, -2.0, 0.5].repeat(6));
        for variant in [DeVariant::Rand1Bin, DeVariant::Best1Bin] {
            let mut de = De { variant, f: 0.0, cr: 0.0 };
            assert_eq!(step_once(&mut de, &pop, &p), pop);
            // default parameters also survive identical donors
            let mut de = De { variant, f: DEFAULT_F, cr: DEFAULT_CR };
            assert_eq!(step_once(&mut de, &pop, &p), pop);
        }
    }

    #[test]
    fn best_fitness_never_increases() {
        let p = ProblemInstance::new(FunctionId::Sphere, 2, 3).unwrap();
        for alg in [AlgorithmId::DeRand1Bin, AlgorithmId::DeBest1Bin] {
            for seed in 0..100 {
                let r = run(&AlgorithmConfig::new(alg).with_budget(10, 15), &p, seed).unwrap();
                let t = &r.trajectory;
                let mut prev_best = f64::INFINITY;
                for it in 0..t.iterations() {
                    let fit = t.iteration_fitness(it);
                    let best = fit.iter().copied().fold(f64::INFINITY, f64::min);
                    assert!(best <= prev_best);
                    prev_best = best;
                    if it > 0 {
                        // elitism per slot
                        for (a, b) in t.iteration_fitness(it - 1).iter().zip(fit) {
                            assert!(b <= a);
                        }
                    }
                }
            }
        }
    }
}
