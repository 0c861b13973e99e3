//! Artificial ecosystem-based optimization.
//!
//! Update steps alternate between the production/consumption phase (odd
//! steps) and the decomposition phase (even steps), each followed by greedy
//! per-slot selection. Running one phase per step keeps the budget at one
//! evaluation per individual per iteration.

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{uniform_point, Population, Search, StepContext};
use crate::error::Result;

#[derive(Debug, Clone, Copy, Default)]
pub struct Aeo;

impl Aeo {
    fn consumption(pop: &Population, ctx: &mut StepContext<'_, '_, '_>) -> Vec<f64> {
        let n = pop.size();
        let d = pop.dim;
        // worst first: the producer is order[0], the decomposer order[n-1]
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| pop.fitness[b].total_cmp(&pop.fitness[a]).then(a.cmp(&b)));

        let mut out = pop.positions.clone();
        let weight = (1.0 - ctx.step as f64 / ctx.total_steps as f64) * ctx.rng.random::<f64>();
        let random = uniform_point(ctx.objective.problem(), ctx.rng);
        let best = pop.position(order[n - 1]);
        let producer: Vec<f64> = (0..d)
            .map(|j| (1.0 - weight) * best[j] + weight * random[j])
            .collect();
        out[order[0] * d..(order[0] + 1) * d].copy_from_slice(&producer);

        for rank in 1..n {
            let role: f64 = ctx.rng.random();
            let v1: f64 = ctx.rng.sample(StandardNormal);
            let v2: f64 = ctx.rng.sample(StandardNormal);
            let consumption = 0.5 * v1 / v2.abs().max(f64::MIN_POSITIVE);
            let prey_rank = if rank == 1 { 1 } else { ctx.rng.random_range(1..rank) };
            let x = pop.position(order[rank]);
            let prey = pop.position(order[prey_rank]);
            let moved: Vec<f64> = if role < 1.0 / 3.0 {
                // herbivore eats the producer
                (0..d).map(|j| x[j] + consumption * (x[j] - producer[j])).collect()
            } else if role <= 2.0 / 3.0 {
                // carnivore eats a higher-energy consumer
                (0..d).map(|j| x[j] + consumption * (x[j] - prey[j])).collect()
            } else {
                let r2: f64 = ctx.rng.random();
                (0..d)
                    .map(|j| x[j] + consumption * (r2 * (x[j] - producer[j]) + (1.0 - r2) * (x[j] - prey[j])))
                    .collect()
            };
            out[order[rank] * d..(order[rank] + 1) * d].copy_from_slice(&moved);
        }
        out
    }

    fn decomposition(pop: &Population, ctx: &mut StepContext<'_, '_, '_>) -> Vec<f64> {
        let d = pop.dim;
        let best = pop.position(pop.best()).to_vec();
        let mut out = Vec::with_capacity(pop.positions.len());
        for i in 0..pop.size() {
            let r3: f64 = ctx.rng.random();
            let u: f64 = ctx.rng.sample(StandardNormal);
            let factor = 3.0 * u;
            let e = r3 * ctx.rng.random_range(1..=2) as f64 - 1.0;
            let h = 2.0 * r3 - 1.0;
            let x = pop.position(i);
            out.extend((0..d).map(|j| best[j] + factor * (e * best[j] - h * x[j])));
        }
        out
    }
}

impl Search for Aeo {
    fn step(&mut self, pop: &Population, ctx: &mut StepContext<'_, '_, '_>) -> Result<Population> {
        let proposals = if ctx.step % 2 == 1 {
            Self::consumption(pop, ctx)
        } else {
            Self::decomposition(pop, ctx)
        };
        let mut next = pop.clone();
        for (i, chunk) in proposals.chunks_exact(pop.dim).enumerate() {
            let mut x = chunk.to_vec();
            let f = ctx.objective.eval(i, &mut x)?;
            if f < pop.fitness[i] {
                next.replace(i, &x, f);
            }
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{AlgorithmId, Objective};
    use crate::problems::{FunctionId, ProblemInstance};
    use crate::seed;

    #[test]
    fn identical_population_still_moves() {
        let p = ProblemInstance::new(FunctionId::Sphere, 2, 4).unwrap();
        let x = [3.0, 3.0];
        let f = p.evaluate(&x).unwrap();
        let mut pop = Population { dim: 2, positions: x.repeat(10), fitness: vec![f; 10] };
        let mut rng = seed::rng(0);
        let mut obj = Objective::new(&p, AlgorithmId::Aeo);
        for step in 1..=6 {
            let mut ctx = StepContext { rng: &mut rng, step, total_steps: 6, objective: &mut obj };
            pop = Aeo.step(&pop, &mut ctx).unwrap();
        }
        assert!(pop.fitness.iter().all(|v| v.is_finite()));
        assert!(pop.fitness.iter().any(|&v| v < f));
        assert_eq!(obj.evaluations(), 60);
    }
}
