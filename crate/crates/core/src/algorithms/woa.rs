//! Whale optimization: shrinking encirclement, spiral bubble-net moves and
//! random search, each whale replaced unconditionally by its new position.

use std::f64::consts::PI;

use rand::Rng as _;

use super::{Population, Search, StepContext};
use crate::error::Result;

pub const DEFAULT_SPIRAL: f64 = 1.0;
const SPIRAL_PROBABILITY: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct Woa {
    spiral_shape: f64,
    /// Best solution seen so far (position, fitness).
    leader: Option<(Vec<f64>, f64)>,
}

impl Woa {
    pub fn new(spiral_shape: f64) -> Self {
        Woa {
            spiral_shape,
            leader: None,
        }
    }

    fn update_leader(&mut self, pop: &Population) {
        let best = pop.best();
        let better = self.leader.as_ref().is_none_or(|(_, f)| pop.fitness[best] < *f);
        if better {
            self.leader = Some((pop.position(best).to_vec(), pop.fitness[best]));
        }
    }
}

/// `target - A * |C * target - x|`, the encircling and search move.
pub fn encircle(target: &[f64], x: &[f64], a_coef: f64, c_coef: f64) -> Vec<f64> {
    target
        .iter()
        .zip(x)
        .map(|(t, xi)| t - a_coef * (c_coef * t - xi).abs())
        .collect()
}

/// `|best - x| * e^(b l) * cos(2 pi l) + best`, the logarithmic spiral move.
pub fn spiral(best: &[f64], x: &[f64], l: f64, shape: f64) -> Vec<f64> {
    let factor = (shape * l).exp() * (2.0 * PI * l).cos();
    best.iter().zip(x).map(|(b, xi)| (b - xi).abs() * factor + b).collect()
}

impl Search for Woa {
    fn step(&mut self, pop: &Population, ctx: &mut StepContext<'_, '_, '_>) -> Result<Population> {
        self.update_leader(pop);
        let leader = self.leader.as_ref().expect("leader set above").0.clone();
        let n = pop.size();
        // decreases linearly from 2 on the first step towards 0
        let a = 2.0 - 2.0 * (ctx.step - 1) as f64 / ctx.total_steps as f64;

        let mut positions = Vec::with_capacity(pop.positions.len());
        let mut fitness = Vec::with_capacity(n);
        for i in 0..n {
            let r1: f64 = ctx.rng.random();
            let r2: f64 = ctx.rng.random();
            let a_coef = 2.0 * a * r1 - a;
            let c_coef = 2.0 * r2;
            let l = ctx.rng.random_range(-1.0..=1.0);
            let p: f64 = ctx.rng.random();
            let x = pop.position(i);

            let mut next = if p < SPIRAL_PROBABILITY {
                if a_coef.abs() < 1.0 {
                    encircle(&leader, x, a_coef, c_coef)
                } else {
                    let r = ctx.rng.random_range(0..n);
                    encircle(pop.position(r), x, a_coef, c_coef)
                }
            } else {
                spiral(&leader, x, l, self.spiral_shape)
            };
            let f = ctx.objective.eval(i, &mut next)?;
            positions.extend_from_slice(&next);
            fitness.push(f);
        }
        let next = Population { dim: pop.dim, positions, fitness };
        self.update_leader(&next);
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spiral_with_zero_distance_lands_on_best() {
        let best = [1.5, -2.0];
        for l in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert_eq!(spiral(&best, &best, l, 1.0), best.to_vec());
        }
        // l = 0: factor e^0 cos 0 = 1, so the whale mirrors through best
        assert_eq!(spiral(&[1.0, 1.0], &[0.0, 3.0], 0.0, 1.0), vec![2.0, 3.0]);
    }

    #[test]
    fn zero_coefficient_encircle_lands_on_target() {
        let best = [0.25, 4.0, -1.0];
        assert_eq!(encircle(&best, &[3.0, 3.0, 3.0], 0.0, 1.7), best.to_vec());
        // hand trace: 1 - 0.5 * |2*1 - 0| = 0
        assert_eq!(encircle(&[1.0], &[0.0], 0.5, 2.0), vec![0.0]);
    }
}
