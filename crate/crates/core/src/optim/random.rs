//! Uniform random sampling, the floor every optimizer should beat.

use super::{evaluate_all, Objective, OptimizationResult, PLConfig};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

/// Draws `pop_size` uniform points per iteration for `max_iter` iterations and
/// keeps the best finite one.
pub fn random_search<T: Scalar>(
    objective: &dyn Objective<T>,
    config: &PLConfig<T>,
) -> Result<OptimizationResult<T>> {
    config.bounds.validate()?;
    config.check_objective(objective)?;
    if config.pop_size == 0 || config.max_iter == 0 {
        return Err(Error::domain("random search needs a positive budget"));
    }
    let mut rng = rng::seeded(config.seed);
    let mut best_position = Vec::new();
    let mut best_fitness = T::infinity();
    let mut rejected = 0;
    let mut trace = Vec::with_capacity(config.max_iter);
    for _ in 0..config.max_iter {
        let batch: Vec<Vec<T>> = (0..config.pop_size)
            .map(|_| config.bounds.sample(&mut rng))
            .collect();
        let fitness = evaluate_all(objective, &batch);
        for (x, f) in batch.into_iter().zip(fitness) {
            if !f.is_finite() {
                rejected += 1;
            } else if f < best_fitness {
                best_fitness = f;
                best_position = x;
            }
        }
        trace.push(best_fitness);
    }
    if best_position.is_empty() {
        return Err(Error::domain("objective was non-finite at every sample"));
    }
    Ok(OptimizationResult {
        best_position,
        best_fitness,
        trace,
        evaluations: config.pop_size * config.max_iter,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{Bounds, FnObjective};

    #[test]
    fn constant_objective() {
        let cfg = PLConfig::new(5, 4, Bounds::uniform(2, 0.0, 1.0), 0);
        let r = random_search(&FnObjective::new(2, |_: &[f64]| 7.0), &cfg).unwrap();
        assert_eq!(r.best_fitness, 7.0);
        assert_eq!(r.trace, [7.0; 4]);
        assert_eq!(r.evaluations, 20);
    }

    #[test]
    fn seeded_runs_repeat() {
        let cfg = PLConfig::new(5, 10, Bounds::uniform(2, -1.0, 1.0), 9);
        let f = FnObjective::new(2, |x: &[f64]| x[0].abs() + x[1].abs());
        let a = random_search(&f, &cfg).unwrap();
        assert_eq!(a, random_search(&f, &cfg).unwrap());
        assert_ne!(a, random_search(&f, &cfg.clone().with_seed(10)).unwrap());
    }
}
