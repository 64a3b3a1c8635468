//! Canonical global-best particle swarm (constriction-equivalent weights).

use rand::Rng as _;

use super::{evaluate_all, Objective, OptimizationResult, PLConfig};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

pub const INERTIA: f64 = 0.729;
pub const COGNITIVE: f64 = 1.49445;
pub const SOCIAL: f64 = 1.49445;
/// Velocity limit as a share of each dimension's range.
pub const VELOCITY_CLAMP: f64 = 0.2;

/// Runs `max_iter` swarm updates of `pop_size` particles. Non-finite
/// evaluations never become a personal or global best.
pub fn pso_optimize<T: Scalar>(
    objective: &dyn Objective<T>,
    config: &PLConfig<T>,
) -> Result<OptimizationResult<T>> {
    config.bounds.validate()?;
    config.check_objective(objective)?;
    if config.pop_size == 0 || config.max_iter == 0 {
        return Err(Error::domain(
            "pso needs at least one particle and one iteration",
        ));
    }
    let bounds = &config.bounds;
    let dim = config.dim();
    let vmax: Vec<T> = bounds
        .lo
        .iter()
        .zip(&bounds.hi)
        .map(|(&lo, &hi)| (hi - lo) * T::lit(VELOCITY_CLAMP))
        .collect();
    let (w, c1, c2) = (T::lit(INERTIA), T::lit(COGNITIVE), T::lit(SOCIAL));

    let mut rng = rng::seeded(config.seed);
    let mut positions: Vec<Vec<T>> = (0..config.pop_size)
        .map(|_| bounds.sample(&mut rng))
        .collect();
    let mut velocities = vec![vec![T::zero(); dim]; config.pop_size];
    let fitness = evaluate_all(objective, &positions);
    if let Some(i) = fitness.iter().position(|f| !f.is_finite()) {
        return Err(Error::Init {
            point: positions[i].iter().map(|v| v.as_f64()).collect(),
            value: fitness[i].as_f64(),
        });
    }
    let mut personal = positions.clone();
    let mut personal_fitness = fitness;
    let best = argmin(&personal_fitness);
    let mut global = personal[best].clone();
    let mut global_fitness = personal_fitness[best];
    let mut evaluations = config.pop_size;
    let mut rejected = 0;
    let mut trace = Vec::with_capacity(config.max_iter);

    for _ in 0..config.max_iter {
        for ((x, v), p) in positions.iter_mut().zip(&mut velocities).zip(&personal) {
            for j in 0..dim {
                let r1 = T::lit(rng.random::<f64>());
                let r2 = T::lit(rng.random::<f64>());
                let vj = w * v[j] + c1 * r1 * (p[j] - x[j]) + c2 * r2 * (global[j] - x[j]);
                v[j] = vj.max(-vmax[j]).min(vmax[j]);
                x[j] = x[j] + v[j];
            }
            bounds.clamp(x);
        }
        let fitness = evaluate_all(objective, &positions);
        evaluations += positions.len();
        for (i, f) in fitness.into_iter().enumerate() {
            if !f.is_finite() {
                rejected += 1;
                continue;
            }
            if f < personal_fitness[i] {
                personal_fitness[i] = f;
                personal[i] = positions[i].clone();
                if f < global_fitness {
                    global_fitness = f;
                    global = positions[i].clone();
                }
            }
        }
        trace.push(global_fitness);
    }
    Ok(OptimizationResult {
        best_position: global,
        best_fitness: global_fitness,
        trace,
        evaluations,
        rejected,
    })
}

fn argmin<T: Scalar>(xs: &[T]) -> usize {
    (0..xs.len()).fold(0, |best, i| if xs[i] < xs[best] { i } else { best })
}
