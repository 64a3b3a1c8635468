//! Passer Learning: a sparrow-search population whose randomly chosen
//! "investigators" relocate with a teaching-learning style rule.
//!
//! Each iteration the population is ranked by fitness. The best
//! `⌈PD·n⌉` agents (producers) move relative to the elite, the rest
//! (scroungers) follow the best producer or jitter around the elite, and
//! `⌈SD·n⌉` randomly chosen agents additionally take the investigator move.
//! The elite is the best position ever evaluated and is never lost.
//!
//! All random draws for an iteration are taken on the calling thread in a
//! fixed order before any fitness is evaluated, so parallel evaluation cannot
//! change the result.

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{evaluate_all, Objective, OptimizationResult, PLConfig};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::scalar::Scalar;

/// Guards the two fitness divisions of the scrounger move.
pub const SCROUNGER_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Agent<T> {
    pub position: Vec<T>,
    /// Displacement taken by the last accepted move.
    pub velocity: Vec<T>,
    pub fitness: T,
    pub previous_position: Vec<T>,
    pub previous_fitness: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population<T> {
    /// Sorted ascending by fitness after initialization and after each step.
    pub agents: Vec<Agent<T>>,
    pub elite: Vec<T>,
    pub elite_fitness: T,
    /// The elite as it stood one iteration earlier.
    pub previous_elite: Vec<T>,
    pub evaluations: usize,
    pub rejected: usize,
}

/// Random inputs of one producer move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProducerDraws<T> {
    /// In `(0, 1]`.
    pub alpha: T,
    /// Alarm value, in `[0, 1)`; shared by every producer in an iteration.
    pub alarm: T,
    /// In `[0, 1)`.
    pub r: T,
}

/// Random inputs of one scrounger move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScroungerDraws<T> {
    /// Standard normal.
    pub q: T,
    /// In `[0, 1)`.
    pub rand: T,
    /// In `[-1, 1]`.
    pub k: T,
}

/// Random inputs of one investigator move.
#[derive(Debug, Clone, PartialEq)]
pub struct InvestigatorDraws<T> {
    /// Learning weight in `[0, 1)`.
    pub alpha: T,
    /// One `±1` per dimension.
    pub signs: Vec<T>,
}

/// Producer move at iteration `h` (1-based):
///
/// * alarm `< AP`: `x_j·exp(−h / (α·M)) + (elite_j − x_j)`
/// * otherwise: `(x_j + r·fl) · (elite_j − x_j)`
///
/// clamped to the bounds.
pub fn producer_update<T: Scalar>(
    x: &[T],
    elite: &[T],
    h: usize,
    config: &PLConfig<T>,
    draws: &ProducerDraws<T>,
) -> Vec<T> {
    let mut out: Vec<T> = if draws.alarm < config.awareness_probability {
        let decay = (-T::lit(h as f64) / (draws.alpha * T::lit(config.max_iter as f64))).exp();
        x.iter()
            .zip(elite)
            .map(|(&xj, &ej)| xj * decay + (ej - xj))
            .collect()
    } else {
        let shift = draws.r * config.flight_length;
        x.iter()
            .zip(elite)
            .map(|(&xj, &ej)| (xj + shift) * (ej - xj))
            .collect()
    };
    config.bounds.clamp(&mut out);
    out
}

/// Scrounger move for the agent at 1-based fitness rank `rank`.
///
/// The worse half (`rank > n/2`) flies toward the best producer:
/// `Q·exp((prev_elite_j − x_j) / rank²) + rand·(producer_j − x_j) / (f(xᵗ) + ε)`.
/// The better half steps relative to the elite, scaled by its last fitness
/// change: `x_j + k·(x_j − elite_j) / (f(xᵗ) − f(xᵗ⁻¹) + ε) + Q·v_j`.
#[allow(clippy::too_many_arguments)]
pub fn scrounger_update<T: Scalar>(
    agent: &Agent<T>,
    rank: usize,
    best_producer: &[T],
    elite: &[T],
    previous_elite: &[T],
    config: &PLConfig<T>,
    draws: &ScroungerDraws<T>,
) -> Vec<T> {
    let eps = T::lit(SCROUNGER_EPSILON);
    let x = &agent.position;
    let mut out: Vec<T> = if rank as f64 > config.pop_size as f64 / 2.0 {
        let rank_sq = T::lit((rank * rank) as f64);
        let denom = agent.fitness + eps;
        (0..x.len())
            .map(|j| {
                draws.q * ((previous_elite[j] - x[j]) / rank_sq).exp()
                    + draws.rand * (best_producer[j] - x[j]) / denom
            })
            .collect()
    } else {
        let denom = agent.fitness - agent.previous_fitness + eps;
        (0..x.len())
            .map(|j| x[j] + draws.k * (x[j] - elite[j]) / denom + draws.q * agent.velocity[j])
            .collect()
    };
    config.bounds.clamp(&mut out);
    out
}

/// Investigator move:
/// `α·x_j − ½α·x_prev_j + s − α·elite_j` with `s = Σ_j |x_j|·A_j / d`,
/// i.e. `|x|` contracted with the pseudo-inverse `Aᵀ(AAᵀ)⁻¹ = A/d` of the
/// random sign row `A`, broadcast to every coordinate.
pub fn investigator_update<T: Scalar>(
    x: &[T],
    x_prev: &[T],
    elite: &[T],
    bounds: &super::Bounds<T>,
    draws: &InvestigatorDraws<T>,
) -> Vec<T> {
    let d = T::lit(x.len() as f64);
    let s = x
        .iter()
        .zip(&draws.signs)
        .fold(T::zero(), |acc, (&xj, &a)| acc + xj.abs() * (a / d));
    let half = T::lit(0.5);
    let a = draws.alpha;
    let mut out: Vec<T> = (0..x.len())
        .map(|j| a * x[j] - half * a * x_prev[j] + s - a * elite[j])
        .collect();
    bounds.clamp(&mut out);
    out
}

/// Uniform positions in the bounds, zero velocity, sorted by fitness.
pub fn initialize_population<T: Scalar>(
    config: &PLConfig<T>,
    objective: &dyn Objective<T>,
    rng: &mut Rng,
) -> Result<Population<T>> {
    config.validate()?;
    config.check_objective(objective)?;
    let positions: Vec<Vec<T>> = (0..config.pop_size)
        .map(|_| config.bounds.sample(rng))
        .collect();
    let fitness = evaluate_all(objective, &positions);
    if let Some(i) = fitness.iter().position(|f| !f.is_finite()) {
        return Err(Error::Init {
            point: positions[i].iter().map(|v| v.as_f64()).collect(),
            value: fitness[i].as_f64(),
        });
    }
    let dim = config.dim();
    let mut agents: Vec<Agent<T>> = positions
        .into_iter()
        .zip(fitness)
        .map(|(position, fitness)| Agent {
            previous_position: position.clone(),
            position,
            velocity: vec![T::zero(); dim],
            fitness,
            previous_fitness: fitness,
        })
        .collect();
    sort_by_fitness(&mut agents);
    let elite = agents[0].position.clone();
    Ok(Population {
        elite_fitness: agents[0].fitness,
        previous_elite: elite.clone(),
        elite,
        evaluations: config.pop_size,
        rejected: 0,
        agents,
    })
}

fn sort_by_fitness<T: Scalar>(agents: &mut [Agent<T>]) {
    agents.sort_by(|a, b| a.fitness.partial_cmp(&b.fitness).expect("finite fitness"));
}

/// One iteration `h` (1-based) of producer, scrounger and investigator moves.
pub fn step<T: Scalar>(
    population: &mut Population<T>,
    objective: &dyn Objective<T>,
    h: usize,
    config: &PLConfig<T>,
    rng: &mut Rng,
) {
    sort_by_fitness(&mut population.agents);
    let n = population.agents.len();
    let dim = config.dim();
    let producers = config.producer_count();

    let alarm = T::lit(rng.random::<f64>());
    let best_producer = population.agents[0].position.clone();
    let mut candidates: Vec<Vec<T>> = Vec::with_capacity(n);
    for (i, agent) in population.agents.iter().enumerate() {
        let candidate = if i < producers {
            let draws = ProducerDraws {
                alpha: T::lit(1.0 - rng.random::<f64>()),
                alarm,
                r: T::lit(rng.random::<f64>()),
            };
            producer_update(&agent.position, &population.elite, h, config, &draws)
        } else {
            let draws = ScroungerDraws {
                q: T::lit(StandardNormal.sample(rng)),
                rand: T::lit(rng.random::<f64>()),
                k: T::lit(rng.random_range(-1.0..=1.0)),
            };
            scrounger_update(
                agent,
                i + 1,
                &best_producer,
                &population.elite,
                &population.previous_elite,
                config,
                &draws,
            )
        };
        candidates.push(candidate);
    }

    let mut investigators = index::sample(rng, n, config.investigator_count().min(n)).into_vec();
    investigators.sort_unstable();
    for i in investigators {
        let draws = InvestigatorDraws {
            alpha: T::lit(rng.random::<f64>()),
            signs: (0..dim)
                .map(|_| {
                    if rng.random::<bool>() {
                        T::one()
                    } else {
                        -T::one()
                    }
                })
                .collect(),
        };
        candidates[i] = investigator_update(
            &candidates[i],
            &population.agents[i].position,
            &population.elite,
            &config.bounds,
            &draws,
        );
    }

    let fitness = evaluate_all(objective, &candidates);
    population.evaluations += n;
    population.previous_elite = population.elite.clone();
    for ((agent, candidate), f) in population.agents.iter_mut().zip(candidates).zip(fitness) {
        if !f.is_finite() {
            population.rejected += 1;
            continue;
        }
        agent.velocity = candidate
            .iter()
            .zip(&agent.position)
            .map(|(&new, &old)| new - old)
            .collect();
        agent.previous_position = std::mem::replace(&mut agent.position, candidate);
        agent.previous_fitness = agent.fitness;
        agent.fitness = f;
        if f < population.elite_fitness {
            population.elite_fitness = f;
            population.elite = agent.position.clone();
        }
    }
    sort_by_fitness(&mut population.agents);
}

/// Initializes a population and runs `max_iter` steps.
pub fn optimize<T: Scalar>(
    objective: &dyn Objective<T>,
    config: &PLConfig<T>,
) -> Result<OptimizationResult<T>> {
    let mut rng = rng::seeded(config.seed);
    let mut population = initialize_population(config, objective, &mut rng)?;
    let mut trace = Vec::with_capacity(config.max_iter);
    for h in 1..=config.max_iter {
        step(&mut population, objective, h, config, &mut rng);
        trace.push(population.elite_fitness);
    }
    Ok(OptimizationResult {
        best_position: population.elite,
        best_fitness: population.elite_fitness,
        trace,
        evaluations: population.evaluations,
        rejected: population.rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{Bounds, FnObjective};

    fn config(d: usize, n: usize, m: usize) -> PLConfig<f64> {
        PLConfig::new(n, m, Bounds::uniform(d, -10.0, 10.0), 1)
    }

    fn agent(x: f64, fitness: f64, previous_fitness: f64) -> Agent<f64> {
        Agent {
            position: vec![x],
            velocity: vec![0.0],
            fitness,
            previous_position: vec![x],
            previous_fitness,
        }
    }

    #[test]
    fn producer_explore_branch() {
        let cfg = config(1, 10, 10);
        let draws = ProducerDraws {
            alpha: 0.5,
            alarm: 0.3,
            r: 0.0,
        };
        let x = producer_update(&[1.0], &[2.0], 1, &cfg, &draws);
        assert!((x[0] - ((-0.2f64).exp() + 1.0)).abs() < 1e-12);
        assert!((x[0] - 1.81873).abs() < 1e-5);
    }

    #[test]
    fn producer_alarm_branch() {
        let cfg = config(1, 10, 10);
        let draws = ProducerDraws {
            alpha: 0.5,
            alarm: 0.9,
            r: 0.5,
        };
        assert_eq!(producer_update(&[1.0], &[2.0], 1, &cfg, &draws), [1.5]);
    }

    #[test]
    fn producer_at_elite_decays() {
        let cfg = config(1, 10, 10);
        let draws = ProducerDraws {
            alpha: 1.0,
            alarm: 0.1,
            r: 0.0,
        };
        let x = producer_update(&[3.0], &[3.0], 10, &cfg, &draws);
        assert!((x[0] - 3.0 * (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn producer_output_is_clamped() {
        let cfg = config(1, 10, 10);
        let draws = ProducerDraws {
            alpha: 0.5,
            alarm: 0.9,
            r: 0.5,
        };
        assert_eq!(producer_update(&[9.0], &[-9.0], 1, &cfg, &draws), [-10.0]);
    }

    #[test]
    fn scrounger_better_half() {
        let cfg = config(1, 10, 10);
        let draws = ScroungerDraws {
            q: 0.0,
            rand: 0.3,
            k: 1.0,
        };
        let x = scrounger_update(
            &agent(1.0, 4.0, 2.0),
            2,
            &[5.0],
            &[2.0],
            &[2.0],
            &cfg,
            &draws,
        );
        assert!((x[0] - 0.5).abs() < 1e-12);
        let still = ScroungerDraws {
            q: 0.0,
            rand: 0.3,
            k: 0.0,
        };
        assert_eq!(
            scrounger_update(
                &agent(1.0, 4.0, 2.0),
                2,
                &[5.0],
                &[2.0],
                &[2.0],
                &cfg,
                &still
            ),
            [1.0]
        );
    }

    #[test]
    fn scrounger_worse_half() {
        // rank 2 of a population of 2 is in the worse half.
        let mut cfg = config(1, 2, 10);
        cfg.pop_size = 2;
        let draws = ScroungerDraws {
            q: 1.0,
            rand: 0.5,
            k: 0.0,
        };
        let x = scrounger_update(
            &agent(1.0, 4.0, 4.0),
            2,
            &[2.0],
            &[0.0],
            &[3.0],
            &cfg,
            &draws,
        );
        assert!((x[0] - (0.5f64.exp() + 0.125)).abs() < 1e-12);
        assert!((x[0] - 1.77372).abs() < 1e-5);
    }

    #[test]
    fn scrounger_velocity_term() {
        let cfg = config(2, 10, 10);
        let a = Agent {
            position: vec![1.0, 1.0],
            velocity: vec![0.5, -1.0],
            fitness: 1.0,
            previous_position: vec![0.5, 2.0],
            previous_fitness: 1.0,
        };
        let draws = ScroungerDraws {
            q: 2.0,
            rand: 0.0,
            k: 0.0,
        };
        assert_eq!(
            scrounger_update(&a, 1, &[0.0; 2], &[0.0; 2], &[0.0; 2], &cfg, &draws),
            [2.0, -1.0]
        );
    }

    #[test]
    fn investigator_examples() {
        let b = Bounds::uniform(2, -10.0, 10.0);
        let draws = InvestigatorDraws {
            alpha: 0.5,
            signs: vec![1.0, 1.0],
        };
        let x: Vec<f64> = investigator_update(&[1.0, -1.0], &[0.0, 0.0], &[2.0, 2.0], &b, &draws);
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] + 0.5).abs() < 1e-12);

        let draws = InvestigatorDraws {
            alpha: 0.0,
            signs: vec![1.0, -1.0],
        };
        let x = investigator_update(&[3.0, 1.0], &[7.0, 7.0], &[5.0, 5.0], &b, &draws);
        assert_eq!(x, [1.0, 1.0]);

        let draws = InvestigatorDraws {
            alpha: 0.7,
            signs: vec![-1.0, 1.0],
        };
        assert_eq!(
            investigator_update(&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0], &b, &draws),
            [0.0, 0.0]
        );
    }

    #[test]
    fn init_is_sorted_seeded_and_bounded() {
        let cfg = PLConfig::new(10, 10, Bounds::uniform(2, 0.0, 1.0), 4);
        let f = FnObjective::new(2, |x: &[f64]| x[0] + x[1]);
        let p = initialize_population(&cfg, &f, &mut rng::seeded(4)).unwrap();
        assert!(p.agents.iter().all(|a| cfg.bounds.contains(&a.position)));
        assert!(p.agents.windows(2).all(|w| w[0].fitness <= w[1].fitness));
        assert_eq!(p.elite_fitness, p.agents[0].fitness);
        assert_eq!(
            p,
            initialize_population(&cfg, &f, &mut rng::seeded(4)).unwrap()
        );
    }

    #[test]
    fn init_reports_non_finite_point() {
        let cfg = PLConfig::new(10, 10, Bounds::uniform(1, 0.0, 1.0), 0);
        let f = FnObjective::new(1, |_: &[f64]| f64::NAN);
        assert!(matches!(
            initialize_population(&cfg, &f, &mut rng::seeded(0)),
            Err(Error::Init { .. })
        ));
        assert!(optimize(&f, &cfg).is_err());
    }

    #[test]
    fn step_keeps_size_bounds_and_elite() {
        let cfg = PLConfig::new(12, 20, Bounds::uniform(3, -2.0, 2.0), 8);
        let f = FnObjective::new(3, |x: &[f64]| x.iter().map(|v| (v - 1.0).powi(2)).sum());
        let mut rng = rng::seeded(8);
        let mut p = initialize_population(&cfg, &f, &mut rng).unwrap();
        for h in 1..=20 {
            let before = p.elite_fitness;
            step(&mut p, &f, h, &cfg, &mut rng);
            assert_eq!(p.agents.len(), 12);
            assert!(p.elite_fitness <= before);
            assert!(p.agents.iter().all(|a| cfg.bounds.contains(&a.position)));
            assert_eq!(f.evaluate(&p.elite), p.elite_fitness);
        }
    }

    #[test]
    fn non_finite_candidates_are_rejected() {
        let cfg = PLConfig::new(10, 30, Bounds::uniform(1, -1.0, 1.0), 2);
        let f = FnObjective::new(1, |x: &[f64]| {
            if x[0] < -0.5 {
                f64::INFINITY
            } else {
                x[0] * x[0]
            }
        });
        let mut rng = rng::seeded(5);
        let mut p = (0..1000)
            .find_map(|_| initialize_population(&cfg, &f, &mut rng).ok())
            .unwrap();
        for h in 1..=30 {
            step(&mut p, &f, h, &cfg, &mut rng);
            assert!(p
                .agents
                .iter()
                .all(|a| a.fitness.is_finite() && a.position[0] >= -0.5));
        }
        assert!(p.rejected > 0);
    }

    #[test]
    fn constant_objective() {
        let cfg = PLConfig::new(10, 15, Bounds::uniform(2, -1.0, 1.0), 0);
        let r = optimize(&FnObjective::new(2, |_: &[f64]| 7.0), &cfg).unwrap();
        assert_eq!(r.best_fitness, 7.0);
        assert_eq!(r.trace, vec![7.0; 15]);
        assert_eq!(r.evaluations, 10 * 16);
    }

    #[test]
    fn single_precision_run() {
        let cfg = PLConfig::<f32>::new(10, 50, Bounds::uniform(2, -5.0, 5.0), 3);
        let r = optimize(
            &FnObjective::new(2, |x: &[f32]| x.iter().map(|v| v * v).sum()),
            &cfg,
        )
        .unwrap();
        assert!(r.best_fitness < 1.0);
    }
}
