//! Bounded continuous minimization.
//!
//! [`passer`] is the producer / scrounger / investigator hybrid; [`pso`] and
//! [`random`] are the baselines it is compared against, and [`bench`] holds
//! the standard test functions.

pub mod bench;
pub mod passer;
pub mod pso;
pub mod random;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::rng::Rng;
use crate::scalar::Scalar;

pub use passer::{investigator_update, optimize, producer_update, scrounger_update};
pub use pso::pso_optimize;
pub use random::random_search;

/// A pure function to minimize. Must be safe to call from several threads.
pub trait Objective<T>: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &[T]) -> T;
}

/// Adapts a closure into an [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T, F: Fn(&[T]) -> T + Sync> Objective<T> for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[T]) -> T {
        (self.f)(x)
    }
}

/// Per-dimension box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> Bounds<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn uniform(dim: usize, lo: T, hi: T) -> Self {
        Self {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() {
            return Err(Error::shape("bounds lo/hi lengths differ"));
        }
        if self.lo.is_empty() {
            return Err(Error::domain("bounds must have at least one dimension"));
        }
        if let Some(j) = (0..self.dim()).find(|&j| {
            !(self.lo[j] < self.hi[j]) || !self.lo[j].is_finite() || !self.hi[j].is_finite()
        }) {
            return Err(Error::domain(format!("dimension {j}: need finite lo < hi")));
        }
        Ok(())
    }

    pub fn clamp(&self, x: &mut [T]) {
        for ((v, &lo), &hi) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            // NaN coordinates land on the lower bound.
            *v = if v.is_nan() { lo } else { v.max(lo).min(hi) };
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.lo)
                .zip(&self.hi)
                .all(|((&v, &lo), &hi)| lo <= v && v <= hi)
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| lo + (hi - lo) * T::lit(rng.random::<f64>()))
            .collect()
    }
}

/// Settings shared by all three optimizers. PSO and random search only read
/// `pop_size`, `max_iter`, `bounds` and `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct PLConfig<T> {
    pub pop_size: usize,
    pub max_iter: usize,
    /// Share of the population acting as producers.
    pub producer_fraction: T,
    /// Share of the population picked as investigators each iteration.
    pub investigator_fraction: T,
    /// Producers explore while the alarm draw stays below this.
    pub awareness_probability: T,
    pub flight_length: T,
    pub bounds: Bounds<T>,
    pub seed: u64,
}

impl<T: Scalar> PLConfig<T> {
    /// Default rates (PD 0.2, SD 0.1, AP 0.8, fl 1.0).
    pub fn new(pop_size: usize, max_iter: usize, bounds: Bounds<T>, seed: u64) -> Self {
        Self {
            pop_size,
            max_iter,
            producer_fraction: T::lit(0.2),
            investigator_fraction: T::lit(0.1),
            awareness_probability: T::lit(0.8),
            flight_length: T::one(),
            bounds,
            seed,
        }
    }

    pub fn with_bounds(mut self, bounds: Bounds<T>) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn producer_count(&self) -> usize {
        fraction_count(self.producer_fraction, self.pop_size)
    }

    pub fn investigator_count(&self) -> usize {
        fraction_count(self.investigator_fraction, self.pop_size)
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.pop_size < 4 {
            return Err(Error::domain("population size must be at least 4"));
        }
        if self.max_iter == 0 {
            return Err(Error::domain("max_iter must be at least 1"));
        }
        let unit = |name: &str, v: T| {
            if v > T::zero() && v < T::one() {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} = {v} outside (0, 1)")))
            }
        };
        unit("producer_fraction", self.producer_fraction)?;
        unit("investigator_fraction", self.investigator_fraction)?;
        unit("awareness_probability", self.awareness_probability)?;
        if !(self.flight_length > T::zero()) {
            return Err(Error::domain("flight_length must be positive"));
        }
        let n = T::lit(self.pop_size as f64);
        if self.producer_fraction * n < T::one() || self.investigator_fraction * n < T::one() {
            return Err(Error::domain(
                "producer and investigator fractions must each cover at least one agent",
            ));
        }
        if self.producer_count() >= self.pop_size {
            return Err(Error::domain("producers must leave room for scroungers"));
        }
        Ok(())
    }

    pub(crate) fn check_objective(&self, objective: &dyn Objective<T>) -> Result<()> {
        if objective.dim() != self.dim() {
            return Err(Error::shape(format!(
                "objective has {} dimensions, bounds have {}",
                objective.dim(),
                self.dim()
            )));
        }
        Ok(())
    }
}

fn fraction_count<T: Scalar>(fraction: T, n: usize) -> usize {
    // Absorb representation error so that e.g. 0.2 · 30 counts as 6.
    ((fraction.as_f64() * n as f64) - 1e-6).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult<T> {
    pub best_position: Vec<T>,
    pub best_fitness: T,
    /// Best-so-far fitness after each iteration; non-increasing, length `max_iter`.
    pub trace: Vec<T>,
    pub evaluations: usize,
    /// Candidates discarded because the objective was non-finite there.
    pub rejected: usize,
}

impl<T: Scalar> OptimizationResult<T> {
    /// First 1-based iteration whose best-so-far fitness is `<= target`.
    pub fn iterations_to_reach(&self, target: T) -> Option<usize> {
        self.trace.iter().position(|&f| f <= target).map(|i| i + 1)
    }

    /// CSV with header `iter,best_fitness`, 1-based iterations and 9
    /// significant digits.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,best_fitness")?;
        for (i, f) in self.trace.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, sig(f.as_f64(), 9))?;
        }
        Ok(())
    }
}

/// Which optimizer to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Passer,
    Pso,
    Random,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Passer, Method::Pso, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::Passer => "passer",
            Method::Pso => "pso",
            Method::Random => "random",
        }
    }

    pub fn run<T: Scalar>(
        self,
        objective: &dyn Objective<T>,
        config: &PLConfig<T>,
    ) -> Result<OptimizationResult<T>> {
        match self {
            Method::Passer => optimize(objective, config),
            Method::Pso => pso_optimize(objective, config),
            Method::Random => random_search(objective, config),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "passer" | "pl" => Ok(Method::Passer),
            "pso" => Ok(Method::Pso),
            "random" => Ok(Method::Random),
            _ => Err(Error::domain(format!(
                "unknown optimizer {s:?} (passer, pso, random)"
            ))),
        }
    }
}

/// Evaluates every candidate, possibly in parallel. Output order matches input.
pub(crate) fn evaluate_all<T: Scalar>(
    objective: &dyn Objective<T>,
    candidates: &[Vec<T>],
) -> Vec<T> {
    candidates
        .par_iter()
        .map(|x| objective.evaluate(x))
        .collect()
}
