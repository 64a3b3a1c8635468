//! Standard test functions with known optima.

use super::{Bounds, Objective};
use crate::scalar::Scalar;

/// Dimensions every suite function is instantiated at.
pub const SUITE_DIMS: [usize; 3] = [2, 5, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Landscape {
    Sphere,
    Rosenbrock,
    Rastrigin,
    Ackley,
}

impl Landscape {
    pub const ALL: [Landscape; 4] = [
        Landscape::Sphere,
        Landscape::Rosenbrock,
        Landscape::Rastrigin,
        Landscape::Ackley,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Landscape::Sphere => "sphere",
            Landscape::Rosenbrock => "rosenbrock",
            Landscape::Rastrigin => "rastrigin",
            Landscape::Ackley => "ackley",
        }
    }

    /// Conventional search box.
    pub fn range(self) -> (f64, f64) {
        match self {
            Landscape::Sphere => (-5.0, 5.0),
            Landscape::Rosenbrock => (-5.0, 10.0),
            Landscape::Rastrigin => (-5.12, 5.12),
            Landscape::Ackley => (-32.768, 32.768),
        }
    }

    pub fn optimum_coordinate(self) -> f64 {
        match self {
            Landscape::Rosenbrock => 1.0,
            _ => 0.0,
        }
    }
}

/// A suite function at a fixed dimension, with its global minimum recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkFunction {
    pub landscape: Landscape,
    pub dim: usize,
    pub optimum_value: f64,
    pub optimum_location: Vec<f64>,
}

impl BenchmarkFunction {
    pub fn new(landscape: Landscape, dim: usize) -> Self {
        Self {
            landscape,
            dim,
            optimum_value: 0.0,
            optimum_location: vec![landscape.optimum_coordinate(); dim],
        }
    }

    pub fn name(&self) -> String {
        format!("{}_{}d", self.landscape.name(), self.dim)
    }

    pub fn bounds<T: Scalar>(&self) -> Bounds<T> {
        let (lo, hi) = self.landscape.range();
        Bounds::uniform(self.dim, T::lit(lo), T::lit(hi))
    }
}

impl<T: Scalar> Objective<T> for BenchmarkFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[T]) -> T {
        match self.landscape {
            Landscape::Sphere => sphere(x),
            Landscape::Rosenbrock => rosenbrock(x),
            Landscape::Rastrigin => rastrigin(x),
            Landscape::Ackley => ackley(x),
        }
    }
}

/// Sphere, Rosenbrock, Rastrigin and Ackley at 2, 5 and 10 dimensions.
pub fn benchmark_suite() -> Vec<BenchmarkFunction> {
    Landscape::ALL
        .iter()
        .flat_map(|&l| {
            SUITE_DIMS
                .iter()
                .map(move |&d| BenchmarkFunction::new(l, d))
        })
        .collect()
}

pub fn sphere<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum()
}

/// Chained form `Σ 100·(x_{i+1} − x_i²)² + (1 − x_i)²`; zero at all-ones.
pub fn rosenbrock<T: Scalar>(x: &[T]) -> T {
    let hundred = T::lit(100.0);
    x.windows(2)
        .map(|w| {
            let a = w[1] - w[0] * w[0];
            let b = T::one() - w[0];
            hundred * a * a + b * b
        })
        .sum()
}

pub fn rastrigin<T: Scalar>(x: &[T]) -> T {
    let ten = T::lit(10.0);
    let tau = T::lit(std::f64::consts::TAU);
    ten * T::lit(x.len() as f64) + x.iter().map(|&v| v * v - ten * (tau * v).cos()).sum::<T>()
}

pub fn ackley<T: Scalar>(x: &[T]) -> T {
    let n = T::lit(x.len() as f64);
    let tau = T::lit(std::f64::consts::TAU);
    let twenty = T::lit(20.0);
    let sq = (x.iter().map(|&v| v * v).sum::<T>() / n).sqrt();
    let cos = x.iter().map(|&v| (tau * v).cos()).sum::<T>() / n;
    let value =
        -twenty * (T::lit(-0.2) * sq).exp() - cos.exp() + twenty + T::lit(std::f64::consts::E);
    // The two exponentials cancel only up to rounding at the optimum.
    value.max(T::zero())
}
