//! Densities that can be evaluated and sampled.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::{rng_from_seed, Rng};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub trait Density: Sync {
    fn dim(&self) -> usize;

    fn ln_pdf(&self, x: &[f64]) -> f64;

    fn pdf(&self, x: &[f64]) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Writes one draw into `out` (length `dim()`).
    fn sample_into(&self, rng: &mut Rng, out: &mut [f64]);

    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let mut x = vec![0.0; self.dim()];
                self.sample_into(&mut rng, &mut x);
                x
            })
            .collect()
    }
}

/// Densities whose ratio to `N(0, I_d)` can be evaluated directly.
pub trait LikelihoodRatio: Density {
    /// `ln p(x) - ln phi_d(x)`.
    fn ln_likelihood_ratio(&self, x: &[f64]) -> f64 {
        self.ln_pdf(x) - ln_standard_normal(x)
    }
}

/// `N(0, I_d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StandardGaussian {
    pub d: usize,
}

impl StandardGaussian {
    pub fn new(d: usize) -> Self {
        StandardGaussian { d }
    }
}

pub fn ln_standard_normal(x: &[f64]) -> f64 {
    let sq: f64 = x.iter().map(|v| v * v).sum();
    -0.5 * (x.len() as f64 * LN_2PI + sq)
}

impl Density for StandardGaussian {
    fn dim(&self) -> usize {
        self.d
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        ln_standard_normal(x)
    }

    fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }
}

impl LikelihoodRatio for StandardGaussian {
    fn ln_likelihood_ratio(&self, _x: &[f64]) -> f64 {
        0.0
    }
}

/// `N(mean, sigma^2 I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicGaussian {
    pub mean: Vec<f64>,
    pub sigma: f64,
}

impl Density for IsotropicGaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        let s2 = self.sigma * self.sigma;
        let sq: f64 = x.iter().zip(&self.mean).map(|(a, b)| (a - b) * (a - b)).sum();
        -0.5 * (self.mean.len() as f64 * (LN_2PI + s2.ln()) + sq / s2)
    }

    fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        for (v, m) in out.iter_mut().zip(&self.mean) {
            *v = m + self.sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

impl LikelihoodRatio for IsotropicGaussian {}

pub(crate) fn log_sum_exp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + vals.map(|v| (v - max).exp()).sum::<f64>().ln()
}
