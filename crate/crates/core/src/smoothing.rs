//! Ornstein–Uhlenbeck smoothing of a discrete core into a spherical
//! Gaussian mixture, with exact Hermite moments and chi-square divergence.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::{log_sum_exp, Density, LN_2PI};
use crate::error::{Error, Result};
use crate::hermite::{HermiteBasis, HermiteCoefficientTable, MultiIndex};
use crate::moments::{weighted_moments, DiscreteDistribution};
use crate::rng::Rng;

/// `sum_i w_i N(mu_i, delta I_m)` with `rho = sqrt(1 - delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureFile", into = "MixtureFile")]
pub struct SmoothedMixture {
    m: usize,
    means: Vec<Vec<f64>>,
    delta: f64,
    weights: Vec<f64>,
    rho: f64,
    sampler: WeightedIndex<f64>,
}

#[derive(Serialize, Deserialize)]
struct MixtureFile {
    m: usize,
    delta: f64,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
}

impl TryFrom<MixtureFile> for SmoothedMixture {
    type Error = Error;
    fn try_from(f: MixtureFile) -> Result<Self> {
        SmoothedMixture::new(f.m, f.means, f.delta, f.weights)
    }
}

impl From<SmoothedMixture> for MixtureFile {
    fn from(a: SmoothedMixture) -> Self {
        MixtureFile {
            m: a.m,
            delta: a.delta,
            weights: a.weights,
            means: a.means,
        }
    }
}

impl SmoothedMixture {
    pub fn new(m: usize, means: Vec<Vec<f64>>, delta: f64, weights: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param(format!("delta must lie in (0, 1), got {delta}")));
        }
        if means.is_empty() || means.len() != weights.len() {
            return Err(Error::shape(
                format!("{} weights for {} means (non-empty)", means.len(), means.len()),
                weights.len(),
            ));
        }
        if let Some(mu) = means.iter().find(|mu| mu.len() != m) {
            return Err(Error::shape(format!("means of length {m}"), mu.len()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Validation("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("mixture weights sum to {total}")));
        }
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::Validation(format!("mixture weights: {e}")))?;
        Ok(SmoothedMixture {
            m,
            means,
            delta,
            weights,
            rho: (1.0 - delta).sqrt(),
            sampler,
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Core support points `mu_i / rho`.
    pub fn core_points(&self) -> Vec<Vec<f64>> {
        self.means
            .iter()
            .map(|mu| mu.iter().map(|v| v / self.rho).collect())
            .collect()
    }

    /// Exact `E_A[h_a] = rho^|a| sum_i w_i h_a(mu_i / rho)`. The same value
    /// is the per-component closed form `E_{N(mu, delta I)}[h_a]`.
    pub fn hermite_moment(&self, a: &MultiIndex) -> Result<f64> {
        if a.dim() != self.m {
            return Err(Error::shape(format!("multi-index of length {}", self.m), a.dim()));
        }
        let mut s = 0.0;
        for (x, w) in self.core_points().iter().zip(&self.weights) {
            s += w * crate::hermite::hermite_multi(a, x)?;
        }
        Ok(self.rho.powi(a.degree() as i32) * s)
    }

    /// All moments up to degree `t`.
    pub fn hermite_moments(&self, t: usize) -> Result<HermiteCoefficientTable> {
        let basis = Arc::new(HermiteBasis::new(self.m, t)?);
        let core = weighted_moments(&basis, &self.core_points(), &self.weights)?;
        crate::hermite::ou_transform_moments(&core, self.rho)
    }

    /// Exact `chi^2(A, N(0, I_m)) = sum_ij w_i w_j T(mu_i, mu_j) - 1`.
    pub fn chi2_vs_standard(&self) -> Result<f64> {
        Ok(self.ln_one_plus_chi2()?.exp_m1())
    }

    /// `ln(1 + chi^2)`, stable when the divergence is astronomically large.
    pub fn ln_one_plus_chi2(&self) -> Result<f64> {
        let k = self.components();
        let mut terms = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                terms.push(
                    self.weights[i].ln()
                        + self.weights[j].ln()
                        + ln_cross_term(&self.means[i], &self.means[j], self.delta)?,
                );
            }
        }
        Ok(log_sum_exp(terms.iter().copied()))
    }

    /// Largest `|mu_i|`.
    pub fn max_mean_norm(&self) -> f64 {
        self.means
            .iter()
            .map(|mu| crate::moments::norm(mu))
            .fold(0.0, f64::max)
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Draws a component index according to the weights.
    pub fn sample_component(&self, rng: &mut Rng) -> usize {
        self.sampler.sample(rng)
    }
}

/// `ln T` with `T(a, b, delta) = int N(x; a, delta I) N(x; b, delta I) / phi(x) dx
/// = (delta (2 - delta))^{-m/2} exp((delta (|a|^2 + |b|^2) - |a - b|^2) / (2 delta (2 - delta)))`.
pub fn ln_cross_term(a: &[f64], b: &[f64], delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Divergence(format!(
            "cross term needs 0 < delta < 1, got {delta}"
        )));
    }
    if a.len() != b.len() {
        return Err(Error::shape(a.len(), b.len()));
    }
    let m = a.len() as f64;
    let (mut na, mut nb, mut diff) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        na += x * x;
        nb += y * y;
        diff += (x - y) * (x - y);
    }
    let q = delta * (2.0 - delta);
    Ok(-0.5 * m * q.ln() + (delta * (na + nb) - diff) / (2.0 * q))
}

/// `delta = c k^{-2.5/m}`.
pub fn default_delta(k: usize, m: usize, c: f64) -> f64 {
    c * (k as f64).powf(-2.5 / m as f64)
}

/// `delta^{-m/2} e^{1.21 m}`, valid when every mean norm is at most
/// `1.1 sqrt(m)`.
pub fn chi2_bound(m: usize, delta: f64) -> f64 {
    let m = m as f64;
    (-0.5 * m * delta.ln() + 1.21 * m).exp()
}

pub fn smooth(core: &DiscreteDistribution, delta: f64) -> Result<SmoothedMixture> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta must lie in (0, 1), got {delta}")));
    }
    let rho = (1.0 - delta).sqrt();
    let means = core
        .points()
        .iter()
        .map(|x| x.iter().map(|v| rho * v).collect())
        .collect();
    SmoothedMixture::new(core.dim(), means, delta, core.weights().to_vec())
}

impl Density for SmoothedMixture {
    fn dim(&self) -> usize {
        self.m
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        let norm = -0.5 * self.m as f64 * (LN_2PI + self.delta.ln());
        let inv = 0.5 / self.delta;
        log_sum_exp(self.means.iter().zip(&self.weights).map(|(mu, w)| {
            let sq: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
            w.ln() + norm - sq * inv
        }))
    }

    fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        let i = self.sampler.sample(rng);
        let s = self.delta.sqrt();
        for (v, mu) in out.iter_mut().zip(&self.means[i]) {
            *v = mu + s * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{build_explicit_3moment, Builder};

    fn single(mu: Vec<f64>, delta: f64) -> SmoothedMixture {
        SmoothedMixture::new(mu.len(), vec![mu], delta, vec![1.0]).unwrap()
    }

    #[test]
    fn smooth_examples() {
        let d = DiscreteDistribution::new(1, vec![vec![0.0]], vec![1.0], 0, Builder::Lp, 0).unwrap();
        let a = smooth(&d, 0.25).unwrap();
        assert_eq!(a.means(), &[vec![0.0]]);
        assert_eq!(a.delta(), 0.25);

        let d = build_explicit_3moment(1).unwrap();
        let a = smooth(&d, 0.19).unwrap();
        assert!((a.means()[0][0] - 0.9).abs() < 1e-15);
        assert!((a.means()[1][0] + 0.9).abs() < 1e-15);
        assert!((a.rho().powi(2) + a.delta() - 1.0).abs() < 1e-12);

        let a = smooth(&build_explicit_3moment(2).unwrap(), 0.1).unwrap();
        for mu in a.means() {
            assert!((crate::moments::norm(mu) - 1.341_640_786_499_874).abs() < 1e-12);
        }
        assert!(smooth(&d, 1.0).is_err());
        assert!(smooth(&d, 0.0).is_err());
    }

    #[test]
    fn moment_examples() {
        let a = smooth(&build_explicit_3moment(3).unwrap(), 0.2).unwrap();
        assert!((a.hermite_moment(&MultiIndex::zero(3)).unwrap() - 1.0).abs() < 1e-15);
        let table = a.hermite_moments(3).unwrap();
        assert!(table.max_abs_nonconstant(3) < 1e-12);

        let s = single(vec![2.0], 0.19);
        let v = s.hermite_moment(&vec![1].into()).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn chi2_examples() {
        let s = single(vec![0.0], 1.0 - 1e-15);
        assert!(s.chi2_vs_standard().unwrap().abs() < 1e-12);
        let s = single(vec![0.0], 0.5);
        let want = 1.0 / (0.5f64 * 1.5).sqrt() - 1.0;
        assert!((s.chi2_vs_standard().unwrap() - want).abs() < 1e-14);
        assert!((want - 0.154_700_538_379_251_5).abs() < 1e-12);
    }

    #[test]
    fn cross_term_symmetry() {
        let a = [0.3, -1.0, 2.0];
        let b = [1.1, 0.4, -0.2];
        assert_eq!(
            ln_cross_term(&a, &b, 0.3).unwrap(),
            ln_cross_term(&b, &a, 0.3).unwrap()
        );
        assert!(matches!(ln_cross_term(&a, &b, 1.0), Err(Error::Divergence(_))));
    }

    #[test]
    fn pdf_examples() {
        let a = single(vec![0.0], 0.999_999_999_999);
        assert!((a.pdf(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-9);
        let a = SmoothedMixture::new(1, vec![vec![1.0], vec![-1.0]], 0.25, vec![0.5, 0.5]).unwrap();
        let want = (-2.0f64).exp() / (2.0 * std::f64::consts::PI * 0.25).sqrt();
        assert!((a.pdf(&[0.0]) - want).abs() < 1e-15);
        assert!((want - 0.107_981_933_026_376_1).abs() < 1e-12);
    }

    #[test]
    fn sampling_contract() {
        let a = single(vec![0.0, 0.0], 0.5);
        assert!(a.sample(0, 1).is_empty());
        assert_eq!(a.sample(100, 4), a.sample(100, 4));
        assert_ne!(a.sample(100, 4), a.sample(100, 5));
    }

    #[test]
    fn json_roundtrip() {
        let a = smooth(&build_explicit_3moment(2).unwrap(), 0.1).unwrap();
        let s = crate::json::to_string(&a).unwrap();
        assert!(s.starts_with("{\"m\":2,\"delta\":"));
        let back: SmoothedMixture = serde_json::from_str(&s).unwrap();
        assert_eq!(back.means(), a.means());
        assert_eq!(back.delta(), a.delta());
        assert!(serde_json::from_str::<SmoothedMixture>(
            r#"{"m":1,"delta":1.5,"weights":[1.0],"means":[[0.0]]}"#
        )
        .is_err());
    }
}
