//! Discrete cores whose low-degree moments match the standard Gaussian.
//!
//! Two builders: a closed-form 2m-point design matching degree three, and an
//! LP over weights on i.i.d. Gaussian support points matching degree `t`
//! with a per-point weight floor.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{hermite_multi, HermiteBasis, HermiteCoefficientTable, DEFAULT_BASIS_CAP};
use crate::lp::{find_nonnegative_solution, Feasibility, SimplexOptions};
use crate::quadrature::tensor_gauss_hermite;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Builder {
    #[serde(rename = "explicit3")]
    Explicit3,
    #[serde(rename = "lp")]
    Lp,
}

/// Finitely supported distribution on `R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    m: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    seed: u64,
    builder: Builder,
    /// Degree up to which the builder matched Gaussian moments.
    t: usize,
}

impl DiscreteDistribution {
    pub fn new(
        m: usize,
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
        seed: u64,
        builder: Builder,
        t: usize,
    ) -> Result<Self> {
        let d = DiscreteDistribution {
            m,
            points,
            weights,
            seed,
            builder,
            t,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Validation("support is empty".into()));
        }
        if self.points.len() != self.weights.len() {
            return Err(Error::shape(
                format!("{} weights", self.points.len()),
                self.weights.len(),
            ));
        }
        if let Some(p) = self.points.iter().find(|p| p.len() != self.m) {
            return Err(Error::shape(format!("points of length {}", self.m), p.len()));
        }
        if let Some((i, w)) = self
            .weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w > 0.0))
        {
            return Err(Error::Validation(format!("weight {i} is not positive: {w}")));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "weights sum to {total}, not 1 within 1e-12"
            )));
        }
        for i in 0..self.points.len() {
            for j in 0..i {
                if self.points[i] == self.points[j] {
                    return Err(Error::Validation(format!(
                        "support points {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn builder(&self) -> Builder {
        self.builder
    }

    pub fn matched_degree(&self) -> usize {
        self.t
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: DiscreteDistribution = serde_json::from_str(s)?;
        d.validate()?;
        Ok(d)
    }
}

/// Uniform distribution on `{+-sqrt(m) e_i}`; matches Gaussian moments
/// through degree three.
pub fn build_explicit_3moment(m: usize) -> Result<DiscreteDistribution> {
    if m == 0 {
        return Err(Error::param("dimension m must be at least 1"));
    }
    let r = (m as f64).sqrt();
    let mut points = Vec::with_capacity(2 * m);
    for sign in [1.0, -1.0] {
        for i in 0..m {
            let mut p = vec![0.0; m];
            p[i] = sign * r;
            points.push(p);
        }
    }
    let weights = vec![1.0 / (2 * m) as f64; 2 * m];
    DiscreteDistribution::new(m, points, weights, 0, Builder::Explicit3, 3)
}

#[derive(Debug, Clone)]
pub struct LpBuildOptions {
    pub t: usize,
    /// Support size; defaults to `20 * C(m + t, t)`.
    pub n: Option<usize>,
    /// Weight floor; defaults to `0.99 / n`.
    pub alpha: Option<f64>,
    pub seed: u64,
    pub tol: f64,
    pub max_retries: usize,
    pub basis_cap: usize,
    pub simplex: SimplexOptions,
}

impl LpBuildOptions {
    pub fn new(t: usize, seed: u64) -> Self {
        LpBuildOptions {
            t,
            n: None,
            alpha: None,
            seed,
            tol: 1e-9,
            max_retries: 5,
            basis_cap: DEFAULT_BASIS_CAP,
            simplex: SimplexOptions::default(),
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_retries(mut self, retries: usize) -> Self {
        self.max_retries = retries;
        self
    }
}

pub fn default_support_size(m: usize, t: usize) -> usize {
    20 * crate::hermite::basis_count(m, t).min(usize::MAX as u128 / 20) as usize
}

/// A polynomial `p = sum_a c_a h_a` certifying infeasibility: nonnegative on
/// the support while `E_N[p] < alpha * N * E_U(S)[p]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualCertificate {
    pub coefficients: Vec<f64>,
    pub gaussian_mean: f64,
    pub scaled_support_mean: f64,
    pub min_on_support: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    pub attempts: usize,
    pub m: usize,
    pub t: usize,
    pub n: usize,
    pub alpha: f64,
    pub last_seed: u64,
    pub phase1_objective: f64,
    pub certificate: Option<DualCertificate>,
}

impl fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "m={} t={} N={} alpha={:.3e} (alpha*N={:.3}), last seed {}, residual mass {:.3e}",
            self.m,
            self.t,
            self.n,
            self.alpha,
            self.alpha * self.n as f64,
            self.last_seed,
            self.phase1_objective
        )?;
        if let Some(c) = &self.certificate {
            write!(
                f,
                "; dual polynomial has E_N[p]={:.4e} < alpha*N*E_U[p]={:.4e}, min on support {:.2e}",
                c.gaussian_mean, c.scaled_support_mean, c.min_on_support
            )?;
        }
        Ok(())
    }
}

/// Draws `n` Gaussian support points from `seed` and solves for matched
/// weights, resampling with derived seeds on infeasibility.
pub fn build_lp_matched(m: usize, opts: &LpBuildOptions) -> Result<DiscreteDistribution> {
    if m == 0 {
        return Err(Error::param("dimension m must be at least 1"));
    }
    let count = crate::hermite::basis_count(m, opts.t);
    if count > opts.basis_cap as u128 {
        return Err(Error::BasisCap {
            count,
            cap: opts.basis_cap,
        });
    }
    let n = opts.n.unwrap_or_else(|| default_support_size(m, opts.t));
    if (n as u128) < count {
        return Err(Error::param(format!(
            "support size {n} is below the basis count {count} for m={m}, t={}",
            opts.t
        )));
    }
    let alpha = opts.alpha.unwrap_or(0.99 / n as f64);
    let mut last = None;
    for attempt in 0..=opts.max_retries {
        let seed = if attempt == 0 {
            opts.seed
        } else {
            derive_seed(opts.seed, attempt as u64)
        };
        let points = sample_standard_normal(m, n, seed);
        match solve_weights_on_support(&points, opts.t, alpha, opts.tol, &opts.simplex) {
            Ok(weights) => {
                return DiscreteDistribution::new(m, points, weights, seed, Builder::Lp, opts.t)
            }
            Err(Error::Infeasible(mut report)) => {
                report.attempts = attempt + 1;
                report.last_seed = seed;
                last = Some(report);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Infeasible(last.expect("at least one attempt ran")))
}

pub fn sample_standard_normal(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

/// Weights `w >= alpha` on a fixed support with `sum_i w_i h_a(x_i) = 1{a=0}`
/// for all `|a| <= t`. Residuals are re-checked by direct summation.
pub fn solve_weights_on_support(
    points: &[Vec<f64>],
    t: usize,
    alpha: f64,
    tol: f64,
    simplex: &SimplexOptions,
) -> Result<Vec<f64>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::param("support is empty"));
    }
    let m = points[0].len();
    if !(alpha >= 0.0) || alpha * n as f64 >= 1.0 {
        return Err(Error::param(format!(
            "weight floor alpha={alpha} must satisfy 0 <= alpha * N < 1 (N={n})"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tolerance must be positive"));
    }
    let basis = HermiteBasis::new(m, t)?;
    let rows = basis.len();
    let mut a = DMatrix::zeros(rows, n);
    let mut scratch = vec![0.0; basis.scratch_len()];
    let mut col = vec![0.0; rows];
    for (j, x) in points.iter().enumerate() {
        if x.len() != m {
            return Err(Error::shape(format!("points of length {m}"), x.len()));
        }
        basis.eval_into(x, &mut scratch, &mut col);
        a.column_mut(j).copy_from_slice(&col);
    }
    // substitute w = alpha + u, u >= 0
    let mut rhs = vec![0.0; rows];
    rhs[0] = 1.0;
    for (r, v) in rhs.iter_mut().enumerate() {
        *v -= alpha * a.row(r).sum();
    }
    match find_nonnegative_solution(&a, &rhs, simplex)? {
        Feasibility::Feasible { solution, .. } => {
            let weights: Vec<f64> = solution.iter().map(|u| alpha + u).collect();
            let worst = brute_force_residual(points, &weights, t)?;
            if worst > tol {
                return Err(Error::Validation(format!(
                    "LP weights miss the moment constraints by {worst:.3e} > tol {tol:.1e}"
                )));
            }
            Ok(weights)
        }
        Feasibility::Infeasible {
            farkas,
            phase1_objective,
            ..
        } => {
            // p = -y: nonnegative on the support, E_N[p] = c_0
            let coeffs: Vec<f64> = farkas.iter().map(|v| -v).collect();
            let values: Vec<f64> = (0..n)
                .map(|j| a.column(j).iter().zip(&coeffs).map(|(h, c)| h * c).sum())
                .collect();
            let min_on_support = values.iter().copied().fold(f64::INFINITY, f64::min);
            let support_sum: f64 = values.iter().sum();
            let certificate = DualCertificate {
                gaussian_mean: coeffs[0],
                scaled_support_mean: alpha * support_sum,
                min_on_support,
                coefficients: coeffs,
            };
            Err(Error::Infeasible(Box::new(InfeasibilityReport {
                attempts: 1,
                m,
                t,
                n,
                alpha,
                last_seed: 0,
                phase1_objective,
                certificate: Some(certificate),
            })))
        }
    }
}

/// `max_{|a| <= t} |sum_i w_i h_a(x_i) - 1{a=0}|`, evaluated index by index.
pub fn brute_force_residual(points: &[Vec<f64>], weights: &[f64], t: usize) -> Result<f64> {
    let m = points.first().map_or(0, Vec::len);
    let indices = crate::hermite::enumerate_multi_indices(m, t)?;
    let mut worst: f64 = 0.0;
    for a in &indices {
        let mut s = 0.0;
        for (x, w) in points.iter().zip(weights) {
            s += w * hermite_multi(a, x)?;
        }
        let target = if a.degree() == 0 { 1.0 } else { 0.0 };
        worst = worst.max((s - target).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryReport {
    pub m: usize,
    pub min_norm: f64,
    pub max_norm: f64,
    pub min_pairwise_distance: f64,
    pub norm_lo: f64,
    pub norm_hi: f64,
    pub min_separation: f64,
    pub norm_band_pass: bool,
    pub separation_pass: bool,
}

impl GeometryReport {
    pub fn pass(&self) -> bool {
        self.norm_band_pass && self.separation_pass
    }
}

/// Norm band `[lo * sqrt(m), hi * sqrt(m)]` and minimum pairwise distance,
/// all by brute force.
pub fn check_support_geometry(
    d: &DiscreteDistribution,
    norm_band: (f64, f64),
    min_sep: f64,
) -> GeometryReport {
    let sqrt_m = (d.dim() as f64).sqrt();
    let norms: Vec<f64> = d.points().iter().map(|p| norm(p)).collect();
    let min_norm = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    let min_pairwise_distance = min_pairwise_distance(d.points());
    let norm_lo = norm_band.0 * sqrt_m;
    let norm_hi = norm_band.1 * sqrt_m;
    GeometryReport {
        m: d.dim(),
        min_norm,
        max_norm,
        min_pairwise_distance,
        norm_lo,
        norm_hi,
        min_separation: min_sep,
        norm_band_pass: min_norm >= norm_lo && max_norm <= norm_hi,
        separation_pass: min_pairwise_distance >= min_sep,
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in 0..i {
            let d2: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            best = best.min(d2);
        }
    }
    best.sqrt()
}

/// `sum_i w_i h_a(x_i)` for every `|a| <= t`.
pub fn discrete_hermite_moments(
    d: &DiscreteDistribution,
    t: usize,
) -> Result<HermiteCoefficientTable> {
    let basis = Arc::new(HermiteBasis::new(d.dim(), t)?);
    weighted_moments(&basis, d.points(), d.weights())
}

pub(crate) fn weighted_moments(
    basis: &Arc<HermiteBasis>,
    points: &[Vec<f64>],
    weights: &[f64],
) -> Result<HermiteCoefficientTable> {
    let mut acc = vec![0.0; basis.len()];
    let mut scratch = vec![0.0; basis.scratch_len()];
    let mut vals = vec![0.0; basis.len()];
    for (x, &w) in points.iter().zip(weights) {
        basis.eval_into(x, &mut scratch, &mut vals);
        for (s, v) in acc.iter_mut().zip(&vals) {
            *s += w * v;
        }
    }
    HermiteCoefficientTable::new(basis.clone(), acc)
}

/// Empirical Hermite means of the uniform distribution on `samples`.
pub fn empirical_hermite_means(samples: &[Vec<f64>], t: usize) -> Result<HermiteCoefficientTable> {
    if samples.is_empty() {
        return Err(Error::param("sample set is empty"));
    }
    let basis = Arc::new(HermiteBasis::new(samples[0].len(), t)?);
    let w = vec![1.0 / samples.len() as f64; samples.len()];
    weighted_moments(&basis, samples, &w)
}

/// `sup |E_U(S)[p] - E_N[p]|` over polynomials of degree `<= t` with
/// `E_N[p^2] = 1`: the Euclidean norm of the empirical Hermite deviations.
pub fn empirical_poly_deviation_linear(samples: &[Vec<f64>], t: usize) -> Result<f64> {
    let means = empirical_hermite_means(samples, t)?;
    Ok(means
        .iter()
        .filter(|(a, _)| a.degree() >= 1)
        .map(|(_, v)| v * v)
        .sum::<f64>()
        .sqrt())
}

/// Deviations of the uniform distribution on `S` from `N(0, I)` for random
/// unit-norm probes `p`, on `p`, `p^2` and `p^4`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probes: usize,
    /// max over probes of `E_U[p] - E_N[p]`
    pub max_linear_excess: f64,
    /// min over probes of `E_U[p^2] - E_N[p^2]`
    pub min_square_excess: f64,
    /// max over probes of `E_U[p^4] - E_N[p^4]`
    pub max_fourth_excess: f64,
}

pub fn empirical_probe_deviations(
    samples: &[Vec<f64>],
    t: usize,
    probes: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if samples.is_empty() {
        return Err(Error::param("sample set is empty"));
    }
    let m = samples[0].len();
    let basis = HermiteBasis::new(m, t)?;
    let nb = basis.len();
    let (qpts, qw) = tensor_gauss_hermite(2 * t + 1, m, 2_000_000).ok_or_else(|| {
        Error::param(format!(
            "quadrature grid {}^{m} too large for exact E_N[p^4]",
            2 * t + 1
        ))
    })?;
    let eval_all = |pts: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let mut scratch = vec![0.0; basis.scratch_len()];
        pts.iter()
            .map(|x| {
                let mut v = vec![0.0; nb];
                basis.eval_into(x, &mut scratch, &mut v);
                v
            })
            .collect()
    };
    let hs = eval_all(samples);
    let hq = eval_all(&qpts);
    let mut rng = rng_from_seed(seed);
    let mut report = ProbeReport {
        probes,
        max_linear_excess: f64::NEG_INFINITY,
        min_square_excess: f64::INFINITY,
        max_fourth_excess: f64::NEG_INFINITY,
    };
    let inv_n = 1.0 / samples.len() as f64;
    for _ in 0..probes {
        let mut c: Vec<f64> = (0..nb).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let nrm = norm(&c);
        c.iter_mut().for_each(|v| *v /= nrm);
        let p = |h: &Vec<f64>| h.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        let (mut e1, mut e2, mut e4) = (0.0, 0.0, 0.0);
        for h in &hs {
            let v = p(h);
            e1 += v;
            e2 += v * v;
            e4 += v.powi(4);
        }
        let g4: f64 = hq.iter().zip(&qw).map(|(h, w)| w * p(h).powi(4)).sum();
        report.max_linear_excess = report.max_linear_excess.max(e1 * inv_n - c[0]);
        report.min_square_excess = report.min_square_excess.min(e2 * inv_n - 1.0);
        report.max_fourth_excess = report.max_fourth_excess.max(e4 * inv_n - g4);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_small_cases() {
        let d = build_explicit_3moment(1).unwrap();
        assert_eq!(d.points(), &[vec![1.0], vec![-1.0]]);
        assert_eq!(d.weights(), &[0.5, 0.5]);
        let mean: f64 = d.points().iter().zip(d.weights()).map(|(p, w)| w * p[0]).sum();
        let second: f64 = d.points().iter().zip(d.weights()).map(|(p, w)| w * p[0].powi(2)).sum();
        let third: f64 = d.points().iter().zip(d.weights()).map(|(p, w)| w * p[0].powi(3)).sum();
        assert_eq!((mean, second, third), (0.0, 1.0, 0.0));

        let d = build_explicit_3moment(2).unwrap();
        assert_eq!(d.len(), 4);
        let e = |f: &dyn Fn(&[f64]) -> f64| -> f64 {
            d.points().iter().zip(d.weights()).map(|(p, w)| w * f(p)).sum()
        };
        assert!((e(&|p| p[0] * p[0]) - 1.0).abs() < 1e-15);
        assert_eq!(e(&|p| p[0] * p[1]), 0.0);
    }

    #[test]
    fn explicit_moments_vanish_to_degree_three() {
        for m in [1, 2, 3, 5, 8] {
            let d = build_explicit_3moment(m).unwrap();
            let table = discrete_hermite_moments(&d, 3).unwrap();
            assert!((table.values()[0] - 1.0).abs() < 1e-12);
            assert!(table.max_abs_nonconstant(3) < 1e-12, "m={m}");
        }
    }

    #[test]
    fn explicit_geometry_m4() {
        let d = build_explicit_3moment(4).unwrap();
        let g = check_support_geometry(&d, (0.9, 1.1), 2.0);
        assert!((g.min_pairwise_distance - 8f64.sqrt()).abs() < 1e-12);
        assert!(g.pass());
    }

    #[test]
    fn single_point_geometry() {
        let d = DiscreteDistribution::new(2, vec![vec![1.0, 1.0]], vec![1.0], 0, Builder::Lp, 0)
            .unwrap();
        let g = check_support_geometry(&d, (0.9, 1.1), 1.0);
        assert!(g.min_pairwise_distance.is_infinite());
        assert!((g.min_norm - 2f64.sqrt()).abs() < 1e-15);
        assert!(g.norm_band_pass);
    }

    #[test]
    fn fixed_support_two_points() {
        let w = solve_weights_on_support(
            &[vec![-1.0], vec![2.0]],
            1,
            0.1,
            1e-12,
            &SimplexOptions::default(),
        )
        .unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn degree_zero_accepts_anything() {
        let pts = vec![vec![0.3], vec![-2.0], vec![5.0]];
        let w = solve_weights_on_support(&pts, 0, 0.2, 1e-12, &SimplexOptions::default()).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(w.iter().all(|&v| v >= 0.2));
    }

    #[test]
    fn lp_build_with_relaxed_floor() {
        let opts = LpBuildOptions::new(2, 7).with_n(200).with_alpha(0.5 / 200.0);
        let d = build_lp_matched(2, &opts).unwrap();
        assert_eq!(d.len(), 200);
        assert!(brute_force_residual(d.points(), d.weights(), 2).unwrap() <= 1e-8);
        assert!(d.min_weight() >= 0.5 / 200.0);
    }

    #[test]
    fn lp_build_tight_floor_is_infeasible_with_certificate() {
        // alpha * N = 0.99 leaves 1% of the mass to correct sampling error
        let opts = LpBuildOptions::new(2, 7).with_n(200).with_retries(1);
        match build_lp_matched(2, &opts) {
            Err(Error::Infeasible(report)) => {
                assert_eq!(report.attempts, 2);
                let cert = report.certificate.as_ref().unwrap();
                assert!(cert.min_on_support >= -1e-9);
                assert!(cert.gaussian_mean < cert.scaled_support_mean);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn lp_parameter_errors() {
        let opts = LpBuildOptions::new(3, 1).with_n(5);
        assert!(matches!(build_lp_matched(2, &opts), Err(Error::Parameter(_))));
        let opts = LpBuildOptions::new(1, 1).with_n(10).with_alpha(0.2);
        assert!(matches!(build_lp_matched(1, &opts), Err(Error::Parameter(_))));
    }

    #[test]
    fn deviation_examples() {
        let v = empirical_poly_deviation_linear(&[vec![-1.0], vec![1.0]], 1).unwrap();
        assert_eq!(v, 0.0);
        let v = empirical_poly_deviation_linear(&[vec![0.0]], 2).unwrap();
        assert!((v - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let s = sample_standard_normal(2, 100_000, 11);
        let v = empirical_poly_deviation_linear(&s, 2).unwrap();
        assert!(v <= 0.05, "{v}");
    }

    #[test]
    fn point_mass_moments() {
        let d = DiscreteDistribution::new(1, vec![vec![0.0]], vec![1.0], 0, Builder::Lp, 0).unwrap();
        let t = discrete_hermite_moments(&d, 2).unwrap();
        assert_eq!(t.values()[0], 1.0);
        assert_eq!(t.values()[1], 0.0);
        assert!((t.values()[2] + 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_weights() {
        let r = DiscreteDistribution::new(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.6], 0, Builder::Lp, 0);
        assert!(matches!(r, Err(Error::Validation(_))));
        let r = DiscreteDistribution::new(1, vec![vec![0.0], vec![0.0]], vec![0.5, 0.5], 0, Builder::Lp, 0);
        assert!(matches!(r, Err(Error::Validation(_))));
        let r = DiscreteDistribution::new(1, vec![vec![0.0], vec![1.0]], vec![1.0, 0.0], 0, Builder::Lp, 0);
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn json_layout_and_roundtrip() {
        let d = build_explicit_3moment(2).unwrap();
        let s = d.to_json().unwrap();
        let keys: Vec<usize> = ["\"m\"", "\"points\"", "\"weights\"", "\"seed\"", "\"builder\"", "\"t\""]
            .iter()
            .map(|k| s.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert!(s.contains("\"builder\":\"explicit3\""));
        let back = DiscreteDistribution::from_json(&s).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn probes_on_large_gaussian_sample_are_small() {
        let s = sample_standard_normal(2, 50_000, 3);
        let r = empirical_probe_deviations(&s, 2, 50, 9).unwrap();
        assert!(r.max_linear_excess < 0.05);
        assert!(r.min_square_excess > -0.1);
        assert!(r.max_fourth_excess < 2.0);
    }
}
