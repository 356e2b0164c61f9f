//! Quantitative checks: pairwise correlations against their bound, total
//! variation distances, mean separation, the principal-angle determinant,
//! and the verification report assembled from them.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{log_sum_exp, Density, LikelihoodRatio};
use crate::error::{Error, Result};
use crate::packing::{operator_norm, orthonormality_residual, OpNormMethod};
use crate::planting::{InstanceFile, PlantedInstance};
use crate::rng::{derive_seed, rng_from_seed};
use crate::smoothing::{chi2_bound, SmoothedMixture};

pub const DEFAULT_MULTIPLIER: f64 = 3.0;
const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub estimate: f64,
    pub stderr: f64,
    pub n: usize,
    pub multiplier: f64,
    /// Relative standard error above one: the estimate is not trustworthy.
    pub unreliable: bool,
    /// Proposal draws dropped because their density was zero.
    pub skipped: usize,
}

impl EstimateWithCI {
    pub fn lo(&self) -> f64 {
        self.estimate - self.multiplier * self.stderr
    }

    pub fn hi(&self) -> f64 {
        self.estimate + self.multiplier * self.stderr
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo() <= v && v <= self.hi()
    }
}

impl fmt::Display for EstimateWithCI {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} +- {:.2e} (n={})", self.estimate, self.stderr, self.n)?;
        if self.unreliable {
            write!(f, " [unreliable]")?;
        }
        Ok(())
    }
}

/// Running mean and sum of squared deviations (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, o: Welford) -> Welford {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Welford {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
        }
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Monte-Carlo mean of `f(x)` over `x ~ proposal`, in blocks with derived
/// seeds, reduced in block order. `f` returns `None` to skip a draw.
fn mc_mean<P, F>(proposal: &P, n: usize, seed: u64, f: F) -> (Welford, usize)
where
    P: Density + ?Sized,
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let parts: Vec<(Welford, usize)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = BLOCK.min(n - b * BLOCK);
            let mut rng = rng_from_seed(derive_seed(seed, b as u64));
            let mut x = vec![0.0; proposal.dim()];
            let mut w = Welford::default();
            let mut skipped = 0;
            for _ in 0..len {
                proposal.sample_into(&mut rng, &mut x);
                match f(&x) {
                    Some(v) => w.push(v),
                    None => skipped += 1,
                }
            }
            (w, skipped)
        })
        .collect();
    parts
        .into_iter()
        .fold((Welford::default(), 0), |(a, s), (b, t)| (a.merge(b), s + t))
}

fn finish(w: Welford, offset: f64, skipped: usize) -> EstimateWithCI {
    let estimate = w.mean + offset;
    let stderr = w.stderr();
    EstimateWithCI {
        estimate,
        stderr,
        n: w.n,
        multiplier: DEFAULT_MULTIPLIER,
        unreliable: !stderr.is_finite() || stderr > estimate.abs(),
        skipped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Proposal {
    /// Draw from the left argument and average `P2 / phi`.
    Left,
    /// Draw from `N(0, I_d)` and average `(P1 / phi)(P2 / phi)`.
    Reference,
}

/// `chi_N(P1, P2) = E_N[(P1/phi)(P2/phi)] - 1` by importance sampling.
pub fn pairwise_correlation<P, Q>(
    p1: &P,
    p2: &Q,
    n: usize,
    seed: u64,
    proposal: Proposal,
) -> Result<EstimateWithCI>
where
    P: LikelihoodRatio + ?Sized,
    Q: LikelihoodRatio + ?Sized,
{
    if p1.dim() != p2.dim() {
        return Err(Error::shape(p1.dim(), p2.dim()));
    }
    if n < 2 {
        return Err(Error::param("need at least two samples"));
    }
    let (w, skipped) = match proposal {
        Proposal::Left => mc_mean(p1, n, seed, |x| Some(p2.ln_likelihood_ratio(x).exp())),
        Proposal::Reference => {
            let reference = crate::density::StandardGaussian::new(p1.dim());
            mc_mean(&reference, n, seed, |x| {
                Some((p1.ln_likelihood_ratio(x) + p2.ln_likelihood_ratio(x)).exp())
            })
        }
    };
    Ok(finish(w, -1.0, skipped))
}

/// Tensor Gauss–Hermite evaluation of the correlation, for `d <= 3`.
pub fn pairwise_correlation_quadrature<P, Q>(p1: &P, p2: &Q, nodes: usize) -> Result<f64>
where
    P: LikelihoodRatio + ?Sized,
    Q: LikelihoodRatio + ?Sized,
{
    let d = p1.dim();
    if d != p2.dim() {
        return Err(Error::shape(d, p2.dim()));
    }
    if d > 3 {
        return Err(Error::param(format!("quadrature mode needs d <= 3, got {d}")));
    }
    let (pts, ws) = crate::quadrature::tensor_gauss_hermite(nodes, d, usize::MAX)
        .ok_or_else(|| Error::param("quadrature grid too large"))?;
    let s: f64 = pts
        .iter()
        .zip(&ws)
        .map(|(x, w)| w * (p1.ln_likelihood_ratio(x) + p2.ln_likelihood_ratio(x)).exp())
        .sum();
    Ok(s - 1.0)
}

/// Orthonormal basis (rows) of the span of the rows of `a` and `b`.
fn joint_row_basis(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.ncols();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    for src in [a, b] {
        for i in 0..src.nrows() {
            let mut v = src.row(i).transpose();
            for _ in 0..2 {
                for r in &rows {
                    let c = r.dot(&v);
                    v.axpy(-c, r, 1.0);
                }
            }
            let n = v.norm();
            if n > 1e-10 {
                rows.push(v / n);
            }
        }
    }
    DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j])
}

/// Exact correlation of two plantings against `N(0, I_d)`.
///
/// Outside the joint span of the two frames both densities are standard
/// normal, so the integral reduces to that span, where each Gaussian pair
/// contributes `|S1|^{-1/2} |S2|^{-1/2} |P|^{-1/2} exp((h'P^{-1}h - a'S1^{-1}a
/// - b'S2^{-1}b)/2)` with `P = S1^{-1} + S2^{-1} - I`, `h = S1^{-1}a + S2^{-1}b`.
pub fn pairwise_correlation_exact(p1: &PlantedInstance, p2: &PlantedInstance) -> Result<f64> {
    let d = p1.dim();
    if p2.dim() != d {
        return Err(Error::shape(d, p2.dim()));
    }
    let q = joint_row_basis(p1.frame(), p2.frame());
    let r = q.nrows();
    let local = |p: &PlantedInstance| -> Result<(DMatrix<f64>, f64, Vec<DVector<f64>>)> {
        let w = p.frame() * q.transpose();
        let cov = DMatrix::identity(r, r) - w.transpose() * &w * (1.0 - p.delta());
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Divergence("local covariance is not positive definite".into()))?;
        let ln_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let prec = chol.inverse();
        let means = p
            .means()
            .iter()
            .map(|mu| &q * DVector::from_column_slice(mu))
            .collect();
        Ok((prec, ln_det, means))
    };
    let (s1i, ld1, a1) = local(p1)?;
    let (s2i, ld2, a2) = local(p2)?;
    let big_p = &s1i + &s2i - DMatrix::identity(r, r);
    let chol = big_p
        .cholesky()
        .ok_or_else(|| Error::Divergence("correlation integral diverges".into()))?;
    let ldp = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let base = -0.5 * (ld1 + ld2 + ldp);
    let pre1: Vec<(DVector<f64>, f64)> = a1
        .iter()
        .map(|a| {
            let sa = &s1i * a;
            let q = a.dot(&sa);
            (sa, q)
        })
        .collect();
    let pre2: Vec<(DVector<f64>, f64)> = a2
        .iter()
        .map(|b| {
            let sb = &s2i * b;
            let q = b.dot(&sb);
            (sb, q)
        })
        .collect();
    let mut terms = Vec::with_capacity(a1.len() * a2.len());
    for ((sa, qa), wa) in pre1.iter().zip(p1.weights()) {
        for ((sb, qb), wb) in pre2.iter().zip(p2.weights()) {
            let h = sa + sb;
            let ph = chol.solve(&h);
            terms.push(wa.ln() + wb.ln() + base + 0.5 * (h.dot(&ph) - qa - qb));
        }
    }
    Ok(log_sum_exp(terms.iter().copied()).exp_m1())
}

/// `|U V'|_op^{t+1} chi^2(A, N(0, I_m))`.
pub fn correlation_bound(
    a: &SmoothedMixture,
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    t: usize,
) -> Result<f64> {
    if u.shape() != v.shape() || u.nrows() != a.dim() {
        return Err(Error::shape(
            format!("two {}x{} frames", a.dim(), u.ncols()),
            format!("{:?} and {:?}", u.shape(), v.shape()),
        ));
    }
    let nu = operator_norm(&(u * v.transpose()), OpNormMethod::Svd);
    Ok(nu.powi(t as i32 + 1) * a.chi2_vs_standard()?)
}

/// `d_TV(P, Q) = 1 - E_P[min(1, Q/P)]`, sampling from `P`.
pub fn tv_montecarlo<P, Q>(p: &P, q: &Q, n: usize, seed: u64) -> Result<EstimateWithCI>
where
    P: Density + ?Sized,
    Q: Density + ?Sized,
{
    if p.dim() != q.dim() {
        return Err(Error::shape(p.dim(), q.dim()));
    }
    if n < 2 {
        return Err(Error::param("need at least two samples"));
    }
    let (w, skipped) = mc_mean(p, n, seed, |x| {
        let lp = p.ln_pdf(x);
        if lp == f64::NEG_INFINITY || lp.is_nan() {
            return None;
        }
        Some((q.ln_pdf(x) - lp).min(0.0).exp())
    });
    let mut est = finish(Welford { mean: -w.mean, ..w }, 1.0, skipped);
    est.unreliable |= skipped * 100 > n;
    Ok(est)
}

/// `d_TV(N(mu, I), N(0, I)) = 1 - erfc(|mu| / (2 sqrt 2))`.
pub fn tv_gaussian_identity_cov(mu_norm: f64) -> f64 {
    libm::erf(mu_norm / (2.0 * std::f64::consts::SQRT_2))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationReport {
    pub min_distance: f64,
    pub target: f64,
    pub pass: bool,
}

pub fn separation_check(p: &PlantedInstance, target: f64) -> Result<SeparationReport> {
    if p.means().len() < 2 {
        return Err(Error::param("separation needs at least two components"));
    }
    let min_distance = p.min_mean_separation();
    Ok(SeparationReport {
        min_distance,
        target,
        pass: min_distance >= target,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeterminantReport {
    /// `|det(U R')|` with `R` completing `V` inside the joint span.
    pub abs_det: f64,
    /// Rank of `U` projected off the row space of `V`.
    pub projected_rank: usize,
    pub warning: Option<String>,
    pub meets_half: bool,
}

/// Orthonormal completion `R` of `V` within `span(U) + span(V)`: the rows of
/// `U` projected off `V` and orthonormalized, topped up with directions
/// orthogonal to both when that projection is rank deficient.
pub fn completion_basis(u: &DMatrix<f64>, v: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (m, d) = u.shape();
    let vrows: Vec<DVector<f64>> = (0..v.nrows()).map(|i| v.row(i).transpose()).collect();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m);
    let push = |cand: DVector<f64>, basis: &mut Vec<DVector<f64>>, extra: &[DVector<f64>]| {
        let mut w = cand;
        for _ in 0..2 {
            for r in vrows.iter().chain(basis.iter()).chain(extra) {
                let c = r.dot(&w);
                w.axpy(-c, r, 1.0);
            }
        }
        let n = w.norm();
        if n > 1e-8 && basis.len() < m {
            basis.push(w / n);
            true
        } else {
            false
        }
    };
    for i in 0..m {
        push(u.row(i).transpose(), &mut basis, &[]);
    }
    let rank = basis.len();
    let urows: Vec<DVector<f64>> = (0..m).map(|i| u.row(i).transpose()).collect();
    let mut j = 0;
    while basis.len() < m && j < d {
        let mut e = DVector::zeros(d);
        e[j] = 1.0;
        push(e, &mut basis, &urows);
        j += 1;
    }
    let r = DMatrix::from_fn(basis.len(), d, |i, k| basis[i][k]);
    (r, rank)
}

pub fn determinant_check(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DeterminantReport> {
    if u.shape() != v.shape() {
        return Err(Error::shape(format!("{:?}", u.shape()), format!("{:?}", v.shape())));
    }
    let (m, d) = u.shape();
    if d < 2 * m {
        return Err(Error::param(format!("need d >= 2m, got m = {m}, d = {d}")));
    }
    for (name, f) in [("U", u), ("V", v)] {
        let r = orthonormality_residual(f);
        if r > 1e-10 {
            return Err(Error::Validation(format!(
                "{name} is not row-orthonormal (residual {r:.3e})"
            )));
        }
    }
    let (r, rank) = completion_basis(u, v);
    let abs_det = if r.nrows() == m {
        (u * r.transpose()).determinant().abs()
    } else {
        0.0
    };
    let warning = (rank < m).then(|| {
        format!("joint span has dimension {} < 2m = {}; completed with orthogonal directions", m + rank, 2 * m)
    });
    Ok(DeterminantReport {
        abs_det,
        projected_rank: rank,
        warning,
        meets_half: abs_det >= 0.5,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    #[serde(deserialize_with = "crate::json::f64_or_nan")]
    pub value: f64,
    pub stderr: Option<f64>,
    #[serde(deserialize_with = "crate::json::f64_or_nan")]
    pub threshold: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(check: &str, value: f64, threshold: f64, pass: bool) -> Self {
        CheckRecord {
            check: check.into(),
            value,
            stderr: None,
            threshold,
            pass,
        }
    }

    pub fn with_stderr(mut self, se: f64) -> Self {
        self.stderr = Some(se);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VerificationReport {
    pub records: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn push(&mut self, r: CheckRecord) {
        self.records.push(r);
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "check,value,stderr,threshold,pass")?;
        for r in &self.records {
            let se = r.stderr.map(crate::json::fmt_f64).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{}",
                r.check,
                crate::json::fmt_f64(r.value),
                se,
                crate::json::fmt_f64(r.threshold),
                r.pass
            )?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let width = self.records.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
        s.push_str(&format!(
            "{:<width$}  {:>14}  {:>10}  {:>14}  result\n",
            "check", "value", "stderr", "threshold"
        ));
        for r in &self.records {
            let se = r.stderr.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
            s.push_str(&format!(
                "{:<width$}  {:>14.6e}  {:>10}  {:>14.6e}  {}\n",
                r.check,
                r.value,
                se,
                r.threshold,
                if r.pass { "PASS" } else { "FAIL" }
            ));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub tv_samples: usize,
    pub pdf_points: usize,
    pub seed: u64,
    pub tv_threshold: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tv_samples: 20_000,
            pdf_points: 1_000,
            seed: 0,
            tv_threshold: 0.9,
        }
    }
}

/// Structural checks on the raw file, then (if those pass) the metric
/// checks on the loaded instance.
pub fn verify_instance(file: &InstanceFile, opts: &VerifyOptions) -> VerificationReport {
    let mut rep = VerificationReport::default();
    let g = &file.gmm;
    let k = g.weights.len();

    let total: f64 = g.weights.iter().sum();
    rep.push(CheckRecord::new(
        "weights_normalized",
        (total - 1.0).abs(),
        1e-12,
        (total - 1.0).abs() <= 1e-12,
    ));
    let min_w = g.weights.iter().copied().fold(f64::INFINITY, f64::min);
    rep.push(CheckRecord::new("weights_positive", min_w, 0.0, min_w > 0.0));
    let floor = 0.99 / k.max(1) as f64;
    rep.push(CheckRecord::new("min_weight_floor", min_w, floor, min_w >= floor));
    let shapes_ok = g.means.len() == k
        && g.means.iter().all(|m| m.len() == g.d)
        && g.cov_factor.v.iter().all(|r| r.len() == g.d)
        && !g.cov_factor.v.is_empty();
    rep.push(CheckRecord::new("shapes_consistent", shapes_ok as u8 as f64, 1.0, shapes_ok));
    let delta = g.cov_factor.delta;
    rep.push(CheckRecord::new(
        "delta_in_unit_interval",
        delta,
        1.0,
        delta > 0.0 && delta < 1.0,
    ));
    let key_ok = file.answer_key.v == g.cov_factor.v;
    rep.push(CheckRecord::new("answer_key_matches_frame", key_ok as u8 as f64, 1.0, key_ok));
    if !shapes_ok {
        return rep;
    }
    let m = g.cov_factor.v.len();
    let v = DMatrix::from_fn(m, g.d, |i, j| g.cov_factor.v[i][j]);
    let resid = orthonormality_residual(&v);
    rep.push(CheckRecord::new("frame_orthonormal", resid, 1e-10, resid <= 1e-10));
    if !rep.passed() {
        return rep;
    }

    let inst = match PlantedInstance::from_file(file.clone()) {
        Ok(i) => i,
        Err(e) => {
            rep.push(CheckRecord::new(&format!("load_instance ({e})"), 0.0, 1.0, false));
            return rep;
        }
    };
    instance_checks(&inst, opts, &mut rep);
    rep
}

fn instance_checks(inst: &PlantedInstance, opts: &VerifyOptions, rep: &mut VerificationReport) {
    let d = inst.dim();
    let m = inst.m();
    let cov = inst.covariance();
    let eig = cov.symmetric_eigenvalues();
    let max_eig = eig.max();
    rep.push(CheckRecord::new("covariance_dominance", max_eig, 1.0 + 1e-12, max_eig <= 1.0 + 1e-12));
    let min_eig = eig.min();
    rep.push(CheckRecord::new("covariance_positive", min_eig, 0.0, min_eig > 0.0));

    if let Some(spec) = inst.spec() {
        let a = inst.mixture();
        match a.hermite_moments(spec.t) {
            Ok(tab) => {
                let dev = tab.max_abs_nonconstant(spec.t);
                rep.push(CheckRecord::new("moment_nulling_subspace", dev, 1e-9, dev <= 1e-9));
            }
            Err(e) => rep.push(CheckRecord::new(&format!("moment_nulling_subspace ({e})"), f64::NAN, 1e-9, false)),
        }
        if crate::hermite::basis_count(d, spec.t) <= 5_000 {
            if let Ok(tab) = inst.hermite_moments(spec.t) {
                let dev = tab.max_abs_nonconstant(spec.t);
                rep.push(CheckRecord::new("moment_nulling_ambient", dev, 1e-9, dev <= 1e-9));
            }
        }
        if inst.means().len() >= 2 {
            let sep = inst.min_mean_separation();
            let target = spec.separation_target();
            rep.push(CheckRecord::new("mean_separation", sep, target, sep >= target));
        }
    }

    let a = inst.mixture();
    match a.chi2_vs_standard() {
        Ok(chi2) => {
            rep.push(CheckRecord::new("chi2_finite", chi2, f64::INFINITY, chi2.is_finite()));
            let band = 1.1 * (m as f64).sqrt();
            if a.max_mean_norm() <= band {
                let bound = chi2_bound(m, a.delta());
                rep.push(CheckRecord::new("chi2_bound", chi2, bound, chi2 <= bound));
            }
        }
        Err(e) => rep.push(CheckRecord::new(&format!("chi2_finite ({e})"), f64::NAN, f64::INFINITY, false)),
    }

    if d <= crate::planting::DOUBLE_EVAL_MAX_DIM {
        let pts = crate::density::StandardGaussian::new(d).sample(opts.pdf_points / 2, derive_seed(opts.seed, 11));
        let own = inst.sample(opts.pdf_points - opts.pdf_points / 2, derive_seed(opts.seed, 12));
        let worst = pts
            .iter()
            .chain(&own)
            .map(|x| {
                let f = inst.ln_pdf_factorized(x);
                let g = inst.ln_pdf_gmm(x);
                (f - g).abs() / f.abs().max(1.0)
            })
            .fold(0.0, f64::max);
        rep.push(CheckRecord::new("pdf_double_evaluation", worst, 1e-9, worst <= 1e-9));
    }

    let reference = crate::density::StandardGaussian::new(d);
    if let Ok(tv) = tv_montecarlo(inst, &reference, opts.tv_samples, derive_seed(opts.seed, 13)) {
        rep.push(
            CheckRecord::new("tv_vs_standard_normal", tv.estimate, opts.tv_threshold, tv.estimate >= opts.tv_threshold)
                .with_stderr(tv.stderr),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{IsotropicGaussian, StandardGaussian};
    use crate::moments::build_explicit_3moment;
    use crate::packing::random_frame;
    use crate::planting::plant;
    use crate::smoothing::smooth;

    fn instance(m: usize, d: usize, delta: f64, seed: u64) -> PlantedInstance {
        let a = smooth(&build_explicit_3moment(m).unwrap(), delta).unwrap();
        let v = random_frame(m, d, &mut rng_from_seed(seed));
        plant(&a, &v).unwrap()
    }

    #[test]
    fn correlation_of_standard_normal_is_zero() {
        let g = StandardGaussian::new(3);
        let e = pairwise_correlation(&g, &g, 1000, 1, Proposal::Left).unwrap();
        assert_eq!(e.estimate, 0.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn self_correlation_is_chi2() {
        let p = instance(1, 3, 0.5, 2);
        let chi2 = p.mixture().chi2_vs_standard().unwrap();
        let exact = pairwise_correlation_exact(&p, &p).unwrap();
        assert!((exact - chi2).abs() < 1e-12 * chi2.max(1.0), "{exact} vs {chi2}");
        let q = pairwise_correlation_quadrature(&p, &p, 60).unwrap();
        assert!((q - chi2).abs() < 1e-8, "{q} vs {chi2}");
        let mc = pairwise_correlation(&p, &p, 100_000, 3, Proposal::Left).unwrap();
        assert!((mc.estimate - chi2).abs() < 4.0 * mc.stderr, "{mc} vs {chi2}");
    }

    #[test]
    fn orthogonal_frames_uncorrelated() {
        let a = smooth(&build_explicit_3moment(1).unwrap(), 0.5).unwrap();
        let u = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let v = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]);
        let (p1, p2) = (plant(&a, &u).unwrap(), plant(&a, &v).unwrap());
        assert!(pairwise_correlation_exact(&p1, &p2).unwrap().abs() < 1e-12);
        let mc = pairwise_correlation(&p1, &p2, 50_000, 4, Proposal::Left).unwrap();
        assert!(mc.contains(0.0), "{mc}");
        assert_eq!(correlation_bound(&a, &u, &v, 3).unwrap(), 0.0);
    }

    #[test]
    fn bound_examples() {
        let a = smooth(&build_explicit_3moment(1).unwrap(), 0.4).unwrap();
        let u = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let b = correlation_bound(&a, &u, &u, 3).unwrap();
        assert!((b - a.chi2_vs_standard().unwrap()).abs() < 1e-14);
        let s = 0.1f64;
        let v = DMatrix::from_row_slice(1, 2, &[s, (1.0 - s * s).sqrt()]);
        let b = correlation_bound(&a, &u, &v, 3).unwrap();
        assert!((b - 1e-4 * a.chi2_vs_standard().unwrap()).abs() < 1e-15);
    }

    #[test]
    fn exact_correlation_matches_mc_and_bound() {
        let a = smooth(&build_explicit_3moment(2).unwrap(), 0.5).unwrap();
        let mut rng = rng_from_seed(7);
        let u = random_frame(2, 6, &mut rng);
        let v = random_frame(2, 6, &mut rng);
        let (p1, p2) = (plant(&a, &u).unwrap(), plant(&a, &v).unwrap());
        let exact = pairwise_correlation_exact(&p1, &p2).unwrap();
        let mc = pairwise_correlation(&p1, &p2, 200_000, 5, Proposal::Left).unwrap();
        assert!((mc.estimate - exact).abs() < 4.0 * mc.stderr, "{mc} vs {exact}");
        let mc = pairwise_correlation(&p1, &p2, 200_000, 6, Proposal::Reference).unwrap();
        assert!((mc.estimate - exact).abs() < 4.0 * mc.stderr, "{mc} vs {exact}");
        assert!(exact <= correlation_bound(&a, &u, &v, 3).unwrap());
    }

    #[test]
    fn tv_closed_form() {
        assert_eq!(tv_gaussian_identity_cov(0.0), 0.0);
        let v = tv_gaussian_identity_cov(2.0);
        assert!((v - 0.682_689_492_137_086).abs() < 1e-12, "{v}");
        let mut prev = -1.0;
        for i in 0..100 {
            let t = tv_gaussian_identity_cov(i as f64 * 0.1);
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn tv_montecarlo_matches_closed_form() {
        let p = IsotropicGaussian { mean: vec![0.0], sigma: 1.0 };
        let q = IsotropicGaussian { mean: vec![2.0], sigma: 1.0 };
        let e = tv_montecarlo(&p, &q, 100_000, 3).unwrap();
        assert!((e.estimate - tv_gaussian_identity_cov(2.0)).abs() < 3.0 * e.stderr, "{e}");
        let same = tv_montecarlo(&p, &p, 1000, 3).unwrap();
        assert_eq!(same.estimate, 0.0);
        let half = tv_montecarlo(&p, &q, 50_000, 4).unwrap();
        let ratio = half.stderr / e.stderr;
        assert!((ratio - 2f64.sqrt()).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn determinant_examples() {
        let u = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let v = DMatrix::from_row_slice(2, 4, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let r = determinant_check(&u, &v).unwrap();
        assert!((r.abs_det - 1.0).abs() < 1e-12);
        let r = determinant_check(&u, &u).unwrap();
        assert!(r.abs_det.abs() < 1e-12);
        assert!(r.warning.is_some());
        assert!(determinant_check(&u, &DMatrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn determinant_is_symmetric_and_large_for_near_orthogonal() {
        let mut rng = rng_from_seed(12);
        for _ in 0..5 {
            let u = random_frame(2, 400, &mut rng);
            let v = random_frame(2, 400, &mut rng);
            let a = determinant_check(&u, &v).unwrap().abs_det;
            let b = determinant_check(&v, &u).unwrap().abs_det;
            assert!((a - b).abs() < 1e-6);
            assert!(a > 0.9);
        }
    }

    #[test]
    fn separation_examples() {
        let a = SmoothedMixture::new(1, vec![vec![0.5], vec![0.5]], 0.5, vec![0.5, 0.5]).unwrap();
        let p = plant(&a, &DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        let r = separation_check(&p, 0.1).unwrap();
        assert_eq!(r.min_distance, 0.0);
        assert!(!r.pass);
    }

    #[test]
    fn verify_flags_corrupted_weights() {
        let p = instance(2, 6, 0.3, 1);
        let mut f = p.to_file();
        let opts = VerifyOptions { tv_samples: 2000, pdf_points: 50, ..Default::default() };
        let rep = verify_instance(&f, &opts);
        assert!(rep.records.iter().all(|r| r.pass || r.check == "tv_vs_standard_normal"), "{}", rep.to_text());
        f.gmm.weights[0] += 0.01;
        let rep = verify_instance(&f, &opts);
        assert!(!rep.passed());
        assert_eq!(rep.failures().next().unwrap().check, "weights_normalized");
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("check,value,stderr,threshold,pass\n"));
    }
}
