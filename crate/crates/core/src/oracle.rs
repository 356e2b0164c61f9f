//! A simulated VSTAT oracle and the query-complexity arithmetic that turns
//! measured correlations into lower bounds.
//!
//! `VSTAT(u)` answers a query `q: R^d -> [0, 1]` with any value within
//! `tau = max(1/u, sqrt(Var[q]/u))` of `E[q]`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::density::{Density, StandardGaussian};
use crate::error::{Error, Result};
use crate::planting::{InstanceSpec, Mode};
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// Averages `ceil(u)` fresh samples. Not part of the oracle's
    /// definition (which is adversarial); an extrapolation for experiments.
    HonestSampling,
    Adversarial,
}

impl OracleMode {
    pub fn label(self) -> &'static str {
        match self {
            OracleMode::HonestSampling => "honest-sampling (extrapolation: the oracle is adversarial by definition)",
            OracleMode::Adversarial => "adversarial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryPolicy {
    /// Move toward the query's value under `N(0, I_d)`; ties go down.
    TowardNull,
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub u: f64,
    pub mode: OracleMode,
    pub seed: u64,
    pub policy: AdversaryPolicy,
    /// Samples used when a truth or null value must be estimated.
    pub estimation_samples: usize,
}

impl OracleConfig {
    pub fn new(u: f64, mode: OracleMode, seed: u64) -> Result<Self> {
        if !(u > 0.0 && u.is_finite()) {
            return Err(Error::param(format!("VSTAT parameter must be positive, got {u}")));
        }
        Ok(OracleConfig {
            u,
            mode,
            seed,
            policy: AdversaryPolicy::TowardNull,
            estimation_samples: 200_000,
        })
    }
}

/// Exact mean and variance of a query, when the caller can compute them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryTruth {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Known {
    pub truth: Option<QueryTruth>,
    pub null_value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub value: f64,
    pub tau: f64,
    pub truth: f64,
    /// Whether `truth` was supplied exactly or estimated by sampling.
    pub truth_exact: bool,
    /// The raw answer was moved to satisfy the contract or the unit range.
    pub clamped: bool,
}

pub fn vstat_tolerance(u: f64, variance: f64) -> f64 {
    (1.0 / u).max((variance.max(0.0) / u).sqrt())
}

/// One oracle over one distribution. Queries consume the oracle's random
/// stream, so they are answered in sequence.
pub struct VstatOracle<'a, D: Density + ?Sized> {
    dist: &'a D,
    config: OracleConfig,
    rng: Rng,
    queries: u64,
}

impl<'a, D: Density + ?Sized> VstatOracle<'a, D> {
    pub fn new(dist: &'a D, config: OracleConfig) -> Self {
        VstatOracle {
            dist,
            rng: rng_from_seed(config.seed),
            config,
            queries: 0,
        }
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn queries_answered(&self) -> u64 {
        self.queries
    }

    pub fn respond<Q>(&mut self, q: &Q, known: Known) -> Result<OracleResponse>
    where
        Q: Fn(&[f64]) -> f64 + ?Sized,
    {
        let d = self.dist.dim();
        let stream = derive_seed(self.config.seed, self.queries);
        self.queries += 1;
        let (truth, truth_exact) = match known.truth {
            Some(t) => (t, true),
            None => (
                estimate(self.dist, q, self.config.estimation_samples, derive_seed(stream, 1))?,
                false,
            ),
        };
        let tau = vstat_tolerance(self.config.u, truth.variance);
        let (raw, clamped_ball) = match self.config.mode {
            OracleMode::HonestSampling => {
                let n = self.config.u.ceil() as usize;
                let mut x = vec![0.0; d];
                let mut s = 0.0;
                for _ in 0..n {
                    self.dist.sample_into(&mut self.rng, &mut x);
                    s += checked(q, &x)?;
                }
                let mean = s / n as f64;
                if truth_exact {
                    let v = mean.clamp(truth.mean - tau, truth.mean + tau);
                    (v, v != mean)
                } else {
                    (mean, false)
                }
            }
            OracleMode::Adversarial => {
                let sign = match self.config.policy {
                    AdversaryPolicy::Low => -1.0,
                    AdversaryPolicy::High => 1.0,
                    AdversaryPolicy::TowardNull => {
                        let null = match known.null_value {
                            Some(v) => v,
                            None => {
                                let g = StandardGaussian::new(d);
                                estimate(&g, q, self.config.estimation_samples, derive_seed(stream, 2))?.mean
                            }
                        };
                        if null > truth.mean {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                };
                (truth.mean + sign * tau, false)
            }
        };
        let value = raw.clamp(0.0, 1.0);
        Ok(OracleResponse {
            value,
            tau,
            truth: truth.mean,
            truth_exact,
            clamped: clamped_ball || value != raw,
        })
    }
}

fn checked<Q: Fn(&[f64]) -> f64 + ?Sized>(q: &Q, x: &[f64]) -> Result<f64> {
    let v = q(x);
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Contract(format!("query returned {v} outside [0, 1]")));
    }
    Ok(v)
}

fn estimate<D, Q>(dist: &D, q: &Q, n: usize, seed: u64) -> Result<QueryTruth>
where
    D: Density + ?Sized,
    Q: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut rng = rng_from_seed(seed);
    let mut x = vec![0.0; dist.dim()];
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..n {
        dist.sample_into(&mut rng, &mut x);
        let v = checked(q, &x)?;
        let dlt = v - mean;
        mean += dlt / (i + 1) as f64;
        m2 += dlt * (v - mean);
    }
    Ok(QueryTruth {
        mean,
        variance: if n > 1 { m2 / (n - 1) as f64 } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub gamma: f64,
    pub gamma_prime: f64,
    pub beta: f64,
    pub s: f64,
    /// `1 / (3 (gamma + gamma'))`.
    pub vstat_parameter: f64,
    /// `s gamma' / (beta - gamma)`.
    pub query_count: f64,
    /// Asymptotic statements with the measured numbers substituted; never
    /// asserted.
    pub annotations: Vec<String>,
}

impl LowerBoundReport {
    pub fn to_text(&self) -> String {
        let mut rows = vec![
            ("gamma", fmt_num(self.gamma)),
            ("gamma'", fmt_num(self.gamma_prime)),
            ("beta", fmt_num(self.beta)),
            ("set size s", fmt_num(self.s)),
            ("VSTAT parameter 1/(3(gamma+gamma'))", fmt_num(self.vstat_parameter)),
            ("queries s*gamma'/(beta-gamma)", fmt_num(self.query_count)),
        ];
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows.drain(..) {
            out.push_str(&format!("{k:<width$}  {v}\n"));
        }
        for a in &self.annotations {
            out.push_str(&format!("note: {a}\n"));
        }
        out
    }
}

impl fmt::Display for LowerBoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn fmt_num(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e6 || v.abs() < 1e-3) {
        format!("{v:.6e}")
    } else {
        format!("{v:.6}")
    }
}

/// Any algorithm that learns the family needs either a query to
/// `VSTAT(1/(3(gamma + gamma')))` or `s gamma' / (beta - gamma)` queries.
pub fn sq_lb_arithmetic(gamma: f64, beta: f64, s: f64, gamma_prime: f64) -> Result<LowerBoundReport> {
    if !(gamma >= 0.0) {
        return Err(Error::param(format!("gamma must be nonnegative, got {gamma}")));
    }
    if !(beta > gamma) {
        return Err(Error::param(format!("need beta > gamma, got beta = {beta}, gamma = {gamma}")));
    }
    if !(gamma_prime > 0.0) {
        return Err(Error::param(format!("gamma' must be positive, got {gamma_prime}")));
    }
    if !(s >= 1.0) {
        return Err(Error::param(format!("set size must be at least 1, got {s}")));
    }
    Ok(LowerBoundReport {
        gamma,
        gamma_prime,
        beta,
        s,
        vstat_parameter: 1.0 / (3.0 * (gamma + gamma_prime)),
        query_count: s * gamma_prime / (beta - gamma),
        annotations: Vec::new(),
    })
}

/// Measured packing statistics fed into [`instance_lb_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackStats {
    /// Largest pairwise `|U V'|_op`.
    pub nu: f64,
    pub set_size: f64,
    /// Packing exponent `c`, when the batched construction was used.
    pub c: Option<f64>,
}

/// `gamma = nu^{t+1} chi^2`, `beta = chi^2`, `gamma' = gamma` (or `floor`
/// when `gamma` vanishes), with the headline rates as annotations.
pub fn instance_lb_report(
    spec: &InstanceSpec,
    pack: &PackStats,
    chi2: f64,
    gamma_floor: Option<f64>,
) -> Result<LowerBoundReport> {
    let gamma = pack.nu.powi(spec.t as i32 + 1) * chi2;
    let gamma_prime = if gamma > 0.0 {
        gamma
    } else {
        gamma_floor.ok_or_else(|| Error::param("gamma is zero; supply a positive floor for gamma'"))?
    };
    let mut rep = sq_lb_arithmetic(gamma, chi2, pack.set_size, gamma_prime)?;
    let d = spec.d as f64;
    rep.annotations.push(format!(
        "inputs: d = {}, k = {}, m = {}, t = {}, delta = {:.6e}, nu = {:.6}, chi2 = {:.6e}",
        spec.d, spec.k, spec.m, spec.t, spec.delta, pack.nu, chi2
    ));
    match spec.mode {
        Mode::GeneralEps => {
            let eps = spec.epsilon.unwrap_or(f64::NAN);
            rep.annotations.push(format!(
                "headline: VSTAT(d^(Omega(1/eps)) e^(-O(k^(2 eps)))) with d = {}, 1/eps = {:.4}, k^(2 eps) = {:.4}; measured parameter {:.6e}",
                spec.d,
                1.0 / eps,
                (spec.k as f64).powf(2.0 * eps),
                rep.vstat_parameter
            ));
        }
        Mode::SqrtK => {
            let c = pack.c.map(|c| format!("{c}")).unwrap_or_else(|| "n/a".into());
            let reference = pack.c.map(|c| format!(", d^(2-9c) = {:.6e}", d.powf(2.0 - 9.0 * c))).unwrap_or_default();
            rep.annotations.push(format!(
                "headline: VSTAT(Omega(d^(2-9c))) with d = {}, c = {c}{reference}; measured parameter {:.6e}",
                spec.d, rep.vstat_parameter
            ));
        }
    }
    rep.annotations.push(
        "VSTAT(u) is read as roughly u samples; this translation is a heuristic".into(),
    );
    Ok(rep)
}
