//! Empirical distinguishers and power curves.
//!
//! A degree-`r` moment test aggregates the empirical means of every
//! Hermite polynomial `h_a` with `1 <= |a| <= r`; against a planted
//! instance whose first `t` moments match the Gaussian it should fail for
//! `r <= t` and succeed once `r > t` and `n` is large. The known-frame
//! likelihood-ratio test is the informed ceiling.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::density::{Density, LikelihoodRatio, StandardGaussian};
use crate::error::{Error, Result};
use crate::hermite::{basis_count, HermiteBasis};
use crate::planting::{build_instance, derive_params, CoreChoice, InstanceSpec, Mode, PlantedInstance, Seeds};
use crate::rng::{derive_seed, rng_from_seed};

/// Aggregate of the empirical Hermite means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// `n * sum_a mean(h_a)^2`.
    SumOfSquares,
    /// `n * mean' S^{-1} mean` with the empirical feature covariance `S`.
    Studentized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Calibration {
    /// Chi-square quantile with `C(d+r, r) - 1` degrees of freedom.
    Asymptotic,
    /// Empirical quantile of `runs` statistics computed on Gaussian data.
    MonteCarlo { runs: usize },
    /// Monte Carlo when `runs * n * features` stays under `budget`,
    /// asymptotic otherwise.
    Auto { runs: usize, budget: f64 },
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration::Auto {
            runs: 2000,
            budget: 4e9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
}

/// Upper `1 - alpha` empirical quantile: rejecting above it has null rate at
/// most `alpha`.
fn upper_quantile(mut vals: Vec<f64>, alpha: f64) -> f64 {
    vals.sort_by(f64::total_cmp);
    let idx = (((1.0 - alpha) * vals.len() as f64).ceil() as usize).clamp(1, vals.len()) - 1;
    vals[idx]
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("significance must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// A calibrated degree-`r` moment test for `d`-dimensional data of size `n`.
#[derive(Debug, Clone)]
pub struct MomentTest {
    basis: Arc<HermiteBasis>,
    statistic: Statistic,
    n: usize,
    threshold: f64,
    calibration: String,
}

impl MomentTest {
    pub fn calibrate(
        d: usize,
        r: usize,
        statistic: Statistic,
        calibration: Calibration,
        n: usize,
        alpha: f64,
        seed: u64,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if r == 0 {
            return Err(Error::param("test degree must be at least 1"));
        }
        if n < 2 {
            return Err(Error::param("need at least two samples"));
        }
        let basis = Arc::new(HermiteBasis::new(d, r).map_err(|e| match e {
            Error::BasisCap { count, cap } => Error::param(format!(
                "{count} Hermite features for d = {d}, r = {r} exceed the cap of {cap}; use a smaller d or r"
            )),
            other => other,
        })?);
        let features = basis.len() - 1;
        let mut test = MomentTest {
            basis,
            statistic,
            n,
            threshold: f64::NAN,
            calibration: String::new(),
        };
        let resolved = match calibration {
            Calibration::Auto { runs, budget } => {
                if runs as f64 * n as f64 * features as f64 <= budget {
                    Calibration::MonteCarlo { runs }
                } else {
                    Calibration::Asymptotic
                }
            }
            c => c,
        };
        match resolved {
            Calibration::Asymptotic => {
                let chi = ChiSquared::new(features as f64)
                    .map_err(|e| Error::param(format!("chi-square quantile: {e}")))?;
                test.threshold = chi.inverse_cdf(1.0 - alpha);
                test.calibration = "asymptotic".into();
            }
            Calibration::MonteCarlo { runs } => {
                if runs == 0 {
                    return Err(Error::param("Monte-Carlo calibration needs at least one run"));
                }
                let null = StandardGaussian::new(d);
                let stats: Vec<f64> = (0..runs)
                    .into_par_iter()
                    .map(|i| test.statistic_sampled(&null, derive_seed(seed, i as u64)))
                    .collect();
                test.threshold = upper_quantile(stats, alpha);
                test.calibration = format!("monte-carlo ({runs} runs)");
            }
            Calibration::Auto { .. } => unreachable!("resolved above"),
        }
        Ok(test)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn degree(&self) -> usize {
        self.basis.max_degree()
    }

    pub fn features(&self) -> usize {
        self.basis.len() - 1
    }

    pub fn calibration(&self) -> &str {
        &self.calibration
    }

    fn finish(&self, n: usize, sums: &[f64], cross: Option<&DMatrix<f64>>) -> f64 {
        let nf = n as f64;
        let means: Vec<f64> = sums.iter().map(|s| s / nf).collect();
        match (self.statistic, cross) {
            (Statistic::Studentized, Some(c)) => {
                let mv = DVector::from_vec(means);
                let mut cov = c / nf - &mv * mv.transpose();
                cov.fill_lower_triangle_with_upper_triangle();
                match cov.clone().cholesky() {
                    Some(ch) => nf * mv.dot(&ch.solve(&mv)),
                    None => {
                        let pinv = cov.pseudo_inverse(1e-12).unwrap_or_else(|_| DMatrix::zeros(mv.len(), mv.len()));
                        nf * mv.dot(&(pinv * &mv))
                    }
                }
            }
            _ => nf * means.iter().map(|v| v * v).sum::<f64>(),
        }
    }

    /// Statistic of an explicit sample (of any size).
    pub fn statistic(&self, samples: &[Vec<f64>]) -> Result<f64> {
        let d = self.basis.dim();
        if samples.is_empty() {
            return Err(Error::param("no samples"));
        }
        if let Some(x) = samples.iter().find(|x| x.len() != d) {
            return Err(Error::shape(d, x.len()));
        }
        let mut acc = Accumulator::new(&self.basis, self.statistic);
        for x in samples {
            acc.push(x);
        }
        Ok(self.finish(samples.len(), &acc.sums, acc.cross.as_ref()))
    }

    /// Statistic of `n` fresh draws from `dist`, without storing them.
    pub fn statistic_sampled<D: Density + ?Sized>(&self, dist: &D, seed: u64) -> f64 {
        let mut rng = rng_from_seed(seed);
        let mut x = vec![0.0; dist.dim()];
        let mut acc = Accumulator::new(&self.basis, self.statistic);
        for _ in 0..self.n {
            dist.sample_into(&mut rng, &mut x);
            acc.push(&x);
        }
        self.finish(self.n, &acc.sums, acc.cross.as_ref())
    }

    pub fn test(&self, samples: &[Vec<f64>]) -> Result<TestOutcome> {
        let statistic = self.statistic(samples)?;
        Ok(TestOutcome {
            statistic,
            threshold: self.threshold,
            reject: statistic > self.threshold,
        })
    }

    pub fn rejects_sampled<D: Density + ?Sized>(&self, dist: &D, seed: u64) -> bool {
        self.statistic_sampled(dist, seed) > self.threshold
    }
}

struct Accumulator<'a> {
    basis: &'a HermiteBasis,
    scratch: Vec<f64>,
    feats: Vec<f64>,
    sums: Vec<f64>,
    cross: Option<DMatrix<f64>>,
}

impl<'a> Accumulator<'a> {
    fn new(basis: &'a HermiteBasis, statistic: Statistic) -> Self {
        let f = basis.len() - 1;
        Accumulator {
            basis,
            scratch: vec![0.0; basis.scratch_len()],
            feats: vec![0.0; basis.len()],
            sums: vec![0.0; f],
            cross: (statistic == Statistic::Studentized).then(|| DMatrix::zeros(f, f)),
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.basis.eval_into(x, &mut self.scratch, &mut self.feats);
        let f = &self.feats[1..];
        for (s, v) in self.sums.iter_mut().zip(f) {
            *s += v;
        }
        if let Some(c) = &mut self.cross {
            // upper triangle only; mirrored in `finish`
            let len = f.len();
            let data = c.as_mut_slice();
            for (j, &fj) in f.iter().enumerate() {
                let col = &mut data[j * len..j * len + j + 1];
                for i in 0..=j {
                    col[i] += f[i] * fj;
                }
            }
        }
    }
}

/// Calibrates at the sample size of `samples` and tests them.
pub fn moment_test(
    samples: &[Vec<f64>],
    r: usize,
    calibration: Calibration,
    alpha: f64,
    seed: u64,
) -> Result<TestOutcome> {
    let d = samples
        .first()
        .ok_or_else(|| Error::param("no samples"))?
        .len();
    MomentTest::calibrate(d, r, Statistic::SumOfSquares, calibration, samples.len(), alpha, seed)?.test(samples)
}

/// Known-frame likelihood-ratio test: mean `ln(P(x) / phi_d(x))` against a
/// threshold calibrated on Gaussian samples of the same size.
#[derive(Debug, Clone)]
pub struct LrtTest<'a> {
    instance: &'a PlantedInstance,
    n: usize,
    threshold: f64,
}

impl<'a> LrtTest<'a> {
    pub fn calibrate(instance: &'a PlantedInstance, n: usize, alpha: f64, runs: usize, seed: u64) -> Result<Self> {
        check_alpha(alpha)?;
        if n == 0 || runs == 0 {
            return Err(Error::param("need at least one sample and one calibration run"));
        }
        let mut test = LrtTest {
            instance,
            n,
            threshold: f64::NAN,
        };
        let null = StandardGaussian::new(instance.dim());
        let stats: Vec<f64> = (0..runs)
            .into_par_iter()
            .map(|i| test.statistic_sampled(&null, derive_seed(seed, i as u64)))
            .collect();
        test.threshold = upper_quantile(stats, alpha);
        Ok(test)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn statistic(&self, samples: &[Vec<f64>]) -> f64 {
        samples.iter().map(|x| self.instance.ln_likelihood_ratio(x)).sum::<f64>() / samples.len() as f64
    }

    pub fn statistic_sampled<D: Density + ?Sized>(&self, dist: &D, seed: u64) -> f64 {
        let mut rng = rng_from_seed(seed);
        let mut x = vec![0.0; dist.dim()];
        let mut s = 0.0;
        for _ in 0..self.n {
            dist.sample_into(&mut rng, &mut x);
            s += self.instance.ln_likelihood_ratio(&x);
        }
        s / self.n as f64
    }

    pub fn rejects_sampled<D: Density + ?Sized>(&self, dist: &D, seed: u64) -> bool {
        self.statistic_sampled(dist, seed) > self.threshold
    }

    pub fn test(&self, samples: &[Vec<f64>]) -> TestOutcome {
        let statistic = self.statistic(samples);
        TestOutcome {
            statistic,
            threshold: self.threshold,
            reject: statistic > self.threshold,
        }
    }
}

pub fn oracle_lrt(
    samples: &[Vec<f64>],
    instance: &PlantedInstance,
    alpha: f64,
    runs: usize,
    seed: u64,
) -> Result<TestOutcome> {
    Ok(LrtTest::calibrate(instance, samples.len(), alpha, runs, seed)?.test(samples))
}

/// Fraction of `trials` seeds for which `reject` fires, with its binomial
/// standard error.
pub fn rejection_rate<F>(trials: usize, seed: u64, reject: F) -> (f64, f64)
where
    F: Fn(u64) -> bool + Sync,
{
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&i| reject(derive_seed(seed, i as u64)))
        .count();
    let p = hits as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRef {
    pub mode: Mode,
    pub k: usize,
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub c_delta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceRef,
    pub dims: Vec<usize>,
    pub degrees: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    pub significance: f64,
    pub seed: u64,
    #[serde(default)]
    pub calibration: Calibration,
    #[serde(default = "default_statistic")]
    pub statistic: Statistic,
    #[serde(default = "default_true")]
    pub lrt: bool,
    #[serde(default = "default_lrt_runs")]
    pub lrt_calibration_runs: usize,
    /// Replace the alternative by the null (sanity run).
    #[serde(default)]
    pub null_only: bool,
}

fn default_statistic() -> Statistic {
    Statistic::SumOfSquares
}

fn default_true() -> bool {
    true
}

fn default_lrt_runs() -> usize {
    2000
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            instance: InstanceRef {
                mode: Mode::SqrtK,
                k: 8,
                epsilon: None,
                c_delta: 0.1,
                seed: 1,
            },
            dims: vec![6, 8],
            degrees: vec![2, 3, 4, 6],
            sample_sizes: vec![1_000, 10_000, 100_000],
            trials: 200,
            significance: 0.05,
            seed: 1,
            calibration: Calibration::default(),
            statistic: Statistic::SumOfSquares,
            lrt: true,
            lrt_calibration_runs: 2000,
            null_only: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        if self.dims.is_empty() || self.sample_sizes.is_empty() || (self.degrees.is_empty() && !self.lrt) {
            return Err(Error::param("the experiment grid is empty"));
        }
        check_alpha(self.significance)?;
        if self.degrees.contains(&0) {
            return Err(Error::param("test degrees must be at least 1"));
        }
        if self.sample_sizes.iter().any(|&n| n < 2) {
            return Err(Error::param("sample sizes must be at least 2"));
        }
        Ok(())
    }

    pub fn instance_spec(&self, d: usize) -> Result<InstanceSpec> {
        let r = &self.instance;
        derive_params(r.mode, r.k, r.epsilon, r.c_delta, d, Seeds::from_master(r.seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    /// `moment` or `lrt`.
    pub test: String,
    pub d: usize,
    pub n: usize,
    pub r: Option<usize>,
    pub calibration: String,
    pub threshold: f64,
    pub null_rate: f64,
    pub alt_rate: f64,
    pub advantage: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub significance: f64,
    pub trials: usize,
    pub matched_degree: usize,
    /// Largest exact `|E_P[h_a]|` over `1 <= |a| <= t`, per dimension.
    pub exact_moment_deviation: Vec<(usize, f64)>,
    pub rows: Vec<PowerRow>,
    pub notes: Vec<String>,
}

enum CellKind {
    Moment(usize),
    Lrt,
}

/// Runs every `(d, n, test)` cell; each cell draws its seed from the master
/// seed and its index, so results do not depend on scheduling.
pub fn power_curve(config: &ExperimentConfig) -> Result<PowerCurve> {
    config.validate()?;
    let mut instances = Vec::new();
    let mut deviations = Vec::new();
    let mut matched = 0;
    for &d in &config.dims {
        let spec = config.instance_spec(d)?;
        matched = spec.t;
        let built = build_instance(&spec, &CoreChoice::for_mode(spec.mode))?;
        let inst = built.instance;
        let mut dev = inst.mixture().hermite_moments(spec.t)?.max_abs_nonconstant(spec.t);
        if basis_count(d, spec.t) <= 5_000 {
            dev = dev.max(inst.hermite_moments(spec.t)?.max_abs_nonconstant(spec.t));
        }
        if dev > 1e-9 {
            return Err(Error::Validation(format!(
                "exact moments of degree <= {} do not vanish at d = {d} (max |E h_a| = {dev:.3e})",
                spec.t
            )));
        }
        deviations.push((d, dev));
        instances.push(inst);
    }
    for &r in &config.degrees {
        for &d in &config.dims {
            let count = basis_count(d, r);
            if count > crate::hermite::DEFAULT_BASIS_CAP as u128 {
                return Err(Error::param(format!(
                    "{count} Hermite features for d = {d}, r = {r} exceed the cap; use a smaller d or r"
                )));
            }
        }
    }

    let mut cells = Vec::new();
    for (di, &d) in config.dims.iter().enumerate() {
        for &n in &config.sample_sizes {
            for &r in &config.degrees {
                cells.push((di, d, n, CellKind::Moment(r)));
            }
            if config.lrt {
                cells.push((di, d, n, CellKind::Lrt));
            }
        }
    }

    let rows: Vec<Result<PowerRow>> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, (di, d, n, kind))| {
            let cell_seed = derive_seed(config.seed, idx as u64);
            let inst = &instances[*di];
            let null = StandardGaussian::new(*d);
            let alt: &dyn Density = if config.null_only { &null } else { inst };
            let trials = config.trials;
            let (test, r, calibration, threshold, (p0, _), (p1, _)) = match kind {
                CellKind::Moment(r) => {
                    let t = MomentTest::calibrate(
                        *d,
                        *r,
                        config.statistic,
                        config.calibration,
                        *n,
                        config.significance,
                        derive_seed(cell_seed, 0),
                    )?;
                    let p0 = rejection_rate(trials, derive_seed(cell_seed, 1), |s| t.rejects_sampled(&null, s));
                    let p1 = rejection_rate(trials, derive_seed(cell_seed, 2), |s| t.rejects_sampled(alt, s));
                    let name = match config.statistic {
                        Statistic::SumOfSquares => "moment",
                        Statistic::Studentized => "moment-studentized",
                    };
                    (name.to_string(), Some(*r), t.calibration().to_string(), t.threshold(), p0, p1)
                }
                CellKind::Lrt => {
                    let t = LrtTest::calibrate(
                        inst,
                        *n,
                        config.significance,
                        config.lrt_calibration_runs,
                        derive_seed(cell_seed, 0),
                    )?;
                    let p0 = rejection_rate(trials, derive_seed(cell_seed, 1), |s| t.rejects_sampled(&null, s));
                    let p1 = rejection_rate(trials, derive_seed(cell_seed, 2), |s| t.rejects_sampled(alt, s));
                    (
                        "lrt".to_string(),
                        None,
                        format!("monte-carlo ({} runs)", config.lrt_calibration_runs),
                        t.threshold(),
                        p0,
                        p1,
                    )
                }
            };
            let tf = trials as f64;
            Ok(PowerRow {
                test,
                d: *d,
                n: *n,
                r,
                calibration,
                threshold,
                null_rate: p0,
                alt_rate: p1,
                advantage: p1 - p0,
                stderr: (p0 * (1.0 - p0) / tf + p1 * (1.0 - p1) / tf).sqrt(),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut notes = vec![
        "sample sizes stand in for VSTAT parameters via VSTAT(u) ~ u samples; this translation is heuristic".to_string(),
    ];
    if config.null_only {
        notes.push("null-only run: the alternative is replaced by N(0, I_d)".into());
    }
    Ok(PowerCurve {
        significance: config.significance,
        trials: config.trials,
        matched_degree: matched,
        exact_moment_deviation: deviations,
        rows,
        notes,
    })
}

impl PowerCurve {
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "test,d,n,r,calibration,threshold,null_rate,alt_rate,advantage,stderr")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.test,
                r.d,
                r.n,
                r.r.map(|v| v.to_string()).unwrap_or_default(),
                r.calibration,
                crate::json::fmt_f64(r.threshold),
                crate::json::fmt_f64(r.null_rate),
                crate::json::fmt_f64(r.alt_rate),
                crate::json::fmt_f64(r.advantage),
                crate::json::fmt_f64(r.stderr)
            )?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "significance {}, {} trials per cell, matched degree t = {}\n",
            self.significance, self.trials, self.matched_degree
        );
        s.push_str(&format!(
            "{:<18} {:>4} {:>8} {:>3} {:>9} {:>9} {:>10} {:>8}\n",
            "test", "d", "n", "r", "null", "alt", "advantage", "stderr"
        ));
        for r in &self.rows {
            s.push_str(&format!(
                "{:<18} {:>4} {:>8} {:>3} {:>9.4} {:>9.4} {:>10.4} {:>8.4}\n",
                r.test,
                r.d,
                r.n,
                r.r.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                r.null_rate,
                r.alt_rate,
                r.advantage,
                r.stderr
            ));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    }

    /// Rejection rate under the alternative against `log10 n`, one curve
    /// per `(test, r, d)`.
    pub fn to_svg(&self) -> String {
        const W: f64 = 720.0;
        const H: f64 = 440.0;
        const L: f64 = 70.0;
        const R: f64 = 190.0;
        const T: f64 = 40.0;
        const B: f64 = 60.0;
        const COLORS: [&str; 8] = [
            "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
        ];
        let lx: Vec<f64> = self.rows.iter().map(|r| (r.n as f64).log10()).collect();
        let (mut x0, mut x1) = lx
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !x0.is_finite() {
            x0 = 0.0;
            x1 = 1.0;
        }
        if x1 - x0 < 1e-9 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        let px = |v: f64| L + (v - x0) / (x1 - x0) * (W - L - R);
        let py = |v: f64| T + (1.0 - v) * (H - T - B);

        let mut keys: Vec<(String, Option<usize>, usize)> = Vec::new();
        for r in &self.rows {
            let k = (r.test.clone(), r.r, r.d);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">Rejection rate under the alternative</text>"#,
            (L + W - R) / 2.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{L}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{L}" y1="{T}" x2="{L}" y2="{}" stroke="black"/>"#,
            H - B,
            W - R,
            H - B,
            H - B
        );
        for i in 0..=4 {
            let v = i as f64 / 4.0;
            let _ = writeln!(
                s,
                r##"<line x1="{L}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/><text x="{}" y="{}" text-anchor="end">{v:.2}</text>"##,
                W - R,
                L - 6.0,
                py(v) + 4.0,
                y = py(v)
            );
        }
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        for n in ns {
            let x = px((n as f64).log10());
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{n}</text>"#,
                H - B,
                H - B + 5.0,
                H - B + 20.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">samples n (log scale)</text>"#,
            (L + W - R) / 2.0,
            H - 15.0
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">rejection rate</text>"#,
            (T + H - B) / 2.0,
            (T + H - B) / 2.0
        );
        let ya = py(self.significance);
        let _ = writeln!(
            s,
            r##"<line x1="{L}" y1="{ya}" x2="{}" y2="{ya}" stroke="#888888" stroke-dasharray="5,4"/>"##,
            W - R
        );
        for (ki, (test, r, d)) in keys.iter().enumerate() {
            let color = COLORS[ki % COLORS.len()];
            let mut pts: Vec<(f64, f64)> = self
                .rows
                .iter()
                .filter(|row| &row.test == test && row.r == *r && row.d == *d)
                .map(|row| (px((row.n as f64).log10()), py(row.alt_rate)))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                path.join(" ")
            );
            for (x, y) in &pts {
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
            }
            let label = match r {
                Some(r) => format!("{test} r={r}, d={d}"),
                None => format!("{test}, d={d}"),
            };
            let ly = T + 10.0 + 18.0 * ki as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{label}</text>"#,
                W - R + 12.0,
                W - R + 32.0,
                W - R + 38.0,
                ly + 4.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_instance(d: usize) -> PlantedInstance {
        let spec = derive_params(Mode::SqrtK, 4, None, 0.1, d, Seeds::from_master(3)).unwrap();
        build_instance(&spec, &CoreChoice::Explicit).unwrap().instance
    }

    #[test]
    fn statistic_matches_direct_sum() {
        let xs = StandardGaussian::new(2).sample(50, 4);
        let t = MomentTest::calibrate(2, 2, Statistic::SumOfSquares, Calibration::Asymptotic, 50, 0.05, 1).unwrap();
        let basis = HermiteBasis::new(2, 2).unwrap();
        let mut want = 0.0;
        for pos in 1..basis.len() {
            let a = &basis.indices()[pos];
            let m: f64 = xs.iter().map(|x| crate::hermite::hermite_multi(a, x).unwrap()).sum::<f64>() / 50.0;
            want += m * m;
        }
        want *= 50.0;
        assert!((t.statistic(&xs).unwrap() - want).abs() < 1e-10 * want.max(1.0));
    }

    #[test]
    fn asymptotic_threshold() {
        let t = MomentTest::calibrate(1, 1, Statistic::SumOfSquares, Calibration::Asymptotic, 10, 0.05, 1).unwrap();
        assert!((t.threshold() - 3.841_458_820_694_124).abs() < 1e-9);
        assert_eq!(t.features(), 1);
    }

    #[test]
    fn null_calibration_sanity() {
        let d = 3;
        let n = 500;
        let null = StandardGaussian::new(d);
        for cal in [Calibration::Asymptotic, Calibration::MonteCarlo { runs: 400 }] {
            let t = MomentTest::calibrate(d, 2, Statistic::SumOfSquares, cal, n, 0.05, 9).unwrap();
            let (p, se) = rejection_rate(400, 77, |s| t.rejects_sampled(&null, s));
            assert!((p - 0.05).abs() < 4.0 * se.max(0.011), "{cal:?}: {p}");
        }
    }

    #[test]
    fn studentized_statistic_is_hotelling() {
        let xs = StandardGaussian::new(1).sample(200, 8);
        let t = MomentTest::calibrate(1, 1, Statistic::Studentized, Calibration::Asymptotic, 200, 0.05, 1).unwrap();
        let n = 200.0;
        let mean = xs.iter().map(|x| x[0]).sum::<f64>() / n;
        let var = xs.iter().map(|x| x[0] * x[0]).sum::<f64>() / n - mean * mean;
        let want = n * mean * mean / var;
        assert!((t.statistic(&xs).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn moment_test_detects_unmatched_degree() {
        let inst = small_instance(4);
        let xs = inst.sample(20_000, 3);
        let out = moment_test(&xs, 4, Calibration::Asymptotic, 0.05, 1).unwrap();
        assert!(out.reject, "{out:?}");
        let nxs = StandardGaussian::new(4).sample(2000, 3);
        let out = moment_test(&nxs, 1, Calibration::Asymptotic, 0.05, 1).unwrap();
        assert!(out.statistic >= 0.0);
    }

    #[test]
    fn lrt_separates() {
        let inst = small_instance(5);
        let t = LrtTest::calibrate(&inst, 100, 0.05, 500, 2).unwrap();
        let (p1, _) = rejection_rate(100, 3, |s| t.rejects_sampled(&inst, s));
        assert!(p1 > 0.95, "{p1}");
        let xs = inst.sample(100, 11);
        let o = oracle_lrt(&xs, &inst, 0.05, 500, 2).unwrap();
        assert!(o.reject);
    }

    #[test]
    fn basis_cap_error_is_actionable() {
        let e = MomentTest::calibrate(60, 6, Statistic::SumOfSquares, Calibration::Asymptotic, 10, 0.05, 1).unwrap_err();
        assert!(e.to_string().contains("smaller d or r"), "{e}");
    }

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            instance: InstanceRef { mode: Mode::SqrtK, k: 4, epsilon: None, c_delta: 0.1, seed: 1 },
            dims: vec![4],
            degrees: vec![2, 4],
            sample_sizes: vec![200, 2000],
            trials: 20,
            significance: 0.05,
            seed: 5,
            calibration: Calibration::MonteCarlo { runs: 100 },
            statistic: Statistic::SumOfSquares,
            lrt: true,
            lrt_calibration_runs: 100,
            null_only: false,
        }
    }

    #[test]
    fn power_curve_is_deterministic_and_renders() {
        let cfg = tiny_config();
        let a = power_curve(&cfg).unwrap();
        let b = power_curve(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 6);
        for r in &a.rows {
            assert!((r.advantage - (r.alt_rate - r.null_rate)).abs() < 1e-15);
            assert!((0.0..=1.0).contains(&r.alt_rate) && (0.0..=1.0).contains(&r.null_rate));
        }
        let svg = a.to_svg();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 3);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 7);
    }

    #[test]
    fn single_cell_matches_direct_composition() {
        let mut cfg = tiny_config();
        cfg.degrees = vec![2];
        cfg.sample_sizes = vec![300];
        cfg.lrt = false;
        let curve = power_curve(&cfg).unwrap();
        let spec = cfg.instance_spec(4).unwrap();
        let inst = build_instance(&spec, &CoreChoice::Explicit).unwrap().instance;
        let cell = derive_seed(cfg.seed, 0);
        let t = MomentTest::calibrate(4, 2, cfg.statistic, cfg.calibration, 300, 0.05, derive_seed(cell, 0)).unwrap();
        let (p1, _) = rejection_rate(cfg.trials, derive_seed(cell, 2), |s| t.rejects_sampled(&inst, s));
        assert_eq!(curve.rows[0].alt_rate, p1);
    }

    #[test]
    fn null_only_has_no_advantage() {
        let mut cfg = tiny_config();
        cfg.null_only = true;
        cfg.trials = 100;
        let curve = power_curve(&cfg).unwrap();
        for r in &curve.rows {
            assert!(r.advantage.abs() <= 4.0 * r.stderr.max(0.02), "{r:?}");
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny_config();
        cfg.trials = 0;
        assert!(power_curve(&cfg).is_err());
        let mut cfg = tiny_config();
        cfg.significance = 1.5;
        assert!(cfg.validate().is_err());
        let json = crate::json::to_string(&ExperimentConfig::default()).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ExperimentConfig::default());
    }
}
