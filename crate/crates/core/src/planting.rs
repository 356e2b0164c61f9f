//! Planting an `m`-dimensional mixture along a hidden frame in `R^d`.
//!
//! With `V` an `m x d` row-orthonormal frame, the planted distribution has
//! density `A(V x) * phi_{d-m}(x - V'V x)`: it looks like `A` inside the
//! row space of `V` and like a standard Gaussian elsewhere. Equivalently it
//! is the Gaussian mixture with means `V' mu_i` and shared covariance
//! `I - (1 - delta) V'V`.

use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::density::{log_sum_exp, Density, LikelihoodRatio, LN_2PI};
use crate::error::{Error, Result};
use crate::hermite::{gaussian_hermite_moments, HermiteBasis, HermiteCoefficientTable};
use crate::moments::{build_explicit_3moment, build_lp_matched, DiscreteDistribution, LpBuildOptions};
use crate::packing::{matrix_from_rows, orthonormality_residual, random_frame, rows_of};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::smoothing::{default_delta, smooth, SmoothedMixture};

pub const INSTANCE_VERSION: u32 = 1;

/// Above this dimension the debug-build double evaluation of the pdf is
/// skipped (it needs a dense `d x d` triangular solve per point).
pub const DOUBLE_EVAL_MAX_DIM: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    GeneralEps,
    SqrtK,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general-eps" => Ok(Mode::GeneralEps),
            "sqrt-k" => Ok(Mode::SqrtK),
            other => Err(Error::param(format!(
                "unknown mode {other:?} (expected general-eps or sqrt-k)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub core: u64,
    pub pack: u64,
    pub sampling: u64,
}

impl Seeds {
    pub fn from_master(seed: u64) -> Self {
        Seeds {
            core: derive_seed(seed, 1),
            pack: derive_seed(seed, 2),
            sampling: derive_seed(seed, 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub mode: Mode,
    pub k: usize,
    pub epsilon: Option<f64>,
    pub c_delta: f64,
    pub m: usize,
    pub t: usize,
    pub delta: f64,
    pub rho: f64,
    pub d: usize,
    pub seeds: Seeds,
    /// Asymptotic preconditions and how they fare at these values.
    pub advisories: Vec<String>,
}

impl InstanceSpec {
    /// Separation target: `k^eps` (general-eps) or `sqrt(k)/3` (sqrt-k).
    pub fn separation_target(&self) -> f64 {
        let k = self.k as f64;
        match self.mode {
            Mode::GeneralEps => k.powf(self.epsilon.unwrap_or(0.0)),
            Mode::SqrtK => k.sqrt() / 3.0,
        }
    }
}

/// Fills in `m`, `t`, `delta`, `rho` for the chosen regime.
///
/// - general-eps: `m = round(k^{2 eps})`, `t = max(1, floor(1/(26 eps)))`,
///   `delta = c_delta k^{-2.5/m}`.
/// - sqrt-k: `m = k/2`, `t = 3`, `delta = c_delta k^{-2.5/m}`.
pub fn derive_params(
    mode: Mode,
    k: usize,
    epsilon: Option<f64>,
    c_delta: f64,
    d: usize,
    seeds: Seeds,
) -> Result<InstanceSpec> {
    if !(c_delta > 0.0) {
        return Err(Error::param(format!("c_delta must be positive, got {c_delta}")));
    }
    let kf = k as f64;
    let mut advisories = Vec::new();
    let (m, t) = match mode {
        Mode::SqrtK => {
            if k < 2 || !k.is_multiple_of(2) {
                return Err(Error::param(format!("sqrt-k mode needs an even k >= 2, got {k}")));
            }
            (k / 2, 3)
        }
        Mode::GeneralEps => {
            let eps = epsilon
                .ok_or_else(|| Error::param("general-eps mode needs epsilon"))?;
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::param(format!("epsilon must lie in (0, 1), got {eps}")));
            }
            if k < 2 {
                return Err(Error::param(format!("k must be at least 2, got {k}")));
            }
            let m = kf.powf(2.0 * eps).round().max(1.0) as usize;
            let raw_t = 1.0 / (26.0 * eps);
            let t = (raw_t.floor() as usize).max(1);
            if raw_t.fract() != 0.0 || raw_t < 1.0 {
                advisories.push(format!(
                    "t = 1/(26 eps) = {raw_t:.4} rounded down to {t} (minimum 1)"
                ));
            }
            let lhs = kf.powf(eps);
            let rhs = kf.ln().sqrt();
            advisories.push(format!(
                "k^eps >= sqrt(ln k): {lhs:.4} vs {rhs:.4} ({})",
                if lhs >= rhs { "holds" } else { "fails" }
            ));
            let growth = (1.0 / eps).powf(1.0 / eps);
            advisories.push(format!(
                "k > (C/eps)^(1/eps) with unknown C; at C = 1 the right side is {growth:.4e} ({})",
                if kf > growth { "holds" } else { "fails" }
            ));
            (m, t)
        }
    };
    let delta = default_delta(k, m, c_delta);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!(
            "delta = {c_delta} * k^(-2.5/m) = {delta} is outside (0, 1)"
        )));
    }
    if m >= d {
        return Err(Error::param(format!("need m < d, got m = {m}, d = {d}")));
    }
    advisories.push(
        "minimum mixing weight is gated at 0.99/N for an N-point core (equals 0.99/k only when N = k)".into(),
    );
    Ok(InstanceSpec {
        mode,
        k,
        epsilon: if mode == Mode::GeneralEps { epsilon } else { None },
        c_delta,
        m,
        t,
        delta,
        rho: (1.0 - delta).sqrt(),
        d,
        seeds,
        advisories,
    })
}

/// SHA-256 of the canonical JSON of a core distribution.
pub fn core_hash(core: &DiscreteDistribution) -> Result<String> {
    Ok(hex::encode(Sha256::digest(core.to_json()?.as_bytes())))
}

#[derive(Debug, Clone)]
pub struct PlantedInstance {
    spec: Option<InstanceSpec>,
    d: usize,
    v: DMatrix<f64>,
    delta: f64,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    core_hash: String,
    mixture: SmoothedMixture,
    gmm: OnceLock<Arc<GmmForm>>,
}

/// Dense Gaussian-mixture evaluation through a Cholesky factor of the
/// explicit covariance; independent of the factorized formula.
#[derive(Debug)]
struct GmmForm {
    chol: Cholesky<f64, Dyn>,
    ln_det: f64,
}

pub fn plant(a: &SmoothedMixture, v: &DMatrix<f64>) -> Result<PlantedInstance> {
    let (m, d) = v.shape();
    if a.dim() != m {
        return Err(Error::shape(format!("frame with {} rows", a.dim()), m));
    }
    let means = a
        .means()
        .iter()
        .map(|mu| (v.transpose() * DVector::from_column_slice(mu)).as_slice().to_vec())
        .collect();
    let hash = hex::encode(Sha256::digest(crate::json::to_vec(a)?));
    PlantedInstance::from_parts(None, d, v.clone(), a.delta(), a.weights().to_vec(), means, hash)
}

impl PlantedInstance {
    fn from_parts(
        spec: Option<InstanceSpec>,
        d: usize,
        v: DMatrix<f64>,
        delta: f64,
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        core_hash: String,
    ) -> Result<Self> {
        let m = v.nrows();
        if v.ncols() != d || m == 0 || m > d {
            return Err(Error::shape(format!("frame of shape m x {d} with 1 <= m <= d"), format!("{m}x{}", v.ncols())));
        }
        let resid = orthonormality_residual(&v);
        if resid > 1e-10 {
            return Err(Error::Validation(format!(
                "hidden frame is not row-orthonormal: |V V' - I|_F = {resid:.3e}"
            )));
        }
        if means.iter().any(|mu| mu.len() != d) {
            return Err(Error::shape(format!("means of length {d}"), "other lengths"));
        }
        let sub_means = means
            .iter()
            .map(|mu| (&v * DVector::from_column_slice(mu)).as_slice().to_vec())
            .collect();
        let mixture = SmoothedMixture::new(m, sub_means, delta, weights.clone())?;
        Ok(PlantedInstance {
            spec,
            d,
            v,
            delta,
            weights,
            means,
            core_hash,
            mixture,
            gmm: OnceLock::new(),
        })
    }

    pub fn with_provenance(mut self, spec: InstanceSpec, core_hash: String) -> Self {
        self.spec = Some(spec);
        self.core_hash = core_hash;
        self
    }

    pub fn spec(&self) -> Option<&InstanceSpec> {
        self.spec.as_ref()
    }

    pub fn m(&self) -> usize {
        self.v.nrows()
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rho(&self) -> f64 {
        self.mixture.rho()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Component means in `R^d`.
    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    /// The mixture seen inside the hidden subspace.
    pub fn mixture(&self) -> &SmoothedMixture {
        &self.mixture
    }

    pub fn core_hash(&self) -> &str {
        &self.core_hash
    }

    /// `I - (1 - delta) V'V`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let p = self.v.transpose() * &self.v;
        DMatrix::identity(self.d, self.d) - p * (1.0 - self.delta)
    }

    /// `I - (1 - sqrt(delta)) V'V`.
    pub fn sqrt_covariance(&self) -> DMatrix<f64> {
        let p = self.v.transpose() * &self.v;
        DMatrix::identity(self.d, self.d) - p * (1.0 - self.delta.sqrt())
    }

    /// `I + (1/delta - 1) V'V`.
    pub fn precision(&self) -> DMatrix<f64> {
        let p = self.v.transpose() * &self.v;
        DMatrix::identity(self.d, self.d) + p * (1.0 / self.delta - 1.0)
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut y = vec![0.0; m];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, xj) in x.iter().enumerate() {
                s += self.v[(i, j)] * xj;
            }
            *yi = s;
        }
        y
    }

    /// `ln A(Vx) + ln phi_{d-m}(x - V'V x)`.
    pub fn ln_pdf_factorized(&self, x: &[f64]) -> f64 {
        let y = self.project(x);
        let total: f64 = x.iter().map(|v| v * v).sum();
        let inside: f64 = y.iter().map(|v| v * v).sum();
        let outside = (total - inside).max(0.0);
        let rest = (self.d - self.m()) as f64;
        self.mixture.ln_pdf(&y) - 0.5 * (rest * LN_2PI + outside)
    }

    fn gmm_form(&self) -> Arc<GmmForm> {
        self.gmm
            .get_or_init(|| {
                let chol = Cholesky::new(self.covariance()).expect("covariance is positive definite");
                let ln_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                Arc::new(GmmForm { chol, ln_det })
            })
            .clone()
    }

    /// Log-density of the explicit `d`-dimensional mixture, through a dense
    /// Cholesky factor of the covariance.
    pub fn ln_pdf_gmm(&self, x: &[f64]) -> f64 {
        let g = self.gmm_form();
        let norm = -0.5 * (self.d as f64 * LN_2PI + g.ln_det);
        let l = g.chol.l();
        log_sum_exp(self.means.iter().zip(&self.weights).map(|(mu, w)| {
            let diff = DVector::from_iterator(self.d, x.iter().zip(mu).map(|(a, b)| a - b));
            let z = l
                .solve_lower_triangular(&diff)
                .expect("Cholesky factor is nonsingular");
            w.ln() + norm - 0.5 * z.norm_squared()
        }))
    }

    /// Draws `n` points and their component labels.
    pub fn sample_labeled(&self, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = rng_from_seed(seed);
        let mut xs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let mut x = vec![0.0; self.d];
            labels.push(self.sample_one(&mut rng, &mut x));
            xs.push(x);
        }
        (xs, labels)
    }

    // mean + Sigma^{1/2} z with Sigma^{1/2} = I - (1 - sqrt(delta)) V'V
    fn sample_one(&self, rng: &mut Rng, out: &mut [f64]) -> usize {
        let i = self.mixture.sample_component(rng);
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let vz = self.project(out);
        let shrink = 1.0 - self.delta.sqrt();
        for (j, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (r, vr) in vz.iter().enumerate() {
                s += self.v[(r, j)] * vr;
            }
            *o += self.means[i][j] - shrink * s;
        }
        i
    }

    /// Exact `E_P[h_a]` for every `a` of degree at most `t` in the original
    /// coordinates, summed over components in closed form.
    pub fn hermite_moments(&self, t: usize) -> Result<HermiteCoefficientTable> {
        let basis = Arc::new(HermiteBasis::new(self.d, t)?);
        let shift = -(self.v.transpose() * &self.v) * (1.0 - self.delta);
        let mut acc = vec![0.0; basis.len()];
        for (mu, w) in self.means.iter().zip(&self.weights) {
            let comp = gaussian_hermite_moments(&basis, mu, &shift)?;
            for (a, c) in acc.iter_mut().zip(comp.values()) {
                *a += w * c;
            }
        }
        HermiteCoefficientTable::new(basis, acc)
    }

    /// Smallest pairwise distance between component means.
    pub fn min_mean_separation(&self) -> f64 {
        crate::moments::min_pairwise_distance(&self.means)
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            version: INSTANCE_VERSION,
            spec: self.spec.clone(),
            gmm: GmmSection {
                d: self.d,
                weights: self.weights.clone(),
                means: self.means.clone(),
                cov_factor: CovFactor {
                    delta: self.delta,
                    v: rows_of(&self.v),
                },
            },
            answer_key: AnswerKey {
                v: rows_of(&self.v),
                core_hash: self.core_hash.clone(),
            },
        }
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        check_version(file.version)?;
        let g = file.gmm;
        let m = g.cov_factor.v.len();
        let v = matrix_from_rows(&g.cov_factor.v, m, g.d)?;
        if file.answer_key.v != g.cov_factor.v {
            return Err(Error::Validation(
                "answer-key frame differs from the covariance frame".into(),
            ));
        }
        if g.means.len() != g.weights.len() {
            return Err(Error::Validation(format!(
                "{} means but {} weights",
                g.means.len(),
                g.weights.len()
            )));
        }
        let inst = Self::from_parts(
            file.spec,
            g.d,
            v,
            g.cov_factor.delta,
            g.weights,
            g.means,
            file.answer_key.core_hash,
        )?;
        if let Some(spec) = &inst.spec {
            if spec.d != inst.d || spec.m != inst.m() {
                return Err(Error::Validation(format!(
                    "spec declares (m, d) = ({}, {}) but the mixture has ({}, {})",
                    spec.m,
                    spec.d,
                    inst.m(),
                    inst.d
                )));
            }
        }
        Ok(inst)
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::json::write_file(path, &self.to_file())
    }

    pub fn import(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_file(crate::json::read_file(path)?)
    }

    /// SHA-256 of the exported bytes.
    pub fn content_hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(crate::json::to_vec(&self.to_file())?)))
    }
}

impl Density for PlantedInstance {
    fn dim(&self) -> usize {
        self.d
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        let f = self.ln_pdf_factorized(x);
        if cfg!(debug_assertions) && self.d <= DOUBLE_EVAL_MAX_DIM {
            let g = self.ln_pdf_gmm(x);
            debug_assert!(
                (f - g).abs() <= 1e-9 * f.abs().max(1.0),
                "factorized and mixture densities disagree: {f} vs {g}"
            );
        }
        f
    }

    fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        self.sample_one(rng, out);
    }
}

impl LikelihoodRatio for PlantedInstance {
    /// `ln A(Vx) - ln phi_m(Vx)`: the orthogonal factor cancels.
    fn ln_likelihood_ratio(&self, x: &[f64]) -> f64 {
        let y = self.project(x);
        self.mixture.ln_pdf(&y) - crate::density::ln_standard_normal(&y)
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != INSTANCE_VERSION {
        return Err(Error::Schema(format!(
            "unsupported instance version {v} (expected {INSTANCE_VERSION})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub version: u32,
    pub spec: Option<InstanceSpec>,
    pub gmm: GmmSection,
    pub answer_key: AnswerKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSection {
    pub d: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub cov_factor: CovFactor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovFactor {
    pub delta: f64,
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerKey {
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
    pub core_hash: String,
}

/// Reads an instance file without validating it, for diagnosis of broken
/// files.
pub fn read_instance_file(path: impl AsRef<Path>) -> Result<InstanceFile> {
    let file: InstanceFile = crate::json::read_file(path)?;
    check_version(file.version)?;
    Ok(file)
}

/// Writes samples as CSV with header `x0,...,x{d-1}` (plus `component` when
/// labels are given), floats at 17 significant digits.
pub fn write_samples_csv(
    mut w: impl Write,
    samples: &[Vec<f64>],
    d: usize,
    labels: Option<&[usize]>,
) -> Result<()> {
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    if labels.is_some() {
        header.push("component".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for (r, x) in samples.iter().enumerate() {
        if x.len() != d {
            return Err(Error::shape(d, x.len()));
        }
        let mut row: Vec<String> = x.iter().map(|&v| crate::json::fmt_f64(v)).collect();
        if let Some(l) = labels {
            row.push(l[r].to_string());
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Core builder used by [`build_instance`].
#[derive(Debug, Clone)]
pub enum CoreChoice {
    /// Explicit three-moment core (requires `t <= 3`).
    Explicit,
    /// LP-matched core with the given weight floor (`None`: `0.99/N`).
    Lp { alpha: Option<f64>, n: Option<usize> },
}

impl CoreChoice {
    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::SqrtK => CoreChoice::Explicit,
            Mode::GeneralEps => CoreChoice::Lp { alpha: None, n: None },
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltInstance {
    pub core: DiscreteDistribution,
    pub mixture: SmoothedMixture,
    pub instance: PlantedInstance,
}

/// Core, smoothing, a random frame from the pack seed, and planting.
pub fn build_instance(spec: &InstanceSpec, choice: &CoreChoice) -> Result<BuiltInstance> {
    let core = match choice {
        CoreChoice::Explicit => {
            if spec.t > 3 {
                return Err(Error::param(format!(
                    "the explicit core matches three moments, spec asks for t = {}",
                    spec.t
                )));
            }
            build_explicit_3moment(spec.m)?
        }
        CoreChoice::Lp { alpha, n } => {
            let mut opts = LpBuildOptions::new(spec.t, spec.seeds.core);
            opts.alpha = *alpha;
            opts.n = *n;
            build_lp_matched(spec.m, &opts)?
        }
    };
    let mixture = smooth(&core, spec.delta)?;
    let mut rng = rng_from_seed(spec.seeds.pack);
    let v = random_frame(spec.m, spec.d, &mut rng);
    let instance = plant(&mixture, &v)?.with_provenance(spec.clone(), core_hash(&core)?);
    Ok(BuiltInstance {
        core,
        mixture,
        instance,
    })
}
