//! Families of row-orthonormal `m x d` frames that are pairwise nearly
//! orthogonal.
//!
//! Two constructions:
//! - [`pack_frobenius`]: uniformly random frames kept greedily when their
//!   Frobenius cross-norm with every kept frame is under a threshold.
//! - [`pack_batched_svd`]: nearly orthogonal unit vectors grouped `m` at a
//!   time into batches `B`, each replaced by its polar factor `U V'` from
//!   `B = U S V'` (singular values set to one).

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CrossNormStats, Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// Above this `m * d`, pairwise operator norms use power iteration.
pub const EXACT_SVD_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum PackMethod {
    Frobenius { threshold: f64 },
    BatchedSvd { c: f64, vector_threshold: f64 },
    Manual,
}

/// Per-batch record of the batched-SVD construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    /// Raw batch of unit vectors, one per row.
    pub raw: Vec<Vec<f64>>,
    pub singular_min: f64,
    pub singular_max: f64,
    /// `sum_{k != l} |<u_k, u_l>|` over the batch.
    pub gershgorin_total: f64,
    /// Largest off-diagonal row sum of `B B'`.
    pub gershgorin_row: f64,
    /// `|A - B|_F`.
    pub correction_fro: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspacePack {
    m: usize,
    d: usize,
    matrices: Vec<DMatrix<f64>>,
    method: PackMethod,
    batches: Vec<BatchRecord>,
    max_op_norm: f64,
    max_fro_norm: f64,
}

impl SubspacePack {
    /// Wraps existing frames; pairwise statistics are computed here.
    pub fn from_matrices(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::assemble(matrices, PackMethod::Manual, Vec::new())
    }

    fn assemble(
        matrices: Vec<DMatrix<f64>>,
        method: PackMethod,
        batches: Vec<BatchRecord>,
    ) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::param("a pack needs at least one matrix"))?;
        let (m, d) = first.shape();
        for a in &matrices {
            if a.shape() != (m, d) {
                return Err(Error::shape(format!("{m}x{d}"), format!("{:?}", a.shape())));
            }
            let r = orthonormality_residual(a);
            if r > 1e-10 {
                return Err(Error::Validation(format!(
                    "frame is not row-orthonormal: |A A' - I|_F = {r:.3e}"
                )));
            }
        }
        let (max_op_norm, max_fro_norm) = pairwise_maxima(&matrices, m * d);
        Ok(SubspacePack {
            m,
            d,
            matrices,
            method,
            batches,
            max_op_norm,
            max_fro_norm,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn method(&self) -> PackMethod {
        self.method
    }

    pub fn batches(&self) -> &[BatchRecord] {
        &self.batches
    }

    /// Largest `|A_i A_j'|_op` over distinct pairs (0 for a single frame).
    pub fn max_op_norm(&self) -> f64 {
        self.max_op_norm
    }

    pub fn max_fro_norm(&self) -> f64 {
        self.max_fro_norm
    }

    pub fn to_file(&self) -> PackFile {
        PackFile {
            m: self.m,
            d: self.d,
            count: self.len(),
            method: self.method,
            max_op_norm: self.max_op_norm,
            max_fro_norm: self.max_fro_norm,
            matrices: self.matrices.iter().map(rows_of).collect(),
        }
    }

    pub fn from_file(file: PackFile) -> Result<Self> {
        if file.matrices.len() != file.count {
            return Err(Error::Schema(format!(
                "pack declares {} matrices but holds {}",
                file.count,
                file.matrices.len()
            )));
        }
        let mats = file
            .matrices
            .iter()
            .map(|rows| matrix_from_rows(rows, file.m, file.d))
            .collect::<Result<Vec<_>>>()?;
        let mut pack = Self::assemble(mats, file.method, Vec::new())?;
        pack.method = file.method;
        Ok(pack)
    }

    /// Little-endian sidecar: `b"SQPK"`, `u32` version, `u64` m, d, count,
    /// then the matrices row-major as `f64`.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(b"SQPK")?;
        w.write_all(&1u32.to_le_bytes())?;
        for v in [self.m as u64, self.d as u64, self.len() as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        for a in &self.matrices {
            for i in 0..self.m {
                for j in 0..self.d {
                    w.write_all(&a[(i, j)].to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"SQPK" {
            return Err(Error::Schema("not a pack sidecar (bad magic)".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != 1 {
            return Err(Error::Schema(format!("unsupported pack sidecar version {version}")));
        }
        let mut b8 = [0u8; 8];
        let mut header = [0usize; 3];
        for h in header.iter_mut() {
            r.read_exact(&mut b8)?;
            *h = u64::from_le_bytes(b8) as usize;
        }
        let [m, d, count] = header;
        let mut mats = Vec::with_capacity(count);
        for _ in 0..count {
            let mut a = DMatrix::zeros(m, d);
            for i in 0..m {
                for j in 0..d {
                    r.read_exact(&mut b8)?;
                    a[(i, j)] = f64::from_le_bytes(b8);
                }
            }
            mats.push(a);
        }
        Self::assemble(mats, PackMethod::Manual, Vec::new())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::json::write_file(path, &self.to_file())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_file(crate::json::read_file(path)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackFile {
    pub m: usize,
    pub d: usize,
    pub count: usize,
    pub method: PackMethod,
    pub max_op_norm: f64,
    pub max_fro_norm: f64,
    pub matrices: Vec<Vec<Vec<f64>>>,
}

pub(crate) fn rows_of(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| a.row(i).iter().copied().collect())
        .collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], m: usize, d: usize) -> Result<DMatrix<f64>> {
    if rows.len() != m || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Schema(format!("matrix is not {m}x{d}")));
    }
    Ok(DMatrix::from_fn(m, d, |i, j| rows[i][j]))
}

/// `|A A' - I_m|_F`.
pub fn orthonormality_residual(a: &DMatrix<f64>) -> f64 {
    let g = a * a.transpose();
    (g - DMatrix::identity(a.nrows(), a.nrows())).norm()
}

/// Gram–Schmidt on the rows (two passes for stability). Returns `None` if
/// the rows are numerically dependent.
pub fn orthonormalize_rows(a: &mut DMatrix<f64>) -> Option<()> {
    let m = a.nrows();
    for i in 0..m {
        for _ in 0..2 {
            for j in 0..i {
                let dot = a.row(i).dot(&a.row(j));
                for k in 0..a.ncols() {
                    let v = a[(j, k)];
                    a[(i, k)] -= dot * v;
                }
            }
        }
        let n = a.row(i).norm();
        if n < 1e-12 {
            return None;
        }
        a.row_mut(i).unscale_mut(n);
    }
    Some(())
}

/// Uniformly random row-orthonormal `m x d` frame.
pub fn random_frame(m: usize, d: usize, rng: &mut Rng) -> DMatrix<f64> {
    loop {
        let mut a = DMatrix::from_fn(m, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        if orthonormalize_rows(&mut a).is_some() {
            return a;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpNormMethod {
    Svd,
    PowerIteration { iters: usize, tol: f64 },
}

impl OpNormMethod {
    pub fn for_size(m_times_d: usize) -> Self {
        if m_times_d > EXACT_SVD_LIMIT {
            OpNormMethod::PowerIteration {
                iters: 100,
                tol: 1e-9,
            }
        } else {
            OpNormMethod::Svd
        }
    }
}

pub fn operator_norm(a: &DMatrix<f64>, method: OpNormMethod) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    match method {
        OpNormMethod::Svd => a.singular_values().max(),
        OpNormMethod::PowerIteration { iters, tol } => power_iteration_norm(a, iters, tol),
    }
}

fn power_iteration_norm(a: &DMatrix<f64>, iters: usize, tol: f64) -> f64 {
    let gram = a.transpose() * a;
    let n = gram.nrows();
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + 0.37 * ((i * 7919) % 13) as f64);
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = &gram * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / nw;
        if (next - lambda).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}

fn pairwise_maxima(mats: &[DMatrix<f64>], m_times_d: usize) -> (f64, f64) {
    let method = OpNormMethod::for_size(m_times_d);
    let mut op: f64 = 0.0;
    let mut fro: f64 = 0.0;
    for i in 0..mats.len() {
        for j in 0..i {
            let p = &mats[i] * mats[j].transpose();
            op = op.max(operator_norm(&p, method));
            fro = fro.max(p.norm());
        }
    }
    (op, fro)
}

/// Greedy rejection packing under a Frobenius cross-norm threshold.
pub fn pack_frobenius(
    count: usize,
    m: usize,
    d: usize,
    threshold: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<SubspacePack> {
    if m == 0 || m >= d {
        return Err(Error::param(format!("need 1 <= m < d, got m={m}, d={d}")));
    }
    if !(threshold > 0.0) || count == 0 {
        return Err(Error::param("threshold must be positive and count at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut kept: Vec<DMatrix<f64>> = Vec::with_capacity(count);
    let mut stats = RunningStats::default();
    let mut attempts = 0;
    while kept.len() < count {
        if attempts >= max_attempts {
            return Err(Error::Packing {
                achieved: kept.len(),
                requested: count,
                stats: stats.finish(attempts),
            });
        }
        attempts += 1;
        let cand = random_frame(m, d, &mut rng);
        let mut worst: f64 = 0.0;
        for a in &kept {
            let f = (&cand * a.transpose()).norm();
            stats.push(f);
            worst = worst.max(f);
            if worst > threshold {
                break;
            }
        }
        if worst <= threshold {
            kept.push(cand);
        } else {
            stats.rejected += 1;
        }
    }
    SubspacePack::assemble(kept, PackMethod::Frobenius { threshold }, Vec::new())
}

#[derive(Debug, Clone)]
pub struct BatchedSvdOptions {
    pub count: usize,
    pub m: usize,
    pub d: usize,
    /// Exponent parameter in `(0, 1/4)`.
    pub c: f64,
    pub seed: u64,
    /// Vector threshold is `threshold_const * d^{-1/2 + c}`.
    pub threshold_const: f64,
    pub max_attempts: usize,
}

impl BatchedSvdOptions {
    pub fn new(count: usize, m: usize, d: usize, c: f64, seed: u64) -> Self {
        BatchedSvdOptions {
            count,
            m,
            d,
            c,
            seed,
            threshold_const: 4.0,
            max_attempts: 100 * count * m + 1000,
        }
    }

    pub fn vector_threshold(&self) -> f64 {
        self.threshold_const * (self.d as f64).powf(-0.5 + self.c)
    }
}

pub fn pack_batched_svd(opts: &BatchedSvdOptions) -> Result<SubspacePack> {
    let BatchedSvdOptions { count, m, d, c, .. } = *opts;
    if m == 0 || m >= d {
        return Err(Error::param(format!("need 1 <= m < d, got m={m}, d={d}")));
    }
    if !(c > 0.0 && c < 0.25) {
        return Err(Error::param(format!("exponent c must lie in (0, 1/4), got {c}")));
    }
    if count == 0 {
        return Err(Error::param("count must be at least 1"));
    }
    let threshold = opts.vector_threshold();
    let mut rng = rng_from_seed(opts.seed);
    let needed = count * m;
    let mut vecs: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(needed);
    let mut stats = RunningStats::default();
    let mut attempts = 0;
    while vecs.len() < needed {
        if attempts >= opts.max_attempts {
            return Err(Error::Packing {
                achieved: vecs.len() / m,
                requested: count,
                stats: stats.finish(attempts),
            });
        }
        attempts += 1;
        let mut v = nalgebra::DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        v.normalize_mut();
        let mut ok = true;
        for u in &vecs {
            let ip = u.dot(&v).abs();
            stats.push(ip);
            if ip > threshold {
                ok = false;
                break;
            }
        }
        if ok {
            vecs.push(v);
        } else {
            stats.rejected += 1;
        }
    }

    let mut matrices = Vec::with_capacity(count);
    let mut batches = Vec::with_capacity(count);
    for chunk in vecs.chunks(m) {
        let b = DMatrix::from_fn(m, d, |i, j| chunk[i][j]);
        let svd = b.clone().svd(true, true);
        let u = svd.u.as_ref().expect("requested U");
        let vt = svd.v_t.as_ref().expect("requested V'");
        let mut a = u * vt;
        // polar factor is orthonormal up to rounding; one clean-up pass
        orthonormalize_rows(&mut a).ok_or_else(|| Error::Validation("degenerate batch".into()))?;
        let sv = &svd.singular_values;
        let gram = &b * b.transpose();
        let mut total = 0.0;
        let mut row_max: f64 = 0.0;
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..m {
                if i != j {
                    row += gram[(i, j)].abs();
                }
            }
            total += row;
            row_max = row_max.max(row);
        }
        batches.push(BatchRecord {
            raw: rows_of(&b),
            singular_min: sv.min(),
            singular_max: sv.max(),
            gershgorin_total: total,
            gershgorin_row: row_max,
            correction_fro: (&a - &b).norm(),
        });
        matrices.push(a);
    }
    SubspacePack::assemble(
        matrices,
        PackMethod::BatchedSvd {
            c,
            vector_threshold: threshold,
        },
        batches,
    )
}

#[derive(Default)]
struct RunningStats {
    n: usize,
    rejected: usize,
    sum: f64,
    min: f64,
    max: f64,
}

impl RunningStats {
    fn push(&mut self, v: f64) {
        if self.n == 0 {
            self.min = v;
            self.max = v;
        } else {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
        self.n += 1;
        self.sum += v;
    }

    fn finish(&self, attempts: usize) -> CrossNormStats {
        CrossNormStats {
            attempts,
            rejected: self.rejected,
            min: self.min,
            mean: if self.n > 0 { self.sum / self.n as f64 } else { 0.0 },
            max: self.max,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub op_norm: f64,
    pub fro_norm: f64,
    /// Right-hand side of `|A_i A_j'| <= |B_i B_j'| + |B_i||A_j - B_j|_F
    /// + |B_j||A_i - B_i|_F + |A_i - B_i|_F |A_j - B_j|_F`, batched packs only.
    pub bound_chain: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchDiagnostics {
    pub singular_min: f64,
    pub singular_max: f64,
    pub gershgorin_total: f64,
    pub gershgorin_row: f64,
    /// `sigma in [1 - R, 1 + R]` with `R` the total off-diagonal sum.
    pub in_total_band: bool,
    /// `sigma^2 in [1 - R_row, 1 + R_row]` (eigenvalues of `B B'`).
    pub in_row_band: bool,
    pub correction_fro: f64,
    /// `sqrt(m) * max_s |sigma_s - 1|`.
    pub correction_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackDiagnostics {
    pub count: usize,
    pub m: usize,
    pub d: usize,
    pub max_orthonormality_residual: f64,
    pub max_op_norm: f64,
    pub max_fro_norm: f64,
    pub pairs: Vec<PairRecord>,
    pub batches: Vec<BatchDiagnostics>,
    pub flags: Vec<String>,
}

pub fn pack_diagnostics(pack: &SubspacePack) -> PackDiagnostics {
    let method = OpNormMethod::for_size(pack.m * pack.d);
    let mut flags = Vec::new();
    let max_res = pack
        .matrices
        .iter()
        .map(orthonormality_residual)
        .fold(0.0, f64::max);
    if max_res > 1e-10 {
        flags.push(format!("orthonormality residual {max_res:.3e} exceeds 1e-10"));
    }

    let raws: Vec<DMatrix<f64>> = pack
        .batches
        .iter()
        .map(|b| DMatrix::from_fn(pack.m, pack.d, |i, j| b.raw[i][j]))
        .collect();
    let mut batches = Vec::new();
    for (k, (rec, raw)) in pack.batches.iter().zip(&raws).enumerate() {
        let sv = raw.singular_values();
        let r = rec.gershgorin_total;
        let rr = rec.gershgorin_row;
        let eps = 1e-12;
        let in_total_band = sv.iter().all(|&s| s >= 1.0 - r - eps && s <= 1.0 + r + eps);
        let in_row_band = sv
            .iter()
            .all(|&s| s * s >= 1.0 - rr - eps && s * s <= 1.0 + rr + eps);
        let correction_fro = (&pack.matrices[k] - raw).norm();
        let max_dev = sv.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
        let correction_bound = (pack.m as f64).sqrt() * max_dev;
        if !in_total_band || !in_row_band {
            flags.push(format!("batch {k}: singular values outside the Gershgorin band"));
        }
        if correction_fro > correction_bound + 1e-12 {
            flags.push(format!(
                "batch {k}: |A - B|_F = {correction_fro:.3e} exceeds sqrt(m) max|s - 1| = {correction_bound:.3e}"
            ));
        }
        batches.push(BatchDiagnostics {
            singular_min: sv.min(),
            singular_max: sv.max(),
            gershgorin_total: r,
            gershgorin_row: rr,
            in_total_band,
            in_row_band,
            correction_fro,
            correction_bound,
        });
    }

    let mut pairs = Vec::new();
    let mut max_op: f64 = 0.0;
    let mut max_fro: f64 = 0.0;
    for i in 0..pack.len() {
        for j in 0..i {
            let p = &pack.matrices[i] * pack.matrices[j].transpose();
            let op_norm = operator_norm(&p, method);
            let fro_norm = p.norm();
            max_op = max_op.max(op_norm);
            max_fro = max_fro.max(fro_norm);
            let bound_chain = if raws.len() == pack.len() {
                let (bi, bj) = (&raws[i], &raws[j]);
                let ei = batches[i].correction_fro;
                let ej = batches[j].correction_fro;
                let chain = operator_norm(&(bi * bj.transpose()), method)
                    + operator_norm(bi, method) * ej
                    + operator_norm(bj, method) * ei
                    + ei * ej;
                if op_norm > chain + 1e-12 {
                    flags.push(format!("pair ({i},{j}): bound chain violated"));
                }
                Some(chain)
            } else {
                None
            };
            pairs.push(PairRecord {
                i,
                j,
                op_norm,
                fro_norm,
                bound_chain,
            });
        }
    }
    if (max_op - pack.max_op_norm).abs() > 1e-9 || (max_fro - pack.max_fro_norm).abs() > 1e-9 {
        flags.push("stored pairwise statistics disagree with recomputation".into());
    }
    PackDiagnostics {
        count: pack.len(),
        m: pack.m,
        d: pack.d,
        max_orthonormality_residual: max_res,
        max_op_norm: max_op,
        max_fro_norm: max_fro,
        pairs,
        batches,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_frame_pack() {
        let p = pack_frobenius(1, 3, 50, 0.1, 1, 10).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.max_op_norm(), 0.0);
        let diag = pack_diagnostics(&p);
        assert!(diag.pairs.is_empty());
        assert!(diag.flags.is_empty());
    }

    #[test]
    fn two_unit_vectors_high_dimension() {
        let p = pack_frobenius(2, 1, 10_000, 0.04, 5, 100).unwrap();
        let ip = p.matrices()[0].row(0).dot(&p.matrices()[1].row(0));
        assert!(ip.abs() <= 0.04);
    }

    #[test]
    fn frobenius_failure_reports_statistics() {
        match pack_frobenius(10, 2, 6, 1e-3, 1, 50) {
            Err(Error::Packing {
                achieved,
                requested,
                stats,
            }) => {
                assert_eq!(requested, 10);
                assert!((1..10).contains(&achieved));
                assert_eq!(stats.attempts, 50);
                assert!(stats.max > 1e-3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn batched_single() {
        let p = pack_batched_svd(&BatchedSvdOptions::new(1, 3, 500, 0.1, 2)).unwrap();
        assert!(orthonormality_residual(&p.matrices()[0]) < 1e-10);
    }

    #[test]
    fn batched_singular_values_in_gershgorin_band() {
        let p = pack_batched_svd(&BatchedSvdOptions::new(4, 3, 5000, 0.1, 3)).unwrap();
        let diag = pack_diagnostics(&p);
        assert!(diag.flags.is_empty(), "{:?}", diag.flags);
        for b in &diag.batches {
            assert!(b.in_total_band && b.in_row_band);
            assert!(b.correction_fro <= b.correction_bound + 1e-12);
        }
    }

    #[test]
    fn manual_pack_norms() {
        let e1 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let e2 = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let p = SubspacePack::from_matrices(vec![e1.clone(), e2]).unwrap();
        assert_eq!(pack_diagnostics(&p).pairs[0].op_norm, 0.0);
        let s = 0.5f64.sqrt();
        let f = DMatrix::from_row_slice(1, 2, &[s, s]);
        let p = SubspacePack::from_matrices(vec![e1, f]).unwrap();
        let op = pack_diagnostics(&p).pairs[0].op_norm;
        assert!((op - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn power_iteration_agrees_with_svd() {
        let mut rng = rng_from_seed(9);
        for m in 1..=4 {
            let a = random_frame(m, 40, &mut rng);
            let b = random_frame(m, 40, &mut rng);
            let p = &a * b.transpose();
            let exact = operator_norm(&p, OpNormMethod::Svd);
            let pi = operator_norm(
                &p,
                OpNormMethod::PowerIteration {
                    iters: 1000,
                    tol: 1e-15,
                },
            );
            assert!((exact - pi).abs() <= 1e-6 * exact, "m={m}: {exact} vs {pi}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = pack_frobenius(5, 2, 300, 0.5, 11, 100).unwrap();
        let b = pack_frobenius(5, 2, 300, 0.5, 11, 100).unwrap();
        assert_eq!(a, b);
        let a = pack_batched_svd(&BatchedSvdOptions::new(3, 2, 400, 0.1, 4)).unwrap();
        let b = pack_batched_svd(&BatchedSvdOptions::new(3, 2, 400, 0.1, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn binary_and_json_roundtrip() {
        let p = pack_frobenius(3, 2, 20, 2.0, 1, 10).unwrap();
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 24 + 3 * 2 * 20 * 8);
        let q = SubspacePack::read_binary(&buf[..]).unwrap();
        assert_eq!(q.matrices(), p.matrices());
        let s = crate::json::to_string(&p.to_file()).unwrap();
        let r = SubspacePack::from_file(serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(r.matrices(), p.matrices());
        assert!(SubspacePack::read_binary(&b"NOPE"[..]).is_err());
    }

    #[test]
    fn parameter_errors() {
        assert!(pack_frobenius(2, 5, 5, 0.1, 1, 10).is_err());
        assert!(pack_batched_svd(&BatchedSvdOptions::new(2, 2, 100, 0.3, 1)).is_err());
    }
}
