//! Normalized probabilist's Hermite polynomials.
//!
//! `h_k = He_k / sqrt(k!)` is orthonormal under `N(0, 1)`, and the products
//! `h_a(x) = prod_i h_{a_i}(x_i)` form an orthonormal basis of
//! `L2(N(0, I_m))`. Multi-indices are kept in graded lexicographic order:
//! by total degree first, then by decreasing leading entries, so for `m = 2`
//! the basis starts `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default guard on the number of basis functions `C(m + t, t)`.
pub const DEFAULT_BASIS_CAP: usize = 1_000_000;

/// `h_k(x)` via the normalized three-term recurrence
/// `h_{k+1} = (x h_k - sqrt(k) h_{k-1}) / sqrt(k + 1)`.
pub fn hermite_1d(k: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..k {
        let next = (x * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[0..=kmax]` with `h_0(x), ..., h_kmax(x)`.
pub fn hermite_1d_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for j in 1..out.len().saturating_sub(1) {
        out[j + 1] = (x * out[j] - (j as f64).sqrt() * out[j - 1]) / ((j + 1) as f64).sqrt();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(m: usize) -> Self {
        MultiIndex(vec![0; m])
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `a! = prod_i a_i!` as a float.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&ai| (1..=ai).map(f64::from).product::<f64>())
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

/// `h_a(x)` for a multi-index `a`.
pub fn hermite_multi(a: &MultiIndex, x: &[f64]) -> Result<f64> {
    if a.dim() != x.len() {
        return Err(Error::shape(
            format!("point of length {}", a.dim()),
            format!("length {}", x.len()),
        ));
    }
    Ok(a
        .entries()
        .iter()
        .zip(x)
        .map(|(&k, &xi)| hermite_1d(k as usize, xi))
        .product())
}

/// `C(m + t, t)`, saturating instead of overflowing.
pub fn basis_count(m: usize, t: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 1..=t as u128 {
        acc = match acc.checked_mul(m as u128 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

pub fn enumerate_multi_indices(m: usize, t: usize) -> Result<Vec<MultiIndex>> {
    enumerate_multi_indices_capped(m, t, DEFAULT_BASIS_CAP)
}

pub fn enumerate_multi_indices_capped(m: usize, t: usize, cap: usize) -> Result<Vec<MultiIndex>> {
    if m == 0 {
        return Err(Error::param("dimension m must be at least 1"));
    }
    let count = basis_count(m, t);
    if count > cap as u128 {
        return Err(Error::BasisCap { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut buf = vec![0u32; m];
    for deg in 0..=t as u32 {
        fill_degree(&mut buf, 0, deg, &mut out);
    }
    Ok(out)
}

// Entries at `pos..` must sum to `rem`; larger leading entries come first.
fn fill_degree(buf: &mut [u32], pos: usize, rem: u32, out: &mut Vec<MultiIndex>) {
    if pos == buf.len() - 1 {
        buf[pos] = rem;
        out.push(MultiIndex(buf.to_vec()));
        return;
    }
    for v in (0..=rem).rev() {
        buf[pos] = v;
        fill_degree(buf, pos + 1, rem - v, out);
    }
    buf[pos] = 0;
}

/// An enumerated multi-index basis with position lookup and a product tree
/// that evaluates every `h_a(x)` with one multiplication per index.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    m: usize,
    t: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    // (parent position, coordinate, power): h_a = h_parent * h_power(x_coord)
    tree: Vec<(usize, usize, usize)>,
}

impl HermiteBasis {
    pub fn new(m: usize, t: usize) -> Result<Self> {
        Self::with_cap(m, t, DEFAULT_BASIS_CAP)
    }

    pub fn with_cap(m: usize, t: usize, cap: usize) -> Result<Self> {
        let indices = enumerate_multi_indices_capped(m, t, cap)?;
        let lookup: HashMap<_, _> = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        let tree = indices
            .iter()
            .map(|a| match a.entries().iter().position(|&v| v > 0) {
                None => (0, 0, 0),
                Some(j) => {
                    let mut parent = a.clone();
                    parent.0[j] = 0;
                    (lookup[&parent], j, a.0[j] as usize)
                }
            })
            .collect();
        Ok(HermiteBasis {
            m,
            t,
            indices,
            lookup,
            tree,
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn max_degree(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, a: &MultiIndex) -> Option<usize> {
        self.lookup.get(a).copied()
    }

    pub fn degree_of(&self, pos: usize) -> u32 {
        self.indices[pos].degree()
    }

    /// Evaluates all basis functions at `x` into `out` (length `len()`).
    /// `scratch` must hold at least `m * (t + 1)` values.
    pub fn eval_into(&self, x: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.m);
        let stride = self.t + 1;
        for (j, &xj) in x.iter().enumerate() {
            hermite_1d_all(xj, &mut scratch[j * stride..(j + 1) * stride]);
        }
        out[0] = 1.0;
        for pos in 1..self.indices.len() {
            let (parent, coord, power) = self.tree[pos];
            out[pos] = out[parent] * scratch[coord * stride + power];
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.m {
            return Err(Error::shape(
                format!("point of length {}", self.m),
                format!("length {}", x.len()),
            ));
        }
        let mut scratch = vec![0.0; self.m * (self.t + 1)];
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut scratch, &mut out);
        Ok(out)
    }

    pub fn scratch_len(&self) -> usize {
        self.m * (self.t + 1)
    }

    /// Position of `indices[i] + indices[j]`, if its degree stays within `t`.
    fn sum_position(&self, i: usize, j: usize) -> Option<usize> {
        let a = &self.indices[i];
        let b = &self.indices[j];
        if (a.degree() + b.degree()) as usize > self.t {
            return None;
        }
        let s = MultiIndex(a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect());
        self.position(&s)
    }
}

/// Expansion coefficients indexed by a [`HermiteBasis`].
#[derive(Debug, Clone)]
pub struct HermiteCoefficientTable {
    basis: Arc<HermiteBasis>,
    values: Vec<f64>,
}

impl HermiteCoefficientTable {
    pub fn new(basis: Arc<HermiteBasis>, values: Vec<f64>) -> Result<Self> {
        if values.len() != basis.len() {
            return Err(Error::shape(
                format!("{} coefficients", basis.len()),
                values.len(),
            ));
        }
        Ok(HermiteCoefficientTable { basis, values })
    }

    pub fn zeros(basis: Arc<HermiteBasis>) -> Self {
        let values = vec![0.0; basis.len()];
        HermiteCoefficientTable { basis, values }
    }

    pub fn basis(&self) -> &Arc<HermiteBasis> {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn max_degree(&self) -> usize {
        self.basis.max_degree()
    }

    pub fn get(&self, a: &MultiIndex) -> Option<f64> {
        self.basis.position(a).map(|p| self.values[p])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.basis.indices().iter().zip(self.values.iter().copied())
    }

    /// Largest `|c_a - target_a|` over `1 <= |a| <= max_degree`, where the
    /// target is the standard Gaussian (all zero).
    pub fn max_abs_nonconstant(&self, max_degree: usize) -> f64 {
        self.iter()
            .filter(|(a, _)| a.degree() >= 1 && a.degree() as usize <= max_degree)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Ornstein–Uhlenbeck action on Hermite moments: entry `a` scales by
/// `rho^|a|`.
pub fn ou_transform_moments(
    moments: &HermiteCoefficientTable,
    rho: f64,
) -> Result<HermiteCoefficientTable> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::param(format!("rho must lie in (0, 1), got {rho}")));
    }
    let values = moments
        .iter()
        .map(|(a, v)| v * rho.powi(a.degree() as i32))
        .collect();
    HermiteCoefficientTable::new(moments.basis.clone(), values)
}

/// Exact `E[h_a(x)]` for `x ~ N(mean, I + cov_shift)` and every `a` in the
/// basis.
///
/// Uses the generating function `E[exp(<s,x> - |s|^2/2)] =
/// exp(<s,mean> + s' cov_shift s / 2)`: the coefficient of `s^a` in the
/// truncated exponential equals `E[He_a(x)] / a!`.
pub fn gaussian_hermite_moments(
    basis: &Arc<HermiteBasis>,
    mean: &[f64],
    cov_shift: &DMatrix<f64>,
) -> Result<HermiteCoefficientTable> {
    let m = basis.dim();
    if mean.len() != m || cov_shift.nrows() != m || cov_shift.ncols() != m {
        return Err(Error::shape(
            format!("mean of length {m} and {m}x{m} covariance"),
            format!(
                "mean {} and {}x{}",
                mean.len(),
                cov_shift.nrows(),
                cov_shift.ncols()
            ),
        ));
    }
    let n = basis.len();
    let t = basis.max_degree();

    // exponent polynomial: linear part <s, mean>, quadratic part s' C s / 2
    let mut expo = vec![0.0; n];
    let mut unit = vec![0u32; m];
    for i in 0..m {
        if t >= 1 {
            unit[i] = 1;
            expo[basis.position(&MultiIndex(unit.clone())).unwrap()] += mean[i];
            unit[i] = 0;
        }
        if t >= 2 {
            for j in i..m {
                unit[i] += 1;
                unit[j] += 1;
                let pos = basis.position(&MultiIndex(unit.clone())).unwrap();
                let c = if i == j {
                    0.5 * cov_shift[(i, i)]
                } else {
                    0.5 * (cov_shift[(i, j)] + cov_shift[(j, i)])
                };
                expo[pos] += c;
                unit[i] -= 1;
                unit[j] -= 1;
            }
        }
    }

    // exp(P) = sum_{k <= t} P^k / k!, exact since P has no constant term
    let mut total = vec![0.0; n];
    total[0] = 1.0;
    let mut power = total.clone();
    for k in 1..=t {
        let mut next = vec![0.0; n];
        for (i, &pi) in power.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (j, &ej) in expo.iter().enumerate() {
                if ej == 0.0 {
                    continue;
                }
                if let Some(p) = basis.sum_position(i, j) {
                    next[p] += pi * ej;
                }
            }
        }
        let inv = 1.0 / k as f64;
        for v in next.iter_mut() {
            *v *= inv;
        }
        for (acc, v) in total.iter_mut().zip(&next) {
            *acc += v;
        }
        power = next;
    }

    let values = basis
        .indices()
        .iter()
        .zip(&total)
        .map(|(a, c)| a.factorial().sqrt() * c)
        .collect();
    HermiteCoefficientTable::new(basis.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Explicit sum: h_i(x) = sqrt(i!) sum_j (-1)^j x^(i-2j) / (j! (i-2j)! 2^j)
    fn hermite_explicit(i: usize, x: f64) -> f64 {
        let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
        let mut s = 0.0;
        for j in 0..=i / 2 {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * x.powi((i - 2 * j) as i32) / (fact(j) * fact(i - 2 * j) * 2f64.powi(j as i32));
        }
        fact(i).sqrt() * s
    }

    #[test]
    fn spec_values_1d() {
        assert_eq!(hermite_1d(0, 3.7), 1.0);
        assert!(hermite_1d(2, 1.0).abs() < 1e-15);
        let expected = 2.0 / 6f64.sqrt();
        assert!((hermite_1d(3, 2.0) - expected).abs() < 1e-14);
        assert!((hermite_explicit(3, 2.0) - expected).abs() < 1e-14);
    }

    #[test]
    fn recurrence_matches_explicit_sum() {
        for k in 0..=20 {
            for step in 0..=100 {
                let x = -5.0 + 0.1 * step as f64;
                let a = hermite_1d(k, x);
                let b = hermite_explicit(k, x);
                let scale = b.abs().max(1.0);
                assert!(
                    (a - b).abs() / scale < 1e-10,
                    "k={k} x={x}: recurrence {a} vs explicit {b}"
                );
            }
        }
    }

    #[test]
    fn orthonormal_under_standard_normal() {
        // trapezoid rule on a wide grid is spectrally accurate here
        let n = 4001;
        let (lo, hi) = (-14.0, 14.0);
        let h = (hi - lo) / (n - 1) as f64;
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        for k in 0..=6 {
            for l in 0..=6 {
                let mut s = 0.0;
                for i in 0..n {
                    let x = lo + h * i as f64;
                    let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    s += w * hermite_1d(k, x) * hermite_1d(l, x) * norm * (-x * x / 2.0).exp();
                }
                s *= h;
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-8, "k={k} l={l}: {s}");
            }
        }
    }

    #[test]
    fn multi_values() {
        let a = MultiIndex::new(vec![0, 0]);
        assert_eq!(hermite_multi(&a, &[5.0, -2.0]).unwrap(), 1.0);
        let a = MultiIndex::new(vec![1, 1]);
        assert_eq!(hermite_multi(&a, &[2.0, 3.0]).unwrap(), 6.0);
        let a = MultiIndex::new(vec![2, 1]);
        assert!(hermite_multi(&a, &[1.0, 4.0]).unwrap().abs() < 1e-15);
        assert!(matches!(
            hermite_multi(&a, &[1.0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn enumeration_order_and_counts() {
        let e = enumerate_multi_indices(1, 2).unwrap();
        assert_eq!(e, vec![vec![0].into(), vec![1].into(), vec![2].into()]);
        let e = enumerate_multi_indices(2, 1).unwrap();
        assert_eq!(
            e,
            vec![vec![0, 0].into(), vec![1, 0].into(), vec![0, 1].into()]
        );
        assert_eq!(enumerate_multi_indices(3, 4).unwrap().len(), 35);
        assert_eq!(basis_count(3, 4), 35);
        assert_eq!(
            enumerate_multi_indices(4, 3).unwrap(),
            enumerate_multi_indices(4, 3).unwrap()
        );
    }

    #[test]
    fn enumeration_cap() {
        assert!(matches!(
            enumerate_multi_indices_capped(10, 6, 1000),
            Err(Error::BasisCap { count: 8008, cap: 1000 })
        ));
        assert!(enumerate_multi_indices(0, 2).is_err());
    }

    #[test]
    fn basis_tree_matches_direct_products() {
        let basis = HermiteBasis::new(3, 4).unwrap();
        let x = [0.3, -1.2, 2.1];
        let vals = basis.eval(&x).unwrap();
        for (a, v) in basis.indices().iter().zip(&vals) {
            let direct = hermite_multi(a, &x).unwrap();
            assert!((direct - v).abs() < 1e-13);
        }
    }

    #[test]
    fn ou_on_point_mass() {
        let basis = Arc::new(HermiteBasis::new(1, 2).unwrap());
        let x0 = 2.0;
        let table = HermiteCoefficientTable::new(basis.clone(), basis.eval(&[x0]).unwrap()).unwrap();
        let out = ou_transform_moments(&table, 0.9).unwrap();
        let v = out.values();
        assert_eq!(v[0], 1.0);
        assert!((v[1] - 1.8).abs() < 1e-14);
        assert!((v[2] - 0.81 * hermite_1d(2, 2.0)).abs() < 1e-14);

        // Monte-Carlo cross-check: 0.9 * 2 + sqrt(0.19) z
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::rng::rng_from_seed(5);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let y = 1.8 + 0.19f64.sqrt() * z;
            s1 += hermite_1d(1, y);
            s2 += hermite_1d(2, y);
        }
        assert!((s1 / n as f64 - v[1]).abs() < 4.0 * (0.19f64 / n as f64).sqrt());
        assert!((s2 / n as f64 - v[2]).abs() < 0.02);
    }

    #[test]
    fn ou_rejects_bad_rho() {
        let basis = Arc::new(HermiteBasis::new(1, 1).unwrap());
        let table = HermiteCoefficientTable::zeros(basis);
        assert!(ou_transform_moments(&table, 0.0).is_err());
        assert!(ou_transform_moments(&table, 1.0).is_err());
    }

    #[test]
    fn ou_scales_each_degree() {
        let basis = Arc::new(HermiteBasis::new(2, 2).unwrap());
        let mut vals = vec![0.0; basis.len()];
        vals[0] = 1.0;
        let pos = basis.position(&vec![2, 0].into()).unwrap();
        vals[pos] = 3.0;
        let table = HermiteCoefficientTable::new(basis, vals).unwrap();
        let out = ou_transform_moments(&table, 0.5).unwrap();
        assert_eq!(out.values()[0], 1.0);
        assert_eq!(out.get(&vec![2, 0].into()), Some(0.75));
    }

    #[test]
    fn gaussian_moments_match_single_component_formula() {
        // N(mu, delta I) has E[h_a] = rho^|a| h_a(mu / rho) with rho^2 = 1 - delta
        let basis = Arc::new(HermiteBasis::new(2, 4).unwrap());
        let mu = [0.7, -1.3];
        let delta: f64 = 0.3;
        let rho = (1.0 - delta).sqrt();
        let shift = DMatrix::from_diagonal_element(2, 2, delta - 1.0);
        let table = gaussian_hermite_moments(&basis, &mu, &shift).unwrap();
        for (a, v) in table.iter() {
            let want = rho.powi(a.degree() as i32)
                * hermite_multi(a, &[mu[0] / rho, mu[1] / rho]).unwrap();
            assert!((v - want).abs() < 1e-12, "{a}: {v} vs {want}");
        }
    }

    #[test]
    fn gaussian_moments_of_standard_normal_vanish() {
        let basis = Arc::new(HermiteBasis::new(3, 5).unwrap());
        let table =
            gaussian_hermite_moments(&basis, &[0.0; 3], &DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(table.values()[0], 1.0);
        assert_eq!(table.max_abs_nonconstant(5), 0.0);
    }

    proptest! {
        #[test]
        fn ou_composition(r1 in 0.05f64..0.95, r2 in 0.05f64..0.95, seed in 0u64..1000) {
            use rand::Rng;
            let basis = Arc::new(HermiteBasis::new(2, 4).unwrap());
            let mut rng = crate::rng::rng_from_seed(seed);
            let vals: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let table = HermiteCoefficientTable::new(basis, vals).unwrap();
            let twice = ou_transform_moments(&ou_transform_moments(&table, r1).unwrap(), r2).unwrap();
            let once = ou_transform_moments(&table, r1 * r2).unwrap();
            for (a, b) in twice.values().iter().zip(once.values()) {
                prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
            }
        }
    }
}
