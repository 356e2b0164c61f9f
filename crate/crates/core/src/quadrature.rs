//! Gauss–Hermite rules for the standard normal weight.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of the `n`-point rule for `E_{N(0,1)}[f]`; exact for
/// polynomials of degree `<= 2n - 1`. Weights sum to one.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    // Golub–Welsch on the Jacobi matrix of He_k: off-diagonals sqrt(k)
    let mut jac = DMatrix::zeros(n, n);
    for k in 1..n {
        let v = (k as f64).sqrt();
        jac[(k - 1, k)] = v;
        jac[(k, k - 1)] = v;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Tensor-product rule in `dim` dimensions. Returns `None` when the grid
/// would exceed `max_points`.
pub fn tensor_gauss_hermite(
    n: usize,
    dim: usize,
    max_points: usize,
) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    let total = (n as u128).checked_pow(dim as u32)?;
    if total > max_points as u128 {
        return None;
    }
    let (nodes, weights) = gauss_hermite(n);
    let mut pts = Vec::with_capacity(total as usize);
    let mut ws = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; dim];
    loop {
        pts.push(idx.iter().map(|&i| nodes[i]).collect());
        ws.push(idx.iter().map(|&i| weights[i]).product());
        let mut k = 0;
        loop {
            if k == dim {
                return Some((pts, ws));
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
