//! Dense phase-one simplex for `find u >= 0 with A u = b`.
//!
//! Sizes here are small (tens of rows, hundreds of columns), so a full
//! tableau is fine. Entering columns use Dantzig's rule and switch to Bland's
//! rule after a run of degenerate pivots. On success the basic solution is
//! re-solved from the original matrix to strip accumulated pivot error; on
//! failure the phase-one duals are returned as a Farkas certificate `y` with
//! `A' y <= 0` and `b' y > 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    /// Phase-one objective (sum of artificials) accepted as zero.
    pub feas_tol: f64,
    pub max_iters: usize,
    /// Degenerate pivots in a row before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            pivot_tol: 1e-11,
            feas_tol: 1e-9,
            max_iters: 50_000,
            bland_after: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible {
        solution: Vec<f64>,
        iterations: usize,
    },
    Infeasible {
        /// `y` with `A' y <= 0` componentwise and `b' y > 0`.
        farkas: Vec<f64>,
        phase1_objective: f64,
        iterations: usize,
    },
}

pub fn find_nonnegative_solution(
    a: &DMatrix<f64>,
    b: &[f64],
    opts: &SimplexOptions,
) -> Result<Feasibility> {
    let rows = a.nrows();
    let cols = a.ncols();
    if b.len() != rows {
        return Err(Error::shape(format!("rhs of length {rows}"), b.len()));
    }
    let width = cols + rows + 1;
    let rhs = cols + rows;
    let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();

    let mut tab = vec![0.0; rows * width];
    for i in 0..rows {
        let row = &mut tab[i * width..(i + 1) * width];
        for j in 0..cols {
            row[j] = sign[i] * a[(i, j)];
        }
        row[cols + i] = 1.0;
        row[rhs] = sign[i] * b[i];
    }
    // reduced costs of the phase-one objective (sum of artificials)
    let mut cost = vec![0.0; width];
    for i in 0..rows {
        for j in 0..cols {
            cost[j] -= tab[i * width + j];
        }
        cost[rhs] -= tab[i * width + rhs];
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    let mut iterations = 0;
    let mut degenerate_run = 0;
    loop {
        if iterations >= opts.max_iters {
            return Err(Error::Validation(format!(
                "simplex hit the iteration limit of {}",
                opts.max_iters
            )));
        }
        let use_bland = degenerate_run >= opts.bland_after;
        let entering = if use_bland {
            (0..cols + rows).find(|&j| cost[j] < -opts.pivot_tol)
        } else {
            let mut best = None;
            let mut best_val = -opts.pivot_tol;
            for (j, &c) in cost.iter().enumerate().take(cols + rows) {
                if c < best_val {
                    best_val = c;
                    best = Some(j);
                }
            }
            best
        };
        let Some(enter) = entering else { break };

        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..rows {
            let piv = tab[i * width + enter];
            if piv > opts.pivot_tol {
                let ratio = tab[i * width + rhs] / piv;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - 1e-14
                            || (ratio <= best_ratio + 1e-14 && basis[i] < basis[l])
                    }
                };
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            // unbounded direction cannot occur in phase one (objective >= 0)
            return Err(Error::Validation("phase-one simplex reported unbounded".into()));
        };
        if best_ratio.abs() < 1e-14 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
        pivot(&mut tab, &mut cost, width, rows, leave, enter);
        basis[leave] = enter;
        iterations += 1;
    }

    let objective = -cost[rhs];
    if objective > opts.feas_tol {
        // y_i = 1 - reduced cost of artificial i, in the sign-flipped rows
        let farkas = (0..rows).map(|i| sign[i] * (1.0 - cost[cols + i])).collect();
        return Ok(Feasibility::Infeasible {
            farkas,
            phase1_objective: objective,
            iterations,
        });
    }

    let basic: Vec<usize> = basis.iter().copied().filter(|&j| j < cols).collect();
    let solution = resolve_basic(a, b, &basic, cols);
    Ok(Feasibility::Feasible {
        solution,
        iterations,
    })
}

fn pivot(tab: &mut [f64], cost: &mut [f64], width: usize, rows: usize, r: usize, c: usize) {
    let p = tab[r * width + c];
    for v in &mut tab[r * width..(r + 1) * width] {
        *v /= p;
    }
    let pivot_row: Vec<f64> = tab[r * width..(r + 1) * width].to_vec();
    for i in 0..rows {
        if i == r {
            continue;
        }
        let f = tab[i * width + c];
        if f != 0.0 {
            let row = &mut tab[i * width..(i + 1) * width];
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[c] = 0.0;
        }
    }
    let f = cost[c];
    if f != 0.0 {
        for (v, pv) in cost.iter_mut().zip(&pivot_row) {
            *v -= f * pv;
        }
        cost[c] = 0.0;
    }
}

// Recompute the basic variables from the original data with one round of
// iterative refinement; nonbasic variables are zero.
fn resolve_basic(a: &DMatrix<f64>, b: &[f64], basic: &[usize], cols: usize) -> Vec<f64> {
    let mut u = vec![0.0; cols];
    if basic.is_empty() {
        return u;
    }
    let sub = a.select_columns(basic);
    let rhs = DVector::from_column_slice(b);
    let svd = sub.clone().svd(true, true);
    let Ok(mut ub) = svd.solve(&rhs, 1e-13) else {
        return u;
    };
    let resid = &rhs - &sub * &ub;
    if let Ok(corr) = svd.solve(&resid, 1e-13) {
        ub += corr;
    }
    for (k, &j) in basic.iter().enumerate() {
        u[j] = ub[k].max(0.0);
    }
    u
}
