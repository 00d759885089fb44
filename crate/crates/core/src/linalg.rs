//! Complex least squares by Householder QR with column pivoting.

use nalgebra::{DMatrix, DVector};

use crate::C64;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: DVector<C64>,
    /// Numerical rank: diagonal entries of `R` above `rank_tol · |R_00|`.
    pub rank: usize,
    /// `|R_00| / |R_{r-1,r-1}|`, a cheap lower bound on the 2-norm condition number.
    pub condition_estimate: f64,
    /// `‖A x − b‖₂`.
    pub residual: f64,
}

/// Basic least-squares solution of `A x ≈ b` for `A` with at least as many rows as columns.
///
/// Columns beyond the numerical rank get zero in the solution.
pub fn solve_least_squares(a: &DMatrix<C64>, b: &DVector<C64>, rank_tol: f64) -> LeastSquares {
    let (rows, cols) = a.shape();
    assert!(rows >= cols, "least squares needs rows >= cols");
    assert_eq!(rows, b.len());

    let mut r = a.clone();
    let mut qtb = b.clone();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut diag = Vec::with_capacity(cols);

    for k in 0..cols {
        // Pivot on the largest remaining column norm.
        let (pivot, _) = (k..cols)
            .map(|j| (j, r.view((k, j), (rows - k, 1)).norm_squared()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot != k {
            r.swap_columns(k, pivot);
            perm.swap(k, pivot);
        }

        let x = r.view((k, k), (rows - k, 1)).clone_owned();
        let xnorm = x.norm();
        if xnorm == 0.0 {
            diag.push(0.0);
            continue;
        }
        let lead = x[0];
        let phase = if lead.norm() > 0.0 { lead / lead.norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.norm();
        if vnorm > 0.0 {
            v /= C64::new(vnorm, 0.0);
            // H = I − 2 v v†
            for j in k..cols {
                let dot: C64 = (0..rows - k).map(|i| v[i].conj() * r[(k + i, j)]).sum();
                for i in 0..rows - k {
                    r[(k + i, j)] -= v[i] * dot * 2.0;
                }
            }
            let dot: C64 = (0..rows - k).map(|i| v[i].conj() * qtb[k + i]).sum();
            for i in 0..rows - k {
                qtb[k + i] -= v[i] * dot * 2.0;
            }
        }
        diag.push(r[(k, k)].norm());
    }

    let lead = diag.first().copied().unwrap_or(0.0);
    let rank = diag.iter().take_while(|&&d| d > rank_tol * lead && d > 0.0).count();

    let mut z = DVector::<C64>::zeros(cols);
    for i in (0..rank).rev() {
        let tail: C64 = (i + 1..rank).map(|j| r[(i, j)] * z[j]).sum();
        z[i] = (qtb[i] - tail) / r[(i, i)];
    }
    let mut solution = DVector::<C64>::zeros(cols);
    for (j, &p) in perm.iter().enumerate() {
        solution[p] = z[j];
    }
    let residual = (a * &solution - b).norm();
    let condition_estimate = if rank == 0 {
        f64::INFINITY
    } else {
        lead / diag[rank - 1]
    };
    LeastSquares {
        solution,
        rank,
        condition_estimate,
        residual,
    }
}
