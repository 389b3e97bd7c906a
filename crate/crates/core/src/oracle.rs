//! Literal reference for the safety-function iteration.
//!
//! Materializes the full `u[i, s, j]` table and runs the nested loops
//! verbatim, sequentially, with exact-equality termination. Only usable on
//! small grids. Shares nothing with the streaming solver beyond the problem
//! description, and is used by the tests and by `safeset verify`.

use crate::dynamics::Problem;
use crate::scalar::Scalar;

/// Distance table `u[i][s][j] = |f(q[i]) + xi[s] - q[j]|`.
pub fn distance_table<T: Scalar>(problem: &Problem<T>) -> Vec<Vec<Vec<T>>> {
    let q = problem.grid.points();
    let m = problem.disturbance.support_count();
    let bound = problem.disturbance.bound();
    // Same construction as the solver's support, written out independently.
    let half = (m - 1) / 2;
    let xi: Vec<T> = (0..m)
        .map(|s| {
            if m == 1 {
                T::zero()
            } else if s < half {
                -(bound * (T::from_usize_lossy(half - s) / T::from_usize_lossy(half)))
            } else {
                bound * (T::from_usize_lossy(s - half) / T::from_usize_lossy(half))
            }
        })
        .collect();
    q.iter()
        .map(|&qi| {
            let fi = problem.map.apply(qi);
            xi.iter()
                .map(|&xs| q.iter().map(|&qj| (fi + xs - qj).abs()).collect())
                .collect()
        })
        .collect()
}

fn sweep_with_table<T: Scalar>(table: &[Vec<Vec<T>>], u_k: &[T]) -> Vec<T> {
    let n = u_k.len();
    let mut u_next = vec![T::zero(); n];
    for i in 0..n {
        let mut worst = T::neg_infinity();
        for row in &table[i] {
            let mut best = T::infinity();
            for j in 0..n {
                let star = if row[j] > u_k[j] { row[j] } else { u_k[j] };
                if star < best {
                    best = star;
                }
            }
            if best > worst {
                worst = best;
            }
        }
        u_next[i] = worst;
    }
    u_next
}

/// One sweep of the nested loops.
pub fn literal_sweep<T: Scalar>(problem: &Problem<T>, u_k: &[T]) -> Vec<T> {
    sweep_with_table(&distance_table(problem), u_k)
}

/// Sweeps from `U_0 = 0` until two consecutive iterates are identical.
///
/// Returns the fixed point and its index `k`, or `None` after `max_sweeps`.
pub fn literal_fixed_point<T: Scalar>(
    problem: &Problem<T>,
    max_sweeps: usize,
) -> Option<(Vec<T>, usize)> {
    let table = distance_table(problem);
    let mut u = vec![T::zero(); problem.grid.len()];
    for k in 0..max_sweeps {
        let next = sweep_with_table(&table, &u);
        if next == u {
            return Some((u, k));
        }
        u = next;
    }
    None
}
