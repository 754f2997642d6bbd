//! Exact transport solvers: Jonker-Volgenant assignment for uniform square
//! instances, network simplex for general marginals.

use crate::cost::CostMatrix;
use crate::error::{invalid, Result, TlpError};
use crate::measure::{TransportPlan, MASS_TOL};
use crate::network_simplex::TransportProblem;

#[derive(Clone, Debug)]
pub struct ExactSolution {
    pub plan: TransportPlan,
    /// `sum_ij c_ij pi_ij`, in p-th-power cost units.
    pub objective: f64,
}

const LARGE: f64 = f64::MAX;

/// Column reduction with reduction transfer; returns the free rows.
fn column_reduction(
    n: usize,
    c: &CostMatrix,
    x: &mut [isize],
    y: &mut [isize],
    v: &mut [f64],
) -> Vec<usize> {
    for j in 0..n {
        v[j] = LARGE;
        y[j] = 0;
    }
    x.iter_mut().for_each(|xi| *xi = -1);
    for i in 0..n {
        let row = c.row(i);
        for j in 0..n {
            if row[j] < v[j] {
                v[j] = row[j];
                y[j] = i as isize;
            }
        }
    }
    let mut unique = vec![true; n];
    for j in (0..n).rev() {
        let i = y[j] as usize;
        if x[i] < 0 {
            x[i] = j as isize;
        } else {
            unique[i] = false;
            y[j] = -1;
        }
    }
    let mut free = Vec::new();
    for i in 0..n {
        if x[i] < 0 {
            free.push(i);
        } else if unique[i] {
            let j = x[i] as usize;
            let row = c.row(i);
            let mut min = LARGE;
            for j2 in 0..n {
                if j2 != j {
                    min = min.min(row[j2] - v[j2]);
                }
            }
            if min < LARGE {
                v[j] -= min;
            }
        }
    }
    free
}

/// Augmenting row reduction over the free rows.
fn augmenting_row_reduction(
    n: usize,
    c: &CostMatrix,
    free: &mut Vec<usize>,
    x: &mut [isize],
    y: &mut [isize],
    v: &mut [f64],
) {
    let n_free = free.len();
    let mut current = 0usize;
    let mut new_free = 0usize;
    let mut rr_cnt = 0usize;
    while current < n_free {
        rr_cnt += 1;
        let free_i = free[current];
        current += 1;
        let row = c.row(free_i);
        let mut j1 = 0usize;
        let mut v1 = row[0] - v[0];
        let mut j2: isize = -1;
        let mut v2 = LARGE;
        for j in 1..n {
            let h = row[j] - v[j];
            if h < v2 {
                if h >= v1 {
                    v2 = h;
                    j2 = j as isize;
                } else {
                    v2 = v1;
                    v1 = h;
                    j2 = j1 as isize;
                    j1 = j;
                }
            }
        }
        let mut i0 = y[j1];
        let v1_new = v[j1] - (v2 - v1);
        let v1_lowers = v1_new < v[j1];
        if rr_cnt < current * n {
            if v1_lowers {
                v[j1] = v1_new;
            } else if i0 >= 0 && j2 >= 0 {
                j1 = j2 as usize;
                i0 = y[j1];
            }
            if i0 >= 0 {
                if v1_lowers {
                    current -= 1;
                    free[current] = i0 as usize;
                } else {
                    free[new_free] = i0 as usize;
                    new_free += 1;
                }
            }
        } else if i0 >= 0 {
            free[new_free] = i0 as usize;
            new_free += 1;
        }
        x[free_i] = j1 as isize;
        y[j1] = free_i as isize;
    }
    free.truncate(new_free);
}

/// Moves the columns with minimal `d` among `cols[lo..]` to the front.
fn find_min_columns(n: usize, lo: usize, d: &[f64], cols: &mut [usize]) -> usize {
    let mut hi = lo + 1;
    let mut mind = d[cols[lo]];
    for k in lo + 1..n {
        let j = cols[k];
        if d[j] <= mind {
            if d[j] < mind {
                hi = lo;
                mind = d[j];
            }
            cols[k] = cols[hi];
            cols[hi] = j;
            hi += 1;
        }
    }
    hi
}

#[allow(clippy::too_many_arguments)]
fn scan_columns(
    n: usize,
    c: &CostMatrix,
    lo: &mut usize,
    hi: &mut usize,
    d: &mut [f64],
    cols: &mut [usize],
    pred: &mut [usize],
    y: &[isize],
    v: &[f64],
) -> Option<usize> {
    while *lo != *hi {
        let j = cols[*lo];
        *lo += 1;
        let i = y[j] as usize;
        let mind = d[j];
        let row = c.row(i);
        let h = row[j] - v[j] - mind;
        for k in *hi..n {
            let j = cols[k];
            let cred = row[j] - v[j] - h;
            if cred < d[j] {
                d[j] = cred;
                pred[j] = i;
                if cred == mind {
                    if y[j] < 0 {
                        return Some(j);
                    }
                    cols[k] = cols[*hi];
                    cols[*hi] = j;
                    *hi += 1;
                }
            }
        }
    }
    None
}

/// Shortest augmenting path from `start`; returns the free column reached.
fn find_path(
    n: usize,
    c: &CostMatrix,
    start: usize,
    y: &[isize],
    v: &mut [f64],
    pred: &mut [usize],
) -> usize {
    let mut cols: Vec<usize> = (0..n).collect();
    let row = c.row(start);
    let mut d: Vec<f64> = (0..n).map(|j| row[j] - v[j]).collect();
    pred.iter_mut().for_each(|p| *p = start);
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut n_ready = 0usize;
    let mut mind = 0.0;
    let mut final_j = None;
    while final_j.is_none() {
        if lo == hi {
            n_ready = lo;
            hi = find_min_columns(n, lo, &d, &mut cols);
            mind = d[cols[lo]];
            for &j in &cols[lo..hi] {
                if y[j] < 0 {
                    final_j = Some(j);
                }
            }
        }
        if final_j.is_none() {
            final_j = scan_columns(n, c, &mut lo, &mut hi, &mut d, &mut cols, pred, y, v);
        }
    }
    for &j in &cols[..n_ready] {
        v[j] += d[j] - mind;
    }
    final_j.unwrap()
}

/// Optimal row-to-column assignment of a square cost matrix.
pub fn assignment(c: &CostMatrix) -> Result<Vec<usize>> {
    if !c.is_square() {
        return invalid(format!(
            "assignment needs a square cost matrix, got {}x{}",
            c.rows(),
            c.cols()
        ));
    }
    let n = c.rows();
    if n == 1 {
        return Ok(vec![0]);
    }
    let mut x = vec![-1isize; n];
    let mut y = vec![-1isize; n];
    let mut v = vec![0.0; n];
    let mut free = column_reduction(n, c, &mut x, &mut y, &mut v);
    for _ in 0..2 {
        if free.is_empty() {
            break;
        }
        augmenting_row_reduction(n, c, &mut free, &mut x, &mut y, &mut v);
    }
    let mut pred = vec![0usize; n];
    for &start in &free {
        let mut j = find_path(n, c, start, &y, &mut v, &mut pred);
        loop {
            let i = pred[j];
            y[j] = i as isize;
            let prev = x[i];
            x[i] = j as isize;
            if i == start {
                break;
            }
            j = prev as usize;
        }
    }
    let perm: Vec<usize> = x.iter().map(|&j| j as usize).collect();
    Ok(perm)
}

/// Exact TL^p problem with uniform weights on both sides of equal size.
pub fn solve_assignment(cost: &CostMatrix) -> Result<ExactSolution> {
    let perm = assignment(cost)?;
    let n = perm.len() as f64;
    let objective = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| cost.get(i, j))
        .sum::<f64>()
        / n;
    Ok(ExactSolution {
        plan: TransportPlan::from_permutation(&perm)?,
        objective,
    })
}

pub(crate) fn check_weights(p: &[f64], q: &[f64]) -> Result<()> {
    for (name, w) in [("source", p), ("target", q)] {
        if w.is_empty() {
            return invalid(format!("{name} weights are empty"));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return invalid(format!("{name} weights must be finite and non-negative"));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > MASS_TOL {
            return invalid(format!(
                "infeasible marginals: {name} weights sum to {s}, expected 1"
            ));
        }
    }
    Ok(())
}

/// Optimal coupling for arbitrary marginals.
pub fn solve_lp(cost: &CostMatrix, p: &[f64], q: &[f64]) -> Result<ExactSolution> {
    if p.len() != cost.rows() || q.len() != cost.cols() {
        return invalid(format!(
            "marginals of length {}/{} for a {}x{} cost",
            p.len(),
            q.len(),
            cost.rows(),
            cost.cols()
        ));
    }
    check_weights(p, q)?;
    let sol = TransportProblem::dense(p, q, cost.data())?.solve()?;
    Ok(ExactSolution {
        plan: TransportPlan::new(p.len(), q.len(), sol.entries)?,
        objective: sol.objective,
    })
}

/// Minimum of `(1/n) sum_i c(i, sigma(i))` over all permutations, `n <= 8`.
pub fn brute_force_min(cost: &CostMatrix) -> Result<f64> {
    if !cost.is_square() {
        return invalid("brute force needs a square cost matrix");
    }
    let n = cost.rows();
    if n > 8 {
        return Err(TlpError::TooLarge(format!(
            "brute force over {n}! permutations refused (limit 8)"
        )));
    }
    fn go(cost: &CostMatrix, i: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        let n = used.len();
        if i == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                go(cost, i + 1, used, acc + cost.get(i, j), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; n], 0.0, &mut best);
    Ok(best / n as f64)
}
