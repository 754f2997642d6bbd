//! The TL^p ground cost and signal transformations applied before comparison.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, TlpError};
use crate::measure::{DiscreteMeasure, Points, Signal};

/// Largest number of rows or columns of a dense cost matrix.
pub const DENSE_LIMIT: usize = 4096;

/// Trade-off between spatial transport and value mismatch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Lambda {
    /// The L^p limit.
    Zero,
    Finite(f64),
    /// Transport between value distributions.
    Infinity,
}

impl Lambda {
    /// Maps `0` and `+inf` to the symbolic limits.
    pub fn from_f64(v: f64) -> Result<Self> {
        if v.is_nan() || v < 0.0 {
            return invalid(format!("lambda must be non-negative, got {v}"));
        }
        Ok(if v == 0.0 {
            Lambda::Zero
        } else if v.is_infinite() {
            Lambda::Infinity
        } else {
            Lambda::Finite(v)
        })
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Lambda::Zero => 0.0,
            Lambda::Finite(v) => v,
            Lambda::Infinity => f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub p: f64,
    pub lambda: Lambda,
}

impl CostParams {
    pub fn new(p: f64, lambda: Lambda) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return invalid(format!("exponent p must be >= 1, got {p}"));
        }
        if let Lambda::Finite(l) = lambda {
            if !(l.is_finite() && l > 0.0) {
                return invalid(format!("lambda must be positive, got {l}"));
            }
        }
        Ok(CostParams { p, lambda })
    }

    pub fn finite(p: f64, lambda: f64) -> Result<Self> {
        Self::new(p, Lambda::from_f64(lambda)?)
    }

    pub fn finite_lambda(&self) -> Result<f64> {
        match self.lambda {
            Lambda::Finite(l) => Ok(l),
            other => invalid(format!("a finite lambda is required here, got {other:?}")),
        }
    }
}

/// `|t|^p` with fast paths for the common exponents.
#[inline]
pub fn pow_abs(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t * t
    } else if p == 1.0 {
        t.abs()
    } else {
        t.abs().powf(p)
    }
}

/// `|a - b|_p^p` summed over coordinates.
#[inline]
pub fn pth_power_dist(a: &[f64], b: &[f64], p: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| pow_abs(x - y, p)).sum()
}

/// Dense row-major matrix of p-th-power costs.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid("cost matrix must be non-empty");
        }
        if data.len() != rows * cols {
            return invalid(format!(
                "{} entries for a {rows}x{cols} cost matrix",
                data.len()
            ));
        }
        if data.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return invalid("cost entries must be finite and non-negative");
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        check_dense(rows, cols)?;
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.rows,
            self.cols,
            self.data.iter().map(|c| c * s).collect(),
        )
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

fn check_dense(rows: usize, cols: usize) -> Result<()> {
    if rows > DENSE_LIMIT || cols > DENSE_LIMIT {
        return Err(TlpError::TooLarge(format!(
            "{rows}x{cols} exceeds the dense limit of {DENSE_LIMIT}; use the multiscale or entropic solver"
        )));
    }
    Ok(())
}

pub(crate) fn check_compatible(f: &Signal, g: &Signal) -> Result<()> {
    if f.dim() != g.dim() {
        return invalid(format!(
            "domain dimensions differ: {} vs {}",
            f.dim(),
            g.dim()
        ));
    }
    if f.channels() != g.channels() {
        return invalid(format!(
            "channel counts differ: {} vs {}",
            f.channels(),
            g.channels()
        ));
    }
    Ok(())
}

/// Cost of matching the graph point `(x, f(x))` with `(y, g(y))`.
#[inline]
pub fn tlp_entry(x: &[f64], fx: &[f64], y: &[f64], gy: &[f64], p: f64, inv_lambda: f64) -> f64 {
    inv_lambda * pth_power_dist(x, y, p) + pth_power_dist(fx, gy, p)
}

/// `c(i,j) = (1/lambda)|x_i - y_j|_p^p + |f(x_i) - g(y_j)|_p^p`.
pub fn build_cost(f: &Signal, g: &Signal, params: &CostParams) -> Result<CostMatrix> {
    check_compatible(f, g)?;
    let lambda = params.finite_lambda()?;
    let inv = 1.0 / lambda;
    let (xs, ys) = (f.measure().points(), g.measure().points());
    CostMatrix::from_fn(f.len(), g.len(), |i, j| {
        tlp_entry(
            xs.point(i),
            f.value(i),
            ys.point(j),
            g.value(j),
            params.p,
            inv,
        )
    })
}

/// `|x_i - y_j|_p^p` between two point sets.
pub fn ground_cost(xs: &Points, ys: &Points, p: f64) -> Result<CostMatrix> {
    if xs.dim() != ys.dim() {
        return invalid("point sets have different dimensions");
    }
    CostMatrix::from_fn(xs.len(), ys.len(), |i, j| {
        pth_power_dist(xs.point(i), ys.point(j), p)
    })
}

fn same_support(a: &DiscreteMeasure, b: &DiscreteMeasure) -> bool {
    a.len() == b.len()
        && a.dim() == b.dim()
        && a.points()
            .coords()
            .iter()
            .zip(b.points().coords())
            .all(|(x, y)| (x - y).abs() <= 1e-12)
        && a.weights()
            .iter()
            .zip(b.weights())
            .all(|(x, y)| (x - y).abs() <= 1e-12)
}

/// `(sum_i w_i |f(x_i) - g(x_i)|_p^p)^(1/p)` on a shared discretization.
pub fn lp_distance(f: &Signal, g: &Signal, p: f64) -> Result<f64> {
    check_compatible(f, g)?;
    if p < 1.0 || !p.is_finite() {
        return invalid(format!("exponent p must be >= 1, got {p}"));
    }
    if !same_support(f.measure(), g.measure()) {
        return invalid("L^p distance needs signals on the same support and weights");
    }
    let s: f64 = f
        .measure()
        .weights()
        .iter()
        .enumerate()
        .map(|(i, w)| w * pth_power_dist(f.value(i), g.value(i), p))
        .sum();
    Ok(s.powf(1.0 / p))
}

/// Abscissae of a 1-D signal, checked to be strictly increasing.
pub(crate) fn sorted_abscissae(f: &Signal) -> Result<Vec<f64>> {
    if f.dim() != 1 {
        return Err(TlpError::Unsupported(format!(
            "finite differences need a 1-D domain, got dimension {}",
            f.dim()
        )));
    }
    let xs = f.measure().points().coords().to_vec();
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("support must be sorted by coordinate");
    }
    Ok(xs)
}

/// Forward differences `(v[i+1] - v[i]) / (x[i+1] - x[i])`; the last point
/// repeats the previous difference.
fn forward_difference(xs: &[f64], v: &[f64], channels: usize) -> Vec<f64> {
    let n = xs.len();
    let mut out = vec![0.0; n * channels];
    for i in 0..n - 1 {
        let h = xs[i + 1] - xs[i];
        for c in 0..channels {
            out[i * channels + c] = (v[(i + 1) * channels + c] - v[i * channels + c]) / h;
        }
    }
    for c in 0..channels {
        out[(n - 1) * channels + c] = out[(n - 2) * channels + c];
    }
    out
}

/// Appends the first `k` discrete derivatives as extra channels.
///
/// Output channel block `r` holds `weights[r]` times the `r`-th derivative
/// (block 0 is the signal itself).
pub fn augment_with_derivatives(f: &Signal, k: usize, weights: &[f64]) -> Result<Signal> {
    let xs = sorted_abscissae(f)?;
    if k == 0 {
        return invalid("derivative order k must be at least 1");
    }
    if weights.len() != k + 1 || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return invalid(format!("need {} positive derivative weights", k + 1));
    }
    if xs.len() < k + 1 {
        return invalid(format!(
            "{} points cannot carry {k} finite differences",
            xs.len()
        ));
    }
    let m = f.channels();
    let mut blocks = vec![f.values().to_vec()];
    for _ in 0..k {
        let next = forward_difference(&xs, blocks.last().unwrap(), m);
        blocks.push(next);
    }
    let mk = m * (k + 1);
    let mut values = vec![0.0; f.len() * mk];
    for i in 0..f.len() {
        for (r, block) in blocks.iter().enumerate() {
            for c in 0..m {
                values[i * mk + r * m + c] = weights[r] * block[i * m + c];
            }
        }
    }
    f.with_values(mk, values)
}

/// The finite-difference derivative `f'` alone.
pub fn derivative_signal(f: &Signal) -> Result<Signal> {
    let xs = sorted_abscissae(f)?;
    if xs.len() < 2 {
        return invalid("a derivative needs at least two points");
    }
    f.with_values(
        f.channels(),
        forward_difference(&xs, f.values(), f.channels()),
    )
}

/// Largest finite-difference slope norm `max_i |f(x_{i+1}) - f(x_i)|_p / h_i`.
pub fn lipschitz_estimate(f: &Signal, p: f64) -> Result<f64> {
    let xs = sorted_abscissae(f)?;
    let mut best: f64 = 0.0;
    for i in 0..xs.len().saturating_sub(1) {
        let h = xs[i + 1] - xs[i];
        let d = pth_power_dist(f.value(i + 1), f.value(i), p).powf(1.0 / p);
        best = best.max(d / h);
    }
    Ok(best)
}

/// `(f - beta) / sum_i w_i (f(x_i) - beta)` with `beta` the dataset-wide minimum.
pub fn ot_normalize(dataset: &[Signal]) -> Result<Vec<Signal>> {
    if dataset.is_empty() {
        return invalid("cannot normalize an empty dataset");
    }
    if dataset.iter().any(|s| s.channels() != 1) {
        return Err(TlpError::Unsupported(
            "OT normalization is defined for scalar signals".into(),
        ));
    }
    let beta = dataset
        .iter()
        .flat_map(|s| s.values().iter().copied())
        .fold(f64::INFINITY, f64::min);
    dataset
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let shifted = s.map_values(|v| v - beta)?;
            let mass = shifted.integral()?;
            if mass <= 0.0 {
                return Err(TlpError::DegenerateInput(format!(
                    "signal {k} has zero mass after subtracting the dataset minimum {beta}"
                )));
            }
            shifted.map_values(|v| v / mass)
        })
        .collect()
}
