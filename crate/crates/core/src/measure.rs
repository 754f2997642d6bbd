//! Discrete measures, signals on them, transport plans and raster images.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, TlpError};

/// Tolerance on the total mass of a probability measure.
pub const MASS_TOL: f64 = 1e-9;

/// Tolerance on plan marginals against the input weights.
pub const MARGINAL_TOL: f64 = 1e-7;

/// A finite set of points in `R^dim`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Points {
    dim: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid("point dimension must be positive");
        }
        if !coords.len().is_multiple_of(dim) {
            return invalid(format!(
                "coordinate buffer of length {} is not a multiple of dimension {dim}",
                coords.len()
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return invalid("point coordinates must be finite");
        }
        Ok(Points { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

/// A probability measure supported on finitely many points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    points: Points,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Weights must be non-negative and sum to one within [`MASS_TOL`].
    pub fn new(points: Points, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return invalid("measure support is empty");
        }
        if weights.len() != points.len() {
            return invalid(format!(
                "{} weights for {} support points",
                weights.len(),
                points.len()
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return invalid("measure weights must be finite and non-negative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return invalid(format!("measure weights sum to {total}, expected 1"));
        }
        Ok(DiscreteMeasure { points, weights })
    }

    pub fn uniform(points: Points) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return invalid("measure support is empty");
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.weights
            .iter()
            .all(|w| (w - u).abs() <= MASS_TOL * u.max(1.0))
    }
}

/// Uniform measure on the cell centers of a regular grid over `[0,1]^d`.
///
/// Axis 0 varies fastest, so a `width x height` image pixel `(i, j)` has
/// index `j * width + i` and sits at `((i + 0.5) / width, (j + 0.5) / height)`.
pub fn grid_measure(shape: &[usize]) -> Result<DiscreteMeasure> {
    if shape.is_empty() || shape.contains(&0) {
        return invalid(format!("grid shape {shape:?} must have positive extents"));
    }
    let d = shape.len();
    let n: usize = shape.iter().product();
    let mut coords = Vec::with_capacity(n * d);
    let mut idx = vec![0usize; d];
    for _ in 0..n {
        for (axis, &k) in idx.iter().enumerate() {
            coords.push((k as f64 + 0.5) / shape[axis] as f64);
        }
        for axis in 0..d {
            idx[axis] += 1;
            if idx[axis] < shape[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
    DiscreteMeasure::uniform(Points::new(d, coords)?)
}

pub fn uniform_grid_measure(width: usize, height: usize) -> Result<DiscreteMeasure> {
    grid_measure(&[width, height])
}

/// A vector-valued function sampled on the support of a measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    measure: DiscreteMeasure,
    channels: usize,
    values: Vec<f64>,
    grid: Option<Vec<usize>>,
    extent: Option<Vec<(f64, f64)>>,
}

impl Signal {
    pub fn new(measure: DiscreteMeasure, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return invalid("signal must have at least one channel");
        }
        if values.len() != measure.len() * channels {
            return invalid(format!(
                "{} values for {} points with {channels} channels",
                values.len(),
                measure.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("signal values must be finite");
        }
        Ok(Signal {
            measure,
            channels,
            values,
            grid: None,
            extent: None,
        })
    }

    /// Signal on the uniform cell-centered grid of the given shape.
    pub fn on_grid(shape: &[usize], channels: usize, values: Vec<f64>) -> Result<Self> {
        let mut s = Self::new(grid_measure(shape)?, channels, values)?;
        s.grid = Some(shape.to_vec());
        Ok(s)
    }

    /// Scalar signal on `n` uniform cells of `[0,1]`.
    pub fn from_samples(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::on_grid(&[n], 1, values)
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.channels..(i + 1) * self.channels]
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    pub fn grid(&self) -> Option<&[usize]> {
        self.grid.as_deref()
    }

    /// Original per-axis coordinate ranges before mapping into `[0,1]^d`.
    pub fn extent(&self) -> Option<&[(f64, f64)]> {
        self.extent.as_deref()
    }

    pub fn with_grid(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.len() != self.dim() || shape.iter().product::<usize>() != self.len() {
            return invalid(format!(
                "grid shape {shape:?} does not match {} points in dimension {}",
                self.len(),
                self.dim()
            ));
        }
        self.grid = Some(shape);
        Ok(self)
    }

    pub fn with_extent(mut self, extent: Vec<(f64, f64)>) -> Self {
        self.extent = Some(extent);
        self
    }

    pub fn with_values(&self, channels: usize, values: Vec<f64>) -> Result<Self> {
        let mut s = Signal::new(self.measure.clone(), channels, values)?;
        s.grid = self.grid.clone();
        s.extent = self.extent.clone();
        Ok(s)
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_values(self.channels, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `sum_i w_i f(x_i)` for a scalar signal.
    pub fn integral(&self) -> Result<f64> {
        if self.channels != 1 {
            return Err(TlpError::Unsupported(
                "integral is defined for scalar signals".into(),
            ));
        }
        Ok(self
            .measure
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum())
    }

    /// Per-channel `(min, max)` of the values.
    pub fn value_range(&self) -> Vec<(f64, f64)> {
        let mut r = vec![(f64::INFINITY, f64::NEG_INFINITY); self.channels];
        for chunk in self.values.chunks_exact(self.channels) {
            for (c, &v) in chunk.iter().enumerate() {
                r[c].0 = r[c].0.min(v);
                r[c].1 = r[c].1.max(v);
            }
        }
        r
    }
}

/// One non-zero entry of a transport plan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

/// A sparse coupling between two discrete measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    entries: Vec<PlanEntry>,
    source_size: usize,
    target_size: usize,
    is_permutation: bool,
}

impl TransportPlan {
    pub fn new(source_size: usize, target_size: usize, entries: Vec<PlanEntry>) -> Result<Self> {
        for e in &entries {
            if e.source >= source_size || e.target >= target_size {
                return invalid(format!(
                    "plan entry ({}, {}) outside {source_size} x {target_size}",
                    e.source, e.target
                ));
            }
            if !e.mass.is_finite() || e.mass < 0.0 {
                return invalid("plan masses must be finite and non-negative");
            }
        }
        let is_permutation = Self::permutation_shaped(source_size, target_size, &entries);
        Ok(TransportPlan {
            entries,
            source_size,
            target_size,
            is_permutation,
        })
    }

    /// Square, one entry per row and column, each carrying `1/n`.
    fn permutation_shaped(n: usize, m: usize, entries: &[PlanEntry]) -> bool {
        if n != m || entries.len() != n || n == 0 {
            return false;
        }
        let mass = 1.0 / n as f64;
        let mut rows = vec![false; n];
        let mut cols = vec![false; n];
        entries.iter().all(|e| {
            (e.mass - mass).abs() <= 1e-12 * mass
                && !std::mem::replace(&mut rows[e.source], true)
                && !std::mem::replace(&mut cols[e.target], true)
        })
    }

    /// The plan `(1/n) * P_sigma` of a permutation `sigma`.
    pub fn from_permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &j in perm {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return invalid("assignment is not a permutation");
            }
        }
        let mass = 1.0 / n as f64;
        let entries = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| PlanEntry {
                source: i,
                target: j,
                mass,
            })
            .collect();
        Ok(TransportPlan {
            entries,
            source_size: n,
            target_size: n,
            is_permutation: true,
        })
    }

    /// Dense row-major `n x m` plan; entries at or below `threshold` are dropped.
    pub fn from_dense(rows: usize, cols: usize, dense: &[f64], threshold: f64) -> Result<Self> {
        if dense.len() != rows * cols {
            return invalid("dense plan buffer has the wrong length");
        }
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > threshold)
            .map(|(k, &m)| PlanEntry {
                source: k / cols,
                target: k % cols,
                mass: m,
            })
            .collect();
        Self::new(rows, cols, entries)
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    pub fn is_permutation(&self) -> bool {
        self.is_permutation
    }

    /// The permutation when the plan came from an assignment.
    pub fn permutation(&self) -> Option<Vec<usize>> {
        if !self.is_permutation {
            return None;
        }
        let mut perm = vec![0; self.source_size];
        for e in &self.entries {
            perm[e.source] = e.target;
        }
        Some(perm)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    /// `sum_ij c_ij pi_ij` against a cost lookup.
    pub fn cost(&self, c: impl Fn(usize, usize) -> f64) -> f64 {
        self.entries
            .iter()
            .map(|e| c(e.source, e.target) * e.mass)
            .sum()
    }

    /// For each source index, the target receiving the largest mass
    /// (ties go to the smallest target index).
    pub fn argmax_targets(&self) -> Vec<Option<usize>> {
        let mut best: Vec<Option<(usize, f64)>> = vec![None; self.source_size];
        for e in &self.entries {
            let slot = &mut best[e.source];
            match slot {
                Some((t, m)) if *m > e.mass || (*m == e.mass && *t < e.target) => {}
                _ => *slot = Some((e.target, e.mass)),
            }
        }
        best.into_iter().map(|b| b.map(|(t, _)| t)).collect()
    }

    /// Largest marginal deviation from `(p, q)`.
    pub fn marginal_error(&self, p: &[f64], q: &[f64]) -> f64 {
        let (a, b) = marginals(self);
        a.iter()
            .zip(p)
            .chain(b.iter().zip(q))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Errors when the marginals deviate from `(p, q)` beyond [`MARGINAL_TOL`].
    pub fn check_marginals(&self, p: &[f64], q: &[f64]) -> Result<()> {
        if p.len() != self.source_size || q.len() != self.target_size {
            return invalid("marginal lengths do not match the plan");
        }
        let err = self.marginal_error(p, q);
        if err > MARGINAL_TOL {
            return Err(TlpError::Infeasible(format!(
                "plan marginals deviate from the weights by {err:.3e}"
            )));
        }
        Ok(())
    }
}

/// Row and column sums of a plan.
pub fn marginals(plan: &TransportPlan) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; plan.source_size];
    let mut b = vec![0.0; plan.target_size];
    for e in &plan.entries {
        a[e.source] += e.mass;
        b[e.target] += e.mass;
    }
    (a, b)
}

/// Image of a measure under an index map onto a target point set.
pub fn pushforward(
    measure: &DiscreteMeasure,
    map: &[usize],
    targets: &Points,
) -> Result<DiscreteMeasure> {
    if map.len() != measure.len() {
        return invalid(format!(
            "map has {} entries for a measure of size {}",
            map.len(),
            measure.len()
        ));
    }
    let mut w = vec![0.0; targets.len()];
    for (&t, &m) in map.iter().zip(measure.weights()) {
        if t >= targets.len() {
            return invalid(format!("map target {t} outside {} points", targets.len()));
        }
        w[t] += m;
    }
    DiscreteMeasure::new(targets.clone(), w)
}

/// Number of bins per channel and the channel ranges used by a histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramGrid {
    pub bins: usize,
    pub ranges: Vec<(f64, f64)>,
}

impl HistogramGrid {
    pub fn new(bins: usize, ranges: Vec<(f64, f64)>) -> Result<Self> {
        if bins == 0 {
            return invalid("histogram needs at least one bin");
        }
        if ranges
            .iter()
            .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return invalid("histogram ranges must be finite with lo <= hi");
        }
        Ok(HistogramGrid { bins, ranges })
    }

    /// Range covering all values of every given signal.
    pub fn covering(bins: usize, signals: &[&Signal]) -> Result<Self> {
        let m = match signals.first() {
            Some(s) => s.channels(),
            None => return invalid("no signals to bin"),
        };
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); m];
        for s in signals {
            if s.channels() != m {
                return invalid("signals have different channel counts");
            }
            for (r, (lo, hi)) in ranges.iter_mut().zip(s.value_range()) {
                r.0 = r.0.min(lo);
                r.1 = r.1.max(hi);
            }
        }
        Self::new(bins, ranges)
    }

    /// Grid node `k` on channel `c`.
    pub fn node(&self, c: usize, k: usize) -> f64 {
        let (lo, hi) = self.ranges[c];
        if self.bins == 1 {
            return 0.5 * (lo + hi);
        }
        lo + (hi - lo) * k as f64 / (self.bins - 1) as f64
    }

    /// Nearest grid node of `v` on channel `c`; values outside the range clamp.
    pub fn bin_of(&self, c: usize, v: f64) -> usize {
        let (lo, hi) = self.ranges[c];
        if self.bins == 1 || hi <= lo {
            return 0;
        }
        let t = (v - lo) / (hi - lo) * (self.bins - 1) as f64;
        t.round().clamp(0.0, (self.bins - 1) as f64) as usize
    }
}

/// The pushforward `f#mu` binned on a regular value grid.
///
/// Each value is assigned to its nearest grid node; empty bins are dropped
/// and the support is ordered by bin index with channel 0 varying fastest.
pub fn value_histogram(signal: &Signal, grid: &HistogramGrid) -> Result<DiscreteMeasure> {
    let m = signal.channels();
    if grid.ranges.len() != m {
        return invalid(format!(
            "histogram has {} channel ranges for a {m}-channel signal",
            grid.ranges.len()
        ));
    }
    let mut mass: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (i, &w) in signal.measure().weights().iter().enumerate() {
        let mut key: Vec<usize> = signal
            .value(i)
            .iter()
            .enumerate()
            .map(|(c, &v)| grid.bin_of(c, v))
            .collect();
        key.reverse();
        *mass.entry(key).or_insert(0.0) += w;
    }
    let mut coords = Vec::with_capacity(mass.len() * m);
    let mut weights = Vec::with_capacity(mass.len());
    for (key, w) in mass {
        if w <= 0.0 {
            continue;
        }
        for (c, &k) in key.iter().rev().enumerate() {
            coords.push(grid.node(c, k));
        }
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    DiscreteMeasure::new(Points::new(m, coords)?, weights)
}

/// A raster image with channel values in `[0,1]`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRaster {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl ImageRaster {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return invalid("image dimensions must be positive");
        }
        if pixels.len() != width * height * channels {
            return invalid(format!(
                "{} samples for a {width}x{height}x{channels} image",
                pixels.len()
            ));
        }
        if channels != 1 && channels != 3 {
            return invalid(format!("images have 1 or 3 channels, got {channels}"));
        }
        if pixels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return invalid("pixel values must lie in [0, 1]");
        }
        Ok(ImageRaster {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let k = (y * self.width + x) * self.channels;
        &self.pixels[k..k + self.channels]
    }

    pub fn pixel_at(&self, index: usize) -> &[f64] {
        &self.pixels[index * self.channels..(index + 1) * self.channels]
    }

    /// The image as a signal on the uniform grid over `[0,1]^2`.
    pub fn to_signal(&self) -> Result<Signal> {
        Signal::on_grid(
            &[self.width, self.height],
            self.channels,
            self.pixels.clone(),
        )
    }

    pub fn from_signal(signal: &Signal) -> Result<Self> {
        match signal.grid() {
            Some([w, h]) => Self::new(*w, *h, signal.channels(), signal.values().to_vec()),
            _ => Err(TlpError::Unsupported(
                "only signals on a 2-D grid convert to images".into(),
            )),
        }
    }
}
