//! Class separation statistics, classical MDS and nearest-neighbour
//! cross-validation over a precomputed distance matrix.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{lipschitz_estimate, lp_distance, CostParams};
use crate::distance::{tlp_transport, DistanceMatrix, SolverSettings};
use crate::error::{invalid, Result, TlpError};
use crate::measure::Signal;

pub const DEFAULT_RESAMPLES: usize = 32;

/// Signals with one class label each.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    signals: Vec<Signal>,
    labels: Vec<String>,
}

impl LabeledDataset {
    pub fn new(signals: Vec<Signal>, labels: Vec<String>) -> Result<Self> {
        if signals.len() != labels.len() {
            return invalid(format!(
                "{} signals but {} labels",
                signals.len(),
                labels.len()
            ));
        }
        Ok(LabeledDataset { signals, labels })
    }

    pub fn signals(&self) -> &[Signal] {
        &self.signals
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    /// Distinct labels in sorted order.
    pub fn classes(&self) -> Vec<String> {
        self.labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Indices of the members of each class, in `classes()` order.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        class_members(&self.labels).1
    }
}

fn class_members(labels: &[String]) -> (Vec<String>, Vec<Vec<usize>>) {
    let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        map.entry(l.as_str()).or_default().push(i);
    }
    let names = map.keys().map(|s| s.to_string()).collect();
    (names, map.into_values().collect())
}

/// `max(sup_a inf_b d, sup_b inf_a d)` over members of two classes.
pub fn hausdorff_between(matrix: &DistanceMatrix, a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return invalid("Hausdorff distance needs two nonempty classes");
    }
    let directed = |from: &[usize], to: &[usize]| {
        from.iter()
            .map(|&i| {
                to.iter()
                    .map(|&j| matrix.get(i, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

/// Smallest `r` connecting the within-class `r`-graph: the longest edge of a
/// minimum spanning tree (Prim, dense).
pub fn coverage_radius(matrix: &DistanceMatrix, class: &[usize]) -> Result<f64> {
    let n = class.len();
    if n == 0 {
        return invalid("coverage radius of an empty class");
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut radius: f64 = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (u == usize::MAX || best[v] < best[u]) {
                u = v;
            }
        }
        in_tree[u] = true;
        radius = radius.max(best[u]);
        for v in 0..n {
            if !in_tree[v] {
                best[v] = best[v].min(matrix.get(class[u], class[v]));
            }
        }
    }
    Ok(radius)
}

/// `hausdorff / max(radius_a, radius_b)`.
pub fn kappa(radius_a: f64, radius_b: f64, hausdorff: f64) -> Result<f64> {
    let r = radius_a.max(radius_b);
    if r == 0.0 {
        if hausdorff == 0.0 {
            return Err(TlpError::DegenerateInput(
                "separation ratio undefined: zero radii and zero Hausdorff distance".into(),
            ));
        }
        return Ok(f64::INFINITY);
    }
    Ok(hausdorff / r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "n")]
pub enum NStar {
    Reached(usize),
    /// No tested sample size reached `kappa >= 1`; carries the largest one.
    NotReached(usize),
}

impl NStar {
    /// Ordering key in which `NotReached` sorts after every `Reached`.
    pub fn rank(self) -> (u8, usize) {
        match self {
            NStar::Reached(n) => (0, n),
            NStar::NotReached(n) => (1, n),
        }
    }
}

/// Smallest sample size with `kappa >= 1`.
pub fn n_star(curve: &BTreeMap<usize, f64>) -> Result<NStar> {
    let max_n = match curve.keys().next_back() {
        Some(&n) => n,
        None => return invalid("empty kappa curve"),
    };
    Ok(curve
        .iter()
        .find(|(_, &k)| k >= 1.0)
        .map_or(NStar::NotReached(max_n), |(&n, _)| NStar::Reached(n)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub a: String,
    pub b: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairNStar {
    pub a: String,
    pub b: String,
    pub n_star: NStar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub classes: Vec<String>,
    pub hausdorff: Vec<PairValue>,
    pub coverage_radius: Vec<f64>,
    pub kappa: Vec<PairValue>,
    pub n_star: Option<Vec<PairNStar>>,
    pub resamples: usize,
}

impl SeparationReport {
    pub fn kappa_of(&self, a: &str, b: &str) -> Option<f64> {
        self.kappa
            .iter()
            .find(|v| (v.a == a && v.b == b) || (v.a == b && v.b == a))
            .map(|v| v.value)
    }
}

fn raw_separation(
    matrix: &DistanceMatrix,
    labels: &[String],
) -> Result<(Vec<String>, Vec<f64>, Vec<f64>)> {
    if labels.len() != matrix.len() {
        return invalid(format!(
            "{} labels for a {}-item matrix",
            labels.len(),
            matrix.len()
        ));
    }
    let (names, members) = class_members(labels);
    if names.len() < 2 {
        return invalid("separation statistics need at least two classes");
    }
    let radii = members
        .iter()
        .map(|m| coverage_radius(matrix, m))
        .collect::<Result<Vec<_>>>()?;
    let mut hd = Vec::new();
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            hd.push(hausdorff_between(matrix, &members[i], &members[j])?);
        }
    }
    Ok((names, hd, radii))
}

fn assemble(
    names: Vec<String>,
    hd: Vec<f64>,
    radii: Vec<f64>,
    resamples: usize,
) -> Result<SeparationReport> {
    let mut hausdorff = Vec::new();
    let mut kappas = Vec::new();
    let mut k = 0;
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let pair = |value| PairValue {
                a: names[i].clone(),
                b: names[j].clone(),
                value,
            };
            hausdorff.push(pair(hd[k]));
            kappas.push(pair(kappa(radii[i], radii[j], hd[k])?));
            k += 1;
        }
    }
    Ok(SeparationReport {
        classes: names,
        hausdorff,
        coverage_radius: radii,
        kappa: kappas,
        n_star: None,
        resamples,
    })
}

/// Separation statistics of a single labelled sample.
pub fn separation_report(matrix: &DistanceMatrix, labels: &[String]) -> Result<SeparationReport> {
    let (names, hd, radii) = raw_separation(matrix, labels)?;
    assemble(names, hd, radii, 1)
}

/// Monte-Carlo separation: Hausdorff distances and radii are averaged over
/// `resamples` independent draws before forming `kappa`.
///
/// `sample(r)` returns the distance matrix and labels of draw `r`.
pub fn expected_separation<F>(resamples: usize, sample: F) -> Result<SeparationReport>
where
    F: Fn(usize) -> Result<(DistanceMatrix, Vec<String>)> + Sync,
{
    if resamples == 0 {
        return invalid("need at least one resample");
    }
    let draws = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let (m, labels) = sample(r)?;
            raw_separation(&m, &labels)
        })
        .collect::<Result<Vec<_>>>()?;
    let names = draws[0].0.clone();
    if draws.iter().any(|d| d.0 != names) {
        return invalid("resamples disagree on the class set");
    }
    let mean = |get: &dyn Fn(&(Vec<String>, Vec<f64>, Vec<f64>)) -> &Vec<f64>| {
        let len = get(&draws[0]).len();
        (0..len)
            .map(|k| draws.iter().map(|d| get(d)[k]).sum::<f64>() / resamples as f64)
            .collect::<Vec<f64>>()
    };
    let hd = mean(&|d| &d.1);
    let radii = mean(&|d| &d.2);
    assemble(names, hd, radii, resamples)
}

/// N* per class pair from reports computed at increasing sample sizes.
pub fn n_star_table(reports: &BTreeMap<usize, SeparationReport>) -> Result<Vec<PairNStar>> {
    let first = match reports.values().next() {
        Some(r) => r,
        None => return invalid("no separation reports"),
    };
    first
        .kappa
        .iter()
        .map(|pv| {
            let curve: BTreeMap<usize, f64> = reports
                .iter()
                .map(|(&n, r)| {
                    r.kappa_of(&pv.a, &pv.b).map(|k| (n, k)).ok_or_else(|| {
                        TlpError::InvalidArgument(format!("pair {}/{} missing", pv.a, pv.b))
                    })
                })
                .collect::<Result<_>>()?;
            Ok(PairNStar {
                a: pv.a.clone(),
                b: pv.b.clone(),
                n_star: n_star(&curve)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdsEmbedding {
    /// Row-major `n x k`.
    pub coordinates: Vec<f64>,
    pub n: usize,
    pub k: usize,
    /// The `k` leading eigenvalues, descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Number of trailing coordinate columns forced to zero.
    pub zero_columns: usize,
    pub stress: f64,
}

impl MdsEmbedding {
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coordinates[i * self.k..(i + 1) * self.k]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Classical MDS: top `k` eigenpairs of `-1/2 J D^2 J`.
pub fn classical_mds(matrix: &DistanceMatrix, k: usize) -> Result<MdsEmbedding> {
    let n = matrix.len();
    if k == 0 || k >= n {
        return invalid(format!("embedding dimension must lie in 1..{n}, got {k}"));
    }
    let d2 = DMatrix::from_fn(n, n, |i, j| matrix.get(i, j).powi(2));
    let row_mean: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let total_mean = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (d2[(i, j)] - row_mean[i] - row_mean[j] + total_mean)
    });
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let scale = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let negative_mass: f64 = eig
        .eigenvalues
        .iter()
        .filter(|&&v| v < -1e-9 * scale)
        .map(|v| -v)
        .sum();
    if negative_mass > 0.0 {
        warn!("distance matrix is not Euclidean: negative eigenvalues of total {negative_mass:.3e} clamped");
    }
    let mut eigenvalues = Vec::with_capacity(k);
    let mut coordinates = vec![0.0; n * k];
    let mut zero_columns = 0;
    for (c, &idx) in order.iter().take(k).enumerate() {
        let lam = eig.eigenvalues[idx];
        let lam = if lam > 1e-12 * scale { lam } else { 0.0 };
        if lam == 0.0 {
            zero_columns += 1;
        }
        eigenvalues.push(lam);
        let s = lam.sqrt();
        for i in 0..n {
            coordinates[i * k + c] = eig.eigenvectors[(i, idx)] * s;
        }
    }
    let mut out = MdsEmbedding {
        coordinates,
        n,
        k,
        eigenvalues,
        zero_columns,
        stress: 0.0,
    };
    out.stress = stress(matrix, &out.coordinates, k).unwrap_or(f64::NAN);
    Ok(out)
}

/// `sum (|x_i - x_j|^2 - D_ij^2)^2 / sum |x_i - x_j|^2` over ordered pairs.
pub fn stress(matrix: &DistanceMatrix, coordinates: &[f64], k: usize) -> Result<f64> {
    let n = matrix.len();
    if k == 0 || coordinates.len() != n * k {
        return invalid(format!(
            "expected {n} x {k} coordinates, got {} values",
            coordinates.len()
        ));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let e = sq_dist(
                &coordinates[i * k..(i + 1) * k],
                &coordinates[j * k..(j + 1) * k],
            );
            num += (e - matrix.get(i, j).powi(2)).powi(2);
            den += e;
        }
    }
    if den == 0.0 {
        return Err(TlpError::DegenerateInput(
            "all embedded points coincide".into(),
        ));
    }
    Ok(num / den)
}

/// [`stress`] of the matrix rescaled to unit mean squared distance, so that
/// values are comparable across metrics.
pub fn relative_stress(matrix: &DistanceMatrix, coordinates: &[f64], k: usize) -> Result<f64> {
    let n = matrix.len();
    if n < 2 {
        return Err(TlpError::DegenerateInput(
            "stress needs at least two items".into(),
        ));
    }
    let mean_sq = matrix.values().iter().map(|d| d * d).sum::<f64>() / (n * (n - 1)) as f64;
    if mean_sq == 0.0 {
        return Err(TlpError::DegenerateInput("all distances are zero".into()));
    }
    Ok(stress(matrix, coordinates, k)? / mean_sq)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub per_fold_error: Vec<f64>,
    pub mean_error: f64,
    pub seed: u64,
}

impl CvReport {
    pub fn accuracy(&self) -> f64 {
        1.0 - self.mean_error
    }
}

/// Stratified fold index of every item: each class is shuffled and dealt
/// round-robin.
pub fn stratified_folds(labels: &[String], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return invalid(format!("need at least 2 folds, got {folds}"));
    }
    let (names, members) = class_members(labels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    for (name, mut m) in names.iter().zip(members) {
        if m.len() < folds {
            return invalid(format!(
                "class '{name}' has {} members, fewer than {folds} folds",
                m.len()
            ));
        }
        m.shuffle(&mut rng);
        for (r, i) in m.into_iter().enumerate() {
            fold_of[i] = r % folds;
        }
    }
    Ok(fold_of)
}

/// Index of the nearest item among `candidates`; ties go to the smaller index.
pub fn nearest(matrix: &DistanceMatrix, i: usize, candidates: &[usize]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &j in candidates {
        let d = matrix.get(i, j);
        match best {
            Some((bd, bj)) if d > bd || (d == bd && j > bj) => {}
            _ => best = Some((d, j)),
        }
    }
    best.map(|(_, j)| j)
}

/// Stratified k-fold cross-validation of the 1-nearest-neighbour classifier.
pub fn knn_cv(
    labels: &[String],
    matrix: &DistanceMatrix,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    if labels.len() != matrix.len() {
        return invalid(format!(
            "{} labels for a {}-item matrix",
            labels.len(),
            matrix.len()
        ));
    }
    let fold_of = stratified_folds(labels, folds, seed)?;
    let per_fold_error = (0..folds)
        .map(|f| {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] == f).collect();
            let wrong = test
                .iter()
                .filter(|&&i| nearest(matrix, i, &train).map(|j| &labels[j]) != Some(&labels[i]))
                .count();
            wrong as f64 / test.len() as f64
        })
        .collect::<Vec<f64>>();
    let mean_error = per_fold_error.iter().sum::<f64>() / folds as f64;
    Ok(CvReport {
        folds,
        per_fold_error,
        mean_error,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// `d_TL^p(f, g)^p`.
    pub lhs: f64,
    /// `eps^(p-1) ||f - g||^p`, or `||f - g||^p` when `p = 1`.
    pub rhs: f64,
    /// Lipschitz factor `min(Lip(f)^p, Lip(g)^p)`.
    pub kappa: f64,
    /// For `p = 1`, whether `lambda < 1 / kappa` so that equality is expected.
    pub equality_expected: bool,
    pub holds: bool,
}

/// Checks the lower bound of TL^p by L^p scaled through the Lipschitz
/// constant of the signals.
///
/// For `p > 1` the claim is `d^p >= eps^(p-1) ||f-g||^p` with
/// `eps = 1 / (1 + (lambda kappa)^(1/(p-1)))`; for `p = 1` and
/// `lambda < 1/kappa` it is `d = ||f-g||_1`.
pub fn prop2_bound_check(f: &Signal, g: &Signal, lambda: f64, p: f64) -> Result<BoundCheck> {
    let params = CostParams::finite(p, lambda)?;
    let kappa = lipschitz_estimate(f, p)?
        .powf(p)
        .min(lipschitz_estimate(g, p)?.powf(p));
    let lhs = tlp_transport(f, g, &params, &SolverSettings::exact())?.cost;
    let lp = lp_distance(f, g, p)?.powf(p);
    let tol = 1e-9 * lp.max(1e-12);
    if p == 1.0 {
        let equality_expected = lambda * kappa < 1.0;
        let holds = if equality_expected {
            (lhs - lp).abs() <= tol.max(1e-12)
        } else {
            lhs <= lp + tol
        };
        return Ok(BoundCheck {
            lhs,
            rhs: lp,
            kappa,
            equality_expected,
            holds,
        });
    }
    let eps = 1.0 / (1.0 + (lambda * kappa).powf(1.0 / (p - 1.0)));
    let rhs = eps.powf(p - 1.0) * lp;
    Ok(BoundCheck {
        lhs,
        rhs,
        kappa,
        equality_expected: false,
        holds: lhs >= rhs - tol,
    })
}
