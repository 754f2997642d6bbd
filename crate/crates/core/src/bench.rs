//! Seeded benchmark suites on the synthetic 1-D and 2-D classes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    classical_mds, expected_separation, knn_cv, n_star_table, relative_stress, CvReport,
    LabeledDataset, MdsEmbedding, PairNStar, SeparationReport,
};
use crate::cost::{ot_normalize, CostParams};
use crate::distance::{
    lambda_heuristic, pairwise_matrix, DistanceMatrix, DistanceSpec, Method, SolverSettings,
};
use crate::error::{invalid, Result};
use crate::measure::Signal;
use crate::synth::{dataset_1d, dataset_2d, OneDClassSpec};

/// A named distance used in a suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteMetric {
    pub name: String,
    pub spec: DistanceSpec,
}

/// `L^p`, OT and `TL^p` with lambda from the length-scale heuristic on `signals`.
pub fn standard_metrics(
    signals: &[Signal],
    p: f64,
    solver: &SolverSettings,
) -> Result<Vec<SuiteMetric>> {
    let lambda = lambda_heuristic(signals, p)?;
    let metric = |name: String, method, lambda| -> Result<SuiteMetric> {
        let spec = DistanceSpec::new(method, CostParams::finite(p, lambda)?).with_solver(*solver);
        Ok(SuiteMetric { name, spec })
    };
    Ok(vec![
        metric(format!("L{p}"), Method::Lp, 1.0)?,
        metric("OT".to_string(), Method::Ot, 1.0)?,
        metric(format!("TL{p}"), Method::Tlp, lambda)?,
    ])
}

/// Pairwise matrix, with OT metrics evaluated on the OT-normalized dataset.
pub fn suite_matrix(
    signals: &[Signal],
    labels: &[String],
    spec: &DistanceSpec,
) -> Result<DistanceMatrix> {
    if spec.method == Method::Ot {
        pairwise_matrix(&ot_normalize(signals)?, labels, spec)
    } else {
        pairwise_matrix(signals, labels, spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationStudy {
    pub base: OneDClassSpec,
    /// Increasing per-class sample sizes.
    pub sizes: Vec<usize>,
    pub resamples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeparation {
    pub metric: SuiteMetric,
    pub reports: BTreeMap<usize, SeparationReport>,
    pub n_star: Vec<PairNStar>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationStudyReport {
    pub study: SeparationStudy,
    pub metrics: Vec<MetricSeparation>,
}

impl SeparationStudyReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSeparation> {
        self.metrics.iter().find(|m| m.metric.name == name)
    }
}

impl MetricSeparation {
    pub fn n_star_of(&self, a: &str, b: &str) -> Option<&PairNStar> {
        self.n_star
            .iter()
            .find(|v| (v.a == a && v.b == b) || (v.a == b && v.b == a))
    }

    /// `kappa^2` against sample size for one class pair.
    pub fn kappa_squared(&self, a: &str, b: &str) -> Vec<(usize, f64)> {
        self.reports
            .iter()
            .filter_map(|(&n, r)| r.kappa_of(a, b).map(|k| (n, k * k)))
            .collect()
    }
}

/// Monte-Carlo separation statistics of the three 1-D classes.
///
/// Each resample draws `max(sizes)` members per class once; smaller sizes use
/// the leading members of that draw.
pub fn separation_study(
    study: &SeparationStudy,
    metrics: &[SuiteMetric],
) -> Result<SeparationStudyReport> {
    if study.sizes.is_empty() || study.sizes.windows(2).any(|w| w[0] >= w[1]) || study.sizes[0] == 0
    {
        return invalid(format!(
            "sample sizes must be positive and increasing, got {:?}",
            study.sizes
        ));
    }
    if study.resamples == 0 {
        return invalid("need at least one resample");
    }
    let max_n = *study.sizes.last().unwrap_or(&1);
    let pools = (0..study.resamples)
        .map(|r| dataset_1d(&study.base, max_n, study.seed.wrapping_add(r as u64)))
        .collect::<Result<Vec<LabeledDataset>>>()?;
    let classes = pools[0].classes().len();
    let mut out = Vec::new();
    for metric in metrics {
        let matrices = pools
            .iter()
            .map(|ds| suite_matrix(ds.signals(), ds.labels(), &metric.spec))
            .collect::<Result<Vec<_>>>()?;
        let mut reports = BTreeMap::new();
        for &n in &study.sizes {
            let items: Vec<usize> = (0..classes)
                .flat_map(|c| (0..n).map(move |i| c * max_n + i))
                .collect();
            let report = expected_separation(study.resamples, |r| {
                let sub = matrices[r].select(&items)?;
                let labels = sub.labels().to_vec();
                Ok((sub, labels))
            })?;
            reports.insert(n, report);
        }
        let n_star = n_star_table(&reports)?;
        out.push(MetricSeparation {
            metric: metric.clone(),
            reports,
            n_star,
        });
    }
    Ok(SeparationStudyReport {
        study: study.clone(),
        metrics: out,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationStudy {
    /// Members per class.
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub folds: usize,
    /// Largest MDS dimension of the stress curve.
    pub max_dims: usize,
    pub seed: u64,
}

impl Default for ClassificationStudy {
    fn default() -> Self {
        ClassificationStudy {
            count: 25,
            width: 32,
            height: 32,
            folds: 5,
            max_dims: 5,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricClassification {
    pub metric: SuiteMetric,
    pub cv: CvReport,
    pub mds: MdsEmbedding,
    /// Raw stress for `k = 1..=max_dims`.
    pub stress: Vec<f64>,
    /// Scale-free stress for `k = 1..=max_dims`.
    pub relative_stress: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationStudyReport {
    pub study: ClassificationStudy,
    pub metrics: Vec<MetricClassification>,
}

impl ClassificationStudyReport {
    pub fn metric(&self, name: &str) -> Option<&MetricClassification> {
        self.metrics.iter().find(|m| m.metric.name == name)
    }
}

/// 1NN cross-validation and MDS of the two 2-D classes under each metric.
/// The stored embedding is two-dimensional.
pub fn classification_study(
    study: &ClassificationStudy,
    metrics: &[SuiteMetric],
) -> Result<ClassificationStudyReport> {
    if study.max_dims < 2 {
        return invalid("max_dims must be at least 2");
    }
    let ds = dataset_2d(study.count, study.width, study.height, study.seed)?;
    let mut out = Vec::new();
    for metric in metrics {
        let m = suite_matrix(ds.signals(), ds.labels(), &metric.spec)?;
        let cv = knn_cv(ds.labels(), &m, study.folds, study.seed)?;
        let mut stress = Vec::new();
        let mut rel = Vec::new();
        let mut mds = None;
        for k in 1..=study.max_dims {
            let e = classical_mds(&m, k)?;
            rel.push(relative_stress(&m, &e.coordinates, k)?);
            stress.push(e.stress);
            if k == 2 {
                mds = Some(e);
            }
        }
        let mds = mds.expect("max_dims >= 2");
        out.push(MetricClassification {
            metric: metric.clone(),
            cv,
            mds,
            stress,
            relative_stress: rel,
        });
    }
    Ok(ClassificationStudyReport {
        study: study.clone(),
        metrics: out,
    })
}
