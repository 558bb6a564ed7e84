use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mae, metric1, metric2, metric3, PredictionSet};
use crate::corpus::{FoldAssignment, HeadlineInstance};
use crate::error::{Error, Result};

/// Anything that can be fitted on one partition and score another.
pub trait Estimator: Sync {
    /// Predictions for `test`, in order.
    fn fit_predict(&self, train: &[HeadlineInstance], test: &[HeadlineInstance]) -> Result<Vec<f64>>;
}

impl<F> Estimator for F
where
    F: Fn(&[HeadlineInstance], &[HeadlineInstance]) -> Result<Vec<f64>> + Sync,
{
    fn fit_predict(&self, train: &[HeadlineInstance], test: &[HeadlineInstance]) -> Result<Vec<f64>> {
        self(train, test)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricSelector {
    #[default]
    Metric1,
    Metric2,
    Metric3,
    Mae,
}

impl MetricSelector {
    pub fn higher_is_better(self) -> bool {
        self != MetricSelector::Mae
    }

    pub fn score(self, preds: &PredictionSet, gold: &[HeadlineInstance]) -> Result<f64> {
        match self {
            MetricSelector::Metric1 => metric1(preds, gold),
            MetricSelector::Metric2 => metric2(preds, gold, false),
            MetricSelector::Metric3 => metric3(preds, gold),
            MetricSelector::Mae => mae(preds, gold),
        }
    }
}

impl std::str::FromStr for MetricSelector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "metric1" => Ok(MetricSelector::Metric1),
            "metric2" => Ok(MetricSelector::Metric2),
            "metric3" => Ok(MetricSelector::Metric3),
            "mae" => Ok(MetricSelector::Mae),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub metric: MetricSelector,
    pub per_fold: Vec<f64>,
    pub mean: f64,
}

/// Fits on k-1 folds and scores the held-out one, for every fold. Folds run
/// concurrently; the report is in fold order.
pub fn cross_validate(
    estimator: &impl Estimator,
    instances: &[HeadlineInstance],
    folds: &FoldAssignment,
    metric: MetricSelector,
) -> Result<CvReport> {
    let per_fold = (0..folds.k)
        .into_par_iter()
        .map(|fold| {
            let (train, test) = folds.split(instances, fold);
            if train.is_empty() || test.is_empty() {
                return Err(Error::InsufficientData {
                    needed: 1,
                    found: 0,
                });
            }
            let train: Vec<HeadlineInstance> = train.into_iter().cloned().collect();
            let test: Vec<HeadlineInstance> = test.into_iter().cloned().collect();
            let scores = estimator.fit_predict(&train, &test)?;
            if scores.len() != test.len() {
                return Err(Error::DimensionMismatch {
                    expected: test.len(),
                    found: scores.len(),
                });
            }
            let preds = PredictionSet::new(test.iter().map(|i| i.id.clone()).zip(scores))?;
            metric.score(&preds, &test)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
    Ok(CvReport {
        metric,
        per_fold,
        mean,
    })
}
