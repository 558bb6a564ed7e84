//! Scoring of sentiment predictions against gold labels.
//!
//! Three cosine-based metrics are reported side by side because they rank
//! systems differently:
//!
//! * metric 1: cosine over the answered instances, weighted by coverage
//!   (`answered / gold`);
//! * metric 2: mean over unique sentences of the cosine between predicted and
//!   gold aspect vectors, so a single-aspect sentence scores only the sign
//!   agreement;
//! * metric 3: cosine of the full prediction and gold vectors over answered
//!   instances, without coverage weighting.
//!
//! Any cosine with a zero-norm side counts as 0.

mod cv;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{group_by_sentence, HeadlineInstance};
use crate::embeddings::cosine_similarity;
use crate::error::{Error, Result};

pub use cv::{cross_validate, CvReport, Estimator, MetricSelector};

/// Default number of entries in [`EvalReport::top_errors`].
pub const DEFAULT_TOP_K: usize = 50;

/// Predicted scores keyed by instance id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub id: String,
    pub score: f64,
}

impl PredictionSet {
    pub fn new(pairs: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut scores = BTreeMap::new();
        for (record, (id, score)) in pairs.into_iter().enumerate() {
            if !score.is_finite() {
                return Err(Error::NonFinite("prediction scores"));
            }
            if scores.insert(id.clone(), score).is_some() {
                return Err(Error::Parse {
                    record,
                    message: format!("duplicate prediction for id {id:?}"),
                });
            }
        }
        Ok(PredictionSet { scores })
    }

    pub fn from_predictions(preds: &[Prediction]) -> Result<Self> {
        Self::new(preds.iter().map(|p| (p.id.clone(), p.score)))
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.scores.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.scores.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Entries in id order.
    pub fn to_predictions(&self) -> Vec<Prediction> {
        self.iter()
            .map(|(id, score)| Prediction {
                id: id.to_string(),
                score,
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_predictions()).expect("plain data serializes")
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let preds: Vec<Prediction> = serde_json::from_str(raw).map_err(|e| Error::Parse {
            record: 0,
            message: e.to_string(),
        })?;
        Self::from_predictions(&preds)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Gold instances keyed by id, in id order, with a checked prediction set.
struct Aligned<'a> {
    gold: BTreeMap<&'a str, f64>,
    preds: &'a PredictionSet,
}

impl<'a> Aligned<'a> {
    fn new(preds: &'a PredictionSet, gold: &'a [HeadlineInstance]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (record, inst) in gold.iter().enumerate() {
            let y = inst.gold_score.ok_or(Error::EmptyField {
                record,
                field: "sentiment",
            })?;
            map.insert(inst.id.as_str(), y);
        }
        if map.is_empty() {
            return Err(Error::EmptyDataset("gold set"));
        }
        if let Some((id, _)) = preds.iter().find(|(id, _)| !map.contains_key(id)) {
            return Err(Error::UnknownInstance(id.to_string()));
        }
        Ok(Aligned { gold: map, preds })
    }

    /// (prediction, gold) over answered instances in id order.
    fn answered(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (p, g): (Vec<f64>, Vec<f64>) = self
            .gold
            .iter()
            .filter_map(|(id, &y)| self.preds.get(id).map(|p| (p, y)))
            .unzip();
        if p.is_empty() {
            return Err(Error::NoAnswers);
        }
        Ok((p, g))
    }
}

/// Coverage-weighted cosine over answered instances.
pub fn metric1(preds: &PredictionSet, gold: &[HeadlineInstance]) -> Result<f64> {
    let aligned = Aligned::new(preds, gold)?;
    let (p, g) = aligned.answered()?;
    let coverage = p.len() as f64 / aligned.gold.len() as f64;
    Ok(cosine_similarity(&p, &g)? * coverage)
}

/// Mean per-sentence cosine. With `allow_partial`, a missing prediction
/// counts as a score of 0; otherwise it is an error.
pub fn metric2(preds: &PredictionSet, gold: &[HeadlineInstance], allow_partial: bool) -> Result<f64> {
    Ok(mean(&sentence_cosines(preds, gold, allow_partial)?.iter().map(|s| s.1).collect::<Vec<_>>()))
}

/// (sentence key, cosine) for every unique sentence, in order of first
/// appearance.
pub fn sentence_cosines(
    preds: &PredictionSet,
    gold: &[HeadlineInstance],
    allow_partial: bool,
) -> Result<Vec<(String, f64)>> {
    let aligned = Aligned::new(preds, gold)?;
    if preds.is_empty() {
        return Err(Error::NoAnswers);
    }
    group_by_sentence(gold)
        .into_iter()
        .map(|group| {
            let mut p = Vec::with_capacity(group.members.len());
            let mut g = Vec::with_capacity(group.members.len());
            for id in &group.members {
                let score = match preds.get(id) {
                    Some(s) => s,
                    None if allow_partial => 0.0,
                    None => return Err(Error::MissingPrediction(id.clone())),
                };
                p.push(score);
                g.push(aligned.gold[id.as_str()]);
            }
            Ok((group.sentence_key, group_cosine(&p, &g)?))
        })
        .collect()
}

/// Cosine of one aspect vector pair. A single aspect reduces to the sign
/// product, computed directly so it is exact.
fn group_cosine(p: &[f64], g: &[f64]) -> Result<f64> {
    if let ([a], [b]) = (p, g) {
        return Ok(sign(*a) * sign(*b));
    }
    cosine_similarity(p, g)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Full-vector cosine over answered instances.
pub fn metric3(preds: &PredictionSet, gold: &[HeadlineInstance]) -> Result<f64> {
    let (p, g) = Aligned::new(preds, gold)?.answered()?;
    cosine_similarity(&p, &g)
}

/// Mean absolute error over answered instances.
pub fn mae(preds: &PredictionSet, gold: &[HeadlineInstance]) -> Result<f64> {
    let (p, g) = Aligned::new(preds, gold)?.answered()?;
    Ok(mean(&p.iter().zip(&g).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>()))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopError {
    pub id: String,
    pub abs_error: f64,
    /// Whether the instance's sentence carries more than one aspect.
    pub multi_aspect: bool,
}

/// The `k` answered instances with the largest absolute error, descending,
/// ties broken by id.
pub fn top_errors(preds: &PredictionSet, gold: &[HeadlineInstance], k: usize) -> Result<Vec<TopError>> {
    let aligned = Aligned::new(preds, gold)?;
    let multi = gold_groups(gold);
    let mut errors: Vec<TopError> = aligned
        .gold
        .iter()
        .filter_map(|(&id, &y)| {
            preds.get(id).map(|p| TopError {
                id: id.to_string(),
                abs_error: (p - y).abs(),
                multi_aspect: multi[id],
            })
        })
        .collect();
    errors.sort_by(|a, b| b.abs_error.total_cmp(&a.abs_error).then_with(|| a.id.cmp(&b.id)));
    errors.truncate(k);
    Ok(errors)
}

fn gold_groups(gold: &[HeadlineInstance]) -> HashMap<String, bool> {
    group_by_sentence(gold)
        .into_iter()
        .flat_map(|g| {
            let multi = g.is_multi_aspect();
            g.members.into_iter().map(move |id| (id, multi))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric1: f64,
    pub metric2: f64,
    pub metric3: f64,
    pub mae: f64,
    pub n_answered: usize,
    pub n_total: usize,
    pub top_errors: Vec<TopError>,
    /// Per-sentence metric 2 contributions; not part of the JSON report.
    #[serde(skip)]
    pub per_sentence: Vec<(String, f64)>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Computes every metric. Metric 2 follows the `allow_partial` policy of
/// [`metric2`].
pub fn evaluate(
    preds: &PredictionSet,
    gold: &[HeadlineInstance],
    top_k: usize,
    allow_partial: bool,
) -> Result<EvalReport> {
    let per_sentence = sentence_cosines(preds, gold, allow_partial)?;
    let n_total = Aligned::new(preds, gold)?.gold.len();
    Ok(EvalReport {
        metric1: metric1(preds, gold)?,
        metric2: mean(&per_sentence.iter().map(|s| s.1).collect::<Vec<_>>()),
        metric3: metric3(preds, gold)?,
        mae: mae(preds, gold)?,
        n_answered: preds.len(),
        n_total,
        top_errors: top_errors(preds, gold, top_k)?,
        per_sentence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: &str, sentence: &str, y: f64) -> HeadlineInstance {
        HeadlineInstance::new(id, "Acme", sentence, Some(y))
    }

    fn preds(pairs: &[(&str, f64)]) -> PredictionSet {
        PredictionSet::new(pairs.iter().map(|(i, s)| (i.to_string(), *s))).unwrap()
    }

    fn four() -> Vec<HeadlineInstance> {
        vec![inst("a", "s1", 0.5), inst("b", "s2", -0.3), inst("c", "s3", 0.8), inst("d", "s4", -0.1)]
    }

    #[test]
    fn perfect_predictions() {
        let gold = four();
        let p = preds(&[("a", 0.5), ("b", -0.3), ("c", 0.8), ("d", -0.1)]);
        let r = evaluate(&p, &gold, 50, false).unwrap();
        assert!((r.metric1 - 1.0).abs() < 1e-12);
        assert_eq!(r.metric2, 1.0);
        assert!((r.metric3 - 1.0).abs() < 1e-12);
        assert_eq!(r.mae, 0.0);
    }

    #[test]
    fn half_coverage_halves_metric1() {
        let gold = four();
        let p = preds(&[("a", 0.5), ("b", -0.3)]);
        assert!((metric1(&p, &gold).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn antipodal_is_minus_one() {
        let gold = four();
        let p = preds(&[("a", -0.5), ("b", 0.3), ("c", -0.8), ("d", 0.1)]);
        assert!((metric1(&p, &gold).unwrap() + 1.0).abs() < 1e-12);
        assert!((metric3(&p, &gold).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_example_scores_minus_one() {
        let gold = vec![inst("a", "Acme shares edge up", 0.01)];
        assert_eq!(metric2(&preds(&[("a", -0.01)]), &gold, false).unwrap(), -1.0);
    }

    #[test]
    fn two_aspect_identical() {
        let gold = vec![inst("a", "s", 0.5), inst("b", "s", -0.5)];
        let c = metric2(&preds(&[("a", 0.5), ("b", -0.5)]), &gold, false).unwrap();
        assert!((c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn contributions_average() {
        let gold = vec![inst("a", "s1", 0.4), inst("b", "s2", 0.4)];
        assert_eq!(metric2(&preds(&[("a", 0.1), ("b", -0.2)]), &gold, false).unwrap(), 0.0);
    }

    #[test]
    fn one_flipped_sign_of_four() {
        let gold: Vec<_> = ["a", "b", "c", "d"].iter().map(|i| inst(i, i, 0.5)).collect();
        let p = preds(&[("a", 0.5), ("b", 0.5), ("c", 0.5), ("d", -0.5)]);
        assert!((metric3(&p, &gold).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn scaled_predictions_keep_metric3() {
        let gold = four();
        let p = preds(&[("a", 0.2), ("b", 0.1), ("c", -0.4), ("d", 0.3)]);
        let q = preds(&[("a", 0.1), ("b", 0.05), ("c", -0.2), ("d", 0.15)]);
        assert!((metric3(&p, &gold).unwrap() - metric3(&q, &gold).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mae_examples() {
        let gold = vec![inst("a", "s", -0.1)];
        assert!((mae(&preds(&[("a", 0.2)]), &gold).unwrap() - 0.3).abs() < 1e-15);
        let gold = vec![inst("a", "s1", 1.0), inst("b", "s2", -1.0)];
        assert_eq!(mae(&preds(&[("a", 0.0), ("b", 0.0)]), &gold).unwrap(), 1.0);
    }

    #[test]
    fn zero_prediction_contributes_zero() {
        let gold = vec![inst("a", "s", 0.3)];
        assert_eq!(metric2(&preds(&[("a", 0.0)]), &gold, false).unwrap(), 0.0);
        assert_eq!(metric3(&preds(&[("a", 0.0)]), &gold).unwrap(), 0.0);
    }

    #[test]
    fn top_errors_ranked() {
        let gold = vec![inst("a", "s", 0.0), inst("b", "s", 0.0), inst("c", "t", 0.0)];
        let p = preds(&[("a", 0.9), ("b", 0.1), ("c", 0.5)]);
        let top = top_errors(&p, &gold, 2).unwrap();
        assert_eq!(top.iter().map(|t| t.id.as_str()).collect::<Vec<_>>(), ["a", "c"]);
        assert!(top[0].multi_aspect);
        assert!(!top[1].multi_aspect);
        assert_eq!(top_errors(&p, &gold, 10).unwrap().len(), 3);
        assert!(top_errors(&p, &gold, 10).unwrap()[2].multi_aspect);
    }

    #[test]
    fn top_error_ties_by_id() {
        let gold = vec![inst("b", "s1", 0.0), inst("a", "s2", 0.0)];
        let p = preds(&[("a", 0.5), ("b", 0.5)]);
        let top = top_errors(&p, &gold, 2).unwrap();
        assert_eq!(top[0].id, "a");
    }

    #[test]
    fn error_cases() {
        let gold = four();
        assert!(matches!(metric1(&PredictionSet::default(), &gold), Err(Error::NoAnswers)));
        assert!(matches!(metric3(&PredictionSet::default(), &gold), Err(Error::NoAnswers)));
        assert!(matches!(
            metric2(&preds(&[("a", 0.5)]), &gold, false),
            Err(Error::MissingPrediction(_))
        ));
        assert!(matches!(metric1(&preds(&[("zz", 0.5)]), &gold), Err(Error::UnknownInstance(_))));
        assert!(PredictionSet::new([("a".to_string(), f64::NAN)]).is_err());
        assert!(PredictionSet::new([("a".to_string(), 0.1), ("a".to_string(), 0.2)]).is_err());
    }

    #[test]
    fn partial_metric2_scores_missing_as_zero() {
        let gold = vec![inst("a", "s1", 0.5), inst("b", "s2", 0.5)];
        assert_eq!(metric2(&preds(&[("a", 0.5)]), &gold, true).unwrap(), 0.5);
    }

    #[test]
    fn report_json_shape() {
        let gold = four();
        let p = preds(&[("a", 0.5), ("b", -0.3), ("c", 0.8), ("d", -0.1)]);
        let r = evaluate(&p, &gold, 2, false).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["mae", "metric1", "metric2", "metric3", "n_answered", "n_total", "top_errors"]);
        assert_eq!(v["top_errors"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn predictions_json_round_trip() {
        let p = preds(&[("b", -0.25), ("a", 0.5)]);
        let back = PredictionSet::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        assert!(p.to_json().find("\"a\"").unwrap() < p.to_json().find("\"b\"").unwrap());
    }
}
