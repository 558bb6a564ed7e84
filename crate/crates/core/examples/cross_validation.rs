//! Sentence-grouped k-fold cross-validation over a small SVR grid.

use finsent::config::{CvGrid, ExperimentConfig};
use finsent::corpus::{group_by_sentence, kfold_split};
use finsent::eval::{cross_validate, MetricSelector};
use finsent::pipeline::ConfigEstimator;
use finsent::synthetic;
use finsent::tokenize::TokenizerKind;

pub fn run() -> finsent::Result<()> {
    let data = synthetic::headlines(120, 4);
    let folds = kfold_split(&group_by_sentence(&data), 5, 4)?;
    println!("fold sizes (sentences): {:?}", folds.fold_sizes());

    let grid = CvGrid {
        c: vec![0.01, 0.1, 1.0],
        epsilon: vec![0.01],
        tokenizers: vec![TokenizerKind::Rules],
        ngram_orders: vec![[1].into(), [1, 2].into()],
        replacements: vec![false],
        n_values: vec![10],
        aspect_features: vec![true],
    };
    for point in grid.expand(&ExperimentConfig::default())? {
        let estimator = ConfigEstimator {
            config: &point.config,
            embeddings: None,
        };
        let report = cross_validate(&estimator, &data, &folds, MetricSelector::Metric1)?;
        println!("{:<40} mean metric1 {:.3}", point.label, report.mean);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> finsent::Result<()> {
    run()
}
