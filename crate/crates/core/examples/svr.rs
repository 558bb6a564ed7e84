//! Linear epsilon-SVR on n-gram features of synthetic headlines, scored on
//! held-out sentences.

use finsent::config::ExperimentConfig;
use finsent::eval::{evaluate, PredictionSet};
use finsent::pipeline::TrainedModel;
use finsent::synthetic;

pub fn run() -> finsent::Result<()> {
    let data = synthetic::headlines(200, 5);
    let (train, test) = data.split_at(160);
    let wv = synthetic::embeddings(32, 5);
    let cfg = ExperimentConfig::preset("best-svr")?;

    let model = TrainedModel::fit(&cfg, train, Some(&wv))?;
    let scores = model.predict(test, Some(&wv), true)?;
    let preds = PredictionSet::new(test.iter().map(|i| i.id.clone()).zip(scores))?;
    let report = evaluate(&preds, test, 5, false)?;
    println!(
        "C={} epsilon={}: metric1 {:.3} metric2 {:.3} metric3 {:.3} MAE {:.3}",
        cfg.svr.c, cfg.svr.epsilon, report.metric1, report.metric2, report.metric3, report.mae
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> finsent::Result<()> {
    run()
}
