//! The `train`, `predict` and `evaluate` subcommands driven in-process, with
//! the model directory written to a temporary location.

use finsent::cli::{cmd_evaluate, cmd_predict, cmd_train, DataArgs};
use finsent::config::ExperimentConfig;
use finsent::corpus::write_dataset_json;
use finsent::synthetic;

pub fn run() -> finsent::Result<()> {
    let dir = std::env::temp_dir().join(format!("finsent-e2e-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| finsent::Error::io(&dir, e))?;
    let data = synthetic::headlines(150, 6);
    write_dataset_json(&dir.join("train.json"), &data[..120])?;
    write_dataset_json(&dir.join("test.json"), &data[120..])?;
    let vectors = dir.join("vectors.bin");
    synthetic::embeddings(32, 6).write_word2vec_binary(&vectors)?;

    let mut cfg = ExperimentConfig::preset("best-svr")?;
    cfg.embedding_path = Some(vectors);
    let manifest = cmd_train(&cfg, &DataArgs::new(dir.join("train.json")), &dir.join("model"))?;
    println!("trained {:?}; files: {:?}", manifest.model_kind, manifest.files.keys().collect::<Vec<_>>());

    let test = DataArgs::new(dir.join("test.json"));
    let preds = cmd_predict(&dir.join("model"), &test, &dir.join("predictions.json"), true, None)?;
    let report = cmd_evaluate(&dir.join("predictions.json"), &test, 3, false)?;
    println!(
        "{} predictions: metric1 {:.3} metric2 {:.3} metric3 {:.3}",
        preds.len(),
        report.metric1,
        report.metric2,
        report.metric3
    );
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

#[allow(dead_code)]
fn main() -> finsent::Result<()> {
    run()
}
