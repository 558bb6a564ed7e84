//! Both BLSTM variants on a small synthetic corpus: SLSTM for a fixed number
//! of epochs, ELSTM with early stopping on a held-out split.

use finsent::blstm::{split_validation, train_elstm, train_slstm, BlstmConfig};
use finsent::synthetic;
use finsent::tokenize::Tokenizer;

pub fn run() -> finsent::Result<()> {
    let data = synthetic::headlines(80, 2);
    let wv = synthetic::embeddings(24, 2);
    let tokenizer = Tokenizer::default();

    let slstm = BlstmConfig {
        embed_dim: 24,
        hidden: 8,
        ..BlstmConfig::slstm()
    };
    let model = train_slstm(&data, &wv, &tokenizer, &slstm)?;
    let mse = &model.history.train_mse;
    println!("SLSTM: training MSE {:.4} -> {:.4} over {} epochs", mse[0], mse[mse.len() - 1], mse.len());

    let elstm = BlstmConfig {
        embed_dim: 24,
        hidden: 8,
        epochs: 30,
        patience: 5,
        ..BlstmConfig::elstm()
    };
    let (train, val) = split_validation(&data, elstm.val_fraction, 9)?;
    let model = train_elstm(&train, &val, &wv, &tokenizer, &elstm)?;
    let h = &model.history;
    println!(
        "ELSTM: ran {} epochs, kept epoch {} (validation MSE {:.4})",
        h.epochs_run,
        h.best_epoch,
        h.val_mse[h.best_epoch - 1]
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> finsent::Result<()> {
    run()
}
