mod common;

use rand::Rng;

use common::rng;
use finsent::blstm::{
    backward, forward, fit, prepare_examples, read_model, split_validation, train_elstm, train_slstm, write_model,
    BlstmConfig, DropoutMasks, PaddedSequence, Params, Variant,
};
use finsent::synthetic;
use finsent::tokenize::Tokenizer;

fn random_sequence(r: &mut impl Rng, max_len: usize, dim: usize) -> PaddedSequence<f64> {
    let mut seq = PaddedSequence::zeros(max_len, dim);
    let valid = r.gen_range(1..=max_len);
    for v in &mut seq.matrix[..valid * dim] {
        *v = r.gen_range(-1.0..1.0);
    }
    seq.valid_len = valid;
    seq
}

/// Batch MSE with the given masks held fixed.
fn masked_loss(params: &Params<f64>, batch: &[(PaddedSequence<f64>, f64)], masks: &[DropoutMasks<f64>]) -> f64 {
    let sum: f64 = batch
        .iter()
        .zip(masks)
        .map(|((s, y), m)| {
            let score = forward(params, s, m.clone()).unwrap().score;
            (score - y) * (score - y)
        })
        .sum();
    sum / batch.len() as f64
}

#[test]
fn gradient_check_holds_under_fixed_dropout_masks() {
    for variant in [Variant::Slstm, Variant::Elstm] {
        for seed in 0..4 {
            let mut r = rng(70 + seed);
            let (hidden, max_len, dim) = (3, 4, 5);
            let params = Params::<f64>::init(hidden, dim, &mut r);
            let batch: Vec<(PaddedSequence<f64>, f64)> =
                (0..2).map(|_| (random_sequence(&mut r, max_len, dim), r.gen_range(-1.0..1.0))).collect();
            let masks: Vec<DropoutMasks<f64>> =
                batch.iter().map(|_| variant.dropout().sample(max_len, dim, hidden, &mut r)).collect();
            let caches: Vec<_> = batch
                .iter()
                .zip(&masks)
                .map(|((s, _), m)| forward(&params, s, m.clone()).unwrap())
                .collect();
            let targets: Vec<f64> = batch.iter().map(|b| b.1).collect();
            let analytic = backward(&params, &targets, &caches).unwrap();

            let mut probe = params.clone();
            let mut worst = 0.0f64;
            let h = 1e-5;
            for (t, grad) in analytic.tensors().iter().enumerate() {
                for (k, &a) in grad.iter().enumerate() {
                    let original = probe.tensors()[t][k];
                    probe.tensors_mut()[t][k] = original + h;
                    let up = masked_loss(&probe, &batch, &masks);
                    probe.tensors_mut()[t][k] = original - h;
                    let down = masked_loss(&probe, &batch, &masks);
                    probe.tensors_mut()[t][k] = original;
                    let n = (up - down) / (2.0 * h);
                    worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-8));
                }
            }
            assert!(worst < 1e-4, "{variant:?} seed {seed}: {worst:.3e}");
        }
    }
}

#[test]
fn inverted_dropout_preserves_expectation() {
    let (max_len, dim, hidden) = (1, 8, 2);
    let x: Vec<f64> = (0..dim).map(|i| 0.25 + i as f64 * 0.5).collect();
    let samples = 10_000;
    let mut r = rng(5);

    // ELSTM: element-wise embedding mask at p = 0.5
    let mut mean = vec![0.0; dim];
    for _ in 0..samples {
        let m: DropoutMasks<f64> = Variant::Elstm.dropout().sample(max_len, dim, hidden, &mut r);
        for (acc, (xi, k)) in mean.iter_mut().zip(x.iter().zip(m.embedding.unwrap())) {
            *acc += xi * k / samples as f64;
        }
    }
    for (got, want) in mean.iter().zip(&x) {
        assert!((got - want).abs() <= 0.02 * want, "embedding: {got} vs {want}");
    }

    // SLSTM: whole-row input mask at p = 0.2
    let mut mean = vec![0.0; dim];
    for _ in 0..samples {
        let m: DropoutMasks<f64> = Variant::Slstm.dropout().sample(max_len, dim, hidden, &mut r);
        let keep = m.input_rows[0].as_ref().unwrap()[0];
        for (acc, xi) in mean.iter_mut().zip(&x) {
            *acc += xi * keep / samples as f64;
        }
    }
    for (got, want) in mean.iter().zip(&x) {
        assert!((got - want).abs() <= 0.02 * want, "input rows: {got} vs {want}");
    }
}

#[test]
fn masks_hold_only_zero_or_rescale() {
    let mut r = rng(6);
    let m: DropoutMasks<f64> = Variant::Slstm.dropout().sample(6, 4, 5, &mut r);
    let rows = m.input_rows[0].as_ref().unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|&k| k == 0.0 || k == 1.25));
    assert!(m.recurrent.iter().all(|r| r.as_ref().unwrap().len() == 5));
    assert!(m.embedding.is_none() && m.dense.is_none());

    let m: DropoutMasks<f64> = Variant::Elstm.dropout().sample(6, 4, 5, &mut r);
    assert_eq!(m.embedding.as_ref().unwrap().len(), 24);
    assert_eq!(m.dense.as_ref().unwrap().len(), 10);
    assert!(m.embedding.unwrap().iter().all(|&k| k == 0.0 || k == 2.0));
    assert!(m.input_rows.iter().all(Option::is_none) && m.recurrent.iter().all(Option::is_none));
}

fn small(variant: Variant) -> BlstmConfig {
    BlstmConfig {
        embed_dim: 12,
        hidden: 5,
        epochs: 6,
        batch_size: 8,
        seed: 3,
        ..BlstmConfig::for_variant(variant)
    }
}

#[test]
fn same_seed_gives_bit_identical_models() {
    let data = synthetic::headlines(40, 8);
    let wv = synthetic::embeddings(12, 8);
    let tok = Tokenizer::default();
    let a = train_slstm(&data, &wv, &tok, &small(Variant::Slstm)).unwrap();
    let b = train_slstm(&data, &wv, &tok, &small(Variant::Slstm)).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.history, b.history);
    let other = BlstmConfig { seed: 4, ..small(Variant::Slstm) };
    assert_ne!(a.params, train_slstm(&data, &wv, &tok, &other).unwrap().params);
}

#[test]
fn slstm_runs_every_epoch() {
    let data = synthetic::headlines(24, 9);
    let wv = synthetic::embeddings(12, 9);
    let model = train_slstm(&data, &wv, &Tokenizer::default(), &small(Variant::Slstm)).unwrap();
    assert_eq!(model.history.epochs_run, 6);
    assert_eq!(model.history.train_mse.len(), 6);
    assert!(model.history.val_mse.is_empty());
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let data = synthetic::headlines(16, 10);
    let wv = synthetic::embeddings(12, 10);
    let tok = Tokenizer::default();
    let cfg = BlstmConfig { learning_rate: 0.0, ..small(Variant::Slstm) };
    let trained = train_slstm(&data, &wv, &tok, &cfg).unwrap();
    let untrained = train_slstm(&data, &wv, &tok, &BlstmConfig { epochs: 0, ..cfg }).unwrap();
    assert_eq!(trained.params, untrained.params);
}

#[test]
fn elstm_keeps_best_validation_weights() {
    let data = synthetic::headlines(60, 11);
    let wv = synthetic::embeddings(12, 11);
    let tok = Tokenizer::default();
    let (train, val) = split_validation(&data, 0.2, 1).unwrap();
    let cfg = BlstmConfig {
        epochs: 40,
        patience: 3,
        learning_rate: 0.01,
        ..small(Variant::Elstm)
    };
    let model = train_elstm(&train, &val, &wv, &tok, &cfg).unwrap();
    let h = &model.history;
    assert_eq!(h.val_mse.len(), h.epochs_run);
    let (best_idx, best) = h
        .val_mse
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    assert_eq!(h.best_epoch, best_idx + 1);
    assert!(h.epochs_run == cfg.epochs || h.epochs_run == h.best_epoch + cfg.patience);

    let val_ex = prepare_examples(&val, &wv, &tok, model.max_len(), cfg.embed_dim).unwrap();
    assert_eq!(model.mse(&val_ex).unwrap(), best);

    let again = train_elstm(&train, &val, &wv, &tok, &cfg).unwrap();
    assert_eq!(again.params, model.params);
    assert_eq!(again.history, model.history);
}

#[test]
fn elstm_requires_validation_data() {
    let data = synthetic::headlines(10, 12);
    let wv = synthetic::embeddings(12, 12);
    let tok = Tokenizer::default();
    assert!(train_elstm(&data, &[], &wv, &tok, &small(Variant::Elstm)).is_err());
    let ex = prepare_examples(&data, &wv, &tok, 6, 12).unwrap();
    let cfg = BlstmConfig { max_len: Some(6), ..small(Variant::Elstm) };
    assert!(fit(&ex, None, &cfg).is_err());
}

#[test]
fn model_file_round_trip_predicts_identically() {
    let data = synthetic::headlines(20, 13);
    let wv = synthetic::embeddings(12, 13);
    let tok = Tokenizer::default();
    let model = train_slstm(&data, &wv, &tok, &small(Variant::Slstm)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("blstm.bin");
    write_model(&model, &path).unwrap();
    let back = read_model(&path).unwrap();
    assert_eq!(back.params, model.params);
    let sentences: Vec<&str> = data.iter().map(|i| i.sentence.as_str()).collect();
    let seqs = model.encode(&sentences, &wv, &tok).unwrap();
    assert_eq!(back.predict_all(&seqs).unwrap(), model.predict_all(&seqs).unwrap());
}
