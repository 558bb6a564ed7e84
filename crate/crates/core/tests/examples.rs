//! Every example doubles as a smoke test.

#[path = "../examples/blstm.rs"]
mod blstm_example;
#[path = "../examples/cross_validation.rs"]
mod cross_validation_example;
#[path = "../examples/embeddings.rs"]
mod embeddings_example;
#[path = "../examples/end_to_end.rs"]
mod end_to_end_example;
#[path = "../examples/evaluate.rs"]
mod evaluate_example;
#[path = "../examples/features.rs"]
mod features_example;
#[path = "../examples/svr.rs"]
mod svr_example;
#[path = "../examples/tokenize.rs"]
mod tokenize_example;

#[test]
fn tokenize() {
    tokenize_example::run().unwrap();
}

#[test]
fn embeddings() {
    embeddings_example::run().unwrap();
}

#[test]
fn features() {
    features_example::run().unwrap();
}

#[test]
fn svr() {
    svr_example::run().unwrap();
}

#[test]
fn blstm() {
    blstm_example::run().unwrap();
}

#[test]
fn evaluate() {
    evaluate_example::run().unwrap();
}

#[test]
fn cross_validation() {
    cross_validation_example::run().unwrap();
}

#[test]
fn end_to_end() {
    end_to_end_example::run().unwrap();
}
