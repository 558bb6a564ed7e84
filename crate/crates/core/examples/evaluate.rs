//! The three cosine metrics, MAE and the worst errors on a hand-made
//! prediction set.

use finsent::corpus::HeadlineInstance;
use finsent::eval::{evaluate, PredictionSet};

pub fn run() -> finsent::Result<()> {
    let gold = vec![
        HeadlineInstance::new("1", "Acme", "Acme gains as Globex slumps", Some(0.6)),
        HeadlineInstance::new("2", "Globex", "Acme gains as Globex slumps", Some(-0.5)),
        HeadlineInstance::new("3", "Hooli", "Hooli shares edge up", Some(0.01)),
        HeadlineInstance::new("4", "Wonka", "Wonka issues profit warning", Some(-0.8)),
    ];
    let preds = PredictionSet::new([
        ("1".to_string(), 0.4),
        ("2".to_string(), -0.2),
        ("3".to_string(), -0.01),
        ("4".to_string(), -0.7),
    ])?;
    let report = evaluate(&preds, &gold, 3, false)?;
    println!("{}", report.to_json());
    for (sentence, cos) in &report.per_sentence {
        println!("{cos:+.3}  {sentence}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> finsent::Result<()> {
    run()
}
