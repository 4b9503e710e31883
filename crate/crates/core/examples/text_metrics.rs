//! Score predictions against references.

use molgraph::metrics::{bleu, evaluate, levenshtein, meteor, Metric};

fn main() {
    let pred = "the molecule is an aromatic acid";
    let gold = "the molecule is an aromatic carboxylic acid";
    println!("bleu {:.4}", bleu(pred, gold));
    println!("meteor {:.4}", meteor(pred, gold));
    println!("levenshtein {}", levenshtein("CCO", "CCN"));

    let preds = vec!["LogP: 1.25".to_string(), "LogP: 0.50".into()];
    let golds = vec!["LogP: 1.00".to_string(), "LogP: 0.75".into()];
    let report = evaluate(&preds, &golds, &[Metric::Mae, Metric::Exact], false).unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
