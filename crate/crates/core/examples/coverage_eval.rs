//! Coverage at precision for a trained model next to the cosine KNN
//! baseline in the same feature space.

use lowshot::dataset::Split;
use lowshot::dataset::{generate_synthetic, SyntheticSpec};
use lowshot::eval::{coverage_at_precision, evaluate, precision_coverage_curve, PredictionRecord};
use lowshot::experiment::{cmd_train, ExperimentConfig};

fn main() -> lowshot::Result<()> {
    // Hand-checkable case: prefixes give precision 1, 1, 2/3, 3/4.
    let recs: Vec<PredictionRecord> = [(0.9, true), (0.8, true), (0.7, false), (0.6, true)]
        .iter()
        .map(|&(confidence, ok)| PredictionRecord {
            confidence,
            predicted: 0,
            actual: if ok { 0 } else { 1 },
            split: Split::LowShot,
        })
        .collect();
    println!("toy curve {:?}", precision_coverage_curve(&recs)?);
    println!("toy coverage@0.99 = {}", coverage_at_precision(&recs, 0.99)?);

    let out = std::env::temp_dir().join("lowshot-coverage-example");
    let cfg = ExperimentConfig {
        output_dir: out,
        ..ExperimentConfig::default()
    };
    let model = cmd_train(&cfg, &mut std::io::sink())?.checkpoint.params;
    let (train, test) = generate_synthetic(&SyntheticSpec::default())?;
    let report = evaluate(&model, &test, &[0.9, 0.95, 0.99], Some((&train, 1)))?;
    let knn = report.knn.as_ref().unwrap();
    println!("\ntarget  MLR     KNN");
    for (t, c) in &report.scores.coverage_at {
        println!("{t:<6}  {c:.3}   {:.3}", knn.scores.coverage_at[t]);
    }
    println!(
        "top-1 low-shot: MLR {:.3}, KNN {:.3}",
        report.scores.top1_lowshot.unwrap(),
        knn.scores.top1_lowshot.unwrap()
    );
    Ok(())
}
