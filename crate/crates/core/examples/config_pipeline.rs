//! A TOML config driving gen-data, train and eval end to end.

use lowshot::experiment::{cmd_eval, cmd_gen_data, cmd_train, ExperimentConfig};

const CONFIG: &str = r#"
seed = 21

[dataset.synthetic]
d = 8
k_base = 10
k_lowshot = 4
train_per_base = 30
test_per_class = 10

[phase1]
epochs = 15

[phase2]
norm_prior = "up"
epochs = 15

[eval]
precision_targets = [0.9, 0.95]
knn_k = 3
"#;

fn main() -> lowshot::Result<()> {
    let mut cfg = ExperimentConfig::from_toml(CONFIG)?;
    cfg.output_dir = std::env::temp_dir().join("lowshot-config-example");
    println!("seeds {:?}", cfg.seeds());
    let mut out = std::io::stdout();
    cmd_gen_data(&cfg, &mut out)?;
    cmd_train(&cfg, &mut out)?;
    let report = cmd_eval(&cfg, &mut out)?;
    println!("low-shot curve has {} points", report.scores.curve.len());
    Ok(())
}
