//! Two-phase training with and without the UP prior, printing how the mean
//! squared norm of the low-shot weights tracks the base-class mean.

use lowshot::checkpoint::Checkpoint;
use lowshot::dataset::{generate_synthetic, SyntheticSpec};
use lowshot::losses::{LossConfig, NormPrior};
use lowshot::trainer::{init_phase1, init_phase2, train, TrainConfig};

fn main() -> lowshot::Result<()> {
    let spec = SyntheticSpec::default();
    let (data, _) = generate_synthetic(&spec)?;

    let phase1 = TrainConfig {
        seed: 2,
        loss: LossConfig {
            lambda_ccs: 5.0,
            ..LossConfig::default()
        },
        ..TrainConfig::phase1()
    };
    let (p1, t1) = train(init_phase1(&data, &[spec.d, spec.d], 1)?, &data, &phase1)?;
    println!("phase 1 final loss {:.4}", t1.last().unwrap().loss);

    for prior in [NormPrior::None, NormPrior::Up] {
        let mut cfg = TrainConfig {
            seed: 3,
            ..TrainConfig::phase2()
        };
        cfg.loss.norm_prior = prior;
        let (params, trace) = train(init_phase2(p1.extractor.clone(), &data, cfg.seed)?, &data, &cfg)?;
        println!("\nprior {prior:?}");
        println!("epoch  base |w|^2  low-shot |w|^2");
        for r in trace.epochs.iter().step_by(4).chain(trace.last()) {
            println!(
                "{:>5}  {:>11.4}  {:>14.4}",
                r.epoch,
                r.mean_base_sqnorm.unwrap(),
                r.mean_lowshot_sqnorm.unwrap()
            );
        }
        let text = Checkpoint::new(params, cfg.seed).to_text();
        println!("checkpoint: {} lines", text.lines().count());
    }
    Ok(())
}
