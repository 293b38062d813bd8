//! Hand-derived gradients against central differences: the MLP extractor
//! followed by cross entropy and the cosine regularizer.

use lowshot::dataset::Split;
use lowshot::linalg::{Matrix, SeededRng};
use lowshot::losses::{total_loss, LossConfig, NormPrior, NormPriorState};
use lowshot::model::{extract, extract_backward, ExtractorParams, HeadWeights};

const H: f64 = 1e-6;

fn loss_of(ext: &ExtractorParams, head: &HeadWeights, x: &[f64], label: usize, cfg: &LossConfig) -> f64 {
    let phi = Matrix::from_vec(1, head.dim(), extract(ext, x).unwrap()).unwrap();
    let split = [Split::Base, Split::Base, Split::LowShot];
    total_loss(&phi, &[label], head, &split, cfg, &NormPriorState::default(), None)
        .unwrap()
        .total
}

fn main() -> lowshot::Result<()> {
    let mut rng = SeededRng::new(3);
    let ext = ExtractorParams::mlp(&[4, 6, 3], &mut rng)?;
    let head = HeadWeights::new(rng.normal_matrix(3, 3, 1.0));
    let x: Vec<f64> = (0..4).map(|_| rng.standard_normal()).collect();
    let label = 1;
    let cfg = LossConfig {
        lambda_ccs: 0.5,
        norm_prior: NormPrior::None,
        ..LossConfig::default()
    };

    // dL/dphi from the loss module, pushed back through the extractor.
    let phi = Matrix::from_vec(1, 3, extract(&ext, &x)?)?;
    let out = total_loss(
        &phi,
        &[label],
        &head,
        &[Split::Base, Split::Base, Split::LowShot],
        &cfg,
        &NormPriorState::default(),
        None,
    )?;
    let (grads, _) = extract_backward(&ext, &x, out.grad_phis.row(0))?;

    let mut worst = 0.0f64;
    let analytic: Vec<f64> = grads.values().collect();
    let mut probe = ext.clone();
    for (i, a) in analytic.iter().enumerate() {
        let orig = probe.values().nth(i).unwrap();
        *probe.values_mut().nth(i).unwrap() = orig + H;
        let up = loss_of(&probe, &head, &x, label, &cfg);
        *probe.values_mut().nth(i).unwrap() = orig - H;
        let down = loss_of(&probe, &head, &x, label, &cfg);
        *probe.values_mut().nth(i).unwrap() = orig;
        let n = (up - down) / (2.0 * H);
        worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-3));
    }
    println!(
        "{} extractor parameters, max relative error {worst:.2e}",
        analytic.len()
    );
    Ok(())
}
