#![allow(dead_code)]

use lowshot::linalg::{Matrix, SeededRng};

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-5;
pub const REL_FLOOR: f64 = 1e-3;

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Max over coordinates of `|a - n| / max(|a|, |n|, REL_FLOOR)`. The floor keeps
/// cancellation noise on near-zero coordinates from dominating.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}

/// One random gradient-check problem size.
#[derive(Debug, Clone, Copy)]
pub struct Instance {
    pub seed: u64,
    pub d: usize,
    pub k: usize,
    pub n: usize,
}

/// 24 seeded instances over d ∈ {2, 8}, K ∈ {3, 10}, n ∈ {1, 5}.
pub fn instances() -> Vec<Instance> {
    let mut out = Vec::new();
    let mut seed = 1000;
    for rep in 0..3 {
        for d in [2, 8] {
            for k in [3, 10] {
                for n in [1, 5] {
                    seed += 1;
                    out.push(Instance {
                        seed: seed + 100 * rep,
                        d,
                        k,
                        n,
                    });
                }
            }
        }
    }
    out
}

pub fn random_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix {
    rng.normal_matrix(rows, cols, 1.0)
}

pub fn random_labels(rng: &mut SeededRng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.below(k)).collect()
}

pub fn with_values(m: &Matrix, v: &[f64]) -> Matrix {
    Matrix::from_vec(m.rows(), m.cols(), v.to_vec()).unwrap()
}

use lowshot::dataset::Split;
use lowshot::linalg::{matmul, stable_softmax};
use lowshot::losses::{
    ccs_gradients, ccs_loss, ce_gradients, center_loss, equal_norm_penalty, shrink_penalty, total_loss, up_penalty,
    LossConfig, NormPrior, NormPriorState,
};
use lowshot::model::{extract, extract_backward, ExtractorParams, HeadWeights};

/// Gradient components checked against finite differences.
pub const COMPONENTS: [&str; 8] = [
    "ce",
    "ccs",
    "center",
    "up",
    "shrink",
    "equal_norm",
    "total_loss",
    "mlp_backward",
];

// Cross entropy from scratch: logits by matrix product, per-row softmax,
// summed negative log-likelihood.
fn ce_forward(phis: &Matrix, w: &Matrix, labels: &[usize]) -> f64 {
    let z = matmul(phis, &w.transpose()).unwrap();
    labels
        .iter()
        .enumerate()
        .map(|(n, &t)| -stable_softmax(z.row(n))[t].ln())
        .sum()
}

fn splits_for(rng: &mut SeededRng, k: usize) -> Vec<Split> {
    // At least one of each.
    let mut s: Vec<Split> = (0..k)
        .map(|_| if rng.below(2) == 0 { Split::Base } else { Split::LowShot })
        .collect();
    s[0] = Split::Base;
    s[k - 1] = Split::LowShot;
    s
}

/// Max relative error per component on one instance, in [`COMPONENTS`] order.
pub fn gradient_errors(inst: Instance) -> Vec<(&'static str, f64)> {
    let Instance { seed, d, k, n } = inst;
    let mut rng = SeededRng::new(seed);
    let w = random_matrix(&mut rng, k, d);
    let phis = random_matrix(&mut rng, n, d);
    let labels = random_labels(&mut rng, n, k);
    let head = HeadWeights::new(w.clone());
    let mut out = Vec::new();

    let ce = ce_gradients(&phis, &head, &labels).unwrap();
    let gw = numeric_grad(w.as_slice(), |v| ce_forward(&phis, &with_values(&w, v), &labels));
    let gp = numeric_grad(phis.as_slice(), |v| ce_forward(&with_values(&phis, v), &w, &labels));
    out.push((
        "ce",
        max_rel_err(ce.grad_w.as_slice(), &gw).max(max_rel_err(ce.grad_phis.as_slice(), &gp)),
    ));

    let eps = 1e-12;
    let (_, g) = ccs_gradients(&phis, &head, &labels, eps).unwrap();
    let num = numeric_grad(phis.as_slice(), |v| {
        ccs_loss(&with_values(&phis, v), &head, &labels, eps).unwrap()
    });
    out.push(("ccs", max_rel_err(g.as_slice(), &num)));

    let centers = random_matrix(&mut rng, k, d);
    let c = center_loss(&phis, &centers, &labels).unwrap();
    let gp = numeric_grad(phis.as_slice(), |v| {
        center_loss(&with_values(&phis, v), &centers, &labels).unwrap().loss
    });
    let gc = numeric_grad(centers.as_slice(), |v| {
        center_loss(&phis, &with_values(&centers, v), &labels).unwrap().loss
    });
    out.push((
        "center",
        max_rel_err(c.grad_phis.as_slice(), &gp).max(max_rel_err(c.grad_centers.as_slice(), &gc)),
    ));

    let split = splits_for(&mut rng, k);
    let low: Vec<usize> = (0..k).filter(|&i| split[i] == Split::LowShot).collect();
    let alpha = rng.uniform(0.0, 2.0 * d as f64);
    let (_, g) = up_penalty(&head, &low, alpha).unwrap();
    let num = numeric_grad(w.as_slice(), |v| {
        up_penalty(&HeadWeights::new(with_values(&w, v)), &low, alpha)
            .unwrap()
            .0
    });
    out.push(("up", max_rel_err(g.as_slice(), &num)));

    let (_, g) = shrink_penalty(&head);
    let num = numeric_grad(w.as_slice(), |v| {
        shrink_penalty(&HeadWeights::new(with_values(&w, v))).0
    });
    out.push(("shrink", max_rel_err(g.as_slice(), &num)));

    let beta = rng.uniform(0.0, 2.0 * d as f64);
    let (_, g) = equal_norm_penalty(&head, beta).unwrap();
    let num = numeric_grad(w.as_slice(), |v| {
        equal_norm_penalty(&HeadWeights::new(with_values(&w, v)), beta)
            .unwrap()
            .0
    });
    out.push(("equal_norm", max_rel_err(g.as_slice(), &num)));

    let prior = [NormPrior::Up, NormPrior::Shrink, NormPrior::EqualNorm][(seed % 3) as usize];
    let config = LossConfig {
        lambda_ccs: rng.uniform(0.1, 2.0),
        norm_prior: prior,
        prior_weight: rng.uniform(0.1, 2.0),
        center_weight: rng.uniform(0.1, 2.0),
        epsilon_norm: 1e-12,
    };
    let state = NormPriorState::refresh(&head, &split, prior).unwrap();
    let f = |p: &Matrix, w: &Matrix| {
        total_loss(
            p,
            &labels,
            &HeadWeights::new(w.clone()),
            &split,
            &config,
            &state,
            Some(&centers),
        )
        .unwrap()
        .total
    };
    let t = total_loss(&phis, &labels, &head, &split, &config, &state, Some(&centers)).unwrap();
    // The CCS term treats w' as a constant, so its W-derivative is held out
    // of the W check by freezing w' through a second head.
    let gw = numeric_grad(w.as_slice(), |v| {
        let moved = HeadWeights::new(with_values(&w, v));
        let full = total_loss(&phis, &labels, &moved, &split, &config, &state, Some(&centers)).unwrap();
        let ccs_moved = ccs_loss(&phis, &moved, &labels, config.epsilon_norm).unwrap();
        let ccs_fixed = ccs_loss(&phis, &head, &labels, config.epsilon_norm).unwrap();
        full.total - config.lambda_ccs * (ccs_moved - ccs_fixed)
    });
    let gp = numeric_grad(phis.as_slice(), |v| f(&with_values(&phis, v), &w));
    out.push((
        "total_loss",
        max_rel_err(t.grad_w.as_slice(), &gw).max(max_rel_err(t.grad_phis.as_slice(), &gp)),
    ));

    let hidden = 2 * d + 1;
    let mlp = ExtractorParams::mlp(&[d, hidden, k], &mut rng).unwrap();
    let x: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
    let upstream: Vec<f64> = (0..k).map(|_| rng.standard_normal()).collect();
    let (g, gx) = extract_backward(&mlp, &x, &upstream).unwrap();
    let theta: Vec<f64> = mlp.values().collect();
    let objective = |p: &ExtractorParams, x: &[f64]| -> f64 {
        extract(p, x).unwrap().iter().zip(&upstream).map(|(a, b)| a * b).sum()
    };
    let num_theta = numeric_grad(&theta, |v| {
        let mut p = mlp.clone();
        for (dst, src) in p.values_mut().zip(v) {
            *dst = *src;
        }
        objective(&p, &x)
    });
    let num_x = numeric_grad(&x, |v| objective(&mlp, v));
    let analytic: Vec<f64> = g.values().collect();
    out.push((
        "mlp_backward",
        max_rel_err(&analytic, &num_theta).max(max_rel_err(&gx, &num_x)),
    ));

    out
}
