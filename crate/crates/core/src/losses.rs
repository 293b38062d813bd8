//! Loss terms and their analytic gradients.
//!
//! All batch losses are summed over samples, not averaged. Shapes: `phis` is
//! `n x d` (one feature per row), `head.w` is `K x d`, `labels` has length `n`.
//!
//! * cross entropy `L_s = -Σ_n log p_{t_n}(x_n)` with `p = softmax(W φ)`
//! * CCS `L_a = -Σ_n cos(w'_{t_n}, φ_n)`, `w'` a detached copy of `W`
//! * center `L_c = Σ_n ‖c_{t_n} - φ_n‖²`
//! * UP `(mean_{k∈C_l} ‖w_k‖² - α)²`, `α` the detached base-class mean
//! * shrink `Σ_k ‖w_k‖²`
//! * equal-norm `Σ_k (‖w_k‖² - β)²`, `β` the detached all-class mean

use serde::{Deserialize, Serialize};

use crate::dataset::{classes_in, Split};
use crate::error::{Error, Result};
use crate::linalg::{dot, l2_norm, log_sum_exp, softmax_in_place, squared_norm, Matrix};
use crate::model::HeadWeights;

/// EMA decay for class centers.
pub const CENTER_DECAY: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormPrior {
    #[default]
    None,
    Up,
    Shrink,
    EqualNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub lambda_ccs: f64,
    pub norm_prior: NormPrior,
    pub prior_weight: f64,
    pub center_weight: f64,
    pub epsilon_norm: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_ccs: 0.0,
            norm_prior: NormPrior::None,
            prior_weight: 1.0,
            center_weight: 0.0,
            epsilon_norm: 1e-12,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_ccs", self.lambda_ccs),
            ("prior_weight", self.prior_weight),
            ("center_weight", self.center_weight),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !self.epsilon_norm.is_finite() || self.epsilon_norm <= 0.0 {
            return Err(Error::invalid(format!(
                "epsilon_norm must be > 0, got {}",
                self.epsilon_norm
            )));
        }
        Ok(())
    }
}

/// Detached norm targets, refreshed from the weights once per mini-batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormPriorState {
    pub alpha: f64,
    pub beta: f64,
}

impl NormPriorState {
    /// Recomputes whichever target `prior` needs; the other stays 0.
    pub fn refresh(head: &HeadWeights, split_of_class: &[Split], prior: NormPrior) -> Result<Self> {
        let mut s = Self::default();
        match prior {
            NormPrior::Up => s.alpha = alpha_from_base(head, &classes_in(split_of_class, Split::Base))?,
            NormPrior::EqualNorm => s.beta = beta_from_all(head)?,
            NormPrior::None | NormPrior::Shrink => {}
        }
        Ok(s)
    }
}

fn check_labels(labels: &[usize], n: usize, k: usize, op: &'static str) -> Result<()> {
    if labels.len() != n {
        return Err(Error::shape(op, format!("{n} samples but {} labels", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!("{op}: label {bad} outside [0, {k})")));
    }
    Ok(())
}

fn check_head(phis: &Matrix, head: &HeadWeights, op: &'static str) -> Result<()> {
    if phis.cols() != head.dim() {
        return Err(Error::shape(
            op,
            format!("features have dim {}, head expects {}", phis.cols(), head.dim()),
        ));
    }
    Ok(())
}

/// `-Σ_n log p_{label(n)}` from an `n x K` probability matrix.
///
/// Rows must sum to 1 within 1e-9. A zero probability at a target is
/// rejected rather than producing `inf`; use [`cross_entropy_from_logits`].
pub fn cross_entropy(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    check_labels(labels, probs.rows(), probs.cols(), "cross_entropy")?;
    let mut loss = 0.0;
    for (i, row) in probs.row_iter().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
            return Err(Error::invalid(format!(
                "cross_entropy: row {i} is not a distribution (sum {s})"
            )));
        }
        let p = row[labels[i]];
        if p <= 0.0 {
            return Err(Error::invalid(format!(
                "cross_entropy: zero probability at target of row {i}; use the logit form"
            )));
        }
        loss -= p.ln();
    }
    Ok(loss)
}

/// `Σ_n (logsumexp(z_n) - z_{n,label})`; finite for any finite logits.
pub fn cross_entropy_from_logits(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    check_labels(labels, logits.rows(), logits.cols(), "cross_entropy_from_logits")?;
    Ok(logits.row_iter().zip(labels).map(|(z, &t)| log_sum_exp(z) - z[t]).sum())
}

#[derive(Debug, Clone)]
pub struct CeOutput {
    pub loss: f64,
    pub grad_w: Matrix,
    pub grad_phis: Matrix,
}

/// Cross entropy of `softmax(W φ_n)` and its gradients:
/// `∂/∂w_k = Σ_n (p_k(x_n) - t_{k,n}) φ_n`, `∂/∂φ_n = Σ_k (p_k - t_k) w_k`.
pub fn ce_gradients(phis: &Matrix, head: &HeadWeights, labels: &[usize]) -> Result<CeOutput> {
    check_head(phis, head, "ce_gradients")?;
    check_labels(labels, phis.rows(), head.num_classes(), "ce_gradients")?;
    let (k, d) = head.w.shape();
    let mut loss = 0.0;
    let mut grad_w = Matrix::zeros(k, d);
    let mut grad_phis = Matrix::zeros(phis.rows(), d);
    for (n, phi) in phis.row_iter().enumerate() {
        let t = labels[n];
        let mut p: Vec<f64> = head.w.row_iter().map(|w| dot(w, phi)).collect();
        loss += log_sum_exp(&p) - p[t];
        softmax_in_place(&mut p);
        p[t] -= 1.0;
        let gphi = grad_phis.row_mut(n);
        for (class, &e) in p.iter().enumerate() {
            if e == 0.0 {
                continue;
            }
            let w = head.w.row(class);
            for (g, &wj) in gphi.iter_mut().zip(w) {
                *g += e * wj;
            }
            for (g, &x) in grad_w.row_mut(class).iter_mut().zip(phi) {
                *g += e * x;
            }
        }
    }
    Ok(CeOutput {
        loss,
        grad_w,
        grad_phis,
    })
}

/// `cos θ = w'ᵀφ / (max(‖w'‖, eps) · max(‖φ‖, eps))`.
pub fn guarded_cosine(phi: &[f64], w_prime: &[f64], eps: f64) -> f64 {
    dot(w_prime, phi) / (l2_norm(w_prime).max(eps) * l2_norm(phi).max(eps))
}

/// `-Σ_n cos θ_n` between each feature and its class's detached weight row.
pub fn ccs_loss(phis: &Matrix, head: &HeadWeights, labels: &[usize], eps: f64) -> Result<f64> {
    check_head(phis, head, "ccs_loss")?;
    check_labels(labels, phis.rows(), head.num_classes(), "ccs_loss")?;
    Ok(-phis
        .row_iter()
        .zip(labels)
        .map(|(phi, &t)| guarded_cosine(phi, head.row(t), eps))
        .sum::<f64>())
}

/// Gradient of the per-sample term `-cos θ` with respect to `φ`:
///
/// `-(1/‖φ‖) (w'/‖w'‖ - cos θ · φ/‖φ‖)`
///
/// This is the derivative of the loss as minimized (leading minus
/// included), which is what finite differences of [`ccs_loss`] see. When
/// `‖φ‖ < eps` the feature norm is clamped, so the gradient is
/// `-w' / (max(‖w'‖, eps) · eps)`. `w'` receives no gradient.
pub fn ccs_grad_phi(phi: &[f64], w_prime: &[f64], eps: f64) -> Vec<f64> {
    let wn = l2_norm(w_prime).max(eps);
    let pn = l2_norm(phi);
    if pn < eps {
        return w_prime.iter().map(|w| -w / (wn * eps)).collect();
    }
    let cos = dot(w_prime, phi) / (wn * pn);
    w_prime
        .iter()
        .zip(phi)
        .map(|(w, p)| -(w / wn - cos * p / pn) / pn)
        .collect()
}

/// CCS loss and `∂/∂φ` for the batch.
pub fn ccs_gradients(phis: &Matrix, head: &HeadWeights, labels: &[usize], eps: f64) -> Result<(f64, Matrix)> {
    let loss = ccs_loss(phis, head, labels, eps)?;
    let mut grad = Matrix::zeros(phis.rows(), phis.cols());
    for (n, phi) in phis.row_iter().enumerate() {
        grad.row_mut(n)
            .copy_from_slice(&ccs_grad_phi(phi, head.row(labels[n]), eps));
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone)]
pub struct CenterOutput {
    pub loss: f64,
    pub grad_phis: Matrix,
    pub grad_centers: Matrix,
}

/// `Σ_n ‖c_{t_n} - φ_n‖²` with `∂/∂φ_n = 2(φ_n - c)` and
/// `∂/∂c_k = Σ_{n∈k} 2(c_k - φ_n)`.
pub fn center_loss(phis: &Matrix, centers: &Matrix, labels: &[usize]) -> Result<CenterOutput> {
    if phis.cols() != centers.cols() {
        return Err(Error::shape(
            "center_loss",
            format!("features have dim {}, centers {}", phis.cols(), centers.cols()),
        ));
    }
    check_labels(labels, phis.rows(), centers.rows(), "center_loss")?;
    let mut loss = 0.0;
    let mut grad_phis = Matrix::zeros(phis.rows(), phis.cols());
    let mut grad_centers = Matrix::zeros(centers.rows(), centers.cols());
    for (n, phi) in phis.row_iter().enumerate() {
        let k = labels[n];
        let c = centers.row(k);
        for j in 0..phi.len() {
            let diff = phi[j] - c[j];
            loss += diff * diff;
            grad_phis[(n, j)] = 2.0 * diff;
            grad_centers[(k, j)] -= 2.0 * diff;
        }
    }
    Ok(CenterOutput {
        loss,
        grad_phis,
        grad_centers,
    })
}

/// `c_k ← decay·c_k + (1 - decay)·mean_{n∈k} φ_n` for classes present in
/// the batch; absent classes keep their center.
pub fn update_centers(centers: &mut Matrix, phis: &Matrix, labels: &[usize], decay: f64) -> Result<()> {
    if phis.cols() != centers.cols() {
        return Err(Error::shape("update_centers", "feature and center dims differ"));
    }
    check_labels(labels, phis.rows(), centers.rows(), "update_centers")?;
    let mut sums = Matrix::zeros(centers.rows(), centers.cols());
    let mut counts = vec![0usize; centers.rows()];
    for (phi, &k) in phis.row_iter().zip(labels) {
        counts[k] += 1;
        for (s, x) in sums.row_mut(k).iter_mut().zip(phi) {
            *s += x;
        }
    }
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let inv = 1.0 / c as f64;
        for (cv, s) in centers.row_mut(k).iter_mut().zip(sums.row(k)) {
            *cv = decay * *cv + (1.0 - decay) * s * inv;
        }
    }
    Ok(())
}

fn mean_sq_norm(head: &HeadWeights, classes: &[usize]) -> f64 {
    classes.iter().map(|&k| squared_norm(head.row(k))).sum::<f64>() / classes.len() as f64
}

fn check_classes(head: &HeadWeights, classes: &[usize], what: &str) -> Result<()> {
    if classes.is_empty() {
        return Err(Error::invalid(format!("{what} class set is empty")));
    }
    if let Some(&bad) = classes.iter().find(|&&k| k >= head.num_classes()) {
        return Err(Error::invalid(format!(
            "{what} class {bad} outside head with {} rows",
            head.num_classes()
        )));
    }
    Ok(())
}

/// `α = mean_{k∈C_b} ‖w_k‖²`.
pub fn alpha_from_base(head: &HeadWeights, base: &[usize]) -> Result<f64> {
    check_classes(head, base, "base")?;
    Ok(mean_sq_norm(head, base))
}

/// UP penalty `(mean_{k∈C_l} ‖w_k‖² - α)²` and its gradient
/// `4 (mean - α) w_k / |C_l|` on low-shot rows, exactly zero elsewhere.
pub fn up_penalty(head: &HeadWeights, lowshot: &[usize], alpha: f64) -> Result<(f64, Matrix)> {
    check_classes(head, lowshot, "low-shot")?;
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    let gap = mean_sq_norm(head, lowshot) - alpha;
    let scale = 4.0 * gap / lowshot.len() as f64;
    let mut grad = Matrix::zeros(head.num_classes(), head.dim());
    for &k in lowshot {
        for (g, w) in grad.row_mut(k).iter_mut().zip(head.row(k)) {
            *g = scale * w;
        }
    }
    Ok((gap * gap, grad))
}

/// `Σ_k ‖w_k‖²` over all rows, gradient `2W`.
pub fn shrink_penalty(head: &HeadWeights) -> (f64, Matrix) {
    let mut grad = head.w.clone();
    grad.scale(2.0);
    (squared_norm(head.w.as_slice()), grad)
}

/// `β = mean_k ‖w_k‖²` over all rows.
pub fn beta_from_all(head: &HeadWeights) -> Result<f64> {
    if head.num_classes() == 0 {
        return Err(Error::invalid("head has no rows"));
    }
    let all: Vec<usize> = (0..head.num_classes()).collect();
    Ok(mean_sq_norm(head, &all))
}

/// `Σ_k (‖w_k‖² - β)²`, gradient `4 (‖w_k‖² - β) w_k` per row.
pub fn equal_norm_penalty(head: &HeadWeights, beta: f64) -> Result<(f64, Matrix)> {
    if head.num_classes() == 0 {
        return Err(Error::invalid("head has no rows"));
    }
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(head.num_classes(), head.dim());
    for k in 0..head.num_classes() {
        let gap = squared_norm(head.row(k)) - beta;
        loss += gap * gap;
        for (g, w) in grad.row_mut(k).iter_mut().zip(head.row(k)) {
            *g = 4.0 * gap * w;
        }
    }
    Ok((loss, grad))
}

/// Unweighted value of each active term.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub ce: f64,
    pub ccs: f64,
    pub prior: f64,
    pub center: f64,
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub total: f64,
    pub terms: LossTerms,
    pub grad_w: Matrix,
    pub grad_phis: Matrix,
    /// Weighted gradient of the norm prior alone, when one is active.
    pub prior_grad_w: Option<Matrix>,
}

/// `L_s + λ L_a + prior_weight · prior + center_weight · L_c`, with each
/// optional term included only when its weight is positive (or its prior
/// selected). Gradients are the sums of the component gradients; `W` gets
/// nothing from the CCS term.
pub fn total_loss(
    phis: &Matrix,
    labels: &[usize],
    head: &HeadWeights,
    split_of_class: &[Split],
    config: &LossConfig,
    prior_state: &NormPriorState,
    centers: Option<&Matrix>,
) -> Result<LossOutput> {
    config.validate()?;
    if split_of_class.len() != head.num_classes() {
        return Err(Error::shape(
            "total_loss",
            format!(
                "{} class tags for a head with {} rows",
                split_of_class.len(),
                head.num_classes()
            ),
        ));
    }
    let CeOutput {
        loss: ce,
        mut grad_w,
        mut grad_phis,
    } = ce_gradients(phis, head, labels)?;
    let mut terms = LossTerms {
        ce,
        ..Default::default()
    };
    let mut total = ce;

    if config.lambda_ccs > 0.0 {
        let (l, g) = ccs_gradients(phis, head, labels, config.epsilon_norm)?;
        terms.ccs = l;
        total += config.lambda_ccs * l;
        grad_phis.add_scaled(&g, config.lambda_ccs)?;
    }

    let prior = match config.norm_prior {
        NormPrior::None => None,
        NormPrior::Up => Some(up_penalty(
            head,
            &classes_in(split_of_class, Split::LowShot),
            prior_state.alpha,
        )?),
        NormPrior::Shrink => Some(shrink_penalty(head)),
        NormPrior::EqualNorm => Some(equal_norm_penalty(head, prior_state.beta)?),
    };
    let prior_grad_w = match prior {
        Some((l, mut g)) => {
            terms.prior = l;
            total += config.prior_weight * l;
            g.scale(config.prior_weight);
            grad_w.add_scaled(&g, 1.0)?;
            Some(g)
        }
        None => None,
    };

    if config.center_weight > 0.0 {
        let centers = centers.ok_or_else(|| Error::invalid("center loss active but no centers supplied"))?;
        let out = center_loss(phis, centers, labels)?;
        terms.center = out.loss;
        total += config.center_weight * out.loss;
        grad_phis.add_scaled(&out.grad_phis, config.center_weight)?;
    }

    Ok(LossOutput {
        total,
        terms,
        grad_w,
        grad_phis,
        prior_grad_w,
    })
}
