//! Two-phase SGD training.
//!
//! Phase 1 learns the representation on base classes only (cross entropy
//! plus optional CCS); its head has one row per base class, in ascending
//! base-class order. Phase 2 trains a head over every class on the base
//! samples plus the oversampled low-shot samples, with an optional norm
//! prior, and either keeps the extractor fixed or fine-tunes it.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{classes_in, oversample, LabeledSet, Split};
use crate::error::{Error, Result};
use crate::linalg::{squared_norm, Matrix, SeededRng};
use crate::losses::{total_loss, update_centers, LossConfig, LossTerms, NormPrior, NormPriorState, CENTER_DECAY};
use crate::model::{accumulate_backward, extract_cached, ExtractorParams, HeadWeights, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Phase1,
    Phase2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub phase: Phase,
    pub lr: f64,
    /// Multiplies `lr` after every epoch.
    pub lr_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub oversample_factor: usize,
    pub update_features: bool,
    pub loss: LossConfig,
}

impl TrainConfig {
    pub fn phase1() -> Self {
        Self {
            phase: Phase::Phase1,
            lr: 0.002,
            lr_decay: 0.95,
            epochs: 30,
            batch_size: 64,
            seed: 0,
            oversample_factor: 1,
            update_features: true,
            loss: LossConfig::default(),
        }
    }

    pub fn phase2() -> Self {
        Self {
            phase: Phase::Phase2,
            epochs: 20,
            oversample_factor: 3,
            update_features: false,
            loss: LossConfig {
                prior_weight: 64.0,
                ..LossConfig::default()
            },
            ..Self::phase1()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::invalid(format!("lr must be finite and >= 0, got {}", self.lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::invalid(format!(
                "lr_decay must be in (0, 1], got {}",
                self.lr_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.oversample_factor == 0 {
            return Err(Error::invalid("oversample_factor must be >= 1"));
        }
        if self.phase == Phase::Phase1 && self.loss.norm_prior != NormPrior::None {
            return Err(Error::invalid("phase 1 does not take a norm prior"));
        }
        Ok(())
    }
}

/// Mutable state carried across steps besides the parameters.
#[derive(Debug, Clone, Default)]
pub struct TrainState {
    pub prior: NormPriorState,
    pub centers: Option<Matrix>,
}

impl TrainState {
    pub fn for_model(params: &ModelParams, config: &LossConfig) -> Self {
        Self {
            prior: NormPriorState::default(),
            centers: (config.center_weight > 0.0).then(|| Matrix::zeros(params.head.num_classes(), params.head.dim())),
        }
    }
}

/// What one [`sgd_step`] did.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub loss: f64,
    pub terms: LossTerms,
    pub prior: NormPriorState,
    /// Weighted gradient of the norm prior on the head, if a prior is active.
    pub prior_grad_w: Option<Matrix>,
}

/// One update `θ ← θ - lr · ∇L` on a mini-batch of raw inputs.
///
/// α/β are refreshed from the current head before the gradient is formed.
/// With `update_features == false` the extractor is not touched.
pub fn sgd_step(
    params: &mut ModelParams,
    inputs: &Matrix,
    labels: &[usize],
    split_of_class: &[Split],
    config: &TrainConfig,
    lr: f64,
    state: &mut TrainState,
) -> Result<StepReport> {
    if labels.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if !lr.is_finite() || lr < 0.0 {
        return Err(Error::invalid(format!("lr must be finite and >= 0, got {lr}")));
    }
    let train_extractor = config.update_features && !params.extractor.is_identity();

    let mut caches = Vec::with_capacity(inputs.rows());
    let mut phi_data = Vec::with_capacity(inputs.rows() * params.head.dim());
    for x in inputs.row_iter() {
        let c = extract_cached(&params.extractor, x)?;
        phi_data.extend_from_slice(c.output());
        caches.push(c);
    }
    let phis = Matrix::from_vec(inputs.rows(), params.head.dim(), phi_data).map_err(|_| nonfinite("features"))?;

    state.prior = NormPriorState::refresh(&params.head, split_of_class, config.loss.norm_prior)?;
    let out = total_loss(
        &phis,
        labels,
        &params.head,
        split_of_class,
        &config.loss,
        &state.prior,
        state.centers.as_ref(),
    )?;

    for (name, v) in [
        ("cross-entropy", out.terms.ce),
        ("ccs", out.terms.ccs),
        ("norm prior", out.terms.prior),
        ("center", out.terms.center),
        ("total loss", out.total),
    ] {
        if !v.is_finite() {
            return Err(nonfinite(name));
        }
    }
    if !out.grad_w.is_finite() {
        return Err(nonfinite("head gradient"));
    }

    let ext_grad = if train_extractor {
        if !out.grad_phis.is_finite() {
            return Err(nonfinite("feature gradient"));
        }
        let mut g = params.extractor.zeros_like();
        for (cache, up) in caches.iter().zip(out.grad_phis.row_iter()) {
            accumulate_backward(&params.extractor, cache, up, &mut g)?;
        }
        if !g.is_finite() {
            return Err(nonfinite("extractor gradient"));
        }
        Some(g)
    } else {
        None
    };

    params.head.w.add_scaled(&out.grad_w, -lr)?;
    if let Some(g) = ext_grad {
        params.extractor.add_scaled(&g, -lr)?;
    }
    if let Some(centers) = state.centers.as_mut() {
        update_centers(centers, &phis, labels, CENTER_DECAY)?;
    }
    if !params.head.w.is_finite() || !params.extractor.is_finite() {
        return Err(nonfinite("parameters after update"));
    }

    Ok(StepReport {
        loss: out.total,
        terms: out.terms,
        prior: state.prior,
        prior_grad_w: out.prior_grad_w,
    })
}

// Epoch and step are filled in by the caller.
fn nonfinite(term: &str) -> Error {
    Error::Diverged {
        term: term.to_string(),
        epoch: 0,
        step: 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sum of the epoch's step losses divided by the number of samples.
    pub loss: f64,
    /// α from the end-of-epoch head, when the UP prior is active.
    pub alpha: Option<f64>,
    pub mean_lowshot_sqnorm: Option<f64>,
    pub mean_base_sqnorm: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// CSV with header `epoch,loss,alpha,mean_lowshot_sqnorm,mean_base_sqnorm,seconds`.
    /// Missing values are empty fields. With `wall_time == false` the
    /// seconds column is written as 0 so the file is reproducible.
    pub fn to_csv(&self, wall_time: bool) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("epoch,loss,alpha,mean_lowshot_sqnorm,mean_base_sqnorm,seconds\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch,
                r.loss,
                opt(r.alpha),
                opt(r.mean_lowshot_sqnorm),
                opt(r.mean_base_sqnorm),
                if wall_time { r.seconds } else { 0.0 }
            ));
        }
        out
    }
}

/// Mean squared row norm over `split`'s classes, `None` if there are none.
pub fn mean_sqnorm(head: &HeadWeights, split_of_class: &[Split], split: Split) -> Option<f64> {
    let classes = classes_in(split_of_class, split);
    (!classes.is_empty())
        .then(|| classes.iter().map(|&k| squared_norm(head.row(k))).sum::<f64>() / classes.len() as f64)
}

/// Base samples relabeled to `0..|C_b|` in ascending class order.
pub fn base_only(set: &LabeledSet) -> Result<LabeledSet> {
    let base = set.classes_in(Split::Base);
    if base.is_empty() {
        return Err(Error::invalid("phase 1 needs base classes"));
    }
    let mut remap = vec![usize::MAX; set.num_classes()];
    for (new, &old) in base.iter().enumerate() {
        remap[old] = new;
    }
    let sub = set.filter_split(Split::Base);
    let labels = sub.labels().iter().map(|&l| remap[l]).collect();
    LabeledSet::new(sub.features().clone(), labels, vec![Split::Base; base.len()])
}

/// The set a phase actually trains on.
pub fn training_view(set: &LabeledSet, config: &TrainConfig) -> Result<LabeledSet> {
    match config.phase {
        Phase::Phase1 => base_only(set),
        Phase::Phase2 => {
            if set.classes_in(Split::LowShot).is_empty() {
                return Err(Error::invalid("phase 2 needs low-shot classes"));
            }
            oversample(set, config.oversample_factor)
        }
    }
}

pub fn train(params: ModelParams, set: &LabeledSet, config: &TrainConfig) -> Result<(ModelParams, TrainTrace)> {
    train_with_observer(params, set, config, |_| Ok(()))
}

/// [`train`], calling `observe` after every step. An error from the
/// observer stops training and is returned.
pub fn train_with_observer(
    mut params: ModelParams,
    set: &LabeledSet,
    config: &TrainConfig,
    mut observe: impl FnMut(&StepReport) -> Result<()>,
) -> Result<(ModelParams, TrainTrace)> {
    config.validate()?;
    let data = training_view(set, config)?;
    if data.is_empty() {
        return Err(Error::invalid("no training samples"));
    }
    if params.head.num_classes() != data.num_classes() {
        return Err(Error::shape(
            "train",
            format!(
                "head has {} rows but the {:?} set has {} classes",
                params.head.num_classes(),
                config.phase,
                data.num_classes()
            ),
        ));
    }
    if params.input_dim() != data.dim() {
        return Err(Error::shape(
            "train",
            format!(
                "model takes inputs of dim {}, data has {}",
                params.input_dim(),
                data.dim()
            ),
        ));
    }
    let split = data.split_of_class().to_vec();
    let lowshot = classes_in(&split, Split::LowShot);
    let check_up = config.loss.norm_prior == NormPrior::Up;

    let mut rng = SeededRng::new(config.seed);
    let mut state = TrainState::for_model(&params, &config.loss);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut lr = config.lr;
    let mut trace = TrainTrace::default();
    let start = Instant::now();

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let inputs = data.features().select_rows(chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| data.labels()[i]).collect();
            let report =
                sgd_step(&mut params, &inputs, &labels, &split, config, lr, &mut state).map_err(|e| match e {
                    Error::Diverged { term, .. } => Error::Diverged { term, epoch, step },
                    other => other,
                })?;
            if check_up {
                let touched = match report.prior_grad_w.as_ref() {
                    Some(g) => (0..split.len()).find(|&k| !lowshot.contains(&k) && g.row(k).iter().any(|&x| x != 0.0)),
                    None => Some(usize::MAX),
                };
                if let Some(k) = touched {
                    return Err(Error::Invariant(format!(
                        "UP prior gradient reached base row {k} at epoch {epoch}, step {step}"
                    )));
                }
            }
            loss_sum += report.loss;
            observe(&report)?;
        }
        lr *= config.lr_decay;

        let base = mean_sqnorm(&params.head, &split, Split::Base);
        trace.epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / data.len() as f64,
            alpha: if check_up { base } else { None },
            mean_lowshot_sqnorm: mean_sqnorm(&params.head, &split, Split::LowShot),
            mean_base_sqnorm: base,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok((params, trace))
}

/// Phase-1 model: MLP extractor over `dims` plus a head with one row per
/// base class of `set`.
pub fn init_phase1(set: &LabeledSet, dims: &[usize], seed: u64) -> Result<ModelParams> {
    let mut rng = SeededRng::new(seed);
    let extractor = if dims.len() < 2 {
        ExtractorParams::identity()
    } else {
        ExtractorParams::mlp(dims, &mut rng)?
    };
    let d = extractor.output_dim(set.dim());
    let k = set.classes_in(Split::Base).len();
    ModelParams::new(extractor, HeadWeights::init(k, d, &mut rng))
}

/// Phase-2 model: keeps `extractor`, draws a fresh head over all classes.
pub fn init_phase2(extractor: ExtractorParams, set: &LabeledSet, seed: u64) -> Result<ModelParams> {
    let mut rng = SeededRng::new(seed);
    let d = extractor.output_dim(set.dim());
    ModelParams::new(extractor, HeadWeights::init(set.num_classes(), d, &mut rng))
}

/// The eight phase-2 variants compared by [`run_comparison_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    FixedFeature,
    UpdateFeature,
    DirectTrain,
    ShrinkNorm,
    EqualNorm,
    UpOnly,
    CcsOnly,
    CcsPlusUp,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::FixedFeature,
        Method::UpdateFeature,
        Method::DirectTrain,
        Method::ShrinkNorm,
        Method::EqualNorm,
        Method::UpOnly,
        Method::CcsOnly,
        Method::CcsPlusUp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::FixedFeature => "Fixed Feature",
            Method::UpdateFeature => "Update Feature",
            Method::DirectTrain => "Direct Train",
            Method::ShrinkNorm => "Shrink Norm",
            Method::EqualNorm => "Equal Norm",
            Method::UpOnly => "UP Only",
            Method::CcsOnly => "CCS Only",
            Method::CcsPlusUp => "CCS plus UP",
        }
    }

    fn uses_ccs_features(self) -> bool {
        matches!(self, Method::CcsOnly | Method::CcsPlusUp)
    }

    fn prior(self) -> NormPrior {
        match self {
            Method::ShrinkNorm => NormPrior::Shrink,
            Method::EqualNorm => NormPrior::EqualNorm,
            Method::UpOnly | Method::CcsPlusUp => NormPrior::Up,
            _ => NormPrior::None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Shared settings for the comparison suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    /// MLP widths `[input, hidden.., output]` of the phase-1 extractor.
    pub extractor_dims: Vec<usize>,
    pub init_seed: u64,
    /// Phase-1 settings; its `lambda_ccs` is ignored in favour of
    /// 0 (plain features) or `ccs_lambda` (CCS features).
    pub phase1: TrainConfig,
    pub ccs_lambda: f64,
    /// Phase-2 settings; the prior and `update_features` are set per method.
    pub phase2: TrainConfig,
    /// Whether the shrink / equal-norm / UP variants fine-tune the extractor.
    pub prior_update_features: bool,
}

impl SuiteConfig {
    pub fn for_dim(d: usize) -> Self {
        Self {
            extractor_dims: vec![d, d],
            init_seed: 1,
            phase1: TrainConfig {
                seed: 2,
                ..TrainConfig::phase1()
            },
            ccs_lambda: 5.0,
            phase2: TrainConfig {
                seed: 3,
                ..TrainConfig::phase2()
            },
            prior_update_features: false,
        }
    }

    fn phase2_for(&self, method: Method) -> TrainConfig {
        let update_features = match method {
            Method::FixedFeature | Method::CcsOnly => false,
            Method::UpdateFeature | Method::DirectTrain => true,
            _ => self.prior_update_features,
        };
        TrainConfig {
            phase: Phase::Phase2,
            update_features,
            loss: LossConfig {
                norm_prior: method.prior(),
                lambda_ccs: 0.0,
                center_weight: 0.0,
                ..self.phase2.loss.clone()
            },
            ..self.phase2.clone()
        }
    }
}

/// Trained parameters for one suite entry.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub method: Method,
    pub params: ModelParams,
    pub trace: TrainTrace,
}

/// Trains every [`Method`] on the same data and seeds, in [`Method::ALL`]
/// order. Two phase-1 extractors are learned (plain cross entropy and with
/// CCS) and shared across the phase-2 variants that need them. Runs are
/// independent and execute on scoped threads.
pub fn run_comparison_suite(train_set: &LabeledSet, config: &SuiteConfig) -> Result<Vec<SuiteResult>> {
    if train_set.classes_in(Split::Base).is_empty() || train_set.classes_in(Split::LowShot).is_empty() {
        return Err(Error::invalid(
            "the comparison suite needs both base and low-shot classes",
        ));
    }
    let init = init_phase1(train_set, &config.extractor_dims, config.init_seed)?;
    let p1 = |lambda: f64| {
        let cfg = TrainConfig {
            phase: Phase::Phase1,
            loss: LossConfig {
                lambda_ccs: lambda,
                norm_prior: NormPrior::None,
                ..config.phase1.loss.clone()
            },
            ..config.phase1.clone()
        };
        train(init.clone(), train_set, &cfg).map(|(p, _)| p.extractor)
    };
    let (plain, ccs) = std::thread::scope(|s| {
        let h = s.spawn(|| p1(config.ccs_lambda));
        let plain = p1(0.0);
        (plain, h.join().expect("phase-1 worker panicked"))
    });
    let (plain, ccs) = (plain?, ccs?);

    let runs: Vec<Result<SuiteResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = Method::ALL
            .iter()
            .map(|&method| {
                let extractor = match method {
                    Method::DirectTrain => init.extractor.clone(),
                    m if m.uses_ccs_features() => ccs.clone(),
                    _ => plain.clone(),
                };
                let cfg = config.phase2_for(method);
                s.spawn(move || {
                    let params = init_phase2(extractor, train_set, cfg.seed)?;
                    let (params, trace) = train(params, train_set, &cfg)?;
                    Ok(SuiteResult { method, params, trace })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("phase-2 worker panicked"))
            .collect()
    });
    runs.into_iter().collect()
}
