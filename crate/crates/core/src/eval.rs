//! Scoring: precision-coverage curves, coverage@precision, top-1, the cosine
//! KNN baseline, weight-norm diagnostics and the pairwise decision ratio.
//!
//! Records are ranked by confidence, highest first. At equal confidence a
//! wrong prediction ranks before a correct one, then input order decides,
//! so a reported coverage is never optimistic about ties.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledSet, Split};
use crate::error::{Error, Result};
use crate::linalg::{argmax, dot, l2_norm, log_sum_exp, Matrix};
use crate::losses::guarded_cosine;
use crate::model::{extract_batch, logits, HeadWeights, ModelParams};
use crate::trainer::mean_sqnorm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    pub confidence: f64,
    pub predicted: usize,
    pub actual: usize,
    pub split: Split,
}

impl PredictionRecord {
    pub fn correct(&self) -> bool {
        self.predicted == self.actual
    }
}

/// One record per test row: argmax of the logits (lowest index on ties),
/// confidence the max softmax probability.
pub fn predict_all(params: &ModelParams, test: &LabeledSet) -> Result<Vec<PredictionRecord>> {
    if test.dim() != params.input_dim() && !test.is_empty() {
        return Err(Error::shape(
            "predict_all",
            format!(
                "model takes inputs of dim {}, test data has {}",
                params.input_dim(),
                test.dim()
            ),
        ));
    }
    let phis = extract_batch(&params.extractor, test.features())?;
    let mut out = Vec::with_capacity(test.len());
    for (i, phi) in phis.row_iter().enumerate() {
        let z = logits(&params.head, phi)?;
        let best = argmax(&z);
        // max softmax probability = exp(z_max - logsumexp(z))
        let confidence = (z[best] - log_sum_exp(&z)).exp();
        let actual = test.labels()[i];
        out.push(PredictionRecord {
            confidence,
            predicted: best,
            actual,
            split: test.sample_split(i),
        });
    }
    Ok(out)
}

/// Indices of `records` in ranking order.
pub fn ranking(records: &[PredictionRecord]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        rb.confidence
            .partial_cmp(&ra.confidence)
            .unwrap_or(Ordering::Equal)
            .then_with(|| ra.correct().cmp(&rb.correct()))
            .then_with(|| a.cmp(&b))
    });
    idx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub coverage: f64,
    pub precision: f64,
}

/// `(i/n, correct_i/i)` for every prefix `i = 1..=n` of the ranking.
pub fn precision_coverage_curve(records: &[PredictionRecord]) -> Result<Vec<CurvePoint>> {
    if records.is_empty() {
        return Err(Error::invalid("no prediction records"));
    }
    let n = records.len() as f64;
    let mut correct = 0usize;
    Ok(ranking(records)
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            correct += usize::from(records[r].correct());
            CurvePoint {
                coverage: (i + 1) as f64 / n,
                precision: correct as f64 / (i + 1) as f64,
            }
        })
        .collect())
}

/// Largest answered fraction whose precision is at least `target`, 0 if no
/// prefix qualifies.
pub fn coverage_at_precision(records: &[PredictionRecord], target: f64) -> Result<f64> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::invalid(format!(
            "precision target must be in (0, 1], got {target}"
        )));
    }
    if records.is_empty() {
        return Err(Error::invalid("no prediction records"));
    }
    let mut best = 0usize;
    let mut correct = 0usize;
    for (i, r) in ranking(records).into_iter().enumerate() {
        correct += usize::from(records[r].correct());
        if correct as f64 / (i + 1) as f64 >= target {
            best = i + 1;
        }
    }
    Ok(best as f64 / records.len() as f64)
}

pub fn top1(records: &[PredictionRecord], split: Split) -> Result<f64> {
    let (hits, total) = records
        .iter()
        .filter(|r| r.split == split)
        .fold((0usize, 0usize), |(h, t), r| (h + usize::from(r.correct()), t + 1));
    if total == 0 {
        return Err(Error::invalid(format!("no {} records", split.as_str())));
    }
    Ok(hits as f64 / total as f64)
}

/// Cosine k-nearest-neighbour classifier over `gallery` features.
///
/// Neighbours are ranked by similarity (ties: lower gallery index). The
/// prediction is the most frequent label among the top `k`; a count tie goes
/// to the tied label with the most similar neighbour. Confidence is
/// `(s + 1) / 2` for `s` the mean similarity of the winning label's
/// neighbours.
pub fn knn_predict(gallery: &LabeledSet, queries: &LabeledSet, k: usize) -> Result<Vec<PredictionRecord>> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if gallery.is_empty() {
        return Err(Error::invalid("empty gallery"));
    }
    if k > gallery.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds gallery size {}",
            gallery.len()
        )));
    }
    if gallery.dim() != queries.dim() {
        return Err(Error::shape(
            "knn_predict",
            format!("gallery dim {} vs query dim {}", gallery.dim(), queries.dim()),
        ));
    }
    let eps = 1e-12;
    let g = gallery.features();
    let mut out = Vec::with_capacity(queries.len());
    for (qi, q) in queries.features().row_iter().enumerate() {
        let mut sims: Vec<(f64, usize)> = g.row_iter().map(|r| guarded_cosine(q, r, eps)).zip(0..).collect();
        sims.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
        sims.truncate(k);
        // label -> (count, similarity sum, rank of first appearance)
        let mut votes: BTreeMap<usize, (usize, f64, usize)> = BTreeMap::new();
        for (rank, &(s, gi)) in sims.iter().enumerate() {
            let e = votes.entry(gallery.labels()[gi]).or_insert((0, 0.0, rank));
            e.0 += 1;
            e.1 += s;
        }
        let (&label, &(count, sum, _)) = votes
            .iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .2.cmp(&a.1 .2)))
            .expect("k >= 1");
        let mean = sum / count as f64;
        out.push(PredictionRecord {
            confidence: (mean + 1.0) / 2.0,
            predicted: label,
            actual: queries.labels()[qi],
            split: queries.sample_split(qi),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightNormReport {
    pub norms: Vec<f64>,
    pub mean_sqnorm_base: Option<f64>,
    pub mean_sqnorm_lowshot: Option<f64>,
}

pub fn weight_norm_report(head: &HeadWeights, split_of_class: &[Split]) -> Result<WeightNormReport> {
    if split_of_class.len() != head.num_classes() {
        return Err(Error::shape(
            "weight_norm_report",
            format!(
                "{} class tags for {} head rows",
                split_of_class.len(),
                head.num_classes()
            ),
        ));
    }
    Ok(WeightNormReport {
        norms: head.w.row_iter().map(l2_norm).collect(),
        mean_sqnorm_base: mean_sqnorm(head, split_of_class, Split::Base),
        mean_sqnorm_lowshot: mean_sqnorm(head, split_of_class, Split::LowShot),
    })
}

/// `p_j / p_k = exp((w_j - w_k)ᵀ φ)`, also as a logarithm. The ratio
/// saturates to `inf` or 0 where the log is out of `f64` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRatio {
    pub log_ratio: f64,
    pub ratio: f64,
}

pub fn decision_ratio(w_j: &[f64], w_k: &[f64], phi: &[f64]) -> Result<DecisionRatio> {
    if w_j.len() != w_k.len() || w_j.len() != phi.len() {
        return Err(Error::shape(
            "decision_ratio",
            format!("lengths {}, {}, {}", w_j.len(), w_k.len(), phi.len()),
        ));
    }
    let log_ratio = dot(w_j, phi) - dot(w_k, phi);
    Ok(DecisionRatio {
        log_ratio,
        ratio: log_ratio.exp(),
    })
}

/// Number of rows of `points` on class `j`'s side of the j/k hyperplane,
/// i.e. with `decision_ratio(w_j, w_k, φ) > 1`.
pub fn count_j_side(w_j: &[f64], w_k: &[f64], points: &Matrix) -> Result<usize> {
    let mut n = 0;
    for p in points.row_iter() {
        if decision_ratio(w_j, w_k, p)?.log_ratio > 0.0 {
            n += 1;
        }
    }
    Ok(n)
}

/// Evenly spaced `steps x steps` grid over `[lo, hi]²`, row-major.
pub fn grid_2d(lo: f64, hi: f64, steps: usize) -> Matrix {
    let step = if steps > 1 { (hi - lo) / (steps - 1) as f64 } else { 0.0 };
    let mut data = Vec::with_capacity(steps * steps * 2);
    for i in 0..steps {
        for j in 0..steps {
            data.push(lo + step * i as f64);
            data.push(lo + step * j as f64);
        }
    }
    Matrix::from_vec(steps * steps, 2, data).expect("finite grid")
}

/// Coverage curve and coverage@precision for one prediction source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBlock {
    /// `lowshot` when the test set has low-shot samples (only those are
    /// scored), otherwise `all`.
    pub scope: String,
    pub curve: Vec<CurvePoint>,
    pub coverage_at: BTreeMap<String, f64>,
    pub top1_base: Option<f64>,
    pub top1_lowshot: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnReport {
    pub k: usize,
    #[serde(flatten)]
    pub scores: ScoreBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub scores: ScoreBlock,
    pub weight_norms: Vec<f64>,
    pub mean_sqnorm_base: Option<f64>,
    pub mean_sqnorm_lowshot: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub knn: Option<KnnReport>,
}

/// Map key for a precision target, e.g. `0.95`.
pub fn target_key(t: f64) -> String {
    format!("{t}")
}

pub fn score_records(records: &[PredictionRecord], targets: &[f64]) -> Result<ScoreBlock> {
    let low: Vec<PredictionRecord> = records.iter().copied().filter(|r| r.split == Split::LowShot).collect();
    let (scope, scored) = if low.is_empty() {
        ("all", records)
    } else {
        ("lowshot", low.as_slice())
    };
    let mut coverage_at = BTreeMap::new();
    for &t in targets {
        coverage_at.insert(target_key(t), coverage_at_precision(scored, t)?);
    }
    Ok(ScoreBlock {
        scope: scope.to_string(),
        curve: precision_coverage_curve(scored)?,
        coverage_at,
        top1_base: top1(records, Split::Base).ok(),
        top1_lowshot: top1(records, Split::LowShot).ok(),
    })
}

/// Full report for `params` on `test`. With `knn = Some((gallery, k))` the
/// KNN baseline runs in the same feature space, the gallery being the raw
/// training rows passed through the model's extractor.
pub fn evaluate(
    params: &ModelParams,
    test: &LabeledSet,
    targets: &[f64],
    knn: Option<(&LabeledSet, usize)>,
) -> Result<EvalReport> {
    if test.num_classes() > params.head.num_classes() {
        return Err(Error::shape(
            "evaluate",
            format!(
                "test data has {} classes, model scores {}",
                test.num_classes(),
                params.head.num_classes()
            ),
        ));
    }
    let records = predict_all(params, test)?;
    let scores = score_records(&records, targets)?;
    let mut split = test.split_of_class().to_vec();
    split.resize(params.head.num_classes(), Split::Base);
    let norms = weight_norm_report(&params.head, &split)?;
    let knn = match knn {
        Some((gallery, k)) => {
            let g = gallery.with_features(extract_batch(&params.extractor, gallery.features())?)?;
            let q = test.with_features(extract_batch(&params.extractor, test.features())?)?;
            let recs = knn_predict(&g, &q, k)?;
            Some(KnnReport {
                k,
                scores: score_records(&recs, targets)?,
            })
        }
        None => None,
    };
    Ok(EvalReport {
        scores,
        weight_norms: norms.norms,
        mean_sqnorm_base: norms.mean_sqnorm_base,
        mean_sqnorm_lowshot: norms.mean_sqnorm_lowshot,
        knn,
    })
}

impl EvalReport {
    /// Curve coverage strictly increasing, every coverage@precision in [0, 1].
    pub fn validate(&self) -> Result<()> {
        let blocks = std::iter::once(&self.scores).chain(self.knn.as_ref().map(|k| &k.scores));
        for b in blocks {
            if b.curve.windows(2).any(|w| w[1].coverage <= w[0].coverage) {
                return Err(Error::Invariant("curve coverage not strictly increasing".into()));
            }
            if b.coverage_at.values().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::Invariant("coverage@precision outside [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// `coverage,precision` rows.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("coverage,precision\n");
    for p in curve {
        out.push_str(&format!("{},{}\n", p.coverage, p.precision));
    }
    out
}
