//! Config-file driven commands: `gen-data`, `train`, `eval`, `compare`.
//!
//! A config is a TOML document. Every section and key is optional and
//! unknown keys are rejected:
//!
//! ```toml
//! seed = 11             # optional; derives every seed below
//! output_dir = "out"
//! wall_time = false     # write real seconds into traces (breaks byte-reproducibility)
//!
//! [dataset.synthetic]   # or: [dataset] train_csv = "..", test_csv = ".."
//! d = 16
//!
//! [model]
//! extractor_dims = [16, 16]   # [] for the identity extractor
//! init_seed = 1
//!
//! [phase1]
//! lr = 0.002
//! lambda_ccs = 5.0
//!
//! [phase2]
//! norm_prior = "up"     # none | up | shrink | equal_norm
//! oversample_factor = 3
//!
//! [eval]
//! precision_targets = [0.95, 0.99]
//! knn_k = 1             # 0 disables the KNN baseline
//!
//! [compare]
//! prior_update_features = false
//! ```

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::checkpoint::Checkpoint;
use crate::dataset::{generate_synthetic, load_labeled_csv, save_labeled_csv, LabeledSet, SyntheticSpec};
use crate::error::{Error, Result};
use crate::eval::{curve_csv, evaluate, target_key, EvalReport};
use crate::io::write_atomic;
use crate::losses::{LossConfig, NormPrior};
use crate::trainer::{
    init_phase1, init_phase2, run_comparison_suite, train, Method, SuiteConfig, TrainConfig, TrainTrace,
};

pub const TRAIN_CSV: &str = "train.csv";
pub const TEST_CSV: &str = "test.csv";
pub const PHASE1_CHECKPOINT: &str = "phase1.ckpt";
pub const PHASE1_TRACE: &str = "phase1_trace.csv";
pub const MODEL_CHECKPOINT: &str = "model.ckpt";
pub const PHASE2_TRACE: &str = "phase2_trace.csv";
pub const REPORT_JSON: &str = "report.json";
pub const CURVE_CSV: &str = "curve.csv";
pub const KNN_CURVE_CSV: &str = "knn_curve.csv";
pub const COMPARE_CSV: &str = "compare.csv";
pub const COMPARE_TXT: &str = "compare.txt";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub wall_time: bool,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub phase1: PhaseSection,
    pub phase2: PhaseSection,
    pub eval: EvalSection,
    pub compare: CompareSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            output_dir: PathBuf::from("out"),
            wall_time: false,
            dataset: DatasetSection {
                synthetic: Some(SyntheticSpec::default()),
                train_csv: None,
                test_csv: None,
            },
            model: ModelSection::default(),
            phase1: PhaseSection::default(),
            phase2: PhaseSection::default(),
            eval: EvalSection::default(),
            compare: CompareSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub train_csv: Option<PathBuf>,
    #[serde(default)]
    pub test_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `[input, hidden.., output]`; `None` means one linear `d -> d` layer,
    /// an empty list the identity extractor.
    pub extractor_dims: Option<Vec<usize>>,
    pub init_seed: u64,
    /// Skip phase 1 and take the extractor from this checkpoint.
    pub phase1_checkpoint: Option<PathBuf>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            extractor_dims: None,
            init_seed: 1,
            phase1_checkpoint: None,
        }
    }
}

/// Overrides on top of [`TrainConfig::phase1`] or [`TrainConfig::phase2`].
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseSection {
    pub lr: Option<f64>,
    pub lr_decay: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub oversample_factor: Option<usize>,
    pub update_features: Option<bool>,
    pub lambda_ccs: Option<f64>,
    pub norm_prior: Option<NormPrior>,
    pub prior_weight: Option<f64>,
    pub center_weight: Option<f64>,
    pub epsilon_norm: Option<f64>,
}

impl PhaseSection {
    fn apply(&self, base: TrainConfig) -> TrainConfig {
        let loss = LossConfig {
            lambda_ccs: self.lambda_ccs.unwrap_or(base.loss.lambda_ccs),
            norm_prior: self.norm_prior.unwrap_or(base.loss.norm_prior),
            prior_weight: self.prior_weight.unwrap_or(base.loss.prior_weight),
            center_weight: self.center_weight.unwrap_or(base.loss.center_weight),
            epsilon_norm: self.epsilon_norm.unwrap_or(base.loss.epsilon_norm),
        };
        TrainConfig {
            phase: base.phase,
            lr: self.lr.unwrap_or(base.lr),
            lr_decay: self.lr_decay.unwrap_or(base.lr_decay),
            epochs: self.epochs.unwrap_or(base.epochs),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            seed: self.seed.unwrap_or(base.seed),
            oversample_factor: self.oversample_factor.unwrap_or(base.oversample_factor),
            update_features: self.update_features.unwrap_or(base.update_features),
            loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub precision_targets: Vec<f64>,
    pub knn_k: usize,
    /// Defaults to `<output_dir>/model.ckpt`.
    pub checkpoint: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            precision_targets: vec![0.95, 0.99],
            knn_k: 1,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub prior_update_features: bool,
}

/// Seeds after applying the optional master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub data: u64,
    pub init: u64,
    pub phase1: u64,
    pub phase2: u64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; relative CSV and checkpoint paths resolve against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            let fix = |p: &mut Option<PathBuf>| {
                if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
                    *p = dir.join(&*p);
                }
            };
            fix(&mut cfg.dataset.train_csv);
            fix(&mut cfg.dataset.test_csv);
            fix(&mut cfg.model.phase1_checkpoint);
            fix(&mut cfg.eval.checkpoint);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        match (&d.synthetic, &d.train_csv, &d.test_csv) {
            (Some(spec), None, None) => spec.validate()?,
            (None, Some(_), Some(_)) => {}
            (None, None, None) => return Err(Error::Config("dataset: no source given".into())),
            _ => {
                return Err(Error::Config(
                    "dataset: give either [dataset.synthetic] or both train_csv and test_csv".into(),
                ))
            }
        }
        self.phase1_config()
            .validate()
            .map_err(|e| Error::Config(format!("phase1: {e}")))?;
        self.phase2_config()
            .validate()
            .map_err(|e| Error::Config(format!("phase2: {e}")))?;
        if self.eval.precision_targets.is_empty() {
            return Err(Error::Config("eval: precision_targets is empty".into()));
        }
        if let Some(t) = self.eval.precision_targets.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::Config(format!("eval: precision target {t} outside (0, 1]")));
        }
        Ok(())
    }

    /// With a master seed `s`: data `s`, init `s + 1`, phase 1 `s + 2`,
    /// phase 2 `s + 3`. Without one, the per-section seeds apply.
    pub fn seeds(&self) -> Seeds {
        match self.seed {
            Some(s) => Seeds {
                data: s,
                init: s.wrapping_add(1),
                phase1: s.wrapping_add(2),
                phase2: s.wrapping_add(3),
            },
            None => Seeds {
                data: self.dataset.synthetic.as_ref().map_or(0, |s| s.seed),
                init: self.model.init_seed,
                phase1: self.phase1.seed.unwrap_or(2),
                phase2: self.phase2.seed.unwrap_or(3),
            },
        }
    }

    pub fn phase1_config(&self) -> TrainConfig {
        let base = TrainConfig {
            loss: LossConfig {
                lambda_ccs: 5.0,
                ..LossConfig::default()
            },
            ..TrainConfig::phase1()
        };
        let mut cfg = self.phase1.apply(base);
        cfg.seed = self.seeds().phase1;
        cfg
    }

    pub fn phase2_config(&self) -> TrainConfig {
        let mut base = TrainConfig::phase2();
        base.loss.norm_prior = NormPrior::Up;
        let mut cfg = self.phase2.apply(base);
        cfg.seed = self.seeds().phase2;
        cfg
    }

    pub fn extractor_dims(&self, d: usize) -> Vec<usize> {
        self.model.extractor_dims.clone().unwrap_or_else(|| vec![d, d])
    }

    pub fn suite_config(&self, d: usize) -> SuiteConfig {
        let phase1 = self.phase1_config();
        SuiteConfig {
            extractor_dims: self.extractor_dims(d),
            init_seed: self.seeds().init,
            ccs_lambda: phase1.loss.lambda_ccs,
            phase1,
            phase2: self.phase2_config(),
            prior_update_features: self.compare.prior_update_features,
        }
    }

    /// Train and test sets from the configured source.
    pub fn load_data(&self) -> Result<(LabeledSet, LabeledSet)> {
        self.validate()?;
        match &self.dataset.synthetic {
            Some(spec) => generate_synthetic(&SyntheticSpec {
                seed: self.seeds().data,
                ..spec.clone()
            }),
            None => {
                let train = load_labeled_csv(self.dataset.train_csv.as_ref().unwrap())?;
                let test = load_labeled_csv(self.dataset.test_csv.as_ref().unwrap())?;
                if train.dim() != test.dim() {
                    return Err(Error::Config(format!(
                        "train data has {} features, test data {}",
                        train.dim(),
                        test.dim()
                    )));
                }
                Ok((train, test))
            }
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn ensure_output_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.output_dir).map_err(|e| Error::io(&self.output_dir, e))
    }
}

fn say(log: &mut dyn Write, msg: impl std::fmt::Display) -> Result<()> {
    writeln!(log, "{msg}").map_err(|e| Error::io("<stdout>", e))
}

/// Writes the synthetic train and test sets as CSV.
pub fn cmd_gen_data(config: &ExperimentConfig, log: &mut dyn Write) -> Result<(PathBuf, PathBuf)> {
    if config.dataset.synthetic.is_none() {
        return Err(Error::Config("gen-data needs a [dataset.synthetic] section".into()));
    }
    let (train, test) = config.load_data()?;
    config.ensure_output_dir()?;
    let (tp, sp) = (config.out(TRAIN_CSV), config.out(TEST_CSV));
    save_labeled_csv(&train, &tp)?;
    save_labeled_csv(&test, &sp)?;
    say(
        log,
        format_args!("wrote {} train rows to {}", train.len(), tp.display()),
    )?;
    say(log, format_args!("wrote {} test rows to {}", test.len(), sp.display()))?;
    Ok((tp, sp))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub phase1_trace: Option<TrainTrace>,
    pub phase2_trace: TrainTrace,
}

/// Phase 1 (unless a phase-1 checkpoint is configured) then phase 2.
/// Writes checkpoints and trace CSVs into the output directory.
pub fn cmd_train(config: &ExperimentConfig, log: &mut dyn Write) -> Result<TrainOutcome> {
    let (train_set, _) = config.load_data()?;
    let seeds = config.seeds();
    config.ensure_output_dir()?;

    let (extractor, phase1_trace) = match &config.model.phase1_checkpoint {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if ck.input_dim != train_set.dim() {
                return Err(Error::Config(format!(
                    "{} expects {} input features, data has {}",
                    path.display(),
                    ck.input_dim,
                    train_set.dim()
                )));
            }
            say(log, format_args!("phase 1 skipped, extractor from {}", path.display()))?;
            (ck.params.extractor, None)
        }
        None => {
            let cfg = config.phase1_config();
            let init = init_phase1(&train_set, &config.extractor_dims(train_set.dim()), seeds.init)?;
            let (params, trace) = train(init, &train_set, &cfg)?;
            Checkpoint::new(params.clone(), cfg.seed).save(config.out(PHASE1_CHECKPOINT))?;
            write_atomic(&config.out(PHASE1_TRACE), trace.to_csv(config.wall_time).as_bytes())?;
            if let Some(last) = trace.last() {
                say(
                    log,
                    format_args!("phase 1: {} epochs, final loss {:.6}", trace.epochs.len(), last.loss),
                )?;
            }
            (params.extractor, Some(trace))
        }
    };

    let cfg = config.phase2_config();
    let init = init_phase2(extractor, &train_set, cfg.seed)?;
    let (params, trace) = train(init, &train_set, &cfg)?;
    let checkpoint = Checkpoint::new(params, cfg.seed);
    checkpoint.save(config.out(MODEL_CHECKPOINT))?;
    write_atomic(&config.out(PHASE2_TRACE), trace.to_csv(config.wall_time).as_bytes())?;
    if let Some(last) = trace.last() {
        say(
            log,
            format_args!("phase 2: {} epochs, final loss {:.6}", trace.epochs.len(), last.loss),
        )?;
    }
    say(log, format_args!("wrote {}", config.out(MODEL_CHECKPOINT).display()))?;
    Ok(TrainOutcome {
        checkpoint,
        phase1_trace,
        phase2_trace: trace,
    })
}

/// Evaluates the configured checkpoint on the test set and writes the
/// report plus curve CSVs.
pub fn cmd_eval(config: &ExperimentConfig, log: &mut dyn Write) -> Result<EvalReport> {
    let (train_set, test) = config.load_data()?;
    let path = config
        .eval
        .checkpoint
        .clone()
        .unwrap_or_else(|| config.out(MODEL_CHECKPOINT));
    let ck = Checkpoint::load(&path)?;
    if ck.input_dim != test.dim() {
        return Err(Error::Config(format!(
            "{} expects {} input features, test data has {}",
            path.display(),
            ck.input_dim,
            test.dim()
        )));
    }
    let k = config.eval.knn_k;
    let knn = (k > 0).then_some((&train_set, k));
    let report = evaluate(&ck.params, &test, &config.eval.precision_targets, knn)?;
    report.validate()?;

    config.ensure_output_dir()?;
    write_atomic(&config.out(REPORT_JSON), report.to_json()?.as_bytes())?;
    write_atomic(&config.out(CURVE_CSV), curve_csv(&report.scores.curve).as_bytes())?;
    if let Some(knn) = &report.knn {
        write_atomic(&config.out(KNN_CURVE_CSV), curve_csv(&knn.scores.curve).as_bytes())?;
    }

    for (t, c) in &report.scores.coverage_at {
        say(log, format_args!("coverage@{t} ({}): {c:.4}", report.scores.scope))?;
    }
    if let Some(knn) = &report.knn {
        for (t, c) in &knn.scores.coverage_at {
            say(log, format_args!("knn(k={}) coverage@{t}: {c:.4}", knn.k))?;
        }
    }
    if let Some(b) = report.scores.top1_base {
        say(log, format_args!("top1 base: {b:.4}"))?;
    }
    if let Some(l) = report.scores.top1_lowshot {
        say(log, format_args!("top1 lowshot: {l:.4}"))?;
    }
    Ok(report)
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: Method,
    /// Low-shot coverage per precision target, in config order.
    pub coverage: Vec<(f64, f64)>,
    pub top1_base: f64,
    pub top1_lowshot: f64,
    pub mean_sqnorm_base: f64,
    pub mean_sqnorm_lowshot: f64,
}

impl CompareRow {
    pub fn coverage_at(&self, target: f64) -> Option<f64> {
        self.coverage.iter().find(|(t, _)| *t == target).map(|(_, c)| *c)
    }
}

fn compare_header(targets: &[f64]) -> Vec<String> {
    let mut h = vec!["method".to_string()];
    h.extend(targets.iter().map(|t| format!("lowshot_c@{}", target_key(*t))));
    h.extend(["top1_base", "top1_lowshot", "sqnorm_base", "sqnorm_lowshot"].map(String::from));
    h
}

fn compare_cells(row: &CompareRow) -> Vec<String> {
    let mut c = vec![row.method.name().to_string()];
    c.extend(row.coverage.iter().map(|(_, v)| format!("{v:.4}")));
    c.extend(
        [
            row.top1_base,
            row.top1_lowshot,
            row.mean_sqnorm_base,
            row.mean_sqnorm_lowshot,
        ]
        .map(|v| format!("{v:.4}")),
    );
    c
}

pub fn compare_csv(rows: &[CompareRow], targets: &[f64]) -> String {
    let mut out = compare_header(targets).join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&compare_cells(r).join(","));
        out.push('\n');
    }
    out
}

/// Left-aligned method column, right-aligned numbers.
pub fn compare_text(rows: &[CompareRow], targets: &[f64]) -> String {
    let mut table = vec![compare_header(targets)];
    table.extend(rows.iter().map(compare_cells));
    let ncol = table[0].len();
    let widths: Vec<usize> = (0..ncol)
        .map(|j| table.iter().map(|r| r[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &table {
        for (j, cell) in r.iter().enumerate() {
            if j == 0 {
                write!(out, "{cell:<w$}", w = widths[j]).unwrap();
            } else {
                write!(out, "  {cell:>w$}", w = widths[j]).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// Trains all eight methods and tabulates low-shot coverage and top-1.
pub fn cmd_compare(config: &ExperimentConfig, log: &mut dyn Write) -> Result<Vec<CompareRow>> {
    let (train_set, test) = config.load_data()?;
    let targets = &config.eval.precision_targets;
    let results = run_comparison_suite(&train_set, &config.suite_config(train_set.dim()))?;
    let mut rows = Vec::with_capacity(results.len());
    for r in &results {
        let report = evaluate(&r.params, &test, targets, None)?;
        report.validate()?;
        let missing = |what: &str| Error::Invariant(format!("{}: no {what} test records", r.method));
        rows.push(CompareRow {
            method: r.method,
            coverage: targets
                .iter()
                .map(|t| (*t, report.scores.coverage_at[&target_key(*t)]))
                .collect(),
            top1_base: report.scores.top1_base.ok_or_else(|| missing("base"))?,
            top1_lowshot: report.scores.top1_lowshot.ok_or_else(|| missing("low-shot"))?,
            mean_sqnorm_base: report.mean_sqnorm_base.ok_or_else(|| missing("base"))?,
            mean_sqnorm_lowshot: report.mean_sqnorm_lowshot.ok_or_else(|| missing("low-shot"))?,
        });
    }
    config.ensure_output_dir()?;
    let text = compare_text(&rows, targets);
    write_atomic(&config.out(COMPARE_CSV), compare_csv(&rows, targets).as_bytes())?;
    write_atomic(&config.out(COMPARE_TXT), text.as_bytes())?;
    log.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(ExperimentConfig::from_toml("sed = 3").is_err());
        assert!(ExperimentConfig::from_toml("[phase1]\nlearning_rate = 0.1").is_err());
        assert!(ExperimentConfig::from_toml("[dataset.synthetic]\ndim = 3").is_err());
    }

    #[test]
    fn dataset_needs_exactly_one_source() {
        assert!(ExperimentConfig::from_toml("[dataset]\n").is_err());
        assert!(ExperimentConfig::from_toml("[dataset]\ntrain_csv = \"a.csv\"").is_err());
        let both = "[dataset]\ntrain_csv = \"a\"\ntest_csv = \"b\"\n[dataset.synthetic]\nd = 2";
        assert!(ExperimentConfig::from_toml(both).is_err());
        let csv = ExperimentConfig::from_toml("[dataset]\ntrain_csv = \"a\"\ntest_csv = \"b\"").unwrap();
        assert!(csv.dataset.synthetic.is_none());
    }

    #[test]
    fn too_few_classes_rejected() {
        let t = "[dataset.synthetic]\nk_base = 0\nk_lowshot = 1";
        assert!(ExperimentConfig::from_toml(t).is_err());
    }

    #[test]
    fn phase_overrides_apply() {
        let c = ExperimentConfig::from_toml("[phase2]\nnorm_prior = \"equal_norm\"\nepochs = 4\nlr = 0.5").unwrap();
        let p2 = c.phase2_config();
        assert_eq!(p2.loss.norm_prior, NormPrior::EqualNorm);
        assert_eq!((p2.epochs, p2.lr), (4, 0.5));
        assert_eq!(p2.oversample_factor, TrainConfig::phase2().oversample_factor);
        assert!(ExperimentConfig::from_toml("[phase1]\nnorm_prior = \"up\"").is_err());
    }

    #[test]
    fn master_seed_derives_all_seeds() {
        let c = ExperimentConfig::from_toml("seed = 100").unwrap();
        assert_eq!(
            c.seeds(),
            Seeds {
                data: 100,
                init: 101,
                phase1: 102,
                phase2: 103
            }
        );
        assert_eq!(c.phase2_config().seed, 103);
        let d = ExperimentConfig::default().seeds();
        assert_eq!((d.data, d.init, d.phase1, d.phase2), (7, 1, 2, 3));
    }

    #[test]
    fn bad_precision_target() {
        assert!(ExperimentConfig::from_toml("[eval]\nprecision_targets = [0.0]").is_err());
        assert!(ExperimentConfig::from_toml("[eval]\nprecision_targets = []").is_err());
    }

    #[test]
    fn compare_table_layout() {
        let row = CompareRow {
            method: Method::UpOnly,
            coverage: vec![(0.95, 0.5)],
            top1_base: 1.0,
            top1_lowshot: 0.25,
            mean_sqnorm_base: 2.0,
            mean_sqnorm_lowshot: 1.0,
        };
        let csv = compare_csv(std::slice::from_ref(&row), &[0.95]);
        assert_eq!(
            csv,
            "method,lowshot_c@0.95,top1_base,top1_lowshot,sqnorm_base,sqnorm_lowshot\n\
             UP Only,0.5000,1.0000,0.2500,2.0000,1.0000\n"
        );
        let text = compare_text(&[row], &[0.95]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].len(), lines[1].len());
        assert!(lines[1].starts_with("UP Only"));
    }
}
