//! Labeled feature sets with a base / low-shot class partition, the synthetic
//! Gaussian-cluster generator, low-shot oversampling and the CSV format.
//!
//! CSV layout: a header `label,split,f0,f1,...,f{d-1}` followed by one row per
//! sample. `split` is `base` or `lowshot`. Features are written with Rust's
//! shortest round-trip float formatting, so `load(save(s)) == s` bit for bit.
//! A class index that never appears in a file is tagged `base`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gaussian_sample, Matrix, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Base,
    #[serde(rename = "lowshot")]
    LowShot,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Base => "base",
            Split::LowShot => "lowshot",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "base" => Ok(Split::Base),
            "lowshot" => Ok(Split::LowShot),
            other => Err(format!("unknown split tag {other:?}")),
        }
    }
}

/// Features, integer labels and the per-class split tag.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    features: Matrix,
    labels: Vec<usize>,
    split_of_class: Vec<Split>,
}

impl LabeledSet {
    pub fn new(features: Matrix, labels: Vec<usize>, split_of_class: Vec<Split>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::shape(
                "LabeledSet::new",
                format!("{} feature rows but {} labels", features.rows(), labels.len()),
            ));
        }
        let k = split_of_class.len();
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(format!("label {bad} outside [0, {k})")));
        }
        Ok(Self {
            features,
            labels,
            split_of_class,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn split_of_class(&self) -> &[Split] {
        &self.split_of_class
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.split_of_class.len()
    }

    pub fn split_of(&self, class: usize) -> Split {
        self.split_of_class[class]
    }

    /// Split of the `i`-th sample's class.
    pub fn sample_split(&self, i: usize) -> Split {
        self.split_of_class[self.labels[i]]
    }

    /// Class indices tagged `split`, ascending.
    pub fn classes_in(&self, split: Split) -> Vec<usize> {
        classes_in(&self.split_of_class, split)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Errors unless every class has at least one sample.
    pub fn check_every_class_present(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(k) => Err(Error::invalid(format!("class {k} has no samples"))),
            None => Ok(()),
        }
    }

    /// Subset by sample index, keeping the class partition.
    pub fn select(&self, indices: &[usize]) -> LabeledSet {
        LabeledSet {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split_of_class: self.split_of_class.clone(),
        }
    }

    /// Samples whose class is tagged `split`.
    pub fn filter_split(&self, split: Split) -> LabeledSet {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.sample_split(i) == split).collect();
        self.select(&idx)
    }

    pub fn with_features(&self, features: Matrix) -> Result<LabeledSet> {
        LabeledSet::new(features, self.labels.clone(), self.split_of_class.clone())
    }
}

pub fn classes_in(split_of_class: &[Split], split: Split) -> Vec<usize> {
    split_of_class
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == split)
        .map(|(k, _)| k)
        .collect()
}

/// Parameters of the synthetic base / low-shot benchmark. Base classes take
/// indices `0..k_base`, low-shot classes `k_base..k_base + k_lowshot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub d: usize,
    pub k_base: usize,
    pub k_lowshot: usize,
    pub train_per_base: usize,
    pub train_per_lowshot: usize,
    pub test_per_class: usize,
    pub mean_scale: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            d: 16,
            k_base: 40,
            k_lowshot: 10,
            train_per_base: 50,
            train_per_lowshot: 1,
            test_per_class: 20,
            mean_scale: 3.0,
            sigma: 1.0,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn num_classes(&self) -> usize {
        self.k_base + self.k_lowshot
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 classes, got k_base={} k_lowshot={}",
                self.k_base, self.k_lowshot
            )));
        }
        if self.d == 0 {
            return Err(Error::invalid("feature dimension d must be >= 1"));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::invalid(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if !self.mean_scale.is_finite() || self.mean_scale < 0.0 {
            return Err(Error::invalid(format!(
                "mean_scale must be finite and >= 0, got {}",
                self.mean_scale
            )));
        }
        if self.train_per_lowshot == 0 {
            return Err(Error::invalid("train_per_lowshot must be >= 1"));
        }
        if self.k_base > 0 && self.train_per_base == 0 {
            return Err(Error::invalid("train_per_base must be >= 1 when k_base > 0"));
        }
        Ok(())
    }

    pub fn split_of_class(&self) -> Vec<Split> {
        let mut s = vec![Split::Base; self.k_base];
        s.extend(std::iter::repeat_n(Split::LowShot, self.k_lowshot));
        s
    }
}

/// Draws class means uniformly in `[-mean_scale, mean_scale]^d`, then every
/// class's training rows, then every class's test rows, all from one stream
/// seeded by `spec.seed`. Rows are grouped by class in index order.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(LabeledSet, LabeledSet)> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let k = spec.num_classes();
    let split_of_class = spec.split_of_class();

    let means: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..spec.d)
                .map(|_| rng.uniform(-spec.mean_scale, spec.mean_scale))
                .collect()
        })
        .collect();

    let mut draw = |per_class: &dyn Fn(Split) -> usize| -> Result<LabeledSet> {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (class, mean) in means.iter().enumerate() {
            let n = per_class(split_of_class[class]);
            let rows = gaussian_sample(&mut rng, mean, spec.sigma, n)?;
            data.extend(rows.into_vec());
            labels.extend(std::iter::repeat_n(class, n));
        }
        let features = Matrix::from_vec(labels.len(), spec.d, data)?;
        LabeledSet::new(features, labels, split_of_class.clone())
    };

    let train = draw(&|s| match s {
        Split::Base => spec.train_per_base,
        Split::LowShot => spec.train_per_lowshot,
    })?;
    let test = draw(&|_| spec.test_per_class)?;
    Ok((train, test))
}

/// Repeats every low-shot sample `factor` times. The original rows come
/// first in their order; the `factor - 1` extra copies of each low-shot row
/// follow, grouped per row.
pub fn oversample(set: &LabeledSet, factor: usize) -> Result<LabeledSet> {
    if factor == 0 {
        return Err(Error::invalid("oversample factor must be >= 1"));
    }
    let mut idx: Vec<usize> = (0..set.len()).collect();
    for i in 0..set.len() {
        if set.sample_split(i) == Split::LowShot {
            idx.extend(std::iter::repeat_n(i, factor - 1));
        }
    }
    Ok(set.select(&idx))
}

pub fn to_csv_string(set: &LabeledSet) -> String {
    let mut out = String::from("label,split");
    for j in 0..set.dim() {
        write!(out, ",f{j}").unwrap();
    }
    out.push('\n');
    for (i, row) in set.features.row_iter().enumerate() {
        let label = set.labels[i];
        write!(out, "{label},{}", set.split_of(label).as_str()).unwrap();
        for x in row {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str, path: &Path) -> Result<LabeledSet> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "no samples".into()))?;
    let cols: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if cols.len() < 2 || cols[0] != "label" || cols[1] != "split" {
        return Err(err(1, format!("bad header {header:?}, expected label,split,f0,...")));
    }
    let d = cols.len() - 2;
    for (j, c) in cols[2..].iter().enumerate() {
        if *c != format!("f{j}") {
            return Err(err(1, format!("bad feature column {c:?}, expected f{j}")));
        }
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut splits: Vec<Option<Split>> = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 2 {
            return Err(err(
                lineno,
                format!("expected {} fields, found {}", d + 2, fields.len()),
            ));
        }
        let label: usize = fields[0]
            .parse()
            .map_err(|e| err(lineno, format!("bad label {:?}: {e}", fields[0])))?;
        let split: Split = fields[1].parse().map_err(|e| err(lineno, e))?;
        if splits.len() <= label {
            splits.resize(label + 1, None);
        }
        match splits[label] {
            Some(prev) if prev != split => {
                return Err(err(
                    lineno,
                    format!(
                        "class {label} tagged {} here but {} earlier",
                        split.as_str(),
                        prev.as_str()
                    ),
                ));
            }
            _ => splits[label] = Some(split),
        }
        for f in &fields[2..] {
            let x: f64 = f.parse().map_err(|e| err(lineno, format!("bad feature {f:?}: {e}")))?;
            if !x.is_finite() {
                return Err(err(lineno, format!("non-finite feature {f:?}")));
            }
            data.push(x);
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(err(1, "no samples".into()));
    }
    let split_of_class = splits.into_iter().map(|s| s.unwrap_or(Split::Base)).collect();
    LabeledSet::new(Matrix::from_vec(labels.len(), d, data)?, labels, split_of_class)
}

pub fn load_labeled_csv(path: impl AsRef<Path>) -> Result<LabeledSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path)
}

pub fn save_labeled_csv(set: &LabeledSet, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), to_csv_string(set).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn tiny(split_of_class: Vec<Split>, rows: &[(&[f64], usize)]) -> LabeledSet {
        let feats: Vec<&[f64]> = rows.iter().map(|r| r.0).collect();
        LabeledSet::new(
            Matrix::from_rows(&feats).unwrap(),
            rows.iter().map(|r| r.1).collect(),
            split_of_class,
        )
        .unwrap()
    }

    #[test]
    fn single_base_class() {
        let spec = SyntheticSpec {
            k_base: 1,
            k_lowshot: 0,
            train_per_base: 5,
            ..Default::default()
        };
        // one class is rejected; the generator needs two
        assert!(generate_synthetic(&spec).is_err());

        let spec = SyntheticSpec {
            k_base: 2,
            k_lowshot: 0,
            train_per_base: 5,
            ..Default::default()
        };
        let (train, _) = generate_synthetic(&spec).unwrap();
        let class0: Vec<usize> = (0..train.len()).filter(|&i| train.labels()[i] == 0).collect();
        assert_eq!(class0.len(), 5);
        assert_eq!(class0, vec![0, 1, 2, 3, 4]);
        assert!(class0.iter().all(|&i| train.sample_split(i) == Split::Base));
    }

    #[test]
    fn generator_shapes_and_determinism() {
        let spec = SyntheticSpec::default();
        let (train, test) = generate_synthetic(&spec).unwrap();
        assert_eq!(train.len(), 40 * 50 + 10);
        assert_eq!(test.len(), 50 * 20);
        assert_eq!(train.dim(), 16);
        train.check_every_class_present().unwrap();
        assert_eq!(train.classes_in(Split::LowShot), (40..50).collect::<Vec<_>>());

        let (train2, test2) = generate_synthetic(&spec).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
    }

    #[test]
    fn zero_sigma_puts_rows_on_means() {
        let spec = SyntheticSpec {
            sigma: 0.0,
            d: 3,
            k_base: 2,
            k_lowshot: 1,
            train_per_base: 4,
            test_per_class: 2,
            ..Default::default()
        };
        let (train, test) = generate_synthetic(&spec).unwrap();
        for class in 0..3 {
            let rows: Vec<&[f64]> = (0..train.len())
                .filter(|&i| train.labels()[i] == class)
                .map(|i| train.features().row(i))
                .chain(
                    (0..test.len())
                        .filter(|&i| test.labels()[i] == class)
                        .map(|i| test.features().row(i)),
                )
                .collect();
            assert!(rows.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn train_and_test_rows_are_distinct_draws() {
        let (train, test) = generate_synthetic(&SyntheticSpec::default()).unwrap();
        let bits = |r: &[f64]| r.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let seen: BTreeSet<Vec<u64>> = train.features().row_iter().map(bits).collect();
        assert_eq!(seen.len(), train.len());
        assert!(test.features().row_iter().all(|r| !seen.contains(&bits(r))));
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            SyntheticSpec {
                k_base: 0,
                k_lowshot: 1,
                ..Default::default()
            },
            SyntheticSpec {
                sigma: -1.0,
                ..Default::default()
            },
            SyntheticSpec {
                train_per_lowshot: 0,
                ..Default::default()
            },
        ] {
            assert!(generate_synthetic(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn oversample_counts() {
        let set = tiny(
            vec![Split::Base, Split::LowShot, Split::LowShot],
            &[(&[1.0], 0), (&[2.0], 0), (&[3.0], 1), (&[4.0], 0), (&[5.0], 2)],
        );
        assert_eq!(oversample(&set, 1).unwrap(), set);
        let out = oversample(&set, 4).unwrap();
        assert_eq!(out.len(), 3 + 8);
        assert_eq!(&out.labels()[..5], set.labels());
        assert!(oversample(&set, 0).is_err());

        let one = tiny(vec![Split::Base, Split::LowShot], &[(&[0.5, 0.5], 1)]);
        let out = oversample(&one, 100).unwrap();
        assert_eq!(out.len(), 100);
        assert!(out.features().row_iter().all(|r| r == [0.5, 0.5]));
    }

    #[test]
    fn csv_round_trip() {
        let spec = SyntheticSpec {
            k_base: 3,
            k_lowshot: 2,
            train_per_base: 4,
            ..Default::default()
        };
        let (train, _) = generate_synthetic(&spec).unwrap();
        let text = to_csv_string(&train);
        let back = parse_csv(&text, Path::new("mem")).unwrap();
        assert_eq!(back, train);
    }

    #[test]
    fn csv_handwritten() {
        let text = "label,split,f0,f1\n0,base,1.25,-3\n1,lowshot,0.1,2e-3\n";
        let set = parse_csv(text, Path::new("t.csv")).unwrap();
        assert_eq!(set.features().as_slice(), &[1.25, -3.0, 0.1, 0.002]);
        assert_eq!(set.labels(), &[0, 1]);
        assert_eq!(set.split_of_class(), &[Split::Base, Split::LowShot]);
    }

    #[test]
    fn csv_errors_name_lines() {
        let p = Path::new("x.csv");
        let e = parse_csv("label,split,f0\n", p).unwrap_err();
        assert!(e.to_string().contains("no samples"), "{e}");
        let e = parse_csv("", p).unwrap_err();
        assert!(e.to_string().contains("no samples"), "{e}");

        let e = parse_csv("label,split,f0\n0,base,1\n1,base,1,2\n", p).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_csv("label,split,f0\n0,novel,1\n", p).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse_csv("label,split,f0\n0,base,abc\n", p).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse_csv("label,split,f0\n0,base,1\n0,lowshot,2\n", p).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
    }

    proptest! {
        #[test]
        fn oversample_keeps_distinct_pairs(
            labels in prop::collection::vec(0usize..4, 1..30),
            factor in 1usize..6,
        ) {
            let split = vec![Split::Base, Split::LowShot, Split::Base, Split::LowShot];
            let feats: Vec<Vec<f64>> = labels.iter().enumerate().map(|(i, _)| vec![i as f64]).collect();
            let set = LabeledSet::new(Matrix::from_rows(&feats).unwrap(), labels.clone(), split).unwrap();
            let out = oversample(&set, factor).unwrap();
            let pairs = |s: &LabeledSet| -> BTreeSet<(u64, usize)> {
                (0..s.len()).map(|i| (s.features().row(i)[0].to_bits(), s.labels()[i])).collect()
            };
            prop_assert_eq!(pairs(&set), pairs(&out));
            let low = labels.iter().filter(|&&l| l % 2 == 1).count();
            prop_assert_eq!(out.len(), set.len() + low * (factor - 1));
        }

        #[test]
        fn splits_partition_classes(tags in prop::collection::vec(any::<bool>(), 1..40)) {
            let split: Vec<Split> = tags.iter().map(|&t| if t { Split::LowShot } else { Split::Base }).collect();
            let base = classes_in(&split, Split::Base);
            let low = classes_in(&split, Split::LowShot);
            let mut all: Vec<usize> = base.iter().chain(&low).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..split.len()).collect::<Vec<_>>());
            prop_assert!(base.iter().all(|b| !low.contains(b)));
        }
    }
}
