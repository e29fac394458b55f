//! Dataset ingestion, label encoding, splitting and HDLSS profiling.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

/// Labeled feature matrix. Immutable once built.
///
/// Labels are dense class ids in `[0, c)`, assigned in order of first
/// appearance; `class_names[j]` holds the original label string of class `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Dataset<T: Scalar> {
    name: String,
    feature_names: Vec<String>,
    features: Vec<T>,
    n: usize,
    m: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
    class_counts: Vec<usize>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset from row vectors and raw label strings.
    pub fn from_rows<S: AsRef<str>>(
        name: impl Into<String>,
        rows: Vec<Vec<T>>,
        labels: &[S],
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("dataset has no rows"));
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        let m = rows[0].len();
        let feature_names = (0..m).map(|j| format!("f{j}")).collect();
        let mut features = Vec::with_capacity(rows.len() * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: i,
                        column: format!("f{j}"),
                    });
                }
            }
            features.extend_from_slice(row);
        }
        Self::assemble(name.into(), feature_names, features, m, labels)
    }

    fn assemble<S: AsRef<str>>(
        name: String,
        feature_names: Vec<String>,
        features: Vec<T>,
        m: usize,
        raw_labels: &[S],
    ) -> Result<Self> {
        let n = raw_labels.len();
        if m == 0 {
            return Err(Error::Empty("dataset has no feature columns"));
        }
        let (labels, class_names) = encode_labels(raw_labels);
        if class_names.len() < 2 {
            return Err(Error::SingleClass);
        }
        let mut class_counts = vec![0; class_names.len()];
        for &l in &labels {
            class_counts[l] += 1;
        }
        Ok(Self {
            name,
            feature_names,
            features,
            n,
            m,
            labels,
            class_names,
            class_counts,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_instances(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.m
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.m..(i + 1) * self.m]
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> T {
        self.features[i * self.m + j]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// Maps encoded class ids back to their original label strings.
    pub fn decode_labels(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter().map(|&c| self.class_names[c].as_str()).collect()
    }

    /// Labels of the given instances, in order.
    pub fn labels_at(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }
}

fn encode_labels<S: AsRef<str>>(raw: &[S]) -> (Vec<usize>, Vec<String>) {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut names = Vec::new();
    let labels = raw
        .iter()
        .map(|s| {
            let s = s.as_ref();
            *ids.entry(s).or_insert_with(|| {
                names.push(s.to_string());
                names.len() - 1
            })
        })
        .collect();
    (labels, names)
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("class".into())
    }
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// All-digit strings select by position, anything else by header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "#{i}"),
            LabelColumn::Name(n) => write!(f, "{n:?}"),
        }
    }
}

/// Loads a headed, comma-separated file. The dataset is named after the file stem.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    parse_csv(name, file, label)
}

pub fn parse_csv<T: Scalar, R: Read>(
    name: impl Into<String>,
    reader: R,
    label: &LabelColumn,
) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = match label {
        LabelColumn::Index(i) if *i < header.len() => *i,
        LabelColumn::Name(n) => header
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| Error::MissingLabelColumn(label.to_string()))?,
        _ => return Err(Error::MissingLabelColumn(label.to_string())),
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let m = feature_names.len();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::DimensionMismatch {
                expected: header.len(),
                got: record.len(),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                labels.push(cell.to_string());
                continue;
            }
            let v: T = cell.parse().map_err(|_| Error::NonNumeric {
                row,
                column: header[j].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: header[j].clone(),
                });
            }
            features.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty("csv has no data rows"));
    }
    Dataset::assemble(name.into(), feature_names, features, m, &labels)
}

/// Ω from raw shape: average instances per class divided by feature count.
pub fn omega_from_shape(n: usize, m: usize, c: usize) -> f64 {
    n as f64 / c as f64 / m as f64
}

/// Ω = (1/m) · (Σ n_j / c). Smaller is more HDLSS.
pub fn omega<T: Scalar>(d: &Dataset<T>) -> f64 {
    let total: usize = d.class_counts().iter().sum();
    omega_from_shape(total, d.n_features(), d.n_classes())
}

/// Majority-class count over minority-class count.
pub fn imbalance_ratio_from_counts(counts: &[usize]) -> Result<f64> {
    let nonzero: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    if nonzero.len() < 2 {
        return Err(Error::SingleClass);
    }
    let max = *nonzero.iter().max().unwrap();
    let min = *nonzero.iter().min().unwrap();
    Ok(max as f64 / min as f64)
}

pub fn imbalance_ratio<T: Scalar>(d: &Dataset<T>) -> Result<f64> {
    imbalance_ratio_from_counts(d.class_counts())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HdlssBand {
    VeryHdlss,
    MidHdlss,
    NonHdlss,
}

impl HdlssBand {
    pub const ALL: [HdlssBand; 3] = [HdlssBand::VeryHdlss, HdlssBand::MidHdlss, HdlssBand::NonHdlss];

    pub fn of(omega: f64) -> Self {
        if omega < 0.015 {
            HdlssBand::VeryHdlss
        } else if omega < 1.0 {
            HdlssBand::MidHdlss
        } else {
            HdlssBand::NonHdlss
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HdlssBand::VeryHdlss => "very_hdlss",
            HdlssBand::MidHdlss => "mid_hdlss",
            HdlssBand::NonHdlss => "non_hdlss",
        }
    }
}

impl fmt::Display for HdlssBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HdlssProfile {
    pub omega: f64,
    pub imbalance_ratio: f64,
    pub band: HdlssBand,
}

pub fn profile<T: Scalar>(d: &Dataset<T>) -> Result<HdlssProfile> {
    let omega = omega(d);
    Ok(HdlssProfile {
        omega,
        imbalance_ratio: imbalance_ratio(d)?,
        band: HdlssBand::of(omega),
    })
}

/// One train/test partition of `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Stratified random halves: `|train| = ceil(n/2)` and each class is split
/// as evenly as possible between the halves.
pub fn random_half_splits<T: Scalar>(
    d: &Dataset<T>,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<SplitPlan>> {
    let n = d.n_instances();
    for (class, &count) in d.class_counts().iter().enumerate() {
        if count < 2 {
            return Err(Error::CannotStratify { class, count });
        }
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); d.n_classes()];
    for (i, &l) in d.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let target = n.div_ceil(2);

    (0..repetitions)
        .map(|rep| {
            let rep_seed = seed::derive(seed, rep as u64);
            let mut rng = seed::rng(rep_seed);
            let mut members = by_class.clone();
            for m in &mut members {
                m.shuffle(&mut rng);
            }
            // Odd-sized classes contribute their extra instance to train in a
            // random order until the ceil(n/2) target is met.
            let base: usize = members.iter().map(|m| m.len() / 2).sum();
            let mut odd: Vec<usize> = (0..members.len())
                .filter(|&j| members[j].len() % 2 == 1)
                .collect();
            odd.shuffle(&mut rng);
            let extra = target - base;
            let mut take: Vec<usize> = members.iter().map(|m| m.len() / 2).collect();
            for &j in odd.iter().take(extra) {
                take[j] += 1;
            }
            let mut train = Vec::with_capacity(target);
            let mut test = Vec::with_capacity(n - target);
            for (m, &t) in members.iter().zip(&take) {
                train.extend_from_slice(&m[..t]);
                test.extend_from_slice(&m[t..]);
            }
            train.sort_unstable();
            test.sort_unstable();
            Ok(SplitPlan {
                train_indices: train,
                test_indices: test,
                seed: rep_seed,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub fit: Vec<usize>,
    pub validate: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KFold {
    pub folds: Vec<Fold>,
    /// Classes with fewer than `k` members, which cannot reach every fold.
    pub warnings: Vec<String>,
}

/// Stratified k-fold partition of `train`.
///
/// Members of each class are shuffled and dealt round-robin over the folds,
/// continuing from where the previous class stopped, so fold sizes differ by
/// at most one. `labels` is indexed by instance id (i.e. by the values in
/// `train`).
pub fn kfold_indices(train: &[usize], labels: &[usize], k: usize, seed: u64) -> Result<KFold> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if k > train.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} training instances",
            train.len()
        )));
    }
    let n_classes = train.iter().map(|&i| labels[i] + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for &i in train {
        by_class[labels[i]].push(i);
    }
    let mut rng = seed::rng(seed);
    let mut warnings = Vec::new();
    let mut validate: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut slot = 0;
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            let msg = format!(
                "class {class} has {} member(s) for {k} folds; distributed round-robin",
                members.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        members.shuffle(&mut rng);
        for &i in members.iter() {
            validate[slot % k].push(i);
            slot += 1;
        }
    }
    let folds = (0..k)
        .map(|f| {
            let mut v = validate[f].clone();
            v.sort_unstable();
            let mut fit: Vec<usize> = validate
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            fit.sort_unstable();
            Fold { fit, validate: v }
        })
        .collect();
    Ok(KFold { folds, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset<f64> {
        let csv = "x,y,class\n1,2,a\n3,4,a\n5,6,b\n7,8,b\n";
        parse_csv("toy", csv.as_bytes(), &LabelColumn::Name("class".into())).unwrap()
    }

    fn dataset_with_counts(counts: &[usize]) -> Dataset<f64> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &k) in counts.iter().enumerate() {
            for i in 0..k {
                rows.push(vec![i as f64, c as f64]);
                labels.push(format!("c{c}"));
            }
        }
        Dataset::from_rows("synthetic", rows, &labels).unwrap()
    }

    #[test]
    fn reads_small_csv() {
        let d = toy();
        assert_eq!(d.n_instances(), 4);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.n_classes(), 2);
        assert_eq!(d.class_counts(), &[2, 2]);
        assert_eq!(d.row(2), &[5.0, 6.0]);
        assert_eq!(d.decode_labels(d.labels()), vec!["a", "a", "b", "b"]);
    }

    #[test]
    fn label_column_by_index_and_first_appearance_order() {
        let csv = "class,x\nz,1\ny,2\nz,3\n";
        let d: Dataset<f32> = parse_csv("t", csv.as_bytes(), &"0".parse().unwrap()).unwrap();
        assert_eq!(d.labels(), &[0, 1, 0]);
        assert_eq!(d.class_names(), &["z", "y"]);
        assert_eq!(d.feature_names(), &["x"]);
    }

    #[test]
    fn rejects_nan_and_text_cells() {
        let nan = "x,class\n1,a\nNaN,b\n";
        let err = parse_csv::<f64, _>("t", nan.as_bytes(), &LabelColumn::default()).unwrap_err();
        assert!(err.to_string().contains("non-finite feature"), "{err}");
        let text = "x,class\n1,a\nfoo,b\n";
        let err = parse_csv::<f64, _>("t", text.as_bytes(), &LabelColumn::default()).unwrap_err();
        assert!(matches!(err, Error::NonNumeric { .. }));
    }

    #[test]
    fn rejects_single_class_and_missing_column() {
        let one = "x,class\n1,a\n2,a\n";
        let err = parse_csv::<f64, _>("t", one.as_bytes(), &LabelColumn::default()).unwrap_err();
        assert!(matches!(err, Error::SingleClass));
        let err =
            parse_csv::<f64, _>("t", one.as_bytes(), &LabelColumn::Name("y".into())).unwrap_err();
        assert!(matches!(err, Error::MissingLabelColumn(_)));
        let err = load_csv::<f64>("/nonexistent/file.csv", &LabelColumn::default()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn omega_table_values() {
        assert!((omega_from_shape(72, 7129, 2) - 0.00505).abs() < 1e-5);
        assert!((omega_from_shape(4601, 57, 2) - 40.36).abs() < 5e-3);
        assert_eq!(omega_from_shape(100, 100, 1), 1.0);
        let d = toy();
        assert_eq!(omega(&d), 1.0);
    }

    #[test]
    fn imbalance_ratio_values() {
        assert!((imbalance_ratio_from_counts(&[357, 212]).unwrap() - 1.684).abs() < 5e-4);
        assert_eq!(imbalance_ratio_from_counts(&[19, 19]).unwrap(), 1.0);
        assert_eq!(imbalance_ratio_from_counts(&[10, 10, 10]).unwrap(), 1.0);
        assert!(imbalance_ratio_from_counts(&[5]).is_err());
    }

    #[test]
    fn band_boundaries() {
        assert_eq!(HdlssBand::of(0.0149), HdlssBand::VeryHdlss);
        assert_eq!(HdlssBand::of(0.015), HdlssBand::MidHdlss);
        assert_eq!(HdlssBand::of(0.999), HdlssBand::MidHdlss);
        assert_eq!(HdlssBand::of(1.0), HdlssBand::NonHdlss);
    }

    #[test]
    fn half_split_of_four_takes_one_per_class() {
        let d = toy();
        let plans = random_half_splits(&d, 1, 7).unwrap();
        let train = &plans[0].train_indices;
        assert_eq!(train.len(), 2);
        let labels = d.labels_at(train);
        assert!(labels.contains(&0) && labels.contains(&1));
    }

    #[test]
    fn half_splits_are_deterministic_and_sized() {
        let d = dataset_with_counts(&[100, 100]);
        let a = random_half_splits(&d, 10, 42).unwrap();
        let b = random_half_splits(&d, 10, 42).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert_eq!(p.train_indices.len(), 100);
            assert_eq!(p.test_indices.len(), 100);
        }
        assert_ne!(a[0].train_indices, a[1].train_indices);
    }

    #[test]
    fn half_split_rejects_singleton_class() {
        let d = dataset_with_counts(&[5, 1]);
        assert!(matches!(
            random_half_splits(&d, 1, 0),
            Err(Error::CannotStratify { class: 1, count: 1 })
        ));
    }

    #[test]
    fn kfold_six_into_three() {
        let labels = vec![0, 0, 0, 1, 1, 1];
        let train: Vec<usize> = (0..6).collect();
        let kf = kfold_indices(&train, &labels, 3, 1).unwrap();
        assert_eq!(kf.folds.len(), 3);
        for f in &kf.folds {
            assert_eq!(f.validate.len(), 2);
            assert_eq!(f.fit.len(), 4);
        }
        assert!(kf.warnings.is_empty());
    }

    #[test]
    fn kfold_three_classes_one_each_per_fold() {
        let labels = vec![0, 1, 2, 0, 1, 2, 0, 1, 2];
        let train: Vec<usize> = (0..9).collect();
        let kf = kfold_indices(&train, &labels, 3, 5).unwrap();
        for f in &kf.folds {
            let mut cls: Vec<usize> = f.validate.iter().map(|&i| labels[i]).collect();
            cls.sort_unstable();
            assert_eq!(cls, vec![0, 1, 2]);
        }
    }

    #[test]
    fn kfold_small_class_warns_and_errors() {
        let labels = vec![0, 0, 0, 0, 1];
        let train: Vec<usize> = (0..5).collect();
        let kf = kfold_indices(&train, &labels, 3, 0).unwrap();
        assert_eq!(kf.warnings.len(), 1);
        assert!(kfold_indices(&train, &labels, 6, 0).is_err());
        assert!(kfold_indices(&train, &labels, 1, 0).is_err());
    }
}
