use std::path::{Path, PathBuf};

use rfsvm::data::LabelColumn;
use rfsvm::forest::{
    MaxFeatures, DEFAULT_TREES, MAX_DEPTH_GRID, MAX_FEATURES_GRID, MIN_SAMPLES_LEAF_GRID,
    MIN_SAMPLES_SPLIT_GRID,
};
use rfsvm::stats::{DEFAULT_SAMPLES, ROPES};
use rfsvm::svm::{C_GRID, GAMMA_GRID};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};
use crate::methods::Method;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub label: LabelColumn,
    /// Defaults to the file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl DatasetSpec {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| self.path.display().to_string())
        })
    }
}

/// Random-forest baseline grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfGrid {
    #[serde(with = "depth_list")]
    pub max_depth: Vec<Option<usize>>,
    pub max_features: Vec<f64>,
    pub min_samples_leaf: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    /// Grid points actually evaluated, picked evenly from the full product.
    pub budget: usize,
}

impl Default for RfGrid {
    fn default() -> Self {
        Self {
            max_depth: MAX_DEPTH_GRID.to_vec(),
            max_features: MAX_FEATURES_GRID.to_vec(),
            min_samples_leaf: MIN_SAMPLES_LEAF_GRID.to_vec(),
            min_samples_split: MIN_SAMPLES_SPLIT_GRID.to_vec(),
            budget: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    pub rf: RfGrid,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            c: C_GRID.to_vec(),
            gamma: GAMMA_GRID.to_vec(),
            rf: RfGrid::default(),
        }
    }
}

/// Forest used by both the rf baseline and the rfsvm kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSettings {
    pub n_trees: usize,
    /// Candidate features per node for the rfsvm forest.
    pub max_features: MaxFeatures,
}

impl Default for ForestSettings {
    fn default() -> Self {
        Self {
            n_trees: DEFAULT_TREES,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSettings {
    pub kkt_tolerance: f64,
    pub max_passes: Option<usize>,
}

impl Default for SvmSettings {
    fn default() -> Self {
        Self {
            kkt_tolerance: 1e-3,
            max_passes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSettings {
    pub alpha: f64,
    pub ropes: Vec<f64>,
    pub samples: usize,
}

impl Default for StatsSettings {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            ropes: ROPES.to_vec(),
            samples: DEFAULT_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSpec>,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "ten")]
    pub repetitions: usize,
    #[serde(default = "three")]
    pub cv_folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub forest: ForestSettings,
    #[serde(default)]
    pub svm: SvmSettings,
    #[serde(default)]
    pub stats: StatsSettings,
    /// Write every final forest and SVM model as JSON under `models/`.
    #[serde(default)]
    pub save_models: bool,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn ten() -> usize {
    10
}

fn three() -> usize {
    3
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn on_grid(v: f64, grid: &[f64]) -> bool {
    grid.iter().any(|&g| ((v - g) / g).abs() < 1e-9)
}

fn check_subset<T: PartialEq + std::fmt::Debug>(name: &str, vals: &[T], allowed: &[T]) -> Result<()> {
    if vals.is_empty() {
        return Err(HarnessError::Config(format!("{name} grid is empty")));
    }
    match vals.iter().find(|v| !allowed.contains(v)) {
        Some(v) => Err(HarnessError::Config(format!("{name} value {v:?} not in {allowed:?}"))),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    /// Parses a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|source| HarnessError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut cfg.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|source| HarnessError::ConfigParse {
            path: PathBuf::from("<inline>"),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.datasets.is_empty() {
            return bad("no datasets".into());
        }
        if self.methods.is_empty() {
            return bad("no methods".into());
        }
        let mut names: Vec<String> = self.datasets.iter().map(|d| d.display_name()).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("dataset name {} used twice", w[0]));
        }
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        if methods.len() != self.methods.len() {
            return bad("methods listed twice".into());
        }
        if self.repetitions < 1 {
            return bad("repetitions must be at least 1".into());
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be at least 2".into());
        }
        if self.grids.c.is_empty() || !self.grids.c.iter().all(|&c| on_grid(c, &C_GRID)) {
            return bad(format!("C grid {:?} must be a non-empty subset of {C_GRID:?}", self.grids.c));
        }
        if self.grids.gamma.is_empty() || !self.grids.gamma.iter().all(|&g| on_grid(g, &GAMMA_GRID)) {
            return bad(format!(
                "gamma grid {:?} must be a non-empty subset of {GAMMA_GRID:?}",
                self.grids.gamma
            ));
        }
        let rf = &self.grids.rf;
        check_subset("max_depth", &rf.max_depth, &MAX_DEPTH_GRID)?;
        if rf.max_features.is_empty() || !rf.max_features.iter().all(|&f| on_grid(f, &MAX_FEATURES_GRID)) {
            return bad(format!(
                "max_features grid {:?} must be a non-empty subset of {MAX_FEATURES_GRID:?}",
                rf.max_features
            ));
        }
        check_subset("min_samples_leaf", &rf.min_samples_leaf, &MIN_SAMPLES_LEAF_GRID)?;
        check_subset("min_samples_split", &rf.min_samples_split, &MIN_SAMPLES_SPLIT_GRID)?;
        if rf.budget < 1 {
            return bad("rf grid budget must be at least 1".into());
        }
        if self.forest.n_trees < 1 {
            return bad("forest.n_trees must be at least 1".into());
        }
        if let MaxFeatures::Fraction(f) = self.forest.max_features {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("forest.max_features fraction {f} outside (0, 1]"));
            }
        }
        let tol = self.svm.kkt_tolerance;
        if !(tol > 0.0 && tol <= 0.1) {
            return bad(format!("svm.kkt_tolerance {tol} outside (0, 0.1]"));
        }
        if !(self.stats.alpha == 0.05 || self.stats.alpha == 0.10) {
            return bad("stats.alpha must be 0.05 or 0.10".into());
        }
        if self.stats.samples < 1 {
            return bad("stats.samples must be positive".into());
        }
        if self.stats.ropes.iter().any(|&r| !(r >= 0.0)) {
            return bad("ropes must be non-negative".into());
        }
        Ok(())
    }
}

/// `max_depth` lists mix integers with the string `"none"`.
mod depth_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Depth {
        Limit(usize),
        Keyword(String),
    }

    pub fn serialize<S: Serializer>(v: &[Option<usize>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|d| match d {
                Some(n) => Depth::Limit(*n),
                None => Depth::Keyword("none".into()),
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Option<usize>>, D::Error> {
        Vec::<Depth>::deserialize(d)?
            .into_iter()
            .map(|v| match v {
                Depth::Limit(n) => Ok(Some(n)),
                Depth::Keyword(k) if k.eq_ignore_ascii_case("none") => Ok(None),
                Depth::Keyword(k) => Err(serde::de::Error::custom(format!(
                    "max_depth entries are integers or \"none\", got {k:?}"
                ))),
            })
            .collect()
    }
}
