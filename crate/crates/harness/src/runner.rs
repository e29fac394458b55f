use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rfsvm::data::{load_csv, profile, random_half_splits, Dataset, HdlssProfile};
use rfsvm::seed;
use serde::{Deserialize, Serialize};

use crate::config::{DatasetSpec, ExperimentConfig};
use crate::error::{io_err, HarnessError, Result};
use crate::methods::{Method, Params};
use crate::metrics::{accuracy, mean_std, micro_f1};
use crate::tune::tune_and_fit;

const SPLIT_STREAM: u64 = 0;

/// Stable 64-bit FNV-1a, so per-dataset seeds follow the dataset name rather
/// than its position in the config.
pub fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn dataset_seed(master: u64, name: &str) -> u64 {
    seed::derive(master, name_hash(name))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub dataset: String,
    pub method: Method,
    pub accuracies: Vec<f64>,
    pub micro_f1: Vec<f64>,
    pub mean_accuracy: f64,
    /// Population standard deviation over repetitions.
    pub std_accuracy: f64,
    pub mean_micro_f1: f64,
    pub std_micro_f1: f64,
    pub chosen: Vec<Params>,
    /// CV accuracy of the chosen point, per repetition.
    pub cv_accuracy: Vec<f64>,
    pub converged: Vec<bool>,
    pub split_seeds: Vec<u64>,
    pub warnings: Vec<String>,
    /// Seconds per repetition. Kept out of the serialized results so reports
    /// stay byte-identical across runs.
    #[serde(skip)]
    pub wall_clock: Vec<f64>,
}

/// Result of one (dataset, method) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Cell {
    Done(MethodResult),
    Absent {
        dataset: String,
        method: Method,
        diagnostic: String,
    },
}

impl Cell {
    pub fn dataset(&self) -> &str {
        match self {
            Cell::Done(r) => &r.dataset,
            Cell::Absent { dataset, .. } => dataset,
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Cell::Done(r) => r.method,
            Cell::Absent { method, .. } => *method,
        }
    }

    pub fn result(&self) -> Option<&MethodResult> {
        match self {
            Cell::Done(r) => Some(r),
            Cell::Absent { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub path: PathBuf,
    pub n_instances: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub class_names: Vec<String>,
    pub profile: HdlssProfile,
}

impl DatasetInfo {
    pub fn of(d: &Dataset<f64>, path: &Path) -> Result<Self> {
        Ok(Self {
            name: d.name().to_string(),
            path: path.to_path_buf(),
            n_instances: d.n_instances(),
            n_features: d.n_features(),
            n_classes: d.n_classes(),
            class_names: d.class_names().to_vec(),
            profile: profile(d)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFailure {
    pub name: String,
    pub path: PathBuf,
    pub diagnostic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub seed: u64,
    pub methods: Vec<Method>,
    pub datasets: Vec<DatasetInfo>,
    pub failed_datasets: Vec<DatasetFailure>,
    /// Dataset-major, in config order.
    pub cells: Vec<Cell>,
}

impl ExperimentResults {
    pub fn cell(&self, dataset: &str, method: Method) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.dataset() == dataset && c.method() == method)
    }
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset<f64>> {
    let d: Dataset<f64> = load_csv(&spec.path, &spec.label)?;
    Ok(match &spec.name {
        Some(name) => d.renamed(name),
        None => d,
    })
}

/// Repeated half-split evaluation of one method. `models_dir`, if given,
/// receives every final model as `rep<k>.json`.
pub fn run_method_on_dataset(
    method: Method,
    data: &Dataset<f64>,
    cfg: &ExperimentConfig,
    models_dir: Option<&Path>,
) -> Result<MethodResult> {
    let ds_seed = dataset_seed(cfg.seed, data.name());
    let splits = random_half_splits(data, cfg.repetitions, seed::derive(ds_seed, SPLIT_STREAM))?;
    let method_seed = seed::derive(ds_seed, method.stream());
    if let Some(dir) = models_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }

    struct Rep {
        accuracy: f64,
        f1: f64,
        params: Params,
        cv: f64,
        converged: bool,
        warnings: Vec<String>,
        secs: f64,
    }
    let reps = splits
        .par_iter()
        .enumerate()
        .map(|(r, split)| -> Result<Rep> {
            let start = Instant::now();
            let tuned = tune_and_fit(method, data, &split.train_indices, cfg, seed::derive(method_seed, r as u64))?;
            let pred = tuned.model.predict(data, &split.test_indices)?;
            let actual = data.labels_at(&split.test_indices);
            let acc = accuracy(&pred, &actual)?;
            let f1 = micro_f1(&pred, &actual, data.n_classes())?;
            if (acc - f1).abs() > 1e-12 {
                return Err(HarnessError::Metric(format!(
                    "micro-F1 {f1} differs from accuracy {acc} on single-label predictions"
                )));
            }
            if let Some(dir) = models_dir {
                let path = dir.join(format!("rep{r}.json"));
                let file = std::fs::File::create(&path).map_err(io_err(&path))?;
                serde_json::to_writer(std::io::BufWriter::new(file), &tuned.model)?;
            }
            Ok(Rep {
                accuracy: acc,
                f1,
                params: tuned.model.params,
                cv: tuned.cv_scores[tuned.chosen_index],
                converged: tuned.model.converged,
                warnings: tuned.warnings,
                secs: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let accuracies: Vec<f64> = reps.iter().map(|r| r.accuracy).collect();
    let f1s: Vec<f64> = reps.iter().map(|r| r.f1).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&accuracies);
    let (mean_micro_f1, std_micro_f1) = mean_std(&f1s);
    Ok(MethodResult {
        dataset: data.name().to_string(),
        method,
        mean_accuracy,
        std_accuracy,
        mean_micro_f1,
        std_micro_f1,
        chosen: reps.iter().map(|r| r.params).collect(),
        cv_accuracy: reps.iter().map(|r| r.cv).collect(),
        converged: reps.iter().map(|r| r.converged).collect(),
        split_seeds: splits.iter().map(|s| s.seed).collect(),
        warnings: reps
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.warnings.iter().map(move |w| format!("rep {i}: {w}")))
            .collect(),
        wall_clock: reps.iter().map(|r| r.secs).collect(),
        accuracies,
        micro_f1: f1s,
    })
}

/// Runs every configured (dataset, method) pair. Failures become absent
/// cells with a diagnostic instead of aborting the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    let mut datasets = Vec::new();
    let mut failed_datasets = Vec::new();
    let mut loaded = Vec::new();
    for spec in &cfg.datasets {
        let name = spec.display_name();
        match load_dataset(spec).and_then(|d| Ok((DatasetInfo::of(&d, &spec.path)?, d))) {
            Ok((info, d)) => {
                datasets.push(info);
                loaded.push(Some(d));
            }
            Err(e) => {
                log::error!("dataset {name} unusable: {e}");
                failed_datasets.push(DatasetFailure {
                    name,
                    path: spec.path.clone(),
                    diagnostic: e.to_string(),
                });
                loaded.push(None);
            }
        }
    }

    let jobs: Vec<(usize, Method)> = (0..cfg.datasets.len())
        .flat_map(|d| cfg.methods.iter().map(move |&m| (d, m)))
        .collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(d, method)| {
            let name = cfg.datasets[d].display_name();
            let absent = |diagnostic: String| {
                log::error!("{name}/{method}: absent: {diagnostic}");
                Cell::Absent {
                    dataset: name.clone(),
                    method,
                    diagnostic,
                }
            };
            let Some(data) = &loaded[d] else {
                return absent("dataset failed to load".into());
            };
            let models = cfg
                .save_models
                .then(|| cfg.output_dir.join("models").join(&name).join(method.as_str()));
            let start = Instant::now();
            match run_method_on_dataset(method, data, cfg, models.as_deref()) {
                Ok(r) => {
                    log::info!(
                        "{name}/{method}: {:.4} ± {:.4} in {:.1}s",
                        r.mean_accuracy,
                        r.std_accuracy,
                        start.elapsed().as_secs_f64()
                    );
                    Cell::Done(r)
                }
                Err(e) => absent(e.to_string()),
            }
        })
        .collect();

    Ok(ExperimentResults {
        seed: cfg.seed,
        methods: cfg.methods.clone(),
        datasets,
        failed_datasets,
        cells,
    })
}
