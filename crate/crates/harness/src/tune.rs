use rfsvm::data::{kfold_indices, Dataset};
use rfsvm::forest::{fit_forest, predict_forest, ForestHyperparams, ForestModel};
use rfsvm::kernel::{
    cosine_kernel, rbf_kernel, rf_kernel_test, rf_kernel_train, validate_kernel, KernelMatrix,
};
use rfsvm::seed;
use rfsvm::svm::{self, fit_multiclass, SvmHyperparams, SvmModel};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::methods::{grid, Method, Params};
use crate::metrics::accuracy;

const FOLDS_STREAM: u64 = 0;
const FINAL_FOREST_STREAM: u64 = 1;
const SVM_STREAM: u64 = 2;
const FOLD_FOREST_STREAM: u64 = 16;

/// Tolerance on the smallest eigenvalue of an rf training kernel.
pub const PSD_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitted {
    Rf { forest: ForestModel<f64> },
    Rfsvm { forest: ForestModel<f64>, svm: SvmModel<f64> },
    SvmRbf { gamma: f64, svm: SvmModel<f64> },
    Cossvm { svm: SvmModel<f64> },
    /// Training data held a single class.
    Constant { class: usize },
}

/// A model together with the instance ids it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: Params,
    pub train: Vec<usize>,
    pub fitted: Fitted,
    /// False if any SMO subproblem hit its iteration budget.
    pub converged: bool,
}

impl TrainedModel {
    pub fn predict(&self, data: &Dataset<f64>, test: &[usize]) -> Result<Vec<usize>> {
        let with_svm = |svm: &SvmModel<f64>, k: KernelMatrix<f64>| -> Result<Vec<usize>> {
            Ok(svm::predict(svm, &k)?)
        };
        match &self.fitted {
            Fitted::Rf { forest } => test
                .iter()
                .map(|&i| predict_forest(forest, data.row(i)).map_err(Into::into))
                .collect(),
            Fitted::Rfsvm { forest, svm } => {
                with_svm(svm, rf_kernel_test(forest, data, test, &self.train)?)
            }
            Fitted::SvmRbf { gamma, svm } => with_svm(svm, rbf_kernel(data, test, &self.train, *gamma)?),
            Fitted::Cossvm { svm } => with_svm(svm, cosine_kernel(data, test, &self.train)?),
            Fitted::Constant { class } => Ok(vec![*class; test.len()]),
        }
    }
}

/// Outcome of grid search plus the refit on the full training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuned {
    pub model: TrainedModel,
    pub chosen_index: usize,
    /// Mean CV accuracy of every grid point, in grid order.
    pub cv_scores: Vec<f64>,
    /// Distinct grid points fitted (rf points that coincide after depth
    /// collapse are fitted once).
    pub evaluated: usize,
    pub warnings: Vec<String>,
}

fn svm_hp(cfg: &ExperimentConfig, c: f64) -> SvmHyperparams<f64> {
    SvmHyperparams {
        c,
        kkt_tolerance: cfg.svm.kkt_tolerance,
        max_passes: cfg.svm.max_passes,
    }
}

pub fn rfsvm_forest(cfg: &ExperimentConfig) -> ForestHyperparams {
    ForestHyperparams {
        n_trees: cfg.forest.n_trees,
        max_features: cfg.forest.max_features,
        ..Default::default()
    }
}

/// RF training kernel, refusing to return one that is not a valid Gram matrix.
pub fn checked_rf_kernel(
    forest: &ForestModel<f64>,
    data: &Dataset<f64>,
    train: &[usize],
) -> Result<KernelMatrix<f64>> {
    let k = rf_kernel_train(forest, data, train)?;
    let v = validate_kernel(&k, PSD_TOLERANCE)?;
    if v.max_diagonal_deviation != 0.0 || v.max_asymmetry != 0.0 || !v.is_psd {
        return Err(HarnessError::KernelCheck(format!(
            "diagonal deviation {}, asymmetry {}, min eigenvalue {}",
            v.max_diagonal_deviation, v.max_asymmetry, v.min_eigenvalue
        )));
    }
    Ok(k)
}

enum SvmFit {
    Model(SvmModel<f64>),
    Constant(usize),
}

fn fit_svm(k: &KernelMatrix<f64>, labels: &[usize], c: f64, cfg: &ExperimentConfig, seed: u64) -> Result<SvmFit> {
    match fit_multiclass(k, labels, &svm_hp(cfg, c), seed) {
        Ok(m) => Ok(SvmFit::Model(m)),
        Err(rfsvm::Error::SingleClass) => Ok(SvmFit::Constant(labels[0])),
        Err(e) => Err(e.into()),
    }
}

/// Which precomputed kernel a grid point needs; points sharing one reuse it.
#[derive(Debug, Clone, Copy, PartialEq)]
enum KernelKey {
    Rf,
    Cosine,
    Rbf(f64),
}

impl KernelKey {
    fn of(p: &Params) -> Option<Self> {
        match *p {
            Params::Rf { .. } => None,
            Params::Rfsvm { .. } => Some(KernelKey::Rf),
            Params::Cossvm { .. } => Some(KernelKey::Cosine),
            Params::SvmRbf { gamma, .. } => Some(KernelKey::Rbf(gamma)),
        }
    }

    /// `(fit×fit, eval×fit)` kernels.
    fn build(
        self,
        data: &Dataset<f64>,
        fit: &[usize],
        eval: &[usize],
        cfg: &ExperimentConfig,
        forest_seed: u64,
    ) -> Result<(KernelMatrix<f64>, KernelMatrix<f64>)> {
        Ok(match self {
            KernelKey::Rf => {
                let forest = fit_forest(data, fit, &rfsvm_forest(cfg), forest_seed)?;
                (checked_rf_kernel(&forest, data, fit)?, rf_kernel_test(&forest, data, eval, fit)?)
            }
            KernelKey::Cosine => (cosine_kernel(data, fit, fit)?, cosine_kernel(data, eval, fit)?),
            KernelKey::Rbf(g) => (rbf_kernel(data, fit, fit, g)?, rbf_kernel(data, eval, fit, g)?),
        })
    }
}

/// Best grid index: highest score, then smaller C, then smaller index.
fn select(grid: &[Params], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..grid.len() {
        let better = match scores[i].total_cmp(&scores[best]) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => match (grid[i].c(), grid[best].c()) {
                (Some(a), Some(b)) => a < b,
                _ => false,
            },
        };
        if better {
            best = i;
        }
    }
    best
}

/// Grid search with stratified `cfg.cv_folds`-fold CV on `train`, scored by
/// mean fold accuracy, followed by a refit of the best point on all of `train`.
pub fn tune_and_fit(
    method: Method,
    data: &Dataset<f64>,
    train: &[usize],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Tuned> {
    if train.is_empty() {
        return Err(rfsvm::Error::Empty("training set").into());
    }
    let points = grid(method, cfg);
    let kf = kfold_indices(train, data.labels(), cfg.cv_folds, seed::derive(seed, FOLDS_STREAM))?;
    let mut warnings = kf.warnings.clone();
    let n_folds = kf.folds.len() as f64;
    let mut sums = vec![0.0; points.len()];
    let mut failed = vec![false; points.len()];
    let evaluated;

    if method == Method::Rf {
        // Points identical after depth collapse on the full training set are
        // identical on every fold too.
        let mut distinct: Vec<(ForestHyperparams, Vec<usize>)> = Vec::new();
        for (i, p) in points.iter().enumerate() {
            let hp = p.forest(cfg.forest.n_trees).expect("rf grid").effective(train.len());
            match distinct.iter_mut().find(|(h, _)| *h == hp) {
                Some((_, members)) => members.push(i),
                None => distinct.push((hp, vec![i])),
            }
        }
        evaluated = distinct.len();
        for (f, fold) in kf.folds.iter().enumerate() {
            let fold_seed = seed::derive(seed, FOLD_FOREST_STREAM + f as u64);
            let actual = data.labels_at(&fold.validate);
            for (hp, members) in &distinct {
                let forest = fit_forest(data, &fold.fit, hp, fold_seed)?;
                let pred: Vec<usize> = fold
                    .validate
                    .iter()
                    .map(|&i| predict_forest(&forest, data.row(i)))
                    .collect::<rfsvm::Result<_>>()?;
                let acc = accuracy(&pred, &actual)?;
                for &i in members {
                    sums[i] += acc;
                }
            }
        }
    } else {
        let mut keys: Vec<KernelKey> = Vec::new();
        for p in &points {
            let k = KernelKey::of(p).expect("kernel method");
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        evaluated = points.len();
        for (f, fold) in kf.folds.iter().enumerate() {
            let fold_seed = seed::derive(seed, FOLD_FOREST_STREAM + f as u64);
            let fit_labels = data.labels_at(&fold.fit);
            let actual = data.labels_at(&fold.validate);
            for &key in &keys {
                let (k_fit, k_val) = key.build(data, &fold.fit, &fold.validate, cfg, fold_seed)?;
                for (i, p) in points.iter().enumerate() {
                    if KernelKey::of(p) != Some(key) || failed[i] {
                        continue;
                    }
                    let c = p.c().expect("svm grid point has C");
                    let svm_seed = seed::derive(seed, SVM_STREAM);
                    let pred = match fit_svm(&k_fit, &fit_labels, c, cfg, svm_seed)? {
                        SvmFit::Model(m) if !m.converged() => {
                            let msg = format!("{method} {p}: SMO did not converge on fold {f}; scored 0");
                            log::warn!("{msg}");
                            warnings.push(msg);
                            failed[i] = true;
                            continue;
                        }
                        SvmFit::Model(m) => svm::predict(&m, &k_val)?,
                        SvmFit::Constant(class) => vec![class; fold.validate.len()],
                    };
                    sums[i] += accuracy(&pred, &actual)?;
                }
            }
        }
    }

    let cv_scores: Vec<f64> = sums
        .iter()
        .zip(&failed)
        .map(|(&s, &bad)| if bad { 0.0 } else { s / n_folds })
        .collect();
    let chosen_index = select(&points, &cv_scores);
    let model = refit(&points[chosen_index], data, train, cfg, seed)?;
    if !model.converged {
        let msg = format!(
            "{method} {}: final SMO fit did not converge; model flagged",
            points[chosen_index]
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(Tuned {
        model,
        chosen_index,
        cv_scores,
        evaluated,
        warnings,
    })
}

/// Fits one grid point on `train`.
pub fn refit(
    params: &Params,
    data: &Dataset<f64>,
    train: &[usize],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<TrainedModel> {
    let forest_seed = seed::derive(seed, FINAL_FOREST_STREAM);
    let svm_seed = seed::derive(seed, SVM_STREAM);
    let labels = data.labels_at(train);
    let done = |fitted: Fitted, converged: bool| TrainedModel {
        params: *params,
        train: train.to_vec(),
        fitted,
        converged,
    };
    let svm_or_constant = |k: &KernelMatrix<f64>, c: f64| fit_svm(k, &labels, c, cfg, svm_seed);

    Ok(match *params {
        Params::Rf { .. } => {
            let hp = params.forest(cfg.forest.n_trees).expect("rf params");
            done(Fitted::Rf { forest: fit_forest(data, train, &hp, forest_seed)? }, true)
        }
        Params::Rfsvm { c } => {
            let forest = fit_forest(data, train, &rfsvm_forest(cfg), forest_seed)?;
            let k = checked_rf_kernel(&forest, data, train)?;
            match svm_or_constant(&k, c)? {
                SvmFit::Model(svm) => {
                    let ok = svm.converged();
                    done(Fitted::Rfsvm { forest, svm }, ok)
                }
                SvmFit::Constant(class) => done(Fitted::Constant { class }, true),
            }
        }
        Params::SvmRbf { c, gamma } => match svm_or_constant(&rbf_kernel(data, train, train, gamma)?, c)? {
            SvmFit::Model(svm) => {
                let ok = svm.converged();
                done(Fitted::SvmRbf { gamma, svm }, ok)
            }
            SvmFit::Constant(class) => done(Fitted::Constant { class }, true),
        },
        Params::Cossvm { c } => match svm_or_constant(&cosine_kernel(data, train, train)?, c)? {
            SvmFit::Model(svm) => {
                let ok = svm.converged();
                done(Fitted::Cossvm { svm }, ok)
            }
            SvmFit::Constant(class) => done(Fitted::Constant { class }, true),
        },
    })
}
