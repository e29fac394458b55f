use rfsvm::data::HdlssBand;
use rfsvm::seed;
use rfsvm::stats::{friedman_nemenyi, pairwise_sign_tests, rank_methods, CdDiagram, FriedmanReport, ScoreTable};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::runner::{Cell, ExperimentResults};

const BAYES_STREAM: u64 = 0xBA7E5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub generator: String,
    pub seed: u64,
    pub repetitions: usize,
    pub cv_folds: usize,
    pub std_kind: String,
    pub tuning: String,
    pub alpha: f64,
    pub bayes_samples: usize,
    pub ropes: Vec<f64>,
    pub platform: String,
    pub determinism: String,
}

impl ReportHeader {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            generator: format!("rfsvm-harness {}", env!("CARGO_PKG_VERSION")),
            seed: cfg.seed,
            repetitions: cfg.repetitions,
            cv_folds: cfg.cv_folds,
            std_kind: "population".into(),
            tuning: format!(
                "exhaustive grid search, hyperparameters re-tuned on every repetition; rf grid subsampled to {} points",
                cfg.grids.rf.budget
            ),
            alpha: cfg.stats.alpha,
            bayes_samples: cfg.stats.samples,
            ropes: cfg.stats.ropes.clone(),
            platform: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
            determinism: "byte-identical for a fixed seed on the same platform and build; \
                          floating-point results may differ across platforms and compilers"
                .into(),
        }
    }
}

/// Pairwise `p(row method > column method)` matrix at one rope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesMap {
    pub rope: f64,
    pub methods: Vec<String>,
    pub p_a_gt_b: Vec<Vec<f64>>,
    pub p_rope: Vec<Vec<f64>>,
    pub p_b_gt_a: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    /// `all` or an HDLSS band name.
    pub name: String,
    pub datasets: Vec<String>,
    pub avg_ranks: Option<Vec<f64>>,
    /// Datasets on which each method has the best mean accuracy; tied
    /// winners are all credited.
    pub wins: Vec<usize>,
    pub friedman: Option<FriedmanReport>,
    pub cd_diagram: Option<CdDiagram>,
    pub bayes: Vec<BayesMap>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub name: String,
    pub omega: Option<f64>,
    pub band: Option<HdlssBand>,
    pub imbalance_ratio: Option<f64>,
    pub mean_accuracy: Vec<Option<f64>>,
    pub std_accuracy: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub dataset: String,
    pub missing: Vec<String>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub header: ReportHeader,
    pub methods: Vec<String>,
    pub datasets: Vec<DatasetRow>,
    /// Datasets left out of rank-based statistics because a cell is absent.
    pub excluded: Vec<Exclusion>,
    pub global: GroupReport,
    pub bands: Vec<GroupReport>,
}

/// Methods sharing the best score in each row.
pub fn win_counts(scores: &[Vec<f64>], k: usize) -> Vec<usize> {
    let mut wins = vec![0; k];
    for row in scores {
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (w, &v) in wins.iter_mut().zip(row) {
            if v == best {
                *w += 1;
            }
        }
    }
    wins
}

fn group_report(
    name: &str,
    methods: &[String],
    datasets: Vec<String>,
    scores: Vec<Vec<f64>>,
    cfg: &ExperimentConfig,
    group_seed: u64,
) -> Result<GroupReport> {
    let k = methods.len();
    let mut g = GroupReport {
        name: name.to_string(),
        wins: win_counts(&scores, k),
        datasets: datasets.clone(),
        avg_ranks: None,
        friedman: None,
        cd_diagram: None,
        bayes: Vec::new(),
        notes: Vec::new(),
    };
    if k < 2 || datasets.len() < 2 {
        g.notes.push(format!(
            "{} dataset(s) and {k} method(s): rank statistics need at least two of each",
            datasets.len()
        ));
        return Ok(g);
    }
    let table = ScoreTable::new(methods.to_vec(), datasets, scores)?;
    g.avg_ranks = Some(rank_methods(&table).avg_ranks);
    if k >= 3 {
        let f = friedman_nemenyi(&table, cfg.stats.alpha)?;
        g.cd_diagram = Some(CdDiagram::from(&f));
        g.friedman = Some(f);
    } else {
        g.notes.push("Friedman test needs at least three methods".into());
    }
    for (r, &rope) in cfg.stats.ropes.iter().enumerate() {
        let grid = pairwise_sign_tests(&table, rope, cfg.stats.samples, seed::derive(group_seed, r as u64))?;
        let pick = |f: fn(&rfsvm::stats::BayesReport) -> f64| -> Vec<Vec<f64>> {
            grid.iter()
                .enumerate()
                .map(|(a, row)| row.iter().enumerate().map(|(b, rep)| if a == b { 0.0 } else { f(rep) }).collect())
                .collect()
        };
        g.bayes.push(BayesMap {
            rope,
            methods: methods.to_vec(),
            p_a_gt_b: pick(|r| r.p_a_gt_b),
            p_rope: pick(|r| r.p_rope),
            p_b_gt_a: pick(|r| r.p_b_gt_a),
        });
    }
    Ok(g)
}

/// Score table over complete datasets, global and per-band statistics, and
/// win counts. Datasets with an absent cell are excluded with a warning; a
/// (dataset, method) pair with no cell at all is an error.
pub fn assemble_report(results: &ExperimentResults, cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    let methods: Vec<String> = results.methods.iter().map(|m| m.to_string()).collect();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    let mut complete: Vec<(String, HdlssBand, Vec<f64>)> = Vec::new();

    for info in &results.datasets {
        let mut cells = Vec::new();
        for &m in &results.methods {
            cells.push(results.cell(&info.name, m).ok_or_else(|| HarnessError::MissingCell {
                dataset: info.name.clone(),
                method: m.to_string(),
            })?);
        }
        let means: Vec<Option<f64>> = cells.iter().map(|c| c.result().map(|r| r.mean_accuracy)).collect();
        rows.push(DatasetRow {
            name: info.name.clone(),
            omega: Some(info.profile.omega),
            band: Some(info.profile.band),
            imbalance_ratio: Some(info.profile.imbalance_ratio),
            mean_accuracy: means.clone(),
            std_accuracy: cells.iter().map(|c| c.result().map(|r| r.std_accuracy)).collect(),
        });
        if means.iter().all(Option::is_some) {
            complete.push((info.name.clone(), info.profile.band, means.into_iter().flatten().collect()));
        } else {
            let (missing, diagnostics) = cells
                .iter()
                .filter_map(|c| match c {
                    Cell::Absent { method, diagnostic, .. } => Some((method.to_string(), diagnostic.clone())),
                    Cell::Done(_) => None,
                })
                .unzip();
            log::warn!("excluding {} from rank statistics: absent cells", info.name);
            excluded.push(Exclusion {
                dataset: info.name.clone(),
                missing,
                diagnostics,
            });
        }
    }
    for f in &results.failed_datasets {
        log::warn!("excluding {} from rank statistics: {}", f.name, f.diagnostic);
        rows.push(DatasetRow {
            name: f.name.clone(),
            omega: None,
            band: None,
            imbalance_ratio: None,
            mean_accuracy: vec![None; methods.len()],
            std_accuracy: vec![None; methods.len()],
        });
        excluded.push(Exclusion {
            dataset: f.name.clone(),
            missing: methods.clone(),
            diagnostics: vec![f.diagnostic.clone()],
        });
    }

    let bayes_seed = seed::derive(cfg.seed, BAYES_STREAM);
    let global = group_report(
        "all",
        &methods,
        complete.iter().map(|c| c.0.clone()).collect(),
        complete.iter().map(|c| c.2.clone()).collect(),
        cfg,
        seed::derive(bayes_seed, 0),
    )?;
    let bands = HdlssBand::ALL
        .iter()
        .enumerate()
        .map(|(b, &band)| {
            let members: Vec<&(String, HdlssBand, Vec<f64>)> = complete.iter().filter(|c| c.1 == band).collect();
            group_report(
                band.as_str(),
                &methods,
                members.iter().map(|c| c.0.clone()).collect(),
                members.iter().map(|c| c.2.clone()).collect(),
                cfg,
                seed::derive(bayes_seed, 1 + b as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ComparisonReport {
        header: ReportHeader::new(cfg),
        methods,
        datasets: rows,
        excluded,
        global,
        bands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_credit_every_winner() {
        let scores = vec![vec![0.9, 0.9, 0.1], vec![0.2, 0.3, 0.4], vec![0.5, 0.4, 0.3]];
        let w = win_counts(&scores, 3);
        assert_eq!(w, vec![2, 1, 1]);
        assert!(w.iter().sum::<usize>() >= scores.len());
    }
}
