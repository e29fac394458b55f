use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{io_err, Result};
use crate::methods::Method;
use crate::report::ComparisonReport;
use crate::runner::{Cell, ExperimentResults};

pub const CONFIG_FILE: &str = "config.toml";
pub const RESULTS_FILE: &str = "results.json";
pub const REPORT_FILE: &str = "report.json";
pub const CD_FILE: &str = "cd_diagram.json";
pub const BAYES_FILE: &str = "bayes_maps.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "absent".to_string(), |v| v.to_string())
}

/// One row per dataset for `method`.
pub fn write_method_csv(path: &Path, results: &ExperimentResults, method: Method) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "dataset",
        "status",
        "omega",
        "band",
        "mean_accuracy",
        "std_accuracy",
        "mean_micro_f1",
        "std_micro_f1",
        "accuracies",
        "chosen",
        "diagnostic",
    ])?;
    for cell in results.cells.iter().filter(|c| c.method() == method) {
        let info = results.datasets.iter().find(|d| d.name == cell.dataset());
        let omega = info.map_or(String::new(), |d| d.profile.omega.to_string());
        let band = info.map_or(String::new(), |d| d.profile.band.to_string());
        match cell {
            Cell::Done(r) => w.write_record([
                r.dataset.clone(),
                "ok".into(),
                omega,
                band,
                r.mean_accuracy.to_string(),
                r.std_accuracy.to_string(),
                r.mean_micro_f1.to_string(),
                r.std_micro_f1.to_string(),
                join(&r.accuracies),
                join(&r.chosen),
                r.warnings.join(" | "),
            ])?,
            Cell::Absent { dataset, diagnostic, .. } => w.write_record([
                dataset.clone(),
                "absent".into(),
                omega,
                band,
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                diagnostic.clone(),
            ])?,
        }
    }
    w.flush().map_err(io_err(path))
}

pub fn write_timings(path: &Path, results: &ExperimentResults) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dataset", "method", "repetition", "seconds"])?;
    for r in results.cells.iter().filter_map(Cell::result) {
        for (i, s) in r.wall_clock.iter().enumerate() {
            w.write_record([r.dataset.clone(), r.method.to_string(), i.to_string(), format!("{s:.3}")])?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Table of `mean ± std` accuracy, one row per dataset, one column per method.
pub fn write_summary(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["dataset".to_string(), "omega".into(), "band".into()];
    for m in &report.methods {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    w.write_record(&header)?;
    for row in &report.datasets {
        let mut rec = vec![
            row.name.clone(),
            row.omega.map_or(String::new(), |v| v.to_string()),
            row.band.map_or(String::new(), |b| b.to_string()),
        ];
        for (m, s) in row.mean_accuracy.iter().zip(&row.std_accuracy) {
            rec.push(opt(*m));
            rec.push(opt(*s));
        }
        w.write_record(&rec)?;
    }
    let mut wins = vec!["# of wins".to_string(), String::new(), String::new()];
    for w_ in &report.global.wins {
        wins.push(w_.to_string());
        wins.push(String::new());
    }
    w.write_record(&wins)?;
    w.flush().map_err(io_err(path))
}

#[derive(Serialize)]
struct NamedCd<'a> {
    group: &'a str,
    diagram: &'a rfsvm::stats::CdDiagram,
}

#[derive(Serialize)]
struct NamedBayes<'a> {
    group: &'a str,
    #[serde(flatten)]
    map: &'a crate::report::BayesMap,
}

/// `report.json`, `cd_diagram.json`, `bayes_maps.json`, `summary.csv` and
/// one CSV per method.
pub fn write_report_files(dir: &Path, results: &ExperimentResults, report: &ComparisonReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join(REPORT_FILE), report)?;
    let groups = std::iter::once(&report.global).chain(&report.bands);
    let cds: Vec<NamedCd> = groups
        .clone()
        .filter_map(|g| g.cd_diagram.as_ref().map(|d| NamedCd { group: &g.name, diagram: d }))
        .collect();
    write_json(&dir.join(CD_FILE), &cds)?;
    let maps: Vec<NamedBayes> = groups
        .flat_map(|g| g.bayes.iter().map(move |m| NamedBayes { group: &g.name, map: m }))
        .collect();
    write_json(&dir.join(BAYES_FILE), &maps)?;
    write_summary(&dir.join(SUMMARY_FILE), report)?;
    for &m in &results.methods {
        write_method_csv(&dir.join(format!("{m}.csv")), results, m)?;
    }
    Ok(())
}

/// Everything `run` produces.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, results: &ExperimentResults, report: &ComparisonReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let cfg_path = dir.join(CONFIG_FILE);
    fs::write(&cfg_path, cfg.to_toml()).map_err(io_err(&cfg_path))?;
    write_json(&dir.join(RESULTS_FILE), results)?;
    write_timings(&dir.join(TIMINGS_FILE), results)?;
    write_report_files(dir, results, report)
}

/// Results and the resolved config from a previous `run`.
pub fn read_run(dir: &Path) -> Result<(ExperimentConfig, ExperimentResults)> {
    let cfg_path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&cfg_path).map_err(io_err(&cfg_path))?;
    let cfg: ExperimentConfig = toml::from_str(&text).map_err(|source| crate::error::HarnessError::ConfigParse {
        path: cfg_path.clone(),
        source,
    })?;
    Ok((cfg, read_json(&dir.join(RESULTS_FILE))?))
}
