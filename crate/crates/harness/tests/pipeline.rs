use std::path::Path;

use proptest::prelude::*;
use rand::Rng;
use rfsvm::seed;
use rfsvm_harness::config::DatasetSpec;
use rfsvm_harness::methods::grid;
use rfsvm_harness::metrics::{accuracy, micro_f1};
use rfsvm_harness::output::{read_run, write_run};
use rfsvm_harness::runner::{load_dataset, Cell};
use rfsvm_harness::{
    assemble_report, run_experiment, run_method_on_dataset, ExperimentConfig, HarnessError, Method,
};

/// Writes a CSV with `n` rows, `m` features and classes shifted apart.
fn write_toy(path: &Path, n: usize, m: usize, c: usize, s: u64, zero_row: bool) {
    let mut rng = seed::rng(s);
    let mut text: String = (0..m).map(|j| format!("f{j},")).collect();
    text.push_str("class\n");
    for i in 0..n {
        for _ in 0..m {
            let v = if zero_row && i == 0 {
                0.0
            } else {
                rng.random::<f64>() + 1.5 * (i % c) as f64
            };
            text.push_str(&format!("{v:.6},"));
        }
        text.push_str(&format!("k{}\n", i % c));
    }
    std::fs::write(path, text).unwrap();
}

fn toy_config(dir: &Path, datasets: &[&str], methods: &str, reps: usize) -> ExperimentConfig {
    let sets: String = datasets
        .iter()
        .map(|d| format!("[[datasets]]\npath = \"{}\"\n", dir.join(d).display()))
        .collect();
    let text = format!(
        "methods = {methods}\nrepetitions = {reps}\nseed = 99\noutput_dir = \"{}\"\n{sets}\
         [grids]\nc = [0.1, 1.0, 10.0]\ngamma = [0.01, 1.0]\n\
         [grids.rf]\nmax_depth = [10, \"none\"]\nmax_features = [0.1]\nmin_samples_leaf = [1]\nmin_samples_split = [2]\n\
         [forest]\nn_trees = 15\n[stats]\nsamples = 2000\n",
        dir.join("out").display()
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

#[test]
fn default_grids_have_documented_sizes() {
    let cfg = ExperimentConfig::from_toml("[[datasets]]\npath = \"x.csv\"\n").unwrap();
    assert_eq!(grid(Method::Rfsvm, &cfg).len(), 7);
    assert_eq!(grid(Method::Cossvm, &cfg).len(), 7);
    assert_eq!(grid(Method::SvmRbf, &cfg).len(), 49);
    assert_eq!(grid(Method::Rf, &cfg).len(), 100);
    assert_eq!(cfg.repetitions, 10);
    assert_eq!(cfg.cv_folds, 3);
}

#[test]
fn config_rejects_off_grid_values_and_unknown_keys() {
    let base = "[[datasets]]\npath = \"x.csv\"\n";
    assert!(ExperimentConfig::from_toml(&format!("{base}[grids]\nc = [0.5]\n")).is_err());
    assert!(ExperimentConfig::from_toml(&format!("{base}repetitions = 0\n")).is_err());
    assert!(ExperimentConfig::from_toml(&format!("{base}cv_folds = 1\n")).is_err());
    assert!(ExperimentConfig::from_toml(&format!("{base}colour = 1\n")).is_err());
    let cfg = ExperimentConfig::from_toml(base).unwrap();
    assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn relative_paths_follow_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("exp.toml");
    std::fs::write(&path, "output_dir = \"res\"\n[[datasets]]\npath = \"d/toy.csv\"\n").unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.datasets[0].path, tmp.path().join("d/toy.csv"));
    assert_eq!(cfg.output_dir, tmp.path().join("res"));
}

#[test]
fn one_repetition_gives_one_entry() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy(&tmp.path().join("tiny.csv"), 10, 4, 2, 1, false);
    let cfg = toy_config(tmp.path(), &["tiny.csv"], "[\"rfsvm\", \"rf\"]", 1);
    let d = load_dataset(&cfg.datasets[0]).unwrap();
    for m in [Method::Rfsvm, Method::Rf] {
        let r = run_method_on_dataset(m, &d, &cfg, None).unwrap();
        assert_eq!(r.accuracies.len(), 1);
        assert_eq!(r.chosen.len(), 1);
        assert_eq!(r.std_accuracy, 0.0);
        assert_eq!(r.accuracies, r.micro_f1);
    }
}

#[test]
fn same_seed_same_result_and_models_saved() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy(&tmp.path().join("toy.csv"), 24, 5, 3, 2, false);
    let cfg = toy_config(tmp.path(), &["toy.csv"], "[\"rfsvm\"]", 3);
    let d = load_dataset(&cfg.datasets[0]).unwrap();
    let models = tmp.path().join("models");
    let a = run_method_on_dataset(Method::Rfsvm, &d, &cfg, Some(&models)).unwrap();
    let b = run_method_on_dataset(Method::Rfsvm, &d, &cfg, None).unwrap();
    assert_eq!(a.accuracies, b.accuracies);
    assert_eq!(a.chosen, b.chosen);
    assert_eq!(a.split_seeds, b.split_seeds);
    assert_eq!(a.cv_accuracy, b.cv_accuracy);
    for r in 0..3 {
        let text = std::fs::read_to_string(models.join(format!("rep{r}.json"))).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("fitted").is_some());
    }
}

#[test]
fn absent_cell_excludes_dataset_from_ranks() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy(&tmp.path().join("a.csv"), 20, 4, 2, 3, false);
    write_toy(&tmp.path().join("b.csv"), 20, 4, 2, 4, false);
    write_toy(&tmp.path().join("zero.csv"), 20, 4, 2, 5, true);
    let cfg = toy_config(tmp.path(), &["a.csv", "b.csv", "zero.csv"], "[\"rfsvm\", \"cossvm\"]", 2);
    let res = run_experiment(&cfg).unwrap();
    assert_eq!(res.cells.len(), 6);
    match res.cell("zero", Method::Cossvm).unwrap() {
        Cell::Absent { diagnostic, .. } => assert!(!diagnostic.is_empty()),
        Cell::Done(_) => panic!("cosine kernel accepted a zero-norm row"),
    }
    assert!(res.cell("zero", Method::Rfsvm).unwrap().result().is_some());

    let report = assemble_report(&res, &cfg).unwrap();
    assert_eq!(report.excluded.len(), 1);
    assert_eq!(report.excluded[0].dataset, "zero");
    assert_eq!(report.excluded[0].missing, vec!["cossvm".to_string()]);
    assert_eq!(report.global.datasets, vec!["a".to_string(), "b".to_string()]);
    let ranks = report.global.avg_ranks.as_ref().unwrap();
    assert!((ranks.iter().sum::<f64>() - 3.0).abs() < 1e-12);
}

#[test]
fn bands_partition_the_ranked_datasets() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy(&tmp.path().join("wide.csv"), 12, 500, 2, 6, false);
    write_toy(&tmp.path().join("mid.csv"), 12, 20, 2, 7, false);
    write_toy(&tmp.path().join("tall.csv"), 40, 3, 2, 8, false);
    let cfg = toy_config(tmp.path(), &["wide.csv", "mid.csv", "tall.csv"], "[\"rfsvm\", \"cossvm\"]", 1);
    let res = run_experiment(&cfg).unwrap();
    let report = assemble_report(&res, &cfg).unwrap();
    let mut seen: Vec<String> = report.bands.iter().flat_map(|b| b.datasets.clone()).collect();
    seen.sort();
    let mut all = report.global.datasets.clone();
    all.sort();
    assert_eq!(seen, all);
    let band_of = |name: &str| report.bands.iter().find(|b| b.datasets.iter().any(|d| d == name)).unwrap().name.clone();
    assert_eq!(band_of("wide"), "very_hdlss");
    assert_eq!(band_of("mid"), "mid_hdlss");
    assert_eq!(band_of("tall"), "non_hdlss");
    // single-dataset bands carry a note instead of statistics
    assert!(report.bands.iter().all(|b| b.friedman.is_none() && !b.notes.is_empty()));
}

#[test]
fn run_directory_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy(&tmp.path().join("a.csv"), 16, 4, 2, 9, false);
    let cfg = toy_config(tmp.path(), &["a.csv"], "[\"rf\", \"cossvm\"]", 2);
    let res = run_experiment(&cfg).unwrap();
    let report = assemble_report(&res, &cfg).unwrap();
    let out = tmp.path().join("run");
    write_run(&out, &cfg, &res, &report).unwrap();
    let (cfg2, res2) = read_run(&out).unwrap();
    assert_eq!(cfg2, cfg);
    assert_eq!(assemble_report(&res2, &cfg2).unwrap(), report);
    for f in ["rf.csv", "cossvm.csv", "summary.csv", "report.json", "timings.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn unreadable_dataset_is_reported_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy(&tmp.path().join("a.csv"), 16, 4, 2, 10, false);
    let cfg = toy_config(tmp.path(), &["a.csv", "missing.csv"], "[\"cossvm\"]", 1);
    let res = run_experiment(&cfg).unwrap();
    assert_eq!(res.failed_datasets.len(), 1);
    assert_eq!(res.failed_datasets[0].name, "missing");
    assert!(matches!(
        load_dataset(&DatasetSpec { path: tmp.path().join("missing.csv"), label: Default::default(), name: None }),
        Err(HarnessError::Core(_) | HarnessError::Io { .. })
    ));
}

proptest! {
    #[test]
    fn micro_f1_equals_accuracy(s in 0u64..10_000, n in 1usize..60, c in 1usize..6) {
        let mut rng = seed::rng(s);
        let actual: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let a = accuracy(&pred, &actual).unwrap();
        let f = micro_f1(&pred, &actual, c).unwrap();
        prop_assert!((a - f).abs() <= 1e-12);
    }
}
