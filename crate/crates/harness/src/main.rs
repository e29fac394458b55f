use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rfsvm::data::{profile, LabelColumn};
use rfsvm::forest::{fit_forest, ForestHyperparams, MaxFeatures};
use rfsvm::kernel::{cosine_kernel, rbf_kernel, rf_kernel_train, validate_kernel, KernelMatrix};
use rfsvm_harness::config::DatasetSpec;
use rfsvm_harness::output::{read_run, write_report_files, write_run};
use rfsvm_harness::runner::load_dataset;
use rfsvm_harness::tune::PSD_TOLERANCE;
use rfsvm_harness::{assemble_report, configure_workers, run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "rfsvm", version, about = "Random-forest kernel SVM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured (dataset, method) pair and write the results directory.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print Ω, imbalance ratio and HDLSS band of CSV datasets.
    Profile {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
        #[arg(long, default_value = "class")]
        label: LabelColumn,
        #[arg(long)]
        json: bool,
    },
    /// Rebuild tables, CD data and Bayesian maps from a results directory.
    Report { results: PathBuf },
    /// Build a kernel on a dataset (or load one) and report its properties.
    ValidateKernel {
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "class")]
        label: LabelColumn,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = KernelArg::Rf)]
        kernel: KernelArg,
        #[arg(long, default_value_t = 500)]
        trees: usize,
        /// `sqrt` or a fraction in (0, 1].
        #[arg(long, default_value = "sqrt")]
        max_features: String,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = PSD_TOLERANCE)]
        tolerance: f64,
        /// Validate a kernel written by `--save-kernel` instead of building one.
        #[arg(long, conflicts_with = "dataset")]
        kernel_file: Option<PathBuf>,
        #[arg(long)]
        save_kernel: Option<PathBuf>,
        /// Write the fitted forest as JSON (rf kernel only).
        #[arg(long)]
        save_forest: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Rf,
    Cosine,
    Rbf,
}

fn parse_max_features(s: &str) -> anyhow::Result<MaxFeatures> {
    if s.eq_ignore_ascii_case("sqrt") {
        return Ok(MaxFeatures::Sqrt);
    }
    let f: f64 = s.parse().with_context(|| format!("max_features {s:?}"))?;
    if !(f > 0.0 && f <= 1.0) {
        bail!("max_features fraction {f} outside (0, 1]");
    }
    Ok(MaxFeatures::Fraction(f))
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    configure_workers()?;
    match Cli::parse().command {
        Command::Run { config, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let results = run_experiment(&cfg)?;
            let report = assemble_report(&results, &cfg)?;
            write_run(&cfg.output_dir, &cfg, &results, &report)?;
            for g in std::iter::once(&report.global).chain(&report.bands) {
                if let Some(r) = &g.avg_ranks {
                    let ranks: Vec<String> =
                        report.methods.iter().zip(r).map(|(m, v)| format!("{m}={v:.3}")).collect();
                    println!("{} ({} datasets): {}", g.name, g.datasets.len(), ranks.join(" "));
                }
            }
            println!("results written to {}", cfg.output_dir.display());
        }
        Command::Profile { datasets, label, json } => {
            if !json {
                println!("{:<24} {:>8} {:>8} {:>4} {:>10} {:>8}  band", "dataset", "n", "m", "c", "omega", "IR");
            }
            for path in datasets {
                let spec = DatasetSpec {
                    path,
                    label: label.clone(),
                    name: None,
                };
                let d = load_dataset(&spec)?;
                let p = profile(&d)?;
                if json {
                    let v = serde_json::json!({
                        "name": d.name(),
                        "n_instances": d.n_instances(),
                        "n_features": d.n_features(),
                        "n_classes": d.n_classes(),
                        "omega": p.omega,
                        "imbalance_ratio": p.imbalance_ratio,
                        "band": p.band,
                    });
                    println!("{v}");
                } else {
                    println!(
                        "{:<24} {:>8} {:>8} {:>4} {:>10.3} {:>8.2}  {}",
                        d.name(),
                        d.n_instances(),
                        d.n_features(),
                        d.n_classes(),
                        p.omega,
                        p.imbalance_ratio,
                        p.band
                    );
                }
            }
        }
        Command::Report { results } => {
            let (cfg, res) = read_run(&results)?;
            let report = assemble_report(&res, &cfg)?;
            write_report_files(&results, &res, &report)?;
            println!("report written to {}", results.display());
        }
        Command::ValidateKernel {
            dataset,
            label,
            seed,
            kernel,
            trees,
            max_features,
            gamma,
            tolerance,
            kernel_file,
            save_kernel,
            save_forest,
        } => {
            let k: KernelMatrix<f64> = if let Some(path) = kernel_file {
                let f = std::fs::File::open(&path).with_context(|| path.display().to_string())?;
                KernelMatrix::read_binary(std::io::BufReader::new(f))?
            } else {
                let Some(path) = dataset else {
                    bail!("give a dataset or --kernel-file");
                };
                let d = load_dataset(&DatasetSpec { path, label, name: None })?;
                let all: Vec<usize> = (0..d.n_instances()).collect();
                match kernel {
                    KernelArg::Rf => {
                        let hp = ForestHyperparams {
                            n_trees: trees,
                            max_features: parse_max_features(&max_features)?,
                            ..Default::default()
                        };
                        let forest = fit_forest(&d, &all, &hp, seed)?;
                        if let Some(p) = save_forest {
                            let f = std::fs::File::create(&p).with_context(|| p.display().to_string())?;
                            serde_json::to_writer(std::io::BufWriter::new(f), &forest)?;
                        }
                        rf_kernel_train(&forest, &d, &all)?
                    }
                    KernelArg::Cosine => cosine_kernel(&d, &all, &all)?,
                    KernelArg::Rbf => rbf_kernel(&d, &all, &all, gamma)?,
                }
            };
            if let Some(p) = save_kernel {
                let f = std::fs::File::create(&p).with_context(|| p.display().to_string())?;
                k.write_binary(std::io::BufWriter::new(f))?;
            }
            let v = validate_kernel(&k, tolerance)?;
            println!("{}", serde_json::to_string_pretty(&v)?);
            if !v.is_psd {
                std::process::exit(2);
            }
        }
    }
    Ok(())
}
