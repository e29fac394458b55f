use std::fmt;
use std::str::FromStr;

use rfsvm::forest::{ForestHyperparams, MaxFeatures};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rf,
    SvmRbf,
    Rfsvm,
    Cossvm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Rf, Method::SvmRbf, Method::Rfsvm, Method::Cossvm];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rf => "rf",
            Method::SvmRbf => "svm_rbf",
            Method::Rfsvm => "rfsvm",
            Method::Cossvm => "cossvm",
        }
    }

    pub(crate) fn stream(self) -> u64 {
        match self {
            Method::Rf => 1,
            Method::SvmRbf => 2,
            Method::Rfsvm => 3,
            Method::Cossvm => 4,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}; expected one of rf, svm_rbf, rfsvm, cossvm"))
    }
}

/// One point of a method's hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Params {
    Rf {
        max_depth: Option<usize>,
        max_features: f64,
        min_samples_leaf: usize,
        min_samples_split: usize,
    },
    SvmRbf {
        c: f64,
        gamma: f64,
    },
    Rfsvm {
        c: f64,
    },
    Cossvm {
        c: f64,
    },
}

impl Params {
    pub fn c(&self) -> Option<f64> {
        match *self {
            Params::Rf { .. } => None,
            Params::SvmRbf { c, .. } | Params::Rfsvm { c } | Params::Cossvm { c } => Some(c),
        }
    }

    pub fn forest(&self, n_trees: usize) -> Option<ForestHyperparams> {
        match *self {
            Params::Rf {
                max_depth,
                max_features,
                min_samples_leaf,
                min_samples_split,
            } => Some(ForestHyperparams {
                n_trees,
                max_depth,
                max_features: MaxFeatures::Fraction(max_features),
                min_samples_leaf,
                min_samples_split,
            }),
            _ => None,
        }
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Params::Rf {
                max_depth,
                max_features,
                min_samples_leaf,
                min_samples_split,
            } => {
                let depth = max_depth.map_or("none".to_string(), |d| d.to_string());
                write!(
                    f,
                    "max_depth={depth} max_features={max_features} min_samples_leaf={min_samples_leaf} \
                     min_samples_split={min_samples_split}"
                )
            }
            Params::SvmRbf { c, gamma } => write!(f, "C={c} gamma={gamma}"),
            Params::Rfsvm { c } | Params::Cossvm { c } => write!(f, "C={c}"),
        }
    }
}

/// Evenly spaced positions `floor(i·total/budget)`; every position when the
/// budget covers the whole grid.
pub fn subsample_positions(total: usize, budget: usize) -> Vec<usize> {
    if budget >= total {
        return (0..total).collect();
    }
    (0..budget).map(|i| i * total / budget).collect()
}

/// Grid points in evaluation order. The rf grid is the product with
/// `max_depth` varying fastest, then subsampled to the configured budget.
pub fn grid(method: Method, cfg: &ExperimentConfig) -> Vec<Params> {
    let g = &cfg.grids;
    match method {
        Method::Rf => {
            let mut full = Vec::new();
            for &max_features in &g.rf.max_features {
                for &min_samples_leaf in &g.rf.min_samples_leaf {
                    for &min_samples_split in &g.rf.min_samples_split {
                        for &max_depth in &g.rf.max_depth {
                            full.push(Params::Rf {
                                max_depth,
                                max_features,
                                min_samples_leaf,
                                min_samples_split,
                            });
                        }
                    }
                }
            }
            subsample_positions(full.len(), g.rf.budget)
                .into_iter()
                .map(|i| full[i])
                .collect()
        }
        Method::SvmRbf => g
            .c
            .iter()
            .flat_map(|&c| g.gamma.iter().map(move |&gamma| Params::SvmRbf { c, gamma }))
            .collect(),
        Method::Rfsvm => g.c.iter().map(|&c| Params::Rfsvm { c }).collect(),
        Method::Cossvm => g.c.iter().map(|&c| Params::Cossvm { c }).collect(),
    }
}
