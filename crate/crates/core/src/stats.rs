//! Comparing classifiers over several datasets: Friedman test with the
//! Nemenyi critical difference, and the Bayesian sign test with a region of
//! practical equivalence.

use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

/// Two-tailed Nemenyi constants `q_α = q_∞(α, k) / √2` for `k = 2..=10`,
/// where `q_∞` is the upper quantile of the Studentized range with
/// infinite degrees of freedom. Checked against a quadrature evaluation of
/// the range distribution in the tests below.
const NEMENYI_Q_05: [f64; 9] = [
    1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.948320, 3.030878, 3.101730, 3.163684,
];
const NEMENYI_Q_10: [f64; 9] = [
    1.644854, 2.052293, 2.291341, 2.459516, 2.588521, 2.692732, 2.779884, 2.854606, 2.919889,
];

pub const DEFAULT_SAMPLES: usize = 50_000;
pub const ROPES: [f64; 2] = [0.005, 0.01];
const SHARD: usize = 10_000;

/// Nemenyi `q_α` for `k` methods at α ∈ {0.05, 0.10}.
pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64> {
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &NEMENYI_Q_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &NEMENYI_Q_10
    } else {
        return Err(Error::InvalidArgument(format!(
            "no Nemenyi constants for alpha = {alpha}; use 0.05 or 0.10"
        )));
    };
    if !(2..=10).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "Nemenyi constants cover 2..=10 methods, got {k}"
        )));
    }
    Ok(table[k - 2])
}

/// `q_α · sqrt(k(k+1) / 6N)`.
pub fn critical_difference(k: usize, n_datasets: usize, alpha: f64) -> Result<f64> {
    let q = nemenyi_q(k, alpha)?;
    Ok(q * ((k * (k + 1)) as f64 / (6.0 * n_datasets as f64)).sqrt())
}

/// Scores of `k` methods on `N` datasets; higher is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScoreTable<T: Scalar> {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// `scores[d][j]`: method `j` on dataset `d`.
    pub scores: Vec<Vec<T>>,
}

impl<T: Scalar> ScoreTable<T> {
    pub fn new(methods: Vec<String>, datasets: Vec<String>, scores: Vec<Vec<T>>) -> Result<Self> {
        if methods.len() < 2 {
            return Err(Error::InvalidArgument("need at least two methods".into()));
        }
        if datasets.len() < 2 {
            return Err(Error::InvalidArgument("need at least two datasets".into()));
        }
        if scores.len() != datasets.len() {
            return Err(Error::DimensionMismatch {
                expected: datasets.len(),
                got: scores.len(),
            });
        }
        for row in &scores {
            if row.len() != methods.len() {
                return Err(Error::DimensionMismatch {
                    expected: methods.len(),
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("score table has a non-finite cell".into()));
            }
        }
        Ok(Self {
            methods,
            datasets,
            scores,
        })
    }

    pub fn n_methods(&self) -> usize {
        self.methods.len()
    }

    pub fn n_datasets(&self) -> usize {
        self.datasets.len()
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.scores.iter().map(|r| r[j]).collect()
    }

    /// Keeps only the datasets at the given row positions.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            self.methods.clone(),
            rows.iter().map(|&r| self.datasets[r].clone()).collect(),
            rows.iter().map(|&r| self.scores[r].clone()).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranks {
    /// `ranks[d][j]`, 1 = best; ties share the mean of their positions.
    pub ranks: Vec<Vec<f64>>,
    pub avg_ranks: Vec<f64>,
}

fn rank_row<T: Scalar>(row: &[T]) -> Vec<f64> {
    let k = row.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).expect("finite scores"));
    let mut ranks = vec![0.0; k];
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && row[order[end]] == row[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let mid = (start + 1 + end) as f64 / 2.0;
        for &j in &order[start..end] {
            ranks[j] = mid;
        }
        start = end;
    }
    ranks
}

pub fn rank_methods<T: Scalar>(t: &ScoreTable<T>) -> Ranks {
    let ranks: Vec<Vec<f64>> = t.scores.iter().map(|r| rank_row(r)).collect();
    let n = ranks.len() as f64;
    let avg_ranks = (0..t.n_methods())
        .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    Ranks { ranks, avg_ranks }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanReport {
    pub methods: Vec<String>,
    pub n_datasets: usize,
    pub avg_ranks: Vec<f64>,
    /// Friedman χ² with `k − 1` degrees of freedom.
    pub statistic: f64,
    pub p_value: f64,
    /// `None` when every dataset ranks the methods identically, where the
    /// F statistic is unbounded.
    pub iman_davenport_f: Option<f64>,
    pub iman_davenport_p: f64,
    pub alpha: f64,
    pub q_alpha: f64,
    pub cd: f64,
    /// Maximal sets of methods whose average ranks span less than `cd`, as
    /// drawn by the bars of a critical-difference diagram. Indices into
    /// `methods`, ordered by average rank.
    pub groups: Vec<Vec<usize>>,
}

impl FriedmanReport {
    pub fn significantly_different(&self, a: usize, b: usize) -> bool {
        (self.avg_ranks[a] - self.avg_ranks[b]).abs() >= self.cd
    }
}

pub fn friedman_nemenyi<T: Scalar>(t: &ScoreTable<T>, alpha: f64) -> Result<FriedmanReport> {
    let k = t.n_methods();
    if k < 3 {
        return Err(Error::InvalidArgument(format!(
            "the Friedman chi-square approximation needs k >= 3 methods, got {k}"
        )));
    }
    let q_alpha = nemenyi_q(k, alpha)?;
    let n = t.n_datasets();
    let Ranks { avg_ranks, .. } = rank_methods(t);
    let (kf, nf) = (k as f64, n as f64);
    let sum_sq: f64 = avg_ranks.iter().map(|r| r * r).sum();
    let statistic = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let chi = ChiSquared::new(kf - 1.0).expect("k >= 3");
    let p_value = chi.sf(statistic);

    let denom = nf * (kf - 1.0) - statistic;
    let (iman_davenport_f, iman_davenport_p) = if denom > 0.0 {
        let f = (nf - 1.0) * statistic / denom;
        let dist = FisherSnedecor::new(kf - 1.0, (kf - 1.0) * (nf - 1.0)).expect("N >= 2, k >= 3");
        (Some(f), dist.sf(f))
    } else {
        (None, 0.0)
    };

    let cd = q_alpha * (kf * (kf + 1.0) / (6.0 * nf)).sqrt();
    let groups = cd_groups(&avg_ranks, cd);
    Ok(FriedmanReport {
        methods: t.methods.clone(),
        n_datasets: n,
        avg_ranks,
        statistic,
        p_value,
        iman_davenport_f,
        iman_davenport_p,
        alpha,
        q_alpha,
        cd,
        groups,
    })
}

fn cd_groups(avg_ranks: &[f64], cd: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..avg_ranks.len()).collect();
    order.sort_by(|&a, &b| avg_ranks[a].total_cmp(&avg_ranks[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last_end = 0;
    for s in 0..order.len() {
        let mut e = s;
        while e + 1 < order.len() && avg_ranks[order[e + 1]] - avg_ranks[order[s]] < cd {
            e += 1;
        }
        if e > s && (groups.is_empty() || e > last_end) {
            groups.push(order[s..=e].to_vec());
            last_end = e;
        }
    }
    groups
}

/// Data behind a critical-difference diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdDiagram {
    pub cd: f64,
    pub alpha: f64,
    pub n_datasets: usize,
    pub methods: Vec<CdEntry>,
    pub groups: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdEntry {
    pub method: String,
    pub avg_rank: f64,
    /// Indices into [`CdDiagram::groups`] this method belongs to.
    pub groups: Vec<usize>,
}

impl From<&FriedmanReport> for CdDiagram {
    fn from(r: &FriedmanReport) -> Self {
        let methods = r
            .methods
            .iter()
            .enumerate()
            .map(|(j, m)| CdEntry {
                method: m.clone(),
                avg_rank: r.avg_ranks[j],
                groups: (0..r.groups.len()).filter(|&g| r.groups[g].contains(&j)).collect(),
            })
            .collect();
        CdDiagram {
            cd: r.cd,
            alpha: r.alpha,
            n_datasets: r.n_datasets,
            methods,
            groups: r
                .groups
                .iter()
                .map(|g| g.iter().map(|&j| r.methods[j].clone()).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesReport {
    pub p_a_gt_b: f64,
    pub p_rope: f64,
    pub p_b_gt_a: f64,
    pub rope: f64,
    pub samples: usize,
    /// Datasets with `a − b > rope`, `|a − b| <= rope`, `a − b < −rope`.
    pub counts: [usize; 3],
    /// Prior pseudo-count placed on the rope outcome.
    pub prior_strength: f64,
}

fn trichotomize<T: Scalar>(a: &[T], b: &[T], rope: f64) -> Result<[usize; 3]> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if !(rope >= 0.0) {
        return Err(Error::InvalidArgument(format!("rope must be non-negative, got {rope}")));
    }
    let mut counts = [0usize; 3];
    for (&x, &y) in a.iter().zip(b) {
        let z = (x - y).to_f64_lossy();
        if z > rope {
            counts[0] += 1;
        } else if z < -rope {
            counts[2] += 1;
        } else {
            counts[1] += 1;
        }
    }
    Ok(counts)
}

fn dirichlet_params(counts: [usize; 3], prior: f64) -> [f64; 3] {
    [counts[0] as f64, counts[1] as f64 + prior, counts[2] as f64]
}

fn draw<R: rand::Rng>(params: &[f64; 3], rng: &mut R) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (gi, &a) in g.iter_mut().zip(params) {
        if a > 0.0 {
            *gi = Gamma::new(a, 1.0).expect("positive shape").sample(rng);
        }
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

/// Bayesian sign test of `a` against `b` with a Dirichlet posterior over the
/// three outcomes `(a > b, rope, b > a)`, prior pseudo-count 1 on the rope.
///
/// Each posterior draw is credited to its strictly largest component; ties
/// split the credit evenly.
pub fn bayesian_sign_test<T: Scalar>(
    a_scores: &[T],
    b_scores: &[T],
    rope: f64,
    samples: usize,
    seed: u64,
) -> Result<BayesReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let counts = trichotomize(a_scores, b_scores, rope)?;
    let params = dirichlet_params(counts, 1.0);
    let n_shards = samples.div_ceil(SHARD);
    let wins = (0..n_shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = seed::rng(seed::derive(seed, s as u64));
            let todo = SHARD.min(samples - s * SHARD);
            let mut w = [0.0f64; 3];
            for _ in 0..todo {
                let p = draw(&params, &mut rng);
                let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let ties = p.iter().filter(|&&v| v == max).count() as f64;
                for (wi, &v) in w.iter_mut().zip(&p) {
                    if v == max {
                        *wi += 1.0 / ties;
                    }
                }
            }
            w
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold([0.0; 3], |acc, w| [acc[0] + w[0], acc[1] + w[1], acc[2] + w[2]]);
    let total = samples as f64;
    Ok(BayesReport {
        p_a_gt_b: wins[0] / total,
        p_rope: wins[1] / total,
        p_b_gt_a: wins[2] / total,
        rope,
        samples,
        counts,
        prior_strength: 1.0,
    })
}

/// Raw posterior draws `(p(a>b), p(rope), p(b>a))` for simplex plots.
pub fn sign_test_draws<T: Scalar>(
    a_scores: &[T],
    b_scores: &[T],
    rope: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<[f64; 3]>> {
    let params = dirichlet_params(trichotomize(a_scores, b_scores, rope)?, 1.0);
    let mut rng = seed::rng(seed);
    Ok((0..samples).map(|_| draw(&params, &mut rng)).collect())
}

/// `p(row method > column method)` for every ordered pair; the diagonal is 0.
pub fn pairwise_sign_tests<T: Scalar>(
    t: &ScoreTable<T>,
    rope: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<BayesReport>>> {
    let k = t.n_methods();
    (0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    let s = seed::derive(seed, (a * k + b) as u64);
                    bayesian_sign_test(&t.column(a), &t.column(b), rope, samples, s)
                })
                .collect()
        })
        .collect()
}
