//! Bootstrap-sampled CART trees with Gini splits.
//!
//! The only thing the kernel code needs from a tree is [`Tree::leaf_of`]:
//! the id of the leaf an instance lands in. Leaves are numbered `0..n_leaves`
//! in depth-first, left-first order.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

/// Depth limits searched for the forest baseline; `None` grows trees fully.
pub const MAX_DEPTH_GRID: [Option<usize>; 11] = [
    Some(10),
    Some(100),
    Some(1_000),
    Some(10_000),
    Some(100_000),
    Some(1_000_000),
    Some(10_000_000),
    Some(100_000_000),
    Some(1_000_000_000),
    Some(10_000_000_000),
    None,
];
pub const MAX_FEATURES_GRID: [f64; 5] = [0.01, 0.05, 0.10, 0.20, 0.30];
pub const MIN_SAMPLES_LEAF_GRID: [usize; 3] = [1, 2, 4];
pub const MIN_SAMPLES_SPLIT_GRID: [usize; 3] = [2, 5, 10];
pub const DEFAULT_TREES: usize = 500;

/// Number of candidate features drawn at every node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `max(1, round(fraction · m))`.
    Fraction(f64),
    /// `max(1, floor(sqrt(m)))`.
    Sqrt,
}

impl MaxFeatures {
    pub fn count(self, m: usize) -> usize {
        let k = match self {
            MaxFeatures::Fraction(f) => (f * m as f64).round() as usize,
            MaxFeatures::Sqrt => (m as f64).sqrt().floor() as usize,
        };
        k.clamp(1, m.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestHyperparams {
    pub n_trees: usize,
    /// `None` means unlimited.
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for ForestHyperparams {
    fn default() -> Self {
        Self {
            n_trees: DEFAULT_TREES,
            max_depth: None,
            max_features: MaxFeatures::Sqrt,
            min_samples_leaf: 1,
            min_samples_split: 2,
        }
    }
}

impl ForestHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidArgument("n_trees must be positive".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidArgument("min_samples_leaf must be positive".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidArgument("min_samples_split must be at least 2".into()));
        }
        if let MaxFeatures::Fraction(f) = self.max_features {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "max_features fraction {f} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Replaces depth limits that can never bind on `n_samples` rows with
    /// `None`. A tree over `n` samples is at most `n - 1` levels deep, so
    /// this does not change the fitted trees.
    pub fn effective(&self, n_samples: usize) -> Self {
        let mut hp = *self;
        if matches!(hp.max_depth, Some(d) if d + 1 >= n_samples) {
            hp.max_depth = None;
        }
        hp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", rename_all = "snake_case")]
pub enum Node<T: Scalar> {
    Internal {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf_id: usize,
        histogram: Vec<usize>,
    },
}

/// A fitted tree stored as a flat node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Tree<T: Scalar> {
    nodes: Vec<Node<T>>,
    leaf_nodes: Vec<usize>,
    n_features: usize,
    n_classes: usize,
}

impl<T: Scalar> Tree<T> {
    /// Assembles a tree from a node array rooted at index 0. Leaf ids must
    /// be `0..n_leaves` and every node must be reachable exactly once.
    pub fn from_nodes(nodes: Vec<Node<T>>, n_features: usize, n_classes: usize) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        let mut seen = vec![false; nodes.len()];
        let mut leaf_nodes = vec![usize::MAX; nodes.len()];
        let mut n_leaves = 0;
        let mut stack = vec![0usize];
        while let Some(at) = stack.pop() {
            if at >= nodes.len() || std::mem::replace(&mut seen[at], true) {
                return bad(format!("node {at} is out of range or shared"));
            }
            match &nodes[at] {
                Node::Internal {
                    feature, left, right, ..
                } => {
                    if *feature >= n_features {
                        return bad(format!("node {at} splits on feature {feature}"));
                    }
                    stack.push(*right);
                    stack.push(*left);
                }
                Node::Leaf { leaf_id, histogram } => {
                    if *leaf_id >= nodes.len() || leaf_nodes[*leaf_id] != usize::MAX {
                        return bad(format!("leaf id {leaf_id} repeated or out of range"));
                    }
                    if histogram.len() != n_classes {
                        return bad(format!("leaf {leaf_id} histogram has wrong length"));
                    }
                    leaf_nodes[*leaf_id] = at;
                    n_leaves += 1;
                }
            }
        }
        leaf_nodes.truncate(n_leaves);
        if leaf_nodes.contains(&usize::MAX) || seen.contains(&false) {
            return bad("leaf ids are not contiguous or nodes are unreachable".into());
        }
        Ok(Self {
            nodes,
            leaf_nodes,
            n_features,
            n_classes,
        })
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_nodes.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Leaf id reached by `x`; goes left iff `x[feature] <= threshold`.
    pub fn leaf_of(&self, x: &[T]) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.leaf_unchecked(x))
    }

    #[inline]
    pub(crate) fn leaf_unchecked(&self, x: &[T]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { leaf_id, .. } => return *leaf_id,
            }
        }
    }

    pub fn leaf_histogram(&self, leaf_id: usize) -> &[usize] {
        match &self.nodes[self.leaf_nodes[leaf_id]] {
            Node::Leaf { histogram, .. } => histogram,
            Node::Internal { .. } => unreachable!("leaf_nodes only indexes leaves"),
        }
    }

    /// Majority class of the leaf `x` lands in; ties go to the smaller id.
    pub fn predict(&self, x: &[T]) -> Result<usize> {
        let leaf = self.leaf_of(x)?;
        Ok(argmax_first(self.leaf_histogram(leaf)))
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((at, d)) = stack.pop() {
            match &self.nodes[at] {
                Node::Internal { left, right, .. } => {
                    stack.push((*left, d + 1));
                    stack.push((*right, d + 1));
                }
                Node::Leaf { .. } => best = best.max(d),
            }
        }
        best
    }
}

fn argmax_first(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

/// Draws `|train|` indices from `train` with replacement.
pub fn bootstrap_sample<R: Rng>(train: &[usize], rng: &mut R) -> Result<Vec<usize>> {
    if train.is_empty() {
        return Err(Error::Empty("bootstrap of an empty training set"));
    }
    Ok((0..train.len())
        .map(|_| train[rng.random_range(0..train.len())])
        .collect())
}

/// Gini impurity `1 - Σ p_c²` of a class histogram.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Split<T> {
    feature: usize,
    threshold: T,
    /// Σ over children of `n_child · gini(child)`.
    weighted: f64,
}

struct Builder<'a, T: Scalar, R> {
    data: &'a Dataset<T>,
    hp: ForestHyperparams,
    n_candidates: usize,
    n_classes: usize,
    rng: R,
    nodes: Vec<Node<T>>,
    leaf_nodes: Vec<usize>,
    buf: Vec<(T, usize)>,
}

impl<T: Scalar, R: Rng> Builder<'_, T, R> {
    fn histogram(&self, samples: &[usize]) -> Vec<usize> {
        let mut h = vec![0; self.n_classes];
        let labels = self.data.labels();
        for &i in samples {
            h[labels[i]] += 1;
        }
        h
    }

    fn push_leaf(&mut self, histogram: Vec<usize>) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            leaf_id: self.leaf_nodes.len(),
            histogram,
        });
        self.leaf_nodes.push(at);
        at
    }

    fn grow(&mut self, samples: &mut [usize], depth: usize) -> usize {
        let histogram = self.histogram(samples);
        let n = samples.len();
        let pure = histogram.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = self.hp.max_depth.is_some_and(|d| depth >= d);
        if pure
            || depth_reached
            || n < self.hp.min_samples_split
            || n < 2 * self.hp.min_samples_leaf
        {
            return self.push_leaf(histogram);
        }

        let split = match self.search(samples, &histogram) {
            Search::Found(s) => Some(s),
            Search::AllConstant => match self.search(samples, &histogram) {
                Search::Found(s) => Some(s),
                _ => None,
            },
            Search::Blocked => None,
        };
        let Some(split) = split else {
            return self.push_leaf(histogram);
        };

        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            leaf_id: usize::MAX,
            histogram: Vec::new(),
        });
        let mid = partition(samples, |i| self.data.value(i, split.feature) <= split.threshold);
        let (l, r) = samples.split_at_mut(mid);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[at] = Node::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }

    fn search(&mut self, samples: &[usize], parent: &[usize]) -> Search<T> {
        let m = self.data.n_features();
        let mut features = index::sample(&mut self.rng, m, self.n_candidates).into_vec();
        features.sort_unstable();

        let n = samples.len();
        let min_leaf = self.hp.min_samples_leaf;
        let parent_sq: usize = parent.iter().map(|c| c * c).sum();
        let labels = self.data.labels();
        let mut best: Option<Split<T>> = None;
        let mut any_varying = false;
        let mut left = vec![0usize; self.n_classes];
        let mut right = vec![0usize; self.n_classes];

        for &f in &features {
            self.buf.clear();
            self.buf
                .extend(samples.iter().map(|&i| (self.data.value(i, f), labels[i])));
            self.buf
                .sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("features are finite"));
            if self.buf[0].0 == self.buf[n - 1].0 {
                continue;
            }
            any_varying = true;
            left.iter_mut().for_each(|c| *c = 0);
            right.copy_from_slice(parent);
            let mut sq_left = 0usize;
            let mut sq_right = parent_sq;
            for pos in 0..n - 1 {
                let c = self.buf[pos].1;
                sq_left += 2 * left[c] + 1;
                sq_right -= 2 * right[c] - 1;
                left[c] += 1;
                right[c] -= 1;
                let (lo, hi) = (self.buf[pos].0, self.buf[pos + 1].0);
                let n_left = pos + 1;
                let n_right = n - n_left;
                if lo == hi || n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let weighted = (n_left as f64 - sq_left as f64 / n_left as f64)
                    + (n_right as f64 - sq_right as f64 / n_right as f64);
                if best.as_ref().is_none_or(|b| weighted < b.weighted) {
                    best = Some(Split {
                        feature: f,
                        threshold: midpoint(lo, hi),
                        weighted,
                    });
                }
            }
        }
        match best {
            Some(s) => Search::Found(s),
            None if !any_varying => Search::AllConstant,
            None => Search::Blocked,
        }
    }
}

enum Search<T> {
    Found(Split<T>),
    AllConstant,
    /// Some feature varies but every threshold violates `min_samples_leaf`.
    Blocked,
}

fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let mid = lo + (hi - lo) * T::of(0.5);
    if mid >= hi || mid < lo {
        lo
    } else {
        mid
    }
}

/// Moves elements satisfying `pred` to the front, preserving relative order
/// on both sides. Returns the count of those elements.
fn partition(xs: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = xs.iter().partition(|&&i| pred(i));
    let k = yes.len();
    xs[..k].copy_from_slice(&yes);
    xs[k..].copy_from_slice(&no);
    k
}

/// Grows one CART tree on the `sample` multiset of instance ids.
pub fn fit_tree<T: Scalar>(
    data: &Dataset<T>,
    sample: &[usize],
    hp: &ForestHyperparams,
    seed: u64,
) -> Result<Tree<T>> {
    if sample.is_empty() {
        return Err(Error::Empty("tree sample"));
    }
    hp.validate()?;
    let mut samples = sample.to_vec();
    let mut b = Builder {
        data,
        hp: hp.effective(sample.len()),
        n_candidates: hp.max_features.count(data.n_features()),
        n_classes: data.n_classes(),
        rng: seed::rng(seed),
        nodes: Vec::new(),
        leaf_nodes: Vec::new(),
        buf: Vec::with_capacity(sample.len()),
    };
    b.grow(&mut samples, 0);
    Ok(Tree {
        nodes: b.nodes,
        leaf_nodes: b.leaf_nodes,
        n_features: data.n_features(),
        n_classes: data.n_classes(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ForestModel<T: Scalar> {
    pub trees: Vec<Tree<T>>,
    pub hyperparams: ForestHyperparams,
    pub training_seed: u64,
    pub n_classes: usize,
    pub n_features: usize,
}

impl<T: Scalar> ForestModel<T> {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub(crate) fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Fits `hp.n_trees` trees, tree `k` seeded from `(seed, k)` and trained on
/// its own bootstrap of `train`.
pub fn fit_forest<T: Scalar>(
    data: &Dataset<T>,
    train: &[usize],
    hp: &ForestHyperparams,
    seed: u64,
) -> Result<ForestModel<T>> {
    if train.is_empty() {
        return Err(Error::Empty("forest training set"));
    }
    hp.validate()?;
    let trees = (0..hp.n_trees)
        .into_par_iter()
        .map(|k| {
            let tree_seed = seed::derive(seed, k as u64);
            let mut rng = seed::rng(seed::derive(tree_seed, u64::MAX));
            let sample = bootstrap_sample(train, &mut rng)?;
            fit_tree(data, &sample, hp, tree_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        trees,
        hyperparams: *hp,
        training_seed: seed,
        n_classes: data.n_classes(),
        n_features: data.n_features(),
    })
}

/// Majority vote of per-tree predictions; ties go to the smaller class id.
pub fn predict_forest<T: Scalar>(model: &ForestModel<T>, x: &[T]) -> Result<usize> {
    model.check_dim(x)?;
    let mut votes = vec![0usize; model.n_classes];
    for tree in &model.trees {
        let leaf = tree.leaf_unchecked(x);
        votes[argmax_first(tree.leaf_histogram(leaf))] += 1;
    }
    Ok(argmax_first(&votes))
}
