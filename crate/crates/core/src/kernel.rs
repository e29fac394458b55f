//! Kernel matrices: random-forest similarity, shifted cosine, and RBF.

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::ForestModel;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Rf,
    Cosine,
    Rbf,
}

impl KernelKind {
    fn code(self) -> u8 {
        match self {
            KernelKind::Rf => 0,
            KernelKind::Cosine => 1,
            KernelKind::Rbf => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => KernelKind::Rf,
            1 => KernelKind::Cosine,
            2 => KernelKind::Rbf,
            _ => return None,
        })
    }
}

/// Dense row-major kernel matrix between `row_ids` and `col_ids`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KernelMatrix<T: Scalar> {
    values: Vec<T>,
    rows: usize,
    cols: usize,
    pub kind: KernelKind,
    pub row_ids: Vec<usize>,
    pub col_ids: Vec<usize>,
    pub symmetric: bool,
}

impl<T: Scalar> KernelMatrix<T> {
    /// Wraps raw values. `symmetric` is recorded as given; use
    /// [`validate_kernel`] to check it.
    pub fn from_values(
        kind: KernelKind,
        values: Vec<T>,
        row_ids: Vec<usize>,
        col_ids: Vec<usize>,
        symmetric: bool,
    ) -> Result<Self> {
        let (rows, cols) = (row_ids.len(), col_ids.len());
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: values.len(),
            });
        }
        Ok(Self {
            values,
            rows,
            cols,
            kind,
            row_ids,
            col_ids,
            symmetric,
        })
    }

    /// Builds a square matrix with ids `0..n` from nested rows.
    pub fn square(kind: KernelKind, rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::from_values(kind, values, (0..n).collect(), (0..n).collect(), true)
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Restriction to the given row and column positions (not ids).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let r = self.row(i);
            values.extend(cols.iter().map(|&j| r[j]));
        }
        Self {
            values,
            rows: rows.len(),
            cols: cols.len(),
            kind: self.kind,
            row_ids: rows.iter().map(|&i| self.row_ids[i]).collect(),
            col_ids: cols.iter().map(|&j| self.col_ids[j]).collect(),
            symmetric: self.symmetric && rows == cols,
        }
    }

    /// Writes the binary cache format: magic `RFKM`, version, kind, scalar
    /// width, `p`, `q`, row ids, column ids, then values row-major. All
    /// integers are little-endian `u64` except the single-byte fields.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"RFKM")?;
        w.write_all(&[1, self.kind.code(), T::WIDTH, self.symmetric as u8])?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        for &id in self.row_ids.iter().chain(&self.col_ids) {
            w.write_all(&(id as u64).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::KernelFormat(e.to_string());
        let mut head = [0u8; 8];
        r.read_exact(&mut head).map_err(io)?;
        if &head[..4] != b"RFKM" {
            return Err(Error::KernelFormat("bad magic".into()));
        }
        if head[4] != 1 {
            return Err(Error::KernelFormat(format!("unsupported version {}", head[4])));
        }
        let kind = KernelKind::from_code(head[5])
            .ok_or_else(|| Error::KernelFormat(format!("unknown kind {}", head[5])))?;
        let symmetric = head[7] != 0;
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut word).map_err(io)?;
            Ok(u64::from_le_bytes(word))
        };
        let rows = next(&mut r)? as usize;
        let cols = next(&mut r)? as usize;
        let row_ids = (0..rows).map(|_| next(&mut r).map(|v| v as usize)).collect::<Result<_>>()?;
        let col_ids = (0..cols).map(|_| next(&mut r).map(|v| v as usize)).collect::<Result<_>>()?;
        let values = (0..rows * cols)
            .map(|_| next(&mut r).map(|v| T::of(f64::from_bits(v))))
            .collect::<Result<_>>()?;
        Self::from_values(kind, values, row_ids, col_ids, symmetric)
    }
}

/// Fraction of trees in which `a` and `b` reach the same leaf.
pub fn rf_similarity<T: Scalar>(model: &ForestModel<T>, a: &[T], b: &[T]) -> Result<T> {
    model.check_dim(a)?;
    model.check_dim(b)?;
    let shared = model
        .trees
        .iter()
        .filter(|t| t.leaf_unchecked(a) == t.leaf_unchecked(b))
        .count();
    Ok(T::of_usize(shared) / T::of_usize(model.n_trees()))
}

/// Per-tree leaf ids of the given instances: `out[k][i]` for tree `k`.
pub fn leaf_assignments<T: Scalar>(
    model: &ForestModel<T>,
    data: &Dataset<T>,
    idx: &[usize],
) -> Result<Vec<Vec<usize>>> {
    model.check_dim(data.row(0))?;
    Ok(model
        .trees
        .par_iter()
        .map(|t| idx.iter().map(|&i| t.leaf_unchecked(data.row(i))).collect())
        .collect())
}

/// Groups positions `0..leaves.len()` by leaf id.
fn buckets(leaves: &[usize]) -> Vec<Vec<usize>> {
    let n_leaves = leaves.iter().max().map_or(0, |&m| m + 1);
    let mut b = vec![Vec::new(); n_leaves];
    for (pos, &l) in leaves.iter().enumerate() {
        b[l].push(pos);
    }
    b
}

fn counts_to_kernel<T: Scalar>(
    counts: Vec<u32>,
    n_trees: usize,
    kind: KernelKind,
    row_ids: Vec<usize>,
    col_ids: Vec<usize>,
    symmetric: bool,
) -> KernelMatrix<T> {
    let m = T::of_usize(n_trees);
    let values = counts.into_iter().map(|c| T::of_usize(c as usize) / m).collect();
    KernelMatrix::from_values(kind, values, row_ids, col_ids, symmetric)
        .expect("count buffer sized rows x cols")
}

/// Train×train similarity matrix by leaf-bucket inversion: for every tree,
/// each pair of training instances sharing a leaf increments its count.
pub fn rf_kernel_train<T: Scalar>(
    model: &ForestModel<T>,
    data: &Dataset<T>,
    train: &[usize],
) -> Result<KernelMatrix<T>> {
    let n = train.len();
    let leaves = leaf_assignments(model, data, train)?;
    let counts = leaves
        .par_iter()
        .fold(
            || vec![0u32; n * n],
            |mut acc, tree_leaves| {
                for bucket in buckets(tree_leaves) {
                    for (a, &i) in bucket.iter().enumerate() {
                        acc[i * n + i] += 1;
                        for &j in &bucket[a + 1..] {
                            acc[i * n + j] += 1;
                            acc[j * n + i] += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u32; n * n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(counts_to_kernel(
        counts,
        model.n_trees(),
        KernelKind::Rf,
        train.to_vec(),
        train.to_vec(),
        true,
    ))
}

/// Test×train similarity matrix; row `i` holds `s(x_test_i, x_train_j)`.
pub fn rf_kernel_test<T: Scalar>(
    model: &ForestModel<T>,
    data: &Dataset<T>,
    test: &[usize],
    train: &[usize],
) -> Result<KernelMatrix<T>> {
    let (p, q) = (test.len(), train.len());
    let train_leaves = leaf_assignments(model, data, train)?;
    let test_leaves = leaf_assignments(model, data, test)?;
    let counts = train_leaves
        .par_iter()
        .zip(test_leaves.par_iter())
        .fold(
            || vec![0u32; p * q],
            |mut acc, (tr, te)| {
                let b = buckets(tr);
                for (i, &leaf) in te.iter().enumerate() {
                    if let Some(bucket) = b.get(leaf) {
                        for &j in bucket {
                            acc[i * q + j] += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u32; p * q],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(counts_to_kernel(
        counts,
        model.n_trees(),
        KernelKind::Rf,
        test.to_vec(),
        train.to_vec(),
        false,
    ))
}

fn pairwise<T: Scalar>(
    rows: &[usize],
    cols: &[usize],
    kind: KernelKind,
    f: impl Fn(usize, usize) -> T + Sync,
) -> KernelMatrix<T> {
    let q = cols.len();
    let mut values = vec![T::zero(); rows.len() * q];
    values
        .par_chunks_mut(q.max(1))
        .zip(rows.par_iter())
        .for_each(|(out, &i)| {
            for (o, &j) in out.iter_mut().zip(cols) {
                *o = f(i, j);
            }
        });
    KernelMatrix::from_values(kind, values, rows.to_vec(), cols.to_vec(), rows == cols)
        .expect("buffer sized rows x cols")
}

/// `(1 + cos(x_i, x_j)) / 2`, which lies in `[0, 1]`.
pub fn cosine_kernel<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    cols: &[usize],
) -> Result<KernelMatrix<T>> {
    let norm = |i: usize| -> Result<T> {
        let s: T = data.row(i).iter().map(|&v| v * v).sum();
        if s <= T::zero() {
            Err(Error::ZeroNorm(i))
        } else {
            Ok(s.sqrt())
        }
    };
    let mut norms = vec![T::zero(); data.n_instances()];
    for &i in rows.iter().chain(cols) {
        norms[i] = norm(i)?;
    }
    let half = T::of(0.5);
    Ok(pairwise(rows, cols, KernelKind::Cosine, |i, j| {
        if i == j {
            return T::one();
        }
        let dot: T = data.row(i).iter().zip(data.row(j)).map(|(&a, &b)| a * b).sum();
        let cos = (dot / (norms[i] * norms[j])).max(-T::one()).min(T::one());
        (T::one() + cos) * half
    }))
}

/// `exp(-γ ‖x_i − x_j‖²)`.
pub fn rbf_kernel<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    cols: &[usize],
    gamma: T,
) -> Result<KernelMatrix<T>> {
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    Ok(pairwise(rows, cols, KernelKind::Rbf, |i, j| {
        let d2: T = data
            .row(i)
            .iter()
            .zip(data.row(j))
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        (-gamma * d2).exp()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValidation {
    pub size: usize,
    pub max_asymmetry: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub max_diagonal_deviation: f64,
    pub min_entry: f64,
    pub max_entry: f64,
    pub tolerance: f64,
    /// `min_eigenvalue >= -tolerance`.
    pub is_psd: bool,
}

/// Symmetry, spectrum and diagonal checks of a square kernel matrix.
pub fn validate_kernel<T: Scalar>(k: &KernelMatrix<T>, tolerance: f64) -> Result<KernelValidation> {
    if !k.is_square() {
        return Err(Error::NotSquare {
            rows: k.n_rows(),
            cols: k.n_cols(),
        });
    }
    let n = k.n_rows();
    let mut max_asym = 0.0f64;
    let mut diag_dev = 0.0f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        diag_dev = diag_dev.max((k.get(i, i).to_f64_lossy() - 1.0).abs());
        for j in 0..n {
            let v = k.get(i, j).to_f64_lossy();
            lo = lo.min(v);
            hi = hi.max(v);
            max_asym = max_asym.max((v - k.get(j, i).to_f64_lossy()).abs());
        }
    }
    // Eigenvalues of the symmetric part.
    let sym = DMatrix::from_fn(n, n, |i, j| {
        0.5 * (k.get(i, j).to_f64_lossy() + k.get(j, i).to_f64_lossy())
    });
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max_eig = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(KernelValidation {
        size: n,
        max_asymmetry: max_asym,
        min_eigenvalue: if n == 0 { 0.0 } else { min_eig },
        max_eigenvalue: if n == 0 { 0.0 } else { max_eig },
        max_diagonal_deviation: diag_dev,
        min_entry: lo,
        max_entry: hi,
        tolerance,
        is_psd: n == 0 || min_eig >= -tolerance,
    })
}
