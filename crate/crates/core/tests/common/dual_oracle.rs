//! Test-only reference solver for the SVM dual, independent of SMO.
//!
//! Accelerated projected gradient on `min ½ αᵀQα − Σα` over the box
//! `[0, C]ⁿ` intersected with `Σ α_i y_i = 0`. The projection is found by
//! bisection on the multiplier of the equality constraint.

#![allow(dead_code)]

use rand::Rng;

pub struct OracleSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub stationarity: f64,
}

fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> (Vec<f64>, f64) {
        let a: Vec<f64> = v.iter().zip(y).map(|(&vi, &yi)| (vi - lam * yi).clamp(0.0, c)).collect();
        let s = a.iter().zip(y).map(|(ai, yi)| ai * yi).sum();
        (a, s)
    };
    // Σ y_i clip(v_i − λ y_i) is non-increasing in λ.
    let (mut lo, mut hi) = (-1.0, 1.0);
    while at(lo).1 < 0.0 {
        lo *= 2.0;
    }
    while at(hi).1 > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi)).0
}

fn grad(q: &[Vec<f64>], a: &[f64]) -> Vec<f64> {
    q.iter().map(|r| r.iter().zip(a).map(|(x, y)| x * y).sum::<f64>() - 1.0).collect()
}

/// Dual objective in the maximization form `Σα − ½ αᵀQα`.
pub fn dual_value(k: &[Vec<f64>], y: &[f64], a: &[f64]) -> f64 {
    let n = a.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += a[i] * a[j] * y[i] * y[j] * k[i][j];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

pub fn solve(k: &[Vec<f64>], y: &[f64], c: f64) -> OracleSolution {
    let n = y.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect())
        .collect();
    let lip = q.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(1e-12, f64::max);
    let step = 1.0 / lip;
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut stationarity = f64::INFINITY;
    for it in 0..2_000_000 {
        let g = grad(&q, &z);
        let cand: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect();
        let next = project(&cand, y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let f = |x: &[f64]| -dual_value(k, y, x);
        // restart momentum when the objective goes up
        let restart = f(&next) > f(&a);
        let momentum = if restart { 0.0 } else { (t - 1.0) / t_next };
        z = next.iter().zip(&a).map(|(x, p)| x + momentum * (x - p)).collect();
        t = if restart { 1.0 } else { t_next };
        a = next;
        if it % 50 == 0 {
            let g = grad(&q, &a);
            let cand: Vec<f64> = a.iter().zip(&g).map(|(ai, gi)| ai - step * gi).collect();
            let p = project(&cand, y, c);
            stationarity = a.iter().zip(&p).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / step;
            if stationarity < 1e-10 {
                break;
            }
        }
    }
    OracleSolution {
        objective: dual_value(k, y, &a),
        alpha: a,
        stationarity,
    }
}

/// Random p.s.d. kernel `A Aᵀ / r` with `A` of shape `n × r`.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    let r = rng.random_range(1..=n + 2);
    let a: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..r).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| a[i].iter().zip(&a[j]).map(|(x, y)| x * y).sum::<f64>() / r as f64)
                .collect()
        })
        .collect()
}

/// Random ±1 labels with both classes present.
pub fn random_labels<R: Rng>(rng: &mut R, n: usize) -> Vec<i8> {
    loop {
        let y: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        if y.contains(&1) && y.contains(&-1) {
            return y;
        }
    }
}

/// Largest violation of the KKT margin conditions for a trained model.
pub fn kkt_violation(k: &[Vec<f64>], y: &[i8], dual_coefs: &[f64], bias: f64, c: f64) -> f64 {
    let n = y.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let h: f64 = (0..n).map(|j| dual_coefs[j] * k[i][j]).sum::<f64>() + bias;
        let margin = y[i] as f64 * h;
        let a = dual_coefs[i].abs();
        let v = if a <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if a >= c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}
