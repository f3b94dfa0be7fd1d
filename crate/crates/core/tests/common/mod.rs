//! Reference implementations shared by the oracle and acceptance suites.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

pub fn gauss(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

#[derive(Deserialize)]
pub struct TCase {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub t: f64,
    pub df: f64,
    /// Decimal string so tiny tails survive JSON.
    pub p: String,
}

pub fn paired_t_cases() -> Vec<TCase> {
    serde_json::from_str(include_str!("../fixtures/paired_t.json")).unwrap()
}

/// Rejects `p_i` iff some `p_j >= p_i` satisfies `p_j <= q * #{l: p_l <= p_j} / m`.
pub fn bh_by_enumeration(p: &[f64], q: f64) -> Vec<bool> {
    let m = p.len() as f64;
    let passes: Vec<f64> = p
        .iter()
        .copied()
        .filter(|&pj| pj <= q * p.iter().filter(|&&pl| pl <= pj).count() as f64 / m)
        .collect();
    let bar = passes.into_iter().fold(f64::NEG_INFINITY, f64::max);
    p.iter().map(|&pi| pi <= bar).collect()
}

/// Two-sided 5% critical value of Student t with 5 degrees of freedom.
pub const T_CRIT_DF5: f64 = 2.570_581_835_636_314;

pub fn t_values(d: &[Vec<f64>]) -> Vec<f64> {
    let n = d.len() as f64;
    (0..d[0].len())
        .map(|t| {
            let col: Vec<f64> = d.iter().map(|r| r[t]).collect();
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            mean / (var / n).sqrt()
        })
        .collect()
}

pub fn clusters(t: &[f64], thr: f64) -> Vec<(usize, usize, f64)> {
    let mut out: Vec<(usize, usize, f64)> = Vec::new();
    for (i, &v) in t.iter().enumerate() {
        if v.abs() <= thr {
            continue;
        }
        match out.last_mut() {
            Some(c) if c.1 == i && (c.2 > 0.0) == (v > 0.0) => {
                c.1 = i + 1;
                c.2 += v;
            }
            _ => out.push((i, i + 1, v)),
        }
    }
    out
}

/// Observed clusters with p-values from all `2^n` subject sign flips.
pub fn exhaustive_cluster_test(d: &[Vec<f64>], threshold: f64) -> Vec<(usize, usize, f64, f64)> {
    let n = d.len();
    let total = 1usize << n;
    let null: Vec<f64> = (0..total)
        .map(|mask| {
            let flipped: Vec<Vec<f64>> = d
                .iter()
                .enumerate()
                .map(|(s, row)| {
                    let sign = if mask >> s & 1 == 1 { -1.0 } else { 1.0 };
                    row.iter().map(|v| sign * v).collect()
                })
                .collect();
            clusters(&t_values(&flipped), threshold)
                .iter()
                .map(|c| c.2.abs())
                .fold(0.0, f64::max)
        })
        .collect();
    clusters(&t_values(d), threshold)
        .into_iter()
        .map(|(a, b, mass)| {
            let hits = null.iter().filter(|&&m| m >= mass.abs() * (1.0 - 1e-12)).count();
            (a, b, mass, hits as f64 / total as f64)
        })
        .collect()
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// `(eigenvalues, eigenvectors as columns)` unsorted.
pub fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j].powi(2))
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i].powi(2)).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// `||P1 - P2||_F` for the row-space projectors of two orthonormal row sets,
/// an upper bound on the sine of their largest principal angle.
pub fn subspace_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n = a[0].len();
    let proj = |rows: &[Vec<f64>], i: usize, j: usize| rows.iter().map(|r| r[i] * r[j]).sum::<f64>();
    let mut diff = 0.0;
    for i in 0..n {
        for j in 0..n {
            diff += (proj(a, i, j) - proj(b, i, j)).powi(2);
        }
    }
    diff.sqrt()
}

/// Leading `n_comp` covariance eigenvectors of channel-major blocks, by Jacobi.
pub fn pca_oracle(blocks: &[Vec<f64>], n_ch: usize, len: usize, n_comp: usize) -> Vec<Vec<f64>> {
    let total = blocks.len() * len;
    let mut x = vec![vec![0.0; total]; n_ch];
    for (bi, b) in blocks.iter().enumerate() {
        for c in 0..n_ch {
            x[c][bi * len..(bi + 1) * len].copy_from_slice(&b[c * len..(c + 1) * len]);
        }
    }
    for row in x.iter_mut() {
        let m = row.iter().sum::<f64>() / total as f64;
        row.iter_mut().for_each(|v| *v -= m);
    }
    let cov: Vec<Vec<f64>> = (0..n_ch)
        .map(|i| {
            (0..n_ch)
                .map(|j| x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum::<f64>() / (total - 1) as f64)
                .collect()
        })
        .collect();
    let (vals, vecs) = jacobi(cov);
    let mut order: Vec<usize> = (0..n_ch).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    order[..n_comp]
        .iter()
        .map(|&k| (0..n_ch).map(|c| vecs[c][k]).collect())
        .collect()
}

/// Random low-rank channel data with well separated leading eigenvalues.
pub fn pca_fixture(r: &mut ChaCha8Rng, n_ch: usize, len: usize) -> Vec<Vec<f64>> {
    let mixing: Vec<Vec<f64>> = (0..n_ch).map(|_| (0..4).map(|_| gauss(r)).collect()).collect();
    let gains = [6.0, 3.0, 1.5, 0.75];
    (0..2)
        .map(|_| {
            let src: Vec<Vec<f64>> = (0..4)
                .map(|k| (0..len).map(|_| gains[k] * gauss(r)).collect())
                .collect();
            let mut data = vec![0.0; n_ch * len];
            for c in 0..n_ch {
                for s in 0..len {
                    data[c * len + s] = (0..4).map(|k| mixing[c][k] * src[k][s]).sum::<f64>() + 0.1 * gauss(r) + 3.0;
                }
            }
            data
        })
        .collect()
}

/// Sub-average by materializing the `k` picks as a list and averaging it.
pub fn list_sub_average(trials: &[Vec<f64>], counts: &[usize], order_seed: &mut ChaCha8Rng) -> Vec<f64> {
    use rand::seq::SliceRandom;
    let mut picks: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| std::iter::repeat_n(i, n))
        .collect();
    picks.shuffle(order_seed);
    let mut out = vec![0.0; trials[0].len()];
    for &i in &picks {
        out.iter_mut().zip(&trials[i]).for_each(|(o, v)| *o += v);
    }
    out.iter_mut().for_each(|o| *o /= picks.len() as f64);
    out
}

/// Solves the soft-margin dual by enumerating which points are non-support,
/// free and bounded support vectors, and solving the KKT equalities of each
/// assignment. Returns `(w, b)` of a KKT-consistent assignment.
pub fn svm_by_enumeration(x: &[[f64; 2]], y: &[f64], c: f64) -> Option<([f64; 2], f64)> {
    let n = x.len();
    let k = |i: usize, j: usize| x[i][0] * x[j][0] + x[i][1] * x[j][1];
    let mut best: Option<([f64; 2], f64, f64)> = None;
    for code in 0..3usize.pow(n as u32) {
        let state: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        if free.is_empty() {
            continue;
        }
        let m = free.len() + 1;
        let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
        let mut rhs = nalgebra::DVector::<f64>::zeros(m);
        for (r, &i) in free.iter().enumerate() {
            for (col, &j) in free.iter().enumerate() {
                a[(r, col)] = y[i] * y[j] * k(i, j);
            }
            a[(r, m - 1)] = y[i];
            rhs[r] = 1.0
                - (0..n)
                    .filter(|&j| state[j] == 2)
                    .map(|j| y[i] * y[j] * c * k(i, j))
                    .sum::<f64>();
        }
        for (col, &j) in free.iter().enumerate() {
            a[(m - 1, col)] = y[j];
        }
        rhs[m - 1] = -(0..n).filter(|&j| state[j] == 2).map(|j| c * y[j]).sum::<f64>();
        let Some(sol) = a.lu().solve(&rhs) else { continue };
        let mut alpha = vec![0.0; n];
        for (col, &j) in free.iter().enumerate() {
            alpha[j] = sol[col];
        }
        for j in (0..n).filter(|&j| state[j] == 2) {
            alpha[j] = c;
        }
        let b = sol[m - 1];
        if free.iter().any(|&j| alpha[j] < -1e-9 || alpha[j] > c + 1e-9) {
            continue;
        }
        let w = [0, 1].map(|d| (0..n).map(|j| alpha[j] * y[j] * x[j][d]).sum::<f64>());
        let margin = |i: usize| y[i] * (w[0] * x[i][0] + w[1] * x[i][1] + b);
        let ok = (0..n).all(|i| match state[i] {
            0 => margin(i) >= 1.0 - 1e-9,
            1 => true,
            _ => margin(i) <= 1.0 + 1e-9,
        });
        if !ok {
            continue;
        }
        let hinge: f64 = (0..n).map(|i| (1.0 - margin(i)).max(0.0)).sum();
        let obj = 0.5 * (w[0] * w[0] + w[1] * w[1]) + c * hinge;
        if best.is_none_or(|bst| obj < bst.2) {
            best = Some((w, b, obj));
        }
    }
    best.map(|(w, b, _)| (w, b))
}
