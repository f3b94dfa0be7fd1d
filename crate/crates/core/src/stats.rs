//! Paired t-tests, Benjamini-Hochberg FDR and cluster-based sign-flip
//! permutation tests over time.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::rng::{stream, RngSeed};

#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl PairedSample {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "paired samples of length {} and {}",
                a.len(),
                b.len()
            )));
        }
        if a.len() < 2 {
            return Err(Error::DegenerateSample("need at least two pairs".into()));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSample("non-finite value".into()));
        }
        Ok(PairedSample { a, b })
    }

    pub fn differences(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(x, y)| x - y).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

/// Two-sided p-value of a Student t statistic.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Two-sided critical value `t*` with `P(|T| > t*) = alpha`.
pub fn t_critical(alpha: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    dist.inverse_cdf(1.0 - alpha / 2.0)
}

pub fn paired_t(s: &PairedSample) -> Result<TTest> {
    let d = s.differences();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::DegenerateSample("differences have zero variance".into()));
    }
    let t = mean / (var / n).sqrt();
    let df = n - 1.0;
    Ok(TTest {
        t,
        df,
        p_two_sided: t_two_sided_p(t, df),
    })
}

/// Benjamini-Hochberg step-up rejection mask at level `q`.
pub fn fdr_bh(p_values: &[f64], q: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let cutoff = order
        .iter()
        .enumerate()
        .rev()
        .find(|&(rank, &i)| p_values[i] <= (rank + 1) as f64 * q / m as f64)
        .map(|(rank, _)| rank + 1)
        .unwrap_or(0);
    let mut reject = vec![false; m];
    for &i in &order[..cutoff] {
        reject[i] = true;
    }
    reject
}

/// BH-adjusted p-values (monotone, capped at one).
pub fn fdr_bh_adjusted(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let mut adj = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p_values[i] * m as f64 / (rank + 1) as f64);
        adj[i] = running.min(1.0);
    }
    adj
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub start_index: usize,
    /// Exclusive.
    pub end_index: usize,
    /// Sum of t-values inside the cluster.
    pub mass: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub clusters: Vec<Cluster>,
    pub n_permutations: usize,
    pub exhaustive: bool,
    pub threshold: f64,
}

impl ClusterResult {
    pub fn significant(&self, alpha: f64) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(move |c| c.p_value < alpha)
    }
}

/// Per-time paired differences with cached sums of squares.
struct Differences {
    n: usize,
    len: usize,
    /// subject-major
    d: Vec<f64>,
    sumsq: Vec<f64>,
}

impl Differences {
    fn new(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch("a and b subject counts differ".into()));
        }
        let n = a.len();
        let len = a.first().map_or(0, |r| r.len());
        if len == 0 || a.iter().chain(b).any(|r| r.len() != len) {
            return Err(Error::DimensionMismatch(
                "every subject needs the same non-zero number of time points".into(),
            ));
        }
        let mut d = Vec::with_capacity(n * len);
        for (ra, rb) in a.iter().zip(b) {
            for (x, y) in ra.iter().zip(rb) {
                if !(x.is_finite() && y.is_finite()) {
                    return Err(Error::DegenerateSample("non-finite value".into()));
                }
                d.push(x - y);
            }
        }
        let mut sumsq = vec![0.0; len];
        for s in 0..n {
            for t in 0..len {
                sumsq[t] += d[s * len + t].powi(2);
            }
        }
        Ok(Differences { n, len, d, sumsq })
    }

    /// t-values after multiplying subject `s` by `signs[s]`.
    fn t_values(&self, signs: &[f64], out: &mut [f64]) {
        let n = self.n as f64;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (s, &sign) in signs.iter().enumerate() {
            let row = &self.d[s * self.len..(s + 1) * self.len];
            out.iter_mut().zip(row).for_each(|(o, &x)| *o += sign * x);
        }
        for (t, o) in out.iter_mut().enumerate() {
            let mean = *o / n;
            let var = ((self.sumsq[t] - n * mean * mean) / (n - 1.0)).max(0.0);
            *o = if var > 0.0 && var > 1e-24 * self.sumsq[t] {
                mean / (var / n).sqrt()
            } else if mean == 0.0 {
                0.0
            } else {
                mean.signum() * f64::INFINITY
            };
        }
    }
}

/// Paired t-value at every time point (`a`, `b` are subjects x time).
pub fn t_series(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = Differences::new(a, b)?;
    if d.n < 2 {
        return Err(Error::DegenerateSample("need at least two subjects".into()));
    }
    let mut out = vec![0.0; d.len];
    d.t_values(&vec![1.0; d.n], &mut out);
    Ok(out)
}

/// Contiguous same-sign runs with `|t| > threshold`, as `(start, end, mass)`.
pub fn find_clusters(t: &[f64], threshold: f64) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < t.len() {
        if t[i].abs() > threshold {
            let sign = t[i] > 0.0;
            let start = i;
            let mut mass = 0.0;
            while i < t.len() && t[i].abs() > threshold && (t[i] > 0.0) == sign {
                mass += t[i];
                i += 1;
            }
            out.push((start, i, mass));
        } else {
            i += 1;
        }
    }
    out
}

fn max_abs_mass(t: &[f64], threshold: f64) -> f64 {
    find_clusters(t, threshold)
        .iter()
        .map(|c| c.2.abs())
        .fold(0.0, f64::max)
}

/// Cluster-based permutation test with subject-wise sign flips of the
/// paired differences. Exhaustive over all `2^n` flips when that is no more
/// than `n_perm`.
pub fn cluster_permutation(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    alpha_cluster: f64,
    n_perm: usize,
    seed: RngSeed,
) -> Result<ClusterResult> {
    let diffs = Differences::new(a, b)?;
    let n = diffs.n;
    if n < 6 {
        return Err(Error::DegenerateSample(format!(
            "cluster test needs at least 6 subjects, got {n}"
        )));
    }
    if !(alpha_cluster > 0.0 && alpha_cluster < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha_cluster {alpha_cluster} must lie in (0, 1)"
        )));
    }
    let exhaustive = n < 63 && (1usize << n) <= n_perm;
    if !exhaustive && n_perm < 100 {
        return Err(Error::InvalidArgument(format!("n_perm {n_perm} must be >= 100")));
    }
    let threshold = t_critical(alpha_cluster, (n - 1) as f64);
    let mut observed_t = vec![0.0; diffs.len];
    diffs.t_values(&vec![1.0; n], &mut observed_t);
    let observed = find_clusters(&observed_t, threshold);

    let null_max = |signs: &[f64]| {
        let mut t = vec![0.0; diffs.len];
        diffs.t_values(signs, &mut t);
        max_abs_mass(&t, threshold)
    };
    let (null, n_permutations): (Vec<f64>, usize) = if observed.is_empty() {
        (Vec::new(), if exhaustive { 1 << n } else { n_perm })
    } else if exhaustive {
        let total = 1usize << n;
        let null = crate::par::map_range(total, |mask| {
            let signs: Vec<f64> = (0..n).map(|s| if mask >> s & 1 == 1 { -1.0 } else { 1.0 }).collect();
            null_max(&signs)
        });
        (null, total)
    } else {
        let null = crate::par::map_range(n_perm, |i| {
            use rand::Rng as _;
            let mut rng = seed.derive_rng(&[stream::PERMUTATION, i as u64]);
            let signs: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { -1.0 } else { 1.0 }).collect();
            null_max(&signs)
        });
        (null, n_perm)
    };

    let clusters = observed
        .into_iter()
        .map(|(start, end, mass)| {
            let hits = null.iter().filter(|&&m| m >= mass.abs()).count();
            let p_value = if exhaustive {
                // the identity flip is part of the enumeration
                hits as f64 / n_permutations as f64
            } else {
                (1 + hits) as f64 / (n_permutations + 1) as f64
            };
            Cluster {
                start_index: start,
                end_index: end,
                mass,
                p_value,
            }
        })
        .collect();
    Ok(ClusterResult {
        clusters,
        n_permutations,
        exhaustive,
        threshold,
    })
}
