//! Acceptance criteria 1-11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use neuroboot::bootstrap::{leave_one_out_weights, sub_average, topic_deltas, Sampler, Scheme};
use neuroboot::decode::report::{CellKey, Condition};
use neuroboot::decode::{decode_window, DecodeConfig};
use neuroboot::experiment::{cluster_rows, compute, run_experiment, ExperimentConfig, ExperimentOutput, StatsOptions};
use neuroboot::features::fit_from_blocks;
use neuroboot::metrics::{average, compute_erp, snr};
use neuroboot::stats::{cluster_permutation, fdr_bh, paired_t, PairedSample};
use neuroboot::synthgen::generate_subject;
use neuroboot::{EpochSet, RngSeed, SentenceType, TimeWindow, Topic, TrialLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

mod common;
use common::*;

type Outcome = Result<String, String>;

/// Monte-Carlo 95% interval of the cohort-mean leave-one-subject-out `w_int`,
/// from 200 standard cohorts (synth seeds 1000..1200).
const W_INT_CI: (f64, f64) = (2.0547, 4.1318);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_sampling() -> Outcome {
    let probs = [0.125, 0.125, 0.375, 0.375];
    let sampler = Sampler::new(&probs);
    let mut r = rng(1);
    let n = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[sampler.draw(&mut r)] += 1;
    }
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let max_dev = freq.iter().zip(&probs).map(|(f, p)| (f - p).abs()).fold(0.0, f64::max);
    let chi2: f64 = counts
        .iter()
        .zip(&probs)
        .map(|(&c, p)| (c as f64 - n as f64 * p).powi(2) / (n as f64 * p))
        .sum();
    let p = 1.0 - ChiSquared::new(3.0).unwrap().cdf(chi2);
    check(
        max_dev <= 0.01 && p > 0.001,
        format!("max |freq - prob| {max_dev:.4}, chi2 {chi2:.2}, p {p:.3}"),
    )
}

fn c2_sub_average() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = r.random_range(1..=40);
        let k = r.random_range(1..=16);
        let (n_ch, n_s) = (r.random_range(1..=4), r.random_range(1..=12));
        let trials: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n_ch * n_s).map(|_| 3.0 * gauss(&mut r)).collect())
            .collect();
        let labels = vec![TrialLabel::new(Topic::Bio, SentenceType::Type1); n];
        let e = EpochSet::new(trials.concat(), n_ch, n_s, 100.0, 0.0, labels, "s").unwrap();
        let w: Vec<f64> = (0..n).map(|_| r.random::<f64>() + 0.01).collect();
        let total: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
        let sampler = Sampler::new(&probs);
        let mut counts = vec![0; n];
        for _ in 0..k {
            counts[sampler.draw(&mut r)] += 1;
        }
        let got = sub_average(&e, &counts, k).map_err(|e| e.to_string())?;
        let want = list_sub_average(&trials, &counts, &mut r);
        worst = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    check(worst <= 1e-12, format!("max elementwise difference {worst:e}"))
}

fn c3_snr_law() -> Outcome {
    let (n_ch, fs, t0, n_s) = (4, 250.0, -0.2, 300);
    let signal = TimeWindow {
        start_s: 0.3,
        end_s: 0.6,
    };
    let baseline = TimeWindow {
        start_s: -0.2,
        end_s: 0.0,
    };
    let shape: Vec<f64> = (0..n_s)
        .map(|s| {
            let t = t0 + s as f64 / fs;
            if t < 0.0 {
                0.0
            } else {
                20.0 * (-0.5 * ((t - 0.45) / 0.15f64).powi(2)).exp()
            }
        })
        .collect();
    let reps = 500;
    let mut r = rng(3);
    let mut mean_db = BTreeMap::new();
    for n in [1usize, 4, 16] {
        let mut acc = 0.0;
        for _ in 0..reps {
            let data: Vec<f64> = (0..n * n_ch)
                .flat_map(|_| shape.iter().map(|v| v + gauss(&mut r)).collect::<Vec<_>>())
                .collect();
            let labels = vec![TrialLabel::new(Topic::Bio, SentenceType::Type1); n];
            let e = EpochSet::new(data, n_ch, n_s, fs, t0, labels, "s").unwrap();
            let idx: Vec<usize> = (0..n).collect();
            acc += snr(&average(&e, &idx), &signal, &baseline).map_err(|e| e.to_string())?;
        }
        mean_db.insert(n, acc / reps as f64);
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [4usize, 16] {
        let gain = mean_db[&n] - mean_db[&1];
        let want = 10.0 * (n as f64).log10();
        ok &= (gain - want).abs() <= 0.5;
        parts.push(format!("n={n}: {gain:.2} dB (law {want:.2})"));
    }
    check(ok, parts.join(", "))
}

fn c4_weight_recovery() -> Outcome {
    let cfg = ExperimentConfig::default();
    let deltas = (0..cfg.synth.n_subjects)
        .map(|i| topic_deltas(&cfg.subject(i)?, &cfg.signal_window))
        .collect::<neuroboot::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let w = leave_one_out_weights(&deltas).map_err(|e| e.to_string())?;
    let m = mean(&w.iter().map(|w| w.w_int).collect::<Vec<_>>());
    check(
        (W_INT_CI.0..=W_INT_CI.1).contains(&m),
        format!(
            "mean LOSO w_int {m:.3}, interval [{:.4}, {:.4}]",
            W_INT_CI.0, W_INT_CI.1
        ),
    )
}

fn c5_projector() -> Outcome {
    let mut r = rng(5);
    let (mut worst_angle, mut worst_ortho) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n_ch = r.random_range(5..=47);
        let n_comp = r.random_range(1..=3);
        let len = r.random_range(60..120);
        let blocks = pca_fixture(&mut r, n_ch, len);
        let refs: Vec<(&[f64], usize)> = blocks.iter().map(|b| (b.as_slice(), len)).collect();
        let p = fit_from_blocks(&refs, n_ch, n_comp, "acceptance".into()).map_err(|e| e.to_string())?;
        worst_angle = worst_angle.max(subspace_distance(
            &p.components,
            &pca_oracle(&blocks, n_ch, len, n_comp),
        ));
        for i in 0..n_comp {
            for j in 0..n_comp {
                let dot: f64 = p.components[i].iter().zip(&p.components[j]).map(|(a, b)| a * b).sum();
                worst_ortho = worst_ortho.max((dot - (i == j) as u8 as f64).abs());
            }
        }
    }
    check(
        worst_angle < 1e-6 && worst_ortho <= 1e-9,
        format!("sin(max principal angle) <= {worst_angle:.1e}, orthonormality error {worst_ortho:.1e}"),
    )
}

fn cell(scheme: Scheme, k: usize) -> CellKey {
    CellKey {
        condition: Condition::BioInt,
        scheme,
        source: 160,
        k,
    }
}

fn paired(out: &ExperimentOutput, a: &CellKey, b: &CellKey) -> (f64, f64, f64) {
    let ma = out.window.subject_means(a);
    let mb = out.window.subject_means(b);
    let xa: Vec<f64> = ma.values().copied().collect();
    let xb: Vec<f64> = ma.keys().map(|s| mb[s]).collect();
    let t = paired_t(&PairedSample::new(xa.clone(), xb.clone()).unwrap()).unwrap();
    (mean(&xa) - mean(&xb), t.t, t.p_two_sided)
}

fn c6_direction(out: &ExperimentOutput) -> Outcome {
    let uniform = cell(Scheme::Uniform, 16);
    let (dw, tw, pw) = paired(out, &cell(Scheme::Weighted, 16), &uniform);
    let (ds, ts, ps) = paired(out, &cell(Scheme::RandomShuffled, 16), &uniform);
    check(
        dw > 0.0 && pw < 0.05 && ps >= 0.05,
        format!(
            "weighted - uniform {:+.2} pts (t {tw:.2}, p {pw:.2e}); shuffled - uniform {:+.2} pts (t {ts:.2}, p {ps:.3})",
            100.0 * dw,
            100.0 * ds
        ),
    )
}

fn c7_trend(out: &ExperimentOutput) -> Outcome {
    let means: Vec<f64> = [8, 12, 16]
        .iter()
        .map(|&k| out.window.summary(&cell(Scheme::Weighted, k)).mean)
        .collect();
    let worst_drop = means.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    check(
        worst_drop <= 0.005,
        format!(
            "weighted k8 {:.2}%, k12 {:.2}%, k16 {:.2}%",
            100.0 * means[0],
            100.0 * means[1],
            100.0 * means[2]
        ),
    )
}

fn c8_ordering(out: &ExperimentOutput, cfg: &ExperimentConfig) -> Outcome {
    let mut peaks = BTreeMap::new();
    let mut labels = BTreeMap::new();
    for t in &cfg.timecourse {
        let key = out
            .timecourse
            .cells()
            .into_iter()
            .find(|c| c.condition == t.condition && c.scheme == t.scheme && c.k == t.k)
            .ok_or(format!("no timecourse for {}", t.condition))?;
        let (_, by_subject) = out.timecourse.subject_timecourses(&key);
        let rows: Vec<&Vec<f64>> = by_subject.values().collect();
        let grand: Vec<f64> = (0..rows[0].len())
            .map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64)
            .collect();
        peaks.insert(t.condition, grand.iter().copied().fold(f64::MIN, f64::max));
        labels.insert(t.condition, neuroboot::experiment::label(&key));
    }
    let (bio, int, bi) = (
        peaks[&Condition::Bio],
        peaks[&Condition::Int],
        peaks[&Condition::BioInt],
    );
    let significant = |a: &str, b: &str| -> Option<f64> {
        let comparison = format!("{a} vs {b}");
        out.stats
            .iter()
            .filter(|r| r.test == "cluster" && r.comparison == comparison)
            .filter(|r| r.statistic.is_some_and(|m| m > 0.0))
            .filter_map(|r| r.p_value)
            .reduce(f64::min)
    };
    let p_int_bi = significant(&labels[&Condition::Int], &labels[&Condition::BioInt]);
    let p_bi_bio = significant(&labels[&Condition::BioInt], &labels[&Condition::Bio]);
    let ok = int > bi && bi > bio && p_int_bi.is_some_and(|p| p < 0.05) && p_bi_bio.is_some_and(|p| p < 0.05);
    check(
        ok,
        format!(
            "peaks Int {int:.3} > BI {bi:.3} > Bio {bio:.3}; best positive cluster p: Int-BI {p_int_bi:?}, BI-Bio {p_bi_bio:?}"
        ),
    )
}

fn c9_stats_oracles() -> Outcome {
    let cases = paired_t_cases();
    let mut worst_rel = 0.0f64;
    for c in &cases {
        let r = paired_t(&PairedSample::new(c.a.clone(), c.b.clone()).unwrap()).map_err(|e| e.to_string())?;
        let p: f64 = c.p.parse().unwrap();
        worst_rel = worst_rel
            .max(((r.p_two_sided - p) / p).abs())
            .max((r.t - c.t).abs() / c.t.abs().max(1.0));
    }

    let mut r = rng(9);
    let mut bh_mismatch = 0;
    for case in 0..10_000 {
        let m = r.random_range(1..=30);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                if r.random_bool(0.3) {
                    r.random_range(0..20) as f64 / 200.0
                } else {
                    r.random::<f64>().powi(2)
                }
            })
            .collect();
        let q = [0.01, 0.05, 0.1, 0.2][case % 4];
        bh_mismatch += (fdr_bh(&p, q) != bh_by_enumeration(&p, q)) as usize;
    }

    let mut cluster_mismatch = 0;
    let mut compared = 0;
    for case in 0..30 {
        let shift = [0.0, 1.0, 2.0][case % 3];
        let a: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                (0..25)
                    .map(|t| gauss(&mut r) + if (8..16).contains(&t) { shift } else { 0.0 })
                    .collect()
            })
            .collect();
        let b: Vec<Vec<f64>> = (0..6).map(|_| (0..25).map(|_| gauss(&mut r)).collect()).collect();
        let d: Vec<Vec<f64>> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
            .collect();
        let want = exhaustive_cluster_test(&d, T_CRIT_DF5);
        let got = cluster_permutation(&a, &b, 0.05, 1000, RngSeed(case as u64)).map_err(|e| e.to_string())?;
        let same = got.exhaustive
            && got.clusters.len() == want.len()
            && got.clusters.iter().zip(&want).all(|(g, w)| {
                (g.start_index, g.end_index) == (w.0, w.1)
                    && (g.mass - w.2).abs() < 1e-9 * w.2.abs().max(1.0)
                    && g.p_value == w.3
            });
        cluster_mismatch += !same as usize;
        compared += want.len();
    }
    check(
        worst_rel < 5e-7 && bh_mismatch == 0 && cluster_mismatch == 0,
        format!(
            "paired_t worst relative error {worst_rel:.1e} over {} fixtures; BH mismatches {bh_mismatch}/10000; \
             cluster mismatches {cluster_mismatch}/30 ({compared} clusters)",
            cases.len()
        ),
    )
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig::minimal();
    let mut runs = Vec::new();
    for (name, threads) in [("a", 1), ("b", 1), ("c", 8)] {
        let dir = tmp.path().join(name);
        run_experiment(&cfg, &dir, Some(threads)).map_err(|e| e.to_string())?;
        runs.push(csv_files(&dir));
    }
    let ok = !runs[0].is_empty() && runs[0] == runs[1] && runs[0] == runs[2];
    check(
        ok,
        format!(
            "{} CSV files compared across two serial runs and one 8-thread run",
            runs[0].len()
        ),
    )
}

fn c11_null_calibration() -> Outcome {
    const REPS: u64 = 500;
    let mut cfg = ExperimentConfig::default();
    cfg.synth.effect_bio = 0.0;
    cfg.synth.effect_int = 0.0;

    // window accuracy: one zero-effect subject per repetition
    cfg.synth.n_subjects = 1;
    let mut accs = Vec::new();
    for rep in 0..REPS {
        cfg.synth.seed = RngSeed(5000 + rep);
        let e = cfg
            .preprocess
            .apply(&generate_subject(&cfg.synth, 0).unwrap())
            .map_err(|e| e.to_string())?;
        let dc = DecodeConfig {
            condition: Condition::BioInt,
            scheme: Scheme::Uniform,
            k: 16,
            l: cfg.l,
            source_trials: Some(160),
            seed: RngSeed(rep),
            ..DecodeConfig::default()
        };
        let report = decode_window(&e, &cfg.decode_window, &dc, None).map_err(|e| e.to_string())?;
        accs.push(mean(&report.rows.iter().map(|r| r.accuracy).collect::<Vec<_>>()));
    }
    let acc = mean(&accs);

    // cluster false positives: Type1 vs Type2 channel-mean ERPs of small
    // zero-effect cohorts, one cluster test per repetition
    cfg.synth.n_subjects = 20;
    cfg.synth.n_channels = 8;
    cfg.synth.n_trials_per_cell = 20;
    let mut hits = 0;
    for rep in 0..REPS {
        cfg.synth.seed = RngSeed(9000 + rep);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut times = Vec::new();
        for i in 0..cfg.synth.n_subjects {
            let pair = compute_erp(&cfg.subject(i).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            let channel_mean = |erp: &neuroboot::metrics::Erp| -> Vec<f64> {
                (0..erp.n_samples)
                    .map(|s| (0..erp.n_channels).map(|c| erp.channel(c)[s]).sum::<f64>() / erp.n_channels as f64)
                    .collect()
            };
            times = (0..pair.erp_type1.n_samples)
                .map(|s| pair.erp_type1.t0 + s as f64 / pair.erp_type1.fs)
                .collect();
            a.push(channel_mean(&pair.erp_type1));
            b.push(channel_mean(&pair.erp_type2));
        }
        let opts = StatsOptions {
            seed: RngSeed(rep),
            ..StatsOptions::default()
        };
        let rows = cluster_rows("null", String::new(), &times, &a, &b, &opts);
        hits += rows.iter().any(|r| r.rejected == Some(true)) as usize;
    }
    let fpr = hits as f64 / REPS as f64;
    let se = (0.05 * 0.95 / REPS as f64).sqrt();
    check(
        (acc - 0.5).abs() <= 0.02 && (fpr - 0.05).abs() <= 2.0 * se,
        format!(
            "mean window accuracy {acc:.4} (0.5 +/- 0.02); cluster FPR {fpr:.3} ({hits}/{REPS}, 0.05 +/- {:.4})",
            2.0 * se
        ),
    )
}

fn report(id: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let over = budget.is_some_and(|b| elapsed > b);
    let (ok, detail) = match outcome {
        Ok(d) if over => (false, format!("{d}; over the {:?} budget", budget.unwrap())),
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    println!(
        "criterion {id}: {} [{:.1}s] {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let mut ok = true;
    ok &= report("1", secs(5), c1_sampling);
    ok &= report("2", secs(10), c2_sub_average);
    ok &= report("3", secs(30), c3_snr_law);
    ok &= report("4", secs(60), c4_weight_recovery);
    ok &= report("5", None, c5_projector);

    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let out = compute(&cfg);
    let cohort_time = start.elapsed();
    println!("standard cohort run: {:.1}s", cohort_time.as_secs_f64());
    match out {
        Ok(out) => {
            let within = cohort_time <= Duration::from_secs(600);
            let budget = move |r: Outcome| match r {
                Ok(d) if !within => Err(format!("{d}; cohort run over the 10 min budget")),
                r => r,
            };
            ok &= report("6", None, || budget(c6_direction(&out)));
            ok &= report("7", None, || budget(c7_trend(&out)));
            ok &= report("8", None, || budget(c8_ordering(&out, &cfg)));
        }
        Err(e) => {
            for id in ["6", "7", "8"] {
                ok &= report(id, None, || Err(format!("standard cohort run failed: {e}")));
            }
        }
    }

    ok &= report("9", None, c9_stats_oracles);
    ok &= report("10", None, c10_determinism);
    ok &= report("11", None, c11_null_calibration);
    if !ok {
        std::process::exit(1);
    }
}
