//! End-to-end experiment: synthesise a cohort, preprocess, score ERP quality,
//! estimate leave-one-subject-out weights, decode every configured cell and
//! write plot-ready CSVs plus a manifest.
//!
//! Subjects are regenerated from their seeds instead of being held in memory
//! between stages, so peak memory stays at a few subjects per worker.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bootstrap::{leave_one_out_weights, topic_deltas, Scheme, TopicDeltas, TopicWeights};
use crate::decode::{decode_audited, CellKey, Condition, DecodeConfig, DecodingReport, GroupErps, Mode, SvmParams};
use crate::epochs::{EpochSet, TimeWindow};
use crate::error::{Error, Result};
use crate::metrics::{mean, quality, standard_error};
use crate::preprocess::PreprocessConfig;
use crate::rng::RngSeed;
use crate::stats::{cluster_permutation, fdr_bh, fdr_bh_adjusted, paired_t, PairedSample};
use crate::synthgen::{generate_subject, subject_id, SynthConfig};

/// One time-resolved decoding condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimecourseCell {
    pub condition: Condition,
    pub scheme: Scheme,
    pub k: usize,
    #[serde(default)]
    pub source: Option<usize>,
}

/// One (condition, source, k) entry of the window-decoding grid, run under
/// each listed scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCell {
    pub condition: Condition,
    pub source: usize,
    pub k: usize,
    pub schemes: Vec<Scheme>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsOptions {
    pub q: f64,
    pub alpha_cluster: f64,
    pub n_perm: usize,
    pub seed: RngSeed,
    /// Time range searched for clusters in timecourse comparisons.
    pub cluster_window: TimeWindow,
    /// Timecourse comparisons as `(a, b)` indices into the timecourse list.
    pub timecourse_pairs: Vec<(usize, usize)>,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions {
            q: 0.05,
            alpha_cluster: 0.05,
            n_perm: 1024,
            seed: RngSeed(2024),
            cluster_window: TimeWindow {
                start_s: 0.15,
                end_s: 0.75,
            },
            timecourse_pairs: vec![(1, 2), (2, 0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub signal_window: TimeWindow,
    pub baseline_window: TimeWindow,
    pub decode_window: TimeWindow,
    /// Augmented trials per fold (training plus test).
    pub l: usize,
    pub n_folds: usize,
    pub n_components: usize,
    pub hyper_c: f64,
    /// Seeds of the window-decoding grid.
    pub seeds: Vec<u64>,
    /// Seeds of time-resolved decoding, which costs one classifier per sample.
    pub timecourse_seeds: Vec<u64>,
    pub timecourse: Vec<TimecourseCell>,
    pub grid: Vec<GridCell>,
    pub stats: StatsOptions,
}

/// Bio effect of the standard cohort. Int is three times larger. Small
/// enough that window decoding stays well below ceiling.
pub const STANDARD_EFFECT_BIO: f64 = 0.06;

impl Default for ExperimentConfig {
    fn default() -> Self {
        let tc = |condition, k| TimecourseCell {
            condition,
            scheme: Scheme::Uniform,
            k,
            source: None,
        };
        let all = Scheme::ALL.to_vec();
        let bi = |source, k| GridCell {
            condition: Condition::BioInt,
            source,
            k,
            schemes: all.clone(),
        };
        let uniform_only = |condition| GridCell {
            condition,
            source: 80,
            k: 8,
            schemes: vec![Scheme::Uniform],
        };
        ExperimentConfig {
            synth: SynthConfig {
                effect_bio: STANDARD_EFFECT_BIO,
                effect_int: 3.0 * STANDARD_EFFECT_BIO,
                ..SynthConfig::default()
            },
            preprocess: PreprocessConfig::default(),
            signal_window: TimeWindow {
                start_s: 0.3,
                end_s: 0.6,
            },
            baseline_window: TimeWindow {
                start_s: -0.2,
                end_s: 0.0,
            },
            decode_window: TimeWindow {
                start_s: 0.3,
                end_s: 0.6,
            },
            l: 250,
            n_folds: 5,
            n_components: 3,
            hyper_c: 1.0,
            seeds: vec![1, 2, 3, 4, 5],
            timecourse_seeds: vec![1],
            timecourse: vec![tc(Condition::Bio, 8), tc(Condition::Int, 8), tc(Condition::BioInt, 8)],
            grid: vec![
                uniform_only(Condition::Bio),
                uniform_only(Condition::Int),
                bi(80, 8),
                bi(160, 8),
                bi(160, 12),
                bi(160, 16),
            ],
            stats: StatsOptions::default(),
        }
    }
}

impl ExperimentConfig {
    /// Two small subjects, one seed, one grid cell; runs in seconds.
    pub fn minimal() -> Self {
        ExperimentConfig {
            synth: SynthConfig {
                n_subjects: 2,
                n_trials_per_cell: 10,
                n_channels: 8,
                ..SynthConfig::default()
            },
            l: 40,
            seeds: vec![1],
            timecourse_seeds: vec![1],
            timecourse: vec![TimecourseCell {
                condition: Condition::BioInt,
                scheme: Scheme::Uniform,
                k: 4,
                source: None,
            }],
            grid: vec![GridCell {
                condition: Condition::BioInt,
                source: 40,
                k: 4,
                schemes: vec![Scheme::Uniform, Scheme::Weighted],
            }],
            stats: StatsOptions {
                timecourse_pairs: Vec::new(),
                ..StatsOptions::default()
            },
            ..ExperimentConfig::default()
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact JSON serialisation.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.synth.validate()?;
        if self.synth.n_subjects < 2 {
            return bad("leave-one-subject-out weights need at least 2 subjects".into());
        }
        if self.seeds.is_empty() || (self.timecourse_seeds.is_empty() && !self.timecourse.is_empty()) {
            return bad("at least one seed is required".into());
        }
        for w in [&self.signal_window, &self.baseline_window, &self.decode_window] {
            TimeWindow::new(w.start_s, w.end_s)?;
            let span = &self.synth.epoch_span;
            if w.start_s < span.start_s || w.end_s > span.end_s {
                return bad(format!("window {w} outside the epoch span {span}"));
            }
        }
        if !(self.hyper_c > 0.0) {
            return bad(format!("hyper_c {} must be > 0", self.hyper_c));
        }
        let per_cell = self.synth.n_trials_per_cell;
        let available = |c: Condition| match c {
            Condition::BioInt => 4 * per_cell,
            _ => 2 * per_cell,
        };
        for (i, t) in self.timecourse.iter().enumerate() {
            self.decode_config(t.condition, t.scheme, t.k, t.source, 0)
                .validate()
                .map_err(|e| e.at("config", format!("timecourse[{i}]")))?;
            if t.source.is_some_and(|s| s > available(t.condition)) {
                return bad(format!("timecourse[{i}] source exceeds available trials"));
            }
        }
        for (i, g) in self.grid.iter().enumerate() {
            if g.schemes.is_empty() {
                return bad(format!("grid[{i}] lists no schemes"));
            }
            if g.source > available(g.condition) {
                return bad(format!(
                    "grid[{i}] source {} exceeds the {} available {} trials",
                    g.source,
                    available(g.condition),
                    g.condition
                ));
            }
            self.decode_config(g.condition, g.schemes[0], g.k, Some(g.source), 0)
                .validate()
                .map_err(|e| e.at("config", format!("grid[{i}]")))?;
        }
        for &(a, b) in &self.stats.timecourse_pairs {
            if a >= self.timecourse.len() || b >= self.timecourse.len() || a == b {
                return bad(format!("timecourse pair ({a}, {b}) out of range"));
            }
        }
        if !(self.stats.q > 0.0 && self.stats.q < 1.0) {
            return bad("stats.q must lie in (0, 1)".into());
        }
        Ok(())
    }

    fn decode_config(
        &self,
        condition: Condition,
        scheme: Scheme,
        k: usize,
        source: Option<usize>,
        seed: u64,
    ) -> DecodeConfig {
        DecodeConfig {
            condition,
            scheme,
            k,
            l: self.l,
            n_folds: self.n_folds,
            source_trials: source,
            n_components: self.n_components,
            svm: SvmParams::with_c(self.hyper_c),
            standardize: true,
            weights: TopicWeights::EQUAL,
            seed: RngSeed(seed),
        }
    }

    /// Generated and preprocessed epochs of subject `index`.
    pub fn subject(&self, index: usize) -> Result<EpochSet> {
        let raw = generate_subject(&self.synth, index).map_err(|e| e.at("synth", subject_id(index)))?;
        self.preprocess
            .apply(&raw)
            .map_err(|e| e.at("preprocess", subject_id(index)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub subject: String,
    pub toi: Condition,
    pub snr_db: f64,
    pub delta_erp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub family: String,
    pub comparison: String,
    pub test: String,
    pub statistic: Option<f64>,
    pub df: Option<f64>,
    pub p_value: Option<f64>,
    pub p_fdr: Option<f64>,
    pub rejected: Option<bool>,
    pub start_s: Option<f64>,
    pub end_s: Option<f64>,
    pub n: usize,
    pub note: String,
}

/// Everything a run produces, before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub quality: Vec<QualityRow>,
    pub weights: Vec<TopicWeights>,
    pub timecourse: DecodingReport,
    pub window: DecodingReport,
    pub stats: Vec<StatRow>,
}

pub const OUTPUT_FILES: [&str; 7] = [
    "quality.csv",
    "timecourse.csv",
    "table1.csv",
    "stats.csv",
    "decoding_timecourse.csv",
    "decoding_window.csv",
    "weights.csv",
];

/// Runs every stage and writes the artifacts into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, threads: Option<usize>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let out = crate::par::with_threads(threads, || compute(cfg))?;
    write_outputs(cfg, &out, out_dir)?;
    Ok(out)
}

/// The in-memory part of [`run_experiment`].
pub fn compute(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let n = cfg.synth.n_subjects;

    // stage 1: quality, per-topic ΔERP and group ERP contributions
    let per_subject = crate::par::map_range(n, |i| -> Result<_> {
        let e = cfg.subject(i)?;
        let unit = || e.subject_id().to_string();
        let rows = quality_rows(&e, &cfg.signal_window, &cfg.baseline_window)?;
        let deltas = topic_deltas(&e, &cfg.signal_window).map_err(|err| err.at("weights", unit()))?;
        let group = GroupErps::of_subject(&e).map_err(|err| err.at("features", unit()))?;
        Ok((rows, deltas, group))
    });
    let mut quality_rows = Vec::new();
    let mut deltas: Vec<TopicDeltas> = Vec::new();
    let mut groups = Vec::new();
    for r in per_subject {
        let (rows, d, g) = r?;
        quality_rows.extend(rows);
        deltas.push(d);
        groups.push(g);
    }
    let weights = leave_one_out_weights(&deltas).map_err(|e| e.at("weights", "cohort"))?;

    // stage 2: decoding, one task per subject
    let decoded = crate::par::map_range(n, |i| -> Result<(DecodingReport, DecodingReport)> {
        let e = cfg.subject(i)?;
        let others = GroupErps::leave_one_out(&groups, i)?;
        let mut tc = DecodingReport::default();
        let mut win = DecodingReport::default();
        for &seed in &cfg.timecourse_seeds {
            for t in &cfg.timecourse {
                let mut dc = cfg.decode_config(t.condition, t.scheme, t.k, t.source, seed);
                dc.weights = weights[i];
                let unit = format!("{} seed {seed} {} {} k={}", e.subject_id(), t.condition, t.scheme, t.k);
                let o =
                    decode_audited(&e, Mode::Timecourse, &dc, Some(&others)).map_err(|err| err.at("decode", unit))?;
                tc.extend(o.report);
            }
        }
        for &seed in &cfg.seeds {
            for g in &cfg.grid {
                for &scheme in &g.schemes {
                    let mut dc = cfg.decode_config(g.condition, scheme, g.k, Some(g.source), seed);
                    dc.weights = weights[i];
                    let unit = format!(
                        "{} seed {seed} {} source={} k={} {scheme}",
                        e.subject_id(),
                        g.condition,
                        g.source,
                        g.k
                    );
                    let o = decode_audited(&e, Mode::Window(cfg.decode_window), &dc, Some(&others))
                        .map_err(|err| err.at("decode", unit))?;
                    win.extend(o.report);
                }
            }
        }
        Ok((tc, win))
    });
    let mut timecourse = DecodingReport::default();
    let mut window = DecodingReport::default();
    for r in decoded {
        let (tc, win) = r?;
        timecourse.extend(tc);
        window.extend(win);
    }

    let stats = run_stats(cfg, &quality_rows, &timecourse, &window)?;
    Ok(ExperimentOutput {
        quality: quality_rows,
        weights,
        timecourse,
        window,
        stats,
    })
}

fn timecourse_key(t: &TimecourseCell, cfg: &ExperimentConfig) -> CellKey {
    CellKey {
        condition: t.condition,
        scheme: t.scheme,
        source: t.source.unwrap_or(match t.condition {
            Condition::BioInt => 4 * cfg.synth.n_trials_per_cell,
            _ => 2 * cfg.synth.n_trials_per_cell,
        }),
        k: t.k,
    }
}

pub fn label(c: &CellKey) -> String {
    format!("{}/{}/{}/k{}", c.condition, c.scheme, c.source, c.k)
}

pub fn paired_row(family: &str, comparison: String, test: &str, a: &[f64], b: &[f64]) -> StatRow {
    let mut row = StatRow {
        family: family.into(),
        comparison,
        test: test.into(),
        statistic: None,
        df: None,
        p_value: None,
        p_fdr: None,
        rejected: None,
        start_s: None,
        end_s: None,
        n: a.len(),
        note: String::new(),
    };
    match PairedSample::new(a.to_vec(), b.to_vec()).and_then(|s| paired_t(&s)) {
        Ok(t) => {
            row.statistic = Some(t.t);
            row.df = Some(t.df);
            row.p_value = Some(t.p_two_sided);
        }
        Err(e) => row.note = e.to_string(),
    }
    row
}

/// Applies BH within each family of paired-t rows.
pub fn fdr_by_family(rows: &mut [StatRow], q: f64) {
    let mut families: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        if r.p_value.is_some() && r.test == "paired-t" {
            families.entry(r.family.clone()).or_default().push(i);
        }
    }
    for idx in families.values() {
        let p: Vec<f64> = idx.iter().map(|&i| rows[i].p_value.unwrap()).collect();
        let adj = fdr_bh_adjusted(&p);
        let mask = fdr_bh(&p, q);
        for (j, &i) in idx.iter().enumerate() {
            rows[i].p_fdr = Some(adj[j]);
            rows[i].rejected = Some(mask[j]);
        }
    }
}

/// Cluster permutation rows for two subject-by-time matrices, restricted to
/// `opts.cluster_window`. One row per cluster, or a single row with a note.
pub fn cluster_rows(
    family: &str,
    comparison: String,
    times: &[f64],
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    opts: &StatsOptions,
) -> Vec<StatRow> {
    let w = &opts.cluster_window;
    let in_window: Vec<usize> = (0..times.len())
        .filter(|&s| times[s] >= w.start_s - 1e-9 && times[s] < w.end_s - 1e-9)
        .collect();
    let crop =
        |m: &[Vec<f64>]| -> Vec<Vec<f64>> { m.iter().map(|r| in_window.iter().map(|&s| r[s]).collect()).collect() };
    let base_row = StatRow {
        family: family.into(),
        comparison,
        test: "cluster".into(),
        statistic: None,
        df: Some(a.len().saturating_sub(1) as f64),
        p_value: None,
        p_fdr: None,
        rejected: None,
        start_s: None,
        end_s: None,
        n: a.len(),
        note: String::new(),
    };
    let note = |s: String| {
        vec![StatRow {
            note: s,
            ..base_row.clone()
        }]
    };
    if in_window.is_empty() {
        return note("no time points inside the cluster window".into());
    }
    match cluster_permutation(&crop(a), &crop(b), opts.alpha_cluster, opts.n_perm, opts.seed) {
        Ok(res) if res.clusters.is_empty() => note("no supra-threshold points".into()),
        Ok(res) => res
            .clusters
            .iter()
            .map(|c| StatRow {
                statistic: Some(c.mass),
                p_value: Some(c.p_value),
                rejected: Some(c.p_value < opts.alpha_cluster),
                start_s: Some(times[in_window[c.start_index]]),
                end_s: Some(times[in_window[c.end_index - 1]]),
                note: format!("{} permutations", res.n_permutations),
                ..base_row.clone()
            })
            .collect(),
        Err(e) => note(e.to_string()),
    }
}

fn run_stats(
    cfg: &ExperimentConfig,
    quality_rows: &[QualityRow],
    timecourse: &DecodingReport,
    window: &DecodingReport,
) -> Result<Vec<StatRow>> {
    let mut rows = Vec::new();

    let metric = |toi: Condition, f: fn(&QualityRow) -> f64| -> Vec<f64> {
        quality_rows.iter().filter(|r| r.toi == toi).map(f).collect()
    };
    for (name, f) in [
        ("snr_db", (|r: &QualityRow| r.snr_db) as fn(&QualityRow) -> f64),
        ("delta_erp", |r: &QualityRow| r.delta_erp),
    ] {
        rows.push(paired_row(
            "quality",
            format!("{name} Int vs Bio"),
            "paired-t",
            &metric(Condition::Int, f),
            &metric(Condition::Bio, f),
        ));
    }

    for g in &cfg.grid {
        if !g.schemes.contains(&Scheme::Uniform) {
            continue;
        }
        let key = |scheme| CellKey {
            condition: g.condition,
            scheme,
            source: g.source,
            k: g.k,
        };
        let base: Vec<f64> = window.subject_means(&key(Scheme::Uniform)).into_values().collect();
        for &scheme in g.schemes.iter().filter(|&&s| s != Scheme::Uniform) {
            let other: Vec<f64> = window.subject_means(&key(scheme)).into_values().collect();
            rows.push(paired_row(
                "window",
                format!("{} vs {}", label(&key(scheme)), label(&key(Scheme::Uniform))),
                "paired-t",
                &other,
                &base,
            ));
        }
    }

    for &(ia, ib) in &cfg.stats.timecourse_pairs {
        let ka = timecourse_key(&cfg.timecourse[ia], cfg);
        let kb = timecourse_key(&cfg.timecourse[ib], cfg);
        let (times, a) = timecourse.subject_timecourses(&ka);
        let (_, b) = timecourse.subject_timecourses(&kb);
        let a: Vec<Vec<f64>> = a.into_values().collect();
        let b: Vec<Vec<f64>> = b.into_values().collect();
        let comparison = format!("{} vs {}", label(&ka), label(&kb));

        let peak = |m: &[Vec<f64>]| -> Vec<f64> {
            m.iter()
                .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect()
        };
        rows.push(paired_row(
            "timecourse-peak",
            comparison.clone(),
            "paired-t",
            &peak(&a),
            &peak(&b),
        ));

        rows.extend(cluster_rows(
            "timecourse-cluster",
            comparison,
            &times,
            &a,
            &b,
            &cfg.stats,
        ));
    }
    fdr_by_family(&mut rows, cfg.stats.q);
    Ok(rows)
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Quality rows of one subject, one per topic of interest.
pub fn quality_rows(e: &EpochSet, signal: &TimeWindow, baseline: &TimeWindow) -> Result<Vec<QualityRow>> {
    Condition::ALL
        .into_iter()
        .map(|toi| {
            let sub = e.select_trials(|l| toi.includes(l));
            let q = quality(&sub, signal, baseline)
                .map_err(|err| err.at("metrics", format!("{} {toi}", e.subject_id())))?;
            Ok(QualityRow {
                subject: e.subject_id().to_string(),
                toi,
                snr_db: q.snr_db,
                delta_erp: q.delta_erp,
            })
        })
        .collect()
}

pub fn write_quality_csv(path: &Path, rows: &[QualityRow]) -> Result<()> {
    write_csv(
        path,
        &["subject", "toi", "snr_db", "delta_erp"],
        rows.iter().map(|r| {
            vec![
                r.subject.clone(),
                r.toi.to_string(),
                r.snr_db.to_string(),
                r.delta_erp.to_string(),
            ]
        }),
    )
}

fn write_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = |name: &str| -> PathBuf { dir.join(name) };

    write_quality_csv(&p("quality.csv"), &out.quality)?;

    write_csv(
        &p("weights.csv"),
        &["subject", "w_bio", "w_int"],
        out.weights
            .iter()
            .enumerate()
            .map(|(i, w)| vec![subject_id(i), w.w_bio.to_string(), w.w_int.to_string()]),
    )?;

    let mut tc_rows = Vec::new();
    for t in &cfg.timecourse {
        let key = timecourse_key(t, cfg);
        let (times, subjects) = out.timecourse.subject_timecourses(&key);
        for (s, time) in times.iter().enumerate() {
            let v: Vec<f64> = subjects.values().map(|r| r[s]).collect();
            tc_rows.push(vec![
                key.condition.to_string(),
                key.scheme.to_string(),
                key.source.to_string(),
                key.k.to_string(),
                time.to_string(),
                mean(&v).to_string(),
                fmt_opt(Some(standard_error(&v)).filter(|x| x.is_finite())),
                v.len().to_string(),
            ]);
        }
    }
    write_csv(
        &p("timecourse.csv"),
        &[
            "condition",
            "scheme",
            "source",
            "k",
            "time_s",
            "mean_accuracy",
            "se",
            "n_subjects",
        ],
        tc_rows,
    )?;

    let mut t1_rows = Vec::new();
    for g in &cfg.grid {
        for &scheme in &g.schemes {
            let key = CellKey {
                condition: g.condition,
                scheme,
                source: g.source,
                k: g.k,
            };
            let s = out.window.summary(&key);
            t1_rows.push(vec![
                g.condition.to_string(),
                g.source.to_string(),
                g.k.to_string(),
                scheme.to_string(),
                s.mean.to_string(),
                fmt_opt(Some(s.se).filter(|x| x.is_finite())),
                s.n_subjects.to_string(),
            ]);
        }
    }
    write_csv(
        &p("table1.csv"),
        &[
            "condition",
            "source",
            "k",
            "scheme",
            "mean_accuracy",
            "se",
            "n_subjects",
        ],
        t1_rows,
    )?;

    write_stats_csv(&p("stats.csv"), &out.stats)?;
    out.timecourse.save_csv(p("decoding_timecourse.csv"))?;
    out.window.save_csv(p("decoding_window.csv"))?;
    write_manifest(cfg, dir)
}

pub const STATS_HEADER: [&str; 12] = [
    "family",
    "comparison",
    "test",
    "statistic",
    "df",
    "p_value",
    "p_fdr",
    "rejected",
    "start_s",
    "end_s",
    "n",
    "note",
];

pub fn write_stats_csv(path: &Path, rows: &[StatRow]) -> Result<()> {
    write_csv(
        path,
        &STATS_HEADER,
        rows.iter().map(|r| {
            vec![
                r.family.clone(),
                r.comparison.clone(),
                r.test.clone(),
                fmt_opt(r.statistic),
                fmt_opt(r.df),
                fmt_opt(r.p_value),
                fmt_opt(r.p_fdr),
                fmt_opt(r.rejected),
                fmt_opt(r.start_s),
                fmt_opt(r.end_s),
                r.n.to_string(),
                r.note.clone(),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub synth_seed: u64,
    pub seeds: Vec<u64>,
    pub timecourse_seeds: Vec<u64>,
    pub stats_seed: u64,
    /// File name to SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
    pub config: ExperimentConfig,
}

fn write_manifest(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mut files = BTreeMap::new();
    for name in OUTPUT_FILES {
        files.insert(name.to_string(), crate::io::sha256_file(dir.join(name))?);
    }
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: cfg.hash()?,
        synth_seed: cfg.synth.seed.0,
        seeds: cfg.seeds.clone(),
        timecourse_seeds: cfg.timecourse_seeds.clone(),
        stats_seed: cfg.stats.seed.0,
        files,
        config: cfg.clone(),
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&m)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Short human summary of a finished run.
pub fn summary_text(cfg: &ExperimentConfig, out: &ExperimentOutput) -> String {
    let mut s = String::new();
    let w: Vec<f64> = out.weights.iter().map(|w| w.w_int).collect();
    let _ = writeln!(s, "subjects: {}, seeds: {:?}", cfg.synth.n_subjects, cfg.seeds);
    let _ = writeln!(
        s,
        "LOSO w_int: mean {:.3} (min {:.3}, max {:.3})",
        mean(&w),
        w.iter().copied().fold(f64::INFINITY, f64::min),
        w.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    );
    for g in &cfg.grid {
        for &scheme in &g.schemes {
            let key = CellKey {
                condition: g.condition,
                scheme,
                source: g.source,
                k: g.k,
            };
            let sm = out.window.summary(&key);
            let _ = writeln!(
                s,
                "window {:<24} {:6.2}% ± {:.2}",
                label(&key),
                100.0 * sm.mean,
                100.0 * sm.se
            );
        }
    }
    s
}
