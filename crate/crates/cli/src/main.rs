use std::collections::BTreeMap;
use std::error::Error as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use neuroboot::bootstrap::{
    augment, build_weight_vector, leave_one_out_weights, topic_deltas, BootstrapPlan, Scheme, TopicDeltas, TopicWeights,
};
use neuroboot::decode::report::Condition;
use neuroboot::decode::report::{CellKey, DecodingReport};
use neuroboot::decode::{decode_audited, subject_key, DecodeConfig, GroupErps, Mode, SvmParams};
use neuroboot::experiment::{
    cluster_rows, fdr_by_family, label, paired_row, quality_rows, run_experiment, summary_text, write_quality_csv,
    write_stats_csv, ExperimentConfig, StatRow, StatsOptions,
};
use neuroboot::preprocess::{FilterSpec, PreprocessConfig};
use neuroboot::synthgen::{generate_subject, SynthConfig};
use neuroboot::{io, par, EpochSet, Error, Result, RngSeed, TimeWindow};

const SEED_ENV: &str = "NEUROBOOT_SEED";

#[derive(Parser)]
#[command(
    name = "neuroboot",
    version,
    about = "Weighted bootstrap augmentation and decoding for epoched EEG"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort, one epoch file per subject.
    Synth(SynthArgs),
    /// Baseline z-score, low-pass and downsample every subject.
    Preprocess(PreprocessArgs),
    /// Per-subject SNR and ΔERP for each topic.
    Metrics(MetricsArgs),
    /// Write bootstrap sub-averaged trials for every subject.
    Augment(AugmentArgs),
    /// Cross-validated decoding report.
    Decode(DecodeArgs),
    /// Compare two decoding reports.
    Stats(StatsArgs),
    /// Full pipeline from a single experiment config.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Synthesis config JSON, or a full experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Baseline window `a:b`, or `none`.
    #[arg(long, default_value = "-0.2:0")]
    baseline: String,
    /// Low-pass cutoff in Hz; 0 disables.
    #[arg(long, default_value_t = 20.0)]
    lowpass: f64,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = 1)]
    downsample: usize,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "0.3:0.6")]
    signal: TimeWindow,
    #[arg(long, default_value = "-0.2:0")]
    baseline: TimeWindow,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WeightArgs {
    /// Cohort used for leave-one-subject-out weights (default: the input cohort).
    #[arg(long)]
    weights_from: Option<PathBuf>,
    /// Window of the ΔERP reliability proxy.
    #[arg(long, default_value = "0.3:0.6")]
    signal: TimeWindow,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "BI")]
    condition: Condition,
    #[arg(long, default_value = "weighted")]
    scheme: Scheme,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long = "L", default_value_t = 250)]
    l: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    weights: WeightArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Timecourse,
    Window,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "window")]
    mode: ModeArg,
    #[arg(long, default_value = "0.3:0.6")]
    window: TimeWindow,
    #[arg(long, default_value = "BI")]
    condition: Condition,
    #[arg(long, default_value = "weighted")]
    scheme: Scheme,
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long = "L", default_value_t = 250)]
    l: usize,
    /// Equal-per-cell subsample of the source pool.
    #[arg(long)]
    source_trials: Option<usize>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 3)]
    components: usize,
    /// SVM regularization.
    #[arg(long = "C", default_value_t = 1.0)]
    hyper_c: f64,
    /// `a..b` (inclusive), `a,b,c` or a single seed.
    #[arg(long, default_value = "1", value_parser = parse_seeds)]
    seeds: Seeds,
    #[command(flatten)]
    weights: WeightArgs,
    /// Optional JSON dump of the per-fold leakage audit.
    #[arg(long)]
    audit: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    PairedT,
    Cluster,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    against: PathBuf,
    #[arg(long, value_enum, default_value = "paired-t")]
    test: TestArg,
    #[arg(long, default_value_t = 0.05)]
    q: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha_cluster: f64,
    #[arg(long, default_value_t = 1024)]
    n_perm: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long, default_value = "0.15:0.75")]
    cluster_window: TimeWindow,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON (default: the standard cohort).
    #[arg(long, conflicts_with = "minimal")]
    config: Option<PathBuf>,
    /// Use the two-subject smoke-test config.
    #[arg(long)]
    minimal: bool,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    match par::with_threads(threads, || dispatch(cli.command, threads)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = e.source();
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command, threads: Option<usize>) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a).map_err(|e| e.at("synth", "cohort")),
        Command::Preprocess(a) => preprocess(a),
        Command::Metrics(a) => metrics(a),
        Command::Augment(a) => augment_cmd(a),
        Command::Decode(a) => decode(a),
        Command::Stats(a) => stats(a).map_err(|e| e.at("stats", "reports")),
        Command::Run(a) => run(a, threads),
    }
}

fn env_seed() -> Result<Option<RngSeed>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(|s| Some(RngSeed(s)))
            .map_err(|_| Error::InvalidArgument(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> std::result::Result<Seeds, String> {
    let bad = || format!("bad seed list `{s}`");
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok(Seeds((a..=b).collect()));
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| bad()))
        .collect::<std::result::Result<_, _>>()
        .map(Seeds)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn load_cohort(dir: &Path, stage: &'static str) -> Result<Vec<(String, EpochSet)>> {
    let files = io::list_epoch_files(dir).map_err(|e| e.at(stage, dir.display().to_string()))?;
    if files.is_empty() {
        return Err(
            Error::InvalidArgument(format!("no .{} files in {}", io::EXTENSION, dir.display()))
                .at(stage, dir.display().to_string()),
        );
    }
    files
        .iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            io::load_epochs(p)
                .map(|e| (name.clone(), e))
                .map_err(|e| e.at(stage, name))
        })
        .collect()
}

#[derive(Serialize)]
struct SynthManifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a SynthConfig,
    files: BTreeMap<String, String>,
}

fn synth_config(path: Option<&Path>) -> Result<SynthConfig> {
    let Some(path) = path else {
        return Ok(SynthConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    match serde_json::from_str::<SynthConfig>(&text) {
        Ok(c) => Ok(c),
        Err(direct) => ExperimentConfig::from_json(&text)
            .map(|c| c.synth)
            .map_err(|_| direct.into()),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = synth_config(a.config.as_deref())?;
    if let Some(seed) = env_seed()? {
        cfg.seed = seed;
    }
    cfg.validate()?;
    create_dir(&a.out)?;
    let written = par::map_range(cfg.n_subjects, |i| -> Result<(String, String)> {
        let e = generate_subject(&cfg, i)?;
        let name = format!("{}.{}", e.subject_id(), io::EXTENSION);
        let path = a.out.join(&name);
        io::save_epochs(&e, &path)?;
        Ok((name, io::sha256_file(&path)?))
    });
    let files = written.into_iter().collect::<Result<BTreeMap<_, _>>>()?;
    let m = SynthManifest {
        tool: "neuroboot",
        version: env!("CARGO_PKG_VERSION"),
        config: &cfg,
        files,
    };
    write_text(
        &a.out.join("manifest.json"),
        &(serde_json::to_string_pretty(&m)? + "\n"),
    )?;
    eprintln!("wrote {} subjects to {}", cfg.n_subjects, a.out.display());
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let baseline = match a.baseline.as_str() {
        "none" => None,
        s => Some(s.parse::<TimeWindow>().map_err(|e| e.at("preprocess", "arguments"))?),
    };
    let lowpass = (a.lowpass > 0.0).then(|| FilterSpec {
        order: a.order,
        ..FilterSpec::lowpass(a.lowpass)
    });
    let cfg = PreprocessConfig {
        baseline,
        lowpass,
        downsample: a.downsample,
    };
    let cohort = load_cohort(&a.input, "preprocess")?;
    create_dir(&a.out)?;
    let done = par::map_range(cohort.len(), |i| -> Result<()> {
        let (name, e) = &cohort[i];
        cfg.apply(e)
            .and_then(|p| io::save_epochs(&p, a.out.join(name)))
            .map_err(|err| err.at("preprocess", name.clone()))
    });
    done.into_iter().collect::<Result<Vec<()>>>()?;
    eprintln!("preprocessed {} subjects into {}", cohort.len(), a.out.display());
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let cohort = load_cohort(&a.input, "metrics")?;
    let rows = par::map_range(cohort.len(), |i| quality_rows(&cohort[i].1, &a.signal, &a.baseline));
    let rows: Vec<_> = rows
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    write_quality_csv(&a.out, &rows).map_err(|e| e.at("metrics", a.out.display().to_string()))
}

/// Leave-one-subject-out topic weights for each subject of `cohort`.
fn cohort_weights(cohort: &[(String, EpochSet)], w: &WeightArgs) -> Result<Vec<TopicWeights>> {
    let deltas = |sets: &[(String, EpochSet)]| -> Result<Vec<(String, TopicDeltas)>> {
        par::map_range(sets.len(), |i| {
            let (_, e) = &sets[i];
            topic_deltas(e, &w.signal).map(|d| (e.subject_id().to_string(), d))
        })
        .into_iter()
        .collect()
    };
    let Some(dir) = &w.weights_from else {
        let d: Vec<TopicDeltas> = deltas(cohort)?.into_iter().map(|(_, d)| d).collect();
        return leave_one_out_weights(&d);
    };
    let reference = deltas(&load_cohort(dir, "weights")?)?;
    cohort
        .iter()
        .map(|(_, e)| {
            let others: Vec<TopicDeltas> = reference
                .iter()
                .filter(|(id, _)| id != e.subject_id())
                .map(|(_, d)| *d)
                .collect();
            neuroboot::bootstrap::weights_from_deltas(&others)
        })
        .collect()
}

fn augment_cmd(a: AugmentArgs) -> Result<()> {
    let cohort = load_cohort(&a.input, "augment")?;
    let weights = cohort_weights(&cohort, &a.weights).map_err(|e| e.at("weights", "cohort"))?;
    let seed = env_seed()?.unwrap_or(RngSeed(a.seed));
    create_dir(&a.out)?;
    let done = par::map_range(cohort.len(), |i| -> Result<()> {
        let (name, e) = &cohort[i];
        let key = subject_key(e.subject_id());
        let run = || -> Result<()> {
            let pool = e.select_trials(|l| a.condition.includes(l));
            let wv = build_weight_vector(pool.labels(), weights[i], a.scheme, seed.derive(&[key, 0]))?;
            let plan = BootstrapPlan::new(a.k, a.l, seed.derive(&[key, 1]));
            io::save_epochs(&augment(&pool, &wv, &plan)?, a.out.join(name))
        };
        run().map_err(|err| err.at("augment", name.clone()))
    });
    done.into_iter().collect::<Result<Vec<()>>>()?;
    eprintln!("augmented {} subjects into {}", cohort.len(), a.out.display());
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<()> {
    let cohort = load_cohort(&a.input, "decode")?;
    let weights = cohort_weights(&cohort, &a.weights).map_err(|e| e.at("weights", "cohort"))?;
    let groups = cohort
        .iter()
        .map(|(name, e)| GroupErps::of_subject(e).map_err(|err| err.at("features", name.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mode = match a.mode {
        ModeArg::Timecourse => Mode::Timecourse,
        ModeArg::Window => Mode::Window(a.window),
    };
    let seeds = match env_seed()? {
        Some(s) => vec![s.0],
        None => a.seeds.0.clone(),
    };
    let results = par::map_range(cohort.len(), |i| -> Result<(DecodingReport, Vec<_>)> {
        let (name, e) = &cohort[i];
        let others = GroupErps::leave_one_out(&groups, i)?;
        let mut report = DecodingReport::default();
        let mut audits = Vec::new();
        for &seed in &seeds {
            let cfg = DecodeConfig {
                condition: a.condition,
                scheme: a.scheme,
                k: a.k,
                l: a.l,
                n_folds: a.folds,
                source_trials: a.source_trials,
                n_components: a.components,
                svm: SvmParams::with_c(a.hyper_c),
                standardize: true,
                weights: weights[i],
                seed: RngSeed(seed),
            };
            let o = decode_audited(e, mode, &cfg, Some(&others))
                .map_err(|err| err.at("decode", format!("{name} seed {seed}")))?;
            report.extend(o.report);
            audits.extend(o.audits);
        }
        Ok((report, audits))
    });
    let mut report = DecodingReport::default();
    let mut audits = Vec::new();
    for r in results {
        let (rep, au) = r?;
        report.extend(rep);
        audits.extend(au);
    }
    report
        .save_csv(&a.out)
        .map_err(|e| e.at("decode", a.out.display().to_string()))?;
    if let Some(path) = &a.audit {
        write_text(path, &(serde_json::to_string_pretty(&audits)? + "\n"))?;
    }
    Ok(())
}

/// Pairs each cell of `a` with a cell of `b`: a single-cell `b` serves every
/// `a` cell, otherwise cells are matched in sorted order.
fn pair_cells(a: &DecodingReport, b: &DecodingReport) -> Result<Vec<(CellKey, CellKey)>> {
    let (ca, cb) = (a.cells(), b.cells());
    if ca.is_empty() || cb.is_empty() {
        return Err(Error::InvalidArgument("empty decoding report".into()));
    }
    if cb.len() == 1 {
        return Ok(ca.into_iter().map(|k| (k, cb[0])).collect());
    }
    if ca.len() != cb.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot pair {} cells with {} cells",
            ca.len(),
            cb.len()
        )));
    }
    Ok(ca.into_iter().zip(cb).collect())
}

/// Restricts two per-subject maps to their common subjects.
fn common<T: Clone>(a: &BTreeMap<String, T>, b: &BTreeMap<String, T>) -> Result<(Vec<T>, Vec<T>)> {
    if a.keys().ne(b.keys()) {
        return Err(Error::InvalidArgument(format!(
            "reports cover different subjects ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok((a.values().cloned().collect(), b.values().cloned().collect()))
}

fn stats(a: StatsArgs) -> Result<()> {
    let ra = DecodingReport::load_csv(&a.report)?;
    let rb = DecodingReport::load_csv(&a.against)?;
    let opts = StatsOptions {
        q: a.q,
        alpha_cluster: a.alpha_cluster,
        n_perm: a.n_perm,
        seed: RngSeed(a.seed),
        cluster_window: a.cluster_window,
        timecourse_pairs: Vec::new(),
    };
    let mut rows: Vec<StatRow> = Vec::new();
    for (ka, kb) in pair_cells(&ra, &rb)? {
        let comparison = format!("{} vs {}", label(&ka), label(&kb));
        match a.test {
            TestArg::PairedT => {
                let (x, y) = common(&ra.subject_means(&ka), &rb.subject_means(&kb))?;
                rows.push(paired_row("cli", comparison, "paired-t", &x, &y));
            }
            TestArg::Cluster => {
                let (ta, ma) = ra.subject_timecourses(&ka);
                let (tb, mb) = rb.subject_timecourses(&kb);
                if ta != tb {
                    return Err(Error::InvalidArgument(format!("{comparison}: time axes differ")));
                }
                let (x, y) = common(&ma, &mb)?;
                rows.extend(cluster_rows("cli", comparison, &ta, &x, &y, &opts));
            }
        }
    }
    fdr_by_family(&mut rows, a.q);
    write_stats_csv(&a.out, &rows)
}

fn run(a: RunArgs, threads: Option<usize>) -> Result<()> {
    let mut cfg = match (&a.config, a.minimal) {
        (Some(p), _) => ExperimentConfig::load(p).map_err(|e| e.at("config", p.display().to_string()))?,
        (None, true) => ExperimentConfig::minimal(),
        (None, false) => ExperimentConfig::default(),
    };
    if let Some(seed) = env_seed()? {
        cfg.synth.seed = seed;
    }
    let out = run_experiment(&cfg, &a.out, threads)?;
    print!("{}", summary_text(&cfg, &out));
    Ok(())
}
