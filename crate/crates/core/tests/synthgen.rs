//! Monte-Carlo fixture for the generator's topic effect sizes.

use neuroboot::bootstrap::{topic_deltas, TopicDeltas};
use neuroboot::synthgen::{generate_subject, SynthConfig};
use neuroboot::{RngSeed, TimeWindow};

const WINDOW: TimeWindow = TimeWindow {
    start_s: 0.3,
    end_s: 0.6,
};
const N_SUBJECTS: usize = 200;

// Frozen from the run below (200 subjects, seed 7, raw epochs).
const FROZEN_RATIO_OF_MEANS: f64 = 3.004887311272501;
const FROZEN_MEAN_RATIO: f64 = 3.041814484695447;

fn config() -> SynthConfig {
    SynthConfig {
        n_subjects: N_SUBJECTS,
        n_trials_per_cell: 40,
        effect_bio: 0.3,
        effect_int: 0.9,
        noise_sd: 1.0,
        seed: RngSeed(7),
        ..SynthConfig::default()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn cov(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64
}

/// Expected window-mean Type1 - Type2 difference per unit effect, averaged
/// over channels: mean bump height over the window times the channel mean of
/// the summed spatial patterns.
fn analytic_factor(cfg: &SynthConfig) -> f64 {
    let window = WINDOW
        .sample_range(cfg.epoch_span.start_s, cfg.fs, cfg.n_samples())
        .unwrap();
    let bump = window.clone().map(|s| cfg.bump(cfg.time_of(s))).sum::<f64>() / window.len() as f64;
    let spatial = cfg.patterns().iter().flatten().sum::<f64>() / cfg.n_channels as f64;
    bump * spatial
}

#[test]
fn topic_effect_ratio_and_grand_average() {
    let cfg = config();
    let d: Vec<TopicDeltas> = (0..N_SUBJECTS)
        .map(|i| topic_deltas(&generate_subject(&cfg, i).unwrap(), &WINDOW).unwrap())
        .collect();
    let bio: Vec<f64> = d.iter().map(|x| x.bio).collect();
    let int: Vec<f64> = d.iter().map(|x| x.int).collect();
    let n = N_SUBJECTS as f64;

    // each topic's grand-average difference converges to effect * factor
    let f = analytic_factor(&cfg);
    for (v, effect) in [(&bio, cfg.effect_bio), (&int, cfg.effect_int)] {
        let se = (var(v) / n).sqrt();
        assert!(
            (mean(v) - effect * f).abs() < 3.0 * se,
            "{} vs {} (se {se})",
            mean(v),
            effect * f
        );
    }

    // ratio of means sits in a delta-method 95% interval around 3
    let (mb, mi) = (mean(&bio), mean(&int));
    let ratio = mi / mb;
    let var_ratio = (var(&int) - 2.0 * ratio * cov(&int, &bio) + ratio * ratio * var(&bio)) / (n * mb * mb);
    let half = 1.96 * var_ratio.sqrt();
    assert!((ratio - 3.0).abs() < half, "ratio {ratio}, half-width {half}");

    let per_subject: Vec<f64> = d.iter().map(|x| x.int.abs() / x.bio.abs()).collect();
    assert!((ratio - FROZEN_RATIO_OF_MEANS).abs() < 1e-9, "{ratio}");
    assert!(
        (mean(&per_subject) - FROZEN_MEAN_RATIO).abs() < 1e-9,
        "{}",
        mean(&per_subject)
    );
}
