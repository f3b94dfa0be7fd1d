//! Reliability-weighted bootstrap augmentation for epoched EEG, with the
//! surrounding pipeline: synthetic cohorts, preprocessing, ERP quality
//! metrics, PCA spatial filtering, cross-validated linear decoding and
//! group statistics.
//!
//! ```
//! use neuroboot::{bootstrap, synthgen::{generate_subject, SynthConfig}, rng::RngSeed};
//!
//! let cfg = SynthConfig { n_subjects: 1, n_trials_per_cell: 8, n_channels: 4, ..SynthConfig::default() };
//! let e = generate_subject(&cfg, 0).unwrap();
//! let wv = bootstrap::build_weight_vector(e.labels(), bootstrap::TopicWeights { w_bio: 1.0, w_int: 3.0 },
//!     bootstrap::Scheme::Weighted, RngSeed(1)).unwrap();
//! let aug = bootstrap::augment(&e, &wv, &bootstrap::BootstrapPlan::new(5, 10, RngSeed(2))).unwrap();
//! assert_eq!(aug.n_trials(), 10);
//! ```

// `!(x >= 0.0)` rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::neg_multiply, clippy::needless_range_loop)]

pub mod bootstrap;
pub mod decode;
pub mod epochs;
pub mod error;
pub mod experiment;
pub mod features;
pub mod io;
pub mod metrics;
pub mod par;
pub mod preprocess;
pub mod rng;
pub mod stats;
pub mod synthgen;

pub use epochs::{EpochSet, SentenceType, TimeWindow, Topic, TrialLabel};
pub use error::{Error, Result};
pub use rng::RngSeed;
