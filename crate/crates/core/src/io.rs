//! EPB1 epoch files.
//!
//! Layout: magic `EPB1`, a `u32` little-endian byte length, a UTF-8 JSON
//! header of that length, then `n_trials * n_channels * n_samples`
//! little-endian `f32` values (trial, then channel, then sample).
//!
//! Samples are stored as `f32`. Loading widens to `f64`, so load followed by
//! save reproduces the file byte for byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::epochs::{EpochSet, TrialLabel};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EPB1";
pub const EXTENSION: &str = "epb";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    subject_id: String,
    n_trials: usize,
    n_channels: usize,
    n_samples: usize,
    fs: f64,
    t0: f64,
    label_codes: Vec<u8>,
}

pub fn encode_epochs(e: &EpochSet) -> Result<Vec<u8>> {
    let header = Header {
        subject_id: e.subject_id().to_string(),
        n_trials: e.n_trials(),
        n_channels: e.n_channels(),
        n_samples: e.n_samples(),
        fs: e.fs(),
        t0: e.t0(),
        label_codes: e.labels().iter().map(|l| l.code()).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::MalformedHeader("header longer than 4 GiB".into()))?;
    let mut out = Vec::with_capacity(8 + json.len() + 4 * e.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    for &v in e.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_epochs(bytes: &[u8]) -> Result<EpochSet> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::MalformedHeader("missing EPB1 magic".into()));
    }
    let len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = bytes
        .get(8..8 + len)
        .ok_or_else(|| Error::MalformedHeader(format!("header length {len} exceeds file")))?;
    let header: Header =
        serde_json::from_slice(body).map_err(|e| Error::MalformedHeader(format!("invalid JSON header: {e}")))?;
    if header.label_codes.len() != header.n_trials {
        return Err(Error::DimensionMismatch(format!(
            "{} label codes for n_trials={}",
            header.label_codes.len(),
            header.n_trials
        )));
    }
    let n_values = header
        .n_trials
        .checked_mul(header.n_channels)
        .and_then(|v| v.checked_mul(header.n_samples))
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    let payload = &bytes[8 + len..];
    if payload.len() != 4 * n_values {
        return Err(Error::DimensionMismatch(format!(
            "payload has {} bytes, header implies {}",
            payload.len(),
            4 * n_values
        )));
    }
    let labels = header
        .label_codes
        .iter()
        .map(|&c| TrialLabel::from_code(c))
        .collect::<Result<Vec<_>>>()?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    EpochSet::new(
        data,
        header.n_channels,
        header.n_samples,
        header.fs,
        header.t0,
        labels,
        header.subject_id,
    )
}

pub fn save_epochs(e: &EpochSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_epochs(e)?;
    fs::write(path, bytes).map_err(|err| Error::io(path, err))
}

pub fn load_epochs(path: impl AsRef<Path>) -> Result<EpochSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|err| Error::io(path, err))?;
    decode_epochs(&bytes)
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    use sha2::{Digest, Sha256};
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|err| Error::io(path, err))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// All `*.epb` files in a directory, sorted by file name.
pub fn list_epoch_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|err| Error::io(dir, err))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == EXTENSION))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<EpochSet>> {
    list_epoch_files(dir)?.iter().map(load_epochs).collect()
}

/// Debug export: one row per trial x channel, samples as trailing columns.
pub fn write_epochs_csv(e: &EpochSet, mut w: impl Write) -> std::io::Result<()> {
    write!(w, "trial,topic,sentence_type,channel")?;
    for s in 0..e.n_samples() {
        write!(w, ",t{s}")?;
    }
    writeln!(w)?;
    for t in 0..e.n_trials() {
        let l = e.labels()[t];
        for c in 0..e.n_channels() {
            write!(w, "{t},{},{},{c}", l.topic, l.sentence_type)?;
            for v in e.trial_channel(t, c) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}
