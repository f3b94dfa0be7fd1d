use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bootstrap::Scheme;
use crate::epochs::{TimeWindow, Topic, TrialLabel};
use crate::error::{Error, Result};
use crate::metrics::{mean, standard_error};

/// Which trials enter a decoding run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    Bio,
    Int,
    #[serde(rename = "BI")]
    BioInt,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Bio, Condition::Int, Condition::BioInt];

    pub fn includes(self, l: &TrialLabel) -> bool {
        match self {
            Condition::Bio => l.topic == Topic::Bio,
            Condition::Int => l.topic == Topic::Int,
            Condition::BioInt => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Bio => "Bio",
            Condition::Int => "Int",
            Condition::BioInt => "BI",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Bio" | "bio" => Ok(Condition::Bio),
            "Int" | "int" => Ok(Condition::Int),
            "BI" | "bi" | "BioInt" => Ok(Condition::BioInt),
            _ => Err(Error::InvalidArgument(format!("unknown condition {s:?} (Bio|Int|BI)"))),
        }
    }
}

/// A time point of a time-resolved run or the window of a windowed run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimePoint {
    Time(f64),
    Window(TimeWindow),
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimePoint::Time(t) => write!(f, "{}", round6(*t)),
            TimePoint::Window(w) => write!(f, "{w}"),
        }
    }
}

impl FromStr for TimePoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.contains(':') {
            return s.parse().map(TimePoint::Window);
        }
        s.parse()
            .map(TimePoint::Time)
            .map_err(|_| Error::Csv(format!("bad time value {s:?}")))
    }
}

fn round6(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingRow {
    pub subject: String,
    pub condition: Condition,
    pub scheme: Scheme,
    /// Source trials available before augmentation.
    pub source: usize,
    pub k: usize,
    pub fold: usize,
    pub point: TimePoint,
    pub accuracy: f64,
    pub seed: u64,
}

/// Identifies one experimental cell, everything except subject, fold, seed
/// and time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub condition: Condition,
    pub scheme: Scheme,
    pub source: usize,
    pub k: usize,
}

impl DecodingRow {
    pub fn cell(&self) -> CellKey {
        CellKey {
            condition: self.condition,
            scheme: self.scheme,
            source: self.source,
            k: self.k,
        }
    }
}

pub const CSV_HEADER: [&str; 9] = [
    "subject",
    "condition",
    "scheme",
    "source",
    "k",
    "fold",
    "t_or_window",
    "accuracy",
    "seed",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodingReport {
    pub rows: Vec<DecodingRow>,
}

impl DecodingReport {
    pub fn extend(&mut self, other: DecodingReport) {
        self.rows.extend(other.rows);
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        wr.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            wr.write_record([
                r.subject.clone(),
                r.condition.to_string(),
                r.scheme.to_string(),
                r.source.to_string(),
                r.k.to_string(),
                r.fold.to_string(),
                r.point.to_string(),
                r.accuracy.to_string(),
                r.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
        if header.iter().take(8).ne(CSV_HEADER.iter().take(8).copied()) {
            return Err(Error::Csv(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
            let bad = |what: &str| Error::Csv(format!("row {}: bad {what}", line + 2));
            let num = |i: usize, what: &str| rec[i].parse::<usize>().map_err(|_| bad(what));
            rows.push(DecodingRow {
                subject: rec[0].to_string(),
                condition: rec[1].parse()?,
                scheme: rec[2].parse()?,
                source: num(3, "source")?,
                k: num(4, "k")?,
                fold: num(5, "fold")?,
                point: rec[6].parse()?,
                accuracy: rec[7].parse().map_err(|_| bad("accuracy"))?,
                seed: match rec.get(8) {
                    Some(s) => s.parse().map_err(|_| bad("seed"))?,
                    None => 0,
                },
            });
        }
        Ok(DecodingReport { rows })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    pub fn cells(&self) -> Vec<CellKey> {
        let mut c: Vec<CellKey> = self.rows.iter().map(DecodingRow::cell).collect();
        c.sort();
        c.dedup();
        c
    }

    /// Per-subject accuracy for one cell, averaged over folds, seeds and
    /// time points.
    pub fn subject_means(&self, cell: &CellKey) -> BTreeMap<String, f64> {
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.cell() == *cell) {
            let e = acc.entry(r.subject.clone()).or_default();
            e.0 += r.accuracy;
            e.1 += 1;
        }
        acc.into_iter().map(|(s, (sum, n))| (s, sum / n as f64)).collect()
    }

    /// Subject-by-time accuracy matrix of a time-resolved cell, averaged over
    /// folds and seeds. Returns the time axis and one row per subject.
    pub fn subject_timecourses(&self, cell: &CellKey) -> (Vec<f64>, BTreeMap<String, Vec<f64>>) {
        let mut times: Vec<f64> = Vec::new();
        let mut acc: BTreeMap<String, BTreeMap<i64, (f64, usize)>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.cell() == *cell) {
            if let TimePoint::Time(t) = r.point {
                let key = (round6(t) * 1e6).round() as i64;
                let e = acc.entry(r.subject.clone()).or_default().entry(key).or_default();
                e.0 += r.accuracy;
                e.1 += 1;
            }
        }
        let mut subjects = BTreeMap::new();
        for (s, by_t) in acc {
            if times.is_empty() {
                times = by_t.keys().map(|&k| k as f64 / 1e6).collect();
            }
            subjects.insert(s, by_t.values().map(|(sum, n)| sum / *n as f64).collect());
        }
        (times, subjects)
    }

    /// Mean and standard error across subjects of the per-subject means.
    pub fn summary(&self, cell: &CellKey) -> Summary {
        let v: Vec<f64> = self.subject_means(cell).into_values().collect();
        Summary {
            mean: mean(&v),
            se: standard_error(&v),
            n_subjects: v.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub n_subjects: usize,
}
