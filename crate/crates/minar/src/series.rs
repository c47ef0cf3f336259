//! Time-indexed matrices of nonnegative integer counts.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use crate::error::{Error, Result};

/// A multivariate count series: `n_steps` rows of `d` nonnegative counts,
/// optionally stamped with strictly increasing UTC instants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountSeries {
    d: usize,
    counts: Vec<u64>, // row-major, n_steps * d
    timestamps: Option<Vec<DateTime<Utc>>>,
}

impl CountSeries {
    pub fn new(d: usize, counts: Vec<u64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be >= 1".into()));
        }
        if !counts.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: counts.len() % d,
            });
        }
        Ok(Self {
            d,
            counts,
            timestamps: None,
        })
    }

    pub fn with_timestamps(mut self, timestamps: Vec<DateTime<Utc>>) -> Result<Self> {
        if timestamps.len() != self.n_steps() {
            return Err(Error::DimensionMismatch {
                expected: self.n_steps(),
                actual: timestamps.len(),
            });
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "timestamps must be strictly increasing".into(),
            ));
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_steps(&self) -> usize {
        self.counts.len() / self.d
    }

    pub fn row(&self, t: usize) -> &[u64] {
        &self.counts[t * self.d..(t + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks_exact(self.d)
    }

    pub fn timestamps(&self) -> Option<&[DateTime<Utc>]> {
        self.timestamps.as_deref()
    }

    /// Column sums divided by the number of rows.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n_steps() as f64;
        let mut sums = vec![0u64; self.d];
        for row in self.rows() {
            for (s, &c) in sums.iter_mut().zip(row) {
                *s += c;
            }
        }
        sums.into_iter().map(|s| s as f64 / n).collect()
    }

    /// Rows `[from, to)` as a new series (timestamps carried along).
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from > to || to > self.n_steps() {
            return Err(Error::Domain(format!(
                "invalid slice {from}..{to} of {} rows",
                self.n_steps()
            )));
        }
        let counts = self.counts[from * self.d..to * self.d].to_vec();
        let timestamps = self.timestamps.as_ref().map(|ts| ts[from..to].to_vec());
        Ok(Self {
            d: self.d,
            counts,
            timestamps,
        })
    }

    /// Write as CSV with header `t,series_1,...,series_d`. The `t` column
    /// holds ISO-8601 UTC instants when timestamps are present, otherwise
    /// the 0-based step index.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.d).map(|i| format!("series_{i}")));
        w.write_record(&header)?;
        for (t, row) in self.rows().enumerate() {
            let label = match &self.timestamps {
                Some(ts) => ts[t].to_rfc3339_opts(SecondsFormat::Secs, true),
                None => t.to_string(),
            };
            let mut rec = vec![label];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Read a series written by [`CountSeries::write_csv`]. The `t` column is
    /// kept as timestamps when it parses as RFC 3339, otherwise ignored.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.len() < 2 || headers.get(0) != Some("t") {
            return Err(Error::Parse(
                "expected header t,series_1,...,series_d".into(),
            ));
        }
        let d = headers.len() - 1;
        let mut counts = Vec::new();
        let mut timestamps = Vec::new();
        let mut all_stamped = true;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != d + 1 {
                return Err(Error::Parse(format!(
                    "row has {} fields, expected {}",
                    rec.len(),
                    d + 1
                )));
            }
            match DateTime::parse_from_rfc3339(&rec[0]) {
                Ok(ts) => timestamps.push(ts.with_timezone(&Utc)),
                Err(_) => all_stamped = false,
            }
            for field in rec.iter().skip(1) {
                let c: u64 = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("invalid count {field:?}")))?;
                counts.push(c);
            }
        }
        let series = Self::new(d, counts)?;
        if all_stamped && !timestamps.is_empty() {
            series.with_timestamps(timestamps)
        } else {
            Ok(series)
        }
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
