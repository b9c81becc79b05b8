use std::io::{Read, Write};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Header of the raw waveform CSV format.
pub const CSV_HEADER: [&str; 2] = ["t_s", "volts"];

/// A uniformly sampled voltage trace.
#[derive(Debug, Clone, PartialEq)]
pub struct PpgWaveform<F> {
    samples: Vec<F>,
    sample_rate_hz: F,
    start_time: DateTime<Utc>,
}

impl<F: Scalar> PpgWaveform<F> {
    pub fn new(samples: Vec<F>, sample_rate_hz: F, start_time: DateTime<Utc>) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > F::zero()) {
            return Err(Error::invalid(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            start_time,
        })
    }

    pub fn samples(&self) -> &[F] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<F> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> F {
        self.sample_rate_hz
    }

    pub fn start_time(&self) -> DateTime<Utc> {
        self.start_time
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_period_s(&self) -> F {
        F::one() / self.sample_rate_hz
    }

    /// Seconds covered by the samples, `len / rate`.
    pub fn duration_s(&self) -> F {
        F::from_usize_lossy(self.samples.len()) / self.sample_rate_hz
    }

    /// Offset from `start_time` of sample `index`, in seconds.
    pub fn time_of(&self, index: usize) -> F {
        F::from_usize_lossy(index) / self.sample_rate_hz
    }

    pub fn end_time(&self) -> DateTime<Utc> {
        self.start_time + seconds_to_duration(self.duration_s().as_f64())
    }

    /// Same trace with every sample replaced by `f(sample)`.
    ///
    /// Fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(F) -> F) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|&s| f(s)).collect(),
            self.sample_rate_hz,
            self.start_time,
        )
    }

    /// Drops the first `seconds` of the trace, shifting `start_time`.
    pub fn skip_seconds(&self, seconds: F) -> Self {
        let n = (seconds * self.sample_rate_hz)
            .ceil()
            .to_usize()
            .unwrap_or(0)
            .min(self.samples.len());
        Self {
            samples: self.samples[n..].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
            start_time: self.start_time + seconds_to_duration(self.time_of(n).as_f64()),
        }
    }

    /// Writes the `t_s,volts` CSV representation.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        out.write_record(CSV_HEADER).map_err(csv_to_io)?;
        for (i, v) in self.samples.iter().enumerate() {
            out.write_record([self.time_of(i).as_f64().to_string(), v.as_f64().to_string()])
                .map_err(csv_to_io)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parses a `t_s,volts` CSV capture.
    ///
    /// The sample rate is inferred from the time column, which must be
    /// uniformly spaced. At least two rows are required.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(csv_parse_error)?.clone();
        if header.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `t_s,volts`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
            });
        }

        let mut times = Vec::new();
        let mut volts = Vec::new();
        for row in rdr.deserialize::<CsvRow>() {
            let row = row.map_err(csv_parse_error)?;
            if !(row.t_s.is_finite() && row.volts.is_finite()) {
                return Err(Error::Parse {
                    line: times.len() as u64 + 2,
                    message: "non-finite value".into(),
                });
            }
            times.push(row.t_s);
            volts.push(F::lit(row.volts));
        }

        if times.len() < 2 {
            return Err(Error::Parse {
                line: times.len() as u64 + 2,
                message: "need at least two samples to infer the sample rate".into(),
            });
        }
        let n = times.len();
        let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::Parse {
                line: 3,
                message: "time column must be strictly increasing".into(),
            });
        }
        for (i, w) in times.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - dt).abs() > 0.01 * dt + 1e-9 {
                return Err(Error::Parse {
                    line: i as u64 + 3,
                    message: format!("non-uniform sample spacing {step} s (expected {dt} s)"),
                });
            }
        }

        let start = DateTime::<Utc>::UNIX_EPOCH + seconds_to_duration(times[0]);
        Self::new(volts, F::lit(1.0 / dt), start)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    t_s: f64,
    volts: f64,
}

fn csv_to_io(e: csv::Error) -> Error {
    Error::Io(e.into())
}

fn csv_parse_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::Deserialize { err, .. } => {
            let column = match err.field() {
                Some(0) => "t_s",
                Some(1) => "volts",
                _ => "row",
            };
            let message = match err.kind() {
                csv::DeserializeErrorKind::ParseFloat(_) => format!("{column} is not a number"),
                _ => format!("{column}: {err}"),
            };
            Error::Parse { line, message }
        }
        csv::ErrorKind::UnequalLengths { len, .. } => Error::Parse {
            line,
            message: format!("expected 2 columns, found {len}"),
        },
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

pub(crate) fn seconds_to_duration(seconds: f64) -> Duration {
    Duration::microseconds((seconds * 1e6).round() as i64)
}
