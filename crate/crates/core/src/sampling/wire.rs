use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use super::SamplingError;

const MAGIC: &str = "#cabs-batches v1";

/// One emitted sub-batch: global sample ordinals chosen from one superbatch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedBatch {
    pub epoch: usize,
    pub batch_seq: usize,
    pub strategy: String,
    pub indices: Vec<u64>,
}

impl SelectedBatch {
    /// The wire line, newline included.
    pub fn to_line(&self) -> String {
        let mut line = format!("{}\t{}\t{}\t", self.epoch, self.batch_seq, self.strategy);
        for (i, idx) in self.indices.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            write!(line, "{idx}").unwrap();
        }
        line.push('\n');
        line
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamHeader {
    pub superbatch_size: usize,
    pub filter_ratio: f64,
    pub seed: u64,
}

impl StreamHeader {
    pub fn to_line(&self) -> String {
        format!(
            "{MAGIC} B={} f={} seed={}\n",
            self.superbatch_size, self.filter_ratio, self.seed
        )
    }

    pub fn parse(line: &str) -> Result<Self, SamplingError> {
        let bad = |reason: String| SamplingError::Parse { line: 1, reason };
        let rest = line
            .strip_prefix(MAGIC)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| bad(format!("expected {MAGIC:?} header")))?;
        let fields: Vec<&str> = rest.split(' ').collect();
        let [b, f, seed] = fields.as_slice() else {
            return Err(bad("header must carry B, f and seed".into()));
        };
        let value = |field: &str, key: &str| -> Result<String, SamplingError> {
            field
                .strip_prefix(key)
                .map(str::to_string)
                .ok_or_else(|| bad(format!("expected {key} in header")))
        };
        Ok(Self {
            superbatch_size: value(b, "B=")?.parse().map_err(|e| bad(format!("B: {e}")))?,
            filter_ratio: value(f, "f=")?.parse().map_err(|e| bad(format!("f: {e}")))?,
            seed: value(seed, "seed=")?.parse().map_err(|e| bad(format!("seed: {e}")))?,
        })
    }
}

/// Parses one data line (trailing newline optional). `line_no` is only used
/// in error messages.
pub fn parse_batch_line(line: &str, line_no: usize) -> Result<SelectedBatch, SamplingError> {
    let bad = |reason: &str| SamplingError::Parse {
        line: line_no,
        reason: reason.to_string(),
    };
    let line = line.strip_suffix('\n').unwrap_or(line);
    let mut parts = line.split('\t');
    let (Some(epoch), Some(seq), Some(strategy), Some(indices), None) =
        (parts.next(), parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(bad("expected four tab-separated fields"));
    };
    let number = |s: &str, what: &str| -> Result<u64, SamplingError> {
        if s.is_empty() || !s.bytes().all(|c| c.is_ascii_digit()) || (s.len() > 1 && s.starts_with('0')) {
            return Err(bad(&format!("bad {what} {s:?}")));
        }
        s.parse().map_err(|_| bad(&format!("bad {what} {s:?}")))
    };
    if strategy.is_empty() {
        return Err(bad("empty strategy name"));
    }
    let indices = indices
        .split(',')
        .map(|s| number(s, "index"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SelectedBatch {
        epoch: number(epoch, "epoch")? as usize,
        batch_seq: number(seq, "batch sequence")? as usize,
        strategy: strategy.to_string(),
        indices,
    })
}

/// A parsed batch-index file.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStream {
    pub header: StreamHeader,
    pub batches: Vec<SelectedBatch>,
}

pub fn read_batch_stream(input: impl BufRead) -> Result<BatchStream, SamplingError> {
    let mut lines = input.lines();
    let io = |e: io::Error| SamplingError::Parse {
        line: 0,
        reason: e.to_string(),
    };
    let header = match lines.next() {
        Some(line) => StreamHeader::parse(&line.map_err(io)?)?,
        None => {
            return Err(SamplingError::Parse {
                line: 1,
                reason: "missing header".into(),
            })
        }
    };
    let mut batches = Vec::new();
    for (i, line) in lines.enumerate() {
        batches.push(parse_batch_line(&line.map_err(io)?, i + 2)?);
    }
    Ok(BatchStream { header, batches })
}

/// Destination for selected batches.
pub trait BatchSink {
    fn begin(&mut self, header: &StreamHeader) -> io::Result<()>;
    fn emit(&mut self, batch: &SelectedBatch) -> io::Result<()>;
    /// Called after the last batch of each epoch.
    fn end_epoch(&mut self, _epoch: usize) -> io::Result<()> {
        Ok(())
    }
}

/// Writes the line-oriented batch-index format.
pub struct WireWriter<W: Write> {
    out: W,
}

impl<W: Write> WireWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> BatchSink for WireWriter<W> {
    fn begin(&mut self, header: &StreamHeader) -> io::Result<()> {
        self.out.write_all(header.to_line().as_bytes())
    }

    fn emit(&mut self, batch: &SelectedBatch) -> io::Result<()> {
        self.out.write_all(batch.to_line().as_bytes())
    }

    fn end_epoch(&mut self, _epoch: usize) -> io::Result<()> {
        self.out.flush()
    }
}

impl BatchSink for Vec<SelectedBatch> {
    fn begin(&mut self, _header: &StreamHeader) -> io::Result<()> {
        Ok(())
    }

    fn emit(&mut self, batch: &SelectedBatch) -> io::Result<()> {
        self.push(batch.clone());
        Ok(())
    }
}
