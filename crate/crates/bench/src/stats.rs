use std::fmt;
use std::str::FromStr;

use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Evict,
    Insert,
    /// One replayed CSV row: insert, evict and query.
    Replay,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpKind::Evict => "evict",
            OpKind::Insert => "insert",
            OpKind::Replay => "replay",
        })
    }
}

impl FromStr for OpKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "evict" => Ok(OpKind::Evict),
            "insert" => Ok(OpKind::Insert),
            "replay" => Ok(OpKind::Replay),
            _ => Err(BenchError::Parse(format!("unknown op kind {s:?}"))),
        }
    }
}

/// Cost of one timed operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatencyRecord {
    pub op_index: u64,
    pub op_kind: OpKind,
    pub nanos: u64,
    pub nodes_visited: u64,
    pub combines: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatsSummary {
    pub count: usize,
    pub mean: f64,
    pub median: u64,
    pub p99_9: u64,
    pub p99_999: u64,
    /// Entries processed per second of timed work.
    pub throughput: f64,
}

/// Nearest-rank percentile of an ascending sample. `None` when empty.
pub fn percentile(sorted: &[u64], p: f64) -> Option<u64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    // the epsilon keeps exact products like 99.9% of 1000 from rounding up a rank
    let rank = (p * n as f64 / 100.0 - 1e-9).ceil() as usize;
    Some(sorted[rank.clamp(1, n) - 1])
}

/// Summary of the records' latencies; `items` is the number of entries they handled.
pub fn summarize(records: &[LatencyRecord], items: u64) -> StatsSummary {
    summarize_nanos(records.iter().map(|r| r.nanos).collect(), items)
}

pub fn summarize_nanos(mut ns: Vec<u64>, items: u64) -> StatsSummary {
    ns.sort_unstable();
    let total: u64 = ns.iter().sum();
    let count = ns.len();
    StatsSummary {
        count,
        mean: if count == 0 { 0.0 } else { total as f64 / count as f64 },
        median: percentile(&ns, 50.0).unwrap_or(0),
        p99_9: percentile(&ns, 99.9).unwrap_or(0),
        p99_999: percentile(&ns, 99.999).unwrap_or(0),
        throughput: if total == 0 {
            0.0
        } else {
            items as f64 / (total as f64 * 1e-9)
        },
    }
}

pub const CSV_HEADER: [&str; 5] = ["op_index", "op_kind", "nanos", "nodes_visited", "combines"];

/// Records as CSV, then one `#` comment line per summary.
pub fn emit_stats(records: &[LatencyRecord], summaries: &[(OpKind, StatsSummary)]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.op_index.to_string(),
            r.op_kind.to_string(),
            r.nanos.to_string(),
            r.nodes_visited.to_string(),
            r.combines.to_string(),
        ])?;
    }
    let mut out = String::from_utf8(w.into_inner().map_err(|e| BenchError::Io(e.into_error()))?)
        .expect("csv output is utf-8");
    for (kind, s) in summaries {
        out.push_str(&format!(
            "# {kind}: count={} mean_ns={:.1} median_ns={} p99.9_ns={} p99.999_ns={} throughput_per_s={:.1}\n",
            s.count, s.mean, s.median, s.p99_9, s.p99_999, s.throughput
        ));
    }
    Ok(out)
}

/// Reads back the rows written by [`emit_stats`], ignoring the summary lines.
pub fn parse_stats(text: &str) -> Result<Vec<LatencyRecord>, BenchError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let field = |i: usize| -> Result<u64, BenchError> {
            row.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| BenchError::Parse(format!("bad field {i} in {row:?}")))
        };
        out.push(LatencyRecord {
            op_index: field(0)?,
            op_kind: row.get(1).unwrap_or("").parse()?,
            nanos: field(2)?,
            nodes_visited: field(3)?,
            combines: field(4)?,
        });
    }
    Ok(out)
}
