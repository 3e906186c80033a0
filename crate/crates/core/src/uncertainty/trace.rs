use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::SyntheticParams;
use super::TokenDistribution;
use crate::error::{Error, Result};

/// Bits per query token used to derive `query_bits` when a record omits it.
pub const DEFAULT_BITS_PER_TOKEN: u64 = 16;

const RENORM_TOLERANCE: f64 = 1e-6;

/// First-token top-k distribution of one query plus ground-truth labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRecord {
    pub topk_probs: TokenDistribution,
    pub slm_correct: bool,
    pub llm_correct: bool,
    pub query_tokens: u64,
    pub query_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    File(PathBuf),
    Synthetic(SyntheticParams),
    Inline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceIssue {
    pub line: usize,
    pub severity: Severity,
    pub message: String,
}

impl std::fmt::Display for TraceIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "line {}: {tag}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyTrace {
    pub records: Vec<UncertaintyRecord>,
    pub source: TraceSource,
    /// Non-fatal fixes applied while loading.
    pub warnings: Vec<TraceIssue>,
}

impl UncertaintyTrace {
    pub fn new(records: Vec<UncertaintyRecord>, source: TraceSource) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Config("uncertainty trace is empty".into()));
        }
        Ok(Self {
            records,
            source,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    topk_probs: Vec<f64>,
    slm_correct: bool,
    llm_correct: bool,
    query_tokens: u64,
    #[serde(default)]
    query_bits: Option<u64>,
}

/// Parses one trace line. Unsorted or unnormalized probabilities are fixed
/// and reported as warnings; anything else is an error naming the line.
pub fn parse_record(
    line: usize,
    text: &str,
    bits_per_token: u64,
) -> Result<(UncertaintyRecord, Vec<TraceIssue>)> {
    let raw: RawRecord = serde_json::from_str(text).map_err(|e| Error::TraceRecord {
        line,
        reason: e.to_string(),
    })?;
    if raw.query_tokens == 0 {
        return Err(Error::TraceRecord {
            line,
            reason: "query_tokens must be >= 1".into(),
        });
    }
    let query_bits = match raw.query_bits {
        Some(0) => {
            return Err(Error::TraceRecord {
                line,
                reason: "query_bits must be >= 1".into(),
            })
        }
        Some(b) => b,
        None => raw.query_tokens * bits_per_token,
    };
    let (topk_probs, fix) = TokenDistribution::normalized(raw.topk_probs, RENORM_TOLERANCE)
        .map_err(|e| Error::TraceRecord {
            line,
            reason: e.to_string(),
        })?;
    let mut issues = Vec::new();
    if fix.sorted {
        issues.push(TraceIssue {
            line,
            severity: Severity::Warning,
            message: "topk_probs not sorted descending; sorted".into(),
        });
    }
    if fix.renormalized {
        issues.push(TraceIssue {
            line,
            severity: Severity::Warning,
            message: "topk_probs do not sum to 1; renormalized over top-k".into(),
        });
    }
    Ok((
        UncertaintyRecord {
            topk_probs,
            slm_correct: raw.slm_correct,
            llm_correct: raw.llm_correct,
            query_tokens: raw.query_tokens,
            query_bits,
        },
        issues,
    ))
}

/// Reads a line-delimited trace. Blank lines are skipped; the first bad
/// record aborts the load.
pub fn load_trace<R: BufRead>(reader: R, source: TraceSource) -> Result<UncertaintyTrace> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let text = line.map_err(|e| Error::TraceRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let (record, issues) = parse_record(line_no, &text, DEFAULT_BITS_PER_TOKEN)?;
        for w in &issues {
            log::warn!("{w}");
        }
        warnings.extend(issues);
        records.push(record);
    }
    let mut trace = UncertaintyTrace::new(records, source)?;
    trace.warnings = warnings;
    Ok(trace)
}

pub fn load_trace_file(path: &Path) -> Result<UncertaintyTrace> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_trace(std::io::BufReader::new(f), TraceSource::File(path.to_path_buf()))
}

/// Lints every line and returns all issues instead of stopping at the first.
pub fn validate_trace_text(text: &str) -> (usize, Vec<TraceIssue>) {
    let mut ok = 0;
    let mut issues = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(idx + 1, line, DEFAULT_BITS_PER_TOKEN) {
            Ok((_, w)) => {
                ok += 1;
                issues.extend(w);
            }
            Err(e) => issues.push(TraceIssue {
                line: idx + 1,
                severity: Severity::Error,
                message: match e {
                    Error::TraceRecord { reason, .. } => reason,
                    other => other.to_string(),
                },
            }),
        }
    }
    if ok == 0 && !issues.iter().any(|i| i.severity == Severity::Error) {
        issues.push(TraceIssue {
            line: 0,
            severity: Severity::Error,
            message: "trace contains no records".into(),
        });
    }
    (ok, issues)
}
