//! Corpus-level scoring of JSONL input.

use thiserror::Error;

use crate::par::{self, Execution};
use crate::record::{dedup_responses, parse_record, GenerationRecord, PromptIdRegistry, RecordError};
use crate::score::{score_deduplicated, ScoreConfig, ScoreError, ScoreSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineError {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("line {line}: prompt `{prompt_id}`: {source}")]
    Score {
        line: usize,
        prompt_id: String,
        source: ScoreError,
    },
}

impl LineError {
    pub fn line(&self) -> usize {
        match self {
            LineError::Record(e) => e.line(),
            LineError::Score { line, .. } => *line,
        }
    }
}

/// Non-blank lines with their 1-based line numbers.
pub fn split_lines(input: &[u8]) -> Vec<(usize, &[u8])> {
    input
        .split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, line)| (i + 1, line.strip_suffix(b"\r").unwrap_or(line)))
        .filter(|(_, line)| !line.iter().all(u8::is_ascii_whitespace))
        .collect()
}

/// Parses every record; a repeated `prompt_id` is an error on its later line.
pub fn parse_corpus(input: &[u8], exec: Execution) -> Vec<(usize, Result<GenerationRecord, RecordError>)> {
    let lines = split_lines(input);
    let mut parsed: Vec<(usize, Result<GenerationRecord, RecordError>)> =
        par::map(&lines, exec, |&(line, bytes)| (line, parse_record(bytes, line)));
    let mut registry = PromptIdRegistry::default();
    for (line, result) in parsed.iter_mut() {
        if let Ok(record) = result {
            if let Err(e) = registry.register(&record.prompt_id, *line) {
                *result = Err(e);
            }
        }
    }
    parsed
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineOutcome {
    pub line: usize,
    pub result: Result<Vec<ScoreSet>, LineError>,
}

/// Parses, deduplicates and scores a JSONL corpus. Outcomes follow input order.
pub fn score_corpus(input: &[u8], cfg: &ScoreConfig, exec: Execution) -> Vec<LineOutcome> {
    score_parsed(&parse_corpus(input, exec), cfg, exec)
}

/// Scores already-parsed lines, passing parse failures through.
pub fn score_parsed(
    parsed: &[(usize, Result<GenerationRecord, RecordError>)],
    cfg: &ScoreConfig,
    exec: Execution,
) -> Vec<LineOutcome> {
    par::map(parsed, exec, |(line, result)| {
        let result = match result {
            Err(e) => Err(LineError::Record(e.clone())),
            Ok(record) => {
                let record = dedup_responses(record);
                score_deduplicated(&record, cfg).map_err(|source| LineError::Score {
                    line: *line,
                    prompt_id: record.prompt_id.clone(),
                    source,
                })
            }
        };
        LineOutcome { line: *line, result }
    })
}

/// Score JSONL for each successful line, one string per input line.
pub fn render_scores(outcomes: &[LineOutcome], exec: Execution) -> Vec<Option<String>> {
    par::map(outcomes, exec, |o| {
        o.result.as_ref().ok().map(|scores| {
            let mut out = String::with_capacity(scores.len() * 400);
            for s in scores {
                out.push_str(&s.to_json_line());
                out.push('\n');
            }
            out
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_and_crlf_lines() {
        let lines = split_lines(b"a\r\n\n  \nb");
        assert_eq!(lines, vec![(1, &b"a"[..]), (4, &b"b"[..])]);
        assert!(split_lines(b"").is_empty());
    }

    #[test]
    fn duplicate_ids_flagged_on_later_line() {
        let rec = r#"{"prompt_id":"p","prompt":"","model":"m","dataset":"d","gold_answers":["a"],"responses":[{"text":"a","token_logprobs":[-1.0],"num_tokens":1}]}"#;
        let input = format!("{rec}\n{rec}\n");
        let parsed = parse_corpus(input.as_bytes(), Execution::Parallel);
        assert!(parsed[0].1.is_ok());
        assert!(matches!(
            parsed[1].1,
            Err(RecordError::DuplicatePromptId {
                line: 2,
                first_line: 1,
                ..
            })
        ));
    }
}
