//! Generation records: the JSONL wire format produced by model adapters and
//! consumed by every scorer in this crate.
//!
//! One line holds one prompt, its gold answers, the sampled responses with
//! per-token log-probabilities, and the NLI class probabilities for ordered
//! pairs of responses.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Allowed deviation of an NLI probability triple from the simplex.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

fn default_count() -> u32 {
    1
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One sampled sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSample {
    pub text: String,
    /// Natural-log probability of every generated token.
    pub token_logprobs: Vec<f64>,
    pub num_tokens: usize,
    /// Diverse-beam-search group that produced this sequence.
    #[serde(default)]
    pub beam_group: u32,
    /// Occurrences during sampling.
    #[serde(default = "default_count")]
    pub count: u32,
    /// Self-evaluation probability emitted by adapters that support it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_true: Option<f64>,
}

impl ResponseSample {
    pub fn new(text: impl Into<String>, token_logprobs: Vec<f64>) -> Self {
        let num_tokens = token_logprobs.len();
        Self {
            text: text.into(),
            token_logprobs,
            num_tokens,
            beam_group: 0,
            count: 1,
            p_true: None,
        }
    }

    pub fn with_beam_group(mut self, group: u32) -> Self {
        self.beam_group = group;
        self
    }

    pub fn with_count(mut self, count: u32) -> Self {
        self.count = count;
        self
    }

    /// Sum of token log-probabilities, i.e. `log p(y|x)`.
    pub fn sequence_logprob(&self) -> f64 {
        self.token_logprobs.iter().sum()
    }

    /// Text used for duplicate detection.
    pub fn normalized_text(&self) -> &str {
        self.text.trim()
    }
}

/// NLI class probabilities for an ordered response pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationProbs {
    pub p_contradiction: f64,
    pub p_neutral: f64,
    pub p_entailment: f64,
}

impl RelationProbs {
    pub const fn new(p_contradiction: f64, p_neutral: f64, p_entailment: f64) -> Self {
        Self {
            p_contradiction,
            p_neutral,
            p_entailment,
        }
    }

    pub const fn entailment() -> Self {
        Self::new(0.0, 0.0, 1.0)
    }

    pub const fn neutral() -> Self {
        Self::new(0.0, 1.0, 0.0)
    }

    pub const fn contradiction() -> Self {
        Self::new(1.0, 0.0, 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.p_contradiction + self.p_neutral + self.p_entailment
    }

    fn check(&self) -> Result<(), String> {
        for (name, p) in [
            ("p_contradiction", self.p_contradiction),
            ("p_neutral", self.p_neutral),
            ("p_entailment", self.p_entailment),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Directional NLI output for responses `i -> j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectedRelation {
    pub i: usize,
    pub j: usize,
    #[serde(flatten)]
    pub probs: RelationProbs,
}

impl DirectedRelation {
    pub const fn new(i: usize, j: usize, probs: RelationProbs) -> Self {
        Self { i, j, probs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt_id: String,
    pub prompt: String,
    pub model: String,
    pub dataset: String,
    pub gold_answers: Vec<String>,
    pub responses: Vec<ResponseSample>,
    #[serde(default)]
    pub relations: Vec<DirectedRelation>,
    /// Set when the adapter ran NLI in one direction only.
    #[serde(default, skip_serializing_if = "is_false")]
    pub single_direction: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("line {line}: input is not valid UTF-8")]
    Utf8 { line: usize },
    #[error("line {line}: malformed JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: String },
    #[error("line {line}: {field}: {message}")]
    Invalid {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: {field}: probabilities sum to {sum}, expected 1 within {SIMPLEX_TOLERANCE}")]
    Normalization { line: usize, field: String, sum: f64 },
    #[error("line {line}: duplicate prompt_id `{prompt_id}` (first seen on line {first_line})")]
    DuplicatePromptId {
        line: usize,
        prompt_id: String,
        first_line: usize,
    },
}

impl RecordError {
    pub fn line(&self) -> usize {
        match self {
            Self::Utf8 { line }
            | Self::Json { line, .. }
            | Self::MissingField { line, .. }
            | Self::Invalid { line, .. }
            | Self::Normalization { line, .. }
            | Self::DuplicatePromptId { line, .. } => *line,
        }
    }

    /// Dotted path of the offending field, when the error concerns one.
    pub fn field(&self) -> Option<&str> {
        match self {
            Self::MissingField { field, .. } | Self::Invalid { field, .. } | Self::Normalization { field, .. } => {
                Some(field)
            }
            Self::DuplicatePromptId { .. } => Some("prompt_id"),
            _ => None,
        }
    }
}

/// Violation found by [`GenerationRecord::validate`], before a line number is attached.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Invalid { field: String, message: String },
    Normalization { field: String, sum: f64 },
}

impl Violation {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    fn at_line(self, line: usize) -> RecordError {
        match self {
            Self::Invalid { field, message } => RecordError::Invalid { line, field, message },
            Self::Normalization { field, sum } => RecordError::Normalization { line, field, sum },
        }
    }
}

impl GenerationRecord {
    pub fn num_responses(&self) -> usize {
        self.responses.len()
    }

    /// Checks every type invariant of the record and its parts.
    pub fn validate(&self) -> Result<(), Violation> {
        if self.gold_answers.is_empty() {
            return Err(Violation::invalid("gold_answers", "must not be empty"));
        }
        if self.responses.is_empty() {
            return Err(Violation::invalid("responses", "must not be empty"));
        }
        for (idx, r) in self.responses.iter().enumerate() {
            let field = |name: &str| format!("responses[{idx}].{name}");
            if r.num_tokens == 0 {
                return Err(Violation::invalid(field("num_tokens"), "must be at least 1"));
            }
            if r.token_logprobs.len() != r.num_tokens {
                return Err(Violation::invalid(
                    field("token_logprobs"),
                    format!(
                        "has {} entries but num_tokens is {}",
                        r.token_logprobs.len(),
                        r.num_tokens
                    ),
                ));
            }
            if let Some(pos) = r.token_logprobs.iter().position(|lp| !lp.is_finite() || *lp > 0.0) {
                return Err(Violation::invalid(
                    format!("responses[{idx}].token_logprobs[{pos}]"),
                    format!("{} is not a finite value <= 0", r.token_logprobs[pos]),
                ));
            }
            if r.count == 0 {
                return Err(Violation::invalid(field("count"), "must be at least 1"));
            }
            if let Some(p) = r.p_true {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Violation::invalid(field("p_true"), format!("{p} outside [0, 1]")));
                }
            }
        }

        let m = self.responses.len();
        let mut seen = vec![false; m * m];
        for (k, rel) in self.relations.iter().enumerate() {
            if rel.i >= m {
                return Err(Violation::invalid(
                    format!("relations[{k}].i"),
                    format!("index {} out of range for {m} responses", rel.i),
                ));
            }
            if rel.j >= m {
                return Err(Violation::invalid(
                    format!("relations[{k}].j"),
                    format!("index {} out of range for {m} responses", rel.j),
                ));
            }
            if rel.i == rel.j {
                return Err(Violation::invalid(
                    format!("relations[{k}]"),
                    "self-pairs are not recorded",
                ));
            }
            rel.probs
                .check()
                .map_err(|msg| Violation::invalid(format!("relations[{k}]"), msg))?;
            let sum = rel.probs.sum();
            if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Violation::Normalization {
                    field: format!("relations[{k}]"),
                    sum,
                });
            }
            let cell = &mut seen[rel.i * m + rel.j];
            if *cell {
                return Err(Violation::invalid(
                    format!("relations[{k}]"),
                    format!("duplicate directed pair {} -> {}", rel.i, rel.j),
                ));
            }
            *cell = true;
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let (fwd, bwd) = (seen[i * m + j], seen[j * m + i]);
                let ok = if self.single_direction { fwd || bwd } else { fwd && bwd };
                if !ok {
                    let missing = if !fwd { (i, j) } else { (j, i) };
                    return Err(Violation::invalid(
                        "relations",
                        format!("missing relation {} -> {}", missing.0, missing.1),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }
}

/// Parses and validates one JSONL line. `line` is 1-based and only used in errors.
pub fn parse_record(bytes: &[u8], line: usize) -> Result<GenerationRecord, RecordError> {
    let text = std::str::from_utf8(bytes).map_err(|_| RecordError::Utf8 { line })?;
    // Path tracking is slow, so it only runs again once a line is known to be bad.
    let record: GenerationRecord = match serde_json::from_str(text) {
        Ok(r) => r,
        Err(_) => return Err(diagnose(text, line)),
    };
    record.validate().map_err(|v| v.at_line(line))?;
    Ok(record)
}

fn diagnose(text: &str, line: usize) -> RecordError {
    let mut de = serde_json::Deserializer::from_str(text);
    let result: Result<GenerationRecord, _> = serde_path_to_error::deserialize(&mut de);
    match result {
        Err(err) => {
            let path = err.path().to_string();
            classify_json_error(line, &path, err.inner())
        }
        Ok(_) => match de.end() {
            Err(e) => RecordError::Json {
                line,
                message: e.to_string(),
            },
            Ok(()) => unreachable!("line parsed on the second attempt"),
        },
    }
}

fn classify_json_error(line: usize, path: &str, err: &serde_json::Error) -> RecordError {
    let message = err.to_string();
    if err.is_data() {
        if let Some(rest) = message.strip_prefix("missing field `") {
            let name = rest.split('`').next().unwrap_or_default();
            let field = if path.is_empty() || path == "." {
                name.to_string()
            } else {
                format!("{path}.{name}")
            };
            return RecordError::MissingField { line, field };
        }
        return RecordError::Invalid {
            line,
            field: path.to_string(),
            message,
        };
    }
    RecordError::Json { line, message }
}

/// Tracks prompt ids across one corpus file.
#[derive(Debug, Default)]
pub struct PromptIdRegistry {
    first_seen: HashMap<String, usize>,
}

impl PromptIdRegistry {
    pub fn register(&mut self, prompt_id: &str, line: usize) -> Result<(), RecordError> {
        if let Some(&first_line) = self.first_seen.get(prompt_id) {
            return Err(RecordError::DuplicatePromptId {
                line,
                prompt_id: prompt_id.to_string(),
                first_line,
            });
        }
        self.first_seen.insert(prompt_id.to_string(), line);
        Ok(())
    }
}

fn length_normalized(sample: &ResponseSample) -> f64 {
    sample.sequence_logprob() / sample.num_tokens as f64
}

/// Merges responses whose whitespace-trimmed text is identical.
///
/// Groups keep first-occurrence order. Counts are summed, and the retained
/// sample is the member with the highest length-normalized log-probability
/// (the earliest one on ties). Relations are restricted to the retained
/// samples and re-indexed.
pub fn dedup_responses(record: &GenerationRecord) -> GenerationRecord {
    let m = record.responses.len();
    let mut group_of_text: HashMap<&str, usize> = HashMap::with_capacity(m);
    // (retained original index, summed count)
    let mut groups: Vec<(usize, u32)> = Vec::with_capacity(m);
    for (idx, sample) in record.responses.iter().enumerate() {
        match group_of_text.get(sample.normalized_text()) {
            Some(&g) => {
                let (kept, count) = &mut groups[g];
                *count = count.saturating_add(sample.count);
                if length_normalized(sample) > length_normalized(&record.responses[*kept]) {
                    *kept = idx;
                }
            }
            None => {
                group_of_text.insert(sample.normalized_text(), groups.len());
                groups.push((idx, sample.count));
            }
        }
    }
    if groups.len() == m {
        return record.clone();
    }

    let mut new_index = vec![None; m];
    for (g, &(kept, _)) in groups.iter().enumerate() {
        new_index[kept] = Some(g);
    }
    let responses = groups
        .iter()
        .map(|&(kept, count)| ResponseSample {
            count,
            ..record.responses[kept].clone()
        })
        .collect();
    let relations = record
        .relations
        .iter()
        .filter_map(|rel| match (new_index[rel.i], new_index[rel.j]) {
            (Some(i), Some(j)) => Some(DirectedRelation::new(i, j, rel.probs)),
            _ => None,
        })
        .collect();
    GenerationRecord {
        responses,
        relations,
        ..record.clone()
    }
}
