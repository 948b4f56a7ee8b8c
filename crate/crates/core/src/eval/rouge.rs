//! Rouge-L F-measure and the correctness rule built on it.

/// Splits text into the tokens Rouge-L compares.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Lowercases, splits on whitespace and strips punctuation at token edges.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace()
            .map(|tok| tok.trim_matches(|c: char| c.is_ascii_punctuation() || c.is_ascii_control()))
            .filter(|tok| !tok.is_empty())
            .map(str::to_lowercase)
            .collect()
    }
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Rouge-L F1 between token sequences.
pub fn rouge_l_tokens(candidate: &[String], reference: &[String]) -> f64 {
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

pub fn rouge_l_with(tokenizer: &dyn Tokenizer, candidate: &str, reference: &str) -> f64 {
    rouge_l_tokens(&tokenizer.tokenize(candidate), &tokenizer.tokenize(reference))
}

pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    rouge_l_with(&WhitespaceTokenizer, candidate, reference)
}

pub const DEFAULT_ROUGE_THRESHOLD: f64 = 0.3;

/// Cuts a response at the first continuation marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trimmer {
    pub markers: Vec<String>,
}

impl Default for Trimmer {
    fn default() -> Self {
        Self {
            markers: vec!["\n".into(), "Q:".into(), "Question:".into()],
        }
    }
}

impl Trimmer {
    pub fn new(markers: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            markers: markers.into_iter().map(Into::into).collect(),
        }
    }

    pub fn trim<'a>(&self, text: &'a str) -> &'a str {
        let cut = self
            .markers
            .iter()
            .filter(|m| !m.is_empty())
            .filter_map(|m| text.find(m.as_str()))
            .min()
            .unwrap_or(text.len());
        text[..cut].trim()
    }
}

/// Strictly above the threshold. A threshold of 1 or more accepts exact
/// (Rouge-L = 1) matches, since nothing can score above 1.
pub fn is_correct(rouge: f64, threshold: f64) -> bool {
    rouge > threshold || (threshold >= 1.0 && rouge >= 1.0)
}

/// Best Rouge-L of the trimmed response against any gold answer.
pub fn best_rouge(response: &str, gold_answers: &[String], trimmer: &Trimmer, tokenizer: &dyn Tokenizer) -> f64 {
    let cand = tokenizer.tokenize(trimmer.trim(response));
    gold_answers
        .iter()
        .map(|g| rouge_l_tokens(&cand, &tokenizer.tokenize(g)))
        .fold(0.0, f64::max)
}

pub fn correctness(response: &str, gold_answers: &[String], threshold: f64, trimmer: &Trimmer) -> bool {
    is_correct(
        best_rouge(response, gold_answers, trimmer, &WhitespaceTokenizer),
        threshold,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rouge_cases() {
        assert_eq!(rouge_l("The capital is Paris.", "the capital is paris"), 1.0);
        assert_eq!(rouge_l("red blue", "green yellow"), 0.0);
        assert!((rouge_l("the cat sat", "the cat ran") - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rouge_l("", "x"), 0.0);
        assert_eq!(rouge_l("...", "x"), 0.0);
    }

    #[test]
    fn lcs_is_subsequence_not_substring() {
        // LCS("a b c d", "a x c y d") = 3
        let f = rouge_l("a b c d", "a x c y d");
        let (p, r) = (3.0 / 4.0, 3.0 / 5.0);
        assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-12);
    }

    #[test]
    fn trimming() {
        let t = Trimmer::default();
        assert_eq!(t.trim("Paris\nQ: next question"), "Paris");
        assert_eq!(t.trim("Paris Q: what"), "Paris");
        assert_eq!(t.trim("  Paris  "), "Paris");
        assert_eq!(Trimmer::new(Vec::<String>::new()).trim("a\nb"), "a\nb");
    }

    #[test]
    fn correctness_rule() {
        let gold = vec!["Paris".to_string()];
        assert!(correctness("Paris\nQ: next question", &gold, 0.3, &Trimmer::default()));
        for t in [0.0, 0.3, 0.5, 0.9, 0.999] {
            assert!(correctness("paris", &gold, t, &Trimmer::default()));
        }
        assert!(is_correct(0.31, 0.3));
        assert!(!is_correct(0.3, 0.3));
        assert!(is_correct(1.0, 1.0));
        assert!(!is_correct(0.99, 1.0));
        assert!(!is_correct(0.0, 0.0));
        assert!(is_correct(0.01, 0.0));
    }

    #[test]
    fn best_of_several_gold_answers() {
        let gold = vec!["London".to_string(), "the city of Paris".to_string()];
        let r = best_rouge("Paris", &gold, &Trimmer::default(), &WhitespaceTokenizer);
        assert!((r - 0.4).abs() < 1e-12);
    }
}
