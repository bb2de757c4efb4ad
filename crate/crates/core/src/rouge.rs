//! ROUGE-L F1 over whitespace tokens.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// A similarity value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub const ZERO: SimilarityScore = SimilarityScore(0.0);
    pub const ONE: SimilarityScore = SimilarityScore(1.0);

    /// Clamps into `[0, 1]`; NaN maps to zero.
    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            SimilarityScore(0.0)
        } else {
            SimilarityScore(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Lowercases, splits on Unicode whitespace and strips leading and trailing
/// non-alphanumeric characters from every token. Tokens that are pure
/// punctuation disappear.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Length of the longest common subsequence, using one rolling row sized by
/// the shorter input.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    let mut row = vec![0usize; short.len() + 1];
    for x in long {
        let mut diag = 0;
        for (j, y) in short.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[short.len()]
}

/// F1 of LCS precision and recall for two token sequences.
pub fn rouge_l_f1_tokens<T: PartialEq>(candidate: &[T], reference: &[T]) -> SimilarityScore {
    if candidate.is_empty() || reference.is_empty() {
        return SimilarityScore::ZERO;
    }
    let lcs = lcs_length(candidate, reference) as f64;
    let precision = lcs / candidate.len() as f64;
    let recall = lcs / reference.len() as f64;
    if precision + recall == 0.0 {
        return SimilarityScore::ZERO;
    }
    SimilarityScore::new(2.0 * precision * recall / (precision + recall))
}

pub fn rouge_l_f1(candidate: &str, reference: &str) -> SimilarityScore {
    rouge_l_f1_tokens(&tokenize(candidate), &tokenize(reference))
}

/// Maximum ROUGE-L F1 of `candidate` against `pool_texts` with the first
/// argmax index, or `(0, None)` for an empty pool.
pub fn max_similarity<S: AsRef<str>>(
    candidate: &str,
    pool_texts: &[S],
) -> (SimilarityScore, Option<usize>) {
    let cand = tokenize(candidate);
    best_match(
        &cand,
        pool_texts.iter().map(|t| tokenize(t.as_ref())).enumerate(),
    )
}

fn best_match<I, T>(cand: &[String], entries: I) -> (SimilarityScore, Option<usize>)
where
    I: Iterator<Item = (usize, T)>,
    T: AsRef<[String]>,
{
    let mut best = (SimilarityScore::ZERO, None);
    for (i, toks) in entries {
        let s = rouge_l_f1_tokens(cand, toks.as_ref());
        if best.1.is_none() || s > best.0 {
            best = (s, Some(i));
        }
    }
    best
}

/// Texts with their token lists cached, for repeated exact max-similarity
/// queries against a growing collection.
#[derive(Debug, Clone, Default)]
pub struct SimilarityIndex {
    tokens: Vec<Vec<String>>,
}

impl SimilarityIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Self {
        SimilarityIndex {
            tokens: texts.iter().map(|t| tokenize(t.as_ref())).collect(),
        }
    }

    pub fn push(&mut self, text: &str) {
        self.tokens.push(tokenize(text));
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn max_similarity(&self, candidate: &str) -> (SimilarityScore, Option<usize>) {
        let cand = tokenize(candidate);
        best_match(&cand, self.tokens.iter().enumerate())
    }
}
