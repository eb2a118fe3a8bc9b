//! Character and word n-gram features.
//!
//! Text is lowercased for both kinds. Character grams slide over the whole
//! author text, whitespace and word boundaries included; word grams are
//! built from whitespace-separated tokens joined by one space.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{AuthorRecord, Corpus};
use crate::error::{Error, Result};
use crate::sparse::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Char,
    Word,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureScheme {
    kind: FeatureKind,
    n: usize,
}

impl FeatureScheme {
    /// Character n-grams for n in 1..=6, then word n-grams for n in 1..=2.
    pub const ALL: [FeatureScheme; 8] = [
        FeatureScheme::char(1),
        FeatureScheme::char(2),
        FeatureScheme::char(3),
        FeatureScheme::char(4),
        FeatureScheme::char(5),
        FeatureScheme::char(6),
        FeatureScheme::word(1),
        FeatureScheme::word(2),
    ];

    const fn char(n: usize) -> Self {
        FeatureScheme {
            kind: FeatureKind::Char,
            n,
        }
    }

    const fn word(n: usize) -> Self {
        FeatureScheme {
            kind: FeatureKind::Word,
            n,
        }
    }

    pub fn new(kind: FeatureKind, n: usize) -> Result<Self> {
        let max = match kind {
            FeatureKind::Char => 6,
            FeatureKind::Word => 2,
        };
        if n == 0 || n > max {
            return Err(Error::validation(format!(
                "{kind:?} n-gram order must be in 1..={max}, got {n}"
            )));
        }
        Ok(FeatureScheme { kind, n })
    }

    pub fn kind(self) -> FeatureKind {
        self.kind
    }

    pub fn n(self) -> usize {
        self.n
    }
}

impl fmt::Display for FeatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            FeatureKind::Char => "char",
            FeatureKind::Word => "word",
        };
        write!(f, "{kind}-{}", self.n)
    }
}

impl FromStr for FeatureScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::validation(format!("invalid feature scheme {s:?} (expected e.g. char-3 or word-1)"));
        let (kind, n) = s.trim().split_once('-').ok_or_else(bad)?;
        let kind = match kind {
            "char" => FeatureKind::Char,
            "word" => FeatureKind::Word,
            _ => return Err(bad()),
        };
        FeatureScheme::new(kind, n.parse().map_err(|_| bad())?)
    }
}

impl TryFrom<String> for FeatureScheme {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureScheme> for String {
    fn from(s: FeatureScheme) -> String {
        s.to_string()
    }
}

/// One classification instance per author: documents joined by `\n`.
pub fn author_text(author: &AuthorRecord) -> String {
    author.documents.join("\n")
}

/// Calls `emit` for every n-gram of `text` in order of occurrence.
fn for_each_ngram(text: &str, scheme: FeatureScheme, mut emit: impl FnMut(&str)) {
    let lower = text.to_lowercase();
    let n = scheme.n;
    match scheme.kind {
        FeatureKind::Char => {
            // byte offsets of every code point boundary
            let bounds: Vec<usize> = lower
                .char_indices()
                .map(|(i, _)| i)
                .chain(std::iter::once(lower.len()))
                .collect();
            let chars = bounds.len() - 1;
            for start in 0..(chars + 1).saturating_sub(n) {
                emit(&lower[bounds[start]..bounds[start + n]]);
            }
        }
        FeatureKind::Word => {
            let tokens: Vec<&str> = lower.split_whitespace().collect();
            let mut buf = String::new();
            for window in tokens.windows(n) {
                buf.clear();
                for (i, t) in window.iter().enumerate() {
                    if i > 0 {
                        buf.push(' ');
                    }
                    buf.push_str(t);
                }
                emit(&buf);
            }
        }
    }
}

/// All n-grams of `text` with multiplicity, in order of occurrence.
pub fn extract_ngrams(text: &str, scheme: FeatureScheme) -> Vec<String> {
    let mut out = Vec::new();
    for_each_ngram(text, scheme, |g| out.push(g.to_owned()));
    out
}

/// Term frequencies of one text under one scheme.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermCounts(HashMap<String, u32>);

impl TermCounts {
    pub fn of(text: &str, scheme: FeatureScheme) -> Self {
        let mut counts: HashMap<String, u32> = HashMap::new();
        for_each_ngram(text, scheme, |g| {
            if let Some(c) = counts.get_mut(g) {
                *c += 1;
            } else {
                counts.insert(g.to_owned(), 1);
            }
        });
        TermCounts(counts)
    }

    pub fn get(&self, term: &str) -> u32 {
        self.0.get(term).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(t, &c)| (t.as_str(), c))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Vocabulary of one scheme. Column indices follow lexicographic term order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpace {
    scheme: FeatureScheme,
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl FeatureSpace {
    fn from_sorted_terms(scheme: FeatureScheme, terms: Vec<String>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        FeatureSpace { scheme, terms, index }
    }

    /// Every term seen at least once in `counts`.
    pub fn fit_counts<'a>(scheme: FeatureScheme, counts: impl IntoIterator<Item = &'a TermCounts>) -> Result<Self> {
        let mut any = false;
        let mut terms = std::collections::BTreeSet::new();
        for c in counts {
            any = true;
            for (t, _) in c.iter() {
                if !terms.contains(t) {
                    terms.insert(t.to_owned());
                }
            }
        }
        if !any {
            return Err(Error::validation("cannot fit a feature space on an empty corpus"));
        }
        Ok(FeatureSpace::from_sorted_terms(scheme, terms.into_iter().collect()))
    }

    pub fn fit<'a>(scheme: FeatureScheme, texts: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let counts: Vec<TermCounts> = texts.into_iter().map(|t| TermCounts::of(t, scheme)).collect();
        FeatureSpace::fit_counts(scheme, &counts)
    }

    /// The `k` most frequent terms over all texts; equal frequencies at the
    /// cutoff keep the lexicographically smaller term.
    pub fn fit_top_k<'a>(scheme: FeatureScheme, texts: impl IntoIterator<Item = &'a str>, k: usize) -> Result<Self> {
        let mut total: BTreeMap<String, u64> = BTreeMap::new();
        let mut any = false;
        for text in texts {
            any = true;
            for (t, c) in TermCounts::of(text, scheme).iter() {
                *total.entry(t.to_owned()).or_default() += u64::from(c);
            }
        }
        if !any {
            return Err(Error::validation("cannot fit a feature space on an empty corpus"));
        }
        let mut ranked: Vec<(String, u64)> = total.into_iter().collect();
        // stable sort over the lexicographic order keeps ties lexicographic
        ranked.sort_by_key(|r| std::cmp::Reverse(r.1));
        ranked.truncate(k);
        let mut terms: Vec<String> = ranked.into_iter().map(|(t, _)| t).collect();
        terms.sort();
        Ok(FeatureSpace::from_sorted_terms(scheme, terms))
    }

    pub fn scheme(&self) -> FeatureScheme {
        self.scheme
    }

    pub fn dimension(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// L2-normalised counts of in-vocabulary terms.
    pub fn vectorize_counts(&self, counts: &TermCounts) -> SparseVector {
        let mut entries: Vec<(usize, f64)> = counts
            .iter()
            .filter_map(|(t, c)| self.index_of(t).map(|i| (i, f64::from(c))))
            .collect();
        entries.sort_unstable_by_key(|&(i, _)| i);
        SparseVector::new(self.dimension(), entries)
            .expect("vocabulary indices are unique and in range")
            .l2_normalized()
    }

    pub fn vectorize(&self, text: &str) -> SparseVector {
        self.vectorize_counts(&TermCounts::of(text, self.scheme))
    }

    /// `<scheme> <dimension>` header, then one escaped term per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{FEATURES_MAGIC}\n{} {}\n", self.scheme, self.dimension());
        for t in &self.terms {
            out.push_str(&escape_line(t));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.split('\n');
        if lines.next() != Some(FEATURES_MAGIC) {
            return Err(Error::format(origin, 1, format!("expected {FEATURES_MAGIC:?} header")));
        }
        let header = lines.next().unwrap_or_default();
        let (scheme, dim) = header
            .split_once(' ')
            .ok_or_else(|| Error::format(origin, 2, "expected `<scheme> <dimension>`"))?;
        let scheme: FeatureScheme = scheme
            .parse()
            .map_err(|e: Error| Error::format(origin, 2, e.to_string()))?;
        let dim: usize = dim.parse().map_err(|_| Error::format(origin, 2, "bad dimension"))?;
        let mut terms = Vec::with_capacity(dim);
        for (n, line) in lines.enumerate() {
            if terms.len() == dim {
                if line.is_empty() {
                    continue;
                }
                return Err(Error::format(origin, n + 3, "more terms than the declared dimension"));
            }
            terms.push(unescape_line(line).map_err(|m| Error::format(origin, n + 3, m))?);
        }
        if terms.len() != dim {
            return Err(Error::format(
                origin,
                2,
                format!("declared {dim} terms, found {}", terms.len()),
            ));
        }
        if terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::format(origin, 3, "terms are not strictly sorted"));
        }
        Ok(FeatureSpace::from_sorted_terms(scheme, terms))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FeatureSpace::from_text(&text, path)
    }
}

const FEATURES_MAGIC: &str = "authprof-features v1";

/// Fits the vocabulary of `scheme` on every author text of a training corpus.
pub fn fit_feature_space(corpus: &Corpus, scheme: FeatureScheme) -> Result<FeatureSpace> {
    let texts: Vec<String> = corpus.authors.iter().map(author_text).collect();
    FeatureSpace::fit(scheme, texts.iter().map(String::as_str))
}

pub(crate) fn escape_line(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub(crate) fn unescape_line(s: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape \\{}", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}
