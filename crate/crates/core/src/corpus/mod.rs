//! PAN-style author corpora: one XML file per author plus an optional
//! `truth.txt` carrying `author_id:::gender:::variety` rows.

mod folds;
mod synthetic;
mod xml;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use folds::{holdout_split, make_folds, FoldAssignment};
pub use synthetic::{generate_synthetic_corpus, LabelDistribution, SyntheticSpec, TokenDistribution};
pub use xml::{read_author_file, read_prediction_file, write_author_file, write_prediction_file, PredictedAuthor};

pub const TRUTH_FILE: &str = "truth.txt";
const TRUTH_SEPARATOR: &str = ":::";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    Ar,
    En,
    Es,
    Pt,
}

impl Lang {
    pub const ALL: [Lang; 4] = [Lang::Ar, Lang::En, Lang::Es, Lang::Pt];

    pub fn code(self) -> &'static str {
        match self {
            Lang::Ar => "ar",
            Lang::En => "en",
            Lang::Es => "es",
            Lang::Pt => "pt",
        }
    }

    /// English name, used as the row label in reports.
    pub fn name(self) -> &'static str {
        match self {
            Lang::Ar => "Arabic",
            Lang::En => "English",
            Lang::Es => "Spanish",
            Lang::Pt => "Portuguese",
        }
    }

    /// Variety (or dialect) labels of the PAN 2017 profiling data, lowercase and sorted.
    pub fn pan_varieties(self) -> &'static [&'static str] {
        match self {
            Lang::Ar => &["egypt", "gulf", "levantine", "maghrebi"],
            Lang::En => &[
                "australia",
                "canada",
                "great britain",
                "ireland",
                "new zealand",
                "united states",
            ],
            Lang::Es => &["argentina", "chile", "colombia", "mexico", "peru", "spain", "venezuela"],
            Lang::Pt => &["brazil", "portugal"],
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Lang {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "ar" => Ok(Lang::Ar),
            "en" => Ok(Lang::En),
            "es" => Ok(Lang::Es),
            "pt" => Ok(Lang::Pt),
            other => Err(Error::validation(format!(
                "unknown language code {other:?} (expected ar, en, es or pt)"
            ))),
        }
    }
}

/// One author: the classification unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthorRecord {
    pub author_id: String,
    pub lang: Lang,
    pub documents: Vec<String>,
    pub gender: Option<String>,
    pub variety: Option<String>,
}

impl AuthorRecord {
    pub fn new(author_id: impl Into<String>, lang: Lang, documents: Vec<String>) -> Self {
        AuthorRecord {
            author_id: author_id.into(),
            lang,
            documents,
            gender: None,
            variety: None,
        }
    }

    pub fn with_labels(mut self, gender: impl Into<String>, variety: impl Into<String>) -> Self {
        self.gender = Some(gender.into());
        self.variety = Some(variety.into());
        self
    }

    pub fn is_labeled(&self) -> bool {
        self.gender.is_some() && self.variety.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub lang: Lang,
    /// Sorted by author id.
    pub authors: Vec<AuthorRecord>,
    pub gender_labels: Vec<String>,
    pub variety_labels: Vec<String>,
}

impl Corpus {
    /// Validates the records, lowercases labels, sorts authors by id and
    /// derives the label sets from the labels present.
    pub fn new(lang: Lang, mut authors: Vec<AuthorRecord>) -> Result<Corpus> {
        if authors.is_empty() {
            return Err(Error::validation("corpus has no authors"));
        }
        let mut ids = BTreeSet::new();
        for a in &mut authors {
            validate_author_id(&a.author_id)?;
            if !ids.insert(a.author_id.clone()) {
                return Err(Error::validation(format!("duplicate author id {:?}", a.author_id)));
            }
            if a.lang != lang {
                return Err(Error::validation(format!(
                    "author {:?} has lang {} but the corpus is {}",
                    a.author_id, a.lang, lang
                )));
            }
            if a.documents.is_empty() {
                return Err(Error::validation(format!("author {:?} has no documents", a.author_id)));
            }
            a.gender = a.gender.take().map(|g| normalize_label(&g));
            a.variety = a.variety.take().map(|v| normalize_label(&v));
            for label in a.gender.iter().chain(a.variety.iter()) {
                if label.is_empty() {
                    return Err(Error::validation(format!(
                        "author {:?} has an empty label",
                        a.author_id
                    )));
                }
            }
        }
        authors.sort_by(|a, b| a.author_id.cmp(&b.author_id));
        let gender_labels = collect_labels(authors.iter().filter_map(|a| a.gender.as_deref()));
        let variety_labels = collect_labels(authors.iter().filter_map(|a| a.variety.as_deref()));
        Ok(Corpus {
            lang,
            authors,
            gender_labels,
            variety_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.authors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.authors.is_empty()
    }

    /// Every author carries both labels.
    pub fn is_labeled(&self) -> bool {
        self.authors.iter().all(AuthorRecord::is_labeled)
    }

    pub fn author(&self, id: &str) -> Option<&AuthorRecord> {
        self.authors
            .binary_search_by(|a| a.author_id.as_str().cmp(id))
            .ok()
            .map(|i| &self.authors[i])
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.authors.iter().map(|a| a.author_id.as_str())
    }

    /// Variety labels outside the official PAN list for this language.
    pub fn non_pan_varieties(&self) -> Vec<&str> {
        let known = self.lang.pan_varieties();
        self.variety_labels
            .iter()
            .map(String::as_str)
            .filter(|v| !known.contains(v))
            .collect()
    }

    /// Sub-corpus of the authors at `indices`, keeping the parent's label sets.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        let mut authors: Vec<AuthorRecord> = indices.iter().map(|&i| self.authors[i].clone()).collect();
        authors.sort_by(|a, b| a.author_id.cmp(&b.author_id));
        Corpus {
            lang: self.lang,
            authors,
            gender_labels: self.gender_labels.clone(),
            variety_labels: self.variety_labels.clone(),
        }
    }

    /// Same authors with every label removed, as in a blind test set.
    pub fn unlabeled(&self) -> Corpus {
        Corpus {
            lang: self.lang,
            authors: self
                .authors
                .iter()
                .map(|a| AuthorRecord {
                    gender: None,
                    variety: None,
                    ..a.clone()
                })
                .collect(),
            gender_labels: Vec::new(),
            variety_labels: Vec::new(),
        }
    }
}

fn normalize_label(label: &str) -> String {
    label.trim().to_lowercase()
}

fn collect_labels<'a>(labels: impl Iterator<Item = &'a str>) -> Vec<String> {
    labels.collect::<BTreeSet<_>>().into_iter().map(str::to_owned).collect()
}

/// Author ids double as file stems, so path separators are rejected.
fn validate_author_id(id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(Error::validation("empty author id"));
    }
    if id.contains(['/', '\\', '\n', '\r']) || id == "." || id == ".." || id.contains(TRUTH_SEPARATOR) {
        return Err(Error::validation(format!(
            "author id {id:?} is not usable as a file name"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthRow {
    pub gender: String,
    pub variety: String,
}

pub fn read_truth(path: &Path) -> Result<BTreeMap<String, TruthRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(TRUTH_SEPARATOR).collect();
        let [id, gender, variety] = fields.as_slice() else {
            return Err(Error::format(
                path,
                n + 1,
                format!("expected author_id:::gender:::variety, got {} field(s)", fields.len()),
            ));
        };
        let row = TruthRow {
            gender: normalize_label(gender),
            variety: normalize_label(variety),
        };
        if rows.insert(id.trim().to_owned(), row).is_some() {
            return Err(Error::format(path, n + 1, format!("duplicate author id {id:?}")));
        }
    }
    Ok(rows)
}

/// Writes the truth file for a fully labeled corpus.
pub fn write_truth(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut out = String::new();
    for a in &corpus.authors {
        let (Some(g), Some(v)) = (&a.gender, &a.variety) else {
            return Err(Error::validation(format!("author {:?} is not labeled", a.author_id)));
        };
        out.push_str(&a.author_id);
        out.push_str(TRUTH_SEPARATOR);
        out.push_str(g);
        out.push_str(TRUTH_SEPARATOR);
        out.push_str(v);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// All `*.xml` files directly under `dir`, sorted by name.
pub fn author_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|ext| ext == "xml") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every author file under `root`. When a truth file is given its
/// labels replace any label attributes found in the author files.
pub fn load_corpus(root: &Path, truth: Option<&Path>) -> Result<Corpus> {
    let files = author_files(root)?;
    if files.is_empty() {
        return Err(Error::validation(format!(
            "no author files found in {}",
            root.display()
        )));
    }
    let mut authors = Vec::with_capacity(files.len());
    let mut seen = BTreeSet::new();
    for file in &files {
        let author = read_author_file(file)?;
        if !seen.insert(author.author_id.clone()) {
            return Err(Error::validation(format!(
                "duplicate author id {:?} (second occurrence in {})",
                author.author_id,
                file.display()
            )));
        }
        authors.push(author);
    }
    let lang = authors[0].lang;

    if let Some(truth_path) = truth {
        let mut rows = read_truth(truth_path)?;
        let missing: Vec<&str> = authors
            .iter()
            .map(|a| a.author_id.as_str())
            .filter(|id| !rows.contains_key(*id))
            .collect();
        let extra: Vec<&str> = rows
            .keys()
            .map(String::as_str)
            .filter(|id| !seen.contains(*id))
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            let mut orphans: Vec<&str> = missing.into_iter().chain(extra).collect();
            orphans.sort_unstable();
            return Err(Error::validation(format!(
                "truth file {} does not match the author files; {} orphan id(s): {}",
                truth_path.display(),
                orphans.len(),
                orphans.join(", ")
            )));
        }
        for a in &mut authors {
            let row = rows.remove(&a.author_id).expect("checked above");
            a.gender = Some(row.gender);
            a.variety = Some(row.variety);
        }
    }
    Corpus::new(lang, authors)
}

/// Writes one XML file per author plus `truth.txt` when fully labeled.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for a in &corpus.authors {
        write_author_file(a, &dir.join(format!("{}.xml", a.author_id)))?;
    }
    if corpus.is_labeled() {
        write_truth(corpus, &dir.join(TRUTH_FILE))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn author(id: &str, g: &str, v: &str) -> AuthorRecord {
        AuthorRecord::new(id, Lang::En, vec!["hello there".into()]).with_labels(g, v)
    }

    #[test]
    fn corpus_sorts_and_normalizes() {
        let c = Corpus::new(
            Lang::En,
            vec![author("b", "Male", "Canada"), author("a", "female", "IRELAND ")],
        )
        .unwrap();
        assert_eq!(c.ids().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(c.gender_labels, ["female", "male"]);
        assert_eq!(c.variety_labels, ["canada", "ireland"]);
        assert!(c.non_pan_varieties().is_empty());
        assert_eq!(c.author("b").unwrap().variety.as_deref(), Some("canada"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Corpus::new(Lang::En, vec![author("a", "male", "x"), author("a", "male", "y")]).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn mixed_languages_rejected() {
        let mut b = author("b", "male", "x");
        b.lang = Lang::Pt;
        assert!(Corpus::new(Lang::En, vec![author("a", "male", "x"), b]).is_err());
    }

    #[test]
    fn empty_documents_rejected() {
        let mut a = author("a", "male", "x");
        a.documents.clear();
        assert!(Corpus::new(Lang::En, vec![a]).is_err());
    }

    #[test]
    fn bad_ids_rejected() {
        for id in ["", "a/b", "..", "x:::y"] {
            assert!(Corpus::new(Lang::En, vec![author(id, "m", "v")]).is_err(), "{id:?}");
        }
    }

    #[test]
    fn lang_codes() {
        for l in Lang::ALL {
            assert_eq!(l.code().parse::<Lang>().unwrap(), l);
            let v = l.pan_varieties();
            assert!(v.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(Lang::Pt.pan_varieties(), ["brazil", "portugal"]);
        assert!("xx".parse::<Lang>().is_err());
    }

    #[test]
    fn truth_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.txt");
        fs::write(&p, "a:::male:::canada\nb:::male\n").unwrap();
        let err = read_truth(&p).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
        fs::write(&p, "a:::male:::canada\na:::female:::canada\n").unwrap();
        assert!(read_truth(&p).is_err());
    }
}
