//! Accuracy scoring (gender, variety, joint, average), confusion matrices,
//! the majority-class and bag-of-words baselines, and report rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Lang, PredictedAuthor};
use crate::ensemble::Task;
use crate::error::{Error, Result};
use crate::features::{author_text, FeatureKind, FeatureScheme, FeatureSpace};
use crate::linsvm::{train_multiclass, MulticlassParams};

/// Vocabulary size of the bag-of-words baseline.
pub const BOW_VOCABULARY: usize = 1000;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedLabels {
    pub gender: Option<String>,
    pub variety: Option<String>,
}

impl PredictedLabels {
    fn get(&self, task: Task) -> Option<&str> {
        match task {
            Task::Gender => self.gender.as_deref(),
            Task::Variety => self.variety.as_deref(),
        }
    }

    fn set(&mut self, task: Task, label: String) {
        match task {
            Task::Gender => self.gender = Some(label),
            Task::Variety => self.variety = Some(label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub lang: Lang,
    pub predictions: BTreeMap<String, PredictedLabels>,
}

impl PredictionSet {
    pub fn new(lang: Lang) -> Self {
        PredictionSet {
            lang,
            predictions: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, author_id: impl Into<String>, task: Task, label: impl Into<String>) {
        self.predictions
            .entry(author_id.into())
            .or_default()
            .set(task, label.into());
    }

    /// Adds `other`'s labels; labels present in both are taken from `other`.
    pub fn merge(&mut self, other: PredictionSet) {
        for (id, labels) in other.predictions {
            let entry = self.predictions.entry(id).or_default();
            if labels.gender.is_some() {
                entry.gender = labels.gender;
            }
            if labels.variety.is_some() {
                entry.variety = labels.variety;
            }
        }
    }

    pub fn from_files(lang: Lang, preds: impl IntoIterator<Item = PredictedAuthor>) -> Result<Self> {
        let mut set = PredictionSet::new(lang);
        for p in preds {
            if p.lang != lang {
                return Err(Error::validation(format!(
                    "prediction for {:?} is for {} but the set is {}",
                    p.author_id, p.lang, lang
                )));
            }
            let labels = PredictedLabels {
                gender: p.gender.map(|g| g.trim().to_lowercase()),
                variety: p.variety.map(|v| v.trim().to_lowercase()),
            };
            if set.predictions.insert(p.author_id.clone(), labels).is_some() {
                return Err(Error::validation(format!("duplicate prediction for {:?}", p.author_id)));
            }
        }
        Ok(set)
    }

    pub fn to_files(&self) -> Vec<PredictedAuthor> {
        self.predictions
            .iter()
            .map(|(id, l)| PredictedAuthor {
                author_id: id.clone(),
                lang: self.lang,
                variety: l.variety.clone(),
                gender: l.gender.clone(),
            })
            .collect()
    }
}

/// Rows are true labels, columns predicted labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    fn build<'a>(pairs: impl Iterator<Item = (&'a str, &'a str)> + Clone) -> Self {
        let labels: Vec<String> = pairs
            .clone()
            .flat_map(|(t, p)| [t, p])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_owned)
            .collect();
        let pos = |l: &str| labels.binary_search_by(|x| x.as_str().cmp(l)).expect("label collected");
        let mut counts = vec![vec![0; labels.len()]; labels.len()];
        for (t, p) in pairs {
            counts[pos(t)][pos(p)] += 1;
        }
        Confusion { labels, counts }
    }

    pub fn row_total(&self, label: &str) -> usize {
        self.labels
            .iter()
            .position(|l| l == label)
            .map_or(0, |i| self.counts[i].iter().sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub lang: Lang,
    pub n_authors: usize,
    pub gender_acc: f64,
    pub variety_acc: f64,
    /// Both labels right at once.
    pub joint_acc: f64,
    /// Mean of gender, variety and joint accuracy.
    pub average_acc: f64,
    pub gender_confusion: Confusion,
    pub variety_confusion: Confusion,
}

pub fn score(truth: &Corpus, preds: &PredictionSet) -> Result<ScoreReport> {
    let truth_ids: BTreeSet<&str> = truth.ids().collect();
    let pred_ids: BTreeSet<&str> = preds.predictions.keys().map(String::as_str).collect();
    if truth_ids != pred_ids {
        let diff: Vec<&str> = truth_ids.symmetric_difference(&pred_ids).copied().collect();
        return Err(Error::validation(format!(
            "predictions and truth cover different authors; {} id(s) differ: {}",
            diff.len(),
            diff.join(", ")
        )));
    }

    let mut rows = Vec::with_capacity(truth.len());
    for a in &truth.authors {
        let p = &preds.predictions[&a.author_id];
        let pair = |task: Task| -> Result<(&str, &str)> {
            let t = task
                .label_of(a)
                .ok_or_else(|| Error::validation(format!("truth for {:?} lacks {task}", a.author_id)))?;
            let q = p
                .get(task)
                .ok_or_else(|| Error::validation(format!("prediction for {:?} lacks {task}", a.author_id)))?;
            Ok((t, q))
        };
        rows.push((pair(Task::Gender)?, pair(Task::Variety)?));
    }

    let n = rows.len() as f64;
    let gender_ok = rows.iter().filter(|(g, _)| g.0 == g.1).count();
    let variety_ok = rows.iter().filter(|(_, v)| v.0 == v.1).count();
    let joint_ok = rows.iter().filter(|(g, v)| g.0 == g.1 && v.0 == v.1).count();
    let gender_acc = gender_ok as f64 / n;
    let variety_acc = variety_ok as f64 / n;
    let joint_acc = joint_ok as f64 / n;
    Ok(ScoreReport {
        lang: truth.lang,
        n_authors: rows.len(),
        gender_acc,
        variety_acc,
        joint_acc,
        average_acc: (gender_acc + variety_acc + joint_acc) / 3.0,
        gender_confusion: Confusion::build(rows.iter().map(|(g, _)| *g)),
        variety_confusion: Confusion::build(rows.iter().map(|(_, v)| *v)),
    })
}

/// Most frequent label; ties go to the lexicographically smallest.
fn majority<'a>(labels: impl Iterator<Item = &'a str>) -> Option<&'a str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for (l, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((l, c));
        }
    }
    best.map(|(l, _)| l)
}

/// Majority-class baseline: every test author gets the training corpus's
/// most frequent gender and variety.
pub fn stat_baseline<'a>(train: &Corpus, test_ids: impl IntoIterator<Item = &'a str>) -> Result<PredictionSet> {
    let gender = majority(train.authors.iter().filter_map(|a| a.gender.as_deref()))
        .ok_or_else(|| Error::validation("training corpus has no gender labels"))?;
    let variety = majority(train.authors.iter().filter_map(|a| a.variety.as_deref()))
        .ok_or_else(|| Error::validation("training corpus has no variety labels"))?;
    let mut set = PredictionSet::new(train.lang);
    for id in test_ids {
        set.insert(id, Task::Gender, gender);
        set.insert(id, Task::Variety, variety);
    }
    Ok(set)
}

/// Bag-of-words baseline for one task: the most frequent word unigrams of
/// the training texts, L2-normalised counts, and one calibrated linear SVM
/// with C = 1.
pub fn bow_baseline(train: &Corpus, test: &Corpus, task: Task) -> Result<PredictionSet> {
    let scheme = FeatureScheme::new(FeatureKind::Word, 1)?;
    let texts: Vec<String> = train.authors.iter().map(author_text).collect();
    let space = FeatureSpace::fit_top_k(scheme, texts.iter().map(String::as_str), BOW_VOCABULARY)?;
    if space.dimension() < BOW_VOCABULARY {
        log::warn!(
            "bag-of-words baseline: only {} distinct terms, using all of them",
            space.dimension()
        );
    }
    let labels = task.labels(train).to_vec();
    let mut x = Vec::with_capacity(texts.len());
    let mut y = Vec::with_capacity(texts.len());
    for (a, text) in train.authors.iter().zip(&texts) {
        let label = task
            .label_of(a)
            .ok_or_else(|| Error::validation(format!("training author {:?} lacks {task}", a.author_id)))?;
        y.push(
            labels
                .binary_search_by(|l| l.as_str().cmp(label))
                .expect("label set covers corpus"),
        );
        x.push(space.vectorize(text));
    }
    let model = train_multiclass(&x, &y, &labels, &MulticlassParams::default().with_c(1.0))?;
    let mut set = PredictionSet::new(test.lang);
    for a in &test.authors {
        let best = model.predict(&space.vectorize(&author_text(a)))?;
        set.insert(a.author_id.clone(), task, labels[best].clone());
    }
    Ok(set)
}

/// Cross-language means. The two overall figures differ in what they
/// average: the per-language three-way averages, or just the gender and
/// variety means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub gender: f64,
    pub variety: f64,
    pub joint: f64,
    pub mean_of_language_averages: f64,
    pub mean_of_task_means: f64,
}

pub fn summarize(reports: &[ScoreReport]) -> Option<Summary> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&ScoreReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let gender = mean(|r| r.gender_acc);
    let variety = mean(|r| r.variety_acc);
    Some(Summary {
        gender,
        variety,
        joint: mean(|r| r.joint_acc),
        mean_of_language_averages: mean(|r| r.average_acc),
        mean_of_task_means: (gender + variety) / 2.0,
    })
}

/// A named system's accuracy for one task per language, e.g. a baseline row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub system: String,
    pub accuracy: BTreeMap<Lang, f64>,
}

impl TaskRow {
    pub fn average(&self) -> f64 {
        self.accuracy.values().sum::<f64>() / self.accuracy.len().max(1) as f64
    }
}

fn by_name(langs: impl Iterator<Item = Lang>) -> Vec<Lang> {
    let mut v: Vec<Lang> = langs.collect::<BTreeSet<_>>().into_iter().collect();
    v.sort_by_key(|l| l.name());
    v
}

/// One row per language: gender, variety, joint and average accuracy.
pub fn render_language_table(reports: &[ScoreReport]) -> String {
    let mut sorted: Vec<&ScoreReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.lang.name());
    let mut out = format!(
        "{:<12}{:>10}{:>10}{:>10}{:>10}\n",
        "Language", "Gender", "Variety", "Joint", "Average"
    );
    for r in sorted {
        let _ = writeln!(
            out,
            "{:<12}{:>10.4}{:>10.4}{:>10.4}{:>10.4}",
            r.lang.name(),
            r.gender_acc,
            r.variety_acc,
            r.joint_acc,
            r.average_acc
        );
    }
    if let Some(s) = summarize(reports) {
        let _ = writeln!(
            out,
            "{:<12}{:>10.4}{:>10.4}{:>10.4}{:>10.4}",
            "Mean", s.gender, s.variety, s.joint, s.mean_of_language_averages
        );
        let _ = writeln!(out, "Mean of gender and variety means: {:.4}", s.mean_of_task_means);
    }
    out
}

/// One row per system with a column per language and their average.
pub fn render_task_table(task: Task, rows: &[TaskRow]) -> String {
    let langs = by_name(rows.iter().flat_map(|r| r.accuracy.keys().copied()));
    let w = rows.iter().map(|r| r.system.chars().count()).max().unwrap_or(0).max(6) + 2;
    let mut out = format!("{} accuracy\n{:<w$}", capitalize(task.name()), "System");
    for l in &langs {
        let _ = write!(out, "{:>12}", l.name());
    }
    let _ = writeln!(out, "{:>12}", "Average");
    for r in rows {
        let _ = write!(out, "{:<w$}", r.system);
        for l in &langs {
            match r.accuracy.get(l) {
                Some(a) => {
                    let _ = write!(out, "{a:>12.4}");
                }
                None => {
                    let _ = write!(out, "{:>12}", "-");
                }
            }
        }
        let _ = writeln!(out, "{:>12.4}", r.average());
    }
    out
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

pub fn render_confusion(title: &str, c: &Confusion) -> String {
    let width = c.labels.iter().map(|l| l.chars().count()).max().unwrap_or(0).max(6) + 2;
    let mut out = format!("{title} (rows: truth, columns: predicted)\n{:<width$}", "");
    for l in &c.labels {
        let _ = write!(out, "{l:>width$}");
    }
    out.push('\n');
    for (l, row) in c.labels.iter().zip(&c.counts) {
        let _ = write!(out, "{l:<width$}");
        for n in row {
            let _ = write!(out, "{n:>width$}");
        }
        out.push('\n');
    }
    out
}
