//! The eight-member n-gram ensemble for one task, its per-member C tuning
//! by stratified cross-validation, and probability-sum fusion.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{AuthorRecord, Corpus, FoldAssignment};
use crate::error::{Error, Result};
use crate::features::{author_text, FeatureScheme, FeatureSpace, TermCounts};
use crate::linsvm::{train_multiclass, CalibratedLinearModel, MulticlassParams};
use crate::par;
use crate::sparse::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Gender,
    Variety,
}

impl Task {
    pub const BOTH: [Task; 2] = [Task::Gender, Task::Variety];

    pub fn name(self) -> &'static str {
        match self {
            Task::Gender => "gender",
            Task::Variety => "variety",
        }
    }

    pub fn label_of(self, author: &AuthorRecord) -> Option<&str> {
        match self {
            Task::Gender => author.gender.as_deref(),
            Task::Variety => author.variety.as_deref(),
        }
    }

    pub fn labels(self, corpus: &Corpus) -> &[String] {
        match self {
            Task::Gender => &corpus.gender_labels,
            Task::Variety => &corpus.variety_labels,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gender" => Ok(Task::Gender),
            "variety" => Ok(Task::Variety),
            _ => Err(Error::validation(format!("unknown task {s:?}"))),
        }
    }
}

/// `10^-5, 10^-4, …, 10^5`.
pub fn default_c_grid() -> Vec<f64> {
    (-5..=5)
        .map(|e| format!("1e{e}").parse().expect("valid literal"))
        .collect()
}

/// Label indices of every author for `task`; errors on unlabeled authors.
fn label_indices(corpus: &Corpus, task: Task) -> Result<Vec<usize>> {
    let labels = task.labels(corpus);
    corpus
        .authors
        .iter()
        .map(|a| {
            let label = task
                .label_of(a)
                .ok_or_else(|| Error::validation(format!("author {:?} has no {task} label", a.author_id)))?;
            labels
                .binary_search_by(|l| l.as_str().cmp(label))
                .map_err(|_| Error::validation(format!("label {label:?} missing from the {task} label set")))
        })
        .collect()
}

fn scheme_counts(corpus: &Corpus, scheme: FeatureScheme) -> Vec<TermCounts> {
    par::map(&corpus.authors, |a| TermCounts::of(&author_text(a), scheme))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c: f64,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberTuning {
    pub scheme: FeatureScheme,
    pub grid: Vec<GridPoint>,
    pub chosen_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub task: Task,
    pub members: Vec<MemberTuning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningParams {
    pub grid: Vec<f64>,
    pub multiclass: MulticlassParams,
}

impl Default for TuningParams {
    fn default() -> Self {
        TuningParams {
            grid: default_c_grid(),
            multiclass: MulticlassParams::default(),
        }
    }
}

impl TuningParams {
    fn sorted_grid(&self) -> Result<Vec<f64>> {
        if self.grid.is_empty() {
            return Err(Error::validation("empty C grid"));
        }
        if let Some(c) = self.grid.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::validation(format!("C grid values must be positive, got {c}")));
        }
        let mut grid = self.grid.clone();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        Ok(grid)
    }
}

/// Cross-validates every C in the grid for one member. The feature space
/// is refit on each training complement. The chosen C has the best mean
/// held-out accuracy, the smallest C winning ties.
pub fn tune_member(
    corpus: &Corpus,
    scheme: FeatureScheme,
    task: Task,
    folds: &FoldAssignment,
    params: &TuningParams,
) -> Result<MemberTuning> {
    let grid = params.sorted_grid()?;
    let y = label_indices(corpus, task)?;
    let labels = task.labels(corpus);
    if let Some(a) = corpus.authors.iter().find(|a| folds.fold_of(&a.author_id).is_none()) {
        return Err(Error::validation(format!("author {:?} has no fold", a.author_id)));
    }
    let counts = scheme_counts(corpus, scheme);

    type FoldData = (Vec<SparseVector>, Vec<usize>, Vec<SparseVector>, Vec<usize>);
    let fold_data: Vec<Result<FoldData>> = par::map_range(folds.k, |f| {
        let (train, test) = folds.split(corpus, f);
        let space = FeatureSpace::fit_counts(scheme, train.iter().map(|&i| &counts[i]))
            .map_err(|e| e.context(format!("({scheme}, fold {f})")))?;
        let vec = |idx: &[usize]| idx.iter().map(|&i| space.vectorize_counts(&counts[i])).collect();
        let ys = |idx: &[usize]| idx.iter().map(|&i| y[i]).collect();
        Ok((vec(&train), ys(&train), vec(&test), ys(&test)))
    });
    let fold_data: Vec<FoldData> = fold_data.into_iter().collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds.k).map(move |f| (g, f)))
        .collect();
    let accuracies = par::map(&jobs, |&(g, f)| -> Result<f64> {
        let (tx, ty, vx, vy) = &fold_data[f];
        let c = grid[g];
        let model = train_multiclass(tx, ty, labels, &params.multiclass.with_c(c))
            .map_err(|e| e.context(format!("({scheme}, C={c:e}, fold {f})")))?;
        if vx.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0usize;
        for (x, &truth) in vx.iter().zip(vy) {
            if model.predict(x)? == truth {
                correct += 1;
            }
        }
        Ok(correct as f64 / vx.len() as f64)
    });

    let mut points = Vec::with_capacity(grid.len());
    let mut it = accuracies.into_iter();
    for &c in &grid {
        let fold_accuracies: Vec<f64> = it.by_ref().take(folds.k).collect::<Result<_>>()?;
        let mean_accuracy = fold_accuracies.iter().sum::<f64>() / folds.k as f64;
        points.push(GridPoint {
            c,
            fold_accuracies,
            mean_accuracy,
        });
    }
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.mean_accuracy > points[best].mean_accuracy {
            best = i;
        }
    }
    Ok(MemberTuning {
        scheme,
        chosen_c: points[best].c,
        grid: points,
    })
}

/// Tunes all eight members.
pub fn tune_ensemble(
    corpus: &Corpus,
    task: Task,
    folds: &FoldAssignment,
    params: &TuningParams,
) -> Result<TuningReport> {
    let members = par::map(&FeatureScheme::ALL, |&s| tune_member(corpus, s, task, folds, params));
    Ok(TuningReport {
        task,
        members: members.into_iter().collect::<Result<_>>()?,
    })
}

impl TuningReport {
    pub fn chosen_cs(&self) -> BTreeMap<FeatureScheme, f64> {
        self.members.iter().map(|m| (m.scheme, m.chosen_c)).collect()
    }

    /// Tab-separated table: one row per (scheme, C) with fold accuracies,
    /// their mean and whether the C was chosen.
    pub fn to_tsv(&self) -> String {
        let k = self
            .members
            .first()
            .and_then(|m| m.grid.first())
            .map_or(0, |p| p.fold_accuracies.len());
        let mut out = format!("# task\t{}\nscheme\tc", self.task);
        for f in 1..=k {
            out.push_str(&format!("\tfold_{f}"));
        }
        out.push_str("\tmean\tchosen\n");
        for m in &self.members {
            for p in &m.grid {
                out.push_str(&format!("{}\t{:e}", m.scheme, p.c));
                for a in &p.fold_accuracies {
                    out.push_str(&format!("\t{a}"));
                }
                out.push_str(&format!("\t{}\t{}\n", p.mean_accuracy, u8::from(p.c == m.chosen_c)));
            }
        }
        out
    }

    pub fn from_tsv(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
        let bad = |n: usize, m: &str| Error::format(origin, n, m.to_owned());
        let (n, first) = lines.next().ok_or_else(|| bad(1, "empty tuning report"))?;
        let task: Task = first
            .strip_prefix("# task\t")
            .ok_or_else(|| bad(n, "expected `# task` line"))?
            .parse()
            .map_err(|e: Error| bad(n, &e.to_string()))?;
        let (n, header) = lines.next().ok_or_else(|| bad(2, "missing header"))?;
        let columns = header.split('\t').count();
        if columns < 5 {
            return Err(bad(n, "header needs scheme, c, fold columns, mean and chosen"));
        }
        let k = columns - 4;
        let mut members: Vec<MemberTuning> = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != columns {
                return Err(bad(n, &format!("expected {columns} columns, found {}", cells.len())));
            }
            let scheme: FeatureScheme = cells[0].parse().map_err(|e: Error| bad(n, &e.to_string()))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, &format!("bad number {s:?}")));
            let c = num(cells[1])?;
            let fold_accuracies = cells[2..2 + k].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
            let mean_accuracy = num(cells[2 + k])?;
            let chosen = match cells[3 + k] {
                "1" => true,
                "0" => false,
                other => return Err(bad(n, &format!("bad chosen flag {other:?}"))),
            };
            if members.last().is_none_or(|m| m.scheme != scheme) {
                members.push(MemberTuning {
                    scheme,
                    grid: Vec::new(),
                    chosen_c: f64::NAN,
                });
            }
            let m = members.last_mut().expect("just pushed");
            if chosen {
                m.chosen_c = c;
            }
            m.grid.push(GridPoint {
                c,
                fold_accuracies,
                mean_accuracy,
            });
        }
        if let Some(m) = members.iter().find(|m| m.chosen_c.is_nan()) {
            return Err(Error::format(origin, 0, format!("no chosen C for {}", m.scheme)));
        }
        Ok(TuningReport { task, members })
    }
}

/// One ensemble member: a vocabulary plus the calibrated model over it.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub space: FeatureSpace,
    pub model: CalibratedLinearModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    task: Task,
    labels: Vec<String>,
    members: Vec<Member>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    pub label: String,
    pub label_index: usize,
    /// Element-wise sum of the member distributions (not renormalised).
    pub fused: Vec<f64>,
    /// One distribution per member, in member order.
    pub member_probs: Vec<Vec<f64>>,
}

/// Adds the members' class probabilities and picks the largest sum; ties go
/// to the lexicographically smallest label.
///
/// Each class's values are summed in ascending order so that the result is
/// bit-identical under any permutation of the members.
pub fn fuse(member_probs: &[Vec<f64>], labels: &[String]) -> Result<(usize, Vec<f64>)> {
    if member_probs.is_empty() {
        return Err(Error::validation("nothing to fuse"));
    }
    if let Some(p) = member_probs.iter().find(|p| p.len() != labels.len()) {
        return Err(Error::validation(format!(
            "member distribution has {} entries for {} labels",
            p.len(),
            labels.len()
        )));
    }
    let mut fused = Vec::with_capacity(labels.len());
    let mut column = Vec::with_capacity(member_probs.len());
    for class in 0..labels.len() {
        column.clear();
        column.extend(member_probs.iter().map(|p| p[class]));
        column.sort_by(f64::total_cmp);
        fused.push(column.iter().sum::<f64>());
    }
    let mut best = 0;
    for i in 1..labels.len() {
        if fused[i] > fused[best] || (fused[i] == fused[best] && labels[i] < labels[best]) {
            best = i;
        }
    }
    Ok((best, fused))
}

/// Refits every member on the whole corpus with its tuned C.
pub fn train_ensemble(
    corpus: &Corpus,
    task: Task,
    tuned_cs: &BTreeMap<FeatureScheme, f64>,
    params: &MulticlassParams,
) -> Result<EnsembleModel> {
    if let Some(s) = FeatureScheme::ALL.iter().find(|s| !tuned_cs.contains_key(s)) {
        return Err(Error::validation(format!("no C given for member {s}")));
    }
    let y = label_indices(corpus, task)?;
    let labels = task.labels(corpus).to_vec();
    let members = par::map(&FeatureScheme::ALL, |&scheme| -> Result<Member> {
        let counts = scheme_counts(corpus, scheme);
        let space = FeatureSpace::fit_counts(scheme, &counts)?;
        let x: Vec<SparseVector> = counts.iter().map(|c| space.vectorize_counts(c)).collect();
        let c = tuned_cs[&scheme];
        let mut model = train_multiclass(&x, &y, &labels, &params.with_c(c))
            .map_err(|e| e.context(format!("({scheme}, C={c:e})")))?;
        model.scheme = Some(scheme);
        Ok(Member { space, model })
    });
    EnsembleModel::new(task, labels, members.into_iter().collect::<Result<_>>()?)
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    task: Task,
    labels: Vec<String>,
    members: Vec<ManifestMember>,
}

#[derive(Serialize, Deserialize)]
struct ManifestMember {
    scheme: FeatureScheme,
    c: f64,
    features: String,
    model: String,
}

const ENSEMBLE_FORMAT: &str = "authprof-ensemble v1";
const MANIFEST: &str = "manifest.json";

impl EnsembleModel {
    /// Checks that the members are exactly the eight schemes, in canonical
    /// order, and agree on labels and dimensions.
    pub fn new(task: Task, labels: Vec<String>, members: Vec<Member>) -> Result<Self> {
        let schemes: Vec<FeatureScheme> = members.iter().map(|m| m.space.scheme()).collect();
        if schemes != FeatureScheme::ALL {
            return Err(Error::validation(format!(
                "an ensemble needs the eight schemes {:?}, got {:?}",
                FeatureScheme::ALL.map(|s| s.to_string()),
                schemes.iter().map(ToString::to_string).collect::<Vec<_>>()
            )));
        }
        for m in &members {
            if m.model.labels != labels {
                return Err(Error::validation(format!(
                    "member {} has a different label order",
                    m.space.scheme()
                )));
            }
            if m.model.dimension != m.space.dimension() {
                return Err(Error::validation(format!(
                    "member {} model dimension {} does not match its vocabulary ({})",
                    m.space.scheme(),
                    m.model.dimension,
                    m.space.dimension()
                )));
            }
            if m.model.scheme.is_some_and(|s| s != m.space.scheme()) {
                return Err(Error::validation(format!(
                    "member {} model was trained for another scheme",
                    m.space.scheme()
                )));
            }
        }
        Ok(EnsembleModel { task, labels, members })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn predict(&self, author: &AuthorRecord) -> Result<EnsemblePrediction> {
        self.predict_text(&author_text(author))
    }

    pub fn predict_text(&self, text: &str) -> Result<EnsemblePrediction> {
        let member_probs = self
            .members
            .iter()
            .map(|m| m.model.predict_proba(&m.space.vectorize(text)))
            .collect::<Result<Vec<_>>>()?;
        let (label_index, fused) = fuse(&member_probs, &self.labels)?;
        Ok(EnsemblePrediction {
            label: self.labels[label_index].clone(),
            label_index,
            fused,
            member_probs,
        })
    }

    /// Predictions for every author, in corpus order.
    pub fn predict_corpus(&self, corpus: &Corpus) -> Result<Vec<EnsemblePrediction>> {
        par::map(&corpus.authors, |a| self.predict(a)).into_iter().collect()
    }

    /// Writes `manifest.json` plus a `.features` and `.model` file per member.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = Manifest {
            format: ENSEMBLE_FORMAT.into(),
            task: self.task,
            labels: self.labels.clone(),
            members: Vec::new(),
        };
        for m in &self.members {
            let scheme = m.space.scheme();
            let entry = ManifestMember {
                scheme,
                c: m.model.members.first().map_or(f64::NAN, |b| b.model.c),
                features: format!("{scheme}.features"),
                model: format!("{scheme}.model"),
            };
            m.space.save(&dir.join(&entry.features))?;
            m.model.save(&dir.join(&entry.model))?;
            manifest.members.push(entry);
        }
        let path = dir.join(MANIFEST);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::format(&path, e.line(), e.to_string()))?;
        if manifest.format != ENSEMBLE_FORMAT {
            return Err(Error::format(
                &path,
                0,
                format!("unsupported format {:?}", manifest.format),
            ));
        }
        let mut members = Vec::with_capacity(manifest.members.len());
        for entry in &manifest.members {
            let space = FeatureSpace::load(&dir.join(&entry.features))?;
            let model = CalibratedLinearModel::load(&dir.join(&entry.model))?;
            if space.scheme() != entry.scheme {
                return Err(Error::format(
                    &path,
                    0,
                    format!("{} holds scheme {}", entry.features, space.scheme()),
                ));
            }
            members.push(Member { space, model });
        }
        EnsembleModel::new(manifest.task, manifest.labels, members)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn grid_has_eleven_powers_of_ten() {
        let g = default_c_grid();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 1e-5);
        assert_eq!(g[5], 1.0);
        assert_eq!(g[10], 1e5);
    }

    #[test]
    fn fuse_adds_and_picks_the_largest() {
        let (best, fused) = fuse(&[vec![0.6, 0.4], vec![0.7, 0.3]], &labels(&["a", "b"])).unwrap();
        assert_eq!(best, 0);
        assert!((fused[0] - 1.3).abs() < 1e-15 && (fused[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn fuse_ties_go_to_smallest_label() {
        let uniform = vec![vec![0.25; 4]; 8];
        let (best, fused) = fuse(&uniform, &labels(&["d", "b", "a", "c"])).unwrap();
        assert_eq!(best, 2);
        assert_eq!(fused, [2.0; 4]);
    }

    #[test]
    fn fuse_rejects_mismatched_lengths() {
        assert!(fuse(&[vec![0.5, 0.5], vec![1.0]], &labels(&["a", "b"])).is_err());
        assert!(fuse(&[], &labels(&["a", "b"])).is_err());
    }

    #[test]
    fn task_names() {
        for t in Task::BOTH {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
        }
    }

    #[test]
    fn tuning_tsv_round_trip() {
        let report = TuningReport {
            task: Task::Variety,
            members: vec![MemberTuning {
                scheme: "word-2".parse().unwrap(),
                grid: vec![
                    GridPoint {
                        c: 1e-5,
                        fold_accuracies: vec![0.5, 0.25, 1.0 / 3.0],
                        mean_accuracy: 0.3611111111111111,
                    },
                    GridPoint {
                        c: 10.0,
                        fold_accuracies: vec![1.0, 1.0, 0.9],
                        mean_accuracy: 0.9666666666666667,
                    },
                ],
                chosen_c: 10.0,
            }],
        };
        let tsv = report.to_tsv();
        assert!(tsv.starts_with("# task\tvariety\nscheme\tc\tfold_1\tfold_2\tfold_3\tmean\tchosen\n"));
        assert_eq!(TuningReport::from_tsv(&tsv, Path::new("t")).unwrap(), report);
    }
}
