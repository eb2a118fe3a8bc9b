//! Linear SVMs: binary dual coordinate descent, Platt calibration and a
//! one-vs-rest multiclass wrapper producing class probabilities.

mod platt;
mod solver;

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{escape_line, unescape_line, FeatureScheme};
use crate::par;
use crate::sparse::SparseVector;

pub use platt::{fit_platt, platt_targets, PlattCalibrator};
pub use solver::{
    dual_objective, primal_objective, train_binary, train_binary_traced, BinaryLinearModel, SolverParams, SolverTrace,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MulticlassParams {
    pub solver: SolverParams,
    /// Folds used to produce out-of-fold scores for calibration.
    pub calibration_folds: usize,
    /// Seeds the calibration split.
    pub seed: u64,
}

impl Default for MulticlassParams {
    fn default() -> Self {
        MulticlassParams {
            solver: SolverParams::default(),
            calibration_folds: 3,
            seed: 0,
        }
    }
}

impl MulticlassParams {
    pub fn with_c(self, c: f64) -> Self {
        MulticlassParams {
            solver: self.solver.with_c(c),
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsRest {
    pub model: BinaryLinearModel,
    pub platt: PlattCalibrator,
}

/// One calibrated binary model per label, all over the same feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedLinearModel {
    pub scheme: Option<FeatureScheme>,
    pub labels: Vec<String>,
    pub dimension: usize,
    pub members: Vec<OneVsRest>,
}

fn compare_vectors(a: &SparseVector, b: &SparseVector) -> Ordering {
    for ((ia, va), (ib, vb)) in a.iter().zip(b.iter()) {
        let ord = ia.cmp(&ib).then_with(|| va.total_cmp(&vb));
        if ord != Ordering::Equal {
            return ord;
        }
    }
    a.nnz().cmp(&b.nnz())
}

/// Stratified fold id per position, dealt round-robin after a seeded shuffle.
fn calibration_split(y: &[usize], n_labels: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; y.len()];
    let mut next = 0;
    for label in 0..n_labels {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
        members.shuffle(&mut rng);
        for i in members {
            fold[i] = next;
            next = (next + 1) % k;
        }
    }
    fold
}

fn binary_targets(y: &[usize], label: usize) -> Vec<i8> {
    y.iter().map(|&l| if l == label { 1 } else { -1 }).collect()
}

/// Trains one-vs-rest SVMs for `labels` and calibrates each on out-of-fold
/// decision scores. `y[i]` indexes into `labels`.
///
/// Instances are put into a canonical order first, so the result does not
/// depend on the order of the training set.
pub fn train_multiclass(
    x: &[SparseVector],
    y: &[usize],
    labels: &[String],
    params: &MulticlassParams,
) -> Result<CalibratedLinearModel> {
    if labels.len() < 2 {
        return Err(Error::validation("multiclass training needs at least two labels"));
    }
    if labels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("labels must be sorted and distinct"));
    }
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "{} examples but {} labels",
            x.len(),
            y.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= labels.len()) {
        return Err(Error::validation(format!("label index {bad} out of range")));
    }
    let k = params.calibration_folds;
    if k < 2 {
        return Err(Error::validation("calibration needs at least two folds"));
    }
    for (li, label) in labels.iter().enumerate() {
        let n = y.iter().filter(|&&l| l == li).count();
        if n < k {
            return Err(Error::validation(format!(
                "label {label:?} has {n} example(s); at least {k} are needed for out-of-fold calibration"
            )));
        }
    }
    let dim = x[0].dim();
    if let Some(i) = x.iter().position(|v| v.dim() != dim) {
        return Err(Error::validation(format!(
            "example {i} has dimension {} (expected {dim})",
            x[i].dim()
        )));
    }

    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| y[a].cmp(&y[b]).then_with(|| compare_vectors(&x[a], &x[b])));
    let xs: Vec<SparseVector> = order.iter().map(|&i| x[i].clone()).collect();
    let ys: Vec<usize> = order.iter().map(|&i| y[i]).collect();
    let fold = calibration_split(&ys, labels.len(), k, params.seed);

    let n_labels = labels.len();
    // tasks 0..k*n_labels: (fold, label) calibration runs; then one full fit per label
    let outputs = par::map_range(
        (k + 1) * n_labels,
        |task| -> Result<(Vec<usize>, Vec<f64>, Option<BinaryLinearModel>)> {
            let label = task % n_labels;
            let f = task / n_labels;
            if f == k {
                let model = train_binary(&xs, &binary_targets(&ys, label), &params.solver)?;
                return Ok((Vec::new(), Vec::new(), Some(model)));
            }
            let (train, held): (Vec<usize>, Vec<usize>) = (0..xs.len()).partition(|&i| fold[i] != f);
            let tx: Vec<SparseVector> = train.iter().map(|&i| xs[i].clone()).collect();
            let ty: Vec<i8> = train.iter().map(|&i| if ys[i] == label { 1 } else { -1 }).collect();
            let model = train_binary(&tx, &ty, &params.solver)?;
            let scores = held.iter().map(|&i| model.decision_unchecked(&xs[i])).collect();
            Ok((held, scores, None))
        },
    );

    let mut oof = vec![vec![0.0; xs.len()]; n_labels];
    let mut finals: Vec<Option<BinaryLinearModel>> = vec![None; n_labels];
    for (task, out) in outputs.into_iter().enumerate() {
        let label = task % n_labels;
        let (held, scores, model) = out.map_err(|e| e.context(format!("label {:?}", labels[label])))?;
        for (i, s) in held.into_iter().zip(scores) {
            oof[label][i] = s;
        }
        if model.is_some() {
            finals[label] = model;
        }
    }

    let mut members = Vec::with_capacity(n_labels);
    for (label, model) in finals.into_iter().enumerate() {
        let platt = fit_platt(&oof[label], &binary_targets(&ys, label))
            .map_err(|e| e.context(format!("calibrating label {:?}", labels[label])))?;
        members.push(OneVsRest {
            model: model.expect("every label has a full fit"),
            platt,
        });
    }
    Ok(CalibratedLinearModel {
        scheme: None,
        labels: labels.to_vec(),
        dimension: dim,
        members,
    })
}

/// Index of the largest value; ties go to the lower index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl CalibratedLinearModel {
    fn check_dim(&self, x: &SparseVector) -> Result<()> {
        if x.dim() != self.dimension {
            return Err(Error::validation(format!(
                "dimension mismatch: model has {}, input has {}",
                self.dimension,
                x.dim()
            )));
        }
        Ok(())
    }

    pub fn decision_scores(&self, x: &SparseVector) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.members.iter().map(|m| m.model.decision_unchecked(x)).collect())
    }

    /// Per-label calibrated probabilities normalised to sum to one. Falls
    /// back to the uniform distribution if every raw probability underflows.
    pub fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>> {
        let raw: Vec<f64> = self
            .decision_scores(x)?
            .into_iter()
            .zip(&self.members)
            .map(|(s, m)| m.platt.probability(s))
            .collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Ok(vec![1.0 / raw.len() as f64; raw.len()]);
        }
        Ok(raw.into_iter().map(|p| p / total).collect())
    }

    /// Index into `labels` of the most probable label.
    pub fn predict(&self, x: &SparseVector) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MODEL_MAGIC);
        out.push('\n');
        match self.scheme {
            Some(s) => out.push_str(&format!("scheme {s}\n")),
            None => out.push_str("scheme none\n"),
        }
        out.push_str(&format!("dimension {}\nlabels {}\n", self.dimension, self.labels.len()));
        for (label, m) in self.labels.iter().zip(&self.members) {
            out.push_str(&format!("label {}\n", escape_line(label)));
            out.push_str(&format!("c {}\n", m.model.c));
            out.push_str(&format!("bias {}\n", m.model.bias));
            out.push_str(&format!("platt {} {}\n", m.platt.a, m.platt.b));
            let nnz: Vec<String> = m
                .model
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| format!("{i}:{w}"))
                .collect();
            out.push_str(&format!("weights {}", nnz.len()));
            for entry in nnz {
                out.push(' ');
                out.push_str(&entry);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
        let mut next = |key: &str| -> Result<(usize, String)> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| Error::format(origin, 0, format!("unexpected end of file, expected {key:?}")))?;
            if key.is_empty() {
                return Ok((n, line.to_owned()));
            }
            let rest = line
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| Error::format(origin, n, format!("expected {key:?}")))?;
            Ok((n, rest.to_owned()))
        };
        let num = |n: usize, s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format(origin, n, format!("bad number {s:?}")))
        };
        let count = |n: usize, s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::format(origin, n, format!("bad count {s:?}")))
        };

        let (n, magic) = next("")?;
        if magic != MODEL_MAGIC {
            return Err(Error::format(origin, n, format!("expected {MODEL_MAGIC:?} header")));
        }
        let (n, scheme) = next("scheme")?;
        let scheme = match scheme.as_str() {
            "none" => None,
            s => Some(s.parse().map_err(|e: Error| Error::format(origin, n, e.to_string()))?),
        };
        let (n, dim) = next("dimension")?;
        let dimension = count(n, &dim)?;
        let (n, n_labels) = next("labels")?;
        let n_labels = count(n, &n_labels)?;

        let mut labels = Vec::with_capacity(n_labels);
        let mut members = Vec::with_capacity(n_labels);
        for _ in 0..n_labels {
            let (n, label) = next("label")?;
            labels.push(unescape_line(&label).map_err(|m| Error::format(origin, n, m))?);
            let (n, c) = next("c")?;
            let c = num(n, &c)?;
            let (n, bias) = next("bias")?;
            let bias = num(n, &bias)?;
            let (n, ab) = next("platt")?;
            let (a, b) = ab
                .split_once(' ')
                .ok_or_else(|| Error::format(origin, n, "expected `platt A B`"))?;
            let platt = PlattCalibrator {
                a: num(n, a)?,
                b: num(n, b)?,
            };
            let (n, w) = next("weights")?;
            let mut parts = w.split(' ');
            let nnz = count(n, parts.next().unwrap_or_default())?;
            let mut weights = vec![0.0; dimension];
            let mut seen = 0;
            for part in parts {
                let (i, v) = part
                    .split_once(':')
                    .ok_or_else(|| Error::format(origin, n, format!("bad weight entry {part:?}")))?;
                let i = count(n, i)?;
                if i >= dimension {
                    return Err(Error::format(origin, n, format!("weight index {i} out of range")));
                }
                weights[i] = num(n, v)?;
                seen += 1;
            }
            if seen != nnz {
                return Err(Error::format(
                    origin,
                    n,
                    format!("declared {nnz} weights, found {seen}"),
                ));
            }
            members.push(OneVsRest {
                model: BinaryLinearModel { weights, bias, c },
                platt,
            });
        }
        Ok(CalibratedLinearModel {
            scheme,
            labels,
            dimension,
            members,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CalibratedLinearModel::from_text(&text, path)
    }
}

const MODEL_MAGIC: &str = "authprof-linear v1";
