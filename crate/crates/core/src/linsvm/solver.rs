//! L2-regularised hinge-loss SVM trained in the dual by coordinate descent.
//!
//! The bias is folded in as an extra feature of constant value 1, so it is
//! regularised with the weights and the dual has only box constraints
//! `0 <= alpha_i <= C`, each coordinate step being a clipped Newton step.
//! Shrinking follows the usual projected-gradient heuristics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub c: f64,
    /// Stop once the largest projected-gradient violation drops below this.
    pub tol: f64,
    pub max_epochs: usize,
    /// Seeds the per-epoch coordinate permutation.
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            c: 1.0,
            tol: 1e-4,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

impl SolverParams {
    pub fn with_c(self, c: f64) -> Self {
        SolverParams { c, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::validation(format!(
                "C must be positive and finite, got {}",
                self.c
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::validation(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::validation("max_epochs must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

impl BinaryLinearModel {
    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    /// `w·x + b`
    pub fn decision(&self, x: &SparseVector) -> Result<f64> {
        if x.dim() != self.weights.len() {
            return Err(Error::validation(format!(
                "dimension mismatch: model has {}, input has {}",
                self.weights.len(),
                x.dim()
            )));
        }
        Ok(self.decision_unchecked(x))
    }

    #[inline]
    pub(crate) fn decision_unchecked(&self, x: &SparseVector) -> f64 {
        x.dot_dense(&self.weights) + self.bias
    }
}

/// What the solver did, for diagnostics and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub alphas: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
    /// Largest projected-gradient magnitude seen in the final epoch.
    pub final_violation: f64,
    /// Dual objective after every epoch; empty unless recording was requested.
    pub dual_objectives: Vec<f64>,
}

fn validate_problem(x: &[SparseVector], y: &[i8]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::validation("no training examples"));
    }
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "{} examples but {} labels",
            x.len(),
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1 && v != -1) {
        return Err(Error::validation(format!("binary labels must be +1 or -1, got {bad}")));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(Error::validation("binary training needs both classes"));
    }
    let dim = x[0].dim();
    for (i, xi) in x.iter().enumerate() {
        if xi.dim() != dim {
            return Err(Error::validation(format!(
                "example {i} has dimension {} (expected {dim})",
                xi.dim()
            )));
        }
        if !xi.is_finite() {
            return Err(Error::validation(format!("example {i} has non-finite feature values")));
        }
    }
    Ok(dim)
}

pub fn train_binary(x: &[SparseVector], y: &[i8], params: &SolverParams) -> Result<BinaryLinearModel> {
    train_binary_traced(x, y, params, false).map(|(m, _)| m)
}

/// As [`train_binary`], also returning the dual variables and, when
/// `record_objective` is set, the dual objective after each epoch.
pub fn train_binary_traced(
    x: &[SparseVector],
    y: &[i8],
    params: &SolverParams,
    record_objective: bool,
) -> Result<(BinaryLinearModel, SolverTrace)> {
    params.validate()?;
    let dim = validate_problem(x, y)?;
    let l = x.len();
    let c = params.c;
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut alpha = vec![0.0; l];
    let qd: Vec<f64> = x.iter().map(|xi| xi.norm_sq() + 1.0).collect();

    let mut index: Vec<usize> = (0..l).collect();
    let mut active = l;
    let mut pg_max_old = f64::INFINITY;
    let mut pg_min_old = f64::NEG_INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut epochs = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;
    let mut objectives = Vec::new();

    while epochs < params.max_epochs {
        index[..active].shuffle(&mut rng);
        let mut pg_max_new = f64::NEG_INFINITY;
        let mut pg_min_new = f64::INFINITY;

        let mut s = 0;
        while s < active {
            let i = index[s];
            let g = yf[i] * (x[i].dot_dense(&w) + b) - 1.0;
            let mut pg = 0.0;
            if alpha[i] == 0.0 {
                if g > pg_max_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                } else if g < 0.0 {
                    pg = g;
                }
            } else if alpha[i] == c {
                if g < pg_min_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                } else if g > 0.0 {
                    pg = g;
                }
            } else {
                pg = g;
            }
            pg_max_new = pg_max_new.max(pg);
            pg_min_new = pg_min_new.min(pg);

            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, c);
                let d = (alpha[i] - old) * yf[i];
                x[i].axpy_into(d, &mut w);
                b += d;
            }
            s += 1;
        }
        epochs += 1;
        if record_objective {
            objectives.push(dual_value(&alpha, &w, b));
        }

        // max |PG| over the coordinates visited this epoch
        violation = pg_max_new.max(-pg_min_new);
        if violation < params.tol {
            if active == l {
                converged = true;
                break;
            }
            active = l;
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
            continue;
        }
        pg_max_old = if pg_max_new <= 0.0 { f64::INFINITY } else { pg_max_new };
        pg_min_old = if pg_min_new >= 0.0 {
            f64::NEG_INFINITY
        } else {
            pg_min_new
        };
    }
    if !converged {
        log::debug!("dual coordinate descent stopped after {epochs} epochs (violation {violation:.3e}, C={c})");
    }

    let model = BinaryLinearModel { weights: w, bias: b, c };
    let trace = SolverTrace {
        alphas: alpha,
        epochs,
        converged,
        final_violation: violation.max(0.0),
        dual_objectives: objectives,
    };
    Ok((model, trace))
}

fn dual_value(alpha: &[f64], w: &[f64], b: f64) -> f64 {
    let norm_sq: f64 = w.iter().map(|v| v * v).sum::<f64>() + b * b;
    alpha.iter().sum::<f64>() - 0.5 * norm_sq
}

/// `½(‖w‖² + b²) + C Σ max(0, 1 − y (w·x + b))`
pub fn primal_objective(model: &BinaryLinearModel, x: &[SparseVector], y: &[i8]) -> f64 {
    let reg = 0.5 * (model.weights.iter().map(|v| v * v).sum::<f64>() + model.bias * model.bias);
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| (1.0 - f64::from(yi) * model.decision_unchecked(xi)).max(0.0))
        .sum();
    reg + model.c * loss
}

/// Dual objective `Σα − ½‖Σ α_i y_i (x_i, 1)‖²`.
pub fn dual_objective(alphas: &[f64], x: &[SparseVector], y: &[i8]) -> f64 {
    let dim = x.first().map_or(0, SparseVector::dim);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for ((xi, &yi), &a) in x.iter().zip(y).zip(alphas) {
        xi.axpy_into(a * f64::from(yi), &mut w);
        b += a * f64::from(yi);
    }
    dual_value(alphas, &w, b)
}
