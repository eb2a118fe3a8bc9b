//! Sigmoid calibration of decision scores: `P(y=+1 | s) = 1 / (1 + exp(A·s + B))`.
//!
//! Fitted by Newton's method with backtracking on the cross-entropy against
//! the regularised targets `(N₊+1)/(N₊+2)` and `1/(N₋+2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattCalibrator {
    pub a: f64,
    pub b: f64,
}

impl PlattCalibrator {
    pub fn probability(&self, score: f64) -> f64 {
        sigmoid_of(self.a * score + self.b)
    }
}

/// `1 / (1 + exp(z))` without overflow.
fn sigmoid_of(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Regularised targets for the positive and negative class.
pub fn platt_targets(n_pos: usize, n_neg: usize) -> (f64, f64) {
    ((n_pos as f64 + 1.0) / (n_pos as f64 + 2.0), 1.0 / (n_neg as f64 + 2.0))
}

fn neg_log_likelihood(scores: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    scores
        .iter()
        .zip(targets)
        .map(|(&s, &t)| {
            let z = a * s + b;
            if z >= 0.0 {
                t * z + (-z).exp().ln_1p()
            } else {
                (t - 1.0) * z + z.exp().ln_1p()
            }
        })
        .sum()
}

const MAX_ITER: usize = 100;
const MIN_STEP: f64 = 1e-10;
const SIGMA: f64 = 1e-12;
const EPS: f64 = 1e-5;

pub fn fit_platt(scores: &[f64], y: &[i8]) -> Result<PlattCalibrator> {
    if scores.len() != y.len() {
        return Err(Error::validation(format!(
            "{} scores but {} labels",
            scores.len(),
            y.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::validation("calibration scores must be finite"));
    }
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let n_neg = y.iter().filter(|&&v| v == -1).count();
    if n_pos + n_neg != y.len() {
        return Err(Error::validation("calibration labels must be +1 or -1"));
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::validation("calibration needs both classes"));
    }
    let (hi, lo) = platt_targets(n_pos, n_neg);
    let targets: Vec<f64> = y.iter().map(|&v| if v == 1 { hi } else { lo }).collect();

    // Constant scores leave the slope unidentifiable; pin A = 0 and match
    // the mean target exactly.
    let first = scores[0];
    if scores.iter().all(|&s| s == first) {
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        return Ok(PlattCalibrator {
            a: 0.0,
            b: ((1.0 - mean) / mean).ln(),
        });
    }

    let mut a = 0.0;
    let mut b = ((n_neg as f64 + 1.0) / (n_pos as f64 + 1.0)).ln();
    let mut fval = neg_log_likelihood(scores, &targets, a, b);

    for iter in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21) = (SIGMA, SIGMA, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&s, &t) in scores.iter().zip(&targets) {
            let p = sigmoid_of(a * s + b);
            let d2 = p * (1.0 - p);
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
            let d1 = t - p;
            g1 += s * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = neg_log_likelihood(scores, &targets, na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            log::debug!("platt: line search failed at iteration {iter}");
            break;
        }
        if iter + 1 == MAX_ITER {
            log::debug!("platt: reached the iteration limit");
        }
    }
    Ok(PlattCalibrator { a, b })
}
