//! Independent oracles and helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use authprof::corpus::{LabelDistribution, Lang, SyntheticSpec, TokenDistribution};

pub const BIN: &str = env!("CARGO_BIN_EXE_authprof");

/// Sliding-window n-grams, written without reference to the library code.
pub fn naive_char_ngrams(text: &str, n: usize) -> Vec<String> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start + n <= chars.len() {
        out.push(chars[start..start + n].iter().collect());
        start += 1;
    }
    out
}

pub fn naive_word_ngrams(text: &str, n: usize) -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    let mut current = String::new();
    for ch in text.to_lowercase().chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        } else {
            current.push(ch);
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + n <= words.len() {
        out.push(words[start..start + n].join(" "));
        start += 1;
    }
    out
}

const ALPHABETS: &[&[char]] = &[
    &[
        'a', 'B', 'c', 'D', 'e', 'x', 'Y', 'z', '0', '7', '.', ',', '!', '#', '@',
    ],
    &['á', 'É', 'ç', 'Ñ', 'õ', 'Ü', 'ß', 'ø'],
    &['Σ', 'σ', 'ς', 'Ω', 'İ', 'ǅ', 'ẞ', 'K'],
    &['ع', 'ر', 'ب', 'ي', 'ة', '\u{064B}'],
    &['中', '文', '字', 'の', 'カ'],
    &['😀', '👍', '\u{1F1F5}', '\u{1F1F9}', '\u{200D}', '\u{0301}'],
    &[' ', ' ', ' ', '\t', '\n', '\r', '\u{00A0}', '\u{2003}', '\u{3000}'],
];

/// Random string over a mix of scripts, case pairs, combining marks and
/// Unicode whitespace.
pub fn random_unicode_string(rng: &mut impl Rng) -> String {
    let len = rng.random_range(0..60);
    (0..len)
        .map(|_| {
            if rng.random_bool(0.1) {
                // any scalar value outside the surrogate range
                loop {
                    if let Some(c) = char::from_u32(rng.random_range(0..0x30000)) {
                        return c;
                    }
                }
            }
            let alphabet = ALPHABETS[rng.random_range(0..ALPHABETS.len())];
            alphabet[rng.random_range(0..alphabet.len())]
        })
        .collect()
}

/// Small random binary problem with mostly linear labels and both classes.
pub fn random_dataset(rng: &mut impl Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = rng.random_range(2..=30);
    let d = rng.random_range(1..=10);
    let truth: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            (0..d)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random_range(-1.0..1.0)
                    }
                })
                .collect()
        })
        .collect();
    let mut y: Vec<f64> = x
        .iter()
        .map(|xi| {
            let s: f64 = xi.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.5..0.5);
            if s >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    if y.iter().all(|&v| v == y[0]) {
        y[0] = -y[0];
    }
    (x, y)
}

/// Minimiser of ½(‖w‖² + b²) + C·Σ max(0, 1 − yᵢ(w·xᵢ + b)), found by a
/// log-barrier interior-point method on the equivalent slack QP.
pub struct QpSolution {
    pub w: Vec<f64>,
    pub b: f64,
    pub objective: f64,
}

pub fn qp_oracle(x: &[Vec<f64>], y: &[f64], c: f64) -> QpSolution {
    let m = x.len();
    let d = x[0].len();
    let nv = d + 1 + m;
    // z = (w, b, ξ); start strictly feasible at w = 0, b = 0, ξ = 2
    let mut z = DVector::<f64>::zeros(nv);
    for i in 0..m {
        z[d + 1 + i] = 2.0;
    }
    let margin = |z: &DVector<f64>, i: usize| -> f64 {
        let wx: f64 = (0..d).map(|j| z[j] * x[i][j]).sum();
        y[i] * (wx + z[d]) + z[d + 1 + i] - 1.0
    };
    let f = |z: &DVector<f64>| -> f64 {
        let reg: f64 = (0..=d).map(|j| z[j] * z[j]).sum::<f64>() * 0.5;
        reg + c * (0..m).map(|i| z[d + 1 + i]).sum::<f64>()
    };
    let feasible = |z: &DVector<f64>| (0..m).all(|i| margin(z, i) > 0.0 && z[d + 1 + i] > 0.0);
    let phi = |z: &DVector<f64>, t: f64| -> f64 {
        t * f(z) - (0..m).map(|i| margin(z, i).ln() + z[d + 1 + i].ln()).sum::<f64>()
    };

    let mut t = 1.0;
    loop {
        for _ in 0..200 {
            let mut grad = DVector::<f64>::zeros(nv);
            let mut hess = DMatrix::<f64>::zeros(nv, nv);
            for j in 0..=d {
                grad[j] = t * z[j];
                hess[(j, j)] = t;
            }
            for i in 0..m {
                grad[d + 1 + i] = t * c;
                let mut a = DVector::<f64>::zeros(nv);
                for j in 0..d {
                    a[j] = y[i] * x[i][j];
                }
                a[d] = y[i];
                a[d + 1 + i] = 1.0;
                let g = margin(&z, i);
                grad -= &a / g;
                hess += (&a * a.transpose()) / (g * g);
                let s = z[d + 1 + i];
                grad[d + 1 + i] -= 1.0 / s;
                hess[(d + 1 + i, d + 1 + i)] += 1.0 / (s * s);
            }
            let chol = hess.cholesky().expect("barrier Hessian is positive definite");
            let step = -chol.solve(&grad);
            let decrement = -grad.dot(&step);
            if decrement / 2.0 < 1e-14 {
                break;
            }
            let base = phi(&z, t);
            let mut s = 1.0;
            let mut next = &z + &step * s;
            let mut tries = 0;
            while tries < 80 && (!feasible(&next) || (decrement > 1e-6 && phi(&next, t) > base - 0.25 * s * decrement))
            {
                s *= 0.5;
                next = &z + &step * s;
                tries += 1;
            }
            if !feasible(&next) {
                break;
            }
            z = next;
        }
        let gap = 2.0 * m as f64 / t;
        if gap <= 1e-11 * f(&z).max(1e-3) {
            break;
        }
        t *= 10.0;
    }

    let w: Vec<f64> = (0..d).map(|j| z[j]).collect();
    let b = z[d];
    QpSolution {
        objective: primal(&w, b, x, y, c),
        w,
        b,
    }
}

pub fn primal(w: &[f64], b: f64, x: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let reg = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let s: f64 = xi.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
            (1.0 - yi * s).max(0.0)
        })
        .sum();
    reg + c * hinge
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn run_cli(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env("RUST_LOG", "warn");
    match threads {
        Some(n) => cmd.env("PROFILER_THREADS", n.to_string()),
        None => cmd.env_remove("PROFILER_THREADS"),
    };
    cmd.output().expect("binary runs")
}

pub fn run_cli_ok(args: &[&str], threads: Option<usize>) -> Output {
    let out = run_cli(args, threads);
    assert!(
        out.status.success(),
        "authprof {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn words(alphabet: &str, count: usize) -> Vec<String> {
    let letters: Vec<char> = alphabet.chars().collect();
    let mut out = Vec::new();
    'outer: for a in &letters {
        for b in &letters {
            for c in &letters {
                out.push([*a, *b, *c].iter().collect());
                if out.len() == count {
                    break 'outer;
                }
            }
        }
    }
    out
}

fn label(name: &str, alphabet: &str) -> LabelDistribution {
    LabelDistribution {
        label: name.into(),
        tokens: TokenDistribution::uniform(words(alphabet, 25)),
    }
}

/// Two varieties and two genders whose vocabularies share no characters,
/// so every n-gram scheme separates them.
pub fn disjoint_spec(n_authors: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        lang: Lang::Pt,
        n_authors,
        docs_per_author: 4,
        tokens_per_doc: 12,
        varieties: vec![label("brazil", "abcdef"), label("portugal", "ghijkl")],
        genders: vec![label("female", "mnopqr"), label("male", "stuvwx")],
        background: TokenDistribution::uniform(words("yz0123", 30)),
        variety_share: 0.4,
        gender_share: 0.4,
        seed,
    }
}
