//! Command-line pipeline: `gen-corpus`, `tune`, `train`, `predict` and
//! `evaluate`.
//!
//! A corpus directory either holds author files directly (one language) or
//! one sub-directory per language code (`ar`, `en`, `es`, `pt`). Outputs go
//! to `<out>/<lang>/…`; every run also writes the effective configuration
//! to `<out>/config-<command>.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    author_files, generate_synthetic_corpus, holdout_split, load_corpus, make_folds, read_author_file,
    read_prediction_file, write_corpus, write_prediction_file, Corpus, Lang, SyntheticSpec, TRUTH_FILE,
};
use crate::ensemble::{default_c_grid, train_ensemble, tune_ensemble, EnsembleModel, Task, TuningParams, TuningReport};
use crate::error::{Error, Result};
use crate::eval::{
    bow_baseline, render_confusion, render_language_table, render_task_table, score, stat_baseline, summarize,
    PredictionSet, ScoreReport, Summary, TaskRow,
};
use crate::linsvm::{MulticlassParams, SolverParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TaskSelection {
    Gender,
    Variety,
    Both,
}

impl TaskSelection {
    pub fn tasks(self) -> Vec<Task> {
        match self {
            TaskSelection::Gender => vec![Task::Gender],
            TaskSelection::Variety => vec![Task::Variety],
            TaskSelection::Both => Task::BOTH.to_vec(),
        }
    }
}

/// Every parameter of a run. Loaded from an optional TOML file, then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train_dir: Option<PathBuf>,
    pub test_dir: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub task: TaskSelection,
    pub lang: Option<Lang>,
    pub out: PathBuf,
    pub seed: u64,
    pub folds: usize,
    pub c_grid: Vec<f64>,
    pub baselines: bool,
    pub strict: bool,
    pub tol: f64,
    pub max_epochs: usize,
    /// gen-corpus: number of authors.
    pub authors: usize,
    /// gen-corpus: number of varieties (default: all of the language's).
    pub varieties: Option<usize>,
    /// gen-corpus: fraction of authors written to a separate test split.
    pub holdout: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverParams::default();
        RunConfig {
            train_dir: None,
            test_dir: None,
            truth: None,
            task: TaskSelection::Both,
            lang: None,
            out: PathBuf::from("out"),
            seed: 0,
            folds: 3,
            c_grid: default_c_grid(),
            baselines: false,
            strict: false,
            tol: solver.tol,
            max_epochs: solver.max_epochs,
            authors: 200,
            varieties: None,
            holdout: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, 0, e.to_string()))
    }

    fn multiclass(&self) -> MulticlassParams {
        MulticlassParams {
            solver: SolverParams {
                c: 1.0,
                tol: self.tol,
                max_epochs: self.max_epochs,
                seed: self.seed,
            },
            calibration_folds: 3,
            seed: self.seed,
        }
    }

    fn train_dir(&self) -> Result<&Path> {
        self.train_dir
            .as_deref()
            .ok_or_else(|| Error::validation("--train-dir is required"))
    }

    fn test_dir(&self) -> Result<&Path> {
        self.test_dir
            .as_deref()
            .ok_or_else(|| Error::validation("--test-dir is required"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "authprof", version, about = "Gender and language-variety author profiling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandName {
    Tune,
    Train,
    Predict,
    Evaluate,
    GenCorpus,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cross-validate C for every ensemble member.
    Tune(Flags),
    /// Fit the ensembles on the full training corpus.
    Train(Flags),
    /// Write one prediction file per test author.
    Predict(Flags),
    /// Score predictions against the truth, optionally with baselines.
    Evaluate(Flags),
    /// Generate a synthetic PAN-format corpus.
    GenCorpus(Flags),
}

impl Command {
    pub fn split(self) -> (CommandName, Flags) {
        match self {
            Command::Tune(f) => (CommandName::Tune, f),
            Command::Train(f) => (CommandName::Train, f),
            Command::Predict(f) => (CommandName::Predict, f),
            Command::Evaluate(f) => (CommandName::Evaluate, f),
            Command::GenCorpus(f) => (CommandName::GenCorpus, f),
        }
    }
}

impl CommandName {
    pub fn name(self) -> &'static str {
        match self {
            CommandName::Tune => "tune",
            CommandName::Train => "train",
            CommandName::Predict => "predict",
            CommandName::Evaluate => "evaluate",
            CommandName::GenCorpus => "gen-corpus",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file with RunConfig fields; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train_dir: Option<PathBuf>,
    #[arg(long)]
    pub test_dir: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub task: Option<TaskSelection>,
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Comma-separated C values, e.g. `1e-2,1,1e2`.
    #[arg(long, value_delimiter = ',')]
    pub c_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub baselines: bool,
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub authors: Option<usize>,
    #[arg(long)]
    pub varieties: Option<usize>,
    #[arg(long)]
    pub holdout: Option<f64>,
}

impl Flags {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! over {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone().into();
                }
            )*};
        }
        over!(train_dir, test_dir, truth, task, out, seed, folds, c_grid, tol, max_epochs, authors, varieties, holdout);
        if let Some(l) = &self.lang {
            cfg.lang = Some(l.parse()?);
        }
        cfg.baselines |= self.baselines;
        cfg.strict |= self.strict;
        Ok(cfg)
    }
}

/// What a command produced; `skipped` counts unreadable inputs tolerated
/// outside strict mode.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub skipped: usize,
}

pub fn run(command: CommandName, cfg: &RunConfig) -> Result<Outcome> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let config_path = cfg.out.join(format!("config-{}.json", command.name()));
    let json = serde_json::to_string_pretty(cfg).expect("config serialises") + "\n";
    fs::write(&config_path, json).map_err(|e| Error::io(&config_path, e))?;
    let mut outcome = match command {
        CommandName::Tune => cmd_tune(cfg),
        CommandName::Train => cmd_train(cfg),
        CommandName::Predict => cmd_predict(cfg),
        CommandName::Evaluate => cmd_evaluate(cfg),
        CommandName::GenCorpus => cmd_gen_corpus(cfg),
    }?;
    outcome.written.insert(0, config_path);
    Ok(outcome)
}

/// One language's corpus directory and its truth file, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusDir {
    pub lang: Option<Lang>,
    pub dir: PathBuf,
    pub truth: Option<PathBuf>,
}

/// Finds the per-language corpora under `root`.
pub fn resolve_corpus_dirs(root: &Path, truth: Option<&Path>, lang: Option<Lang>) -> Result<Vec<CorpusDir>> {
    if !author_files(root)?.is_empty() {
        let default_truth = root.join(TRUTH_FILE);
        let truth = truth
            .map(Path::to_path_buf)
            .or_else(|| default_truth.is_file().then_some(default_truth));
        return Ok(vec![CorpusDir {
            lang,
            dir: root.to_path_buf(),
            truth,
        }]);
    }
    if truth.is_some() {
        return Err(Error::validation(
            "--truth applies to a single-language directory; per-language directories use their own truth.txt",
        ));
    }
    let mut found = Vec::new();
    for l in Lang::ALL {
        if lang.is_some_and(|want| want != l) {
            continue;
        }
        let dir = root.join(l.code());
        if dir.is_dir() && !author_files(&dir)?.is_empty() {
            let t = dir.join(TRUTH_FILE);
            found.push(CorpusDir {
                lang: Some(l),
                truth: t.is_file().then_some(t),
                dir,
            });
        }
    }
    if found.is_empty() {
        return Err(Error::validation(format!(
            "no author files found in {}",
            root.display()
        )));
    }
    Ok(found)
}

fn load_labeled(entry: &CorpusDir) -> Result<Corpus> {
    let corpus = load_corpus(&entry.dir, entry.truth.as_deref())?;
    check_lang(entry, corpus.lang)?;
    if !corpus.is_labeled() {
        return Err(Error::validation(format!(
            "{}: training corpus needs gender and variety labels (truth file or author attributes)",
            entry.dir.display()
        )));
    }
    let unknown = corpus.non_pan_varieties();
    if !unknown.is_empty() {
        log::info!(
            "{}: varieties outside the PAN list: {}",
            corpus.lang,
            unknown.join(", ")
        );
    }
    Ok(corpus)
}

fn check_lang(entry: &CorpusDir, found: Lang) -> Result<()> {
    match entry.lang {
        Some(want) if want != found => Err(Error::validation(format!(
            "{} holds {found} authors, expected {want}",
            entry.dir.display()
        ))),
        _ => Ok(()),
    }
}

fn lang_out(cfg: &RunConfig, lang: Lang) -> Result<PathBuf> {
    let dir = cfg.out.join(lang.code());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn tuning_path(out: &Path, task: Task) -> PathBuf {
    out.join(format!("tuning-{task}.tsv"))
}

fn model_dir(out: &Path, task: Task) -> PathBuf {
    out.join(format!("model-{task}"))
}

pub fn cmd_tune(cfg: &RunConfig) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let params = TuningParams {
        grid: cfg.c_grid.clone(),
        multiclass: cfg.multiclass(),
    };
    for entry in resolve_corpus_dirs(cfg.train_dir()?, cfg.truth.as_deref(), cfg.lang)? {
        let corpus = load_labeled(&entry)?;
        let folds = make_folds(&corpus, cfg.folds, cfg.seed)?;
        let out = lang_out(cfg, corpus.lang)?;
        for task in cfg.task.tasks() {
            log::info!(
                "{}: tuning {task} ({} authors, {} folds)",
                corpus.lang,
                corpus.len(),
                cfg.folds
            );
            let report = tune_ensemble(&corpus, task, &folds, &params).map_err(|e| e.context(corpus.lang.code()))?;
            for m in &report.members {
                let best = m
                    .grid
                    .iter()
                    .find(|p| p.c == m.chosen_c)
                    .map_or(0.0, |p| p.mean_accuracy);
                log::info!(
                    "{} {task} {}: C={:e} mean accuracy {best:.4}",
                    corpus.lang,
                    m.scheme,
                    m.chosen_c
                );
            }
            let path = tuning_path(&out, task);
            fs::write(&path, report.to_tsv()).map_err(|e| Error::io(&path, e))?;
            outcome.written.push(path);
        }
    }
    Ok(outcome)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    for entry in resolve_corpus_dirs(cfg.train_dir()?, cfg.truth.as_deref(), cfg.lang)? {
        let corpus = load_labeled(&entry)?;
        let out = lang_out(cfg, corpus.lang)?;
        for task in cfg.task.tasks() {
            let cs = match cfg.c_grid.as_slice() {
                [c] => crate::features::FeatureScheme::ALL.iter().map(|&s| (s, *c)).collect(),
                _ => {
                    let path = tuning_path(&out, task);
                    if !path.is_file() {
                        return Err(Error::validation(format!(
                            "no tuning report at {}; run `tune` first or pass a single --c-grid value",
                            path.display()
                        )));
                    }
                    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    TuningReport::from_tsv(&text, &path)?.chosen_cs()
                }
            };
            log::info!("{}: training {task} ensemble", corpus.lang);
            let model =
                train_ensemble(&corpus, task, &cs, &cfg.multiclass()).map_err(|e| e.context(corpus.lang.code()))?;
            let dir = model_dir(&out, task);
            model.save(&dir)?;
            outcome.written.push(dir);
        }
    }
    Ok(outcome)
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    for entry in resolve_corpus_dirs(cfg.test_dir()?, None, cfg.lang)? {
        let mut authors = Vec::new();
        for file in author_files(&entry.dir)? {
            match read_author_file(&file) {
                Ok(a) => authors.push(a),
                Err(e) if !cfg.strict => {
                    log::warn!("skipping unreadable author file: {e}");
                    outcome.skipped += 1;
                }
                Err(e) => return Err(e),
            }
        }
        let Some(first) = authors.first() else {
            continue;
        };
        let lang = first.lang;
        check_lang(&entry, lang)?;
        let corpus = Corpus::new(lang, authors)?.unlabeled();
        let out = lang_out(cfg, lang)?;
        let mut preds = PredictionSet::new(lang);
        for task in cfg.task.tasks() {
            let dir = model_dir(&out, task);
            let model = EnsembleModel::load(&dir)?;
            for (a, p) in corpus.authors.iter().zip(model.predict_corpus(&corpus)?) {
                preds.insert(a.author_id.clone(), task, p.label);
            }
        }
        let pred_dir = out.join("predictions");
        if pred_dir.exists() {
            fs::remove_dir_all(&pred_dir).map_err(|e| Error::io(&pred_dir, e))?;
        }
        fs::create_dir_all(&pred_dir).map_err(|e| Error::io(&pred_dir, e))?;
        for p in preds.to_files() {
            let path = pred_dir.join(format!("{}.xml", p.author_id));
            write_prediction_file(&p, &path)?;
            outcome.written.push(path);
        }
    }
    Ok(outcome)
}

pub fn read_predictions(dir: &Path, lang: Lang) -> Result<PredictionSet> {
    let files = author_files(dir)?;
    let preds = files
        .iter()
        .map(|f| read_prediction_file(f))
        .collect::<Result<Vec<_>>>()?;
    PredictionSet::from_files(lang, preds)
}

/// Everything `evaluate` reports, in machine-readable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub languages: Vec<ScoreReport>,
    pub summary: Option<Summary>,
    /// Per task: the system row followed by baseline rows, if requested.
    pub tasks: BTreeMap<Task, Vec<TaskRow>>,
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.baselines && cfg.train_dir.is_none() {
        return Err(Error::validation("--baselines needs --train-dir"));
    }
    let mut reports = Vec::new();
    let mut baseline_scores: Vec<(&str, ScoreReport)> = Vec::new();
    for entry in resolve_corpus_dirs(cfg.test_dir()?, cfg.truth.as_deref(), cfg.lang)? {
        let truth = load_corpus(&entry.dir, entry.truth.as_deref())?;
        check_lang(&entry, truth.lang)?;
        let preds = read_predictions(&cfg.out.join(truth.lang.code()).join("predictions"), truth.lang)?;
        reports.push(score(&truth, &preds)?);

        if cfg.baselines {
            let train_entry = resolve_corpus_dirs(cfg.train_dir()?, None, Some(truth.lang))?;
            let train = load_labeled(&train_entry[0])?;
            let stat = stat_baseline(&train, truth.ids())?;
            baseline_scores.push(("STAT-baseline", score(&truth, &stat)?));
            let mut bow = bow_baseline(&train, &truth, Task::Gender)?;
            bow.merge(bow_baseline(&train, &truth, Task::Variety)?);
            baseline_scores.push(("BOW-baseline", score(&truth, &bow)?));
        }
    }

    let mut tasks = BTreeMap::new();
    for task in Task::BOTH {
        let acc = |r: &ScoreReport| match task {
            Task::Gender => r.gender_acc,
            Task::Variety => r.variety_acc,
        };
        let mut rows = vec![TaskRow {
            system: "ensemble".into(),
            accuracy: reports.iter().map(|r| (r.lang, acc(r))).collect(),
        }];
        for name in ["BOW-baseline", "STAT-baseline"] {
            let accuracy: BTreeMap<Lang, f64> = baseline_scores
                .iter()
                .filter(|(n, _)| *n == name)
                .map(|(_, r)| (r.lang, acc(r)))
                .collect();
            if !accuracy.is_empty() {
                rows.push(TaskRow {
                    system: name.to_string(),
                    accuracy,
                });
            }
        }
        tasks.insert(task, rows);
    }

    let evaluation = Evaluation {
        summary: summarize(&reports),
        languages: reports,
        tasks,
    };
    let mut text = render_language_table(&evaluation.languages);
    for (task, rows) in &evaluation.tasks {
        text.push('\n');
        text.push_str(&render_task_table(*task, rows));
    }
    for r in &evaluation.languages {
        text.push('\n');
        text.push_str(&render_confusion(
            &format!("{} gender", r.lang.name()),
            &r.gender_confusion,
        ));
        text.push_str(&render_confusion(
            &format!("{} variety", r.lang.name()),
            &r.variety_confusion,
        ));
    }

    let txt_path = cfg.out.join("report.txt");
    let json_path = cfg.out.join("report.json");
    fs::write(&txt_path, &text).map_err(|e| Error::io(&txt_path, e))?;
    let json = serde_json::to_string_pretty(&evaluation).expect("report serialises") + "\n";
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    print!("{text}");
    Ok(Outcome {
        written: vec![txt_path, json_path],
        skipped: 0,
    })
}

pub fn cmd_gen_corpus(cfg: &RunConfig) -> Result<Outcome> {
    let lang = cfg.lang.unwrap_or(Lang::Pt);
    let n_varieties = cfg.varieties.unwrap_or(lang.pan_varieties().len());
    let spec = SyntheticSpec::standard(lang, cfg.authors, n_varieties, cfg.seed)?;
    let corpus = generate_synthetic_corpus(&spec)?;
    let mut outcome = Outcome::default();
    match cfg.holdout {
        Some(fraction) => {
            let (train, test) = holdout_split(&corpus, fraction, cfg.seed)?;
            for (part, c) in [("train", &train), ("test", &test)] {
                let dir = cfg.out.join(part).join(lang.code());
                write_corpus(c, &dir)?;
                outcome.written.push(dir);
            }
        }
        None => {
            let dir = cfg.out.join(lang.code());
            write_corpus(&corpus, &dir)?;
            outcome.written.push(dir);
        }
    }
    Ok(outcome)
}
