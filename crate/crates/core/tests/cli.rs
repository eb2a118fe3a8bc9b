mod common;

use std::fs;
use std::path::Path;

use authprof::cli::Evaluation;
use authprof::corpus::{author_files, load_corpus, read_prediction_file, TRUTH_FILE};

use common::{run_cli, run_cli_ok};

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(out: &Path, extra: &[&str]) {
    let mut args = vec![
        "gen-corpus",
        "--out",
        s(out),
        "--lang",
        "es",
        "--authors",
        "24",
        "--varieties",
        "2",
        "--seed",
        "3",
    ];
    args.extend_from_slice(extra);
    run_cli_ok(&args, None);
}

#[test]
fn gen_corpus_counts_and_loads() {
    let dir = tempfile::tempdir().unwrap();
    run_cli_ok(
        &[
            "gen-corpus",
            "--out",
            s(dir.path()),
            "--lang",
            "pt",
            "--authors",
            "50",
            "--varieties",
            "2",
        ],
        None,
    );
    let pt = dir.path().join("pt");
    assert_eq!(author_files(&pt).unwrap().len(), 50);
    let corpus = load_corpus(&pt, Some(&pt.join(TRUTH_FILE))).unwrap();
    let strata: std::collections::BTreeSet<_> = corpus.authors.iter().map(|a| (&a.gender, &a.variety)).collect();
    assert_eq!(strata.len(), 4);
    assert!(dir.path().join("config-gen-corpus.json").is_file());
}

#[test]
fn full_run_with_explicit_c() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    gen(&data, &["--holdout", "0.25"]);
    let (train, test) = (data.join("train"), data.join("test"));

    run_cli_ok(
        &[
            "train",
            "--train-dir",
            s(&train),
            "--out",
            s(&run),
            "--task",
            "gender",
            "--c-grid",
            "1",
        ],
        None,
    );
    assert!(run.join("es/model-gender/manifest.json").is_file());
    assert!(!run.join("es/model-variety").exists());
    run_cli_ok(
        &["train", "--train-dir", s(&train), "--out", s(&run), "--c-grid", "1"],
        None,
    );
    assert!(run.join("es/model-variety/manifest.json").is_file());

    run_cli_ok(&["predict", "--test-dir", s(&test), "--out", s(&run)], None);
    let inputs = author_files(&test.join("es")).unwrap();
    let outputs = author_files(&run.join("es/predictions")).unwrap();
    assert_eq!(inputs.len(), outputs.len());
    for p in &outputs {
        let pred = read_prediction_file(p).unwrap();
        assert!(pred.gender.is_some() && pred.variety.is_some());
    }

    let out = run_cli_ok(
        &[
            "evaluate",
            "--test-dir",
            s(&test),
            "--train-dir",
            s(&train),
            "--out",
            s(&run),
            "--baselines",
        ],
        None,
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("BOW-baseline") && text.contains("STAT-baseline"),
        "{text}"
    );
    let report: Evaluation = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    for r in &report.languages {
        assert!(r.joint_acc <= r.gender_acc.min(r.variety_acc));
    }
    for rows in report.tasks.values() {
        assert_eq!(rows.len(), 3);
    }
    for cmd in ["train", "predict", "evaluate"] {
        assert!(run.join(format!("config-{cmd}.json")).is_file());
    }
}

#[test]
fn unreadable_authors_are_skipped_or_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    gen(&data, &[]);
    let es = data.join("es");
    run_cli_ok(
        &[
            "train",
            "--train-dir",
            s(&es),
            "--out",
            s(&run),
            "--c-grid",
            "1",
            "--lang",
            "es",
        ],
        None,
    );

    let test = dir.path().join("test");
    fs::create_dir_all(&test).unwrap();
    for f in author_files(&es).unwrap().iter().take(5) {
        fs::copy(f, test.join(f.file_name().unwrap())).unwrap();
    }
    fs::write(
        test.join("broken.xml"),
        "<author id=\"broken\" lang=\"es\"><documents><document>x</documents>",
    )
    .unwrap();

    let lenient = run_cli(
        &["predict", "--test-dir", s(&test), "--out", s(&run), "--lang", "es"],
        None,
    );
    assert_eq!(lenient.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("broken.xml"));
    assert_eq!(author_files(&run.join("es/predictions")).unwrap().len(), 5);

    fs::remove_dir_all(run.join("es/predictions")).unwrap();
    let strict = run_cli(
        &[
            "predict",
            "--test-dir",
            s(&test),
            "--out",
            s(&run),
            "--lang",
            "es",
            "--strict",
        ],
        None,
    );
    assert_eq!(strict.status.code(), Some(1));
    assert!(!run.join("es/predictions").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");

    let missing = run_cli(&["tune", "--out", s(&out)], None);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--train-dir"));

    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let no_files = run_cli(&["tune", "--train-dir", s(&empty), "--out", s(&out)], None);
    assert_eq!(no_files.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&no_files.stderr).contains("no author files found"));

    let data = dir.path().join("data");
    gen(&data, &[]);
    let untuned = run_cli(&["train", "--train-dir", s(&data), "--out", s(&out)], None);
    assert_eq!(untuned.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&untuned.stderr).contains("tuning report"));

    // output location blocked by a regular file: an I/O failure, not bad input
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let io = run_cli(&["gen-corpus", "--out", s(&blocker.join("x"))], None);
    assert_eq!(io.status.code(), Some(2));

    assert_eq!(run_cli(&["tune", "--no-such-flag"], None).status.code(), Some(1));
    assert_eq!(run_cli(&["--help"], None).status.code(), Some(0));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "out = {:?}\nlang = \"ar\"\nauthors = 16\nvarieties = 4\nseed = 9\n",
            s(&dir.path().join("gen"))
        ),
    )
    .unwrap();
    run_cli_ok(&["gen-corpus", "--config", s(&cfg), "--authors", "12"], None);
    let ar = dir.path().join("gen/ar");
    assert_eq!(author_files(&ar).unwrap().len(), 12);
    let written: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("gen/config-gen-corpus.json")).unwrap()).unwrap();
    assert_eq!(written["seed"], 9);
    assert_eq!(written["authors"], 12);
}
