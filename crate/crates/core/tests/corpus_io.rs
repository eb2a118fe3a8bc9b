use std::fs;

use authprof::corpus::{load_corpus, write_corpus, write_truth, AuthorRecord, Corpus, Lang, TRUTH_FILE};
use authprof::Error;

const PAN_EXAMPLE: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<author id="user-1" lang="en" variety="united states" gender="male">
  <documents>
    <document><![CDATA[Tweet one with <b>markup</b> & more]]></document>
    <document>Tweet two &amp; an entity</document>
  </documents>
</author>
"#;

fn small_corpus(n: usize) -> Corpus {
    let authors = (0..n)
        .map(|i| {
            AuthorRecord::new(format!("id{i}"), Lang::En, vec![format!("doc {i}")]).with_labels("female", "canada")
        })
        .collect();
    Corpus::new(Lang::En, authors).unwrap()
}

#[test]
fn pan_author_tag_is_read_with_labels() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("user-1.xml"), PAN_EXAMPLE).unwrap();
    let corpus = load_corpus(dir.path(), None).unwrap();
    assert_eq!(corpus.len(), 1);
    let a = &corpus.authors[0];
    assert_eq!(
        (a.gender.as_deref(), a.variety.as_deref()),
        (Some("male"), Some("united states"))
    );
    assert_eq!(
        a.documents,
        ["Tweet one with <b>markup</b> & more", "Tweet two & an entity"]
    );
    assert_eq!(corpus.variety_labels, ["united states"]);
}

#[test]
fn empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_corpus(dir.path(), None).unwrap_err();
    assert!(err.to_string().contains("no author files found"), "{err}");
}

#[test]
fn truth_mismatch_lists_orphans() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&small_corpus(4), dir.path()).unwrap();
    write_truth(&small_corpus(3), &dir.path().join(TRUTH_FILE)).unwrap();
    let err = load_corpus(dir.path(), Some(&dir.path().join(TRUTH_FILE))).unwrap_err();
    assert!(err.is_validation());
    assert!(err.to_string().contains("id3"), "{err}");
}

#[test]
fn duplicate_ids_across_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.xml"), PAN_EXAMPLE).unwrap();
    fs::write(dir.path().join("b.xml"), PAN_EXAMPLE).unwrap();
    let err = load_corpus(dir.path(), None).unwrap_err();
    assert!(err.is_validation());
    assert!(err.to_string().contains("user-1"), "{err}");
}

#[test]
fn malformed_xml_names_file_and_offset() {
    let dir = tempfile::tempdir().unwrap();
    let text = "<author id=\"x\" lang=\"en\"><documents><document>ok</documnt></documents></author>";
    fs::write(dir.path().join("x.xml"), text).unwrap();
    match load_corpus(dir.path(), None).unwrap_err() {
        Error::Xml { path, offset, .. } => {
            assert!(path.ends_with("x.xml"));
            assert!(offset > 0 && offset <= text.len() as u64);
        }
        other => panic!("expected an XML error, got {other}"),
    }
}

#[test]
fn truth_overrides_attributes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("user-1.xml"), PAN_EXAMPLE).unwrap();
    fs::write(dir.path().join(TRUTH_FILE), "user-1:::female:::canada\n").unwrap();
    let corpus = load_corpus(dir.path(), Some(&dir.path().join(TRUTH_FILE))).unwrap();
    assert_eq!(corpus.authors[0].gender.as_deref(), Some("female"));
    assert_eq!(corpus.variety_labels, ["canada"]);
}
