use std::collections::BTreeMap;

use proptest::prelude::*;

use authprof::corpus::{make_folds, read_author_file, write_author_file, AuthorRecord, Corpus, Lang};
use authprof::ensemble::Task;
use authprof::eval::{score, stat_baseline, PredictionSet};
use authprof::features::{FeatureScheme, FeatureSpace};
use authprof::linsvm::BinaryLinearModel;
use authprof::sparse::SparseVector;

fn scheme() -> impl Strategy<Value = FeatureScheme> {
    prop::sample::select(FeatureScheme::ALL.to_vec())
}

/// Text valid in XML 1.0, including markup characters and line breaks.
fn xml_text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 <>&\"'\\]\\[\t\r\n;#éñ😀中-]{1,40}"
}

fn labeled_corpus() -> impl Strategy<Value = Corpus> {
    prop::collection::vec((0..2usize, 0..3usize), 3..40).prop_map(|labels| {
        let authors = labels
            .iter()
            .enumerate()
            .map(|(i, &(g, v))| {
                AuthorRecord::new(format!("a{i:02}"), Lang::En, vec![format!("text {i}")])
                    .with_labels(["female", "male"][g], ["australia", "canada", "ireland"][v])
            })
            .collect();
        Corpus::new(Lang::En, authors).unwrap()
    })
}

proptest! {
    #[test]
    fn vectors_are_unit_or_zero(texts in prop::collection::vec("[a-d ]{0,30}", 1..6), probe in "[a-e ]{0,30}", s in scheme()) {
        let space = FeatureSpace::fit(s, texts.iter().map(String::as_str)).unwrap();
        prop_assert!(space.terms().windows(2).all(|w| w[0] < w[1]));
        for (i, t) in space.terms().iter().enumerate() {
            prop_assert_eq!(space.index_of(t), Some(i));
        }
        let v = space.vectorize(&probe);
        prop_assert_eq!(v.dim(), space.dimension());
        prop_assert!(v.values().iter().all(|&x| x > 0.0));
        prop_assert!(v.is_zero() || (v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decision_is_affine(w in prop::collection::vec(-5.0..5.0f64, 4), b in -3.0..3.0f64,
                          x in prop::collection::vec(-2.0..2.0f64, 4), alpha in -4.0..4.0f64) {
        let model = BinaryLinearModel { weights: w, bias: b, c: 1.0 };
        let v = SparseVector::from_dense(&x).unwrap();
        let lhs = model.decision(&v.scaled(alpha)).unwrap() - b;
        let rhs = alpha * (model.decision(&v).unwrap() - b);
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn folds_partition_and_stratify(corpus in labeled_corpus(), k in 2usize..5, seed in any::<u64>()) {
        prop_assume!(k <= corpus.len());
        let folds = make_folds(&corpus, k, seed).unwrap();
        prop_assert_eq!(&folds, &make_folds(&corpus, k, seed).unwrap());
        prop_assert_eq!(folds.assignment.len(), corpus.len());
        let mut cells: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
        for a in &corpus.authors {
            let f = folds.fold_of(&a.author_id).unwrap();
            prop_assert!(f < k);
            let cell = cells.entry((a.gender.clone().unwrap(), a.variety.clone().unwrap())).or_insert(vec![0; k]);
            cell[f] += 1;
        }
        for sizes in cells.values() {
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
        let mut seen = vec![false; corpus.len()];
        for f in 0..k {
            let (train, test) = folds.split(&corpus, f);
            prop_assert_eq!(train.len() + test.len(), corpus.len());
            for i in test {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn author_files_round_trip(docs in prop::collection::vec(xml_text(), 1..5), g in 0..2usize) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.xml");
        let author = AuthorRecord::new("x", Lang::Ar, docs).with_labels(["female", "male"][g], "gulf");
        write_author_file(&author, &path).unwrap();
        prop_assert_eq!(read_author_file(&path).unwrap(), author);
    }

    #[test]
    fn score_bounds_and_order_independence(corpus in labeled_corpus(), guesses in prop::collection::vec((0..2usize, 0..3usize), 40)) {
        let mut preds = PredictionSet::new(Lang::En);
        for (a, &(g, v)) in corpus.authors.iter().zip(&guesses) {
            preds.insert(a.author_id.clone(), Task::Gender, ["female", "male"][g]);
            preds.insert(a.author_id.clone(), Task::Variety, ["australia", "canada", "ireland"][v]);
        }
        let report = score(&corpus, &preds).unwrap();
        prop_assert!(report.joint_acc <= report.gender_acc.min(report.variety_acc));
        let mut reversed = corpus.authors.clone();
        reversed.reverse();
        let again = score(&Corpus::new(Lang::En, reversed).unwrap(), &preds).unwrap();
        prop_assert_eq!(report, again);
    }

    #[test]
    fn stat_accuracy_is_test_frequency(train in labeled_corpus(), test in labeled_corpus()) {
        let preds = stat_baseline(&train, test.ids()).unwrap();
        let report = score(&test, &preds).unwrap();
        let first = test.authors[0].author_id.as_str();
        let chosen = &preds.predictions[first];
        let freq = |f: &dyn Fn(&AuthorRecord) -> bool| test.authors.iter().filter(|a| f(a)).count() as f64 / test.len() as f64;
        prop_assert_eq!(report.gender_acc, freq(&|a| a.gender == chosen.gender));
        prop_assert_eq!(report.variety_acc, freq(&|a| a.variety == chosen.variety));
    }
}
