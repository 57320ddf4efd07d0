mod common;

use std::collections::BTreeSet;
use std::fs;

use uisum::core::corpus::Split;
use uisum::dataset::{load_corpus, read_sfa, read_summaries, LoadOptions};
use uisum::formats::{load_word_vectors, read_classes, read_vocab, write_classes, write_vocab};
use uisum::core::features::ClassVocab;
use uisum::core::vocab::Vocabulary;

#[test]
fn empty_directory_and_csv_give_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    fs::write(&csv, "").unwrap();
    let (c, r) = load_corpus(dir.path(), &csv, None, &LoadOptions::default()).unwrap();
    assert_eq!((c.len(), c.summary_count()), (0, 0));
    assert_eq!(r.skipped(), 0);
    fs::write(&csv, "screenId,summary\n").unwrap();
    let (c, _) = load_corpus(dir.path(), &csv, None, &LoadOptions::default()).unwrap();
    assert_eq!(c.len(), 0);
}

#[test]
fn missing_screenshot_is_skipped_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    common::copy_subset(dir.path(), &["1000", "1001", "1002"]);
    fs::remove_file(dir.path().join("screenshots/1001.png")).unwrap();
    let (c, r) = load_corpus(dir.path(), &dir.path().join("summaries.csv"), None, &LoadOptions::default()).unwrap();
    assert_eq!(c.len(), 2);
    assert_eq!(r.skipped_ids(), vec!["1001"]);
    assert_eq!(r.missing_screenshot, vec!["1001".to_string()]);
}

#[test]
fn missing_summaries_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_corpus(dir.path(), &dir.path().join("none.csv"), None, &LoadOptions::default()).unwrap_err();
    assert!(matches!(err, uisum::Error::Io { .. }), "{err}");
    assert!(err.to_string().contains("none.csv"));
}

#[test]
fn unreadable_hierarchy_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    common::copy_subset(dir.path(), &["1000", "1001"]);
    fs::write(dir.path().join("hierarchies/1000.json"), "{ not json").unwrap();
    let (c, r) = load_corpus(dir.path(), &dir.path().join("summaries.csv"), None, &LoadOptions::default()).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(r.unreadable.len(), 1);
    assert!(r.unreadable[0].1.contains("byte"), "{}", r.unreadable[0].1);
}

#[test]
fn fixture_loads_with_expected_adjustments() {
    let (c, r) = common::fixture_corpus();
    assert_eq!(c.len(), 50);
    assert_eq!(r.skipped_ids(), vec!["1050", "1051"]);
    assert_eq!(r.dropped_summaries, 1);
    assert_eq!(r.blank_summaries, 1);
    assert_eq!(r.clipped_sfa_boxes, 1);
    assert_eq!(r.unknown_app, 0);
    for s in c.screens() {
        s.validate().unwrap();
        // hierarchy bounds were mapped from the 1440x2560 capture frame
        assert_eq!(s.tree.root().bounds.right as u32, s.screenshot.width());
        assert_eq!(s.tree.root().bounds.bottom as u32, s.screenshot.height());
        assert!(s.app_id.starts_with("com.fixture."));
    }
    assert!(c.get("1003").unwrap().summaries.len() == 5);
    assert!(c.get("1011").unwrap().summaries.len() == 4);
    // the last app has no description
    assert!(c.screens().filter(|s| s.app_id == "com.fixture.juliet").all(|s| s.app_description.is_none()));
    assert!(c.screens().filter(|s| s.app_id == "com.fixture.alpha").all(|s| s.app_description.is_some()));
    for split in Split::ALL {
        for s in c.view(split).screens() {
            assert_eq!(c.split_of(s), Some(split));
        }
    }
}

#[test]
fn downscaled_screens_keep_geometry_consistent() {
    let dir = common::fixture_dir();
    let options = LoadOptions {
        max_side: Some(80),
        ..LoadOptions::default()
    };
    let (c, _) = load_corpus(&dir, &dir.join("summaries.csv"), None, &options).unwrap();
    for s in c.screens() {
        assert_eq!((s.screenshot.width(), s.screenshot.height()), (45, 80));
        assert_eq!(s.tree.root().bounds.right, 45);
        s.validate().unwrap();
    }
}

#[test]
fn csv_readers() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    fs::write(&p, "screenId,summary\n1,\"a, b\"\n1,c\n2,d\n").unwrap();
    let s = read_summaries(&p).unwrap();
    assert_eq!(s["1"], vec!["a, b", "c"]);
    fs::write(&p, "id,text\n1,a\n").unwrap();
    assert!(read_summaries(&p).is_err());
    fs::write(&p, "screenId,labelerIndex,left,top,right,bottom\n7,1,5,5,1,1\n7,0,0,0,2,2\n").unwrap();
    let sfa = read_sfa(&p).unwrap();
    assert_eq!(sfa["7"][0].labeler, 0);
    // corners are normalized
    assert_eq!((sfa["7"][1].rect.left, sfa["7"][1].rect.right), (1, 5));
    fs::write(&p, "screenId,labelerIndex,left,top,right,bottom\n7,1,x,5,1,1\n").unwrap();
    assert!(read_sfa(&p).unwrap_err().to_string().contains("row 2"));
}

#[test]
fn word_vector_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("v.txt");
    fs::write(&p, "a 1 2 3\nb 4 5 6\n").unwrap();
    let t = load_word_vectors(&p, None, None).unwrap();
    assert_eq!((t.len(), t.dim()), (2, 3));
    assert_eq!(t.get("b").unwrap(), &[4.0, 5.0, 6.0]);

    let short: String = format!("w {}\n", vec!["0.1"; 299].join(" "));
    let full: String = format!("v {}\n", vec!["0.1"; 300].join(" "));
    fs::write(&p, format!("{full}{short}")).unwrap();
    let err = load_word_vectors(&p, Some(300), None).unwrap_err();
    match err.as_core() {
        Some(uisum::core::Error::Format { line, .. }) => assert_eq!(*line, 2),
        other => panic!("unexpected {other:?}"),
    }
    // lines outside the kept set are still validated
    let keep: BTreeSet<String> = ["v".to_string()].into();
    assert!(load_word_vectors(&p, None, Some(&keep)).is_err());
    fs::write(&p, format!("{full}x 1\n")).unwrap();
    assert!(load_word_vectors(&p, None, Some(&keep)).is_err());
    fs::write(&p, "a 1 2\na 3 4\nb 5 6\n").unwrap();
    let keep: BTreeSet<String> = ["a".to_string()].into();
    let t = load_word_vectors(&p, None, Some(&keep)).unwrap();
    assert_eq!(t.len(), 1);
    assert_eq!(t.get("a").unwrap(), &[1.0, 2.0]);
}

#[test]
fn vocabulary_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let v = Vocabulary::from_tokens(["login", "page", "of"]);
    let p = dir.path().join("vocab.txt");
    write_vocab(&p, &v).unwrap();
    let text = fs::read_to_string(&p).unwrap();
    assert_eq!(text, "login\npage\nof\n");
    let back = read_vocab(&p).unwrap();
    assert_eq!(back, v);
    assert_eq!(back.encode("page"), 5);

    let c = ClassVocab::from_names(["Button".to_string(), "TextView".to_string()]);
    let p = dir.path().join("classes.txt");
    write_classes(&p, &c).unwrap();
    assert_eq!(read_classes(&p).unwrap(), c);

    fs::write(dir.path().join("dup.txt"), "a\na\n").unwrap();
    assert!(read_vocab(&dir.path().join("dup.txt")).is_err());
}
