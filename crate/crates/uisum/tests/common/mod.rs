#![allow(dead_code)]

use std::path::{Path, PathBuf};

use uisum::core::corpus::Corpus;
use uisum::dataset::{load_corpus, read_split_lists, LoadOptions, SkipReport};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini")
}

/// The bundled fixture with splits assigned.
pub fn fixture_corpus() -> (Corpus, SkipReport) {
    let dir = fixture_dir();
    let (mut corpus, report) = load_corpus(
        &dir,
        &dir.join("summaries.csv"),
        Some(&dir.join("app_details.csv")),
        &LoadOptions::default(),
    )
    .unwrap();
    corpus.assign_splits(&read_split_lists(&dir).unwrap()).unwrap();
    (corpus, report)
}

/// Copies `ids` of the fixture (hierarchy, screenshot, summaries) into `dest`.
pub fn copy_subset(dest: &Path, ids: &[&str]) {
    let src = fixture_dir();
    std::fs::create_dir_all(dest.join("hierarchies")).unwrap();
    std::fs::create_dir_all(dest.join("screenshots")).unwrap();
    let mut csv = String::from("screenId,summary\n");
    let summaries = std::fs::read_to_string(src.join("summaries.csv")).unwrap();
    for id in ids {
        for sub in ["hierarchies", "screenshots"] {
            for ext in ["json", "png"] {
                let p = src.join(sub).join(format!("{id}.{ext}"));
                if p.exists() {
                    std::fs::copy(&p, dest.join(sub).join(format!("{id}.{ext}"))).unwrap();
                }
            }
        }
        for line in summaries.lines().filter(|l| l.starts_with(&format!("{id},"))) {
            csv.push_str(line);
            csv.push('\n');
        }
    }
    std::fs::write(dest.join("summaries.csv"), csv).unwrap();
}
