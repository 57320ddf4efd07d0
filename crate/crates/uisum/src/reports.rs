//! CSV outputs and inputs: predictions, loss curves, metric reports and the
//! dataset analyses.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use uisum_core::analysis::{LengthHistogram, SfaStats, WordAgreement};
use uisum_core::decode::Prediction;
use uisum_core::metrics::MetricReport;
use uisum_core::train::LossPoint;

use crate::codec::write_atomic;
use crate::{Error, Result};

fn to_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    write_atomic(path, &bytes)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<()> {
    to_csv(
        path,
        &["screenId", "rank", "score", "summary"],
        predictions.iter().map(|p| {
            vec![
                p.screen_id.clone(),
                p.rank.to_string(),
                format!("{:.6}", p.score),
                p.summary.clone(),
            ]
        }),
    )
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(f);
    let header = rdr
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    let want = ["screenId", "rank", "score", "summary"];
    if header.iter().collect::<Vec<_>>() != want {
        return Err(Error::format(path, format!("expected header {}", want.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let bad = |what: &str| Error::format(path, format!("row {}: invalid {what}", i + 2));
        let rank: usize = rec[1].trim().parse().map_err(|_| bad("rank"))?;
        if rank == 0 {
            return Err(bad("rank"));
        }
        out.push(Prediction {
            screen_id: rec[0].trim().to_string(),
            rank,
            score: rec[2].trim().parse().map_err(|_| bad("score"))?,
            summary: rec[3].to_string(),
        });
    }
    Ok(out)
}

/// Rank-1 summary per screen.
pub fn top_predictions(predictions: &[Prediction]) -> BTreeMap<String, String> {
    predictions
        .iter()
        .filter(|p| p.rank == 1)
        .map(|p| (p.screen_id.clone(), p.summary.clone()))
        .collect()
}

pub fn write_loss_curve(path: &Path, curve: &[LossPoint]) -> Result<()> {
    to_csv(
        path,
        &["step", "train_loss", "val_loss"],
        curve.iter().map(|p| {
            vec![p.step.to_string(), format!("{:.6}", p.train_loss), opt(p.val_loss)]
        }),
    )
}

/// One row with the corpus scores, columns in reporting order.
pub fn write_metric_report(path: &Path, report: &MetricReport) -> Result<()> {
    let cols = report.columns();
    let header: Vec<&str> = cols.iter().map(|c| c.0).collect();
    let row: Vec<String> = cols.iter().map(|c| format!("{:.4}", c.1)).collect();
    to_csv(path, &header, [row])
}

pub fn write_per_screen(path: &Path, report: &MetricReport) -> Result<()> {
    to_csv(
        path,
        &["screenId", "bleu1", "bleu2", "bleu3", "bleu4", "cider", "rouge_l", "meteor_lite"],
        report.per_screen.iter().map(|s| {
            let mut r = vec![s.screen_id.clone()];
            r.extend(s.bleu.iter().map(|b| format!("{:.6}", 100.0 * b)));
            r.extend([s.cider, s.rouge_l, s.meteor].iter().map(|v| format!("{:.6}", 100.0 * v)));
            r
        }),
    )
}

/// Fixed-width table of the corpus scores.
pub fn metric_table(report: &MetricReport) -> String {
    let cols = report.columns();
    let mut out = String::new();
    for (name, _) in &cols {
        let _ = write!(out, "{name:>12}");
    }
    out.push('\n');
    for (_, v) in &cols {
        let _ = write!(out, "{v:>12.1}");
    }
    out.push('\n');
    if report.degenerate_idf {
        out.push_str("note: fewer than two screens scored; CIDEr IDF is degenerate\n");
    }
    out
}

pub fn write_word_agreement(path: &Path, a: &WordAgreement) -> Result<()> {
    to_csv(
        path,
        &["word", "rank", "tp", "fp", "fn", "precision", "recall"],
        a.rows.iter().map(|r| {
            vec![
                r.word.clone(),
                r.rank.to_string(),
                r.tp.to_string(),
                r.fp.to_string(),
                r.fn_.to_string(),
                opt(r.precision),
                opt(r.recall),
            ]
        }),
    )
}

pub fn write_sfa_stats(path: &Path, s: &SfaStats) -> Result<()> {
    to_csv(
        path,
        &["mean_coverage", "mean_iou", "boxes", "screens_with_pairs"],
        [vec![
            opt(s.mean_coverage),
            opt(s.mean_iou),
            s.boxes.to_string(),
            s.screens_with_pairs.to_string(),
        ]],
    )
}

pub fn write_length_hist(path: &Path, h: &LengthHistogram) -> Result<()> {
    to_csv(
        path,
        &["length", "count"],
        h.counts
            .iter()
            .map(|(l, c)| vec![l.to_string(), c.to_string()]),
    )
}
