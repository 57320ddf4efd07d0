//! Loading annotated screens from a dataset directory.
//!
//! Layout under the root directory:
//!
//! ```text
//! hierarchies/<screen_id>.json
//! screenshots/<screen_id>.jpg | .png
//! sfa.csv              (optional)
//! train_apps.txt, val_apps.txt, test_apps.txt
//! ```
//!
//! The summaries and app-details CSVs are passed explicitly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use log::{info, warn};
use rayon::prelude::*;
use uisum_core::corpus::{Corpus, Screen, Split, MAX_SUMMARIES};
use uisum_core::image::RgbImage;
use uisum_core::tree::Rect;

use crate::hierarchy::parse_view_hierarchy;
use crate::{Error, Result};

/// Coordinate frame of hierarchy bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HierarchyFrame {
    /// The root's extent when it is anchored at the origin, else `RICO_FRAME`.
    #[default]
    Auto,
    /// Bounds are already in screenshot pixels.
    Screenshot,
    Fixed(u32, u32),
}

/// Device resolution of the RICO view hierarchies.
pub const RICO_FRAME: (u32, u32) = (1440, 2560);

impl HierarchyFrame {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(HierarchyFrame::Auto),
            "screenshot" => Some(HierarchyFrame::Screenshot),
            _ => {
                let (w, h) = s.split_once('x')?;
                Some(HierarchyFrame::Fixed(w.trim().parse().ok()?, h.trim().parse().ok()?))
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub frame: HierarchyFrame,
    /// Downscale screenshots so the longer side is at most this many pixels;
    /// tree bounds and SFA boxes follow. `None` keeps full resolution.
    pub max_side: Option<u32>,
    /// Defaults to `<root>/sfa.csv` when it exists.
    pub sfa_file: Option<PathBuf>,
}

/// Everything that was dropped or altered while loading.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkipReport {
    pub missing_hierarchy: Vec<String>,
    pub missing_screenshot: Vec<String>,
    /// Screens whose hierarchy or screenshot could not be decoded.
    pub unreadable: Vec<(String, String)>,
    pub blank_summaries: usize,
    /// Summaries beyond the per-screen maximum.
    pub dropped_summaries: usize,
    pub clipped_sfa_boxes: usize,
    /// SFA rows for screens that were not loaded.
    pub orphan_sfa_rows: usize,
    /// Screens whose app id fell back to the screen id.
    pub unknown_app: usize,
}

impl SkipReport {
    pub fn skipped(&self) -> usize {
        self.missing_hierarchy.len() + self.missing_screenshot.len() + self.unreadable.len()
    }

    pub fn skipped_ids(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .missing_hierarchy
            .iter()
            .chain(&self.missing_screenshot)
            .map(String::as_str)
            .chain(self.unreadable.iter().map(|(id, _)| id.as_str()))
            .collect();
        v.sort_unstable();
        v
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().flexible(false).from_reader(f))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::format(path, format!("{kind:?}")),
    }
}

/// Column indices of `names` in the header; an empty file has no header and
/// yields `None`.
fn columns(path: &Path, rdr: &mut csv::Reader<fs::File>, names: &[&str]) -> Result<Option<Vec<usize>>> {
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.is_empty() {
        return Ok(None);
    }
    names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h.trim().trim_start_matches('\u{feff}') == *n)
                .ok_or_else(|| Error::format(path, format!("missing column {n:?} in header")))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Reads `screenId,summary` rows, grouped by screen in file order.
pub fn read_summaries(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let mut rdr = csv_reader(path)?;
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let Some(cols) = columns(path, &mut rdr, &["screenId", "summary"])? else {
        return Ok(out);
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let id = rec.get(cols[0]).unwrap_or("").trim();
        if id.is_empty() {
            continue;
        }
        out.entry(id.to_string())
            .or_default()
            .push(rec.get(cols[1]).unwrap_or("").to_string());
    }
    Ok(out)
}

/// Reads `appId,description`; the first row for an app wins.
pub fn read_app_details(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv_reader(path)?;
    let mut out = BTreeMap::new();
    let Some(cols) = columns(path, &mut rdr, &["appId", "description"])? else {
        return Ok(out);
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let desc = rec.get(cols[1]).unwrap_or("").trim();
        if !desc.is_empty() {
            out.entry(rec.get(cols[0]).unwrap_or("").trim().to_string())
                .or_insert_with(|| desc.to_string());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SfaRow {
    pub labeler: u32,
    pub rect: Rect,
}

/// Reads `screenId,labelerIndex,left,top,right,bottom`, ordered by labeler.
pub fn read_sfa(path: &Path) -> Result<BTreeMap<String, Vec<SfaRow>>> {
    let mut rdr = csv_reader(path)?;
    let mut out: BTreeMap<String, Vec<SfaRow>> = BTreeMap::new();
    let names = ["screenId", "labelerIndex", "left", "top", "right", "bottom"];
    let Some(cols) = columns(path, &mut rdr, &names)? else {
        return Ok(out);
    };
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let num = |k: usize| -> Result<i64> {
            let raw = rec.get(cols[k]).unwrap_or("").trim();
            raw.parse::<i64>()
                .or_else(|_| raw.parse::<f64>().map(|v| v.round() as i64))
                .map_err(|_| Error::format(path, format!("row {}: bad {} value {raw:?}", i + 2, names[k])))
        };
        let clamp = |v: i64| v.clamp(i32::MIN as i64, i32::MAX as i64) as i32;
        let row = SfaRow {
            labeler: num(1)?.max(0) as u32,
            rect: Rect::normalized(clamp(num(2)?), clamp(num(3)?), clamp(num(4)?), clamp(num(5)?)),
        };
        out.entry(rec.get(cols[0]).unwrap_or("").trim().to_string())
            .or_default()
            .push(row);
    }
    for rows in out.values_mut() {
        rows.sort_by_key(|r| r.labeler);
    }
    Ok(out)
}

/// One app id per line; blank lines and `#` comments are ignored.
pub fn read_id_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

pub fn split_file_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train_apps.txt",
        Split::Validation => "val_apps.txt",
        Split::Test => "test_apps.txt",
    }
}

/// Reads the three split lists from `dir`.
pub fn read_split_lists(dir: &Path) -> Result<BTreeMap<Split, Vec<String>>> {
    Split::ALL
        .iter()
        .map(|&s| Ok((s, read_id_list(&dir.join(split_file_name(s)))?)))
        .collect()
}

fn find_screenshot(dir: &Path, id: &str) -> Option<PathBuf> {
    ["jpg", "png", "jpeg", "JPG", "PNG"]
        .iter()
        .map(|ext| dir.join(format!("{id}.{ext}")))
        .find(|p| p.is_file())
}

pub fn load_image(path: &Path) -> Result<image::RgbImage> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    })?;
    Ok(img.into_rgb8())
}

pub fn to_core_image(img: image::RgbImage) -> RgbImage {
    let (w, h) = img.dimensions();
    RgbImage::from_raw(w, h, img.into_raw())
}

fn scaled_size(w: u32, h: u32, max_side: Option<u32>) -> (u32, u32) {
    match max_side {
        Some(m) if m > 0 && w.max(h) > m => {
            let s = m as f64 / w.max(h) as f64;
            (((w as f64 * s).round() as u32).max(1), ((h as f64 * s).round() as u32).max(1))
        }
        _ => (w, h),
    }
}

fn scale_rect(r: &Rect, from: (u32, u32), to: (u32, u32)) -> Rect {
    if from == to || from.0 == 0 || from.1 == 0 {
        return *r;
    }
    let sx = to.0 as f64 / from.0 as f64;
    let sy = to.1 as f64 / from.1 as f64;
    let s = |v: i32, f: f64| (v as f64 * f).round() as i32;
    Rect::new(s(r.left, sx), s(r.top, sy), s(r.right, sx), s(r.bottom, sy))
}

/// A screen before annotations are attached.
struct Loaded {
    screen: Screen,
    /// Screenshot size on disk, the frame SFA boxes are drawn in.
    original: (u32, u32),
}

enum Outcome {
    Loaded(Box<Loaded>),
    MissingHierarchy,
    MissingScreenshot,
    Unreadable(String),
}

fn load_one(root: &Path, id: &str, options: &LoadOptions, report_unknown: &mut bool) -> Outcome {
    let hpath = root.join("hierarchies").join(format!("{id}.json"));
    if !hpath.is_file() {
        return Outcome::MissingHierarchy;
    }
    let Some(spath) = find_screenshot(&root.join("screenshots"), id) else {
        return Outcome::MissingScreenshot;
    };
    let text = match fs::read_to_string(&hpath) {
        Ok(t) => t,
        Err(e) => return Outcome::Unreadable(Error::io(&hpath, e).to_string()),
    };
    let h = match parse_view_hierarchy(&text, &hpath) {
        Ok(h) => h,
        Err(e) => return Outcome::Unreadable(e.to_string()),
    };
    let img = match load_image(&spath) {
        Ok(i) => i,
        Err(e) => return Outcome::Unreadable(e.to_string()),
    };
    let original = img.dimensions();
    let target = scaled_size(original.0, original.1, options.max_side);
    let img = if target != original {
        image::imageops::resize(&img, target.0, target.1, FilterType::Triangle)
    } else {
        img
    };
    let app_id = match h.package() {
        Some(p) => p.to_string(),
        None => {
            *report_unknown = true;
            id.to_string()
        }
    };
    let mut tree = h.tree;
    let from = match options.frame {
        HierarchyFrame::Screenshot => original,
        HierarchyFrame::Fixed(w, h) => (w, h),
        HierarchyFrame::Auto => {
            let r = tree.root().bounds;
            if r.left == 0 && r.top == 0 && r.right > 0 && r.bottom > 0 {
                (r.right as u32, r.bottom as u32)
            } else {
                RICO_FRAME
            }
        }
    };
    tree.rescale(from.0, from.1, target.0, target.1);
    Outcome::Loaded(Box::new(Loaded {
        screen: Screen {
            screen_id: id.to_string(),
            app_id,
            tree,
            screenshot: to_core_image(img),
            summaries: Vec::new(),
            sfa_boxes: Vec::new(),
            app_description: None,
        },
        original,
    }))
}

/// Loads every screen referenced by the summaries file. Screens without a
/// hierarchy or screenshot, or whose files cannot be decoded, are skipped and
/// listed in the report.
pub fn load_corpus(
    root: &Path,
    summaries_file: &Path,
    app_details_file: Option<&Path>,
    options: &LoadOptions,
) -> Result<(Corpus, SkipReport)> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    let summaries = read_summaries(summaries_file)?;
    let apps = match app_details_file {
        Some(p) => read_app_details(p)?,
        None => BTreeMap::new(),
    };
    let sfa_path = options
        .sfa_file
        .clone()
        .or_else(|| Some(root.join("sfa.csv")).filter(|p| p.is_file()));
    let mut sfa = match &sfa_path {
        Some(p) => read_sfa(p)?,
        None => BTreeMap::new(),
    };

    let ids: Vec<&String> = summaries.keys().collect();
    let outcomes: Vec<(Outcome, bool)> = ids
        .par_iter()
        .map(|id| {
            let mut unknown = false;
            let o = load_one(root, id, options, &mut unknown);
            (o, unknown)
        })
        .collect();

    let mut corpus = Corpus::new();
    let mut report = SkipReport::default();
    for (id, (outcome, unknown)) in ids.into_iter().zip(outcomes) {
        let loaded = match outcome {
            Outcome::Loaded(l) => l,
            Outcome::MissingHierarchy => {
                warn!("skipping screen {id}: no hierarchy file");
                report.missing_hierarchy.push(id.clone());
                continue;
            }
            Outcome::MissingScreenshot => {
                warn!("skipping screen {id}: no screenshot");
                report.missing_screenshot.push(id.clone());
                continue;
            }
            Outcome::Unreadable(msg) => {
                warn!("skipping screen {id}: {msg}");
                report.unreadable.push((id.clone(), msg));
                continue;
            }
        };
        let Loaded { mut screen, original } = *loaded;
        if unknown {
            report.unknown_app += 1;
        }
        let mut texts: Vec<String> = Vec::new();
        for s in &summaries[id] {
            let t = s.trim();
            if t.is_empty() {
                report.blank_summaries += 1;
            } else if texts.len() == MAX_SUMMARIES {
                report.dropped_summaries += 1;
            } else {
                texts.push(t.to_string());
            }
        }
        if texts.is_empty() {
            warn!("skipping screen {id}: all summaries are blank");
            report.unreadable.push((id.clone(), "no non-blank summaries".into()));
            continue;
        }
        if summaries[id].len() > MAX_SUMMARIES {
            warn!("screen {id}: keeping the first {MAX_SUMMARIES} of {} summaries", summaries[id].len());
        }
        screen.summaries = texts;
        let (w, h) = (screen.screenshot.width(), screen.screenshot.height());
        for row in sfa.remove(id.as_str()).unwrap_or_default().into_iter().take(MAX_SUMMARIES) {
            let scaled = scale_rect(&row.rect, original, (w, h));
            let clipped = scaled.clip_to(w, h);
            if clipped != scaled {
                report.clipped_sfa_boxes += 1;
            }
            screen.sfa_boxes.push(clipped);
        }
        screen.app_description = apps.get(&screen.app_id).cloned();
        screen
            .validate()
            .map_err(|e| Error::core(&root.join("hierarchies").join(format!("{id}.json")), e))?;
        corpus.insert(screen);
    }
    report.orphan_sfa_rows = sfa.values().map(Vec::len).sum();
    if report.clipped_sfa_boxes > 0 {
        warn!("{} SFA boxes were clipped to their screenshot", report.clipped_sfa_boxes);
    }
    info!(
        "loaded {} screens ({} summaries), skipped {}",
        corpus.len(),
        corpus.summary_count(),
        report.skipped()
    );
    Ok((corpus, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_parsing() {
        assert_eq!(HierarchyFrame::parse("auto"), Some(HierarchyFrame::Auto));
        assert_eq!(HierarchyFrame::parse("1440x2560"), Some(HierarchyFrame::Fixed(1440, 2560)));
        assert_eq!(HierarchyFrame::parse("14x"), None);
    }

    #[test]
    fn scaled_sizes() {
        assert_eq!(scaled_size(1080, 1920, Some(512)), (288, 512));
        assert_eq!(scaled_size(100, 50, Some(512)), (100, 50));
        assert_eq!(scaled_size(100, 50, None), (100, 50));
    }
}
