//! Annotated screens, app-wise dataset splits and summary clean-up.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::image::RgbImage;
use crate::tree::{Rect, UiTree};
use crate::{Error, Result};

/// Default stop phrases removed from summaries before analysis and training.
pub const DEFAULT_STOP_PHRASES: [&str; 8] = [
    "in the app",
    "in this app",
    "in an app",
    "in a app",
    "of the app",
    "of this app",
    "on the app",
    "on this app",
];

/// Maximum number of summaries kept per screen.
pub const MAX_SUMMARIES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" | "training" => Some(Split::Train),
            "val" | "valid" | "validation" | "dev" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Screen {
    pub screen_id: String,
    pub app_id: String,
    pub tree: UiTree,
    pub screenshot: RgbImage,
    pub summaries: Vec<String>,
    pub sfa_boxes: Vec<Rect>,
    pub app_description: Option<String>,
}

impl Screen {
    /// Checks the per-screen invariants: 1..=5 non-blank summaries and SFA
    /// boxes inside the screenshot.
    pub fn validate(&self) -> Result<()> {
        if self.summaries.is_empty() || self.summaries.len() > MAX_SUMMARIES {
            return Err(Error::Input(alloc::format!(
                "screen {} has {} summaries (expected 1..={MAX_SUMMARIES})",
                self.screen_id,
                self.summaries.len()
            )));
        }
        if self.summaries.iter().any(|s| s.trim().is_empty()) {
            return Err(Error::Input(alloc::format!(
                "screen {} has a blank summary",
                self.screen_id
            )));
        }
        let frame = Rect::new(
            0,
            0,
            self.screenshot.width() as i32,
            self.screenshot.height() as i32,
        );
        if let Some(b) = self.sfa_boxes.iter().find(|b| !frame.contains(b)) {
            return Err(Error::Input(alloc::format!(
                "screen {}: SFA box {b:?} lies outside the {}x{} screenshot",
                self.screen_id,
                self.screenshot.width(),
                self.screenshot.height()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    screens: BTreeMap<String, Screen>,
    splits: BTreeMap<Split, BTreeSet<String>>,
}

/// Per-split counts, as reported by dataset statistics tables.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitCounts {
    pub apps: usize,
    pub screens: usize,
    pub summaries: usize,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a screen, replacing any previous screen with the same id.
    pub fn insert(&mut self, screen: Screen) {
        self.screens.insert(screen.screen_id.clone(), screen);
    }

    pub fn len(&self) -> usize {
        self.screens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.screens.is_empty()
    }

    pub fn get(&self, screen_id: &str) -> Option<&Screen> {
        self.screens.get(screen_id)
    }

    /// All screens ordered by screen id.
    pub fn screens(&self) -> impl Iterator<Item = &Screen> {
        self.screens.values()
    }

    pub fn summary_count(&self) -> usize {
        self.screens.values().map(|s| s.summaries.len()).sum()
    }

    pub fn app_ids(&self) -> BTreeSet<&str> {
        self.screens.values().map(|s| s.app_id.as_str()).collect()
    }

    pub fn counts(&self) -> SplitCounts {
        SplitCounts {
            apps: self.app_ids().len(),
            screens: self.len(),
            summaries: self.summary_count(),
        }
    }

    pub fn has_splits(&self) -> bool {
        !self.splits.is_empty()
    }

    pub fn split_apps(&self, split: Split) -> Option<&BTreeSet<String>> {
        self.splits.get(&split)
    }

    pub fn split_of(&self, screen: &Screen) -> Option<Split> {
        self.splits
            .iter()
            .find(|(_, apps)| apps.contains(&screen.app_id))
            .map(|(&s, _)| s)
    }

    /// Read-only view restricted to one split.
    pub fn view(&self, split: Split) -> SplitView<'_> {
        SplitView {
            corpus: self,
            split,
        }
    }

    /// Counts of apps/screens/summaries present in the corpus for a split.
    pub fn split_counts(&self, split: Split) -> SplitCounts {
        let view = self.view(split);
        let mut apps = BTreeSet::new();
        let mut counts = SplitCounts::default();
        for s in view.screens() {
            apps.insert(s.app_id.as_str());
            counts.screens += 1;
            counts.summaries += s.summaries.len();
        }
        counts.apps = apps.len();
        counts
    }

    /// Assigns app-wise splits. Every app in the corpus must be listed in
    /// exactly one split list; listed apps absent from the corpus are ignored.
    pub fn assign_splits(&mut self, lists: &BTreeMap<Split, Vec<String>>) -> Result<()> {
        let mut owner: BTreeMap<&str, Split> = BTreeMap::new();
        for (&split, apps) in lists {
            for app in apps {
                if let Some(&prev) = owner.get(app.as_str()) {
                    // Repeats inside the same list are harmless duplicates.
                    if prev != split {
                        return Err(Error::SplitOverlap(app.clone()));
                    }
                }
                owner.insert(app.as_str(), split);
            }
        }
        let uncovered: Vec<String> = self
            .app_ids()
            .into_iter()
            .filter(|a| !owner.contains_key(a))
            .map(ToString::to_string)
            .collect();
        if !uncovered.is_empty() {
            return Err(Error::SplitCoverage(uncovered));
        }
        let present = self.app_ids();
        let mut splits: BTreeMap<Split, BTreeSet<String>> =
            Split::ALL.iter().map(|&s| (s, BTreeSet::new())).collect();
        for (app, split) in owner {
            if present.contains(app) {
                splits.get_mut(&split).unwrap().insert(app.to_string());
            }
        }
        self.splits = splits;
        Ok(())
    }
}

/// Screens of one split. Data accessors for training and evaluation go
/// through views so code cannot silently read another split's summaries.
#[derive(Debug, Clone, Copy)]
pub struct SplitView<'a> {
    corpus: &'a Corpus,
    split: Split,
}

impl<'a> SplitView<'a> {
    pub fn split(&self) -> Split {
        self.split
    }

    pub fn screens(&self) -> impl Iterator<Item = &'a Screen> + 'a {
        let apps = self.corpus.splits.get(&self.split);
        self.corpus
            .screens
            .values()
            .filter(move |s| apps.is_some_and(|a| a.contains(&s.app_id)))
    }

    pub fn get(&self, screen_id: &str) -> Option<&'a Screen> {
        let s = self.corpus.get(screen_id)?;
        let apps = self.corpus.splits.get(&self.split)?;
        apps.contains(&s.app_id).then_some(s)
    }

    pub fn len(&self) -> usize {
        self.screens().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Result of stop-phrase removal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stripped {
    pub text: String,
    /// Removal would have emptied the summary, so the original was kept.
    pub kept_original: bool,
}

/// Removes every whole-phrase, case-insensitive occurrence of the stop
/// phrases (repeating until nothing changes) and collapses whitespace.
pub fn strip_stop_phrases<S: AsRef<str>>(summary: &str, stop_phrases: &[S]) -> Stripped {
    let mut text = collapse_whitespace(summary);
    loop {
        let mut changed = false;
        for phrase in stop_phrases {
            let phrase = collapse_whitespace(phrase.as_ref());
            if phrase.is_empty() {
                continue;
            }
            if let Some(next) = remove_phrase(&text, &phrase) {
                text = collapse_whitespace(&next);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if text.is_empty() {
        Stripped {
            text: collapse_whitespace(summary),
            kept_original: true,
        }
    } else {
        Stripped {
            text,
            kept_original: false,
        }
    }
}

fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Removes all boundary-delimited occurrences of `phrase`; `None` if there were none.
fn remove_phrase(text: &str, phrase: &str) -> Option<String> {
    let chars: Vec<char> = text.chars().collect();
    let pat: Vec<char> = phrase.chars().flat_map(char::to_lowercase).collect();
    let lower: Vec<char> = chars
        .iter()
        .map(|c| c.to_lowercase().next().unwrap_or(*c))
        .collect();
    let is_word = |c: char| c.is_alphanumeric();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut found = false;
    while i < chars.len() {
        let end = i + pat.len();
        let matches = end <= lower.len()
            && lower[i..end] == pat[..]
            && (i == 0 || !is_word(chars[i - 1]) || !is_word(pat[0]))
            && (end == chars.len() || !is_word(chars[end]) || !is_word(pat[pat.len() - 1]));
        if matches {
            found = true;
            out.push(' ');
            i = end;
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    found.then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::NodeSpec;
    use alloc::vec;

    fn screen(id: &str, app: &str) -> Screen {
        Screen {
            screen_id: id.into(),
            app_id: app.into(),
            tree: UiTree::from_spec(&NodeSpec::new("FrameLayout", Rect::new(0, 0, 10, 10))),
            screenshot: RgbImage::filled(10, 10, [0, 0, 0]),
            summaries: vec!["a b".into()],
            sfa_boxes: vec![],
            app_description: None,
        }
    }

    #[test]
    fn strips_phrases() {
        let s = strip_stop_phrases("login page in the app", &DEFAULT_STOP_PHRASES);
        assert_eq!(s.text, "login page");
        assert!(!s.kept_original);
        assert_eq!(
            strip_stop_phrases("login page", &DEFAULT_STOP_PHRASES).text,
            "login page"
        );
        assert_eq!(
            strip_stop_phrases("Settings  In The App page", &DEFAULT_STOP_PHRASES).text,
            "Settings page"
        );
    }

    #[test]
    fn strip_respects_word_boundaries() {
        // "within the app" must not lose "with".
        let s = strip_stop_phrases("options within the apparel", &DEFAULT_STOP_PHRASES);
        assert_eq!(s.text, "options within the apparel");
    }

    #[test]
    fn strip_keeps_original_when_emptied() {
        let s = strip_stop_phrases("in the app", &DEFAULT_STOP_PHRASES);
        assert_eq!(s.text, "in the app");
        assert!(s.kept_original);
    }

    #[test]
    fn strip_reaches_fixpoint() {
        let once = strip_stop_phrases("page in the in the app app", &DEFAULT_STOP_PHRASES);
        assert_eq!(once.text, "page");
    }

    #[test]
    fn split_assignment() {
        let mut c = Corpus::new();
        c.insert(screen("s1", "a"));
        c.insert(screen("s2", "a"));
        c.insert(screen("s3", "b"));
        let mut lists = BTreeMap::new();
        lists.insert(Split::Train, vec!["a".to_string()]);
        lists.insert(Split::Test, vec!["b".to_string(), "zzz".to_string()]);
        c.assign_splits(&lists).unwrap();
        assert_eq!(c.split_counts(Split::Train).screens, 2);
        assert_eq!(c.split_counts(Split::Test).apps, 1);
        assert!(c.view(Split::Validation).is_empty());
        assert!(c.view(Split::Train).get("s3").is_none());

        lists.insert(Split::Validation, vec!["a".to_string()]);
        assert_eq!(
            c.assign_splits(&lists),
            Err(Error::SplitOverlap("a".into()))
        );
        let mut only_a = BTreeMap::new();
        only_a.insert(Split::Train, vec!["a".to_string()]);
        assert!(matches!(
            c.assign_splits(&only_a),
            Err(Error::SplitCoverage(v)) if v == vec!["b".to_string()]
        ));
    }

    #[test]
    fn single_app_degenerate_split() {
        let mut c = Corpus::new();
        c.insert(screen("s1", "a"));
        let mut lists = BTreeMap::new();
        lists.insert(Split::Train, vec!["a".to_string()]);
        c.assign_splits(&lists).unwrap();
        assert_eq!(c.split_counts(Split::Train).screens, 1);
        assert_eq!(c.split_counts(Split::Validation), SplitCounts::default());
        assert_eq!(c.split_counts(Split::Test), SplitCounts::default());
    }

    #[test]
    fn validate_rejects_bad_sfa() {
        let mut s = screen("s", "a");
        s.validate().unwrap();
        s.sfa_boxes.push(Rect::new(0, 0, 11, 5));
        assert!(s.validate().is_err());
    }
}
