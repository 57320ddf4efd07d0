//! Screen featurization: BFS-flattened elements with categorical, positional,
//! textual and pixel features, plus the app-description row.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Screen;
use crate::image::RgbImage;
use crate::math;
use crate::text::tokenize;
use crate::tree::{Rect, UiElement, UiTree};
use crate::vocab::EmbeddingTable;
use crate::{Error, Result};

/// Side length of the square grayscale element crops.
pub const CROP_SIZE: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    /// Buckets per bounds coordinate.
    pub num_buckets: usize,
    /// Tree-position categoricals (pre/post order, depth) are clamped below this.
    pub max_position: usize,
    pub max_elements: usize,
    pub include_invisible: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            num_buckets: 32,
            max_position: 256,
            max_elements: 128,
            include_invisible: false,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_buckets == 0 || self.max_position == 0 || self.max_elements == 0 {
            return Err(Error::Config(
                "num_buckets, max_position and max_elements must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Stable textual form, used to key feature caches.
    pub fn fingerprint(&self) -> String {
        alloc::format!(
            "buckets={};max_position={};max_elements={};include_invisible={};crop={}",
            self.num_buckets, self.max_position, self.max_elements, self.include_invisible, CROP_SIZE
        )
    }
}

/// Android class-name vocabulary; index 0 is the catch-all OTHER category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassVocab {
    names: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl ClassVocab {
    pub const OTHER: u32 = 0;
    pub const DEFAULT_TOP_K: usize = 100;

    /// Top-`k` class names by element count over the given screens
    /// (ties broken lexicographically).
    pub fn build<'a>(screens: impl IntoIterator<Item = &'a Screen>, k: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in screens {
            for e in s.tree.elements() {
                *counts.entry(e.class_name.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1));
        Self::from_names(ranked.into_iter().take(k).map(|(n, _)| n.to_string()))
    }

    pub fn from_names(names: impl IntoIterator<Item = String>) -> Self {
        let mut v = ClassVocab {
            names: vec!["<other>".to_string()],
            index: BTreeMap::new(),
        };
        for n in names {
            if !v.index.contains_key(&n) {
                v.index.insert(n.clone(), v.names.len() as u32);
                v.names.push(n);
            }
        }
        v
    }

    pub fn id(&self, class_name: &str) -> u32 {
        self.index.get(class_name).copied().unwrap_or(Self::OTHER)
    }

    /// Number of categories including OTHER.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.len() == 1
    }

    /// Named classes (without OTHER) in index order.
    pub fn names(&self) -> &[String] {
        &self.names[1..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceTag {
    Element,
    AppDescription,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementFeatures {
    pub class_id: u32,
    pub clickable: bool,
    /// Bucketized left, top, right, bottom.
    pub spatial: [u32; 4],
    pub pre_order: u32,
    pub post_order: u32,
    pub depth: u32,
    pub text_embedding: Vec<f64>,
    /// Vocabulary-independent tokens of the element's own text.
    pub text_tokens: Vec<String>,
    /// `CROP_SIZE x CROP_SIZE` grayscale crop, row-major, values in `[0, 1]`.
    pub image_crop: Vec<f32>,
    /// Bounds were empty after clipping; the crop is all zeros.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenFeatures {
    pub screen_id: String,
    pub elements: Vec<ElementFeatures>,
    pub app_desc_embedding: Vec<f64>,
    pub has_app_description: bool,
    /// Elements dropped by the `max_elements` limit.
    pub truncated: usize,
}

impl ScreenFeatures {
    /// Element rows plus the trailing app-description row.
    pub fn num_rows(&self) -> usize {
        self.elements.len() + 1
    }

    pub fn source_tag(&self, row: usize) -> SourceTag {
        if row == self.elements.len() {
            SourceTag::AppDescription
        } else {
            SourceTag::Element
        }
    }
}

/// Level-order traversal; siblings keep their document order. Invisible
/// elements are skipped (their subtrees are still visited) unless
/// `include_invisible` is set.
pub fn flatten_bfs(tree: &UiTree, include_invisible: bool) -> Vec<&UiElement> {
    let mut out = Vec::with_capacity(tree.len());
    if tree.is_empty() {
        return out;
    }
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        let e = tree.get(id).expect("child ids are valid");
        if include_invisible || e.visible_to_user {
            out.push(e);
        }
        queue.extend(e.children.iter().copied());
    }
    out
}

/// Normalizes each coordinate by the screen size and quantizes it into
/// `num_buckets` bins, clamping to the valid range.
pub fn bucketize_bounds(bounds: &Rect, screen: (u32, u32), num_buckets: usize) -> Result<[u32; 4]> {
    let (w, h) = screen;
    if w == 0 || h == 0 {
        return Err(Error::Featurize {
            path: String::new(),
            message: alloc::format!("screen has zero dimension {w}x{h}"),
        });
    }
    if num_buckets == 0 {
        return Err(Error::Config("num_buckets must be at least 1".into()));
    }
    let q = |v: i32, dim: u32| -> u32 {
        let x = math::floor(v as f64 / dim as f64 * num_buckets as f64);
        x.clamp(0.0, (num_buckets - 1) as f64) as u32
    };
    Ok([
        q(bounds.left, w),
        q(bounds.top, h),
        q(bounds.right, w),
        q(bounds.bottom, h),
    ])
}

/// Crops the element, converts to grayscale, resizes bilinearly to 64x64.
/// Returns the crop and whether the bounds were degenerate (all-zero crop).
pub fn crop_element_image(screenshot: &RgbImage, bounds: &Rect) -> (Vec<f32>, bool) {
    match screenshot.crop_gray(bounds) {
        Some(gray) => {
            let r = gray.resize_bilinear(CROP_SIZE, CROP_SIZE);
            (
                r.data.iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect(),
                false,
            )
        }
        None => (vec![0.0; CROP_SIZE * CROP_SIZE], true),
    }
}

pub fn featurize_screen(
    screen: &Screen,
    table: &EmbeddingTable,
    classes: &ClassVocab,
    config: &FeatureConfig,
) -> Result<ScreenFeatures> {
    config.validate()?;
    let dims = (screen.screenshot.width(), screen.screenshot.height());
    let flat = flatten_bfs(&screen.tree, config.include_invisible);
    let truncated = flat.len().saturating_sub(config.max_elements);
    let clamp = |v: usize| v.min(config.max_position - 1) as u32;

    let mut elements = Vec::with_capacity(flat.len().min(config.max_elements));
    for e in flat.into_iter().take(config.max_elements) {
        let spatial = bucketize_bounds(&e.bounds, dims, config.num_buckets).map_err(|err| {
            Error::Featurize {
                path: alloc::format!("{}:{}", screen.screen_id, screen.tree.path_of(e.node_id)),
                message: alloc::format!("{err}"),
            }
        })?;
        let text_tokens = e.text.as_deref().map(tokenize).unwrap_or_default();
        let (image_crop, degenerate) = crop_element_image(&screen.screenshot, &e.bounds);
        elements.push(ElementFeatures {
            class_id: classes.id(&e.class_name),
            clickable: e.clickable,
            spatial,
            pre_order: clamp(e.pre_order),
            post_order: clamp(e.post_order),
            depth: clamp(e.depth),
            text_embedding: table.pooled(&text_tokens),
            text_tokens,
            image_crop,
            degenerate,
        });
    }

    let desc = screen
        .app_description
        .as_deref()
        .filter(|d| !d.trim().is_empty());
    let app_desc_embedding = match desc {
        Some(d) => table.pooled(&tokenize(d)),
        None => vec![0.0; table.dim()],
    };
    Ok(ScreenFeatures {
        screen_id: screen.screen_id.clone(),
        elements,
        app_desc_embedding,
        has_app_description: desc.is_some(),
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::NodeSpec;

    fn node(name: &str) -> NodeSpec {
        NodeSpec::new(name, Rect::new(0, 0, 10, 10))
    }

    #[test]
    fn bfs_order() {
        let t = UiTree::from_spec(&node("root").with_children(vec![
            node("A").with_children(vec![node("C")]),
            node("B"),
        ]));
        let names: Vec<&str> = flatten_bfs(&t, false)
            .iter()
            .map(|e| e.class_name.as_str())
            .collect();
        assert_eq!(names, ["root", "A", "B", "C"]);
        let single = UiTree::from_spec(&node("x"));
        assert_eq!(flatten_bfs(&single, false).len(), 1);
    }

    #[test]
    fn bfs_visibility_filter() {
        let t = UiTree::from_spec(&node("root").with_children(vec![
            node("hidden").visible(false).with_children(vec![node("C")]),
            node("B"),
        ]));
        let names: Vec<&str> = flatten_bfs(&t, false)
            .iter()
            .map(|e| e.class_name.as_str())
            .collect();
        assert_eq!(names, ["root", "B", "C"]);
        assert_eq!(flatten_bfs(&t, true).len(), 4);
    }

    #[test]
    fn bucket_extremes_and_midpoint() {
        let (w, h) = (1440, 2560);
        assert_eq!(
            bucketize_bounds(&Rect::new(0, 0, w, h), (w as u32, h as u32), 32).unwrap(),
            [0, 0, 31, 31]
        );
        let mid = Rect::new(w / 2, h / 2, w / 2, h / 2);
        assert_eq!(
            bucketize_bounds(&mid, (w as u32, h as u32), 32).unwrap(),
            [16, 16, 16, 16]
        );
        assert!(matches!(
            bucketize_bounds(&mid, (0, 10), 32),
            Err(Error::Featurize { .. })
        ));
        // Off-screen coordinates clamp.
        assert_eq!(
            bucketize_bounds(&Rect::new(-50, -1, 5000, 9000), (100, 100), 4).unwrap(),
            [0, 0, 3, 3]
        );
    }

    #[test]
    fn constant_crops() {
        let white = RgbImage::filled(40, 80, [255, 255, 255]);
        let (c, deg) = crop_element_image(&white, &Rect::new(3, 5, 20, 70));
        assert!(!deg);
        assert_eq!(c.len(), 64 * 64);
        assert!(c.iter().all(|&v| v == 1.0));
        let black = RgbImage::filled(40, 80, [0, 0, 0]);
        let (c, _) = crop_element_image(&black, &Rect::new(3, 5, 20, 70));
        assert!(c.iter().all(|&v| v == 0.0));
        let (c, deg) = crop_element_image(&white, &Rect::new(5, 5, 5, 30));
        assert!(deg);
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn checkerboard_crop_mean() {
        let mut img = RgbImage::filled(4, 4, [0, 0, 0]);
        img.put(1, 1, [255, 255, 255]);
        img.put(2, 2, [255, 255, 255]);
        let (c, _) = crop_element_image(&img, &Rect::new(1, 1, 3, 3));
        let mean = c.iter().map(|&v| v as f64).sum::<f64>() / c.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn class_vocab_top_k() {
        let v = ClassVocab::from_names(["a".to_string(), "b".to_string()]);
        assert_eq!(v.id("a"), 1);
        assert_eq!(v.id("zzz"), ClassVocab::OTHER);
        assert_eq!(v.len(), 3);
    }
}
