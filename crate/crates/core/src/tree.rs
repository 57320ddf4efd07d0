//! View-hierarchy trees.
//!
//! A [`UiTree`] stores its elements in pre-order, so an element's `node_id`
//! equals its pre-order position. Post-order positions and depths are
//! computed once at construction.

use alloc::string::String;
use alloc::vec::Vec;

/// Integer rectangle `(left, top, right, bottom)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Rect {
    pub left: i32,
    pub top: i32,
    pub right: i32,
    pub bottom: i32,
}

impl Rect {
    pub const fn new(left: i32, top: i32, right: i32, bottom: i32) -> Self {
        Rect {
            left,
            top,
            right,
            bottom,
        }
    }

    /// Builds a rectangle, swapping coordinates so that left ≤ right and top ≤ bottom.
    pub fn normalized(left: i32, top: i32, right: i32, bottom: i32) -> Self {
        Rect {
            left: left.min(right),
            top: top.min(bottom),
            right: left.max(right),
            bottom: top.max(bottom),
        }
    }

    pub fn width(&self) -> i64 {
        (self.right as i64 - self.left as i64).max(0)
    }

    pub fn height(&self) -> i64 {
        (self.bottom as i64 - self.top as i64).max(0)
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn is_degenerate(&self) -> bool {
        self.area() == 0
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let r = Rect {
            left: self.left.max(other.left),
            top: self.top.max(other.top),
            right: self.right.min(other.right),
            bottom: self.bottom.min(other.bottom),
        };
        (r.left < r.right && r.top < r.bottom).then_some(r)
    }

    /// Clips to `[0, width] x [0, height]`.
    pub fn clip_to(&self, width: u32, height: u32) -> Rect {
        let w = width as i32;
        let h = height as i32;
        Rect {
            left: self.left.clamp(0, w),
            top: self.top.clamp(0, h),
            right: self.right.clamp(0, w),
            bottom: self.bottom.clamp(0, h),
        }
    }

    pub fn contains(&self, other: &Rect) -> bool {
        other.left >= self.left
            && other.top >= self.top
            && other.right <= self.right
            && other.bottom <= self.bottom
    }

    /// Intersection over union. Two identical zero-area boxes have IoU 1.
    pub fn iou(&self, other: &Rect) -> f64 {
        if self == other {
            return 1.0;
        }
        let inter = self.intersection(other).map_or(0, |r| r.area());
        let union = self.area() + other.area() - inter;
        if union <= 0 {
            return 0.0;
        }
        inter as f64 / union as f64
    }
}

/// Owned, nested description of a view-hierarchy node, used to build and
/// serialize [`UiTree`]s.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeSpec {
    pub class_name: String,
    pub clickable: bool,
    pub visible_to_user: bool,
    pub bounds: Rect,
    pub text: Option<String>,
    pub children: Vec<NodeSpec>,
}

impl NodeSpec {
    pub fn new(class_name: impl Into<String>, bounds: Rect) -> Self {
        NodeSpec {
            class_name: class_name.into(),
            clickable: false,
            visible_to_user: true,
            bounds,
            text: None,
            children: Vec::new(),
        }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn with_children(mut self, children: Vec<NodeSpec>) -> Self {
        self.children = children;
        self
    }

    pub fn clickable(mut self, clickable: bool) -> Self {
        self.clickable = clickable;
        self
    }

    pub fn visible(mut self, visible: bool) -> Self {
        self.visible_to_user = visible;
        self
    }

    /// Number of nodes in this subtree.
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(NodeSpec::count).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UiElement {
    pub node_id: usize,
    pub class_name: String,
    pub clickable: bool,
    pub visible_to_user: bool,
    pub bounds: Rect,
    pub text: Option<String>,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
    pub pre_order: usize,
    pub post_order: usize,
    pub depth: usize,
}

impl UiElement {
    pub fn is_degenerate(&self) -> bool {
        self.bounds.is_degenerate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UiTree {
    elements: Vec<UiElement>,
}

impl UiTree {
    /// Flattens a nested node description, assigning pre-order ids,
    /// post-order positions and depths.
    pub fn from_spec(root: &NodeSpec) -> Self {
        let mut elements: Vec<UiElement> = Vec::with_capacity(root.count());
        // (node, parent id, depth)
        let mut stack: Vec<(&NodeSpec, Option<usize>, usize)> = alloc::vec![(root, None, 0)];
        while let Some((spec, parent, depth)) = stack.pop() {
            let id = elements.len();
            elements.push(UiElement {
                node_id: id,
                class_name: spec.class_name.clone(),
                clickable: spec.clickable,
                visible_to_user: spec.visible_to_user,
                bounds: spec.bounds,
                text: spec.text.clone(),
                children: Vec::with_capacity(spec.children.len()),
                parent,
                pre_order: id,
                post_order: 0,
                depth,
            });
            if let Some(p) = parent {
                elements[p].children.push(id);
            }
            for child in spec.children.iter().rev() {
                stack.push((child, Some(id), depth + 1));
            }
        }

        // Iterative post-order: children before parent, left to right.
        let mut next = 0;
        let mut visit: Vec<(usize, bool)> = alloc::vec![(0, false)];
        while let Some((id, expanded)) = visit.pop() {
            if expanded {
                elements[id].post_order = next;
                next += 1;
            } else {
                visit.push((id, true));
                for &c in elements[id].children.iter().rev() {
                    visit.push((c, false));
                }
            }
        }
        UiTree { elements }
    }

    /// Rebuilds the nested description (inverse of [`UiTree::from_spec`]).
    pub fn to_spec(&self) -> NodeSpec {
        fn build(tree: &UiTree, id: usize) -> NodeSpec {
            let e = &tree.elements[id];
            NodeSpec {
                class_name: e.class_name.clone(),
                clickable: e.clickable,
                visible_to_user: e.visible_to_user,
                bounds: e.bounds,
                text: e.text.clone(),
                children: e.children.iter().map(|&c| build(tree, c)).collect(),
            }
        }
        build(self, 0)
    }

    pub fn root(&self) -> &UiElement {
        &self.elements[0]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn get(&self, node_id: usize) -> Option<&UiElement> {
        self.elements.get(node_id)
    }

    /// Elements in pre-order.
    pub fn elements(&self) -> &[UiElement] {
        &self.elements
    }

    /// Human-readable path to a node, e.g. `root/1/0`.
    pub fn path_of(&self, node_id: usize) -> String {
        let mut parts = Vec::new();
        let mut cur = node_id;
        while let Some(parent) = self.elements[cur].parent {
            let idx = self.elements[parent]
                .children
                .iter()
                .position(|&c| c == cur)
                .unwrap_or(0);
            parts.push(idx);
            cur = parent;
        }
        let mut path = String::from("root");
        for idx in parts.iter().rev() {
            path.push('/');
            path.push_str(&alloc::format!("{idx}"));
        }
        path
    }

    /// Maps all bounds from a `from_w x from_h` coordinate frame into `to_w x to_h`.
    pub fn rescale(&mut self, from_w: u32, from_h: u32, to_w: u32, to_h: u32) {
        if from_w == 0 || from_h == 0 || (from_w == to_w && from_h == to_h) {
            return;
        }
        let sx = to_w as f64 / from_w as f64;
        let sy = to_h as f64 / from_h as f64;
        let scale = |v: i32, s: f64| crate::math::round(v as f64 * s) as i32;
        for e in &mut self.elements {
            let b = e.bounds;
            e.bounds = Rect::new(
                scale(b.left, sx),
                scale(b.top, sy),
                scale(b.right, sx),
                scale(b.bottom, sy),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn leaf(name: &str) -> NodeSpec {
        NodeSpec::new(name, Rect::new(0, 0, 10, 10))
    }

    #[test]
    fn singleton_tree() {
        let t = UiTree::from_spec(&NodeSpec::new("FrameLayout", Rect::new(0, 0, 1440, 2560)));
        assert_eq!(t.len(), 1);
        let r = t.root();
        assert_eq!((r.pre_order, r.post_order, r.depth), (0, 0, 0));
    }

    #[test]
    fn canonical_orders_for_two_children() {
        let t = UiTree::from_spec(&leaf("root").with_children(vec![leaf("A"), leaf("B")]));
        let by_name = |n: &str| t.elements().iter().find(|e| e.class_name == n).unwrap();
        assert_eq!(by_name("root").pre_order, 0);
        assert_eq!(by_name("A").pre_order, 1);
        assert_eq!(by_name("B").pre_order, 2);
        assert_eq!(by_name("A").post_order, 0);
        assert_eq!(by_name("B").post_order, 1);
        assert_eq!(by_name("root").post_order, 2);
        assert_eq!(by_name("B").depth, 1);
    }

    #[test]
    fn spec_round_trip_and_paths() {
        let spec = leaf("r").with_children(vec![
            leaf("a").with_children(vec![leaf("c").with_text("hi")]),
            leaf("b").clickable(true),
        ]);
        let t = UiTree::from_spec(&spec);
        assert_eq!(t.to_spec(), spec);
        let c = t.elements().iter().find(|e| e.class_name == "c").unwrap();
        assert_eq!(t.path_of(c.node_id), "root/0/0");
        assert_eq!(c.depth, 2);
    }

    #[test]
    fn iou_examples() {
        let a = Rect::new(0, 0, 2, 2);
        let b = Rect::new(1, 1, 3, 3);
        assert!((a.iou(&b) - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&Rect::new(5, 5, 6, 6)), 0.0);
        // Touching edges share no area.
        assert_eq!(a.iou(&Rect::new(2, 0, 4, 2)), 0.0);
    }

    #[test]
    fn rescale_maps_frames() {
        let mut t = UiTree::from_spec(&NodeSpec::new("r", Rect::new(0, 0, 1440, 2560)));
        t.rescale(1440, 2560, 144, 256);
        assert_eq!(t.root().bounds, Rect::new(0, 0, 144, 256));
    }
}
