#![allow(dead_code)]

use proptest::prelude::*;
use uisum_core::tree::{NodeSpec, Rect};

const CLASSES: [&str; 5] = ["FrameLayout", "TextView", "Button", "ImageView", "LinearLayout"];

fn leaf() -> impl Strategy<Value = NodeSpec> {
    (0usize..5, 0i32..40, 0i32..60, 0i32..40, 0i32..60, any::<bool>(), any::<bool>(), prop::option::of("[a-z]{1,6}( [a-z]{1,6})?"))
        .prop_map(|(c, x0, y0, x1, y1, click, vis, text)| {
            let mut n = NodeSpec::new(CLASSES[c], Rect::normalized(x0, y0, x1, y1))
                .clickable(click)
                .visible(vis);
            n.text = text;
            n
        })
}

/// Random nested view trees of up to roughly `size` nodes.
pub fn arb_tree(size: u32) -> impl Strategy<Value = NodeSpec> {
    leaf().prop_recursive(5, size, 6, |inner| {
        (leaf(), prop::collection::vec(inner, 0..6)).prop_map(|(n, children)| n.with_children(children))
    })
}
