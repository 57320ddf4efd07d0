mod common;

use std::path::Path;

use proptest::prelude::*;
use serde_json::Value;
use uisum::core::tree::{NodeSpec, Rect, UiTree};
use uisum::hierarchy::{parse_view_hierarchy, to_json, Hierarchy};
use uisum::Error;

/// Counts node objects by walking the raw JSON.
fn count_json_nodes(v: &Value) -> usize {
    match v {
        Value::Object(m) => {
            1 + m
                .get("children")
                .and_then(Value::as_array)
                .map_or(0, |c| c.iter().map(count_json_nodes).sum())
        }
        _ => 0,
    }
}

#[test]
fn element_count_matches_json_walk() {
    let dir = common::fixture_dir().join("hierarchies");
    let mut checked = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let raw: Value = serde_json::from_str(&text).unwrap();
        let want = count_json_nodes(&raw["activity"]["root"]);
        let h = parse_view_hierarchy(&text, &path).unwrap();
        assert_eq!(h.tree.len(), want, "{}", path.display());
        checked += 1;
    }
    assert!(checked >= 50);
}

#[test]
fn optional_fields_default() {
    let h = parse_view_hierarchy(r#"{"class": "FrameLayout", "bounds": [0, 0, 1440, 2560]}"#, Path::new("x")).unwrap();
    let e = h.tree.root();
    assert_eq!((e.pre_order, e.post_order, e.depth), (0, 0, 0));
    assert!(!e.clickable);
    assert!(e.visible_to_user);
    assert_eq!(e.text, None);
    assert_eq!(h.activity_name, None);
}

#[test]
fn missing_root_bounds_is_a_schema_error() {
    let err = parse_view_hierarchy(r#"{"activity": {"root": {"class": "A"}}}"#, Path::new("x")).unwrap_err();
    match err.as_core() {
        Some(uisum::core::Error::Schema { path, .. }) => assert_eq!(path, "root"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn truncated_json_reports_offset() {
    let text = r#"{"class": "A", "bounds": [0, 0, 1, 1]"#;
    match parse_view_hierarchy(text, Path::new("x")).unwrap_err() {
        Error::Json { offset, .. } => assert!(offset <= text.len()),
        e => panic!("unexpected {e:?}"),
    }
}

fn arb_node() -> impl Strategy<Value = NodeSpec> {
    let leaf = (
        "[A-Za-z.]{1,12}",
        any::<bool>(),
        any::<bool>(),
        prop::option::of("[a-z ]{0,10}"),
        (0i32..500, 0i32..500, 0i32..500, 0i32..500),
    )
        .prop_map(|(class, clickable, visible, text, (a, b, c, d))| {
            let mut n = NodeSpec::new(class, Rect::normalized(a, b, c, d))
                .clickable(clickable)
                .visible(visible);
            n.text = text;
            n
        });
    leaf.prop_recursive(4, 40, 5, |inner| {
        (inner.clone(), prop::collection::vec(inner, 0..5)).prop_map(|(mut n, kids)| {
            n.children = kids;
            n
        })
    })
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(root in arb_node(), activity in prop::option::of("[a-z.]{1,8}/[A-Za-z.]{1,8}")) {
        let h = Hierarchy { tree: UiTree::from_spec(&root), activity_name: activity };
        let back = parse_view_hierarchy(&to_json(&h), Path::new("x")).unwrap();
        prop_assert_eq!(back, h);
    }
}
