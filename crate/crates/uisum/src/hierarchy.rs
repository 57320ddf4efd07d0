//! View-hierarchy JSON in the RICO layout: either a full capture
//! (`{"activity_name": ..., "activity": {"root": node}}`) or a bare node.

use std::path::Path;

use serde_json::{json, Map, Value};
use uisum_core::tree::{NodeSpec, Rect, UiTree};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    pub tree: UiTree,
    /// `package/.Activity` when the capture records it.
    pub activity_name: Option<String>,
}

impl Hierarchy {
    /// The package part of the activity name.
    pub fn package(&self) -> Option<&str> {
        let name = self.activity_name.as_deref()?;
        let pkg = name.split('/').next().unwrap_or(name).trim();
        (!pkg.is_empty()).then_some(pkg)
    }
}

/// Byte offset of a 1-based line/column position.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)).min(text.len())
}

pub fn parse_view_hierarchy(json_text: &str, path: &Path) -> Result<Hierarchy> {
    let value: Value = serde_json::from_str(json_text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        offset: byte_offset(json_text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let schema = |node: &str, message: String| {
        Error::core(
            path,
            uisum_core::Error::Schema {
                path: node.to_string(),
                message,
            },
        )
    };
    let obj = value
        .as_object()
        .ok_or_else(|| schema("", "top-level value is not an object".into()))?;
    let activity_name = obj
        .get("activity_name")
        .and_then(Value::as_str)
        .map(str::to_string);
    let root = match obj.get("activity") {
        Some(a) => a
            .get("root")
            .and_then(Value::as_object)
            .ok_or_else(|| schema("activity", "missing root node".into()))?,
        None => obj,
    };
    let spec = parse_node(root, "root").map_err(|(node, msg)| schema(&node, msg))?;
    Ok(Hierarchy {
        tree: UiTree::from_spec(&spec),
        activity_name,
    })
}

fn parse_node(obj: &Map<String, Value>, path: &str) -> std::result::Result<NodeSpec, (String, String)> {
    let err = |m: &str| (path.to_string(), m.to_string());
    let class_name = obj
        .get("class")
        .and_then(Value::as_str)
        .ok_or_else(|| err("missing class"))?;
    let bounds = obj
        .get("bounds")
        .and_then(Value::as_array)
        .ok_or_else(|| err("missing bounds"))?;
    if bounds.len() != 4 {
        return Err(err("bounds must have four numbers"));
    }
    let mut b = [0i32; 4];
    for (slot, v) in b.iter_mut().zip(bounds) {
        let f = v.as_f64().ok_or_else(|| err("bounds must be numeric"))?;
        *slot = f.round().clamp(i32::MIN as f64, i32::MAX as f64) as i32;
    }
    let flag = |keys: &[&str], default: bool| {
        keys.iter()
            .find_map(|k| obj.get(*k).and_then(Value::as_bool))
            .unwrap_or(default)
    };
    let mut node = NodeSpec::new(class_name, Rect::normalized(b[0], b[1], b[2], b[3]))
        .clickable(flag(&["clickable"], false))
        .visible(flag(&["visible-to-user", "visible_to_user"], true));
    node.text = obj.get("text").and_then(Value::as_str).map(str::to_string);
    if let Some(children) = obj.get("children").and_then(Value::as_array) {
        // captures contain null placeholders for dropped children
        for (i, c) in children.iter().filter_map(Value::as_object).enumerate() {
            node.children.push(parse_node(c, &format!("{path}/{i}"))?);
        }
    }
    Ok(node)
}

fn node_json(n: &NodeSpec) -> Value {
    let r = n.bounds;
    let mut v = json!({
        "class": n.class_name,
        "bounds": [r.left, r.top, r.right, r.bottom],
        "clickable": n.clickable,
        "visible-to-user": n.visible_to_user,
        "children": n.children.iter().map(node_json).collect::<Vec<_>>(),
    });
    if let Some(t) = &n.text {
        v["text"] = json!(t);
    }
    v
}

/// Serializes a tree in the full-capture layout.
pub fn to_json(h: &Hierarchy) -> String {
    let mut v = json!({ "activity": { "root": node_json(&h.tree.to_spec()) } });
    if let Some(a) = &h.activity_name {
        v["activity_name"] = json!(a);
    }
    v.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Hierarchy> {
        parse_view_hierarchy(s, Path::new("t.json"))
    }

    #[test]
    fn singleton() {
        let h = parse(r#"{"class":"FrameLayout","bounds":[0,0,1440,2560]}"#).unwrap();
        assert_eq!(h.tree.len(), 1);
        let r = h.tree.root();
        assert_eq!((r.pre_order, r.post_order, r.depth), (0, 0, 0));
        assert!(r.visible_to_user && !r.clickable && r.text.is_none());
    }

    #[test]
    fn two_children() {
        let h = parse(
            r#"{"activity_name":"com.x/.Main","activity":{"root":{"class":"R","bounds":[0,0,9,9],
            "children":[{"class":"A","bounds":[0,0,1,1]},null,{"class":"B","bounds":[1,1,2,2]}]}}}"#,
        )
        .unwrap();
        let pre: Vec<usize> = h.tree.elements().iter().map(|e| e.pre_order).collect();
        let post: Vec<usize> = h.tree.elements().iter().map(|e| e.post_order).collect();
        assert_eq!(pre, [0, 1, 2]);
        assert_eq!(post, [2, 0, 1]);
        assert_eq!(h.package(), Some("com.x"));
    }

    #[test]
    fn malformed_json_reports_offset() {
        let text = "{\"class\": \"A\",\n \"bounds\": [0,0,1,1]\n x}";
        match parse(text).unwrap_err() {
            Error::Json { offset, .. } => assert!(text[offset..].starts_with('x'), "{offset}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_bounds_names_the_node() {
        let err = parse(r#"{"class":"R","bounds":[0,0,1,1],"children":[{"class":"A"}]}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("root/0") && msg.contains("bounds"), "{msg}");
    }
}
