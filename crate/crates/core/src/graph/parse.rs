use super::{GraphBuilder, NodeKind};
use crate::error::{Error, Result};

/// Parses the line-oriented DAG format:
///
/// ```text
/// # screening example
/// node T target
/// node D unobserved
/// edge D T
/// ```
///
/// Lines are order-insensitive; `#` starts a comment. The result is not validated.
pub fn parse_dag(text: &str) -> Result<GraphBuilder> {
    let mut g = GraphBuilder::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: i + 1, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["node", name, kind] => {
                let kind = NodeKind::from_keyword(kind).ok_or_else(|| err(format!("unknown node kind `{kind}`")))?;
                g.nodes.push((name.to_string(), kind));
            }
            ["edge", parent, child] => g.edges.push((parent.to_string(), child.to_string())),
            [kw @ ("node" | "edge"), ..] => return Err(err(format!("`{kw}` expects exactly two arguments"))),
            [other, ..] => return Err(err(format!("unknown directive `{other}`"))),
            [] => unreachable!(),
        }
    }
    Ok(g)
}
