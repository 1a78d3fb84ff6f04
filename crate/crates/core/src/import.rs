//! Import of consequence trees into model skeletons.

use std::collections::HashSet;

use serde::Deserialize;

use crate::diagnostics::{self as codes, Diagnostic};
use crate::expr::{is_reserved, Builtin};
use crate::model::{EffectOrder, InfluenceLink, Model, Polarity, TimeSpec, Variable, VariableKind};

/// One node of a consequence tree. Polarity and order describe the link
/// from the parent to this node.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TreeNode {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub polarity: Option<String>,
    #[serde(default)]
    pub order: Option<String>,
    #[serde(default)]
    pub children: Vec<TreeNode>,
}

fn slug(label: &str) -> String {
    let mut s = String::new();
    for c in label.trim().chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            s.push(c);
        } else if !s.ends_with('_') {
            s.push('_');
        }
    }
    let s = s.trim_matches('_').to_string();
    if s.is_empty() {
        return "node".into();
    }
    let s = if s.starts_with(|c: char| c.is_numeric()) {
        format!("n_{s}")
    } else {
        s
    };
    if is_reserved(&s) || Builtin::from_name(&s).is_some() {
        format!("{s}_var")
    } else {
        s
    }
}

fn polarity(p: Option<&str>) -> Result<Polarity, Diagnostic> {
    match p.map(str::trim) {
        None | Some("") | Some("?") | Some("unspecified") => Ok(Polarity::Unspecified),
        Some("+") | Some("positive") => Ok(Polarity::Positive),
        Some("-") | Some("negative") => Ok(Polarity::Negative),
        Some(other) => Err(Diagnostic::new(
            codes::E_BAD_JSON,
            format!("unknown polarity `{other}`"),
        )),
    }
}

/// Build a skeleton model from a JSON consequence tree: one expression-less
/// auxiliary per node and one link per parent-child edge. Repeated labels
/// get `_2`, `_3`, ... suffixes.
pub fn import_consequence_tree(tree: &serde_json::Value) -> Result<Model, Diagnostic> {
    let empty = match tree {
        serde_json::Value::Null => true,
        serde_json::Value::Object(o) => o.is_empty(),
        _ => false,
    };
    if empty {
        return Err(Diagnostic::new(
            codes::E_EMPTY_TREE,
            "consequence tree is empty",
        ));
    }
    let root: TreeNode = serde_json::from_value(tree.clone())
        .map_err(|e| Diagnostic::new(codes::E_BAD_JSON, format!("not a consequence tree: {e}")))?;
    let mut model = Model::new("consequence_tree", TimeSpec::default());
    model.name = root.label.clone().unwrap_or_default();
    let mut taken = HashSet::new();
    add_node(&root, None, &mut model, &mut taken)?;
    Ok(model)
}

fn add_node(
    node: &TreeNode,
    parent: Option<&str>,
    model: &mut Model,
    taken: &mut HashSet<String>,
) -> Result<(), Diagnostic> {
    let label = node.label.as_deref().map(str::trim).unwrap_or("");
    if label.is_empty() {
        let code = if parent.is_none() && node.children.is_empty() {
            codes::E_EMPTY_TREE
        } else {
            codes::E_EMPTY_LABEL
        };
        return Err(Diagnostic::new(code, "tree node without a label"));
    }
    let base = slug(label);
    let mut id = base.clone();
    let mut k = 2;
    while taken.contains(&id) {
        id = format!("{base}_{k}");
        k += 1;
    }
    taken.insert(id.clone());
    model.variables.push(Variable {
        name: label.to_string(),
        kind: VariableKind::Auxiliary,
        ..Variable::exogenous(id.clone())
    });
    if let Some(p) = parent {
        let order = match node.order.as_deref().map(str::trim) {
            None | Some("") => EffectOrder::Untagged,
            Some(o) => EffectOrder::parse(o).ok_or_else(|| {
                Diagnostic::new(codes::E_BAD_JSON, format!("unknown effect order `{o}`"))
            })?,
        };
        let mut link = InfluenceLink::new(p, id.clone(), polarity(node.polarity.as_deref())?);
        link.effect_order = order;
        model.links.push(link);
    }
    for child in &node.children {
        add_node(child, Some(&id), model, taken)?;
    }
    Ok(())
}
