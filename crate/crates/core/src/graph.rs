//! Dependency graph, evaluation order and feedback-loop enumeration.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self as codes, Diagnostic};
use crate::model::{EffectOrder, InfluenceLink, Model, Polarity};

/// Edges between variables and stocks derived from expressions.
///
/// An edge `a -> b` means `b` reads `a`. Lagged edges cross a time step:
/// the state input of `delay_fixed`/`smooth` and flows into stocks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub nodes: BTreeSet<String>,
    pub instantaneous: BTreeSet<(String, String)>,
    pub lagged: BTreeSet<(String, String)>,
}

/// Builds the graph. References to undeclared ids are skipped; validation
/// reports them separately.
pub fn build_dependency_graph(model: &Model) -> DependencyGraph {
    let mut g = DependencyGraph::default();
    for v in &model.variables {
        g.nodes.insert(v.id.clone());
    }
    for s in &model.stocks {
        g.nodes.insert(s.id.clone());
    }
    for v in &model.variables {
        let Some(e) = &v.expression else { continue };
        e.visit_refs(&mut |r, lagged| {
            if g.nodes.contains(r) {
                let edge = (r.to_string(), v.id.clone());
                if lagged {
                    g.lagged.insert(edge);
                } else {
                    g.instantaneous.insert(edge);
                }
            }
        });
    }
    for s in &model.stocks {
        for f in s.inflows.iter().chain(&s.outflows) {
            if g.nodes.contains(f) {
                g.lagged.insert((f.clone(), s.id.clone()));
            }
        }
    }
    let inst = g.instantaneous.clone();
    g.lagged.retain(|e| !inst.contains(e));
    g
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("algebraic loop: {}", cycle.join(" -> "))]
pub struct AlgebraicLoop {
    /// Nodes of one instantaneous cycle, starting at its smallest id.
    pub cycle: Vec<String>,
}

/// Topological order of the instantaneous subgraph, ties broken by id.
pub fn evaluation_order(graph: &DependencyGraph) -> Result<Vec<String>, AlgebraicLoop> {
    let mut indegree: BTreeMap<&str, usize> = graph.nodes.iter().map(|n| (n.as_str(), 0)).collect();
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b) in &graph.instantaneous {
        *indegree
            .get_mut(b.as_str())
            .expect("edge endpoint is a node") += 1;
        succ.entry(a).or_default().push(b);
    }
    let mut ready: BTreeSet<&str> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(n, _)| *n)
        .collect();
    let mut order = Vec::with_capacity(graph.nodes.len());
    while let Some(n) = ready.pop_first() {
        order.push(n.to_string());
        for m in succ.get(n).into_iter().flatten() {
            let d = indegree.get_mut(m).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(m);
            }
        }
    }
    if order.len() == graph.nodes.len() {
        return Ok(order);
    }
    let remaining: BTreeSet<&str> = indegree
        .iter()
        .filter(|(_, d)| **d > 0)
        .map(|(n, _)| *n)
        .collect();
    Err(AlgebraicLoop {
        cycle: find_cycle(&remaining, &succ),
    })
}

/// A simple cycle inside `nodes`, which all still have unresolved inputs.
fn find_cycle<'a>(
    nodes: &BTreeSet<&'a str>,
    succ: &BTreeMap<&'a str, Vec<&'a str>>,
) -> Vec<String> {
    // every leftover node has a leftover predecessor, so walking backwards
    // must revisit a node
    let mut pred: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, bs) in succ {
        if !nodes.contains(a) {
            continue;
        }
        for b in bs {
            if nodes.contains(b) {
                pred.entry(*b).or_default().push(*a);
            }
        }
    }
    let mut path: Vec<&str> = Vec::new();
    let mut pos: BTreeMap<&str, usize> = BTreeMap::new();
    let mut cur = *nodes.first().expect("non-empty remainder");
    loop {
        if let Some(&i) = pos.get(cur) {
            let mut cycle: Vec<String> = path[i..].iter().rev().map(|s| s.to_string()).collect();
            let min = (0..cycle.len()).min_by_key(|&k| &cycle[k]).unwrap();
            cycle.rotate_left(min);
            return cycle;
        }
        pos.insert(cur, path.len());
        path.push(cur);
        let mut ps = pred[cur].clone();
        ps.sort();
        cur = ps[0];
    }
}

pub const DEFAULT_MAX_LOOP_LEN: usize = 12;
pub const DEFAULT_MAX_LOOPS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopClass {
    Reinforcing,
    Balancing,
    Undetermined,
}

impl LoopClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LoopClass::Reinforcing => "reinforcing",
            LoopClass::Balancing => "balancing",
            LoopClass::Undetermined => "undetermined",
        }
    }
}

/// Parity of negative links; any unspecified polarity makes it undetermined.
pub fn classify(polarities: impl IntoIterator<Item = Polarity>) -> LoopClass {
    let mut negatives = 0usize;
    for p in polarities {
        match p {
            Polarity::Negative => negatives += 1,
            Polarity::Unspecified => return LoopClass::Undetermined,
            Polarity::Positive => {}
        }
    }
    if negatives.is_multiple_of(2) {
        LoopClass::Reinforcing
    } else {
        LoopClass::Balancing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackLoop {
    /// Node ids, starting at the smallest.
    pub nodes: Vec<String>,
    /// Links in traversal order, `cycle[i]` going from `nodes[i]`.
    pub cycle: Vec<InfluenceLink>,
    pub classification: LoopClass,
    pub contains_delay: bool,
    pub effect_orders: BTreeSet<EffectOrder>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopReport {
    pub loops: Vec<FeedbackLoop>,
    pub truncated: bool,
    pub max_len: usize,
    pub max_count: usize,
    pub diagnostics: Vec<Diagnostic>,
}

/// Simple cycles of the declared influence links, each reported once,
/// ordered lexicographically by node sequence.
pub fn enumerate_feedback_loops(model: &Model, max_len: usize, max_count: usize) -> LoopReport {
    let mut diagnostics = Vec::new();
    let mut edges: BTreeMap<(&str, &str), &InfluenceLink> = BTreeMap::new();
    for l in &model.links {
        if edges.insert((&l.from, &l.to), l).is_some() {
            // keep the first declaration
            let first = model
                .links
                .iter()
                .find(|k| k.from == l.from && k.to == l.to)
                .unwrap();
            edges.insert((&l.from, &l.to), first);
            diagnostics.push(
                Diagnostic::new(
                    codes::W_DUP_LINK,
                    format!("link {} -> {} declared twice", l.from, l.to),
                )
                .at_element(l.to.as_str()),
            );
        }
    }
    let ids: Vec<&str> = edges
        .keys()
        .flat_map(|(a, b)| [*a, *b])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut adj = vec![Vec::new(); ids.len()];
    let mut radj = vec![Vec::new(); ids.len()];
    for (a, b) in edges.keys() {
        adj[index[a]].push(index[b]);
        radj[index[b]].push(index[a]);
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
    }

    let raw = simple_cycles(&adj, &radj, max_len, max_count.saturating_add(1));
    let truncated = raw.len() > max_count;
    if truncated {
        diagnostics.push(Diagnostic::new(
            codes::W_LOOP_TRUNCATED,
            format!("more than {max_count} feedback loops up to length {max_len}; list truncated"),
        ));
    }
    let loops = raw
        .into_iter()
        .take(max_count)
        .map(|c| {
            let nodes: Vec<String> = c.iter().map(|&i| ids[i].to_string()).collect();
            let cycle: Vec<InfluenceLink> = (0..c.len())
                .map(|k| (*edges[&(ids[c[k]], ids[c[(k + 1) % c.len()]])]).clone())
                .collect();
            FeedbackLoop {
                classification: classify(cycle.iter().map(|l| l.polarity)),
                contains_delay: cycle.iter().any(|l| l.delayed),
                effect_orders: cycle.iter().map(|l| l.effect_order).collect(),
                nodes,
                cycle,
            }
        })
        .collect();
    LoopReport {
        loops,
        truncated,
        max_len,
        max_count,
        diagnostics,
    }
}

/// Bounded Johnson-style search: cycles rooted at their smallest node,
/// pruned by the shortest distance back to the root.
fn simple_cycles(
    adj: &[Vec<usize>],
    radj: &[Vec<usize>],
    max_len: usize,
    limit: usize,
) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut out = Vec::new();
    if max_len == 0 {
        return out;
    }
    let mut dist = vec![usize::MAX; n];
    let mut on_path = vec![false; n];
    for s in 0..n {
        // distances to s using only nodes >= s
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &u in &radj[v] {
                if u >= s && dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    q.push_back(u);
                }
            }
        }
        let mut path = vec![s];
        on_path[s] = true;
        if dfs(
            s,
            s,
            adj,
            &dist,
            max_len,
            limit,
            &mut path,
            &mut on_path,
            &mut out,
        ) {
            return out;
        }
        on_path[s] = false;
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    s: usize,
    v: usize,
    adj: &[Vec<usize>],
    dist: &[usize],
    max_len: usize,
    limit: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) -> bool {
    for &w in &adj[v] {
        if w == s {
            out.push(path.clone());
            if out.len() >= limit {
                return true;
            }
            continue;
        }
        if w < s || on_path[w] || dist[w] == usize::MAX || path.len() + dist[w] > max_len {
            continue;
        }
        path.push(w);
        on_path[w] = true;
        let stop = dfs(s, w, adj, dist, max_len, limit, path, on_path, out);
        on_path[w] = false;
        path.pop();
        if stop {
            return true;
        }
    }
    false
}

impl LoopReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Graphviz rendering with one cluster per loop and polarity as the
    /// edge label. Delayed links are dashed.
    pub fn to_dot(&self, model: &Model) -> String {
        let mut out = String::new();
        writeln!(out, "digraph \"{}\" {{", model.id).unwrap();
        out.push_str("  rankdir=LR;\n");
        for (i, l) in self.loops.iter().enumerate() {
            let tag = format!("l{}", i + 1);
            writeln!(out, "  subgraph cluster_{tag} {{").unwrap();
            writeln!(
                out,
                "    label=\"L{} {}\";",
                i + 1,
                l.classification.as_str()
            )
            .unwrap();
            for n in &l.nodes {
                writeln!(out, "    \"{tag}_{n}\" [label=\"{n}\"];").unwrap();
            }
            for link in &l.cycle {
                let style = if link.delayed { ", style=dashed" } else { "" };
                writeln!(
                    out,
                    "    \"{tag}_{}\" -> \"{tag}_{}\" [label=\"{}\"{style}];",
                    link.from,
                    link.to,
                    link.polarity.symbol()
                )
                .unwrap();
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }

    /// One line per loop, for terminals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, l) in self.loops.iter().enumerate() {
            let mut path = l.nodes.clone();
            path.push(l.nodes[0].clone());
            let orders: Vec<&str> = l.effect_orders.iter().map(|o| o.as_str()).collect();
            writeln!(
                out,
                "L{:<3} {:<12} {}{}  [{}]",
                i + 1,
                l.classification.as_str(),
                path.join(" -> "),
                if l.contains_delay { "  (delayed)" } else { "" },
                orders.join(", ")
            )
            .unwrap();
        }
        if self.truncated {
            writeln!(out, "(truncated at {} loops)", self.max_count).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model_syntax;

    fn model(body: &str) -> Model {
        let src = format!("model \"m\" {{ time 0 .. 10 dt 1 }}\n{body}");
        let (m, diags, _) = parse_model_syntax(&src);
        assert!(diags.is_empty(), "{diags:?}");
        m.unwrap()
    }

    #[test]
    fn chain_order() {
        let m = model("aux c = b\naux b = a\nconst a = 1\n");
        assert_eq!(
            evaluation_order(&build_dependency_graph(&m)).unwrap(),
            vec!["a", "b", "c"]
        );
    }

    #[test]
    fn lagged_edge_breaks_cycle() {
        let m = model("aux a = smooth(b, 2, 0)\naux b = a + 1\n");
        let g = build_dependency_graph(&m);
        assert!(g.lagged.contains(&("b".into(), "a".into())));
        assert_eq!(evaluation_order(&g).unwrap(), vec!["a", "b"]);
    }

    #[test]
    fn stock_edges() {
        let m = model("const k = 0.1\naux out = s * k\nstock s init 10 outflow out\n");
        let g = build_dependency_graph(&m);
        assert!(g.lagged.contains(&("out".into(), "s".into())));
        assert!(g.instantaneous.contains(&("s".into(), "out".into())));
        assert!(evaluation_order(&g).is_ok());
    }

    #[test]
    fn cycle_reported_in_full() {
        let m = model("aux b = c\naux c = d\naux d = b\naux a = b\n");
        let err = evaluation_order(&build_dependency_graph(&m)).unwrap_err();
        // data flows d -> c -> b -> d
        assert_eq!(err.cycle, vec!["b", "d", "c"]);
        let m = model("aux a = b\naux b = a\n");
        assert_eq!(
            evaluation_order(&build_dependency_graph(&m))
                .unwrap_err()
                .cycle,
            vec!["a", "b"]
        );
    }

    #[test]
    fn two_loops_with_classification() {
        let m = model(
            "aux a = 0\naux b = 0\naux c = 0\n\
             link a -> b polarity +\nlink b -> a polarity -\n\
             link b -> c polarity +\nlink c -> b polarity + delayed order direct-rebound\n",
        );
        let r = enumerate_feedback_loops(&m, 12, 500);
        assert_eq!(r.loops.len(), 2);
        assert_eq!(r.loops[0].nodes, vec!["a", "b"]);
        assert_eq!(r.loops[0].classification, LoopClass::Balancing);
        assert!(!r.loops[0].contains_delay);
        assert_eq!(r.loops[1].nodes, vec!["b", "c"]);
        assert_eq!(r.loops[1].classification, LoopClass::Reinforcing);
        assert!(r.loops[1].contains_delay);
        assert!(r.loops[1]
            .effect_orders
            .contains(&EffectOrder::DirectRebound));
    }

    #[test]
    fn unspecified_polarity_is_undetermined() {
        assert_eq!(
            classify([Polarity::Positive, Polarity::Unspecified]),
            LoopClass::Undetermined
        );
        assert_eq!(
            classify([Polarity::Negative, Polarity::Negative]),
            LoopClass::Reinforcing
        );
        assert_eq!(classify([]), LoopClass::Reinforcing);
    }

    #[test]
    fn truncation_warns() {
        // complete digraph on 5 nodes has 84 simple cycles
        let mut body = String::new();
        for a in ["a", "b", "c", "d", "e"] {
            body.push_str(&format!("aux {a} = 0\n"));
        }
        for a in ["a", "b", "c", "d", "e"] {
            for b in ["a", "b", "c", "d", "e"] {
                if a != b {
                    body.push_str(&format!("link {a} -> {b}\n"));
                }
            }
        }
        let m = model(&body);
        assert_eq!(enumerate_feedback_loops(&m, 12, 500).loops.len(), 84);
        let r = enumerate_feedback_loops(&m, 12, 10);
        assert!(r.truncated);
        assert_eq!(r.loops.len(), 10);
        assert_eq!(r.diagnostics[0].code, "W-LOOP-TRUNCATED");
        let short = enumerate_feedback_loops(&m, 2, 500);
        assert_eq!(short.loops.len(), 10);
    }

    #[test]
    fn self_loop_and_duplicates() {
        let m = model("aux a = 0\nlink a -> a polarity -\nlink a -> a polarity +\n");
        let r = enumerate_feedback_loops(&m, 12, 500);
        assert_eq!(r.loops.len(), 1);
        assert_eq!(r.loops[0].classification, LoopClass::Balancing);
        assert_eq!(r.diagnostics[0].code, "W-DUP-LINK");
    }

    #[test]
    fn dot_output_marks_delays() {
        let m =
            model("aux a = 0\naux b = 0\nlink a -> b polarity + delayed\nlink b -> a polarity -\n");
        let r = enumerate_feedback_loops(&m, 12, 500);
        let dot = r.to_dot(&m);
        assert!(dot.contains("subgraph cluster_l1 {"), "{dot}");
        assert!(
            dot.contains("\"l1_a\" -> \"l1_b\" [label=\"+\", style=dashed];"),
            "{dot}"
        );
        assert!(r.to_text().starts_with("L1   balancing"));
    }
}
