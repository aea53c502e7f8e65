//! Random labeled navigation graphs and a brute-force shortcut oracle.

use std::collections::{BTreeMap, BTreeSet};

use deeplink_core::{Binding, IntentDecl, Label, LabelSet, NavEdge, NavGraph, Path, Shortcuts, ValueType};
use rand::Rng;

const EXTRAS: [(&str, ValueType); 4] =
    [("k0", ValueType::Int), ("k1", ValueType::Text), ("k2", ValueType::Long), ("k3", ValueType::Boolean)];

fn labels_for(mask: u8) -> LabelSet {
    let mut labels = LabelSet::new();
    for (bit, (name, ty)) in EXTRAS.iter().enumerate() {
        if mask & (1 << bit) != 0 {
            labels.insert(Label::extra(*name, *ty));
        }
    }
    if mask & 0x10 != 0 {
        labels.insert(Label::action("act.GO"));
    }
    if mask & 0x20 != 0 {
        labels.insert(Label::extra("blob", ValueType::Opaque));
    }
    labels
}

pub fn edge(from: &str, to: &str, mask: u8) -> NavEdge {
    let labels = labels_for(mask);
    let param_bindings: BTreeMap<String, Binding> = labels
        .basic_extras()
        .map(|(n, ty)| (n.to_string(), Binding::Const(ty.default_value().unwrap().to_string())))
        .collect();
    NavEdge {
        from: from.into(),
        to: to.into(),
        intent: IntentDecl { target: to.into(), labels: labels.clone(), param_bindings },
        labels,
        synthetic: false,
    }
}

/// Graph over `V0..V{n-1}` (start `V0`) with up to `max_parallel` edges
/// per ordered pair. With `dag`, edges only go from lower to higher index.
pub fn random_graph(rng: &mut impl Rng, max_vertices: usize, max_parallel: usize, dag: bool) -> NavGraph {
    let n = rng.gen_range(2..=max_vertices);
    let vertices: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
    let density = rng.gen_range(0.15..0.45);
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            if (dag && i >= j) || !rng.gen_bool(density) {
                continue;
            }
            for _ in 0..rng.gen_range(1..=max_parallel) {
                let mut mask = rng.gen_range(0u8..32);
                if rng.gen_bool(0.1) {
                    mask |= 0x20;
                }
                edges.insert(edge(&vertices[i], &vertices[j], mask));
            }
        }
    }
    NavGraph { start: vertices[0].clone(), vertices, edges: edges.into_iter().collect() }
}

/// Label set of a path as a bit mask over `alphabet`.
fn all_labels(alphabet: &[Label], edges: &[&NavEdge]) -> u64 {
    let bit = |l: &Label| 1u64 << alphabet.iter().position(|a| a == l).expect("label is in the alphabet");
    let mut mask = LabelSet::launch().iter().map(bit).fold(0, |a, b| a | b);
    for e in edges {
        mask |= e.labels.iter().map(bit).fold(0, |a, b| a | b);
    }
    mask
}

fn order_key(edges: &[&NavEdge]) -> (usize, Vec<(String, String)>) {
    (edges.len() + 1, edges.iter().map(|e| (e.labels.to_string(), e.to.clone())).collect())
}

/// Every vertex-simple path from the start to `target` over edges without
/// opaque labels, in length order with ties broken per edge by label
/// rendering and destination.
pub fn simple_paths<'g>(graph: &'g NavGraph, target: &str) -> Vec<Vec<&'g NavEdge>> {
    fn go<'g>(
        graph: &'g NavGraph,
        at: &str,
        target: &str,
        visited: &mut Vec<String>,
        stack: &mut Vec<&'g NavEdge>,
        out: &mut Vec<Vec<&'g NavEdge>>,
    ) {
        if at == target {
            out.push(stack.clone());
            return;
        }
        for e in graph.edges.iter().filter(|e| e.from == at) {
            if visited.contains(&e.to) || e.labels.iter().any(|l| l.value_type == Some(ValueType::Opaque)) {
                continue;
            }
            visited.push(e.to.clone());
            stack.push(e);
            go(graph, &e.to, target, visited, stack, out);
            stack.pop();
            visited.pop();
        }
    }
    let mut out = Vec::new();
    go(graph, &graph.start, target, &mut vec![graph.start.clone()], &mut Vec::new(), &mut out);
    out.sort_by_cached_key(|p| order_key(p));
    out
}

fn same(path: &Path, edges: &[&NavEdge]) -> bool {
    path.transitions.len() == edges.len() && path.transitions.iter().zip(edges).all(|(a, b)| **a == **b)
}

/// Checks every `(vertex, path)` pair of `shortcuts` against brute force:
/// the chosen path must be the first path (in the order above) whose label
/// set is contained in the original's, which is also a shortest such path.
/// Returns the number of pairs checked.
pub fn check_shortcuts(graph: &NavGraph, shortcuts: &Shortcuts) -> Result<usize, String> {
    let alphabet: Vec<Label> = LabelSet::launch()
        .iter()
        .chain(graph.edges.iter().flat_map(|e| e.labels.iter()))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    assert!(alphabet.len() <= 64);
    let subset = |a: u64, b: u64| a & !b == 0;
    let mut pairs = 0;
    for v in &graph.vertices {
        let paths = simple_paths(graph, v);
        let labels: Vec<u64> = paths.iter().map(|p| all_labels(&alphabet, p)).collect();
        let mut shortest_by_mask: BTreeMap<u64, usize> = BTreeMap::new();
        for (mask, path) in labels.iter().zip(&paths) {
            let len = shortest_by_mask.entry(*mask).or_insert(usize::MAX);
            *len = (*len).min(path.len() + 1);
        }
        let got = shortcuts.for_activity(v);
        if got.len() != paths.len() {
            return Err(format!("{v}: {} paths, oracle has {}", got.len(), paths.len()));
        }
        for (i, s) in got.iter().enumerate() {
            if !same(&s.original, &paths[i]) {
                return Err(format!("{v}: path {i} differs from the oracle's"));
            }
            let j = (0..=i).find(|&j| subset(labels[j], labels[i])).expect("a path contains itself");
            let shortest = shortest_by_mask
                .iter()
                .filter(|(mask, _)| subset(**mask, labels[i]))
                .map(|(_, len)| *len)
                .min()
                .unwrap();
            if !same(&s.chosen, &paths[j]) || s.chosen.len() != shortest {
                return Err(format!("{v}: path {i} should be replaced by path {j}"));
            }
            pairs += 1;
        }
    }
    Ok(pairs)
}
