//! Navigation graph, path enumeration and shortcut computation.
//!
//! Activities are vertices; every distinct `(from, to, label set)` intent
//! declaration is an edge. A path always starts with the synthetic
//! app-launching transition into the main activity, and its label set is
//! the union of its transitions' label sets. A path `p` can replace a path
//! `q` to the same activity when `labels(p) ⊆ labels(q)`; the shortcut of
//! `q` is the shortest path that can replace it.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use crate::model::{AppModel, IntentDecl, Label, LabelSet, ACTION_VIEW, CATEGORY_BROWSABLE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NavError {
    #[error("activity {0} is not reachable from the main activity")]
    UnreachableActivity(String),
    #[error("unknown activity {0}")]
    UnknownActivity(String),
    #[error("paths end at different activities ({0} vs {1})")]
    DifferentTargets(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NavEdge {
    pub from: String,
    pub to: String,
    pub labels: LabelSet,
    pub intent: IntentDecl,
    /// Added for an externally launchable activity that no declared flow
    /// reaches.
    #[serde(skip_serializing_if = "core::ops::Not::not")]
    pub synthetic: bool,
}

impl NavEdge {
    pub fn is_replayable(&self) -> bool {
        !self.labels.has_opaque()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NavGraph {
    /// Activities in declaration order.
    pub vertices: Vec<String>,
    /// Edges sorted by `(from, to, labels)`.
    pub edges: Vec<NavEdge>,
    pub start: String,
}

impl NavGraph {
    /// Path-length bound covering every vertex-simple path.
    pub fn default_max_len(&self) -> usize {
        self.vertices.len()
    }

    pub fn contains(&self, activity: &str) -> bool {
        self.vertices.iter().any(|v| v == activity)
    }

    pub fn outgoing<'a>(&'a self, from: &'a str) -> impl Iterator<Item = &'a NavEdge> + 'a {
        self.edges.iter().filter(move |e| e.from == from)
    }
}

pub fn build_nav_graph(model: &AppModel) -> Result<NavGraph, NavError> {
    let mut edges: BTreeMap<(String, String, LabelSet), IntentDecl> = BTreeMap::new();
    for (from, intent) in model.declared_intents() {
        let key = (from.to_string(), intent.target.clone(), intent.labels.clone());
        // Equivalent intents collapse into one edge; keep the least binding
        // table so the result does not depend on declaration order.
        edges
            .entry(key)
            .and_modify(|kept| {
                if intent < kept {
                    *kept = intent.clone();
                }
            })
            .or_insert_with(|| intent.clone());
    }
    let mut edges: Vec<NavEdge> = edges
        .into_iter()
        .map(|((from, to, labels), intent)| NavEdge { from, to, labels, intent, synthetic: false })
        .collect();

    let targeted: BTreeSet<&str> = edges.iter().map(|e| e.to.as_str()).collect();
    let mut synthetic = Vec::new();
    for activity in &model.activities {
        if activity.externally_launchable
            && activity.name != model.main_activity
            && !targeted.contains(activity.name.as_str())
        {
            let mut labels: LabelSet = [Label::action(ACTION_VIEW), Label::category(CATEGORY_BROWSABLE)]
                .into_iter()
                .collect();
            for param in &activity.required_params {
                labels.insert(Label::extra(param.name.clone(), param.value_type));
            }
            synthetic.push(NavEdge {
                from: model.main_activity.clone(),
                to: activity.name.clone(),
                labels: labels.clone(),
                intent: IntentDecl {
                    target: activity.name.clone(),
                    labels,
                    param_bindings: BTreeMap::new(),
                },
                synthetic: true,
            });
        }
    }
    edges.extend(synthetic);
    edges.sort();

    let graph = NavGraph {
        vertices: model.activities.iter().map(|a| a.name.clone()).collect(),
        edges,
        start: model.main_activity.clone(),
    };

    let mut seen = BTreeSet::from([graph.start.as_str()]);
    let mut queue = VecDeque::from([graph.start.as_str()]);
    while let Some(v) = queue.pop_front() {
        for e in graph.outgoing(v) {
            if seen.insert(e.to.as_str()) {
                queue.push_back(e.to.as_str());
            }
        }
    }
    if let Some(lost) = graph.vertices.iter().find(|v| !seen.contains(v.as_str())) {
        return Err(NavError::UnreachableActivity(lost.clone()));
    }
    Ok(graph)
}

/// A sequence of transitions from the main activity. The launch transition
/// is implicit: it is always first and is counted in [`Path::len`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Path {
    pub start: String,
    /// Shared with the graph's edge list, so paths are cheap to copy.
    pub transitions: Vec<Arc<NavEdge>>,
}

impl Path {
    pub fn launch(start: impl Into<String>) -> Self {
        Path { start: start.into(), transitions: Vec::new() }
    }

    /// Number of transitions including the launch.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.transitions.len() + 1
    }

    pub fn target(&self) -> &str {
        self.transitions.last().map_or(self.start.as_str(), |e| e.to.as_str())
    }

    /// Activities visited, start first.
    pub fn activities(&self) -> Vec<&str> {
        core::iter::once(self.start.as_str())
            .chain(self.transitions.iter().map(|e| e.to.as_str()))
            .collect()
    }

    /// Ordering key: length, then the label rendering and destination of
    /// each transition in turn.
    pub fn sort_key(&self) -> (usize, Vec<(String, String)>) {
        (
            self.len(),
            self.transitions
                .iter()
                .map(|e| (alloc::format!("{}", e.labels), e.to.clone()))
                .collect(),
        )
    }
}

pub fn path_labels(path: &Path) -> LabelSet {
    let mut labels = LabelSet::launch();
    for edge in &path.transitions {
        labels.extend(&edge.labels);
    }
    labels
}

/// Whether `p1` can stand in for `p2`: same target and
/// `labels(p1) ⊆ labels(p2)`.
pub fn can_replace(p1: &Path, p2: &Path) -> Result<bool, NavError> {
    if p1.target() != p2.target() {
        return Err(NavError::DifferentTargets(p1.target().to_string(), p2.target().to_string()));
    }
    Ok(path_labels(p1).is_subset(&path_labels(p2)))
}

/// All vertex-simple replayable paths from the start to `target` of length
/// at most `max_len`, ordered by [`Path::sort_key`]. Parallel edges yield
/// distinct paths; edges with opaque payloads are skipped.
pub fn enumerate_paths(graph: &NavGraph, target: &str, max_len: usize) -> Result<Vec<Path>, NavError> {
    if !graph.contains(target) {
        return Err(NavError::UnknownActivity(target.to_string()));
    }
    let index = EdgeIndex::new(graph);
    Ok(index.paths(graph, target, max_len).iter().map(|p| index.materialize(graph, p)).collect())
}

/// Edges by position in `graph.edges`, with their rank under the
/// per-transition part of [`Path::sort_key`] and their labels as bits.
struct EdgeIndex {
    edges: Vec<Arc<NavEdge>>,
    outgoing: BTreeMap<String, Vec<usize>>,
    rank: Vec<usize>,
    words: usize,
    bits: Vec<u64>,
    launch: Vec<u64>,
}

impl EdgeIndex {
    fn new(graph: &NavGraph) -> Self {
        let mut outgoing: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, e) in graph.edges.iter().enumerate() {
            if e.is_replayable() {
                outgoing.entry(e.from.clone()).or_default().push(i);
            }
        }

        let keys: Vec<(String, &str)> =
            graph.edges.iter().map(|e| (alloc::format!("{}", e.labels), e.to.as_str())).collect();
        let mut order: Vec<usize> = (0..keys.len()).collect();
        order.sort_by(|a, b| keys[*a].cmp(&keys[*b]));
        let mut rank = alloc::vec![0; keys.len()];
        for (pos, &i) in order.iter().enumerate() {
            rank[i] = match pos {
                0 => 0,
                _ if keys[order[pos - 1]] == keys[i] => rank[order[pos - 1]],
                _ => pos,
            };
        }

        let launch_labels = LabelSet::launch();
        let mut ids: BTreeMap<&Label, usize> = BTreeMap::new();
        for label in launch_labels.iter().chain(graph.edges.iter().flat_map(|e| e.labels.iter())) {
            let next = ids.len();
            ids.entry(label).or_insert(next);
        }
        let words = ids.len().div_ceil(64).max(1);
        let to_bits = |labels: &LabelSet| {
            let mut out = alloc::vec![0u64; words];
            for label in labels.iter() {
                let id = ids[label];
                out[id / 64] |= 1 << (id % 64);
            }
            out
        };
        let launch = to_bits(&launch_labels);
        let bits = graph.edges.iter().flat_map(|e| to_bits(&e.labels)).collect();
        let edges = graph.edges.iter().cloned().map(Arc::new).collect();
        EdgeIndex { edges, outgoing, rank, words, bits, launch }
    }

    /// Simple paths to `target` as edge positions, in path order.
    fn paths(&self, graph: &NavGraph, target: &str, max_len: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut on_path = BTreeSet::from([graph.start.as_str()]);
        self.walk(graph, &graph.start, target, max_len, &mut on_path, &mut Vec::new(), &mut out);
        // Stable, so paths with equal keys keep their enumeration order.
        out.sort_by_cached_key(|p| (p.len(), p.iter().map(|&e| self.rank[e]).collect::<Vec<_>>()));
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn walk<'g>(
        &self,
        graph: &'g NavGraph,
        at: &'g str,
        target: &str,
        max_len: usize,
        on_path: &mut BTreeSet<&'g str>,
        stack: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if at == target {
            out.push(stack.clone());
            return;
        }
        if stack.len() + 2 > max_len {
            return;
        }
        for &i in self.outgoing.get(at).map_or(&[][..], Vec::as_slice) {
            let to = graph.edges[i].to.as_str();
            if on_path.insert(to) {
                stack.push(i);
                self.walk(graph, to, target, max_len, on_path, stack, out);
                stack.pop();
                on_path.remove(to);
            }
        }
    }

    fn labels(&self, path: &[usize]) -> Vec<u64> {
        let mut out = self.launch.clone();
        for &e in path {
            for (w, b) in out.iter_mut().zip(&self.bits[e * self.words..(e + 1) * self.words]) {
                *w |= b;
            }
        }
        out
    }

    fn materialize(&self, graph: &NavGraph, path: &[usize]) -> Path {
        Path { start: graph.start.clone(), transitions: path.iter().map(|&e| Arc::clone(&self.edges[e])).collect() }
    }
}

fn is_subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Shortcut {
    pub target: String,
    pub original: Path,
    pub chosen: Path,
}

/// Shortcuts per activity, in enumeration order of the original paths.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Shortcuts(pub BTreeMap<String, Vec<Shortcut>>);

impl Shortcuts {
    pub fn get(&self, activity: &str, original: &Path) -> Option<&Shortcut> {
        self.0.get(activity)?.iter().find(|s| &s.original == original)
    }

    pub fn for_activity(&self, activity: &str) -> &[Shortcut] {
        self.0.get(activity).map_or(&[], Vec::as_slice)
    }
}

/// For every vertex and every enumerated path `p_i`, the first earlier
/// path `p_j` (in length order) whose labels are contained in `p_i`'s, or
/// `p_i` itself when there is none.
pub fn compute_shortcuts(graph: &NavGraph, max_len: usize) -> Shortcuts {
    let index = EdgeIndex::new(graph);
    let mut result = BTreeMap::new();
    for v in &graph.vertices {
        let paths = index.paths(graph, v, max_len);
        let labels: Vec<Vec<u64>> = paths.iter().map(|p| index.labels(p)).collect();
        let materialized: Vec<Path> = paths.iter().map(|p| index.materialize(graph, p)).collect();
        let shortcuts = materialized
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let j = (0..i).find(|&j| is_subset(&labels[j], &labels[i])).unwrap_or(i);
                Shortcut { target: v.clone(), original: p.clone(), chosen: materialized[j].clone() }
            })
            .collect();
        result.insert(v.clone(), shortcuts);
    }
    Shortcuts(result)
}

/// Distinct chosen shortcuts into `activity`, shortest first.
pub fn unique_shortcuts(shortcuts: &Shortcuts, activity: &str) -> Vec<Path> {
    let mut seen = BTreeSet::new();
    let mut out: Vec<Path> = shortcuts
        .for_activity(activity)
        .iter()
        .filter(|s| seen.insert(&s.chosen))
        .map(|s| s.chosen.clone())
        .collect();
    out.sort_by_key(Path::sort_key);
    out
}
