//! Serializable views of the navigation analysis.

use deeplink_core::{path_labels, unique_shortcuts, AppModel, NavGraph, Param, Path, Shortcuts};
use serde::Serialize;

use crate::formats::model_digest;
use crate::pipeline::Analysis;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PathView {
    pub length: usize,
    pub activities: Vec<String>,
    pub labels: Vec<String>,
    pub parameters: Vec<Param>,
}

impl PathView {
    pub fn new(path: &Path) -> Self {
        let labels = path_labels(path);
        PathView {
            length: path.len(),
            activities: path.activities().into_iter().map(String::from).collect(),
            labels: labels.iter().map(|l| l.to_string()).collect(),
            parameters: labels
                .basic_extras()
                .map(|(name, value_type)| Param { name: name.to_string(), value_type })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ShortcutView {
    pub original: PathView,
    pub chosen: PathView,
    pub replaced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ActivityShortcuts {
    pub activity: String,
    pub shortcuts: Vec<ShortcutView>,
    pub unique: Vec<PathView>,
}

impl ActivityShortcuts {
    pub fn new(shortcuts: &Shortcuts, activity: &str) -> Self {
        ActivityShortcuts {
            activity: activity.to_string(),
            shortcuts: shortcuts
                .for_activity(activity)
                .iter()
                .map(|s| ShortcutView {
                    original: PathView::new(&s.original),
                    chosen: PathView::new(&s.chosen),
                    replaced: s.chosen != s.original,
                })
                .collect(),
            unique: unique_shortcuts(shortcuts, activity).iter().map(PathView::new).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EdgeView {
    pub from: String,
    pub to: String,
    pub labels: Vec<String>,
    pub replayable: bool,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub synthetic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NavGraphView {
    pub start: String,
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeView>,
    pub max_len: usize,
}

impl NavGraphView {
    pub fn new(graph: &NavGraph, max_len: usize) -> Self {
        NavGraphView {
            start: graph.start.clone(),
            vertices: graph.vertices.clone(),
            edges: graph
                .edges
                .iter()
                .map(|e| EdgeView {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    labels: e.labels.iter().map(|l| l.to_string()).collect(),
                    replayable: e.is_replayable(),
                    synthetic: e.synthetic,
                })
                .collect(),
            max_len,
        }
    }
}

/// What `analyze` writes.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisReport {
    pub package_name: String,
    pub model_digest: String,
    pub declared_deep_links: usize,
    /// Activities only reachable through intents with opaque payloads.
    pub not_replayable: Vec<String>,
    pub nav_graph: NavGraphView,
    pub activities: Vec<ActivityShortcuts>,
}

impl AnalysisReport {
    pub fn new(model: &AppModel, analysis: &Analysis) -> Self {
        AnalysisReport {
            package_name: model.package_name.clone(),
            model_digest: model_digest(model).0,
            declared_deep_links: deeplink_core::count_declared_deep_links(model),
            not_replayable: deeplink_core::validate_replayability(model),
            nav_graph: NavGraphView::new(&analysis.graph, analysis.max_len),
            activities: analysis
                .graph
                .vertices
                .iter()
                .map(|a| ActivityShortcuts::new(&analysis.shortcuts, a))
                .collect(),
        }
    }
}
