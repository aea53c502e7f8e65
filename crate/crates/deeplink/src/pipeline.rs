//! The analysis steps shared by the CLI and the HTTP service. Both call
//! the same functions and serialize through [`crate::formats::to_json`],
//! so their artifacts are byte-identical.

use std::collections::BTreeMap;

use deeplink_core::crawl::screen_hints;
use deeplink_core::{
    build_nav_graph, build_templates, compute_shortcuts, crawl_ftg, fragment_path, name_fragments,
    parse_deep_link, replay_deep_link, unique_shortcuts, AppModel, CrawlError, CrawlOptions, EntryScript,
    FragmentTransitionGraph, LinkError, NavError, NavGraph, ReleaseManifest, ReplayTrace, Selection,
    SelectionTarget, Shortcuts,
};
use serde::Serialize;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::formats::{model_digest, FormatError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error(transparent)]
    Crawl(#[from] CrawlError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

/// Uniform machine-readable error, printed by the CLI and returned by the
/// service.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub detail: Json,
}

impl ErrorBody {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        ErrorBody { code: code.into(), message: message.into(), detail: Json::Null }
    }
}

/// Name of the enum variant in a derived `Debug` rendering.
fn variant_name(debug: &str) -> String {
    debug.chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').collect()
}

impl From<&PipelineError> for ErrorBody {
    fn from(e: &PipelineError) -> Self {
        let message = e.to_string();
        let (code, detail) = match e {
            PipelineError::Format(f) => match f {
                FormatError::Validation(v) => (variant_name(&format!("{v:?}")), json!({"stage": "validation"})),
                FormatError::DigestMismatch { expected, found } => {
                    ("DigestMismatch".to_string(), json!({"expected": expected, "found": found}))
                }
                FormatError::Parse { what, .. } => ("FormatError".to_string(), json!({"what": what})),
                FormatError::Manifest(l) => ("FormatError".to_string(), json!({"cause": variant_name(&format!("{l:?}"))})),
                other => (variant_name(&format!("{other:?}")), Json::Null),
            },
            PipelineError::Nav(n) => (variant_name(&format!("{n:?}")), json!({"stage": "analyze"})),
            PipelineError::Crawl(c) => (variant_name(&format!("{c:?}")), json!({"stage": "crawl"})),
            PipelineError::Link(l) => (variant_name(&format!("{l:?}")), json!({"stage": "link"})),
        };
        ErrorBody { code, message, detail }
    }
}

/// Navigation graph plus shortcuts.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub graph: NavGraph,
    pub max_len: usize,
    pub shortcuts: Shortcuts,
}

pub fn analyze(model: &AppModel, max_len: Option<usize>) -> Result<Analysis, PipelineError> {
    let graph = build_nav_graph(model)?;
    let max_len = max_len.unwrap_or_else(|| graph.default_max_len());
    let shortcuts = compute_shortcuts(&graph, max_len);
    log::info!(
        "analyzed {}: {} activities, {} edges, max path length {max_len}",
        model.package_name,
        graph.vertices.len(),
        graph.edges.len()
    );
    Ok(Analysis { graph, max_len, shortcuts })
}

/// Entry script following the shortest unique shortcut into `activity`,
/// with every extra set to its type's default value.
pub fn auto_entry(analysis: &Analysis, activity: &str) -> Result<EntryScript, PipelineError> {
    if !analysis.graph.contains(activity) {
        return Err(LinkError::UnknownActivity(activity.to_string()).into());
    }
    let paths = unique_shortcuts(&analysis.shortcuts, activity);
    let path = paths.first().ok_or_else(|| LinkError::NotReplayable(activity.to_string()))?;
    Ok(EntryScript::from_path(path, &BTreeMap::new()))
}

/// Crawls `activity` and names its fragments after the declared screens
/// they match.
pub fn crawl(
    model: &AppModel,
    analysis: &Analysis,
    activity: &str,
    entry: Option<&EntryScript>,
    options: &CrawlOptions,
) -> Result<FragmentTransitionGraph, PipelineError> {
    let auto;
    let entry = match entry {
        Some(e) => e,
        None => {
            auto = auto_entry(analysis, activity)?;
            &auto
        }
    };
    if model.activity(activity).is_none() {
        return Err(LinkError::UnknownActivity(activity.to_string()).into());
    }
    let mut ftg = crawl_ftg(model, activity, entry, options)?;
    let names = name_fragments(&ftg, &screen_hints(model, activity))?;
    ftg.apply_names(&names);
    log::info!(
        "crawled {activity}: {} fragments, {} edges, {} unidentified, {} clicks",
        ftg.vertices.len(),
        ftg.edges.len(),
        ftg.unidentified.len(),
        ftg.clicks
    );
    Ok(ftg)
}

/// Crawls every activity that some basic-typed path reaches.
pub fn crawl_all(
    model: &AppModel,
    analysis: &Analysis,
    options: &CrawlOptions,
) -> Result<BTreeMap<String, FragmentTransitionGraph>, PipelineError> {
    let mut ftgs = BTreeMap::new();
    for activity in &analysis.graph.vertices {
        if unique_shortcuts(&analysis.shortcuts, activity).is_empty() {
            continue;
        }
        ftgs.insert(activity.clone(), crawl(model, analysis, activity, None, options)?);
    }
    Ok(ftgs)
}

/// Crawls the activities whose fragments `selection` names and that are
/// not in `ftgs` yet.
pub fn crawl_selected(
    model: &AppModel,
    analysis: &Analysis,
    ftgs: &mut BTreeMap<String, FragmentTransitionGraph>,
    selection: &Selection,
    options: &CrawlOptions,
) -> Result<(), PipelineError> {
    for target in &selection.targets {
        if target.fragment.is_some() && !ftgs.contains_key(&target.activity) {
            let ftg = crawl(model, analysis, &target.activity, None, options)?;
            ftgs.insert(target.activity.clone(), ftg);
        }
    }
    Ok(())
}

/// Every replayable activity, plus every linkable non-entry fragment of
/// the crawled activities.
pub fn select_all(analysis: &Analysis, ftgs: &BTreeMap<String, FragmentTransitionGraph>) -> Selection {
    let mut targets = Vec::new();
    for activity in &analysis.graph.vertices {
        if unique_shortcuts(&analysis.shortcuts, activity).is_empty() {
            continue;
        }
        targets.push(SelectionTarget { activity: activity.clone(), ..Default::default() });
        let Some(ftg) = ftgs.get(activity) else { continue };
        for v in &ftg.vertices {
            if v.hash == ftg.start || fragment_path(ftg, v.hash).is_err() {
                continue;
            }
            if let Some(name) = &v.name {
                targets.push(SelectionTarget {
                    activity: activity.clone(),
                    fragment: Some(name.clone()),
                    ..Default::default()
                });
            }
        }
    }
    Selection { targets }
}

pub fn link(
    model: &AppModel,
    analysis: &Analysis,
    ftgs: &BTreeMap<String, FragmentTransitionGraph>,
    selection: &Selection,
) -> Result<ReleaseManifest, PipelineError> {
    let manifest = build_templates(model, model_digest(model), &analysis.shortcuts, ftgs, selection)?;
    log::info!("built {} templates for {} selected targets", manifest.templates.len(), selection.targets.len());
    Ok(manifest)
}

pub fn replay(model: &AppModel, manifest: &ReleaseManifest, uri: &str) -> Result<ReplayTrace, PipelineError> {
    let link = parse_deep_link(manifest, uri)?;
    let trace = replay_deep_link(model, manifest, &link);
    log::info!("replayed {uri}: {}", trace.summary());
    Ok(trace)
}
