//! Fragment discovery by exhaustive clicking.
//!
//! Starting from an instance of an activity reached by an [`EntryScript`],
//! the crawler clicks every view of the current fragment in document
//! order. A click that leaves the activity is undone with `do_back`. A
//! click that changes the structure hash of the view tree has reached
//! another fragment; new fragments get an edge and are explored
//! depth-first. Since there is no way back to the previous fragment, the
//! crawler then restarts the app, replays the entry script and the
//! triggers leading to the parent fragment, and carries on.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::{tree_hash, StructureHash};
use crate::model::{AppModel, IntentDecl, ViewNode};
use crate::nav::Path;
use crate::sim::{SimError, SimSession};
use crate::value::Value;

pub use crate::sim::Trigger;

pub const DEFAULT_STEP_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CrawlError {
    #[error("entry script failed: {0}")]
    EntryScriptFailed(String),
    #[error("crawl exceeded its budget of {0} clicks")]
    CrawlBudgetExceeded(usize),
    #[error("recovery landed on fragment {found} instead of {expected}")]
    RecoveryFailed { expected: StructureHash, found: StructureHash },
    #[error("no fragment with hash {0}")]
    NoSuchFragment(StructureHash),
    #[error("fragment name {0:?} is used twice")]
    DuplicateName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct CrawlOptions {
    pub step_budget: usize,
    /// Also record edges into already-known fragments (without exploring
    /// them again). Not part of the base algorithm.
    pub cross_edges: bool,
    /// Identify views without a resource id by their tree position, so
    /// transitions they trigger become linkable.
    pub position_fallback: bool,
}

impl Default for CrawlOptions {
    fn default() -> Self {
        CrawlOptions { step_budget: DEFAULT_STEP_BUDGET, cross_edges: false, position_fallback: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScriptIntent {
    pub intent: IntentDecl,
    /// Literal value per basic extra.
    #[serde(default)]
    pub values: BTreeMap<String, String>,
}

/// How to get from a fresh launch to an instance of an activity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EntryScript {
    #[serde(default)]
    pub intents: Vec<ScriptIntent>,
    #[serde(default)]
    pub actions: Vec<Trigger>,
}

impl EntryScript {
    /// Script that follows `path`, filling each basic extra from `values`
    /// or, failing that, with a fixed value of its type.
    pub fn from_path(path: &Path, values: &BTreeMap<String, String>) -> Self {
        let intents = path
            .transitions
            .iter()
            .map(|edge| ScriptIntent {
                intent: edge.intent.clone(),
                values: edge
                    .labels
                    .basic_extras()
                    .map(|(name, ty)| {
                        let literal = values.get(name).cloned().unwrap_or_else(|| {
                            ty.default_value().expect("basic type").to_string()
                        });
                        (name.to_string(), literal)
                    })
                    .collect(),
            })
            .collect();
        EntryScript { intents, actions: Vec::new() }
    }

    /// Runs the script against a freshly launched or reset session.
    pub fn run(&self, session: &mut SimSession<'_>) -> Result<(), SimError> {
        for step in &self.intents {
            let mut values = BTreeMap::new();
            for (name, ty) in step.intent.labels.basic_extras() {
                let literal = step
                    .values
                    .get(name)
                    .ok_or_else(|| SimError::MissingValue { name: name.to_string() })?;
                let value = Value::parse(ty, literal).map_err(|e| SimError::TypeMismatch {
                    name: name.to_string(),
                    expected: ty,
                    found: e.literal,
                })?;
                values.insert(name.to_string(), value);
            }
            session.send_intent(&step.intent, &values)?;
        }
        for action in &self.actions {
            session.perform(action)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FragmentNode {
    pub hash: StructureHash,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub example_tree: ViewNode,
    /// Number of clicks performed when the fragment was first seen.
    pub discovered_at: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FragmentEdge {
    pub source: StructureHash,
    pub target: StructureHash,
    pub trigger: Trigger,
    /// Edge into a fragment that was already known when it was seen.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub cross: bool,
}

/// A fragment change caused by a view without a resource id. It cannot be
/// replayed by id, so it stays out of the graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UnidentifiedTransition {
    pub source: StructureHash,
    pub position: Vec<usize>,
    pub target: StructureHash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FragmentTransitionGraph {
    pub activity: String,
    pub start: StructureHash,
    pub vertices: Vec<FragmentNode>,
    pub edges: Vec<FragmentEdge>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unidentified: Vec<UnidentifiedTransition>,
    pub clicks: usize,
}

impl FragmentTransitionGraph {
    pub fn vertex(&self, hash: StructureHash) -> Option<&FragmentNode> {
        self.vertices.iter().find(|v| v.hash == hash)
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<&FragmentNode> {
        self.vertices.iter().find(|v| v.name.as_deref() == Some(name))
    }

    pub fn hashes(&self) -> BTreeSet<StructureHash> {
        self.vertices.iter().map(|v| v.hash).collect()
    }

    pub fn apply_names(&mut self, names: &BTreeMap<StructureHash, String>) {
        for v in &mut self.vertices {
            v.name = names.get(&v.hash).cloned();
        }
    }
}

struct Crawler<'m> {
    session: SimSession<'m>,
    activity: &'m str,
    entry: &'m EntryScript,
    options: CrawlOptions,
    ftg: FragmentTransitionGraph,
}

pub fn crawl_ftg(
    model: &AppModel,
    activity: &str,
    entry: &EntryScript,
    options: &CrawlOptions,
) -> Result<FragmentTransitionGraph, CrawlError> {
    let mut session = SimSession::launch(model);
    enter(&mut session, entry, activity)?;
    let tree = session.current_view_tree().expect("entered session is live");
    let start = tree_hash(&tree);
    let mut crawler = Crawler {
        session,
        activity,
        entry,
        options: *options,
        ftg: FragmentTransitionGraph {
            activity: activity.to_string(),
            start,
            vertices: alloc::vec![FragmentNode { hash: start, name: None, example_tree: tree.clone(), discovered_at: 0 }],
            edges: Vec::new(),
            unidentified: Vec::new(),
            clicks: 0,
        },
    };
    crawler.build(start, &tree, &mut Vec::new())?;
    Ok(crawler.ftg)
}

fn enter(session: &mut SimSession<'_>, entry: &EntryScript, activity: &str) -> Result<(), CrawlError> {
    entry
        .run(session)
        .map_err(|e| CrawlError::EntryScriptFailed(e.to_string()))?;
    match session.current_activity() {
        Ok(a) if a == activity => Ok(()),
        Ok(a) => Err(CrawlError::EntryScriptFailed(alloc::format!("landed on {a}, expected {activity}"))),
        Err(e) => Err(CrawlError::EntryScriptFailed(e.to_string())),
    }
}

impl Crawler<'_> {
    fn build(&mut self, fragment: StructureHash, tree: &ViewNode, path: &mut Vec<Trigger>) -> Result<(), CrawlError> {
        let depth = self.session.back_stack().len();
        for (position, view) in tree.walk_positions() {
            let trigger = match &view.id {
                Some(id) => Trigger::ResourceId(id.clone()),
                None => Trigger::TreePosition(position.clone()),
            };
            self.count_click()?;
            if self.session.perform(&trigger).is_err() {
                // Failed clicks leave the session unchanged.
                continue;
            }
            let same_activity = self.session.back_stack().len() == depth
                && self.session.current_activity().ok() == Some(self.activity);
            if !same_activity {
                if self.session.back_stack().len() > depth {
                    self.session.do_back().expect("stack is deeper than the crawl base");
                }
                continue;
            }
            let current = self.session.current_view_tree().expect("session is live");
            let hash = tree_hash(&current);
            if hash == fragment {
                continue;
            }
            if view.id.is_none() && !self.options.position_fallback {
                self.ftg.unidentified.push(UnidentifiedTransition { source: fragment, position, target: hash });
            } else if self.ftg.vertex(hash).is_none() {
                self.ftg.vertices.push(FragmentNode {
                    hash,
                    name: None,
                    example_tree: current.clone(),
                    discovered_at: self.ftg.clicks,
                });
                self.ftg.edges.push(FragmentEdge { source: fragment, target: hash, trigger: trigger.clone(), cross: false });
                path.push(trigger);
                self.build(hash, &current, path)?;
                path.pop();
            } else if self.options.cross_edges {
                let edge = FragmentEdge { source: fragment, target: hash, trigger, cross: true };
                if !self.ftg.edges.iter().any(|e| e.source == edge.source && e.trigger == edge.trigger) {
                    self.ftg.edges.push(edge);
                }
            }
            self.recover(fragment, path)?;
        }
        Ok(())
    }

    fn count_click(&mut self) -> Result<(), CrawlError> {
        self.ftg.clicks += 1;
        if self.ftg.clicks > self.options.step_budget {
            return Err(CrawlError::CrawlBudgetExceeded(self.options.step_budget));
        }
        Ok(())
    }

    /// Restart, re-enter the activity and replay `path` to get back to
    /// `fragment`.
    fn recover(&mut self, fragment: StructureHash, path: &[Trigger]) -> Result<(), CrawlError> {
        self.session.reset();
        enter(&mut self.session, self.entry, self.activity)?;
        for trigger in path {
            self.count_click()?;
            self.session
                .perform(trigger)
                .map_err(|e| CrawlError::EntryScriptFailed(e.to_string()))?;
        }
        let found = tree_hash(&self.session.current_view_tree().expect("session is live"));
        if found != fragment {
            return Err(CrawlError::RecoveryFailed { expected: fragment, found });
        }
        Ok(())
    }
}

/// Triggers along the discovery edges from the start fragment to `target`.
pub fn fragment_path(ftg: &FragmentTransitionGraph, target: StructureHash) -> Result<Vec<Trigger>, CrawlError> {
    if ftg.vertex(target).is_none() {
        return Err(CrawlError::NoSuchFragment(target));
    }
    let mut triggers = Vec::new();
    let mut at = target;
    while at != ftg.start {
        let edge = ftg
            .edges
            .iter()
            .find(|e| e.target == at && !e.cross)
            .ok_or(CrawlError::NoSuchFragment(at))?;
        triggers.push(edge.trigger.clone());
        at = edge.source;
        if triggers.len() > ftg.vertices.len() {
            return Err(CrawlError::NoSuchFragment(target));
        }
    }
    triggers.reverse();
    Ok(triggers)
}

/// Names every fragment: the hint when one is given, `frag-<8 hex>`
/// otherwise.
pub fn name_fragments(
    ftg: &FragmentTransitionGraph,
    hints: &BTreeMap<StructureHash, String>,
) -> Result<BTreeMap<StructureHash, String>, CrawlError> {
    let mut used = BTreeSet::new();
    let mut names = BTreeMap::new();
    for v in &ftg.vertices {
        let name = hints
            .get(&v.hash)
            .cloned()
            .unwrap_or_else(|| alloc::format!("frag-{}", v.hash.short()));
        if !used.insert(name.clone()) {
            return Err(CrawlError::DuplicateName(name));
        }
        names.insert(v.hash, name);
    }
    Ok(names)
}

/// Hints mapping each declared screen's structure hash to the screen name.
/// Screens that share a hash keep the alphabetically first name.
pub fn screen_hints(model: &AppModel, activity: &str) -> BTreeMap<StructureHash, String> {
    let mut hints = BTreeMap::new();
    if let Some(decl) = model.activity(activity) {
        for (name, screen) in &decl.screens {
            hints.entry(tree_hash(&screen.view_tree)).or_insert_with(|| name.clone());
        }
    }
    hints
}
