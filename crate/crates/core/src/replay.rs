//! Executing deep links against the simulator.
//!
//! A replay always starts from a fresh launch, issues the template's
//! intents with the link's values substituted, performs the template's
//! actions, and checks where it ended up. Failures are reported in the
//! trace's [`Verdict`], never as errors.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use crate::crawl::Trigger;
use crate::hash::{tree_hash, StructureHash};
use crate::link::{DeepLink, DeepLinkTemplate, ReleaseManifest, Slot};
use crate::model::AppModel;
use crate::sim::{SimError, SimSession};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ReplayStep {
    Launch { activity: String, screen: String },
    Intent { target: String, values: BTreeMap<String, Value>, activity: String, screen: String },
    Action { trigger: Trigger, activity: String, screen: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "camelCase")]
pub enum FailReason {
    UnknownTemplate { id: String },
    MissingValue { name: String },
    Simulator { step: usize, error: SimError },
    UnexpectedActivity { step: usize, expected: String, found: String },
    /// All steps ran but the final location is not the template's target.
    TargetMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "camelCase")]
pub enum Verdict {
    ReachedActivity,
    ReachedFragment,
    Failed(FailReason),
}

impl Verdict {
    pub fn is_reached(&self) -> bool {
        !matches!(self, Verdict::Failed(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplayTrace {
    pub uri: String,
    pub template_id: String,
    pub steps: Vec<ReplayStep>,
    pub final_activity: Option<String>,
    pub final_screen: Option<String>,
    pub final_tree_hash: Option<StructureHash>,
    pub verdict: Verdict,
    pub step_count: usize,
}

pub fn replay_deep_link(model: &AppModel, manifest: &ReleaseManifest, link: &DeepLink) -> ReplayTrace {
    let mut trace = ReplayTrace {
        uri: link.uri.clone(),
        template_id: link.template_id.clone(),
        steps: Vec::new(),
        final_activity: None,
        final_screen: None,
        final_tree_hash: None,
        verdict: Verdict::ReachedActivity,
        step_count: 0,
    };
    let Some(template) = manifest.template(&link.template_id) else {
        trace.verdict = Verdict::Failed(FailReason::UnknownTemplate { id: link.template_id.clone() });
        return trace;
    };

    let mut session = SimSession::launch(model);
    let failure = run(&mut session, template, link, &mut trace.steps).err();

    if let Ok(instance) = session.current_instance() {
        trace.final_activity = Some(instance.activity.clone());
        trace.final_screen = Some(instance.current_screen.clone());
    }
    trace.final_tree_hash = session.current_view_tree().ok().map(|t| tree_hash(&t));
    trace.step_count = trace.steps.len();
    trace.verdict = match failure {
        Some(reason) => Verdict::Failed(reason),
        None if !verify_target(&trace, template, None) => Verdict::Failed(FailReason::TargetMismatch),
        None if template.fragment.is_some() => Verdict::ReachedFragment,
        None => Verdict::ReachedActivity,
    };
    trace
}

fn location(session: &SimSession<'_>) -> (String, String) {
    let top = session.current_instance().expect("session is live after a successful step");
    (top.activity.clone(), top.current_screen.clone())
}

fn run(
    session: &mut SimSession<'_>,
    template: &DeepLinkTemplate,
    link: &DeepLink,
    steps: &mut Vec<ReplayStep>,
) -> Result<(), FailReason> {
    let (activity, screen) = location(session);
    steps.push(ReplayStep::Launch { activity, screen });

    for step in template.intent_sequence.iter().skip(1) {
        let mut values = BTreeMap::new();
        for (name, slot) in &step.slots {
            let value = match slot {
                Slot::Param(param) => link
                    .values
                    .get(param)
                    .cloned()
                    .ok_or_else(|| FailReason::MissingValue { name: param.clone() })?,
                Slot::Pinned(literal) => {
                    let ty = step
                        .intent
                        .labels
                        .basic_extras()
                        .find(|(n, _)| n == name)
                        .map(|(_, ty)| ty)
                        .ok_or_else(|| FailReason::MissingValue { name: name.clone() })?;
                    Value::parse(ty, literal).map_err(|_| FailReason::MissingValue { name: name.clone() })?
                }
            };
            values.insert(name.clone(), value);
        }
        session
            .send_intent(&step.intent, &values)
            .map_err(|error| FailReason::Simulator { step: steps.len(), error })?;
        let (activity, screen) = location(session);
        if activity != step.intent.target {
            return Err(FailReason::UnexpectedActivity {
                step: steps.len(),
                expected: step.intent.target.clone(),
                found: activity,
            });
        }
        steps.push(ReplayStep::Intent { target: step.intent.target.clone(), values, activity, screen });
    }

    for trigger in &template.action_sequence {
        session
            .perform(trigger)
            .map_err(|error| FailReason::Simulator { step: steps.len(), error })?;
        let (activity, screen) = location(session);
        steps.push(ReplayStep::Action { trigger: trigger.clone(), activity, screen });
    }
    Ok(())
}

/// Whether the trace ended at the template's activity and, for a fragment
/// template, on a view tree with the expected structure hash (the
/// template's recorded hash unless `expected_hash` overrides it).
pub fn verify_target(trace: &ReplayTrace, template: &DeepLinkTemplate, expected_hash: Option<StructureHash>) -> bool {
    if trace.final_activity.as_deref() != Some(template.activity.as_str()) {
        return false;
    }
    if template.fragment.is_none() {
        return true;
    }
    match expected_hash.or(template.fragment_hash) {
        Some(expected) => trace.final_tree_hash == Some(expected),
        None => false,
    }
}

/// Failure reason rendered for humans.
impl core::fmt::Display for FailReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FailReason::UnknownTemplate { id } => write!(f, "unknown template {id}"),
            FailReason::MissingValue { name } => write!(f, "no value for {name}"),
            FailReason::Simulator { step, error } => write!(f, "step {step}: {error}"),
            FailReason::UnexpectedActivity { step, expected, found } => {
                write!(f, "step {step}: expected {expected}, landed on {found}")
            }
            FailReason::TargetMismatch => f.write_str("final location differs from the template target"),
        }
    }
}

impl ReplayTrace {
    pub fn failure(&self) -> Option<&FailReason> {
        match &self.verdict {
            Verdict::Failed(reason) => Some(reason),
            _ => None,
        }
    }

    pub fn summary(&self) -> String {
        match &self.verdict {
            Verdict::ReachedActivity => "ReachedActivity".to_string(),
            Verdict::ReachedFragment => "ReachedFragment".to_string(),
            Verdict::Failed(reason) => alloc::format!("Failed: {reason}"),
        }
    }
}
