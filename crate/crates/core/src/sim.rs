//! Deterministic execution of an [`AppModel`].
//!
//! A [`SimSession`] is a back stack of activity instances plus the global
//! state variables. Every operation either applies completely or fails
//! with a [`SimError`] and leaves the session untouched.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::{AppModel, Binding, ClickEffect, IntentDecl, ViewNode};
use crate::value::{Value, ValueType};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "code", content = "detail", rename_all = "camelCase")]
pub enum SimError {
    #[error("activity {activity} reads unset state variable {variable}")]
    UnsetDependency { variable: String, activity: String },
    #[error("extra {name}: expected {expected}, got {found}")]
    TypeMismatch { name: String, expected: ValueType, found: String },
    #[error("missing value for {name}")]
    MissingValue { name: String },
    #[error("no such activity {0}")]
    NoSuchTarget(String),
    #[error("no such view {0}")]
    NoSuchView(String),
    #[error("intent to {0} carries an opaque payload and cannot be issued from outside the app")]
    NotReplayable(String),
    #[error("session is terminated")]
    Terminated,
}

/// A reference to a view to click: its resource id, or its child-index
/// path from the root of the current view tree.
///
/// Rendered as the bare id, or as `@` followed by `/`-separated indices
/// (`@` for the root itself).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Trigger {
    ResourceId(String),
    TreePosition(Vec<usize>),
}

impl Trigger {
    pub fn resource_id(&self) -> Option<&str> {
        match self {
            Trigger::ResourceId(id) => Some(id),
            Trigger::TreePosition(_) => None,
        }
    }
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trigger::ResourceId(id) => f.write_str(id),
            Trigger::TreePosition(pos) => {
                f.write_str("@")?;
                for (i, p) in pos.iter().enumerate() {
                    if i > 0 {
                        f.write_str("/")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid view reference {0:?}")]
pub struct ParseTriggerError(pub String);

impl FromStr for Trigger {
    type Err = ParseTriggerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseTriggerError(s.to_string());
        if let Some(rest) = s.strip_prefix('@') {
            if rest.is_empty() {
                return Ok(Trigger::TreePosition(Vec::new()));
            }
            rest.split('/')
                .map(|p| p.parse::<usize>().map_err(|_| err()))
                .collect::<Result<_, _>>()
                .map(Trigger::TreePosition)
        } else if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            Ok(Trigger::ResourceId(s.to_string()))
        } else {
            Err(err())
        }
    }
}

impl Serialize for Trigger {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Trigger {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ActivityInstance {
    pub activity: String,
    pub params: BTreeMap<String, Value>,
    pub current_screen: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlay: Option<ViewNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum SimEventKind {
    Launch,
    Intent,
    Click,
    Back,
    Reset,
}

/// One successfully applied operation and where it left the app.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimEvent {
    pub kind: SimEventKind,
    pub args: Vec<String>,
    pub activity: Option<String>,
    pub screen: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSession<'m> {
    model: &'m AppModel,
    back_stack: Vec<ActivityInstance>,
    state: BTreeSet<String>,
    events: Vec<SimEvent>,
}

impl<'m> SimSession<'m> {
    /// Starts the app at the main activity's root screen with every state
    /// variable unset.
    pub fn launch(model: &'m AppModel) -> Self {
        let mut session = SimSession {
            model,
            back_stack: Vec::new(),
            state: BTreeSet::new(),
            events: Vec::new(),
        };
        session.start(SimEventKind::Launch);
        session
    }

    fn start(&mut self, kind: SimEventKind) {
        self.back_stack.clear();
        self.state.clear();
        let main = self
            .model
            .activity(&self.model.main_activity)
            .expect("validated model declares its main activity");
        self.state.extend(main.sets_state.iter().cloned());
        self.back_stack.push(ActivityInstance {
            activity: main.name.clone(),
            params: BTreeMap::new(),
            current_screen: main.root_screen.clone(),
            overlay: None,
        });
        self.log(kind, Vec::new());
    }

    /// Relaunches the app: back stack and state are rebuilt from scratch.
    /// The event log is kept.
    pub fn reset(&mut self) {
        self.start(SimEventKind::Reset);
    }

    pub fn model(&self) -> &'m AppModel {
        self.model
    }

    pub fn is_terminated(&self) -> bool {
        self.back_stack.is_empty()
    }

    pub fn back_stack(&self) -> &[ActivityInstance] {
        &self.back_stack
    }

    pub fn state(&self) -> &BTreeSet<String> {
        &self.state
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    pub fn current_instance(&self) -> Result<&ActivityInstance, SimError> {
        self.back_stack.last().ok_or(SimError::Terminated)
    }

    pub fn current_activity(&self) -> Result<&str, SimError> {
        self.current_instance().map(|i| i.activity.as_str())
    }

    pub fn current_screen(&self) -> Result<&str, SimError> {
        self.current_instance().map(|i| i.current_screen.as_str())
    }

    /// The current screen's tree with any popup overlay appended as the
    /// last child of the root.
    pub fn current_view_tree(&self) -> Result<ViewNode, SimError> {
        let top = self.current_instance()?;
        let mut tree = self.screen_tree(top).clone();
        if let Some(overlay) = &top.overlay {
            tree.children.push(overlay.clone());
        }
        Ok(tree)
    }

    fn screen_tree(&self, instance: &ActivityInstance) -> &'m ViewNode {
        &self
            .model
            .activity(&instance.activity)
            .and_then(|a| a.screen(&instance.current_screen))
            .expect("instances only reference declared screens")
            .view_tree
    }

    /// Issues `intent` from outside the app with the given extra values.
    pub fn send_intent(&mut self, intent: &IntentDecl, values: &BTreeMap<String, Value>) -> Result<(), SimError> {
        self.current_instance()?;
        if intent.labels.has_opaque() {
            return Err(SimError::NotReplayable(intent.target.clone()));
        }
        self.push(intent, values)
    }

    fn push(&mut self, intent: &IntentDecl, values: &BTreeMap<String, Value>) -> Result<(), SimError> {
        let target = self
            .model
            .activity(&intent.target)
            .ok_or_else(|| SimError::NoSuchTarget(intent.target.clone()))?;
        let mut params = BTreeMap::new();
        for (name, ty) in intent.labels.basic_extras() {
            let value = values
                .get(name)
                .ok_or_else(|| SimError::MissingValue { name: name.to_string() })?;
            check_type(name, ty, value)?;
            params.insert(name.to_string(), value.clone());
        }
        for param in &target.required_params {
            let value = params
                .get(&param.name)
                .ok_or_else(|| SimError::MissingValue { name: param.name.clone() })?;
            check_type(&param.name, param.value_type, value)?;
        }
        if let Some(variable) = target.reads_state.iter().find(|v| !self.state.contains(*v)) {
            return Err(SimError::UnsetDependency {
                variable: variable.clone(),
                activity: target.name.clone(),
            });
        }
        self.state.extend(target.sets_state.iter().cloned());
        let args = core::iter::once(target.name.clone())
            .chain(params.iter().map(|(k, v)| alloc::format!("{k}={v}")))
            .collect();
        self.back_stack.push(ActivityInstance {
            activity: target.name.clone(),
            params,
            current_screen: target.root_screen.clone(),
            overlay: None,
        });
        self.log(SimEventKind::Intent, args);
        Ok(())
    }

    /// Clicks the view with resource id `id` in the current view tree.
    pub fn click(&mut self, id: &str) -> Result<(), SimError> {
        let tree = self.current_view_tree()?;
        let position = tree
            .walk_positions()
            .into_iter()
            .find(|(_, n)| n.id.as_deref() == Some(id))
            .map(|(p, _)| p)
            .ok_or_else(|| SimError::NoSuchView(id.to_string()))?;
        self.click_resolved(&tree, &position, Trigger::ResourceId(id.to_string()))
    }

    /// Clicks the view at a child-index path of the current view tree.
    pub fn click_at(&mut self, position: &[usize]) -> Result<(), SimError> {
        let tree = self.current_view_tree()?;
        let trigger = Trigger::TreePosition(position.to_vec());
        if tree.at_position(position).is_none() {
            return Err(SimError::NoSuchView(trigger.to_string()));
        }
        self.click_resolved(&tree, position, trigger)
    }

    pub fn perform(&mut self, trigger: &Trigger) -> Result<(), SimError> {
        match trigger {
            Trigger::ResourceId(id) => self.click(id),
            Trigger::TreePosition(pos) => self.click_at(pos),
        }
    }

    fn click_resolved(&mut self, tree: &ViewNode, position: &[usize], trigger: Trigger) -> Result<(), SimError> {
        let top = self.current_instance()?;
        let screen_children = self.screen_tree(top).children.len();
        let in_overlay = top.overlay.is_some() && position.first() == Some(&screen_children);
        let node = tree.at_position(position).expect("position checked by caller");
        let screen = self
            .model
            .activity(&top.activity)
            .and_then(|a| a.screen(&top.current_screen))
            .expect("instances only reference declared screens");
        let effect = match (&node.id, in_overlay) {
            (Some(id), false) => screen.handlers.get(id),
            _ => None,
        }
        .or(node.on_click.as_deref());

        match effect {
            None | Some(ClickEffect::Noop) => {}
            Some(ClickEffect::StartActivity(intent)) => {
                let values = self.bind(intent)?;
                self.push(intent, &values)?;
            }
            Some(ClickEffect::ShowScreen(name)) => {
                let top = self.back_stack.last_mut().expect("checked non-empty");
                top.current_screen = name.clone();
                top.overlay = None;
            }
            Some(ClickEffect::OpenPopup(overlay)) => {
                let top = self.back_stack.last_mut().expect("checked non-empty");
                top.overlay = Some(overlay.clone());
            }
        }
        self.log(SimEventKind::Click, alloc::vec![trigger.to_string()]);
        Ok(())
    }

    fn bind(&self, intent: &IntentDecl) -> Result<BTreeMap<String, Value>, SimError> {
        let top = self.current_instance()?;
        let mut values = BTreeMap::new();
        for (name, ty) in intent.labels.basic_extras() {
            let value = match intent.param_bindings.get(name) {
                Some(Binding::Const(literal)) => Value::parse(ty, literal).map_err(|e| SimError::TypeMismatch {
                    name: name.to_string(),
                    expected: ty,
                    found: e.literal,
                })?,
                Some(Binding::Forward(param)) => top
                    .params
                    .get(param)
                    .cloned()
                    .ok_or_else(|| SimError::MissingValue { name: param.clone() })?,
                None => return Err(SimError::MissingValue { name: name.to_string() }),
            };
            values.insert(name.to_string(), value);
        }
        Ok(values)
    }

    /// Pops the top activity. Popping the last one terminates the session.
    pub fn do_back(&mut self) -> Result<(), SimError> {
        self.back_stack.pop().ok_or(SimError::Terminated)?;
        self.log(SimEventKind::Back, Vec::new());
        Ok(())
    }

    fn log(&mut self, kind: SimEventKind, args: Vec<String>) {
        let top = self.back_stack.last();
        self.events.push(SimEvent {
            kind,
            args,
            activity: top.map(|i| i.activity.clone()),
            screen: top.map(|i| i.current_screen.clone()),
        });
    }
}

fn check_type(name: &str, expected: ValueType, value: &Value) -> Result<(), SimError> {
    if value.value_type() == expected {
        Ok(())
    } else {
        Err(SimError::TypeMismatch {
            name: name.to_string(),
            expected,
            found: value.value_type().to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::Label;
    use alloc::vec;

    fn vals(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    fn to_b() -> IntentDecl {
        intent("B", &[("foo", ValueType::Int, "0")])
    }

    fn to_a() -> IntentDecl {
        intent("A", &[("p1", ValueType::Text, "x")])
    }

    #[test]
    fn launch_starts_at_main_root() {
        let model = motivating();
        let s = SimSession::launch(&model);
        assert_eq!(s.current_activity(), Ok("Main"));
        assert_eq!(s.current_screen(), Ok("root"));
        assert!(s.state().is_empty());
        assert_eq!(s, SimSession::launch(&model));
    }

    #[test]
    fn direct_intent_to_b_hits_unset_dependency() {
        let model = motivating();
        let mut s = SimSession::launch(&model);
        let before = s.clone();
        let err = s.send_intent(&to_b(), &vals(&[("foo", Value::Int(0))])).unwrap_err();
        assert_eq!(err, SimError::UnsetDependency { variable: "fooList".into(), activity: "B".into() });
        assert_eq!(s, before);
    }

    #[test]
    fn intents_through_a_reach_b() {
        let model = motivating();
        let mut s = SimSession::launch(&model);
        s.send_intent(&to_a(), &vals(&[("p1", Value::Text("x".into()))])).unwrap();
        s.send_intent(&to_b(), &vals(&[("foo", Value::Int(0))])).unwrap();
        assert_eq!(s.current_activity(), Ok("B"));
        assert_eq!(s.back_stack().len(), 3);
    }

    #[test]
    fn missing_and_mistyped_values() {
        let model = motivating();
        let mut s = SimSession::launch(&model);
        assert_eq!(s.send_intent(&to_a(), &BTreeMap::new()), Err(SimError::MissingValue { name: "p1".into() }));
        assert!(matches!(
            s.send_intent(&to_a(), &vals(&[("p1", Value::Int(1))])),
            Err(SimError::TypeMismatch { .. })
        ));
        let ghost = IntentDecl { target: "Ghost".into(), labels: Default::default(), param_bindings: Default::default() };
        assert_eq!(s.send_intent(&ghost, &BTreeMap::new()), Err(SimError::NoSuchTarget("Ghost".into())));
        let opaque = IntentDecl {
            target: "A".into(),
            labels: [Label::extra("obj", ValueType::Opaque)].into_iter().collect(),
            param_bindings: Default::default(),
        };
        assert!(matches!(s.send_intent(&opaque, &BTreeMap::new()), Err(SimError::NotReplayable(_))));
    }

    #[test]
    fn clicks_apply_effects() {
        let model = motivating();
        let mut s = SimSession::launch(&model);
        s.click("title").unwrap();
        assert_eq!(s.current_screen(), Ok("root"));
        assert_eq!(s.back_stack().len(), 1);

        s.click("button2").unwrap();
        assert_eq!(s.current_screen(), Ok("child"));

        s.click("button1").unwrap();
        assert_eq!(s.current_activity(), Ok("A"));
        assert_eq!(s.current_instance().unwrap().params["p1"], Value::Text("s1".into()));
        assert_eq!(s.click("nope"), Err(SimError::NoSuchView("nope".into())));
    }

    #[test]
    fn back_restores_previous_instance_and_keeps_state() {
        let model = motivating();
        let mut s = SimSession::launch(&model);
        s.click("button2").unwrap();
        let main_instance = s.current_instance().unwrap().clone();
        s.click("button1").unwrap();
        let a_instance = s.current_instance().unwrap().clone();
        s.click("button3").unwrap();
        assert_eq!(s.current_activity(), Ok("B"));
        s.do_back().unwrap();
        assert_eq!(s.current_instance().unwrap(), &a_instance);
        // fooList survived the pop, so B is reachable again.
        s.click("button3").unwrap();
        assert_eq!(s.current_activity(), Ok("B"));
        s.do_back().unwrap();
        s.do_back().unwrap();
        assert_eq!(s.current_instance().unwrap(), &main_instance);
        s.do_back().unwrap();
        assert!(s.is_terminated());
        assert_eq!(s.current_activity(), Err(SimError::Terminated));
        assert_eq!(s.do_back(), Err(SimError::Terminated));
        assert_eq!(s.click("button1"), Err(SimError::Terminated));
        s.reset();
        assert_eq!(s.current_activity(), Ok("Main"));
        assert!(s.state().is_empty());
    }

    #[test]
    fn popup_overlay_composes_into_tree() {
        let mut model = motivating();
        let overlay = ViewNode::leaf("Dialog").with_children(vec![ViewNode::leaf("TextView")]);
        model.activities[0]
            .screens
            .get_mut("root")
            .unwrap()
            .handlers
            .insert("title".into(), ClickEffect::OpenPopup(overlay.clone()));
        model.validate().unwrap();
        let mut s = SimSession::launch(&model);
        s.click("title").unwrap();
        let tree = s.current_view_tree().unwrap();
        assert_eq!(tree.children.last(), Some(&overlay));
        // Clicking inside the overlay is a no-op.
        s.click_at(&[3, 0]).unwrap();
        assert_eq!(s.current_view_tree().unwrap(), tree);
        s.click("button2").unwrap();
        assert_eq!(s.current_instance().unwrap().overlay, None);
    }

    #[test]
    fn reset_equals_launch() {
        let model = motivating();
        let mut s = SimSession::launch(&model);
        s.click("button1").unwrap();
        s.reset();
        let fresh = SimSession::launch(&model);
        assert_eq!(s.back_stack(), fresh.back_stack());
        assert_eq!(s.state(), fresh.state());
    }

    #[test]
    fn trigger_rendering() {
        for text in ["button1", "@0/2/1", "@"] {
            let t: Trigger = text.parse().unwrap();
            assert_eq!(t.to_string(), text);
        }
        assert!("@x".parse::<Trigger>().is_err());
        assert!("".parse::<Trigger>().is_err());
    }
}
