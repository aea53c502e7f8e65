//! The declarative app model.
//!
//! An [`AppModel`] is an executable description of a multi-page app: its
//! activities, the screens (candidate fragments) each activity can show,
//! the view trees of those screens, and what clicking each view does.
//! Activities communicate through [`IntentDecl`]s, which are abstracted as
//! label sets for the navigation analysis.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::{Value, ValueType};

pub const FORMAT_VERSION: u32 = 1;

pub const ACTION_VIEW: &str = "android.intent.action.VIEW";
pub const CATEGORY_BROWSABLE: &str = "android.intent.category.BROWSABLE";
pub const ACTION_MAIN: &str = "android.intent.action.MAIN";
pub const CATEGORY_LAUNCHER: &str = "android.intent.category.LAUNCHER";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AppModel {
    pub format_version: u32,
    pub package_name: String,
    pub main_activity: String,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub state_variables: BTreeSet<String>,
    pub activities: Vec<ActivityDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ActivityDecl {
    pub name: String,
    pub root_screen: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub manifest_filters: Vec<IntentFilterDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub required_params: Vec<Param>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub reads_state: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub sets_state: BTreeSet<String>,
    pub screens: BTreeMap<String, ScreenDecl>,
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub externally_launchable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub value_type: ValueType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IntentFilterDecl {
    pub action: String,
    #[serde(default)]
    pub categories: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_host: Option<String>,
}

impl IntentFilterDecl {
    /// Whether the filter makes its activity openable from a browser link.
    pub fn is_deep_link(&self) -> bool {
        self.action == ACTION_VIEW && self.categories.contains(CATEGORY_BROWSABLE)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScreenDecl {
    pub view_tree: ViewNode,
    /// Click effects keyed by view resource id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub handlers: BTreeMap<String, ClickEffect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ViewNode {
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ViewNode>,
    /// Click effect of a view that has no resource id, which therefore
    /// cannot appear in a screen's handler table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_click: Option<Box<ClickEffect>>,
}

impl ViewNode {
    pub fn leaf(tag: impl Into<String>) -> Self {
        ViewNode {
            tag: tag.into(),
            id: None,
            children: Vec::new(),
            on_click: None,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn with_children(mut self, children: Vec<ViewNode>) -> Self {
        self.children = children;
        self
    }

    /// Pre-order (document order) traversal.
    pub fn walk(&self) -> impl Iterator<Item = &ViewNode> {
        let mut stack = alloc::vec![self];
        core::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }

    /// Pre-order traversal yielding each node with its child-index path
    /// from this node.
    pub fn walk_positions(&self) -> Vec<(Vec<usize>, &ViewNode)> {
        fn go<'a>(node: &'a ViewNode, pos: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, &'a ViewNode)>) {
            out.push((pos.clone(), node));
            for (i, child) in node.children.iter().enumerate() {
                pos.push(i);
                go(child, pos, out);
                pos.pop();
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn find_id(&self, id: &str) -> Option<&ViewNode> {
        self.walk().find(|n| n.id.as_deref() == Some(id))
    }

    pub fn at_position(&self, position: &[usize]) -> Option<&ViewNode> {
        position
            .iter()
            .try_fold(self, |node, &i| node.children.get(i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ClickEffect {
    StartActivity(IntentDecl),
    ShowScreen(String),
    OpenPopup(ViewNode),
    Noop,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IntentDecl {
    pub target: String,
    #[serde(default)]
    pub labels: LabelSet,
    /// How a click fills each basic extra of the intent.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub param_bindings: BTreeMap<String, Binding>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binding {
    /// Literal value, parsed against the extra's type.
    Const(String),
    /// Forward the named parameter the source activity was started with.
    Forward(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Action,
    Category,
    Data,
    Extra,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label {
    pub kind: LabelKind,
    pub name: String,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub value_type: Option<ValueType>,
}

impl Label {
    pub fn action(name: impl Into<String>) -> Self {
        Label { kind: LabelKind::Action, name: name.into(), value_type: None }
    }

    pub fn category(name: impl Into<String>) -> Self {
        Label { kind: LabelKind::Category, name: name.into(), value_type: None }
    }

    pub fn data(name: impl Into<String>) -> Self {
        Label { kind: LabelKind::Data, name: name.into(), value_type: None }
    }

    pub fn extra(name: impl Into<String>, ty: ValueType) -> Self {
        Label { kind: LabelKind::Extra, name: name.into(), value_type: Some(ty) }
    }

    pub fn is_opaque(&self) -> bool {
        self.value_type == Some(ValueType::Opaque)
    }

    /// The basic type of an extra label; `None` for non-extras and opaque extras.
    pub fn basic_extra(&self) -> Option<ValueType> {
        match (self.kind, self.value_type) {
            (LabelKind::Extra, Some(ty)) if ty.is_basic() => Some(ty),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            LabelKind::Action => "action",
            LabelKind::Category => "category",
            LabelKind::Data => "data",
            LabelKind::Extra => "extra",
        };
        write!(f, "{kind}:{}", self.name)?;
        if let Some(ty) = self.value_type {
            write!(f, ":{ty}")?;
        }
        Ok(())
    }
}

/// The label abstraction of an intent (or of a whole path).
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelSet(pub BTreeSet<Label>);

impl LabelSet {
    pub fn new() -> Self {
        LabelSet(BTreeSet::new())
    }

    pub fn insert(&mut self, label: Label) -> bool {
        self.0.insert(label)
    }

    pub fn extend(&mut self, other: &LabelSet) {
        self.0.extend(other.0.iter().cloned());
    }

    pub fn is_subset(&self, other: &LabelSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Label> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_opaque(&self) -> bool {
        self.0.iter().any(Label::is_opaque)
    }

    /// Basic-typed extras as `(name, type)`.
    pub fn basic_extras(&self) -> impl Iterator<Item = (&str, ValueType)> {
        self.0
            .iter()
            .filter_map(|l| l.basic_extra().map(|ty| (l.name.as_str(), ty)))
    }

    /// The labels of the synthetic app-launching transition.
    pub fn launch() -> Self {
        [Label::action(ACTION_MAIN), Label::category(CATEGORY_LAUNCHER)]
            .into_iter()
            .collect()
    }
}

impl FromIterator<Label> for LabelSet {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        LabelSet(iter.into_iter().collect())
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, label) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{label}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("unsupported formatVersion {0}")]
    UnsupportedFormatVersion(u32),
    #[error("invalid package name {0:?}")]
    InvalidPackageName(String),
    #[error("invalid identifier {0:?}")]
    InvalidIdentifier(String),
    #[error("duplicate activity {0:?}")]
    DuplicateActivity(String),
    #[error("main activity {0:?} is not declared")]
    MissingMainActivity(String),
    #[error("activity {activity:?}: root screen {screen:?} is not declared")]
    MissingRootScreen { activity: String, screen: String },
    #[error("activity {activity:?}: screen {screen:?} is not declared")]
    UnknownScreen { activity: String, screen: String },
    #[error("activity {activity:?}: state variable {variable:?} is not declared")]
    UnknownStateVariable { activity: String, variable: String },
    #[error("activity {activity:?}: duplicate required parameter {param:?}")]
    DuplicateParam { activity: String, param: String },
    #[error("activity {activity:?}: required parameter {param:?} must have a basic type")]
    OpaqueParam { activity: String, param: String },
    #[error("activity {activity:?}, screen {screen:?}: duplicate view id {id:?}")]
    DuplicateViewId { activity: String, screen: String, id: String },
    #[error("activity {activity:?}, screen {screen:?}: handler for missing view {id:?}")]
    DanglingHandler { activity: String, screen: String, id: String },
    #[error("activity {activity:?}: inline click effect on view with id {id:?}; use the handler table")]
    InlineHandlerWithId { activity: String, id: String },
    #[error("activity {activity:?}: intent targets undeclared activity {target:?}")]
    UnknownTarget { activity: String, target: String },
    #[error("activity {activity:?}: malformed label {label}")]
    MalformedLabel { activity: String, label: String },
    #[error("activity {activity:?}: intent to {target:?} has no binding for extra {extra:?}")]
    UnboundExtra { activity: String, target: String, extra: String },
    #[error("activity {activity:?}: intent to {target:?} binds {extra:?}, which is not a basic extra of the intent")]
    StrayBinding { activity: String, target: String, extra: String },
    #[error("activity {activity:?}: constant {literal:?} for {extra:?} is not a valid {expected}")]
    BadConstant { activity: String, extra: String, literal: String, expected: ValueType },
    #[error("activity {activity:?}: forwarded parameter {param:?} is not a required parameter of type {expected}")]
    BadForward { activity: String, param: String, expected: ValueType },
    #[error("activity {activity:?}: intent to {target:?} does not supply required parameter {param:?}")]
    RequiredParamNotCovered { activity: String, target: String, param: String },
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_dotted_identifier(s: &str) -> bool {
    !s.is_empty() && s.split('.').all(is_identifier)
}

impl AppModel {
    pub fn activity(&self, name: &str) -> Option<&ActivityDecl> {
        self.activities.iter().find(|a| a.name == name)
    }

    /// Every intent a click can issue, as `(source activity, intent)`, in
    /// declaration order.
    pub fn declared_intents(&self) -> Vec<(&str, &IntentDecl)> {
        let mut out = Vec::new();
        for activity in &self.activities {
            activity.for_each_effect(&mut |_, effect| {
                if let ClickEffect::StartActivity(intent) = effect {
                    out.push((activity.name.as_str(), intent));
                }
            });
        }
        out
    }

    /// Checks every structural invariant of the model.
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.format_version != FORMAT_VERSION {
            return Err(ValidationError::UnsupportedFormatVersion(self.format_version));
        }
        if !is_dotted_identifier(&self.package_name) {
            return Err(ValidationError::InvalidPackageName(self.package_name.clone()));
        }
        let mut names = BTreeSet::new();
        for activity in &self.activities {
            if !is_dotted_identifier(&activity.name) {
                return Err(ValidationError::InvalidIdentifier(activity.name.clone()));
            }
            if !names.insert(activity.name.as_str()) {
                return Err(ValidationError::DuplicateActivity(activity.name.clone()));
            }
        }
        if self.activity(&self.main_activity).is_none() {
            return Err(ValidationError::MissingMainActivity(self.main_activity.clone()));
        }
        for variable in &self.state_variables {
            if !is_identifier(variable) {
                return Err(ValidationError::InvalidIdentifier(variable.clone()));
            }
        }
        for activity in &self.activities {
            self.validate_activity(activity)?;
        }
        Ok(())
    }

    fn validate_activity(&self, activity: &ActivityDecl) -> Result<(), ValidationError> {
        let name = &activity.name;
        if !activity.screens.contains_key(&activity.root_screen) {
            return Err(ValidationError::MissingRootScreen {
                activity: name.clone(),
                screen: activity.root_screen.clone(),
            });
        }
        for variable in activity.reads_state.iter().chain(&activity.sets_state) {
            if !self.state_variables.contains(variable) {
                return Err(ValidationError::UnknownStateVariable {
                    activity: name.clone(),
                    variable: variable.clone(),
                });
            }
        }
        let mut params = BTreeSet::new();
        for param in &activity.required_params {
            if !is_identifier(&param.name) {
                return Err(ValidationError::InvalidIdentifier(param.name.clone()));
            }
            if !params.insert(param.name.as_str()) {
                return Err(ValidationError::DuplicateParam {
                    activity: name.clone(),
                    param: param.name.clone(),
                });
            }
            if !param.value_type.is_basic() {
                return Err(ValidationError::OpaqueParam {
                    activity: name.clone(),
                    param: param.name.clone(),
                });
            }
        }
        for (screen_name, screen) in &activity.screens {
            if !is_identifier(screen_name) {
                return Err(ValidationError::InvalidIdentifier(screen_name.clone()));
            }
            validate_tree(name, screen_name, &screen.view_tree)?;
            for id in screen.handlers.keys() {
                if screen.view_tree.find_id(id).is_none() {
                    return Err(ValidationError::DanglingHandler {
                        activity: name.clone(),
                        screen: screen_name.clone(),
                        id: id.clone(),
                    });
                }
            }
        }
        let mut result = Ok(());
        activity.for_each_effect(&mut |screen, effect| {
            if result.is_ok() {
                result = self.validate_effect(activity, screen, effect);
            }
        });
        result
    }

    fn validate_effect(
        &self,
        source: &ActivityDecl,
        screen: &str,
        effect: &ClickEffect,
    ) -> Result<(), ValidationError> {
        let activity = || source.name.clone();
        match effect {
            ClickEffect::Noop => Ok(()),
            ClickEffect::ShowScreen(target) => {
                if source.screens.contains_key(target) {
                    Ok(())
                } else {
                    Err(ValidationError::UnknownScreen { activity: activity(), screen: target.clone() })
                }
            }
            ClickEffect::OpenPopup(tree) => validate_tree(&source.name, screen, tree),
            ClickEffect::StartActivity(intent) => {
                let Some(target) = self.activity(&intent.target) else {
                    return Err(ValidationError::UnknownTarget {
                        activity: activity(),
                        target: intent.target.clone(),
                    });
                };
                for label in intent.labels.iter() {
                    let typed = label.value_type.is_some();
                    if (label.kind == LabelKind::Extra) != typed || label.name.is_empty() {
                        return Err(ValidationError::MalformedLabel {
                            activity: activity(),
                            label: alloc::format!("{label}"),
                        });
                    }
                }
                let extras: BTreeMap<&str, ValueType> = intent.labels.basic_extras().collect();
                for (extra, ty) in &extras {
                    let Some(binding) = intent.param_bindings.get(*extra) else {
                        return Err(ValidationError::UnboundExtra {
                            activity: activity(),
                            target: intent.target.clone(),
                            extra: String::from(*extra),
                        });
                    };
                    match binding {
                        Binding::Const(literal) => {
                            if Value::parse(*ty, literal).is_err() {
                                return Err(ValidationError::BadConstant {
                                    activity: activity(),
                                    extra: String::from(*extra),
                                    literal: literal.clone(),
                                    expected: *ty,
                                });
                            }
                        }
                        Binding::Forward(param) => {
                            let ok = source
                                .required_params
                                .iter()
                                .any(|p| &p.name == param && p.value_type == *ty);
                            if !ok {
                                return Err(ValidationError::BadForward {
                                    activity: activity(),
                                    param: param.clone(),
                                    expected: *ty,
                                });
                            }
                        }
                    }
                }
                for extra in intent.param_bindings.keys() {
                    if !extras.contains_key(extra.as_str()) {
                        return Err(ValidationError::StrayBinding {
                            activity: activity(),
                            target: intent.target.clone(),
                            extra: extra.clone(),
                        });
                    }
                }
                for param in &target.required_params {
                    if extras.get(param.name.as_str()) != Some(&param.value_type) {
                        return Err(ValidationError::RequiredParamNotCovered {
                            activity: activity(),
                            target: intent.target.clone(),
                            param: param.name.clone(),
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

fn validate_tree(activity: &str, screen: &str, tree: &ViewNode) -> Result<(), ValidationError> {
    let mut ids = BTreeSet::new();
    for node in tree.walk() {
        if let Some(id) = &node.id {
            if !is_identifier(id) {
                return Err(ValidationError::InvalidIdentifier(id.clone()));
            }
            if !ids.insert(id.as_str()) {
                return Err(ValidationError::DuplicateViewId {
                    activity: String::from(activity),
                    screen: String::from(screen),
                    id: id.clone(),
                });
            }
            if node.on_click.is_some() {
                return Err(ValidationError::InlineHandlerWithId {
                    activity: String::from(activity),
                    id: id.clone(),
                });
            }
        }
    }
    Ok(())
}

impl ActivityDecl {
    pub fn screen(&self, name: &str) -> Option<&ScreenDecl> {
        self.screens.get(name)
    }

    /// Visits every click effect declared by this activity: handler tables,
    /// inline effects, and effects nested inside popup overlays.
    pub fn for_each_effect<'a>(&'a self, f: &mut dyn FnMut(&'a str, &'a ClickEffect)) {
        fn visit_tree<'a>(screen: &'a str, tree: &'a ViewNode, f: &mut dyn FnMut(&'a str, &'a ClickEffect)) {
            for node in tree.walk() {
                if let Some(effect) = &node.on_click {
                    visit_effect(screen, effect, f);
                }
            }
        }
        fn visit_effect<'a>(screen: &'a str, effect: &'a ClickEffect, f: &mut dyn FnMut(&'a str, &'a ClickEffect)) {
            f(screen, effect);
            if let ClickEffect::OpenPopup(tree) = effect {
                visit_tree(screen, tree, f);
            }
        }
        for (name, screen) in &self.screens {
            for effect in screen.handlers.values() {
                visit_effect(name, effect, f);
            }
            visit_tree(name, &screen.view_tree, f);
        }
    }
}

/// Number of activities declaring at least one browser-openable intent
/// filter (action VIEW with category BROWSABLE).
pub fn count_declared_deep_links(model: &AppModel) -> usize {
    model
        .activities
        .iter()
        .filter(|a| a.manifest_filters.iter().any(IntentFilterDecl::is_deep_link))
        .count()
}

/// Activities that have inbound intents, all of which carry an opaque
/// payload. Such activities cannot be reached by replaying intents and are
/// excluded from linking. Declaration order.
pub fn validate_replayability(model: &AppModel) -> Vec<String> {
    let mut inbound: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (_, intent) in model.declared_intents() {
        let entry = inbound.entry(intent.target.as_str()).or_default();
        entry.0 += 1;
        if intent.labels.has_opaque() {
            entry.1 += 1;
        }
    }
    model
        .activities
        .iter()
        .filter(|a| matches!(inbound.get(a.name.as_str()), Some(&(n, opaque)) if n == opaque))
        .map(|a| a.name.clone())
        .collect()
}
