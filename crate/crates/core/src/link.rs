//! Deep-link templates, URI schemas and release manifests.
//!
//! A template records how to reach a location: an intent sequence (the
//! launch followed by a shortcut's intents, each basic extra either a
//! parameter or a pinned constant) and an action sequence (the clicks that
//! lead to a fragment). Its URI schema is
//! `http://<reversed package>/<ActivitySimpleName>?<params>#<fragment>`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crawl::{fragment_path, FragmentTransitionGraph, Trigger};
use crate::hash::StructureHash;
use crate::model::{AppModel, IntentDecl, LabelSet, Param};
use crate::nav::{unique_shortcuts, Path, Shortcuts};
use crate::value::{Value, ValueType};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// RFC 3986 unreserved characters stay as they are.
const COMPONENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("activity simple name {0:?} is shared by several activities")]
    AmbiguousTarget(String),
    #[error("unknown activity {0:?}")]
    UnknownActivity(String),
    #[error("fragment {fragment:?} of {activity:?} was selected but the activity has not been crawled")]
    NotCrawled { activity: String, fragment: String },
    #[error("activity {activity:?} has no fragment named {fragment:?}")]
    NoSuchFragment { activity: String, fragment: String },
    #[error("fragment {fragment:?} is the entry fragment of {activity:?}; select the activity itself")]
    EntryFragment { activity: String, fragment: String },
    #[error("activity {0:?} is only reachable through intents with opaque payloads")]
    NotReplayable(String),
    #[error("two templates share the schema key {0}")]
    SchemaCollision(String),
    #[error("parameter {0:?} is used with different types")]
    ParameterConflict(String),
    #[error("pinned value {literal:?} for {name:?} is not a valid {expected}")]
    BadPin { name: String, literal: String, expected: ValueType },
    #[error("pinned extra {name:?} does not occur on any path to {activity:?}")]
    UnknownPin { activity: String, name: String },
    #[error("malformed deep link {0:?}")]
    MalformedUri(String),
    #[error("no template matches {0:?}")]
    NoMatchingTemplate(String),
    #[error("several templates match {0:?}")]
    AmbiguousMatch(String),
    #[error("parameter {name:?}: {literal:?} is not a valid {expected}")]
    TypeMismatch { name: String, literal: String, expected: ValueType },
    #[error("parameter {0:?} has no value")]
    MissingValue(String),
    #[error("value given for unknown parameter {0:?}")]
    UnexpectedValue(String),
    #[error("template {id}: {reason}")]
    InvalidTemplate { id: String, reason: String },
    #[error("fragment error: {0}")]
    Crawl(String),
}

/// Digest of the app model a manifest was built from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelDigest(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UriSchema {
    pub host: String,
    pub target: String,
    /// Sorted ascending.
    pub parameter_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment: Option<String>,
}

impl UriSchema {
    /// `(target, parameter names, fragment)`, unique within a manifest.
    pub fn key(&self) -> (String, Vec<String>, Option<String>) {
        (self.target.clone(), self.parameter_names.clone(), self.fragment.clone())
    }

    fn render(&self, value: impl Fn(&str) -> String) -> String {
        let mut uri = alloc::format!("http://{}/{}", self.host, self.target);
        for (i, name) in self.parameter_names.iter().enumerate() {
            uri.push(if i == 0 { '?' } else { '&' });
            uri.push_str(&encode(name));
            uri.push('=');
            uri.push_str(&value(name));
        }
        if let Some(fragment) = &self.fragment {
            uri.push('#');
            uri.push_str(&encode(fragment));
        }
        uri
    }
}

/// Renders with `{name}` placeholders.
impl fmt::Display for UriSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(|name| alloc::format!("{{{name}}}")))
    }
}

fn encode(s: &str) -> String {
    utf8_percent_encode(s, COMPONENT).to_string()
}

fn decode(s: &str, uri: &str) -> Result<String, LinkError> {
    percent_decode_str(s)
        .decode_utf8()
        .map(|c| c.into_owned())
        .map_err(|_| LinkError::MalformedUri(uri.to_string()))
}

fn simple_name(activity: &str) -> &str {
    activity.rsplit('.').next().unwrap_or(activity)
}

pub fn make_uri_schema(
    model: &AppModel,
    activity: &str,
    params: &[String],
    fragment: Option<&str>,
) -> Result<UriSchema, LinkError> {
    if model.activity(activity).is_none() {
        return Err(LinkError::UnknownActivity(activity.to_string()));
    }
    let target = simple_name(activity);
    let clashes = model.activities.iter().filter(|a| simple_name(&a.name) == target).count();
    if clashes > 1 {
        return Err(LinkError::AmbiguousTarget(target.to_string()));
    }
    let host = model.package_name.split('.').rev().collect::<Vec<_>>().join(".");
    let mut parameter_names = params.to_vec();
    parameter_names.sort();
    parameter_names.dedup();
    Ok(UriSchema {
        host,
        target: target.to_string(),
        parameter_names,
        fragment: fragment.map(str::to_string),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    /// Filled from the deep link's parameter of this name.
    Param(String),
    /// Fixed literal chosen by the developer.
    Pinned(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TemplateIntent {
    pub intent: IntentDecl,
    /// One slot per basic extra of the intent.
    #[serde(default)]
    pub slots: BTreeMap<String, Slot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeepLinkTemplate {
    pub id: String,
    pub activity: String,
    pub uri_schema: UriSchema,
    /// Starts with the app-launching intent.
    pub intent_sequence: Vec<TemplateIntent>,
    #[serde(default)]
    pub action_sequence: Vec<Trigger>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment_hash: Option<StructureHash>,
    /// Sorted by name.
    pub parameters: Vec<Param>,
}

fn template_id(schema: &UriSchema) -> String {
    let mut id = schema.target.clone();
    if !schema.parameter_names.is_empty() {
        id.push('(');
        id.push_str(&schema.parameter_names.join(","));
        id.push(')');
    }
    if let Some(f) = &schema.fragment {
        id.push('#');
        id.push_str(f);
    }
    id
}

/// Where a template leads inside its activity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentTarget {
    pub name: String,
    pub hash: StructureHash,
    pub actions: Vec<Trigger>,
}

impl DeepLinkTemplate {
    /// Template issuing `intents` after the launch. Basic extras named in
    /// `pinned` get that literal; all others become parameters.
    pub fn from_intents(
        model: &AppModel,
        activity: &str,
        intents: &[IntentDecl],
        fragment: Option<FragmentTarget>,
        pinned: &BTreeMap<String, String>,
    ) -> Result<Self, LinkError> {
        let launch = TemplateIntent {
            intent: IntentDecl {
                target: model.main_activity.clone(),
                labels: LabelSet::launch(),
                param_bindings: BTreeMap::new(),
            },
            slots: BTreeMap::new(),
        };
        let mut sequence = alloc::vec![launch];
        let mut parameters: BTreeMap<String, ValueType> = BTreeMap::new();
        for intent in intents {
            let mut slots = BTreeMap::new();
            for (name, ty) in intent.labels.basic_extras() {
                let slot = match pinned.get(name) {
                    Some(literal) => {
                        Value::parse(ty, literal).map_err(|_| LinkError::BadPin {
                            name: name.to_string(),
                            literal: literal.clone(),
                            expected: ty,
                        })?;
                        Slot::Pinned(literal.clone())
                    }
                    None => {
                        if *parameters.entry(name.to_string()).or_insert(ty) != ty {
                            return Err(LinkError::ParameterConflict(name.to_string()));
                        }
                        Slot::Param(name.to_string())
                    }
                };
                slots.insert(name.to_string(), slot);
            }
            sequence.push(TemplateIntent { intent: intent.clone(), slots });
        }
        let names: Vec<String> = parameters.keys().cloned().collect();
        let schema = make_uri_schema(model, activity, &names, fragment.as_ref().map(|f| f.name.as_str()))?;
        Ok(DeepLinkTemplate {
            id: template_id(&schema),
            activity: activity.to_string(),
            uri_schema: schema,
            intent_sequence: sequence,
            action_sequence: fragment.as_ref().map(|f| f.actions.clone()).unwrap_or_default(),
            fragment_hash: fragment.as_ref().map(|f| f.hash),
            fragment: fragment.map(|f| f.name),
            parameters: parameters
                .into_iter()
                .map(|(name, value_type)| Param { name, value_type })
                .collect(),
        })
    }

    pub fn from_path(
        model: &AppModel,
        path: &Path,
        fragment: Option<FragmentTarget>,
        pinned: &BTreeMap<String, String>,
    ) -> Result<Self, LinkError> {
        let intents: Vec<IntentDecl> = path.transitions.iter().map(|e| e.intent.clone()).collect();
        Self::from_intents(model, path.target(), &intents, fragment, pinned)
    }

    /// Concrete link for the given parameter values.
    pub fn link(&self, values: BTreeMap<String, Value>) -> Result<DeepLink, LinkError> {
        for param in &self.parameters {
            let value = values.get(&param.name).ok_or_else(|| LinkError::MissingValue(param.name.clone()))?;
            if value.value_type() != param.value_type {
                return Err(LinkError::TypeMismatch {
                    name: param.name.clone(),
                    literal: value.to_string(),
                    expected: param.value_type,
                });
            }
        }
        if let Some(extra) = values.keys().find(|k| !self.parameters.iter().any(|p| &p.name == *k)) {
            return Err(LinkError::UnexpectedValue(extra.clone()));
        }
        let uri = self.uri_schema.render(|name| encode(&values[name].to_string()));
        Ok(DeepLink {
            uri,
            template_id: self.id.clone(),
            values,
            fragment: self.fragment.clone(),
        })
    }

    /// Link using a fixed value of each parameter's type.
    pub fn sample_link(&self) -> DeepLink {
        let values = self
            .parameters
            .iter()
            .map(|p| (p.name.clone(), p.value_type.default_value().expect("parameters are basic")))
            .collect();
        self.link(values).expect("sample values match the parameter types")
    }

    /// Checks the template's internal invariants against the app's package.
    pub fn check(&self, package_name: &str) -> Result<(), LinkError> {
        let invalid = |reason: &str| LinkError::InvalidTemplate { id: self.id.clone(), reason: reason.to_string() };
        if self.action_sequence.is_empty() == self.fragment.is_some() {
            return Err(invalid("action sequence must be non-empty exactly when a fragment is targeted"));
        }
        if self.fragment.is_some() != self.fragment_hash.is_some() {
            return Err(invalid("fragment and fragment hash must be given together"));
        }
        if self.intent_sequence.is_empty() {
            return Err(invalid("intent sequence must start with the launch"));
        }
        let mut unbound: BTreeMap<&str, ValueType> = BTreeMap::new();
        for step in &self.intent_sequence {
            let extras: BTreeMap<&str, ValueType> = step.intent.labels.basic_extras().collect();
            if extras.len() != step.slots.len() || !step.slots.keys().all(|k| extras.contains_key(k.as_str())) {
                return Err(invalid("slots must cover exactly the basic extras of each intent"));
            }
            for (name, slot) in &step.slots {
                let ty = extras[name.as_str()];
                match slot {
                    Slot::Param(p) if p == name => {
                        if *unbound.entry(name.as_str()).or_insert(ty) != ty {
                            return Err(invalid("parameter used with different types"));
                        }
                    }
                    Slot::Param(_) => return Err(invalid("parameter slot must be named after its extra")),
                    Slot::Pinned(literal) => {
                        if Value::parse(ty, literal).is_err() {
                            return Err(invalid("pinned literal does not match its type"));
                        }
                    }
                }
            }
        }
        let declared: BTreeMap<&str, ValueType> =
            self.parameters.iter().map(|p| (p.name.as_str(), p.value_type)).collect();
        if declared != unbound || declared.len() != self.parameters.len() {
            return Err(invalid("parameters must equal the unbound extras of the intent sequence"));
        }
        let host = package_name.split('.').rev().collect::<Vec<_>>().join(".");
        let names: Vec<String> = self.parameters.iter().map(|p| p.name.clone()).collect();
        let schema = &self.uri_schema;
        if schema.host != host
            || schema.target != simple_name(&self.activity)
            || schema.parameter_names != names
            || schema.fragment != self.fragment
        {
            return Err(invalid("URI schema does not match the template"));
        }
        if self.id != template_id(schema) {
            return Err(invalid("id does not match the URI schema"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReleaseManifest {
    pub format_version: u32,
    pub package_name: String,
    pub model_digest: ModelDigest,
    pub templates: Vec<DeepLinkTemplate>,
}

impl ReleaseManifest {
    pub fn template(&self, id: &str) -> Option<&DeepLinkTemplate> {
        self.templates.iter().find(|t| t.id == id)
    }

    /// Template invariants plus schema-key uniqueness.
    pub fn check(&self) -> Result<(), LinkError> {
        let mut keys = BTreeSet::new();
        for t in &self.templates {
            t.check(&self.package_name)?;
            if !keys.insert(t.uri_schema.key()) {
                return Err(LinkError::SchemaCollision(t.id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SelectionTarget {
    pub activity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment: Option<String>,
    /// Extras fixed to a literal instead of exposed as parameters.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pinned: BTreeMap<String, String>,
}

/// The locations a developer wants deep links for.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Selection {
    #[serde(default)]
    pub targets: Vec<SelectionTarget>,
}

/// One template per unique shortcut of every selected location.
///
/// `ftgs` holds crawled (and named) fragment graphs per activity; they are
/// only needed for fragment selections.
pub fn build_templates(
    model: &AppModel,
    digest: ModelDigest,
    shortcuts: &Shortcuts,
    ftgs: &BTreeMap<String, FragmentTransitionGraph>,
    selection: &Selection,
) -> Result<ReleaseManifest, LinkError> {
    let mut templates: Vec<DeepLinkTemplate> = Vec::new();
    let mut keys = BTreeSet::new();
    for target in &selection.targets {
        let activity = target.activity.as_str();
        if model.activity(activity).is_none() {
            return Err(LinkError::UnknownActivity(activity.to_string()));
        }
        let paths = unique_shortcuts(shortcuts, activity);
        if paths.is_empty() {
            return Err(LinkError::NotReplayable(activity.to_string()));
        }
        for name in target.pinned.keys() {
            let occurs = paths
                .iter()
                .any(|p| p.transitions.iter().any(|e| e.labels.basic_extras().any(|(n, _)| n == name)));
            if !occurs {
                return Err(LinkError::UnknownPin { activity: activity.to_string(), name: name.clone() });
            }
        }
        let fragment = match &target.fragment {
            None => None,
            Some(name) => Some(resolve_fragment(ftgs, activity, name)?),
        };
        for path in &paths {
            let template = DeepLinkTemplate::from_path(model, path, fragment.clone(), &target.pinned)?;
            if !keys.insert(template.uri_schema.key()) {
                return Err(LinkError::SchemaCollision(template.id));
            }
            templates.push(template);
        }
    }
    Ok(ReleaseManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        package_name: model.package_name.clone(),
        model_digest: digest,
        templates,
    })
}

fn resolve_fragment(
    ftgs: &BTreeMap<String, FragmentTransitionGraph>,
    activity: &str,
    name: &str,
) -> Result<FragmentTarget, LinkError> {
    let ftg = ftgs.get(activity).ok_or_else(|| LinkError::NotCrawled {
        activity: activity.to_string(),
        fragment: name.to_string(),
    })?;
    let vertex = ftg.vertex_by_name(name).ok_or_else(|| LinkError::NoSuchFragment {
        activity: activity.to_string(),
        fragment: name.to_string(),
    })?;
    if vertex.hash == ftg.start {
        return Err(LinkError::EntryFragment { activity: activity.to_string(), fragment: name.to_string() });
    }
    let actions = fragment_path(ftg, vertex.hash).map_err(|e| LinkError::Crawl(e.to_string()))?;
    Ok(FragmentTarget { name: name.to_string(), hash: vertex.hash, actions })
}

/// A concrete deep link matched to a template.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DeepLink {
    pub uri: String,
    pub template_id: String,
    pub values: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fragment: Option<String>,
}

pub fn parse_deep_link(manifest: &ReleaseManifest, uri: &str) -> Result<DeepLink, LinkError> {
    let malformed = || LinkError::MalformedUri(uri.to_string());
    let rest = uri.strip_prefix("http://").ok_or_else(malformed)?;
    let (rest, fragment) = match rest.split_once('#') {
        Some((r, f)) => (r, Some(decode(f, uri)?)),
        None => (rest, None),
    };
    let (location, query) = rest.split_once('?').unwrap_or((rest, ""));
    let (host, target) = location.split_once('/').ok_or_else(malformed)?;
    if host.is_empty() || target.is_empty() || target.contains('/') {
        return Err(malformed());
    }
    let mut raw: BTreeMap<String, String> = BTreeMap::new();
    if !query.is_empty() {
        for pair in query.split('&') {
            let (k, v) = pair.split_once('=').ok_or_else(malformed)?;
            if raw.insert(decode(k, uri)?, decode(v, uri)?).is_some() {
                return Err(malformed());
            }
        }
    }
    let names: Vec<String> = raw.keys().cloned().collect();
    let mut matches = manifest.templates.iter().filter(|t| {
        let s = &t.uri_schema;
        s.host == host && s.target == target && s.fragment == fragment && s.parameter_names == names
    });
    let template = matches.next().ok_or_else(|| LinkError::NoMatchingTemplate(uri.to_string()))?;
    if matches.next().is_some() {
        return Err(LinkError::AmbiguousMatch(uri.to_string()));
    }
    let mut values = BTreeMap::new();
    for param in &template.parameters {
        let literal = &raw[&param.name];
        let value = Value::parse(param.value_type, literal).map_err(|_| LinkError::TypeMismatch {
            name: param.name.clone(),
            literal: literal.clone(),
            expected: param.value_type,
        })?;
        values.insert(param.name.clone(), value);
    }
    Ok(DeepLink { uri: uri.to_string(), template_id: template.id.clone(), values, fragment })
}
