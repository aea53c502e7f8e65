//! On-disk formats: app models, release manifests, fragment graphs,
//! entry scripts, selections, DOT exports and JSON-lines traces.

use std::fmt::Write as _;
use std::path::Path;

use deeplink_core::link::MANIFEST_FORMAT_VERSION;
use deeplink_core::{
    AppModel, EntryScript, FragmentTransitionGraph, LinkError, ModelDigest, NavGraph, ReleaseManifest,
    ReplayTrace, Selection, SimEvent, ValidationError,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed {what}: {message}")]
    Parse { what: &'static str, message: String },
    #[error("invalid app model: {0}")]
    Validation(#[from] ValidationError),
    #[error("invalid manifest: {0}")]
    Manifest(LinkError),
    #[error("unsupported manifest format version {0}")]
    ManifestVersion(u32),
    #[error("manifest was built from model {}, this model is {}", expected.0, found.0)]
    DigestMismatch { expected: ModelDigest, found: ModelDigest },
}

pub fn read_file(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|e| FormatError::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), FormatError> {
    std::fs::write(path, contents).map_err(|e| FormatError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn parse<T: DeserializeOwned>(what: &'static str, text: &str) -> Result<T, FormatError> {
    serde_json::from_str(text).map_err(|e| FormatError::Parse { what, message: e.to_string() })
}

/// Pretty JSON with a trailing newline. Every artifact written by the CLI
/// or returned by the service goes through here.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize");
    s.push('\n');
    s
}

pub fn parse_app_model(text: &str) -> Result<AppModel, FormatError> {
    let model: AppModel = parse("app model", text)?;
    model.validate()?;
    Ok(model)
}

pub fn load_app_model(path: &Path) -> Result<AppModel, FormatError> {
    parse_app_model(&read_file(path)?)
}

/// SHA-256 over the compact JSON form of the model.
///
/// All maps and sets in the model are ordered, so the encoding (and the
/// digest) only depends on the model's content.
pub fn model_digest(model: &AppModel) -> ModelDigest {
    let bytes = serde_json::to_vec(model).expect("app models serialize");
    ModelDigest(format!("sha256:{}", hex::encode(Sha256::digest(&bytes))))
}

pub fn export_manifest(manifest: &ReleaseManifest) -> String {
    to_json(manifest)
}

/// Parses and checks a manifest. With a model, the manifest's digest must
/// match it.
pub fn import_manifest(text: &str, model: Option<&AppModel>) -> Result<ReleaseManifest, FormatError> {
    let manifest: ReleaseManifest = parse("manifest", text)?;
    if manifest.format_version != MANIFEST_FORMAT_VERSION {
        return Err(FormatError::ManifestVersion(manifest.format_version));
    }
    manifest.check().map_err(FormatError::Manifest)?;
    if let Some(model) = model {
        let found = model_digest(model);
        if found != manifest.model_digest {
            return Err(FormatError::DigestMismatch { expected: manifest.model_digest.clone(), found });
        }
        if model.package_name != manifest.package_name {
            return Err(FormatError::Manifest(LinkError::InvalidTemplate {
                id: String::new(),
                reason: format!("package {} does not match model package {}", manifest.package_name, model.package_name),
            }));
        }
    }
    Ok(manifest)
}

pub fn parse_ftg(text: &str) -> Result<FragmentTransitionGraph, FormatError> {
    parse("fragment graph", text)
}

pub fn parse_entry_script(text: &str) -> Result<EntryScript, FormatError> {
    parse("entry script", text)
}

pub fn parse_selection(text: &str) -> Result<Selection, FormatError> {
    parse("selection", text)
}

fn dot_id(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn navgraph_dot(graph: &NavGraph) -> String {
    let mut out = String::from("digraph navgraph {\n  rankdir=LR;\n");
    let _ = writeln!(out, "  {} [shape=point];", dot_id("<start>"));
    for v in &graph.vertices {
        let shape = if *v == graph.start { "doublecircle" } else { "box" };
        let _ = writeln!(out, "  {} [shape={shape}];", dot_id(v));
    }
    let _ = writeln!(out, "  {} -> {} [label=\"launch\"];", dot_id("<start>"), dot_id(&graph.start));
    for e in &graph.edges {
        let mut attrs = format!("label={}", dot_id(&e.labels.to_string()));
        if e.synthetic {
            attrs.push_str(", style=dashed");
        }
        if !e.is_replayable() {
            attrs.push_str(", color=red");
        }
        let _ = writeln!(out, "  {} -> {} [{attrs}];", dot_id(&e.from), dot_id(&e.to));
    }
    out.push_str("}\n");
    out
}

pub fn ftg_dot(ftg: &FragmentTransitionGraph) -> String {
    let mut out = format!("digraph {} {{\n", dot_id(&ftg.activity));
    for v in &ftg.vertices {
        let label = match &v.name {
            Some(name) => format!("{name}\n{}", v.hash.short()),
            None => v.hash.short(),
        };
        let shape = if v.hash == ftg.start { "doublecircle" } else { "box" };
        let _ = writeln!(out, "  {} [label={}, shape={shape}];", dot_id(&v.hash.to_string()), dot_id(&label));
    }
    for e in &ftg.edges {
        let style = if e.cross { ", style=dashed" } else { "" };
        let _ = writeln!(
            out,
            "  {} -> {} [label={}{style}];",
            dot_id(&e.source.to_string()),
            dot_id(&e.target.to_string()),
            dot_id(&e.trigger.to_string())
        );
    }
    out.push_str("}\n");
    out
}

/// One compact JSON document per line.
pub fn to_jsonl<'a, T: Serialize + 'a>(items: impl IntoIterator<Item = &'a T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("artifact types serialize"));
        out.push('\n');
    }
    out
}

pub fn traces_jsonl(traces: &[ReplayTrace]) -> String {
    to_jsonl(traces)
}

pub fn events_jsonl(events: &[SimEvent]) -> String {
    to_jsonl(events)
}
