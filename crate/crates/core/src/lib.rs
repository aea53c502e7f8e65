//! Deep-link synthesis over declarative app models.
//!
//! The crate is `no_std` (with `alloc`). It covers the whole analysis
//! pipeline: the app-model types and their validation ([`model`]), an
//! executable simulator for those models ([`sim`]), navigation-graph
//! construction and shortcut computation ([`nav`]), structure hashing and
//! fragment crawling ([`hash`], [`crawl`]), deep-link templates and URI
//! handling ([`link`]) and template replay ([`replay`]).
//!
//! File formats, the CLI and the HTTP service live in the `deeplink` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod crawl;
pub mod hash;
pub mod link;
pub mod model;
pub mod nav;
pub mod replay;
pub mod sim;
pub mod value;

pub use crawl::{
    crawl_ftg, fragment_path, name_fragments, CrawlError, CrawlOptions, EntryScript,
    FragmentEdge, FragmentNode, FragmentTransitionGraph, ScriptIntent, Trigger,
};
pub use hash::{fnv1a64, tree_hash, StructureHash};
pub use link::{
    build_templates, make_uri_schema, parse_deep_link, DeepLink, DeepLinkTemplate, FragmentTarget,
    LinkError,
    ModelDigest, ReleaseManifest, Selection, SelectionTarget, Slot, TemplateIntent, UriSchema,
};
pub use model::{
    count_declared_deep_links, validate_replayability, ActivityDecl, AppModel, Binding,
    ClickEffect, IntentDecl, IntentFilterDecl, Label, LabelKind, LabelSet, Param, ScreenDecl,
    ValidationError, ViewNode,
};
pub use nav::{
    build_nav_graph, can_replace, compute_shortcuts, enumerate_paths, path_labels,
    unique_shortcuts, NavEdge, NavError, NavGraph, Path, Shortcut, Shortcuts,
};
pub use replay::{replay_deep_link, verify_target, ReplayStep, ReplayTrace, Verdict};
pub use sim::{ActivityInstance, SimError, SimEvent, SimEventKind, SimSession};
pub use value::{Value, ValueType};
