//! Random single-activity models and a screen-reachability oracle for
//! crawls.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use deeplink_core::{
    ActivityDecl, AppModel, ClickEffect, IntentDecl, LabelSet, ScreenDecl, StructureHash, ViewNode,
};
use rand::Rng;

use super::trees::oracle_hash;

#[derive(Debug, Clone, Copy, Default)]
pub struct Flavor {
    /// Some clickable views have no resource id.
    pub missing_ids: bool,
    /// Some views open a popup.
    pub popups: bool,
}

fn screen_name(i: usize) -> String {
    format!("s{i}")
}

/// Activity `Main` with 1 to 6 screens `s0..`, each marked by a unique
/// leaf tag, plus an activity `Other` some buttons start.
pub fn random_model(rng: &mut impl Rng, flavor: Flavor) -> AppModel {
    let k = rng.gen_range(1..=6);
    let mut screens = BTreeMap::new();
    for i in 0..k {
        let mut children = vec![ViewNode::leaf(format!("Screen{i}"))];
        let mut handlers = BTreeMap::new();
        for j in 0..rng.gen_range(1..=4) {
            let effect = match rng.gen_range(0..10) {
                0..=5 => Some(ClickEffect::ShowScreen(screen_name(rng.gen_range(0..k)))),
                6 => Some(ClickEffect::StartActivity(IntentDecl {
                    target: "Other".into(),
                    labels: LabelSet::new(),
                    param_bindings: BTreeMap::new(),
                })),
                7 if flavor.popups => Some(ClickEffect::OpenPopup(
                    ViewNode::leaf("PopupWindow").with_children(vec![ViewNode::leaf("TextView")]),
                )),
                7 => Some(ClickEffect::Noop),
                _ => None,
            };
            let mut view = ViewNode::leaf("Button");
            if flavor.missing_ids && rng.gen_bool(0.4) {
                view.on_click = effect.map(Box::new);
            } else {
                let id = format!("b{j}");
                view.id = Some(id.clone());
                if let Some(effect) = effect {
                    handlers.insert(id, effect);
                }
            }
            children.push(view);
        }
        let tree = ViewNode::leaf("LinearLayout").with_children(children);
        screens.insert(screen_name(i), ScreenDecl { view_tree: tree, handlers });
    }
    let main = ActivityDecl {
        name: "Main".into(),
        manifest_filters: vec![],
        required_params: vec![],
        reads_state: BTreeSet::new(),
        sets_state: BTreeSet::new(),
        root_screen: screen_name(0),
        screens,
        externally_launchable: false,
    };
    let mut other = main.clone();
    other.name = "Other".into();
    other.screens = [("root".to_string(), ScreenDecl { view_tree: ViewNode::leaf("Other"), handlers: BTreeMap::new() })]
        .into_iter()
        .collect();
    other.root_screen = "root".into();
    other.externally_launchable = true;
    let model = AppModel {
        format_version: 1,
        package_name: "com.example.generated".into(),
        main_activity: "Main".into(),
        state_variables: BTreeSet::new(),
        activities: vec![main, other],
    };
    model.validate().expect("generated model is valid");
    model
}

fn effects(screen: &ScreenDecl) -> Vec<&ClickEffect> {
    let mut out: Vec<&ClickEffect> = screen.handlers.values().collect();
    out.extend(screen.view_tree.walk().filter_map(|v| v.on_click.as_deref()));
    out
}

/// Structure hashes of the declared screens of `activity` reachable from
/// its root screen by clicking.
pub fn reachable_screens(model: &AppModel, activity: &str) -> BTreeSet<StructureHash> {
    let decl = model.activity(activity).expect("activity exists");
    let mut seen = BTreeSet::from([decl.root_screen.clone()]);
    let mut queue = VecDeque::from([decl.root_screen.clone()]);
    while let Some(name) = queue.pop_front() {
        for effect in effects(&decl.screens[&name]) {
            if let ClickEffect::ShowScreen(next) = effect {
                if seen.insert(next.clone()) {
                    queue.push_back(next.clone());
                }
            }
        }
    }
    seen.iter().map(|s| StructureHash(oracle_hash(&decl.screens[s].view_tree))).collect()
}

/// `(precision, recall)` of `found` against `truth`.
pub fn accuracy(found: &BTreeSet<StructureHash>, truth: &BTreeSet<StructureHash>) -> (f64, f64) {
    let hit = found.intersection(truth).count() as f64;
    (hit / found.len() as f64, hit / truth.len() as f64)
}
