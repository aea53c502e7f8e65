//! Random view trees and an independent structure-hash oracle.

use std::hash::Hasher;

use deeplink_core::ViewNode;
use fnv::FnvHasher;
use rand::seq::SliceRandom;
use rand::Rng;

pub const TAGS: [&str; 10] = [
    "LinearLayout",
    "FrameLayout",
    "RelativeLayout",
    "Button",
    "TextView",
    "ImageView",
    "ListView",
    "EditText",
    "ScrollView",
    "CheckBox",
];

pub fn random_tree(rng: &mut impl Rng, depth: usize) -> ViewNode {
    let mut node = ViewNode::leaf(*TAGS.choose(rng).unwrap());
    if rng.gen_bool(0.5) {
        node.id = Some(format!("v{}", rng.gen_range(0..1000)));
    }
    if depth > 0 {
        let n = rng.gen_range(0..=4);
        node.children = (0..n).map(|_| random_tree(rng, depth - 1)).collect();
    }
    node
}

/// Same tree with the children of every node shuffled.
pub fn permute(rng: &mut impl Rng, tree: &ViewNode) -> ViewNode {
    let mut node = tree.clone();
    node.children = tree.children.iter().map(|c| permute(rng, c)).collect();
    node.children.shuffle(rng);
    node
}

pub fn count_nodes(tree: &ViewNode) -> usize {
    1 + tree.children.iter().map(count_nodes).sum::<usize>()
}

/// Same tree with the tag of one node (pre-order index `target`) replaced
/// by a different tag.
pub fn mutate_tag(rng: &mut impl Rng, tree: &ViewNode) -> ViewNode {
    fn go(node: &mut ViewNode, target: usize, seen: &mut usize, tag: &mut dyn FnMut(&str) -> String) {
        if *seen == target {
            node.tag = tag(&node.tag);
        }
        *seen += 1;
        for c in &mut node.children {
            go(c, target, seen, tag);
        }
    }
    let mut out = tree.clone();
    let target = rng.gen_range(0..count_nodes(tree));
    let pick: Vec<&str> = TAGS.to_vec();
    let choice = rng.gen_range(0..pick.len() - 1);
    go(&mut out, target, &mut 0, &mut |old| {
        let others: Vec<&&str> = pick.iter().filter(|t| **t != old).collect();
        others.get(choice).map(|t| t.to_string()).unwrap_or_else(|| format!("{old}X"))
    });
    out
}

pub fn strip_ids(tree: &ViewNode) -> ViewNode {
    let mut node = tree.clone();
    node.id = None;
    node.children = tree.children.iter().map(strip_ids).collect();
    node
}

/// FNV-1a 64 over the tag, followed (for inner nodes) by the children's
/// hashes as 16 lowercase hex digits in ascending order.
pub fn oracle_hash(tree: &ViewNode) -> u64 {
    let mut children: Vec<String> = tree.children.iter().map(|c| format!("{:016x}", oracle_hash(c))).collect();
    children.sort();
    let mut h = FnvHasher::default();
    h.write(tree.tag.as_bytes());
    for c in &children {
        h.write(c.as_bytes());
    }
    h.finish()
}
