//! Order-invariant structure hashing of view trees.
//!
//! Fragments carry no identifier of their own, so a fragment is identified
//! by the shape of its view tree. A leaf hashes its view tag; an inner node
//! hashes its tag followed by its children's hashes, rendered as 16-digit
//! lowercase hex and sorted ascending, so sibling order does not matter.
//! Resource ids do not participate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::ViewNode;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Structure hash of a view tree, rendered as 16 lowercase hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StructureHash(pub u64);

impl StructureHash {
    /// First eight hex digits, used for generated fragment names.
    pub fn short(&self) -> String {
        let mut s = alloc::format!("{self}");
        s.truncate(8);
        s
    }
}

impl fmt::Display for StructureHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("structure hash must be 16 lowercase hex digits, got {0:?}")]
pub struct ParseHashError(pub String);

impl FromStr for StructureHash {
    type Err = ParseHashError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let valid = s.len() == 16 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if !valid {
            return Err(ParseHashError(String::from(s)));
        }
        u64::from_str_radix(s, 16)
            .map(StructureHash)
            .map_err(|_| ParseHashError(String::from(s)))
    }
}

impl Serialize for StructureHash {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StructureHash {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn tree_hash(root: &ViewNode) -> StructureHash {
    if root.children.is_empty() {
        return StructureHash(fnv1a64(root.tag.as_bytes()));
    }
    let mut hashes: Vec<StructureHash> = root.children.iter().map(tree_hash).collect();
    // Fixed-width hex sorts the same as the integers.
    hashes.sort_unstable();
    let mut buf = String::with_capacity(root.tag.len() + 16 * hashes.len());
    buf.push_str(&root.tag);
    for h in &hashes {
        let _ = write!(buf, "{h}");
    }
    StructureHash(fnv1a64(buf.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::hash::Hasher;

    // Reference implementation from the `fnv` crate.
    fn oracle(bytes: &[u8]) -> u64 {
        let mut h = fnv::FnvHasher::default();
        h.write(bytes);
        h.finish()
    }

    #[test]
    fn fnv_matches_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
        for s in ["Button", "LinearLayout", "ünïcode", "TextView"] {
            assert_eq!(fnv1a64(s.as_bytes()), oracle(s.as_bytes()));
        }
    }

    #[test]
    fn leaf_hash_is_fnv_of_tag() {
        assert_eq!(tree_hash(&ViewNode::leaf("Button")).0, oracle(b"Button"));
        // Resource ids are ignored.
        assert_eq!(tree_hash(&ViewNode::leaf("Button").with_id("ok")).0, oracle(b"Button"));
    }

    #[test]
    fn inner_hash_concatenates_sorted_child_hex() {
        let a = oracle(b"A");
        let b = oracle(b"B");
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let expected = oracle(alloc::format!("Row{lo:016x}{hi:016x}").as_bytes());
        let ab = ViewNode::leaf("Row").with_children(vec![ViewNode::leaf("A"), ViewNode::leaf("B")]);
        let ba = ViewNode::leaf("Row").with_children(vec![ViewNode::leaf("B"), ViewNode::leaf("A")]);
        assert_eq!(tree_hash(&ab).0, expected);
        assert_eq!(tree_hash(&ab), tree_hash(&ba));
    }

    #[test]
    fn tag_change_changes_root_hash() {
        let t1 = ViewNode::leaf("Row").with_children(vec![ViewNode::leaf("A"), ViewNode::leaf("B")]);
        let t2 = ViewNode::leaf("Row").with_children(vec![ViewNode::leaf("C"), ViewNode::leaf("B")]);
        assert_ne!(tree_hash(&t1), tree_hash(&t2));
    }

    #[test]
    fn hex_round_trip() {
        let h = StructureHash(0x00ab_0000_0000_0001);
        assert_eq!(alloc::format!("{h}"), "00ab000000000001");
        assert_eq!("00ab000000000001".parse::<StructureHash>(), Ok(h));
        assert_eq!(h.short(), "00ab0000");
        assert!("00AB000000000001".parse::<StructureHash>().is_err());
        assert!("abc".parse::<StructureHash>().is_err());
    }
}
