//! Merkle batching for timestamp submissions.
//!
//! Tree rules: parents are `SHA-256(left ++ right)`, a level with an odd
//! node count duplicates its last node, and a single-leaf tree's root is
//! the leaf itself. Audit paths record each sibling together with the
//! side it sits on, so a proof can be refolded without knowing the leaf's
//! index.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Which side of the running hash a proof sibling sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
}

/// One audit-path step: the sibling hash and its side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    #[serde(with = "crate::crypto::hex_arr32")]
    pub sibling: [u8; 32],
    pub side: Side,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MerkleError {
    #[error("cannot build a Merkle tree over zero leaves")]
    EmptyBatch,
}

fn parent(left: &[u8; 32], right: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(left);
    h.update(right);
    h.finalize().into()
}

/// Build a Merkle tree over the leaves in order, returning the root and
/// one audit path per leaf (indexed like the input).
pub fn build_merkle(leaves: &[[u8; 32]]) -> Result<([u8; 32], Vec<Vec<PathStep>>), MerkleError> {
    if leaves.is_empty() {
        return Err(MerkleError::EmptyBatch);
    }
    let mut paths: Vec<Vec<PathStep>> = vec![Vec::new(); leaves.len()];
    // Track, per tree node of the current level, which leaves live below it.
    let mut level: Vec<([u8; 32], Vec<usize>)> = leaves
        .iter()
        .enumerate()
        .map(|(i, leaf)| (*leaf, vec![i]))
        .collect();

    while level.len() > 1 {
        if level.len() % 2 == 1 {
            let last = level.last().unwrap().clone();
            level.push(last);
        }
        let mut next = Vec::with_capacity(level.len() / 2);
        for pair in level.chunks_exact(2) {
            let (left, left_leaves) = &pair[0];
            let (right, right_leaves) = &pair[1];
            // A duplicated last node covers the same leaves as its sibling;
            // those leaves get exactly one step (hashing the node with
            // itself), not two.
            let duplicated = left_leaves == right_leaves;
            for &i in left_leaves {
                paths[i].push(PathStep {
                    sibling: *right,
                    side: Side::Right,
                });
            }
            if !duplicated {
                for &i in right_leaves {
                    paths[i].push(PathStep {
                        sibling: *left,
                        side: Side::Left,
                    });
                }
            }
            let mut combined = left_leaves.clone();
            if !duplicated {
                combined.extend_from_slice(right_leaves);
            }
            next.push((parent(left, right), combined));
        }
        level = next;
    }

    Ok((level[0].0, paths))
}

/// Refold a leaf up an audit path.
pub fn fold_path(leaf: &[u8; 32], path: &[PathStep]) -> [u8; 32] {
    let mut acc = *leaf;
    for step in path {
        acc = match step.side {
            Side::Left => parent(&step.sibling, &acc),
            Side::Right => parent(&acc, &step.sibling),
        };
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(b: u8) -> [u8; 32] {
        [b; 32]
    }

    #[test]
    fn single_leaf_root_is_leaf() {
        let (root, paths) = build_merkle(&[leaf(1)]).unwrap();
        assert_eq!(root, leaf(1));
        assert_eq!(paths, vec![Vec::<PathStep>::new()]);
    }

    #[test]
    fn two_leaves() {
        let (root, paths) = build_merkle(&[leaf(1), leaf(2)]).unwrap();
        assert_eq!(root, parent(&leaf(1), &leaf(2)));
        assert_eq!(fold_path(&leaf(1), &paths[0]), root);
        assert_eq!(fold_path(&leaf(2), &paths[1]), root);
    }

    #[test]
    fn three_leaves_duplicate_last() {
        let (root, paths) = build_merkle(&[leaf(1), leaf(2), leaf(3)]).unwrap();
        let expected = parent(&parent(&leaf(1), &leaf(2)), &parent(&leaf(3), &leaf(3)));
        assert_eq!(root, expected);
        for (i, l) in [leaf(1), leaf(2), leaf(3)].iter().enumerate() {
            assert_eq!(fold_path(l, &paths[i]), root, "leaf {i}");
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert_eq!(build_merkle(&[]), Err(MerkleError::EmptyBatch));
    }

    #[test]
    fn all_paths_verify_for_sizes_up_to_64() {
        for n in 1..=64usize {
            let leaves: Vec<[u8; 32]> = (0..n)
                .map(|i| {
                    let mut l = [0u8; 32];
                    l[0] = i as u8;
                    l[1] = (i >> 8) as u8;
                    l
                })
                .collect();
            let (root, paths) = build_merkle(&leaves).unwrap();
            for (i, l) in leaves.iter().enumerate() {
                assert_eq!(fold_path(l, &paths[i]), root, "size {n}, leaf {i}");
            }
        }
    }

    #[test]
    fn mutated_sibling_breaks_fold() {
        let leaves: Vec<[u8; 32]> = (0..5u8).map(leaf).collect();
        let (root, paths) = build_merkle(&leaves).unwrap();
        let mut path = paths[2].clone();
        path[0].sibling[4] ^= 1;
        assert_ne!(fold_path(&leaves[2], &path), root);
    }
}
