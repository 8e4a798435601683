//! Coordinates on rooted trees.
//!
//! A vertex is the word of branch indices that leads to it from the root,
//! so the root is the empty word and the successors of `x` are `(x, 1)`,
//! `(x, 2)`, ... . All regions are kept in one canonical order (level first,
//! then lexicographic) and every tensor-factor ordering downstream is derived
//! from it.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("invalid vertex text {0:?}")]
    Parse(String),
    #[error("branch index {index} outside 1..={k}")]
    BranchOutOfRange { index: usize, k: usize },
    #[error("vertex set is empty")]
    EmptyRegion,
    #[error("vertex set is not a connected subtree (roots {0} and {1})")]
    NotConnected(VertexWord, VertexWord),
    #[error("vertex {0} is not in the tree")]
    NotInTree(VertexWord),
    #[error("tree order must be at least 1")]
    ZeroOrder,
}

/// A vertex of the rooted tree, written as its word of branch indices.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct VertexWord(Vec<u8>);

impl VertexWord {
    pub fn root() -> Self {
        VertexWord(Vec::new())
    }

    pub fn new(indices: &[usize]) -> Self {
        VertexWord(
            indices
                .iter()
                .map(|&i| {
                    assert!((1..=255).contains(&i), "branch index {i} out of range");
                    i as u8
                })
                .collect(),
        )
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn level(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&i| i as usize)
    }

    pub fn parent(&self) -> Option<VertexWord> {
        if self.0.is_empty() {
            None
        } else {
            Some(VertexWord(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// Last branch index, i.e. which successor of its parent this vertex is.
    pub fn last_index(&self) -> Option<usize> {
        self.0.last().map(|&i| i as usize)
    }

    pub fn child(&self, i: usize) -> VertexWord {
        assert!((1..=255).contains(&i), "branch index {i} out of range");
        let mut w = self.0.clone();
        w.push(i as u8);
        VertexWord(w)
    }

    /// True when `self` lies on the path from the root to `other` (inclusive).
    pub fn is_prefix_of(&self, other: &VertexWord) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Image of `self` under the composite shift `α_x`, i.e. the word `x` followed by `self`.
    pub fn shifted_by(&self, x: &VertexWord) -> VertexWord {
        let mut w = x.0.clone();
        w.extend_from_slice(&self.0);
        VertexWord(w)
    }

    /// Inverse of [`shifted_by`](Self::shifted_by) where defined.
    pub fn strip_prefix(&self, x: &VertexWord) -> Option<VertexWord> {
        self.0.strip_prefix(x.0.as_slice()).map(|w| VertexWord(w.to_vec()))
    }

    pub fn max_index(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0) as usize
    }
}

impl Ord for VertexWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for VertexWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for VertexWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("o");
        }
        for (n, i) in self.0.iter().enumerate() {
            if n > 0 {
                f.write_str(".")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for VertexWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VertexWord({self})")
    }
}

impl FromStr for VertexWord {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "o" {
            return Ok(VertexWord::root());
        }
        let mut w = Vec::new();
        for part in s.split('.') {
            let i: u8 = part.parse().map_err(|_| TreeError::Parse(s.to_string()))?;
            if i == 0 {
                return Err(TreeError::Parse(s.to_string()));
            }
            w.push(i);
        }
        Ok(VertexWord(w))
    }
}

impl Serialize for VertexWord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VertexWord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A finite set of vertices in canonical order.
#[derive(Clone, PartialEq, Eq, Hash, Default, Debug, Serialize, Deserialize)]
#[serde(from = "Vec<VertexWord>", into = "Vec<VertexWord>")]
pub struct Region(Vec<VertexWord>);

impl From<Vec<VertexWord>> for Region {
    fn from(v: Vec<VertexWord>) -> Self {
        Region::new(v)
    }
}

impl From<Region> for Vec<VertexWord> {
    fn from(r: Region) -> Self {
        r.0
    }
}

impl FromIterator<VertexWord> for Region {
    fn from_iter<I: IntoIterator<Item = VertexWord>>(iter: I) -> Self {
        Region::new(iter.into_iter().collect())
    }
}

impl Region {
    pub fn new(mut vertices: Vec<VertexWord>) -> Self {
        vertices.sort();
        vertices.dedup();
        Region(vertices)
    }

    pub fn empty() -> Self {
        Region(Vec::new())
    }

    pub fn singleton(x: VertexWord) -> Self {
        Region(vec![x])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, VertexWord> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[VertexWord] {
        &self.0
    }

    pub fn contains(&self, x: &VertexWord) -> bool {
        self.0.binary_search(x).is_ok()
    }

    /// Position of `x` in canonical order.
    pub fn position(&self, x: &VertexWord) -> Option<usize> {
        self.0.binary_search(x).ok()
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push(self.0[i].clone());
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Region(out)
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region(self.0.iter().filter(|v| !other.contains(v)).cloned().collect())
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region(self.0.iter().filter(|v| other.contains(v)).cloned().collect())
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.0.iter().all(|v| other.contains(v))
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.0.iter().all(|v| !other.contains(v))
    }

    /// Deepest level present, `None` for the empty region.
    pub fn depth(&self) -> Option<usize> {
        self.0.last().map(VertexWord::level)
    }

    /// Image under the composite shift `α_x`.
    pub fn shifted_by(&self, x: &VertexWord) -> Region {
        // prefixing preserves level order within a region but not across
        // regions of mixed level, so re-sort
        Region::new(self.0.iter().map(|v| v.shifted_by(x)).collect())
    }
}

impl<'a> IntoIterator for &'a Region {
    type Item = &'a VertexWord;
    type IntoIter = std::slice::Iter<'a, VertexWord>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// `S(x)`: the `k` direct successors of `x`.
pub fn direct_successors(x: &VertexWord, k: usize) -> Region {
    Region((1..=k).map(|i| x.child(i)).collect())
}

/// `{x} ∪ S(x)`, the support of the transition expectation at `x`.
pub fn fork(x: &VertexWord, k: usize) -> Region {
    let mut v = Vec::with_capacity(k + 1);
    v.push(x.clone());
    v.extend((1..=k).map(|i| x.child(i)));
    Region(v)
}

/// `P(x)`: every strict prefix of `x`, root included.
pub fn predecessors(x: &VertexWord) -> Region {
    Region((0..x.level()).map(|n| VertexWord(x.0[..n].to_vec())).collect())
}

/// `Λ_n`: all words of length `n` over `{1..k}`.
pub fn level_set(n: usize, k: usize) -> Region {
    let mut current = vec![VertexWord::root()];
    for _ in 0..n {
        current = current.iter().flat_map(|x| (1..=k).map(move |i| x.child(i))).collect();
    }
    // generated in lexicographic order already
    Region(current)
}

/// `Λ_[0,n]`.
pub fn ball(n: usize, k: usize) -> Region {
    Region((0..=n).flat_map(|m| level_set(m, k).0).collect())
}

/// Single shift `α_j(x) = (j, x)`.
pub fn shift_vertex(j: usize, x: &VertexWord) -> VertexWord {
    x.shifted_by(&VertexWord::new(&[j]))
}

/// Composite shift `α_x = α_{i_1} ∘ … ∘ α_{i_n}` applied to `y`, folded from single shifts.
pub fn composite_shift(x: &VertexWord, y: &VertexWord) -> VertexWord {
    x.indices()
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .fold(y.clone(), |acc, j| shift_vertex(j, &acc))
}

/// Root of a finite connected subtree: the unique member closest to `o`.
pub fn subtree_root(region: &Region) -> Result<VertexWord, TreeError> {
    let mut root: Option<&VertexWord> = None;
    for v in region {
        let attached = v.parent().is_some_and(|p| region.contains(&p));
        if !attached {
            if let Some(r) = root {
                return Err(TreeError::NotConnected(r.clone(), v.clone()));
            }
            root = Some(v);
        }
    }
    root.cloned().ok_or(TreeError::EmptyRegion)
}

/// A rooted tree embedded in the coordinate system of the order-`k` Cayley tree.
///
/// Either the full future `T_root` of a vertex (the whole Cayley tree when the
/// root is `o`) or a finite connected subtree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree {
    root: VertexWord,
    k: usize,
    members: Option<BTreeSet<VertexWord>>,
}

impl Tree {
    pub fn cayley(k: usize) -> Result<Tree, TreeError> {
        Tree::future(VertexWord::root(), k)
    }

    pub fn future(root: VertexWord, k: usize) -> Result<Tree, TreeError> {
        if k == 0 {
            return Err(TreeError::ZeroOrder);
        }
        if root.max_index() > k {
            return Err(TreeError::BranchOutOfRange {
                index: root.max_index(),
                k,
            });
        }
        Ok(Tree { root, k, members: None })
    }

    pub fn finite(region: &Region, k: usize) -> Result<Tree, TreeError> {
        if k == 0 {
            return Err(TreeError::ZeroOrder);
        }
        for v in region {
            if v.max_index() > k {
                return Err(TreeError::BranchOutOfRange {
                    index: v.max_index(),
                    k,
                });
            }
        }
        let root = subtree_root(region)?;
        Ok(Tree {
            root,
            k,
            members: Some(region.iter().cloned().collect()),
        })
    }

    pub fn root(&self) -> &VertexWord {
        &self.root
    }

    pub fn order(&self) -> usize {
        self.k
    }

    /// The whole semi-infinite Cayley tree rooted at `o`.
    pub fn is_full_cayley(&self) -> bool {
        self.root.is_root() && self.members.is_none()
    }

    pub fn is_finite(&self) -> bool {
        self.members.is_some()
    }

    pub fn contains(&self, v: &VertexWord) -> bool {
        match &self.members {
            Some(m) => m.contains(v),
            None => self.root.is_prefix_of(v),
        }
    }

    /// Distance from the tree's own root.
    pub fn depth_of(&self, v: &VertexWord) -> usize {
        v.level() - self.root.level()
    }

    /// Successor slots of `v` (1..=k) that belong to the tree.
    pub fn successors(&self, v: &VertexWord) -> Vec<VertexWord> {
        (1..=self.k).map(|i| v.child(i)).filter(|c| self.contains(c)).collect()
    }

    /// Tree members at relative depth `n`.
    pub fn level(&self, n: usize) -> Region {
        let mut current = vec![self.root.clone()];
        for _ in 0..n {
            current = current.iter().flat_map(|x| self.successors(x)).collect();
        }
        Region::new(current)
    }

    /// Tree members at relative depth `0..=n`.
    pub fn ball(&self, n: usize) -> Region {
        Region::new((0..=n).flat_map(|m| self.level(m).0).collect())
    }

    /// Tree-relative predecessors: the path from the tree root to `x`, `x` excluded.
    pub fn predecessors(&self, x: &VertexWord) -> Region {
        Region(
            predecessors(x)
                .0
                .into_iter()
                .filter(|p| self.root.is_prefix_of(p))
                .collect(),
        )
    }

    /// `{x} ∪ S(x)` restricted to the tree.
    pub fn fork(&self, x: &VertexWord) -> Region {
        let mut v = vec![x.clone()];
        v.extend(self.successors(x));
        Region(v)
    }

    /// Whether `sub` is contained in `self`.
    pub fn contains_tree(&self, sub: &Tree) -> bool {
        if sub.k != self.k || !self.contains(&sub.root) {
            return false;
        }
        match (&sub.members, &self.members) {
            (Some(m), _) => m.iter().all(|v| self.contains(v)),
            (None, None) => true,
            (None, Some(_)) => false,
        }
    }

    pub fn describe(&self) -> String {
        match &self.members {
            None => format!("T({}) k={}", self.root, self.k),
            Some(m) => format!("{{{}}}", m.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")),
        }
    }
}
