//! Half-full trees ("hafts"): the shape used for reconstruction trees.
//!
//! A haft over `L` leaves is the sequence of complete binary trees given by
//! the binary representation of `L`, largest first, joined by a right-leaning
//! spine. Two hafts merge like binary addition: equal-sized complete trees
//! pair up under a fresh root and the carry propagates upward. Complete trees
//! that take no part in a carry keep their internal ids.
//!
//! Every internal node is simulated by the leftmost leaf of its right
//! subtree. Within a complete tree the leftmost leaf simulates nothing, so a
//! carry root can always claim the free leftmost leaf of its right operand,
//! and the existing assignments survive merges unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use thiserror::Error;

use crate::graph::NodeId;
use crate::virtual_graph::{vedge, VEdge, VNodeId, Vid, VidAllocator, Violation};

/// Normalized identifier of the shadow-graph edge a leaf descends from.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub lo: NodeId,
    pub hi: NodeId,
}

impl EdgeKey {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            EdgeKey { lo: a, hi: b }
        } else {
            EdgeKey { lo: b, hi: a }
        }
    }
}

/// A leaf of a reconstruction tree: an orphaned endpoint and the edge it was
/// orphaned from. Ordered by endpoint, then origin.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LeafSlot {
    pub endpoint: VNodeId,
    pub origin: EdgeKey,
}

impl LeafSlot {
    pub fn real(endpoint: NodeId, origin: EdgeKey) -> Self {
        LeafSlot {
            endpoint: VNodeId::Real(endpoint),
            origin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HaftError {
    #[error("cannot build a haft over zero leaves")]
    Empty,
    #[error("origin edge {0:?} appears more than once")]
    OverlappingOrigin(EdgeKey),
    #[error("internal node {0} has no eligible simulator")]
    Unassignable(Vid),
}

/// A complete binary tree. `height` is zero for leaves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tree {
    Leaf(LeafSlot),
    Node {
        vid: Vid,
        height: u32,
        left: Box<Tree>,
        right: Box<Tree>,
    },
}

impl Tree {
    pub fn height(&self) -> u32 {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Node { height, .. } => *height,
        }
    }

    pub fn leaf_count(&self) -> usize {
        1 << self.height()
    }

    pub fn leftmost(&self) -> &LeafSlot {
        let mut t = self;
        loop {
            match t {
                Tree::Leaf(s) => return s,
                Tree::Node { left, .. } => t = left,
            }
        }
    }

    fn collect_slots(&self, out: &mut Vec<LeafSlot>) {
        match self {
            Tree::Leaf(s) => out.push(*s),
            Tree::Node { left, right, .. } => {
                left.collect_slots(out);
                right.collect_slots(out);
            }
        }
    }

    pub fn slots(&self) -> Vec<LeafSlot> {
        let mut out = Vec::with_capacity(self.leaf_count());
        self.collect_slots(&mut out);
        out
    }

    fn build(slots: &[LeafSlot], alloc: &mut VidAllocator) -> Tree {
        debug_assert!(slots.len().is_power_of_two());
        if slots.len() == 1 {
            return Tree::Leaf(slots[0]);
        }
        let (l, r) = slots.split_at(slots.len() / 2);
        let left = Tree::build(l, alloc);
        let right = Tree::build(r, alloc);
        Tree::Node {
            vid: alloc.fresh(),
            height: left.height() + 1,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn join(a: Tree, b: Tree, alloc: &mut VidAllocator) -> Tree {
        debug_assert_eq!(a.height(), b.height());
        let (left, right) = if a.leftmost() <= b.leftmost() { (a, b) } else { (b, a) };
        Tree::Node {
            vid: alloc.fresh(),
            height: left.height() + 1,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Keeps the tree if no leaf is doomed; otherwise dissolves every
    /// ancestor of a doomed leaf and emits the surviving maximal complete
    /// subtrees, in left-to-right order.
    fn split<F>(self, doomed: &F, out: &mut Vec<Tree>, dissolved: &mut Vec<Vid>) -> Option<Tree>
    where
        F: Fn(&LeafSlot) -> bool,
    {
        match self {
            Tree::Leaf(s) => (!doomed(&s)).then_some(Tree::Leaf(s)),
            Tree::Node {
                vid,
                height,
                left,
                right,
            } => {
                let mut left_out = Vec::new();
                let mut right_out = Vec::new();
                let l = left.split(doomed, &mut left_out, dissolved);
                let r = right.split(doomed, &mut right_out, dissolved);
                match (l, r) {
                    (Some(l), Some(r)) => {
                        Some(Tree::Node {
                            vid,
                            height,
                            left: Box::new(l),
                            right: Box::new(r),
                        })
                    }
                    (l, r) => {
                        dissolved.push(vid);
                        out.extend(l);
                        out.extend(left_out);
                        out.extend(r);
                        out.extend(right_out);
                        None
                    }
                }
            }
        }
    }
}

/// A child reference inside a haft.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Child {
    Leaf(LeafSlot),
    Internal(Vid),
}

/// Flattened view of one internal node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InternalNode {
    pub vid: Vid,
    pub parent: Option<Vid>,
    pub left: Child,
    pub right: Child,
    pub depth: u32,
    /// The leftmost leaf of the right subtree: this node's simulator slot.
    pub right_leftmost: LeafSlot,
    /// Leaf positions covered by this node's subtree.
    pub span: Range<usize>,
}

/// Flattened view of one leaf.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafNode {
    pub slot: LeafSlot,
    pub parent: Option<Vid>,
    pub depth: u32,
    pub position: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Layout {
    pub internals: Vec<InternalNode>,
    pub leaves: Vec<LeafNode>,
}

/// Trees sorted by strictly decreasing size, plus `trees.len() - 1` spine
/// nodes. `spine[i]` has `trees[i]` on its left and the rest of the haft on
/// its right.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Haft {
    trees: Vec<Tree>,
    spine: Vec<Vid>,
}

#[derive(Copy, Clone)]
enum NodeRef<'a> {
    Tree(&'a Tree),
    Spine(usize),
}

impl Haft {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn spine(&self) -> &[Vid] {
        &self.spine
    }

    pub fn leaf_count(&self) -> usize {
        self.trees.iter().map(Tree::leaf_count).sum()
    }

    /// Leaf counts of the complete trees, largest first.
    pub fn tree_sizes(&self) -> Vec<usize> {
        self.trees.iter().map(Tree::leaf_count).collect()
    }

    pub fn slots(&self) -> Vec<LeafSlot> {
        let mut out = Vec::with_capacity(self.leaf_count());
        for t in &self.trees {
            t.collect_slots(&mut out);
        }
        out
    }

    pub fn internal_count(&self) -> usize {
        self.leaf_count() - 1
    }

    pub fn into_trees(self) -> (Vec<Tree>, Vec<Vid>) {
        (self.trees, self.spine)
    }

    fn root(&self) -> NodeRef<'_> {
        if self.spine.is_empty() {
            NodeRef::Tree(&self.trees[0])
        } else {
            NodeRef::Spine(0)
        }
    }

    fn children(&self, i: usize) -> (NodeRef<'_>, NodeRef<'_>) {
        let right = if i + 1 < self.spine.len() {
            NodeRef::Spine(i + 1)
        } else {
            NodeRef::Tree(&self.trees[i + 1])
        };
        (NodeRef::Tree(&self.trees[i]), right)
    }

    fn leftmost_of(&self, n: NodeRef<'_>) -> LeafSlot {
        match n {
            NodeRef::Tree(t) => *t.leftmost(),
            NodeRef::Spine(i) => *self.trees[i].leftmost(),
        }
    }

    fn child_of(n: NodeRef<'_>, spine: &[Vid]) -> Child {
        match n {
            NodeRef::Tree(Tree::Leaf(s)) => Child::Leaf(*s),
            NodeRef::Tree(Tree::Node { vid, .. }) => Child::Internal(*vid),
            NodeRef::Spine(i) => Child::Internal(spine[i]),
        }
    }

    /// Walks the haft and returns every internal node and leaf with its
    /// parent, depth and leaf span.
    pub fn layout(&self) -> Layout {
        let mut layout = Layout::default();
        let mut next_leaf = 0;
        self.visit(self.root(), None, 0, &mut next_leaf, &mut layout);
        layout
    }

    fn visit(
        &self,
        n: NodeRef<'_>,
        parent: Option<Vid>,
        depth: u32,
        next_leaf: &mut usize,
        out: &mut Layout,
    ) {
        let (vid, left, right) = match n {
            NodeRef::Tree(Tree::Leaf(s)) => {
                out.leaves.push(LeafNode {
                    slot: *s,
                    parent,
                    depth,
                    position: *next_leaf,
                });
                *next_leaf += 1;
                return;
            }
            NodeRef::Tree(Tree::Node {
                vid, left, right, ..
            }) => (*vid, NodeRef::Tree(left), NodeRef::Tree(right)),
            NodeRef::Spine(i) => {
                let (l, r) = self.children(i);
                (self.spine[i], l, r)
            }
        };
        let slot = out.internals.len();
        out.internals.push(InternalNode {
            vid,
            parent,
            left: Self::child_of(left, &self.spine),
            right: Self::child_of(right, &self.spine),
            depth,
            right_leftmost: self.leftmost_of(right),
            span: 0..0,
        });
        let start = *next_leaf;
        self.visit(left, Some(vid), depth + 1, next_leaf, out);
        self.visit(right, Some(vid), depth + 1, next_leaf, out);
        out.internals[slot].span = start..*next_leaf;
    }

    pub fn leaf_depths(&self) -> Vec<u32> {
        self.layout().leaves.iter().map(|l| l.depth).collect()
    }

    pub fn max_depth(&self) -> u32 {
        self.leaf_depths().into_iter().max().unwrap_or(0)
    }

    /// Every internal id, trees first (in tree order), then the spine.
    pub fn internal_vids(&self) -> Vec<Vid> {
        self.layout().internals.iter().map(|n| n.vid).collect()
    }

    /// Removes every leaf matching `doomed`. The spine and every ancestor of
    /// a removed leaf are dissolved; surviving complete subtrees come back
    /// untouched.
    pub fn remove_slots<F>(self, doomed: F) -> Fragments
    where
        F: Fn(&LeafSlot) -> bool,
    {
        let mut frags = remove_from_trees(self.trees, doomed);
        let mut dissolved = self.spine;
        dissolved.append(&mut frags.dissolved);
        frags.dissolved = dissolved;
        frags
    }

    /// Structural audit against every haft invariant.
    pub fn check_shape(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.trees.is_empty() {
            out.push(Violation::new("haft-empty", "haft has no trees"));
            return out;
        }
        if self.spine.len() + 1 != self.trees.len() {
            out.push(Violation::new(
                "haft-spine",
                format!("{} trees joined by {} spine nodes", self.trees.len(), self.spine.len()),
            ));
            return out;
        }
        for w in self.trees.windows(2) {
            if w[0].height() <= w[1].height() {
                out.push(Violation::new(
                    "haft-order",
                    format!("tree sizes {} then {}", w[0].leaf_count(), w[1].leaf_count()),
                ));
            }
        }
        fn complete(t: &Tree, out: &mut Vec<Violation>) {
            if let Tree::Node {
                vid,
                height,
                left,
                right,
            } = t
            {
                if left.height() + 1 != *height || right.height() + 1 != *height {
                    out.push(Violation::new(
                        "haft-incomplete",
                        format!("node {vid} of height {height} has children {} and {}", left.height(), right.height()),
                    ));
                }
                complete(left, out);
                complete(right, out);
            }
        }
        for t in &self.trees {
            complete(t, &mut out);
        }
        let layout = self.layout();
        let mut seen = BTreeSet::new();
        for n in &layout.internals {
            if !seen.insert(n.vid) {
                out.push(Violation::new("haft-vid-reuse", format!("vid {} appears twice", n.vid)));
            }
        }
        let mut origins = BTreeSet::new();
        for l in &layout.leaves {
            if !origins.insert(l.slot.origin) {
                out.push(Violation::new(
                    "haft-origin-reuse",
                    format!("origin {:?} appears twice", l.slot.origin),
                ));
            }
        }
        let leaves = layout.leaves.len();
        let bound = 2 * ceil_log2(leaves) + 1;
        for l in &layout.leaves {
            if l.depth > bound {
                out.push(Violation::new(
                    "haft-depth",
                    format!("leaf at depth {} exceeds {bound} for L={leaves}", l.depth),
                ));
            }
        }
        out
    }
}

/// Pieces left after removing leaves from a haft.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Fragments {
    pub pieces: Vec<Tree>,
    pub dissolved: Vec<Vid>,
}

/// Removes matching leaves from a collection of complete trees, keeping the
/// surviving maximal complete subtrees in order.
pub fn remove_from_trees<F>(trees: Vec<Tree>, doomed: F) -> Fragments
where
    F: Fn(&LeafSlot) -> bool,
{
    let mut pieces = Vec::new();
    let mut dissolved = Vec::new();
    for t in trees {
        let mut out = Vec::new();
        if let Some(t) = t.split(&doomed, &mut out, &mut dissolved) {
            pieces.push(t);
        }
        pieces.extend(out);
    }
    Fragments { pieces, dissolved }
}

/// `⌈log₂ n⌉`, with `ceil_log2(0) = ceil_log2(1) = 0`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

fn check_unique_origins<'a, I: IntoIterator<Item = &'a LeafSlot>>(slots: I) -> Result<(), HaftError> {
    let mut seen = BTreeSet::new();
    for s in slots {
        if !seen.insert(s.origin) {
            return Err(HaftError::OverlappingOrigin(s.origin));
        }
    }
    Ok(())
}

/// Builds a haft over `slots`, left to right in the given order.
pub fn build_haft(slots: Vec<LeafSlot>, alloc: &mut VidAllocator) -> Result<Haft, HaftError> {
    if slots.is_empty() {
        return Err(HaftError::Empty);
    }
    check_unique_origins(&slots)?;
    let mut trees = Vec::new();
    let mut rest = slots.as_slice();
    for bit in (0..usize::BITS).rev() {
        let size = 1usize << bit;
        if slots.len() & size != 0 {
            let (chunk, tail) = rest.split_at(size);
            trees.push(Tree::build(chunk, alloc));
            rest = tail;
        }
    }
    let spine = (1..trees.len()).map(|_| alloc.fresh()).collect();
    Ok(Haft { trees, spine })
}

/// Binary addition over an arbitrary collection of complete trees. Returns
/// `None` when there are no pieces.
///
/// Trees of equal height are paired in order of their leftmost slot; the
/// tree with the smaller leftmost slot goes left. Origins must be disjoint.
pub fn merge_trees(pieces: Vec<Tree>, alloc: &mut VidAllocator) -> Option<Haft> {
    let mut buckets: BTreeMap<u32, Vec<Tree>> = BTreeMap::new();
    for t in pieces {
        buckets.entry(t.height()).or_default().push(t);
    }
    let mut trees = Vec::new();
    while let Some((h, mut level)) = buckets.pop_first() {
        level.sort_by(|a, b| a.leftmost().cmp(b.leftmost()));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => buckets.entry(h + 1).or_default().push(Tree::join(a, b, alloc)),
                None => trees.push(a),
            }
        }
    }
    if trees.is_empty() {
        return None;
    }
    trees.reverse();
    let spine = (1..trees.len()).map(|_| alloc.fresh()).collect();
    Some(Haft { trees, spine })
}

/// Merges two hafts with disjoint origins. Both spines are discarded; only
/// the spine and carried trees get fresh ids.
pub fn merge_hafts(a: Haft, b: Haft, alloc: &mut VidAllocator) -> Result<Haft, HaftError> {
    let sa = a.slots();
    let seen: BTreeSet<EdgeKey> = sa.iter().map(|s| s.origin).collect();
    if let Some(s) = b.slots().into_iter().find(|s| seen.contains(&s.origin)) {
        return Err(HaftError::OverlappingOrigin(s.origin));
    }
    let (mut pieces, _) = a.into_trees();
    pieces.extend(b.into_trees().0);
    Ok(merge_trees(pieces, alloc).expect("two non-empty hafts"))
}

/// Internal node → simulating leaf slot and the processor behind it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimAssignment {
    map: BTreeMap<Vid, (LeafSlot, NodeId)>,
}

impl SimAssignment {
    pub fn slot(&self, vid: Vid) -> Option<&LeafSlot> {
        self.map.get(&vid).map(|(s, _)| s)
    }

    pub fn processor(&self, vid: Vid) -> Option<NodeId> {
        self.map.get(&vid).map(|&(_, p)| p)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vid, LeafSlot, NodeId)> + '_ {
        self.map.iter().map(|(&v, &(s, p))| (v, s, p))
    }

    pub fn is_injective(&self) -> bool {
        let slots: BTreeSet<_> = self.map.values().map(|(s, _)| s).collect();
        slots.len() == self.map.len()
    }
}

/// Resolver for hafts whose leaves are all real nodes.
pub fn real_endpoint(x: VNodeId) -> Option<NodeId> {
    match x {
        VNodeId::Real(p) => Some(p),
        VNodeId::Virtual(_) => None,
    }
}

/// Assigns each internal node the leftmost leaf of its right subtree.
/// `resolve` maps a leaf endpoint to the processor that will simulate on its
/// behalf (a virtual endpoint resolves to its own simulator).
pub fn assign_simulators<R>(h: &Haft, resolve: R) -> Result<SimAssignment, HaftError>
where
    R: Fn(VNodeId) -> Option<NodeId>,
{
    let mut map = BTreeMap::new();
    for n in h.layout().internals {
        let slot = n.right_leftmost;
        let p = resolve(slot.endpoint).ok_or(HaftError::Unassignable(n.vid))?;
        map.insert(n.vid, (slot, p));
    }
    Ok(SimAssignment { map })
}

/// Virtual-graph footprint of one haft.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VirtualTree {
    pub nodes: BTreeMap<Vid, NodeId>,
    pub edges: BTreeSet<VEdge>,
}

/// One virtual node per internal id, one edge per parent-child link.
pub fn to_virtual_edges(h: &Haft, s: &SimAssignment) -> VirtualTree {
    let layout = h.layout();
    let mut tree = VirtualTree::default();
    for n in &layout.internals {
        if let Some(p) = s.processor(n.vid) {
            tree.nodes.insert(n.vid, p);
        }
        let me = VNodeId::Virtual(n.vid);
        for c in [n.left, n.right] {
            let other = match c {
                Child::Leaf(slot) => slot.endpoint,
                Child::Internal(v) => VNodeId::Virtual(v),
            };
            tree.edges.insert(vedge(me, other));
        }
    }
    tree
}

/// Checks injectivity and subtree locality of `s` against `h`.
pub fn check_assignment(h: &Haft, s: &SimAssignment) -> Vec<Violation> {
    let mut out = Vec::new();
    let layout = h.layout();
    let position: BTreeMap<LeafSlot, usize> =
        layout.leaves.iter().map(|l| (l.slot, l.position)).collect();
    if s.len() != layout.internals.len() {
        out.push(Violation::new(
            "sim-incomplete",
            format!("{} of {} internal nodes assigned", s.len(), layout.internals.len()),
        ));
    }
    if !s.is_injective() {
        out.push(Violation::new("sim-not-injective", "a leaf slot simulates two internal nodes"));
    }
    for n in &layout.internals {
        match s.slot(n.vid).and_then(|slot| position.get(slot)) {
            Some(pos) if n.span.contains(pos) => {}
            Some(pos) => out.push(Violation::new(
                "sim-not-local",
                format!("node {} assigned leaf {pos} outside {:?}", n.vid, n.span),
            )),
            None => out.push(Violation::new(
                "sim-missing",
                format!("node {} has no slot in this haft", n.vid),
            )),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::virtual_graph::VirtualGraph;

    fn slots(n: u64) -> Vec<LeafSlot> {
        (0..n)
            .map(|i| LeafSlot::real(NodeId(i), EdgeKey::new(NodeId(i), NodeId(1000))))
            .collect()
    }

    fn haft(n: u64, alloc: &mut VidAllocator) -> Haft {
        build_haft(slots(n), alloc).unwrap()
    }

    /// Depth multiset implied by the binary decomposition, computed without
    /// walking any tree: tree `i` of `m` sits at spine depth `i + 1`, except
    /// the last one which sits at `m - 1`.
    fn expected_depths(l: usize) -> Vec<u32> {
        let bits: Vec<u32> = (0..usize::BITS).rev().filter(|b| l & (1 << b) != 0).collect();
        let m = bits.len() as u32;
        let mut out = Vec::new();
        for (i, &k) in bits.iter().enumerate() {
            let i = i as u32;
            let spine_depth = if i + 1 < m { i + 1 } else { m - 1 };
            out.extend(std::iter::repeat_n(spine_depth + k, 1 << k));
        }
        out
    }

    #[test]
    fn build_small_hafts() {
        let mut alloc = VidAllocator::new();
        let h1 = haft(1, &mut alloc);
        assert_eq!(h1.internal_count(), 0);
        assert_eq!(h1.leaf_depths(), vec![0]);

        let h4 = haft(4, &mut alloc);
        assert_eq!(h4.tree_sizes(), vec![4]);
        assert_eq!(h4.internal_vids().len(), 3);
        assert_eq!(h4.leaf_depths(), vec![2, 2, 2, 2]);

        let h5 = haft(5, &mut alloc);
        assert_eq!(h5.tree_sizes(), vec![4, 1]);
        assert_eq!(h5.spine().len(), 1);
        assert_eq!(h5.leaf_depths(), vec![3, 3, 3, 3, 1]);
        assert_eq!(h5.max_depth(), ceil_log2(5));
        assert_eq!(h5.slots(), slots(5));
    }

    #[test]
    fn build_rejects_empty_and_duplicates() {
        let mut alloc = VidAllocator::new();
        assert_eq!(build_haft(vec![], &mut alloc), Err(HaftError::Empty));
        let s = slots(1)[0];
        assert!(matches!(
            build_haft(vec![s, s], &mut alloc),
            Err(HaftError::OverlappingOrigin(_))
        ));
    }

    #[test]
    fn build_is_deterministic() {
        let a = build_haft(slots(13), &mut VidAllocator::new()).unwrap();
        let b = build_haft(slots(13), &mut VidAllocator::new()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn depths_match_binary_decomposition() {
        for l in 1..=64usize {
            let h = haft(l as u64, &mut VidAllocator::new());
            assert_eq!(h.leaf_depths(), expected_depths(l), "L={l}");
            assert_eq!(h.max_depth(), ceil_log2(l), "L={l}");
            assert!(h.check_shape().is_empty(), "L={l}");
        }
    }

    #[test]
    fn merge_examples() {
        let mut alloc = VidAllocator::new();
        let a = build_haft(slots(3), &mut alloc).unwrap();
        let b = build_haft(
            vec![LeafSlot::real(NodeId(50), EdgeKey::new(NodeId(50), NodeId(51)))],
            &mut alloc,
        )
        .unwrap();
        let m = merge_hafts(a, b, &mut alloc).unwrap();
        assert_eq!(m.tree_sizes(), vec![4]);
        assert!(m.spine().is_empty());

        let mut alloc = VidAllocator::new();
        let s = slots(2);
        let a = build_haft(vec![s[0]], &mut alloc).unwrap();
        let b = build_haft(vec![s[1]], &mut alloc).unwrap();
        let m = merge_hafts(a, b, &mut alloc).unwrap();
        assert_eq!(m.tree_sizes(), vec![2]);
        assert_eq!(m.leaf_depths(), vec![1, 1]);

        let mut alloc = VidAllocator::new();
        let s = slots(6);
        let a = build_haft(s[..4].to_vec(), &mut alloc).unwrap();
        let b = build_haft(s[4..].to_vec(), &mut alloc).unwrap();
        let kept: BTreeSet<Vid> = a.internal_vids().into_iter().chain(b.internal_vids()).collect();
        let m = merge_hafts(a, b, &mut alloc).unwrap();
        assert_eq!(m.tree_sizes(), vec![4, 2]);
        assert_eq!(m.spine().len(), 1);
        let after: BTreeSet<Vid> = m.internal_vids().into_iter().collect();
        assert_eq!(after.difference(&kept).count(), 1, "only the spine is new");
    }

    #[test]
    fn merge_rejects_shared_origins() {
        let mut alloc = VidAllocator::new();
        let a = haft(2, &mut alloc);
        let b = haft(1, &mut alloc);
        assert!(matches!(
            merge_hafts(a, b, &mut alloc),
            Err(HaftError::OverlappingOrigin(_))
        ));
    }

    #[test]
    fn remove_slots_keeps_intact_subtrees() {
        let mut alloc = VidAllocator::new();
        let h = haft(8, &mut alloc);
        let before = h.layout();
        let victim = h.slots()[5];
        let frags = h.remove_slots(|s| *s == victim);
        let sizes: Vec<usize> = frags.pieces.iter().map(Tree::leaf_count).collect();
        assert_eq!(sizes, vec![4, 1, 2]);
        assert_eq!(frags.dissolved.len(), 3);
        let survivors: BTreeSet<Vid> = frags
            .pieces
            .iter()
            .flat_map(|t| {
                let h = Haft { trees: vec![t.clone()], spine: vec![] };
                h.internal_vids()
            })
            .collect();
        let all: BTreeSet<Vid> = before.internals.iter().map(|n| n.vid).collect();
        assert_eq!(survivors.len() + frags.dissolved.len(), all.len());
    }

    #[test]
    fn simulator_rule() {
        let mut alloc = VidAllocator::new();
        let h2 = haft(2, &mut alloc);
        let s2 = assign_simulators(&h2, real_endpoint).unwrap();
        let root = h2.internal_vids()[0];
        assert_eq!(s2.processor(root), Some(NodeId(1)));

        let h4 = haft(4, &mut alloc);
        let s4 = assign_simulators(&h4, real_endpoint).unwrap();
        assert_eq!(s4.len(), 3);
        assert!(s4.is_injective());
        assert!(s4.iter().all(|(_, slot, _)| slot.endpoint != VNodeId::Real(NodeId(0))));

        let h1 = haft(1, &mut alloc);
        assert!(assign_simulators(&h1, real_endpoint).unwrap().is_empty());
    }

    #[test]
    fn unresolvable_leaf_is_unassignable() {
        let mut alloc = VidAllocator::new();
        let h = build_haft(
            vec![
                LeafSlot::real(NodeId(0), EdgeKey::new(NodeId(0), NodeId(9))),
                LeafSlot {
                    endpoint: VNodeId::Virtual(Vid(77)),
                    origin: EdgeKey::new(NodeId(1), NodeId(9)),
                },
            ],
            &mut alloc,
        )
        .unwrap();
        assert!(matches!(
            assign_simulators(&h, real_endpoint),
            Err(HaftError::Unassignable(_))
        ));
        let s = assign_simulators(&h, |x| match x {
            VNodeId::Real(p) => Some(p),
            VNodeId::Virtual(_) => Some(NodeId(5)),
        })
        .unwrap();
        assert_eq!(s.processor(h.internal_vids()[0]), Some(NodeId(5)));
    }

    #[test]
    fn virtual_edges_examples() {
        let mut alloc = VidAllocator::new();
        let h1 = haft(1, &mut alloc);
        let t1 = to_virtual_edges(&h1, &assign_simulators(&h1, real_endpoint).unwrap());
        assert!(t1.nodes.is_empty() && t1.edges.is_empty());

        let h2 = haft(2, &mut alloc);
        let t2 = to_virtual_edges(&h2, &assign_simulators(&h2, real_endpoint).unwrap());
        let r = h2.internal_vids()[0];
        assert_eq!(t2.nodes, BTreeMap::from([(r, NodeId(1))]));
        let (a, b) = (VNodeId::Real(NodeId(0)), VNodeId::Real(NodeId(1)));
        assert_eq!(
            t2.edges,
            BTreeSet::from([vedge(VNodeId::Virtual(r), a), vedge(VNodeId::Virtual(r), b)])
        );
        assert_eq!(desim(&t2, 2).edge_set(), BTreeSet::from([(NodeId(0), NodeId(1))]));

        let h3 = haft(3, &mut alloc);
        let t3 = to_virtual_edges(&h3, &assign_simulators(&h3, real_endpoint).unwrap());
        assert_eq!(t3.nodes.len(), 2);
        assert_eq!(t3.edges.len(), 4);
        let g = desim(&t3, 3);
        assert!(g.nodes().all(|p| g.degree(p).unwrap() <= 3));
    }

    fn desim(t: &VirtualTree, leaves: u64) -> crate::graph::Graph {
        let mut vg = VirtualGraph::new();
        for p in 0..leaves {
            vg.add_real_node(NodeId(p)).unwrap();
        }
        for (&v, &p) in &t.nodes {
            vg.insert_virtual_node(v, p).unwrap();
        }
        for &(a, b) in &t.edges {
            vg.add_edge(a, b).unwrap();
        }
        vg.de_simulate()
    }

    #[test]
    fn ceil_log2_values() {
        let vals: Vec<u32> = [0, 1, 2, 3, 4, 5, 8, 9, 1024, 1025]
            .iter()
            .map(|&n| ceil_log2(n))
            .collect();
        assert_eq!(vals, vec![0, 0, 1, 2, 2, 3, 3, 4, 10, 11]);
    }
}
