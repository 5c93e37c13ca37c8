//! Fixtures shared by the criterion benches.

use selfheal_core::haft::EdgeKey;
use selfheal_core::{LeafSlot, NodeId};

/// `n` leaf slots on distinct processors, all orphaned by node `hub`.
pub fn slots(n: u64, hub: u64) -> Vec<LeafSlot> {
    (0..n)
        .map(|i| LeafSlot::real(NodeId(i), EdgeKey::new(NodeId(i), NodeId(hub))))
        .collect()
}
