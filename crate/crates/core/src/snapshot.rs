//! Versioned model snapshots and logical size accounting.
//!
//! Every model can serialize its state into a [`ModelSnapshot`]: a JSON tree
//! of parameters, node lists and member lists. Snapshots serve two purposes:
//! deterministic footprint accounting (logical bytes are identical on every
//! platform) and structural inspection (`bench inspect`).

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Current snapshot schema version.
pub const SNAPSHOT_VERSION: u32 = 1;

/// Structural element counts embedded in each snapshot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotCounts {
    /// Tree nodes (leaves + splits), including background/alternate subtrees.
    pub nodes: u64,
    /// Ensemble members (1 for standalone models).
    pub members: u64,
}

/// A serialized model state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub version: u32,
    /// Model family tag, e.g. `"ht"` or `"arf"`.
    pub model: String,
    pub counts: SnapshotCounts,
    /// Full model state (params, node lists, weights, ...).
    pub state: Value,
}

impl ModelSnapshot {
    pub fn new(model: &str, counts: SnapshotCounts, state: Value) -> Self {
        ModelSnapshot {
            version: SNAPSHOT_VERSION,
            model: model.to_string(),
            counts,
            state,
        }
    }

    /// Deterministic logical size of this snapshot; see [`logical_bytes`].
    pub fn logical_bytes(&self) -> u64 {
        logical_bytes(&self.state)
    }
}

/// Logical byte cost of a snapshot state tree.
///
/// The accounting rule is fixed and platform independent:
/// - every number costs 8 bytes (reals and counts),
/// - every boolean costs 1 byte (flags),
/// - every string costs 16 bytes (interned tags),
/// - every object costs 16 bytes of structural overhead (a node, bucket or
///   member) plus the cost of its fields,
/// - arrays and nulls cost nothing beyond their contents.
///
/// The resulting figures are comparable across models produced by this
/// crate, not against any particular allocator.
pub fn logical_bytes(value: &Value) -> u64 {
    match value {
        Value::Null => 0,
        Value::Bool(_) => 1,
        Value::Number(_) => 8,
        Value::String(_) => 16,
        Value::Array(items) => items.iter().map(logical_bytes).sum(),
        Value::Object(map) => 16 + map.values().map(logical_bytes).sum::<u64>(),
    }
}
