//! The storage-provider contract.
//!
//! Providers persist provenance objects keyed by their
//! [`ProvenanceHash`]. The controller relays validated objects to every
//! provider selected for the object's kind and fetches them back for
//! retrieval and migration. Implementation complexity can vary widely:
//! [`simple::SimpleStorage`] is an embedded file store, while
//! [`timestamp::TimestampProvider`] stores only hashes and anchors them
//! at a timestamp authority.

use serde::Serialize;
use thiserror::Error;

use crate::encoding::{DecodeError, ProvenanceHash, ProvenanceObject};

pub mod simple;
pub mod timestamp;

/// Acknowledgement that a provider accepted an object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProviderReceipt {
    pub provider_id: String,
    pub hash: ProvenanceHash,
    /// UTC epoch seconds at which the provider stored the object.
    pub stored_at: u64,
    /// Provider-specific note (offset, batch state, ...).
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("object {0} not found")]
    NotFound(ProvenanceHash),
    #[error("object {0} already stored")]
    AlreadyStored(ProvenanceHash),
    #[error("corrupt record at offset {offset}: {detail}")]
    CorruptRecord { offset: u64, detail: String },
    #[error("storage full: {0}")]
    StorageFull(String),
    #[error("pending queue full ({0} entries)")]
    QueueFull(usize),
    #[error("hash {0} is queued but not yet batched")]
    NotBatched(ProvenanceHash),
    #[error("hash {0} was never recorded here")]
    UnknownHash(ProvenanceHash),
    #[error("provider does not support this operation: {0}")]
    Unsupported(&'static str),
    #[error("timestamp authority unreachable: {0}")]
    AuthorityUnreachable(String),
    #[error("encoding failed: {0}")]
    Encoding(#[from] crate::encoding::EncodingError),
    #[error("stored bytes failed to decode: {0}")]
    Decode(#[from] DecodeError),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Items yielded by [`Provider::retrieve_all`]: decoded objects in
/// insertion order, with corrupt records surfaced inline instead of
/// silently skipped.
pub type ScanItem = Result<ProvenanceObject, ProviderError>;

/// Storage backend contract: record, retrieve (one/all) and delete.
pub trait Provider {
    /// Stable identifier used in configuration, receipts and reports.
    fn id(&self) -> &str;

    /// Persist a validated object, durable before return.
    fn record(&mut self, object: &ProvenanceObject) -> Result<ProviderReceipt, ProviderError>;

    /// Fetch one object by hash. The returned object is self-verified:
    /// its recomputed hash equals the key.
    fn retrieve_one(&self, hash: &ProvenanceHash) -> Result<ProvenanceObject, ProviderError>;

    /// Stream every record in insertion order. Corrupt records appear as
    /// inline error items; an I/O failure ends the stream.
    fn retrieve_all(&self) -> Result<Box<dyn Iterator<Item = ScanItem> + '_>, ProviderError>;

    /// Remove a record if present; returns whether anything was removed.
    fn delete(&mut self, hash: &ProvenanceHash) -> Result<bool, ProviderError>;

    /// Whether this provider can hand back full objects. Hash-only
    /// providers (timestamping) return `false` and are never used by the
    /// controller for object retrieval.
    fn supports_object_retrieval(&self) -> bool {
        true
    }
}

pub(crate) fn now_epoch() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default()
        .as_secs()
}
