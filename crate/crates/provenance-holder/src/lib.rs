//! Provenance holder: a ledger of signed, hash-linked provenance objects
//! for collaborative data-processing pipelines.
//!
//! Pipelines that span organisations need more than event logs to be
//! trustworthy: every execution and every adaptation must be
//! attributable to a participant, anchored in time, and traceable back
//! to what it was derived from. This crate records exactly that, without
//! ever holding the participants' actual data — only content digests.
//!
//! - [`encoding`] — canonical binary form of provenance objects, their
//!   SHA-256 identity, and ed25519 primitives ([`crypto`]).
//! - [`identity`] — participant key objects, fingerprints, and a
//!   trust-on-first-use key store.
//! - [`controller`] — validation, the append-only object record,
//!   collect/retrieve semantics, and provider migration.
//! - [`provider`] — the storage contract, an embedded file store, and a
//!   Merkle-batching timestamp provider ([`merkle`], [`authority`]).
//! - [`adapter`] — XES event-log ingestion and the external
//!   Collect/Retrieve operations.
//! - [`cli`] — the `ph` command-line front end.
//!
//! The runnable examples under `examples/` walk through each capability;
//! start with `collect_and_trace`.

pub mod adapter;
pub mod authority;
pub mod cli;
pub mod controller;
pub mod crypto;
pub mod encoding;
pub mod identity;
pub mod merkle;
pub mod provider;

pub use encoding::{
    canonical_decode, canonical_encode, compute_provenance_hash, content_digest, signing_payload,
    Digest, KeyId, ObjectKind, ProvenanceHash, ProvenanceObject, SignatureBytes, SignatureEntry,
};

pub use controller::{
    validate, Controller, KindSelection, MigrationReport, ProvenancePath, ValidationReport,
    ValidationStatus,
};

pub use identity::{create_key_object, derive_key_id, verify_key_object, KeyObject, KeyStore};

pub use provider::{
    simple::SimpleStorage,
    timestamp::{verify_proof, ProofVerdict, TimestampProof, TimestampProvider},
    Provider, ProviderReceipt,
};

pub use crypto::Keypair;
