//! Orchestration: validation, recording, retrieval and migration.
//!
//! The controller sits between the adapter and the providers. Incoming
//! objects are validated (signature verification against the key store)
//! and relayed to every provider selected for their kind; invalid data is
//! rejected and never reaches a provider. An append-only *object record*
//! maps every stored hash to its predecessors, so existence checks and
//! path assembly never touch a provider, and insertion order doubles as a
//! topological order: an object is only accepted once all of its
//! predecessors are on record, which keeps every back-trace finite.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::encoding::{
    canonical_encode, compute_provenance_hash, Digest, KeyId, ObjectKind, ProvenanceHash,
    ProvenanceObject,
};
use crate::identity::KeyStore;
use crate::provider::{Provider, ProviderError, ProviderReceipt};

const RECORD_MAGIC: &[u8; 4] = b"PHR1";

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Aggregate verdict over an object's structure and signatures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidationStatus {
    Valid,
    SignatureInvalid,
    UnknownSigner,
    Malformed,
}

/// One signer's verification result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignatureCheck {
    pub key_id: KeyId,
    pub valid: bool,
}

/// Per-signature verification results plus the aggregate status.
/// `Valid` holds exactly when the object is well-formed and every
/// signature verifies under a registered key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    /// Absent only when the object cannot even be canonically encoded.
    pub hash: Option<ProvenanceHash>,
    pub status: ValidationStatus,
    /// Per signature entry, in object order.
    pub signatures: Vec<SignatureCheck>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.status == ValidationStatus::Valid
    }
}

/// Verify an object against the key store: every signature entry is
/// resolved via key lookup and checked over the signing payload. All
/// failures are report statuses, never errors.
pub fn validate(object: &ProvenanceObject, keys: &KeyStore) -> ValidationReport {
    let hash = compute_provenance_hash(object).ok();
    let structure_ok = object.check_structure().is_ok();

    let Ok(payload) = crate::encoding::signing_payload(object) else {
        return ValidationReport {
            hash,
            status: ValidationStatus::Malformed,
            signatures: Vec::new(),
        };
    };

    let mut signatures = Vec::with_capacity(object.signatures.len());
    let mut any_unknown = false;
    let mut any_invalid = false;
    for entry in &object.signatures {
        match keys.lookup(&entry.key_id) {
            Ok(key) => {
                let ok = crate::crypto::verify_signature(
                    &key.pubkey,
                    &payload,
                    entry.signature.as_bytes(),
                )
                .unwrap_or(false);
                any_invalid |= !ok;
                signatures.push(SignatureCheck {
                    key_id: entry.key_id,
                    valid: ok,
                });
            }
            Err(_) => {
                any_unknown = true;
                signatures.push(SignatureCheck {
                    key_id: entry.key_id,
                    valid: false,
                });
            }
        }
    }

    let status = if !structure_ok {
        ValidationStatus::Malformed
    } else if any_unknown {
        ValidationStatus::UnknownSigner
    } else if any_invalid {
        ValidationStatus::SignatureInvalid
    } else {
        ValidationStatus::Valid
    };

    ValidationReport {
        hash,
        status,
        signatures,
    }
}

// ---------------------------------------------------------------------------
// Object record
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("object record corrupt at offset {offset}: {detail}")]
    Corrupt { offset: u64, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Append-only index: provenance hash -> predecessor hashes, kept in
/// insertion order. File entries are
/// `"PHR1" ++ hash(32) ++ u32-BE count ++ predecessors`.
pub struct ObjectRecord {
    path: PathBuf,
    entries: IndexMap<ProvenanceHash, Vec<ProvenanceHash>>,
}

impl ObjectRecord {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RecordError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = IndexMap::new();
        if path.exists() {
            let mut bytes = Vec::new();
            File::open(&path)?.read_to_end(&mut bytes)?;
            let mut pos = 0usize;
            while pos < bytes.len() {
                let offset = pos as u64;
                let corrupt = |detail: &str| RecordError::Corrupt {
                    offset,
                    detail: detail.to_string(),
                };
                if pos + 40 > bytes.len() {
                    return Err(corrupt("truncated entry header"));
                }
                if &bytes[pos..pos + 4] != RECORD_MAGIC {
                    return Err(corrupt("bad entry magic"));
                }
                let hash = ProvenanceHash(bytes[pos + 4..pos + 36].try_into().unwrap());
                let count =
                    u32::from_be_bytes(bytes[pos + 36..pos + 40].try_into().unwrap()) as usize;
                pos += 40;
                if pos + count * 32 > bytes.len() {
                    return Err(corrupt("truncated predecessor list"));
                }
                let mut preds = Vec::with_capacity(count);
                for _ in 0..count {
                    preds.push(ProvenanceHash(bytes[pos..pos + 32].try_into().unwrap()));
                    pos += 32;
                }
                entries.insert(hash, preds);
            }
        }
        Ok(ObjectRecord { path, entries })
    }

    /// Append one entry, durable before return.
    pub fn append(
        &mut self,
        hash: ProvenanceHash,
        predecessors: Vec<ProvenanceHash>,
    ) -> Result<(), RecordError> {
        let mut out = Vec::with_capacity(40 + 32 * predecessors.len());
        out.extend_from_slice(RECORD_MAGIC);
        out.extend_from_slice(hash.as_bytes());
        out.extend_from_slice(&(predecessors.len() as u32).to_be_bytes());
        for p in &predecessors {
            out.extend_from_slice(p.as_bytes());
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        file.write_all(&out)?;
        file.sync_data()?;
        self.entries.insert(hash, predecessors);
        Ok(())
    }

    pub fn contains(&self, hash: &ProvenanceHash) -> bool {
        self.entries.contains_key(hash)
    }

    pub fn predecessors(&self, hash: &ProvenanceHash) -> Option<&[ProvenanceHash]> {
        self.entries.get(hash).map(|v| v.as_slice())
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&ProvenanceHash, &[ProvenanceHash])> {
        self.entries.iter().map(|(h, p)| (h, p.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Lineage view (for predecessor identification)
// ---------------------------------------------------------------------------

/// What predecessor identification needs to know about a recorded object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineageEntry {
    pub hash: ProvenanceHash,
    pub choreography_instance_id: String,
    pub output_hashes: Vec<Digest>,
    pub timestamp: u64,
}

/// Read view over the object record used by the adapter to identify
/// predecessors of freshly built objects.
pub trait LineageView {
    /// Recorded objects in insertion order.
    fn lineage_entries(&self) -> Result<Vec<LineageEntry>, RetrieveError>;
}

// ---------------------------------------------------------------------------
// Paths and errors
// ---------------------------------------------------------------------------

/// How one provider answered a fetch during retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProviderFetch {
    pub provider_id: String,
    /// "ok", "not-found", "corrupt: ...", or "error: ...".
    pub outcome: String,
}

/// One object on a back-traced path, with its fresh validation verdict
/// and cross-provider comparison result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathElement {
    pub hash: ProvenanceHash,
    pub object: ProvenanceObject,
    pub validation: ValidationReport,
    /// Set when providers disagreed about this object: differing bytes, a
    /// corrupt copy, or a missing copy at a provider that should hold it.
    pub discrepancy: bool,
    pub predecessors: Vec<ProvenanceHash>,
    pub providers: Vec<ProviderFetch>,
}

/// Depth-first back-trace from a queried object to its origin(s).
/// Predecessors are visited in stored order and shared ancestors appear
/// exactly once, so the element list is a preorder linearization of the
/// ancestry DAG.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProvenancePath {
    pub queried: ProvenanceHash,
    pub elements: Vec<PathElement>,
}

#[derive(Debug, Error)]
pub enum CollectError {
    #[error("validation failed: {0:?}")]
    ValidationFailed(ValidationReport),
    #[error("unknown predecessor {0}")]
    UnknownPredecessor(ProvenanceHash),
    #[error("object {0} already recorded")]
    DuplicateObject(ProvenanceHash),
    #[error("no provider selected for kind {0:?}")]
    NoProviderForKind(ObjectKind),
    #[error("provider {provider_id} failed to record: {source}")]
    ProviderFailure {
        provider_id: String,
        source: ProviderError,
    },
    #[error("object record: {0}")]
    Record(#[from] RecordError),
    #[error("encoding failed: {0}")]
    Encoding(#[from] crate::encoding::EncodingError),
}

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error("unknown object {0}")]
    UnknownObject(ProvenanceHash),
    #[error("no provider could produce object {hash}: {detail}")]
    ProviderFailure { hash: ProvenanceHash, detail: String },
}

#[derive(Debug, Error)]
pub enum MigrateError {
    #[error("unknown provider {0}")]
    UnknownProvider(String),
    #[error("source and target must differ")]
    SameProvider,
    #[error("provider {0} cannot stream objects")]
    SourceNotScannable(String),
    #[error("target write failure at {provider_id}: {source}")]
    TargetWriteFailure {
        provider_id: String,
        source: ProviderError,
    },
    #[error("source scan aborted: {0}")]
    SourceScanFailed(ProviderError),
    #[error("purge failed at source: {0}")]
    PurgeFailed(ProviderError),
}

/// A source record excluded from migration, with why.
#[derive(Debug, Clone, Serialize)]
pub struct ExcludedRecord {
    /// Position in the source scan (insertion order).
    pub position: usize,
    /// Known unless the record was too corrupt to identify.
    pub hash: Option<ProvenanceHash>,
    pub reason: String,
}

/// Per-object outcomes of a migration run.
#[derive(Debug, Clone, Serialize)]
pub struct MigrationReport {
    pub source: String,
    pub target: String,
    /// Newly recorded at the target, in source order.
    pub migrated: Vec<ProvenanceHash>,
    /// Valid at source but already present at the target.
    pub already_present: Vec<ProvenanceHash>,
    pub excluded: Vec<ExcludedRecord>,
    /// Number of records removed from the source (purge mode).
    pub purged: usize,
}

// ---------------------------------------------------------------------------
// Provider selection
// ---------------------------------------------------------------------------

/// Which providers record which object kinds. Kinds without an explicit
/// entry go to every provider.
#[derive(Debug, Clone, Default)]
pub struct KindSelection {
    map: HashMap<ObjectKind, Vec<String>>,
}

impl KindSelection {
    /// Every kind to every provider.
    pub fn all() -> Self {
        KindSelection::default()
    }

    pub fn set(&mut self, kind: ObjectKind, provider_ids: Vec<String>) {
        self.map.insert(kind, provider_ids);
    }

    fn selected<'a>(&'a self, kind: ObjectKind, all: &'a [String]) -> Vec<&'a String> {
        match self.map.get(&kind) {
            Some(ids) => ids.iter().collect(),
            None => all.iter().collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Controller
// ---------------------------------------------------------------------------

pub struct Controller {
    record: ObjectRecord,
    providers: Vec<Box<dyn Provider>>,
    provider_ids: Vec<String>,
    selection: KindSelection,
    /// True when the record file was corrupt and had to be rebuilt from
    /// a provider scan.
    record_rebuilt: bool,
    /// hash -> lineage metadata, filled on collect and on demand.
    lineage_cache: Mutex<HashMap<ProvenanceHash, (String, Vec<Digest>, u64)>>,
}

impl Controller {
    /// Open the controller over an object-record file and a provider
    /// roster. A corrupt record file is rebuilt by a full scan of the
    /// first object-capable provider.
    pub fn open(
        record_path: impl AsRef<Path>,
        providers: Vec<Box<dyn Provider>>,
        selection: KindSelection,
    ) -> Result<Self, RecordError> {
        let provider_ids: Vec<String> = providers.iter().map(|p| p.id().to_string()).collect();
        let path = record_path.as_ref();
        let (record, record_rebuilt) = match ObjectRecord::load(path) {
            Ok(record) => (record, false),
            Err(RecordError::Corrupt { .. }) => {
                let record = Self::rebuild_record(path, &providers)?;
                (record, true)
            }
            Err(e) => return Err(e),
        };
        Ok(Controller {
            record,
            providers,
            provider_ids,
            selection,
            record_rebuilt,
            lineage_cache: Mutex::new(HashMap::new()),
        })
    }

    /// Reconstruct the record from the first object-capable provider's
    /// scan order, keeping only objects whose predecessors are already
    /// present (scan order is collect order, so intact stores satisfy
    /// this for every record).
    fn rebuild_record(
        path: &Path,
        providers: &[Box<dyn Provider>],
    ) -> Result<ObjectRecord, RecordError> {
        std::fs::remove_file(path)?;
        let mut record = ObjectRecord::load(path)?;
        let Some(provider) = providers.iter().find(|p| p.supports_object_retrieval()) else {
            return Ok(record);
        };
        let Ok(scan) = provider.retrieve_all() else {
            return Ok(record);
        };
        for item in scan {
            let Ok(object) = item else { continue };
            let Ok(hash) = compute_provenance_hash(&object) else {
                continue;
            };
            if object
                .predecessor_hashes
                .iter()
                .all(|p| record.contains(p))
            {
                record.append(hash, object.predecessor_hashes.clone())?;
            }
        }
        Ok(record)
    }

    pub fn record_was_rebuilt(&self) -> bool {
        self.record_rebuilt
    }

    pub fn provider_ids(&self) -> &[String] {
        &self.provider_ids
    }

    pub fn object_record(&self) -> &ObjectRecord {
        &self.record
    }

    pub fn provider_by_id(&self, id: &str) -> Option<&dyn Provider> {
        let idx = self.provider_ids.iter().position(|p| p == id)?;
        Some(self.providers[idx].as_ref())
    }

    /// Record a validated object at every provider selected for its kind.
    ///
    /// Rejections (invalid signatures, unknown predecessors, duplicates)
    /// leave all state unchanged. Provider recording is two-phase: the
    /// record entry is committed only after every provider accepted;
    /// otherwise freshly stored copies are removed again best-effort.
    pub fn collect(
        &mut self,
        object: &ProvenanceObject,
        keys: &KeyStore,
    ) -> Result<Vec<ProviderReceipt>, CollectError> {
        let report = validate(object, keys);
        if !report.is_valid() {
            return Err(CollectError::ValidationFailed(report));
        }
        let hash = compute_provenance_hash(object)?;
        if self.record.contains(&hash) {
            return Err(CollectError::DuplicateObject(hash));
        }
        for pred in &object.predecessor_hashes {
            if !self.record.contains(pred) {
                return Err(CollectError::UnknownPredecessor(*pred));
            }
        }

        let selected: Vec<usize> = {
            let ids = self.selection.selected(object.kind, &self.provider_ids);
            ids.iter()
                .filter_map(|id| self.provider_ids.iter().position(|p| p == *id))
                .collect()
        };
        if selected.is_empty() {
            return Err(CollectError::NoProviderForKind(object.kind));
        }

        let mut receipts = Vec::with_capacity(selected.len());
        let mut newly_stored: Vec<usize> = Vec::new();
        for &idx in &selected {
            match self.providers[idx].record(object) {
                Ok(receipt) => {
                    newly_stored.push(idx);
                    receipts.push(receipt);
                }
                Err(ProviderError::AlreadyStored(_)) => {
                    // Left over from an interrupted earlier attempt; treat
                    // as stored but do not delete it on rollback.
                    receipts.push(ProviderReceipt {
                        provider_id: self.provider_ids[idx].clone(),
                        hash,
                        stored_at: crate::provider::now_epoch(),
                        detail: "already stored".into(),
                    });
                }
                Err(source) => {
                    let provider_id = self.provider_ids[idx].clone();
                    self.rollback(&newly_stored, &hash);
                    return Err(CollectError::ProviderFailure { provider_id, source });
                }
            }
        }

        if let Err(e) = self.record.append(hash, object.predecessor_hashes.clone()) {
            self.rollback(&newly_stored, &hash);
            return Err(e.into());
        }

        self.lineage_cache.lock().unwrap().insert(
            hash,
            (
                object.choreography_instance_id.clone(),
                object.output_hashes.clone(),
                object.timestamp,
            ),
        );
        Ok(receipts)
    }

    fn rollback(&mut self, stored: &[usize], hash: &ProvenanceHash) {
        for &idx in stored {
            let _ = self.providers[idx].delete(hash);
        }
    }

    /// Answer existence directly from the object record.
    pub fn exists(&self, hash: &ProvenanceHash) -> bool {
        self.record.contains(hash)
    }

    /// Back-trace from `hash` to its origin(s). Every object on the path
    /// is fetched from every object-capable provider, compared across
    /// providers byte for byte, and re-validated against the key store.
    pub fn retrieve(
        &self,
        hash: &ProvenanceHash,
        keys: &KeyStore,
    ) -> Result<ProvenancePath, RetrieveError> {
        if !self.record.contains(hash) {
            return Err(RetrieveError::UnknownObject(*hash));
        }

        let mut elements = Vec::new();
        let mut visited: HashSet<ProvenanceHash> = HashSet::new();
        // Explicit stack for the depth-first walk; predecessors go on the
        // stack reversed so they are visited in stored order.
        let mut stack = vec![*hash];
        while let Some(current) = stack.pop() {
            if !visited.insert(current) {
                continue;
            }
            let element = self.fetch_element(&current, keys)?;
            let preds = self
                .record
                .predecessors(&current)
                .unwrap_or(&[])
                .to_vec();
            for pred in preds.iter().rev() {
                if !visited.contains(pred) {
                    stack.push(*pred);
                }
            }
            elements.push(element);
        }

        Ok(ProvenancePath {
            queried: *hash,
            elements,
        })
    }

    fn fetch_element(
        &self,
        hash: &ProvenanceHash,
        keys: &KeyStore,
    ) -> Result<PathElement, RetrieveError> {
        let mut fetches = Vec::new();
        let mut reference: Option<(ProvenanceObject, Vec<u8>)> = None;
        let mut discrepancy = false;
        let mut not_found_at: Vec<usize> = Vec::new();

        for (idx, provider) in self.providers.iter().enumerate() {
            if !provider.supports_object_retrieval() {
                continue;
            }
            let outcome = match provider.retrieve_one(hash) {
                Ok(object) => {
                    let bytes = canonical_encode(&object, true).unwrap_or_default();
                    match &reference {
                        None => {
                            reference = Some((object, bytes));
                        }
                        Some((_, ref_bytes)) => {
                            if *ref_bytes != bytes {
                                discrepancy = true;
                            }
                        }
                    }
                    "ok".to_string()
                }
                Err(ProviderError::NotFound(_)) => {
                    not_found_at.push(idx);
                    "not-found".to_string()
                }
                Err(e @ ProviderError::CorruptRecord { .. }) => {
                    discrepancy = true;
                    format!("corrupt: {e}")
                }
                Err(e) => {
                    discrepancy = true;
                    format!("error: {e}")
                }
            };
            fetches.push(ProviderFetch {
                provider_id: self.provider_ids[idx].clone(),
                outcome,
            });
        }

        let Some((object, _)) = reference else {
            return Err(RetrieveError::ProviderFailure {
                hash: *hash,
                detail: "no object-capable provider returned the object".into(),
            });
        };

        // A missing copy only counts against providers that were selected
        // to store this object's kind.
        if !not_found_at.is_empty() {
            let selected = self.selection.selected(object.kind, &self.provider_ids);
            for idx in not_found_at {
                if selected.iter().any(|id| **id == self.provider_ids[idx]) {
                    discrepancy = true;
                }
            }
        }

        let validation = validate(&object, keys);
        Ok(PathElement {
            hash: *hash,
            predecessors: object.predecessor_hashes.clone(),
            validation,
            discrepancy,
            providers: fetches,
            object,
        })
    }

    /// Stream every source object, validate it, and record it at the
    /// target. Invalid and corrupt records are excluded and itemized.
    /// With `purge`, transferred objects are deleted from the source only
    /// after the target confirmed all of them. Interrupted runs can be
    /// re-run: objects already at the target are reported, not re-copied.
    pub fn migrate(
        &mut self,
        source_id: &str,
        target_id: &str,
        purge: bool,
        keys: &KeyStore,
    ) -> Result<MigrationReport, MigrateError> {
        if source_id == target_id {
            return Err(MigrateError::SameProvider);
        }
        let source_idx = self
            .provider_ids
            .iter()
            .position(|p| p == source_id)
            .ok_or_else(|| MigrateError::UnknownProvider(source_id.to_string()))?;
        let target_idx = self
            .provider_ids
            .iter()
            .position(|p| p == target_id)
            .ok_or_else(|| MigrateError::UnknownProvider(target_id.to_string()))?;

        // Buffer the scan so the target can be mutated afterwards.
        let items: Vec<Result<ProvenanceObject, ProviderError>> = {
            let source = &self.providers[source_idx];
            let scan = source
                .retrieve_all()
                .map_err(|_| MigrateError::SourceNotScannable(source_id.to_string()))?;
            scan.collect()
        };

        let mut report = MigrationReport {
            source: source_id.to_string(),
            target: target_id.to_string(),
            migrated: Vec::new(),
            already_present: Vec::new(),
            excluded: Vec::new(),
            purged: 0,
        };

        for (position, item) in items.into_iter().enumerate() {
            match item {
                Ok(object) => {
                    let verdict = validate(&object, keys);
                    if !verdict.is_valid() {
                        report.excluded.push(ExcludedRecord {
                            position,
                            hash: verdict.hash,
                            reason: format!("validation: {:?}", verdict.status),
                        });
                        continue;
                    }
                    let hash = verdict.hash.expect("valid objects encode");
                    match self.providers[target_idx].record(&object) {
                        Ok(_) => report.migrated.push(hash),
                        Err(ProviderError::AlreadyStored(_)) => {
                            report.already_present.push(hash)
                        }
                        Err(source) => {
                            return Err(MigrateError::TargetWriteFailure {
                                provider_id: target_id.to_string(),
                                source,
                            })
                        }
                    }
                }
                Err(e @ ProviderError::CorruptRecord { .. }) => {
                    report.excluded.push(ExcludedRecord {
                        position,
                        hash: None,
                        reason: e.to_string(),
                    });
                }
                Err(e) => return Err(MigrateError::SourceScanFailed(e)),
            }
        }

        if purge {
            let transferred: Vec<ProvenanceHash> = report
                .migrated
                .iter()
                .chain(report.already_present.iter())
                .copied()
                .collect();
            for hash in transferred {
                match self.providers[source_idx].delete(&hash) {
                    Ok(true) => report.purged += 1,
                    Ok(false) => {}
                    Err(e) => return Err(MigrateError::PurgeFailed(e)),
                }
            }
        }

        Ok(report)
    }
}

impl LineageView for Controller {
    /// Walk the record in insertion order, serving lineage metadata from
    /// the in-memory cache and falling back to a provider fetch for
    /// objects recorded by earlier runs.
    fn lineage_entries(&self) -> Result<Vec<LineageEntry>, RetrieveError> {
        let mut cache = self.lineage_cache.lock().unwrap();
        let mut out = Vec::with_capacity(self.record.len());
        for (hash, _) in self.record.iter() {
            if let Some((choreo, outputs, ts)) = cache.get(hash) {
                out.push(LineageEntry {
                    hash: *hash,
                    choreography_instance_id: choreo.clone(),
                    output_hashes: outputs.clone(),
                    timestamp: *ts,
                });
                continue;
            }
            let Some(object) = self
                .providers
                .iter()
                .filter(|p| p.supports_object_retrieval())
                .find_map(|p| p.retrieve_one(hash).ok())
            else {
                return Err(RetrieveError::ProviderFailure {
                    hash: *hash,
                    detail: "lineage scan could not fetch recorded object".into(),
                });
            };
            cache.insert(
                *hash,
                (
                    object.choreography_instance_id.clone(),
                    object.output_hashes.clone(),
                    object.timestamp,
                ),
            );
            out.push(LineageEntry {
                hash: *hash,
                choreography_instance_id: object.choreography_instance_id,
                output_hashes: object.output_hashes,
                timestamp: object.timestamp,
            });
        }
        Ok(out)
    }
}
