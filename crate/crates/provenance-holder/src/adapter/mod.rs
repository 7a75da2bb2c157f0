//! Integration surface: turns workflow-engine event data into signed
//! provenance objects and exposes the external Collect and Retrieve
//! operations.
//!
//! Engines annotate their XES logs with `ph:*` string attributes so the
//! adapter never has to guess what is execution and what is change:
//!
//! | attribute          | meaning                                            |
//! |--------------------|----------------------------------------------------|
//! | `ph:kind`          | `"change"` marks an adaptation event               |
//! | `ph:change-type`   | `"migration"` or `"ad-hoc"`                        |
//! | `ph:model`         | hex digest of the executed / new full model        |
//! | `ph:diff`          | hex digest of an ad-hoc change diff                |
//! | `ph:input`         | whitespace-separated hex digests of consumed data  |
//! | `ph:output`        | whitespace-separated hex digests of produced data  |
//! | `ph:predecessor`   | explicit predecessor hashes (overrides inference)  |
//! | `ph:keyid`         | whitespace-separated signer key ids                |
//! | `ph:signature`     | signatures aligned with `ph:keyid`                 |
//! | `ph:choreography`  | choreography instance id (trace or event level)    |
//! | `ph:workflow`      | workflow instance id override (event level)        |
//!
//! Signatures must cover the canonical signing payload of the *finished*
//! object, predecessors included. Predecessor identification is
//! deterministic (explicit attributes first, otherwise the most recent
//! recorded object of the same choreography whose outputs intersect the
//! candidate's inputs), so a signing engine can reproduce it.

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::controller::{CollectError, Controller, LineageEntry, LineageView, RetrieveError};
use crate::encoding::{
    Digest, HexError, KeyId, ObjectKind, ProvenanceHash, ProvenanceObject, SignatureBytes,
    SignatureEntry,
};
use crate::identity::KeyStore;
use crate::provider::ProviderReceipt;

pub mod xes;

pub use xes::{parse_xes, Trace, XesError};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// One event from an ingested log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEvent {
    pub trace_id: String,
    pub concept_name: String,
    /// UTC epoch seconds.
    pub time: u64,
    /// All attributes in document order, `ph:*` conventions included.
    pub attributes: IndexMap<String, String>,
}

/// What a group of events will become.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitKind {
    ExecutionRun,
    InstanceMigration,
    AdHocChange,
}

impl UnitKind {
    pub fn object_kind(self) -> ObjectKind {
        match self {
            UnitKind::ExecutionRun => ObjectKind::Execution,
            UnitKind::InstanceMigration => ObjectKind::AdaptationMigration,
            UnitKind::AdHocChange => ObjectKind::AdaptationAdHoc,
        }
    }
}

/// A classified slice of a trace: either the trace's execution run or a
/// single change event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedUnit {
    pub kind: UnitKind,
    pub events: Vec<LogEvent>,
    pub choreography_instance_id: String,
    pub workflow_instance_id: String,
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("event {0:?} has unknown ph:change-type {1:?}")]
    UnknownChangeType(String, String),
    #[error("event {0:?} is missing required attribute {1}")]
    MissingRequiredAttribute(String, &'static str),
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("unit has no ph:signature/ph:keyid attributes")]
    MissingSignature,
    #[error("ph:keyid and ph:signature lists have different lengths ({0} vs {1})")]
    UnpairedSignature(usize, usize),
    #[error("malformed digest in {attribute}: {source}")]
    MalformedDigest {
        attribute: &'static str,
        source: HexError,
    },
    #[error("unit is missing required attribute {0}")]
    MissingRequiredAttribute(&'static str),
    #[error("unit has no choreography instance id")]
    MissingChoreographyId,
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

fn unit_scope(trace: &xes::Trace, event: Option<&LogEvent>) -> (String, String) {
    let choreography = event
        .and_then(|e| e.attributes.get("ph:choreography"))
        .or_else(|| trace.attributes.get("ph:choreography"))
        .cloned()
        .unwrap_or_default();
    let workflow = event
        .and_then(|e| e.attributes.get("ph:workflow"))
        .cloned()
        .unwrap_or_else(|| trace.trace_id.clone());
    (choreography, workflow)
}

/// Split a trace into classified units: every `ph:kind="change"` event
/// opens its own adaptation unit, everything else aggregates into one
/// execution run. Units are ordered by their first event's position, so
/// a change logged before the adapted run precedes it.
pub fn classify_events(trace: &xes::Trace) -> Result<Vec<ClassifiedUnit>, ClassifyError> {
    let mut units: Vec<(usize, ClassifiedUnit)> = Vec::new();
    let mut run_events: Vec<(usize, LogEvent)> = Vec::new();

    for (index, event) in trace.events.iter().enumerate() {
        let is_change = event
            .attributes
            .get("ph:kind")
            .map(|v| v == "change")
            .unwrap_or(false);
        if !is_change {
            run_events.push((index, event.clone()));
            continue;
        }

        let change_type = event
            .attributes
            .get("ph:change-type")
            .ok_or_else(|| {
                ClassifyError::MissingRequiredAttribute(event.concept_name.clone(), "ph:change-type")
            })?;
        let kind = match change_type.as_str() {
            "migration" => UnitKind::InstanceMigration,
            "ad-hoc" => UnitKind::AdHocChange,
            other => {
                return Err(ClassifyError::UnknownChangeType(
                    event.concept_name.clone(),
                    other.to_string(),
                ))
            }
        };
        // Migrations must reference the full new model, ad-hoc changes the
        // diff that was applied.
        let required = match kind {
            UnitKind::InstanceMigration => "ph:model",
            UnitKind::AdHocChange => "ph:diff",
            UnitKind::ExecutionRun => unreachable!(),
        };
        if !event.attributes.contains_key(required) {
            return Err(ClassifyError::MissingRequiredAttribute(
                event.concept_name.clone(),
                match kind {
                    UnitKind::InstanceMigration => "ph:model",
                    _ => "ph:diff",
                },
            ));
        }

        let (choreography, workflow) = unit_scope(trace, Some(event));
        units.push((
            index,
            ClassifiedUnit {
                kind,
                events: vec![event.clone()],
                choreography_instance_id: choreography,
                workflow_instance_id: workflow,
            },
        ));
    }

    if let Some((first_index, _)) = run_events.first() {
        let (choreography, workflow) = unit_scope(trace, None);
        units.push((
            *first_index,
            ClassifiedUnit {
                kind: UnitKind::ExecutionRun,
                events: run_events.into_iter().map(|(_, e)| e).collect(),
                choreography_instance_id: choreography,
                workflow_instance_id: workflow,
            },
        ));
    }

    units.sort_by_key(|(index, _)| *index);
    Ok(units.into_iter().map(|(_, u)| u).collect())
}

// ---------------------------------------------------------------------------
// Object construction
// ---------------------------------------------------------------------------

fn digest_list(
    events: &[LogEvent],
    attribute: &'static str,
) -> Result<Vec<Digest>, BuildError> {
    let mut out = Vec::new();
    for event in events {
        if let Some(value) = event.attributes.get(attribute) {
            for token in value.split_whitespace() {
                out.push(Digest::from_hex(token).map_err(|source| BuildError::MalformedDigest {
                    attribute,
                    source,
                })?);
            }
        }
    }
    Ok(out)
}

fn first_attribute<'a>(events: &'a [LogEvent], attribute: &str) -> Option<&'a String> {
    events.iter().find_map(|e| e.attributes.get(attribute))
}

/// Construct the provenance object for a classified unit. Field digests
/// come from `ph:*` attributes; the timestamp is the unit's last event
/// time; signatures are attached verbatim (validation is the
/// controller's job).
pub fn build_object(unit: &ClassifiedUnit) -> Result<ProvenanceObject, BuildError> {
    if unit.choreography_instance_id.is_empty() {
        return Err(BuildError::MissingChoreographyId);
    }

    let model_attr = match unit.kind {
        UnitKind::AdHocChange => "ph:diff",
        _ => "ph:model",
    };
    let model_hex = first_attribute(&unit.events, model_attr)
        .ok_or(BuildError::MissingRequiredAttribute(match unit.kind {
            UnitKind::AdHocChange => "ph:diff",
            _ => "ph:model",
        }))?;
    let model_hash = Digest::from_hex(model_hex).map_err(|source| BuildError::MalformedDigest {
        attribute: model_attr,
        source,
    })?;

    let input_hashes = digest_list(&unit.events, "ph:input")?;
    let output_hashes = digest_list(&unit.events, "ph:output")?;

    let predecessor_hashes: Vec<ProvenanceHash> = {
        let mut out = Vec::new();
        for event in &unit.events {
            if let Some(value) = event.attributes.get("ph:predecessor") {
                for token in value.split_whitespace() {
                    out.push(ProvenanceHash::from_hex(token).map_err(|source| {
                        BuildError::MalformedDigest {
                            attribute: "ph:predecessor",
                            source,
                        }
                    })?);
                }
            }
        }
        out
    };

    let timestamp = unit.events.last().map(|e| e.time).unwrap_or_default();

    let mut signatures = Vec::new();
    for event in &unit.events {
        let key_ids = event.attributes.get("ph:keyid");
        let sigs = event.attributes.get("ph:signature");
        match (key_ids, sigs) {
            (Some(key_ids), Some(sigs)) => {
                let key_ids: Vec<&str> = key_ids.split_whitespace().collect();
                let sigs: Vec<&str> = sigs.split_whitespace().collect();
                if key_ids.len() != sigs.len() {
                    return Err(BuildError::UnpairedSignature(key_ids.len(), sigs.len()));
                }
                for (kid, sig) in key_ids.iter().zip(&sigs) {
                    signatures.push(SignatureEntry {
                        key_id: KeyId::from_hex(kid).map_err(|source| {
                            BuildError::MalformedDigest {
                                attribute: "ph:keyid",
                                source,
                            }
                        })?,
                        signature: SignatureBytes::from_hex(sig).map_err(|source| {
                            BuildError::MalformedDigest {
                                attribute: "ph:signature",
                                source,
                            }
                        })?,
                    });
                }
            }
            (None, None) => {}
            (key_ids, sigs) => {
                return Err(BuildError::UnpairedSignature(
                    key_ids.map(|v| v.split_whitespace().count()).unwrap_or(0),
                    sigs.map(|v| v.split_whitespace().count()).unwrap_or(0),
                ));
            }
        }
    }
    if signatures.is_empty() {
        return Err(BuildError::MissingSignature);
    }

    let mut object = ProvenanceObject {
        kind: unit.kind.object_kind(),
        choreography_instance_id: unit.choreography_instance_id.clone(),
        workflow_instance_id: unit.workflow_instance_id.clone(),
        model_hash,
        input_hashes,
        output_hashes,
        timestamp,
        predecessor_hashes,
        signatures,
    };
    object.normalize();
    Ok(object)
}

// ---------------------------------------------------------------------------
// Predecessor identification
// ---------------------------------------------------------------------------

/// Resolve a candidate's predecessors against the recorded lineage.
///
/// 1. Explicit predecessors (from `ph:predecessor`) pass through
///    unchanged.
/// 2. Otherwise: the most recently stamped recorded object sharing the
///    candidate's choreography instance whose outputs intersect the
///    candidate's inputs. Objects tied on the timestamp are all included.
/// 3. Otherwise the candidate is an origin: empty list.
pub fn identify_predecessors(
    candidate: &ProvenanceObject,
    index: &[LineageEntry],
) -> Vec<ProvenanceHash> {
    if !candidate.predecessor_hashes.is_empty() {
        return candidate.predecessor_hashes.clone();
    }
    let inputs: std::collections::HashSet<&Digest> = candidate.input_hashes.iter().collect();
    let mut best_time: Option<u64> = None;
    let mut matches: Vec<ProvenanceHash> = Vec::new();
    for entry in index {
        if entry.choreography_instance_id != candidate.choreography_instance_id {
            continue;
        }
        if !entry.output_hashes.iter().any(|d| inputs.contains(d)) {
            continue;
        }
        match best_time {
            Some(t) if entry.timestamp < t => {}
            Some(t) if entry.timestamp == t => matches.push(entry.hash),
            _ => {
                best_time = Some(entry.timestamp);
                matches = vec![entry.hash];
            }
        }
    }
    matches
}

// ---------------------------------------------------------------------------
// External operations
// ---------------------------------------------------------------------------

/// Supported ingestion payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestFormat {
    XesLog,
    SingleObjectJson,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("XES: {0}")]
    Xes(#[from] XesError),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("lineage scan failed: {0}")]
    Lineage(#[from] RetrieveError),
}

/// How one constructed object fared.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum IngestStatus {
    Accepted {
        hash: ProvenanceHash,
        receipts: Vec<ProviderReceipt>,
    },
    Duplicate {
        hash: ProvenanceHash,
    },
    Rejected {
        error: String,
    },
}

/// Positionally aligned outcome for each object (or failed unit) in an
/// ingested document.
#[derive(Debug, Clone, Serialize)]
pub struct IngestOutcome {
    pub position: usize,
    pub trace_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ObjectKind>,
    #[serde(flatten)]
    pub status: IngestStatus,
}

fn submit(
    controller: &mut Controller,
    keys: &KeyStore,
    object: &ProvenanceObject,
) -> IngestStatus {
    match controller.collect(object, keys) {
        Ok(receipts) => IngestStatus::Accepted {
            hash: crate::encoding::compute_provenance_hash(object)
                .expect("collected objects encode"),
            receipts,
        },
        Err(CollectError::DuplicateObject(hash)) => IngestStatus::Duplicate { hash },
        Err(e) => IngestStatus::Rejected {
            error: e.to_string(),
        },
    }
}

/// External Collect: parse, classify, build, identify predecessors, and
/// hand each object to the controller, in trace order. A malformed
/// document fails atomically before any collect; per-object failures are
/// reported inline and later objects still go through.
pub fn collect_external(
    controller: &mut Controller,
    keys: &KeyStore,
    raw: &[u8],
    format: IngestFormat,
) -> Result<Vec<IngestOutcome>, IngestError> {
    match format {
        IngestFormat::SingleObjectJson => {
            // A JSON submission is the complete object, predecessors
            // included; nothing is inferred.
            let mut object: ProvenanceObject = serde_json::from_slice(raw)?;
            object.normalize();
            let status = submit(controller, keys, &object);
            Ok(vec![IngestOutcome {
                position: 0,
                trace_id: object.workflow_instance_id.clone(),
                kind: Some(object.kind),
                status,
            }])
        }
        IngestFormat::XesLog => {
            let traces = parse_xes(raw)?;
            let mut outcomes = Vec::new();
            let mut position = 0usize;
            for trace in &traces {
                let units = match classify_events(trace) {
                    Ok(units) => units,
                    Err(e) => {
                        outcomes.push(IngestOutcome {
                            position,
                            trace_id: trace.trace_id.clone(),
                            kind: None,
                            status: IngestStatus::Rejected {
                                error: e.to_string(),
                            },
                        });
                        position += 1;
                        continue;
                    }
                };
                for unit in units {
                    let status = match build_object(&unit) {
                        Ok(mut object) => {
                            let lineage = controller.lineage_entries()?;
                            object.predecessor_hashes =
                                identify_predecessors(&object, &lineage);
                            submit(controller, keys, &object)
                        }
                        Err(e) => IngestStatus::Rejected {
                            error: e.to_string(),
                        },
                    };
                    outcomes.push(IngestOutcome {
                        position,
                        trace_id: trace.trace_id.clone(),
                        kind: Some(unit.kind.object_kind()),
                        status,
                    });
                    position += 1;
                }
            }
            Ok(outcomes)
        }
    }
}

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("malformed query: {0}")]
    MalformedQuery(String),
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
}

/// External Retrieve: back-trace a hex-encoded hash and render the path
/// as JSON.
pub fn retrieve_external(
    controller: &Controller,
    keys: &KeyStore,
    query: &str,
) -> Result<serde_json::Value, QueryError> {
    let hash = ProvenanceHash::from_hex(query)
        .map_err(|e| QueryError::MalformedQuery(e.to_string()))?;
    let path = controller.retrieve(&hash, keys)?;
    Ok(serde_json::to_value(&path).expect("path serializes"))
}
