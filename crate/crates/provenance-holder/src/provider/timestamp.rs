//! Timestamping provider: proof of existence-before for provenance
//! hashes.
//!
//! Recorded hashes queue up, get batched into a Merkle tree, and only the
//! root is submitted to the timestamp authority — one submission per
//! batch instead of one per hash. Because anchoring is eventually
//! consistent, the provider tracks pending submissions, polls for
//! confirmation, and resubmits roots that stay pending too long. What it
//! stores per hash is just the hash, its audit path and the batch's root
//! record; full objects live with other providers.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::authority::{AuthorityError, SubmissionStatus, TimestampAuthority};
use crate::crypto::hex_arr32;
use crate::encoding::{compute_provenance_hash, ProvenanceHash, ProvenanceObject};
use crate::merkle::{build_merkle, fold_path, PathStep};
use crate::provider::{now_epoch, Provider, ProviderError, ProviderReceipt, ScanItem};

/// Batching and resubmission policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimestampConfig {
    /// Flush as soon as this many unbatched entries queue up.
    pub batch_size: usize,
    /// ... or once the oldest unbatched entry is this old (seconds).
    pub batch_age_secs: u64,
    /// Resubmit a root that has stayed pending for more than this many
    /// poll cycles.
    pub resubmit_after_cycles: u32,
    /// Hard cap on queued hashes.
    pub max_pending: usize,
}

impl Default for TimestampConfig {
    fn default() -> Self {
        TimestampConfig {
            batch_size: 16,
            batch_age_secs: 10,
            resubmit_after_cycles: 3,
            max_pending: 1 << 16,
        }
    }
}

/// A recorded hash and where it stands in the batching lifecycle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PendingEntry {
    pub hash: ProvenanceHash,
    /// Set exactly when the hash has been included in a submitted tree.
    pub batch_id: Option<u64>,
    pub enqueued_at: u64,
    pub poll_cycles_waited: u32,
}

/// Lifecycle state of a submitted Merkle root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootStatus {
    Pending,
    Confirmed,
    Failed,
}

/// One batch submission and its anchoring outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootRecord {
    pub batch_id: u64,
    #[serde(with = "hex_arr32")]
    pub merkle_root: [u8; 32],
    pub submission_id: String,
    pub status: RootStatus,
    /// Authority's block/transaction reference, set once confirmed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor_ref: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confirmed_at: Option<u64>,
    /// Poll cycles this root has been waiting in its current submission.
    pub cycles_pending: u32,
    /// How many times the root was resubmitted.
    pub resubmissions: u32,
}

/// Inclusion proof: folding `leaf` up `audit_path` reproduces
/// `root_record.merkle_root`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimestampProof {
    pub leaf: ProvenanceHash,
    pub audit_path: Vec<PathStep>,
    pub root_record: RootRecord,
}

/// Outcome of checking a proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProofVerdict {
    /// Path folds to the root and the root is anchored.
    ConfirmedValid,
    /// Path folds to the root, but the root is not yet anchored.
    PendingValid,
    /// The arithmetic does not hold.
    Invalid,
}

/// Fold the proof and combine with the root's anchoring status.
pub fn verify_proof(proof: &TimestampProof) -> ProofVerdict {
    if fold_path(proof.leaf.as_bytes(), &proof.audit_path) != proof.root_record.merkle_root {
        return ProofVerdict::Invalid;
    }
    match proof.root_record.status {
        RootStatus::Confirmed => ProofVerdict::ConfirmedValid,
        RootStatus::Pending | RootStatus::Failed => ProofVerdict::PendingValid,
    }
}

/// A status change observed during a poll cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatusTransition {
    pub batch_id: u64,
    pub from: RootStatus,
    pub to: RootStatus,
    pub submission_id: String,
    pub detail: String,
}

#[derive(Serialize, Deserialize, Default)]
struct TsState {
    /// All recorded hashes in enqueue order.
    entries: Vec<PendingEntry>,
    roots: Vec<RootRecord>,
    /// hash -> (batch id, audit path), filled at flush time.
    proofs: Vec<(ProvenanceHash, u64, Vec<PathStep>)>,
    next_batch: u64,
}

impl TsState {
    fn entry(&self, hash: &ProvenanceHash) -> Option<&PendingEntry> {
        self.entries.iter().find(|e| e.hash == *hash)
    }

    fn root(&self, batch_id: u64) -> Option<&RootRecord> {
        self.roots.iter().find(|r| r.batch_id == batch_id)
    }

    fn unbatched(&self) -> impl Iterator<Item = &PendingEntry> {
        self.entries.iter().filter(|e| e.batch_id.is_none())
    }
}

/// The provider. Cloning yields a handle to the same shared state, so a
/// background poller can run next to the recording side.
#[derive(Clone)]
pub struct TimestampProvider {
    provider_id: String,
    config: TimestampConfig,
    authority: Arc<dyn TimestampAuthority + Sync>,
    state: Arc<Mutex<TsState>>,
    state_path: Option<std::path::PathBuf>,
}

impl TimestampProvider {
    /// Provider with persistent state at `state_path` (JSON, rewritten on
    /// every mutation).
    pub fn open(
        provider_id: impl Into<String>,
        state_path: impl AsRef<std::path::Path>,
        authority: Arc<dyn TimestampAuthority + Sync>,
        config: TimestampConfig,
    ) -> Result<Self, ProviderError> {
        let state_path = state_path.as_ref().to_path_buf();
        let state = if state_path.exists() {
            let bytes = std::fs::read(&state_path)?;
            serde_json::from_slice(&bytes).map_err(|e| ProviderError::CorruptRecord {
                offset: 0,
                detail: format!("timestamp state unreadable: {e}"),
            })?
        } else {
            TsState::default()
        };
        Ok(TimestampProvider {
            provider_id: provider_id.into(),
            config,
            authority,
            state: Arc::new(Mutex::new(state)),
            state_path: Some(state_path),
        })
    }

    /// Provider without persistence (tests, embedded use).
    pub fn in_memory(
        provider_id: impl Into<String>,
        authority: Arc<dyn TimestampAuthority + Sync>,
        config: TimestampConfig,
    ) -> Self {
        TimestampProvider {
            provider_id: provider_id.into(),
            config,
            authority,
            state: Arc::new(Mutex::new(TsState::default())),
            state_path: None,
        }
    }

    fn save(&self, state: &TsState) -> Result<(), ProviderError> {
        let Some(path) = &self.state_path else {
            return Ok(());
        };
        let json = serde_json::to_vec_pretty(state).expect("state serializes");
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, &json)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Enqueue a hash for anchoring. Duplicate submissions coalesce; a
    /// hash that already belongs to a batch reports its current state.
    pub fn record_hash(&self, hash: ProvenanceHash) -> Result<ProviderReceipt, ProviderError> {
        let mut state = self.state.lock().unwrap();
        let detail = if let Some(entry) = state.entry(&hash) {
            match entry.batch_id {
                None => "already pending (coalesced)".to_string(),
                Some(batch_id) => match state.root(batch_id).map(|r| r.status) {
                    Some(RootStatus::Confirmed) => {
                        format!("already confirmed (batch {batch_id})")
                    }
                    _ => format!("already batched (batch {batch_id})"),
                },
            }
        } else {
            if state.entries.len() >= self.config.max_pending {
                return Err(ProviderError::QueueFull(state.entries.len()));
            }
            state.entries.push(PendingEntry {
                hash,
                batch_id: None,
                enqueued_at: now_epoch(),
                poll_cycles_waited: 0,
            });
            "pending".to_string()
        };

        // Size-based trigger: flush opportunistically, tolerating an
        // unreachable authority (entries simply stay queued).
        if state.unbatched().count() >= self.config.batch_size {
            match self.flush_locked(&mut state) {
                Ok(_) | Err(ProviderError::AuthorityUnreachable(_)) => {}
                Err(e) => return Err(e),
            }
        }
        self.save(&state)?;

        Ok(ProviderReceipt {
            provider_id: self.provider_id.clone(),
            hash,
            stored_at: now_epoch(),
            detail,
        })
    }

    /// Whether the age trigger fires: some unbatched entry is older than
    /// the configured batch age.
    pub fn due_for_flush(&self) -> bool {
        let state = self.state.lock().unwrap();
        let now = now_epoch();
        state
            .unbatched()
            .any(|e| now.saturating_sub(e.enqueued_at) >= self.config.batch_age_secs)
    }

    /// Batch all unbatched entries into one Merkle tree and submit its
    /// root. Returns `None` when nothing is queued. On an unreachable
    /// authority the entries stay unbatched.
    pub fn flush_batch(&self) -> Result<Option<RootRecord>, ProviderError> {
        let mut state = self.state.lock().unwrap();
        let record = self.flush_locked(&mut state)?;
        self.save(&state)?;
        Ok(record)
    }

    fn flush_locked(&self, state: &mut TsState) -> Result<Option<RootRecord>, ProviderError> {
        let leaves: Vec<(usize, ProvenanceHash)> = state
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.batch_id.is_none())
            .map(|(i, e)| (i, e.hash))
            .collect();
        if leaves.is_empty() {
            return Ok(None);
        }

        let leaf_bytes: Vec<[u8; 32]> = leaves.iter().map(|(_, h)| h.0).collect();
        let (root, paths) = build_merkle(&leaf_bytes).expect("non-empty batch");

        let response = self
            .authority
            .submit(&root)
            .map_err(|e| ProviderError::AuthorityUnreachable(e.to_string()))?;

        let batch_id = state.next_batch;
        state.next_batch += 1;
        for ((idx, hash), path) in leaves.iter().zip(paths) {
            state.entries[*idx].batch_id = Some(batch_id);
            state.proofs.push((*hash, batch_id, path));
        }
        let record = RootRecord {
            batch_id,
            merkle_root: root,
            submission_id: response.submission_id,
            status: RootStatus::Pending,
            anchor_ref: None,
            confirmed_at: None,
            cycles_pending: 0,
            resubmissions: 0,
        };
        state.roots.push(record.clone());
        Ok(Some(record))
    }

    /// One poll cycle: query every non-confirmed root, apply
    /// confirmations and failures, and resubmit roots that have waited
    /// longer than the configured cycle budget. Unreachable-authority
    /// cycles still count toward that budget.
    pub fn poll_confirmations(&self) -> Result<Vec<StatusTransition>, ProviderError> {
        let mut state = self.state.lock().unwrap();
        let mut transitions = Vec::new();
        let mut queried = 0usize;
        let mut unreachable = 0usize;
        let k = self.config.resubmit_after_cycles;

        for i in 0..state.roots.len() {
            let (batch_id, submission_id, status) = {
                let r = &state.roots[i];
                (r.batch_id, r.submission_id.clone(), r.status)
            };
            if status == RootStatus::Confirmed {
                continue;
            }
            queried += 1;

            let mut resubmit = false;
            match status {
                RootStatus::Pending => match self.authority.status(&submission_id) {
                    Ok(response) => match response.status {
                        SubmissionStatus::Confirmed => {
                            let root = &mut state.roots[i];
                            root.status = RootStatus::Confirmed;
                            root.anchor_ref = response.anchor_ref;
                            root.confirmed_at = Some(response.confirmed_at.unwrap_or_else(now_epoch));
                            root.cycles_pending = 0;
                            transitions.push(StatusTransition {
                                batch_id,
                                from: RootStatus::Pending,
                                to: RootStatus::Confirmed,
                                submission_id,
                                detail: format!(
                                    "anchored at {}",
                                    state.roots[i].anchor_ref.as_deref().unwrap_or("?")
                                ),
                            });
                        }
                        SubmissionStatus::Pending => {
                            let root = &mut state.roots[i];
                            root.cycles_pending += 1;
                            if root.cycles_pending > k {
                                resubmit = true;
                            }
                        }
                        SubmissionStatus::Failed => {
                            let root = &mut state.roots[i];
                            root.status = RootStatus::Failed;
                            transitions.push(StatusTransition {
                                batch_id,
                                from: RootStatus::Pending,
                                to: RootStatus::Failed,
                                submission_id,
                                detail: "authority reported failure".into(),
                            });
                        }
                    },
                    Err(AuthorityError::Unreachable(_)) => {
                        unreachable += 1;
                        let root = &mut state.roots[i];
                        root.cycles_pending += 1;
                        if root.cycles_pending > k {
                            resubmit = true;
                        }
                    }
                    Err(e) => {
                        return Err(ProviderError::AuthorityUnreachable(e.to_string()));
                    }
                },
                // A failed submission is retried on the next cycle.
                RootStatus::Failed => resubmit = true,
                RootStatus::Confirmed => unreachable!(),
            }

            if resubmit {
                let root_bytes = state.roots[i].merkle_root;
                match self.authority.submit(&root_bytes) {
                    Ok(response) => {
                        let from = state.roots[i].status;
                        let root = &mut state.roots[i];
                        let old_submission = std::mem::replace(
                            &mut root.submission_id,
                            response.submission_id.clone(),
                        );
                        root.status = RootStatus::Pending;
                        root.cycles_pending = 0;
                        root.resubmissions += 1;
                        transitions.push(StatusTransition {
                            batch_id,
                            from,
                            to: RootStatus::Pending,
                            submission_id: response.submission_id,
                            detail: format!("resubmitted (was {old_submission})"),
                        });
                    }
                    // Leave the root as is; next cycle retries.
                    Err(_) => {}
                }
            }
        }

        // Count the cycle for every still-waiting entry.
        for entry in state.entries.iter_mut() {
            let confirmed = entry
                .batch_id
                .and_then(|b| state.roots.iter().find(|r| r.batch_id == b))
                .map(|r| r.status == RootStatus::Confirmed)
                .unwrap_or(false);
            if !confirmed {
                entry.poll_cycles_waited += 1;
            }
        }

        self.save(&state)?;
        if queried > 0 && unreachable == queried {
            return Err(ProviderError::AuthorityUnreachable(
                "all status queries failed".into(),
            ));
        }
        Ok(transitions)
    }

    /// Inclusion proof for a recorded hash.
    pub fn prove(&self, hash: &ProvenanceHash) -> Result<TimestampProof, ProviderError> {
        let state = self.state.lock().unwrap();
        let entry = state.entry(hash).ok_or(ProviderError::UnknownHash(*hash))?;
        let batch_id = entry.batch_id.ok_or(ProviderError::NotBatched(*hash))?;
        let (_, _, path) = state
            .proofs
            .iter()
            .find(|(h, b, _)| h == hash && *b == batch_id)
            .expect("batched entry has a stored audit path");
        let root_record = state.root(batch_id).expect("batched entry has a root record").clone();
        Ok(TimestampProof {
            leaf: *hash,
            audit_path: path.clone(),
            root_record,
        })
    }

    /// Snapshot of all root records.
    pub fn root_records(&self) -> Vec<RootRecord> {
        self.state.lock().unwrap().roots.clone()
    }

    /// Snapshot of all entries in enqueue order.
    pub fn entries(&self) -> Vec<PendingEntry> {
        self.state.lock().unwrap().entries.clone()
    }

    pub fn config(&self) -> &TimestampConfig {
        &self.config
    }
}

impl Provider for TimestampProvider {
    fn id(&self) -> &str {
        &self.provider_id
    }

    fn record(&mut self, object: &ProvenanceObject) -> Result<ProviderReceipt, ProviderError> {
        let hash = compute_provenance_hash(object)?;
        self.record_hash(hash)
    }

    fn retrieve_one(&self, _hash: &ProvenanceHash) -> Result<ProvenanceObject, ProviderError> {
        Err(ProviderError::Unsupported(
            "timestamp provider stores hashes, not objects; use prove()",
        ))
    }

    fn retrieve_all(&self) -> Result<Box<dyn Iterator<Item = ScanItem> + '_>, ProviderError> {
        Err(ProviderError::Unsupported(
            "timestamp provider stores hashes, not objects; use root_records()",
        ))
    }

    /// Only hashes that are still queued (not yet part of a submitted
    /// tree) can be withdrawn.
    fn delete(&mut self, hash: &ProvenanceHash) -> Result<bool, ProviderError> {
        let mut state = self.state.lock().unwrap();
        let Some(pos) = state.entries.iter().position(|e| e.hash == *hash) else {
            return Ok(false);
        };
        if state.entries[pos].batch_id.is_some() {
            return Ok(false);
        }
        state.entries.remove(pos);
        self.save(&state)?;
        Ok(true)
    }

    fn supports_object_retrieval(&self) -> bool {
        false
    }
}
