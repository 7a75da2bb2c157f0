//! Embedded file-backed object store.
//!
//! Records live in a single append-friendly data file:
//!
//! ```text
//! repeated: "PHS1" ++ u32-BE record length ++ canonical object bytes
//! ```
//!
//! A sidecar index file caches hash -> offset so opens are cheap; the
//! data file is authoritative and the sidecar is rebuilt by a full scan
//! whenever it is missing or does not match the data file. `record`
//! flushes to disk before returning. `delete` compacts the data file
//! atomically (write temp, rename), preserving the insertion order of
//! the surviving records.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::encoding::{canonical_decode, canonical_encode, hash_bytes, ProvenanceHash, ProvenanceObject};
use crate::provider::{now_epoch, Provider, ProviderError, ProviderReceipt, ScanItem};

const RECORD_MAGIC: &[u8; 4] = b"PHS1";
const INDEX_MAGIC: &[u8; 4] = b"PHX1";

#[derive(Debug, Clone, Copy)]
struct Slot {
    /// Offset of the record header in the data file.
    offset: u64,
    /// Length of the object bytes (excluding header).
    len: u32,
    /// Position in insertion order.
    seq: u64,
}

/// File-backed provider addressing attribution and lineage storage.
pub struct SimpleStorage {
    provider_id: String,
    data_path: PathBuf,
    index_path: PathBuf,
    index: HashMap<ProvenanceHash, Slot>,
    next_seq: u64,
    data_len: u64,
}

impl SimpleStorage {
    /// Open (or create) a store. The sidecar index is trusted only if it
    /// covers the data file exactly; otherwise the data file is rescanned.
    pub fn open(provider_id: impl Into<String>, data_path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let data_path = data_path.as_ref().to_path_buf();
        let index_path = data_path.with_extension(
            match data_path.extension().and_then(|e| e.to_str()) {
                Some(ext) => format!("{ext}.idx"),
                None => "idx".to_string(),
            },
        );
        let mut store = SimpleStorage {
            provider_id: provider_id.into(),
            data_path,
            index_path,
            index: HashMap::new(),
            next_seq: 0,
            data_len: 0,
        };
        if !store.data_path.exists() {
            File::create(&store.data_path)?;
        }
        store.data_len = fs::metadata(&store.data_path)?.len();
        if !store.load_sidecar()? {
            store.rebuild_index()?;
            store.write_sidecar()?;
        }
        Ok(store)
    }

    pub fn data_path(&self) -> &Path {
        &self.data_path
    }

    /// Number of live records.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    fn load_sidecar(&mut self) -> Result<bool, ProviderError> {
        let Ok(bytes) = fs::read(&self.index_path) else {
            return Ok(false);
        };
        if bytes.len() < 16 || &bytes[..4] != INDEX_MAGIC {
            return Ok(false);
        }
        let covered = u64::from_be_bytes(bytes[4..12].try_into().unwrap());
        if covered != self.data_len {
            return Ok(false);
        }
        let count = u32::from_be_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let entry_len = 32 + 8 + 4;
        if bytes.len() != 16 + count * entry_len {
            return Ok(false);
        }
        let mut index = HashMap::with_capacity(count);
        for (seq, chunk) in bytes[16..].chunks_exact(entry_len).enumerate() {
            let hash = ProvenanceHash(chunk[..32].try_into().unwrap());
            let offset = u64::from_be_bytes(chunk[32..40].try_into().unwrap());
            let len = u32::from_be_bytes(chunk[40..44].try_into().unwrap());
            index.insert(
                hash,
                Slot {
                    offset,
                    len,
                    seq: seq as u64,
                },
            );
        }
        self.next_seq = count as u64;
        self.index = index;
        Ok(true)
    }

    fn write_sidecar(&self) -> Result<(), ProviderError> {
        let mut entries: Vec<(&ProvenanceHash, &Slot)> = self.index.iter().collect();
        entries.sort_by_key(|(_, slot)| slot.seq);
        let mut out = Vec::with_capacity(16 + entries.len() * 44);
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&self.data_len.to_be_bytes());
        out.extend_from_slice(&(entries.len() as u32).to_be_bytes());
        for (hash, slot) in entries {
            out.extend_from_slice(hash.as_bytes());
            out.extend_from_slice(&slot.offset.to_be_bytes());
            out.extend_from_slice(&slot.len.to_be_bytes());
        }
        let tmp = self.index_path.with_extension("idx.tmp");
        fs::write(&tmp, &out)?;
        fs::rename(&tmp, &self.index_path)?;
        Ok(())
    }

    /// Scan the data file from the start, rebuilding the in-memory index.
    fn rebuild_index(&mut self) -> Result<(), ProviderError> {
        self.index.clear();
        self.next_seq = 0;
        let mut file = File::open(&self.data_path)?;
        let mut offset = 0u64;
        loop {
            let mut header = [0u8; 8];
            match file.read_exact(&mut header) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(e.into()),
            }
            if &header[..4] != RECORD_MAGIC {
                return Err(ProviderError::CorruptRecord {
                    offset,
                    detail: "bad record magic".into(),
                });
            }
            let len = u32::from_be_bytes(header[4..8].try_into().unwrap());
            let mut body = vec![0u8; len as usize];
            file.read_exact(&mut body).map_err(|_| ProviderError::CorruptRecord {
                offset,
                detail: "record truncated".into(),
            })?;
            // Index by the hash of the stored bytes; a corrupt record stays
            // addressable under its actual content so scans can surface it.
            let hash = hash_bytes(&body);
            self.index.insert(
                hash,
                Slot {
                    offset,
                    len,
                    seq: self.next_seq,
                },
            );
            self.next_seq += 1;
            offset += 8 + len as u64;
        }
        Ok(())
    }

    fn read_slot(&self, slot: &Slot) -> Result<Vec<u8>, ProviderError> {
        let mut file = File::open(&self.data_path)?;
        file.seek(SeekFrom::Start(slot.offset))?;
        let mut header = [0u8; 8];
        file.read_exact(&mut header)?;
        if &header[..4] != RECORD_MAGIC {
            return Err(ProviderError::CorruptRecord {
                offset: slot.offset,
                detail: "bad record magic".into(),
            });
        }
        let len = u32::from_be_bytes(header[4..8].try_into().unwrap());
        if len != slot.len {
            return Err(ProviderError::CorruptRecord {
                offset: slot.offset,
                detail: "record length changed under the index".into(),
            });
        }
        let mut body = vec![0u8; len as usize];
        file.read_exact(&mut body)?;
        Ok(body)
    }

    fn decode_checked(
        bytes: &[u8],
        expected: &ProvenanceHash,
        offset: u64,
    ) -> Result<ProvenanceObject, ProviderError> {
        let actual = hash_bytes(bytes);
        if actual != *expected {
            return Err(ProviderError::CorruptRecord {
                offset,
                detail: format!("stored bytes hash to {actual}, expected {expected}"),
            });
        }
        canonical_decode(bytes).map_err(|e| ProviderError::CorruptRecord {
            offset,
            detail: format!("decode failed: {e}"),
        })
    }

    /// Full-scan self-verification: recompute the hash of every stored
    /// record and compare it with its key. Returns (checked, failures).
    pub fn verify_all(&self) -> Result<(usize, Vec<(u64, String)>), ProviderError> {
        let mut checked = 0usize;
        let mut failures = Vec::new();
        for (hash, slot) in self.slots_in_order() {
            checked += 1;
            match self.read_slot(&slot) {
                Ok(bytes) => {
                    if let Err(e) = Self::decode_checked(&bytes, &hash, slot.offset) {
                        failures.push((slot.offset, e.to_string()));
                    }
                }
                Err(e) => failures.push((slot.offset, e.to_string())),
            }
        }
        Ok((checked, failures))
    }

    fn slots_in_order(&self) -> Vec<(ProvenanceHash, Slot)> {
        let mut slots: Vec<(ProvenanceHash, Slot)> =
            self.index.iter().map(|(h, s)| (*h, *s)).collect();
        slots.sort_by_key(|(_, slot)| slot.seq);
        slots
    }

    /// Rewrite the data file without `remove`, preserving order.
    fn compact_without(&mut self, remove: &ProvenanceHash) -> Result<(), ProviderError> {
        let survivors: Vec<(ProvenanceHash, Vec<u8>)> = self
            .slots_in_order()
            .into_iter()
            .filter(|(h, _)| h != remove)
            .map(|(h, slot)| self.read_slot(&slot).map(|bytes| (h, bytes)))
            .collect::<Result<_, _>>()?;

        let tmp = self.data_path.with_extension("phs.tmp");
        {
            let mut file = File::create(&tmp)?;
            for (_, bytes) in &survivors {
                file.write_all(RECORD_MAGIC)?;
                file.write_all(&(bytes.len() as u32).to_be_bytes())?;
                file.write_all(bytes)?;
            }
            file.sync_data()?;
        }
        fs::rename(&tmp, &self.data_path)?;

        self.index.clear();
        self.next_seq = 0;
        let mut offset = 0u64;
        for (hash, bytes) in &survivors {
            self.index.insert(
                *hash,
                Slot {
                    offset,
                    len: bytes.len() as u32,
                    seq: self.next_seq,
                },
            );
            self.next_seq += 1;
            offset += 8 + bytes.len() as u64;
        }
        self.data_len = offset;
        self.write_sidecar()?;
        Ok(())
    }
}

impl Provider for SimpleStorage {
    fn id(&self) -> &str {
        &self.provider_id
    }

    fn record(&mut self, object: &ProvenanceObject) -> Result<ProviderReceipt, ProviderError> {
        let bytes = canonical_encode(object, true)?;
        let hash = hash_bytes(&bytes);
        if self.index.contains_key(&hash) {
            return Err(ProviderError::AlreadyStored(hash));
        }

        let offset = self.data_len;
        let mut file = OpenOptions::new().append(true).open(&self.data_path)?;
        file.write_all(RECORD_MAGIC)?;
        file.write_all(&(bytes.len() as u32).to_be_bytes())?;
        file.write_all(&bytes)?;
        file.sync_data()?;

        self.data_len += 8 + bytes.len() as u64;
        self.index.insert(
            hash,
            Slot {
                offset,
                len: bytes.len() as u32,
                seq: self.next_seq,
            },
        );
        self.next_seq += 1;
        self.write_sidecar()?;

        Ok(ProviderReceipt {
            provider_id: self.provider_id.clone(),
            hash,
            stored_at: now_epoch(),
            detail: format!("appended at offset {offset}"),
        })
    }

    fn retrieve_one(&self, hash: &ProvenanceHash) -> Result<ProvenanceObject, ProviderError> {
        let slot = self.index.get(hash).ok_or(ProviderError::NotFound(*hash))?;
        let bytes = self.read_slot(slot)?;
        Self::decode_checked(&bytes, hash, slot.offset)
    }

    fn retrieve_all(&self) -> Result<Box<dyn Iterator<Item = ScanItem> + '_>, ProviderError> {
        let slots = self.slots_in_order();
        Ok(Box::new(slots.into_iter().map(move |(hash, slot)| {
            let bytes = self.read_slot(&slot)?;
            Self::decode_checked(&bytes, &hash, slot.offset)
        })))
    }

    fn delete(&mut self, hash: &ProvenanceHash) -> Result<bool, ProviderError> {
        if !self.index.contains_key(hash) {
            return Ok(false);
        }
        self.compact_without(hash)?;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{content_digest, KeyId, ObjectKind, SignatureBytes, SignatureEntry};

    fn object(n: u64) -> ProvenanceObject {
        ProvenanceObject {
            kind: ObjectKind::Execution,
            choreography_instance_id: format!("choreo-{n}"),
            workflow_instance_id: format!("wf-{n}"),
            model_hash: content_digest(&n.to_be_bytes()),
            input_hashes: vec![content_digest(b"in")],
            output_hashes: vec![content_digest(b"out")],
            timestamp: 1_700_000_000 + n,
            predecessor_hashes: vec![],
            signatures: vec![SignatureEntry {
                key_id: KeyId([n as u8; 16]),
                signature: SignatureBytes([0x55; 64]),
            }],
        }
    }

    fn open_store(dir: &tempfile::TempDir) -> SimpleStorage {
        SimpleStorage::open("main", dir.path().join("store.phs")).unwrap()
    }

    #[test]
    fn record_then_retrieve_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open_store(&dir);
        let obj = object(1);
        let receipt = store.record(&obj).unwrap();
        let back = store.retrieve_one(&receipt.hash).unwrap();
        assert_eq!(back, obj);
        assert_eq!(
            canonical_encode(&back, true).unwrap(),
            canonical_encode(&obj, true).unwrap()
        );
    }

    #[test]
    fn double_record_is_already_stored() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open_store(&dir);
        let obj = object(1);
        store.record(&obj).unwrap();
        assert!(matches!(
            store.record(&obj),
            Err(ProviderError::AlreadyStored(_))
        ));
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn unknown_hash_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let store = open_store(&dir);
        assert!(matches!(
            store.retrieve_one(&ProvenanceHash([9u8; 32])),
            Err(ProviderError::NotFound(_))
        ));
    }

    #[test]
    fn large_list_object_survives() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open_store(&dir);
        let mut obj = object(1);
        obj.input_hashes = (0..10_000u32)
            .map(|i| content_digest(&i.to_be_bytes()))
            .collect();
        let receipt = store.record(&obj).unwrap();
        let back = store.retrieve_one(&receipt.hash).unwrap();
        assert_eq!(back.input_hashes.len(), 10_000);
        assert_eq!(back, obj);
    }

    #[test]
    fn retrieve_all_in_insertion_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open_store(&dir);
        let objs: Vec<_> = (0..3).map(object).collect();
        for o in &objs {
            store.record(o).unwrap();
        }
        let items: Vec<_> = store.retrieve_all().unwrap().collect();
        assert_eq!(items.len(), 3);
        for (item, expected) in items.iter().zip(&objs) {
            assert_eq!(item.as_ref().unwrap(), expected);
        }
    }

    #[test]
    fn corrupt_record_surfaces_inline() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open_store(&dir);
        let objs: Vec<_> = (0..3).map(object).collect();
        let mut hashes = Vec::new();
        for o in &objs {
            hashes.push(store.record(o).unwrap().hash);
        }
        // Flip one byte inside the middle record's body.
        let slot = *store.index.get(&hashes[1]).unwrap();
        let path = store.data_path.clone();
        let mut bytes = fs::read(&path).unwrap();
        bytes[(slot.offset + 8 + 20) as usize] ^= 0x01;
        fs::write(&path, &bytes).unwrap();

        assert!(matches!(
            store.retrieve_one(&hashes[1]),
            Err(ProviderError::CorruptRecord { .. })
        ));

        let items: Vec<_> = store.retrieve_all().unwrap().collect();
        assert_eq!(items.len(), 3);
        assert!(items[0].is_ok());
        assert!(matches!(items[1], Err(ProviderError::CorruptRecord { .. })));
        assert!(items[2].is_ok());

        let (checked, failures) = store.verify_all().unwrap();
        assert_eq!(checked, 3);
        assert_eq!(failures.len(), 1);
    }

    #[test]
    fn delete_then_rerecord() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = open_store(&dir);
        let obj = object(1);
        let other = object(2);
        let h = store.record(&obj).unwrap().hash;
        store.record(&other).unwrap();

        assert!(store.delete(&h).unwrap());
        assert!(matches!(
            store.retrieve_one(&h),
            Err(ProviderError::NotFound(_))
        ));
        assert!(!store.delete(&h).unwrap());
        assert_eq!(store.len(), 1);

        store.record(&obj).unwrap();
        assert_eq!(store.retrieve_one(&h).unwrap(), obj);
        // Other record untouched by compaction.
        let items: Vec<_> = store.retrieve_all().unwrap().collect();
        assert_eq!(items[0].as_ref().unwrap(), &other);
        assert_eq!(items[1].as_ref().unwrap(), &obj);
    }

    #[test]
    fn reopen_preserves_contents_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.phs");
        let objs: Vec<_> = (0..5).map(object).collect();
        {
            let mut store = SimpleStorage::open("main", &path).unwrap();
            for o in &objs {
                store.record(o).unwrap();
            }
        }
        let store = SimpleStorage::open("main", &path).unwrap();
        assert_eq!(store.len(), 5);
        let items: Vec<_> = store.retrieve_all().unwrap().collect();
        for (item, expected) in items.iter().zip(&objs) {
            assert_eq!(item.as_ref().unwrap(), expected);
        }
    }

    #[test]
    fn stale_sidecar_triggers_rescan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.phs");
        {
            let mut store = SimpleStorage::open("main", &path).unwrap();
            store.record(&object(1)).unwrap();
            store.record(&object(2)).unwrap();
        }
        // Corrupt the sidecar; the data file must remain authoritative.
        fs::write(path.with_extension("phs.idx"), b"garbage").unwrap();
        let store = SimpleStorage::open("main", &path).unwrap();
        assert_eq!(store.len(), 2);
        let items: Vec<_> = store.retrieve_all().unwrap().collect();
        assert!(items.iter().all(|i| i.is_ok()));
    }
}
