//! Canonical binary encoding of provenance objects and SHA-256 hashing.
//!
//! Everything else in the crate depends on this layer being deterministic:
//! two structurally equal objects must encode to identical bytes, and the
//! [`ProvenanceHash`] of an object is the SHA-256 digest of its full
//! canonical encoding (signatures included). The signing payload is the
//! same encoding with the signature list omitted, so signers never sign
//! their own signatures.
//!
//! Encoding v1 layout:
//!
//! ```text
//! "PHO1"                                  magic, 4 bytes
//! 0x01                                    version
//! kind tag                                0x01 execution
//!                                         0x02 adaptation (instance migration)
//!                                         0x03 adaptation (ad-hoc change)
//! choreography_instance_id                u32-BE length ++ UTF-8 bytes
//! workflow_instance_id                    u32-BE length ++ UTF-8 bytes
//! model_hash                              32 raw bytes
//! input_hashes                            u32-BE count ++ 32-byte entries
//! output_hashes                           u32-BE count ++ 32-byte entries
//! timestamp                               u64-BE epoch seconds
//! predecessor_hashes                      u32-BE count ++ 32-byte entries
//! [signatures]                            u32-BE count ++ (key_id 16 ++ signature 64)
//! ```
//!
//! Signature entries are ordered by ascending `key_id` with duplicate
//! signer ids rejected, so co-signed objects have exactly one canonical
//! form. The decoder accepts only canonical input: any parseable byte
//! sequence re-encodes to the identical bytes.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Magic prefix of the canonical object encoding.
pub const OBJECT_MAGIC: &[u8; 4] = b"PHO1";
/// Canonical encoding version emitted and accepted by this crate.
pub const ENCODING_VERSION: u8 = 0x01;

const DIGEST_LEN: usize = 32;
const KEY_ID_LEN: usize = 16;
const SIGNATURE_LEN: usize = 64;

// ---------------------------------------------------------------------------
// Byte newtypes
// ---------------------------------------------------------------------------

macro_rules! hex_bytes_newtype {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            /// Raw byte view.
            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            /// Lowercase hex rendering.
            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            /// Parse from a hex string of exactly the right length.
            pub fn from_hex(s: &str) -> Result<Self, HexError> {
                let bytes = hex::decode(s.trim()).map_err(|e| HexError::Invalid(e.to_string()))?;
                let arr: [u8; $len] = bytes
                    .try_into()
                    .map_err(|v: Vec<u8>| HexError::WrongLength { expected: $len, got: v.len() })?;
                Ok(Self(arr))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($name), "({})"), self.to_hex())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                Self::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_bytes_newtype!(
    /// SHA-256 digest of external content (models, inputs, outputs, diffs).
    Digest,
    DIGEST_LEN
);

hex_bytes_newtype!(
    /// Identity of a provenance object: SHA-256 over its full canonical
    /// encoding, signatures included.
    ProvenanceHash,
    DIGEST_LEN
);

hex_bytes_newtype!(
    /// 16-byte key identifier, the tail of a key fingerprint.
    KeyId,
    KEY_ID_LEN
);

hex_bytes_newtype!(
    /// 64-byte ed25519 signature (also used for key fingerprints).
    SignatureBytes,
    SIGNATURE_LEN
);

/// Hex parsing failure for the byte newtypes.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum HexError {
    #[error("invalid hex: {0}")]
    Invalid(String),
    #[error("wrong length: expected {expected} bytes, got {got}")]
    WrongLength { expected: usize, got: usize },
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// What a provenance object records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectKind {
    /// One workflow/choreography execution: inputs, model version, outputs.
    Execution,
    /// Model-level change enacted via instance migration; `model_hash` is
    /// the digest of the full new model.
    AdaptationMigration,
    /// In-flight ad-hoc change; `model_hash` is the digest of the diff.
    AdaptationAdHoc,
}

impl ObjectKind {
    /// Canonical one-byte tag.
    pub fn tag(self) -> u8 {
        match self {
            ObjectKind::Execution => 0x01,
            ObjectKind::AdaptationMigration => 0x02,
            ObjectKind::AdaptationAdHoc => 0x03,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0x01 => Some(ObjectKind::Execution),
            0x02 => Some(ObjectKind::AdaptationMigration),
            0x03 => Some(ObjectKind::AdaptationAdHoc),
            _ => None,
        }
    }
}

/// One signer's contribution: which registered key signed, and the
/// signature over the object's signing payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureEntry {
    pub key_id: KeyId,
    pub signature: SignatureBytes,
}

/// The signed record of one execution or one adaptation.
///
/// Identified by its [`ProvenanceHash`]. Lists are ordered and
/// variable-length; an execution may have any number of inputs, outputs
/// and predecessors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceObject {
    pub kind: ObjectKind,
    pub choreography_instance_id: String,
    /// May be empty for choreography-level adaptations.
    pub workflow_instance_id: String,
    /// Executed model version; full new model for migrations, diff for
    /// ad-hoc changes.
    pub model_hash: Digest,
    pub input_hashes: Vec<Digest>,
    pub output_hashes: Vec<Digest>,
    /// UTC epoch seconds.
    pub timestamp: u64,
    pub predecessor_hashes: Vec<ProvenanceHash>,
    pub signatures: Vec<SignatureEntry>,
}

impl ProvenanceObject {
    /// Sort the signature list into canonical order (ascending key id).
    pub fn normalize(&mut self) {
        self.signatures.sort_by(|a, b| a.key_id.cmp(&b.key_id));
    }

    /// Structural well-formedness, independent of any key store:
    /// non-empty choreography id, at least one signature, unique signer
    /// ids, and duplicate-free predecessors.
    pub fn check_structure(&self) -> Result<(), StructureError> {
        if self.choreography_instance_id.is_empty() {
            return Err(StructureError::EmptyChoreographyId);
        }
        if self.signatures.is_empty() {
            return Err(StructureError::NoSignatures);
        }
        for pair in self.signatures.windows(2) {
            if pair[0].key_id == pair[1].key_id {
                return Err(StructureError::DuplicateSigner(pair[0].key_id));
            }
            if pair[0].key_id > pair[1].key_id {
                return Err(StructureError::UnsortedSigners);
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(self.predecessor_hashes.len());
        for pred in &self.predecessor_hashes {
            if !seen.insert(pred) {
                return Err(StructureError::DuplicatePredecessor(*pred));
            }
        }
        Ok(())
    }
}

/// Violation of a `ProvenanceObject` type invariant.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum StructureError {
    #[error("choreography instance id is empty")]
    EmptyChoreographyId,
    #[error("object carries no signatures")]
    NoSignatures,
    #[error("signature entries are not in ascending key-id order")]
    UnsortedSigners,
    #[error("duplicate signer key id {0}")]
    DuplicateSigner(KeyId),
    #[error("duplicate predecessor hash {0}")]
    DuplicatePredecessor(ProvenanceHash),
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

/// Canonical encoding failure.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodingError {
    /// A string or list is too long for a u32-BE length prefix.
    #[error("{what} length {len} exceeds the u32 limit")]
    Overflow { what: &'static str, len: usize },
    #[error("duplicate signer key id {0} in signature list")]
    DuplicateSigner(KeyId),
}

fn push_len(out: &mut Vec<u8>, what: &'static str, len: usize) -> Result<(), EncodingError> {
    let n = u32::try_from(len).map_err(|_| EncodingError::Overflow { what, len })?;
    out.extend_from_slice(&n.to_be_bytes());
    Ok(())
}

/// Encode an object into its canonical v1 byte form.
///
/// With `include_signatures = false` this yields the signing payload; with
/// `true`, the full stored form that the [`ProvenanceHash`] is computed
/// over. Signature entries are sorted by key id before encoding, so the
/// output does not depend on the order signatures were attached in.
pub fn canonical_encode(
    object: &ProvenanceObject,
    include_signatures: bool,
) -> Result<Vec<u8>, EncodingError> {
    let mut out = Vec::with_capacity(
        128 + object.choreography_instance_id.len()
            + object.workflow_instance_id.len()
            + DIGEST_LEN
                * (object.input_hashes.len()
                    + object.output_hashes.len()
                    + object.predecessor_hashes.len())
            + (KEY_ID_LEN + SIGNATURE_LEN) * object.signatures.len(),
    );

    out.extend_from_slice(OBJECT_MAGIC);
    out.push(ENCODING_VERSION);
    out.push(object.kind.tag());

    let choreo = object.choreography_instance_id.as_bytes();
    push_len(&mut out, "choreography_instance_id", choreo.len())?;
    out.extend_from_slice(choreo);

    let wf = object.workflow_instance_id.as_bytes();
    push_len(&mut out, "workflow_instance_id", wf.len())?;
    out.extend_from_slice(wf);

    out.extend_from_slice(object.model_hash.as_bytes());

    push_len(&mut out, "input_hashes", object.input_hashes.len())?;
    for d in &object.input_hashes {
        out.extend_from_slice(d.as_bytes());
    }
    push_len(&mut out, "output_hashes", object.output_hashes.len())?;
    for d in &object.output_hashes {
        out.extend_from_slice(d.as_bytes());
    }

    out.extend_from_slice(&object.timestamp.to_be_bytes());

    push_len(&mut out, "predecessor_hashes", object.predecessor_hashes.len())?;
    for p in &object.predecessor_hashes {
        out.extend_from_slice(p.as_bytes());
    }

    if include_signatures {
        let mut entries: Vec<&SignatureEntry> = object.signatures.iter().collect();
        entries.sort_by(|a, b| a.key_id.cmp(&b.key_id));
        for pair in entries.windows(2) {
            if pair[0].key_id == pair[1].key_id {
                return Err(EncodingError::DuplicateSigner(pair[0].key_id));
            }
        }
        push_len(&mut out, "signatures", entries.len())?;
        for entry in entries {
            out.extend_from_slice(entry.key_id.as_bytes());
            out.extend_from_slice(entry.signature.as_bytes());
        }
    }

    Ok(out)
}

/// The byte sequence a participant signs: the canonical encoding without
/// the signature list.
pub fn signing_payload(object: &ProvenanceObject) -> Result<Vec<u8>, EncodingError> {
    canonical_encode(object, false)
}

/// SHA-256 over the full canonical encoding, signatures included.
pub fn compute_provenance_hash(object: &ProvenanceObject) -> Result<ProvenanceHash, EncodingError> {
    let bytes = canonical_encode(object, true)?;
    Ok(hash_bytes(&bytes))
}

/// SHA-256 of already-encoded canonical bytes.
pub fn hash_bytes(bytes: &[u8]) -> ProvenanceHash {
    let digest = Sha256::digest(bytes);
    ProvenanceHash(digest.into())
}

/// SHA-256 of arbitrary content, as a content [`Digest`].
pub fn content_digest(bytes: &[u8]) -> Digest {
    Digest(Sha256::digest(bytes).into())
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

/// Rejection of a byte sequence that is not a canonical v1 object.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad magic, expected \"PHO1\"")]
    BadMagic,
    #[error("unsupported encoding version {0:#04x}")]
    BadVersion(u8),
    #[error("unknown kind tag {0:#04x}")]
    BadKind(u8),
    #[error("truncated input while reading {0}")]
    Truncated(&'static str),
    #[error("{0} is not valid UTF-8")]
    BadUtf8(&'static str),
    #[error("signature entries not in strictly ascending key-id order")]
    NonCanonicalSignatures,
    #[error("{trailing} trailing bytes after object")]
    TrailingBytes { trailing: usize },
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).ok_or(DecodeError::Truncated(what))?;
        if end > self.bytes.len() {
            return Err(DecodeError::Truncated(what));
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn take_u32(&mut self, what: &'static str) -> Result<u32, DecodeError> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes(b.try_into().unwrap()))
    }

    fn take_u64(&mut self, what: &'static str) -> Result<u64, DecodeError> {
        let b = self.take(8, what)?;
        Ok(u64::from_be_bytes(b.try_into().unwrap()))
    }

    fn take_string(&mut self, what: &'static str) -> Result<String, DecodeError> {
        let len = self.take_u32(what)? as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| DecodeError::BadUtf8(what))
    }

    fn take_digest_list(&mut self, what: &'static str) -> Result<Vec<[u8; 32]>, DecodeError> {
        let count = self.take_u32(what)? as usize;
        // Guard against bogus counts before allocating.
        if count.saturating_mul(DIGEST_LEN) > self.bytes.len() - self.pos {
            return Err(DecodeError::Truncated(what));
        }
        let mut list = Vec::with_capacity(count);
        for _ in 0..count {
            let raw = self.take(DIGEST_LEN, what)?;
            list.push(raw.try_into().unwrap());
        }
        Ok(list)
    }
}

/// Decode canonical v1 bytes back into an object (signatures included).
///
/// Only canonical input is accepted: decoding then re-encoding reproduces
/// the input bytes exactly.
pub fn canonical_decode(bytes: &[u8]) -> Result<ProvenanceObject, DecodeError> {
    let mut cur = Cursor { bytes, pos: 0 };

    if cur.take(4, "magic")? != OBJECT_MAGIC {
        return Err(DecodeError::BadMagic);
    }
    let version = cur.take(1, "version")?[0];
    if version != ENCODING_VERSION {
        return Err(DecodeError::BadVersion(version));
    }
    let kind_tag = cur.take(1, "kind")?[0];
    let kind = ObjectKind::from_tag(kind_tag).ok_or(DecodeError::BadKind(kind_tag))?;

    let choreography_instance_id = cur.take_string("choreography_instance_id")?;
    let workflow_instance_id = cur.take_string("workflow_instance_id")?;
    let model_hash = Digest(cur.take(DIGEST_LEN, "model_hash")?.try_into().unwrap());
    let input_hashes = cur
        .take_digest_list("input_hashes")?
        .into_iter()
        .map(Digest)
        .collect();
    let output_hashes = cur
        .take_digest_list("output_hashes")?
        .into_iter()
        .map(Digest)
        .collect();
    let timestamp = cur.take_u64("timestamp")?;
    let predecessor_hashes = cur
        .take_digest_list("predecessor_hashes")?
        .into_iter()
        .map(ProvenanceHash)
        .collect();

    let sig_count = cur.take_u32("signatures")? as usize;
    let mut signatures = Vec::with_capacity(sig_count.min(64));
    for _ in 0..sig_count {
        let key_id = KeyId(cur.take(KEY_ID_LEN, "signature key_id")?.try_into().unwrap());
        let signature =
            SignatureBytes(cur.take(SIGNATURE_LEN, "signature bytes")?.try_into().unwrap());
        if let Some(last) = signatures.last() {
            let last: &SignatureEntry = last;
            if last.key_id >= key_id {
                return Err(DecodeError::NonCanonicalSignatures);
            }
        }
        signatures.push(SignatureEntry { key_id, signature });
    }

    if cur.pos != bytes.len() {
        return Err(DecodeError::TrailingBytes {
            trailing: bytes.len() - cur.pos,
        });
    }

    Ok(ProvenanceObject {
        kind,
        choreography_instance_id,
        workflow_instance_id,
        model_hash,
        input_hashes,
        output_hashes,
        timestamp,
        predecessor_hashes,
        signatures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_object() -> ProvenanceObject {
        ProvenanceObject {
            kind: ObjectKind::Execution,
            choreography_instance_id: "choreo-1".into(),
            workflow_instance_id: "wf-1".into(),
            model_hash: content_digest(b"model"),
            input_hashes: vec![content_digest(b"in-a"), content_digest(b"in-b")],
            output_hashes: vec![content_digest(b"out")],
            timestamp: 1_700_000_000,
            predecessor_hashes: vec![],
            signatures: vec![SignatureEntry {
                key_id: KeyId([7u8; 16]),
                signature: SignatureBytes([9u8; 64]),
            }],
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let obj = sample_object();
        let a = canonical_encode(&obj, true).unwrap();
        let b = canonical_encode(&obj, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_lists_encode_as_zero_counts() {
        let mut obj = sample_object();
        obj.input_hashes.clear();
        obj.output_hashes.clear();
        obj.predecessor_hashes.clear();
        let bytes = canonical_encode(&obj, false).unwrap();

        // magic(4) + version(1) + kind(1) + 4+8 choreo + 4+4 wf + model(32)
        let inputs_at = 4 + 1 + 1 + 4 + 8 + 4 + 4 + 32;
        assert_eq!(&bytes[inputs_at..inputs_at + 4], &[0, 0, 0, 0]);
        let outputs_at = inputs_at + 4;
        assert_eq!(&bytes[outputs_at..outputs_at + 4], &[0, 0, 0, 0]);
        let preds_at = outputs_at + 4 + 8; // after timestamp
        assert_eq!(&bytes[preds_at..preds_at + 4], &[0, 0, 0, 0]);
        assert_eq!(bytes.len(), preds_at + 4);
    }

    #[test]
    fn sha256_empty_message_sanity() {
        assert_eq!(
            hash_bytes(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn hash_differs_on_any_bit_flip() {
        let obj = sample_object();
        let bytes = canonical_encode(&obj, true).unwrap();
        let base = hash_bytes(&bytes);
        // One flipped bit per byte position is plenty for a sanity check.
        for i in (0..bytes.len()).step_by(7) {
            let mut mutated = bytes.clone();
            mutated[i] ^= 1;
            assert_ne!(hash_bytes(&mutated), base, "flip at byte {i}");
        }
    }

    #[test]
    fn signing_payload_excludes_signatures() {
        let obj = sample_object();
        let without = canonical_encode(&obj, false).unwrap();
        let with = canonical_encode(&obj, true).unwrap();
        assert!(with.len() > without.len());
        assert_eq!(&with[..without.len()], &without[..]);
    }

    #[test]
    fn signature_order_does_not_affect_encoding() {
        let mut obj = sample_object();
        obj.signatures = vec![
            SignatureEntry {
                key_id: KeyId([9u8; 16]),
                signature: SignatureBytes([1u8; 64]),
            },
            SignatureEntry {
                key_id: KeyId([2u8; 16]),
                signature: SignatureBytes([3u8; 64]),
            },
        ];
        let a = canonical_encode(&obj, true).unwrap();
        obj.signatures.reverse();
        let b = canonical_encode(&obj, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_signer_rejected() {
        let mut obj = sample_object();
        obj.signatures.push(obj.signatures[0]);
        assert_eq!(
            canonical_encode(&obj, true),
            Err(EncodingError::DuplicateSigner(KeyId([7u8; 16])))
        );
    }

    #[test]
    fn decode_roundtrip() {
        let mut obj = sample_object();
        obj.predecessor_hashes = vec![ProvenanceHash([0xAB; 32])];
        obj.workflow_instance_id = String::new();
        let bytes = canonical_encode(&obj, true).unwrap();
        let decoded = canonical_decode(&bytes).unwrap();
        assert_eq!(decoded, obj);
        assert_eq!(canonical_encode(&decoded, true).unwrap(), bytes);
    }

    #[test]
    fn decode_rejects_bad_magic_version_kind() {
        let bytes = canonical_encode(&sample_object(), true).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(canonical_decode(&bad), Err(DecodeError::BadMagic));

        let mut bad = bytes.clone();
        bad[4] = 0x02;
        assert_eq!(canonical_decode(&bad), Err(DecodeError::BadVersion(0x02)));

        let mut bad = bytes.clone();
        bad[5] = 0x7F;
        assert_eq!(canonical_decode(&bad), Err(DecodeError::BadKind(0x7F)));
    }

    #[test]
    fn decode_rejects_truncation_and_trailing() {
        let bytes = canonical_encode(&sample_object(), true).unwrap();
        for cut in [bytes.len() - 1, bytes.len() / 2, 3] {
            assert!(matches!(
                canonical_decode(&bytes[..cut]),
                Err(DecodeError::Truncated(_))
            ));
        }
        let mut extended = bytes.clone();
        extended.push(0);
        assert_eq!(
            canonical_decode(&extended),
            Err(DecodeError::TrailingBytes { trailing: 1 })
        );
    }

    #[test]
    fn decode_rejects_unsorted_signatures() {
        let mut obj = sample_object();
        obj.signatures = vec![
            SignatureEntry {
                key_id: KeyId([2u8; 16]),
                signature: SignatureBytes([3u8; 64]),
            },
            SignatureEntry {
                key_id: KeyId([9u8; 16]),
                signature: SignatureBytes([1u8; 64]),
            },
        ];
        let mut bytes = canonical_encode(&obj, true).unwrap();
        // Swap the two encoded entries in place.
        let sig_block = bytes.len() - 2 * (16 + 64);
        let (first, second) = {
            let entries = &bytes[sig_block..];
            (entries[..80].to_vec(), entries[80..].to_vec())
        };
        bytes[sig_block..sig_block + 80].copy_from_slice(&second);
        bytes[sig_block + 80..].copy_from_slice(&first);
        assert_eq!(
            canonical_decode(&bytes),
            Err(DecodeError::NonCanonicalSignatures)
        );
    }

    #[test]
    fn length_prefix_overflow_detected() {
        let mut out = Vec::new();
        assert!(push_len(&mut out, "x", u32::MAX as usize).is_ok());
        assert_eq!(
            push_len(&mut out, "x", u32::MAX as usize + 1),
            Err(EncodingError::Overflow {
                what: "x",
                len: u32::MAX as usize + 1
            })
        );
    }

    #[test]
    fn structure_checks() {
        let mut obj = sample_object();
        assert!(obj.check_structure().is_ok());

        obj.predecessor_hashes = vec![ProvenanceHash([1; 32]), ProvenanceHash([1; 32])];
        assert_eq!(
            obj.check_structure(),
            Err(StructureError::DuplicatePredecessor(ProvenanceHash([1; 32])))
        );

        let mut obj = sample_object();
        obj.signatures.clear();
        assert_eq!(obj.check_structure(), Err(StructureError::NoSignatures));

        let mut obj = sample_object();
        obj.choreography_instance_id.clear();
        assert_eq!(obj.check_structure(), Err(StructureError::EmptyChoreographyId));
    }

    #[test]
    fn hex_newtype_roundtrip() {
        let h = ProvenanceHash([0xC4; 32]);
        assert_eq!(ProvenanceHash::from_hex(&h.to_hex()), Ok(h));
        assert!(matches!(
            ProvenanceHash::from_hex("c4c4"),
            Err(HexError::WrongLength { expected: 32, got: 2 })
        ));
        assert!(ProvenanceHash::from_hex("zz").is_err());
    }
}
