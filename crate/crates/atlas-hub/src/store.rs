//! Retention-bounded location store with encrypted persistence.
//!
//! Records live in memory as plain structs; only the on-disk form is sealed.
//! Each saved file carries a public 16-byte identifier derived from its own
//! content, and the sealing key is derived from (store key, file id), so
//! frame counters can restart at 1 in every file without a (key, nonce) pair
//! ever being reused across files with different content.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use atlas_core::codec;
use atlas_core::{HashedUserId, LocationRecord};
use atlas_wire::{derive_file_key, FrameCipher, MsgType, SecureFrame};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HubError;

pub const DEFAULT_RETENTION_DAYS: u32 = 28;
const MS_PER_DAY: u64 = 86_400_000;

const STORE_MAGIC: &[u8; 7] = b"ATLSTOR";
const STORE_VERSION: u8 = 0x01;
/// Nonce prefix for store frames; files are a single logical direction.
const STORE_PREFIX: [u8; 4] = *b"rest";
/// Plaintext is chunked so a store larger than one frame's payload limit
/// still round-trips.
const STORE_CHUNK_LEN: usize = 64 * 1024;

/// Two users placed in the same area by records with the same timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contact {
    pub other: HashedUserId,
    pub area: String,
    pub timestamp: u64,
}

/// On-disk document; retention travels with the records it governs.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreDoc {
    retention_days: u32,
    #[serde(default)]
    records: Vec<LocationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationStore {
    records: Vec<LocationRecord>,
    retention_days: u32,
}

impl Default for LocationStore {
    fn default() -> Self {
        Self::new(DEFAULT_RETENTION_DAYS)
    }
}

impl LocationStore {
    pub fn new(retention_days: u32) -> Self {
        Self {
            records: Vec::new(),
            retention_days,
        }
    }

    pub fn retention_days(&self) -> u32 {
        self.retention_days
    }

    pub fn records(&self) -> &[LocationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn append(&mut self, records: impl IntoIterator<Item = LocationRecord>) {
        self.records.extend(records);
    }

    /// Every distinct user with at least one record.
    pub fn users(&self) -> BTreeSet<HashedUserId> {
        self.records.iter().map(|r| r.user).collect()
    }

    /// Drops records strictly older than the retention window and returns how
    /// many were removed. A record exactly at the boundary is kept, and
    /// pruning again at the same instant removes nothing.
    pub fn prune(&mut self, now_ms: u64) -> usize {
        let cutoff = now_ms.saturating_sub(u64::from(self.retention_days) * MS_PER_DAY);
        let before = self.records.len();
        self.records.retain(|r| r.timestamp >= cutoff);
        before - self.records.len()
    }

    /// All records of one user, oldest first. Records sharing a timestamp
    /// keep their insertion order.
    pub fn track(&self, user: &HashedUserId) -> Vec<LocationRecord> {
        let mut track: Vec<LocationRecord> = self
            .records
            .iter()
            .filter(|r| &r.user == user)
            .cloned()
            .collect();
        track.sort_by_key(|r| r.timestamp);
        track
    }

    /// Joins the user's records against everyone else's on (area, timestamp):
    /// each co-presence of another user in the same area at the same record
    /// instant yields one contact. Sorted by time, then by the other user.
    pub fn contact_trace(&self, user: &HashedUserId) -> Vec<Contact> {
        let own: Vec<&LocationRecord> = self.records.iter().filter(|r| &r.user == user).collect();
        let mut contacts = Vec::new();
        for mine in &own {
            for other in &self.records {
                if other.user != *user
                    && other.timestamp == mine.timestamp
                    && other.area == mine.area
                {
                    contacts.push(Contact {
                        other: other.user,
                        area: other.area.clone(),
                        timestamp: other.timestamp,
                    });
                }
            }
        }
        contacts.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.other.cmp(&b.other))
                .then_with(|| a.area.cmp(&b.area))
        });
        contacts
    }

    /// Adds every record from `other` that is not already present.
    pub fn merge(&mut self, other: &LocationStore) {
        for record in &other.records {
            if !self.records.contains(record) {
                self.records.push(record.clone());
            }
        }
    }

    /// Seals the store to `path`.
    ///
    /// Layout: magic, version, file id, frame count, then length-prefixed
    /// sealed frames with counters 1..=n under the file key.
    pub fn save(&self, path: &Path, store_key: &[u8; 32]) -> Result<(), HubError> {
        let doc = StoreDoc {
            retention_days: self.retention_days,
            records: self.records.clone(),
        };
        let plaintext = codec::to_toml(&doc)?;
        let file_id = file_id_for(store_key, plaintext.as_bytes());
        let cipher = FrameCipher::new(derive_file_key(store_key, &file_id)?, file_id, STORE_PREFIX);

        let chunks: Vec<&[u8]> = if plaintext.is_empty() {
            vec![b""]
        } else {
            plaintext.as_bytes().chunks(STORE_CHUNK_LEN).collect()
        };
        let mut out = Vec::new();
        out.extend_from_slice(STORE_MAGIC);
        out.push(STORE_VERSION);
        out.extend_from_slice(&file_id);
        out.extend_from_slice(&u32::try_from(chunks.len()).expect("chunk count fits").to_be_bytes());
        for (idx, chunk) in chunks.iter().enumerate() {
            let frame = cipher
                .seal_at(idx as u64 + 1, MsgType::LocationReport, chunk)?
                .encode();
            out.extend_from_slice(&u32::try_from(frame.len()).expect("frame length fits").to_be_bytes());
            out.extend_from_slice(&frame);
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Opens a sealed store file. Any altered byte fails: header fields are
    /// covered by the content-derived file id and every frame authenticates
    /// its header and body.
    pub fn load(path: &Path, store_key: &[u8; 32]) -> Result<Self, HubError> {
        let bytes = fs::read(path)?;
        if bytes.len() < STORE_MAGIC.len() + 1 + 16 + 4 {
            return Err(HubError::CorruptStore("file too short"));
        }
        let (magic, rest) = bytes.split_at(STORE_MAGIC.len());
        if magic != STORE_MAGIC {
            return Err(HubError::CorruptStore("bad magic"));
        }
        let (&version, rest) = rest.split_first().expect("length checked");
        if version != STORE_VERSION {
            return Err(HubError::CorruptStore("unsupported version"));
        }
        let mut file_id = [0u8; 16];
        file_id.copy_from_slice(&rest[..16]);
        let rest = &rest[16..];
        let frame_count = u32::from_be_bytes(rest[..4].try_into().expect("length checked"));
        let mut rest = &rest[4..];

        let cipher = FrameCipher::new(derive_file_key(store_key, &file_id)?, file_id, STORE_PREFIX);
        let mut plaintext = Vec::new();
        for expected_counter in 1..=u64::from(frame_count) {
            if rest.len() < 4 {
                return Err(HubError::CorruptStore("truncated frame length"));
            }
            let frame_len = u32::from_be_bytes(rest[..4].try_into().expect("length checked")) as usize;
            rest = &rest[4..];
            if rest.len() < frame_len {
                return Err(HubError::CorruptStore("truncated frame"));
            }
            let frame = SecureFrame::decode(&rest[..frame_len])?;
            rest = &rest[frame_len..];
            let (msg_type, counter, chunk) = cipher.open(&frame)?;
            if msg_type != MsgType::LocationReport || counter != expected_counter {
                return Err(HubError::CorruptStore("frames out of order"));
            }
            plaintext.extend_from_slice(&chunk);
        }
        if !rest.is_empty() {
            return Err(HubError::CorruptStore("trailing bytes"));
        }
        if file_id_for(store_key, &plaintext) != file_id {
            return Err(HubError::CorruptStore("file id does not match content"));
        }

        let text = String::from_utf8(plaintext)
            .map_err(|_| HubError::CorruptStore("plaintext is not utf-8"))?;
        let doc: StoreDoc = codec::from_toml(&text)?;
        Ok(Self {
            records: doc.records,
            retention_days: doc.retention_days,
        })
    }
}

fn file_id_for(store_key: &[u8; 32], plaintext: &[u8]) -> [u8; 16] {
    let mut hasher = Sha256::new();
    hasher.update(b"atlas-store-file");
    hasher.update(store_key);
    hasher.update(plaintext);
    let digest = hasher.finalize();
    let mut id = [0u8; 16];
    id.copy_from_slice(&digest[..16]);
    id
}
