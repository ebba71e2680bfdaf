//! Framed, authenticated-encrypted transport for all radio and store
//! traffic.
//!
//! Three layers share one frame format: devices pair with beacons through an
//! out-of-band secret, beacons talk to the hub over pre-shared-key sessions,
//! and the hub encrypts its store at rest with a derived key. Sealed traffic
//! is ChaCha20-Poly1305 (256-bit key, 96-bit nonce, 128-bit tag) with the
//! frame header bound as associated data; handshakes authenticate with
//! HMAC-SHA256 and derive keys with HKDF-SHA256.

use hkdf::Hkdf;
use hmac::{Hmac, Mac};
use sha2::Sha256;
use thiserror::Error;

pub mod frame;
pub mod handshake;
pub mod pairing;
pub mod plaintext;
pub mod session;

pub use frame::{SecureFrame, FRAME_OVERHEAD, HEADER_LEN, MAX_PAYLOAD_LEN};
pub use handshake::{HandshakeInit, HandshakeInitiator, HandshakeReply, HandshakeResponder};
pub use pairing::{complete_pairing, pairing_request, BeaconPairing, PairingRequest, PairingResponse, PairingSecret};
pub use plaintext::PlainSession;
pub use session::{FrameCipher, SessionKeys};

/// Smallest salt accepted by the key-derivation helpers.
pub const MIN_SALT_LEN: usize = 16;

/// How long an established beacon↔hub session stays fresh before the hub
/// re-runs the handshake (24 simulated hours).
pub const REHANDSHAKE_INTERVAL_MS: u64 = 24 * 60 * 60 * 1000;

/// Default patience for a handshake round trip.
pub const DEFAULT_HANDSHAKE_TIMEOUT_MS: u64 = 5_000;

pub(crate) type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("pairing rejected: {0}")]
    PairingRejected(&'static str),
    #[error("handshake failed: {0}")]
    HandshakeFailed(&'static str),
    #[error("handshake timed out after {elapsed_ms} ms (limit {timeout_ms} ms)")]
    HandshakeTimeout { elapsed_ms: u64, timeout_ms: u64 },
    #[error("frame failed authentication")]
    AuthenticationFailure,
    #[error("replayed frame: counter {counter} not after {last_seen}")]
    ReplayDetected { counter: u64, last_seen: u64 },
    #[error("malformed frame: {0}")]
    MalformedFrame(&'static str),
    #[error("session nonce space exhausted")]
    SessionExpired,
    #[error("pairing string is not in the atlas-pair:v1 format")]
    BadPairingString,
    #[error("salt is {0} bytes, need at least {MIN_SALT_LEN}")]
    WeakSalt(usize),
}

/// Message type registry, one byte per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Pairing = 0x01,
    Handshake = 0x02,
    SampleBatch = 0x10,
    MapSync = 0x11,
    LocationReport = 0x12,
    Control = 0x13,
}

impl MsgType {
    pub fn from_byte(byte: u8) -> Option<Self> {
        match byte {
            0x01 => Some(Self::Pairing),
            0x02 => Some(Self::Handshake),
            0x10 => Some(Self::SampleBatch),
            0x11 => Some(Self::MapSync),
            0x12 => Some(Self::LocationReport),
            0x13 => Some(Self::Control),
            _ => None,
        }
    }

    pub fn byte(self) -> u8 {
        self as u8
    }
}

fn derive_32(env_salt: &[u8], info: &[&[u8]]) -> Result<[u8; 32], WireError> {
    if env_salt.len() < MIN_SALT_LEN {
        return Err(WireError::WeakSalt(env_salt.len()));
    }
    let hk = Hkdf::<Sha256>::new(Some(b"atlas-wire-v1"), env_salt);
    let joined: Vec<u8> = info.iter().flat_map(|part| part.iter().copied()).collect();
    let mut okm = [0u8; 32];
    hk.expand(&joined, &mut okm)
        .expect("32 bytes is a valid hkdf output length");
    Ok(okm)
}

/// Derives the pre-shared key installed on one beacon and the hub at
/// deployment.
pub fn derive_beacon_psk(env_salt: &[u8], beacon_id: &[u8; 16]) -> Result<[u8; 32], WireError> {
    derive_32(env_salt, &[b"beacon-psk", beacon_id])
}

/// Derives the key that encrypts the location store at rest.
pub fn derive_store_key(env_salt: &[u8]) -> Result<[u8; 32], WireError> {
    derive_32(env_salt, &[b"store-key"])
}

/// Derives the sealing key for one store file from the store key and the
/// file's public identifier, so counters restart at 1 in every file without
/// ever reusing a (key, nonce) pair.
pub fn derive_file_key(store_key: &[u8; 32], file_id: &[u8; 16]) -> Result<[u8; 32], WireError> {
    derive_32(store_key, &[b"store-file", file_id])
}

pub(crate) fn hmac_tag(key: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
    for part in parts {
        mac.update(part);
    }
    mac.finalize().into_bytes().into()
}

pub(crate) fn hmac_verify(key: &[u8], parts: &[&[u8]], tag: &[u8; 32]) -> bool {
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
    for part in parts {
        mac.update(part);
    }
    mac.verify_slice(tag).is_ok()
}

/// Expands session material bound to both peers and both nonces: a 256-bit
/// key plus one 4-byte nonce prefix per direction.
pub(crate) fn derive_session_material(
    ikm: &[u8; 32],
    label: &'static [u8],
    initiator_id: &[u8; 16],
    initiator_nonce: &[u8; 16],
    responder_id: &[u8; 16],
    responder_nonce: &[u8; 16],
) -> ([u8; 32], [u8; 4], [u8; 4]) {
    let hk = Hkdf::<Sha256>::new(Some(label), ikm);
    let mut info = Vec::with_capacity(64);
    info.extend_from_slice(initiator_id);
    info.extend_from_slice(initiator_nonce);
    info.extend_from_slice(responder_id);
    info.extend_from_slice(responder_nonce);
    let mut okm = [0u8; 40];
    hk.expand(&info, &mut okm)
        .expect("40 bytes is a valid hkdf output length");
    let mut key = [0u8; 32];
    key.copy_from_slice(&okm[..32]);
    let mut initiator_prefix = [0u8; 4];
    initiator_prefix.copy_from_slice(&okm[32..36]);
    let mut responder_prefix = [0u8; 4];
    responder_prefix.copy_from_slice(&okm[36..40]);
    (key, initiator_prefix, responder_prefix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msg_type_round_trips_registry_bytes() {
        for (byte, expected) in [
            (0x01, MsgType::Pairing),
            (0x02, MsgType::Handshake),
            (0x10, MsgType::SampleBatch),
            (0x11, MsgType::MapSync),
            (0x12, MsgType::LocationReport),
            (0x13, MsgType::Control),
        ] {
            assert_eq!(MsgType::from_byte(byte), Some(expected));
            assert_eq!(expected.byte(), byte);
        }
        assert_eq!(MsgType::from_byte(0x00), None);
        assert_eq!(MsgType::from_byte(0x42), None);
    }

    #[test]
    fn derived_keys_differ_by_purpose_and_peer() {
        let salt = [9u8; 16];
        let psk_a = derive_beacon_psk(&salt, &[1u8; 16]).unwrap();
        let psk_b = derive_beacon_psk(&salt, &[2u8; 16]).unwrap();
        let store = derive_store_key(&salt).unwrap();
        assert_ne!(psk_a, psk_b);
        assert_ne!(psk_a, store);
        assert_eq!(psk_a, derive_beacon_psk(&salt, &[1u8; 16]).unwrap());
    }

    #[test]
    fn short_salt_is_rejected() {
        assert_eq!(
            derive_store_key(&[0u8; 8]).unwrap_err(),
            WireError::WeakSalt(8)
        );
    }
}
