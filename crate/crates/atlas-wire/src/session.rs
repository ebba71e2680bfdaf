//! Sealing and opening frames under an established session.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use sha2::{Digest, Sha256};

use crate::frame::{header_bytes, SecureFrame, MAX_PAYLOAD_LEN, TAG_LEN};
use crate::{MsgType, WireError};

/// One direction of sealed traffic: a key, the sender's wire id, and the
/// 4-byte nonce prefix for that direction. The caller owns counter
/// management, which lets the location store reuse the same framing with
/// file-scoped sequence numbers.
pub struct FrameCipher {
    key: [u8; 32],
    sender_id: [u8; 16],
    prefix: [u8; 4],
}

impl FrameCipher {
    pub fn new(key: [u8; 32], sender_id: [u8; 16], prefix: [u8; 4]) -> Self {
        Self {
            key,
            sender_id,
            prefix,
        }
    }

    pub fn sender_id(&self) -> [u8; 16] {
        self.sender_id
    }

    /// Seals `payload` with the nonce `prefix ‖ counter`. Counters must never
    /// repeat under one key; sessions guarantee that by monotonic increments.
    pub fn seal_at(
        &self,
        counter: u64,
        msg_type: MsgType,
        payload: &[u8],
    ) -> Result<SecureFrame, WireError> {
        if payload.len() > MAX_PAYLOAD_LEN {
            return Err(WireError::MalformedFrame("payload length over limit"));
        }
        let mut nonce = [0u8; 12];
        nonce[..4].copy_from_slice(&self.prefix);
        nonce[4..].copy_from_slice(&counter.to_be_bytes());
        let header = header_bytes(msg_type, &self.sender_id, &nonce, payload.len() as u32);

        let cipher = ChaCha20Poly1305::new(Key::from_slice(&self.key));
        let sealed = cipher
            .encrypt(
                Nonce::from_slice(&nonce),
                Payload {
                    msg: payload,
                    aad: &header,
                },
            )
            .map_err(|_| WireError::MalformedFrame("payload length over limit"))?;

        let (ciphertext, tag_bytes) = sealed.split_at(payload.len());
        let mut tag = [0u8; TAG_LEN];
        tag.copy_from_slice(tag_bytes);
        Ok(SecureFrame {
            msg_type,
            sender_id: self.sender_id,
            nonce,
            ciphertext: ciphertext.to_vec(),
            tag,
        })
    }

    /// Opens a frame sealed by this cipher's owner, returning the message
    /// type, the counter found in the nonce, and the plaintext. The caller
    /// decides what counters are acceptable.
    pub fn open(&self, frame: &SecureFrame) -> Result<(MsgType, u64, Vec<u8>), WireError> {
        if frame.sender_id != self.sender_id || frame.nonce_prefix() != self.prefix {
            return Err(WireError::AuthenticationFailure);
        }
        let header = frame.header();
        let mut sealed = Vec::with_capacity(frame.ciphertext.len() + TAG_LEN);
        sealed.extend_from_slice(&frame.ciphertext);
        sealed.extend_from_slice(&frame.tag);

        let cipher = ChaCha20Poly1305::new(Key::from_slice(&self.key));
        let plaintext = cipher
            .decrypt(
                Nonce::from_slice(&frame.nonce),
                Payload {
                    msg: &sealed,
                    aad: &header,
                },
            )
            .map_err(|_| WireError::AuthenticationFailure)?;
        Ok((frame.msg_type, frame.counter(), plaintext))
    }
}

/// An established two-party session: one key, directional nonce prefixes,
/// and strictly increasing counters both ways.
pub struct SessionKeys {
    tx: FrameCipher,
    rx: FrameCipher,
    pub established_at: u64,
    tx_counter: u64,
    rx_counter: u64,
    key_id: [u8; 8],
}

impl std::fmt::Debug for SessionKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionKeys")
            .field("local_id", &hex::encode(self.tx.sender_id))
            .field("peer_id", &hex::encode(self.rx.sender_id))
            .field("established_at", &self.established_at)
            .field("tx_counter", &self.tx_counter)
            .field("rx_counter", &self.rx_counter)
            .finish_non_exhaustive()
    }
}

impl SessionKeys {
    /// Assembles a session from freshly derived material. `initiator` picks
    /// which directional prefix this side transmits with.
    pub(crate) fn from_material(
        key: [u8; 32],
        initiator_prefix: [u8; 4],
        responder_prefix: [u8; 4],
        local_id: [u8; 16],
        peer_id: [u8; 16],
        established_at: u64,
        initiator: bool,
    ) -> Self {
        let (tx_prefix, rx_prefix) = if initiator {
            (initiator_prefix, responder_prefix)
        } else {
            (responder_prefix, initiator_prefix)
        };
        let key_id: [u8; 8] = {
            let digest = Sha256::digest(key);
            let mut id = [0u8; 8];
            id.copy_from_slice(&digest[..8]);
            id
        };
        Self {
            tx: FrameCipher::new(key, local_id, tx_prefix),
            rx: FrameCipher::new(key, peer_id, rx_prefix),
            established_at,
            tx_counter: 0,
            rx_counter: 0,
            key_id,
        }
    }

    pub fn local_id(&self) -> [u8; 16] {
        self.tx.sender_id()
    }

    pub fn peer_id(&self) -> [u8; 16] {
        self.rx.sender_id()
    }

    pub fn tx_counter(&self) -> u64 {
        self.tx_counter
    }

    pub fn rx_counter(&self) -> u64 {
        self.rx_counter
    }

    /// Non-secret identifier of the session key (truncated SHA-256), for
    /// logging and key-distinctness checks.
    pub fn key_id(&self) -> [u8; 8] {
        self.key_id
    }

    /// True once the session is old enough for the periodic re-handshake.
    pub fn needs_rehandshake(&self, now_ms: u64, interval_ms: u64) -> bool {
        now_ms.saturating_sub(self.established_at) >= interval_ms
    }

    /// Seals a payload with the next transmit counter.
    pub fn seal(&mut self, msg_type: MsgType, payload: &[u8]) -> Result<SecureFrame, WireError> {
        if self.tx_counter == u64::MAX {
            return Err(WireError::SessionExpired);
        }
        let counter = self.tx_counter + 1;
        let frame = self.tx.seal_at(counter, msg_type, payload)?;
        self.tx_counter = counter;
        Ok(frame)
    }

    /// Verifies and opens a frame from the peer.
    ///
    /// Rejects frames whose counter does not move forward (replay or
    /// reordering), frames from any other sender, and any frame whose header
    /// or body was altered.
    pub fn open(&mut self, frame: &SecureFrame) -> Result<(MsgType, Vec<u8>), WireError> {
        if frame.sender_id != self.rx.sender_id() {
            return Err(WireError::AuthenticationFailure);
        }
        let counter = frame.counter();
        if counter <= self.rx_counter {
            return Err(WireError::ReplayDetected {
                counter,
                last_seen: self.rx_counter,
            });
        }
        let (msg_type, _, plaintext) = self.rx.open(frame)?;
        self.rx_counter = counter;
        Ok((msg_type, plaintext))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session_pair() -> (SessionKeys, SessionKeys) {
        let key = [0x42u8; 32];
        let a = SessionKeys::from_material(key, [1; 4], [2; 4], [10; 16], [20; 16], 0, true);
        let b = SessionKeys::from_material(key, [1; 4], [2; 4], [20; 16], [10; 16], 0, false);
        (a, b)
    }

    #[test]
    fn seal_open_round_trip() {
        let (mut a, mut b) = session_pair();
        let frame = a.seal(MsgType::Control, b"challenge").unwrap();
        assert_eq!(a.tx_counter(), 1);
        let (msg_type, payload) = b.open(&frame).unwrap();
        assert_eq!(msg_type, MsgType::Control);
        assert_eq!(payload, b"challenge");
        assert_eq!(b.rx_counter(), 1);

        let reply = b.seal(MsgType::Control, b"echo").unwrap();
        let (_, payload) = a.open(&reply).unwrap();
        assert_eq!(payload, b"echo");
    }

    #[test]
    fn empty_payload_round_trips() {
        let (mut a, mut b) = session_pair();
        let frame = a.seal(MsgType::SampleBatch, b"").unwrap();
        assert_eq!(frame.ciphertext.len(), 0);
        let (_, payload) = b.open(&frame).unwrap();
        assert!(payload.is_empty());
    }

    #[test]
    fn replayed_frame_is_rejected() {
        let (mut a, mut b) = session_pair();
        let frame = a.seal(MsgType::Control, b"once").unwrap();
        b.open(&frame).unwrap();
        assert_eq!(
            b.open(&frame),
            Err(WireError::ReplayDetected {
                counter: 1,
                last_seen: 1
            })
        );
    }

    #[test]
    fn out_of_order_frames_are_rejected() {
        let (mut a, mut b) = session_pair();
        let first = a.seal(MsgType::Control, b"1").unwrap();
        let second = a.seal(MsgType::Control, b"2").unwrap();
        b.open(&second).unwrap();
        assert!(matches!(
            b.open(&first),
            Err(WireError::ReplayDetected { .. })
        ));
    }

    #[test]
    fn tampered_bytes_fail_authentication() {
        let (mut a, mut b) = session_pair();
        let frame = a.seal(MsgType::Control, b"payload").unwrap();

        let mut wrong_body = frame.clone();
        wrong_body.ciphertext[0] ^= 0x01;
        assert_eq!(b.open(&wrong_body), Err(WireError::AuthenticationFailure));

        let mut wrong_tag = frame.clone();
        wrong_tag.tag[3] ^= 0x10;
        assert_eq!(b.open(&wrong_tag), Err(WireError::AuthenticationFailure));

        let mut wrong_type = frame.clone();
        wrong_type.msg_type = MsgType::MapSync;
        assert_eq!(b.open(&wrong_type), Err(WireError::AuthenticationFailure));

        let mut wrong_sender = frame;
        wrong_sender.sender_id = [9; 16];
        assert_eq!(b.open(&wrong_sender), Err(WireError::AuthenticationFailure));
    }

    #[test]
    fn frames_do_not_open_under_a_different_key() {
        let (mut a, _) = session_pair();
        let frame = a.seal(MsgType::Control, b"secret").unwrap();
        let mut other = SessionKeys::from_material(
            [0x43u8; 32],
            [1; 4],
            [2; 4],
            [20; 16],
            [10; 16],
            0,
            false,
        );
        assert_eq!(other.open(&frame), Err(WireError::AuthenticationFailure));
    }

    #[test]
    fn ciphertext_differs_from_plaintext() {
        let (mut a, _) = session_pair();
        let frame = a.seal(MsgType::Control, b"plaintext-probe").unwrap();
        assert_ne!(frame.ciphertext.as_slice(), b"plaintext-probe");
    }

    #[test]
    fn exhausted_counter_expires_the_session() {
        let (mut a, _) = session_pair();
        a.tx_counter = u64::MAX;
        assert_eq!(
            a.seal(MsgType::Control, b"x"),
            Err(WireError::SessionExpired)
        );
    }

    #[test]
    fn rehandshake_trigger_uses_interval() {
        let (a, _) = session_pair();
        assert!(!a.needs_rehandshake(1000, 86_400_000));
        assert!(a.needs_rehandshake(86_400_000, 86_400_000));
    }
}
