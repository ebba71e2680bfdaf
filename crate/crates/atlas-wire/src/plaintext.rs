//! Unprotected framing for benchmark comparisons.
//!
//! A `PlainSession` speaks the same frame layout as a secure session but
//! copies payloads through verbatim, with an all-zero tag and no key
//! material. It exists so the cost of the cryptography can be measured
//! against an otherwise identical pipeline. Nothing outside benchmarking
//! should construct one.

use crate::frame::{SecureFrame, TAG_LEN};
use crate::{MsgType, WireError};

/// Counterpart of a secure session with the protection stripped out.
/// Counters and replay checks stay so the two paths do equivalent work.
#[derive(Debug)]
pub struct PlainSession {
    local_id: [u8; 16],
    peer_id: [u8; 16],
    tx_counter: u64,
    rx_counter: u64,
}

impl PlainSession {
    pub fn new(local_id: [u8; 16], peer_id: [u8; 16]) -> Self {
        Self {
            local_id,
            peer_id,
            tx_counter: 0,
            rx_counter: 0,
        }
    }

    pub fn local_id(&self) -> [u8; 16] {
        self.local_id
    }

    pub fn peer_id(&self) -> [u8; 16] {
        self.peer_id
    }

    /// Frames a payload without encrypting it.
    pub fn seal(&mut self, msg_type: MsgType, payload: &[u8]) -> Result<SecureFrame, WireError> {
        if self.tx_counter == u64::MAX {
            return Err(WireError::SessionExpired);
        }
        let counter = self.tx_counter + 1;
        let mut nonce = [0u8; 12];
        nonce[4..].copy_from_slice(&counter.to_be_bytes());
        self.tx_counter = counter;
        Ok(SecureFrame {
            msg_type,
            sender_id: self.local_id,
            nonce,
            ciphertext: payload.to_vec(),
            tag: [0u8; TAG_LEN],
        })
    }

    /// Accepts a plaintext frame, enforcing ordering like the secure path.
    pub fn open(&mut self, frame: &SecureFrame) -> Result<(MsgType, Vec<u8>), WireError> {
        if frame.sender_id != self.peer_id || frame.nonce_prefix() != [0u8; 4] {
            return Err(WireError::AuthenticationFailure);
        }
        if frame.tag != [0u8; TAG_LEN] {
            // A sealed frame wandered onto the plaintext path.
            return Err(WireError::AuthenticationFailure);
        }
        let counter = frame.counter();
        if counter <= self.rx_counter {
            return Err(WireError::ReplayDetected {
                counter,
                last_seen: self.rx_counter,
            });
        }
        self.rx_counter = counter;
        Ok((frame.msg_type, frame.ciphertext.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::SessionKeys;

    fn plain_pair() -> (PlainSession, PlainSession) {
        (
            PlainSession::new([1; 16], [2; 16]),
            PlainSession::new([2; 16], [1; 16]),
        )
    }

    #[test]
    fn round_trip_and_replay() {
        let (mut a, mut b) = plain_pair();
        let frame = a.seal(MsgType::LocationReport, b"where").unwrap();
        assert_eq!(frame.ciphertext, b"where");
        let (msg_type, payload) = b.open(&frame).unwrap();
        assert_eq!(msg_type, MsgType::LocationReport);
        assert_eq!(payload, b"where");
        assert!(matches!(
            b.open(&frame).unwrap_err(),
            WireError::ReplayDetected { .. }
        ));
    }

    #[test]
    fn sealed_frames_are_rejected_on_the_plain_path() {
        let (_, mut b) = plain_pair();
        let mut secure = SessionKeys::from_material(
            [3u8; 32],
            [0u8; 4],
            [0u8; 4],
            [1; 16],
            [2; 16],
            0,
            true,
        );
        let frame = secure.seal(MsgType::Control, b"hello").unwrap();
        assert_eq!(b.open(&frame).unwrap_err(), WireError::AuthenticationFailure);
    }

    #[test]
    fn plain_frames_fail_secure_opening() {
        let (mut a, _) = plain_pair();
        let frame = a.seal(MsgType::Control, b"hello").unwrap();
        let mut secure = SessionKeys::from_material(
            [3u8; 32],
            [0u8; 4],
            [0u8; 4],
            [2; 16],
            [1; 16],
            0,
            false,
        );
        assert_eq!(secure.open(&frame).unwrap_err(), WireError::AuthenticationFailure);
    }

    #[test]
    fn frames_from_strangers_are_rejected() {
        let (mut a, _) = plain_pair();
        let mut listener = PlainSession::new([9; 16], [7; 16]);
        let frame = a.seal(MsgType::Control, b"hi").unwrap();
        assert_eq!(
            listener.open(&frame).unwrap_err(),
            WireError::AuthenticationFailure
        );
    }
}
