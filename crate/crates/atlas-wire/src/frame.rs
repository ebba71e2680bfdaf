//! The byte-precise frame envelope every sealed message travels in.

use crate::{MsgType, WireError};

/// Leading frame bytes.
pub const MAGIC: [u8; 4] = *b"ATLS";
/// Current protocol version.
pub const VERSION: u8 = 0x01;
/// Bytes before the ciphertext: magic(4) version(1) msg_type(1) sender(16)
/// nonce(12) payload_len(4).
pub const HEADER_LEN: usize = 38;
/// Authentication tag length.
pub const TAG_LEN: usize = 16;
/// Fixed bytes around the ciphertext.
pub const FRAME_OVERHEAD: usize = HEADER_LEN + TAG_LEN;
/// Upper bound on a single sealed payload. Sample batches and store batches
/// stay far below this; anything larger is a protocol violation.
pub const MAX_PAYLOAD_LEN: usize = 1 << 20;

/// A versioned, AEAD-sealed wire envelope.
///
/// Layout: `"ATLS" ‖ 0x01 ‖ msg_type ‖ sender_id(16) ‖ nonce(12) ‖
/// payload_len(4, big-endian) ‖ ciphertext ‖ tag(16)`. The header up to and
/// including `payload_len` is bound to the seal as associated data, so no
/// header byte can be altered without failing authentication.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecureFrame {
    pub msg_type: MsgType,
    pub sender_id: [u8; 16],
    pub nonce: [u8; 12],
    pub ciphertext: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

impl SecureFrame {
    /// The header bytes of this frame, exactly as they appear on the wire.
    pub fn header(&self) -> [u8; HEADER_LEN] {
        header_bytes(
            self.msg_type,
            &self.sender_id,
            &self.nonce,
            self.ciphertext.len() as u32,
        )
    }

    /// The nonce's trailing 8 bytes, the per-session message counter.
    pub fn counter(&self) -> u64 {
        let mut raw = [0u8; 8];
        raw.copy_from_slice(&self.nonce[4..12]);
        u64::from_be_bytes(raw)
    }

    /// The nonce's leading 4 bytes, fixed per session direction.
    pub fn nonce_prefix(&self) -> [u8; 4] {
        let mut raw = [0u8; 4];
        raw.copy_from_slice(&self.nonce[..4]);
        raw
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FRAME_OVERHEAD + self.ciphertext.len());
        out.extend_from_slice(&self.header());
        out.extend_from_slice(&self.ciphertext);
        out.extend_from_slice(&self.tag);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < FRAME_OVERHEAD {
            return Err(WireError::MalformedFrame("truncated frame"));
        }
        if bytes[0..4] != MAGIC {
            return Err(WireError::MalformedFrame("bad magic"));
        }
        if bytes[4] != VERSION {
            return Err(WireError::MalformedFrame("unsupported version"));
        }
        let msg_type = MsgType::from_byte(bytes[5])
            .ok_or(WireError::MalformedFrame("unknown message type"))?;
        let mut sender_id = [0u8; 16];
        sender_id.copy_from_slice(&bytes[6..22]);
        let mut nonce = [0u8; 12];
        nonce.copy_from_slice(&bytes[22..34]);
        let mut len_raw = [0u8; 4];
        len_raw.copy_from_slice(&bytes[34..38]);
        let payload_len = u32::from_be_bytes(len_raw) as usize;
        if payload_len > MAX_PAYLOAD_LEN {
            return Err(WireError::MalformedFrame("payload length over limit"));
        }
        if bytes.len() != FRAME_OVERHEAD + payload_len {
            return Err(WireError::MalformedFrame("length field disagrees with frame size"));
        }
        let ciphertext = bytes[HEADER_LEN..HEADER_LEN + payload_len].to_vec();
        let mut tag = [0u8; TAG_LEN];
        tag.copy_from_slice(&bytes[HEADER_LEN + payload_len..]);
        Ok(Self {
            msg_type,
            sender_id,
            nonce,
            ciphertext,
            tag,
        })
    }
}

pub(crate) fn header_bytes(
    msg_type: MsgType,
    sender_id: &[u8; 16],
    nonce: &[u8; 12],
    payload_len: u32,
) -> [u8; HEADER_LEN] {
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(&MAGIC);
    header[4] = VERSION;
    header[5] = msg_type.byte();
    header[6..22].copy_from_slice(sender_id);
    header[22..34].copy_from_slice(nonce);
    header[34..38].copy_from_slice(&payload_len.to_be_bytes());
    header
}
