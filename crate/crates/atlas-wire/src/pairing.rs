//! Out-of-band pairing between a device and a beacon.
//!
//! The environment's pairing secret travels to the device outside the radio
//! channel (the QR-code handoff, abstracted as a string). Device and beacon
//! then exchange nonces authenticated by HMAC proofs under that secret and
//! derive a fresh session; the secret itself is never transmitted.

use std::collections::BTreeSet;

use crate::session::SessionKeys;
use crate::{derive_32, derive_session_material, hmac_tag, hmac_verify, WireError};

const PAIRING_SESSION_LABEL: &[u8] = b"atlas-pair-session";
const QR_PREFIX: &str = "atlas-pair:v1";

/// The out-of-band secret of one environment.
pub struct PairingSecret {
    pub environment_id: String,
    pub issued_at: u64,
    secret: [u8; 32],
}

impl std::fmt::Debug for PairingSecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PairingSecret")
            .field("environment_id", &self.environment_id)
            .field("issued_at", &self.issued_at)
            .finish_non_exhaustive()
    }
}

impl Clone for PairingSecret {
    fn clone(&self) -> Self {
        Self {
            environment_id: self.environment_id.clone(),
            issued_at: self.issued_at,
            secret: self.secret,
        }
    }
}

impl PairingSecret {
    /// Derives the environment's pairing secret from its salt.
    pub fn derive(
        env_salt: &[u8],
        environment_id: &str,
        issued_at: u64,
    ) -> Result<Self, WireError> {
        let secret = derive_32(env_salt, &[b"pairing-secret"])?;
        Ok(Self {
            environment_id: environment_id.to_string(),
            issued_at,
            secret,
        })
    }

    /// Renders the QR-code handoff string.
    pub fn to_qr_string(&self) -> String {
        format!(
            "{QR_PREFIX}:{}:{}:{}",
            self.environment_id,
            self.issued_at,
            hex::encode(self.secret)
        )
    }

    /// Parses a QR-code handoff string.
    pub fn from_qr_string(text: &str) -> Result<Self, WireError> {
        let rest = text
            .strip_prefix(QR_PREFIX)
            .and_then(|r| r.strip_prefix(':'))
            .ok_or(WireError::BadPairingString)?;
        // The secret and timestamp cannot contain ':', so split from the
        // right and let the environment id keep any embedded colons.
        let (rest, secret_hex) = rest.rsplit_once(':').ok_or(WireError::BadPairingString)?;
        let (environment_id, issued_at) =
            rest.rsplit_once(':').ok_or(WireError::BadPairingString)?;
        if environment_id.is_empty() {
            return Err(WireError::BadPairingString);
        }
        let issued_at: u64 = issued_at.parse().map_err(|_| WireError::BadPairingString)?;
        if secret_hex.len() != 64 {
            return Err(WireError::BadPairingString);
        }
        let mut secret = [0u8; 32];
        hex::decode_to_slice(secret_hex, &mut secret).map_err(|_| WireError::BadPairingString)?;
        Ok(Self {
            environment_id: environment_id.to_string(),
            issued_at,
            secret,
        })
    }
}

/// First pairing message, device → beacon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingRequest {
    pub device_id: [u8; 16],
    pub device_nonce: [u8; 16],
    pub proof: [u8; 32],
}

/// Second pairing message, beacon → device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingResponse {
    pub beacon_id: [u8; 16],
    pub beacon_nonce: [u8; 16],
    pub proof: [u8; 32],
}

const BOOTSTRAP_PAIRING: u8 = 0x01;
const REQUEST_TAG: u8 = 0x01;
const RESPONSE_TAG: u8 = 0x02;

impl PairingRequest {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(66);
        out.push(BOOTSTRAP_PAIRING);
        out.push(REQUEST_TAG);
        out.extend_from_slice(&self.device_id);
        out.extend_from_slice(&self.device_nonce);
        out.extend_from_slice(&self.proof);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() != 66 || bytes[0] != BOOTSTRAP_PAIRING || bytes[1] != REQUEST_TAG {
            return Err(WireError::MalformedFrame("not a pairing request"));
        }
        let mut device_id = [0u8; 16];
        device_id.copy_from_slice(&bytes[2..18]);
        let mut device_nonce = [0u8; 16];
        device_nonce.copy_from_slice(&bytes[18..34]);
        let mut proof = [0u8; 32];
        proof.copy_from_slice(&bytes[34..66]);
        Ok(Self {
            device_id,
            device_nonce,
            proof,
        })
    }
}

impl PairingResponse {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(66);
        out.push(BOOTSTRAP_PAIRING);
        out.push(RESPONSE_TAG);
        out.extend_from_slice(&self.beacon_id);
        out.extend_from_slice(&self.beacon_nonce);
        out.extend_from_slice(&self.proof);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() != 66 || bytes[0] != BOOTSTRAP_PAIRING || bytes[1] != RESPONSE_TAG {
            return Err(WireError::MalformedFrame("not a pairing response"));
        }
        let mut beacon_id = [0u8; 16];
        beacon_id.copy_from_slice(&bytes[2..18]);
        let mut beacon_nonce = [0u8; 16];
        beacon_nonce.copy_from_slice(&bytes[18..34]);
        let mut proof = [0u8; 32];
        proof.copy_from_slice(&bytes[34..66]);
        Ok(Self {
            beacon_id,
            beacon_nonce,
            proof,
        })
    }
}

fn request_proof(secret: &PairingSecret, device_id: &[u8; 16], device_nonce: &[u8; 16]) -> [u8; 32] {
    hmac_tag(
        &secret.secret,
        &[
            b"pair-request",
            secret.environment_id.as_bytes(),
            device_id,
            device_nonce,
        ],
    )
}

fn response_proof(
    secret: &PairingSecret,
    request: &PairingRequest,
    beacon_id: &[u8; 16],
    beacon_nonce: &[u8; 16],
) -> [u8; 32] {
    hmac_tag(
        &secret.secret,
        &[
            b"pair-response",
            secret.environment_id.as_bytes(),
            &request.device_id,
            &request.device_nonce,
            beacon_id,
            beacon_nonce,
        ],
    )
}

/// Builds the device's opening message.
pub fn pairing_request(
    secret: &PairingSecret,
    device_id: [u8; 16],
    device_nonce: [u8; 16],
) -> PairingRequest {
    PairingRequest {
        device_id,
        device_nonce,
        proof: request_proof(secret, &device_id, &device_nonce),
    }
}

/// Beacon-side pairing state: the environment secret plus the device nonces
/// already consumed, so a recorded request cannot be replayed.
pub struct BeaconPairing {
    secret: PairingSecret,
    beacon_id: [u8; 16],
    seen_device_nonces: BTreeSet<([u8; 16], [u8; 16])>,
}

impl BeaconPairing {
    pub fn new(secret: PairingSecret, beacon_id: [u8; 16]) -> Self {
        Self {
            secret,
            beacon_id,
            seen_device_nonces: BTreeSet::new(),
        }
    }

    pub fn beacon_id(&self) -> [u8; 16] {
        self.beacon_id
    }

    pub fn secret(&self) -> &PairingSecret {
        &self.secret
    }

    /// Verifies a pairing request and derives the beacon's session half.
    pub fn respond(
        &mut self,
        request: &PairingRequest,
        beacon_nonce: [u8; 16],
        now_ms: u64,
    ) -> Result<(PairingResponse, SessionKeys), WireError> {
        if !hmac_verify(
            &self.secret.secret,
            &[
                b"pair-request",
                self.secret.environment_id.as_bytes(),
                &request.device_id,
                &request.device_nonce,
            ],
            &request.proof,
        ) {
            return Err(WireError::PairingRejected("bad request proof"));
        }
        if !self
            .seen_device_nonces
            .insert((request.device_id, request.device_nonce))
        {
            return Err(WireError::PairingRejected("replayed device nonce"));
        }

        let response = PairingResponse {
            beacon_id: self.beacon_id,
            beacon_nonce,
            proof: response_proof(&self.secret, request, &self.beacon_id, &beacon_nonce),
        };
        let (key, init_prefix, resp_prefix) = derive_session_material(
            &self.secret.secret,
            PAIRING_SESSION_LABEL,
            &request.device_id,
            &request.device_nonce,
            &self.beacon_id,
            &beacon_nonce,
        );
        let session = SessionKeys::from_material(
            key,
            init_prefix,
            resp_prefix,
            self.beacon_id,
            request.device_id,
            now_ms,
            false,
        );
        Ok((response, session))
    }
}

/// Device-side completion: verifies the beacon's proof and derives the
/// matching session half.
pub fn complete_pairing(
    secret: &PairingSecret,
    request: &PairingRequest,
    response: &PairingResponse,
    now_ms: u64,
) -> Result<SessionKeys, WireError> {
    if !hmac_verify(
        &secret.secret,
        &[
            b"pair-response",
            secret.environment_id.as_bytes(),
            &request.device_id,
            &request.device_nonce,
            &response.beacon_id,
            &response.beacon_nonce,
        ],
        &response.proof,
    ) {
        return Err(WireError::PairingRejected("bad response proof"));
    }
    let (key, init_prefix, resp_prefix) = derive_session_material(
        &secret.secret,
        PAIRING_SESSION_LABEL,
        &request.device_id,
        &request.device_nonce,
        &response.beacon_id,
        &response.beacon_nonce,
    );
    Ok(SessionKeys::from_material(
        key,
        init_prefix,
        resp_prefix,
        request.device_id,
        response.beacon_id,
        now_ms,
        true,
    ))
}
