//! Store queries and their sealed-frame transport.
//!
//! A console pairs with the hub through the QR-code flow, then sends one
//! TOML-encoded request per control frame and reads one sealed answer back.
//! [`Hub::serve`] is the pure core; everything else is framing.

use atlas_core::codec;
use atlas_core::{HashedUserId, LocationRecord};
use atlas_wire::{MsgType, SecureFrame, SessionKeys};
use serde::{Deserialize, Serialize};

use crate::hub::Hub;
use crate::store::Contact;
use crate::HubError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ApiRequest {
    /// Every stored record of one user, oldest first.
    Track { user: HashedUserId },
    /// Who shared an area with the user, record by record.
    ContactTrace { user: HashedUserId },
    /// Map and store health.
    Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ApiResponse {
    Track {
        records: Vec<LocationRecord>,
    },
    Contacts {
        contacts: Vec<Contact>,
    },
    Status {
        live: bool,
        record_count: usize,
        reference_points: usize,
    },
}

impl Hub {
    /// Answers a query from the store. Read-only.
    pub fn serve(&self, request: &ApiRequest) -> ApiResponse {
        match request {
            ApiRequest::Track { user } => ApiResponse::Track {
                records: self.store().track(user),
            },
            ApiRequest::ContactTrace { user } => ApiResponse::Contacts {
                contacts: self.store().contact_trace(user),
            },
            ApiRequest::Status => ApiResponse::Status {
                live: self.is_live(),
                record_count: self.store().len(),
                reference_points: self.map().map_or(0, |m| m.points.len()),
            },
        }
    }

    /// Opens a sealed request from a paired console and seals the answer on
    /// the same session.
    pub fn answer(&mut self, frame_bytes: &[u8]) -> Result<Vec<u8>, HubError> {
        let frame = SecureFrame::decode(frame_bytes)?;
        let request = {
            let session = self
                .operators
                .get_mut(&frame.sender_id)
                .ok_or_else(|| HubError::UnknownPeer(hex::encode(frame.sender_id)))?;
            let (msg_type, payload) = session.open(&frame)?;
            if msg_type != MsgType::Control {
                return Err(HubError::BadRequest("queries travel as control frames"));
            }
            let text = String::from_utf8(payload)
                .map_err(|_| HubError::BadRequest("query is not utf-8"))?;
            codec::from_toml::<ApiRequest>(&text)?
        };
        let response = self.serve(&request);
        let reply = codec::to_toml(&response)?;
        let session = self
            .operators
            .get_mut(&frame.sender_id)
            .expect("session found above");
        Ok(session.seal(MsgType::Control, reply.as_bytes())?.encode())
    }
}

/// Seals a query on the console's session.
pub fn seal_request(session: &mut SessionKeys, request: &ApiRequest) -> Result<Vec<u8>, HubError> {
    let text = codec::to_toml(request)?;
    Ok(session.seal(MsgType::Control, text.as_bytes())?.encode())
}

/// Opens the hub's sealed answer on the console's session.
pub fn open_response(session: &mut SessionKeys, bytes: &[u8]) -> Result<ApiResponse, HubError> {
    let frame = SecureFrame::decode(bytes)?;
    let (msg_type, payload) = session.open(&frame)?;
    if msg_type != MsgType::Control {
        return Err(HubError::BadRequest("answer did not arrive as a control frame"));
    }
    let text =
        String::from_utf8(payload).map_err(|_| HubError::BadRequest("answer is not utf-8"))?;
    Ok(codec::from_toml(&text)?)
}

#[cfg(test)]
mod tests {
    use atlas_core::{hash_user_id, Area, Environment, Rect, ReferencePointId};
    use atlas_wire::{complete_pairing, pairing_request, PairingResponse, PairingSecret};

    use super::*;
    use crate::hub::HubConfig;

    fn salt() -> Vec<u8> {
        vec![0x42; 16]
    }

    fn small_hub() -> Hub {
        let env = Environment {
            id: "api-test".into(),
            bounds: Rect::new(0.0, 0.0, 10.0, 10.0),
            areas: vec![Area {
                name: "room".into(),
                floor: 0,
                rect: Rect::new(0.0, 0.0, 10.0, 10.0),
            }],
            walls: vec![],
            beacons: vec![],
        };
        Hub::new(env, salt(), HubConfig::default(), 3).unwrap()
    }

    fn uid(n: u8) -> HashedUserId {
        hash_user_id(&[n], &salt()).unwrap()
    }

    fn record(user: HashedUserId, area: &str, ts: u64) -> LocationRecord {
        LocationRecord::new(user, area, ReferencePointId::new("rp-000"), 0.9, ts).unwrap()
    }

    fn paired_console(hub: &mut Hub, console_seed: u8) -> SessionKeys {
        let secret = PairingSecret::from_qr_string(&hub.pairing_qr()).unwrap();
        let console_id = hash_user_id(&[console_seed], &salt()).unwrap().wire_id();
        let request = pairing_request(&secret, console_id, [console_seed; 16]);
        let response_bytes = hub.pair_operator(&request.encode(), 0).unwrap();
        let response = PairingResponse::decode(&response_bytes).unwrap();
        complete_pairing(&secret, &request, &response, 0).unwrap()
    }

    #[test]
    fn requests_round_trip_as_toml() {
        for request in [
            ApiRequest::Track { user: uid(1) },
            ApiRequest::ContactTrace { user: uid(2) },
            ApiRequest::Status,
        ] {
            let text = codec::to_toml(&request).unwrap();
            assert_eq!(codec::from_toml::<ApiRequest>(&text).unwrap(), request);
        }
    }

    #[test]
    fn responses_round_trip_as_toml() {
        let responses = [
            ApiResponse::Track {
                records: vec![record(uid(1), "room", 100)],
            },
            ApiResponse::Contacts {
                contacts: vec![Contact {
                    other: uid(2),
                    area: "room".into(),
                    timestamp: 100,
                }],
            },
            ApiResponse::Contacts { contacts: vec![] },
            ApiResponse::Status {
                live: false,
                record_count: 3,
                reference_points: 0,
            },
        ];
        for response in responses {
            let text = codec::to_toml(&response).unwrap();
            assert_eq!(codec::from_toml::<ApiResponse>(&text).unwrap(), response);
        }
    }

    #[test]
    fn a_paired_console_queries_over_sealed_frames() {
        let mut hub = small_hub();
        hub.store_mut().append([
            record(uid(1), "room", 100),
            record(uid(2), "room", 100),
            record(uid(1), "room", 200),
        ]);
        let mut console = paired_console(&mut hub, 7);

        let sealed = seal_request(&mut console, &ApiRequest::Track { user: uid(1) }).unwrap();
        let answer = hub.answer(&sealed).unwrap();
        match open_response(&mut console, &answer).unwrap() {
            ApiResponse::Track { records } => {
                assert_eq!(records, hub.store().track(&uid(1)));
                assert_eq!(records.len(), 2);
            }
            other => panic!("expected a track answer, got {other:?}"),
        }

        let sealed =
            seal_request(&mut console, &ApiRequest::ContactTrace { user: uid(1) }).unwrap();
        let answer = hub.answer(&sealed).unwrap();
        match open_response(&mut console, &answer).unwrap() {
            ApiResponse::Contacts { contacts } => {
                assert_eq!(contacts.len(), 1);
                assert_eq!(contacts[0].other, uid(2));
            }
            other => panic!("expected contacts, got {other:?}"),
        }

        let sealed = seal_request(&mut console, &ApiRequest::Status).unwrap();
        let answer = hub.answer(&sealed).unwrap();
        assert_eq!(
            open_response(&mut console, &answer).unwrap(),
            ApiResponse::Status {
                live: false,
                record_count: 3,
                reference_points: 0,
            }
        );
    }

    #[test]
    fn unpaired_consoles_are_refused() {
        let mut hub = small_hub();
        let mut stray = {
            let mut other = small_hub();
            paired_console(&mut other, 9)
        };
        let sealed = seal_request(&mut stray, &ApiRequest::Status).unwrap();
        assert!(matches!(
            hub.answer(&sealed).unwrap_err(),
            HubError::UnknownPeer(_)
        ));
    }

    #[test]
    fn two_consoles_keep_separate_sessions() {
        let mut hub = small_hub();
        let mut first = paired_console(&mut hub, 1);
        let mut second = paired_console(&mut hub, 2);

        let sealed = seal_request(&mut first, &ApiRequest::Status).unwrap();
        let answer = hub.answer(&sealed).unwrap();
        assert!(open_response(&mut first, &answer).is_ok());

        // The second console cannot read the first console's answer.
        let sealed = seal_request(&mut first, &ApiRequest::Status).unwrap();
        let answer = hub.answer(&sealed).unwrap();
        assert!(open_response(&mut second, &answer).is_err());
    }
}
