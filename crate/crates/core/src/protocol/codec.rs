//! Wire layout: an 8-byte header followed by `payload_len` bytes.
//!
//! ```text
//! 0      1      2      3             7          8
//! +------+------+------+-------------+----------+----------------+
//! | kind | src  | dst  | seq (u32 BE)| reserved | payload ...    |
//! +------+------+------+-------------+----------+----------------+
//! ```
//!
//! The header carries no length field: the payload length is implied by the
//! kind and the active [`PayloadRules`]. Payload contents are not modeled and
//! are written as zeros. Creation time is simulator metadata and is not
//! transmitted, so decoded messages carry `created_at = 0`.

use super::{Message, MessageKind, PayloadRules, ProtocolError};
use crate::NodeId;

pub const HEADER_LEN: usize = 8;

pub fn encode_message(m: &Message, rules: &PayloadRules) -> Result<Vec<u8>, ProtocolError> {
    m.check_length(rules)?;
    let mut out = Vec::with_capacity(HEADER_LEN + m.payload_len as usize);
    out.push(m.kind.tag());
    out.push(m.src.0);
    out.push(m.dst.0);
    out.extend_from_slice(&m.seq.to_be_bytes());
    out.push(0);
    out.resize(HEADER_LEN + m.payload_len as usize, 0);
    Ok(out)
}

pub fn decode_message(bytes: &[u8], rules: &PayloadRules) -> Result<Message, ProtocolError> {
    if bytes.len() < HEADER_LEN {
        return Err(ProtocolError::Truncated {
            needed: HEADER_LEN,
            have: bytes.len(),
        });
    }
    let kind = MessageKind::from_tag(bytes[0]).ok_or(ProtocolError::UnknownKind(bytes[0]))?;
    if bytes[7] != 0 {
        return Err(ProtocolError::Reserved(bytes[7]));
    }
    let payload_len = rules.payload_len(kind)?;
    let needed = HEADER_LEN + payload_len as usize;
    if bytes.len() < needed {
        return Err(ProtocolError::Truncated {
            needed,
            have: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(ProtocolError::TrailingBytes {
            kind,
            extra: bytes.len() - needed,
        });
    }
    Ok(Message {
        kind,
        src: NodeId(bytes[1]),
        dst: NodeId(bytes[2]),
        payload_len,
        seq: u32::from_be_bytes([bytes[3], bytes[4], bytes[5], bytes[6]]),
        created_at: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::VideoCallSpec;

    fn msg(kind: MessageKind, rules: &PayloadRules) -> Message {
        Message::new(kind, NodeId(3), NodeId(0), rules, 7, 0).unwrap()
    }

    #[test]
    fn encoded_lengths() {
        let rules = PayloadRules::new(10);
        assert_eq!(encode_message(&msg(MessageKind::Ack, &rules), &rules).unwrap().len(), 10);
        assert_eq!(
            encode_message(&msg(MessageKind::StatusReportSd, &rules), &rules).unwrap().len(),
            21
        );
        assert_eq!(
            encode_message(&msg(MessageKind::CaseReport, &rules), &rules).unwrap().len(),
            508
        );
        assert_eq!(
            encode_message(&msg(MessageKind::StatusReportLd, &rules), &rules).unwrap().len(),
            140
        );
    }

    #[test]
    fn inconsistent_payload_rejected() {
        let rules = PayloadRules::new(10);
        let mut m = msg(MessageKind::Ack, &rules);
        m.payload_len = 3;
        assert!(matches!(
            encode_message(&m, &rules),
            Err(ProtocolError::PayloadLength { expected: 2, got: 3, .. })
        ));
    }

    #[test]
    fn video_needs_a_profile() {
        let rules = PayloadRules::new(2);
        assert!(Message::new(MessageKind::VideoFrame, NodeId(1), NodeId(0), &rules, 0, 0).is_err());
        let rules = rules.with_video(&VideoCallSpec::new(2_000_000).unwrap());
        let m = msg(MessageKind::VideoFrame, &rules);
        assert_eq!(encode_message(&m, &rules).unwrap().len(), 8 + 8334);
    }

    #[test]
    fn decode_errors() {
        let rules = PayloadRules::new(4);
        assert!(matches!(decode_message(&[], &rules), Err(ProtocolError::Truncated { .. })));
        // Case-report header (implies 500 bytes) followed by only 3 bytes.
        let mut b = vec![MessageKind::CaseReport.tag(), 1, 0, 0, 0, 0, 1, 0];
        b.extend_from_slice(&[0, 0, 0]);
        assert_eq!(
            decode_message(&b, &rules),
            Err(ProtocolError::Truncated { needed: 508, have: 11 })
        );
        let b = [0x7f, 1, 0, 0, 0, 0, 1, 0, 0, 0];
        assert_eq!(decode_message(&b, &rules), Err(ProtocolError::UnknownKind(0x7f)));
        let b = [MessageKind::Ack.tag(), 1, 0, 0, 0, 0, 1, 0, 0, 0, 0];
        assert!(matches!(decode_message(&b, &rules), Err(ProtocolError::TrailingBytes { extra: 1, .. })));
        let b = [MessageKind::Ack.tag(), 1, 0, 0, 0, 0, 1, 9, 0, 0];
        assert_eq!(decode_message(&b, &rules), Err(ProtocolError::Reserved(9)));
    }

    #[test]
    fn round_trip() {
        let rules = PayloadRules::new(5);
        let m = Message::new(MessageKind::StatusReportLd, NodeId(0), NodeId::DMC, &rules, 0xdead_beef, 0)
            .unwrap();
        assert_eq!(decode_message(&encode_message(&m, &rules).unwrap(), &rules), Ok(m));
    }
}
