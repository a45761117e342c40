//! Swarm message types, payload lengths, the wire codec and the periodic
//! traffic generators.

mod codec;
mod fragment;
mod message;
mod traffic;

pub use codec::{decode_message, encode_message, HEADER_LEN};
pub use fragment::fragment_payload;
pub use message::{
    status_report_ld_length, AccessClass, LdStatusFormula, Message, MessageKind, PayloadRules,
    SeqCounters, VideoCallSpec, ACK_LEN, CASE_REPORT_LEN, DEFAULT_WAYPOINT_LEN,
    STATUS_REPORT_SD_LEN,
};
pub use traffic::{
    first_send_offset, generate_profile_traffic, Flow, FlowEnd, FlowRate, Phasing, SendEvent,
    TrafficProfile, Window, LD_STATUS_PERIOD, SD_STATUS_PERIOD, WAYPOINT_PERIOD,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("swarm must contain at least one slave drone")]
    EmptySwarm,
    #[error("{kind:?} payload must be {expected} bytes, got {got}")]
    PayloadLength {
        kind: MessageKind,
        expected: u32,
        got: u32,
    },
    #[error("no payload length defined for {0:?} under the current rules")]
    UndefinedLength(MessageKind),
    #[error("truncated message: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("unknown message kind tag {0:#04x}")]
    UnknownKind(u8),
    #[error("reserved header byte must be zero, got {0:#04x}")]
    Reserved(u8),
    #[error("{extra} trailing bytes after {kind:?} payload")]
    TrailingBytes { kind: MessageKind, extra: usize },
    #[error("MTU {mtu} does not exceed the {header}-byte header")]
    MtuTooSmall { mtu: u32, header: u32 },
    #[error("unknown traffic profile id {0}")]
    UnknownProfile(u8),
    #[error("empty or inverted window [{0}, {1}]")]
    BadWindow(u64, u64),
    #[error("video bandwidth {0} bit/s is not one of 2, 4 or 6 Mbit/s")]
    VideoBandwidth(u64),
}
