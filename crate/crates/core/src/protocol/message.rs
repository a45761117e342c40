use super::ProtocolError;
use crate::{Micros, NodeId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const STATUS_REPORT_SD_LEN: u32 = 13;
pub const ACK_LEN: u32 = 2;
pub const CASE_REPORT_LEN: u32 = 500;
/// Three 64-bit coordinates.
pub const DEFAULT_WAYPOINT_LEN: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    StatusReportSd,
    StatusReportLd,
    Ack,
    CaseReport,
    MoveToWaypoint,
    VideoFrame,
}

impl MessageKind {
    pub const ALL: [MessageKind; 6] = [
        MessageKind::StatusReportSd,
        MessageKind::StatusReportLd,
        MessageKind::Ack,
        MessageKind::CaseReport,
        MessageKind::MoveToWaypoint,
        MessageKind::VideoFrame,
    ];

    pub fn tag(self) -> u8 {
        match self {
            MessageKind::StatusReportSd => 0x01,
            MessageKind::StatusReportLd => 0x02,
            MessageKind::Ack => 0x03,
            MessageKind::CaseReport => 0x04,
            MessageKind::MoveToWaypoint => 0x05,
            MessageKind::VideoFrame => 0x06,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    /// EDCA access class used on the WLAN.
    pub fn access_class(self) -> AccessClass {
        match self {
            MessageKind::VideoFrame => AccessClass::Video,
            MessageKind::StatusReportSd | MessageKind::StatusReportLd => AccessClass::BestEffort,
            MessageKind::Ack | MessageKind::CaseReport | MessageKind::MoveToWaypoint => {
                AccessClass::Control
            }
        }
    }

    /// Carried on a WiMAX real-time (rtPS) service flow.
    pub fn is_real_time(self) -> bool {
        matches!(self, MessageKind::VideoFrame | MessageKind::CaseReport)
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::StatusReportSd => "status_report_sd",
            MessageKind::StatusReportLd => "status_report_ld",
            MessageKind::Ack => "ack",
            MessageKind::CaseReport => "case_report",
            MessageKind::MoveToWaypoint => "move_to_waypoint",
            MessageKind::VideoFrame => "video_frame",
        }
    }
}

/// Queueing class, highest priority first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessClass {
    Control,
    Video,
    BestEffort,
}

impl AccessClass {
    pub const ALL: [AccessClass; 3] = [AccessClass::Control, AccessClass::Video, AccessClass::BestEffort];

    pub fn priority_index(self) -> usize {
        match self {
            AccessClass::Control => 0,
            AccessClass::Video => 1,
            AccessClass::BestEffort => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AccessClass::Control => "control",
            AccessClass::Video => "video",
            AccessClass::BestEffort => "best_effort",
        }
    }
}

/// Length of the leader's aggregated status report as `base + per_sd * n`.
///
/// The default reads the garbled table entry as the leader's own 12-byte
/// status followed by 12 bytes per slave drone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdStatusFormula {
    pub base: u32,
    pub per_sd: u32,
}

impl Default for LdStatusFormula {
    fn default() -> Self {
        Self { base: 12, per_sd: 12 }
    }
}

impl LdStatusFormula {
    pub fn length(&self, n: u32) -> Result<u32, ProtocolError> {
        if n == 0 {
            return Err(ProtocolError::EmptySwarm);
        }
        Ok(self.base + self.per_sd * n)
    }
}

/// Leader status length for a swarm of `n` slave drones (default formula).
pub fn status_report_ld_length(n: u32) -> Result<u32, ProtocolError> {
    LdStatusFormula::default().length(n)
}

/// Bidirectional video consultation stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoCallSpec {
    pub bandwidth_bps: u64,
    pub frame_rate: u32,
    pub duration: Micros,
}

impl VideoCallSpec {
    pub const BANDWIDTHS: [u64; 3] = [2_000_000, 4_000_000, 6_000_000];
    pub const DEFAULT_FRAME_RATE: u32 = 30;
    pub const DEFAULT_DURATION: Micros = 300 * crate::MICROS_PER_SEC;

    pub fn new(bandwidth_bps: u64) -> Result<Self, ProtocolError> {
        if !Self::BANDWIDTHS.contains(&bandwidth_bps) {
            return Err(ProtocolError::VideoBandwidth(bandwidth_bps));
        }
        Ok(Self {
            bandwidth_bps,
            frame_rate: Self::DEFAULT_FRAME_RATE,
            duration: Self::DEFAULT_DURATION,
        })
    }

    /// Application bytes per frame, rounded up.
    pub fn frame_bytes(&self) -> u32 {
        let bits_per_frame_x8 = 8 * self.frame_rate as u64;
        self.bandwidth_bps.div_ceil(bits_per_frame_x8) as u32
    }

    /// Emission time of frame `k` relative to call start.
    pub fn frame_offset(&self, k: u64) -> Micros {
        k * crate::MICROS_PER_SEC / self.frame_rate as u64
    }

    pub fn frames_in_call(&self) -> u64 {
        self.duration * self.frame_rate as u64 / crate::MICROS_PER_SEC
    }
}

/// Context needed to know each kind's payload length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadRules {
    pub n_sds: u32,
    pub ld_status: LdStatusFormula,
    pub waypoint_len: u32,
    /// Per-frame bytes of the active video profile, if any.
    pub video_frame_len: Option<u32>,
}

impl PayloadRules {
    pub fn new(n_sds: u32) -> Self {
        Self {
            n_sds,
            ld_status: LdStatusFormula::default(),
            waypoint_len: DEFAULT_WAYPOINT_LEN,
            video_frame_len: None,
        }
    }

    pub fn with_video(mut self, call: &VideoCallSpec) -> Self {
        self.video_frame_len = Some(call.frame_bytes());
        self
    }

    pub fn payload_len(&self, kind: MessageKind) -> Result<u32, ProtocolError> {
        match kind {
            MessageKind::StatusReportSd => Ok(STATUS_REPORT_SD_LEN),
            MessageKind::StatusReportLd => self.ld_status.length(self.n_sds),
            MessageKind::Ack => Ok(ACK_LEN),
            MessageKind::CaseReport => Ok(CASE_REPORT_LEN),
            MessageKind::MoveToWaypoint => Ok(self.waypoint_len),
            MessageKind::VideoFrame => self
                .video_frame_len
                .ok_or(ProtocolError::UndefinedLength(kind)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    pub src: NodeId,
    pub dst: NodeId,
    pub payload_len: u32,
    pub seq: u32,
    pub created_at: Micros,
}

impl Message {
    /// Builds a message whose length follows `rules`.
    pub fn new(
        kind: MessageKind,
        src: NodeId,
        dst: NodeId,
        rules: &PayloadRules,
        seq: u32,
        created_at: Micros,
    ) -> Result<Self, ProtocolError> {
        Ok(Self {
            kind,
            src,
            dst,
            payload_len: rules.payload_len(kind)?,
            seq,
            created_at,
        })
    }

    pub fn check_length(&self, rules: &PayloadRules) -> Result<(), ProtocolError> {
        let expected = rules.payload_len(self.kind)?;
        if expected != self.payload_len {
            return Err(ProtocolError::PayloadLength {
                kind: self.kind,
                expected,
                got: self.payload_len,
            });
        }
        Ok(())
    }
}

/// Per-(source, kind) sequence numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeqCounters {
    next: BTreeMap<(NodeId, MessageKind), u32>,
}

impl SeqCounters {
    pub fn next(&mut self, src: NodeId, kind: MessageKind) -> u32 {
        let slot = self.next.entry((src, kind)).or_insert(0);
        let seq = *slot;
        *slot += 1;
        seq
    }

    pub fn peek(&self, src: NodeId, kind: MessageKind) -> u32 {
        self.next.get(&(src, kind)).copied().unwrap_or(0)
    }

    /// Continues `from`'s counter for `kind` under `to`, never moving `to` backwards.
    pub fn carry_over(&mut self, from: NodeId, to: NodeId, kind: MessageKind) {
        let carried = self.peek(from, kind).max(self.peek(to, kind));
        self.next.insert((to, kind), carried);
    }
}
