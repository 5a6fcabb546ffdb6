use serde::Serialize;

use crate::editdist::EditDistanceResult;
use crate::wire::{ChannelStats, FrameType};

const BASE_OT_FRAMES: [FrameType; 3] = [
    FrameType::BaseOtSenderKey,
    FrameType::BaseOtReceiverKeys,
    FrameType::BaseOtCiphertexts,
];

const COMPARISON_FRAMES: [FrameType; 2] = [FrameType::ExtendCorrection, FrameType::ExtendMasked];

/// One database entry's share of a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntryMetrics {
    pub id: String,
    pub target_len: usize,
    /// Client side only; the server never learns outcomes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    pub comparisons: u64,
    pub stripes_executed: u64,
    pub stripes_total: u64,
    pub aborted: bool,
    pub payload_bytes_sent: u64,
    pub payload_bytes_received: u64,
}

/// Time and traffic of one session, from one party's point of view.
///
/// `comparison_payload_bits` counts the logical bits of the extension rounds
/// (κ per comparison one way, n the other) and always equals
/// `comparisons * (kappa + n)`. Frame payloads round the n-bit groups up to
/// whole bytes, so `comparison_frame_bytes * 8` can exceed it by less than a
/// byte per round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionMetrics {
    pub role: &'static str,
    pub duration_s: f64,
    pub kappa: u32,
    pub n: u32,
    pub comparisons: u64,
    pub comparison_payload_bits: u64,
    pub comparison_frame_bytes: u64,
    pub base_ots: u64,
    pub base_ot_payload_bytes: u64,
    pub control_payload_bytes: u64,
    pub payload_bytes: u64,
    pub payload_bytes_sent: u64,
    pub payload_bytes_received: u64,
    pub framed_bytes: u64,
    pub framed_bytes_sent: u64,
    pub framed_bytes_received: u64,
    pub frames: u64,
    pub per_entry: Vec<EntryMetrics>,
}

impl SessionMetrics {
    pub(crate) fn from_stats(
        role: &'static str,
        duration_s: f64,
        kappa: u32,
        n: u32,
        base_ots: u64,
        stats: &ChannelStats,
        per_entry: Vec<EntryMetrics>,
    ) -> Self {
        let both = |ty: FrameType| stats.payload_in_of(ty) + stats.payload_out_of(ty);
        let base_ot_payload_bytes: u64 = BASE_OT_FRAMES.iter().map(|&t| both(t)).sum();
        let comparison_frame_bytes: u64 = COMPARISON_FRAMES.iter().map(|&t| both(t)).sum();
        let payload_bytes = stats.payload_in + stats.payload_out;
        Self {
            role,
            duration_s,
            kappa,
            n,
            comparisons: per_entry.iter().map(|e| e.comparisons).sum(),
            comparison_payload_bits: stats.logical_bits_in + stats.logical_bits_out,
            comparison_frame_bytes,
            base_ots,
            base_ot_payload_bytes,
            control_payload_bytes: payload_bytes - base_ot_payload_bytes - comparison_frame_bytes,
            payload_bytes,
            payload_bytes_sent: stats.payload_out,
            payload_bytes_received: stats.payload_in,
            framed_bytes: stats.framed_in + stats.framed_out,
            framed_bytes_sent: stats.framed_out,
            framed_bytes_received: stats.framed_in,
            frames: stats.frames_in + stats.frames_out,
            per_entry,
        }
    }

    /// `comparisons * (κ + n)`: the bandwidth the comparison phase must use.
    pub fn expected_comparison_bits(&self) -> u64 {
        self.comparisons * (self.kappa as u64 + self.n as u64)
    }

    /// Whether the measured comparison payload matches the per-comparison
    /// budget exactly.
    pub fn satisfies_bandwidth_identity(&self) -> bool {
        self.comparison_payload_bits == self.expected_comparison_bits()
            && self.comparison_frame_bytes * 8 >= self.comparison_payload_bits
            && self.framed_bytes >= self.payload_bytes
    }
}

pub(crate) fn outcome_label(r: EditDistanceResult) -> String {
    r.to_string()
}
