//! Detection transport: wire codec, per-camera synchronization, recorded logs
//! and TCP ingestion.

mod detlog;
mod live;
mod sync;
mod wire;

use crate::fusion::Detection2D;

pub use detlog::{read_detlog, DetlogError, DetlogReader, DetlogWriter, Replay, DETLOG_MAGIC};
pub use live::{send_messages, LiveOptions, LiveServer, LiveStats, DEFAULT_QUEUE_CAPACITY, DEFAULT_STALL_TIMEOUT};
pub use sync::{synchronize, FrameBundle, SyncStats, Synchronizer, DEFAULT_SYNC_WINDOW_US};
pub use wire::{
    body_len, decode_body, decode_message, decode_prefix, encode_message, FrameReader, WireError, MAX_BODY_LEN,
    MAX_CAMERA_ID_LEN, PROTOCOL_VERSION,
};

/// Detections of one camera frame.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionMessage {
    pub camera_id: String,
    /// Strictly increasing per camera.
    pub frame_index: u64,
    /// Microseconds since the Unix epoch.
    pub timestamp_us: u64,
    pub detections: Vec<Detection2D>,
}
