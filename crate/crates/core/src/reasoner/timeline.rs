//! Per-frame timeline CSV.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub const TIMELINE_HEADER: [&str; 6] = [
    "frame",
    "timestamp",
    "state_index",
    "belief",
    "map_state",
    "warning_flag",
];

/// One monitored frame. `state_index` is the Viterbi path entry, `belief` its
/// probability at the time the frame was processed and `map_state` the online
/// argmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub frame: u64,
    /// Microseconds.
    pub timestamp: u64,
    pub state_index: usize,
    pub belief: f64,
    pub map_state: usize,
    pub warning_flag: u8,
}

pub fn write_timeline_csv<W: Write>(out: W, rows: &[TimelineRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(TIMELINE_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_timeline_csv<R: Read>(input: R) -> Result<Vec<TimelineRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}
