//! Ground-truth state timelines.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::task::StepId;

/// Frames `[start, end)` spent in `state`, entered through `step` (`None` for
/// the initial state).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    #[serde(rename = "start_frame")]
    pub start: u64,
    #[serde(rename = "end_frame")]
    pub end: u64,
    #[serde(rename = "state_index")]
    pub state: usize,
    #[serde(rename = "step_id")]
    pub step: Option<StepId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundTruthTimeline {
    entries: Vec<TimelineEntry>,
}

impl GroundTruthTimeline {
    /// Entries must be nonempty, contiguous and start at frame 0.
    pub fn new(entries: Vec<TimelineEntry>) -> Result<Self, SimError> {
        let mut next = 0;
        for (i, e) in entries.iter().enumerate() {
            if e.start != next || e.end <= e.start {
                return Err(SimError::InvalidTimeline(format!(
                    "entry {i} covers [{}, {}) but frame {next} is next",
                    e.start, e.end
                )));
            }
            next = e.end;
        }
        Ok(GroundTruthTimeline { entries })
    }

    /// Consecutive states with the given durations.
    pub fn from_durations(states: &[usize], steps: &[StepId], durations: &[u64]) -> Result<Self, SimError> {
        if states.len() != durations.len() || steps.len() + 1 != states.len() {
            return Err(SimError::InvalidTimeline(format!(
                "{} states, {} steps and {} durations do not line up",
                states.len(),
                steps.len(),
                durations.len()
            )));
        }
        let mut start = 0;
        let entries = states
            .iter()
            .zip(durations)
            .enumerate()
            .map(|(i, (&state, &d))| {
                let e = TimelineEntry {
                    start,
                    end: start + d,
                    state,
                    step: i.checked_sub(1).map(|j| steps[j]),
                };
                start += d;
                e
            })
            .collect();
        Self::new(entries)
    }

    pub fn entries(&self) -> &[TimelineEntry] {
        &self.entries
    }

    pub fn total_frames(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.end)
    }

    pub fn state_at(&self, frame: u64) -> Option<usize> {
        let i = self.entries.partition_point(|e| e.end <= frame);
        self.entries.get(i).map(|e| e.state)
    }

    pub fn per_frame(&self) -> Vec<usize> {
        self.entries
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.state, (e.end - e.start) as usize))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.entries {
            w.serialize(e)?;
        }
        if self.entries.is_empty() {
            w.write_record(["start_frame", "end_frame", "state_index", "step_id"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, SimError> {
        let entries: Vec<TimelineEntry> = csv::Reader::from_reader(input)
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| SimError::InvalidTimeline(e.to_string()))?;
        Self::new(entries)
    }
}
