//! Grouping of per-camera messages into frame bundles.

use std::collections::{BTreeMap, VecDeque};

use super::DetectionMessage;

pub const DEFAULT_SYNC_WINDOW_US: u64 = 50_000;

/// Messages of different cameras taken at about the same time.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameBundle {
    /// Earliest member timestamp, microseconds.
    pub bundle_time: u64,
    pub per_camera: BTreeMap<String, DetectionMessage>,
    /// Some configured camera has no message in this bundle.
    pub partial: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SyncStats {
    pub bundles: u64,
    pub partial_bundles: u64,
    /// Messages older than the last emitted bundle.
    pub late_dropped: u64,
    /// Messages whose frame index did not increase.
    pub out_of_order_dropped: u64,
    pub unknown_camera_dropped: u64,
}

/// Greedy synchronizer. The earliest queued message opens a bundle; the head
/// messages of the other cameras join it in timestamp order while they lie
/// within `window_us` of the opening message and before the next message of
/// every camera already in the bundle, so no camera's following frame is
/// pulled into the current one.
///
/// A bundle is emitted once every camera has ended or has a queued message,
/// and every camera whose head could join also has its next message queued.
/// The output therefore depends only on each camera's message sequence, not
/// on how the streams interleave. [`Synchronizer::flush_stalled`] forces a
/// bundle when a live camera goes silent.
#[derive(Clone, Debug)]
pub struct Synchronizer {
    cameras: Vec<String>,
    window_us: u64,
    queues: Vec<VecDeque<DetectionMessage>>,
    ended: Vec<bool>,
    last_frame: Vec<Option<u64>>,
    last_bundle_time: Option<u64>,
    stats: SyncStats,
}

impl Synchronizer {
    pub fn new(cameras: Vec<String>, window_us: u64) -> Self {
        let n = cameras.len();
        Synchronizer {
            cameras,
            window_us: window_us.max(1),
            queues: vec![VecDeque::new(); n],
            ended: vec![false; n],
            last_frame: vec![None; n],
            last_bundle_time: None,
            stats: SyncStats::default(),
        }
    }

    pub fn cameras(&self) -> &[String] {
        &self.cameras
    }

    pub fn window_us(&self) -> u64 {
        self.window_us
    }

    pub fn stats(&self) -> SyncStats {
        self.stats
    }

    /// Queued messages over all cameras.
    pub fn pending(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn all_ended(&self) -> bool {
        self.ended.iter().all(|&e| e)
    }

    /// Queues a message and returns the bundles it completes.
    pub fn push(&mut self, m: DetectionMessage) -> Vec<FrameBundle> {
        let Some(c) = self.cameras.iter().position(|id| *id == m.camera_id) else {
            self.stats.unknown_camera_dropped += 1;
            return Vec::new();
        };
        if self.last_frame[c].is_some_and(|last| m.frame_index <= last) {
            self.stats.out_of_order_dropped += 1;
            return Vec::new();
        }
        self.last_frame[c] = Some(m.frame_index);
        if self.ended[c] || self.last_bundle_time.is_some_and(|t| m.timestamp_us < t) {
            self.stats.late_dropped += 1;
            return Vec::new();
        }
        self.queues[c].push_back(m);
        self.drain(false)
    }

    /// Marks a camera as finished; its remaining queue still takes part.
    pub fn end_camera(&mut self, camera_id: &str) -> Vec<FrameBundle> {
        if let Some(c) = self.cameras.iter().position(|id| id == camera_id) {
            self.ended[c] = true;
        }
        self.drain(false)
    }

    /// Ends every camera and emits everything still queued.
    pub fn finish(&mut self) -> Vec<FrameBundle> {
        self.ended.iter_mut().for_each(|e| *e = true);
        self.drain(false)
    }

    /// Emits one bundle from whatever is queued, treating silent cameras as
    /// absent.
    pub fn flush_stalled(&mut self) -> Option<FrameBundle> {
        let mut out = self.drain(true);
        debug_assert!(out.len() <= 1);
        out.pop()
    }

    fn opening_time(&self) -> Option<u64> {
        self.queues
            .iter()
            .filter_map(|q| q.front())
            .map(|m| m.timestamp_us)
            .min()
    }

    fn ready(&self) -> bool {
        let Some(t0) = self.opening_time() else {
            return false;
        };
        self.queues.iter().zip(&self.ended).all(|(q, &ended)| {
            ended
                || match q.front() {
                    None => false,
                    Some(head) => head.timestamp_us - t0 > self.window_us || q.len() >= 2,
                }
        })
    }

    fn drain(&mut self, force_one: bool) -> Vec<FrameBundle> {
        let mut out = Vec::new();
        loop {
            let forced = force_one && out.is_empty();
            if !(forced || self.ready()) {
                break;
            }
            let Some(t0) = self.opening_time() else {
                break;
            };
            let mut heads: Vec<(u64, usize)> = self
                .queues
                .iter()
                .enumerate()
                .filter_map(|(c, q)| q.front().map(|m| (m.timestamp_us, c)))
                .collect();
            heads.sort_unstable();
            let mut bound = u64::MAX;
            let mut per_camera = BTreeMap::new();
            for (ts, c) in heads {
                if ts - t0 > self.window_us || ts >= bound {
                    break;
                }
                let m = self.queues[c].pop_front().expect("head exists");
                if let Some(next) = self.queues[c].front() {
                    bound = bound.min(next.timestamp_us);
                }
                per_camera.insert(m.camera_id.clone(), m);
            }
            let partial = per_camera.len() < self.cameras.len();
            self.stats.bundles += 1;
            self.stats.partial_bundles += u64::from(partial);
            self.last_bundle_time = Some(t0);
            out.push(FrameBundle {
                bundle_time: t0,
                per_camera,
                partial,
            });
            if forced {
                break;
            }
        }
        out
    }
}

/// Offline synchronization of complete per-camera sequences.
pub fn synchronize(streams: &[(String, Vec<DetectionMessage>)], window_us: u64) -> (Vec<FrameBundle>, SyncStats) {
    let mut sync = Synchronizer::new(streams.iter().map(|(id, _)| id.clone()).collect(), window_us);
    let mut out = Vec::new();
    for (_, msgs) in streams {
        for m in msgs {
            out.extend(sync.push(m.clone()));
        }
    }
    out.extend(sync.finish());
    (out, sync.stats())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(cam: &str, frame: u64, ts: u64) -> DetectionMessage {
        DetectionMessage {
            camera_id: cam.into(),
            frame_index: frame,
            timestamp_us: ts,
            detections: Vec::new(),
        }
    }

    fn stream(cam: &str, offset: u64, n: u64) -> (String, Vec<DetectionMessage>) {
        (cam.into(), (0..n).map(|i| msg(cam, i, i * 33_333 + offset)).collect())
    }

    #[test]
    fn identical_timestamps_give_complete_bundles() {
        let streams = vec![stream("a", 0, 10), stream("b", 0, 10), stream("c", 0, 10)];
        let (bundles, stats) = synchronize(&streams, DEFAULT_SYNC_WINDOW_US);
        assert_eq!(bundles.len(), 10);
        assert!(bundles.iter().all(|b| !b.partial && b.per_camera.len() == 3));
        assert_eq!(stats.late_dropped + stats.out_of_order_dropped, 0);
    }

    #[test]
    fn silent_camera_gives_partial_bundles() {
        let streams = vec![stream("a", 0, 5), stream("b", 0, 5), ("c".to_string(), Vec::new())];
        let (bundles, stats) = synchronize(&streams, DEFAULT_SYNC_WINDOW_US);
        assert_eq!(bundles.len(), 5);
        assert!(bundles.iter().all(|b| b.partial));
        assert_eq!(stats.partial_bundles, 5);
    }

    #[test]
    fn live_stall_flush() {
        let mut s = Synchronizer::new(vec!["a".into(), "b".into()], 50_000);
        assert!(s.push(msg("a", 0, 1_000)).is_empty());
        let b = s.flush_stalled().unwrap();
        assert!(b.partial);
        assert_eq!(b.bundle_time, 1_000);
        assert!(s.flush_stalled().is_none());
        // Older than the flushed bundle.
        assert!(s.push(msg("b", 0, 500)).is_empty());
        assert_eq!(s.stats().late_dropped, 1);
    }

    #[test]
    fn late_and_repeated_messages_are_dropped() {
        let mut s = Synchronizer::new(vec!["a".into(), "b".into()], 10);
        s.push(msg("a", 0, 100));
        s.push(msg("b", 0, 100));
        s.push(msg("a", 1, 200));
        let out = s.push(msg("b", 1, 200));
        assert_eq!(out.len(), 1);
        s.push(msg("a", 1, 300));
        assert_eq!(s.stats().out_of_order_dropped, 1);
        s.push(msg("b", 2, 50));
        assert_eq!(s.stats().late_dropped, 1);
        s.push(msg("x", 0, 300));
        assert_eq!(s.stats().unknown_camera_dropped, 1);
    }

    #[test]
    fn next_frame_of_a_member_closes_the_bundle() {
        // "b" joins one frame late with a larger offset; its first frame lies
        // within the window of "a"'s frame 0 but after "a"'s frame 1.
        let mut a = stream("a", 0, 5).1;
        let b: Vec<_> = (1..5).map(|i| msg("b", i, i * 33_333 + 10_000)).collect();
        a.iter_mut().for_each(|m| m.timestamp_us += 1);
        let (bundles, _) = synchronize(&[("a".into(), a), ("b".into(), b)], DEFAULT_SYNC_WINDOW_US);
        assert_eq!(bundles.len(), 5);
        assert_eq!(bundles[0].per_camera.len(), 1);
        for (i, bundle) in bundles.iter().enumerate().skip(1) {
            assert!(bundle.per_camera.values().all(|m| m.frame_index == i as u64));
        }
    }

    #[test]
    fn bundle_times_never_decrease() {
        let streams = vec![stream("a", 0, 50), stream("b", 25_000, 50), stream("c", 12_000, 40)];
        let (bundles, _) = synchronize(&streams, 20_000);
        assert!(bundles.windows(2).all(|w| w[0].bundle_time <= w[1].bundle_time));
        for b in &bundles {
            assert!(b.per_camera.values().all(|m| m.timestamp_us - b.bundle_time <= 20_000));
        }
    }
}
