//! Recorded detection logs (`.detlog`).
//!
//! An 8-byte magic `ASMDLOG1` followed by records, each a `u8` tag length, the
//! camera tag and one encoded frame as sent on the wire.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::sync::{FrameBundle, SyncStats, Synchronizer};
use super::wire::{decode_body, encode_message, WireError, MAX_BODY_LEN};
use super::DetectionMessage;

pub const DETLOG_MAGIC: &[u8; 8] = b"ASMDLOG1";

#[derive(Debug, Error)]
pub enum DetlogError {
    #[error("corrupt record at byte {offset}: {message}")]
    Corrupt { offset: u64, message: String },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub struct DetlogWriter<W: Write> {
    inner: W,
}

impl DetlogWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self, DetlogError> {
        DetlogWriter::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> DetlogWriter<W> {
    pub fn new(mut inner: W) -> Result<Self, DetlogError> {
        inner.write_all(DETLOG_MAGIC)?;
        Ok(DetlogWriter { inner })
    }

    /// Appends one message tagged with its camera id.
    pub fn write(&mut self, m: &DetectionMessage) -> Result<(), DetlogError> {
        let frame = encode_message(m)?;
        self.inner.write_all(&[m.camera_id.len() as u8])?;
        self.inner.write_all(m.camera_id.as_bytes())?;
        self.inner.write_all(&frame)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, DetlogError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Sequential record reader.
pub struct DetlogReader<R> {
    inner: R,
    offset: u64,
    body: Vec<u8>,
}

impl DetlogReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self, DetlogError> {
        DetlogReader::new(BufReader::with_capacity(1 << 20, File::open(path)?))
    }
}

impl<R: Read> DetlogReader<R> {
    pub fn new(mut inner: R) -> Result<Self, DetlogError> {
        let mut magic = [0u8; 8];
        let got = read_full(&mut inner, &mut magic)?;
        if got != magic.len() || &magic != DETLOG_MAGIC {
            return Err(DetlogError::Corrupt {
                offset: 0,
                message: "missing detlog header".into(),
            });
        }
        Ok(DetlogReader {
            inner,
            offset: magic.len() as u64,
            body: Vec::new(),
        })
    }

    /// Byte offset of the next record.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// `Ok(None)` at a clean end of file.
    pub fn next_record(&mut self) -> Result<Option<DetectionMessage>, DetlogError> {
        let start = self.offset;
        let corrupt = |message: String| DetlogError::Corrupt { offset: start, message };
        let mut tag_len = [0u8; 1];
        if read_full(&mut self.inner, &mut tag_len)? == 0 {
            return Ok(None);
        }
        let mut tag = vec![0u8; tag_len[0] as usize];
        let mut prefix = [0u8; 4];
        if read_full(&mut self.inner, &mut tag)? < tag.len() || read_full(&mut self.inner, &mut prefix)? < 4 {
            return Err(corrupt("record is truncated".into()));
        }
        let len = u32::from_be_bytes(prefix) as usize;
        if len > MAX_BODY_LEN {
            return Err(corrupt(format!("frame length {len} exceeds the limit")));
        }
        self.body.resize(len, 0);
        if read_full(&mut self.inner, &mut self.body)? < len {
            return Err(corrupt("record is truncated".into()));
        }
        let m = decode_body(&self.body).map_err(|e| corrupt(e.to_string()))?;
        if m.camera_id.as_bytes() != tag.as_slice() {
            return Err(corrupt(format!(
                "tag `{}` does not match camera `{}`",
                String::from_utf8_lossy(&tag),
                m.camera_id
            )));
        }
        self.offset += (1 + tag.len() + 4 + len) as u64;
        Ok(Some(m))
    }
}

impl<R: Read> Iterator for DetlogReader<R> {
    type Item = Result<DetectionMessage, DetlogError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(n)
}

/// Bundles of a recorded log, paced at `speed` times the recorded rate
/// (`speed <= 0` replays as fast as possible). Stops after the first error.
pub struct Replay<R> {
    reader: DetlogReader<R>,
    sync: Synchronizer,
    ready: std::collections::VecDeque<FrameBundle>,
    speed: f64,
    clock: Option<(Instant, u64)>,
    done: bool,
}

impl Replay<BufReader<File>> {
    pub fn open(path: &Path, cameras: Vec<String>, window_us: u64, speed: f64) -> Result<Self, DetlogError> {
        Ok(Replay::new(DetlogReader::open(path)?, cameras, window_us, speed))
    }
}

impl<R: Read> Replay<R> {
    pub fn new(reader: DetlogReader<R>, cameras: Vec<String>, window_us: u64, speed: f64) -> Self {
        Replay {
            reader,
            sync: Synchronizer::new(cameras, window_us),
            ready: Default::default(),
            speed,
            clock: None,
            done: false,
        }
    }

    pub fn stats(&self) -> SyncStats {
        self.sync.stats()
    }

    fn pace(&mut self, bundle_time: u64) {
        if self.speed <= 0.0 || !self.speed.is_finite() {
            return;
        }
        let (start, t0) = *self.clock.get_or_insert((Instant::now(), bundle_time));
        let due = Duration::from_secs_f64(bundle_time.saturating_sub(t0) as f64 / 1e6 / self.speed);
        let elapsed = start.elapsed();
        if due > elapsed {
            std::thread::sleep(due - elapsed);
        }
    }
}

impl<R: Read> Iterator for Replay<R> {
    type Item = Result<FrameBundle, DetlogError>;

    fn next(&mut self) -> Option<Self::Item> {
        while self.ready.is_empty() && !self.done {
            match self.reader.next_record() {
                Ok(Some(m)) => self.ready.extend(self.sync.push(m)),
                Ok(None) => {
                    self.ready.extend(self.sync.finish());
                    self.done = true;
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
        let b = self.ready.pop_front()?;
        self.pace(b.bundle_time);
        Some(Ok(b))
    }
}

/// All messages of a log, in file order.
pub fn read_detlog(path: &Path) -> Result<Vec<DetectionMessage>, DetlogError> {
    DetlogReader::open(path)?.collect()
}
