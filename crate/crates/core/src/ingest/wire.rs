//! Length-prefixed binary encoding of detection messages.
//!
//! ```text
//! u32 body_length
//! body:
//!   u8  version
//!   u8  camera_id length, camera_id bytes (UTF-8)
//!   u64 frame_index
//!   u64 timestamp (microseconds)
//!   u32 detection count
//!   per detection:
//!     u32 class_id
//!     f32 bbox x, y, w, h
//!     f32 confidence
//!     u32 depth sample count
//!     per sample: f32 u, v, depth
//! ```
//!
//! Integers are big-endian, floats IEEE-754 binary32 big-endian.

use std::io::{self, Read};

use thiserror::Error;

use super::DetectionMessage;
use crate::fusion::{BBox, DepthSample, Detection2D};

pub const PROTOCOL_VERSION: u8 = 1;
pub const MAX_BODY_LEN: usize = 16 * 1024 * 1024;
pub const MAX_CAMERA_ID_LEN: usize = 32;
const HEADER_LEN: usize = 1 + 1 + 8 + 8 + 4;
const DETECTION_LEN: usize = 4 + 5 * 4 + 4;
const SAMPLE_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("unsupported protocol version {found} (expected {PROTOCOL_VERSION})")]
    VersionMismatch { found: u8 },
    #[error("frame body of {length} bytes exceeds the {MAX_BODY_LEN}-byte limit")]
    LengthOverflow { length: usize },
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Size of the body `m` encodes to.
pub fn body_len(m: &DetectionMessage) -> usize {
    HEADER_LEN
        + m.camera_id.len()
        + m.detections
            .iter()
            .map(|d| DETECTION_LEN + SAMPLE_LEN * d.depth_samples.len())
            .sum::<usize>()
}

pub fn encode_message(m: &DetectionMessage) -> Result<Vec<u8>, WireError> {
    if m.camera_id.is_empty() || m.camera_id.len() > MAX_CAMERA_ID_LEN {
        return Err(WireError::Malformed(format!(
            "camera id must be 1..={MAX_CAMERA_ID_LEN} bytes, got {}",
            m.camera_id.len()
        )));
    }
    let len = body_len(m);
    if len > MAX_BODY_LEN {
        return Err(WireError::LengthOverflow { length: len });
    }
    let mut out = Vec::with_capacity(4 + len);
    out.extend_from_slice(&(len as u32).to_be_bytes());
    out.push(PROTOCOL_VERSION);
    out.push(m.camera_id.len() as u8);
    out.extend_from_slice(m.camera_id.as_bytes());
    out.extend_from_slice(&m.frame_index.to_be_bytes());
    out.extend_from_slice(&m.timestamp_us.to_be_bytes());
    out.extend_from_slice(&(m.detections.len() as u32).to_be_bytes());
    for d in &m.detections {
        out.extend_from_slice(&d.class_id.to_be_bytes());
        for f in [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.confidence] {
            out.extend_from_slice(&f.to_be_bytes());
        }
        out.extend_from_slice(&(d.depth_samples.len() as u32).to_be_bytes());
        for s in &d.depth_samples {
            for f in [s.u, s.v, s.depth] {
                out.extend_from_slice(&f.to_be_bytes());
            }
        }
    }
    debug_assert_eq!(out.len(), 4 + len);
    Ok(out)
}

/// Decodes one complete frame; trailing bytes are an error.
pub fn decode_message(bytes: &[u8]) -> Result<DetectionMessage, WireError> {
    let (m, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        return Err(WireError::Malformed(format!(
            "{} bytes after the frame",
            bytes.len() - used
        )));
    }
    Ok(m)
}

/// Decodes the frame at the start of `bytes`, returning it with the number of
/// bytes consumed.
pub fn decode_prefix(bytes: &[u8]) -> Result<(DetectionMessage, usize), WireError> {
    if bytes.len() < 4 {
        return Err(WireError::Truncated {
            needed: 4,
            available: bytes.len(),
        });
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    if len > MAX_BODY_LEN {
        return Err(WireError::LengthOverflow { length: len });
    }
    if bytes.len() < 4 + len {
        return Err(WireError::Truncated {
            needed: 4 + len,
            available: bytes.len(),
        });
    }
    Ok((decode_body(&bytes[4..4 + len])?, 4 + len))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(WireError::Malformed(format!(
                "body ends at byte {} but {} more are declared",
                self.buf.len(),
                n - (self.buf.len() - self.pos)
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32, WireError> {
        Ok(f32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Decodes a frame body (without the length prefix).
pub fn decode_body(body: &[u8]) -> Result<DetectionMessage, WireError> {
    let mut c = Cursor { buf: body, pos: 0 };
    let version = c.u8().map_err(|_| WireError::Malformed("empty body".into()))?;
    if version != PROTOCOL_VERSION {
        return Err(WireError::VersionMismatch { found: version });
    }
    let id_len = c.u8()? as usize;
    if id_len == 0 || id_len > MAX_CAMERA_ID_LEN {
        return Err(WireError::Malformed(format!("camera id length {id_len}")));
    }
    let camera_id = std::str::from_utf8(c.take(id_len)?)
        .map_err(|_| WireError::Malformed("camera id is not UTF-8".into()))?
        .to_string();
    let frame_index = c.u64()?;
    let timestamp_us = c.u64()?;
    let count = c.u32()? as usize;
    if count > c.remaining() / DETECTION_LEN {
        return Err(WireError::Malformed(format!("{count} detections do not fit the body")));
    }
    let mut detections = Vec::with_capacity(count);
    for _ in 0..count {
        let class_id = c.u32()?;
        let bbox = BBox {
            x: c.f32()?,
            y: c.f32()?,
            w: c.f32()?,
            h: c.f32()?,
        };
        let confidence = c.f32()?;
        let n = c.u32()? as usize;
        if n > c.remaining() / SAMPLE_LEN {
            return Err(WireError::Malformed(format!("{n} depth samples do not fit the body")));
        }
        let mut depth_samples = Vec::with_capacity(n);
        for _ in 0..n {
            depth_samples.push(DepthSample {
                u: c.f32()?,
                v: c.f32()?,
                depth: c.f32()?,
            });
        }
        detections.push(Detection2D {
            class_id,
            bbox,
            confidence,
            depth_samples,
        });
    }
    if c.remaining() != 0 {
        return Err(WireError::Malformed(format!("{} unused bytes in body", c.remaining())));
    }
    Ok(DetectionMessage {
        camera_id,
        frame_index,
        timestamp_us,
        detections,
    })
}

/// Reads frames from a byte stream. Every error except truncation and I/O
/// failures leaves the stream at the next frame boundary.
pub struct FrameReader<R> {
    inner: R,
    body: Vec<u8>,
    offset: u64,
}

impl<R: Read> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        FrameReader {
            inner,
            body: Vec::new(),
            offset: 0,
        }
    }

    /// Bytes consumed so far.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn into_inner(self) -> R {
        self.inner
    }

    /// `Ok(None)` on end of stream at a frame boundary.
    pub fn read_message(&mut self) -> Result<Option<DetectionMessage>, WireError> {
        let mut prefix = [0u8; 4];
        let got = read_full(&mut self.inner, &mut prefix)?;
        self.offset += got as u64;
        if got == 0 {
            return Ok(None);
        }
        if got < 4 {
            return Err(WireError::Truncated {
                needed: 4,
                available: got,
            });
        }
        let len = u32::from_be_bytes(prefix) as usize;
        if len > MAX_BODY_LEN {
            let skipped = io::copy(&mut (&mut self.inner).take(len as u64), &mut io::sink())?;
            self.offset += skipped;
            if skipped < len as u64 {
                return Err(WireError::Truncated {
                    needed: 4 + len,
                    available: 4 + skipped as usize,
                });
            }
            return Err(WireError::LengthOverflow { length: len });
        }
        self.body.resize(len, 0);
        let got = read_full(&mut self.inner, &mut self.body)?;
        self.offset += got as u64;
        if got < len {
            return Err(WireError::Truncated {
                needed: 4 + len,
                available: 4 + got,
            });
        }
        decode_body(&self.body).map(Some)
    }
}

/// Reads until `buf` is full or the stream ends; returns the bytes read.
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
