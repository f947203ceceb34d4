//! TCP ingestion: one reader thread per connection feeding a single
//! synchronizer through a bounded queue.

use std::collections::BTreeSet;
use std::io::{self, BufReader};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{sync_channel, RecvTimeoutError, SyncSender};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::sync::{FrameBundle, SyncStats, Synchronizer};
use super::wire::{FrameReader, WireError};
use super::DetectionMessage;

pub const DEFAULT_STALL_TIMEOUT: Duration = Duration::from_secs(2);
pub const DEFAULT_QUEUE_CAPACITY: usize = 256;

#[derive(Clone, Debug)]
pub struct LiveOptions {
    pub cameras: Vec<String>,
    pub window_us: u64,
    /// Silence after which queued messages are bundled without the missing
    /// cameras.
    pub stall_timeout: Duration,
    /// Stop when nothing arrives for this long.
    pub idle_timeout: Option<Duration>,
    pub queue_capacity: usize,
}

impl LiveOptions {
    pub fn new(cameras: Vec<String>, window_us: u64) -> Self {
        LiveOptions {
            cameras,
            window_us,
            stall_timeout: DEFAULT_STALL_TIMEOUT,
            idle_timeout: None,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LiveStats {
    pub sync: SyncStats,
    pub connections: u64,
    pub decode_errors: u64,
    pub stall_flushes: u64,
}

enum Event {
    Message(DetectionMessage),
    DecodeError,
    Closed(BTreeSet<String>),
}

pub struct LiveServer {
    listener: TcpListener,
}

impl LiveServer {
    pub fn bind<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        Ok(LiveServer {
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until every configured camera has connected and disconnected
    /// (or the idle timeout fires), calling `on_bundle` for each bundle in
    /// order.
    pub fn run<F: FnMut(FrameBundle)>(self, opts: &LiveOptions, mut on_bundle: F) -> io::Result<LiveStats> {
        let (tx, rx) = sync_channel::<Event>(opts.queue_capacity.max(1));
        let stop = Arc::new(AtomicBool::new(false));
        self.listener.set_nonblocking(true)?;
        let acceptor = {
            let stop = Arc::clone(&stop);
            let listener = self.listener;
            thread::spawn(move || accept_loop(listener, tx, stop))
        };

        let mut sync = Synchronizer::new(opts.cameras.clone(), opts.window_us);
        let mut stats = LiveStats::default();
        let mut idle = Duration::ZERO;
        let tick = opts.stall_timeout.min(opts.idle_timeout.unwrap_or(opts.stall_timeout));
        loop {
            match rx.recv_timeout(tick) {
                Ok(Event::Message(m)) => {
                    idle = Duration::ZERO;
                    sync.push(m).into_iter().for_each(&mut on_bundle);
                }
                Ok(Event::DecodeError) => {
                    idle = Duration::ZERO;
                    stats.decode_errors += 1;
                }
                Ok(Event::Closed(ids)) => {
                    idle = Duration::ZERO;
                    stats.connections += 1;
                    for id in ids {
                        sync.end_camera(&id).into_iter().for_each(&mut on_bundle);
                    }
                    if sync.all_ended() {
                        break;
                    }
                }
                Err(RecvTimeoutError::Timeout) => {
                    idle += tick;
                    if sync.pending() > 0 && idle >= opts.stall_timeout {
                        if let Some(b) = sync.flush_stalled() {
                            stats.stall_flushes += 1;
                            log::warn!("camera stall: emitting a partial bundle at {}", b.bundle_time);
                            on_bundle(b);
                        }
                    }
                    if opts.idle_timeout.is_some_and(|t| idle >= t) {
                        break;
                    }
                }
                Err(RecvTimeoutError::Disconnected) => break,
            }
        }
        sync.finish().into_iter().for_each(&mut on_bundle);
        stop.store(true, Ordering::Relaxed);
        let _ = acceptor.join();
        stats.sync = sync.stats();
        Ok(stats)
    }
}

fn accept_loop(listener: TcpListener, tx: SyncSender<Event>, stop: Arc<AtomicBool>) {
    while !stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                log::info!("camera connection from {peer}");
                let tx = tx.clone();
                thread::spawn(move || read_connection(stream, tx));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                log::error!("accept failed: {e}");
                thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

fn read_connection(stream: TcpStream, tx: SyncSender<Event>) {
    let _ = stream.set_nonblocking(false);
    let mut reader = FrameReader::new(BufReader::new(stream));
    let mut ids = BTreeSet::new();
    loop {
        match reader.read_message() {
            Ok(Some(m)) => {
                if !ids.contains(&m.camera_id) {
                    ids.insert(m.camera_id.clone());
                }
                if tx.send(Event::Message(m)).is_err() {
                    return;
                }
            }
            Ok(None) => break,
            Err(
                e @ (WireError::LengthOverflow { .. } | WireError::VersionMismatch { .. } | WireError::Malformed(_)),
            ) => {
                log::warn!("dropping frame at byte {}: {e}", reader.offset());
                if tx.send(Event::DecodeError).is_err() {
                    return;
                }
            }
            Err(e) => {
                log::warn!("closing connection: {e}");
                let _ = tx.send(Event::DecodeError);
                break;
            }
        }
    }
    let _ = tx.send(Event::Closed(ids));
}

/// Sends messages over one connection, as a camera producer would.
pub fn send_messages<A: ToSocketAddrs>(addr: A, msgs: &[DetectionMessage]) -> Result<(), WireError> {
    use std::io::Write;
    let stream = TcpStream::connect(addr)?;
    let mut w = io::BufWriter::new(stream);
    for m in msgs {
        w.write_all(&super::wire::encode_message(m)?)?;
    }
    w.flush()?;
    Ok(())
}
