//! Client for out-of-process autoencoder adapters.
//!
//! Each adapter process handles one request at a time; parallelism comes from
//! a pool of processes. A reader thread per process forwards stdout lines so
//! reads can time out.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::wire::{self, Request, Response};
use super::Reconstructor;
use crate::error::{Error, Result};
use crate::image::{Dims, Image};

#[derive(Debug, Clone)]
pub struct ExternalConfig {
    /// Program and arguments launching one adapter process.
    pub command: Vec<String>,
    pub pool_size: usize,
    pub timeout: Duration,
    /// Channel count expected by the adapter; the handshake only reports
    /// width and height.
    pub channels: usize,
}

impl ExternalConfig {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            pool_size: 1,
            timeout: Duration::from_secs(120),
            channels: 3,
        }
    }
}

struct AdapterProcess {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

impl AdapterProcess {
    fn spawn(cfg: &ExternalConfig) -> Result<Self> {
        let (program, args) = cfg
            .command
            .split_first()
            .ok_or_else(|| Error::InvalidConfig("empty adapter command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Transport(format!("cannot start {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            next_id: 0,
        })
    }

    fn call(&mut self, mut req: Request, timeout: Duration) -> Result<Response> {
        req.id = self.next_id;
        self.next_id += 1;
        let mut line = serde_json::to_string(&req)?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Error::Transport(format!("write to adapter failed: {e}")))?;

        // Replies to requests that timed out earlier arrive late; skip them.
        let deadline = std::time::Instant::now() + timeout;
        let resp = loop {
            let left = deadline.saturating_duration_since(std::time::Instant::now());
            let reply = match self.lines.recv_timeout(left) {
                Ok(Ok(l)) => l,
                Ok(Err(e)) => {
                    return Err(Error::Transport(format!("read from adapter failed: {e}")))
                }
                Err(RecvTimeoutError::Timeout) => return Err(Error::Timeout(timeout)),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Transport("adapter closed its output".into()))
                }
            };
            let resp: Response = serde_json::from_str(&reply)
                .map_err(|e| Error::Transport(format!("malformed adapter response: {e}")))?;
            match resp.id {
                Some(id) if id == req.id => break resp,
                Some(id) if id < req.id => continue,
                other => {
                    return Err(Error::Transport(format!(
                        "response id {other:?} does not match request id {}",
                        req.id
                    )))
                }
            }
        };
        if !resp.ok {
            return Err(Error::Adapter(
                resp.error.unwrap_or_else(|| "unspecified".into()),
            ));
        }
        Ok(resp)
    }
}

impl Drop for AdapterProcess {
    fn drop(&mut self) {
        let _ = self.call(Request::shutdown(0), Duration::from_secs(2));
        if !matches!(self.child.try_wait(), Ok(Some(_))) {
            thread::sleep(Duration::from_millis(50));
            if !matches!(self.child.try_wait(), Ok(Some(_))) {
                let _ = self.child.kill();
            }
        }
        let _ = self.child.wait();
    }
}

/// A pool of adapter processes presenting one [`Reconstructor`].
pub struct ExternalBackend {
    id: String,
    name: String,
    version: String,
    deterministic: bool,
    dims: Dims,
    timeout: Duration,
    pool: Vec<Mutex<AdapterProcess>>,
    cursor: AtomicUsize,
}

impl ExternalBackend {
    /// Launches `pool_size` adapters and performs the handshake with each.
    pub fn spawn(cfg: &ExternalConfig) -> Result<Self> {
        if cfg.pool_size == 0 {
            return Err(Error::InvalidConfig(
                "adapter pool size must be >= 1".into(),
            ));
        }
        let mut pool = Vec::with_capacity(cfg.pool_size);
        let mut hello: Option<Response> = None;
        for _ in 0..cfg.pool_size {
            let mut proc = AdapterProcess::spawn(cfg)?;
            let resp = proc.call(Request::hello(0), cfg.timeout)?;
            if let Some(first) = &hello {
                if (first.native_width, first.native_height, &first.name)
                    != (resp.native_width, resp.native_height, &resp.name)
                {
                    return Err(Error::Transport(
                        "adapters in one pool disagree in their handshake".into(),
                    ));
                }
            } else {
                hello = Some(resp);
            }
            pool.push(Mutex::new(proc));
        }
        let hello = hello.expect("pool_size >= 1");
        let (Some(w), Some(h)) = (hello.native_width, hello.native_height) else {
            return Err(Error::Transport("handshake lacks native dimensions".into()));
        };
        let name = hello.name.unwrap_or_else(|| "unknown".into());
        let version = hello.version.unwrap_or_else(|| "unknown".into());
        Ok(Self {
            id: format!("external:{name}@{version}"),
            name,
            version,
            deterministic: hello.deterministic.unwrap_or(false),
            dims: Dims::new(w, h, cfg.channels),
            timeout: cfg.timeout,
            pool,
            cursor: AtomicUsize::new(0),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn pool_size(&self) -> usize {
        self.pool.len()
    }
}

impl Reconstructor for ExternalBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    fn dims(&self) -> Option<Dims> {
        Some(self.dims)
    }

    /// `call_seed` is not forwarded; adapters own their sampling.
    fn reconstruct(&self, x: &Image, _call_seed: u64) -> Result<Image> {
        self.check_dims(x)?;
        let start = self.cursor.fetch_add(1, Ordering::Relaxed);
        let n = self.pool.len();
        // Prefer an idle process; block on the round-robin slot otherwise.
        let mut guard = (0..n)
            .find_map(|i| self.pool[(start + i) % n].try_lock().ok())
            .map_or_else(|| self.pool[start % n].lock(), Ok)
            .map_err(|_| Error::Transport("adapter process poisoned".into()))?;
        let resp = guard.call(Request::reconstruct(0, x), self.timeout)?;
        drop(guard);

        let out = wire::decode_image(
            resp.width,
            resp.height,
            resp.channels,
            resp.pixels_b64.as_deref(),
        )?;
        if out.dims() != x.dims() {
            return Err(Error::DimensionMismatch {
                expected: x.dims().to_string(),
                actual: out.dims().to_string(),
            });
        }
        Ok(out)
    }
}
