//! Reference adapter for the external-backend wire protocol.
//!
//! Serves the protocol in identity mode: every reconstruct request is echoed
//! back bit-exactly. Used for conformance testing of the client side.
//!
//! ```text
//! aedr-loopback-adapter --identity [--model SPEC] [--device DEV] [--native WxH] [--delay-ms N]
//! ```

use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::time::Duration;

use aedr::backend::wire::{Op, Request, Response};

struct Options {
    native: (usize, usize),
    delay: Duration,
}

fn parse_args() -> Result<Options, String> {
    let mut identity = false;
    let mut native = (64, 64);
    let mut delay = Duration::ZERO;
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--identity" => identity = true,
            // Accepted for command-line compatibility with model-hosting adapters.
            "--model" | "--device" => {
                args.next().ok_or_else(|| format!("{arg} needs a value"))?;
            }
            "--native" => {
                let v = args.next().ok_or("--native needs WxH")?;
                let (w, h) = v.split_once('x').ok_or("--native needs WxH")?;
                native = (
                    w.parse().map_err(|_| "bad width")?,
                    h.parse().map_err(|_| "bad height")?,
                );
            }
            "--delay-ms" => {
                let v = args.next().ok_or("--delay-ms needs a value")?;
                delay = Duration::from_millis(v.parse().map_err(|_| "bad delay")?);
            }
            other => return Err(format!("unknown argument {other}")),
        }
    }
    if !identity {
        return Err("only --identity mode is available in this adapter".into());
    }
    Ok(Options { native, delay })
}

fn handle(line: &str, opts: &Options) -> (Response, bool) {
    let req: Request = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(_) => {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(serde_json::Value::as_u64));
            return (Response::failure(id, "parse"), false);
        }
    };
    match req.op {
        Op::Hello => (
            Response {
                name: Some("loopback-identity".into()),
                version: Some(env!("CARGO_PKG_VERSION").into()),
                deterministic: Some(false),
                native_width: Some(opts.native.0),
                native_height: Some(opts.native.1),
                ..Response::ok(req.id)
            },
            false,
        ),
        Op::Shutdown => (Response::ok(req.id), true),
        Op::Reconstruct => {
            let (Some(w), Some(h), Some(c), Some(px)) =
                (req.width, req.height, req.channels, req.pixels_b64)
            else {
                return (Response::failure(Some(req.id), "parse"), false);
            };
            if (w, h) != opts.native || !(c == 1 || c == 3) {
                return (Response::failure(Some(req.id), "dims"), false);
            }
            match aedr::backend::wire::decode_pixels(&px, w * h * c) {
                Ok(_) => {}
                Err(_) => return (Response::failure(Some(req.id), "parse"), false),
            }
            std::thread::sleep(opts.delay);
            (
                Response {
                    width: Some(w),
                    height: Some(h),
                    channels: Some(c),
                    pixels_b64: Some(px),
                    ..Response::ok(req.id)
                },
                false,
            )
        }
    }
}

fn main() -> ExitCode {
    let opts = match parse_args() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("aedr-loopback-adapter: {e}");
            return ExitCode::from(1);
        }
    };
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let (resp, stop) = handle(&line, &opts);
        let text = serde_json::to_string(&resp).expect("response serializes");
        if writeln!(stdout, "{text}")
            .and_then(|_| stdout.flush())
            .is_err()
            || stop
        {
            break;
        }
    }
    ExitCode::SUCCESS
}
