use std::io::Write;
use std::process::{Command, Stdio};
use std::time::Duration;

use aedr::backend::wire::{decode_pixels, encode_pixels, Request, Response};
use aedr::{
    double_reconstruct, Error, ExternalBackend, ExternalConfig, GlcmConfig, Image, LossMetric,
    Reconstructor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ADAPTER: &str = env!("CARGO_BIN_EXE_aedr-loopback-adapter");

fn config(args: &[&str], channels: usize) -> ExternalConfig {
    let mut command = vec![ADAPTER.to_string()];
    command.extend(args.iter().map(|s| s.to_string()));
    ExternalConfig {
        channels,
        timeout: Duration::from_secs(10),
        ..ExternalConfig::new(command)
    }
}

/// Pixels drawn as f32 so the f32 wire format represents them exactly.
fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> Image {
    let px = (0..w * h * c)
        .map(|_| f64::from(rng.random::<f32>()))
        .collect();
    Image::new(w, h, c, px).unwrap()
}

#[test]
fn identity_round_trips_twenty_images_bit_exactly() {
    let backend = ExternalBackend::spawn(&ExternalConfig {
        pool_size: 2,
        ..config(&["--identity", "--native", "12x9"], 3)
    })
    .unwrap();
    assert_eq!(
        backend.id(),
        format!("external:loopback-identity@{}", env!("CARGO_PKG_VERSION"))
    );
    assert_eq!(backend.pool_size(), 2);
    assert!(!backend.is_deterministic());
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for i in 0..20 {
        let x = random_image(&mut rng, 12, 9, 3);
        let y = backend.reconstruct(&x, i).unwrap();
        assert_eq!(x.pixels(), y.pixels(), "image {i}");
        // Same payload bytes on the way back.
        assert_eq!(encode_pixels(x.pixels()), encode_pixels(y.pixels()));
    }
}

#[test]
fn identity_adapter_gives_degenerate_belonging_records() {
    let backend = ExternalBackend::spawn(&config(&["--identity", "--native", "16x16"], 1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_image(&mut rng, 16, 16, 1);
    let r = double_reconstruct(&backend, &x, LossMetric::Mse, &GlcmConfig::default(), 0).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.l1, 0.0);
    assert_eq!(r.degenerate_verdict(), Some(aedr::Decision::Belonging));
}

#[test]
fn parallel_callers_share_the_pool() {
    use rayon::prelude::*;
    let backend = ExternalBackend::spawn(&ExternalConfig {
        pool_size: 3,
        ..config(&["--identity", "--native", "8x8"], 1)
    })
    .unwrap();
    let images: Vec<Image> = {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        (0..24).map(|_| random_image(&mut rng, 8, 8, 1)).collect()
    };
    let out: Vec<Image> = images
        .par_iter()
        .map(|x| backend.reconstruct(x, 0).unwrap())
        .collect();
    assert_eq!(out, images);
}

#[test]
fn wrong_dimensions_are_rejected() {
    let backend = ExternalBackend::spawn(&config(&["--identity", "--native", "8x8"], 1)).unwrap();
    let x = Image::filled(aedr::Dims::new(4, 4, 1), 0.5).unwrap();
    assert!(matches!(
        backend.reconstruct(&x, 0),
        Err(Error::DimensionMismatch { .. })
    ));

    // A backend told the wrong channel count gets the adapter's own refusal.
    let liar = ExternalBackend::spawn(&config(&["--identity", "--native", "2x2"], 4)).unwrap();
    let x4 = Image::from_clamped(aedr::Dims::new(2, 2, 1), vec![0.0; 4]).unwrap();
    assert!(liar.reconstruct(&x4, 0).is_err());
}

#[test]
fn slow_adapter_times_out_then_recovers() {
    let backend = ExternalBackend::spawn(&ExternalConfig {
        timeout: Duration::from_millis(150),
        ..config(&["--identity", "--native", "4x4", "--delay-ms", "400"], 1)
    })
    .unwrap();
    let x = Image::filled(aedr::Dims::new(4, 4, 1), 0.25).unwrap();
    assert!(matches!(backend.reconstruct(&x, 0), Err(Error::Timeout(_))));
    // The late reply is discarded; the next call times out cleanly too
    // rather than returning a mismatched frame.
    assert!(matches!(backend.reconstruct(&x, 1), Err(Error::Timeout(_))));
}

#[test]
fn startup_failures() {
    let missing = ExternalConfig::new(vec!["/nonexistent/adapter".into()]);
    assert!(matches!(
        ExternalBackend::spawn(&missing),
        Err(Error::Transport(_))
    ));
    // Without --identity the loopback adapter refuses to start.
    assert!(matches!(
        ExternalBackend::spawn(&config(&[], 1)),
        Err(Error::Transport(_))
    ));
    assert!(ExternalBackend::spawn(&ExternalConfig {
        pool_size: 0,
        ..config(&["--identity"], 1)
    })
    .is_err());
}

#[test]
fn golden_transcript_replays_byte_identically() {
    let requests = include_str!("data/transcript.requests.ndjson");
    let expected = include_str!("data/transcript.responses.ndjson");
    let mut child = Command::new(ADAPTER)
        .args(["--identity", "--native", "2x1"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(requests.as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), expected);

    // Framing: one response per request line up to and including shutdown,
    // ids echoed in order.
    let req_lines: Vec<&str> = requests.lines().collect();
    let resp: Vec<Response> = expected
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let shutdown = req_lines
        .iter()
        .position(|l| l.contains("\"shutdown\""))
        .unwrap();
    assert_eq!(resp.len(), shutdown + 1);
    for (line, r) in req_lines.iter().zip(&resp) {
        match serde_json::from_str::<Request>(line) {
            Ok(req) => assert_eq!(r.id, Some(req.id)),
            Err(_) => {
                let id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v["id"].as_u64());
                assert_eq!(r.id, id);
                assert_eq!(r.error.as_deref(), Some("parse"));
            }
        }
        if let (true, Some(b64)) = (r.ok, &r.pixels_b64) {
            let n = r.width.unwrap() * r.height.unwrap() * r.channels.unwrap();
            assert_eq!(decode_pixels(b64, n).unwrap().len(), n);
        }
    }
}
