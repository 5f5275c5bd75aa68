//! Newline-delimited JSON protocol spoken with external autoencoder adapters.
//!
//! Requests:
//!
//! ```text
//! {"id":0,"op":"hello"}
//! {"id":1,"op":"reconstruct","width":W,"height":H,"channels":C,"pixels_b64":"..."}
//! {"id":2,"op":"shutdown"}
//! ```
//!
//! `pixels_b64` is standard base64 of row-major, channel-interleaved
//! little-endian `f32` samples in `[0, 1]`. Every request line gets exactly
//! one response line echoing its `id`; failures carry `"ok":false` and an
//! `error` of `"parse"`, `"dims"` or `"backend"`.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Dims, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Hello,
    Reconstruct,
    Shutdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels_b64: Option<String>,
}

impl Request {
    pub fn hello(id: u64) -> Self {
        Self::bare(id, Op::Hello)
    }

    pub fn shutdown(id: u64) -> Self {
        Self::bare(id, Op::Shutdown)
    }

    pub fn reconstruct(id: u64, img: &Image) -> Self {
        Self {
            id,
            op: Op::Reconstruct,
            width: Some(img.width()),
            height: Some(img.height()),
            channels: Some(img.channels()),
            pixels_b64: Some(encode_pixels(img.pixels())),
        }
    }

    fn bare(id: u64, op: Op) -> Self {
        Self {
            id,
            op,
            width: None,
            height: None,
            channels: None,
            pixels_b64: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    /// `None` only when the request line could not be parsed far enough to
    /// recover an id.
    pub id: Option<u64>,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deterministic: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native_width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native_height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels_b64: Option<String>,
}

impl Response {
    pub fn ok(id: u64) -> Self {
        Self {
            id: Some(id),
            ok: true,
            error: None,
            name: None,
            version: None,
            deterministic: None,
            native_width: None,
            native_height: None,
            width: None,
            height: None,
            channels: None,
            pixels_b64: None,
        }
    }

    pub fn failure(id: Option<u64>, error: &str) -> Self {
        Self {
            id,
            ok: false,
            error: Some(error.to_string()),
            ..Self::ok(0)
        }
    }

    pub fn image(id: u64, img: &Image) -> Self {
        Self {
            width: Some(img.width()),
            height: Some(img.height()),
            channels: Some(img.channels()),
            pixels_b64: Some(encode_pixels(img.pixels())),
            ..Self::ok(id)
        }
    }
}

/// Little-endian `f32` samples, base64-encoded.
pub fn encode_pixels(pixels: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(pixels.len() * 4);
    for &p in pixels {
        bytes.extend_from_slice(&(p as f32).to_le_bytes());
    }
    STANDARD.encode(bytes)
}

pub fn decode_pixels(b64: &str, expected_len: usize) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(b64)
        .map_err(|e| Error::Transport(format!("invalid base64 payload: {e}")))?;
    if bytes.len() != expected_len * 4 {
        return Err(Error::Transport(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            expected_len * 4
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

/// Decodes the image carried by a request or response, clamping into `[0, 1]`.
pub fn decode_image(
    width: Option<usize>,
    height: Option<usize>,
    channels: Option<usize>,
    pixels_b64: Option<&str>,
) -> Result<Image> {
    let (Some(w), Some(h), Some(c), Some(b64)) = (width, height, channels, pixels_b64) else {
        return Err(Error::Transport("message lacks image fields".into()));
    };
    let dims = Dims::new(w, h, c);
    let pixels = decode_pixels(b64, dims.len())?;
    Image::from_clamped(dims, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_shapes() {
        let hello = serde_json::to_string(&Request::hello(0)).unwrap();
        assert_eq!(hello, r#"{"id":0,"op":"hello"}"#);
        let img = Image::new(1, 1, 1, vec![1.0]).unwrap();
        let rec = serde_json::to_string(&Request::reconstruct(3, &img)).unwrap();
        assert_eq!(
            rec,
            r#"{"id":3,"op":"reconstruct","width":1,"height":1,"channels":1,"pixels_b64":"AACAPw=="}"#
        );
        let fail = serde_json::to_string(&Response::failure(Some(4), "dims")).unwrap();
        assert_eq!(fail, r#"{"id":4,"ok":false,"error":"dims"}"#);
    }

    #[test]
    fn payload_length_checked() {
        let b64 = encode_pixels(&[0.5, 0.25]);
        assert_eq!(decode_pixels(&b64, 2).unwrap(), vec![0.5, 0.25]);
        assert!(decode_pixels(&b64, 3).is_err());
        assert!(decode_pixels("!!", 1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn f32_samples_round_trip(samples in proptest::collection::vec(0.0f32..=1.0, 0..64)) {
                let wide: Vec<f64> = samples.iter().map(|&s| f64::from(s)).collect();
                let back = decode_pixels(&encode_pixels(&wide), wide.len()).unwrap();
                prop_assert_eq!(back, wide);
            }
        }
    }
}
