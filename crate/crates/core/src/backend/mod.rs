//! Autoencoder backends `R = D ∘ E` behind one interface.

mod external;
mod linear;
pub mod wire;

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{Dims, Image};

pub use external::{ExternalBackend, ExternalConfig};
pub use linear::{train_linear_backend, LinearAeBackend, NoiseSigma, DEFAULT_NOISE_SCALE};

/// One full encode + decode pass.
///
/// Implementations must preserve dimensions, keep outputs in `[0, 1]`, and
/// be deterministic in `(x, call_seed)`.
pub trait Reconstructor: Send + Sync {
    fn id(&self) -> &str;

    fn is_deterministic(&self) -> bool;

    /// Fixed input dimensions, or `None` if any size is accepted.
    fn dims(&self) -> Option<Dims>;

    fn reconstruct(&self, x: &Image, call_seed: u64) -> Result<Image>;

    fn check_dims(&self, x: &Image) -> Result<()> {
        match self.dims() {
            Some(d) if d != x.dims() => Err(Error::DimensionMismatch {
                expected: d.to_string(),
                actual: x.dims().to_string(),
            }),
            _ => Ok(()),
        }
    }
}

impl<R: Reconstructor + ?Sized> Reconstructor for &R {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
    fn dims(&self) -> Option<Dims> {
        (**self).dims()
    }
    fn reconstruct(&self, x: &Image, call_seed: u64) -> Result<Image> {
        (**self).reconstruct(x, call_seed)
    }
}

impl<R: Reconstructor + ?Sized> Reconstructor for Box<R> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
    fn dims(&self) -> Option<Dims> {
        (**self).dims()
    }
    fn reconstruct(&self, x: &Image, call_seed: u64) -> Result<Image> {
        (**self).reconstruct(x, call_seed)
    }
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityBackend;

impl Reconstructor for IdentityBackend {
    fn id(&self) -> &str {
        "identity"
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn dims(&self) -> Option<Dims> {
        None
    }

    fn reconstruct(&self, x: &Image, _call_seed: u64) -> Result<Image> {
        Ok(x.clone())
    }
}

/// Wraps a backend and counts `reconstruct` calls.
pub struct CountingBackend<R> {
    inner: R,
    calls: AtomicUsize,
}

impl<R: Reconstructor> CountingBackend<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }

    pub fn into_inner(self) -> R {
        self.inner
    }
}

impl<R: Reconstructor> Reconstructor for CountingBackend<R> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }

    fn dims(&self) -> Option<Dims> {
        self.inner.dims()
    }

    fn reconstruct(&self, x: &Image, call_seed: u64) -> Result<Image> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.reconstruct(x, call_seed)
    }
}

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG keyed by a backend seed and a per-call seed.
pub(crate) fn keyed_rng(seed: u64, call_seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(call_seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_counter() {
        let img = Image::new(2, 1, 1, vec![0.25, 0.75]).unwrap();
        let counted = CountingBackend::new(IdentityBackend);
        assert_eq!(counted.reconstruct(&img, 3).unwrap(), img);
        assert_eq!(counted.reconstruct(&img, 4).unwrap(), img);
        assert_eq!(counted.calls(), 2);
        counted.reset();
        assert_eq!(counted.calls(), 0);
    }

    #[test]
    fn keyed_rng_depends_on_both_seeds() {
        use rand::Rng;
        let a: u64 = keyed_rng(1, 2).random();
        let b: u64 = keyed_rng(1, 2).random();
        let c: u64 = keyed_rng(2, 1).random();
        let d: u64 = keyed_rng(1, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
