//! Stochastic linear autoencoder: a PCA projection with Gaussian noise
//! injected into the latent code before decoding.
//!
//! Encoding is `z = W (x - mean)`, decoding is `clamp(Wᵀ (z + sigma g) + mean)`.
//! With `sigma = 0` the round trip is an orthogonal projection and hence
//! idempotent (up to clamping).

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{keyed_rng, mix64, Reconstructor};
use crate::error::{Error, Result};
use crate::image::{Dims, Image};

pub const SCHEMA_VERSION: u32 = 1;
const KIND: &str = "linear_ae";

/// Default latent noise as a fraction of the mean latent standard deviation.
pub const DEFAULT_NOISE_SCALE: f64 = 0.05;

/// How the latent noise level is chosen at training time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSigma {
    Absolute(f64),
    /// Multiple of the mean per-component latent standard deviation of the
    /// training corpus.
    Relative(f64),
}

impl Default for NoiseSigma {
    fn default() -> Self {
        NoiseSigma::Relative(DEFAULT_NOISE_SCALE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearAeBackend {
    id: String,
    dims: Dims,
    mean: Vec<f64>,
    /// `latent_dim` rows of length `dims.len()`, orthonormal.
    basis: Vec<f64>,
    latent_dim: usize,
    latent_std: Vec<f64>,
    noise_sigma: f64,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct LinearAeFile {
    schema_version: u32,
    kind: String,
    width: usize,
    height: usize,
    channels: usize,
    latent_dim: usize,
    noise_sigma: f64,
    seed: u64,
    mean: Vec<f64>,
    basis: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    latent_std: Vec<f64>,
}

/// Fits mean and top-`latent_dim` principal components of `corpus`.
pub fn train_linear_backend(
    corpus: &[Image],
    latent_dim: usize,
    noise: NoiseSigma,
    seed: u64,
) -> Result<LinearAeBackend> {
    let first = corpus.first().ok_or(Error::EmptyCorpus)?;
    let dims = first.dims();
    if let Some(bad) = corpus.iter().find(|img| img.dims() != dims) {
        return Err(Error::DimensionMismatch {
            expected: dims.to_string(),
            actual: bad.dims().to_string(),
        });
    }
    let n = corpus.len();
    let d = dims.len();
    let max_k = (n.saturating_sub(1)).min(d);
    if latent_dim == 0 || latent_dim > max_k {
        return Err(Error::LatentDimOutOfRange {
            k: latent_dim,
            max: max_k,
        });
    }

    let mut mean = vec![0.0; d];
    for img in corpus {
        for (m, p) in mean.iter_mut().zip(img.pixels()) {
            *m += p;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, d, |i, j| corpus[i].pixels()[j] - mean[j]);
    let (eigenvalues, components) = principal_components(&centered, latent_dim);

    let latent_std: Vec<f64> = eigenvalues
        .iter()
        .map(|&l| (l.max(0.0) / (n - 1) as f64).sqrt())
        .collect();

    let noise_sigma = match noise {
        NoiseSigma::Absolute(s) => s,
        NoiseSigma::Relative(f) => f * latent_std.iter().sum::<f64>() / latent_dim as f64,
    };
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise sigma must be finite and >= 0, got {noise_sigma}"
        )));
    }

    Ok(LinearAeBackend::from_parts(
        dims,
        mean,
        components,
        latent_dim,
        latent_std,
        noise_sigma,
        seed,
    ))
}

/// Top-`k` eigenpairs of the sample covariance of `centered` (rows are
/// observations). Eigenvalues are those of `XᵀX`, sorted descending;
/// components come back as `k` orthonormal rows, flattened.
fn principal_components(centered: &DMatrix<f64>, k: usize) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = centered.shape();
    let scatter_scale = centered.iter().map(|v| v * v).sum::<f64>().max(1.0);
    let cutoff = scatter_scale * 1e-12;

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);

    if d <= n {
        let cov = centered.transpose() * centered;
        let eig = SymmetricEigen::new(cov);
        for idx in sorted_desc(eig.eigenvalues.as_slice()).into_iter().take(k) {
            let lambda = eig.eigenvalues[idx];
            if lambda <= cutoff {
                break;
            }
            rows.push(eig.eigenvectors.column(idx).iter().copied().collect());
            values.push(lambda);
        }
    } else {
        // Gram trick: eigenvectors u of X Xᵀ map to Xᵀu / sqrt(lambda).
        let gram = centered * centered.transpose();
        let eig = SymmetricEigen::new(gram);
        for idx in sorted_desc(eig.eigenvalues.as_slice()).into_iter().take(k) {
            let lambda = eig.eigenvalues[idx];
            if lambda <= cutoff {
                break;
            }
            let v = centered.transpose() * eig.eigenvectors.column(idx);
            let inv = 1.0 / lambda.sqrt();
            rows.push(v.iter().map(|x| x * inv).collect());
            values.push(lambda);
        }
    }

    // Zero-variance directions: pad with coordinate axes so the basis stays
    // orthonormal and deterministic.
    let mut axis = 0;
    while rows.len() < k && axis < d {
        let mut e = vec![0.0; d];
        e[axis] = 1.0;
        axis += 1;
        for r in &rows {
            let dot: f64 = r.iter().zip(&e).map(|(a, b)| a * b).sum();
            e.iter_mut().zip(r).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.5 {
            e.iter_mut().for_each(|x| *x /= norm);
            rows.push(e);
            values.push(0.0);
        }
    }

    orthonormalize(&mut rows);
    for r in rows.iter_mut() {
        canonical_sign(r);
    }
    (values, rows.concat())
}

fn sorted_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Two passes of modified Gram-Schmidt.
fn orthonormalize(rows: &mut [Vec<f64>]) {
    for _ in 0..2 {
        for i in 0..rows.len() {
            let (done, rest) = rows.split_at_mut(i);
            let row = &mut rest[0];
            for prev in done.iter() {
                let dot: f64 = row.iter().zip(prev).map(|(a, b)| a * b).sum();
                row.iter_mut().zip(prev).for_each(|(x, p)| *x -= dot * p);
            }
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

/// Flips `v` so its largest-magnitude entry is positive.
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best.abs() + 1e-12 {
            best = x;
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

impl LinearAeBackend {
    fn from_parts(
        dims: Dims,
        mean: Vec<f64>,
        basis: Vec<f64>,
        latent_dim: usize,
        latent_std: Vec<f64>,
        noise_sigma: f64,
        seed: u64,
    ) -> Self {
        let mut backend = Self {
            id: String::new(),
            dims,
            mean,
            basis,
            latent_dim,
            latent_std,
            noise_sigma,
            seed,
        };
        backend.id = format!("{KIND}-{:016x}", backend.fingerprint());
        backend
    }

    fn fingerprint(&self) -> u64 {
        let mut h = mix64(self.dims.width as u64);
        let mut feed = |v: u64| h = mix64(h ^ v);
        feed(self.dims.height as u64);
        feed(self.dims.channels as u64);
        feed(self.latent_dim as u64);
        feed(self.noise_sigma.to_bits());
        feed(self.seed);
        for v in self.mean.iter().chain(&self.basis) {
            feed(v.to_bits());
        }
        h
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row `i` of the basis.
    pub fn component(&self, i: usize) -> &[f64] {
        let d = self.dims.len();
        &self.basis[i * d..(i + 1) * d]
    }

    /// Per-component latent standard deviation of the training corpus.
    pub fn latent_std(&self) -> &[f64] {
        &self.latent_std
    }

    /// Copy of this backend with a different noise level (and id).
    pub fn with_noise_sigma(&self, noise_sigma: f64) -> Self {
        Self::from_parts(
            self.dims,
            self.mean.clone(),
            self.basis.clone(),
            self.latent_dim,
            self.latent_std.clone(),
            noise_sigma,
            self.seed,
        )
    }

    pub fn encode(&self, x: &Image) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        let d = self.dims.len();
        let centered: Vec<f64> = x
            .pixels()
            .iter()
            .zip(&self.mean)
            .map(|(p, m)| p - m)
            .collect();
        Ok((0..self.latent_dim)
            .map(|i| {
                self.basis[i * d..(i + 1) * d]
                    .iter()
                    .zip(&centered)
                    .map(|(w, c)| w * c)
                    .sum()
            })
            .collect())
    }

    /// `clamp(Wᵀ z + mean)`.
    pub fn decode(&self, z: &[f64]) -> Result<Image> {
        if z.len() != self.latent_dim {
            return Err(Error::DimensionMismatch {
                expected: format!("latent of length {}", self.latent_dim),
                actual: format!("latent of length {}", z.len()),
            });
        }
        let d = self.dims.len();
        let mut out = self.mean.clone();
        for (i, &zi) in z.iter().enumerate() {
            if zi == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(&self.basis[i * d..(i + 1) * d]) {
                *o += zi * w;
            }
        }
        Image::from_clamped(self.dims, out)
    }

    /// Reconstruction before clamping, for analysis.
    pub fn project(&self, x: &Image) -> Result<Vec<f64>> {
        let z = self.encode(x)?;
        let d = self.dims.len();
        let mut out = self.mean.clone();
        for (i, zi) in z.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(&self.basis[i * d..(i + 1) * d]) {
                *o += zi * w;
            }
        }
        Ok(out)
    }

    /// Draws a latent code from `N(0, diag(latent_std²))`.
    pub fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        if self.latent_std.len() != self.latent_dim {
            return Err(Error::Schema(
                "backend file carries no latent_std; cannot sample".into(),
            ));
        }
        Ok(self
            .latent_std
            .iter()
            .map(|s| s * rng.sample::<f64, _>(StandardNormal))
            .collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = self.to_json()?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        let d = self.dims.len();
        let file = LinearAeFile {
            schema_version: SCHEMA_VERSION,
            kind: KIND.to_string(),
            width: self.dims.width,
            height: self.dims.height,
            channels: self.dims.channels,
            latent_dim: self.latent_dim,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
            mean: self.mean.clone(),
            basis: self.basis.chunks(d).map(<[f64]>::to_vec).collect(),
            latent_std: self.latent_std.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: LinearAeFile = serde_json::from_str(text)?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "backend schema_version {} (supported: {SCHEMA_VERSION})",
                f.schema_version
            )));
        }
        if f.kind != KIND {
            return Err(Error::Schema(format!("backend kind {:?}", f.kind)));
        }
        if f.channels != 1 && f.channels != 3 {
            return Err(Error::UnsupportedChannels(f.channels));
        }
        let dims = Dims::new(f.width, f.height, f.channels);
        let d = dims.len();
        if f.mean.len() != d
            || f.basis.len() != f.latent_dim
            || f.basis.iter().any(|r| r.len() != d)
            || (!f.latent_std.is_empty() && f.latent_std.len() != f.latent_dim)
        {
            return Err(Error::Schema(
                "backend arrays do not match declared dimensions".into(),
            ));
        }
        Ok(Self::from_parts(
            dims,
            f.mean,
            f.basis.concat(),
            f.latent_dim,
            f.latent_std,
            f.noise_sigma,
            f.seed,
        ))
    }
}

impl Reconstructor for LinearAeBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn is_deterministic(&self) -> bool {
        self.noise_sigma == 0.0
    }

    fn dims(&self) -> Option<Dims> {
        Some(self.dims)
    }

    fn reconstruct(&self, x: &Image, call_seed: u64) -> Result<Image> {
        let mut z = self.encode(x)?;
        if self.noise_sigma > 0.0 {
            let mut rng = keyed_rng(self.seed, call_seed);
            for zi in z.iter_mut() {
                *zi += self.noise_sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
        self.decode(&z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{loss, LossMetric};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_corpus(n: usize, w: usize, h: usize, seed: u64) -> Vec<Image> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let px = (0..w * h).map(|_| rng.random::<f64>()).collect();
                Image::new(w, h, 1, px).unwrap()
            })
            .collect()
    }

    fn gram_error(b: &LinearAeBackend) -> f64 {
        let k = b.latent_dim();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let dot: f64 = b
                    .component(i)
                    .iter()
                    .zip(b.component(j))
                    .map(|(x, y)| x * y)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    #[test]
    fn two_pixel_corpus_by_hand() {
        let corpus = vec![
            Image::new(2, 1, 1, vec![0.0, 0.0]).unwrap(),
            Image::new(2, 1, 1, vec![1.0, 1.0]).unwrap(),
        ];
        let b = train_linear_backend(&corpus, 1, NoiseSigma::Absolute(0.0), 0).unwrap();
        assert_eq!(b.mean(), &[0.5, 0.5]);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b.component(0)[0].abs() - r).abs() < 1e-12);
        assert!((b.component(0)[1] - b.component(0)[0]).abs() < 1e-12);
        // Eigenvalue of the sample covariance is 1, so latent std is 1.
        assert!((b.latent_std()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_corpus_reconstructs_itself() {
        let img = Image::new(3, 2, 1, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let corpus = vec![img.clone(); 4];
        let b = train_linear_backend(&corpus, 1, NoiseSigma::Absolute(0.0), 9).unwrap();
        assert_eq!(b.mean(), img.pixels());
        assert!(gram_error(&b) < 1e-12);
        let out = b.reconstruct(&img, 0).unwrap();
        for (a, e) in out.pixels().iter().zip(img.pixels()) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn basis_is_orthonormal_gram_path() {
        let corpus = random_corpus(64, 16, 16, 11);
        let b = train_linear_backend(&corpus, 8, NoiseSigma::default(), 1).unwrap();
        assert!(gram_error(&b) < 1e-8);
        // Latent std is sorted descending.
        assert!(b.latent_std().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn basis_matches_covariance_path() {
        // 20 images of 4x4 = 16 pixels -> covariance path; compare to Gram path
        // on the same data padded to more pixels than images would be circular,
        // so check against an explicit power iteration instead.
        let corpus = random_corpus(20, 4, 4, 5);
        let b = train_linear_backend(&corpus, 1, NoiseSigma::Absolute(0.0), 0).unwrap();
        let d = 16;
        let mean = b.mean().to_vec();
        let mut v = vec![1.0; d];
        for _ in 0..2000 {
            let mut next = vec![0.0; d];
            for img in &corpus {
                let c: Vec<f64> = img.pixels().iter().zip(&mean).map(|(p, m)| p - m).collect();
                let dot: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                next.iter_mut().zip(&c).for_each(|(n, ci)| *n += dot * ci);
            }
            let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = next.into_iter().map(|x| x / norm).collect();
        }
        let cos: f64 = v.iter().zip(b.component(0)).map(|(a, b)| a * b).sum();
        assert!((cos.abs() - 1.0).abs() < 1e-8, "{cos}");
    }

    #[test]
    fn errors() {
        assert!(matches!(
            train_linear_backend(&[], 1, NoiseSigma::default(), 0),
            Err(Error::EmptyCorpus)
        ));
        let corpus = random_corpus(4, 2, 2, 0);
        assert!(matches!(
            train_linear_backend(&corpus, 4, NoiseSigma::default(), 0),
            Err(Error::LatentDimOutOfRange { k: 4, max: 3 })
        ));
        assert!(train_linear_backend(&corpus, 0, NoiseSigma::default(), 0).is_err());
        let mut mixed = corpus.clone();
        mixed.push(Image::new(1, 1, 1, vec![0.0]).unwrap());
        assert!(matches!(
            train_linear_backend(&mixed, 1, NoiseSigma::default(), 0),
            Err(Error::DimensionMismatch { .. })
        ));
        let b = train_linear_backend(&corpus, 2, NoiseSigma::default(), 0).unwrap();
        assert!(b
            .reconstruct(&Image::new(1, 1, 1, vec![0.0]).unwrap(), 0)
            .is_err());
    }

    #[test]
    fn noiseless_projection_is_idempotent() {
        let corpus = random_corpus(40, 8, 8, 3);
        let b = train_linear_backend(&corpus, 6, NoiseSigma::Absolute(0.0), 0).unwrap();
        for x in random_corpus(10, 8, 8, 99) {
            let once = b.reconstruct(&x, 1).unwrap();
            let twice = b.reconstruct(&once, 2).unwrap();
            assert!(loss(LossMetric::Mse, &twice, &once).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn in_span_point_is_fixed() {
        let corpus = random_corpus(40, 8, 8, 3);
        let b = train_linear_backend(&corpus, 6, NoiseSigma::Absolute(0.0), 0).unwrap();
        // Explicit arithmetic: x = mean + 0.05 * (w0 - w3), well inside [0, 1]
        // only if mean is; build it and check it stays in range first.
        let x: Vec<f64> = (0..64)
            .map(|j| b.mean()[j] + 0.05 * (b.component(0)[j] - b.component(3)[j]))
            .collect();
        assert!(x.iter().all(|p| (0.0..=1.0).contains(p)));
        let x = Image::new(8, 8, 1, x).unwrap();
        let out = b.reconstruct(&x, 0).unwrap();
        for (a, e) in out.pixels().iter().zip(x.pixels()) {
            assert!((a - e).abs() < 1e-6);
        }
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let corpus = random_corpus(30, 6, 6, 8);
        let b = train_linear_backend(&corpus, 4, NoiseSigma::Relative(0.5), 17).unwrap();
        let x = &corpus[0];
        assert_eq!(b.reconstruct(x, 5).unwrap(), b.reconstruct(x, 5).unwrap());
        assert_ne!(b.reconstruct(x, 5).unwrap(), b.reconstruct(x, 6).unwrap());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let corpus = random_corpus(12, 5, 3, 1);
        let b = train_linear_backend(&corpus, 3, NoiseSigma::default(), 77).unwrap();
        let back = LinearAeBackend::from_json(&b.to_json().unwrap()).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.id(), b.id());

        let v: serde_json::Value = serde_json::from_str(&b.to_json().unwrap()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["kind"], "linear_ae");
        assert_eq!(v["basis"].as_array().unwrap().len(), 3);

        let bumped = b
            .to_json()
            .unwrap()
            .replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(matches!(
            LinearAeBackend::from_json(&bumped),
            Err(Error::Schema(_))
        ));
    }
}
