//! Labeled image collections, their on-disk layout, and synthesis of
//! belonging images from a linear backend.
//!
//! A corpus directory holds PNG files plus an optional `manifest.csv` with
//! columns `id,file,label,source`. Without a manifest every `*.png` is taken
//! in file-name order, with the file stem as id.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{mix64, LinearAeBackend};
use crate::error::{Error, Result};
use crate::image::{load_image, save_image, Image};
use crate::threshold::Decision;

pub const MANIFEST: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusImage {
    pub id: String,
    pub image: Image,
    pub truth: Decision,
    pub source: String,
}

impl CorpusImage {
    pub fn new(
        id: impl Into<String>,
        image: Image,
        truth: Decision,
        source: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            image,
            truth,
            source: source.into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    id: String,
    file: String,
    label: Decision,
    source: String,
}

/// Wraps plain images as a labeled corpus with ids `{prefix}-{index:05}`.
pub fn label(images: Vec<Image>, prefix: &str, truth: Decision, source: &str) -> Vec<CorpusImage> {
    images
        .into_iter()
        .enumerate()
        .map(|(i, img)| CorpusImage::new(format!("{prefix}-{i:05}"), img, truth, source))
        .collect()
}

/// FNV-1a of the id, mixed with the run seed. Per-image randomness derives
/// from this, so results do not depend on scheduling.
pub fn image_seed(run_seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(run_seed ^ h)
}

/// Decodes `n` latent draws from the backend's training latent distribution.
pub fn synthesize_corpus(backend: &LinearAeBackend, n: usize, seed: u64) -> Result<Vec<Image>> {
    synthesize_scaled(backend, n, 1.0, seed)
}

/// As [`synthesize_corpus`] with every latent draw multiplied by `scale`.
/// Small scales give images close to the backend mean.
pub fn synthesize_scaled(
    backend: &LinearAeBackend,
    n: usize,
    scale: f64,
    seed: u64,
) -> Result<Vec<Image>> {
    if n == 0 {
        return Err(Error::InvalidConfig("synthesis count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: Vec<f64> = backend
                .sample_latent(&mut rng)?
                .into_iter()
                .map(|v| v * scale)
                .collect();
            backend.decode(&z)
        })
        .collect()
}

/// Errors if any id appears in both sets.
pub fn ensure_disjoint<'a>(
    a: impl IntoIterator<Item = &'a str>,
    b: impl IntoIterator<Item = &'a str>,
) -> Result<()> {
    let left: HashSet<&str> = a.into_iter().collect();
    let mut shared: Vec<&str> = b.into_iter().filter(|id| left.contains(id)).collect();
    shared.sort_unstable();
    shared.dedup();
    match shared.first() {
        None => Ok(()),
        Some(first) => Err(Error::CorpusOverlap {
            count: shared.len(),
            example: first.to_string(),
        }),
    }
}

pub fn ensure_unique_ids(corpus: &[CorpusImage]) -> Result<()> {
    let mut seen = HashSet::new();
    for c in corpus {
        if !seen.insert(c.id.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "duplicate image id {:?}",
                c.id
            )));
        }
    }
    Ok(())
}

/// Writes one PNG per image plus `manifest.csv`.
pub fn save_corpus(dir: impl AsRef<Path>, corpus: &[CorpusImage]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = dir.join(MANIFEST);
    let mut w = csv::Writer::from_path(&manifest)?;
    for c in corpus {
        let file = format!("{}.png", c.id);
        save_image(&c.image, dir.join(&file))?;
        w.serialize(ManifestRow {
            id: c.id.clone(),
            file,
            label: c.truth,
            source: c.source.clone(),
        })?;
    }
    w.flush().map_err(|e| Error::io(&manifest, e))?;
    Ok(())
}

/// Loads a corpus directory. Without a manifest, images get `default_truth`
/// and the directory name as source.
pub fn load_corpus(dir: impl AsRef<Path>, default_truth: Decision) -> Result<Vec<CorpusImage>> {
    let dir = dir.as_ref();
    let manifest = dir.join(MANIFEST);
    let corpus = if manifest.exists() {
        let mut r = csv::Reader::from_path(&manifest)?;
        let mut out = Vec::new();
        for row in r.deserialize() {
            let row: ManifestRow = row?;
            let image = load_image(dir.join(&row.file))?;
            out.push(CorpusImage::new(row.id, image, row.label, row.source));
        }
        out
    } else {
        let mut files: Vec<_> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
            .collect();
        files.sort();
        let source = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        files
            .iter()
            .map(|p| {
                let id = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Ok(CorpusImage::new(
                    id,
                    load_image(p)?,
                    default_truth,
                    source.clone(),
                ))
            })
            .collect::<Result<Vec<_>>>()?
    };
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    ensure_unique_ids(&corpus)?;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{train_linear_backend, NoiseSigma};
    use crate::harness::texture::TextureFamily;

    fn backend() -> LinearAeBackend {
        let corpus = TextureFamily::new("t", 1.5, 0.5, 0.1)
            .corpus(20, 8, 8, 1)
            .unwrap();
        train_linear_backend(&corpus, 4, NoiseSigma::default(), 3).unwrap()
    }

    #[test]
    fn synthesis_is_seeded() {
        let b = backend();
        let one = synthesize_corpus(&b, 1, 9).unwrap();
        assert_eq!(one, synthesize_corpus(&b, 1, 9).unwrap());
        assert_ne!(one, synthesize_corpus(&b, 1, 10).unwrap());
        let many = synthesize_corpus(&b, 500, 9).unwrap();
        assert_eq!(many.len(), 500);
        assert!(many.iter().all(|img| img.dims() == one[0].dims()
            && img.pixels().iter().all(|p| (0.0..=1.0).contains(p))));
        assert!(synthesize_corpus(&b, 0, 9).is_err());
    }

    #[test]
    fn image_seed_depends_on_id_and_run() {
        assert_eq!(image_seed(1, "a"), image_seed(1, "a"));
        assert_ne!(image_seed(1, "a"), image_seed(1, "b"));
        assert_ne!(image_seed(1, "a"), image_seed(2, "a"));
    }

    #[test]
    fn disjointness() {
        assert!(ensure_disjoint(["a", "b"], ["c"]).is_ok());
        match ensure_disjoint(["a", "b"], ["b", "c", "a"]) {
            Err(Error::CorpusOverlap { count, example }) => {
                assert_eq!(count, 2);
                assert_eq!(example, "a");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let imgs = synthesize_corpus(&backend(), 3, 1).unwrap();
        let corpus = label(imgs, "s", Decision::Belonging, "synth");
        save_corpus(dir.path(), &corpus).unwrap();
        let back = load_corpus(dir.path(), Decision::NonBelonging).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[1].id, "s-00001");
        assert_eq!(back[1].truth, Decision::Belonging);
        assert_eq!(back[1].source, "synth");
        for (a, b) in corpus.iter().zip(&back) {
            for (p, q) in a.image.pixels().iter().zip(b.image.pixels()) {
                assert!((p - q).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }

        fs::remove_file(dir.path().join(MANIFEST)).unwrap();
        let bare = load_corpus(dir.path(), Decision::NonBelonging).unwrap();
        assert_eq!(bare[0].id, "s-00000");
        assert_eq!(bare[0].truth, Decision::NonBelonging);

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_corpus(empty.path(), Decision::Belonging),
            Err(Error::EmptyCorpus)
        ));
    }
}
