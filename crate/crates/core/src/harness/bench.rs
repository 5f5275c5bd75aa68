//! Wall-clock timing of double reconstruction over a corpus.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::corpus::CorpusImage;
use super::eval::{score_corpus, ScoringOptions};
use crate::backend::{CountingBackend, Reconstructor};
use crate::error::{Error, Result};
use crate::loss::LossMetric;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub backend_id: String,
    pub metric: LossMetric,
    pub images: usize,
    pub total_seconds: f64,
    pub mean_seconds_per_image: f64,
    pub reconstruct_calls: usize,
}

/// Scores every image once and checks the backend saw exactly two
/// reconstruct calls per image.
pub fn bench<R: Reconstructor + ?Sized>(
    backend: &R,
    corpus: &[CorpusImage],
    opts: &ScoringOptions,
) -> Result<BenchReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let counting = CountingBackend::new(backend);
    let start = Instant::now();
    score_corpus(&counting, corpus, opts)?;
    let total = start.elapsed().as_secs_f64();
    let calls = counting.calls();
    if calls != 2 * corpus.len() {
        return Err(Error::CallCount {
            expected: 2 * corpus.len(),
            actual: calls,
        });
    }
    Ok(BenchReport {
        backend_id: backend.id().to_string(),
        metric: opts.metric,
        images: corpus.len(),
        total_seconds: total,
        mean_seconds_per_image: total / corpus.len() as f64,
        reconstruct_calls: calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::IdentityBackend;
    use crate::image::Image;
    use crate::threshold::Decision;

    #[test]
    fn one_image_two_calls() {
        let img = Image::new(4, 4, 1, vec![0.25; 16]).unwrap();
        let corpus = [CorpusImage::new("x", img, Decision::Belonging, "t")];
        let r = bench(&IdentityBackend, &corpus, &ScoringOptions::default()).unwrap();
        assert_eq!(r.reconstruct_calls, 2);
        assert_eq!(r.images, 1);
        assert_eq!(r.backend_id, "identity");
        assert!(bench(&IdentityBackend, &[], &ScoringOptions::default()).is_err());
    }
}
