//! CSV export of per-image records for plotting signal distributions.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::ReconstructionRecord;

/// Writes one row per record: `image_id,metric,l1,l2,ratio,homogeneity,calibrated,degenerate`.
pub fn write_records_csv<W: Write>(out: W, records: &[ReconstructionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_records_csv(path: impl AsRef<Path>, records: &[ReconstructionRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records_csv(file, records)
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<ReconstructionRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| Ok(row?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossMetric;

    #[test]
    fn round_trip() {
        let recs = vec![
            ReconstructionRecord::from_losses(LossMetric::Mse, 0.3, 0.1, 0.5).with_id("a"),
            ReconstructionRecord::from_losses(LossMetric::Mse, 0.0, 0.0, 1.0).with_id("b"),
        ];
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("image_id,metric,l1,l2,ratio,homogeneity,calibrated,degenerate\n"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        save_records_csv(&p, &recs).unwrap();
        assert_eq!(read_records_csv(&p).unwrap(), recs);
    }
}
