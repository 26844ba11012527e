//! CSV formats: the degradation manifest and the score table.

use std::path::Path;

use crate::error::{Error, Result};

use super::degrade::DegradationMode;
use super::metrics::ScoreRow;

pub const MANIFEST_HEADER: [&str; 5] = ["image", "gt_path", "mode", "seed", "params"];
pub const SCORE_HEADER: [&str; 4] = ["image", "method", "psnr_db", "ssim"];

/// One dataset entry: an image id, the ground-truth path, and the
/// degradation that produced (or will produce) its low-resolution input.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub image: String,
    pub gt_path: String,
    pub mode: DegradationMode,
    pub seed: u64,
    pub params: String,
}

fn manifest_err(path: &Path, record: usize, reason: impl Into<String>) -> Error {
    Error::Manifest {
        path: path.into(),
        record,
        reason: reason.into(),
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| manifest_err(path, 0, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| manifest_err(path, 0, e.to_string()))?
        .clone();
    let header_ok =
        headers.len() == MANIFEST_HEADER.len() && headers.iter().eq(MANIFEST_HEADER);
    if !header_ok {
        return Err(manifest_err(
            path,
            0,
            format!(
                "expected header {:?}, got {:?}",
                MANIFEST_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| manifest_err(path, idx + 1, e.to_string()))?;
        if record.len() != MANIFEST_HEADER.len() {
            return Err(manifest_err(
                path,
                idx + 1,
                format!("expected {} fields, got {}", MANIFEST_HEADER.len(), record.len()),
            ));
        }
        let mode: DegradationMode = record[2]
            .parse()
            .map_err(|e: Error| manifest_err(path, idx + 1, e.to_string()))?;
        let seed: u64 = record[3]
            .parse()
            .map_err(|_| manifest_err(path, idx + 1, format!("bad seed {:?}", &record[3])))?;
        rows.push(ManifestRow {
            image: record[0].to_string(),
            gt_path: record[1].to_string(),
            mode,
            seed,
            params: record[4].to_string(),
        });
    }
    Ok(rows)
}

pub fn write_manifest(path: impl AsRef<Path>, rows: &[ManifestRow]) -> Result<()> {
    let path = path.as_ref();
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| manifest_err(path, 0, e.to_string()))?;
    writer
        .write_record(MANIFEST_HEADER)
        .map_err(|e| manifest_err(path, 0, e.to_string()))?;
    for (idx, row) in rows.iter().enumerate() {
        writer
            .write_record([
                row.image.as_str(),
                row.gt_path.as_str(),
                row.mode.as_str(),
                &row.seed.to_string(),
                row.params.as_str(),
            ])
            .map_err(|e| manifest_err(path, idx + 1, e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| manifest_err(path, rows.len(), e.to_string()))?;
    Ok(())
}

/// Split a `key=value;key=value` params field; empty input gives an empty
/// list, a bare key an empty value.
pub fn parse_params(s: &str) -> Vec<(String, String)> {
    s.split(';')
        .filter(|part| !part.trim().is_empty())
        .map(|part| match part.split_once('=') {
            Some((k, v)) => (k.trim().to_string(), v.trim().to_string()),
            None => (part.trim().to_string(), String::new()),
        })
        .collect()
}

pub fn param_value<'a>(params: &'a [(String, String)], key: &str) -> Option<&'a str> {
    params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

/// PSNR column formatting: fixed four decimals, `inf` for a perfect match.
pub fn format_psnr(psnr_db: f64) -> String {
    if psnr_db.is_infinite() {
        "inf".to_string()
    } else {
        format!("{psnr_db:.4}")
    }
}

pub fn write_scores(path: impl AsRef<Path>, rows: &[ScoreRow]) -> Result<()> {
    let path = path.as_ref();
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| manifest_err(path, 0, e.to_string()))?;
    writer
        .write_record(SCORE_HEADER)
        .map_err(|e| manifest_err(path, 0, e.to_string()))?;
    for (idx, row) in rows.iter().enumerate() {
        writer
            .write_record([
                row.image.as_str(),
                row.method.as_str(),
                &format_psnr(row.psnr_db),
                &format!("{:.4}", row.ssim),
            ])
            .map_err(|e| manifest_err(path, idx + 1, e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| manifest_err(path, rows.len(), e.to_string()))?;
    Ok(())
}
