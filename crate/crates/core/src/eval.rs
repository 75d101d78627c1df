//! Dataset-level evaluation: pairs HDR files by name, prepares each pair on
//! a shared intensity scale, scores it, and aggregates a report.
//!
//! Preparation normalizes both images of a pair by one shared maximum (so
//! identical images stay at identity metrics) and tone-maps the normalized
//! planes logarithmically. PSNR, Weber PSNR, color distance, and the
//! composite loss are measured on the tone-mapped planes; SSIM and MS-SSIM
//! on the normalized linear planes.

use std::collections::BTreeSet;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{pfm, CodecError};
use crate::image::HdrImage;
use crate::loss::{
    composite_loss, loss_color, psnr, psnr_weber, FeatureExtractor, IdentityExtractor,
    ImageBatch, LossError, LossWeights, PyramidExtractor, WeberParams,
};
use crate::preprocess::{tonemap_mu, PreprocessError, TonemapParams};
use crate::ssim::{ms_ssim, ssim, SsimParams};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("pair shape mismatch: {}x{} vs {}x{}", left.0, left.1, right.0, right.1)]
    Pairing { left: (usize, usize), right: (usize, usize) },
    #[error("degenerate pair: both images are all-zero")]
    DegenerateAllZero,
    #[error("no matching .pfm pairs between {gt} and {rec}")]
    EmptyDataset { gt: PathBuf, rec: PathBuf },
    #[error("cannot read {path}")]
    Read {
        path: PathBuf,
        #[source]
        source: CodecError,
    },
    #[error("cannot list {path}")]
    ListDir {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Metric(#[from] LossError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

/// Which built-in feature extractor the composite loss uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorChoice {
    Identity,
    Pyramid,
}

impl ExtractorChoice {
    pub fn build(self) -> Box<dyn FeatureExtractor<f64> + Send + Sync> {
        match self {
            ExtractorChoice::Identity => Box::new(IdentityExtractor),
            ExtractorChoice::Pyramid => Box::new(PyramidExtractor::default()),
        }
    }
}

/// Full parameterization of the measurement protocol. The metric domains
/// are fixed: PSNR-family metrics and losses on tone-mapped planes, the
/// SSIM family on normalized linear planes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalConfig {
    pub tonemap: TonemapParams,
    pub ssim: SsimParams,
    pub weber: WeberParams,
    pub weights: LossWeights,
    pub extractor: ExtractorChoice,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tonemap: TonemapParams::default(),
            ssim: SsimParams::default(),
            weber: WeberParams::default(),
            weights: LossWeights::default(),
            extractor: ExtractorChoice::Identity,
        }
    }
}

/// A pair on the shared scale: normalized linear planes and their
/// tone-mapped counterparts.
#[derive(Debug, Clone)]
pub struct PreparedPair {
    pub linear_gt: HdrImage<f64>,
    pub linear_rec: HdrImage<f64>,
    pub mapped_gt: HdrImage<f64>,
    pub mapped_rec: HdrImage<f64>,
}

/// Normalizes both images by their joint maximum and tone-maps the result.
pub fn prepare_pair(
    gt: &HdrImage<f64>,
    rec: &HdrImage<f64>,
    tonemap: &TonemapParams,
) -> Result<PreparedPair, EvalError> {
    if gt.shape() != rec.shape() {
        return Err(EvalError::Pairing { left: gt.shape(), right: rec.shape() });
    }
    let max = gt
        .pixels()
        .iter()
        .chain(rec.pixels())
        .cloned()
        .fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(EvalError::DegenerateAllZero);
    }
    let scaled = |img: &HdrImage<f64>| {
        let pixels = img.pixels().iter().map(|&v| v / max).collect();
        HdrImage::new_unit(img.width(), img.height(), pixels)
            .expect("shared-max scaling stays in [0, 1]")
    };
    let linear_gt = scaled(gt);
    let linear_rec = scaled(rec);
    let mapped_gt = tonemap_mu(&linear_gt, tonemap)?;
    let mapped_rec = tonemap_mu(&linear_rec, tonemap)?;
    Ok(PreparedPair { linear_gt, linear_rec, mapped_gt, mapped_rec })
}

/// Scores of one evaluated pair. PSNR fields may be infinite; everything
/// else is finite.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalRecord {
    pub pair: String,
    #[serde(with = "inf_float")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub ms_ssim: f64,
    #[serde(with = "inf_float")]
    pub weber_psnr_db: f64,
    pub color: f64,
    pub composite: f64,
}

/// Evaluates one prepared pair under the configured protocol.
pub fn evaluate_pair(
    pair_id: impl Into<String>,
    gt: &HdrImage<f64>,
    rec: &HdrImage<f64>,
    cfg: &EvalConfig,
) -> Result<EvalRecord, EvalError> {
    let prepared = prepare_pair(gt, rec, &cfg.tonemap)?;
    let extractor = cfg.extractor.build();

    let psnr_db = psnr(&prepared.mapped_gt, &prepared.mapped_rec, cfg.ssim.bit_depth)?;
    let weber_psnr_db = psnr_weber(&prepared.mapped_gt, &prepared.mapped_rec, &cfg.weber)?;
    let mapped_batch =
        ImageBatch::single(prepared.mapped_gt.clone(), prepared.mapped_rec.clone())?;
    let color = loss_color(&mapped_batch, cfg.weber.bit_depth);
    let composite = composite_loss(
        &mapped_batch,
        &cfg.weights,
        extractor.as_ref(),
        &cfg.weber,
        &cfg.ssim,
    )?;
    let ssim_value = ssim(&prepared.linear_gt, &prepared.linear_rec, &cfg.ssim)?;
    let ms_ssim_value = ms_ssim(&prepared.linear_gt, &prepared.linear_rec, &cfg.ssim)?;

    Ok(EvalRecord {
        pair: pair_id.into(),
        psnr_db,
        ssim: ssim_value,
        ms_ssim: ms_ssim_value,
        weber_psnr_db,
        color,
        composite: composite.total,
    })
}

/// One value per metric column.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricRow {
    #[serde(with = "inf_float")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub ms_ssim: f64,
    #[serde(with = "inf_float")]
    pub weber_psnr_db: f64,
    pub color: f64,
    pub composite: f64,
}

/// How many records were left out of each PSNR aggregate because they were
/// infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct InfiniteExclusions {
    pub psnr_db: usize,
    pub weber_psnr_db: usize,
}

/// Per-pair records plus mean and sample standard deviation per metric.
/// Infinite PSNR values are excluded from the aggregates and counted in
/// `excluded_infinite`; if every value of a column is infinite, its mean is
/// reported as infinite with a zero deviation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub records: Vec<EvalRecord>,
    pub mean: MetricRow,
    pub std: MetricRow,
    pub excluded_infinite: InfiniteExclusions,
}

fn mean_std(values: &[f64]) -> (f64, f64, usize) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let excluded = values.len() - finite.len();
    if finite.is_empty() {
        return (f64::INFINITY, 0.0, excluded);
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let std = if finite.len() <= 1 {
        0.0
    } else {
        (finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std, excluded)
}

impl EvalReport {
    pub fn from_records(records: Vec<EvalRecord>) -> Self {
        let column = |f: fn(&EvalRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
        let (psnr_mean, psnr_std, psnr_excluded) = mean_std(&column(|r| r.psnr_db));
        let (ssim_mean, ssim_std, _) = mean_std(&column(|r| r.ssim));
        let (ms_mean, ms_std, _) = mean_std(&column(|r| r.ms_ssim));
        let (weber_mean, weber_std, weber_excluded) = mean_std(&column(|r| r.weber_psnr_db));
        let (color_mean, color_std, _) = mean_std(&column(|r| r.color));
        let (composite_mean, composite_std, _) = mean_std(&column(|r| r.composite));
        Self {
            records,
            mean: MetricRow {
                psnr_db: psnr_mean,
                ssim: ssim_mean,
                ms_ssim: ms_mean,
                weber_psnr_db: weber_mean,
                color: color_mean,
                composite: composite_mean,
            },
            std: MetricRow {
                psnr_db: psnr_std,
                ssim: ssim_std,
                ms_ssim: ms_std,
                weber_psnr_db: weber_std,
                color: color_std,
                composite: composite_std,
            },
            excluded_infinite: InfiniteExclusions {
                psnr_db: psnr_excluded,
                weber_psnr_db: weber_excluded,
            },
        }
    }
}

fn pfm_names(dir: &Path) -> Result<BTreeSet<String>, EvalError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|source| EvalError::ListDir { path: dir.to_path_buf(), source })?;
    let mut names = BTreeSet::new();
    for entry in entries {
        let entry =
            entry.map_err(|source| EvalError::ListDir { path: dir.to_path_buf(), source })?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("pfm") {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.insert(name.to_string());
            }
        }
    }
    Ok(names)
}

/// Evaluates every identically named `.pfm` pair of the two directories, in
/// lexicographic name order. Unmatched names become warnings, returned
/// alongside the report. Pairs are scored in parallel; records are merged
/// in name order so the report is deterministic.
pub fn evaluate_dataset(
    gt_dir: &Path,
    rec_dir: &Path,
    cfg: &EvalConfig,
) -> Result<(EvalReport, Vec<String>), EvalError> {
    let gt_names = pfm_names(gt_dir)?;
    let rec_names = pfm_names(rec_dir)?;

    let mut warnings = Vec::new();
    for missing in gt_names.difference(&rec_names) {
        warnings.push(format!("no counterpart for {missing} in {}", rec_dir.display()));
    }
    for missing in rec_names.difference(&gt_names) {
        warnings.push(format!("no counterpart for {missing} in {}", gt_dir.display()));
    }

    let matched: Vec<&String> = gt_names.intersection(&rec_names).collect();
    if matched.is_empty() {
        return Err(EvalError::EmptyDataset {
            gt: gt_dir.to_path_buf(),
            rec: rec_dir.to_path_buf(),
        });
    }

    let records: Vec<EvalRecord> = matched
        .par_iter()
        .map(|name| {
            let read = |dir: &Path| -> Result<HdrImage<f64>, EvalError> {
                let path = dir.join(name.as_str());
                let image = pfm::read_pfm_file(&path)
                    .map_err(|source| EvalError::Read { path, source })?;
                Ok(image.to_f64())
            };
            evaluate_pair(name.as_str(), &read(gt_dir)?, &read(rec_dir)?, cfg)
        })
        .collect::<Result<_, _>>()?;

    Ok((EvalReport::from_records(records), warnings))
}

/// Output encoding for [`write_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

const CSV_HEADER: &str = "pair,psnr_db,ssim,ms_ssim,weber_psnr_db,color,composite";

fn csv_row(pair: &str, m: &MetricRow) -> String {
    format!(
        "{pair},{},{},{},{},{},{}",
        m.psnr_db, m.ssim, m.ms_ssim, m.weber_psnr_db, m.color, m.composite
    )
}

/// Renders a report deterministically. CSV carries one row per record plus
/// `__mean__` and `__std__` rows, with infinities spelled `inf`; JSON
/// mirrors the full report structure and round-trips losslessly.
pub fn write_report(report: &EvalReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for r in &report.records {
                let row = MetricRow {
                    psnr_db: r.psnr_db,
                    ssim: r.ssim,
                    ms_ssim: r.ms_ssim,
                    weber_psnr_db: r.weber_psnr_db,
                    color: r.color,
                    composite: r.composite,
                };
                out.push_str(&csv_row(&r.pair, &row));
                out.push('\n');
            }
            out.push_str(&csv_row("__mean__", &report.mean));
            out.push('\n');
            out.push_str(&csv_row("__std__", &report.std));
            out.push('\n');
            out.into_bytes()
        }
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
            out.push(b'\n');
            out
        }
    }
}

/// Serializes possibly infinite metrics as the string `"inf"` (JSON has no
/// infinity literal) and reads both spellings back.
mod inf_float {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            serializer.serialize_f64(*v)
        } else if *v > 0.0 {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_str("-inf")
        }
    }

    struct InfVisitor;

    impl Visitor<'_> for InfVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or the string \"inf\"/\"-inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("unexpected metric string {other:?}"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        deserializer.deserialize_any(InfVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::loss_color;
    use crate::ssim::SsimMode;

    fn image(w: usize, h: usize, f: impl Fn(usize) -> f64) -> HdrImage<f64> {
        HdrImage::new(w, h, (0..w * h * 3).map(f).collect()).unwrap()
    }

    fn small_cfg() -> EvalConfig {
        EvalConfig {
            ssim: SsimParams { mode: SsimMode::Global, ..SsimParams::default() },
            ..EvalConfig::default()
        }
    }

    #[test]
    fn identity_pair_scores_identity_values() {
        let gt = image(16, 16, |i| (i % 97) as f64 * 0.3 + 0.5);
        let record = evaluate_pair("self", &gt, &gt.clone(), &small_cfg()).unwrap();
        assert_eq!(record.psnr_db, f64::INFINITY);
        assert_eq!(record.weber_psnr_db, f64::INFINITY);
        assert_eq!(record.ssim, 1.0);
        assert_eq!(record.ms_ssim, 1.0);
        assert_eq!(record.color, 0.0);
        assert_eq!(record.composite, 0.0);
    }

    #[test]
    fn halved_reconstruction_is_imperfect() {
        let gt = image(16, 16, |i| (i % 31) as f64 + 1.0);
        let rec = image(16, 16, |i| ((i % 31) as f64 + 1.0) * 0.5);
        let record = evaluate_pair("half", &gt, &rec, &small_cfg()).unwrap();
        assert!(record.psnr_db.is_finite());
        assert!(record.ssim < 1.0);
        assert!(record.composite > 0.0);
    }

    #[test]
    fn record_matches_direct_ops_on_prepared_planes() {
        let cfg = small_cfg();
        let gt = image(16, 16, |i| (i % 53) as f64 * 1.7);
        let rec = image(16, 16, |i| ((i * 7 + 3) % 53) as f64 * 1.6);
        let record = evaluate_pair("direct", &gt, &rec, &cfg).unwrap();

        let prepared = prepare_pair(&gt, &rec, &cfg.tonemap).unwrap();
        let batch =
            ImageBatch::single(prepared.mapped_gt.clone(), prepared.mapped_rec.clone()).unwrap();
        assert_eq!(
            record.psnr_db,
            psnr(&prepared.mapped_gt, &prepared.mapped_rec, cfg.ssim.bit_depth).unwrap()
        );
        assert_eq!(record.color, loss_color(&batch, cfg.weber.bit_depth));
        assert_eq!(record.ssim, ssim(&prepared.linear_gt, &prepared.linear_rec, &cfg.ssim).unwrap());
        assert_eq!(
            record.ms_ssim,
            ms_ssim(&prepared.linear_gt, &prepared.linear_rec, &cfg.ssim).unwrap()
        );
    }

    #[test]
    fn shared_scale_preserves_relative_brightness() {
        let gt = image(8, 8, |_| 4.0);
        let rec = image(8, 8, |_| 2.0);
        let prepared = prepare_pair(&gt, &rec, &TonemapParams::default()).unwrap();
        assert_eq!(prepared.linear_gt.pixels()[0], 1.0);
        assert_eq!(prepared.linear_rec.pixels()[0], 0.5);
    }

    #[test]
    fn degenerate_and_mismatched_pairs_error() {
        let zero = image(8, 8, |_| 0.0);
        assert!(matches!(
            prepare_pair(&zero, &zero.clone(), &TonemapParams::default()),
            Err(EvalError::DegenerateAllZero)
        ));
        let gt = image(8, 8, |_| 1.0);
        let rec = image(8, 4, |_| 1.0);
        assert!(matches!(
            prepare_pair(&gt, &rec, &TonemapParams::default()),
            Err(EvalError::Pairing { .. })
        ));
    }

    #[test]
    fn aggregates_of_single_record_equal_the_record() {
        let gt = image(16, 16, |i| (i % 13) as f64 + 0.5);
        let rec = image(16, 16, |i| (i % 13) as f64 + 0.7);
        let record = evaluate_pair("only", &gt, &rec, &small_cfg()).unwrap();
        let report = EvalReport::from_records(vec![record.clone()]);
        assert_eq!(report.mean.psnr_db, record.psnr_db);
        assert_eq!(report.mean.composite, record.composite);
        assert_eq!(report.std.psnr_db, 0.0);
        assert_eq!(report.std.composite, 0.0);
        assert_eq!(report.excluded_infinite.psnr_db, 0);
    }

    #[test]
    fn infinite_records_are_excluded_from_aggregates() {
        let mk = |pair: &str, psnr_db: f64| EvalRecord {
            pair: pair.into(),
            psnr_db,
            ssim: 1.0,
            ms_ssim: 1.0,
            weber_psnr_db: psnr_db,
            color: 0.0,
            composite: 0.0,
        };
        let report = EvalReport::from_records(vec![
            mk("a", f64::INFINITY),
            mk("b", 30.0),
            mk("c", 40.0),
        ]);
        assert_eq!(report.mean.psnr_db, 35.0);
        assert_eq!(report.excluded_infinite.psnr_db, 1);
        assert_eq!(report.excluded_infinite.weber_psnr_db, 1);
        assert!((report.std.psnr_db - 50f64.sqrt()).abs() < 1e-12);

        let all_inf = EvalReport::from_records(vec![mk("a", f64::INFINITY)]);
        assert_eq!(all_inf.mean.psnr_db, f64::INFINITY);
        assert_eq!(all_inf.std.psnr_db, 0.0);
    }

    #[test]
    fn csv_layout_and_infinity_rendering() {
        let record = EvalRecord {
            pair: "x.pfm".into(),
            psnr_db: f64::INFINITY,
            ssim: 1.0,
            ms_ssim: 1.0,
            weber_psnr_db: f64::INFINITY,
            color: 0.0,
            composite: 0.0,
        };
        let report = EvalReport::from_records(vec![record.clone(), record]);
        let csv = String::from_utf8(write_report(&report, ReportFormat::Csv)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5); // header + 2 records + mean + std
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("x.pfm,inf,1,1,inf,0,0"));
        assert!(lines[3].starts_with("__mean__,"));
        assert!(lines[4].starts_with("__std__,"));
    }

    #[test]
    fn json_round_trips() {
        let record = EvalRecord {
            pair: "y.pfm".into(),
            psnr_db: f64::INFINITY,
            ssim: 0.75,
            ms_ssim: 0.5,
            weber_psnr_db: 33.25,
            color: 1.5,
            composite: 0.125,
        };
        let report = EvalReport::from_records(vec![record]);
        let bytes = write_report(&report, ReportFormat::Json);
        let back: EvalReport = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, report);
    }
}
