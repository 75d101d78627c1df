//! Optional JSON configuration mirroring the evaluation protocol, plus the
//! attention seed/reduction. Unknown keys are rejected; command-line flags
//! override file values.

use std::path::Path;

use hdrkit::eval::{EvalConfig, ExtractorChoice};
use hdrkit::preprocess::TonemapParams;
use hdrkit::ssim::SsimMode;
use serde::Deserialize;

use crate::commands::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub mu: Option<f64>,
    pub ssim: Option<SsimSection>,
    pub weber: Option<WeberSection>,
    pub weights: Option<WeightsSection>,
    pub extractor: Option<ExtractorChoice>,
    pub seed: Option<u64>,
    pub reduction: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimSection {
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub bit_depth: Option<u32>,
    pub scales: Option<u32>,
    pub mode: Option<SsimMode>,
    pub window_size: Option<usize>,
    pub window_sigma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeberSection {
    pub fraction: Option<f64>,
    pub bit_depth: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Builds the evaluation config: defaults, overlaid with file values,
    /// validated as a whole.
    pub fn eval_config(&self) -> Result<EvalConfig, CliError> {
        let mut cfg = EvalConfig::default();
        if let Some(mu) = self.mu {
            cfg.tonemap = TonemapParams::new(mu)
                .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        }
        if let Some(s) = &self.ssim {
            if let Some(v) = s.k1 {
                cfg.ssim.k1 = v;
            }
            if let Some(v) = s.k2 {
                cfg.ssim.k2 = v;
            }
            if let Some(v) = s.bit_depth {
                cfg.ssim.bit_depth = v;
            }
            if let Some(v) = s.scales {
                cfg.ssim.scales = v;
            }
            if let Some(v) = s.mode {
                cfg.ssim.mode = v;
            }
            if let Some(v) = s.window_size {
                cfg.ssim.window_size = v;
            }
            if let Some(v) = s.window_sigma {
                cfg.ssim.window_sigma = v;
            }
        }
        if let Some(w) = &self.weber {
            if let Some(v) = w.fraction {
                cfg.weber.fraction = v;
            }
            if let Some(v) = w.bit_depth {
                cfg.weber.bit_depth = v;
            }
        }
        if let Some(w) = &self.weights {
            if let Some(v) = w.alpha {
                cfg.weights.alpha = v;
            }
            if let Some(v) = w.beta {
                cfg.weights.beta = v;
            }
            if let Some(v) = w.delta {
                cfg.weights.delta = v;
            }
            if let Some(v) = w.gamma {
                cfg.weights.gamma = v;
            }
            if let Some(v) = w.lambda {
                cfg.weights.lambda = v;
            }
        }
        if let Some(e) = self.extractor {
            cfg.extractor = e;
        }
        cfg.ssim
            .validate()
            .and_then(|()| cfg.weber.validate())
            .and_then(|()| cfg.weights.validate())
            .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        Ok(cfg)
    }
}
