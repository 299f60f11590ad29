//! `key = value` pipeline configuration.
//!
//! Unknown keys are rejected so typos fail loudly. Values not mentioned keep
//! their defaults, which are the published loss weights and hyperparameters.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::EvalOptions;
use crate::optim::{OptimizerConfig, Reduction};
use crate::synth::MAX_SPARSE_POINTS;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "DND_CONFIG";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub frames_dir: PathBuf,
    pub output_dir: PathBuf,
    pub optimizer: OptimizerConfig,
    pub max_sparse_points: usize,
    pub median_scaling: bool,
    pub min_depth: Option<f64>,
    pub max_depth: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            frames_dir: PathBuf::from("frames"),
            output_dir: PathBuf::from("out"),
            optimizer: OptimizerConfig::default(),
            max_sparse_points: MAX_SPARSE_POINTS,
            median_scaling: false,
            min_depth: None,
            max_depth: None,
        }
    }
}

pub const KEYS: [&str; 24] = [
    "frames_dir",
    "output_dir",
    "seed",
    "steps",
    "lr",
    "beta1",
    "beta2",
    "adam_eps",
    "lambda_depth",
    "lambda_photometric",
    "lambda_smoothness",
    "lambda_flow_shape",
    "lambda_normal_scale",
    "alpha",
    "ground_threshold_deg",
    "patch_size",
    "sample_ratio",
    "detach_anchor",
    "smoothness_reduction",
    "resample_each_step",
    "joint",
    "max_sparse_points",
    "median_scaling",
    "depth_range",
];

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Config(format!("bad value {raw:?} for {key}")))
}

fn flag(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean {raw:?} for {key}"))),
    }
}

impl PipelineConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let o = &mut self.optimizer;
        match key {
            "frames_dir" => self.frames_dir = PathBuf::from(raw),
            "output_dir" => self.output_dir = PathBuf::from(raw),
            "seed" => o.seed = value(key, raw)?,
            "steps" => o.steps = value(key, raw)?,
            "lr" => o.adam.lr = value(key, raw)?,
            "beta1" => o.adam.beta1 = value(key, raw)?,
            "beta2" => o.adam.beta2 = value(key, raw)?,
            "adam_eps" => o.adam.eps = value(key, raw)?,
            "lambda_depth" => o.weights.depth = value(key, raw)?,
            "lambda_photometric" => o.weights.photometric = value(key, raw)?,
            "lambda_smoothness" => o.weights.smoothness = value(key, raw)?,
            "lambda_flow_shape" => o.weights.flow_shape = value(key, raw)?,
            "lambda_normal_scale" => o.weights.normal_scale = value(key, raw)?,
            "alpha" => o.settings.alpha = value(key, raw)?,
            "ground_threshold_deg" => o.settings.ground_threshold_deg = value(key, raw)?,
            "patch_size" => o.settings.patch_size = value(key, raw)?,
            "sample_ratio" => o.settings.sample_ratio = value(key, raw)?,
            "detach_anchor" => o.settings.detach_anchor = flag(key, raw)?,
            "smoothness_reduction" => {
                o.settings.smoothness_reduction = match raw {
                    "mean" => Reduction::Mean,
                    "sum" => Reduction::Sum,
                    _ => return Err(Error::Config(format!("smoothness_reduction is mean or sum, not {raw:?}"))),
                }
            }
            "resample_each_step" => o.resample_each_step = flag(key, raw)?,
            "joint" => o.joint = flag(key, raw)?,
            "max_sparse_points" => self.max_sparse_points = value(key, raw)?,
            "median_scaling" => self.median_scaling = flag(key, raw)?,
            "depth_range" => {
                (self.min_depth, self.max_depth) = if raw == "none" {
                    (None, None)
                } else {
                    let (lo, hi) = raw
                        .split_once(',')
                        .ok_or_else(|| Error::Config(format!("depth_range is `min,max` or `none`, not {raw:?}")))?;
                    (Some(value(key, lo.trim())?), Some(value(key, hi.trim())?))
                }
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| Error::Line { line: i + 1, message: format!("expected key = value, found {line:?}") })?;
            cfg.set(key.trim(), raw.trim()).map_err(|e| Error::Line { line: i + 1, message: e.to_string() })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.eval_options().map(|_| ())
    }

    pub fn eval_options(&self) -> Result<EvalOptions> {
        let clamp = match (self.min_depth, self.max_depth) {
            (Some(lo), Some(hi)) if lo > 0.0 && lo < hi => Some((lo, hi)),
            (None, None) => None,
            (lo, hi) => return Err(Error::Config(format!("bad depth range {lo:?}..{hi:?}"))),
        };
        Ok(EvalOptions { median_scaling: self.median_scaling, clamp })
    }

    /// Every key with its current value, in a form [`PipelineConfig::parse`] accepts.
    pub fn to_text(&self) -> String {
        let o = &self.optimizer;
        let range = match (self.min_depth, self.max_depth) {
            (Some(lo), Some(hi)) => format!("{lo},{hi}"),
            _ => "none".into(),
        };
        let reduction = match o.settings.smoothness_reduction {
            Reduction::Mean => "mean",
            Reduction::Sum => "sum",
        };
        let values: [String; 24] = [
            self.frames_dir.display().to_string(),
            self.output_dir.display().to_string(),
            o.seed.to_string(),
            o.steps.to_string(),
            o.adam.lr.to_string(),
            o.adam.beta1.to_string(),
            o.adam.beta2.to_string(),
            o.adam.eps.to_string(),
            o.weights.depth.to_string(),
            o.weights.photometric.to_string(),
            o.weights.smoothness.to_string(),
            o.weights.flow_shape.to_string(),
            o.weights.normal_scale.to_string(),
            o.settings.alpha.to_string(),
            o.settings.ground_threshold_deg.to_string(),
            o.settings.patch_size.to_string(),
            o.settings.sample_ratio.to_string(),
            o.settings.detach_anchor.to_string(),
            reduction.into(),
            o.resample_each_step.to_string(),
            o.joint.to_string(),
            self.max_sparse_points.to_string(),
            self.median_scaling.to_string(),
            range,
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_published_values() {
        let c = PipelineConfig::default();
        let w = c.optimizer.weights;
        assert_eq!((w.depth, w.photometric, w.smoothness, w.flow_shape, w.normal_scale), (0.001, 1.0, 0.3, 0.1, 0.001));
        assert_eq!(c.optimizer.settings.alpha, 0.85);
        assert_eq!(c.optimizer.settings.ground_threshold_deg, 15.0);
        assert_eq!(c.optimizer.settings.patch_size, 20);
        assert_eq!(c.optimizer.settings.sample_ratio, 0.3);
        assert_eq!((c.optimizer.adam.beta1, c.optimizer.adam.beta2), (0.9, 0.999));
        assert_eq!(c.max_sparse_points, 200);
    }

    #[test]
    fn parse_overrides_and_comments() {
        let c = PipelineConfig::parse("# run\nsteps = 10\nlambda_flow_shape=0 # ablation\n\ndepth_range = 0.5, 12\n").unwrap();
        assert_eq!(c.optimizer.steps, 10);
        assert_eq!(c.optimizer.weights.flow_shape, 0.0);
        assert_eq!(c.eval_options().unwrap().clamp, Some((0.5, 12.0)));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_line() {
        match PipelineConfig::parse("steps = 3\nlamda_depth = 1\n") {
            Err(Error::Line { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("lamda_depth"));
            }
            other => panic!("expected a line error, got {other:?}"),
        }
        assert!(PipelineConfig::parse("steps 3\n").is_err());
        assert!(PipelineConfig::parse("joint = maybe\n").is_err());
        assert!(PipelineConfig::parse("lr = -1\n").is_err());
    }

    #[test]
    fn text_round_trip_covers_every_key() {
        let mut c = PipelineConfig::default();
        c.set("seed", "42").unwrap();
        c.set("smoothness_reduction", "sum").unwrap();
        c.set("depth_range", "1,10").unwrap();
        let text = c.to_text();
        assert_eq!(text.lines().count(), KEYS.len());
        assert_eq!(PipelineConfig::parse(&text).unwrap(), c);
    }
}
