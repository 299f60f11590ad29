//! Depth error metrics, median scaling and the human/whole-image split.

use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::{lower_median, pairwise_sum};
use crate::raster::{same_dims, DepthField, InstanceMask, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Whole image (foreground plus background).
    All,
    /// Pedestrian pixels only.
    Humans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    None,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub count: usize,
    pub region: Region,
    pub scaling: Scaling,
}

impl MetricReport {
    pub fn values(&self) -> [f64; 7] {
        [self.abs_rel, self.sq_rel, self.rmse, self.rmse_log, self.delta1, self.delta2, self.delta3]
    }
}

pub const METRIC_NAMES: [&str; 7] = ["abs_rel", "sq_rel", "rmse", "rmse_log", "d1", "d2", "d3"];

/// Metrics over pixels valid in both maps (and inside `region`, if given).
pub fn compute_metrics(pred: &DepthField, gt: &DepthField, region: Option<&Mask>) -> Result<MetricReport> {
    same_dims(pred.dims(), gt.dims())?;
    if let Some(m) = region {
        same_dims(pred.dims(), m.dims())?;
    }
    let idx: Vec<usize> = (0..pred.len())
        .filter(|&i| pred.is_valid(i) && gt.is_valid(i) && region.is_none_or(|m| m.bits[i]))
        .collect();
    if idx.is_empty() {
        return Err(Error::Empty("no pixel is valid in both depth maps".into()));
    }
    let n = idx.len() as f64;
    let (p, g) = (pred.values(), gt.values());
    let mean = |f: &dyn Fn(f64, f64) -> f64| pairwise_sum(&idx.iter().map(|&i| f(p[i], g[i])).collect::<Vec<_>>()) / n;
    let delta = |t: f64| mean(&|a, b| if (a / b).max(b / a) < t { 1.0 } else { 0.0 });
    Ok(MetricReport {
        abs_rel: mean(&|a, b| (a - b).abs() / b),
        sq_rel: mean(&|a, b| (a - b) * (a - b) / b),
        rmse: mean(&|a, b| (a - b) * (a - b)).sqrt(),
        rmse_log: mean(&|a, b| (a.ln() - b.ln()).powi(2)).sqrt(),
        delta1: delta(1.25),
        delta2: delta(1.25f64.powi(2)),
        delta3: delta(1.25f64.powi(3)),
        count: idx.len(),
        region: Region::All,
        scaling: Scaling::None,
    })
}

/// Rescales `pred` by `median(gt) / median(pred)` over co-valid pixels.
pub fn median_scale(pred: &DepthField, gt: &DepthField) -> Result<(DepthField, f64)> {
    same_dims(pred.dims(), gt.dims())?;
    let co: Vec<usize> = (0..pred.len()).filter(|&i| pred.is_valid(i) && gt.is_valid(i)).collect();
    let pick = |d: &DepthField| lower_median(&co.iter().map(|&i| d.values()[i]).collect::<Vec<_>>());
    let (Some(mp), Some(mg)) = (pick(pred), pick(gt)) else {
        return Err(Error::Empty("median scaling needs a co-valid pixel".into()));
    };
    if !(mp > 0.0 && mg > 0.0) {
        return Err(Error::DegenerateGeometry("zero median depth".into()));
    }
    let scale = mg / mp;
    Ok((pred.scaled(scale), scale))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitReport {
    pub all: MetricReport,
    /// Absent when no evaluated pixel lies on a pedestrian.
    pub humans: Option<MetricReport>,
}

pub fn split_eval(pred: &DepthField, gt: &DepthField, instances: &InstanceMask) -> Result<SplitReport> {
    let all = compute_metrics(pred, gt, None)?;
    let humans = match compute_metrics(pred, gt, Some(&instances.humans())) {
        Ok(r) => Some(MetricReport { region: Region::Humans, ..r }),
        Err(Error::Empty(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SplitReport { all, humans })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalOptions {
    pub median_scaling: bool,
    /// Keep only ground truth inside `[min, max]` and clip predictions to it.
    pub clamp: Option<(f64, f64)>,
}

/// Full protocol: optional clamp, optional median scaling, then the split.
pub fn evaluate(pred: &DepthField, gt: &DepthField, instances: &InstanceMask, opts: &EvalOptions) -> Result<SplitReport> {
    let (pred, gt) = match opts.clamp {
        Some((lo, hi)) => {
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::Config(format!("bad clamp range [{lo}, {hi}]")));
            }
            let gt = gt.map_valid(|_, d| if (lo..=hi).contains(&d) { d } else { f64::NAN });
            (pred.map_valid(|_, d| d.clamp(lo, hi)), gt)
        }
        None => (pred.clone(), gt.clone()),
    };
    let (pred, scaling) = if opts.median_scaling {
        (median_scale(&pred, &gt)?.0, Scaling::Median)
    } else {
        (pred, Scaling::None)
    };
    let mut r = split_eval(&pred, &gt, instances)?;
    r.all.scaling = scaling;
    if let Some(h) = r.humans.as_mut() {
        h.scaling = scaling;
    }
    Ok(r)
}

impl SplitReport {
    pub fn header() -> String {
        METRIC_NAMES.join("\t")
    }
}

/// One tab-separated row, each cell `F+B / F` (`-` when F is absent).
impl fmt::Display for SplitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let all = self.all.values();
        let hum = self.humans.map(|h| h.values());
        let cells: Vec<String> = (0..7)
            .map(|i| match hum {
                Some(h) => format!("{:.3} / {:.3}", all[i], h[i]),
                None => format!("{:.3} / -", all[i]),
            })
            .collect();
        write!(f, "{}", cells.join("\t"))
    }
}
