//! Per-frame depth optimization driver.

use super::adam::{adam_step, AdamParams, AdamState};
use super::objective::{total_loss, DepthVariable, FrameBundle, LossSettings, LossWeights, TermValues};
use crate::error::{Error, Result};
use crate::numeric::{lower_median, mix_seed};
use crate::raster::{same_dims, DepthField, SparseDepth};

/// Learning rate of the frame optimizer. Lower than the generic Adam default:
/// at 1e-2 the unmasked photometric pull on moving pixels wins over the
/// human-region constraints within a few hundred steps.
pub const DEFAULT_LR: f64 = 3e-3;

/// Depth used when there is no sparse point at all.
pub const FALLBACK_DEPTH: f64 = 3.0;

/// Dense initialisation from sparse depth.
///
/// Each pixel takes the depth of its nearest sparse point (Euclidean pixel
/// distance, ties to the earlier point in row-major order). Pixels farther
/// than `max_radius` get the sparse median instead; with no points at all the
/// field is a constant [`FALLBACK_DEPTH`].
pub fn initialize_depth(sparse: &SparseDepth, max_radius: Option<f64>) -> DepthField {
    let (w, h) = sparse.dims();
    let points = sparse.points();
    let depths: Vec<f64> = points.iter().map(|p| p.2).collect();
    let Some(median) = lower_median(&depths) else {
        return DepthField::constant(w, h, FALLBACK_DEPTH);
    };
    let r2_max = max_radius.map(|r| r * r);
    let values = (0..w * h)
        .map(|i| {
            let (u, v) = ((i % w) as f64, (i / w) as f64);
            let mut best = (f64::INFINITY, median);
            for &(pu, pv, d) in &points {
                let (du, dv) = (pu as f64 - u, pv as f64 - v);
                let r2 = du * du + dv * dv;
                if r2 < best.0 {
                    best = (r2, d);
                }
            }
            match r2_max {
                Some(limit) if best.0 > limit => median,
                _ => best.1,
            }
        })
        .collect();
    DepthField::from_values(w, h, values).expect("sizes agree")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub steps: usize,
    pub adam: AdamParams,
    pub weights: LossWeights,
    pub settings: LossSettings,
    pub seed: u64,
    /// Draw a fresh pixel sample for the scale term at every step.
    pub resample_each_step: bool,
    /// Also update the neighbour depths (they are frozen by default).
    pub joint: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            adam: AdamParams { lr: DEFAULT_LR, ..AdamParams::default() },
            weights: LossWeights::default(),
            settings: LossSettings::default(),
            seed: 0,
            resample_each_step: true,
            joint: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        self.weights.validate()?;
        if !(self.settings.sample_ratio > 0.0 && self.settings.sample_ratio <= 1.0) {
            return Err(Error::Config(format!("sample ratio {} not in (0, 1]", self.settings.sample_ratio)));
        }
        Ok(())
    }

    pub fn sample_seed(&self, step: usize) -> u64 {
        if self.resample_each_step {
            mix_seed(&[self.seed, step as u64])
        } else {
            self.seed
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub step: usize,
    pub total: f64,
    pub terms: TermValues,
}

#[derive(Debug, Clone)]
pub struct Optimized {
    pub depth: DepthField,
    pub neighbor_depths: Vec<DepthField>,
    /// Loss evaluated before each update.
    pub trace: Vec<TraceEntry>,
}

/// Runs `cfg.steps` Adam updates on the target log-depth.
///
/// `neighbor_init` gives one depth field per neighbour in the bundle; when
/// empty, each neighbour is initialised from its own sparse depth.
pub fn optimize_frame(
    bundle: &FrameBundle,
    init: &DepthField,
    neighbor_init: &[DepthField],
    cfg: &OptimizerConfig,
) -> Result<Optimized> {
    cfg.validate()?;
    bundle.validate()?;
    same_dims(bundle.dims(), init.dims())?;
    let mut neighbors: Vec<DepthVariable> = if neighbor_init.is_empty() {
        bundle
            .neighbors
            .iter()
            .map(|nb| DepthVariable::from_depth(&initialize_depth(&nb.frame.sparse, None)))
            .collect()
    } else if neighbor_init.len() == bundle.neighbors.len() {
        neighbor_init.iter().map(DepthVariable::from_depth).collect()
    } else {
        return Err(Error::InvalidArgument(format!(
            "{} neighbour initialisations for {} neighbours",
            neighbor_init.len(),
            bundle.neighbors.len()
        )));
    };

    let target = DepthVariable::from_depth(init);
    let mut state = AdamState::new(target.s.clone());
    let mut nb_states: Vec<AdamState> = neighbors.iter().map(|v| AdamState::new(v.s.clone())).collect();
    let mut trace = Vec::with_capacity(cfg.steps);
    let mut current = target;
    for step in 0..cfg.steps {
        let loss = total_loss(bundle, &current, &neighbors, &cfg.weights, &cfg.settings, cfg.sample_seed(step))?;
        if !loss.value.is_finite() || loss.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { step });
        }
        trace.push(TraceEntry { step, total: loss.value, terms: loss.terms });
        log::trace!("step {step}: total {:.6e}", loss.value);
        state = adam_step(&state, &loss.grad, &cfg.adam)?;
        current.s.clone_from(&state.params);
        if cfg.joint {
            for ((st, var), g) in nb_states.iter_mut().zip(neighbors.iter_mut()).zip(&loss.neighbor_grads) {
                *st = adam_step(st, g, &cfg.adam)?;
                var.s.clone_from(&st.params);
            }
        }
    }
    let depth = if cfg.steps == 0 { init.clone() } else { current.to_depth() };
    Ok(Optimized { depth, neighbor_depths: neighbors.iter().map(DepthVariable::to_depth).collect(), trace })
}
