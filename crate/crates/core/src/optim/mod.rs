//! Weighted objective, Adam, finite-difference oracle and the per-frame driver.

pub mod adam;
pub mod frame;
pub mod gradcheck;
pub mod objective;

pub use adam::{adam_step, AdamParams, AdamState};
pub use frame::{initialize_depth, optimize_frame, DEFAULT_LR, OptimizerConfig, Optimized, TraceEntry, FALLBACK_DEPTH};
pub use gradcheck::{check_objective_terms, TERM_NAMES, check_gradient, finite_diff_gradient, GradCheckOptions, GradCheckReport};
pub use objective::{
    ground_of, total_loss, DepthVariable, FrameBundle, FrameData, LossSettings, LossWeights, NeighborFrame, Reduction,
    TermValues, TotalLoss,
};
