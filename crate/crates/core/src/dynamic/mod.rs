//! Constraints on moving pedestrians: flow-guided shape and ground-anchored scale.

pub mod flow_shape;
pub mod ground;
pub mod inverse_depth;
pub mod normal_scale;
pub mod normals;

pub use flow_shape::{flow_shape_loss, flow_shape_terms, overlap_mask, scale_invariant_gradient, ScaleInvariantGradient};
pub use ground::{contact_patch, ground_mask, ContactPatch, PatchRect, GROUND_NORMAL, GROUND_THRESHOLD_DEG, PATCH_SIZE};
pub use inverse_depth::{mean_normalized_inverse_depth, NormalizedInverseDepth};
pub use normal_scale::{normal_scale_loss, NormalScaleConfig, NormalScaleResult, SAMPLE_RATIO};
pub use normals::{surface_normals, NormalMap};
