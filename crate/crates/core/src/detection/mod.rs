//! Moment-level model of the amplified detection chain: ideal moments of the
//! captured field, noisy detected moments, denoising and normalization.

mod moments;
mod noise;

pub use moments::{conjugate_index, moment_grid, moments_from_state, order, MomentIndex, MomentSet, Stage, MAX_ORDER};
pub use noise::{
    denoise_moments, moment_spread, monte_carlo_denoised, normalization_target, normalize_moments, synthesize_raw_moments, synthesize_repeat,
    temporal_filter, NoiseModel,
};
