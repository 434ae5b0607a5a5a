//! Frame orchestration, metrics, reference rendering and image output.

mod frame;
mod image;
mod metrics;
mod reference;

pub use frame::{
    render_frame, training_pixels, update_tile_size, visualize_cache, Accumulation, FrameConfig, FrameState,
    FrameStats,
};
pub use image::{Image, ImageError};
pub use metrics::{bias_variance, compute_metrics, mrse, smape, BiasVariance, ImageMetrics, MetricsError, METRIC_EPSILON};
pub use reference::{furnace_expected, path_trace, pixel_ray, render_reference, OracleError, RR_START};
