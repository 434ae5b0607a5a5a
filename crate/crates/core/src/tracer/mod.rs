//! Path tracing with a neural radiance cache.

pub mod bsdf;
pub mod light;
pub mod path;
pub mod scene;
pub mod spread;

pub use bsdf::{eval, phong_exponent, sample_bsdf, BsdfError, BsdfSample, DELTA_ROUGHNESS};
pub use light::{bsdf_hit_emission, next_event_estimate, power_heuristic, ShadingPoint};
pub use path::{
    trace_deferred, trace_path, AffineRadiance, DeferredPath, PathMode, PathVertex, Termination,
    TraceSettings, TracedPath, TrainingSuffix,
};
pub use scene::{Camera, Hit, LightSample, Material, Primitive, Scene, SceneError, Shape};
pub use spread::{area_spread, primary_spread, SpreadAccumulator, GRAZING_CLAMP};
