//! Brownian motion for the generator `Δ` and its heat kernels.

mod kernel;
mod path;
mod rng;

pub use kernel::{
    gaussian_bound_check, h2_radial_cdf, heat_kernel, ln_heat_kernel, ln_heat_kernel_h2, semigroup_check,
    torus_heat_kernel, GaussianBound, HeatKernel, McKeanKernel, RadialCdf, ScaledKernel, SemigroupCheck,
};
pub use path::{checkpoint_times, sample_path, sample_paths, Path, Scheme, CHECKPOINT_LEVELS, DEFAULT_DT, MAX_DT};
pub use rng::RngSeed;
