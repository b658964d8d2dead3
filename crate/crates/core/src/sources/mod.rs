//! Reproducible generators for Rademacher, heavy-tailed, stable, bounded and
//! degenerate laws, their vector liftings, and independent copies.

mod distribution;
mod stream;

pub use distribution::{
    independent_copy, sample, sample_stable, stable_symmetric, DistributionSpec, FiniteLaw, Kind,
    Lifting, PairedSampler, Sampler,
};
pub use stream::{Lane, StreamKey, StreamRng};
