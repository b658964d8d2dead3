//! Exact and Monte Carlo checks of tail inequalities for sums of independent
//! random vectors in finite-dimensional `l_q` spaces, together with a
//! weak-law-of-large-numbers experiment runner.
//!
//! The building blocks are:
//!
//! * [`space`]: vectors and `l_q` norms,
//! * [`norming`]: norming sequences and their piecewise-linear interpolants,
//! * [`sources`]: reproducible random streams and distribution samplers,
//! * [`transforms`]: the radial rescaling, truncation and centering,
//! * [`estimator`]: exact enumeration and Monte Carlo tail estimates,
//! * [`suite`]: inequality checkers and the convergence diagnostics.

pub mod error;
pub mod estimator;
pub mod norming;
pub mod sources;
pub mod space;
pub mod suite;
pub mod transforms;

pub use error::{Error, Result};
pub use estimator::{MonteCarlo, TailEstimate};
pub use norming::{FunctionPair, NormingPair};
pub use sources::{DistributionSpec, Kind, Lane, Lifting, StreamKey};
pub use space::{NormExponent, SpaceSpec, Vector};
pub use suite::{Branch, InequalityReport, Mode, Verdict, WllnDiagnostic};
