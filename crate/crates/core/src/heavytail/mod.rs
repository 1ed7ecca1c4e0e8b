//! Heavy-tail statistics: α-stable densities, sampling, maximum-likelihood
//! fits, and loss-fluctuation summaries.
//!
//! Computation is carried out in `f64` regardless of the caller's scalar.

mod fit;
mod loss;
mod sample;
mod stable;

pub use fit::{fit_stable_symmetric, vuong_test, StableFit, Vuong, ALPHA_MIN, MIN_RELIABLE_SAMPLES};
pub use loss::{change_of_loss, gradient_pool, loss_series, moving_variance, DEFAULT_VARIANCE_WINDOW};
pub use sample::sample_stable;
pub use stable::{stable_log_pdf, StableDensity, StableParams, StandardDensity};
