//! Additive global/local Gaussian-process surrogate (AGLGP) and the combined
//! global and local search optimizer (CGLO) for noisy black-box minimization.
//!
//! The surrogate sums a sparse FITC-style global trend fitted over a small
//! set of inducing points with independent residual processes, one per
//! region of a fixed nearest-center partition of the domain. The optimizer
//! alternates between choosing a promising region with the global model,
//! searching inside it with the overall model until a switching rule fires,
//! and spending extra replications on existing design points.
//!
//! ```no_run
//! use cglo::{cglo::CgloConfig, objectives};
//!
//! let objective = objectives::make_1d_paper(7);
//! let cfg = CgloConfig::paper_1d(7, 3000);
//! let result = cglo::cglo::run(&objective, &cfg).unwrap();
//! println!("best x = {:?}, mean = {}", result.best_x, result.best_mean);
//! ```

pub mod acquisition;
pub mod aglgp;
pub mod allocation;
pub mod baselines;
pub mod cglo;
pub mod dataset;
pub mod design;
mod error;
pub mod gp;
pub mod inducing;
pub mod kernel;
pub mod objectives;
pub mod optim;
pub mod partition;
pub mod trace;

pub use error::{Error, Result};
