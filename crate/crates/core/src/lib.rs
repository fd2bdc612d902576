//! Shifted gamma mixture models for cosine-similarity score distributions.
//!
//! The crate fits mixtures `Σ τᵢ Gᵢ` of shifted gamma densities to one-dimensional
//! samples of similarity scores with an expectation–conditional-maximization
//! fitter ([`em`]), turns fitted models into right-tail p-values for matches
//! ([`significance`]), and generates synthetic similarity samples from a random
//! hierarchy of topic centers ([`hierarchy`]).
//!
//! ```
//! use gammamix::dist::{GammaMixture, ShiftedGamma};
//! use gammamix::em::{fit, FitConfig, ScoreSample};
//!
//! let truth = ShiftedGamma::new(13.3, -0.28, 35.5).unwrap();
//! let data = ScoreSample::cosine(truth.sample(20_000, 1)).unwrap();
//! let report = fit(&data, &FitConfig::new(1)).unwrap();
//! let fitted = &report.model;
//! assert!((fitted.mean() - truth.mean()).abs() < 0.01);
//! let p = gammamix::significance::p_value(fitted, 0.6).unwrap();
//! assert!(p < 1e-3);
//! ```

pub mod cli;
pub mod dist;
pub mod em;
pub mod error;
pub mod hierarchy;
pub mod io;
pub mod quad;
pub mod rng;
pub mod significance;
pub mod special;
pub mod stats;

pub use dist::{GammaMixture, ShiftedGamma, VmfCosine};
pub use error::{Error, Result};
