//! Unobserved-components models for interval-valued time series.
//!
//! Interval observations (monthly minimum and maximum) are mapped to a centre and a
//! log-range series, each of which is modelled with a frequency-specific basic
//! structural model: a local linear trend, six trigonometric seasonal harmonics
//! sharing two disturbance-variance groups, and an irregular term. Panels of
//! locations are summarised with a multi-level dynamic factor model that has one
//! global integrated-random-walk factor and one AR(1) factor per region.
//!
//! Module map:
//!
//! * [`statespace`] - linear Gaussian state-space engine (filter, smoother, simulation).
//! * [`structural`] - frequency-specific BSM construction and component extraction.
//! * [`estimation`] - maximum likelihood fitting through a registry of optimizers.
//! * [`stattests`] - deterministic trend/seasonality tests, moment tests, critical values.
//! * [`mldfm`] - multi-level dynamic factor model with two-step estimation.
//! * [`dataio`] - CSV ingestion, centre/log-range transform, correlations, clustering.

pub mod dataio;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod mldfm;
pub mod rng;
pub mod statespace;
pub mod stattests;
pub mod structural;

pub use error::{Error, Result};
