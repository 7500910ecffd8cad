//! Time-shifting inference for coincidence detection in paired time series.
//!
//! A coincidence between two streams is judged against a control group built
//! by misaligning them in time: forward windows at every pair of offsets for
//! a single event, or every pair of circular shifts for synchronicity over
//! the whole stream. The resulting p-values are valid under stationarity and
//! mixing; [`event::thm1_bound`], [`event::thm2_bound`] and
//! [`sync::thm3_bound`] quantify how far from exact they can be.

pub mod error;
pub mod event;
pub mod evidence;
pub mod harness;
pub mod ingest;
pub mod rng;
pub mod series;
pub mod simgen;
pub mod sync;
pub mod verification;

pub use error::{Error, Result};
pub use event::{
    event_pvalue, event_pvalue_additive_fast, event_pvalues_bonferroni, margin, margin_harmonic,
    thm1_bound, thm2_bound, BonferroniResult, BoundReport, EventQuery,
};
pub use evidence::{EvidenceStatistic, StatisticMode, StatisticParams, StructuralFlags};
pub use series::{
    circular_shift, window, Method, MixingProfile, MixingProvenance, PValueReport,
    StabilityProfile, StabilityProvenance, TimeSeries, WindowSpec,
};
pub use simgen::{beta_mixing_rate, sample_stream, GeneratorParams};
pub use sync::{
    estimate_gamma, estimate_gamma_profile, sync_pvalue, sync_pvalue_auto,
    sync_pvalue_shift_fast, sync_pvalue_spectral, thm3_bound,
};
