//! Thermodynamic formalism on truncated countable Markov shifts.
//!
//! The crate computes pressure, certifies Gibbs constants, and evaluates
//! level-1 large-deviation rate functions for Birkhoff averages, with three
//! mutually checkable ensembles (cylinder sums against a reference measure,
//! periodic points, iterated preimages). The Gauss map and its continued
//! fraction coding get exact integer machinery so digit-frequency deviation
//! rates can be pinned down numerically.

pub mod cli;
pub mod error;
pub mod gauss;
pub mod gibbs;
pub mod ldp;
pub mod potential;
pub mod pressure;
pub mod shift;
pub mod tightness;
pub mod transfer;

pub use error::{Error, Result};
pub use gauss::{
    cf_expand, cf_value, gauss_digit_prob, gauss_digit_tail, periodic_point, preimage_point,
    sample_gauss, sample_gauss_digits, Continuants, LogContinuants,
};
pub use gibbs::{
    check_distortion, check_mixing_constant, estimate_gibbs_constant, DistortionReport, GibbsModel,
    GibbsReport, MixingReport, WeightSeq,
};
pub use ldp::{
    deviation_rate_constrained, free_energy, mc_deviation, rate_legendre, CurveCheck, DevEnsemble,
    DeviationRate, FreeEnergy, McDeviation, PressureMethod, RateCurve, RatePoint, Side,
};
pub use potential::{Anchor, LcTable, Observable, Potential};
pub use pressure::{
    log_periodic_sum, log_preimage_sum, log_word_sum, pressure_periodic, pressure_preimage,
    pressure_preimage_accelerated, pressure_transfer_bracket, pressure_word_sum,
    pressure_word_sum_accelerated, Direction, PressureEstimate,
};
pub use shift::{Constraint, ShiftSpec, Symbol, Witness, Word};
pub use tightness::{
    build_schedule, check_expo_bound, mc_visit_counts, visit_distribution, ExpoBoundCheck,
    TightnessSchedule, VisitDistribution, VisitSample,
};
pub use transfer::{
    growth_bracket_extended, growth_bracket_full, growth_bracket_truncated, marked_power,
    marked_trace, ChebGrid, GaussOperator, GrowthBracket, InitFunction, TailMode,
};
