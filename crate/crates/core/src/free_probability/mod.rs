//! Moment/cumulant conversions and Cauchy-type transforms.

mod cumulants;
mod spectrum;

pub use cumulants::{
    free_cumulants_to_moments, moments_to_free_cumulants, moments_to_rect_cumulants, rect_cumulants_to_moments,
    CumulantLaw, CumulantSeries, Kind, MomentSequence, SeriesSum, TAIL_TOL,
};
pub use spectrum::{
    named_spectrum_cumulants, Inverse, OverlapReport, Source, SpectrumModel, Threshold, Transform,
    DEFAULT_CUMULANT_ORDER,
};
