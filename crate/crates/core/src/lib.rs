//! Models of a three-level microwave photon detector and an on-off keyed
//! link built on it: capture physics, Poisson-arrival detection, dead-time
//! saturation statistics and HMM decoding.
//!
//! The physics and statistics layers are generic over the float type; the
//! `*32` / `*64` aliases below name the two concrete instantiations.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod capture;
pub mod detection;
pub mod error;
pub mod fit;
pub mod link;
pub mod montecarlo;
pub mod oracle;
pub mod params;
pub mod physics;
pub mod quadrature;
pub mod report;
pub mod saturation;
pub mod scalar;

pub use capture::{capture_state, excitation_poisson_exact, CaptureState, Level};
pub use detection::{
    excitation_given_arrivals, excitation_given_count, excitation_poisson, mc_detector, miss_probability_sweep,
    run_cycle, stage_probabilities, stage_probabilities_from, ArrivalTrace, DetectorOutcome, DetectorStats, MissMethod,
    MissPoint, MissRow, MixtureConfig, StageProbabilities,
};
pub use error::{Error, Result};
pub use fit::{fit_cutoff_curve, fit_cutoff_curve_with, CutoffFit, FitConfig};
pub use link::{
    build_cycle_kernel, build_hmm, estimate_ber, estimate_rate, simulate_link, viterbi_decode, BerRow, CycleKernel,
    FrameStats, HmmSpec, LinkConfig, LinkModel, LinkRun, RateRow, SaturatedCapture, SimMode,
};
pub use montecarlo::{Estimate, StreamKey};
pub use params::{CycleTiming, DeviceParams, Environment, Power, PulseProfile, PulseShape};
pub use physics::{
    detection_prob_single, excited_prob, ground_return_prob, power_to_rate, single_photon_excitation,
    thermal_photon_rate, transition_kernels, TransitionKernels,
};
pub use report::{Record, SweepReport, Value};
pub use saturation::{
    cutoff_photon_number, delta_lambda, filter_survivors, find_lambda0, saturated_excitation, saturated_excitation_mc,
    survivor_moments_given_count, survivor_moments_poisson, CutoffResult, CutoffSweep, Regime, SaturationWindow,
    SurvivorMoments,
};
pub use scalar::Real;

pub type DeviceParams32 = DeviceParams<f32>;
pub type DeviceParams64 = DeviceParams<f64>;
pub type CycleTiming32 = CycleTiming<f32>;
pub type CycleTiming64 = CycleTiming<f64>;
pub type Environment32 = Environment<f32>;
pub type Environment64 = Environment<f64>;
pub type PulseProfile32 = PulseProfile<f32>;
pub type PulseProfile64 = PulseProfile<f64>;
pub type ArrivalTrace32 = ArrivalTrace<f32>;
pub type ArrivalTrace64 = ArrivalTrace<f64>;
pub type SaturationWindow32 = SaturationWindow<f32>;
pub type SaturationWindow64 = SaturationWindow<f64>;
pub type SurvivorMoments32 = SurvivorMoments<f32>;
pub type SurvivorMoments64 = SurvivorMoments<f64>;
pub type CutoffFit32 = CutoffFit<f32>;
pub type CutoffFit64 = CutoffFit<f64>;
