//! OOK link over the detector: cycle kernels, the symbol HMM, simulation,
//! decoding and link metrics.

pub mod decode;
pub mod hmm;
pub mod kernel;
pub mod metrics;
pub mod sim;

pub use decode::{conditional_increments, forward_increments, viterbi_decode};
pub use hmm::{build_hmm, state_index, state_parts, FrameStats, HmmSpec};
pub use kernel::{build_cycle_kernel, CycleKernel, SaturatedCapture};
pub use metrics::{estimate_ber, estimate_rate, estimate_rate_from_run, wilson_stderr, BerRow, RateEstimate, RateRow};
pub use sim::{simulate_link, LinkConfig, LinkModel, LinkRun, SimMode};
