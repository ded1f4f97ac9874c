//! Blind code-rate recovery for binary linear block codes observed through a
//! BPSK/AWGN channel.
//!
//! Received frames are filtered by symbol reliability, the hard decisions of
//! the surviving frames are stacked into a word matrix, and the GF(2) rank of
//! that matrix gives a rate estimate. A theoretical count of erroneous columns
//! then corrects the estimate for channel errors.

pub mod channel;
pub mod codes;
pub mod error;
pub mod estimator;
pub mod filter;
pub mod gf2;
pub mod optimize;
pub mod simulate;
pub mod text;
pub mod theory;

pub use channel::{estimate_channel, transmit, ChannelParams, LlrFrame};
pub use codes::LinearCode;
pub use error::{Error, Result};
pub use estimator::{corrected_rate, recover, Correction, ParamMode, RecoveryReport};
pub use filter::{build_word_matrix, FilterOutcome, FilterParams};
pub use gf2::{rank, rref, BitMatrix, RrefResult};
pub use optimize::{optimize_constrained, optimize_unconstrained, OptimizationResult};
pub use theory::{metrics, TheoryInputs, TheoryMetrics};
