//! Link-level workbench for shaping-encoder constellation shaping.
//!
//! The transmitter runs LDPC encoding, bit interleaving, a zero-biased block
//! shaping code and a labelled constellation mapper. Two iterative receivers
//! (a simplified shaping-decoder/FEC loop and full iterative detection and
//! decoding) recover the message, and the [`training`] module learns the
//! constellation geometry and shaping probability end to end.

// Negated float comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::manual_is_multiple_of)]

pub mod constellation;
pub mod channel;
pub mod demap;
pub mod error;
pub mod fec;
pub mod llr;
pub mod metrics;
pub mod receiver;
pub mod rng;
pub mod shaping_code;
pub mod training;
pub mod transmitter;

pub use error::{Error, Result};

pub use channel::{BlockFadingConfig, CsiMode};
pub use constellation::{Constellation, ShapingSpec, SymbolDistribution};
pub use fec::{ParityCheckMatrix, SystematicEncoder, TannerGraph};
pub use metrics::{ber_sweep, BerPoint, ChannelModel, LinkSimulator, StopRule};
pub use num_complex::Complex64;
pub use receiver::{Receiver, ReceiverConfig, ReceiverMode};
pub use shaping_code::ShapingCode;
pub use transmitter::{FrameConfig, Link};
