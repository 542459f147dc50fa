//! Encoding/decoding duality for rate-1 convolutional codes.
//!
//! A rate-1 code `a(x)/q(x)` can be soft-decoded exactly by running a *dual*
//! shift register in the sign/log-magnitude domain instead of a BCJR
//! recursion over `2^n` states. This crate provides:
//!
//! - [`gf2poly`]: GF(2) polynomial arithmetic and minimum complementary
//!   polynomials.
//! - [`codes`]: code specifications, binary encoders and trellises.
//! - [`bcjr`]: the reference BCJR MAP decoder used as an oracle.
//! - [`dualsiso`]: forward and backward dual-encoder SISO decoders.
//! - [`combine`]: combining weights that merge forward and backward dual
//!   outputs into bidirectional MAP outputs.
//! - [`channel_sim`]: BPSK/AWGN simulation, BER harness and benchmarks.

pub mod bcjr;
pub mod channel_sim;
pub mod codes;
pub mod combine;
pub mod dualsiso;
pub mod gf2poly;
pub mod golden;

pub use codes::{CodeClass, CodeSpec};
pub use gf2poly::Gf2Poly;
