//! Link-level Monte Carlo simulator for buffer-aided distributed space-time
//! coding (DSTC) in the uplink of a synchronous cooperative DS-CDMA system.
//!
//! `K` users spread BPSK symbols with length-`N` codes and reach the
//! destination only through `L` decode-and-forward relays. Each epoch (two
//! symbol slots) a relay pair is chosen by an SINR criterion, either to
//! receive a packet pair from the sources into its buffers or to forward
//! buffered symbols to the destination with a 2x2 Alamouti code.
//!
//! Module map:
//!
//! - [`signal`]: spreading codes, fading draws, effective signatures, noise
//!   and the source-relay transmission.
//! - [`receivers`]: RAKE and MMSE filters, the slicer and the Alamouti
//!   detectors used at the destination.
//! - [`dstc`]: Alamouti encoding and the relay-destination transmission.
//! - [`link_quality`]: single-link and relay-pair SINRs.
//! - [`selection`]: exhaustive, greedy, random and static pair selection.
//! - [`buffers`]: bounded relay FIFOs and dynamic buffer sizing.
//! - [`delay`]: Little's-law delay statistics.
//! - [`harness`]: epoch simulation, experiment sweeps and result output.

#![warn(missing_debug_implementations, unused_qualifications)]

pub mod buffers;
pub mod delay;
pub mod dstc;
mod error;
pub mod harness;
mod linalg;
pub mod link_quality;
pub mod receivers;
pub mod selection;
pub mod signal;

pub use error::{Error, Result};
pub use num_complex::Complex64;
