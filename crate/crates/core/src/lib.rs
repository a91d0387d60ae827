//! Reconstruction of complex baseband signals from `M`-periodically
//! nonuniformly sampled real bandpass signals.
//!
//! The crate designs least-squares optimal `M`-periodic time-varying FIR
//! filters in closed form ([`designer`]), realizes them either directly at
//! the high rate or as a blocked polyphase structure running at the low rate
//! ([`reconstructor`]), and provides the synthetic signals ([`signal_lab`])
//! and metrics ([`analysis`]) needed to evaluate a design end to end
//! ([`experiment`]).
//!
//! Frequencies are normalized products `ω·T1` (radians) and time skews are
//! fractions of `T1` throughout.

pub mod analysis;
pub mod designer;
pub mod error;
pub mod experiment;
pub mod export;
pub mod model;
pub mod reconstructor;
pub mod signal_lab;

pub use error::{Error, Result};
pub use model::{BandSpec, FilterBank, Rate, SampleKind, SamplingPattern, SignalTrace};
