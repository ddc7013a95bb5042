//! Simulation of heralded hybrid entanglement between a polarization qubit
//! and a coherent-state qubit, built from a cat state and a polarization
//! Bell pair with linear optics and photodetection.
//!
//! The crate is layered bottom-up:
//!
//! - [`fock`]: truncated multimode Fock registers, pure states, ensembles,
//!   density operators and partial traces.
//! - [`resources`], [`optics`], [`detection`]: state factories, linear
//!   optical elements and detector POVMs.
//! - [`metrics`] and [`analytic`]: fidelity, negativity and closed-form
//!   reference curves.
//! - [`pipeline`]: the full generation scheme and parameter sweeps.
//! - [`figures`]: parameter grids behind the reference curves.
//! - [`validation`]: self-checks and acceptance criteria.

pub mod analytic;
pub mod detection;
pub mod error;
pub mod figures;
pub mod fock;
pub mod math;
pub mod metrics;
pub mod optics;
pub mod pipeline;
pub mod resources;
pub mod validation;

pub use error::{Error, Result};
pub use fock::{DensityOperator, Ensemble, ModeOperator, PureState, Register, C64};

/// Mode labels used by the generation scheme.
pub mod labels {
    /// Polarization qubit (photon 1 of the pair), H and V channels.
    pub const A_H: &str = "A_H";
    pub const A_V: &str = "A_V";
    /// Photon 2 of the pair before it meets the cat-state branch.
    pub const TWO_H: &str = "2H";
    pub const TWO_V: &str = "2V";
    /// Reflected arm of the unbalanced beam splitter.
    pub const FOUR: &str = "4";
    pub const FOUR_H: &str = "4H";
    pub const FOUR_V: &str = "4V";
    /// Detector channels after the 50:50 mixer and the polarizing splitters.
    pub const FIVE_H: &str = "5H";
    pub const FIVE_V: &str = "5V";
    pub const SIX_H: &str = "6H";
    pub const SIX_V: &str = "6V";
    /// Transmitted output beam carrying the coherent-state qubit.
    pub const B: &str = "B";

    pub const DETECTOR_CHANNELS: [&str; 4] = [FIVE_H, FIVE_V, SIX_H, SIX_V];
    pub const OUTPUT_MODES: [&str; 3] = [A_H, A_V, B];
}
