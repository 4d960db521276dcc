//! Modulators: QAM mapping, OQAM staggering, the polyphase FBMC filter bank
//! (single and dual polarization) and the CP-OFDM reference.

mod cpofdm;
mod fbmc;
mod grid;
mod qam;

pub use cpofdm::CpOfdmModem;
pub use fbmc::{DualPolModem, FbmcModem};
pub use grid::{oqam_destagger, oqam_stagger, BasebandSignal, CarrierLayout, ComplexGrid, SymbolGrid};
pub use qam::Modulation;
