//! Adaptive deformation of rotated surface-code patches around fabrication
//! and dynamic defects.

mod error;
pub mod code;
pub mod deform;
pub mod distance;
pub mod format;
pub mod gauge;
pub mod gf2;
pub mod instructions;
pub mod layout;
pub mod noise;
pub mod pauli;
pub mod render;
pub mod router;
pub mod verifier;

pub use code::{build_rotated_code, CodePatch, LatticeCoord};
pub use error::{Error, Result};
pub use pauli::{Pauli, PauliString};

pub type DefectModel64 = layout::DefectModel<f64>;
pub type DefectModel32 = layout::DefectModel<f32>;
pub type ProgramProfile64 = layout::ProgramProfile<f64>;
pub type ProgramProfile32 = layout::ProgramProfile<f32>;
pub type LogicalState64 = verifier::LogicalState<f64>;
pub type LogicalState32 = verifier::LogicalState<f32>;
