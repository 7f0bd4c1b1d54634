use thiserror::Error;

use crate::code::LatticeCoord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1} qubits")]
    Dimension(usize, usize),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("parse error: {0}")]
    Parse(String),

    #[error("not a valid S2G: {0}")]
    NotValidS2g(String),
    #[error("new gauge would corrupt the logical qubit: {0}")]
    LogicalCorruption(String),
    #[error("operand error: {0}")]
    Operand(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("degenerate gauge: product lies in the stabilizer group")]
    DegenerateGauge,
    #[error("index {index} out of range for a set of {len}")]
    Index { index: usize, len: usize },

    #[error("{coord} is a {found} qubit, expected {expected}")]
    QubitType {
        coord: LatticeCoord,
        found: &'static str,
        expected: &'static str,
    },
    #[error("wrong instruction for {coord}: {hint}")]
    WrongInstruction { coord: LatticeCoord, hint: String },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("orientation error: {0}")]
    Orientation(String),
    #[error("code broken: {0}")]
    CodeBroken(String),
    #[error("enlargement budget exceeded on every eligible boundary")]
    BudgetExceeded,

    #[error("decoder input error: {0}")]
    DecoderInput(String),
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("measurement contradiction: forced outcome has zero probability")]
    Contradiction,
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
