//! Binarised neural networks as CNF: training, exact encoding, a CDCL
//! solver, and SAT-based inference, inversion and preimage sampling.

pub mod cnf;
pub mod encode;
pub mod error;
pub mod model;
pub mod sample;
pub mod solve;
pub mod train;
pub mod verify;

pub use cnf::{CnfFormula, Lit};
pub use encode::{emit_dimacs, emit_manifest, encode_bnn, EncodeOptions, Fault, VariableMap};
pub use error::{Error, Result};
pub use model::{
    fold_neuron, forward_folded, forward_reference, Bipolar, BnnModel, FoldedModel, ImageShape,
    NeuronThreshold,
};
pub use sample::{
    diversity_stats, enumerate_preimage, infer_sat, invert, InversionQuery, InversionReport,
    InversionStatus, Preimage,
};
pub use solve::{SolveOutcome, SolveStatus, Solver};
pub use train::{evaluate, train, Dataset, TrainConfig};
