pub mod audit;
pub mod circuits;
pub mod contract;
pub mod crypto;
pub mod nodes;
pub mod simnet;
pub mod tree;
pub mod vote;

pub use circuits::{CircuitError, CircuitParams, ConstraintReport, ValidatorBits};
pub use contract::{
    Address, Contract, ContractConfig, ContractError, ContractState, Event, EventKind, EventLog,
};
pub use crypto::{CryptoError, CurvePoint, FieldElement, KeyPair, Scalar, Signature};
pub use tree::{Account, MerkleProof, StateTree, TreeError};
pub use vote::Vote;
