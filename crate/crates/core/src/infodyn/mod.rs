//! Symbolization, entropies and transfer entropy between symbol series.

mod entropy;
mod joint;
mod symbolize;
mod transfer;

pub use entropy::{escort, renyi_entropy, shannon_entropy};
pub use joint::{
    conditional_entropies, renyi_te_from_joint, shannon_te_from_joint, EmpiricalJoint, JointDims,
    RenyiForm,
};
pub use symbolize::{
    symbolize, symbolize_complete, three_letter_name, OrderedEdge, SymbolSeries, DEFAULT_EDGES,
};
pub use transfer::{
    effective_transfer_entropy, pairwise_te, renyi_transfer_entropy, renyi_transfer_entropy_with,
    transfer_entropy, write_te_rows, PairEntry, PairEstimate, TEResult, TeEstimator, TeTable,
    DEFAULT_SHUFFLES, MIN_SAMPLES, TE_CSV_HEADER,
};
