//! Softmax gating over the three experts, the convex combination of their
//! outputs, and per-typology activation profiles.

mod gate;
mod profile;

pub use gate::{
    combine, expert_index, gate_entropy, gate_forward, gate_graph, gate_objective, gate_predict, moe_predict,
    train_gate, ExpertSet, GateData, GateInput, GateOutput, GateParams, DEFAULT_ENTROPY_LAMBDA, EXPERT_COUNT,
};
pub use profile::{expert_activation_profile, ActivationProfile, ActivationRow};
