//! Labeling energy, min-cut and alpha-expansion.

mod energy;
mod expansion;
mod maxflow;
mod pool;

pub use energy::{
    build_unary_tables, energy_terms, total_energy, unary_cost, unary_table, EnergyParams, EnergyTerms,
    UnaryTables,
};
pub use expansion::{alpha_expansion, ExpansionNetwork};
pub use maxflow::{min_cut, FlowNetwork, MinCut};
pub use pool::{prune_models, Labeling, ModelPool, PoolEntry};
