use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::{Event, EventWindow};
use crate::graph::STGraph;
use crate::motion::{build_iwe, negate_iwe, Kernel, NegIwe, Warper};
use crate::optim::pool::{Labeling, ModelPool};

/// Weights of the smoothness and label-count terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParams {
    pub lambda_p: f64,
    pub lambda_m: f64,
}

impl EnergyParams {
    pub fn new(lambda_p: f64, lambda_m: f64) -> Result<Self> {
        for (name, v) in [("lambda_p", lambda_p), ("lambda_m", lambda_m)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { lambda_p, lambda_m })
    }
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            lambda_p: 40.0,
            lambda_m: 8000.0,
        }
    }
}

/// Cost of assigning `event` to the model whose negative IWE is `neg`.
pub fn unary_cost(event: &Event, neg: &NegIwe, warper: &Warper) -> u32 {
    let (x, y) = warper.warp_event(event);
    neg.cost_at(x, y)
}

/// Per-label unary costs of every event; `None` for inactive labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnaryTables {
    tables: Vec<Option<Vec<u32>>>,
}

impl UnaryTables {
    /// Tables given directly as `tables[label][event]`.
    pub fn from_tables(tables: Vec<Option<Vec<u32>>>) -> Self {
        Self { tables }
    }

    pub fn label_count(&self) -> usize {
        self.tables.len()
    }

    pub fn cost(&self, event: usize, label: usize) -> u32 {
        self.tables[label]
            .as_ref()
            .map_or(u32::MAX, |t| t[event])
    }

    pub fn table(&self, label: usize) -> Option<&[u32]> {
        self.tables[label].as_deref()
    }

    pub fn set_table(&mut self, label: usize, table: Vec<u32>) {
        self.tables[label] = Some(table);
    }
}

/// Unary costs of all window events under one model: the model's IWE of
/// the whole window is negated and sampled at each warped event.
pub fn unary_table(window: &EventWindow, model: &crate::motion::MotionModel, kernel: Kernel) -> Result<Vec<u32>> {
    let iwe = build_iwe(&window.events, model, window.t_min, &window.geometry, kernel)?;
    let neg = negate_iwe(&iwe);
    let warper = model.warper(window.t_min, &window.geometry)?;
    Ok(window.events.iter().map(|e| unary_cost(e, &neg, &warper)).collect())
}

/// Builds the tables of all active pool models in parallel.
pub fn build_unary_tables(window: &EventWindow, pool: &ModelPool, kernel: Kernel) -> Result<UnaryTables> {
    let tables = pool
        .entries()
        .par_iter()
        .map(|entry| {
            entry
                .active
                .then(|| unary_table(window, &entry.model, kernel))
                .transpose()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UnaryTables { tables })
}

/// The three energy terms of a labeling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyTerms {
    /// Sum of unary costs.
    pub data: f64,
    /// Number of graph edges whose endpoints disagree.
    pub disagreements: usize,
    /// Number of labels with at least one event.
    pub labels_used: usize,
    pub total: f64,
}

pub fn energy_terms(labeling: &Labeling, unaries: &UnaryTables, graph: &STGraph, params: &EnergyParams) -> EnergyTerms {
    let labels = labeling.as_slice();
    let data: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| unaries.cost(i, l) as f64)
        .sum();
    let disagreements = graph.edges().filter(|&(i, j)| labels[i] != labels[j]).count();
    let labels_used = labeling.used_label_count(unaries.label_count());
    EnergyTerms {
        data,
        disagreements,
        labels_used,
        total: data + params.lambda_p * disagreements as f64 + params.lambda_m * labels_used as f64,
    }
}

/// Total energy of `labeling`, building the unary tables on the way.
pub fn total_energy(
    labeling: &Labeling,
    pool: &ModelPool,
    window: &EventWindow,
    graph: &STGraph,
    params: &EnergyParams,
    kernel: Kernel,
) -> Result<f64> {
    if !labeling.is_valid_for(pool) || labeling.len() != window.len() {
        return Err(Error::Config("labeling does not match pool and window".to_string()));
    }
    let unaries = build_unary_tables(window, pool, kernel)?;
    Ok(energy_terms(labeling, &unaries, graph, params).total)
}
