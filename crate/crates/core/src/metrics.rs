//! Scoring of selection outcomes against ground truth.

use serde::{Deserialize, Serialize};

/// True positive proportion (power): the fraction of truly active features
/// that were selected. Undefined for an empty truth set.
pub fn tpp(selected: &[usize], truth: &[usize]) -> Option<f64> {
    if truth.is_empty() {
        return None;
    }
    let hits = selected.iter().filter(|j| truth.contains(j)).count();
    Some(hits as f64 / truth.len() as f64)
}

/// Number of selected features that are not in the truth set.
pub fn false_positives(selected: &[usize], truth: &[usize]) -> usize {
    selected.iter().filter(|j| !truth.contains(j)).count()
}

/// One benchmark observation: a procedure applied to one simulated replicate.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScoreRow {
    pub design: String,
    pub setting: String,
    pub procedure: String,
    pub replicate: u32,
    pub tpp: f64,
    pub fp: usize,
    pub threshold: f64,
    pub q_avg: f64,
    pub chosen_factors: String,
    pub bound_e_v: f64,
    pub converged_flags: usize,
}
