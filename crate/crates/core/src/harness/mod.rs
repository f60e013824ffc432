//! Benchmark orchestration and real-data analysis.
//!
//! Composes the tuner and stability selection into the six standard
//! procedures (two selectors × three thresholds), runs them over simulated
//! designs with paired replicates, and scores the outcomes. Also hosts the
//! real-data entry point used by the command-line interface.

pub mod emit;
pub mod ingest;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{Dataset, Family};
use crate::error::{Error, Result};
use crate::metrics::{false_positives, tpp, ScoreRow};
use crate::rng::{derive_seed, purpose};
use crate::simgen::{self, DesignId, Setting};
use crate::solver::{self, PenaltySpec};
use crate::stabsel::{self, FrequencyProfile, SelectionOutcome, ThresholdStatus};
use crate::tuner::{self, TuneGrid, TunedConfig};

/// Which base selector to wrap in stability selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    /// Single penalty across all modalities.
    Lasso,
    /// Per-modality penalty factors tuned over the two-modality grid.
    Ipf,
}

impl std::fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SelectorKind::Lasso => write!(f, "lasso"),
            SelectorKind::Ipf => write!(f, "ipf"),
        }
    }
}

impl std::str::FromStr for SelectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lasso" => Ok(SelectorKind::Lasso),
            "ipf" => Ok(SelectorKind::Ipf),
            other => Err(Error::invalid(format!("unknown selector '{other}'"))),
        }
    }
}

/// How the stability-selection threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdKind {
    Fixed(f64),
    /// Invert the false-positive bound at the configured target.
    Optimal,
}

impl ThresholdKind {
    pub fn label(&self) -> String {
        match self {
            ThresholdKind::Fixed(t) => format!("{t:.2}"),
            ThresholdKind::Optimal => "optimal".to_string(),
        }
    }
}

impl std::str::FromStr for ThresholdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("optimal") {
            return Ok(ThresholdKind::Optimal);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::invalid(format!("threshold '{t}' is neither a number nor 'optimal'")))?;
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::invalid(format!("threshold {v} outside (0, 1]")));
        }
        Ok(ThresholdKind::Fixed(v))
    }
}

impl Serialize for ThresholdKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ThresholdKind::Fixed(v) => s.serialize_f64(*v),
            ThresholdKind::Optimal => s.serialize_str("optimal"),
        }
    }
}

impl<'de> Deserialize<'de> for ThresholdKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ThresholdKind::Fixed(v)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Full benchmark configuration; every field has the standard default, so an
/// empty config file reproduces the reference setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub designs: Vec<DesignId>,
    pub settings: Vec<Setting>,
    pub replicates: usize,
    pub b_pairs: usize,
    pub v_target: f64,
    pub thresholds: Vec<ThresholdKind>,
    pub selectors: Vec<SelectorKind>,
    pub alpha: f64,
    pub master_seed: Option<u64>,
    /// Worker threads; 0 means use the process default.
    pub parallelism: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            designs: DesignId::ALL.to_vec(),
            settings: Setting::ALL.to_vec(),
            replicates: 100,
            b_pairs: 50,
            v_target: 2.0,
            thresholds: vec![
                ThresholdKind::Fixed(0.70),
                ThresholdKind::Fixed(0.80),
                ThresholdKind::Optimal,
            ],
            selectors: vec![SelectorKind::Lasso, SelectorKind::Ipf],
            alpha: 1.0,
            master_seed: None,
            parallelism: 0,
        }
    }
}

impl BenchConfig {
    fn validate(&self) -> Result<()> {
        if self.designs.is_empty() || self.settings.is_empty() {
            return Err(Error::invalid("designs and settings must be non-empty"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("need at least one replicate"));
        }
        if self.thresholds.is_empty() || self.selectors.is_empty() {
            return Err(Error::invalid("thresholds and selectors must be non-empty"));
        }
        if self.b_pairs == 0 {
            return Err(Error::invalid("need at least one complementary pair"));
        }
        if !(self.v_target > 0.0) {
            return Err(Error::invalid("v_target must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha must be in (0, 1]"));
        }
        Ok(())
    }

    pub fn procedures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for sel in &self.selectors {
            for thr in &self.thresholds {
                out.push(procedure_label(*sel, thr));
            }
        }
        out
    }
}

/// Canonical procedure identifier, e.g. `lasso_0.70` or `ipf_optimal`.
pub fn procedure_label(selector: SelectorKind, threshold: &ThresholdKind) -> String {
    format!("{selector}_{}", threshold.label())
}

/// Seeds for the two random stages of one procedure run.
#[derive(Debug, Clone, Copy)]
pub struct RunSeeds {
    pub folds: u64,
    pub plan: u64,
}

impl RunSeeds {
    /// Derives both stage seeds from a master seed and a label path.
    pub fn derive(master: u64, path: &[u64]) -> Self {
        let mut folds_path = path.to_vec();
        folds_path.push(purpose::FOLDS);
        let mut plan_path = path.to_vec();
        plan_path.push(purpose::SUBSAMPLES);
        RunSeeds {
            folds: derive_seed(master, &folds_path),
            plan: derive_seed(master, &plan_path),
        }
    }
}

/// Everything produced by one selector on one dataset: the tuned penalty,
/// the frequency profile, and one outcome per configured threshold.
#[derive(Debug, Clone)]
pub struct SelectorRun {
    pub selector: SelectorKind,
    pub tuned: TunedConfig,
    pub profile: FrequencyProfile,
    /// Parallel to the configured thresholds.
    pub outcomes: Vec<SelectionOutcome>,
    /// Tuning fits plus subsample fits that did not converge or failed.
    pub non_clean_fits: usize,
}

fn grid_for(selector: SelectorKind, dataset: &Dataset, alpha: f64, seed: u64) -> Result<TuneGrid> {
    match selector {
        SelectorKind::Lasso => Ok(TuneGrid::single(dataset.n_modalities(), seed).with_alpha(alpha)),
        SelectorKind::Ipf => {
            if dataset.n_modalities() != 2 {
                return Err(Error::invalid(format!(
                    "the factor-grid selector needs exactly 2 modalities, got {}",
                    dataset.n_modalities()
                )));
            }
            Ok(TuneGrid::two_modality(seed).with_alpha(alpha))
        }
    }
}

/// Tunes the selector on the full data, then estimates selection frequencies
/// of the fixed tuned configuration over complementary pairs. Returns the
/// tuned configuration, the profile, and the count of non-clean fits.
pub fn selection_profile(
    dataset: &Dataset,
    selector: SelectorKind,
    cfg: &BenchConfig,
    seeds: RunSeeds,
) -> Result<(TunedConfig, FrequencyProfile, usize)> {
    let grid = grid_for(selector, dataset, cfg.alpha, seeds.folds)?;
    let tuned = tuner::tune(dataset, &grid)?;
    let spec = PenaltySpec::new(tuned.best_factors.clone(), cfg.alpha, tuned.best_lambda)?;

    let plan = stabsel::draw_plan(dataset.n(), cfg.b_pairs, seeds.plan)?;
    let non_converged = AtomicUsize::new(0);
    let profile = stabsel::estimate_frequencies(
        dataset,
        |sub| {
            let fit = solver::fit(sub, Family::Logistic, &spec)?;
            if !fit.converged {
                non_converged.fetch_add(1, Ordering::Relaxed);
            }
            Ok(fit.active_set())
        },
        &plan,
    )?;
    let non_clean =
        tuned.non_converged_fits + non_converged.into_inner() + profile.failures();
    Ok((tuned, profile, non_clean))
}

/// Tunes the selector on the full dataset, runs stability selection with the
/// tuned configuration fixed, and thresholds the resulting profile once per
/// configured threshold.
pub fn run_selector(
    dataset: &Dataset,
    selector: SelectorKind,
    cfg: &BenchConfig,
    seeds: RunSeeds,
) -> Result<SelectorRun> {
    let (tuned, profile, non_clean_fits) = selection_profile(dataset, selector, cfg, seeds)?;

    let mut outcomes = Vec::with_capacity(cfg.thresholds.len());
    for thr in &cfg.thresholds {
        let outcome = match thr {
            ThresholdKind::Fixed(tau) => stabsel::stable_set(&profile, *tau, cfg.b_pairs)?,
            ThresholdKind::Optimal => {
                let choice = stabsel::optimal_threshold(&profile, cfg.b_pairs, cfg.v_target)?;
                let mut outcome = match choice.status {
                    ThresholdStatus::DegenerateEmpty => SelectionOutcome {
                        stable_set: Vec::new(),
                        threshold: choice.tau,
                        bound_e_v: choice.bound_e_v,
                        bound_method: "r-concave",
                        v_target: None,
                        procedure: String::new(),
                    },
                    _ => stabsel::stable_set(&profile, choice.tau, cfg.b_pairs)?,
                };
                outcome.bound_e_v = choice.bound_e_v;
                outcome.with_v_target(cfg.v_target)
            }
        };
        outcomes.push(outcome.with_procedure(procedure_label(selector, thr)));
    }

    Ok(SelectorRun {
        selector,
        tuned,
        profile,
        outcomes,
        non_clean_fits,
    })
}

/// One procedure (selector × threshold) on one dataset.
pub fn run_procedure(
    dataset: &Dataset,
    selector: SelectorKind,
    threshold: ThresholdKind,
    cfg: &BenchConfig,
    seeds: RunSeeds,
) -> Result<SelectorRun> {
    let mut one = cfg.clone();
    one.thresholds = vec![threshold];
    one.selectors = vec![selector];
    run_selector(dataset, selector, &one, seeds)
}

fn score_rows(
    design: DesignId,
    setting: Setting,
    replicate: u32,
    truth: &[usize],
    run: &SelectorRun,
) -> Vec<ScoreRow> {
    run.outcomes
        .iter()
        .map(|outcome| ScoreRow {
            design: design.to_string(),
            setting: setting.to_string(),
            procedure: outcome.procedure.clone(),
            replicate,
            tpp: tpp(&outcome.stable_set, truth).unwrap_or(f64::NAN),
            fp: false_positives(&outcome.stable_set, truth),
            threshold: outcome.threshold,
            q_avg: run.profile.q_avg(),
            chosen_factors: format_factors(&run.tuned.best_factors),
            bound_e_v: outcome.bound_e_v,
            converged_flags: run.non_clean_fits,
        })
        .collect()
}

/// Renders penalty factors as `1:0.5`.
pub fn format_factors(factors: &[f64]) -> String {
    factors
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join(":")
}

/// Runs every (design, setting, replicate) cell of the benchmark and returns
/// the score rows in deterministic order.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<ScoreRow>> {
    run_benchmark_with(cfg, |_| Ok(()))
}

/// Like [`run_benchmark`], invoking `sink` with each completed replicate's
/// rows in deterministic order (suitable for incremental flushing: the rows
/// passed to `sink` concatenate to exactly the returned table).
///
/// Within a replicate all procedures consume the identical dataset, and the
/// replicate seed depends only on (master seed, design, setting, replicate),
/// so results are independent of thread count and scheduling.
pub fn run_benchmark_with<S>(cfg: &BenchConfig, mut sink: S) -> Result<Vec<ScoreRow>>
where
    S: FnMut(&[ScoreRow]) -> Result<()>,
{
    cfg.validate()?;
    let master = cfg
        .master_seed
        .ok_or_else(|| Error::invalid("a master seed is required (set --seed)"))?;

    struct Task {
        idx: usize,
        design: DesignId,
        setting: Setting,
        replicate: u32,
    }
    let mut tasks = Vec::new();
    for &design in &cfg.designs {
        for &setting in &cfg.settings {
            for rep in 0..cfg.replicates {
                tasks.push(Task {
                    idx: tasks.len(),
                    design,
                    setting,
                    replicate: rep as u32,
                });
            }
        }
    }

    let run_cell = |task: &Task| -> Result<Vec<ScoreRow>> {
        let path = [
            task.design.index() as u64,
            task.setting.index() as u64,
            task.replicate as u64,
        ];
        let sim_seed = derive_seed(master, &path);
        let design = simgen::named_design(task.design).with_setting(task.setting);
        let sim = simgen::sample(&design, sim_seed)?;
        let seeds = RunSeeds::derive(master, &path);
        let mut rows = Vec::new();
        for &selector in &cfg.selectors {
            let run = run_selector(&sim.dataset, selector, cfg, seeds)?;
            rows.extend(score_rows(
                task.design,
                task.setting,
                task.replicate,
                &sim.truth,
                &run,
            ));
        }
        Ok(rows)
    };

    // Tasks run in parallel; a reorder buffer flushes completed replicates in
    // task order so output is byte-identical at any parallelism level.
    let (tx, rx) = mpsc::channel::<(usize, Result<Vec<ScoreRow>>)>();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;

    let mut all_rows = Vec::new();
    std::thread::scope(|scope| -> Result<()> {
        let tasks_ref = &tasks;
        let run_cell_ref = &run_cell;
        scope.spawn(move || {
            pool.install(|| {
                tasks_ref.par_iter().for_each_with(tx, |tx, task| {
                    let result = run_cell_ref(task);
                    let _ = tx.send((task.idx, result));
                });
            });
        });

        let mut pending: BTreeMap<usize, Result<Vec<ScoreRow>>> = BTreeMap::new();
        let mut next = 0usize;
        for (idx, result) in rx.iter() {
            pending.insert(idx, result);
            while let Some(result) = pending.remove(&next) {
                match result {
                    Ok(rows) => {
                        sink(&rows)?;
                        all_rows.extend(rows);
                    }
                    Err(e) => {
                        // Replicate failures are logged and skipped; the
                        // benchmark keeps going.
                        let t = &tasks[next];
                        eprintln!(
                            "replicate failed (design {}, {}, rep {}): {e}",
                            t.design, t.setting, t.replicate
                        );
                    }
                }
                next += 1;
            }
        }
        Ok(())
    })?;

    Ok(all_rows)
}

/// One selected variable in an analysis report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectedVariable {
    pub index: usize,
    pub name: String,
    pub frequency: f64,
}

/// Result of running one procedure on a user-supplied dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub procedure: String,
    pub selector: SelectorKind,
    pub threshold: f64,
    pub threshold_kind: String,
    pub bound_e_v: f64,
    pub bound_method: String,
    pub v_target: Option<f64>,
    pub bound_achieved: bool,
    pub alpha: f64,
    pub b_pairs: usize,
    pub n: usize,
    pub p: usize,
    pub chosen_factors: Vec<f64>,
    pub best_lambda: f64,
    pub cv_error: f64,
    pub q_avg: f64,
    pub selected: Vec<SelectedVariable>,
    pub non_clean_fits: usize,
}

/// Runs one procedure on an ingested dataset and reports the stable set by
/// variable name with its certificate. An empty stable set is a valid
/// outcome and is reported as such.
pub fn analyze(
    dataset: &Dataset,
    selector: SelectorKind,
    threshold: ThresholdKind,
    v_target: f64,
    alpha: f64,
    b_pairs: usize,
    seed: u64,
) -> Result<AnalysisReport> {
    let cfg = BenchConfig {
        v_target,
        alpha,
        b_pairs,
        thresholds: vec![threshold],
        selectors: vec![selector],
        master_seed: Some(seed),
        ..BenchConfig::default()
    };
    cfg.validate()?;
    let seeds = RunSeeds::derive(seed, &[]);
    let run = run_selector(dataset, selector, &cfg, seeds)?;
    let outcome = &run.outcomes[0];

    let names = dataset.feature_names();
    let selected = outcome
        .stable_set
        .iter()
        .map(|&j| SelectedVariable {
            index: j,
            name: names
                .map(|n| n[j].clone())
                .unwrap_or_else(|| format!("feature_{j}")),
            frequency: run.profile.freq()[j],
        })
        .collect();

    Ok(AnalysisReport {
        procedure: outcome.procedure.clone(),
        selector,
        threshold: outcome.threshold,
        threshold_kind: threshold.label(),
        bound_e_v: outcome.bound_e_v,
        bound_method: outcome.bound_method.to_string(),
        v_target: outcome.v_target,
        bound_achieved: outcome.bound_e_v <= v_target,
        alpha,
        b_pairs,
        n: dataset.n(),
        p: dataset.p(),
        chosen_factors: run.tuned.best_factors.clone(),
        best_lambda: run.tuned.best_lambda,
        cv_error: run.tuned.cv_error,
        q_avg: run.profile.q_avg(),
        selected,
        non_clean_fits: run.non_clean_fits,
    })
}
