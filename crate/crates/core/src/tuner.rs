//! Penalty tuning by repeated stratified K-fold cross-validation.
//!
//! For every candidate penalty-factor combination a full penalty path is
//! evaluated (the path is anchored at that combination's own `lambda_max`),
//! all combinations share identical fold assignments, and the winner is the
//! (combination, lambda) pair with the smallest mean classification error.
//! No one-standard-error rule and no cap on model size.

use crate::data::{Dataset, Family};
use crate::error::{Error, Result};
use crate::rng::{self, purpose};
use crate::solver::{self, engine, SolverOptions};

use rand::seq::SliceRandom;

/// The default two-modality factor grid: the reference modality stays at 1,
/// the second modality sweeps powers of two in both directions.
pub const TWO_MODALITY_FACTORS: [[f64; 2]; 11] = [
    [1.0, 1.0],
    [1.0, 2.0],
    [1.0, 4.0],
    [1.0, 8.0],
    [1.0, 16.0],
    [1.0, 32.0],
    [1.0, 64.0],
    [1.0, 0.5],
    [1.0, 0.25],
    [1.0, 0.125],
    [1.0, 0.0625],
];

/// Search space and cross-validation layout for [`tune`].
#[derive(Debug, Clone)]
pub struct TuneGrid {
    /// Candidate penalty-factor combinations, reference factor first.
    pub factor_combinations: Vec<Vec<f64>>,
    /// Elastic-Net mixing parameter shared by all candidates.
    pub alpha: f64,
    pub lambda_path_length: usize,
    pub lambda_min_ratio: f64,
    pub k_folds: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl TuneGrid {
    /// Grid with the eleven standard two-modality combinations.
    pub fn two_modality(seed: u64) -> Self {
        TuneGrid {
            factor_combinations: TWO_MODALITY_FACTORS.iter().map(|f| f.to_vec()).collect(),
            ..TuneGrid::single(2, seed)
        }
    }

    /// Degenerate grid holding only the all-ones combination — plain LASSO /
    /// Elastic-Net tuning.
    pub fn single(n_modalities: usize, seed: u64) -> Self {
        TuneGrid {
            factor_combinations: vec![vec![1.0; n_modalities]],
            alpha: 1.0,
            lambda_path_length: 100,
            lambda_min_ratio: 0.01,
            k_folds: 5,
            repeats: 10,
            seed,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    fn validate(&self, dataset: &Dataset) -> Result<()> {
        if self.factor_combinations.is_empty() {
            return Err(Error::TuningFailed("empty factor grid".into()));
        }
        for combo in &self.factor_combinations {
            if combo.len() != dataset.n_modalities() {
                return Err(Error::invalid(format!(
                    "combination {combo:?} does not match {} modalities",
                    dataset.n_modalities()
                )));
            }
            if combo[0] != 1.0 {
                return Err(Error::invalid("reference factor must be 1"));
            }
            if combo.iter().any(|&f| !(f > 0.0)) {
                return Err(Error::invalid("factors must be positive"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha must be in (0, 1]"));
        }
        if self.k_folds < 2 || self.k_folds > dataset.n() {
            return Err(Error::invalid("k_folds must be in [2, n]"));
        }
        if self.lambda_path_length == 0 || self.repeats == 0 {
            return Err(Error::invalid("path length and repeats must be positive"));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::invalid("lambda_min_ratio must be in (0, 1)"));
        }
        Ok(())
    }
}

/// Fold assignments for repeated K-fold cross-validation.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    /// `assignments[repeat][sample]` is the fold index of that sample.
    pub assignments: Vec<Vec<usize>>,
    pub k: usize,
    /// False when a class had fewer members than `k` and the plan fell back
    /// to unstratified folds.
    pub stratified: bool,
}

/// Draws `repeats` stratified partitions of `0..n` into `k` folds whose sizes
/// differ by at most one; class proportions are balanced across folds.
pub fn make_folds(
    n: usize,
    k: usize,
    repeats: usize,
    labels: Option<&[f64]>,
    seed: u64,
) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::invalid(format!("k = {k} must be in [2, {n}]")));
    }
    if repeats == 0 {
        return Err(Error::invalid("need at least one repeat"));
    }
    let stratified = match labels {
        Some(y) => {
            if y.len() != n {
                return Err(Error::invalid("label length does not match n"));
            }
            let ones = y.iter().filter(|&&v| v == 1.0).count();
            ones >= k && n - ones >= k
        }
        None => false,
    };

    let mut assignments = Vec::with_capacity(repeats);
    for rep in 0..repeats {
        let mut rng = rng::stream(seed, &[purpose::FOLDS, rep as u64]);
        let mut order: Vec<usize>;
        if stratified {
            let y = labels.unwrap();
            let mut zeros: Vec<usize> = (0..n).filter(|&i| y[i] != 1.0).collect();
            let mut ones: Vec<usize> = (0..n).filter(|&i| y[i] == 1.0).collect();
            zeros.shuffle(&mut rng);
            ones.shuffle(&mut rng);
            order = zeros;
            order.extend(ones);
        } else {
            order = (0..n).collect();
            order.shuffle(&mut rng);
        }
        // Deal in round-robin, carrying the position across classes so global
        // fold sizes stay within one of each other.
        let mut fold_of = vec![0usize; n];
        for (pos, &sample) in order.iter().enumerate() {
            fold_of[sample] = pos % k;
        }
        assignments.push(fold_of);
    }
    Ok(FoldPlan {
        assignments,
        k,
        stratified,
    })
}

/// Mean held-out classification error of one (factors, lambda) configuration.
#[derive(Debug, Clone, Copy)]
pub struct CvError {
    pub mean_error: f64,
    pub fits: usize,
    pub non_converged: usize,
}

/// Cross-validated classification error at a fixed penalty configuration.
///
/// Fits on each fold complement and scores misclassification (cutoff 0.5) on
/// the held-out fold; the result is the mean of per-fold proportions. Fits
/// that stop at the iteration cap still contribute their error and are
/// counted in `non_converged`.
pub fn cv_error(
    dataset: &Dataset,
    family: Family,
    factors: &[f64],
    alpha: f64,
    lambda: f64,
    folds: &FoldPlan,
) -> Result<CvError> {
    if family != Family::Logistic {
        return Err(Error::invalid(
            "cross-validated classification error needs a logistic model",
        ));
    }
    dataset.check_family(family)?;
    let grid = TuneGrid {
        factor_combinations: vec![factors.to_vec()],
        alpha,
        lambda_path_length: 1,
        lambda_min_ratio: 0.5,
        k_folds: folds.k,
        repeats: folds.assignments.len(),
        seed: 0,
    };
    grid.validate(dataset)?;
    let eval = evaluate_grid(dataset, &grid, folds, Some(vec![vec![lambda]]))?;
    Ok(CvError {
        mean_error: eval.errors[0][0],
        fits: folds.assignments.len() * folds.k,
        non_converged: eval.non_converged,
    })
}

/// Winner of a grid search plus the full per-combination error table.
#[derive(Debug, Clone)]
pub struct TunedConfig {
    pub best_factors: Vec<f64>,
    pub best_lambda: f64,
    pub cv_error: f64,
    pub error_table: Vec<CombinationScore>,
    pub non_converged_fits: usize,
}

/// Best (lambda, error) found for one factor combination.
#[derive(Debug, Clone)]
pub struct CombinationScore {
    pub factors: Vec<f64>,
    pub lambda: f64,
    pub error: f64,
}

/// Selects the penalty-factor combination and reference penalty by repeated
/// K-fold cross-validation with classification error.
///
/// Every combination is evaluated on identical fold assignments along its own
/// penalty path. Ties break toward the earlier combination in grid order and
/// toward the larger penalty within a path.
pub fn tune(dataset: &Dataset, grid: &TuneGrid) -> Result<TunedConfig> {
    grid.validate(dataset)?;
    dataset.check_family(Family::Logistic)?;
    let folds = make_folds(
        dataset.n(),
        grid.k_folds,
        grid.repeats,
        Some(dataset.y().as_slice().expect("contiguous y")),
        grid.seed,
    )?;

    let eval = evaluate_grid(dataset, grid, &folds, None)?;

    let mut best: Option<(usize, usize)> = None;
    let mut best_err = f64::INFINITY;
    let mut table = Vec::with_capacity(grid.factor_combinations.len());
    for (c, combo) in grid.factor_combinations.iter().enumerate() {
        let mut combo_best = (0usize, f64::INFINITY);
        for (l, &err) in eval.errors[c].iter().enumerate() {
            if err < combo_best.1 {
                combo_best = (l, err);
            }
        }
        table.push(CombinationScore {
            factors: combo.clone(),
            lambda: eval.lambdas[c][combo_best.0],
            error: combo_best.1,
        });
        if combo_best.1 < best_err {
            best_err = combo_best.1;
            best = Some((c, combo_best.0));
        }
    }
    let (c, l) = best.ok_or_else(|| Error::TuningFailed("no combination evaluated".into()))?;
    Ok(TunedConfig {
        best_factors: grid.factor_combinations[c].clone(),
        best_lambda: eval.lambdas[c][l],
        cv_error: best_err,
        error_table: table,
        non_converged_fits: eval.non_converged,
    })
}

struct GridEvaluation {
    /// `errors[combination][path_index]`, mean over repeats and folds.
    errors: Vec<Vec<f64>>,
    /// `lambdas[combination]`, descending.
    lambdas: Vec<Vec<f64>>,
    non_converged: usize,
}

/// Shared evaluation core: fits every combination's path on every fold
/// complement and accumulates held-out misclassification proportions.
fn evaluate_grid(
    dataset: &Dataset,
    grid: &TuneGrid,
    folds: &FoldPlan,
    fixed_lambdas: Option<Vec<Vec<f64>>>,
) -> Result<GridEvaluation> {
    let n = dataset.n();
    let n_combos = grid.factor_combinations.len();

    // Paths are anchored at each combination's lambda_max on the full data,
    // so every fold evaluates the same penalty values.
    let pf_per_combo: Vec<Vec<f64>> = grid
        .factor_combinations
        .iter()
        .map(|c| dataset.expand_factors(c))
        .collect::<Result<_>>()?;
    let lambdas: Vec<Vec<f64>> = match fixed_lambdas {
        Some(l) => l,
        None => {
            let full_std = solver::standardize(dataset)?;
            pf_per_combo
                .iter()
                .map(|pf| {
                    let lmax = solver::lambda_max_standardized(&full_std, pf, grid.alpha);
                    solver::lambda_path(lmax, grid.lambda_path_length, grid.lambda_min_ratio)
                })
                .collect()
        }
    };

    let mut errors = vec![vec![0.0; lambdas[0].len()]; n_combos];
    let mut non_converged = 0usize;
    let mut cells = 0usize;
    let opts = SolverOptions::default();
    let x = dataset.x();
    let y = dataset.y();

    for assignment in &folds.assignments {
        for fold in 0..folds.k {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
            let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
            if test.is_empty() {
                continue;
            }
            cells += 1;
            let train_ds = dataset.subset_rows(&train)?;

            // Single-class training folds cannot be fit; the null model
            // predicts the constant class.
            let ones = train_ds.y().iter().filter(|&&v| v == 1.0).count();
            if ones == 0 || ones == train_ds.n() {
                let predicted = if ones == 0 { 0.0 } else { 1.0 };
                let miss = test.iter().filter(|&&i| y[i] != predicted).count();
                let prop = miss as f64 / test.len() as f64;
                for row in errors.iter_mut() {
                    for e in row.iter_mut() {
                        *e += prop;
                    }
                }
                continue;
            }

            let std_train = solver::standardize(&train_ds)?;
            // Flat copy of the held-out rows keeps the prediction loop on
            // contiguous slices.
            let p = dataset.p();
            let mut test_x = vec![0.0; test.len() * p];
            let mut test_y = vec![0.0; test.len()];
            for (t, &i) in test.iter().enumerate() {
                for j in 0..p {
                    test_x[t * p + j] = x[[i, j]];
                }
                test_y[t] = y[i];
            }
            for (c, pf) in pf_per_combo.iter().enumerate() {
                engine::solve_path(
                    &std_train,
                    Family::Logistic,
                    pf,
                    grid.alpha,
                    &lambdas[c],
                    &opts,
                    |l, point| {
                        if !point.converged {
                            non_converged += 1;
                        }
                        let mut miss = 0usize;
                        for (t, &yt) in test_y.iter().enumerate() {
                            let row = &test_x[t * p..(t + 1) * p];
                            let mut eta = point.intercept;
                            for &j in point.active {
                                let b = point.beta[j] / std_train.scales()[j];
                                eta += b * (row[j] - std_train.means()[j]);
                            }
                            let label = if eta >= 0.0 { 1.0 } else { 0.0 };
                            if label != yt {
                                miss += 1;
                            }
                        }
                        errors[c][l] += miss as f64 / test.len() as f64;
                    },
                );
            }
        }
    }

    if cells == 0 {
        return Err(Error::TuningFailed("no folds evaluated".into()));
    }
    for row in errors.iter_mut() {
        for e in row.iter_mut() {
            *e /= cells as f64;
        }
    }
    Ok(GridEvaluation {
        errors,
        lambdas,
        non_converged,
    })
}
