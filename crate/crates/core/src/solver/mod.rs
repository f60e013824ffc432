//! Penalized regression solver.
//!
//! Fits linear and logistic models with an Elastic-Net penalty where every
//! feature carries a penalty factor inherited from its modality: the
//! objective is
//!
//! ```text
//! (1/(2n)) * RSS           + lambda * Σ_j pf_j * (alpha |β_j| + (1-alpha)/2 β_j²)   (linear)
//! (1/n) * neg-log-lik      + lambda * Σ_j pf_j * (alpha |β_j| + (1-alpha)/2 β_j²)   (logistic)
//! ```
//!
//! Features are standardized internally (mean 0, variance 1 with the
//! n-denominator); coefficients are reported back on the original scale. The
//! intercept is always present and never penalized. Logistic fits run
//! iteratively reweighted least squares around the same coordinate-descent
//! core.

pub(crate) mod engine;

use ndarray::{Array1, Array2};

use crate::data::{Dataset, Family};
use crate::error::{Error, Result};

/// Per-modality penalty factors plus the shared penalty configuration.
///
/// The first modality is the reference and must have factor 1; the effective
/// penalty on a feature of modality `m` is `lambda * factors[m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    factors: Vec<f64>,
    alpha: f64,
    lambda: f64,
}

impl PenaltySpec {
    pub fn new(factors: Vec<f64>, alpha: f64, lambda: f64) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid("penalty factors must be non-empty"));
        }
        if factors[0] != 1.0 {
            return Err(Error::invalid(format!(
                "reference modality must have factor 1, got {}",
                factors[0]
            )));
        }
        if factors.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
            return Err(Error::invalid("penalty factors must be positive and finite"));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha must be in (0, 1], got {alpha}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(PenaltySpec { factors, alpha, lambda })
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        PenaltySpec::new(self.factors.clone(), self.alpha, lambda)
    }
}

/// Convergence and robustness controls for the coordinate-descent core.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Stop sweeping once the largest coefficient move in a sweep is below this.
    pub sweep_tol: f64,
    /// Hard cap on coordinate-descent sweeps per penalty value.
    pub max_sweeps: usize,
    /// Hard cap on reweighting iterations for logistic fits.
    pub max_irls: usize,
    /// Lower floor on IRLS weights, guards fitted probabilities near 0/1.
    pub weight_floor: f64,
    /// Optimality-certificate tolerance; sweeps continue until met.
    pub kkt_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            sweep_tol: 1e-7,
            max_sweeps: 100_000,
            max_irls: 50,
            weight_floor: 1e-5,
            kkt_tol: 1e-6,
        }
    }
}

impl SolverOptions {
    /// Tightened tolerances for oracle-grade comparisons in tests.
    pub fn tight() -> Self {
        SolverOptions {
            sweep_tol: 1e-10,
            max_sweeps: 200_000,
            max_irls: 200,
            weight_floor: 1e-5,
            kkt_tol: 1e-9,
        }
    }
}

/// A dataset standardized column by column, kept in column-major order for
/// the solver hot loops.
#[derive(Debug, Clone)]
pub struct Standardized {
    n: usize,
    p: usize,
    cols: Vec<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
    excluded: Vec<bool>,
    col_sq_mean: Vec<f64>,
    y: Vec<f64>,
    y_mean: f64,
}

impl Standardized {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Constant columns; they are never selectable and keep coefficient 0.
    pub fn excluded(&self) -> &[bool] {
        &self.excluded
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub(crate) fn col_sq_mean(&self) -> &[f64] {
        &self.col_sq_mean
    }
}

/// Standardizes every column to mean 0 and variance 1 (n-denominator).
///
/// Constant columns get scale 1 and are flagged as never-selectable. The
/// means and scales make the transform invertible, so fitted coefficients can
/// be mapped back to the original feature scale.
pub fn standardize(dataset: &Dataset) -> Result<Standardized> {
    let n = dataset.n();
    let p = dataset.p();
    let nf = n as f64;
    let x = dataset.x();

    let mut cols = vec![0.0; n * p];
    let mut means = vec![0.0; p];
    let mut scales = vec![1.0; p];
    let mut excluded = vec![false; p];
    let mut col_sq_mean = vec![0.0; p];

    for j in 0..p {
        let mut mean = 0.0;
        for i in 0..n {
            mean += x[[i, j]];
        }
        mean /= nf;
        let mut var = 0.0;
        for i in 0..n {
            let d = x[[i, j]] - mean;
            var += d * d;
        }
        var /= nf;
        means[j] = mean;
        let slot = &mut cols[j * n..(j + 1) * n];
        if var <= 1e-12 {
            // Constant column: centered values are (numerically) zero.
            excluded[j] = true;
            scales[j] = 1.0;
            for v in slot.iter_mut() {
                *v = 0.0;
            }
            col_sq_mean[j] = 0.0;
        } else {
            let scale = var.sqrt();
            scales[j] = scale;
            let mut sq = 0.0;
            for i in 0..n {
                let v = (x[[i, j]] - mean) / scale;
                slot[i] = v;
                sq += v * v;
            }
            col_sq_mean[j] = sq / nf;
        }
    }

    let y: Vec<f64> = dataset.y().iter().copied().collect();
    let y_mean = y.iter().sum::<f64>() / nf;

    Ok(Standardized {
        n,
        p,
        cols,
        means,
        scales,
        excluded,
        col_sq_mean,
        y,
        y_mean,
    })
}

/// A fitted model with coefficients on the original feature scale.
///
/// Zeros in `beta` are exact: the active set is `{ j : beta[j] != 0 }`.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub intercept: f64,
    pub beta: Array1<f64>,
    pub lambda: f64,
    pub spec: PenaltySpec,
    pub family: Family,
    pub n_iter: usize,
    pub converged: bool,
}

impl FitResult {
    /// Indices of features with non-zero coefficients.
    pub fn active_set(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| (b != 0.0).then_some(j))
            .collect()
    }

    /// Linear predictor for linear models, class probabilities for logistic.
    pub fn predict(&self, x_new: &Array2<f64>) -> Result<Array1<f64>> {
        if x_new.ncols() != self.beta.len() {
            return Err(Error::invalid(format!(
                "prediction matrix has {} columns, model has {}",
                x_new.ncols(),
                self.beta.len()
            )));
        }
        let mut eta = x_new.dot(&self.beta);
        eta += self.intercept;
        if self.family == Family::Logistic {
            eta.mapv_inplace(sigmoid);
        }
        Ok(eta)
    }

    /// Predicted class labels at cutoff 0.5 (logistic only).
    pub fn classify(&self, x_new: &Array2<f64>) -> Result<Array1<f64>> {
        if self.family != Family::Logistic {
            return Err(Error::invalid("classification needs a logistic fit"));
        }
        let probs = self.predict(x_new)?;
        Ok(probs.mapv(|p| if p >= 0.5 { 1.0 } else { 0.0 }))
    }

    /// Optimality residuals on the standardized scale, one per feature.
    ///
    /// For an active feature this is the absolute violation of the stationarity
    /// condition; for an inactive one it is how far the gradient sticks out of
    /// the subdifferential interval. A converged fit has every entry below the
    /// solver's certificate tolerance.
    pub fn kkt_residuals(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        if dataset.p() != self.beta.len() {
            return Err(Error::invalid("dataset does not match this fit"));
        }
        let std = standardize(dataset)?;
        let pf = dataset.expand_factors(self.spec.factors())?;
        let n = std.n();
        let nf = n as f64;

        // Raw-scale linear predictor equals the standardized-scale one.
        let mut resid = vec![0.0; n];
        let x = dataset.x();
        for i in 0..n {
            let mut eta = self.intercept;
            for j in 0..dataset.p() {
                let b = self.beta[j];
                if b != 0.0 {
                    eta += x[[i, j]] * b;
                }
            }
            let mu = match self.family {
                Family::Linear => eta,
                Family::Logistic => sigmoid(eta),
            };
            resid[i] = std.y()[i] - mu;
        }

        let lambda = self.lambda;
        let alpha = self.spec.alpha();
        let mut out = vec![0.0; dataset.p()];
        for j in 0..dataset.p() {
            if std.excluded()[j] {
                continue;
            }
            let col = std.col(j);
            let mut dot = 0.0;
            for i in 0..n {
                dot += col[i] * resid[i];
            }
            let grad = -dot / nf;
            let beta_std = self.beta[j] * std.scales()[j];
            out[j] = if beta_std != 0.0 {
                (grad + lambda * pf[j] * (alpha * beta_std.signum() + (1.0 - alpha) * beta_std))
                    .abs()
            } else {
                (grad.abs() - lambda * pf[j] * alpha).max(0.0)
            };
        }
        Ok(out)
    }
}

/// Smallest penalty at which the fitted coefficient vector is entirely zero.
///
/// Computed from the null-model residual (`y` minus its mean, which for
/// logistic models is the class prevalence): `max_j |x_j' r| / (n alpha pf_j)`.
/// The returned value is nudged up by at most a few ulps so that fitting at
/// it (or above) provably yields an all-zero solution.
pub fn lambda_max(dataset: &Dataset, spec_factors: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must be in (0, 1], got {alpha}")));
    }
    let std = standardize(dataset)?;
    let pf = dataset.expand_factors(spec_factors)?;
    Ok(lambda_max_standardized(&std, &pf, alpha))
}

pub(crate) fn lambda_max_standardized(std: &Standardized, pf: &[f64], alpha: f64) -> f64 {
    let n = std.n();
    let nf = n as f64;
    let mut scores = vec![0.0; std.p()];
    let mut best = 0.0f64;
    for j in 0..std.p() {
        if std.excluded()[j] {
            continue;
        }
        let col = std.col(j);
        let mut dot = 0.0;
        for i in 0..n {
            dot += col[i] * (std.y()[i] - std.y_mean());
        }
        let z = dot.abs() / nf;
        scores[j] = z;
        let s = z / (alpha * pf[j]);
        if s > best {
            best = s;
        }
    }
    if best == 0.0 {
        return 0.0;
    }
    // Rounding in z / (alpha pf) * (alpha pf) can land one ulp short; bump
    // until lambda * alpha * pf_j >= |z_j| holds for every feature.
    let mut lambda = best;
    loop {
        let violated = (0..std.p())
            .any(|j| !std.excluded()[j] && lambda * alpha * pf[j] < scores[j]);
        if !violated {
            break;
        }
        lambda = next_up(lambda);
    }
    lambda
}

fn next_up(v: f64) -> f64 {
    f64::from_bits(v.to_bits() + 1)
}

/// Log-spaced descending penalty path from `lambda_max` down to
/// `lambda_max * min_ratio`.
pub fn lambda_path(lambda_max: f64, len: usize, min_ratio: f64) -> Vec<f64> {
    assert!(len >= 1 && min_ratio > 0.0 && min_ratio < 1.0);
    if len == 1 {
        return vec![lambda_max];
    }
    let log_max = lambda_max.ln();
    let log_min = (lambda_max * min_ratio).ln();
    (0..len)
        .map(|i| (log_max + (log_min - log_max) * i as f64 / (len - 1) as f64).exp())
        .collect()
}

/// Fits the penalized model with default solver options.
pub fn fit(dataset: &Dataset, family: Family, spec: &PenaltySpec) -> Result<FitResult> {
    fit_with_options(dataset, family, spec, &SolverOptions::default())
}

/// Fits the penalized model with explicit solver options.
pub fn fit_with_options(
    dataset: &Dataset,
    family: Family,
    spec: &PenaltySpec,
    opts: &SolverOptions,
) -> Result<FitResult> {
    dataset.check_family(family)?;
    let pf = dataset.expand_factors(spec.factors())?;
    let std = standardize(dataset)?;
    let inner = engine::solve_single(&std, family, &pf, spec.alpha(), spec.lambda(), opts);
    let (intercept, beta) = unscale(&std, inner.intercept, &inner.beta);
    Ok(FitResult {
        intercept,
        beta: Array1::from(beta),
        lambda: spec.lambda(),
        spec: spec.clone(),
        family,
        n_iter: inner.sweeps,
        converged: inner.converged,
    })
}

/// Maps standardized-scale coefficients back to the original feature scale.
pub(crate) fn unscale(std: &Standardized, intercept: f64, beta_std: &[f64]) -> (f64, Vec<f64>) {
    let mut beta = vec![0.0; beta_std.len()];
    let mut shift = 0.0;
    for j in 0..beta_std.len() {
        if beta_std[j] != 0.0 {
            beta[j] = beta_std[j] / std.scales()[j];
            shift += beta[j] * std.means()[j];
        }
    }
    (intercept - shift, beta)
}

/// Cross-check route for pure-LASSO penalty factors.
///
/// With `alpha = 1`, fitting with penalty factors is equivalent to ordinary
/// LASSO on columns divided by their factors, with coefficients mapped back by
/// the same division. This runs that alternative route end to end and returns
/// a result comparable to [`fit`]; it is a consistency check, not the
/// production path.
pub fn fit_with_factors_equivalence(
    dataset: &Dataset,
    family: Family,
    spec: &PenaltySpec,
    opts: &SolverOptions,
) -> Result<FitResult> {
    if spec.alpha() != 1.0 {
        return Err(Error::invalid(
            "the rescaling equivalence only holds for alpha = 1",
        ));
    }
    dataset.check_family(family)?;
    let pf = dataset.expand_factors(spec.factors())?;
    let std = standardize(dataset)?;

    // Rescale standardized columns by 1/pf_j and solve with unit factors.
    let mut rescaled = std.clone();
    for j in 0..rescaled.p {
        let f = pf[j];
        if f != 1.0 {
            let n = rescaled.n;
            for v in rescaled.cols[j * n..(j + 1) * n].iter_mut() {
                *v /= f;
            }
            rescaled.col_sq_mean[j] /= f * f;
        }
    }
    let unit_pf = vec![1.0; dataset.p()];
    let inner = engine::solve_single(&rescaled, family, &unit_pf, 1.0, spec.lambda(), opts);

    // beta_tilde = pf_j * beta_j on the standardized scale.
    let beta_std: Vec<f64> = inner
        .beta
        .iter()
        .zip(&pf)
        .map(|(&b, &f)| if b != 0.0 { b / f } else { 0.0 })
        .collect();
    let (intercept, beta) = unscale(&std, inner.intercept, &beta_std);
    Ok(FitResult {
        intercept,
        beta: Array1::from(beta),
        lambda: spec.lambda(),
        spec: spec.clone(),
        family,
        n_iter: inner.sweeps,
        converged: inner.converged,
    })
}

/// Objective value `loss + penalty` for the given coefficients taken at face
/// value on the given data (no internal standardization). Intended for
/// oracle comparisons on data that is already standardized.
pub fn penalized_objective(
    dataset: &Dataset,
    family: Family,
    spec: &PenaltySpec,
    intercept: f64,
    beta: &Array1<f64>,
) -> Result<f64> {
    let pf = dataset.expand_factors(spec.factors())?;
    let x = dataset.x();
    let y = dataset.y();
    let n = dataset.n() as f64;
    let eta = x.dot(beta) + intercept;
    let loss = match family {
        Family::Linear => {
            let mut rss = 0.0;
            for i in 0..dataset.n() {
                let r = y[i] - eta[i];
                rss += r * r;
            }
            rss / (2.0 * n)
        }
        Family::Logistic => {
            let mut nll = 0.0;
            for i in 0..dataset.n() {
                nll += log1pexp(eta[i]) - y[i] * eta[i];
            }
            nll / n
        }
    };
    let alpha = spec.alpha();
    let mut penalty = 0.0;
    for j in 0..dataset.p() {
        let b = beta[j];
        penalty += pf[j] * (alpha * b.abs() + 0.5 * (1.0 - alpha) * b * b);
    }
    Ok(loss + spec.lambda() * penalty)
}

/// Mean negative log-likelihood of a logistic model.
pub fn logistic_nll(x: &Array2<f64>, y: &Array1<f64>, intercept: f64, beta: &Array1<f64>) -> f64 {
    let eta = x.dot(beta) + intercept;
    let n = x.nrows() as f64;
    eta.iter()
        .zip(y.iter())
        .map(|(&e, &yi)| log1pexp(e) - yi * e)
        .sum::<f64>()
        / n
}

/// Gradient of [`logistic_nll`] with respect to the intercept and coefficients.
pub fn logistic_nll_grad(
    x: &Array2<f64>,
    y: &Array1<f64>,
    intercept: f64,
    beta: &Array1<f64>,
) -> (f64, Array1<f64>) {
    let n = x.nrows();
    let nf = n as f64;
    let eta = x.dot(beta) + intercept;
    let mut resid = Array1::zeros(n);
    for i in 0..n {
        resid[i] = sigmoid(eta[i]) - y[i];
    }
    let grad_beta = x.t().dot(&resid) / nf;
    let grad_intercept = resid.sum() / nf;
    (grad_intercept, grad_beta)
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn log1pexp(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}
