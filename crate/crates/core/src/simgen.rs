//! Simulated two-modality datasets with known ground truth.
//!
//! A binary outcome is drawn fair-coin, then features are Gaussian with a
//! class-1 mean shift on the truly active columns. The independent setting
//! uses identity covariance; the correlated setting ties features into
//! equicorrelated blocks that span both modalities (block k of modality 1 is
//! correlated with block k of modality 2), then randomly permutes columns
//! within each modality so active features land in random blocks.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, purpose};

/// The nine named simulation designs.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum DesignId {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
}

impl DesignId {
    pub const ALL: [DesignId; 9] = [
        DesignId::A,
        DesignId::B,
        DesignId::C,
        DesignId::D,
        DesignId::E,
        DesignId::F,
        DesignId::G,
        DesignId::H,
        DesignId::I,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for DesignId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for DesignId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(DesignId::A),
            "B" => Ok(DesignId::B),
            "C" => Ok(DesignId::C),
            "D" => Ok(DesignId::D),
            "E" => Ok(DesignId::E),
            "F" => Ok(DesignId::F),
            "G" => Ok(DesignId::G),
            "H" => Ok(DesignId::H),
            "I" => Ok(DesignId::I),
            other => Err(Error::invalid(format!("unknown design '{other}'"))),
        }
    }
}

/// Covariance setting of a simulated dataset.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Independent,
    Correlated,
}

impl Setting {
    pub const ALL: [Setting; 2] = [Setting::Independent, Setting::Correlated];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Setting::Independent => write!(f, "independent"),
            Setting::Correlated => write!(f, "correlated"),
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "independent" => Ok(Setting::Independent),
            "correlated" => Ok(Setting::Correlated),
            other => Err(Error::invalid(format!("unknown setting '{other}'"))),
        }
    }
}

/// Generator parameters: modality sizes, number of active features per
/// modality, signal strength, sample size and covariance structure.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub p1: usize,
    pub p2: usize,
    pub b1: usize,
    pub b2: usize,
    pub beta: f64,
    pub n: usize,
    pub setting: Setting,
    pub rho: f64,
    pub blocks_per_modality: usize,
}

impl DesignSpec {
    pub fn p(&self) -> usize {
        self.p1 + self.p2
    }

    pub fn with_setting(mut self, setting: Setting) -> Self {
        self.setting = setting;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Same dimensions but no active features: every selection is a false
    /// positive.
    pub fn null(mut self) -> Self {
        self.b1 = 0;
        self.b2 = 0;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.p1 == 0 || self.p2 == 0 {
            return Err(Error::invalid("both modalities must be non-empty"));
        }
        if self.b1 > self.p1 || self.b2 > self.p2 {
            return Err(Error::invalid("active counts cannot exceed modality sizes"));
        }
        if self.n < 4 {
            return Err(Error::invalid("need n >= 4"));
        }
        if self.setting == Setting::Correlated {
            let b = self.blocks_per_modality;
            if b == 0 || self.p1 % b != 0 || self.p2 % b != 0 {
                return Err(Error::invalid(
                    "blocks_per_modality must divide both modality sizes",
                ));
            }
            if !(0.0..1.0).contains(&self.rho) {
                return Err(Error::invalid("rho must be in [0, 1)"));
            }
        }
        Ok(())
    }
}

/// The named design table (independent setting; switch with `with_setting`).
pub fn named_design(id: DesignId) -> DesignSpec {
    let (p1, p2, b1, b2) = match id {
        DesignId::A => (1000, 1000, 10, 10),
        DesignId::B => (100, 1000, 3, 30),
        DesignId::C => (100, 1000, 10, 10),
        DesignId::D => (100, 1000, 20, 0),
        DesignId::E => (20, 1000, 3, 10),
        DesignId::F => (20, 1000, 15, 3),
        DesignId::G => (20, 1000, 10, 10),
        DesignId::H => (20, 1000, 3, 3),
        DesignId::I => (20, 2000, 20, 0),
    };
    DesignSpec {
        p1,
        p2,
        b1,
        b2,
        beta: 1.0,
        n: 100,
        setting: Setting::Independent,
        rho: 0.4,
        blocks_per_modality: 10,
    }
}

/// A simulated dataset with the positions of the truly active features.
#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub dataset: Dataset,
    /// Active feature positions after any column permutation.
    pub truth: Vec<usize>,
    pub design: DesignSpec,
    pub seed: u64,
}

/// Draws one dataset from the design.
///
/// A draw that lands all of `y` in one class is redrawn once from a derived
/// stream; a second failure is an error.
pub fn sample(design: &DesignSpec, seed: u64) -> Result<SimulatedDataset> {
    design.validate()?;
    match sample_once(design, rng::stream(seed, &[purpose::SIMULATE])) {
        Ok(dataset) => finish(design, seed, dataset),
        Err(Error::DegenerateSample(_)) => {
            let dataset = sample_once(design, rng::stream(seed, &[purpose::RESAMPLE]))?;
            finish(design, seed, dataset)
        }
        Err(e) => Err(e),
    }
}

fn finish(design: &DesignSpec, seed: u64, parts: RawSample) -> Result<SimulatedDataset> {
    let RawSample { x, y, truth } = parts;
    let p1 = design.p1;
    let names: Vec<String> = (0..design.p())
        .map(|j| {
            if j < p1 {
                format!("m1_{:04}", j + 1)
            } else {
                format!("m2_{:04}", j - p1 + 1)
            }
        })
        .collect();
    let dataset = Dataset::new(x, y, vec![design.p1, design.p2])?.with_names(names)?;
    Ok(SimulatedDataset {
        dataset,
        truth,
        design: design.clone(),
        seed,
    })
}

struct RawSample {
    x: Array2<f64>,
    y: Array1<f64>,
    truth: Vec<usize>,
}

fn sample_once(design: &DesignSpec, mut rng: ChaCha8Rng) -> Result<RawSample> {
    let n = design.n;
    let p = design.p();
    let p1 = design.p1;

    let mut y = Array1::zeros(n);
    let mut ones = 0usize;
    for i in 0..n {
        let v = rng.gen_bool(0.5);
        y[i] = v as u8 as f64;
        ones += v as usize;
    }
    if ones == 0 || ones == n {
        return Err(Error::DegenerateSample(format!(
            "all {n} outcomes fell in one class"
        )));
    }

    let mut mu = vec![0.0; p];
    for j in 0..design.b1 {
        mu[j] = design.beta;
    }
    for j in 0..design.b2 {
        mu[p1 + j] = design.beta;
    }
    let zero_mean = vec![0.0; p];

    let mut x = Array2::zeros((n, p));
    match design.setting {
        Setting::Independent => {
            for i in 0..n {
                let mean = if y[i] == 1.0 { &mu } else { &zero_mean };
                for j in 0..p {
                    let z: f64 = rng.sample(StandardNormal);
                    x[[i, j]] = mean[j] + z;
                }
            }
        }
        Setting::Correlated => {
            for i in 0..n {
                let mean = if y[i] == 1.0 { &mu } else { &zero_mean };
                let row = correlated_row(design, mean, &mut rng);
                for j in 0..p {
                    x[[i, j]] = row[j];
                }
            }
        }
    }

    let mut truth: Vec<usize> = (0..design.b1).chain(p1..p1 + design.b2).collect();

    if design.setting == Setting::Correlated {
        // Permute columns within each modality and remap the truth positions.
        let mut pos1: Vec<usize> = (0..p1).collect();
        let mut pos2: Vec<usize> = (0..design.p2).collect();
        pos1.shuffle(&mut rng);
        pos2.shuffle(&mut rng);
        let mut permuted = Array2::zeros((n, p));
        for j in 0..p1 {
            let dst = pos1[j];
            for i in 0..n {
                permuted[[i, dst]] = x[[i, j]];
            }
        }
        for j in 0..design.p2 {
            let dst = p1 + pos2[j];
            for i in 0..n {
                permuted[[i, dst]] = x[[i, p1 + j]];
            }
        }
        x = permuted;
        truth = truth
            .into_iter()
            .map(|t| if t < p1 { pos1[t] } else { p1 + pos2[t - p1] })
            .collect();
        truth.sort_unstable();
    }

    Ok(RawSample { x, y, truth })
}

/// Draws one feature row of the correlated setting around `mean`.
///
/// Joint block k covers columns `k*s1..(k+1)*s1` of modality 1 and the
/// matching slice of modality 2 (`s_m = p_m / blocks`); within a joint block
/// every pair of features has correlation `rho`, across blocks zero. The
/// equicorrelation is exact by the shared-factor construction
/// `x = sqrt(rho) z_k + sqrt(1 - rho) eps`.
pub fn correlated_row(design: &DesignSpec, mean: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let b = design.blocks_per_modality;
    let s1 = design.p1 / b;
    let s2 = design.p2 / b;
    let sq_rho = design.rho.sqrt();
    let sq_rest = (1.0 - design.rho).sqrt();
    let mut row = vec![0.0; design.p()];
    for k in 0..b {
        let z: f64 = rng.sample(StandardNormal);
        for t in 0..s1 {
            let j = k * s1 + t;
            let eps: f64 = rng.sample(StandardNormal);
            row[j] = mean[j] + sq_rho * z + sq_rest * eps;
        }
        for t in 0..s2 {
            let j = design.p1 + k * s2 + t;
            let eps: f64 = rng.sample(StandardNormal);
            row[j] = mean[j] + sq_rho * z + sq_rest * eps;
        }
    }
    row
}
