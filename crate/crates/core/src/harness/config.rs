use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    LinearGaussian,
    CrossHospital,
    Perturbation,
    SelectionBias,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [
        ExperimentId::LinearGaussian,
        ExperimentId::CrossHospital,
        ExperimentId::Perturbation,
        ExperimentId::SelectionBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::LinearGaussian => "linear-gaussian",
            ExperimentId::CrossHospital => "cross-hospital",
            ExperimentId::Perturbation => "perturbation",
            ExperimentId::SelectionBias => "selection-bias",
        }
    }

    /// Replicates used when the caller does not ask for a count.
    pub fn default_replicates(self) -> usize {
        match self {
            ExperimentId::LinearGaussian => 1,
            ExperimentId::CrossHospital | ExperimentId::Perturbation => 50,
            ExperimentId::SelectionBias => 100,
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL.into_iter().find(|id| id.name() == s).ok_or_else(|| {
            let names: Vec<&str> = ExperimentId::ALL.iter().map(|id| id.name()).collect();
            Error::InvalidConfig(format!("unknown experiment `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// Linear-Gaussian screening experiment: train at one confounding strength,
/// test over a grid of strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianKnobs {
    pub train_w2: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    /// Number of equally spaced test domains, both ends included.
    pub grid_points: usize,
    pub samples: usize,
    pub noise_sd: f64,
}

impl Default for LinearGaussianKnobs {
    fn default() -> Self {
        LinearGaussianKnobs {
            train_w2: 2.0,
            grid_min: -3.0,
            grid_max: 7.0,
            grid_points: 101,
            samples: 30_000,
            noise_sd: 0.1,
        }
    }
}

impl LinearGaussianKnobs {
    pub fn grid(&self) -> Vec<f64> {
        let step =
            if self.grid_points > 1 { (self.grid_max - self.grid_min) / (self.grid_points - 1) as f64 } else { 0.0 };
        (0..self.grid_points).map(|i| self.grid_min + step * i as f64).collect()
    }
}

/// Sample sizes shared by the cross-hospital and perturbation experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct HospitalKnobs {
    pub source_samples: usize,
    /// Leading source rows used for training; the rest are the held-out source test.
    pub train_samples: usize,
    pub target_samples: usize,
}

impl Default for HospitalKnobs {
    fn default() -> Self {
        HospitalKnobs { source_samples: 2000, train_samples: 1600, target_samples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationKnobs {
    pub hospital: HospitalKnobs,
    pub sigma_step: f64,
    /// Grid is `sigma_step, 2 * sigma_step, ..., sigma_points * sigma_step`.
    pub sigma_points: usize,
}

impl Default for PerturbationKnobs {
    fn default() -> Self {
        PerturbationKnobs { hospital: HospitalKnobs::default(), sigma_step: 0.05, sigma_points: 20 }
    }
}

impl PerturbationKnobs {
    pub fn grid(&self) -> Vec<f64> {
        (1..=self.sigma_points).map(|i| self.sigma_step * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionBiasKnobs {
    pub population: usize,
    /// Share of the population held out before selection as the unbiased test set.
    pub unbiased_fraction: f64,
    /// Share of the selected rows used for training; the rest are the biased test set.
    pub train_fraction: f64,
    pub rejection_probability: f64,
}

impl Default for SelectionBiasKnobs {
    fn default() -> Self {
        SelectionBiasKnobs {
            population: 30_000,
            unbiased_fraction: 1.0 / 3.0,
            train_fraction: 2.0 / 3.0,
            rejection_probability: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Knobs {
    LinearGaussian(LinearGaussianKnobs),
    CrossHospital(HospitalKnobs),
    Perturbation(PerturbationKnobs),
    SelectionBias(SelectionBiasKnobs),
}

impl Knobs {
    pub fn defaults(id: ExperimentId) -> Self {
        match id {
            ExperimentId::LinearGaussian => Knobs::LinearGaussian(Default::default()),
            ExperimentId::CrossHospital => Knobs::CrossHospital(Default::default()),
            ExperimentId::Perturbation => Knobs::Perturbation(Default::default()),
            ExperimentId::SelectionBias => Knobs::SelectionBias(Default::default()),
        }
    }

    pub fn id(&self) -> ExperimentId {
        match self {
            Knobs::LinearGaussian(_) => ExperimentId::LinearGaussian,
            Knobs::CrossHospital(_) => ExperimentId::CrossHospital,
            Knobs::Perturbation(_) => ExperimentId::Perturbation,
            Knobs::SelectionBias(_) => ExperimentId::SelectionBias,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replicates: usize,
    pub out_dir: PathBuf,
    pub knobs: Knobs,
}

impl ExperimentConfig {
    /// Default knobs and replicate count for `id`.
    pub fn new(id: ExperimentId, seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            seed,
            replicates: id.default_replicates(),
            out_dir: out_dir.into(),
            knobs: Knobs::defaults(id),
        }
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_knobs(mut self, knobs: Knobs) -> Self {
        self.knobs = knobs;
        self
    }

    pub fn id(&self) -> ExperimentId {
        self.knobs.id()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.replicates == 0 {
            return bad("replicate count must be at least 1");
        }
        match &self.knobs {
            Knobs::LinearGaussian(k) => {
                if k.grid_points == 0 {
                    return bad("the test-domain grid is empty");
                }
                if k.grid_min.is_nan() || k.grid_max.is_nan() || k.grid_min > k.grid_max {
                    return bad("grid minimum exceeds grid maximum");
                }
                if k.samples < 4 || k.noise_sd.is_nan() || k.noise_sd <= 0.0 {
                    return bad("need at least 4 samples and a positive noise scale");
                }
            }
            Knobs::CrossHospital(h) => check_hospital(h)?,
            Knobs::Perturbation(p) => {
                check_hospital(&p.hospital)?;
                if p.sigma_points == 0 || p.sigma_step.is_nan() || p.sigma_step <= 0.0 {
                    return bad("the perturbation grid is empty");
                }
            }
            Knobs::SelectionBias(s) => {
                if s.population < 30 {
                    return bad("population too small to split");
                }
                let open = |v: f64| v > 0.0 && v < 1.0;
                if !open(s.unbiased_fraction) || !open(s.train_fraction) {
                    return bad("split fractions must lie strictly between 0 and 1");
                }
                if !(0.0..=1.0).contains(&s.rejection_probability) {
                    return bad("rejection probability outside [0, 1]");
                }
            }
        }
        Ok(())
    }

    /// Short hash of everything that determines the output, the directory excluded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{}|{}|{}|{:?}", env!("CARGO_PKG_VERSION"), self.seed, self.replicates, self.knobs));
        hex::encode(&h.finalize()[..8])
    }
}

fn check_hospital(h: &HospitalKnobs) -> Result<()> {
    if h.train_samples < 10 || h.train_samples >= h.source_samples || h.target_samples < 10 {
        return Err(Error::InvalidConfig(
            "need at least 10 training rows, a nonempty source test set and 10 target rows".into(),
        ));
    }
    Ok(())
}
