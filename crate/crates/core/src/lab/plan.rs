//! Experiment plans: the JSON-configurable description of one run.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::nonlinear::{MildSolverConfig, Scheme, SnapshotSchedule};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    KernelTable,
    StabilityScan,
    DecayStudy,
    LemmaVerify,
    NonlinearRun,
    LifespanSweep,
    FunctionalCheck,
}

/// Torus discretization.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_modes: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_modes: 1024, length: 200.0 }
    }
}

/// Initial data description for torus runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DataConfig {
    /// Gaussian of the given width/mass in the u2 slot, zero elsewhere
    /// (mean-positive, the canonical blow-up datum).
    GaussianV2 { width: f64, mass: f64 },
    /// The same Gaussian in all three slots.
    GaussianAll { width: f64, mass: f64 },
    /// Mean-zero second-derivative bump in u2.
    MeanZeroV2 { width: f64, scale: f64 },
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::GaussianV2 { width: 1.0, mass: 1.0 }
    }
}

/// Geometric epsilon grid for sweeps: `start * ratio^k`, k = 0..count.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpsilonGrid {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for EpsilonGrid {
    fn default() -> Self {
        EpsilonGrid { start: 0.1, ratio: std::f64::consts::FRAC_1_SQRT_2, count: 8 }
    }
}

impl EpsilonGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Config(format!(
                "epsilon grid ratio must be in (0, 1), got {}",
                self.ratio
            )));
        }
        if self.count < 5 {
            return Err(Error::Config(format!(
                "epsilon grid needs >= 5 points for a stable fit, got {}",
                self.count
            )));
        }
        if !(self.start > 0.0) {
            return Err(Error::Config("epsilon grid start must be > 0".into()));
        }
        Ok((0..self.count).map(|k| self.start * self.ratio.powi(k as i32)).collect())
    }
}

/// Sampling times for decay studies.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimeWindow {
    pub t_min: f64,
    pub t_max: f64,
    pub per_decade: usize,
}

impl Default for TimeWindow {
    fn default() -> Self {
        TimeWindow { t_min: 1e2, t_max: 1e4, per_decade: 8 }
    }
}

fn default_eta_list() -> Vec<f64> {
    vec![0.5, 0.9, 1.0, 1.5, 3.0, 5.0]
}

fn default_seed() -> u64 {
    7
}

fn default_true() -> bool {
    true
}

/// One experiment (diffable, hashable JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    pub params: PlanParams,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub epsilon_grid: EpsilonGrid,
    #[serde(default)]
    pub times: TimeWindow,
    #[serde(default = "default_eta_list")]
    pub eta_list: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Repeat sweeps with a doubled box to quantify the finite-size shift.
    #[serde(default = "default_true")]
    pub check_finite_size: bool,
}

/// The physical parameter block (epsilon lives in sweeps or params).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlanParams {
    pub n: f64,
    pub sigma: f64,
    pub eta: f64,
    pub p: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    0.1
}

impl PlanParams {
    pub fn model(&self) -> Result<ModelParams> {
        ModelParams::new(self.n, self.sigma, self.eta, self.p, self.epsilon)
    }
}

/// Serializable mirror of the solver knobs (subset with sensible defaults).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_max_time")]
    pub max_time: f64,
    #[serde(default)]
    pub euler: bool,
    #[serde(default = "default_threshold")]
    pub blowup_threshold: f64,
    #[serde(default = "default_true")]
    pub dealias: bool,
    #[serde(default = "default_true")]
    pub check_resolution: bool,
}

fn default_dt() -> f64 {
    0.01
}

fn default_max_time() -> f64 {
    100.0
}

fn default_threshold() -> f64 {
    1e6
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: default_dt(),
            max_time: default_max_time(),
            euler: false,
            blowup_threshold: default_threshold(),
            dealias: true,
            check_resolution: true,
        }
    }
}

impl SolverConfig {
    pub fn to_mild(&self) -> MildSolverConfig {
        MildSolverConfig {
            dt: self.dt,
            scheme: if self.euler { Scheme::DuhamelEuler } else { Scheme::DuhamelMidpoint },
            blowup_threshold: self.blowup_threshold,
            dealias: self.dealias,
            max_time: self.max_time,
            check_resolution: self.check_resolution,
            snapshots: SnapshotSchedule::Geometric { ratio: 1.1 },
            ..MildSolverConfig::default()
        }
    }
}

impl ExperimentPlan {
    pub fn new(kind: ExperimentKind, params: PlanParams) -> Self {
        ExperimentPlan {
            kind,
            params,
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            data: DataConfig::default(),
            epsilon_grid: EpsilonGrid::default(),
            times: TimeWindow::default(),
            eta_list: default_eta_list(),
            seed: default_seed(),
            check_finite_size: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("plan parse error: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    /// Deterministic fingerprint of the canonical plan JSON.
    pub fn hash(&self) -> u64 {
        crate::util::fnv1a64(self.to_json().as_bytes())
    }
}
