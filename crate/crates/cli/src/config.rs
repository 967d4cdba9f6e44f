//! Experiment configuration: TOML in, validated core types out.
//!
//! Every power and threshold is given in dB and converted exactly once, in
//! [`ExperimentConfig::scenario`].

use clap::ValueEnum;
use dfrc_core::admm::AdmmConfig;
use dfrc_core::kernels::AscentOptions;
use dfrc_core::linalg::{db_to_linear, CMat, C64};
use dfrc_core::mm4mm::MmConfig;
use dfrc_core::sim::MleGrid;
use dfrc_core::{ArrayGeometry, CommScenario, Scenario, Start, Target, TargetScene};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Drives the channel draw (unless pinned), solver starts and Monte Carlo.
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub solver: SolverConfig,
    pub evaluation: EvaluationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub energy_db: f64,
    pub code_length: usize,
    pub radar_noise_db: f64,
    pub comm_noise_db: f64,
    pub targets: Vec<TargetConfig>,
    pub users: usize,
    /// One value for every user, or one per user.
    pub sinr_db: Vec<f64>,
    /// Seed of the Rayleigh channel draw; falls back to the run seed.
    pub channel_seed: Option<u64>,
    /// Explicit `N_T x K` channel, rows indexed by antenna.
    pub channel: Option<ChannelConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub theta_deg: f64,
    #[serde(default)]
    pub power_db: f64,
    #[serde(default)]
    pub phase_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Admm,
    Mm4mm,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Admm => "admm",
            SolverKind::Mm4mm => "mm4mm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub start: Start,
    pub constant_modulus: bool,
    /// Run both solvers and add a side-by-side SINR table.
    pub compare: bool,
    /// Relative objective change that stops either solver.
    pub tol: f64,
    pub admm: AdmmSettings,
    pub mm4mm: MmSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmSettings {
    pub mu: f64,
    pub max_iter: usize,
    pub cm_inner_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmSettings {
    pub max_iter: usize,
    pub inner: AscentOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub theta_step_deg: f64,
    /// Radar noise powers swept by `rmse`.
    pub sigma_r_db: Vec<f64>,
    pub rmse_trials: usize,
    pub grid_points: usize,
    pub refine_rounds: usize,
    pub snr_db: Vec<f64>,
    pub ser_trials: usize,
    pub tradeoff_sinr_db: Vec<f64>,
    pub tradeoff_users: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scenario: ScenarioConfig::default(),
            solver: SolverConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_tx: 16,
            n_rx: 20,
            energy_db: 0.0,
            code_length: 30,
            radar_noise_db: -30.0,
            comm_noise_db: -30.0,
            targets: vec![
                TargetConfig { theta_deg: -5.0, power_db: 0.0, phase_deg: 0.0 },
                TargetConfig { theta_deg: 15.0, power_db: 0.0, phase_deg: 0.0 },
            ],
            users: 6,
            sinr_db: vec![15.0],
            channel_seed: None,
            channel: None,
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Mm4mm,
            start: Start::Feasible,
            constant_modulus: false,
            compare: false,
            tol: 1e-3,
            admm: AdmmSettings::default(),
            mm4mm: MmSettings::default(),
        }
    }
}

impl Default for AdmmSettings {
    fn default() -> Self {
        let d = AdmmConfig::default();
        Self { mu: d.mu, max_iter: d.max_iter, cm_inner_iter: d.cm_inner_iter }
    }
}

impl Default for MmSettings {
    fn default() -> Self {
        let d = MmConfig::default();
        Self { max_iter: d.max_iter, inner: d.inner }
    }
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            theta_step_deg: 0.25,
            sigma_r_db: vec![-10.0, -5.0, 0.0],
            rmse_trials: 500,
            grid_points: 256,
            refine_rounds: 3,
            snr_db: vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0],
            ser_trials: 5000,
            tradeoff_sinr_db: vec![5.0, 10.0, 15.0, 20.0],
            tradeoff_users: vec![2, 4, 6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Reference scenario, both solvers, SINR table.
    Table1,
    /// Targets at 3 dB and -3 dB.
    Unequal,
    /// Targets at -4 and 4 degrees.
    CloselySpaced,
    SingleUser,
    /// Constant-modulus designs at a 10 dB SINR floor.
    Cm,
}

impl Preset {
    pub fn config(self) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        match self {
            Preset::Table1 => c.solver.compare = true,
            Preset::Unequal => {
                c.scenario.targets[0].power_db = 3.0;
                c.scenario.targets[1].power_db = -3.0;
            }
            Preset::CloselySpaced => {
                c.scenario.targets[0].theta_deg = -4.0;
                c.scenario.targets[1].theta_deg = 4.0;
            }
            Preset::SingleUser => c.scenario.users = 1,
            Preset::Cm => {
                c.scenario.sinr_db = vec![10.0];
                c.solver.constant_modulus = true;
                // the projected ADMM tail is long; coarser thresholds stop it short of the floors
                c.solver.tol = 1e-6;
                c.solver.admm.max_iter = 100_000;
                c.solver.mm4mm.max_iter = 20_000;
            }
        }
        c
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical TOML rendering, after all overrides.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks everything that can be checked before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario()?;
        self.admm().validate().map_err(config_error)?;
        self.mm4mm().validate().map_err(config_error)?;
        let e = &self.evaluation;
        if !(e.theta_step_deg > 0.0 && e.theta_step_deg <= 180.0) {
            return Err(CliError::Config("evaluation.theta_step_deg must lie in (0, 180]".into()));
        }
        if e.rmse_trials == 0 || e.ser_trials == 0 {
            return Err(CliError::Config("trial counts must be positive".into()));
        }
        if e.grid_points < 8 || e.refine_rounds == 0 {
            return Err(CliError::Config("evaluation needs grid_points >= 8 and refine_rounds >= 1".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&e.sigma_r_db) || !finite(&e.snr_db) || !finite(&e.tradeoff_sinr_db) {
            return Err(CliError::Config("sweep points must be finite".into()));
        }
        Ok(())
    }

    /// Every point of the trade-off sweep must form a valid scenario.
    pub fn validate_tradeoff(&self) -> Result<(), CliError> {
        let e = &self.evaluation;
        if e.tradeoff_users.is_empty() || e.tradeoff_sinr_db.is_empty() {
            return Err(CliError::Config("trade-off sweep needs user counts and SINR floors".into()));
        }
        for &k in &e.tradeoff_users {
            for &g in &e.tradeoff_sinr_db {
                self.with_users(k, g)?.scenario()?;
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let s = &self.scenario;
        let geometry = ArrayGeometry::new(s.n_tx, s.n_rx).map_err(config_error)?;
        let targets = s
            .targets
            .iter()
            .map(|t| {
                let amplitude = db_to_linear(t.power_db).sqrt();
                Target::new(t.theta_deg, C64::from_polar(amplitude, t.phase_deg.to_radians()))
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(config_error)?;
        let scene = TargetScene::new(targets, db_to_linear(s.radar_noise_db)).map_err(config_error)?;
        let thresholds = match s.sinr_db.len() {
            1 => vec![db_to_linear(s.sinr_db[0]); s.users],
            n if n == s.users => s.sinr_db.iter().map(|&g| db_to_linear(g)).collect(),
            n => return Err(CliError::Config(format!("scenario.sinr_db has {n} entries for {} users", s.users))),
        };
        let noise = db_to_linear(s.comm_noise_db);
        let comm = match &s.channel {
            Some(ch) => CommScenario::new(explicit_channel(ch, s.n_tx, s.users)?, noise, thresholds),
            None => CommScenario::rayleigh(s.n_tx, s.users, s.channel_seed.unwrap_or(self.seed), noise, thresholds),
        }
        .map_err(config_error)?;
        Scenario::new(geometry, scene, comm, db_to_linear(s.energy_db), s.code_length).map_err(config_error)
    }

    /// Same configuration with `users` users at a common floor of `sinr_db`.
    pub fn with_users(&self, users: usize, sinr_db: f64) -> Result<Self, CliError> {
        let mut c = self.clone();
        if let Some(ch) = &mut c.scenario.channel {
            if ch.re.iter().chain(&ch.im).any(|row| row.len() < users) {
                return Err(CliError::Config(format!("explicit channel has fewer than {users} user columns")));
            }
            for row in ch.re.iter_mut().chain(ch.im.iter_mut()) {
                row.truncate(users);
            }
        }
        c.scenario.users = users;
        c.scenario.sinr_db = vec![sinr_db];
        Ok(c)
    }

    pub fn admm(&self) -> AdmmConfig {
        let s = &self.solver;
        AdmmConfig {
            mu: s.admm.mu,
            tol: s.tol,
            max_iter: s.admm.max_iter,
            seed: self.seed,
            constant_modulus: s.constant_modulus,
            cm_inner_iter: s.admm.cm_inner_iter,
            start: s.start,
        }
    }

    pub fn mm4mm(&self) -> MmConfig {
        let s = &self.solver;
        MmConfig {
            tol: s.tol,
            max_iter: s.mm4mm.max_iter,
            seed: self.seed,
            constant_modulus: s.constant_modulus,
            inner: s.mm4mm.inner,
            start: s.start,
        }
    }

    pub fn mle_grid(&self) -> MleGrid {
        MleGrid { points: self.evaluation.grid_points, rounds: self.evaluation.refine_rounds }
    }

    /// Solvers the design commands run, in output order.
    pub fn solvers(&self) -> Vec<SolverKind> {
        if self.solver.compare {
            vec![SolverKind::Admm, SolverKind::Mm4mm]
        } else {
            vec![self.solver.kind]
        }
    }
}

fn explicit_channel(ch: &ChannelConfig, n_tx: usize, users: usize) -> Result<CMat, CliError> {
    let shape_ok = |m: &Vec<Vec<f64>>| m.len() == n_tx && m.iter().all(|r| r.len() == users);
    if !shape_ok(&ch.re) || !shape_ok(&ch.im) {
        return Err(CliError::Config(format!("explicit channel must be {n_tx} rows of {users} entries (re and im)")));
    }
    Ok(CMat::from_fn(n_tx, users, |i, j| C64::new(ch.re[i][j], ch.im[i][j])))
}

fn config_error(e: dfrc_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_reference_scenario() {
        let c = ExperimentConfig { seed: 3, ..Default::default() };
        assert_eq!(c.scenario().unwrap(), Scenario::reference(3));
    }

    #[test]
    fn presets_validate() {
        for p in Preset::value_variants() {
            p.config().validate().unwrap();
            p.config().validate_tradeoff().unwrap();
        }
    }

    #[test]
    fn toml_round_trip_keeps_hash() {
        let c = Preset::Unequal.config();
        let back = ExperimentConfig::from_toml(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(c.hash(), Preset::Table1.config().hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml("[scenario]\nn_tx = 4\nfoo = 1\n").is_err());
        assert!(ExperimentConfig::from_toml("sead = 4\n").is_err());
    }

    #[test]
    fn explicit_channel_shape_checked() {
        let mut c = ExperimentConfig::default();
        c.scenario.n_tx = 2;
        c.scenario.users = 1;
        c.scenario.channel = Some(ChannelConfig { re: vec![vec![1.0], vec![0.0]], im: vec![vec![0.0], vec![1.0]] });
        let sc = c.scenario().unwrap();
        assert_eq!(sc.comm.h(0)[1], C64::new(0.0, 1.0));
        c.scenario.channel = Some(ChannelConfig { re: vec![vec![1.0]], im: vec![vec![0.0]] });
        assert!(matches!(c.scenario(), Err(CliError::Config(_))));
    }

    #[test]
    fn per_user_thresholds_length_checked() {
        let mut c = ExperimentConfig::default();
        c.scenario.sinr_db = vec![10.0, 12.0];
        assert!(matches!(c.validate(), Err(CliError::Config(m)) if m.contains("sinr_db")));
    }
}
