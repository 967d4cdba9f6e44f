// Build: wasm-pack build crates/web --target web --out-dir www/pkg
use dfrc_core::admm::{admm_run, AdmmConfig};
use dfrc_core::fisher::{covariance_from_beamformer, crb_report, CrbReport};
use dfrc_core::linalg::{db_to_linear, linear_to_db, C64};
use dfrc_core::mm4mm::{mm_run, MmConfig};
use dfrc_core::model::REFERENCE_NOISE_POWER;
use dfrc_core::{
    beampattern, build_problem, comm_sinrs, ArrayGeometry, BeamformerDesign, CommScenario, Scenario, Start, Target,
    TargetScene,
};
use wasm_bindgen::prelude::*;

/// Angular resolution of the plotted beampattern, degrees.
const THETA_STEP: f64 = 0.5;

/// Two targets and a Rayleigh channel on the 16 x 20 reference arrays.
#[wasm_bindgen]
#[derive(Debug, Clone, Copy)]
pub struct Setup {
    pub theta1: f64,
    pub theta2: f64,
    pub power1_db: f64,
    pub power2_db: f64,
    pub users: usize,
    pub sinr_db: f64,
    pub seed: u32,
    pub constant_modulus: bool,
}

#[wasm_bindgen]
impl Setup {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Setup {
        Setup {
            theta1: -5.0,
            theta2: 15.0,
            power1_db: 0.0,
            power2_db: 0.0,
            users: 6,
            sinr_db: 15.0,
            seed: 1,
            constant_modulus: false,
        }
    }
}

impl Default for Setup {
    fn default() -> Self {
        Self::new()
    }
}

impl Setup {
    fn scenario(&self, sinr_db: f64) -> Result<Scenario, String> {
        let geom = ArrayGeometry::new(16, 20).map_err(err)?;
        let target = |theta, p: f64| Target::new(theta, C64::from(db_to_linear(p).sqrt()));
        let scene = TargetScene::new(
            vec![target(self.theta1, self.power1_db).map_err(err)?, target(self.theta2, self.power2_db).map_err(err)?],
            REFERENCE_NOISE_POWER,
        )
        .map_err(err)?;
        let comm = CommScenario::rayleigh(
            16,
            self.users,
            u64::from(self.seed),
            REFERENCE_NOISE_POWER,
            vec![db_to_linear(sinr_db); self.users],
        )
        .map_err(err)?;
        Scenario::new(geom, scene, comm, 1.0, 30).map_err(err)
    }

    fn solve(&self, sc: &Scenario, solver: &str) -> Result<BeamformerDesign, String> {
        let problem = build_problem(sc).map_err(err)?;
        let seed = u64::from(self.seed);
        let cm = self.constant_modulus;
        // constant-modulus runs need a tight threshold to settle on the floors
        let tol = if cm { 1e-6 } else { 1e-3 };
        let design = match solver {
            "admm" => {
                let cfg = AdmmConfig { tol, seed, constant_modulus: cm, start: Start::Feasible, ..Default::default() };
                admm_run(&problem, cfg).map_err(err)?.0
            }
            "mm4mm" => {
                let max_iter = if cm { 20_000 } else { 500 };
                let cfg = MmConfig { tol, max_iter, seed, constant_modulus: cm, start: Start::Feasible, ..Default::default() };
                mm_run(&problem, cfg, None).map_err(err)?.0
            }
            other => return Err(format!("unknown solver {other:?}")),
        };
        Ok(design)
    }
}

fn err(e: dfrc_core::Error) -> String {
    e.to_string()
}

fn root_crb(sc: &Scenario, d: &BeamformerDesign) -> Result<f64, String> {
    let r_x = covariance_from_beamformer(d, sc.code_length).map_err(err)?;
    Ok(CrbReport::root_sum(&crb_report(&sc.scene, &sc.geometry, &r_x).map_err(err)?.exact_diag))
}

/// A finished design as the page plots it.
#[wasm_bindgen]
#[derive(Debug)]
pub struct DesignView {
    thetas: Vec<f64>,
    response_db: Vec<f64>,
    sinr_db: Vec<f64>,
    objective: f64,
    root_crb: f64,
}

#[wasm_bindgen]
impl DesignView {
    pub fn thetas(&self) -> Vec<f64> {
        self.thetas.clone()
    }

    pub fn response_db(&self) -> Vec<f64> {
        self.response_db.clone()
    }

    pub fn sinr_db(&self) -> Vec<f64> {
        self.sinr_db.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn objective(&self) -> f64 {
        self.objective
    }

    #[wasm_bindgen(getter)]
    pub fn root_crb(&self) -> f64 {
        self.root_crb
    }
}

pub fn design_view(setup: &Setup, solver: &str) -> Result<DesignView, String> {
    let sc = setup.scenario(setup.sinr_db)?;
    let d = setup.solve(&sc, solver)?;
    let n = (180.0 / THETA_STEP) as usize;
    let thetas: Vec<f64> = (0..=n).map(|i| -90.0 + i as f64 * THETA_STEP).collect();
    let response_db = beampattern(&d, &sc.geometry, &thetas).map_err(err)?.into_iter().map(linear_to_db).collect();
    let sinr_db = comm_sinrs(&d, &sc.comm).map_err(err)?.into_iter().map(linear_to_db).collect();
    let problem = build_problem(&sc).map_err(err)?;
    Ok(DesignView { thetas, response_db, sinr_db, objective: problem.objective(d.w_vec()), root_crb: root_crb(&sc, &d)? })
}

/// Root exact CRB of the MM4MM design at each SINR floor.
pub fn tradeoff_curve(setup: &Setup, floors_db: &[f64]) -> Result<Vec<f64>, String> {
    floors_db
        .iter()
        .map(|&g| {
            let sc = setup.scenario(g)?;
            root_crb(&sc, &setup.solve(&sc, "mm4mm")?)
        })
        .collect()
}

/// Beampattern, per-user SINR and root-CRB of one solver's design.
#[wasm_bindgen]
pub fn design(setup: &Setup, solver: &str) -> Result<DesignView, JsError> {
    design_view(setup, solver).map_err(|e| JsError::new(&e))
}

/// Sensing cost of tightening the communication floor.
#[wasm_bindgen]
pub fn tradeoff(setup: &Setup, floors_db: Vec<f64>) -> Result<Vec<f64>, JsError> {
    tradeoff_curve(setup, &floors_db).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_setup_designs_meet_floors() {
        let setup = Setup::new();
        for solver in ["admm", "mm4mm"] {
            let v = design_view(&setup, solver).unwrap();
            assert_eq!(v.thetas.len(), v.response_db.len());
            assert_eq!(v.sinr_db.len(), 6);
            assert!(v.sinr_db.iter().all(|&s| s >= 15.0 - 0.01), "{solver}: {:?}", v.sinr_db);
            assert!(v.root_crb > 0.0 && v.objective > 0.0);
        }
    }

    #[test]
    fn tradeoff_rises_with_floor() {
        let setup = Setup { users: 3, ..Setup::new() };
        let c = tradeoff_curve(&setup, &[5.0, 15.0]).unwrap();
        assert!(c[0] <= c[1], "{c:?}");
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(design_view(&Setup { users: 20, ..Setup::new() }, "mm4mm").unwrap_err().contains("exceeds"));
        assert!(design_view(&Setup::new(), "sdr").unwrap_err().contains("unknown solver"));
        assert!(design_view(&Setup { theta2: 95.0, ..Setup::new() }, "mm4mm").is_err());
    }
}
