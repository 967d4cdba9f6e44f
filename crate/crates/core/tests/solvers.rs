use dfrc_core::admm::{admm_run, AdmmConfig};
use dfrc_core::mm4mm::{mm_run, MmConfig};
use dfrc_core::{build_problem, comm_sinrs, Scenario, Start};

#[test]
fn mm4mm_reaches_a_lower_objective_than_admm() {
    let sc = Scenario::reference(2);
    let prob = build_problem(&sc).unwrap();
    let (admm, _) =
        admm_run(&prob, AdmmConfig { seed: 2, start: Start::Feasible, ..Default::default() }).unwrap();
    let (mm, report) = mm_run(&prob, MmConfig { seed: 2, start: Start::Feasible, ..Default::default() }, None).unwrap();
    assert!(prob.objective(mm.w_vec()) <= prob.objective(admm.w_vec()));
    assert!((report.final_objective() - prob.objective(mm.w_vec())).abs() <= 1e-9 * report.final_objective());
    for s in comm_sinrs(&mm, &sc.comm).unwrap() {
        assert!(s >= sc.comm.sinr_thresholds()[0] * (1.0 - 1e-4));
    }
}

#[test]
fn runs_are_reproducible() {
    let sc = Scenario::reference_with(4, 3, 10.0);
    let prob = build_problem(&sc).unwrap();
    let cfg = MmConfig { seed: 4, max_iter: 40, ..Default::default() };
    assert_eq!(mm_run(&prob, cfg.clone(), None).unwrap().0, mm_run(&prob, cfg, None).unwrap().0);
    let cfg = AdmmConfig { seed: 4, max_iter: 200, ..Default::default() };
    assert_eq!(admm_run(&prob, cfg.clone()).unwrap().0, admm_run(&prob, cfg).unwrap().0);
}
