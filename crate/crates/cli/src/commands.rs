use dfrc_core::admm::admm_run;
use dfrc_core::fisher::{covariance_from_beamformer, crb_report, CrbReport};
use dfrc_core::linalg::linear_to_db;
use dfrc_core::mm4mm::{feasible_constant_modulus_point, feasible_point, mm_run};
use dfrc_core::sim::{rmse_curve, ser_curve};
use dfrc_core::{beampattern, build_problem, comm_sinrs, BeamformerDesign, Scenario, SolverReport, Termination};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, SolverKind};
use crate::output::{cell, num, OutputDir, Table};
use crate::CliError;

struct Run {
    kind: SolverKind,
    design: BeamformerDesign,
    report: SolverReport,
}

fn solve(config: &ExperimentConfig, sc: &Scenario, kind: SolverKind) -> Result<Run, CliError> {
    let problem = build_problem(sc)?;
    let (design, report) = match kind {
        SolverKind::Admm => admm_run(&problem, config.admm())?,
        SolverKind::Mm4mm => mm_run(&problem, config.mm4mm(), None)?,
    };
    Ok(Run { kind, design, report })
}

fn termination(t: Termination) -> &'static str {
    match t {
        Termination::Tolerance => "tolerance",
        Termination::MaxIter => "max-iter",
    }
}

fn sinr_db(run: &Run, sc: &Scenario) -> Result<Vec<f64>, CliError> {
    Ok(comm_sinrs(&run.design, &sc.comm)?.into_iter().map(linear_to_db).collect())
}

fn summarize(run: &Run, sc: &Scenario) -> Result<(), CliError> {
    let sinr = sinr_db(run, sc)?;
    let worst = sinr.iter().copied().fold(f64::INFINITY, f64::min);
    println!(
        "{}: {} iterations ({}), objective {:.6}, min SINR {:.3} dB, {:.2?}",
        run.kind.name(),
        run.report.iterations,
        termination(run.report.termination),
        run.report.final_objective(),
        worst,
        run.report.wall_time
    );
    if !run.report.feasible(1e-9 * sc.comm.sinr_thresholds().iter().copied().fold(1.0, f64::max)) {
        log::warn!("{} design violates an SINR floor", run.kind.name());
    }
    Ok(())
}

fn designed(config: &ExperimentConfig, sc: &Scenario) -> Result<Run, CliError> {
    let run = solve(config, sc, config.solver.kind)?;
    summarize(&run, sc)?;
    Ok(run)
}

pub fn design(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let sc = config.scenario()?;
    let runs = config.solvers().into_iter().map(|k| solve(config, &sc, k)).collect::<Result<Vec<_>, _>>()?;

    let mut w = Table::new(&["solver", "user", "antenna", "re", "im"]);
    let mut report = Table::new(&["solver", "iterations", "termination", "objective", "energy"]);
    let mut sinr = Table::new(&["solver", "user", "sinr_db", "threshold_db"]);
    let mut trace = Table::new(&["solver", "iteration", "objective", "primal_residual"]);
    for run in &runs {
        summarize(run, &sc)?;
        let name = run.kind.name();
        for (k, col) in run.design.w_matrix().column_iter().enumerate() {
            for (n, z) in col.iter().enumerate() {
                w.row(vec![name.into(), cell(k + 1), cell(n + 1), num(z.re), num(z.im)]);
            }
        }
        report.row(vec![
            name.into(),
            cell(run.report.iterations),
            termination(run.report.termination).into(),
            num(run.report.final_objective()),
            num(run.design.energy()),
        ]);
        for (k, (s, g)) in sinr_db(run, &sc)?.iter().zip(sc.comm.sinr_thresholds()).enumerate() {
            sinr.row(vec![name.into(), cell(k + 1), num(*s), num(linear_to_db(*g))]);
        }
        for (i, h) in run.report.objective_trace.iter().enumerate() {
            let r = run.report.primal_residuals.get(i).copied().unwrap_or(0.0);
            trace.row(vec![name.into(), cell(i + 1), num(*h), num(r)]);
        }
    }
    out.write("design.csv", &w)?;
    out.write("report.csv", &report)?;
    out.write("sinr.csv", &sinr)?;
    out.write("trace.csv", &trace)?;

    if runs.len() > 1 {
        let users = sc.comm.users();
        let mut header = vec!["solver".to_string()];
        header.extend((1..=users).map(|k| format!("user_{k}")));
        let mut table = Table::with_header(header);
        println!("\nSINR (dB) per user");
        for run in &runs {
            let s = sinr_db(run, &sc)?;
            println!("{:>6} {}", run.kind.name(), s.iter().map(|v| format!("{v:8.3}")).collect::<String>());
            let mut row = vec![run.kind.name().to_string()];
            row.extend(s.into_iter().map(num));
            table.row(row);
        }
        out.write("sinr_table.csv", &table)?;
    }
    Ok(())
}

pub fn beampattern_cmd(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let sc = config.scenario()?;
    let run = designed(config, &sc)?;
    let step = config.evaluation.theta_step_deg;
    let n = (180.0 / step).round() as usize;
    let thetas: Vec<f64> = (0..=n).map(|i| (-90.0 + i as f64 * step).min(90.0)).collect();
    let response = beampattern(&run.design, &sc.geometry, &thetas)?;
    let mut t = Table::new(&["theta_deg", "response_db"]);
    for (theta, r) in thetas.iter().zip(response) {
        t.row(vec![num(*theta), num(linear_to_db(r))]);
    }
    out.write("beampattern.csv", &t)?;
    Ok(())
}

pub fn crb(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let sc = config.scenario()?;
    let run = designed(config, &sc)?;
    let r_x = covariance_from_beamformer(&run.design, sc.code_length)?;
    let rep = crb_report(&sc.scene, &sc.geometry, &r_x)?;
    let mut t = Table::new(&["target", "theta_deg", "exact", "asymptotic", "bound", "b", "b_dot_abs", "b_ddot"]);
    for (p, target) in sc.scene.targets().iter().enumerate() {
        let s = &rep.scalars[p];
        t.row(vec![
            cell(p + 1),
            num(target.theta()),
            num(rep.exact_diag[p]),
            num(rep.asymptotic[p]),
            num(rep.upper_bound[p]),
            num(s.b),
            num(s.b_dot.norm()),
            num(s.b_ddot),
        ]);
    }
    println!(
        "root-CRB: exact {:.6e}, asymptotic {:.6e}, bound {:.6e}",
        CrbReport::root_sum(&rep.exact_diag),
        CrbReport::root_sum(&rep.asymptotic),
        CrbReport::root_sum(&rep.upper_bound)
    );
    out.write("crb.csv", &t)?;
    Ok(())
}

pub fn rmse(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let sc = config.scenario()?;
    let run = designed(config, &sc)?;
    let e = &config.evaluation;
    let points = rmse_curve(
        &sc.scene,
        &sc.geometry,
        &run.design,
        sc.code_length,
        &e.sigma_r_db,
        e.rmse_trials,
        &config.mle_grid(),
        config.seed,
    )?;
    let mut t = Table::new(&["sigma_r_db", "rmse", "root_crb_exact", "root_crb_asymptotic"]);
    for p in points {
        t.row(vec![num(p.sigma_r_db), num(p.rmse), num(p.root_crb_exact), num(p.root_crb_asymptotic)]);
    }
    out.write("rmse_curve.csv", &t)?;
    Ok(())
}

pub fn ser(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let sc = config.scenario()?;
    let run = designed(config, &sc)?;
    let e = &config.evaluation;
    let points = ser_curve(&run.design, &sc.comm, &e.snr_db, e.ser_trials, config.seed)?;
    let mut t = Table::new(&["snr_db", "user", "ser", "ser_mui_free"]);
    for p in points {
        for (k, (s, f)) in p.ser.iter().zip(&p.ser_mui_free).enumerate() {
            t.row(vec![num(p.snr_db), cell(k + 1), num(*s), num(*f)]);
        }
    }
    out.write("ser_curve.csv", &t)?;
    Ok(())
}

pub fn tradeoff(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let e = &config.evaluation;
    let points: Vec<(usize, f64)> =
        e.tradeoff_users.iter().flat_map(|&k| e.tradeoff_sinr_db.iter().map(move |&g| (k, g))).collect();
    let kind = config.solver.kind;
    let crbs = points
        .par_iter()
        .map(|&(k, g)| -> Result<f64, CliError> {
            let sc = config.with_users(k, g)?.scenario()?;
            let run = solve(config, &sc, kind)?;
            let r_x = covariance_from_beamformer(&run.design, sc.code_length)?;
            Ok(CrbReport::root_sum(&crb_report(&sc.scene, &sc.geometry, &r_x)?.exact_diag))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&["gamma_db", "K", "root_crb"]);
    for (&(k, g), c) in points.iter().zip(crbs) {
        println!("K = {k}, SINR floor {g} dB: root-CRB {c:.6e}");
        t.row(vec![num(g), cell(k), num(c)]);
    }
    out.write("tradeoff.csv", &t)?;
    Ok(())
}

pub fn feasibility(config: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let sc = config.scenario()?;
    let problem = build_problem(&sc)?;
    let (w, trace) = if config.solver.constant_modulus {
        (feasible_constant_modulus_point(&problem, config.seed)?, Vec::new())
    } else {
        let f = feasible_point(&problem, config.seed)?;
        (f.w, f.norm_trace)
    };
    let design = BeamformerDesign::from_vec(w, sc.geometry.n_tx)?;
    let mut t = Table::new(&["user", "sinr_db", "threshold_db"]);
    let sinr = comm_sinrs(&design, &sc.comm)?;
    for (k, (s, g)) in sinr.iter().zip(sc.comm.sinr_thresholds()).enumerate() {
        t.row(vec![cell(k + 1), num(linear_to_db(*s)), num(linear_to_db(*g))]);
    }
    let worst = sinr.iter().zip(sc.comm.sinr_thresholds()).map(|(s, g)| linear_to_db(s / g)).fold(f64::INFINITY, f64::min);
    if trace.is_empty() {
        println!("constant-modulus feasible point, worst SINR margin {worst:.3} dB");
    } else {
        println!("feasible point after {} iterations, worst SINR margin {worst:.3} dB", trace.len() - 1);
    }
    out.write("feasibility.csv", &t)?;
    let mut n = Table::new(&["iteration", "norm_sq"]);
    for (i, v) in trace.iter().enumerate() {
        n.row(vec![cell(i), num(*v)]);
    }
    if n.len() > 0 {
        out.write("feasibility_trace.csv", &n)?;
    }
    Ok(())
}
