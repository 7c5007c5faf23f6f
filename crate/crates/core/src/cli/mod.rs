//! Batch commands behind the `qyk` binary.
//!
//! Every command returns a process exit code: 0 when the check or synthesis
//! passes, 1 on a domain failure (not realizable, not stabilizable,
//! infeasible start, failed validation, unstable loop) and 2 when the input
//! cannot be read or is inconsistent. Reports go to `out`, diagnostics to
//! `err`. Each command ends with one `KEY overall=... name=value` line.

pub mod emit;
pub mod problem;

use std::io::Write;
use std::path::Path;

use serde_json::json;

use crate::error::Error;
use crate::grid::FrequencyGrid;
use crate::hinf_eval::hinf_cost;
use crate::linalg;
use crate::physreal::{check_physical_realizability, PrVerdict, PR_TOL};
use crate::stabilization::{bezout_residual, close_loop, closed_loop_triple, controller_from_parameter, CoprimeFactorization, ModifiedPlant, BEZOUT_TOL};
use crate::statespace::{is_hurwitz, FreqResponse, StateSpace, HURWITZ_MARGIN, MINIMAL_TOL};
use crate::synthesis::{assemble_problem, descend, validate_result, WeightedTriple};
use crate::youla::{build_constraint_data, membership_qhat, QhatVerdict, YoulaParameter, CONSTRAINT_TOL};
use emit::{csv_bytes, json_abcd, num, toml_abcd, toml_matrix, write_atomic};
use problem::{factorize, parse_problem, parse_result, read_file, InputError, LoadedPlant, PlantSection, ProblemFile};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Flags shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Replaces the point count of the file's `[grid]`.
    pub grid_points: Option<usize>,
    /// Pass/fail tolerance of the command's main check.
    pub tol: Option<f64>,
    /// Accepted for scripting symmetry; no command draws random numbers.
    pub seed: Option<u64>,
    pub json: bool,
}

enum Failure {
    Input(String),
    Domain(String),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e.0)
    }
}

fn domain(e: Error) -> Failure {
    Failure::Domain(e.to_string())
}

/// Errors that come from the file's content rather than from the plant.
fn classify(e: Error) -> Failure {
    match e {
        Error::InvalidConfig(_)
        | Error::InvalidGrid(_)
        | Error::InvalidPartition(_)
        | Error::InvalidSlh(_)
        | Error::DimensionMismatch(_)
        | Error::NonFinite(_)
        | Error::NotStrictlyProper(_) => Failure::Input(e.to_string()),
        e => domain(e),
    }
}

fn write_failed(e: std::io::Error) -> Failure {
    Failure::Input(format!("cannot write output: {e}"))
}

type Outcome = std::result::Result<bool, Failure>;

fn finish(r: Outcome, err: &mut dyn Write) -> i32 {
    match r {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(Failure::Input(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_INPUT
        }
        Err(Failure::Domain(m)) => {
            let _ = writeln!(err, "failure: {m}");
            EXIT_FAIL
        }
    }
}

fn load(path: &Path) -> std::result::Result<ProblemFile, Failure> {
    let text = read_file(path)?;
    parse_problem(&text).map_err(|e| Failure::Input(format!("{}: {}", path.display(), e.0)))
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

fn say(out: &mut dyn Write, text: &str) -> std::result::Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(write_failed)
}

fn pr_json(v: &PrVerdict) -> serde_json::Value {
    json!({
        "overall": v.overall,
        "j_unitary_ok": v.j_unitary_ok,
        "feedthrough_ok": v.feedthrough_ok,
        "spectrally_generic_ok": v.spectrally_generic_ok,
        "minimal_ok": v.minimal_ok,
        "max_junitarity_residual": v.max_junitarity_residual,
        "feedthrough_defect": v.feedthrough_defect,
    })
}

fn qhat_json(v: &QhatVerdict) -> serde_json::Value {
    json!({
        "overall": v.overall,
        "stable": v.stable,
        "feedthrough_ok": v.feedthrough_ok,
        "constraint_residual": v.constraint_residual,
        "constraint_ok": v.constraint_ok,
        "controller_generic": v.controller_generic,
        "controller_feedthrough_defect": v.controller_feedthrough_defect,
        "controller_feedthrough_ok": v.controller_feedthrough_ok,
        "in_q": v.in_q,
    })
}

fn pr_table(v: &PrVerdict) -> String {
    let rows = [
        ("j-unitarity residual", num(v.max_junitarity_residual), v.j_unitary_ok),
        ("feedthrough defect", num(v.feedthrough_defect), v.feedthrough_ok),
        ("spectral genericity", "-".to_string(), v.spectrally_generic_ok),
        ("minimality", "-".to_string(), v.minimal_ok),
    ];
    let mut s = format!("{:<24} {:<26} {}\n", "check", "value", "status");
    for (name, value, ok) in rows {
        s += &format!("{name:<24} {value:<26} {}\n", pass(ok));
    }
    s
}

fn json_line(out: &mut dyn Write, v: &serde_json::Value) -> std::result::Result<(), Failure> {
    say(out, &format!("{v}\n"))
}

pub fn check_pr(path: &Path, opts: &Options, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    finish(check_pr_inner(path, opts, out), err)
}

fn check_pr_inner(path: &Path, opts: &Options, out: &mut dyn Write) -> Outcome {
    let pf = load(path)?;
    let sys = pf.candidate_plant()?;
    let m = PlantSection::n_fields(&sys)?;
    let grid = pf.grid.build(opts.grid_points)?;
    let tol = opts.tol.unwrap_or(PR_TOL);
    let v = check_physical_realizability(&sys, &grid, m, tol).map_err(domain)?;
    if opts.json {
        json_line(out, &json!({ "command": "check-pr", "tol": tol, "verdict": pr_json(&v) }))?;
    } else {
        say(out, &pr_table(&v))?;
        say(
            out,
            &format!(
                "PR overall={} j_unitary={} feedthrough={} generic={} minimal={} max_junitarity_residual={} feedthrough_defect={}\n",
                pass(v.overall),
                pass(v.j_unitary_ok),
                pass(v.feedthrough_ok),
                pass(v.spectrally_generic_ok),
                pass(v.minimal_ok),
                num(v.max_junitarity_residual),
                num(v.feedthrough_defect)
            ),
        )?;
    }
    Ok(v.overall)
}

/// Modified plant and its factorization, with the residual gate applied
/// by the caller.
fn plant_and_factors(pf: &ProblemFile) -> std::result::Result<(LoadedPlant, CoprimeFactorization), Failure> {
    let lp = pf.modified_plant()?;
    let choice = pf.gains.build()?;
    let cf = factorize(&choice, &lp.plant).map_err(|e| match e {
        Error::DimensionMismatch(_) => classify(e),
        e => domain(e),
    })?;
    Ok((lp, cf))
}

fn require_bezout(cf: &CoprimeFactorization) -> std::result::Result<(), Failure> {
    if cf.bezout_residual > BEZOUT_TOL {
        return Err(domain(Error::BezoutResidualTooLarge(cf.bezout_residual)));
    }
    Ok(())
}

const FACTOR_NAMES: [&str; 8] = ["m", "n", "u", "v", "m_hat", "n_hat", "u_hat", "v_hat"];

fn factors(cf: &CoprimeFactorization) -> [&StateSpace; 8] {
    [&cf.m, &cf.n, &cf.u, &cf.v, &cf.m_hat, &cf.n_hat, &cf.u_hat, &cf.v_hat]
}

pub fn factorize_cmd(path: &Path, out_dir: Option<&Path>, opts: &Options, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    finish(factorize_inner(path, out_dir, opts, out), err)
}

fn factorize_inner(path: &Path, out_dir: Option<&Path>, opts: &Options, out: &mut dyn Write) -> Outcome {
    let pf = load(path)?;
    let (_, cf) = plant_and_factors(&pf)?;
    let grid = pf.grid.build(opts.grid_points)?;
    let tol = opts.tol.unwrap_or(BEZOUT_TOL);
    let residual = cf.bezout_residual.max(bezout_residual(&cf, &grid).map_err(domain)?);
    let ok = residual <= tol;
    // minimal realizations, so a trivial factor prints as a static gain
    let minimal: Vec<StateSpace> = factors(&cf).iter().map(|f| f.minimal_realization(MINIMAL_TOL)).collect();

    let mut doc = format!("bezout_residual = {}\n\n[gains]\nf = {}\nl = {}\n", num(residual), toml_matrix(&cf.gains.f), toml_matrix(&cf.gains.l));
    for (name, f) in FACTOR_NAMES.iter().zip(&minimal) {
        doc += "\n";
        doc += &toml_abcd(&format!("factors.{name}"), f);
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(write_failed)?;
        write_atomic(&dir.join("factors.toml"), doc.as_bytes()).map_err(write_failed)?;
    }
    if opts.json {
        let mut fs = serde_json::Map::new();
        for (name, f) in FACTOR_NAMES.iter().zip(&minimal) {
            fs.insert(name.to_string(), json_abcd(f));
        }
        json_line(
            out,
            &json!({
                "command": "factorize",
                "overall": ok,
                "tol": tol,
                "bezout_residual": residual,
                "gains": { "f": emit::json_matrix(&cf.gains.f), "l": emit::json_matrix(&cf.gains.l) },
                "factors": fs,
            }),
        )?;
    } else {
        say(out, &doc)?;
        say(out, &format!("FACTORIZE overall={} bezout_residual={} tol={}\n", pass(ok), num(residual), num(tol)))?;
    }
    Ok(ok)
}

fn q_shape(cf: &CoprimeFactorization) -> (usize, usize) {
    (cf.gains.f.nrows(), cf.loop_width())
}

/// `Q` from `--q-from`, else from the problem file, else zero.
fn parameter_for(pf: &ProblemFile, q_from: Option<&Path>, cf: &CoprimeFactorization) -> std::result::Result<YoulaParameter, Failure> {
    let (rows, cols) = q_shape(cf);
    let init = match q_from {
        Some(p) => {
            let text = read_file(p)?;
            let mut rf = parse_result(&text).map_err(|e| Failure::Input(format!("{}: {}", p.display(), e.0)))?;
            if rf.youla.q_init.is_none() && rf.youla.from_controller.is_none() {
                rf.youla.from_controller = rf.controller.take();
            }
            rf.youla.initial(Some(cf), rows, cols)
        }
        None => pf.youla.initial(Some(cf), rows, cols),
    };
    init.map_err(classify)
}

fn weights(pf: &ProblemFile, mp: &ModifiedPlant) -> std::result::Result<(StateSpace, StateSpace), Failure> {
    let w_in = pf.weights.w_in.build(mp.widths.n_r, "weights.w_in")?;
    let w_out = pf.weights.w_out.build(mp.widths.n_z, "weights.w_out")?;
    Ok((w_in, w_out))
}

fn youla_toml(q: &YoulaParameter) -> String {
    let coeffs: Vec<String> = q.coeffs().iter().map(toml_matrix).collect();
    format!("[youla]\nbeta = {}\norder = {}\nq_init = [{}]\n", num(q.beta()), q.order(), coeffs.join(", "))
}

/// Controller `K(Q)` reduced to a minimal realization, if `V + N Q` is
/// invertible.
fn controller_for(cf: &CoprimeFactorization, q: &YoulaParameter) -> Option<StateSpace> {
    controller_from_parameter(cf, &q.realization()).ok().map(|k| k.minimal_realization(MINIMAL_TOL))
}

fn controller_pr(k: &StateSpace, grid: &FrequencyGrid) -> std::result::Result<Option<PrVerdict>, Failure> {
    if k.n_inputs() != k.n_outputs() || !k.n_inputs().is_multiple_of(2) {
        return Ok(None);
    }
    check_physical_realizability(k, grid, k.n_inputs() / 2, PR_TOL).map(Some).map_err(domain)
}

pub fn synthesize_h2(path: &Path, out_dir: &Path, opts: &Options, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    finish(synthesize_inner(path, out_dir, opts, out), err)
}

fn synthesize_inner(path: &Path, out_dir: &Path, opts: &Options, out: &mut dyn Write) -> Outcome {
    let pf = load(path)?;
    let (lp, cf) = plant_and_factors(&pf)?;
    require_bezout(&cf)?;
    let mp = &lp.plant;
    let cd = build_constraint_data(&cf).map_err(classify)?;
    let (w_in, w_out) = weights(&pf, mp)?;
    let cfg = pf.descent.build()?;
    let grid = pf.grid.build(opts.grid_points)?;
    let tol = opts.tol.unwrap_or(CONSTRAINT_TOL);
    let sp = assemble_problem(mp, &cf, &cd, &w_in, &w_out, None).map_err(classify)?;
    let q0 = parameter_for(&pf, None, &cf)?;
    let (q, trace) = descend(&sp, &q0, &cfg).map_err(domain)?;
    let verdict = validate_result(mp, &cf, &cd, &q, &grid, tol).map_err(domain)?;
    let k = controller_for(&cf, &q);
    let k_pr = match &k {
        Some(k) => controller_pr(k, &grid)?,
        None => None,
    };

    let mut result = youla_toml(&q);
    if let Some(k) = &k {
        result += "\n";
        result += &toml_abcd("controller", k);
    }
    let trace_rows: Vec<Vec<String>> = trace
        .records
        .iter()
        .map(|r| vec![r.iter.to_string(), num(r.cost), num(r.grad_norm), num(r.step_norm), num(r.constraint_residual), num(r.alpha)])
        .collect();
    let closed = sp.weighted.closed_loop(&q.realization()).map_err(domain)?;
    let mut profile_rows = Vec::with_capacity(grid.len());
    for &w in grid.points() {
        let sigma = linalg::sigma_max(&closed.at(w).map_err(domain)?);
        let res = linalg::fro(&cd.residual_matrix(w, &q.at(w).map_err(domain)?).map_err(domain)?);
        profile_rows.push(vec![num(w), num(sigma), num(res)]);
    }
    let initial_cost = trace.records.first().map(|r| r.cost).unwrap_or(f64::NAN);
    let final_cost = trace.final_cost();
    let report = json!({
        "command": "synthesize-h2",
        "overall": verdict.overall,
        "tol": tol,
        "initial_cost": initial_cost,
        "final_cost": final_cost,
        "iterations": trace.records.len() - 1,
        "converged": trace.converged,
        "corrections": trace.corrections,
        "rank_deficient_steps": trace.rank_deficient_steps,
        "qhat": qhat_json(&verdict.qhat),
        "closed_loop_stable": verdict.closed_loop_stable,
        "controller_pr": k_pr.as_ref().map(pr_json),
    });

    std::fs::create_dir_all(out_dir).map_err(write_failed)?;
    write_atomic(&out_dir.join("result.toml"), result.as_bytes()).map_err(write_failed)?;
    write_atomic(&out_dir.join("report.json"), format!("{report:#}\n").as_bytes()).map_err(write_failed)?;
    let trace_csv = csv_bytes(&["iter", "E", "grad_norm", "step_norm", "constraint_residual", "alpha"], &trace_rows).map_err(write_failed)?;
    write_atomic(&out_dir.join("trace.csv"), &trace_csv).map_err(write_failed)?;
    let profile_csv = csv_bytes(&["omega", "sigma_max", "constraint_residual"], &profile_rows).map_err(write_failed)?;
    write_atomic(&out_dir.join("profile.csv"), &profile_csv).map_err(write_failed)?;

    if opts.json {
        json_line(out, &report)?;
    } else {
        say(
            out,
            &format!(
                "SYNTHESIZE overall={} initial_cost={} final_cost={} iterations={} converged={} constraint_residual={} closed_loop_stable={}\n",
                pass(verdict.overall),
                num(initial_cost),
                num(final_cost),
                trace.records.len() - 1,
                trace.converged,
                num(verdict.qhat.constraint_residual),
                verdict.closed_loop_stable
            ),
        )?;
    }
    Ok(verdict.overall)
}

pub fn eval_hinf(path: &Path, q_from: Option<&Path>, out_dir: &Path, opts: &Options, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    finish(eval_hinf_inner(path, q_from, out_dir, opts, out), err)
}

fn eval_hinf_inner(path: &Path, q_from: Option<&Path>, out_dir: &Path, opts: &Options, out: &mut dyn Write) -> Outcome {
    let pf = load(path)?;
    let (lp, cf) = plant_and_factors(&pf)?;
    require_bezout(&cf)?;
    let mp = &lp.plant;
    let (w_in, w_out) = weights(&pf, mp)?;
    let grid = pf.grid.build(opts.grid_points)?;
    let q = parameter_for(&pf, q_from, &cf)?;
    let triple = closed_loop_triple(mp, &cf).map_err(domain)?;
    let weighted = WeightedTriple::new(&triple, &w_in, &w_out).map_err(classify)?;
    let report = hinf_cost(&weighted, &q.realization(), &grid).map_err(domain)?;

    let rows: Vec<Vec<String>> = report.grid_profile.iter().map(|(w, s)| vec![num(*w), num(*s)]).collect();
    let csv = csv_bytes(&["omega", "sigma_max"], &rows).map_err(write_failed)?;
    std::fs::create_dir_all(out_dir).map_err(write_failed)?;
    write_atomic(&out_dir.join("hinf_profile.csv"), &csv).map_err(write_failed)?;
    if opts.json {
        json_line(
            out,
            &json!({
                "command": "eval-hinf",
                "overall": true,
                "norm": report.norm,
                "peak_omega": report.peak_omega,
                "peak_outside_grid": report.peak_outside_grid,
            }),
        )?;
    } else {
        say(
            out,
            &format!(
                "HINF overall=pass norm={} peak_omega={} peak_outside_grid={}\n",
                num(report.norm),
                num(report.peak_omega),
                report.peak_outside_grid
            ),
        )?;
    }
    Ok(true)
}

pub fn closed_loop(path: &Path, q_from: &Path, opts: &Options, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    finish(closed_loop_inner(path, q_from, opts, out), err)
}

fn closed_loop_inner(path: &Path, q_from: &Path, opts: &Options, out: &mut dyn Write) -> Outcome {
    let pf = load(path)?;
    let (lp, cf) = plant_and_factors(&pf)?;
    require_bezout(&cf)?;
    let mp = &lp.plant;
    let grid = pf.grid.build(opts.grid_points)?;
    let tol = opts.tol.unwrap_or(CONSTRAINT_TOL);
    let q = parameter_for(&pf, Some(q_from), &cf)?;
    let cd = build_constraint_data(&cf).map_err(classify)?;
    let qhat = membership_qhat(&cf, &cd, &q.realization(), &grid, tol).map_err(domain)?;
    let k = controller_from_parameter(&cf, &q.realization()).map_err(domain)?.minimal_realization(MINIMAL_TOL);
    let cl = close_loop(mp, &k).map_err(domain)?;
    let abscissa = if cl.is_static() { f64::NEG_INFINITY } else { linalg::spectral_abscissa(cl.a()).map_err(domain)? };
    let stable = cl.is_static() || is_hurwitz(cl.a(), HURWITZ_MARGIN);
    let k_pr = controller_pr(&k, &grid)?;
    if opts.json {
        json_line(
            out,
            &json!({
                "command": "closed-loop",
                "overall": stable,
                "stable": stable,
                "spectral_abscissa": if abscissa.is_finite() { json!(abscissa) } else { json!(null) },
                "closed_loop_states": cl.n_states(),
                "qhat": qhat_json(&qhat),
                "controller_pr": k_pr.as_ref().map(pr_json),
                "controller": json_abcd(&k),
            }),
        )?;
    } else {
        say(out, &toml_abcd("controller", &k))?;
        say(
            out,
            &format!(
                "CLOSED_LOOP overall={} states={} spectral_abscissa={} in_qhat={} controller_pr={}\n",
                pass(stable),
                cl.n_states(),
                num(abscissa),
                qhat.overall,
                k_pr.map(|v| pass(v.overall)).unwrap_or("n/a")
            ),
        )?;
    }
    Ok(stable)
}
