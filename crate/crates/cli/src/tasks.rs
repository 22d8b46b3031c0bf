//! Task execution. Each task yields a JSON object and flat CSV rows; numeric
//! outputs are paired with the tolerance they were judged against.

use std::time::Instant;

use serde_json::{json, Value};

use constrained_recovery::algebra::{block_structure, center, commutant};
use constrained_recovery::channel::{fixes_algebra, is_local, is_physical, local_complementary, local_complementary_definitional};
use constrained_recovery::fermion::FermionSystem;
use constrained_recovery::recovery::{
    fermion_local_check, kl_check, optimal_recovery_fidelity, environment_side_fidelity, superselection_kl_check,
    tensor_local_check, verify_duality, worst_case_fidelity_seesaw, DualityVerdict, DEFAULT_TOL,
};
use constrained_recovery::sdp::SdpStatus;
use constrained_recovery::{CorrectabilityReport, Error, FidelityResult, RecoveryConstraint, SolveOptions};

use crate::scenario::{matrix_to_json, ConstraintSpec, FidelitySpec, Resolved, SchemaError, TaskSpec};

pub const DEFAULT_DUALITY_TOL: f64 = 1e-5;
pub const DEFAULT_FIDELITY_TOL: f64 = 1e-5;
pub const DEFAULT_SEESAW_ROUNDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    /// Input rejected by a library precondition (exit 2).
    Input,
    /// Numerical breakdown (exit 3).
    Numerical,
}

#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub index: usize,
    pub kind: &'static str,
    pub elapsed: f64,
    pub result: Result<Value, (Failure, String)>,
    pub rows: Vec<CsvRow>,
}

#[derive(Debug, Clone)]
pub struct CsvRow {
    pub quantity: String,
    pub value: f64,
    pub tolerance: f64,
}

/// Overrides applied on top of the per-task settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
}

fn classify(e: &Error) -> Failure {
    match e {
        Error::Numerical(_) | Error::Factorization(_) | Error::DegenerateSplit(_) => Failure::Numerical,
        Error::DimensionMismatch(_)
        | Error::InvalidArgument(_)
        | Error::Precondition(_)
        | Error::NotPsd(_)
        | Error::NotHermitian(_) => Failure::Input,
    }
}

type TaskResult = Result<(Value, Vec<CsvRow>), (Failure, String)>;

fn lib<T>(r: constrained_recovery::Result<T>) -> Result<T, (Failure, String)> {
    r.map_err(|e| (classify(&e), e.to_string()))
}

fn schema<T>(r: Result<T, SchemaError>) -> Result<T, (Failure, String)> {
    r.map_err(|e| (Failure::Input, e.to_string()))
}

fn row(quantity: impl Into<String>, value: f64, tolerance: f64) -> CsvRow {
    CsvRow { quantity: quantity.into(), value, tolerance }
}

fn status_str(s: SdpStatus) -> &'static str {
    match s {
        SdpStatus::Optimal => "optimal",
        SdpStatus::MaxIter => "max_iter",
        SdpStatus::Infeasible => "infeasible",
        SdpStatus::NumericalFailure => "numerical_failure",
    }
}

fn correctability_json(r: &CorrectabilityReport) -> Value {
    let coeffs: serde_json::Map<String, Value> =
        r.coefficients.iter().map(|c| (c.name.clone(), matrix_to_json(&c.matrix))).collect();
    let flags: serde_json::Map<String, Value> = r.flags.iter().map(|(n, b)| (n.clone(), Value::Bool(*b))).collect();
    json!({
        "verdict": r.verdict.as_str(),
        "residual": r.residual,
        "tolerance": r.tolerance,
        "coefficients": coeffs,
        "flags": flags,
    })
}

fn fidelity_json(f: &FidelityResult, tol: f64) -> Value {
    json!({
        "value": f.value,
        "tolerance": tol,
        "status": status_str(f.status),
        "certified": f.is_certified(),
        "duality_gap": f.duality_gap,
        "primal_residual": f.primal_residual,
        "dual_residual": f.dual_residual,
        "iterations": f.iterations,
        "constraint": f.constraint,
        "sdp_size": [f.sdp_size.0, f.sdp_size.1],
        "optimizer_dims": [f.in_dim, f.out_dim],
    })
}

fn check_sdp(statuses: &[SdpStatus]) -> Result<(), (Failure, String)> {
    if statuses.contains(&SdpStatus::NumericalFailure) {
        return Err((Failure::Numerical, "SDP solver reported a numerical failure".into()));
    }
    Ok(())
}

fn constraint(r: &Resolved, f: &FidelitySpec) -> Result<RecoveryConstraint, (Failure, String)> {
    Ok(match f.constraint.as_ref().unwrap_or(&ConstraintSpec::Unconstrained) {
        ConstraintSpec::Unconstrained => RecoveryConstraint::Unconstrained,
        ConstraintSpec::Physical { p, q } => RecoveryConstraint::Physical {
            p: schema(r.get_channel(p))?.clone(),
            q: schema(r.get_channel(q))?.clone(),
        },
        ConstraintSpec::Fixes { algebra } => RecoveryConstraint::Fixes { algebra: schema(r.get_algebra(algebra))?.clone() },
    })
}

fn sdp_opts(f: &FidelitySpec) -> SolveOptions {
    SolveOptions { tol: f.sdp_tol.unwrap_or(SolveOptions::default().tol), ..SolveOptions::default() }
}

pub fn run_task(r: &Resolved, index: usize, task: &TaskSpec, ov: Overrides) -> TaskOutcome {
    let start = Instant::now();
    let result = execute(r, task, ov);
    let elapsed = start.elapsed().as_secs_f64();
    let (result, rows) = match result {
        Ok((v, rows)) => (Ok(v), rows),
        Err(e) => (Err(e), vec![]),
    };
    TaskOutcome { index, kind: task.kind(), elapsed, result, rows }
}

fn execute(r: &Resolved, task: &TaskSpec, ov: Overrides) -> TaskResult {
    let tol_or = |t: &Option<f64>, d: f64| ov.tol.or(*t).unwrap_or(d);
    match task {
        TaskSpec::Kl { channel, tol } => {
            let tol = tol_or(tol, DEFAULT_TOL);
            let rep = lib(kl_check(schema(r.get_code())?, schema(r.get_channel(channel))?.kraus(), tol))?;
            Ok((correctability_json(&rep), vec![row("kl_residual", rep.residual, tol)]))
        }
        TaskSpec::SuperselectionKl { channel, projectors, tol } => {
            let tol = tol_or(tol, DEFAULT_TOL);
            let ps = schema(r.projectors(projectors))?;
            let rep = lib(superselection_kl_check(schema(r.get_code())?, schema(r.get_channel(channel))?.kraus(), &ps, tol))?;
            Ok((correctability_json(&rep), vec![row("superselection_kl_residual", rep.residual, tol)]))
        }
        TaskSpec::TensorLocal { channel, dims, tol } => {
            let tol = tol_or(tol, DEFAULT_TOL);
            let rep = lib(tensor_local_check(
                schema(r.get_code())?,
                (dims[0], dims[1]),
                schema(r.get_channel(channel))?.kraus(),
                tol,
            ))?;
            Ok((correctability_json(&rep), vec![row("tensor_local_residual", rep.residual, tol)]))
        }
        TaskSpec::FermionLocal { channel, region, tol } => {
            let tol = tol_or(tol, DEFAULT_TOL);
            let sys: &FermionSystem = r.fermions.as_ref().ok_or((Failure::Input, "needs a fermionic system".to_string()))?;
            let rep = lib(fermion_local_check(sys, schema(r.get_code())?, schema(r.get_channel(channel))?.kraus(), region, tol))?;
            Ok((correctability_json(&rep), vec![row("fermion_local_residual", rep.residual, tol)]))
        }
        TaskSpec::Optimal(f) | TaskSpec::Environment(f) => {
            let tol = tol_or(&f.tol, DEFAULT_FIDELITY_TOL);
            let (n, m, rho) = schema(r.fidelity_inputs(f))?;
            let c = constraint(r, f)?;
            let fr = if matches!(task, TaskSpec::Optimal(_)) {
                lib(optimal_recovery_fidelity(&n, &m, &rho, &c, &sdp_opts(f)))?
            } else {
                lib(environment_side_fidelity(&n, &m, &rho, &c, &sdp_opts(f)))?
            };
            check_sdp(&[fr.status])?;
            let mut v = fidelity_json(&fr, tol);
            v["recoverable"] = Value::Bool(fr.value >= 1.0 - tol);
            Ok((v, vec![row("fidelity", fr.value, tol), row("sdp_gap", fr.duality_gap, sdp_opts(f).tol)]))
        }
        TaskSpec::Duality(f) => {
            let tol = tol_or(&f.tol, DEFAULT_DUALITY_TOL);
            let (n, m, rho) = schema(r.fidelity_inputs(f))?;
            let c = constraint(r, f)?;
            let rep = lib(verify_duality(&n, &m, &rho, &c, &sdp_opts(f), tol))?;
            check_sdp(&[rep.lhs.status, rep.rhs.status])?;
            let verdict = match rep.verdict {
                DualityVerdict::Pass => "pass",
                DualityVerdict::Fail => "fail",
                DualityVerdict::Indeterminate => "indeterminate",
            };
            let v = json!({
                "verdict": verdict,
                "lhs": fidelity_json(&rep.lhs, tol),
                "rhs": fidelity_json(&rep.rhs, tol),
                "difference": rep.difference,
                "tolerance": rep.tolerance,
            });
            Ok((
                v,
                vec![row("lhs", rep.lhs.value, tol), row("rhs", rep.rhs.value, tol), row("difference", rep.difference, tol)],
            ))
        }
        TaskSpec::Seesaw(f) => {
            let tol = tol_or(&f.tol, DEFAULT_FIDELITY_TOL);
            let code = schema(r.get_code())?;
            let n = schema(r.get_channel(&f.noise))?;
            let m = match &f.target {
                Some(t) => schema(r.get_channel(t))?.clone(),
                None => constrained_recovery::Channel::identity(code.logical_dim()),
            };
            let ws = lib(worst_case_fidelity_seesaw(n, &m, code, f.rounds.unwrap_or(DEFAULT_SEESAW_ROUNDS), &sdp_opts(f)))?;
            let v = json!({
                "lower_bound": ws.value,
                "upper_estimate": ws.upper_estimate,
                "tolerance": tol,
                "rounds": ws.rounds,
                "converged": ws.converged,
                "heuristic": ws.heuristic,
                "worst_state": matrix_to_json(&ws.worst_state),
            });
            Ok((v, vec![row("worst_case_lower", ws.value, tol), row("worst_case_upper", ws.upper_estimate, tol)]))
        }
        TaskSpec::Algebra { algebra, ops } => {
            let a = schema(r.get_algebra(algebra))?;
            let ops: Vec<&str> = if ops.is_empty() { vec!["commutant", "center", "blocks"] } else { ops.iter().map(|s| s.as_str()).collect() };
            let tol = ov.tol.unwrap_or(1e-9);
            let mut v = json!({ "ambient_dim": a.ambient_dim(), "dim": a.dim() });
            let mut rows = vec![];
            for op in ops {
                match op {
                    "commutant" => v["commutant_dim"] = json!(commutant(a).dim()),
                    "center" => v["center_dim"] = json!(center(a).dim()),
                    "closure" => {
                        let (m, s, u) = a.closure_residuals();
                        let worst = m.max(s).max(u);
                        v["closure"] = json!({ "residual": worst, "tolerance": tol, "is_algebra": worst <= tol });
                        rows.push(row("closure_residual", worst, tol));
                    }
                    "blocks" => {
                        let bs = lib(block_structure(a))?;
                        let sectors: Vec<Value> = bs
                            .sectors
                            .iter()
                            .map(|s| json!({ "block_dim": s.left_dim, "multiplicity": s.right_dim }))
                            .collect();
                        let recon = a
                            .basis()
                            .iter()
                            .map(|x| (bs.assemble(&bs.split(x)) - x).norm())
                            .fold(0.0f64, f64::max);
                        v["blocks"] = json!({ "sectors": sectors, "round_trip_residual": recon, "tolerance": tol });
                        rows.push(row("block_round_trip", recon, tol));
                    }
                    _ => return Err((Failure::Input, format!("unknown algebra op '{op}'"))),
                }
            }
            Ok((v, rows))
        }
        TaskSpec::Channel { channel, ops, algebra, p, q, b, tol } => {
            let tol = tol_or(tol, DEFAULT_TOL);
            let n = schema(r.get_channel(channel))?;
            let ops: Vec<&str> = if ops.is_empty() { vec!["validate"] } else { ops.iter().map(|s| s.as_str()).collect() };
            let mut v = json!({ "in_dim": n.in_dim(), "out_dim": n.out_dim(), "kraus_rank": n.kraus_rank() });
            let mut rows = vec![];
            for op in ops {
                match op {
                    "validate" => {
                        let rep = n.validate(tol);
                        v["validate"] = json!({
                            "valid": rep.valid,
                            "trace_preservation_residual": rep.trace_preservation_residual,
                            "tolerance": tol,
                        });
                        rows.push(row("trace_preservation_residual", rep.trace_preservation_residual, tol));
                    }
                    "complement" => {
                        let c = n.complementary();
                        v["complement"] = json!({ "in_dim": c.in_dim(), "out_dim": c.out_dim(), "kraus_rank": c.kraus_rank() });
                    }
                    "local_complement" => {
                        let alg = schema(r.get_algebra(algebra.as_deref().unwrap_or_default()))?;
                        let c1 = lib(local_complementary(n, alg))?;
                        let c2 = lib(local_complementary_definitional(n, alg))?;
                        let diff = if c1.in_dim() == c2.in_dim() && c1.out_dim() == c2.out_dim() {
                            lib(constrained_recovery::channel::choi_distance(&c1, &c2))?
                        } else {
                            f64::NAN
                        };
                        v["local_complement"] = json!({
                            "out_dim": c1.out_dim(),
                            "kraus_rank": c1.kraus_rank(),
                            "definitional_out_dim": c2.out_dim(),
                            "choi_distance": if diff.is_finite() { json!(diff) } else { Value::Null },
                            "tolerance": tol,
                        });
                        if diff.is_finite() {
                            rows.push(row("local_complement_distance", diff, tol));
                        }
                    }
                    "physical" => {
                        let pc = schema(r.get_channel(p.as_deref().unwrap_or_default()))?;
                        let qc = schema(r.get_channel(q.as_deref().unwrap_or_default()))?;
                        let (ok, res) = lib(is_physical(n, pc, qc, tol))?;
                        v["physical"] = json!({ "physical": ok, "residual": res, "tolerance": tol });
                        rows.push(row("physical_residual", res, tol));
                    }
                    "fixes" => {
                        let alg = schema(r.get_algebra(algebra.as_deref().unwrap_or_default()))?;
                        let rep = lib(fixes_algebra(n, alg, tol))?;
                        v["fixes"] = json!({
                            "fixes": rep.fixes,
                            "adjoint_residual": rep.adjoint_residual,
                            "kraus_commutator_residual": rep.kraus_commutator_residual,
                            "tolerance": tol,
                        });
                        rows.push(row("fixes_adjoint_residual", rep.adjoint_residual, tol));
                    }
                    "local" => {
                        let a = schema(r.get_algebra(algebra.as_deref().unwrap_or_default()))?;
                        let bb = schema(r.get_algebra(b.as_deref().unwrap_or_default()))?;
                        let rep = lib(is_local(n, a, bb, tol))?;
                        v["local"] = json!({
                            "local": rep.local,
                            "strong": rep.strong,
                            "maps_into_residual": rep.maps_into_residual,
                            "fix_adjoint_residual": rep.fix.adjoint_residual,
                            "tolerance": tol,
                        });
                        rows.push(row("maps_into_residual", rep.maps_into_residual, tol));
                    }
                    _ => return Err((Failure::Input, format!("unknown channel op '{op}'"))),
                }
            }
            Ok((v, rows))
        }
    }
}

/// Runs all tasks on scoped threads; outcomes come back in task order.
pub fn run_all(r: &Resolved, ov: Overrides, parallel: bool) -> Vec<TaskOutcome> {
    if !parallel || r.tasks.len() < 2 {
        return r.tasks.iter().enumerate().map(|(i, t)| run_task(r, i, t, ov)).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = r.tasks.iter().enumerate().map(|(i, t)| s.spawn(move || run_task(r, i, t, ov))).collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(i, h)| {
                h.join().unwrap_or_else(|_| TaskOutcome {
                    index: i,
                    kind: r.tasks[i].kind(),
                    elapsed: 0.0,
                    result: Err((Failure::Numerical, "task panicked".into())),
                    rows: vec![],
                })
            })
            .collect()
    })
}
