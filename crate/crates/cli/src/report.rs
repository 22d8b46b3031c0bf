//! Report assembly and serialization.

use serde_json::{json, Value};

use crate::tasks::{Failure, TaskOutcome};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub struct Provenance {
    pub scenario: String,
    pub seed: u64,
    pub tol_override: Option<f64>,
    pub sdp_tol: f64,
}

pub fn build(prov: &Provenance, outcomes: &[TaskOutcome], total_elapsed: f64) -> Value {
    let tasks: Vec<Value> = outcomes
        .iter()
        .map(|o| {
            let mut v = json!({ "index": o.index, "task": o.kind, "elapsed_s": o.elapsed });
            match &o.result {
                Ok(r) => {
                    v["status"] = json!("completed");
                    v["result"] = r.clone();
                }
                Err((f, msg)) => {
                    v["status"] = json!(match f {
                        Failure::Input => "input_error",
                        Failure::Numerical => "numerical_failure",
                    });
                    v["error"] = json!(msg);
                }
            }
            v
        })
        .collect();
    json!({
        "report_version": REPORT_VERSION,
        "scenario": prov.scenario,
        "provenance": {
            "seed": prov.seed,
            "tol_override": prov.tol_override,
            "sdp_tol_default": prov.sdp_tol,
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "library_version": constrained_recovery::VERSION,
        },
        "elapsed_s": total_elapsed,
        "tasks": tasks,
    })
}

pub fn csv(outcomes: &[TaskOutcome]) -> String {
    let mut out = String::from("task_index,task,quantity,value,tolerance\n");
    for o in outcomes {
        for r in &o.rows {
            out.push_str(&format!("{},{},{},{:.12e},{:.3e}\n", o.index, o.kind, r.quantity, r.value, r.tolerance));
        }
    }
    out
}

/// Exit status from the outcomes: 0 if all completed, else the worst failure.
pub fn exit_code(outcomes: &[TaskOutcome]) -> i32 {
    let mut code = 0;
    for o in outcomes {
        if let Err((f, _)) = &o.result {
            code = code.max(match f {
                Failure::Input => 2,
                Failure::Numerical => 3,
            });
        }
    }
    code
}
