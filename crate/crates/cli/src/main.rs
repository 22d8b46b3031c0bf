mod report;
mod scenario;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use report::{Format, Provenance};
use scenario::{Resolved, Scenario, SchemaError, TaskSpec};
use tasks::Overrides;

#[derive(Parser, Debug)]
#[command(name = "constrained-recovery", version, about = "Constrained recovery of quantum channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Tolerance override applied to every task.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// RNG seed (takes precedence over the scenario's seed).
    #[arg(long, global = true, env = "CONSTRAINED_RECOVERY_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Run tasks one after another.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every task of a scenario file.
    Run { scenario: PathBuf },
    /// Commutant, center and block structure of a named algebra.
    Algebra {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        algebra: String,
        /// Subset of commutant,center,blocks,closure.
        #[arg(long, value_delimiter = ',')]
        ops: Vec<String>,
    },
    /// Complement, local complement, physicality and locality checks.
    Channel {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        channel: String,
        /// Subset of validate,complement,local_complement,physical,fixes,local.
        #[arg(long, value_delimiter = ',')]
        ops: Vec<String>,
        #[arg(long)]
        algebra: Option<String>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        q: Option<String>,
        #[arg(long)]
        b: Option<String>,
    },
    /// Exact correctability checks.
    Check {
        #[command(subcommand)]
        kind: CheckKind,
    },
    /// Optimal recovery fidelities.
    Fidelity {
        #[command(subcommand)]
        kind: FidelityKind,
    },
    /// Built-in example scenarios.
    Demo {
        #[command(subcommand)]
        kind: DemoKind,
    },
}

#[derive(Args, Debug, Clone)]
struct CheckArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Channel to check; without it the scenario's tasks of this kind run.
    #[arg(long)]
    channel: Option<String>,
}

#[derive(Subcommand, Debug)]
enum CheckKind {
    Kl(CheckArgs),
    SuperselectionKl(CheckArgs),
    TensorLocal {
        #[command(flatten)]
        args: CheckArgs,
        /// Bipartition dA,dB.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        dims: Option<Vec<usize>>,
    },
    FermionLocal {
        #[command(flatten)]
        args: CheckArgs,
        /// Majorana indices of the region.
        #[arg(long, value_delimiter = ',')]
        region: Option<Vec<usize>>,
    },
}

#[derive(Args, Debug, Clone)]
struct FidelityArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Noise channel; without it the scenario's tasks of this kind run.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    target: Option<String>,
    /// Constrain the recovery to fix this algebra.
    #[arg(long, conflicts_with = "physical")]
    fixes: Option<String>,
    /// Physical constraint given as P,Q channel names.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    physical: Option<Vec<String>>,
    /// Ignore the scenario code and use the channels as given.
    #[arg(long)]
    no_code: bool,
    #[arg(long)]
    rounds: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum FidelityKind {
    Optimal(FidelityArgs),
    Environment(FidelityArgs),
    Duality(FidelityArgs),
    Seesaw(FidelityArgs),
}

#[derive(Subcommand, Debug)]
enum DemoKind {
    /// Majorana ring code with window noise and quasiparticle poisoning.
    MajoranaRing {
        #[arg(long, default_value_t = 6)]
        modes: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,4,7,10")]
        unpaired: Vec<usize>,
        /// Pairs as a-b separated by commas; nearest-neighbour by default.
        #[arg(long, value_delimiter = ',')]
        pairing: Vec<String>,
        /// Print the generated scenario instead of running it.
        #[arg(long)]
        emit_scenario: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            });
        }
    };
    ExitCode::from(dispatch(cli) as u8)
}

fn fail(e: SchemaError) -> i32 {
    eprintln!("error: {e}");
    2
}

fn dispatch(cli: Cli) -> i32 {
    let common = cli.common.clone();
    let (scenario, label) = match build_scenario(cli.command) {
        Ok(Some(x)) => x,
        Ok(None) => return 0,
        Err(e) => return fail(e),
    };
    execute(&scenario, &label, &common)
}

fn load(path: &Path) -> Result<Scenario, SchemaError> {
    scenario::load(path)
}

fn with_tasks(mut sc: Scenario, explicit: Option<TaskSpec>, kind: &str) -> Result<Scenario, SchemaError> {
    match explicit {
        Some(t) => sc.tasks = vec![t],
        None => {
            sc.tasks.retain(|t| t.kind() == kind);
            if sc.tasks.is_empty() {
                return Err(SchemaError::Invalid(format!("scenario has no '{kind}' task; name one on the command line")));
            }
        }
    }
    Ok(sc)
}

fn from_json(v: Value) -> Result<TaskSpec, SchemaError> {
    serde_json::from_value(v).map_err(|e| SchemaError::Invalid(e.to_string()))
}

/// Returns the scenario to run and a label for the report; `None` when there
/// is nothing to run (the command already printed its output).
fn build_scenario(cmd: Command) -> Result<Option<(Scenario, String)>, SchemaError> {
    let label = |p: &Path| p.display().to_string();
    Ok(Some(match cmd {
        Command::Run { scenario } => (load(&scenario)?, label(&scenario)),
        Command::Algebra { scenario, algebra, ops } => {
            let t = from_json(json!({ "task": "algebra", "algebra": algebra, "ops": ops }))?;
            (with_tasks(load(&scenario)?, Some(t), "algebra")?, label(&scenario))
        }
        Command::Channel { scenario, channel, ops, algebra, p, q, b } => {
            let t = from_json(json!({
                "task": "channel", "channel": channel, "ops": ops,
                "algebra": algebra, "p": p, "q": q, "b": b,
            }))?;
            (with_tasks(load(&scenario)?, Some(t), "channel")?, label(&scenario))
        }
        Command::Check { kind } => {
            let (args, kind, extra) = match kind {
                CheckKind::Kl(a) => (a, "kl", json!({})),
                CheckKind::SuperselectionKl(a) => (a, "superselection_kl", json!({})),
                CheckKind::TensorLocal { args, dims } => (args, "tensor_local", json!({ "dims": dims })),
                CheckKind::FermionLocal { args, region } => (args, "fermion_local", json!({ "region": region })),
            };
            let sc = load(&args.scenario)?;
            let explicit = match args.channel {
                Some(ch) => {
                    let mut v = json!({ "task": kind, "channel": ch });
                    for (k, x) in extra.as_object().unwrap() {
                        if x.is_null() {
                            return Err(SchemaError::Invalid(format!("--{k} is required with --channel")));
                        }
                        v[k] = x.clone();
                    }
                    Some(from_json(v)?)
                }
                None => None,
            };
            (with_tasks(sc, explicit, kind)?, label(&args.scenario))
        }
        Command::Fidelity { kind } => {
            let (args, kind) = match kind {
                FidelityKind::Optimal(a) => (a, "optimal"),
                FidelityKind::Environment(a) => (a, "environment"),
                FidelityKind::Duality(a) => (a, "duality"),
                FidelityKind::Seesaw(a) => (a, "seesaw"),
            };
            let sc = load(&args.scenario)?;
            let explicit = match &args.noise {
                Some(noise) => {
                    let constraint = match (&args.fixes, &args.physical) {
                        (Some(a), _) => json!({ "kind": "fixes", "algebra": a }),
                        (None, Some(pq)) => json!({ "kind": "physical", "p": pq[0], "q": pq[1] }),
                        (None, None) => json!({ "kind": "unconstrained" }),
                    };
                    let mut v = json!({ "task": kind, "noise": noise, "target": args.target, "constraint": constraint });
                    if args.no_code {
                        v["on_code"] = json!(false);
                    }
                    if let Some(r) = args.rounds {
                        v["rounds"] = json!(r);
                    }
                    Some(from_json(v)?)
                }
                None => None,
            };
            (with_tasks(sc, explicit, kind)?, label(&args.scenario))
        }
        Command::Demo { kind: DemoKind::MajoranaRing { modes, unpaired, pairing, emit_scenario } } => {
            let pairs = pairing
                .iter()
                .map(|p| {
                    let (a, b) = p.split_once('-').ok_or_else(|| SchemaError::Invalid(format!("bad pair '{p}'")))?;
                    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| SchemaError::Invalid(format!("bad pair '{p}'")));
                    Ok([parse(a)?, parse(b)?])
                })
                .collect::<Result<Vec<_>, SchemaError>>()?;
            let v = demo::majorana_ring(modes, &unpaired, if pairs.is_empty() { None } else { Some(pairs) });
            if emit_scenario {
                println!("{}", serde_json::to_string_pretty(&v).unwrap());
                return Ok(None);
            }
            let sc: Scenario = serde_json::from_value(v).map_err(|e| SchemaError::Parse(e.to_string()))?;
            (sc, "demo:majorana-ring".to_string())
        }
    }))
}

fn execute(sc: &Scenario, label: &str, common: &Common) -> i32 {
    let seed = common.seed.or(sc.seed).unwrap_or(0);
    let start = Instant::now();
    let resolved = match Resolved::new(sc, seed) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let outcomes = tasks::run_all(&resolved, Overrides { tol: common.tol }, !common.sequential);
    let prov = Provenance {
        scenario: sc.name.clone().unwrap_or_else(|| label.to_string()),
        seed,
        tol_override: common.tol,
        sdp_tol: constrained_recovery::SolveOptions::default().tol,
    };
    let text = match common.format {
        Format::Json => {
            serde_json::to_string_pretty(&report::build(&prov, &outcomes, start.elapsed().as_secs_f64())).unwrap() + "\n"
        }
        Format::Csv => report::csv(&outcomes),
    };
    match &common.output {
        Some(p) => {
            if let Err(e) = std::fs::write(p, text) {
                eprintln!("error: cannot write {}: {e}", p.display());
                return 2;
            }
        }
        None => print!("{text}"),
    }
    for o in &outcomes {
        if let Err((_, msg)) = &o.result {
            eprintln!("task {} ({}): {msg}", o.index, o.kind);
        }
    }
    report::exit_code(&outcomes)
}

mod demo {
    use serde_json::{json, Value};

    /// Scenario: superselection checks for the dephasing-like noise
    /// {1, i·w_a·w_b}/√2 on every ring window of two Majoranas and for poisoning on the first two unpaired modes. On
    /// rings of at most three modes the poisoning optimum and its duality are
    /// added.
    pub fn majorana_ring(modes: usize, unpaired: &[usize], pairing: Option<Vec<[usize; 2]>>) -> Value {
        let nm = 2 * modes;
        let mut channels = serde_json::Map::new();
        let mut tasks = vec![];
        for a in 1..=nm {
            let b = a % nm + 1;
            let name = format!("window_{a}_{b}");
            channels.insert(
                name.clone(),
                json!({
                    "kind": "geometric",
                    "max_support": 2,
                    "kraus": [
                        [{ "indices": [], "coeff": [1.0, 0.0] }],
                        [{ "indices": [a, b], "coeff": [0.0, 1.0] }],
                    ],
                }),
            );
            tasks.push(json!({ "task": "superselection_kl", "channel": name }));
        }
        if unpaired.len() >= 2 {
            channels.insert("poisoning".into(), json!({ "kind": "poisoning", "a": unpaired[0], "b": unpaired[1] }));
            tasks.push(json!({ "task": "superselection_kl", "channel": "poisoning" }));
            if modes <= 3 {
                tasks.push(json!({ "task": "duality", "noise": "poisoning" }));
            }
        }
        let mut code = json!({ "kind": "majorana_ring", "unpaired": unpaired });
        if let Some(p) = pairing {
            code["pairing"] = json!(p);
        }
        json!({
            "schema_version": crate::scenario::SCHEMA_VERSION,
            "name": format!("majorana_ring_n{modes}"),
            "system": { "kind": "fermions", "modes": modes },
            "channels": channels,
            "code": code,
            "tasks": tasks,
        })
    }
}
