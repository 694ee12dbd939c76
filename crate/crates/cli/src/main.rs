use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdip_cli::commands::{self, AssignmentDoc, PlanOptions, ASSIGNMENT_FILE};
use fdip_cli::report;
use fdip_cli::scenario::{Mode, Scenario};
use fdip_cli::sweep::{sweep, SweepKind};
use fdip_cli::{CliError, CliResult};
use fdip_core::workload::{industrial_types, mixed_demands};

#[derive(Parser)]
#[command(name = "fdip", version, about = "Plan and simulate multi-rate deterministic IP networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct Overrides {
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    hop_limit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated hypercycles, warm-up included.
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    be_load: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Select paths and groups for the scenario's demands.
    Plan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Replay an assignment and check it against its bounds.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: Overrides,
        /// Defaults to `<out>/assignment.json`.
        #[arg(long)]
        assignment: Option<PathBuf>,
        /// Also write the per-event trace.
        #[arg(long)]
        trace: bool,
    },
    /// Re-check an assignment's capacity and QoS without simulating.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        assignment: PathBuf,
    },
    /// Aggregate finished runs into comparison tables.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Plan and simulate over a range of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_enum)]
        kind: SweepKind,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Generate a seeded PLC / supervision / VR demand mix.
    GenDemands {
        #[arg(long, value_delimiter = ',', required = true)]
        sources: Vec<String>,
        #[arg(long)]
        sink: String,
        #[arg(long, default_value_t = 60)]
        per_type: usize,
        #[arg(long, default_value_t = 1_000)]
        delta0_ns: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path, o: &Overrides) -> CliResult<(Scenario, PlanOptions)> {
    let mut scn = Scenario::load(path)?;
    if let Some(s) = o.seed {
        scn.file.seed = s;
    }
    if let Some(h) = o.horizon {
        scn.file.traffic.horizon_hypercycles = h;
    }
    if let Some(u) = o.be_load {
        scn.file.traffic.be_utilization = u;
    }
    let mut opts = PlanOptions::from_scenario(&scn);
    if let Some(m) = o.mode {
        opts.mode = m;
    }
    if let Some(h) = o.hop_limit {
        opts.hop_limit = h;
    }
    Ok((scn, opts))
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Plan { common, overrides } => {
            let (scn, opts) = load(&common.scenario, &overrides)?;
            let out = commands::plan(&scn, opts)?;
            commands::write_plan(&common.out, &out)?;
            let s = &out.stats;
            print!("objective {} of {} demands ({} servable)", s.objective, s.demands, s.servable);
            match s.upper_bound {
                Some(ub) if !s.exhausted => println!(", search budget exhausted, gap {}", ub - s.objective),
                _ => println!(),
            }
            Ok(())
        }
        Command::Simulate { common, overrides, assignment, trace } => {
            let (scn, _) = load(&common.scenario, &overrides)?;
            let path = assignment.unwrap_or_else(|| common.out.join(ASSIGNMENT_FILE));
            let doc = AssignmentDoc::load(&path)?;
            let mut traffic = scn.traffic();
            traffic.record_trace = trace;
            let out = commands::simulate(&scn, &doc, &traffic)?;
            commands::write_simulation(&common.out, &out)?;
            let failed: Vec<_> = out.verification.flows.iter().filter(|f| !f.passed).collect();
            println!("{} flows simulated, {} failed verification", out.verification.flows.len(), failed.len());
            for f in &failed {
                println!("  {}: {}", f.flow, f.failures.join("; "));
            }
            if out.verification.passed {
                Ok(())
            } else {
                Err(CliError::failed("verification failed"))
            }
        }
        Command::Verify { scenario, assignment } => {
            let scn = Scenario::load(&scenario)?;
            let doc = AssignmentDoc::load(&assignment)?;
            let problems = commands::verify_assignment(&scn, &doc)?;
            for p in &problems {
                println!("{p}");
            }
            if problems.is_empty() {
                println!("assignment of {} demands is feasible", doc.accepted.len());
                Ok(())
            } else {
                Err(CliError::failed(format!("{} problem(s) found", problems.len())))
            }
        }
        Command::Report { runs, out } => {
            let summary = report::summarize(&runs)?;
            report::write_summary(&out, &summary)?;
            for row in &summary.comparison {
                println!(
                    "H={}: single-group {}, multi-group {}",
                    row.hop_limit,
                    row.dip_objective.map_or("-".into(), |v| v.to_string()),
                    row.fdip_objective.map_or("-".into(), |v| v.to_string())
                );
            }
            Ok(())
        }
        Command::Sweep { common, overrides, kind, values } => {
            let (scn, opts) = load(&common.scenario, &overrides)?;
            let points = sweep(&scn, kind, &values, opts, &scn.traffic(), &common.out)?;
            for p in &points {
                println!(
                    "{}: objective {}, max delay {} ns, {}",
                    p.run,
                    p.objective,
                    p.max_delay_ns.map_or("-".into(), |v| v.to_string()),
                    if p.verified { "verified" } else { "VERIFICATION FAILED" }
                );
            }
            if points.iter().all(|p| p.verified) {
                Ok(())
            } else {
                Err(CliError::failed("verification failed for at least one point"))
            }
        }
        Command::GenDemands { sources, sink, per_type, delta0_ns, seed, out } => {
            let doc = mixed_demands(&industrial_types(), per_type, &sources, &sink, delta0_ns, seed)?;
            commands::write_json(&out, &doc)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
