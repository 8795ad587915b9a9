use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mgflex_core::{
    compute_incentives, emit_solve_reports, emit_sweep_reports, load_case, prepare, read_table_csv, run_sweep,
    solve_prepared, validate_instance, CellStatus, FlexibilitySpec, Schedule, ValidatedInstance,
};
use mgflex_milp::{write_mps, Branching, SolveOptions};

/// Thread count for parallel model assembly and sweep cells.
const THREADS_ENV: &str = "MGFLEX_THREADS";

#[derive(Parser)]
#[command(name = "mgflex", version, about = "Day-ahead microgrid scheduling with feeder ramping limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one case and write schedule, summary and log files.
    Solve {
        case: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Scenarios to include in schedule.csv (comma separated, default all).
        #[arg(long, value_delimiter = ',')]
        scenarios: Vec<usize>,
        /// Also write the flexibility envelope as envelope.csv.
        #[arg(long)]
        dump_envelope: bool,
        /// Also write the islanding scenarios as scenarios.csv.
        #[arg(long)]
        dump_scenarios: bool,
    },
    /// Solve a grid of (delta1, delta2) cells plus a baseline without ramping limits.
    Sweep {
        case: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        delta1: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        delta2: Vec<f64>,
        #[arg(long)]
        stride: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a schedule JSON against every constraint family of a case.
    Validate {
        case: PathBuf,
        schedule: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = mgflex_core::pipeline::VALIDATION_TOL)]
        tol: f64,
    },
    /// Write the assembled model as an MPS file.
    ExportMps {
        case: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "model.mps")]
        out: PathBuf,
    },
    /// Print model size statistics as JSON.
    Stats {
        case: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Incentives (objective minus baseline) from a wide cost table CSV.
    Incentives {
        table: PathBuf,
        /// Baseline cost; overrides a `baseline` row in the table.
        #[arg(long)]
        baseline: Option<f64>,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Intra-hour limit, MW per sub-period; overrides the case file.
    #[arg(long)]
    delta1: Option<f64>,
    /// Inter-hour limit, MW; overrides the case file.
    #[arg(long)]
    delta2: Option<f64>,
    /// Drop both ramping limits (price-based scheduling).
    #[arg(long, conflicts_with_all = ["delta1", "delta2"])]
    no_flex: bool,
    /// Distance between islanding start positions, in sub-periods.
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchingArg {
    MostFractional,
    PseudoCost,
}

#[derive(Args)]
struct SolverArgs {
    /// Relative optimality gap.
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    /// Wall-clock limit per solve, seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long, value_enum, default_value = "pseudo-cost")]
    branching: BranchingArg,
}

impl SolverArgs {
    fn options(&self) -> Result<SolveOptions> {
        let opts = SolveOptions {
            rel_gap: self.gap,
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            node_limit: self.node_limit,
            branching: match self.branching {
                BranchingArg::MostFractional => Branching::MostFractional,
                BranchingArg::PseudoCost => Branching::PseudoCost,
            },
            ..SolveOptions::default()
        };
        opts.check().map_err(anyhow::Error::msg)?;
        Ok(opts)
    }
}

fn with_stride(inst: ValidatedInstance, stride: Option<usize>) -> Result<ValidatedInstance> {
    let Some(stride) = stride else { return Ok(inst) };
    let mut raw = inst.into_inner();
    raw.scenario_stride = stride;
    Ok(validate_instance(raw)?)
}

fn load(case: &Path, args: &ModelArgs) -> Result<ValidatedInstance> {
    let inst = load_case(case).with_context(|| format!("loading {}", case.display()))?;
    let inst = with_stride(inst, args.stride)?;
    let flex = if args.no_flex {
        FlexibilitySpec::price_based()
    } else {
        FlexibilitySpec {
            delta1: args.delta1.or(inst.flex.delta1),
            delta2: args.delta2.or(inst.flex.delta2),
            enforce_while_islanded: inst.flex.enforce_while_islanded,
        }
    };
    Ok(inst.with_flex(flex)?)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV}={v} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve {
            case,
            model,
            solver,
            out,
            scenarios,
            dump_envelope,
            dump_scenarios,
        } => {
            let inst = load(&case, &model)?;
            let opts = solver.options()?;
            let prep = prepare(&inst)?;
            eprintln!("{}", serde_json::to_string(&prep.stats())?);
            let outcome = solve_prepared(&prep, &opts)?;
            let wanted: Vec<usize> = if scenarios.is_empty() {
                (0..prep.scenarios.len()).collect()
            } else {
                scenarios
            };
            let mut files = emit_solve_reports(&out, &prep, &outcome, &wanted)?;
            if dump_envelope {
                let path = out.join("envelope.csv");
                prep.envelope.write_csv(create(&path)?)?;
                files.push(path);
            }
            if dump_scenarios {
                let path = out.join("scenarios.csv");
                prep.scenarios.write_csv(create(&path)?)?;
                files.push(path);
            }
            let summary = mgflex_core::report::solve_summary(&prep, &outcome);
            println!("{}", serde_json::to_string_pretty(&summary)?);
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            if let Some(rep) = outcome.report.as_ref().filter(|r| !r.pass) {
                eprintln!("schedule failed validation: {}", rep.summary());
            }
            Ok(outcome.validated())
        }
        Command::Sweep {
            case,
            delta1,
            delta2,
            stride,
            solver,
            out,
        } => {
            let inst = with_stride(load_case(&case)?, stride)?;
            let opts = solver.options()?;
            let sweep = run_sweep(&inst, &delta1, &delta2, &opts)?;
            let files = emit_sweep_reports(&out, &sweep)?;
            print!("{}", sweep.to_table_csv());
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            let all = sweep.cells.iter().chain(sweep.baseline.as_ref());
            Ok(all.into_iter().all(|c| c.status == CellStatus::Optimal))
        }
        Command::Validate {
            case,
            schedule,
            model,
            tol,
        } => {
            let inst = load(&case, &model)?;
            let text = std::fs::read_to_string(&schedule).with_context(|| format!("reading {}", schedule.display()))?;
            let sched: Schedule =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", schedule.display()))?;
            let prep = prepare(&inst)?;
            let report = prep.check(&sched, tol)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            eprintln!("{}", report.summary());
            Ok(report.pass)
        }
        Command::ExportMps { case, model, out } => {
            let inst = load(&case, &model)?;
            let prep = prepare(&inst)?;
            let mps = write_mps(&prep.built.model);
            std::fs::write(&out, &mps.text).with_context(|| format!("writing {}", out.display()))?;
            for r in &mps.renames {
                eprintln!("renamed {r:?}");
            }
            eprintln!("wrote {}", out.display());
            Ok(true)
        }
        Command::Stats { case, model } => {
            let inst = load(&case, &model)?;
            let prep = prepare(&inst)?;
            println!("{}", serde_json::to_string_pretty(&prep.stats())?);
            Ok(true)
        }
        Command::Incentives { table, baseline } => {
            let mut sweep = read_table_csv(&table)?;
            if let Some(b) = baseline {
                let mut cell = sweep.baseline.take().unwrap_or_else(|| sweep.cells[0].clone());
                cell.delta1 = None;
                cell.delta2 = None;
                cell.objective = Some(b);
                cell.gap = Some(0.0);
                sweep.baseline = Some(cell);
            }
            let inc = compute_incentives(&sweep)?;
            print!("{}", inc.to_table_csv());
            let flagged: Vec<_> = inc.flagged().collect();
            if !flagged.is_empty() {
                bail!("{} cells are cheaper than the baseline beyond the gap", flagged.len());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(cli));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
