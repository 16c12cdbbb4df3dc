//! Command-line interface: corpus evaluation runs, report comparison,
//! graph dumps, and single-task solve traces.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use arc_abduce::graph::ObjectPolicy;
use arc_abduce::harness::{
    compare_runs, dump_graph, read_report, render_solve_trace, run_experiment, Mode, RunConfig,
};
use arc_abduce::properties::{parse_registry, PropertyKind, FULL_REGISTRY};
use arc_abduce::synthesizer::{
    solve_with_kg, synthesize_without_kg, DslSet, SolverConfig, TargetSet,
};
use arc_abduce::task::load_task;

#[derive(Parser)]
#[command(
    name = "arc-abduce",
    about = "Abductive symbolic solver for ARC tasks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a task corpus and write a report.
    Run(RunArgs),
    /// Compare two run reports component by component.
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
    },
    /// Dump one pair's knowledge graph as JSON.
    Graph {
        /// Task file to read.
        #[arg(long)]
        task: PathBuf,
        /// Pair index: train pairs first, then test pairs.
        #[arg(long)]
        pair: usize,
        /// Output file for the dump.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        graph_opts: GraphOpts,
    },
    /// Solve one task and print its hypotheses and prediction trace.
    Solve {
        /// Task file to read.
        #[arg(long)]
        task: PathBuf,
        #[arg(long, value_enum, default_value = "kg")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "ts10")]
        dsl_set: DslSetArg,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[command(flatten)]
        graph_opts: GraphOpts,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Corpus directory of task files.
    #[arg(long, env = "ARC_DATA_DIR")]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "kg")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "ts10")]
    dsl_set: DslSetArg,
    /// Search depth (number of DSL applications per path).
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Comma-separated targets: any of h, w, c.
    #[arg(long, default_value = "h,w,c")]
    targets: String,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Where to write the JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Where to write the flat per-task CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    graph_opts: GraphOpts,
}

#[derive(Args)]
struct GraphOpts {
    /// Property registry configuration file (one id per line); defaults
    /// to the full 22-property registry.
    #[arg(long)]
    properties: Option<PathBuf>,
    /// Object extraction policy.
    #[arg(long, value_enum, default_value = "same-color4")]
    policy: PolicyArg,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum ModeArg {
    Kg,
    Nokg,
}

impl From<ModeArg> for Mode {
    fn from(value: ModeArg) -> Mode {
        match value {
            ModeArg::Kg => Mode::Kg,
            ModeArg::Nokg => Mode::Nokg,
        }
    }
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum DslSetArg {
    Ts10,
    Ts5,
}

impl From<DslSetArg> for DslSet {
    fn from(value: DslSetArg) -> DslSet {
        match value {
            DslSetArg::Ts10 => DslSet::Ts10,
            DslSetArg::Ts5 => DslSet::Ts5,
        }
    }
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum PolicyArg {
    SameColor4,
    SameColor8,
    MultiColor8,
}

impl From<PolicyArg> for ObjectPolicy {
    fn from(value: PolicyArg) -> ObjectPolicy {
        match value {
            PolicyArg::SameColor4 => ObjectPolicy::SameColor4,
            PolicyArg::SameColor8 => ObjectPolicy::SameColor8,
            PolicyArg::MultiColor8 => ObjectPolicy::MultiColor8,
        }
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_CORPUS: u8 = 2;

fn parse_targets(spec: &str) -> Result<TargetSet, String> {
    let mut targets = TargetSet {
        height: false,
        width: false,
        colors: false,
    };
    for part in spec.split(',') {
        match part.trim().to_ascii_lowercase().as_str() {
            "h" => targets.height = true,
            "w" => targets.width = true,
            "c" => targets.colors = true,
            "" => {}
            other => return Err(format!("unknown target '{other}' (expected h, w, or c)")),
        }
    }
    if targets.is_empty() {
        return Err("no targets enabled".into());
    }
    Ok(targets)
}

fn load_properties(opts: &GraphOpts) -> Result<Vec<PropertyKind>, String> {
    match &opts.properties {
        None => Ok(FULL_REGISTRY.to_vec()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            parse_registry(&text)
        }
    }
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    match cli.command {
        Command::Run(args) => {
            let targets = parse_targets(&args.targets).map_err(|e| (EXIT_USAGE, e))?;
            let properties = load_properties(&args.graph_opts).map_err(|e| (EXIT_USAGE, e))?;
            let config = RunConfig {
                data_dir: args.data,
                mode: args.mode.into(),
                dsl_set: args.dsl_set.into(),
                depth: args.depth,
                targets,
                jobs: args.jobs,
                policy: args.graph_opts.policy.into(),
                properties,
                report_path: args.report,
                csv_path: args.csv,
            };
            let report = run_experiment(&config).map_err(|e| (EXIT_CORPUS, e.to_string()))?;
            println!(
                "{} tasks, mode={}, dsl_set={}, depth={}",
                report.total_tasks, report.config.mode, report.config.dsl_set, report.config.depth
            );
            for (key, stats) in &report.aggregate {
                println!(
                    "{key:>4}: {correct:>4} / {incorrect:<4} accuracy {acc:.2}%",
                    correct = stats.correct,
                    incorrect = stats.incorrect,
                    acc = stats.accuracy
                );
            }
            Ok(())
        }
        Command::Compare { report_a, report_b } => {
            let a = read_report(&report_a).map_err(|e| (EXIT_CORPUS, e.to_string()))?;
            let b = read_report(&report_b).map_err(|e| (EXIT_CORPUS, e.to_string()))?;
            let comparison = compare_runs(&a, &b).map_err(|e| (EXIT_USAGE, e.to_string()))?;
            print!("{comparison}");
            Ok(())
        }
        Command::Graph {
            task,
            pair,
            out,
            graph_opts,
        } => {
            let properties = load_properties(&graph_opts).map_err(|e| (EXIT_USAGE, e))?;
            dump_graph(&task, pair, &out, &properties, graph_opts.policy.into())
                .map_err(|e| (EXIT_CORPUS, e.to_string()))?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Solve {
            task,
            mode,
            dsl_set,
            depth,
            graph_opts,
        } => {
            let properties = load_properties(&graph_opts).map_err(|e| (EXIT_USAGE, e))?;
            let task = load_task(&task).map_err(|e| (EXIT_CORPUS, e.to_string()))?;
            let config = SolverConfig {
                dsl_set: dsl_set.into(),
                depth,
                targets: TargetSet::all(),
                policy: graph_opts.policy.into(),
                properties,
            };
            let outcome = match mode.into() {
                Mode::Kg => solve_with_kg(&task, &config),
                Mode::Nokg => synthesize_without_kg(&task, &config),
            }
            .map_err(|e| (EXIT_CORPUS, e.to_string()))?;
            print!("{}", render_solve_trace(&task, &outcome));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not usage errors.
            if err.use_stderr() {
                eprint!("{err}");
                return ExitCode::from(EXIT_USAGE);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
