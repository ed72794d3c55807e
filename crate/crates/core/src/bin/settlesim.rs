use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use settlesim::scenario::{
    compare_scenario, generate, load_scenario, run_scenario, summarize_file, Mode, Overrides, Scenario, ScenarioError,
};
use settlesim::trace::ExportFormat;

#[derive(Parser)]
#[command(name = "settlesim", version, about = "Deterministic settlement system simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and write its outputs
    Run(ScenarioArgs),
    /// Write the generated workload of a scenario
    Gen(ScenarioArgs),
    /// Compare greedy and exhaustive partitions (at most 20 elements)
    Compare(ScenarioArgs),
    /// Print summary statistics of a trace file
    Summarize {
        trace_file: PathBuf,
        #[arg(long)]
        format: Option<ExportFormat>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "t-end")]
    t_end: Option<u64>,
    /// Output root; defaults to the scenario's output_dir, then `runs`
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    /// Trace format (replaces the scenario's list)
    #[arg(long)]
    format: Option<ExportFormat>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario, ScenarioError> {
        load_scenario(&self.scenario)?.with_overrides(&Overrides {
            seed: self.seed,
            t_end: self.t_end,
            mode: self.mode,
            format: self.format,
        })
    }

    fn out_root(&self, sc: &Scenario) -> PathBuf {
        self.out
            .clone()
            .or_else(|| sc.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("runs"))
    }
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("output serializes"));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => a.load().and_then(|sc| {
            let out = run_scenario(&sc, &a.out_root(&sc))?;
            println!("{}", out.dir.display());
            Ok(())
        }),
        Command::Gen(a) => a.load().and_then(|sc| {
            println!("{}", generate(&sc, &a.out_root(&sc))?.display());
            Ok(())
        }),
        Command::Compare(a) => a.load().and_then(|sc| {
            print_json(&compare_scenario(&sc)?);
            Ok(())
        }),
        Command::Summarize { trace_file, format } => summarize_file(&trace_file, format).map(|s| print_json(&s)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("settlesim: {e}");
            ExitCode::FAILURE
        }
    }
}
