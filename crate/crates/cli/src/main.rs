use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use robosync_core::dsl::{bind_program, format_program, parse_program, BoundProgram};
use robosync_core::engine::{compute_stats, load_trace, run, truncate_trace, ExecutionLog};
use robosync_core::{parse_config, SystemConfig};

#[derive(Parser)]
#[command(name = "robosync", version, about = "Validate, inspect and replay behavior-driven robot setups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration file.
    Validate {
        #[arg(short = 'c', long = "config")]
        config: PathBuf,
    },
    /// Parse a behavior program and print its canonical form.
    Parse {
        #[arg(short = 'b', long = "behavior")]
        behavior: PathBuf,
        /// Print the syntax tree instead.
        #[arg(long)]
        dump_ast: bool,
    },
    /// Replay a sensor trace and write the execution log.
    Run {
        #[arg(short = 'c', long = "config")]
        config: PathBuf,
        #[arg(short = 'b', long = "behavior")]
        behavior: PathBuf,
        #[arg(short = 't', long = "trace")]
        trace: PathBuf,
        /// Log destination; `-` writes to standard output.
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
        /// Print summary statistics to standard error.
        #[arg(long)]
        stats: bool,
        /// Ignore trace events at or after this time.
        #[arg(long, value_name = "T_US")]
        until: Option<u64>,
    },
    /// Summarize an execution log as one JSON line.
    Stats { log: PathBuf },
}

enum Failure {
    /// Invalid input: exit 1.
    Domain(Vec<String>),
    /// Unreadable or unwritable files: exit 2.
    Io(String),
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Parse { behavior, dump_ast } => parse(&behavior, dump_ast),
        Command::Run {
            config,
            behavior,
            trace,
            out,
            stats,
            until,
        } => run_cmd(&config, &behavior, &trace, &out, stats, until),
        Command::Stats { log } => stats(&log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(lines)) => {
            let mut err = io::stderr().lock();
            for l in lines {
                let _ = writeln!(err, "{l}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_stdout(text: &str) -> Outcome {
    io::stdout()
        .lock()
        .write_all(text.as_bytes())
        .map_err(|e| Failure::Io(format!("stdout: {e}")))
}

fn load_config(path: &Path) -> Result<SystemConfig, Failure> {
    parse_config(&read(path)?).map_err(|e| {
        Failure::Domain(e.lines().into_iter().map(|l| format!("{}: {l}", path.display())).collect())
    })
}

fn validate(path: &Path) -> Outcome {
    let text = read(path)?;
    match parse_config(&text) {
        Ok(_) => write_stdout("OK\n"),
        Err(e) => {
            let mut report = e.lines().join("\n");
            report.push('\n');
            write_stdout(&report)?;
            Err(Failure::Domain(Vec::new()))
        }
    }
}

fn parse(path: &Path, dump_ast: bool) -> Outcome {
    let program = parse_program(&read(path)?).map_err(|e| Failure::Domain(vec![format!("{}:{e}", path.display())]))?;
    if dump_ast {
        write_stdout(&format!("{program:#?}\n"))
    } else {
        write_stdout(&format_program(&program))
    }
}

fn load_program(path: &Path, config: &SystemConfig) -> Result<BoundProgram, Failure> {
    let program = parse_program(&read(path)?).map_err(|e| Failure::Domain(vec![format!("{}:{e}", path.display())]))?;
    bind_program(&program, config)
        .map_err(|errs| Failure::Domain(errs.0.iter().map(|e| format!("{}:{e}", path.display())).collect()))
}

fn run_cmd(config: &Path, behavior: &Path, trace: &Path, out: &Path, stats: bool, until: Option<u64>) -> Outcome {
    let cfg = load_config(config)?;
    let program = load_program(behavior, &cfg)?;
    let mut events =
        load_trace(&read(trace)?, &cfg).map_err(|e| Failure::Domain(vec![format!("{}:{e}", trace.display())]))?;
    if let Some(t) = until {
        truncate_trace(&mut events, t);
    }
    let log = run(&cfg, &program, &events);
    let text = log.to_jsonl();
    if out == Path::new("-") {
        write_stdout(&text)?;
    } else {
        fs::write(out, &text).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    }
    if stats {
        let s = compute_stats(&log).expect("engine logs are well formed");
        eprintln!("{}", s.to_json());
    }
    Ok(())
}

fn stats(path: &Path) -> Outcome {
    let text = read(path)?;
    let log = ExecutionLog::parse(&text).map_err(|e| Failure::Domain(vec![format!("{}: {e}", path.display())]))?;
    let s = compute_stats(&log).map_err(|e| Failure::Domain(vec![format!("{}: {e}", path.display())]))?;
    write_stdout(&format!("{}\n", s.to_json()))
}
