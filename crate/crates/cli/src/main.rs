use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evoforge::evolve::{analyze_diversity, build_report, rescore_run, resume, run_evolution_with, verify_run, EvolveError, LoopConfig, RunControl, RunStatus};
use evoforge::image::{execute, execute_all, load_png, save_png, CodecError, ExecAllError, ExecError, ExecLimits, ImageStore, StoreError};
use evoforge::lang::{parse_program, render_param_set, Program};
use evoforge::synth::{synth_pair, SynthError};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "evoforge", version, about = "Execution-verified self-play engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one argument set of a program on an image.
    Exec {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        args_index: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the Type-0/Type-1 question pair for a program and image.
    Synth {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a run's report; with --recompute, re-derive every logged reward.
    Score {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        recompute: bool,
    },
    /// Start a run from a JSON config, or continue one with --resume.
    Evolve {
        #[arg(long, required_unless_present = "resume")]
        config: Option<PathBuf>,
        /// Run directory of an interrupted run.
        #[arg(long, conflicts_with = "config")]
        resume: Option<PathBuf>,
        /// Stop cleanly after this many committed steps.
        #[arg(long)]
        stop_after_steps: Option<usize>,
    },
    /// Per-iteration diversity and answer-key re-verification.
    Analyze {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Codec { path: PathBuf, source: CodecError },
    #[error("args index {index} out of range, program has {n} argument sets")]
    ArgsIndex { index: usize, n: usize },
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    ExecAll(#[from] ExecAllError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error("{0}")]
    Check(String),
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
    }
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.into(), source })
}

fn load_program(path: &Path) -> Result<Program, CliError> {
    let text = String::from_utf8_lossy(&read(path)?).into_owned();
    parse_program(&text).into_result().map_err(|errs| CliError::Parse {
        path: path.into(),
        message: errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "),
    })
}

fn load_image(path: &Path) -> Result<evoforge::image::RasterImage, CliError> {
    load_png(&read(path)?).map_err(|source| CliError::Codec { path: path.into(), source })
}

fn print(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Exec { program, image, args_index, out } => {
            let p = load_program(&program)?;
            let set = p.arg_sets.get(args_index).ok_or(CliError::ArgsIndex { index: args_index, n: p.n() })?;
            let img = execute(&p, set, &load_image(&image)?, &ExecLimits::default())?;
            let path = out.join(format!("output_{args_index}.png"));
            write(&path, &save_png(&img).map_err(|source| CliError::Codec { path: path.clone(), source })?)?;
            print(&json!({
                "output": path,
                "args": render_param_set(set),
                "width": img.width(),
                "height": img.height(),
                "digest": evoforge::image::content_digest(&img),
            }));
        }
        Command::Synth { program, image, seed, out } => {
            let p = load_program(&program)?;
            let original = load_image(&image)?;
            let edited = execute_all(&p, &original, &ExecLimits::default())?;
            let store = ImageStore::open(out.join("images"))?;
            store.put(&original)?;
            for img in &edited {
                store.put(img)?;
            }
            let (t0, t1) = synth_pair(&p, &original, &edited, seed)?;
            let lines: Vec<String> = [&t0, &t1].iter().map(|t| serde_json::to_string(t).expect("task serializes")).collect();
            write(&out.join("tasks.jsonl"), format!("{}\n", lines.join("\n")).as_bytes())?;
            print(&json!({
                "tasks": out.join("tasks.jsonl"),
                "images": store.root(),
                "type0_answer": t0.correct_letter().to_string(),
                "type1_answer": t1.correct_letter().to_string(),
                "probe_args": t0.probe_args,
            }));
        }
        Command::Score { run, recompute } => {
            if recompute {
                let r = rescore_run(&run)?;
                print(&json!({"rollouts": r.rollouts, "mismatches": r.mismatches}));
                if !r.ok() {
                    return Err(CliError::Check(format!("{} recomputed values disagree with the logs", r.mismatches.len())));
                }
            } else {
                print(&serde_json::to_value(build_report(&run)?).expect("report serializes"));
            }
        }
        Command::Evolve { config, resume: from, stop_after_steps } => {
            let control = RunControl { stop_after_steps };
            let status = match (config, from) {
                (_, Some(dir)) => resume(&dir, &control)?,
                (Some(path), None) => run_evolution_with(&LoopConfig::load(&path)?, &control)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            match status {
                RunStatus::Completed(report) => print(&serde_json::to_value(report).expect("report serializes")),
                RunStatus::Stopped { iteration, step } => print(&json!({"stopped": {"iteration": iteration, "step": step}})),
            }
        }
        Command::Analyze { run } => {
            let diversity = analyze_diversity(&run)?;
            let v = verify_run(&run)?;
            print(&json!({
                "mean_pairwise_bleu_distance": diversity,
                "verified": v.checked,
                "mismatches": v.mismatches,
            }));
            if !v.ok() {
                return Err(CliError::Check(format!("{} bank questions failed re-verification", v.mismatches.len())));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
