//! `cadastre`: question answering over historical cadastre tables.
//!
//! Exit codes: 0 success, 1 run failure (aborted run, provider or SQL
//! failure), 2 configuration error.

mod commands;
mod config;
mod plot;
mod services;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use cadastre_core::python_agent::{AnswerFormat, Category};
use clap::{Parser, Subcommand};

use commands::Report;
use config::{AppConfig, CliError, CommonArgs};

#[derive(Parser)]
#[command(name = "cadastre", version, about)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Answer one question with the analysis-program pipeline
    Ask {
        question: String,
        #[arg(long)]
        category: Category,
        #[arg(long)]
        answer_type: AnswerFormat,
        #[arg(long, default_value = "q")]
        id: String,
    },
    /// Answer one browsing question with the SQL agent
    Browse { question: String },
    /// Score the SQL agent on a question file (bundled questions by default)
    EvalBrowse { questions: Option<PathBuf> },
    /// Run every question under three seeds and report agreement
    Consistency { questions: PathBuf },
    /// Show the references and vocabulary matches found for a question
    ExtractEntities { question: String },
    /// Write synthetic tables and schema configs into a directory
    GenerateFixture {
        dir: PathBuf,
        #[arg(long, default_value_t = 200)]
        rows: usize,
        #[arg(long, default_value_t = 40)]
        landmark_rows: usize,
    },
    /// Render a consistency report as an SVG bar chart
    PlotConsistency { report: PathBuf },
}

fn write_out(path: &PathBuf, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Output {
        path: path.clone(),
        source,
    })
}

fn run(cli: Cli) -> Result<Option<String>, CliError> {
    let cfg = AppConfig::load(&cli.common)?;
    let report: Report = match &cli.command {
        Command::Ask {
            question,
            category,
            answer_type,
            id,
        } => commands::ask(&cfg, id, question, *category, *answer_type)?,
        Command::Browse { question } => commands::browse(&cfg, question)?,
        Command::EvalBrowse { questions } => commands::eval_browse(&cfg, questions.as_deref())?,
        Command::Consistency { questions } => commands::consistency(&cfg, questions)?,
        Command::ExtractEntities { question } => commands::extract(&cfg, question)?,
        Command::GenerateFixture {
            dir,
            rows,
            landmark_rows,
        } => commands::generate(&cfg, dir, *rows, *landmark_rows)?,
        Command::PlotConsistency { report } => {
            let svg = commands::plot_consistency(report)?;
            match &cfg.out {
                Some(p) => write_out(p, &svg)?,
                None => print!("{svg}"),
            }
            return Ok(None);
        }
    };
    if let Some(p) = &cfg.out {
        write_out(p, &report.json)?;
    }
    print!("{}", if cfg.json { &report.json } else { &report.table });
    Ok(report.failure)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(failure)) => {
            eprintln!("error: {failure}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
