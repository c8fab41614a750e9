use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cadastre_core::consistency::{
    evaluate_browsing_suite, grouped_consistency_report, run_multi_seed, summarize_question,
    validate_seeds, ConsistencyReport, SuiteError,
};
use cadastre_core::entity_search::EntityMatch;
use cadastre_core::python_agent::{
    extract_entities, load_questions, run_pipeline, Agents, AnswerFormat, Category, PhraseColumnReference,
    PipelineConfig, QuestionSpec, RunRecord, RunStatus,
};
use cadastre_core::sql_agent::{
    answer_browsing, bundled_browse_questions, default_shots, load_browse_questions, BrowseConfig,
    Shot, SqlAgentError, SqlStore,
};
use cadastre_core::tabular::{generate_fixture, DatasetConfig, DatasetNumber, FixtureProfile, SchemaConfig};
use serde::Serialize;

use crate::config::{AppConfig, CliError};
use crate::plot;
use crate::services::{browse_dataset, load_datasets, Services};

/// What a command hands back for printing and saving.
pub struct Report {
    pub json: String,
    pub table: String,
    /// Set when the command ran but a run failed; the report is still written.
    pub failure: Option<String>,
}

impl Report {
    fn new<T: Serialize>(doc: &T, table: String) -> Self {
        Report {
            json: serde_json::to_string_pretty(doc).expect("report serializes") + "\n",
            table,
            failure: None,
        }
    }
}

fn pipeline_config(cfg: &AppConfig) -> PipelineConfig {
    PipelineConfig {
        max_retries: cfg.max_retries,
        search: cfg.search,
        timeout_s: cfg.timeout_s,
    }
}

fn shots(cfg: &AppConfig) -> Vec<Shot> {
    if cfg.shots == 3 {
        default_shots()
    } else {
        Vec::new()
    }
}

fn agents<'a>(cfg: &AppConfig, s: &'a Services) -> Agents<'a> {
    Agents {
        provider: s.provider.as_ref(),
        embedder: s.embedder.as_ref(),
        executor: s.executor.as_deref().expect("executor built for this command"),
        judge: cfg.judge.then_some(s.provider.as_ref()),
    }
}

// ---------------------------------------------------------------------------
// ask

pub fn ask(
    cfg: &AppConfig,
    id: &str,
    question: &str,
    category: Category,
    answer_type: AnswerFormat,
) -> Result<Report, CliError> {
    let datasets = load_datasets(cfg)?;
    let services = Services::build(cfg, true)?;
    let spec = QuestionSpec {
        id: id.to_string(),
        question: question.to_string(),
        category,
        answer_format: answer_type,
    };
    let record = run_pipeline(&spec, &datasets, &agents(cfg, &services), cfg.seed(), &pipeline_config(cfg));
    let mut report = Report::new(&record, render_run(question, &record));
    if record.status == RunStatus::Aborted {
        report.failure = Some(format!(
            "run aborted: {}",
            record.error.as_deref().unwrap_or("unknown error")
        ));
    }
    Ok(report)
}

fn render_references(out: &mut String, refs: &[PhraseColumnReference]) {
    let _ = writeln!(out, "references:");
    if refs.is_empty() {
        let _ = writeln!(out, "  (none)");
    }
    for r in refs {
        let _ = writeln!(out, "  - {:?} -> {} (dataset {})", r.phrase, r.column, r.dataset_number);
    }
}

fn render_entities(out: &mut String, entities: &[EntityMatch]) {
    let _ = writeln!(out, "entity matches:");
    if entities.is_empty() {
        let _ = writeln!(out, "  (none)");
    }
    for e in entities {
        let values: Vec<String> = e
            .matches
            .iter()
            .map(|m| format!("{} ({:.2})", m.value, m.score))
            .collect();
        let tier = serde_json::to_value(e.tier).expect("tier serializes");
        let _ = writeln!(
            out,
            "  - {:?} in {} (dataset {}), {}: {}",
            e.phrase,
            e.column,
            e.dataset_number,
            tier.as_str().unwrap_or_default(),
            values.join(", ")
        );
    }
}

pub fn render_run(question: &str, r: &RunRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "question: {question}");
    let _ = writeln!(out, "seed: {}", r.seed);
    let _ = writeln!(out, "status: {} (debug rounds {})", r.status, r.attempts_used);
    if let Some(a) = &r.answer {
        let _ = writeln!(out, "answer: {a}");
    }
    if let Some(s) = &r.info_score {
        let _ = writeln!(
            out,
            "info score: {} rows of {} (coverage {:.3}{})",
            s.rows_used,
            s.dataset_size,
            s.coverage_ratio,
            if s.exceeds_dataset { ", exceeds dataset" } else { "" }
        );
    }
    if let Some(e) = &r.error {
        let _ = writeln!(out, "error: {e}");
    }
    render_references(&mut out, &r.references);
    render_entities(&mut out, &r.entities);
    if let Some(p) = &r.plan {
        let _ = writeln!(out, "plan:\n{}", indent(p.steps.trim()));
    }
    if let Some(p) = &r.program {
        let _ = writeln!(out, "code (attempt {}):\n{}", p.attempt, indent(p.source.trim()));
    }
    out
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("    {l}")).collect::<Vec<_>>().join("\n")
}

// ---------------------------------------------------------------------------
// extract-entities

#[derive(Serialize)]
struct EntityReport<'a> {
    question: &'a str,
    references: Vec<PhraseColumnReference>,
    entities: Vec<EntityMatch>,
}

pub fn extract(cfg: &AppConfig, question: &str) -> Result<Report, CliError> {
    let datasets = load_datasets(cfg)?;
    let services = Services::build(cfg, false)?;
    let (references, entities) = extract_entities(
        question,
        &datasets,
        services.provider.as_ref(),
        services.embedder.as_ref(),
        &cfg.search,
        cfg.seed(),
    )
    .map_err(|e| CliError::Run(format!("entity extraction failed: {e}")))?;
    let mut table = format!("question: {question}\n");
    render_references(&mut table, &references);
    render_entities(&mut table, &entities);
    Ok(Report::new(
        &EntityReport {
            question,
            references,
            entities,
        },
        table,
    ))
}

// ---------------------------------------------------------------------------
// browse / eval-browse

fn browse_config(cfg: &AppConfig) -> BrowseConfig {
    BrowseConfig {
        k: cfg.k,
        seed: cfg.seed(),
    }
}

pub fn browse(cfg: &AppConfig, question: &str) -> Result<Report, CliError> {
    let dataset = browse_dataset(cfg)?;
    let services = Services::build(cfg, false)?;
    let store = SqlStore::open(&dataset).map_err(|e| CliError::Run(e.to_string()))?;
    let outcome = answer_browsing(
        question,
        &store,
        dataset.schema(),
        &shots(cfg),
        browse_config(cfg),
        services.provider.as_ref(),
    )
    .map_err(|e| match e {
        SqlAgentError::BadShotCount(_) => CliError::config(e.to_string()),
        other => CliError::Run(other.to_string()),
    })?;

    let mut table = String::new();
    let _ = writeln!(table, "question: {question}");
    let _ = writeln!(table, "sql: {}", outcome.sql);
    let _ = writeln!(table, "votes:");
    for g in &outcome.tally.groups {
        let members: Vec<String> = g.members.iter().map(|m| m.to_string()).collect();
        let what = match (&g.result, &g.error) {
            (_, Some(e)) => format!("error: {e}"),
            (Some(r), None) => format!("result: {}", r.replace('\n', " | ")),
            (None, None) => String::new(),
        };
        let _ = writeln!(table, "  candidates [{}] {}", members.join(", "), what);
    }
    let _ = writeln!(table, "result ({} rows):", outcome.result.rows.len());
    let _ = writeln!(table, "{}", indent(&outcome.canonical.render_text()));
    Ok(Report::new(&outcome, table))
}

pub fn eval_browse(cfg: &AppConfig, questions: Option<&Path>) -> Result<Report, CliError> {
    let qs = match questions {
        Some(p) => load_browse_questions(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?,
        None => bundled_browse_questions(),
    };
    let dataset = browse_dataset(cfg)?;
    let services = Services::build(cfg, false)?;
    let report = evaluate_browsing_suite(
        &qs,
        &dataset,
        &shots(cfg),
        browse_config(cfg),
        services.provider.as_ref(),
    )
    .map_err(|e| match e {
        SuiteError::MissingGroundTruth(_) | SuiteError::GroundTruth { .. } => CliError::config(e.to_string()),
        other => CliError::Run(other.to_string()),
    })?;
    Ok(Report::new(&report, report.render_table()))
}

// ---------------------------------------------------------------------------
// consistency

pub fn consistency(cfg: &AppConfig, questions: &Path) -> Result<Report, CliError> {
    let seeds = validate_seeds(&cfg.seeds).map_err(|e| CliError::config(e.to_string()))?;
    let specs = load_questions(questions).map_err(|e| CliError::config(format!("{}: {e}", questions.display())))?;
    let datasets = load_datasets(cfg)?;
    let services = Services::build(cfg, true)?;
    let agents = agents(cfg, &services);
    let pcfg = pipeline_config(cfg);

    let mut summaries = Vec::new();
    let mut aborted = Vec::new();
    for spec in &specs {
        let records = run_multi_seed(spec, &seeds, |s, seed| run_pipeline(s, &datasets, &agents, seed, &pcfg))
            .map_err(|e| CliError::config(e.to_string()))?;
        for r in records.iter().filter(|r| r.status == RunStatus::Aborted) {
            log::error!(
                "{} seed {} aborted: {}",
                r.question_id,
                r.seed,
                r.error.as_deref().unwrap_or("unknown error")
            );
            aborted.push(format!("{}@{}", r.question_id, r.seed));
        }
        summaries.push(summarize_question(spec, &records));
    }
    let report: ConsistencyReport = grouped_consistency_report(seeds, summaries);
    let mut out = Report::new(&report, report.render_table());
    if !aborted.is_empty() {
        out.failure = Some(format!("aborted runs: {}", aborted.join(", ")));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// generate-fixture

#[derive(Serialize)]
struct FixtureReport {
    dir: PathBuf,
    files: Vec<String>,
}

/// Writes the four synthetic tables plus two schema configs: one for the
/// SQL agent (catastici as dataset 1) and one for the analysis pipeline.
pub fn generate(cfg: &AppConfig, dir: &Path, rows: usize, landmark_rows: usize) -> Result<Report, CliError> {
    if rows == 0 || landmark_rows == 0 {
        return Err(CliError::config("row counts must be positive"));
    }
    fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.to_path_buf(),
        source,
    })?;
    let seed = cfg.seed();
    let tables = [
        ("catastici.csv", generate_fixture(seed, rows, FixtureProfile::Catastici)),
        (
            "buildings_1740.csv",
            generate_fixture(seed + 1, rows, FixtureProfile::Sommarioni)
                .relabel(DatasetNumber::FIRST, "Buildings 1740"),
        ),
        ("buildings_1808.csv", generate_fixture(seed + 2, rows, FixtureProfile::Sommarioni)),
        ("landmarks.csv", generate_fixture(seed + 3, landmark_rows, FixtureProfile::Landmarks)),
    ];
    let write_err = |path: PathBuf| move |e: std::io::Error| CliError::Output { path, source: e };
    let mut files = Vec::new();
    for (name, ds) in &tables {
        let path = dir.join(name);
        ds.write_csv(&path)
            .map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
        files.push(name.to_string());
    }
    let config_of = |i: usize| {
        let (name, ds) = &tables[i];
        DatasetConfig::from_schema(ds.number(), ds.display_name(), ds.schema(), Some(name.to_string()))
    };
    let browse = SchemaConfig {
        datasets: vec![config_of(0)],
    };
    let analysis = SchemaConfig {
        datasets: vec![config_of(1), config_of(2), config_of(3)],
    };
    for (name, schema) in [("browse_schema.toml", browse), ("schema.toml", analysis)] {
        let path = dir.join(name);
        fs::write(&path, schema.to_toml_string()).map_err(write_err(path.clone()))?;
        files.push(name.to_string());
    }
    let table = files.iter().map(|f| format!("wrote {}\n", dir.join(f).display())).collect();
    Ok(Report::new(
        &FixtureReport {
            dir: dir.to_path_buf(),
            files,
        },
        table,
    ))
}

// ---------------------------------------------------------------------------
// plot-consistency

pub fn plot_consistency(report_path: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(report_path)
        .map_err(|e| CliError::config(format!("{}: {e}", report_path.display())))?;
    let report: ConsistencyReport = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{} is not a consistency report: {e}", report_path.display())))?;
    Ok(plot::render_svg(&report))
}
