use std::collections::BTreeMap;

use thiserror::Error;

use crate::consistency::extract_information_score;
use crate::entity_search::{search_entity, EntityMatch, SearchConfig, SearchError};
use crate::llm::{
    self, extract_code_block, parse_boolean_verdict, parse_reference_list, CompletionProvider,
    CompletionRequest, Embedder, LlmError, ParseError, RoleTag,
};
use crate::tabular::{Dataset, DatasetNumber, TabularError};

use super::executor::{ExecStatus, ExecutionRequest, Executor, ExecutorError};
use super::prompts;
use super::{Answer, AnswerFormat, GeneratedProgram, PhraseColumnReference, Plan, QuestionSpec, RunRecord, RunStatus};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error("executor: {0}")]
    Executor(#[from] ExecutorError),
    #[error("entity search: {0}")]
    Search(#[from] SearchError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("planner returned an empty plan")]
    EmptyPlan,
    #[error("debug requested at attempt {attempt} with max_retries {max_retries}")]
    RetryBudgetExceeded { attempt: u32, max_retries: u32 },
}

impl PipelineError {
    /// Failures of external services end the run as aborted rather than
    /// unanswerable.
    fn aborts(&self) -> bool {
        matches!(
            self,
            PipelineError::Provider(_) | PipelineError::Executor(_) | PipelineError::Search(SearchError::Embedder(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub max_retries: u32,
    pub search: SearchConfig,
    pub timeout_s: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_retries: 3,
            search: SearchConfig::default(),
            timeout_s: 60.0,
        }
    }
}

/// External services a run talks to. Without a judge no information score
/// is attached.
#[derive(Clone, Copy)]
pub struct Agents<'a> {
    pub provider: &'a dyn CompletionProvider,
    pub embedder: &'a dyn Embedder,
    pub executor: &'a dyn Executor,
    pub judge: Option<&'a dyn CompletionProvider>,
}

fn ask(
    provider: &dyn CompletionProvider,
    role: RoleTag,
    system: &str,
    user: String,
    seed: u64,
) -> Result<String, LlmError> {
    llm::complete(provider, &CompletionRequest::new(role, system, user, seed))
}

fn reference_is_valid(r: &PhraseColumnReference, datasets: &[Dataset]) -> bool {
    datasets
        .iter()
        .any(|d| d.number() == r.dataset_number && d.schema().column(&r.column).is_some())
}

pub fn extract_references(
    question: &str,
    datasets: &[Dataset],
    provider: &dyn CompletionProvider,
    seed: u64,
) -> Result<Vec<PhraseColumnReference>, LlmError> {
    let system = prompts::analysis_system_prompt(datasets);
    let user = prompts::reference_prompt(question);
    let mut parsed = None;
    for attempt in 0..2 {
        let reply = ask(provider, RoleTag::ColumnExtractor, &system, user.clone(), seed)?;
        match parse_reference_list(&reply) {
            Ok(refs) => {
                parsed = Some(refs);
                break;
            }
            Err(e) => log::warn!("reference extraction attempt {}: {e}", attempt + 1),
        }
    }
    let Some(refs) = parsed else {
        log::warn!("no usable reference list; continuing without references");
        return Ok(Vec::new());
    };
    Ok(refs
        .into_iter()
        .filter(|r| {
            let ok = reference_is_valid(r, datasets);
            if !ok {
                log::warn!(
                    "dropping reference ({:?}, {:?}, {}): no such column in that dataset",
                    r.phrase,
                    r.column,
                    r.dataset_number
                );
            }
            ok
        })
        .collect())
}

pub fn hypothesize_specific_value(
    reference: &PhraseColumnReference,
    datasets: &[Dataset],
    provider: &dyn CompletionProvider,
    seed: u64,
) -> Result<bool, LlmError> {
    let system = prompts::analysis_system_prompt(datasets);
    let user = prompts::mapping_prompt(reference);
    for attempt in 0..2 {
        let reply = ask(provider, RoleTag::RowExtractor, &system, user.clone(), seed)?;
        match parse_boolean_verdict(&reply) {
            Ok(v) => return Ok(v),
            Err(e) => log::warn!("verdict for {:?} attempt {}: {e}", reference.phrase, attempt + 1),
        }
    }
    log::warn!("treating {:?} as a general column reference", reference.phrase);
    Ok(false)
}

/// References plus vocabulary matches for those that name specific values.
pub fn extract_entities(
    question: &str,
    datasets: &[Dataset],
    provider: &dyn CompletionProvider,
    embedder: &dyn Embedder,
    search: &SearchConfig,
    seed: u64,
) -> Result<(Vec<PhraseColumnReference>, Vec<EntityMatch>), PipelineError> {
    let references = extract_references(question, datasets, provider, seed)?;
    let mut entities = Vec::new();
    for r in &references {
        if !hypothesize_specific_value(r, datasets, provider, seed)? {
            continue;
        }
        let dataset = datasets
            .iter()
            .find(|d| d.number() == r.dataset_number)
            .expect("reference validated against loaded datasets");
        match search_entity(&r.phrase, dataset, &r.column, search, embedder) {
            Ok(m) if !m.matches.is_empty() => entities.push(m),
            Ok(_) => log::info!("no vocabulary match for {:?} in {}", r.phrase, r.column),
            Err(SearchError::Tabular(TabularError::NotTextual(c))) => {
                log::info!("skipping value search in non-text column {c}")
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((references, entities))
}

#[allow(clippy::too_many_arguments)]
pub fn make_plan(
    question: &str,
    entities: &[EntityMatch],
    references: &[PhraseColumnReference],
    format: AnswerFormat,
    datasets: &[Dataset],
    provider: &dyn CompletionProvider,
    seed: u64,
) -> Result<Plan, PipelineError> {
    let reply = ask(
        provider,
        RoleTag::Planner,
        &prompts::analysis_system_prompt(datasets),
        prompts::plan_prompt(question, entities, references, format),
        seed,
    )?;
    if reply.trim().is_empty() {
        return Err(PipelineError::EmptyPlan);
    }
    Ok(Plan { steps: reply })
}

fn code_with_one_reask(
    provider: &dyn CompletionProvider,
    role: RoleTag,
    system: &str,
    user: String,
    seed: u64,
) -> Result<String, PipelineError> {
    for attempt in 0..2 {
        let reply = ask(provider, role, system, user.clone(), seed)?;
        match extract_code_block(&reply) {
            Ok(code) => return Ok(code),
            Err(e) => log::warn!("{role} attempt {}: {e}", attempt + 1),
        }
    }
    Err(ParseError::NoCodeBlock.into())
}

pub fn generate_code(
    question: &str,
    plan: &Plan,
    format: AnswerFormat,
    datasets: &[Dataset],
    provider: &dyn CompletionProvider,
    seed: u64,
) -> Result<GeneratedProgram, PipelineError> {
    if plan.steps.trim().is_empty() {
        return Err(PipelineError::EmptyPlan);
    }
    let source = code_with_one_reask(
        provider,
        RoleTag::Coder,
        &prompts::python_system_prompt(datasets),
        prompts::code_prompt(question, plan, format),
        seed,
    )?;
    Ok(GeneratedProgram { source, attempt: 0 })
}

/// Everything the debugger sees about the failing program.
#[derive(Debug, Clone, Copy)]
pub struct DebugInput<'a> {
    pub question: &'a str,
    pub entities: &'a [EntityMatch],
    pub references: &'a [PhraseColumnReference],
    pub plan: &'a Plan,
    pub program: &'a GeneratedProgram,
    pub error_message: &'a str,
    pub format: AnswerFormat,
}

/// One debug round. The caller must not ask for more rounds than the budget
/// allows.
pub fn debug_code(
    input: DebugInput<'_>,
    max_retries: u32,
    datasets: &[Dataset],
    provider: &dyn CompletionProvider,
    seed: u64,
) -> Result<GeneratedProgram, PipelineError> {
    if input.program.attempt >= max_retries {
        return Err(PipelineError::RetryBudgetExceeded {
            attempt: input.program.attempt,
            max_retries,
        });
    }
    let source = code_with_one_reask(
        provider,
        RoleTag::Debugger,
        &prompts::python_system_prompt(datasets),
        prompts::debug_prompt(
            input.question,
            input.entities,
            input.references,
            input.plan,
            input.program,
            input.error_message,
            input.format,
        ),
        seed,
    )?;
    Ok(GeneratedProgram {
        source,
        attempt: input.program.attempt + 1,
    })
}

fn tail(text: &str, max_chars: usize) -> &str {
    let n = text.chars().count();
    if n <= max_chars {
        return text;
    }
    let start = text.char_indices().nth(n - max_chars).map_or(0, |(i, _)| i);
    &text[start..]
}

fn primary_dataset_size(references: &[PhraseColumnReference], datasets: &[Dataset]) -> usize {
    let number = references.first().map_or(DatasetNumber::FIRST, |r| r.dataset_number);
    datasets
        .iter()
        .find(|d| d.number() == number)
        .or_else(|| datasets.first())
        .map_or(1, Dataset::row_count)
}

/// Full question-to-answer run for one seed. Never panics on model
/// behaviour: every failure ends in an unanswerable or aborted record.
pub fn run_pipeline(
    spec: &QuestionSpec,
    datasets: &[Dataset],
    agents: &Agents<'_>,
    seed: u64,
    config: &PipelineConfig,
) -> RunRecord {
    let mut record = RunRecord::empty(&spec.id, seed);
    match drive(spec, datasets, agents, seed, config, &mut record) {
        Ok(()) => {}
        Err(e) => {
            record.status = if e.aborts() {
                RunStatus::Aborted
            } else {
                RunStatus::Unanswerable
            };
            record.answer = None;
            record.error = Some(e.to_string());
        }
    }
    record
}

fn drive(
    spec: &QuestionSpec,
    datasets: &[Dataset],
    agents: &Agents<'_>,
    seed: u64,
    config: &PipelineConfig,
    record: &mut RunRecord,
) -> Result<(), PipelineError> {
    let provider = agents.provider;
    let format = spec.answer_format;
    let (references, entities) =
        extract_entities(&spec.question, datasets, provider, agents.embedder, &config.search, seed)?;
    record.references = references;
    record.entities = entities;
    let plan = make_plan(&spec.question, &record.entities, &record.references, format, datasets, provider, seed)?;
    record.plan = Some(plan.clone());

    let mut program = generate_code(&spec.question, &plan, format, datasets, provider, seed)?;
    record.program = Some(program.clone());
    let dataset_paths: BTreeMap<DatasetNumber, std::path::PathBuf> = datasets
        .iter()
        .filter_map(|d| d.source_path().map(|p| (d.number(), p.to_path_buf())))
        .collect();
    let mut format_round_used = false;

    loop {
        let outcome = agents.executor.execute(&ExecutionRequest {
            source: program.source.clone(),
            dataset_paths: dataset_paths.clone(),
            timeout_s: config.timeout_s,
            seed,
        })?;
        let error_message = match outcome.status {
            ExecStatus::Ok => {
                let parsed = outcome
                    .final_answer
                    .as_deref()
                    .map(|raw| Answer::parse(raw, format));
                match parsed {
                    Some(Ok(answer)) => {
                        record.status = RunStatus::Answered;
                        if let Some(judge) = agents.judge {
                            record.info_score = extract_information_score(
                                &program.source,
                                &answer.to_string(),
                                primary_dataset_size(&record.references, datasets),
                                judge,
                                seed,
                            )?;
                        }
                        record.answer = Some(answer);
                        return Ok(());
                    }
                    _ if format_round_used || program.attempt >= config.max_retries => {
                        record.status = RunStatus::Unanswerable;
                        record.error = Some(format!(
                            "final output is not a {} answer: {:?}",
                            format.prompt_token(),
                            tail(outcome.stdout.trim(), 200)
                        ));
                        return Ok(());
                    }
                    _ => {
                        format_round_used = true;
                        format!(
                            "The code ran, but its output does not end with a final answer of the form [[final_answer]] in the format of {}. Output was:\n{}",
                            format.prompt_token(),
                            tail(&outcome.stdout, 2000)
                        )
                    }
                }
            }
            ExecStatus::Error | ExecStatus::Timeout if program.attempt >= config.max_retries => {
                record.status = RunStatus::Unanswerable;
                record.error = Some(format!(
                    "retry budget exhausted; last execution {}",
                    if outcome.status == ExecStatus::Timeout { "timed out" } else { "failed" }
                ));
                return Ok(());
            }
            ExecStatus::Error => {
                let stderr = if outcome.stderr.trim().is_empty() { &outcome.stdout } else { &outcome.stderr };
                tail(stderr, 4000).to_string()
            }
            ExecStatus::Timeout => format!(
                "Execution timed out after {} seconds.\n{}",
                config.timeout_s,
                tail(&outcome.stderr, 2000)
            ),
        };
        program = debug_code(
            DebugInput {
                question: &spec.question,
                entities: &record.entities,
                references: &record.references,
                plan: &plan,
                program: &program,
                error_message: &error_message,
                format,
            },
            config.max_retries,
            datasets,
            provider,
            seed,
        )?;
        record.attempts_used = program.attempt;
        record.program = Some(program.clone());
    }
}
