//! Prompt templates for the five agent roles. Texts follow the original
//! system's wording; dataset descriptions are generated from the loaded
//! schemas so the variable names agree with the sandbox.

use crate::entity_search::EntityMatch;
use crate::llm::format_reference_list;
use crate::tabular::{Dataset, DatasetNumber};

use super::{AnswerFormat, GeneratedProgram, PhraseColumnReference, Plan};

/// Name of the DataFrame the sandbox binds for a dataset number.
pub fn dataframe_variable(number: DatasetNumber) -> &'static str {
    match number.get() {
        1 => "df_1740",
        2 => "df_1808",
        _ => "df_landmarks",
    }
}

const DATASETS_INTRO: &str = "You are working with 3 datasets, one detailing buildings in Venice from 1740, another one detailing buildings in Venice from 1808 and the last one listing landmarks such as churches and squares in Venice. In the Buildings datasets (1st and 2nd datasets), each row refers to a separate building, while in the Landmarks dataset (3rd dataset), each row refers to a separate landmark.";

pub fn dataset_description(datasets: &[Dataset]) -> String {
    let mut sorted: Vec<&Dataset> = datasets.iter().collect();
    sorted.sort_by_key(|d| d.number());
    let mut out = String::new();
    for d in sorted {
        out.push_str(&format!(
            "\nDataset {} ({}) is loaded as the pandas DataFrame `{}` with columns:\n",
            d.number(),
            d.display_name(),
            dataframe_variable(d.number())
        ));
        for c in &d.schema().columns {
            out.push_str(&format!("- {} ({}): {}\n", c.name, c.kind, c.description));
        }
    }
    out
}

/// System prompt of the extractor and planner roles.
pub fn analysis_system_prompt(datasets: &[Dataset]) -> String {
    format!("You are an expert historian. {DATASETS_INTRO}\n{}", dataset_description(datasets))
}

/// System prompt of the coder and debugger roles.
pub fn python_system_prompt(datasets: &[Dataset]) -> String {
    format!(
        "You are a highly skilled Python developer with expertise in data analysis. {DATASETS_INTRO}\n{}",
        dataset_description(datasets)
    )
}

pub fn reference_prompt(question: &str) -> String {
    format!(
        r#"Given a question, you need to match the phrases in the question with the columns in the dataset if applicable. Only focus on the phrases that refer to one or more columns in any of the above datasets. If none of the phrases refer to a specific dataset column, return an empty list.
If question only asks about 1740, phrases should be matched to column(s) in dataset 1. If question only asks about 1808, phrases should be matched to column(s) in dataset 2. If the question asks about both datasets, phrases can be matched to column(s) in both datasets 1 and 2.
Your output should be in the format [(detected_phrase_1, column_name_1, dataset_number_1), (detected_phrase_2, column_name_2, dataset_number_2), ...]
Note that the same phrase could correspond to a column that exist in more than 1 dataset.
Note that if a phrase refers to more than one column in a single dataset, consider each column name separately.
Note that every row is about a separate building. When the questions is about a building / buildings, it is referring to the whole dataset, and not a specific column.

For example:
If the question is "Which squares are surrounded by the most diverse set of building functions from 1740?", output [("squares", "landmark_type", 3), ("building functions", "building_functions", 1)], since "squares" corresponds to the "landmark_type" column in the landmarks dataset (3rd dataset), and the information about "building functions" can be found in the column "building_functions", and the question is asking about the time 1740, thus dataset 1.

Examples:

Question: "What is the average distance to the nearest square?"
Output: [("square", "landmark_type", 3)]

Question: "How many houses are located near Santa Maria della Salute in 1740?"
Output: [("houses", "building_functions", 1), ("Santa Maria della Salute", "landmark_name", 3)]

Question: "What is the average rent price of workshops in San Polo in 1808?"
Output: [("rent price", "rent_price", 2), ("workshops", "building_functions", 2), ("San Polo", "district", 2)]

Question: "How many families present in Venice in 1740 still exist in the 1808?"
Output: [("families", "owner_family_name", 1), ("families", "owner_family_name", 2)]

Question: "How many people live in Venice in 1808?"
Output: [("people", "owner_first_name", 2), ("people", "owner_family_name", 2)]

Please match the relevant phrases with their corresponding column names for the following question and respond, in a natural language, in the format [(detected_phrase, column_name, dataset_number)].
Question: {question}

Let's think step by step:
"#
    )
}

pub fn mapping_prompt(reference: &PhraseColumnReference) -> String {
    let mapping = format_reference_list(std::slice::from_ref(reference));
    format!(
        r#"You are a given a mapping between a phrase and a column of a dataset. Your task is to hypothesise if the given phrase could correspond to a specific value in the matching column depending on the definition and data type of what should be given in the columns.
Respond [[True]] if you think the phrase may correspond to one or more specific values in the corresponding column.
Respond [[False]] if you think the phrase is just referring to the corresponding column in general, not possibly not to any specific value.
Note that Dataset is referred to with its number.

For example:
If the matching is ("squares", "landmark_type", 3), respond [[True]] as "squares" is a specific value that should be found in the column "landmark_type".
If the matching is ("building functions", "building_functions", 1), respond [[False]], as "building functions" just refers to "building_functions" column in general, and is not a specific value we are looking for.
Give your answer between [[]], for example [[True]] or [[False]]

Examples:

Mapping: [("square", "landmark_type", 3)]
Output: [[True]]

Mapping: [("Santa Maria della Salute", "landmark_name", 3)]
Output: [[True]]

Mapping: [("workshops", "building_functions", 2)]
Output: [[True]]

Mapping: [("families", "owner_family_name", 1)]
Output: [[False]]

Mapping: [("near houses", "building_functions", 2)]
Output: [[True]]

Mapping: [("people", "owner_family_name", 2)]
Output: [[False]]

Please hypothesise, in a natural language, if the given phrase in Mapping may refer to a specific value in the corresponding column. Respond with [[True]] or [[False]].
Mapping: {mapping}

Output:
"#
    )
}

const NONE: &str = "(none)";

/// One line per match, listing the matched vocabulary values literally.
pub fn render_entities(entities: &[EntityMatch]) -> String {
    if entities.is_empty() {
        return NONE.to_string();
    }
    entities
        .iter()
        .map(|e| {
            let values: Vec<String> = e.values().map(|v| format!("'{}'", v.replace('\'', "\\'"))).collect();
            format!(
                "- \"{}\" matches column \"{}\" in dataset {} with exact matches in the dataset: [{}]",
                e.phrase,
                e.column,
                e.dataset_number,
                values.join(", ")
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_references(references: &[PhraseColumnReference]) -> String {
    if references.is_empty() {
        NONE.to_string()
    } else {
        format_reference_list(references)
    }
}

pub fn plan_prompt(
    question: &str,
    entities: &[EntityMatch],
    references: &[PhraseColumnReference],
    format: AnswerFormat,
) -> String {
    format!(
        r#"Instruction:
First understand the problem, and provide a step-by-step data analysis plan only in natural language to answers the question using the provided datasets. Be as clear and explicit as possible in your instructions.

You are given:
- Question
- Extracted Information of Entities: This contains the dataset and the column that the entity matches to, and the corresponding exact matches found in the dataset
- References to Corresponding Dataset and Column: This contains phrases found in the question linked to the specific dataset and column
- Expected Answer Format: yes/no or numerical or a single textual entity name

Requirements:
- The final answer should be in the format of {token}.
- Use the provided entity information and datasets
- If any of the entity information or references is meaningless, ignore it.

Question:
{question}

Extracted Information of Entities:
{entities}

References to Corresponding Dataset and Column:
{references}

Expected Answer Format:
{token}

Step by Step Plan in Natural Language:
"#,
        token = format.prompt_token(),
        entities = render_entities(entities),
        references = render_references(references),
    )
}

pub fn code_prompt(question: &str, plan: &Plan, format: AnswerFormat) -> String {
    format!(
        r#"Instruction:
Your task is to generate Python code based on the provided detailed plan to answer the given question using the provided datasets.

Requirements:
- Use the necessary libraries for data analysis in Python (e.g., pandas, numpy).
- The code should be well-structured, complete, and intended to be executed as a whole.
- Write your code in the most computationally efficient way
- Include all code in a single code block.
- Give your final answer in the format of {token}.
- End your code by printing only the final answer strictly following this format: "[[final_answer]]", for example: print(f"The answer is: [[{{final_answer}}]]")
- Never use `exit()` function.

Question:
{question}

Step-by-Step Plan:
{plan}

Python Code:
"#,
        token = format.prompt_token(),
        plan = plan.steps.trim(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn debug_prompt(
    question: &str,
    entities: &[EntityMatch],
    references: &[PhraseColumnReference],
    plan: &Plan,
    program: &GeneratedProgram,
    error_message: &str,
    format: AnswerFormat,
) -> String {
    format!(
        r#"Instruction:
Debug and rewrite the provided Python code. The code follows the given plan to answer the given question using the given datasets, but it contains an error. Based on the error message, could you correct the code and provide a revised version?

You are given:
- Question
- Extracted Information of Entities: This contains the dataset and the column that the entity matches to, and the corresponding exact matches found in the dataset
- References to Corresponding Dataset and Column: This contains phrases found in the question linked to the specific dataset and column
- A detailed plan to write Python code that answers the question
- Incorrect python code that raises an error
- Corresponding error message

Requirements:
- If any of the entity information or references is meaningless, ignore it.
- Use the necessary libraries for data analysis in Python (e.g., pandas, numpy).
- The code should be well-structured, complete and intended to be executed as a whole.
- Write your code in the most computationally efficient way
- All of your code should be included in a single code block.
- Give your final answer in the format of {token}.
- End your code by printing only the final answer strictly following this format: "[[final_answer]]", for example: print(f"The answer is: [[{{final_answer}}]]")
- Never use `exit()` function.

Question:
{question}

Extracted Information of Entities:
{entities}

References to Corresponding Dataset and Column:
{references}

Step by Step Plan:
{plan}

Incorrect Python Code:
```python
{code}
```

Error Message:
{error_message}

Corrected Python Code:
"#,
        token = format.prompt_token(),
        entities = render_entities(entities),
        references = render_references(references),
        plan = plan.steps.trim(),
        code = program.source,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity_search::{MatchTier, ScoredValue};
    use crate::tabular::{generate_fixture, FixtureProfile};

    #[test]
    fn description_names_dataframes() {
        let ds = vec![
            generate_fixture(1, 5, FixtureProfile::Landmarks),
            generate_fixture(1, 5, FixtureProfile::Sommarioni).relabel(DatasetNumber::FIRST, "Buildings 1740"),
        ];
        let text = python_system_prompt(&ds);
        assert!(text.find("df_1740").unwrap() < text.find("df_landmarks").unwrap());
        assert!(text.contains("- building_functions (text):"));
        assert!(!text.contains("df_1808"));
    }

    #[test]
    fn plan_prompt_placeholders() {
        let p = plan_prompt("Q?", &[], &[], AnswerFormat::YesNo);
        assert!(p.contains("Extracted Information of Entities:\n(none)\n"));
        assert!(p.contains("References to Corresponding Dataset and Column:\n(none)\n"));
        assert!(p.contains("Expected Answer Format:\nyes/no\n"));
        assert!(p.contains("in the format of yes/no."));
    }

    #[test]
    fn entities_rendered_literally() {
        let e = EntityMatch {
            phrase: "lawyers".into(),
            dataset_number: DatasetNumber::FIRST,
            column: "profession".into(),
            matches: vec![ScoredValue { value: "avocato".into(), score: 0.9 }, ScoredValue { value: "avvocato".into(), score: 0.9 }],
            tier: MatchTier::Semantic,
        };
        let text = render_entities(&[e]);
        assert!(text.contains("['avocato', 'avvocato']"));
        assert!(text.contains("\"profession\""));
    }

    #[test]
    fn code_prompt_keeps_marker_example() {
        let p = code_prompt("Q", &Plan { steps: "1. count".into() }, AnswerFormat::Number);
        assert!(p.contains(r#"print(f"The answer is: [[{final_answer}]]")"#));
        assert!(p.contains("format of numerical"));
    }

    #[test]
    fn mapping_prompt_input() {
        let r = PhraseColumnReference::new("squares", "landmark_type", DatasetNumber::LANDMARKS);
        assert!(mapping_prompt(&r).contains("Mapping: [(\"squares\", \"landmark_type\", 3)]\n\nOutput:"));
    }
}
