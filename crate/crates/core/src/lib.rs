//! Question answering over historical cadastre tables: a text-to-SQL
//! browsing agent, a text-to-program agent with entity search and a bounded
//! debug loop, and multi-seed reliability scoring.

pub mod consistency;
pub mod entity_search;
pub mod llm;
pub mod python_agent;
pub mod sql_agent;
pub mod tabular;
