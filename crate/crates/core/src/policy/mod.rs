//! Privacy-policy side: entity catalog, statement extraction and the
//! cross-validation of declared against observed practices.

pub mod catalog;
pub mod extract;
pub mod llm;
pub mod report;

pub use catalog::{map_api_to_entity, ApiCatalog, ApiGroup, CatalogEntry, CatalogError, EntityCategory, Lexicon, BUILTIN_LEXICON};
pub use extract::{extract_statements, DataController, DataEntity, Party, PrivacyStatement, SentenceRef, UNMAPPED};
pub use llm::{extract_with_llm, parse_rows, render_prompt, rows_to_statements, LlmClient, LlmError, TripleRow};
pub use report::{cross_validate, CategoryEvidence, InconsistencyReport, PracticeEvidence, StatementEvidence, Strength};
