//! Interface for model-backed statement extraction: the few-shot prompt
//! format, a client trait, and the adapter from returned rows to
//! statements. No client ships with the crate.

use super::catalog::Lexicon;
use super::extract::{split_sentences, verb_lemma, DataController, DataEntity, Party, PrivacyStatement, SentenceRef};
use thiserror::Error;

pub const TASK_DESCRIPTION: &str = "Here is a table where each row has 4 items. The first item is \"privacy statement\", and the second to fourth items are \"subject\", \"verb\", and \"object\" extracted from the \"privacy statement\". Here are some samples:";

pub const DEMONSTRATIONS: [(&str, &str, &str, &str); 2] = [
    (
        "To save photos, the developer will request your permission to access your photo album",
        "developer",
        "access",
        "photo album",
    ),
    (
        "In order to help you become our member, the developer will collect your WeChat nickname and avatar after obtaining your express consent",
        "developer",
        "collect",
        "WeChat nickname and avatar",
    ),
];

pub const QUERY: &str =
    "Please read the table and follow the above sample rows to complete the table by filling in \"subject\", \"verb\", \"object\" of each row:";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("model request failed: {0}")]
    Request(String),
    #[error("unparseable model response line: {0}")]
    Malformed(String),
}

/// Text completion backend.
pub trait LlmClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleRow {
    pub statement: String,
    pub subject: String,
    pub verb: String,
    pub object: String,
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "'"))
}

/// Renders the three-part prompt with one query row per statement.
pub fn render_prompt(statements: &[&str]) -> String {
    let mut out = format!("Task Description: {TASK_DESCRIPTION}\n\nFew-shot Demonstrations:\n");
    for (i, (s, subj, verb, obj)) in DEMONSTRATIONS.iter().enumerate() {
        out.push_str(&format!("Demo#{}: {}, {}, {}, {}.\n", i + 1, quote(s), quote(subj), quote(verb), quote(obj)));
    }
    out.push_str(&format!("\nQuery: {QUERY}\n"));
    for s in statements {
        out.push_str(&format!("{}, \"\", \"\", \"\".\n", quote(s)));
    }
    out
}

fn quoted_fields(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = line;
    while let Some(open) = rest.find('"') {
        let after = &rest[open + 1..];
        let Some(close) = after.find('"') else { break };
        out.push(after[..close].trim().to_string());
        rest = &after[close + 1..];
    }
    out
}

/// Parses response rows of four quoted items; lines without quotes are
/// ignored, lines with the wrong arity are errors.
pub fn parse_rows(response: &str) -> Result<Vec<TripleRow>, LlmError> {
    let mut rows = Vec::new();
    for line in response.lines() {
        let fields = quoted_fields(line);
        match fields.len() {
            0 => continue,
            4 => {
                let [statement, subject, verb, object]: [String; 4] = fields.try_into().expect("arity checked");
                rows.push(TripleRow { statement, subject, verb, object });
            }
            _ => return Err(LlmError::Malformed(line.to_string())),
        }
    }
    Ok(rows)
}

/// Maps rows to statements: the subject is classified by controller cues,
/// the verb must inflect a lexicon verb, and the object is resolved to the
/// longest entity phrase it contains.
pub fn rows_to_statements(rows: &[TripleRow], text: &str, lex: &Lexicon) -> Vec<PrivacyStatement> {
    let sentences = split_sentences(text);
    let mut out = Vec::new();
    for row in rows {
        let verb_word = row.verb.to_lowercase();
        let Some(lemma) = verb_word.split_whitespace().find_map(|w| verb_lemma(w, &lex.ssoc_verbs)) else { continue };
        let subject = row.subject.to_lowercase();
        let party = if lex.third_party_cues.iter().any(|c| subject.contains(c.as_str())) { Party::ThirdParty } else { Party::FirstParty };
        let object = row.object.to_lowercase();
        let entity = lex
            .entities
            .iter()
            .filter(|(p, _)| object.contains(p.as_str()))
            .max_by(|a, b| a.0.len().cmp(&b.0.len()).then(b.0.cmp(a.0)));
        let de = match entity {
            Some((p, &c)) => DataEntity { surface: p.clone(), category: Some(c) },
            None => DataEntity { surface: row.object.clone(), category: None },
        };
        let offset = sentences.iter().find(|(_, s)| *s == row.statement.trim()).map(|(o, _)| *o).unwrap_or(0);
        out.push(PrivacyStatement {
            dc: DataController { party, surface: row.subject.clone() },
            ssoc: lemma.to_string(),
            de,
            sentence: SentenceRef { text: row.statement.clone(), offset },
        });
    }
    out
}

/// Full model-backed path: split, prompt, parse, adapt.
pub fn extract_with_llm(client: &dyn LlmClient, text: &str, lex: &Lexicon) -> Result<Vec<PrivacyStatement>, LlmError> {
    let sentences: Vec<&str> = split_sentences(text).into_iter().map(|(_, s)| s).collect();
    if sentences.is_empty() {
        return Ok(Vec::new());
    }
    let response = client.complete(&render_prompt(&sentences))?;
    Ok(rows_to_statements(&parse_rows(&response)?, text, lex))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::EntityCategory;

    struct Canned(&'static str);

    impl LlmClient for Canned {
        fn complete(&self, prompt: &str) -> Result<String, LlmError> {
            assert!(prompt.contains("Query:"));
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn prompt_layout() {
        let p = render_prompt(&["We collect your location"]);
        assert!(p.starts_with("Task Description: Here is a table where each row has 4 items."));
        assert!(p.contains("Demo#1: \"To save photos, the developer will request your permission to access your photo album\", \"developer\", \"access\", \"photo album\"."));
        assert!(p.contains("Demo#2: "));
        assert!(p.trim_end().ends_with("\"We collect your location\", \"\", \"\", \"\"."));
    }

    #[test]
    fn rows_round_trip() {
        let client = Canned("\"We collect your location\", \"we\", \"collect\", \"your location\".\nnoise line\n\"Partners share contacts\", \"partners\", \"share\", \"device id\".");
        let s = extract_with_llm(&client, "We collect your location. Partners share contacts.", &Lexicon::builtin()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].de.category, Some(EntityCategory::UserLocation));
        assert_eq!(s[0].dc.party, Party::FirstParty);
        assert_eq!(s[1].dc.party, Party::ThirdParty);
        assert_eq!(s[1].de.category, None);
        assert_eq!(s[1].sentence.offset, 26);
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(matches!(parse_rows("\"a\", \"b\""), Err(LlmError::Malformed(_))));
        assert!(parse_rows("").unwrap().is_empty());
        let rows = parse_rows("\"s\", \"developer\", \"obtain\", \"x\"").unwrap();
        assert!(rows_to_statements(&rows, "s", &Lexicon::builtin()).is_empty());
    }
}
