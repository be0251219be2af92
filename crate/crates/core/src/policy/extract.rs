//! Rule-based extraction of (controller, verb, entity) triples from policy
//! text.

use super::catalog::{EntityCategory, Lexicon};
use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Party {
    FirstParty,
    ThirdParty,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DataController {
    pub party: Party,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DataEntity {
    pub surface: String,
    #[serde(serialize_with = "category_or_unmapped")]
    pub category: Option<EntityCategory>,
}

fn category_or_unmapped<S: Serializer>(c: &Option<EntityCategory>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(c.map(EntityCategory::name).unwrap_or(UNMAPPED))
}

pub const UNMAPPED: &str = "unmapped";
/// Controller surface used when a sentence names none.
pub const DEFAULT_CONTROLLER: &str = "developer";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SentenceRef {
    pub text: String,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PrivacyStatement {
    pub dc: DataController,
    pub ssoc: String,
    pub de: DataEntity,
    pub sentence: SentenceRef,
}

impl PrivacyStatement {
    /// The triple without its source location.
    pub fn triple(&self) -> (Party, &str, Option<EntityCategory>, &str) {
        (self.dc.party, &self.ssoc, self.de.category, &self.de.surface)
    }
}

const SENTENCE_ENDS: [char; 9] = ['.', '?', '!', ';', '\n', '。', '？', '！', '；'];
const NEGATIONS: [&str; 3] = ["not", "never", "no"];
const NEGATION_WINDOW: usize = 3;
const BE_FORMS: [&str; 6] = ["be", "is", "are", "was", "were", "been"];
const DETERMINERS: [&str; 16] =
    ["your", "the", "a", "an", "our", "their", "my", "its", "his", "her", "any", "some", "this", "these", "those", "such"];
const OBJECT_STOPS: [&str; 20] = [
    "to", "for", "in", "with", "and", "or", "when", "if", "by", "from", "after", "before", "so", "which", "that", "as",
    "on", "at", "through", "via",
];
const MAX_OBJECT_WORDS: usize = 6;

#[derive(Debug, Clone)]
struct Word {
    lower: String,
    start: usize,
    end: usize,
}

fn words(s: &str) -> Vec<Word> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices().chain(std::iter::once((s.len(), ' '))) {
        let part = c.is_alphanumeric() || c == '\'' || c == '’' || c == '-';
        match (part, start) {
            (true, None) => start = Some(i),
            (false, Some(st)) => {
                let src = s[st..i].trim_matches(|c| c == '\'' || c == '’' || c == '-');
                if !src.is_empty() {
                    let off = st + s[st..i].find(src).unwrap_or(0);
                    out.push(Word { lower: src.to_lowercase().replace('’', "'"), start: off, end: off + src.len() });
                }
                start = None;
            }
            _ => {}
        }
    }
    out
}

fn phrase_words(p: &str) -> Vec<String> {
    words(p).into_iter().map(|w| w.lower).collect()
}

/// Sentences with their byte offsets, trimmed; empty pieces dropped.
pub fn split_sentences(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if SENTENCE_ENDS.contains(&c) {
            push_sentence(text, start, i, &mut out);
            start = i + c.len_utf8();
        }
    }
    push_sentence(text, start, text.len(), &mut out);
    out
}

fn push_sentence<'a>(text: &'a str, start: usize, end: usize, out: &mut Vec<(usize, &'a str)>) {
    let piece = &text[start..end];
    let trimmed = piece.trim();
    if !trimmed.is_empty() {
        out.push((start + piece.find(trimmed).unwrap_or(0), trimmed));
    }
}

/// Lexicon verb a word inflects, if any.
pub fn verb_lemma<'l>(word: &str, verbs: &'l [String]) -> Option<&'l str> {
    let find = |cand: &str| verbs.iter().find(|v| v.as_str() == cand).map(String::as_str);
    if let Some(v) = find(word) {
        return Some(v);
    }
    let mut cands = Vec::new();
    for suf in ["ing", "ed", "es", "s", "d"] {
        if let Some(stem) = word.strip_suffix(suf) {
            if stem.len() >= 2 {
                cands.push(stem.to_string());
                if suf == "ing" || suf == "ed" {
                    cands.push(format!("{stem}e"));
                }
            }
        }
    }
    cands.iter().find_map(|c| find(c))
}

fn is_negation(w: &str) -> bool {
    NEGATIONS.contains(&w) || w.ends_with("n't")
}

struct Verb {
    at: usize,
    lemma: String,
    negated: bool,
}

/// Longest non-overlapping matches of `phrases` (already split into words),
/// scanning left to right. Returns (start, len, phrase index).
fn longest_matches(ws: &[Word], phrases: &[Vec<String>], skip: &[bool]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < ws.len() {
        let best = phrases
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_empty() && i + p.len() <= ws.len())
            .filter(|(_, p)| p.iter().enumerate().all(|(k, w)| !skip[i + k] && ws[i + k].lower == *w))
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)));
        match best {
            Some((pi, p)) => {
                out.push((i, p.len(), pi));
                i += p.len();
            }
            None => i += 1,
        }
    }
    out
}

struct Tables {
    entities: Vec<(Vec<String>, EntityCategory)>,
    cues: Vec<(Vec<String>, Party)>,
}

impl Tables {
    fn new(lex: &Lexicon) -> Self {
        let entities = lex.entities.iter().map(|(p, &c)| (phrase_words(p), c)).collect();
        let cues = lex
            .first_party_cues
            .iter()
            .map(|c| (phrase_words(c), Party::FirstParty))
            .chain(lex.third_party_cues.iter().map(|c| (phrase_words(c), Party::ThirdParty)))
            .collect();
        Self { entities, cues }
    }
}

fn sentence_statements(sentence: &str, offset: usize, lex: &Lexicon, t: &Tables) -> Vec<PrivacyStatement> {
    let ws = words(sentence);
    let mut verbs: Vec<Verb> = Vec::new();
    for (i, w) in ws.iter().enumerate() {
        if let Some(lemma) = verb_lemma(&w.lower, &lex.ssoc_verbs) {
            let negated = ws[i.saturating_sub(NEGATION_WINDOW)..i].iter().any(|p| is_negation(&p.lower));
            verbs.push(Verb { at: i, lemma: lemma.to_string(), negated });
        }
    }
    if verbs.is_empty() {
        return Vec::new();
    }
    let mut is_verb = vec![false; ws.len()];
    for v in &verbs {
        is_verb[v.at] = true;
    }
    let entity_phrases: Vec<Vec<String>> = t.entities.iter().map(|(p, _)| p.clone()).collect();
    let entities = longest_matches(&ws, &entity_phrases, &is_verb);
    let cue_phrases: Vec<Vec<String>> = t.cues.iter().map(|(p, _)| p.clone()).collect();
    let cues = longest_matches(&ws, &cue_phrases, &vec![false; ws.len()]);

    let controller = |verb_at: usize| -> DataController {
        cues.iter()
            .rev()
            .find(|(s, _, _)| *s < verb_at)
            .map(|&(s, len, pi)| DataController { party: t.cues[pi].1, surface: sentence[ws[s].start..ws[s + len - 1].end].to_string() })
            .unwrap_or(DataController { party: Party::FirstParty, surface: DEFAULT_CONTROLLER.to_string() })
    };
    let sref = SentenceRef { text: sentence.to_string(), offset };
    let mut out = Vec::new();
    let mut paired = vec![false; verbs.len()];
    for &(s, len, pi) in &entities {
        let preceding = verbs.iter().rposition(|v| v.at < s);
        let passive = || {
            verbs.iter().position(|v| v.at >= s + len && v.at > 0 && BE_FORMS.contains(&ws[v.at - 1].lower.as_str()))
        };
        let Some(vi) = preceding.or_else(passive) else { continue };
        paired[vi] = true;
        let v = &verbs[vi];
        if v.negated {
            continue;
        }
        out.push(PrivacyStatement {
            dc: controller(v.at),
            ssoc: v.lemma.clone(),
            de: DataEntity { surface: sentence[ws[s].start..ws[s + len - 1].end].to_string(), category: Some(t.entities[pi].1) },
            sentence: sref.clone(),
        });
    }
    for (vi, v) in verbs.iter().enumerate() {
        if paired[vi] || v.negated {
            continue;
        }
        let object: Vec<&Word> = ws[v.at + 1..]
            .iter()
            .take_while(|w| !OBJECT_STOPS.contains(&w.lower.as_str()) && verb_lemma(&w.lower, &lex.ssoc_verbs).is_none())
            .skip_while(|w| DETERMINERS.contains(&w.lower.as_str()))
            .take(MAX_OBJECT_WORDS)
            .collect();
        let (Some(first), Some(last)) = (object.first(), object.last()) else { continue };
        out.push(PrivacyStatement {
            dc: controller(v.at),
            ssoc: v.lemma.clone(),
            de: DataEntity { surface: sentence[first.start..last.end].to_string(), category: None },
            sentence: sref.clone(),
        });
    }
    out
}

/// One statement per verb/entity pairing in each sentence. Entities pair
/// with the nearest preceding verb; a following verb is used only in
/// passive constructions. Verbs with no entity yield an unmapped statement
/// for their object phrase.
pub fn extract_statements(policy_text: &str, lex: &Lexicon) -> Vec<PrivacyStatement> {
    let tables = Tables::new(lex);
    split_sentences(policy_text)
        .into_iter()
        .flat_map(|(off, s)| sentence_statements(s, off, lex, &tables))
        .collect()
}
