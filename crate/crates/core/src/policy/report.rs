//! Cross-validation of declared statements against observed practices.

use super::catalog::{ApiCatalog, EntityCategory};
use super::extract::PrivacyStatement;
use crate::diag::{DiagCode, Diagnostic};
use crate::explorer::ApiEvent;
use crate::graphs::{PrivacyPractice, Verdict};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

pub const EXIT_CONSISTENT: i32 = 0;
pub const EXIT_REDUNDANT: i32 = 3;
pub const EXIT_OMITTED: i32 = 4;

/// How a category's presence in the app is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strength {
    /// Observed at runtime.
    Dynamic,
    /// Statically reachable only.
    Static,
    /// Declared, never observed.
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PracticeEvidence {
    pub api: String,
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub page: Option<String>,
    pub entry: String,
    pub trigger_path_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatementEvidence {
    pub ssoc: String,
    pub entity: String,
    pub sentence: String,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryEvidence {
    pub strength: Strength,
    pub practices: Vec<PracticeEvidence>,
    pub events: Vec<ApiEvent>,
    pub statements: Vec<StatementEvidence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InconsistencyReport {
    pub declared: BTreeSet<EntityCategory>,
    pub observed: BTreeSet<EntityCategory>,
    pub observed_static: BTreeSet<EntityCategory>,
    pub observed_dynamic: BTreeSet<EntityCategory>,
    pub redundant: BTreeSet<EntityCategory>,
    pub omitted: BTreeSet<EntityCategory>,
    pub evidence: BTreeMap<EntityCategory, CategoryEvidence>,
    pub unmapped_statements: Vec<PrivacyStatement>,
    pub diagnostics: Vec<Diagnostic>,
}

impl InconsistencyReport {
    pub fn exit_code(&self) -> i32 {
        if !self.omitted.is_empty() {
            EXIT_OMITTED
        } else if !self.redundant.is_empty() {
            EXIT_REDUNDANT
        } else {
            EXIT_CONSISTENT
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.redundant.is_empty() && self.omitted.is_empty()
    }
}

/// Declared categories come from mapped statements; observed ones from
/// reachable practices and runtime events. Dead-code practices and
/// unmapped statements take no part in the set arithmetic.
pub fn cross_validate(
    practices: &[PrivacyPractice],
    statements: &[PrivacyStatement],
    dynamic_observed: &[ApiEvent],
    catalog: &ApiCatalog,
) -> InconsistencyReport {
    let mut diagnostics = Vec::new();
    let mut evidence: BTreeMap<EntityCategory, CategoryEvidence> = BTreeMap::new();
    let mut declared = BTreeSet::new();
    let mut unmapped_statements = Vec::new();
    for s in statements {
        match s.de.category {
            Some(c) => {
                declared.insert(c);
                entry(&mut evidence, c).statements.push(StatementEvidence {
                    ssoc: s.ssoc.clone(),
                    entity: s.de.surface.clone(),
                    sentence: s.sentence.text.clone(),
                    offset: s.sentence.offset,
                });
            }
            None => {
                diagnostics.push(Diagnostic::new(
                    DiagCode::UnmappedEntity,
                    format!("policy@{}", s.sentence.offset),
                    format!("{} {:?} maps to no entity category", s.ssoc, s.de.surface),
                ));
                unmapped_statements.push(s.clone());
            }
        }
    }

    let mut observed_static = BTreeSet::new();
    for p in practices {
        let Verdict::Reachable { entry: from, trigger_path } = &p.verdict else { continue };
        observed_static.insert(p.entity_category);
        entry(&mut evidence, p.entity_category).practices.push(PracticeEvidence {
            api: p.api.clone(),
            file: p.call_site.file.clone(),
            line: p.call_site.line,
            col: p.call_site.col,
            page: p.call_site.page.clone(),
            entry: from.describe(),
            trigger_path_len: trigger_path.len(),
        });
    }
    let mut observed_dynamic = BTreeSet::new();
    for e in dynamic_observed {
        match catalog.category(&e.api) {
            Some(c) => {
                observed_dynamic.insert(c);
                entry(&mut evidence, c).events.push(e.clone());
            }
            None => diagnostics.push(Diagnostic::new(DiagCode::UnknownApi, &e.page, format!("runtime event {} is not in the catalog", e.api))),
        }
    }
    let observed: BTreeSet<EntityCategory> = observed_static.union(&observed_dynamic).copied().collect();
    for (c, ev) in evidence.iter_mut() {
        ev.strength = if observed_dynamic.contains(c) {
            Strength::Dynamic
        } else if observed_static.contains(c) {
            Strength::Static
        } else {
            Strength::None
        };
        ev.practices.sort_by(|a, b| (&a.file, a.line, a.col, &a.api).cmp(&(&b.file, b.line, b.col, &b.api)));
        ev.events.sort();
        ev.events.dedup();
    }
    diagnostics.sort();
    diagnostics.dedup();
    InconsistencyReport {
        redundant: declared.difference(&observed).copied().collect(),
        omitted: observed.difference(&declared).copied().collect(),
        declared,
        observed,
        observed_static,
        observed_dynamic,
        evidence,
        unmapped_statements,
        diagnostics,
    }
}

fn entry(ev: &mut BTreeMap<EntityCategory, CategoryEvidence>, c: EntityCategory) -> &mut CategoryEvidence {
    ev.entry(c).or_insert_with(|| CategoryEvidence { strength: Strength::None, practices: Vec::new(), events: Vec::new(), statements: Vec::new() })
}
