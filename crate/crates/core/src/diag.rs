//! Non-fatal findings collected while loading and analysing a package.

use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Diagnostic {
    pub code: DiagCode,
    /// File or page the finding is about, relative to the package root.
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagCode {
    MissingSource,
    NestedSubpackage,
    IncompletePackage,
    MalformedMarkup,
    MalformedScript,
    BindingInHandler,
    UnknownOpenType,
    UndeclaredTarget,
    SwitchTabNonTab,
    UnresolvedPlaceholder,
    NonLiteralRequire,
    ModuleNotFound,
    UnresolvedHandler,
    DeadCode,
    UnreachableSubpackage,
    Exploration,
    StaticOnlyEvidence,
    UnknownApi,
    UnmappedEntity,
}

impl Diagnostic {
    pub fn new(code: DiagCode, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self { code, location: location.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}] {}: {}", self.code, self.location, self.message)
    }
}
