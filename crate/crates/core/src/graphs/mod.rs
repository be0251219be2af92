//! The four graph layers (UI transitions, callback control flow, data flow,
//! syntax) and their merge into a single dependency graph, plus the
//! reachability queries run over it.

pub mod ccfg;
pub mod js_query;
pub mod mdg;
pub mod practices;
pub mod udfg;
pub mod utg;

pub use ccfg::{
    build_ccfg, find_entry_points, get_crossfile_callbacks, get_imported_modules, Ccfg, CcfgEdge, CcfgEdgeKind,
    CcfgSource, EntryEvent, ExCall, FnKey, FunctionRef,
};
pub use mdg::{merge_mdg, Layer, Mdg, MdgEdge, MdgError, MdgNode, NodeKey, Phase};
pub use practices::{
    reachable_practices, subpackage_transition_paths, CallSite, DeadReason, PathStep, PrivacyPractice, TransitionPath,
    Verdict,
};
pub use udfg::{build_udfg, Anchor, DataKind, DataObject, FlowEdge, FlowLabel, Udfg};
pub use utg::{build_utg, resolve_placeholders, Mechanism, PageState, RouteSite, StackEffect, Target, TransitionEdge, Trigger, Utg};

use crate::diag::{DiagCode, Diagnostic};
use crate::frontend::{
    extract_bind_calls, extract_data_bindings, parse_js, parse_wxml, AstGraph, BindCall, DataBinding, WxmlNode,
};
use crate::package::MiniAppPackage;
use crate::policy::ApiCatalog;
use js_query::FileIndex;
use std::collections::{BTreeMap, BTreeSet};

pub const APP_FILE: &str = "app.js";
pub const APP_OWNER: &str = "app";

/// Every source of a package parsed once, with per-file lookup tables.
#[derive(Debug, Clone)]
pub struct ParsedApp {
    pub asts: BTreeMap<String, AstGraph>,
    pub index: BTreeMap<String, FileIndex>,
    pub wxmls: BTreeMap<String, WxmlNode>,
    pub bind_calls: BTreeMap<String, BTreeSet<BindCall>>,
    pub data_bindings: BTreeMap<String, BTreeSet<DataBinding>>,
    /// file → imported name → module file.
    pub imports: BTreeMap<String, BTreeMap<String, String>>,
    /// page logic file → page path.
    pub page_of_file: BTreeMap<String, String>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParsedApp {
    pub fn page_file(page: &str) -> String {
        format!("{page}.js")
    }

    pub fn page_of(&self, file: &str) -> Option<&str> {
        self.page_of_file.get(file).map(String::as_str)
    }

    pub fn ast(&self, file: &str) -> Option<&AstGraph> {
        self.asts.get(file)
    }

    /// Pages whose logic file imports `module` directly.
    pub fn importers(&self, module: &str) -> Vec<String> {
        self.imports
            .iter()
            .filter(|(_, m)| m.values().any(|v| v == module))
            .filter_map(|(f, _)| self.page_of(f).map(str::to_string))
            .collect()
    }
}

pub fn parse_app(pkg: &MiniAppPackage) -> ParsedApp {
    let mut diagnostics = Vec::new();
    let mut asts = BTreeMap::new();
    for (file, src) in pkg.js_files() {
        let ast = match parse_js(src, &file) {
            Ok(a) => a,
            Err(e) => {
                diagnostics.push(Diagnostic::new(DiagCode::MalformedScript, &file, e.to_string()));
                parse_js("", &file).expect("empty source parses")
            }
        };
        asts.insert(file, ast);
    }
    let index = asts.iter().map(|(f, a)| (f.clone(), FileIndex::build(a))).collect();
    let mut wxmls = BTreeMap::new();
    let mut bind_calls = BTreeMap::new();
    let mut data_bindings = BTreeMap::new();
    let mut page_of_file = BTreeMap::new();
    for page in &pkg.pages {
        let (tree, diags) = parse_wxml(&page.wxml_source, &page.path);
        diagnostics.extend(diags);
        let (calls, diags) = extract_bind_calls(&tree, &page.path);
        diagnostics.extend(diags);
        bind_calls.insert(page.path.clone(), calls);
        data_bindings.insert(page.path.clone(), extract_data_bindings(&tree, &page.path));
        wxmls.insert(page.path.clone(), tree);
        page_of_file.insert(page.js_file(), page.path.clone());
    }
    let mut imports = BTreeMap::new();
    for (file, ast) in &asts {
        let (map, diags) = get_imported_modules(ast, file);
        diagnostics.extend(diags);
        imports.insert(file.clone(), map);
    }
    ParsedApp { asts, index, wxmls, bind_calls, data_bindings, imports, page_of_file, diagnostics }
}

/// Joins `rel` onto directory `base`, resolving `.` and `..`. `None` when
/// the path escapes the package root or is empty.
pub fn join_path(base: &str, rel: &str) -> Option<String> {
    let mut parts: Vec<&str> = if rel.starts_with('/') { Vec::new() } else { base.split('/').filter(|s| !s.is_empty()).collect() };
    for seg in rel.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop()?;
            }
            s => parts.push(s),
        }
    }
    (!parts.is_empty()).then(|| parts.join("/"))
}

pub fn dir_of(path: &str) -> &str {
    path.rfind('/').map(|i| &path[..i]).unwrap_or("")
}

/// Resolves a `require`/`import` specifier to a package file path.
pub fn resolve_module(from_file: &str, spec: &str) -> Option<String> {
    let joined = join_path(dir_of(from_file), spec)?;
    Some(if joined.ends_with(".js") { joined } else { format!("{joined}.js") })
}

/// Resolves a routing url against the page it is used on. Returns the page
/// path and the query string, if any.
pub fn resolve_page_url(from_page: &str, url: &str) -> Option<(String, Option<String>)> {
    let url = url.trim();
    let (path, query) = match url.split_once('?') {
        Some((p, q)) => (p, Some(q.to_string())),
        None => (url, None),
    };
    if path.is_empty() {
        return None;
    }
    let joined = join_path(dir_of(from_page), path)?;
    let page = crate::package::normalize_page_path(&joined).ok()?;
    Some((page, query))
}

/// Results of the static pipeline over one package.
#[derive(Debug, Clone)]
pub struct AppAnalysis {
    pub parsed: ParsedApp,
    pub mdg: Mdg,
    pub practices: Vec<PrivacyPractice>,
    pub transition_paths: Vec<TransitionPath>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn analyze(pkg: &MiniAppPackage, catalog: &ApiCatalog) -> Result<AppAnalysis, MdgError> {
    let parsed = parse_app(pkg);
    let mut diagnostics = pkg.diagnostics.clone();
    diagnostics.extend(parsed.diagnostics.iter().cloned());
    let (ccfg, d) = build_ccfg(pkg, &parsed);
    diagnostics.extend(d);
    let udfg = build_udfg(&parsed, &ccfg);
    let (utg, d) = build_utg(pkg, &parsed);
    diagnostics.extend(d);
    let (utg, d) = resolve_placeholders(&utg, &udfg);
    diagnostics.extend(d);
    let phase = if pkg.complete { Phase::Complete } else { Phase::MainOnly };
    let mdg = merge_mdg(utg, ccfg, udfg, &parsed, phase)?;
    let practices = reachable_practices(&mdg, catalog);
    for p in &practices {
        if let Verdict::DeadCode { reason } = &p.verdict {
            diagnostics.push(Diagnostic::new(
                DiagCode::DeadCode,
                &p.call_site.file,
                format!("{} at {}:{} is dead code ({})", p.api, p.call_site.line, p.call_site.col, reason.as_str()),
            ));
        }
    }
    let (transition_paths, d) = if pkg.complete { (Vec::new(), Vec::new()) } else { subpackage_transition_paths(&mdg) };
    diagnostics.extend(d);
    diagnostics.sort();
    diagnostics.dedup();
    Ok(AppAnalysis { parsed, mdg, practices, transition_paths, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_helpers() {
        assert_eq!(resolve_module("pages/takePhoto/index.js", "../util/util.js").as_deref(), Some("pages/util/util.js"));
        assert_eq!(resolve_module("pages/takePhoto/index.js", "./helpers").as_deref(), Some("pages/takePhoto/helpers.js"));
        assert_eq!(resolve_module("app.js", "/utils/a.js").as_deref(), Some("utils/a.js"));
        assert_eq!(resolve_module("a.js", "../../x.js"), None);
        assert_eq!(
            resolve_page_url("pages/myInfo/index", "/pages/checkID/index?from=me"),
            Some(("pages/checkID/index".into(), Some("from=me".into())))
        );
        assert_eq!(resolve_page_url("pages/myInfo/index", "../takePhoto/index").unwrap().0, "pages/takePhoto/index");
        assert_eq!(resolve_page_url("pages/myInfo/index", ""), None);
    }
}
