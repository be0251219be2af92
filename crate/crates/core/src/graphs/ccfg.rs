//! Callback control-flow graph: entry events, direct calls, callbacks passed
//! as arguments, and handlers installed on a page from another file through
//! a context (`this`) argument.

use super::js_query::{function_name, param_names, FileIndex, LIFECYCLE_NAMES, MODULE_FN};
use super::{resolve_module, ParsedApp, APP_FILE, APP_OWNER};
use crate::diag::{DiagCode, Diagnostic};
use crate::frontend::{AstGraph, BindCall, NodeKind};
use crate::package::{MiniAppPackage, PageUnit};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FnKey {
    pub file: String,
    pub node: usize,
}

impl FnKey {
    pub fn new(file: impl Into<String>, node: usize) -> Self {
        Self { file: file.into(), node }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionRef {
    pub key: FnKey,
    pub page: Option<String>,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum EntryEvent {
    /// `owner` is a page path, or `app` for the application object.
    Lifecycle { owner: String, file: String, name: String },
    Gui { bind: BindCall, pending_dynamic: bool },
}

impl EntryEvent {
    /// Page the entry belongs to; `None` for application-level entries.
    pub fn page(&self) -> Option<&str> {
        match self {
            EntryEvent::Lifecycle { owner, .. } if owner == APP_OWNER => None,
            EntryEvent::Lifecycle { owner, .. } => Some(owner),
            EntryEvent::Gui { bind, .. } => Some(&bind.page),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            EntryEvent::Lifecycle { owner, name, .. } => format!("{owner}:{name}"),
            EntryEvent::Gui { bind, .. } => format!("{}:{}@{}->{}", bind.page, bind.event, bind.widget_xpath, bind.handler),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CcfgEdgeKind {
    Lifecycle,
    GuiEvent,
    DirectCall,
    DynamicDefinition,
}

impl CcfgEdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lifecycle => "lifecycle",
            Self::GuiEvent => "gui-event",
            Self::DirectCall => "direct-call",
            Self::DynamicDefinition => "dynamic-definition",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CcfgSource {
    Entry(EntryEvent),
    Function(FnKey),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CcfgEdge {
    pub from: CcfgSource,
    pub to: FnKey,
    pub kind: CcfgEdgeKind,
    /// Call node (in the source function's file) for call and definition edges.
    pub site: Option<usize>,
}

/// A handler defined in another file on a page context passed as `this`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ExCall {
    pub handler_name: String,
    pub defining_file: String,
    pub defining_node_id: usize,
    pub installer_file: String,
    pub installer_call_site: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Ccfg {
    pub nodes: BTreeMap<FnKey, FunctionRef>,
    pub edges: Vec<CcfgEdge>,
    pub entries: Vec<EntryEvent>,
    pub excalls: Vec<ExCall>,
    /// Bind calls whose handler was found neither statically nor as an ExCall.
    pub dangling: Vec<BindCall>,
}

impl Ccfg {
    /// Function a GUI entry leads to, if resolved.
    pub fn handler_of(&self, bind: &BindCall) -> Option<&FnKey> {
        self.edges.iter().find_map(|e| match &e.from {
            CcfgSource::Entry(EntryEvent::Gui { bind: b, .. }) if b == bind => Some(&e.to),
            _ => None,
        })
    }
}

/// `specifier → module file` for ES imports and literal `require` calls.
pub fn get_imported_modules(ast: &AstGraph, file: &str) -> (BTreeMap<String, String>, Vec<Diagnostic>) {
    let mut map = BTreeMap::new();
    let mut diags = Vec::new();
    for decl in ast.ids_of(NodeKind::ImportDeclaration) {
        let Some(src) = ast.child(decl, "source").and_then(|s| ast.value(s)) else { continue };
        let Some(module) = resolve_module(file, src) else {
            diags.push(Diagnostic::new(DiagCode::ModuleNotFound, file, format!("import {src:?} escapes the package")));
            continue;
        };
        for spec in ast.children_labeled(decl, "specifier") {
            if let Some(name) = ast.value(spec) {
                map.insert(name.to_string(), module.clone());
            }
        }
    }
    for decl in ast.ids_of(NodeKind::VariableDeclarator) {
        let Some(init) = ast.child(decl, "init") else { continue };
        if ast.kind(init) != NodeKind::CallExpression || ast.value(init) != Some("require") {
            continue;
        }
        let Some(name) = ast.value(decl) else { continue };
        let arg = ast.call_args(init).first().copied();
        match arg.filter(|&a| ast.kind(a) == NodeKind::StringLiteral).and_then(|a| ast.value(a)) {
            Some(src) => match resolve_module(file, src) {
                Some(m) => {
                    map.insert(name.to_string(), m);
                }
                None => diags.push(Diagnostic::new(DiagCode::ModuleNotFound, file, format!("require {src:?} escapes the package"))),
            },
            None => diags.push(Diagnostic::new(
                DiagCode::NonLiteralRequire,
                file,
                format!("{}:{}: require argument is not a string literal", ast.node(init).span.line, ast.node(init).span.col),
            )),
        }
    }
    (map, diags)
}

/// Module file and exported name an imported callee refers to:
/// `util.init(...)` or `init(...)` after `import { init }`.
fn imported_callee(ast: &AstGraph, call: usize, imported: &BTreeMap<String, String>) -> Option<(String, String)> {
    let callee = ast.child(call, "callee")?;
    match ast.kind(callee) {
        NodeKind::MemberExpression => {
            let object = ast.child(callee, "object")?;
            if ast.kind(object) != NodeKind::Identifier {
                return None;
            }
            let module = imported.get(ast.value(object)?)?;
            Some((module.clone(), ast.value(callee)?.to_string()))
        }
        NodeKind::Identifier => {
            let name = ast.value(callee)?;
            Some((imported.get(name)?.clone(), name.to_string()))
        }
        _ => None,
    }
}

/// Handlers installed on the calling page by imported functions that
/// receive the page context: for `util.init(this)`, finds `init` in the
/// imported module, takes the parameter at the position of `this`, and
/// collects `param.<handler> = function ...` assignments whose handler
/// name is bound in the page markup.
pub fn get_crossfile_callbacks(
    ast: &AstGraph,
    file: &str,
    imported: &BTreeMap<String, String>,
    bind_calls: &BTreeSet<BindCall>,
    modules: &BTreeMap<String, AstGraph>,
) -> (Vec<ExCall>, Vec<Diagnostic>) {
    let handlers: BTreeSet<&str> = bind_calls.iter().map(|b| b.handler.as_str()).collect();
    let mut out = BTreeSet::new();
    let mut diags = Vec::new();
    for call in ast.ids_of(NodeKind::CallExpression) {
        let args = ast.call_args(call);
        let this_positions: Vec<usize> =
            args.iter().enumerate().filter(|(_, &a)| ast.kind(a) == NodeKind::ThisExpression).map(|(i, _)| i).collect();
        if this_positions.is_empty() {
            continue;
        }
        let Some((module, fn_name)) = imported_callee(ast, call, imported) else { continue };
        let Some(m_ast) = modules.get(&module) else {
            diags.push(Diagnostic::new(DiagCode::ModuleNotFound, file, format!("imported module {module} is not in the package")));
            continue;
        };
        let m_idx = FileIndex::build(m_ast);
        let Some(func) = m_idx.exported_function(m_ast, &fn_name) else { continue };
        let params = param_names(m_ast, func);
        for pos in this_positions {
            let Some(Some(ctx)) = params.get(pos) else { continue };
            for asg in m_ast.subtree(func).filter(|&n| m_ast.kind(n) == NodeKind::Assignment) {
                let (Some(left), Some(right)) = (m_ast.child(asg, "left"), m_ast.child(asg, "right")) else { continue };
                if m_ast.kind(left) != NodeKind::MemberExpression {
                    continue;
                }
                let Some(object) = m_ast.child(left, "object") else { continue };
                if m_ast.kind(object) != NodeKind::Identifier || m_ast.value(object) != Some(ctx.as_str()) {
                    continue;
                }
                if m_idx.resolve(m_ast, object, ctx).0 != func {
                    continue;
                }
                let Some(member) = m_ast.value(left) else { continue };
                if !handlers.contains(member) {
                    continue;
                }
                let def = match m_ast.kind(right) {
                    NodeKind::FunctionDef => Some(right),
                    NodeKind::Identifier => m_ast.value(right).and_then(|n| m_idx.function_binding(m_ast, right, n)),
                    _ => None,
                };
                if let Some(def) = def {
                    out.insert(ExCall {
                        handler_name: member.to_string(),
                        defining_file: module.clone(),
                        defining_node_id: def,
                        installer_file: file.to_string(),
                        installer_call_site: call,
                    });
                }
            }
        }
    }
    (out.into_iter().collect(), diags)
}

fn entries_for(owner: &str, file: &str, ast: &AstGraph, bind_calls: &BTreeSet<BindCall>) -> BTreeSet<EntryEvent> {
    let idx = FileIndex::build(ast);
    let mut out = BTreeSet::new();
    for name in LIFECYCLE_NAMES {
        if idx.methods.contains_key(name) {
            out.insert(EntryEvent::Lifecycle { owner: owner.to_string(), file: file.to_string(), name: name.to_string() });
        }
    }
    for b in bind_calls {
        out.insert(EntryEvent::Gui { bind: b.clone(), pending_dynamic: !idx.methods.contains_key(&b.handler) });
    }
    out
}

/// Lifecycle callbacks of the page's registration object plus one entry per
/// bind call. Handlers not defined on the page object are pending-dynamic.
pub fn find_entry_points(page: &PageUnit, ast: &AstGraph, bind_calls: &BTreeSet<BindCall>) -> BTreeSet<EntryEvent> {
    entries_for(&page.path, &page.js_file(), ast, bind_calls)
}

/// Function a call expression statically invokes, if resolvable:
/// `this.f()` on a page, `mod.f()` / `f()` through imports, local `f()`,
/// and `require(...)` (module top level).
pub(crate) fn resolve_callee(parsed: &ParsedApp, file: &str, call: usize) -> Option<FnKey> {
    let ast = parsed.asts.get(file)?;
    let idx = parsed.index.get(file)?;
    let imported = parsed.imports.get(file)?;
    let callee = ast.child(call, "callee")?;
    let in_module = |module: &str, name: &str| -> Option<FnKey> {
        let m_ast = parsed.asts.get(module)?;
        let f = parsed.index.get(module)?.exported_function(m_ast, name)?;
        Some(FnKey::new(module, f))
    };
    match ast.kind(callee) {
        NodeKind::Identifier => {
            let name = ast.value(callee)?;
            if name == "require" {
                let arg = *ast.call_args(call).first()?;
                let module = resolve_module(file, ast.value(arg).filter(|_| ast.kind(arg) == NodeKind::StringLiteral)?)?;
                return parsed.asts.contains_key(&module).then(|| FnKey::new(module, 0));
            }
            if let Some(f) = idx.function_binding(ast, call, name) {
                return Some(FnKey::new(file, f));
            }
            in_module(imported.get(name)?, name)
        }
        NodeKind::MemberExpression => {
            let object = ast.child(callee, "object")?;
            let name = ast.value(callee)?;
            if idx.is_this_alias(ast, object) {
                return idx.methods.get(name).map(|&f| FnKey::new(file, f));
            }
            if ast.kind(object) == NodeKind::Identifier {
                let module = imported.get(ast.value(object)?)?;
                return in_module(module, name);
            }
            None
        }
        _ => None,
    }
}

/// Functions passed as arguments, directly or as object-literal property
/// values (`{ success(res) {...} }`).
pub(crate) fn callback_args(ast: &AstGraph, call: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for arg in ast.call_args(call) {
        match ast.kind(arg) {
            NodeKind::FunctionDef => out.push(arg),
            NodeKind::ObjectLiteral => {
                for prop in ast.children_labeled(arg, "property") {
                    if let Some(v) = ast.child(prop, "value").filter(|&v| ast.kind(v) == NodeKind::FunctionDef) {
                        out.push(v);
                    }
                }
            }
            _ => {}
        }
    }
    out
}

pub fn build_ccfg(pkg: &MiniAppPackage, parsed: &ParsedApp) -> (Ccfg, Vec<Diagnostic>) {
    let mut g = Ccfg::default();
    let mut diags = Vec::new();
    let mut edges = BTreeSet::new();
    for (file, ast) in &parsed.asts {
        let page = parsed.page_of(file).map(str::to_string);
        g.nodes.insert(
            FnKey::new(file, 0),
            FunctionRef { key: FnKey::new(file, 0), page: page.clone(), name: MODULE_FN.to_string() },
        );
        for f in ast.ids_of(NodeKind::FunctionDef) {
            g.nodes.insert(FnKey::new(file, f), FunctionRef { key: FnKey::new(file, f), page: page.clone(), name: function_name(ast, f) });
        }
    }

    let mut entries: BTreeSet<EntryEvent> = BTreeSet::new();
    let mut owners: Vec<(String, String, &'static str)> = Vec::new();
    if parsed.asts.contains_key(APP_FILE) {
        owners.push((APP_OWNER.to_string(), APP_FILE.to_string(), "onLaunch"));
    }
    for page in &pkg.pages {
        owners.push((page.path.clone(), page.js_file(), "onLoad"));
    }
    let empty = BTreeSet::new();
    for (owner, file, load_event) in &owners {
        let Some(ast) = parsed.asts.get(file) else { continue };
        let idx = &parsed.index[file];
        let binds = if owner == APP_OWNER { &empty } else { parsed.bind_calls.get(owner).unwrap_or(&empty) };
        let found = entries_for(owner, file, ast, binds);
        // Top-level code runs when the file is loaded.
        let load = EntryEvent::Lifecycle { owner: owner.clone(), file: file.clone(), name: load_event.to_string() };
        edges.insert(CcfgEdge { from: CcfgSource::Entry(load.clone()), to: FnKey::new(file, 0), kind: CcfgEdgeKind::Lifecycle, site: None });
        entries.insert(load);

        let (excalls, d) = get_crossfile_callbacks(ast, file, &parsed.imports[file], binds, &parsed.asts);
        diags.extend(d);
        for entry in found {
            match &entry {
                EntryEvent::Lifecycle { name, .. } => {
                    let f = idx.methods[name.as_str()];
                    edges.insert(CcfgEdge { from: CcfgSource::Entry(entry.clone()), to: FnKey::new(file, f), kind: CcfgEdgeKind::Lifecycle, site: None });
                }
                EntryEvent::Gui { bind, .. } => {
                    let target = idx.methods.get(&bind.handler).map(|&f| FnKey::new(file, f)).or_else(|| {
                        excalls
                            .iter()
                            .find(|x| x.handler_name == bind.handler)
                            .map(|x| FnKey::new(&x.defining_file, x.defining_node_id))
                    });
                    match target {
                        Some(to) => {
                            edges.insert(CcfgEdge { from: CcfgSource::Entry(entry.clone()), to, kind: CcfgEdgeKind::GuiEvent, site: None });
                        }
                        None => {
                            diags.push(Diagnostic::new(
                                DiagCode::UnresolvedHandler,
                                &bind.page,
                                format!("{} {}=\"{}\" has no static or installed definition", bind.widget_xpath, bind.attr_name, bind.handler),
                            ));
                            g.dangling.push(bind.clone());
                        }
                    }
                }
            }
            entries.insert(entry);
        }
        for x in excalls {
            let ast = &parsed.asts[&x.installer_file];
            let from = ast.enclosing_function(x.installer_call_site).unwrap_or(0);
            edges.insert(CcfgEdge {
                from: CcfgSource::Function(FnKey::new(&x.installer_file, from)),
                to: FnKey::new(&x.defining_file, x.defining_node_id),
                kind: CcfgEdgeKind::DynamicDefinition,
                site: Some(x.installer_call_site),
            });
            g.excalls.push(x);
        }
    }

    for (file, ast) in &parsed.asts {
        let registration_call = parsed.index[file].registration_call;
        for call in ast.ids_of(NodeKind::CallExpression) {
            let from = FnKey::new(file, ast.enclosing_function(call).unwrap_or(0));
            if let Some(to) = resolve_callee(parsed, file, call) {
                edges.insert(CcfgEdge { from: CcfgSource::Function(from.clone()), to, kind: CcfgEdgeKind::DirectCall, site: Some(call) });
            }
            if Some(call) == registration_call {
                continue;
            }
            for cb in callback_args(ast, call) {
                edges.insert(CcfgEdge {
                    from: CcfgSource::Function(from.clone()),
                    to: FnKey::new(file, cb),
                    kind: CcfgEdgeKind::DirectCall,
                    site: Some(call),
                });
            }
        }
    }
    g.entries = entries.into_iter().collect();
    g.edges = edges.into_iter().collect();
    g.excalls.sort();
    g.excalls.dedup();
    g.dangling.sort();
    (g, diags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{extract_bind_calls, parse_js, parse_wxml};

    const PAGE_JS: &str = "const util = require('../util/util.js')\nPage({ onReady() { util.init(this) } })";
    const UTIL_JS: &str = "function init(pageContext) {\n  pageContext.onShutterTap = function () { const ctx = wx.createCameraContext() }\n}\nmodule.exports = { init: init }";

    fn setup(wxml: &str, page_js: &str) -> (AstGraph, BTreeMap<String, String>, BTreeSet<BindCall>, BTreeMap<String, AstGraph>) {
        let page = "pages/takePhoto/index";
        let ast = parse_js(page_js, "pages/takePhoto/index.js").unwrap();
        let (imported, _) = get_imported_modules(&ast, "pages/takePhoto/index.js");
        let (tree, _) = parse_wxml(wxml, page);
        let (binds, _) = extract_bind_calls(&tree, page);
        let mut modules = BTreeMap::new();
        modules.insert("pages/util/util.js".to_string(), parse_js(UTIL_JS, "pages/util/util.js").unwrap());
        (ast, imported, binds, modules)
    }

    #[test]
    fn imported_modules() {
        let ast = parse_js(PAGE_JS, "pages/takePhoto/index.js").unwrap();
        let (m, d) = get_imported_modules(&ast, "pages/takePhoto/index.js");
        assert!(d.is_empty());
        assert_eq!(m.into_iter().collect::<Vec<_>>(), vec![("util".to_string(), "pages/util/util.js".to_string())]);
        let ast = parse_js("import {init} from './helpers.js'", "pages/takePhoto/index.js").unwrap();
        assert_eq!(get_imported_modules(&ast, "pages/takePhoto/index.js").0["init"], "pages/takePhoto/helpers.js");
        let ast = parse_js("var a = 1", "x.js").unwrap();
        assert!(get_imported_modules(&ast, "x.js").0.is_empty());
        let ast = parse_js("const m = require(name)", "x.js").unwrap();
        let (m, d) = get_imported_modules(&ast, "x.js");
        assert!(m.is_empty());
        assert_eq!(d[0].code, DiagCode::NonLiteralRequire);
    }

    #[test]
    fn crossfile_callback_found() {
        let (ast, imported, binds, modules) = setup(r#"<button bindtap="onShutterTap"/>"#, PAGE_JS);
        let (x, d) = get_crossfile_callbacks(&ast, "pages/takePhoto/index.js", &imported, &binds, &modules);
        assert!(d.is_empty());
        let names: Vec<_> = x.iter().map(|c| c.handler_name.as_str()).collect();
        assert_eq!(names, vec!["onShutterTap"]);
        assert_eq!(x[0].defining_file, "pages/util/util.js");
        let m = &modules["pages/util/util.js"];
        assert_eq!(m.kind(x[0].defining_node_id), NodeKind::FunctionDef);
        assert!(ast.call_args(x[0].installer_call_site).iter().any(|&a| ast.kind(a) == NodeKind::ThisExpression));
    }

    #[test]
    fn crossfile_callback_filters() {
        let (ast, imported, binds, modules) = setup(r#"<button bindtap="other"/>"#, PAGE_JS);
        assert!(get_crossfile_callbacks(&ast, "pages/takePhoto/index.js", &imported, &binds, &modules).0.is_empty());
        let no_this = PAGE_JS.replace("util.init(this)", "util.init()");
        let (ast, imported, binds, modules) = setup(r#"<button bindtap="onShutterTap"/>"#, &no_this);
        assert!(get_crossfile_callbacks(&ast, "pages/takePhoto/index.js", &imported, &binds, &modules).0.is_empty());
    }

    #[test]
    fn missing_module_diagnosed() {
        let (ast, imported, binds, _) = setup(r#"<button bindtap="onShutterTap"/>"#, PAGE_JS);
        let (x, d) = get_crossfile_callbacks(&ast, "pages/takePhoto/index.js", &imported, &binds, &BTreeMap::new());
        assert!(x.is_empty());
        assert_eq!(d[0].code, DiagCode::ModuleNotFound);
    }

    #[test]
    fn entry_points() {
        let page = PageUnit {
            path: "pages/takePhoto/index".into(),
            wxml_source: String::new(),
            js_source: PAGE_JS.into(),
            in_subpackage: None,
        };
        let (ast, _, binds, _) = setup(r#"<button bindtap="onShutterTap"/>"#, PAGE_JS);
        let e: Vec<_> = find_entry_points(&page, &ast, &binds).into_iter().collect();
        assert_eq!(e.len(), 2);
        assert!(matches!(&e[0], EntryEvent::Lifecycle { name, .. } if name == "onReady"));
        assert!(matches!(&e[1], EntryEvent::Gui { bind, pending_dynamic: true } if bind.handler == "onShutterTap"));

        let app = parse_js("App({ onLaunch() {} })", "app.js").unwrap();
        let e = entries_for(APP_OWNER, "app.js", &app, &BTreeSet::new());
        assert!(matches!(e.iter().next(), Some(EntryEvent::Lifecycle { name, .. }) if name == "onLaunch"));

        let empty = parse_js("Page({})", "p.js").unwrap();
        assert!(find_entry_points(&page, &empty, &BTreeSet::new()).is_empty());
    }
}
