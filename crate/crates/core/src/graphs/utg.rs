//! UI transition graph: pages and the routing sites that move between them.

use super::js_query::LIFECYCLE_NAMES;
use super::udfg::{routing_url_node, Anchor, Udfg};
use super::{resolve_page_url, ParsedApp, APP_FILE};
use crate::diag::{DiagCode, Diagnostic};
use crate::frontend::{BindCall, NodeKind, WxmlNode};
use crate::package::MiniAppPackage;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "navigate")]
    Navigate,
    #[serde(rename = "navigateBack")]
    NavigateBack,
    #[serde(rename = "redirect")]
    Redirect,
    #[serde(rename = "reLaunch")]
    ReLaunch,
    #[serde(rename = "switchTab")]
    SwitchTab,
    #[serde(rename = "wx.navigateTo")]
    NavigateTo,
    #[serde(rename = "wx.navigateBack")]
    ApiNavigateBack,
    #[serde(rename = "wx.redirectTo")]
    RedirectTo,
    #[serde(rename = "wx.reLaunch")]
    ApiReLaunch,
    #[serde(rename = "wx.switchTab")]
    ApiSwitchTab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StackEffect {
    Push,
    Pop,
    Replace,
    ClearOpen,
    ClearTab,
}

impl StackEffect {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Push => "push",
            Self::Pop => "pop",
            Self::Replace => "replace",
            Self::ClearOpen => "clear-open",
            Self::ClearTab => "clear-tab",
        }
    }
}

impl Mechanism {
    pub const ALL: [Mechanism; 10] = [
        Self::Navigate,
        Self::NavigateBack,
        Self::Redirect,
        Self::ReLaunch,
        Self::SwitchTab,
        Self::NavigateTo,
        Self::ApiNavigateBack,
        Self::RedirectTo,
        Self::ApiReLaunch,
        Self::ApiSwitchTab,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Navigate => "navigate",
            Self::NavigateBack => "navigateBack",
            Self::Redirect => "redirect",
            Self::ReLaunch => "reLaunch",
            Self::SwitchTab => "switchTab",
            Self::NavigateTo => "wx.navigateTo",
            Self::ApiNavigateBack => "wx.navigateBack",
            Self::RedirectTo => "wx.redirectTo",
            Self::ApiReLaunch => "wx.reLaunch",
            Self::ApiSwitchTab => "wx.switchTab",
        }
    }

    /// `<navigator open-type="...">` value.
    pub fn from_open_type(v: &str) -> Option<Self> {
        Self::ALL[..5].iter().copied().find(|m| m.name() == v)
    }

    /// Routing API by dotted callee name.
    pub fn from_api(callee: &str) -> Option<Self> {
        Self::ALL[5..].iter().copied().find(|m| m.name() == callee)
    }

    pub fn from_name(v: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == v)
    }

    pub fn stack_effect(self) -> StackEffect {
        match self {
            Self::Navigate | Self::NavigateTo => StackEffect::Push,
            Self::NavigateBack | Self::ApiNavigateBack => StackEffect::Pop,
            Self::Redirect | Self::RedirectTo => StackEffect::Replace,
            Self::ReLaunch | Self::ApiReLaunch => StackEffect::ClearOpen,
            Self::SwitchTab | Self::ApiSwitchTab => StackEffect::ClearTab,
        }
    }
}

/// Symbolic target of back navigation.
pub const BACK_TARGET: &str = "#back";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Target {
    Page { path: String },
    Back,
    Placeholder { var_name: String },
}

impl Target {
    pub fn page(&self) -> Option<&str> {
        match self {
            Target::Page { path } => Some(path),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Target::Page { path } => path.clone(),
            Target::Back => BACK_TARGET.to_string(),
            Target::Placeholder { var_name } => format!("?{var_name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum RouteSite {
    Navigator { page: String, xpath: String },
    Call { file: String, node: usize, url_node: Option<usize> },
}

impl RouteSite {
    /// Data-flow anchor holding the url value.
    pub fn url_anchor(&self) -> Option<Anchor> {
        match self {
            RouteSite::Navigator { page, xpath } => {
                Some(Anchor::Widget { page: page.clone(), xpath: xpath.clone(), attr: "url".into() })
            }
            RouteSite::Call { file, url_node, .. } => url_node.map(|node| Anchor::Ast { file: file.clone(), node }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Trigger {
    Navigator { xpath: String },
    Bind(BindCall),
    Lifecycle { name: String },
    Function { file: String, name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TransitionEdge {
    pub from: String,
    pub to: Target,
    pub mechanism: Mechanism,
    pub stack_effect: StackEffect,
    pub trigger: Trigger,
    pub site: RouteSite,
    pub query: Option<String>,
    /// Variable a concrete target was resolved from.
    pub resolved_from: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WidgetState {
    pub xpath: String,
    pub widget_type: String,
    pub resource_id: Option<String>,
    pub text: Option<String>,
    /// (event, callback method)
    pub events: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PageState {
    pub path: String,
    pub loaded: bool,
    pub subpackage: Option<String>,
    pub widgets: Vec<WidgetState>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Utg {
    pub nodes: BTreeMap<String, PageState>,
    pub edges: Vec<TransitionEdge>,
    pub launch: Option<String>,
    pub tab_pages: Vec<String>,
    pub declared: BTreeSet<String>,
    /// Declared subpackage page → root prefix.
    pub subpackage_pages: BTreeMap<String, String>,
}

impl Utg {
    pub fn outgoing(&self, page: &str) -> Vec<&TransitionEdge> {
        self.edges.iter().filter(|e| e.from == page).collect()
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &TransitionEdge> {
        self.edges.iter().filter(|e| matches!(e.to, Target::Placeholder { .. }))
    }

    /// Launch page and tab pages.
    pub fn roots(&self) -> BTreeSet<String> {
        self.launch.iter().chain(self.tab_pages.iter()).cloned().collect()
    }

    fn add_unloaded(&mut self, page: &str) {
        if !self.nodes.contains_key(page) {
            self.nodes.insert(
                page.to_string(),
                PageState {
                    path: page.to_string(),
                    loaded: false,
                    subpackage: self.subpackage_pages.get(page).cloned(),
                    widgets: Vec::new(),
                },
            );
        }
    }

    /// Checks a concrete target; `Err` carries the diagnostic for a dropped edge.
    fn check_target(&self, from: &str, target: &str, mechanism: Mechanism) -> Result<(), Diagnostic> {
        if !self.declared.contains(target) {
            return Err(Diagnostic::new(DiagCode::UndeclaredTarget, from, format!("{} target {target} is not declared", mechanism.name())));
        }
        if mechanism.stack_effect() == StackEffect::ClearTab && !self.tab_pages.iter().any(|t| t == target) {
            return Err(Diagnostic::new(DiagCode::SwitchTabNonTab, from, format!("{} target {target} is not a tab page", mechanism.name())));
        }
        Ok(())
    }
}

fn widget_states(tree: &WxmlNode, binds: &BTreeSet<BindCall>) -> Vec<WidgetState> {
    let mut by_xpath: BTreeMap<&str, Vec<(String, String)>> = BTreeMap::new();
    for b in binds {
        by_xpath.entry(&b.widget_xpath).or_default().push((b.event.clone(), b.handler.clone()));
    }
    tree.iter()
        .into_iter()
        .filter(|n| n.tag == "navigator" || by_xpath.contains_key(n.xpath.as_str()))
        .map(|n| WidgetState {
            xpath: n.xpath.clone(),
            widget_type: n.tag.clone(),
            resource_id: n.attr("id").filter(|v| v.is_static()).map(|v| v.raw.clone()),
            text: n.text.as_ref().filter(|t| t.is_static()).map(|t| t.raw.trim().to_string()).filter(|t| !t.is_empty()),
            events: by_xpath.get(n.xpath.as_str()).cloned().unwrap_or_default(),
        })
        .collect()
}

/// Pages a routing call in `file` acts on: the page itself, the launch page
/// for the app file, or the pages importing a shared module.
fn source_pages(utg: &Utg, parsed: &ParsedApp, file: &str) -> Vec<String> {
    if let Some(p) = parsed.page_of(file) {
        return vec![p.to_string()];
    }
    if file == APP_FILE {
        return utg.launch.iter().filter(|l| utg.nodes.get(*l).is_some_and(|n| n.loaded)).cloned().collect();
    }
    let mut pages = parsed.importers(file);
    pages.sort();
    pages.dedup();
    pages
}

fn call_trigger(parsed: &ParsedApp, file: &str, page: &str, call: usize) -> Trigger {
    let ast = &parsed.asts[file];
    let idx = &parsed.index[file];
    let Some(f) = ast.enclosing_function(call) else {
        return Trigger::Function { file: file.to_string(), name: super::js_query::MODULE_FN.to_string() };
    };
    // Outermost page method containing the call.
    let method = std::iter::once(f)
        .chain(ast.ancestors(f))
        .filter(|&a| ast.kind(a) == NodeKind::FunctionDef)
        .filter_map(|a| idx.methods.iter().find(|(_, &m)| m == a).map(|(n, _)| n.clone()))
        .last();
    if let Some(name) = method {
        if LIFECYCLE_NAMES.contains(&name.as_str()) {
            return Trigger::Lifecycle { name };
        }
        if let Some(b) = parsed.bind_calls.get(page).and_then(|bs| bs.iter().find(|b| b.handler == name)) {
            return Trigger::Bind(b.clone());
        }
        return Trigger::Function { file: file.to_string(), name };
    }
    Trigger::Function { file: file.to_string(), name: super::js_query::function_name(ast, f) }
}

pub fn build_utg(pkg: &MiniAppPackage, parsed: &ParsedApp) -> (Utg, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut utg = Utg {
        launch: pkg.launch_page().map(str::to_string),
        tab_pages: pkg.manifest.tab_bar_pages.clone(),
        declared: pkg.list_pages(crate::package::PageScope::AllDeclared).into_iter().collect(),
        subpackage_pages: pkg
            .subpackages
            .iter()
            .flat_map(|s| s.page_paths.iter().map(move |p| (p.clone(), s.root_prefix.clone())))
            .collect(),
        ..Utg::default()
    };
    let empty = BTreeSet::new();
    for page in &pkg.pages {
        let widgets = parsed
            .wxmls
            .get(&page.path)
            .map(|t| widget_states(t, parsed.bind_calls.get(&page.path).unwrap_or(&empty)))
            .unwrap_or_default();
        utg.nodes.insert(
            page.path.clone(),
            PageState { path: page.path.clone(), loaded: true, subpackage: page.in_subpackage.clone(), widgets },
        );
    }

    let mut edges = BTreeSet::new();
    let mut push = |utg: &Utg, diags: &mut Vec<Diagnostic>, edge: TransitionEdge| {
        if let Target::Page { path } = &edge.to {
            if let Err(d) = utg.check_target(&edge.from, path, edge.mechanism) {
                diags.push(d);
                return;
            }
        }
        edges.insert(edge);
    };

    for (page, tree) in &parsed.wxmls {
        for n in tree.iter().into_iter().filter(|n| n.tag == "navigator") {
            if n.attr("target").is_some_and(|t| t.raw == "miniProgram") {
                continue;
            }
            let mechanism = match n.attr("open-type").map(|v| v.raw.trim()) {
                None | Some("") => Mechanism::Navigate,
                Some(v) => Mechanism::from_open_type(v).unwrap_or_else(|| {
                    diags.push(Diagnostic::new(DiagCode::UnknownOpenType, page, format!("{}: open-type {v:?}", n.xpath)));
                    Mechanism::Navigate
                }),
            };
            let site = RouteSite::Navigator { page: page.clone(), xpath: n.xpath.clone() };
            let mut query = None;
            let to = if mechanism.stack_effect() == StackEffect::Pop {
                Target::Back
            } else {
                let Some(url) = n.attr("url") else { continue };
                if url.is_static() {
                    match resolve_page_url(page, &url.raw) {
                        Some((p, q)) => {
                            query = q;
                            Target::Page { path: p }
                        }
                        None => continue,
                    }
                } else {
                    Target::Placeholder { var_name: url.bindings.join(",") }
                }
            };
            let trigger = Trigger::Navigator { xpath: n.xpath.clone() };
            let edge = TransitionEdge { from: page.clone(), to, mechanism, stack_effect: mechanism.stack_effect(), trigger, site, query, resolved_from: None };
            push(&utg, &mut diags, edge);
        }
    }

    for (file, ast) in &parsed.asts {
        let pages = source_pages(&utg, parsed, file);
        for call in ast.ids_of(NodeKind::CallExpression) {
            let Some(mechanism) = ast.value(call).and_then(Mechanism::from_api) else { continue };
            let url_node = routing_url_node(ast, call);
            for page in &pages {
                let mut query = None;
                let to = if mechanism.stack_effect() == StackEffect::Pop {
                    Target::Back
                } else {
                    let Some(u) = url_node else { continue };
                    if ast.kind(u) == NodeKind::StringLiteral {
                        match resolve_page_url(page, ast.value(u).unwrap_or_default()) {
                            Some((p, q)) => {
                                query = q;
                                Target::Page { path: p }
                            }
                            None => continue,
                        }
                    } else {
                        Target::Placeholder { var_name: ast.node(u).text.clone() }
                    }
                };
                let edge = TransitionEdge {
                    from: page.clone(),
                    to,
                    mechanism,
                    stack_effect: mechanism.stack_effect(),
                    trigger: call_trigger(parsed, file, page, call),
                    site: RouteSite::Call { file: file.clone(), node: call, url_node },
                    query,
                    resolved_from: None,
                };
                push(&utg, &mut diags, edge);
            }
        }
    }
    utg.edges = edges.into_iter().collect();
    let targets: Vec<String> = utg.edges.iter().filter_map(|e| e.to.page().map(str::to_string)).collect();
    for t in targets {
        utg.add_unloaded(&t);
    }
    (utg, diags)
}

/// Replaces each placeholder edge by one concrete edge per string constant
/// reaching its url through data flow. Unresolvable placeholders are kept.
pub fn resolve_placeholders(utg: &Utg, udfg: &Udfg) -> (Utg, Vec<Diagnostic>) {
    let mut out = utg.clone();
    let mut diags = Vec::new();
    let mut edges = BTreeSet::new();
    for e in &utg.edges {
        let Target::Placeholder { var_name } = &e.to else {
            edges.insert(e.clone());
            continue;
        };
        let starts = e.site.url_anchor().map(|a| udfg.objects_at(&a)).unwrap_or_default();
        let mut resolved = Vec::new();
        for lit in udfg.backward_literals(&starts) {
            let Some((page, query)) = resolve_page_url(&e.from, &lit) else { continue };
            match utg.check_target(&e.from, &page, e.mechanism) {
                Ok(()) => resolved.push(TransitionEdge {
                    to: Target::Page { path: page },
                    query,
                    resolved_from: Some(var_name.clone()),
                    ..e.clone()
                }),
                Err(d) => diags.push(d),
            }
        }
        if resolved.is_empty() {
            diags.push(Diagnostic::new(
                DiagCode::UnresolvedPlaceholder,
                &e.from,
                format!("{} target {var_name:?} has no constant value", e.mechanism.name()),
            ));
            edges.insert(e.clone());
        }
        edges.extend(resolved);
    }
    out.edges = edges.into_iter().collect();
    let targets: Vec<String> = out.edges.iter().filter_map(|e| e.to.page().map(str::to_string)).collect();
    for t in targets {
        out.add_unloaded(&t);
    }
    (out, diags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_ccfg, build_udfg, parse_app};
    use crate::package::{PageUnit, SubpackageSpec};

    fn pkg(pages: &[(&str, &str, &str)]) -> MiniAppPackage {
        let mut p = MiniAppPackage::default();
        for (path, wxml, js) in pages {
            p.manifest.page_paths.push(path.to_string());
            p.pages.push(PageUnit { path: path.to_string(), wxml_source: wxml.to_string(), js_source: js.to_string(), in_subpackage: None });
        }
        p.pages.sort_by(|a, b| a.path.cmp(&b.path));
        p.complete = true;
        p
    }

    fn full(p: &MiniAppPackage) -> (Utg, Vec<Diagnostic>) {
        let parsed = parse_app(p);
        let (ccfg, _) = build_ccfg(p, &parsed);
        let udfg = build_udfg(&parsed, &ccfg);
        let (utg, mut d) = build_utg(p, &parsed);
        let (utg, d2) = resolve_placeholders(&utg, &udfg);
        d.extend(d2);
        (utg, d)
    }

    #[test]
    fn stack_effects_total() {
        use StackEffect::*;
        let want = [Push, Pop, Replace, ClearOpen, ClearTab, Push, Pop, Replace, ClearOpen, ClearTab];
        for (m, e) in Mechanism::ALL.iter().zip(want) {
            assert_eq!(m.stack_effect(), e, "{}", m.name());
            assert_eq!(Mechanism::from_name(m.name()), Some(*m));
        }
        assert_eq!(serde_json::to_string(&Mechanism::NavigateTo).unwrap(), "\"wx.navigateTo\"");
    }

    #[test]
    fn api_edge_and_placeholder() {
        let mut p = pkg(&[
            ("pages/myInfo/index", "<navigator url=\"{{takePhotoPath}}\">photo</navigator><button bindtap=\"navToCheckID\"/>",
             "Page({ data: { takePhotoPath: '/pages/takePhoto/index' }, navToCheckID() { wx.navigateTo({ url: '/pages/checkID/index?from=me' }) } })"),
            ("pages/takePhoto/index", "", "Page({})"),
        ]);
        p.subpackages.push(SubpackageSpec { root_prefix: "pages/checkID".into(), page_paths: vec!["pages/checkID/index".into()], loaded: false, source_dir: None });
        let parsed = parse_app(&p);
        let (utg, d) = build_utg(&p, &parsed);
        assert!(d.is_empty(), "{d:?}");
        let ph: Vec<_> = utg.placeholders().collect();
        assert_eq!(ph.len(), 1);
        assert_eq!(ph[0].to, Target::Placeholder { var_name: "takePhotoPath".into() });
        let api = utg.edges.iter().find(|e| e.mechanism == Mechanism::NavigateTo).unwrap();
        assert_eq!(api.to.page(), Some("pages/checkID/index"));
        assert_eq!(api.stack_effect, StackEffect::Push);
        assert_eq!(api.query.as_deref(), Some("from=me"));
        assert!(matches!(&api.trigger, Trigger::Bind(b) if b.handler == "navToCheckID"));
        assert!(!utg.nodes["pages/checkID/index"].loaded);

        let (utg, d) = full(&p);
        assert!(d.is_empty(), "{d:?}");
        assert_eq!(utg.placeholders().count(), 0);
        let e = utg.edges.iter().find(|e| e.resolved_from.is_some()).unwrap();
        assert_eq!(e.to.page(), Some("pages/takePhoto/index"));
        assert_eq!(e.from, "pages/myInfo/index");
    }

    #[test]
    fn isolated_page_and_unresolved() {
        let p = pkg(&[("pages/a/index", "<navigator url=\"{{nowhere}}\"/>", "Page({})"), ("pages/b/index", "", "Page({})")]);
        let (utg, d) = full(&p);
        assert_eq!(utg.outgoing("pages/b/index").len(), 0);
        assert_eq!(utg.placeholders().count(), 1);
        assert!(d.iter().any(|d| d.code == DiagCode::UnresolvedPlaceholder));
    }

    #[test]
    fn bad_targets_dropped() {
        let p = pkg(&[(
            "pages/a/index",
            "<navigator open-type=\"exit\" url=\"/pages/a/index\"/><navigator open-type=\"switchTab\" url=\"/pages/a/index\"/><navigator url=\"/pages/zz/index\"/><navigator open-type=\"navigateBack\"/>",
            "Page({})",
        )]);
        let (utg, d) = full(&p);
        let codes: BTreeSet<_> = d.iter().map(|d| d.code).collect();
        assert!(codes.contains(&DiagCode::UnknownOpenType));
        assert!(codes.contains(&DiagCode::SwitchTabNonTab));
        assert!(codes.contains(&DiagCode::UndeclaredTarget));
        assert_eq!(utg.edges.len(), 2);
        assert!(utg.edges.iter().any(|e| e.to == Target::Back));
    }

    #[test]
    fn two_branch_literals_two_edges() {
        let p = pkg(&[
            ("pages/m/index", "<button bindtap=\"go\"/>", "Page({ go() { var u = '/pages/a/index'; if (x) { u = '/pages/b/index' } wx.redirectTo({ url: u }) } })"),
            ("pages/a/index", "", ""),
            ("pages/b/index", "", ""),
        ]);
        let (utg, _) = full(&p);
        let targets: BTreeSet<_> = utg.outgoing("pages/m/index").into_iter().filter_map(|e| e.to.page()).collect();
        assert_eq!(targets, ["pages/a/index", "pages/b/index"].into_iter().collect());
    }
}
