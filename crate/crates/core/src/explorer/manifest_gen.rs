//! Derives a runtime manifest from a fully loaded package: screens are
//! rendered from markup and handler effects from the call graph.

use super::matching::node_text;
use super::runtime::{Action, ApiCall, Route, RuntimeManifest, RuntimePage, UiWidget, WidgetAttrs};
use crate::frontend::{WxmlNode, ROOT_TAG};
use crate::graphs::{AppAnalysis, CcfgEdgeKind, CcfgSource, EntryEvent, FnKey, RouteSite, Target, Trigger};
use crate::package::MiniAppPackage;
use crate::policy::ApiCatalog;
use crate::frontend::NodeKind;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Loop attribute whose element is repeated when rendered.
pub const FOR_ATTR: &str = "wx:for";

#[derive(Debug, Clone)]
pub struct GenOptions {
    /// Render count for a looped element, keyed by `page#xpath`.
    pub for_counts: BTreeMap<String, usize>,
    pub default_for_count: usize,
    pub blocked: BTreeSet<String>,
    /// Subpackage root → directory recorded in the manifest; defaults to the root.
    pub subpackage_dirs: BTreeMap<String, String>,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self { for_counts: BTreeMap::new(), default_for_count: 1, blocked: BTreeSet::new(), subpackage_dirs: BTreeMap::new() }
    }
}

/// Synthetic handler name for a navigator element.
pub fn navigator_handler(xpath: &str) -> String {
    format!("navigator@{xpath}")
}

pub fn generate_manifest(pkg: &MiniAppPackage, analysis: &AppAnalysis, catalog: &ApiCatalog, opts: &GenOptions) -> RuntimeManifest {
    let parsed = &analysis.parsed;
    let ccfg = &analysis.mdg.ccfg;
    let utg = &analysis.mdg.utg;
    let mut pages = BTreeMap::new();
    for unit in &pkg.pages {
        let page = &unit.path;
        let mut rp = RuntimePage { blocked: opts.blocked.contains(page), ..RuntimePage::default() };
        let binds = parsed.bind_calls.get(page).cloned().unwrap_or_default();
        if let Some(tree) = parsed.wxmls.get(page) {
            let mut bindings: BTreeMap<String, BTreeMap<Action, String>> = BTreeMap::new();
            for b in &binds {
                bindings.entry(b.widget_xpath.clone()).or_default().insert(Action::for_event(&b.event), b.handler.clone());
            }
            for n in tree.iter() {
                if n.tag == "navigator" {
                    bindings.entry(n.xpath.clone()).or_default().entry(Action::Tap).or_insert_with(|| navigator_handler(&n.xpath));
                }
            }
            render(page, tree, "", &bindings, opts, &mut rp.widgets);
        }

        // Handler effects from the functions each GUI entry leads to.
        for e in &ccfg.edges {
            let CcfgSource::Entry(EntryEvent::Gui { bind, .. }) = &e.from else { continue };
            if &bind.page != page {
                continue;
            }
            let fns = closure(analysis, [e.to.clone()]);
            let h = rp.handlers.entry(bind.handler.clone()).or_default();
            h.api_events.extend(api_calls(analysis, catalog, &fns));
            if h.route.is_none() {
                h.route = route_in(analysis, page, &fns);
            }
        }
        for edge in utg.outgoing(page) {
            let Trigger::Navigator { xpath } = &edge.trigger else { continue };
            let route = match &edge.to {
                Target::Page { path } => Route { mechanism: edge.mechanism, target: Some(path.clone()) },
                Target::Back => Route { mechanism: edge.mechanism, target: None },
                Target::Placeholder { .. } => continue,
            };
            rp.handlers.entry(navigator_handler(xpath)).or_default().route.get_or_insert(route);
        }
        for h in rp.handlers.values_mut() {
            h.api_events.sort();
            h.api_events.dedup();
        }

        let mut hooks: BTreeMap<String, Vec<FnKey>> = BTreeMap::new();
        for e in &ccfg.edges {
            if let CcfgSource::Entry(EntryEvent::Lifecycle { owner, name, .. }) = &e.from {
                if owner == page {
                    hooks.entry(name.clone()).or_default().push(e.to.clone());
                }
            }
        }
        for (name, roots) in hooks {
            let mut calls = api_calls(analysis, catalog, &closure(analysis, roots));
            calls.sort();
            calls.dedup();
            if !calls.is_empty() {
                rp.lifecycle_api_events.insert(name, calls);
            }
        }
        pages.insert(page.clone(), rp);
    }
    let subpackages = pkg
        .subpackages
        .iter()
        .map(|s| (s.root_prefix.clone(), opts.subpackage_dirs.get(&s.root_prefix).cloned().unwrap_or_else(|| s.root_prefix.clone())))
        .collect();
    RuntimeManifest {
        launch: pkg.launch_page().map(str::to_string).unwrap_or_default(),
        pages,
        subpackages,
        tab_bar: pkg.manifest.tab_bar_pages.clone(),
    }
}

/// Renders element children of `node`, repeating looped elements and
/// recomputing sibling indices over the rendered output.
fn render(
    page: &str,
    node: &WxmlNode,
    parent_xpath: &str,
    bindings: &BTreeMap<String, BTreeMap<Action, String>>,
    opts: &GenOptions,
    out: &mut Vec<UiWidget>,
) {
    let xpath_here = if node.tag == ROOT_TAG && parent_xpath.is_empty() { format!("/{ROOT_TAG}") } else { parent_xpath.to_string() };
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for child in &node.children {
        let copies = if child.attr(FOR_ATTR).is_some() {
            opts.for_counts.get(&format!("{page}#{}", child.xpath)).copied().unwrap_or(opts.default_for_count)
        } else {
            1
        };
        for _ in 0..copies {
            let i = seen.entry(child.tag.as_str()).or_insert(0);
            *i += 1;
            let xpath = format!("{xpath_here}/{}[{}]", child.tag, i);
            out.push(widget(child, &xpath, bindings.get(&child.xpath)));
            render(page, child, &xpath, bindings, opts, out);
        }
    }
}

fn widget(node: &WxmlNode, xpath: &str, bindings: Option<&BTreeMap<Action, String>>) -> UiWidget {
    let text = node_text(node);
    let static_attr = |k: &str| node.attr(k).filter(|v| v.is_static()).map(|v| v.raw.clone());
    let bindings = bindings.cloned().unwrap_or_default();
    let mut actions: BTreeSet<Action> = bindings.keys().copied().collect();
    match node.tag.as_str() {
        "button" | "navigator" => {
            actions.insert(Action::Tap);
        }
        "input" | "textarea" => {
            actions.insert(Action::Input);
        }
        "scroll-view" => {
            actions.insert(Action::Scroll);
        }
        _ => {}
    }
    UiWidget {
        xpath: xpath.to_string(),
        attrs: WidgetAttrs {
            name: static_attr("name"),
            widget_type: Some(node.tag.clone()),
            text: (!text.is_empty()).then_some(text),
            bounds: None,
            resource_id: static_attr("id"),
        },
        actions,
        bindings,
    }
}

/// Functions reachable from `roots` over call edges.
fn closure(analysis: &AppAnalysis, roots: impl IntoIterator<Item = FnKey>) -> BTreeSet<FnKey> {
    let mut seen: BTreeSet<FnKey> = BTreeSet::new();
    let mut queue: VecDeque<FnKey> = roots.into_iter().collect();
    while let Some(f) = queue.pop_front() {
        if !seen.insert(f.clone()) {
            continue;
        }
        for e in &analysis.mdg.ccfg.edges {
            if e.kind == CcfgEdgeKind::DirectCall && e.from == CcfgSource::Function(f.clone()) {
                queue.push_back(e.to.clone());
            }
        }
    }
    seen
}

/// Call nodes whose innermost enclosing function is in `fns`.
fn calls_in(analysis: &AppAnalysis, fns: &BTreeSet<FnKey>) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for f in fns {
        let Some(ast) = analysis.parsed.ast(&f.file) else { continue };
        for call in ast.ids_of(NodeKind::CallExpression) {
            if ast.enclosing_function(call).unwrap_or(0) == f.node {
                out.push((f.file.clone(), call));
            }
        }
    }
    out
}

fn api_calls(analysis: &AppAnalysis, catalog: &ApiCatalog, fns: &BTreeSet<FnKey>) -> Vec<ApiCall> {
    let mut out = Vec::new();
    for (file, call) in calls_in(analysis, fns) {
        let ast = &analysis.parsed.asts[&file];
        let Some(api) = ast.value(call).filter(|a| catalog.contains(a)) else { continue };
        let span = ast.node(call).span;
        out.push(ApiCall { api: api.to_string(), args_digest: format!("{file}:{}:{}", span.line, span.col) });
    }
    out
}

/// First resolved routing call among the functions' own calls.
fn route_in(analysis: &AppAnalysis, page: &str, fns: &BTreeSet<FnKey>) -> Option<Route> {
    let calls: BTreeSet<(String, usize)> = calls_in(analysis, fns).into_iter().collect();
    analysis.mdg.utg.outgoing(page).into_iter().find_map(|e| {
        let RouteSite::Call { file, node, .. } = &e.site else { return None };
        if !calls.contains(&(file.clone(), *node)) {
            return None;
        }
        match &e.to {
            Target::Page { path } => Some(Route { mechanism: e.mechanism, target: Some(path.clone()) }),
            Target::Back => Some(Route { mechanism: e.mechanism, target: None }),
            Target::Placeholder { .. } => None,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::analyze;
    use crate::package::{Manifest, PageUnit};
    use crate::policy::Lexicon;

    fn pkg() -> MiniAppPackage {
        let page = |path: &str, wxml: &str, js: &str| PageUnit { path: path.into(), wxml_source: wxml.into(), js_source: js.into(), in_subpackage: None };
        MiniAppPackage {
            manifest: Manifest { page_paths: vec!["pages/a/index".into(), "pages/b/index".into()], ..Manifest::default() },
            pages: vec![
                page(
                    "pages/a/index",
                    "<view wx:for=\"{{list}}\"><text>row</text></view><button bindtap=\"go\">Go</button><navigator url=\"/pages/b/index\">B</navigator>",
                    "Page({ onLoad() { wx.chooseAddress({}) }, go() { helper() } }); function helper() { wx.getLocation({}); wx.navigateTo({ url: '/pages/b/index' }) }",
                ),
                page("pages/b/index", "<view/>", "Page({})"),
            ],
            complete: true,
            ..MiniAppPackage::default()
        }
    }

    #[test]
    fn renders_loops_and_derives_effects() {
        let p = pkg();
        let cat = Lexicon::builtin().catalog();
        let a = analyze(&p, &cat).unwrap();
        let opts = GenOptions { for_counts: [("pages/a/index#/page/view[1]".to_string(), 3)].into(), ..GenOptions::default() };
        let m = generate_manifest(&p, &a, &cat, &opts);
        assert_eq!(m.launch, "pages/a/index");
        let pa = &m.pages["pages/a/index"];
        let xpaths: Vec<_> = pa.widgets.iter().map(|w| w.xpath.as_str()).collect();
        assert_eq!(
            xpaths,
            ["/page/view[1]", "/page/view[1]/text[1]", "/page/view[2]", "/page/view[2]/text[1]", "/page/view[3]", "/page/view[3]/text[1]", "/page/button[1]", "/page/navigator[1]"]
        );
        let go = &pa.handlers["go"];
        assert_eq!(go.api_events.iter().map(|c| c.api.as_str()).collect::<Vec<_>>(), ["wx.getLocation"]);
        assert_eq!(go.route.as_ref().and_then(|r| r.target.as_deref()), Some("pages/b/index"));
        assert_eq!(pa.handlers[&navigator_handler("/page/navigator[1]")].route.as_ref().unwrap().target.as_deref(), Some("pages/b/index"));
        assert_eq!(pa.lifecycle_api_events["onLoad"][0].api, "wx.chooseAddress");
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(RuntimeManifest::from_json(&json).unwrap(), m);
    }
}
