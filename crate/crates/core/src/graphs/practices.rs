//! Queries over the merged graph: sensitive call sites with their trigger
//! paths or dead-code verdicts, and routes into unloaded subpackages.

use super::ccfg::EntryEvent;
use super::mdg::{Layer, Mdg};
use super::utg::{StackEffect, Target, TransitionEdge};
use crate::diag::{DiagCode, Diagnostic};
use crate::policy::{ApiCatalog, EntityCategory};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CallSite {
    pub file: String,
    pub node: usize,
    pub mdg_id: usize,
    pub line: u32,
    pub col: u32,
    pub page: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathStep {
    pub from: usize,
    pub to: usize,
    pub layer: Layer,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeadReason {
    UnusedFunction,
    OrphanedPage,
}

impl DeadReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::UnusedFunction => "unused-function",
            Self::OrphanedPage => "orphaned-page",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Reachable { entry: EntryEvent, trigger_path: Vec<PathStep> },
    DeadCode { reason: DeadReason },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrivacyPractice {
    pub api: String,
    pub call_site: CallSite,
    pub entity_category: EntityCategory,
    #[serde(flatten)]
    pub verdict: Verdict,
}

impl PrivacyPractice {
    pub fn is_reachable(&self) -> bool {
        matches!(self.verdict, Verdict::Reachable { .. })
    }
}

/// Pages reachable in the transition graph from the launch and tab pages.
pub fn utg_reachable_pages(mdg: &Mdg) -> BTreeSet<String> {
    let utg = &mdg.utg;
    let mut seen = utg.roots();
    let mut queue: VecDeque<String> = seen.iter().cloned().collect();
    while let Some(p) = queue.pop_front() {
        for e in utg.outgoing(&p) {
            if let Some(t) = e.to.page() {
                if seen.insert(t.to_string()) {
                    queue.push_back(t.to_string());
                }
            }
        }
    }
    seen
}

/// Shortest-path search from a set of entry edges. After entering, the
/// search follows direct-call edges and descends the AST without entering
/// nested function definitions.
struct Search {
    /// node → edge index that first reached it.
    via: BTreeMap<usize, usize>,
    /// node → entry that reached it.
    origin: BTreeMap<usize, usize>,
}

fn adjacency(mdg: &Mdg) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); mdg.nodes.len()];
    for (i, e) in mdg.edges.iter().enumerate() {
        let follow = match e.layer {
            Layer::Ast => mdg.nodes[e.to].kind != "FunctionDef",
            Layer::Ccfg => e.label == "direct-call",
            _ => false,
        };
        if follow {
            adj[e.from].push(i);
        }
    }
    adj
}

fn search(mdg: &Mdg, adj: &[Vec<usize>], seeds: &[usize]) -> Search {
    let mut s = Search { via: BTreeMap::new(), origin: BTreeMap::new() };
    let mut queue = VecDeque::new();
    for (k, &ei) in seeds.iter().enumerate() {
        let to = mdg.edges[ei].to;
        if let std::collections::btree_map::Entry::Vacant(v) = s.via.entry(to) {
            v.insert(ei);
            s.origin.insert(to, k);
            queue.push_back(to);
        }
    }
    while let Some(n) = queue.pop_front() {
        for &ei in &adj[n] {
            let to = mdg.edges[ei].to;
            if let std::collections::btree_map::Entry::Vacant(v) = s.via.entry(to) {
                v.insert(ei);
                s.origin.insert(to, s.origin[&n]);
                queue.push_back(to);
            }
        }
    }
    s
}

fn path_to(mdg: &Mdg, s: &Search, target: usize) -> Vec<PathStep> {
    let mut steps = Vec::new();
    let mut n = target;
    let mut seen = BTreeSet::new();
    while let Some(&ei) = s.via.get(&n) {
        let e = &mdg.edges[ei];
        steps.push(PathStep { from: e.from, to: e.to, layer: e.layer, label: e.label.clone() });
        // Entry edges may be self-loops (page root → module code).
        if e.layer == Layer::Ccfg && e.label != "direct-call" || !seen.insert(n) {
            break;
        }
        n = e.from;
    }
    steps.reverse();
    steps
}

/// Entry edges ordered by (page, target node) for deterministic tie-breaks.
fn sorted_entries<'m>(mdg: &'m Mdg, filter: impl Fn(&EntryEvent) -> bool) -> Vec<(&'m EntryEvent, usize)> {
    let mut out: Vec<(&EntryEvent, usize)> = mdg.entry_edges.iter().filter(|(ev, _)| filter(ev)).map(|(ev, i)| (ev, *i)).collect();
    out.sort_by(|a, b| {
        let ka = (a.0.page().unwrap_or(""), mdg.edges[a.1].to, a.0);
        let kb = (b.0.page().unwrap_or(""), mdg.edges[b.1].to, b.0);
        ka.cmp(&kb)
    });
    out
}

pub fn reachable_practices(mdg: &Mdg, catalog: &ApiCatalog) -> Vec<PrivacyPractice> {
    let live_pages = utg_reachable_pages(mdg);
    let adj = adjacency(mdg);
    let live = sorted_entries(mdg, |ev| ev.page().is_none_or(|p| live_pages.contains(p)));
    let all = sorted_entries(mdg, |_| true);
    let live_seeds: Vec<usize> = live.iter().map(|(_, i)| *i).collect();
    let all_seeds: Vec<usize> = all.iter().map(|(_, i)| *i).collect();
    let from_live = search(mdg, &adj, &live_seeds);
    let from_any = search(mdg, &adj, &all_seeds);

    let mut out = Vec::new();
    for n in &mdg.nodes {
        if n.kind != "CallExpression" {
            continue;
        }
        let Some(api) = n.value.as_deref() else { continue };
        let Some(category) = catalog.category(api) else { continue };
        let file = n.file.clone().unwrap_or_default();
        let span = n.span.unwrap_or_default();
        let page = mdg.parsed_page_of(&file);
        let call_site = CallSite { file, node: n.ast_node.unwrap_or_default(), mdg_id: n.id, line: span.line, col: span.col, page };
        let verdict = if from_live.via.contains_key(&n.id) {
            let entry = live[from_live.origin[&n.id]].0.clone();
            Verdict::Reachable { entry, trigger_path: path_to(mdg, &from_live, n.id) }
        } else if from_any.via.contains_key(&n.id) {
            Verdict::DeadCode { reason: DeadReason::OrphanedPage }
        } else {
            Verdict::DeadCode { reason: DeadReason::UnusedFunction }
        };
        out.push(PrivacyPractice { api: api.to_string(), call_site, entity_category: category, verdict });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransitionPath {
    pub target: String,
    pub subpackage: String,
    pub edges: Vec<TransitionEdge>,
}

/// Shortest route from the launch page to every unloaded subpackage page,
/// in breadth-first discovery order. Unreachable pages are diagnosed.
pub fn subpackage_transition_paths(mdg: &Mdg) -> (Vec<TransitionPath>, Vec<Diagnostic>) {
    let utg = &mdg.utg;
    let mut out = Vec::new();
    let mut diags = Vec::new();
    let Some(launch) = utg.launch.clone() else { return (out, diags) };
    let mut via: BTreeMap<String, Option<&TransitionEdge>> = BTreeMap::new();
    via.insert(launch.clone(), None);
    let mut queue = VecDeque::from([launch]);
    let mut order = Vec::new();
    while let Some(p) = queue.pop_front() {
        for e in utg.outgoing(&p) {
            if e.stack_effect == StackEffect::Pop {
                continue;
            }
            let Target::Page { path } = &e.to else { continue };
            if !via.contains_key(path) {
                via.insert(path.clone(), Some(e));
                queue.push_back(path.clone());
            }
        }
        order.push(p);
    }
    for page in &order {
        let Some(root) = utg.subpackage_pages.get(page) else { continue };
        if utg.nodes.get(page).is_some_and(|n| n.loaded) {
            continue;
        }
        let mut edges = Vec::new();
        let mut cur = page.clone();
        while let Some(Some(e)) = via.get(&cur) {
            edges.push((*e).clone());
            cur = e.from.clone();
        }
        edges.reverse();
        out.push(TransitionPath { target: page.clone(), subpackage: root.clone(), edges });
    }
    for (page, root) in &utg.subpackage_pages {
        let loaded = utg.nodes.get(page).is_some_and(|n| n.loaded);
        if !loaded && !via.contains_key(page) {
            diags.push(Diagnostic::new(
                DiagCode::UnreachableSubpackage,
                page,
                format!("no route from the launch page into subpackage {root}"),
            ));
        }
    }
    (out, diags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{analyze, AppAnalysis};
    use crate::package::{MiniAppPackage, PageUnit, SubpackageSpec};
    use crate::policy::Lexicon;

    fn run(pages: &[(&str, &str, &str)], extra: &[&str], tabs: &[&str]) -> AppAnalysis {
        let mut p = MiniAppPackage::default();
        for (path, wxml, js) in pages {
            p.manifest.page_paths.push(path.to_string());
            p.pages.push(PageUnit { path: path.to_string(), wxml_source: wxml.to_string(), js_source: js.to_string(), in_subpackage: None });
        }
        for e in extra {
            p.manifest.page_paths.push(e.to_string());
        }
        p.manifest.tab_bar_pages = tabs.iter().map(|s| s.to_string()).collect();
        p.pages.sort_by(|a, b| a.path.cmp(&b.path));
        p.complete = true;
        analyze(&p, &Lexicon::builtin().catalog()).unwrap()
    }

    #[test]
    fn unused_function_is_dead() {
        let a = run(&[("pages/a/index", "", "Page({ unused() { wx.getLocation({}) } })")], &[], &[]);
        assert_eq!(a.practices.len(), 1);
        assert_eq!(a.practices[0].verdict, Verdict::DeadCode { reason: DeadReason::UnusedFunction });
        assert!(a.diagnostics.iter().any(|d| d.code == DiagCode::DeadCode));
    }

    #[test]
    fn orphaned_page_is_dead() {
        let a = run(
            &[("pages/a/index", "", "Page({})"), ("pages/o/index", "", "Page({ onLoad() { wx.getLocation({}) } })")],
            &[],
            &[],
        );
        assert_eq!(a.practices[0].verdict, Verdict::DeadCode { reason: DeadReason::OrphanedPage });
    }

    #[test]
    fn reachable_through_call_chain() {
        let js = "function helper() { wx.chooseImage({ success(res) { wx.getLocation({}) } }) }\nPage({ tap() { this.go() }, go() { helper() } })";
        let a = run(&[("pages/a/index", "<button bindtap=\"tap\"/>", js)], &[], &[]);
        assert_eq!(a.practices.len(), 2);
        for p in &a.practices {
            let Verdict::Reachable { trigger_path, entry } = &p.verdict else { panic!("{p:?}") };
            assert!(entry.describe().contains("tap"));
            let first = &trigger_path[0];
            assert_eq!((first.layer, first.label.as_str()), (Layer::Ccfg, "gui-event"));
            assert_eq!(trigger_path.last().unwrap().to, p.call_site.mdg_id);
            for w in trigger_path.windows(2) {
                assert_eq!(w[0].to, w[1].from);
            }
            assert!(trigger_path.iter().all(|s| s.layer != Layer::Utg));
        }
    }

    #[test]
    fn tab_page_is_a_root() {
        let a = run(
            &[("pages/a/index", "", "Page({})"), ("pages/t/index", "", "Page({ onShow() { wx.getLocation({}) } })")],
            &[],
            &["pages/t/index"],
        );
        assert!(a.practices[0].is_reachable());
    }

    #[test]
    fn shortest_subpackage_route() {
        let mut p = MiniAppPackage::default();
        let pages = [
            ("pages/a/index", "<navigator url=\"/pages/b/index\"/><navigator url=\"/pages/c/index\"/>"),
            ("pages/b/index", "<navigator url=\"/pages/c/index\"/><navigator url=\"/sub/x/index\"/>"),
            ("pages/c/index", "<navigator url=\"/sub/x/index\"/>"),
        ];
        for (path, wxml) in pages {
            p.manifest.page_paths.push(path.into());
            p.pages.push(PageUnit { path: path.into(), wxml_source: wxml.into(), js_source: "Page({})".into(), in_subpackage: None });
        }
        p.subpackages.push(SubpackageSpec {
            root_prefix: "sub".into(),
            page_paths: vec!["sub/x/index".into(), "sub/y/index".into()],
            loaded: false,
            source_dir: None,
        });
        let a = analyze(&p, &Lexicon::builtin().catalog()).unwrap();
        assert_eq!(a.transition_paths.len(), 1);
        let tp = &a.transition_paths[0];
        assert_eq!(tp.target, "sub/x/index");
        let hops: Vec<_> = tp.edges.iter().map(|e| (e.from.as_str(), e.to.label())).collect();
        assert_eq!(hops, vec![("pages/a/index", "pages/b/index".to_string()), ("pages/b/index", "sub/x/index".to_string())]);
        assert!(a.diagnostics.iter().any(|d| d.code == DiagCode::UnreachableSubpackage && d.location == "sub/y/index"));
    }
}
