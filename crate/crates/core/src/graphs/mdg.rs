//! Merged dependency graph: every AST node of every file plus the UTG page
//! nodes, with each page node identified with its logic file's AST root.
//! Edges of all four layers are lifted onto these node ids.

use super::ccfg::{Ccfg, CcfgEdgeKind, CcfgSource, EntryEvent};
use super::udfg::{Anchor, Udfg};
use super::utg::{Target, Utg};
use super::ParsedApp;
use crate::frontend::Span;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    MainOnly,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Ast,
    Utg,
    Ccfg,
    Udfg,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ast => "ast",
            Self::Utg => "utg",
            Self::Ccfg => "ccfg",
            Self::Udfg => "udfg",
        }
    }
}

/// Identity of a node independent of numbering, for comparing graphs built
/// from different package states.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum NodeKey {
    Page(String),
    Ast { file: String, node: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MdgNode {
    pub id: usize,
    /// `ast` or `page`.
    pub layer: &'static str,
    pub kind: String,
    pub file: Option<String>,
    pub span: Option<Span>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub page: Option<String>,
    #[serde(skip)]
    pub value: Option<String>,
    #[serde(skip)]
    pub ast_node: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MdgEdge {
    pub from: usize,
    pub to: usize,
    pub layer: Layer,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MdgError {
    #[error("{layer} edge references a missing node: {detail}")]
    InconsistentAnchors { layer: &'static str, detail: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct Mdg {
    pub phase: Phase,
    pub nodes: Vec<MdgNode>,
    pub edges: Vec<MdgEdge>,
    #[serde(skip)]
    pub utg: Utg,
    #[serde(skip)]
    pub ccfg: Ccfg,
    #[serde(skip)]
    pub udfg: Udfg,
    /// Entry events with the index of the edge they contribute.
    #[serde(skip)]
    pub entry_edges: Vec<(EntryEvent, usize)>,
    #[serde(skip)]
    base: BTreeMap<String, usize>,
    #[serde(skip)]
    pages: BTreeMap<String, usize>,
    #[serde(skip)]
    page_of_file: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct MdgDoc<'a> {
    phase: Phase,
    nodes: &'a [MdgNode],
    edges: &'a [MdgEdge],
}

impl Mdg {
    pub fn ast_id(&self, file: &str, node: usize) -> Option<usize> {
        let base = *self.base.get(file)?;
        let id = base + node;
        (id < self.nodes.len() && self.nodes[id].file.as_deref() == Some(file) && self.nodes[id].ast_node == Some(node))
            .then_some(id)
    }

    pub fn page_id(&self, page: &str) -> Option<usize> {
        self.pages.get(page).copied()
    }

    /// Page whose logic lives in `file`.
    pub fn parsed_page_of(&self, file: &str) -> Option<String> {
        self.page_of_file.get(file).cloned()
    }

    pub fn files(&self) -> impl Iterator<Item = &str> {
        self.base.keys().map(String::as_str)
    }

    pub fn key(&self, id: usize) -> NodeKey {
        let n = &self.nodes[id];
        match (&n.page, &n.file, n.ast_node) {
            (Some(p), _, _) => NodeKey::Page(p.clone()),
            (None, Some(f), Some(a)) => NodeKey::Ast { file: f.clone(), node: a },
            _ => unreachable!("every node is a page or an AST node"),
        }
    }

    pub fn node_keys(&self) -> BTreeSet<NodeKey> {
        (0..self.nodes.len()).map(|i| self.key(i)).collect()
    }

    pub fn edge_keys(&self) -> BTreeSet<(NodeKey, NodeKey, Layer, String)> {
        self.edges.iter().map(|e| (self.key(e.from), self.key(e.to), e.layer, e.label.clone())).collect()
    }

    pub fn layer_counts(&self) -> BTreeMap<Layer, usize> {
        let mut out = BTreeMap::new();
        for e in &self.edges {
            *out.entry(e.layer).or_insert(0) += 1;
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(MdgDoc { phase: self.phase, nodes: &self.nodes, edges: &self.edges })
            .expect("graph serializes")
    }
}

struct Lifter<'a> {
    parsed: &'a ParsedApp,
    base: &'a BTreeMap<String, usize>,
    pages: &'a BTreeMap<String, usize>,
}

impl Lifter<'_> {
    fn ast(&self, layer: &'static str, file: &str, node: usize) -> Result<usize, MdgError> {
        let missing = || MdgError::InconsistentAnchors { layer, detail: format!("{file}#{node}") };
        let base = *self.base.get(file).ok_or_else(missing)?;
        if node >= self.parsed.asts[file].nodes.len() {
            return Err(missing());
        }
        Ok(base + node)
    }

    fn page(&self, layer: &'static str, page: &str) -> Result<usize, MdgError> {
        self.pages
            .get(page)
            .copied()
            .ok_or_else(|| MdgError::InconsistentAnchors { layer, detail: format!("page {page}") })
    }

    fn anchor(&self, a: &Anchor) -> Result<usize, MdgError> {
        match a {
            Anchor::Ast { file, node } => self.ast("udfg", file, *node),
            Anchor::Widget { page, .. } | Anchor::Page { page } => self.page("udfg", page),
        }
    }
}

pub fn merge_mdg(utg: Utg, ccfg: Ccfg, udfg: Udfg, parsed: &ParsedApp, phase: Phase) -> Result<Mdg, MdgError> {
    let mut nodes = Vec::new();
    let mut base = BTreeMap::new();
    let mut pages = BTreeMap::new();
    for (file, ast) in &parsed.asts {
        let b = nodes.len();
        base.insert(file.clone(), b);
        let page = parsed.page_of(file).filter(|p| utg.nodes.contains_key(*p)).map(str::to_string);
        for n in &ast.nodes {
            let merged = n.id == 0 && page.is_some();
            if merged {
                pages.insert(page.clone().unwrap_or_default(), b);
            }
            nodes.push(MdgNode {
                id: b + n.id,
                layer: if merged { "page" } else { "ast" },
                kind: format!("{:?}", n.kind),
                file: Some(file.clone()),
                span: Some(n.span),
                page: if merged { page.clone() } else { None },
                value: n.value.clone(),
                ast_node: Some(n.id),
            });
        }
    }
    for (path, state) in &utg.nodes {
        if pages.contains_key(path) {
            continue;
        }
        if state.loaded {
            return Err(MdgError::InconsistentAnchors { layer: "utg", detail: format!("loaded page {path} has no logic file") });
        }
        let id = nodes.len();
        pages.insert(path.clone(), id);
        nodes.push(MdgNode {
            id,
            layer: "page",
            kind: "Page".into(),
            file: None,
            span: None,
            page: Some(path.clone()),
            value: None,
            ast_node: None,
        });
    }

    let lift = Lifter { parsed, base: &base, pages: &pages };
    let mut edges = BTreeSet::new();
    for (file, ast) in &parsed.asts {
        for e in &ast.edges {
            edges.insert(MdgEdge {
                from: lift.ast("ast", file, e.parent)?,
                to: lift.ast("ast", file, e.child)?,
                layer: Layer::Ast,
                label: e.label.to_string(),
            });
        }
    }
    for e in &utg.edges {
        let Target::Page { path } = &e.to else { continue };
        edges.insert(MdgEdge {
            from: lift.page("utg", &e.from)?,
            to: lift.page("utg", path)?,
            layer: Layer::Utg,
            label: e.mechanism.name().to_string(),
        });
    }
    let mut entry_edges = Vec::new();
    for e in &ccfg.edges {
        let from = match (&e.from, e.site) {
            (CcfgSource::Function(f), Some(site)) => lift.ast("ccfg", &f.file, site)?,
            (CcfgSource::Function(f), None) => lift.ast("ccfg", &f.file, f.node)?,
            (CcfgSource::Entry(EntryEvent::Lifecycle { file, .. }), _) => lift.ast("ccfg", file, 0)?,
            (CcfgSource::Entry(EntryEvent::Gui { bind, .. }), _) => lift.page("ccfg", &bind.page)?,
        };
        let edge = MdgEdge { from, to: lift.ast("ccfg", &e.to.file, e.to.node)?, layer: Layer::Ccfg, label: e.kind.as_str().to_string() };
        if let CcfgSource::Entry(ev) = &e.from {
            debug_assert!(matches!(e.kind, CcfgEdgeKind::Lifecycle | CcfgEdgeKind::GuiEvent));
            entry_edges.push((ev.clone(), edge.clone()));
        }
        edges.insert(edge);
    }
    for e in &udfg.edges {
        edges.insert(MdgEdge {
            from: lift.anchor(&udfg.objects[e.from].anchor)?,
            to: lift.anchor(&udfg.objects[e.to].anchor)?,
            layer: Layer::Udfg,
            label: e.label.as_str().to_string(),
        });
    }
    let edges: Vec<MdgEdge> = edges.into_iter().collect();
    let entry_edges = entry_edges
        .into_iter()
        .map(|(ev, edge)| {
            let i = edges.binary_search(&edge).expect("entry edge was inserted");
            (ev, i)
        })
        .collect();
    Ok(Mdg { phase, nodes, edges, utg, ccfg, udfg, entry_edges, base, pages, page_of_file: parsed.page_of_file.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_ccfg, build_udfg, build_utg, parse_app, resolve_placeholders};
    use crate::package::{MiniAppPackage, PageUnit};

    fn mdg_of(p: &MiniAppPackage) -> Mdg {
        let parsed = parse_app(p);
        let (ccfg, _) = build_ccfg(p, &parsed);
        let udfg = build_udfg(&parsed, &ccfg);
        let (utg, _) = build_utg(p, &parsed);
        let (utg, _) = resolve_placeholders(&utg, &udfg);
        merge_mdg(utg, ccfg, udfg, &parsed, Phase::Complete).unwrap()
    }

    #[test]
    fn empty_package_is_empty() {
        let m = mdg_of(&MiniAppPackage::default());
        assert!(m.nodes.is_empty());
        assert!(m.edges.is_empty());
    }

    #[test]
    fn page_nodes_merge_with_roots() {
        let mut p = MiniAppPackage::default();
        for (path, js) in [("pages/a/index", "Page({ onLoad() { wx.navigateTo({ url: '/pages/b/index' }) } })"), ("pages/b/index", "Page({})")] {
            p.manifest.page_paths.push(path.into());
            p.pages.push(PageUnit { path: path.into(), wxml_source: String::new(), js_source: js.into(), in_subpackage: None });
        }
        p.manifest.page_paths.push("pages/c/index".into());
        let m = mdg_of(&p);
        let a = m.page_id("pages/a/index").unwrap();
        assert_eq!(m.ast_id("pages/a/index.js", 0), Some(a));
        assert_eq!(m.nodes[a].layer, "page");
        assert!(m.edges.iter().any(|e| e.layer == Layer::Utg && e.from == a && e.to == m.page_id("pages/b/index").unwrap()));
        assert!(m.edges.iter().any(|e| e.layer == Layer::Ccfg && e.label == "lifecycle"));
        // AST layer alone is a forest: every node has at most one AST parent.
        let mut parents = BTreeMap::new();
        for e in m.edges.iter().filter(|e| e.layer == Layer::Ast) {
            assert!(parents.insert(e.to, e.from).is_none());
            assert!(e.from < e.to);
        }
        let json = m.to_json();
        assert_eq!(json["nodes"].as_array().unwrap().len(), m.nodes.len());
        assert!(json["edges"].as_array().unwrap().iter().any(|e| e["layer"] == "ast"));
    }
}
