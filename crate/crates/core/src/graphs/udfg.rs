//! Unified data-flow graph across scripts, page data and markup bindings.
//! Flow-insensitive and field-insensitive: member reads flow from their base
//! object, and branches are merged.

use super::ccfg::{callback_args, resolve_callee, Ccfg, FnKey};
use super::js_query::param_nodes;
use super::utg::Mechanism;
use super::ParsedApp;
use crate::frontend::{is_simple_binding_path, AstGraph, NodeKind};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    JsVar,
    PageDataField,
    WxmlBinding,
    EventPayload,
    ApiResult,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Anchor {
    Ast { file: String, node: usize },
    Widget { page: String, xpath: String, attr: String },
    Page { page: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DataObject {
    pub id: usize,
    pub kind: DataKind,
    /// File for script objects, page path for page and markup objects.
    pub owner: String,
    pub name: String,
    pub anchor: Anchor,
    pub literal: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowLabel {
    Assignment,
    SetData,
    DataBinding,
    EventPropagation,
    ArgumentPass,
    ContextBinding,
    Return,
}

impl FlowLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Assignment => "assignment",
            Self::SetData => "setData",
            Self::DataBinding => "data-binding",
            Self::EventPropagation => "event-propagation",
            Self::ArgumentPass => "argument-pass",
            Self::ContextBinding => "context-binding",
            Self::Return => "return",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FlowEdge {
    pub from: usize,
    pub to: usize,
    pub label: FlowLabel,
}

/// Name of the synthetic variable holding a function's return value.
pub const RETURN_VAR: &str = "<return>";
/// Name of the synthetic variable holding a non-literal routing url.
pub const URL_VAR: &str = "<url>";
const CALLBACK_KEYS: [&str; 3] = ["success", "complete", "fail"];

type ObjKey = (DataKind, String, String, Anchor);

#[derive(Debug, Clone, Default, Serialize)]
pub struct Udfg {
    pub objects: Vec<DataObject>,
    pub edges: Vec<FlowEdge>,
    #[serde(skip)]
    index: BTreeMap<ObjKey, usize>,
}

impl Udfg {
    fn intern(&mut self, kind: DataKind, owner: &str, name: &str, anchor: Anchor, literal: Option<String>) -> usize {
        let key = (kind, owner.to_string(), name.to_string(), anchor);
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.objects.len();
        self.objects.push(DataObject { id, kind, owner: key.1.clone(), name: key.2.clone(), anchor: key.3.clone(), literal });
        self.index.insert(key, id);
        id
    }

    pub fn find(&self, kind: DataKind, owner: &str, name: &str, anchor: &Anchor) -> Option<usize> {
        self.index.get(&(kind, owner.to_string(), name.to_string(), anchor.clone())).copied()
    }

    pub fn objects_at(&self, anchor: &Anchor) -> Vec<usize> {
        self.objects.iter().filter(|o| &o.anchor == anchor).map(|o| o.id).collect()
    }

    pub fn page_field(&self, page: &str, name: &str) -> Option<usize> {
        self.find(DataKind::PageDataField, page, name, &Anchor::Page { page: page.to_string() })
    }

    /// Objects that flow into any of `starts`, including the starts.
    pub fn backward_closure(&self, starts: &[usize]) -> BTreeSet<usize> {
        let mut preds: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for e in &self.edges {
            preds.entry(e.to).or_default().push(e.from);
        }
        let mut seen: BTreeSet<usize> = starts.iter().copied().collect();
        let mut queue: VecDeque<usize> = starts.iter().copied().collect();
        while let Some(n) = queue.pop_front() {
            for &p in preds.get(&n).into_iter().flatten() {
                if seen.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        seen
    }

    /// Every string constant that reaches any of `starts`.
    pub fn backward_literals(&self, starts: &[usize]) -> BTreeSet<String> {
        self.backward_closure(starts)
            .into_iter()
            .filter_map(|id| self.objects[id].literal.clone())
            .collect()
    }

    fn edge(&mut self, from: usize, to: usize, label: FlowLabel) {
        self.edges.push(FlowEdge { from, to, label });
    }
}

struct Builder<'a> {
    parsed: &'a ParsedApp,
    g: Udfg,
    /// (module file, parameter node) → pages whose context is passed in.
    ctx_params: BTreeMap<(String, usize), BTreeSet<String>>,
}

impl<'a> Builder<'a> {
    fn ast(&self, file: &str) -> &'a AstGraph {
        &self.parsed.asts[file]
    }

    fn var(&mut self, file: &str, at: usize, name: &str) -> usize {
        let (_, decl) = self.parsed.index[file].resolve(self.ast(file), at, name);
        let node = decl.unwrap_or(0);
        self.g.intern(DataKind::JsVar, file, name, Anchor::Ast { file: file.to_string(), node }, None)
    }

    fn param_var(&mut self, file: &str, param: usize) -> usize {
        let name = self.ast(file).value(param).unwrap_or_default().to_string();
        self.g.intern(DataKind::JsVar, file, &name, Anchor::Ast { file: file.to_string(), node: param }, None)
    }

    fn return_var(&mut self, key: &FnKey) -> usize {
        self.g.intern(DataKind::JsVar, &key.file, RETURN_VAR, Anchor::Ast { file: key.file.clone(), node: key.node }, None)
    }

    fn field(&mut self, page: &str, name: &str) -> usize {
        self.g.intern(DataKind::PageDataField, page, name, Anchor::Page { page: page.to_string() }, None)
    }

    /// Pages whose context `node` denotes: `this`/aliases on a page file, or
    /// a parameter that receives a page's `this` from another file.
    fn context_pages(&self, file: &str, node: usize) -> BTreeSet<String> {
        let ast = self.ast(file);
        if self.parsed.index[file].is_this_alias(ast, node) {
            return self.parsed.page_of(file).map(str::to_string).into_iter().collect();
        }
        if ast.kind(node) == NodeKind::Identifier {
            if let Some(name) = ast.value(node) {
                if let (_, Some(decl)) = self.parsed.index[file].resolve(ast, node, name) {
                    if let Some(pages) = self.ctx_params.get(&(file.to_string(), decl)) {
                        return pages.clone();
                    }
                }
            }
        }
        BTreeSet::new()
    }

    fn api_result(&mut self, file: &str, call: usize) -> Option<usize> {
        let ast = self.ast(file);
        let name = ast.value(call).unwrap_or("<call>").to_string();
        let has_callback = ast.call_args(call).iter().any(|&a| {
            ast.kind(a) == NodeKind::ObjectLiteral
                && ast.children_labeled(a, "property").any(|p| ast.value(p).is_some_and(|k| CALLBACK_KEYS.contains(&k)))
        });
        (name.starts_with("wx.") || has_callback)
            .then(|| self.g.intern(DataKind::ApiResult, file, &name, Anchor::Ast { file: file.to_string(), node: call }, None))
    }

    /// Objects whose values may flow into expression `e`.
    fn sources(&mut self, file: &str, e: usize) -> Vec<usize> {
        let ast = self.ast(file);
        match ast.kind(e) {
            NodeKind::StringLiteral => {
                let lit = ast.value(e).unwrap_or_default().to_string();
                vec![self.g.intern(DataKind::Literal, file, &lit, Anchor::Ast { file: file.to_string(), node: e }, Some(lit.clone()))]
            }
            NodeKind::NumberLiteral | NodeKind::FunctionDef | NodeKind::ThisExpression => Vec::new(),
            NodeKind::Identifier => {
                let name = ast.value(e).unwrap_or_default().to_string();
                vec![self.var(file, e, &name)]
            }
            NodeKind::MemberExpression => {
                let Some(object) = ast.child(e, "object") else { return Vec::new() };
                // `<ctx>.data.<field>`
                if ast.kind(object) == NodeKind::MemberExpression && ast.value(object) == Some("data") {
                    if let Some(ctx) = ast.child(object, "object") {
                        let pages = self.context_pages(file, ctx);
                        if !pages.is_empty() {
                            let name = ast.value(e).unwrap_or_default().to_string();
                            return pages.iter().map(|p| self.field(p, &name)).collect();
                        }
                    }
                }
                let mut out = self.sources(file, object);
                if let Some(prop) = ast.child(e, "property").filter(|&p| ast.kind(p) != NodeKind::Identifier) {
                    out.extend(self.sources(file, prop));
                }
                out
            }
            NodeKind::CallExpression => {
                if let Some(r) = self.api_result(file, e) {
                    return vec![r];
                }
                if let Some(key) = resolve_callee(self.parsed, file, e) {
                    if key.node != 0 {
                        return vec![self.return_var(&key)];
                    }
                }
                self.child_sources(file, e)
            }
            NodeKind::Assignment => match ast.child(e, "right") {
                Some(r) => self.sources(file, r),
                None => Vec::new(),
            },
            _ => self.child_sources(file, e),
        }
    }

    fn child_sources(&mut self, file: &str, e: usize) -> Vec<usize> {
        let ast = self.ast(file);
        let kids: Vec<usize> = ast
            .children(e)
            .iter()
            .copied()
            .filter(|&c| !matches!(ast.label(c), Some("key" | "id")) && ast.kind(c) != NodeKind::FunctionDef)
            .collect();
        kids.into_iter().flat_map(|c| self.sources(file, c)).collect()
    }

    fn flow(&mut self, sources: Vec<usize>, to: usize, label: FlowLabel) {
        for s in sources {
            self.g.edge(s, to, label);
        }
    }

    fn collect_context_params(&mut self) {
        for (file, ast) in &self.parsed.asts {
            let Some(page) = self.parsed.page_of(file) else { continue };
            for call in ast.ids_of(NodeKind::CallExpression) {
                let Some(key) = resolve_callee(self.parsed, file, call) else { continue };
                if key.node == 0 || &key.file == file {
                    continue;
                }
                let params = param_nodes(&self.parsed.asts[&key.file], key.node);
                for (i, arg) in ast.call_args(call).into_iter().enumerate() {
                    if ast.kind(arg) == NodeKind::ThisExpression {
                        if let Some(&p) = params.get(i) {
                            self.ctx_params.entry((key.file.clone(), p)).or_default().insert(page.to_string());
                        }
                    }
                }
            }
        }
    }

    fn script(&mut self, file: &str) {
        let ast = self.ast(file);
        let page = self.parsed.page_of(file).map(str::to_string);
        let idx = &self.parsed.index[file];
        for n in 0..ast.nodes.len() {
            match ast.kind(n) {
                NodeKind::StringLiteral => {
                    self.sources(file, n);
                }
                NodeKind::VariableDeclarator => {
                    if let (Some(init), Some(name)) = (ast.child(n, "init"), ast.value(n)) {
                        let to = self.g.intern(DataKind::JsVar, file, name, Anchor::Ast { file: file.to_string(), node: n }, None);
                        let src = self.sources(file, init);
                        self.flow(src, to, FlowLabel::Assignment);
                    }
                }
                NodeKind::Assignment => {
                    let (Some(left), Some(right)) = (ast.child(n, "left"), ast.child(n, "right")) else { continue };
                    if ast.parent(n).is_some_and(|p| ast.kind(p) == NodeKind::FunctionDef) {
                        continue;
                    }
                    let mut root = left;
                    while ast.kind(root) == NodeKind::MemberExpression {
                        root = ast.child(root, "object").unwrap_or(root);
                        if ast.kind(root) != NodeKind::MemberExpression {
                            break;
                        }
                    }
                    if ast.kind(root) != NodeKind::Identifier || idx.is_this_alias(ast, root) {
                        continue;
                    }
                    let name = ast.value(root).unwrap_or_default().to_string();
                    let to = self.var(file, root, &name);
                    let src = self.sources(file, right);
                    self.flow(src, to, FlowLabel::Assignment);
                }
                NodeKind::Return => {
                    let (Some(arg), Some(f)) = (ast.child(n, "argument"), ast.enclosing_function(n)) else { continue };
                    let to = self.return_var(&FnKey::new(file, f));
                    let src = self.sources(file, arg);
                    self.flow(src, to, FlowLabel::Return);
                }
                NodeKind::FunctionDef => {
                    if let Some(body) = ast.child(n, "body").filter(|&b| ast.kind(b) != NodeKind::Block) {
                        let to = self.return_var(&FnKey::new(file, n));
                        let src = self.sources(file, body);
                        self.flow(src, to, FlowLabel::Return);
                    }
                }
                NodeKind::CallExpression => self.call(file, n),
                _ => {}
            }
        }
        if let (Some(page), Some(reg)) = (page, idx.registration) {
            let data = ast
                .children_labeled(reg, "property")
                .find(|&p| ast.value(p) == Some("data"))
                .and_then(|p| ast.child(p, "value"))
                .filter(|&v| ast.kind(v) == NodeKind::ObjectLiteral);
            if let Some(data) = data {
                for prop in ast.children_labeled(data, "property").collect::<Vec<_>>() {
                    let (Some(name), Some(v)) = (ast.value(prop), ast.child(prop, "value")) else { continue };
                    let to = self.field(&page, name);
                    let src = self.sources(file, v);
                    self.flow(src, to, FlowLabel::Assignment);
                }
            }
        }
    }

    fn call(&mut self, file: &str, call: usize) {
        let ast = self.ast(file);
        let args = ast.call_args(call);
        let callee = ast.child(call, "callee");

        // `<ctx>.setData({k: v})`
        if let Some(c) = callee.filter(|&c| ast.kind(c) == NodeKind::MemberExpression && ast.value(c) == Some("setData")) {
            let pages = ast.child(c, "object").map(|o| self.context_pages(file, o)).unwrap_or_default();
            if let Some(&obj) = args.first().filter(|&&a| ast.kind(a) == NodeKind::ObjectLiteral) {
                for prop in ast.children_labeled(obj, "property").collect::<Vec<_>>() {
                    let (Some(key), Some(v)) = (ast.value(prop), ast.child(prop, "value")) else { continue };
                    let field = key.split(['.', '[']).next().unwrap_or(key).to_string();
                    let src = self.sources(file, v);
                    for p in &pages {
                        let to = self.field(p, &field);
                        self.flow(src.clone(), to, FlowLabel::SetData);
                    }
                }
            }
        }

        // Results delivered to callbacks.
        if let Some(r) = self.api_result(file, call) {
            for cb in callback_args(ast, call) {
                if let Some(&p) = param_nodes(ast, cb).first() {
                    let to = self.param_var(file, p);
                    self.g.edge(r, to, FlowLabel::ArgumentPass);
                }
            }
        }

        // Arguments into a resolved callee's parameters.
        if let Some(key) = resolve_callee(self.parsed, file, call).filter(|k| k.node != 0) {
            let params = param_nodes(&self.parsed.asts[&key.file], key.node);
            for (i, &arg) in args.iter().enumerate() {
                let Some(&p) = params.get(i) else { break };
                let to = self.param_var(&key.file, p);
                if ast.kind(arg) == NodeKind::ThisExpression {
                    if key.file != file {
                        let this = self.g.intern(DataKind::JsVar, file, "this", Anchor::Ast { file: file.to_string(), node: arg }, None);
                        self.g.edge(this, to, FlowLabel::ContextBinding);
                    }
                    continue;
                }
                let src = self.sources(file, arg);
                self.flow(src, to, FlowLabel::ArgumentPass);
            }
        }

        // Non-literal routing urls get a variable the transition graph can query.
        if ast.value(call).and_then(Mechanism::from_api).is_some() {
            if let Some(url) = routing_url_node(ast, call).filter(|&u| ast.kind(u) != NodeKind::StringLiteral) {
                let to = self.g.intern(DataKind::JsVar, file, URL_VAR, Anchor::Ast { file: file.to_string(), node: url }, None);
                let src = self.sources(file, url);
                self.flow(src, to, FlowLabel::Assignment);
            }
        }
    }

    fn markup(&mut self, ccfg: &Ccfg) {
        for (page, bindings) in &self.parsed.data_bindings {
            for b in bindings {
                if !is_simple_binding_path(&b.expr) {
                    continue;
                }
                let root = b.expr.split(['.', '[']).next().unwrap_or(&b.expr).trim().to_string();
                let from = self.field(page, &root);
                let anchor = Anchor::Widget { page: page.clone(), xpath: b.widget_xpath.clone(), attr: b.attr_name.clone() };
                let to = self.g.intern(DataKind::WxmlBinding, page, &b.expr, anchor, None);
                self.g.edge(from, to, FlowLabel::DataBinding);
            }
        }
        for binds in self.parsed.bind_calls.values() {
            for b in binds {
                let Some(handler) = ccfg.handler_of(b) else { continue };
                let anchor = Anchor::Widget { page: b.page.clone(), xpath: b.widget_xpath.clone(), attr: b.attr_name.clone() };
                let from = self.g.intern(DataKind::EventPayload, &b.page, &b.event, anchor, None);
                let Some(&p) = param_nodes(&self.parsed.asts[&handler.file], handler.node).first() else { continue };
                let to = self.param_var(&handler.file, p);
                self.g.edge(from, to, FlowLabel::EventPropagation);
            }
        }
    }
}

/// Expression passed as `url` in `wx.navigateTo({ url: ... })`.
pub(crate) fn routing_url_node(ast: &AstGraph, call: usize) -> Option<usize> {
    let obj = *ast.call_args(call).first()?;
    if ast.kind(obj) != NodeKind::ObjectLiteral {
        return None;
    }
    let prop = ast.children_labeled(obj, "property").find(|&p| ast.value(p) == Some("url"))?;
    ast.child(prop, "value")
}

pub fn build_udfg(parsed: &ParsedApp, ccfg: &Ccfg) -> Udfg {
    let mut b = Builder { parsed, g: Udfg::default(), ctx_params: BTreeMap::new() };
    b.collect_context_params();
    for file in parsed.asts.keys() {
        b.script(file);
    }
    b.markup(ccfg);
    let mut g = b.g;
    g.edges.sort();
    g.edges.dedup();
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_ccfg, parse_app};
    use crate::package::{MiniAppPackage, PageUnit};

    fn pkg(pages: &[(&str, &str, &str)], scripts: &[(&str, &str)]) -> MiniAppPackage {
        let mut p = MiniAppPackage::default();
        for (path, wxml, js) in pages {
            p.manifest.page_paths.push(path.to_string());
            p.pages.push(PageUnit { path: path.to_string(), wxml_source: wxml.to_string(), js_source: js.to_string(), in_subpackage: None });
        }
        for (f, s) in scripts {
            p.scripts.insert(f.to_string(), s.to_string());
        }
        p.complete = true;
        p
    }

    fn build(p: &MiniAppPackage) -> (ParsedApp, Udfg) {
        let parsed = parse_app(p);
        let (ccfg, _) = build_ccfg(p, &parsed);
        let g = build_udfg(&parsed, &ccfg);
        (parsed, g)
    }

    #[test]
    fn context_binding_and_set_data() {
        let util = "function init(pageContext) {\n  pageContext.onShutterTap = function () {\n    const ctx = wx.createCameraContext()\n    ctx.takePhoto({ success: (res) => { pageContext.setData({ imagePath: res.tempImagePath }) } })\n  }\n}\nmodule.exports = { init: init }";
        let page_js = "const util = require('../util/util.js')\nPage({ data: { imagePath: '' }, onReady() { util.init(this) } })";
        let p = pkg(&[("pages/takePhoto/index", "<image src=\"{{imagePath}}\"/><button bindtap=\"onShutterTap\"/>", page_js)], &[("pages/util/util.js", util)]);
        let (_, g) = build(&p);
        let field = g.page_field("pages/takePhoto/index", "imagePath").unwrap();
        let back = g.backward_closure(&[field]);
        assert!(back.iter().any(|&o| g.objects[o].kind == DataKind::ApiResult && g.objects[o].name == "ctx.takePhoto"));
        assert!(g.edges.iter().any(|e| e.label == FlowLabel::SetData && e.to == field));
        let cb: Vec<_> = g.edges.iter().filter(|e| e.label == FlowLabel::ContextBinding).collect();
        assert_eq!(cb.len(), 1);
        assert_eq!(g.objects[cb[0].from].name, "this");
        assert!(g.edges.iter().any(|e| e.label == FlowLabel::DataBinding
            && e.from == field
            && g.objects[e.to].kind == DataKind::WxmlBinding));
    }

    #[test]
    fn event_payload_reaches_request() {
        let js = "Page({ onInput(e) { const idCard = e.detail.value; wx.request({ url: 'https://x', data: { idCard: idCard } }) } })";
        let p = pkg(&[("pages/checkID/index", "<input bindinput=\"onInput\"/>", js)], &[]);
        let (parsed, g) = build(&p);
        let ast = &parsed.asts["pages/checkID/index.js"];
        let decl = ast.ids_of(NodeKind::VariableDeclarator).next().unwrap();
        let id_card = g.find(DataKind::JsVar, "pages/checkID/index.js", "idCard", &Anchor::Ast { file: "pages/checkID/index.js".into(), node: decl }).unwrap();
        let back = g.backward_closure(&[id_card]);
        assert!(back.iter().any(|&o| g.objects[o].kind == DataKind::EventPayload));
        assert!(g.edges.iter().any(|e| e.label == FlowLabel::EventPropagation));
    }

    #[test]
    fn literals_only_have_no_flow() {
        let p = pkg(&[], &[("util/c.js", "'a'; 1; \"b\"")]);
        let (_, g) = build(&p);
        assert!(g.edges.is_empty());
        assert!(!g.objects.is_empty());
    }

    #[test]
    fn branch_literals_merge() {
        let js = "Page({ go() { var u; if (x) { u = '/pages/a/index' } else { u = '/pages/b/index' } wx.navigateTo({ url: u }) } })";
        let p = pkg(&[("pages/m/index", "", js)], &[]);
        let (parsed, g) = build(&p);
        let ast = &parsed.asts["pages/m/index.js"];
        let call = ast.ids_of(NodeKind::CallExpression).find(|&c| ast.value(c) == Some("wx.navigateTo")).unwrap();
        let url = routing_url_node(ast, call).unwrap();
        let starts = g.objects_at(&Anchor::Ast { file: "pages/m/index.js".into(), node: url });
        let lits: Vec<_> = g.backward_literals(&starts).into_iter().collect();
        assert_eq!(lits, vec!["/pages/a/index", "/pages/b/index"]);
    }

    #[test]
    fn return_and_argument_pass() {
        let js = "function wrap(v) { return v }\nPage({ go() { const t = wrap('/pages/z/index'); wx.redirectTo({ url: t }) } })";
        let p = pkg(&[("pages/m/index", "", js)], &[]);
        let (parsed, g) = build(&p);
        let ast = &parsed.asts["pages/m/index.js"];
        let call = ast.ids_of(NodeKind::CallExpression).find(|&c| ast.value(c) == Some("wx.redirectTo")).unwrap();
        let url = routing_url_node(ast, call).unwrap();
        let starts = g.objects_at(&Anchor::Ast { file: "pages/m/index.js".into(), node: url });
        assert_eq!(g.backward_literals(&starts).into_iter().collect::<Vec<_>>(), vec!["/pages/z/index"]);
        assert!(g.edges.iter().any(|e| e.label == FlowLabel::Return));
        assert!(g.edges.iter().any(|e| e.label == FlowLabel::ArgumentPass));
    }
}
