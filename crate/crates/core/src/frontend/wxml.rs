//! Recursive-descent WXML parser producing an attributed widget tree.
//!
//! Element children get XPath-style addresses (`/page/view[1]/button[2]`,
//! indices counted among same-tag siblings). Text content is folded into the
//! owning element. Malformed input never fails: unclosed tags are closed at
//! end of input and stray close tags are dropped, each with a diagnostic.

use super::{LineIndex, Span};
use crate::diag::{DiagCode, Diagnostic};
use serde::Serialize;
use std::collections::BTreeMap;

pub const ROOT_TAG: &str = "page";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttrValue {
    pub raw: String,
    /// Expressions found inside balanced `{{...}}` regions, trimmed.
    pub bindings: Vec<String>,
}

impl AttrValue {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let bindings = scan_bindings(&raw);
        Self { raw, bindings }
    }

    pub fn is_static(&self) -> bool {
        self.bindings.is_empty()
    }
}

pub(crate) fn scan_bindings(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = raw;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                out.push(after[..close].trim().to_string());
                rest = &after[close + 2..];
            }
            None => break,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WxmlNode {
    pub tag: String,
    pub attrs: Vec<(String, AttrValue)>,
    pub children: Vec<WxmlNode>,
    /// Whitespace-normalized text content directly inside this element.
    pub text: Option<AttrValue>,
    pub xpath: String,
    pub span: Span,
}

impl WxmlNode {
    pub fn attr(&self, name: &str) -> Option<&AttrValue> {
        self.attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    /// Preorder traversal including `self`.
    pub fn iter(&self) -> Vec<&WxmlNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    pub fn find(&self, xpath: &str) -> Option<&WxmlNode> {
        if self.xpath == xpath {
            return Some(self);
        }
        self.children
            .iter()
            .filter(|c| xpath.starts_with(c.xpath.as_str()))
            .find_map(|c| c.find(xpath))
    }

    /// Tree equality ignoring source spans.
    pub fn same_structure(&self, other: &WxmlNode) -> bool {
        self.tag == other.tag
            && self.attrs == other.attrs
            && self.text == other.text
            && self.xpath == other.xpath
            && self.children.len() == other.children.len()
            && self.children.iter().zip(&other.children).all(|(a, b)| a.same_structure(b))
    }

    /// Serializes the children of this node back to WXML.
    pub fn to_wxml(&self) -> String {
        let mut out = String::new();
        for child in &self.children {
            child.write_element(&mut out);
        }
        out
    }

    fn write_element(&self, out: &mut String) {
        out.push('<');
        out.push_str(&self.tag);
        for (name, value) in &self.attrs {
            out.push(' ');
            out.push_str(name);
            let quote = if value.raw.contains('"') { '\'' } else { '"' };
            out.push('=');
            out.push(quote);
            out.push_str(&value.raw);
            out.push(quote);
        }
        if self.children.is_empty() && self.text.is_none() {
            out.push_str(" />");
            return;
        }
        out.push('>');
        if let Some(text) = &self.text {
            out.push_str(&text.raw);
        }
        for child in &self.children {
            child.write_element(out);
        }
        out.push_str("</");
        out.push_str(&self.tag);
        out.push('>');
    }
}

struct OpenElement {
    tag: String,
    attrs: Vec<(String, AttrValue)>,
    children: Vec<WxmlNode>,
    text: Vec<String>,
    start: usize,
}

impl OpenElement {
    fn new(tag: String, attrs: Vec<(String, AttrValue)>, start: usize) -> Self {
        Self { tag, attrs, children: Vec::new(), text: Vec::new(), start }
    }

    fn finish(self, span: Span) -> WxmlNode {
        let joined = self.text.join(" ");
        WxmlNode {
            tag: self.tag,
            attrs: self.attrs,
            children: self.children,
            text: (!joined.is_empty()).then(|| AttrValue::new(joined)),
            xpath: String::new(),
            span,
        }
    }
}

/// Elements whose content is opaque script text.
const RAW_TEXT_TAGS: &[&str] = &["wxs", "script"];

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    page: &'a str,
    lines: LineIndex,
    diags: Vec<Diagnostic>,
    stack: Vec<OpenElement>,
}

pub fn parse_wxml(source: &str, page: &str) -> (WxmlNode, Vec<Diagnostic>) {
    let mut p = Parser {
        src: source,
        pos: 0,
        page,
        lines: LineIndex::new(source),
        diags: Vec::new(),
        stack: vec![OpenElement::new(ROOT_TAG.to_string(), Vec::new(), 0)],
    };
    p.run();
    while p.stack.len() > 1 {
        let tag = p.stack.last().map(|e| e.tag.clone()).unwrap_or_default();
        p.diag(format!("<{tag}> not closed before end of input"));
        p.close_top(source.len());
    }
    let root = p.stack.pop().expect("root element").finish(p.lines.span(0, source.len()));
    let mut root = root;
    assign_xpaths(&mut root, format!("/{ROOT_TAG}"));
    (root, p.diags)
}

fn assign_xpaths(node: &mut WxmlNode, xpath: String) {
    node.xpath = xpath;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for child in &mut node.children {
        let n = counts.entry(child.tag.clone()).or_insert(0);
        *n += 1;
        let path = format!("{}/{}[{}]", node.xpath, child.tag, n);
        assign_xpaths(child, path);
    }
}

fn is_name_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '=' | '>' | '/' | '<' | '"' | '\'')
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn diag(&mut self, msg: String) {
        let (line, col) = {
            let s = self.lines.span(self.pos, self.pos);
            (s.line, s.col)
        };
        self.diags.push(Diagnostic::new(
            DiagCode::MalformedMarkup,
            self.page,
            format!("{line}:{col}: {msg}"),
        ));
    }

    fn close_top(&mut self, end: usize) {
        let el = self.stack.pop().expect("non-root element");
        let span = self.lines.span(el.start, end);
        let node = el.finish(span);
        self.stack.last_mut().expect("root remains").children.push(node);
    }

    fn push_text(&mut self, text: &str) {
        let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if !normalized.is_empty() {
            self.stack.last_mut().expect("root").text.push(normalized);
        }
    }

    fn run(&mut self) {
        while self.pos < self.src.len() {
            let rest = self.rest();
            if rest.starts_with("<!--") {
                match rest.find("-->") {
                    Some(i) => self.pos += i + 3,
                    None => {
                        self.diag("unterminated comment".into());
                        self.pos = self.src.len();
                    }
                }
            } else if rest.starts_with("</") {
                self.close_tag();
            } else if rest.starts_with('<') && rest[1..].starts_with(|c: char| c.is_alphabetic() || c == '_') {
                self.open_tag();
            } else {
                let next = rest[1..].find('<').map(|i| i + 1).unwrap_or(rest.len());
                let text = &rest[..next];
                self.pos += next;
                self.push_text(text);
            }
        }
    }

    fn close_tag(&mut self) {
        let start = self.pos;
        let rest = &self.rest()[2..];
        let end = rest.find('>').unwrap_or(rest.len());
        let name = rest[..end].trim().to_string();
        self.pos = (start + 2 + end + 1).min(self.src.len());
        match self.stack.iter().rposition(|e| e.tag == name) {
            Some(idx) if idx > 0 => {
                while self.stack.len() > idx + 1 {
                    let tag = self.stack.last().map(|e| e.tag.clone()).unwrap_or_default();
                    self.diag(format!("<{tag}> implicitly closed by </{name}>"));
                    self.close_top(start);
                }
                self.close_top(self.pos);
            }
            _ => self.diag(format!("stray </{name}> ignored")),
        }
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
    }

    fn take_name(&mut self) -> String {
        let rest = self.rest();
        let len = rest.find(|c: char| !is_name_char(c)).unwrap_or(rest.len());
        self.pos += len;
        rest[..len].to_string()
    }

    fn open_tag(&mut self) {
        let start = self.pos;
        self.pos += 1;
        let tag = self.take_name();
        let mut attrs: Vec<(String, AttrValue)> = Vec::new();
        let mut self_closing = false;
        loop {
            self.skip_ws();
            let rest = self.rest();
            if rest.is_empty() {
                self.diag(format!("<{tag}> start tag not terminated"));
                break;
            }
            if rest.starts_with("/>") {
                self.pos += 2;
                self_closing = true;
                break;
            }
            if rest.starts_with('>') {
                self.pos += 1;
                break;
            }
            if rest.starts_with('/') || rest.starts_with('<') {
                self.diag(format!("unexpected {:?} in <{tag}>", &rest[..1]));
                if rest.starts_with('/') {
                    self.pos += 1;
                    continue;
                }
                break;
            }
            let name = self.take_name();
            if name.is_empty() {
                // a lone quote or '=' with no name
                self.pos += self.rest().chars().next().map(char::len_utf8).unwrap_or(1);
                continue;
            }
            self.skip_ws();
            let raw = if self.rest().starts_with('=') {
                self.pos += 1;
                self.skip_ws();
                self.attr_value()
            } else {
                String::new()
            };
            if attrs.iter().any(|(k, _)| *k == name) {
                self.diag(format!("duplicate attribute {name} on <{tag}>"));
            } else {
                attrs.push((name, AttrValue::new(raw)));
            }
        }
        let mut el = OpenElement::new(tag.clone(), attrs, start);
        if self_closing {
            let span = self.lines.span(start, self.pos);
            let node = el.finish(span);
            self.stack.last_mut().expect("root").children.push(node);
            return;
        }
        if RAW_TEXT_TAGS.contains(&tag.as_str()) {
            let close = format!("</{tag}>");
            let rest = self.rest();
            let end = rest.find(&close).unwrap_or(rest.len());
            el.text.push(rest[..end].trim().to_string());
            el.text.retain(|t| !t.is_empty());
            self.pos += end;
            if self.rest().starts_with(&close) {
                self.pos += close.len();
            } else {
                self.diag(format!("<{tag}> not closed before end of input"));
            }
            let span = self.lines.span(start, self.pos);
            let node = el.finish(span);
            self.stack.last_mut().expect("root").children.push(node);
            return;
        }
        self.stack.push(el);
    }

    fn attr_value(&mut self) -> String {
        let rest = self.rest();
        match rest.chars().next() {
            Some(q @ ('"' | '\'')) => {
                let body = &rest[1..];
                match body.find(q) {
                    Some(end) => {
                        self.pos += end + 2;
                        body[..end].to_string()
                    }
                    None => {
                        self.diag("unterminated attribute value".into());
                        self.pos = self.src.len();
                        body.to_string()
                    }
                }
            }
            _ => {
                let len = rest.find(|c: char| c.is_whitespace() || c == '>').unwrap_or(rest.len());
                let len = if rest[..len].ends_with('/') && rest[len..].starts_with('>') { len - 1 } else { len };
                self.pos += len;
                rest[..len].to_string()
            }
        }
    }
}
