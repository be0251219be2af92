//! Logic-layer parsing into a tree-shaped property graph.
//!
//! Node ids are preorder indices, so the subtree of node `n` is the id range
//! `n..subtree_end(n)`. Every node is either an operator (it combines child
//! nodes) or an operand (a leaf: identifier, literal, `this`).

mod lexer;
mod parser;

use super::{LineIndex, Span};
use lexer::Token;
use parser::{Parser, Raw};
use serde::Serialize;
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum NodeKind {
    Program,
    ImportDeclaration,
    VariableDeclarator,
    CallExpression,
    MemberExpression,
    ThisExpression,
    FunctionDef,
    ObjectLiteral,
    Property,
    Identifier,
    StringLiteral,
    NumberLiteral,
    Assignment,
    Return,
    Block,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Operator,
    Operand,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AstNode {
    pub id: usize,
    pub kind: NodeKind,
    pub role: NodeRole,
    pub span: Span,
    pub text: String,
    /// Identifier name, decoded literal, property/function name, operator,
    /// or dotted callee path for calls.
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AstEdge {
    pub parent: usize,
    pub child: usize,
    pub label: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct AstGraph {
    pub file: String,
    pub nodes: Vec<AstNode>,
    pub edges: Vec<AstEdge>,
    #[serde(skip)]
    children: Vec<Vec<usize>>,
    #[serde(skip)]
    parent: Vec<Option<(usize, &'static str)>>,
    #[serde(skip)]
    subtree_end: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JsParseError {
    #[error("{file}:{line}:{col}: unmatched `{found}`")]
    Unmatched { file: String, found: String, line: u32, col: u32 },
    #[error("{file}:{line}:{col}: `{open}` is never closed")]
    Unclosed { file: String, open: String, line: u32, col: u32 },
}

fn bracket_pairs(toks: &[Token], file: &str, lines: &LineIndex) -> Result<Vec<usize>, JsParseError> {
    let mut pairs = vec![usize::MAX; toks.len()];
    let mut stack: Vec<(usize, &str)> = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        let lexer::Tok::Punct(p) = t.tok else { continue };
        match p {
            "(" | "[" | "{" => stack.push((i, p)),
            ")" | "]" | "}" => {
                let want = match p {
                    ")" => "(",
                    "]" => "[",
                    _ => "{",
                };
                match stack.pop() {
                    Some((j, open)) if open == want => {
                        pairs[i] = j;
                        pairs[j] = i;
                    }
                    _ => {
                        let s = lines.span(t.start, t.end);
                        return Err(JsParseError::Unmatched { file: file.into(), found: p.into(), line: s.line, col: s.col });
                    }
                }
            }
            _ => {}
        }
    }
    match stack.pop() {
        Some((j, open)) => {
            let s = lines.span(toks[j].start, toks[j].end);
            Err(JsParseError::Unclosed { file: file.into(), open: open.into(), line: s.line, col: s.col })
        }
        None => Ok(pairs),
    }
}

pub fn parse_js(source: &str, file: &str) -> Result<AstGraph, JsParseError> {
    let lines = LineIndex::new(source);
    let toks = lexer::tokenize(source);
    let pairs = bracket_pairs(&toks, file, &lines)?;
    let raw = Parser::new(source, &toks, &pairs).program();
    let mut g = AstGraph {
        file: file.to_string(),
        nodes: Vec::new(),
        edges: Vec::new(),
        children: Vec::new(),
        parent: Vec::new(),
        subtree_end: Vec::new(),
    };
    g.flatten(raw, None, source, &lines);
    Ok(g)
}

impl AstGraph {
    fn flatten(&mut self, raw: Raw, parent: Option<(usize, &'static str)>, src: &str, lines: &LineIndex) {
        let id = self.nodes.len();
        let role = if raw.children.is_empty() && raw.kind != NodeKind::Program {
            NodeRole::Operand
        } else {
            NodeRole::Operator
        };
        let end = raw.end.min(src.len()).max(raw.start);
        self.nodes.push(AstNode {
            id,
            kind: raw.kind,
            role,
            span: lines.span(raw.start, end),
            text: src.get(raw.start..end).unwrap_or_default().to_string(),
            value: raw.value,
        });
        self.children.push(Vec::new());
        self.parent.push(parent);
        self.subtree_end.push(id + 1);
        if let Some((p, label)) = parent {
            self.edges.push(AstEdge { parent: p, child: id, label });
            self.children[p].push(id);
        }
        for (label, child) in raw.children {
            self.flatten(child, Some((id, label)), src, lines);
        }
        self.subtree_end[id] = self.nodes.len();
    }

    pub fn node(&self, id: usize) -> &AstNode {
        &self.nodes[id]
    }

    pub fn kind(&self, id: usize) -> NodeKind {
        self.nodes[id].kind
    }

    pub fn value(&self, id: usize) -> Option<&str> {
        self.nodes[id].value.as_deref()
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.children[id]
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.parent[id].map(|(p, _)| p)
    }

    /// Label of the edge entering `id`.
    pub fn label(&self, id: usize) -> Option<&'static str> {
        self.parent[id].map(|(_, l)| l)
    }

    pub fn child(&self, id: usize, label: &str) -> Option<usize> {
        self.children_labeled(id, label).next()
    }

    pub fn children_labeled<'s>(&'s self, id: usize, label: &'s str) -> impl Iterator<Item = usize> + 's {
        self.children[id].iter().copied().filter(move |&c| self.label(c) == Some(label))
    }

    /// `id` and all its descendants.
    pub fn subtree(&self, id: usize) -> Range<usize> {
        id..self.subtree_end[id]
    }

    pub fn contains(&self, ancestor: usize, id: usize) -> bool {
        self.subtree(ancestor).contains(&id)
    }

    pub fn ancestors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.parent(id), |&p| self.parent(p))
    }

    /// Nearest enclosing function, excluding `id` itself.
    pub fn enclosing_function(&self, id: usize) -> Option<usize> {
        self.ancestors(id).find(|&a| self.kind(a) == NodeKind::FunctionDef)
    }

    pub fn call_args(&self, call: usize) -> Vec<usize> {
        self.children_labeled(call, "argument").collect()
    }

    /// Dotted path of an identifier/member chain: `wx.navigateTo`, `this.data.x`.
    pub fn dotted_name(&self, id: usize) -> Option<String> {
        match self.kind(id) {
            NodeKind::Identifier | NodeKind::ThisExpression => self.value(id).map(str::to_string),
            NodeKind::MemberExpression => {
                let object = self.child(id, "object")?;
                Some(format!("{}.{}", self.dotted_name(object)?, self.value(id)?))
            }
            _ => None,
        }
    }

    pub fn ids_of(&self, kind: NodeKind) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter(move |n| n.kind == kind).map(|n| n.id)
    }
}
