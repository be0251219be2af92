//! Render-layer (WXML) and logic-layer (JavaScript) front ends.

pub mod bindings;
pub mod js;
pub mod wxml;

pub use bindings::{extract_bind_calls, extract_data_bindings, is_simple_binding_path, BindCall, DataBinding};
pub use js::{parse_js, AstEdge, AstGraph, AstNode, JsParseError, NodeKind, NodeRole};
pub use wxml::{parse_wxml, AttrValue, WxmlNode, ROOT_TAG};

use serde::Serialize;

/// Source range: byte offsets plus 1-based line/column of both ends.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

pub(crate) struct LineIndex {
    starts: Vec<usize>,
}

impl LineIndex {
    pub(crate) fn new(src: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(src.match_indices('\n').map(|(i, _)| i + 1));
        Self { starts }
    }

    fn locate(&self, offset: usize) -> (u32, u32) {
        let line = self.starts.partition_point(|&s| s <= offset) - 1;
        (line as u32 + 1, (offset - self.starts[line]) as u32 + 1)
    }

    pub(crate) fn span(&self, start: usize, end: usize) -> Span {
        let (line, col) = self.locate(start);
        let (end_line, end_col) = self.locate(end);
        Span { start, end, line, col, end_line, end_col }
    }
}
