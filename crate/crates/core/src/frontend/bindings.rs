//! Event bindings (`bindtap`, `catchinput`, ...) and `{{...}}` data bindings
//! declared in a page's markup.

use super::wxml::WxmlNode;
use crate::diag::{DiagCode, Diagnostic};
use serde::Serialize;
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BindCall {
    pub page: String,
    pub widget_xpath: String,
    pub event: String,
    pub handler: String,
    pub attr_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DataBinding {
    pub widget_xpath: String,
    /// Attribute name, or `#text` for element content.
    pub attr_name: String,
    pub expr: String,
}

pub const TEXT_ATTR: &str = "#text";

/// Splits `bindtap` / `catch:input` style names into the event name.
/// `catch*` handlers are treated the same as `bind*`.
pub fn event_of(attr_name: &str) -> Option<&str> {
    let rest = attr_name.strip_prefix("bind").or_else(|| attr_name.strip_prefix("catch"))?;
    let event = rest.strip_prefix(':').unwrap_or(rest);
    (!event.is_empty()).then_some(event)
}

pub fn extract_bind_calls(wxml: &WxmlNode, page: &str) -> (BTreeSet<BindCall>, Vec<Diagnostic>) {
    let mut calls = BTreeSet::new();
    let mut diags = Vec::new();
    for node in wxml.iter() {
        for (name, value) in &node.attrs {
            let Some(event) = event_of(name) else { continue };
            if !value.is_static() {
                diags.push(Diagnostic::new(
                    DiagCode::BindingInHandler,
                    page,
                    format!("{} {name}={:?}: dynamic handler names are not resolved", node.xpath, value.raw),
                ));
            }
            calls.insert(BindCall {
                page: page.to_string(),
                widget_xpath: node.xpath.clone(),
                event: event.to_string(),
                handler: value.raw.trim().to_string(),
                attr_name: name.clone(),
            });
        }
    }
    (calls, diags)
}

pub fn extract_data_bindings(wxml: &WxmlNode, _page: &str) -> BTreeSet<DataBinding> {
    let mut out = BTreeSet::new();
    for node in wxml.iter() {
        let attrs = node.attrs.iter().map(|(k, v)| (k.as_str(), v));
        let text = node.text.iter().map(|t| (TEXT_ATTR, t));
        for (name, value) in attrs.chain(text) {
            for expr in &value.bindings {
                out.insert(DataBinding {
                    widget_xpath: node.xpath.clone(),
                    attr_name: name.to_string(),
                    expr: expr.clone(),
                });
            }
        }
    }
    out
}

/// Binding expressions the analysis can resolve: dotted identifier paths.
pub fn is_simple_binding_path(expr: &str) -> bool {
    !expr.is_empty()
        && expr.split('.').all(|seg| {
            let mut chars = seg.chars();
            matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_' || c == '$')
                && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_wxml;

    #[test]
    fn bind_calls() {
        let (w, _) = parse_wxml(r#"<view><button bindtap="onShutterTap">Shoot</button></view>"#, "pages/takePhoto/index");
        let (calls, diags) = extract_bind_calls(&w, "pages/takePhoto/index");
        assert!(diags.is_empty());
        let c: Vec<_> = calls.into_iter().collect();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].event, "tap");
        assert_eq!(c[0].handler, "onShutterTap");
        assert_eq!(c[0].widget_xpath, "/page/view[1]/button[1]");
        assert_eq!(w.find(&c[0].widget_xpath).unwrap().attr(&c[0].attr_name).unwrap().raw, c[0].handler);
    }

    #[test]
    fn input_and_catch_forms() {
        let (w, _) = parse_wxml(r#"<input bindinput="onInput"/><view catch:tap="stop" bind:longpress="lp"/>"#, "p");
        let (calls, _) = extract_bind_calls(&w, "p");
        let pairs: Vec<_> = calls.iter().map(|c| (c.event.as_str(), c.handler.as_str())).collect();
        assert_eq!(pairs, vec![("input", "onInput"), ("longpress", "lp"), ("tap", "stop")]);
    }

    #[test]
    fn no_bindings() {
        let (w, _) = parse_wxml(r#"<view class="a"><text>hi</text></view>"#, "p");
        assert!(extract_bind_calls(&w, "p").0.is_empty());
    }

    #[test]
    fn dynamic_handler_diagnosed() {
        let (w, _) = parse_wxml(r#"<button bindtap="{{h}}"/>"#, "p");
        let (calls, diags) = extract_bind_calls(&w, "p");
        assert_eq!(calls.len(), 1);
        assert_eq!(diags[0].code, DiagCode::BindingInHandler);
    }

    #[test]
    fn data_bindings() {
        let (w, _) = parse_wxml(r#"<navigator url="{{takePhotoPath}}"/><view>{{message}}</view><navigator url="/pages/a/index"/>"#, "p");
        let b: Vec<_> = extract_data_bindings(&w, "p").into_iter().collect();
        assert_eq!(
            b,
            vec![
                DataBinding { widget_xpath: "/page/navigator[1]".into(), attr_name: "url".into(), expr: "takePhotoPath".into() },
                DataBinding { widget_xpath: "/page/view[1]".into(), attr_name: "#text".into(), expr: "message".into() },
            ]
        );
        let (w, _) = parse_wxml(r#"<navigator url="/pages/a/index"/>"#, "p");
        assert!(extract_data_bindings(&w, "p").is_empty());
    }

    #[test]
    fn simple_paths() {
        assert!(is_simple_binding_path("a.b.c"));
        assert!(is_simple_binding_path("_x"));
        assert!(!is_simple_binding_path("a + b"));
        assert!(!is_simple_binding_path("a..b"));
        assert!(!is_simple_binding_path("1a"));
    }
}
