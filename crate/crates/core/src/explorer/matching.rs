//! Locating statically known widgets on a rendered screen: attribute-pair
//! IoU first, xpath edit distance as the fallback.

use super::runtime::{UiWidget, WidgetAttrs};
use crate::frontend::WxmlNode;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMethod {
    Iou,
    Xpath,
}

/// Exact IoU as a fraction `inter / union`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Iou {
    pub inter: usize,
    pub union: usize,
}

impl Iou {
    pub fn value(self) -> f64 {
        if self.union == 0 {
            0.0
        } else {
            self.inter as f64 / self.union as f64
        }
    }

    /// At least one half, compared without division.
    pub fn meets_threshold(self) -> bool {
        self.union > 0 && 2 * self.inter >= self.union
    }
}

impl PartialOrd for Iou {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Iou {
    fn cmp(&self, other: &Self) -> Ordering {
        // An empty union counts as zero.
        let (a, b) = (if self.union == 0 { (0, 1) } else { (self.inter, self.union) }, if other.union == 0 { (0, 1) } else { (other.inter, other.union) });
        (a.0 * b.1).cmp(&(b.0 * a.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MatchScore {
    Iou { inter: usize, union: usize },
    Distance { value: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub candidate: UiWidget,
    pub method: MatchMethod,
    pub score: MatchScore,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("screen has no widgets")]
    EmptyScreen,
}

fn normalize(v: &str) -> String {
    v.trim().to_lowercase()
}

/// Normalized key-value pairs of an attribute map.
pub fn attr_pairs(attrs: &WidgetAttrs) -> BTreeSet<(String, String)> {
    attrs.pairs().into_iter().map(|(k, v)| (k.to_string(), normalize(&v))).collect()
}

pub fn iou(a: &WidgetAttrs, b: &WidgetAttrs) -> Iou {
    let (pa, pb) = (attr_pairs(a), attr_pairs(b));
    let inter = pa.intersection(&pb).count();
    Iou { inter, union: pa.len() + pb.len() - inter }
}

/// Highest-IoU widget if it reaches one half; ties go to the smaller xpath.
pub fn iou_match(target: &WidgetAttrs, screen: &[UiWidget]) -> Option<MatchResult> {
    let best = screen
        .iter()
        .map(|w| (iou(target, &w.attrs), w))
        .max_by(|(sa, wa), (sb, wb)| sa.cmp(sb).then_with(|| wb.xpath.cmp(&wa.xpath)))?;
    let (score, w) = best;
    score.meets_threshold().then(|| MatchResult {
        candidate: w.clone(),
        method: MatchMethod::Iou,
        score: MatchScore::Iou { inter: score.inter, union: score.union },
    })
}

/// Character-level edit distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    strsim::levenshtein(a, b)
}

/// Widget whose xpath is closest to `target_xpath`; ties go to the smaller
/// xpath.
pub fn xpath_match(target_xpath: &str, screen: &[UiWidget]) -> Result<MatchResult, MatchError> {
    let (d, w) = screen
        .iter()
        .map(|w| (levenshtein(target_xpath, &w.xpath), w))
        .min_by(|(da, wa), (db, wb)| da.cmp(db).then_with(|| wa.xpath.cmp(&wb.xpath)))
        .ok_or(MatchError::EmptyScreen)?;
    Ok(MatchResult { candidate: w.clone(), method: MatchMethod::Xpath, score: MatchScore::Distance { value: d } })
}

/// Key attributes of a markup element: `name`, the tag as `type`, and its
/// static text.
pub fn key_attrs(node: &WxmlNode) -> WidgetAttrs {
    let text = node_text(node);
    WidgetAttrs {
        name: node.attr("name").filter(|v| v.is_static()).map(|v| v.raw.clone()),
        widget_type: Some(node.tag.clone()),
        text: (!text.is_empty()).then_some(text),
        ..WidgetAttrs::default()
    }
}

/// Static text directly inside the element.
pub fn node_text(node: &WxmlNode) -> String {
    node.text.as_ref().filter(|t| t.is_static()).map(|t| t.raw.trim().to_string()).unwrap_or_default()
}

pub fn locate_widget(node: &WxmlNode, screen: &[UiWidget]) -> Result<MatchResult, MatchError> {
    if screen.is_empty() {
        return Err(MatchError::EmptyScreen);
    }
    match iou_match(&key_attrs(node), screen) {
        Some(m) => Ok(m),
        None => xpath_match(&node.xpath, screen),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorer::runtime::Bounds;

    fn w(xpath: &str, attrs: WidgetAttrs) -> UiWidget {
        UiWidget { xpath: xpath.into(), attrs, ..UiWidget::default() }
    }

    fn attrs(ty: &str, text: &str) -> WidgetAttrs {
        WidgetAttrs { widget_type: Some(ty.into()), text: Some(text.into()), ..WidgetAttrs::default() }
    }

    #[test]
    fn half_overlap_matches() {
        let target = WidgetAttrs { name: Some(String::new()), ..attrs("button", "manual input") };
        let u = WidgetAttrs { bounds: Some(Bounds { x: 0, y: 0, w: 10, h: 10 }), ..attrs("button", "manual input") };
        assert_eq!(iou(&target, &u), Iou { inter: 2, union: 4 });
        let m = iou_match(&target, &[w("/page/button[1]", u)]).unwrap();
        assert_eq!(m.method, MatchMethod::Iou);
    }

    #[test]
    fn identical_and_disjoint() {
        let a = attrs("button", "OK");
        assert_eq!(iou(&a, &a).value(), 1.0);
        let b = WidgetAttrs { resource_id: Some("x".into()), ..WidgetAttrs::default() };
        assert_eq!(iou(&a, &b).inter, 0);
        assert!(iou_match(&a, &[w("/page/view[1]", b)]).is_none());
    }

    #[test]
    fn normalization_trims_and_folds_case() {
        assert_eq!(iou(&attrs("Button", "  OK "), &attrs("button", "ok")).inter, 2);
    }

    #[test]
    fn xpath_fallback_and_ties() {
        let screen = [w("/page/view[1]/navigator[3]", WidgetAttrs::default()), w("/page/button[1]", WidgetAttrs::default())];
        let m = xpath_match("/page/view[1]/navigator[2]", &screen).unwrap();
        assert_eq!(m.candidate.xpath, "/page/view[1]/navigator[3]");
        assert_eq!(m.score, MatchScore::Distance { value: 1 });
        assert_eq!(xpath_match("/page", &[]), Err(MatchError::EmptyScreen));
        let tie = [w("/page/b[1]", WidgetAttrs::default()), w("/page/a[1]", WidgetAttrs::default())];
        assert_eq!(xpath_match("/page/c[1]", &tie).unwrap().candidate.xpath, "/page/a[1]");
    }

    #[test]
    fn repeated_items_break_ties_by_xpath() {
        // Three rendered items share type only; the target names the type and a text none of them has.
        let screen: Vec<_> = (1..=3).map(|i| w(&format!("/page/view[{i}]"), attrs("view", &format!("item {i}")))).collect();
        let target = WidgetAttrs { widget_type: Some("view".into()), ..WidgetAttrs::default() };
        let m = iou_match(&target, &screen).unwrap();
        assert_eq!(m.candidate.xpath, "/page/view[1]");
    }

    #[test]
    fn locate_prefers_iou_then_xpath() {
        let (tree, _) = crate::frontend::parse_wxml("<view><navigator url=\"/a\">Go</navigator><image/></view>", "p");
        let nav = tree.find("/page/view[1]/navigator[1]").unwrap();
        let screen = [w("/page/view[2]/navigator[1]", attrs("navigator", "Go")), w("/page/view[1]/image[1]", WidgetAttrs { widget_type: Some("image".into()), ..WidgetAttrs::default() })];
        let m = locate_widget(nav, &screen).unwrap();
        assert_eq!((m.method, m.candidate.xpath.as_str()), (MatchMethod::Iou, "/page/view[2]/navigator[1]"));
        let img = tree.find("/page/view[1]/image[1]").unwrap();
        let screen = [w("/page/view[1]/image[1]", WidgetAttrs { text: Some("x".into()), resource_id: Some("r".into()), ..WidgetAttrs::default() })];
        assert_eq!(locate_widget(img, &screen).unwrap().method, MatchMethod::Xpath);
    }
}
