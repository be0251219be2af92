//! Declarative runtime simulator: each page lists its rendered widgets and
//! each handler its routing effect and API invocations.

use crate::graphs::{Mechanism, StackEffect};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MAX_STACK_DEPTH: usize = 10;
/// Lifecycle hooks fired on page entry, in order.
pub const ENTRY_HOOKS: [&str; 3] = ["onLoad", "onShow", "onReady"];
/// Hook fired on a page revealed by back navigation.
pub const REVEAL_HOOK: &str = "onShow";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Tap,
    Input,
    Scroll,
}

impl Action {
    /// Action that fires a markup event of the given name.
    pub fn for_event(event: &str) -> Action {
        match event {
            "input" | "change" | "confirm" | "blur" | "focus" => Action::Input,
            "scroll" | "scrolltolower" | "scrolltoupper" => Action::Scroll,
            _ => Action::Tap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WidgetAttrs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub widget_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_id: Option<String>,
}

impl WidgetAttrs {
    /// Present attributes as raw key-value pairs; bounds render as `x,y,w,h`.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if let Some(v) = &self.name {
            out.push(("name", v.clone()));
        }
        if let Some(v) = &self.widget_type {
            out.push(("type", v.clone()));
        }
        if let Some(v) = &self.text {
            out.push(("text", v.clone()));
        }
        if let Some(b) = &self.bounds {
            out.push(("bounds", format!("{},{},{},{}", b.x, b.y, b.w, b.h)));
        }
        if let Some(v) = &self.resource_id {
            out.push(("resource_id", v.clone()));
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiWidget {
    pub xpath: String,
    #[serde(default)]
    pub attrs: WidgetAttrs,
    #[serde(default)]
    pub actions: BTreeSet<Action>,
    /// Handler fired per action; names refer to the page's `handlers`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bindings: BTreeMap<Action, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ApiCall {
    pub api: String,
    #[serde(default)]
    pub args_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub mechanism: Mechanism,
    /// Absent for back navigation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handler {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
    #[serde(default)]
    pub api_events: Vec<ApiCall>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimePage {
    #[serde(default)]
    pub widgets: Vec<UiWidget>,
    #[serde(default)]
    pub handlers: BTreeMap<String, Handler>,
    #[serde(default)]
    pub lifecycle_api_events: BTreeMap<String, Vec<ApiCall>>,
    #[serde(default)]
    pub blocked: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeManifest {
    pub launch: String,
    pub pages: BTreeMap<String, RuntimePage>,
    /// Subpackage root prefix → directory holding its files.
    #[serde(default)]
    pub subpackages: BTreeMap<String, String>,
    /// Tab pages; empty means tab switches are unchecked.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tab_bar: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read runtime manifest {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid runtime manifest: {0}")]
    Json(#[from] serde_json::Error),
}

impl RuntimeManifest {
    pub fn from_json(text: &str) -> Result<Self, ManifestError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    /// Subpackage root owning `page`, if any.
    pub fn subpackage_of(&self, page: &str) -> Option<&str> {
        self.subpackages
            .keys()
            .find(|root| page.strip_prefix(root.as_str()).is_some_and(|rest| rest.starts_with('/')))
            .map(String::as_str)
    }
}

/// One observed API invocation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ApiEvent {
    pub api: String,
    pub page: String,
    /// Handler or lifecycle hook that fired it.
    pub trigger: String,
    pub args_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("illegal action: {0}")]
    IllegalAction(String),
    #[error("page stack is full ({0} pages)")]
    StackFull(usize),
    #[error("page {0} is blocked")]
    PageBlocked(String),
}

/// Effect of one accepted step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub page: String,
    pub new_subpackage: Option<String>,
    /// Range of `api_log` appended by the step.
    pub events: std::ops::Range<usize>,
}

#[derive(Debug, Clone)]
pub struct SimulatedRuntime {
    pub manifest: RuntimeManifest,
    pub page_stack: Vec<String>,
    pub loaded_subpackages: BTreeSet<String>,
    pub api_log: Vec<ApiEvent>,
    pub max_depth: usize,
}

impl SimulatedRuntime {
    pub fn new(manifest: RuntimeManifest) -> Self {
        Self { manifest, page_stack: Vec::new(), loaded_subpackages: BTreeSet::new(), api_log: Vec::new(), max_depth: MAX_STACK_DEPTH }
    }

    pub fn depth(&self) -> usize {
        self.page_stack.len()
    }

    pub fn current_page(&self) -> Option<&str> {
        self.page_stack.last().map(String::as_str)
    }

    /// Widgets rendered on the top page.
    pub fn screen(&self) -> &[UiWidget] {
        self.current_page().and_then(|p| self.manifest.pages.get(p)).map(|p| p.widgets.as_slice()).unwrap_or(&[])
    }

    /// Opens the launch page on an empty stack. Loaded subpackages and the
    /// API log persist across launches.
    pub fn launch(&mut self) -> Result<StepOutcome, RuntimeError> {
        let launch = self.manifest.launch.clone();
        let start = self.api_log.len();
        let new_subpackage = self.check_enterable(&launch)?;
        self.page_stack.clear();
        self.enter(launch.clone(), new_subpackage.clone());
        Ok(StepOutcome { page: launch, new_subpackage, events: start..self.api_log.len() })
    }

    /// Performs `action` on a widget of the current screen.
    pub fn step(&mut self, widget: &UiWidget, action: Action) -> Result<StepOutcome, RuntimeError> {
        let page = self.current_page().ok_or_else(|| RuntimeError::IllegalAction("no page is open".into()))?.to_string();
        let rendered = self
            .screen()
            .iter()
            .find(|w| w.xpath == widget.xpath)
            .ok_or_else(|| RuntimeError::IllegalAction(format!("{} is not on {page}", widget.xpath)))?;
        if !rendered.actions.contains(&action) {
            return Err(RuntimeError::IllegalAction(format!("{} does not accept {action:?}", widget.xpath)));
        }
        let start = self.api_log.len();
        let Some(name) = rendered.bindings.get(&action).cloned() else {
            return Ok(StepOutcome { page, new_subpackage: None, events: start..start });
        };
        let handler = self.manifest.pages[&page].handlers.get(&name).cloned().unwrap_or_default();
        // Validate the route before logging so a rejected step leaves no trace.
        let plan = match &handler.route {
            Some(r) => Some(self.plan(r.mechanism, r.target.as_deref())?),
            None => None,
        };
        for call in &handler.api_events {
            self.api_log.push(ApiEvent { api: call.api.clone(), page: page.clone(), trigger: name.clone(), args_digest: call.args_digest.clone() });
        }
        let new_subpackage = plan.and_then(|p| self.apply(p));
        Ok(StepOutcome { page: self.current_page().unwrap_or_default().to_string(), new_subpackage, events: start..self.api_log.len() })
    }

    /// Applies a routing call directly, as if fired by code on the top page.
    pub fn navigate(&mut self, mechanism: Mechanism, target: Option<&str>) -> Result<StepOutcome, RuntimeError> {
        let start = self.api_log.len();
        let plan = self.plan(mechanism, target)?;
        let new_subpackage = self.apply(plan);
        Ok(StepOutcome { page: self.current_page().unwrap_or_default().to_string(), new_subpackage, events: start..self.api_log.len() })
    }

    fn check_enterable(&self, page: &str) -> Result<Option<String>, RuntimeError> {
        let p = self.manifest.pages.get(page).ok_or_else(|| RuntimeError::IllegalAction(format!("unknown page {page}")))?;
        if p.blocked {
            return Err(RuntimeError::PageBlocked(page.to_string()));
        }
        Ok(self.manifest.subpackage_of(page).filter(|r| !self.loaded_subpackages.contains(*r)).map(str::to_string))
    }

    fn plan(&self, mechanism: Mechanism, target: Option<&str>) -> Result<Plan, RuntimeError> {
        let effect = mechanism.stack_effect();
        if effect == StackEffect::Pop {
            if self.depth() <= 1 {
                return Err(RuntimeError::IllegalAction("back navigation at the bottom of the stack".into()));
            }
            return Ok(Plan { effect, target: None, new_subpackage: None });
        }
        let target = target.ok_or_else(|| RuntimeError::IllegalAction(format!("{} without a target", mechanism.name())))?;
        let new_subpackage = self.check_enterable(target)?;
        match effect {
            StackEffect::Push if self.depth() >= self.max_depth => return Err(RuntimeError::StackFull(self.depth())),
            StackEffect::Replace if self.depth() == 0 => return Err(RuntimeError::IllegalAction("no page to replace".into())),
            StackEffect::ClearTab if !self.manifest.tab_bar.is_empty() && !self.manifest.tab_bar.iter().any(|t| t == target) => {
                return Err(RuntimeError::IllegalAction(format!("{target} is not a tab page")))
            }
            _ => {}
        }
        Ok(Plan { effect, target: Some(target.to_string()), new_subpackage })
    }

    fn apply(&mut self, plan: Plan) -> Option<String> {
        match (plan.effect, plan.target) {
            (StackEffect::Pop, _) => {
                self.page_stack.pop();
                let top = self.page_stack.last().cloned().unwrap_or_default();
                self.fire(&top, REVEAL_HOOK);
                None
            }
            (effect, Some(target)) => {
                match effect {
                    StackEffect::Replace => {
                        self.page_stack.pop();
                    }
                    StackEffect::ClearOpen | StackEffect::ClearTab => self.page_stack.clear(),
                    _ => {}
                }
                self.enter(target, plan.new_subpackage.clone());
                plan.new_subpackage
            }
            (_, None) => None,
        }
    }

    fn enter(&mut self, page: String, new_subpackage: Option<String>) {
        if let Some(root) = new_subpackage {
            self.loaded_subpackages.insert(root);
        }
        self.page_stack.push(page.clone());
        for hook in ENTRY_HOOKS {
            self.fire(&page, hook);
        }
    }

    fn fire(&mut self, page: &str, hook: &str) {
        let Some(calls) = self.manifest.pages.get(page).and_then(|p| p.lifecycle_api_events.get(hook)) else { return };
        for call in calls.clone() {
            self.api_log.push(ApiEvent { api: call.api, page: page.to_string(), trigger: hook.to_string(), args_digest: call.args_digest });
        }
    }
}

struct Plan {
    effect: StackEffect,
    target: Option<String>,
    new_subpackage: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> RuntimeManifest {
        let json = r#"{
            "launch": "pages/home/index",
            "pages": {
                "pages/home/index": {
                    "widgets": [{"xpath": "/page/button[1]", "attrs": {"type": "button", "text": "Go"}, "actions": ["tap"], "bindings": {"tap": "go"}}],
                    "handlers": {"go": {"route": {"mechanism": "wx.navigateTo", "target": "sub/pages/a/index"}, "api_events": [{"api": "wx.getLocation", "args_digest": "d"}]}},
                    "lifecycle_api_events": {"onLoad": [{"api": "wx.getSystemInfo"}]}
                },
                "sub/pages/a/index": {},
                "pages/locked/index": {"blocked": true}
            },
            "subpackages": {"sub": "sub-dir"}
        }"#;
        RuntimeManifest::from_json(json).unwrap()
    }

    #[test]
    fn tap_routes_and_loads_subpackage() {
        let mut rt = SimulatedRuntime::new(manifest());
        let out = rt.launch().unwrap();
        assert_eq!(rt.api_log[out.events].len(), 1);
        let w = rt.screen()[0].clone();
        let out = rt.step(&w, Action::Tap).unwrap();
        assert_eq!(out.page, "sub/pages/a/index");
        assert_eq!(out.new_subpackage.as_deref(), Some("sub"));
        assert_eq!(rt.api_log[out.events.clone()][0].trigger, "go");
        assert_eq!(rt.depth(), 2);
        assert!(matches!(rt.step(&w, Action::Tap), Err(RuntimeError::IllegalAction(_))));
    }

    #[test]
    fn stack_rules() {
        let mut rt = SimulatedRuntime::new(manifest());
        rt.launch().unwrap();
        assert!(matches!(rt.navigate(Mechanism::NavigateBack, None), Err(RuntimeError::IllegalAction(_))));
        assert_eq!(rt.navigate(Mechanism::Navigate, Some("pages/locked/index")), Err(RuntimeError::PageBlocked("pages/locked/index".into())));
        for _ in 1..MAX_STACK_DEPTH {
            rt.navigate(Mechanism::NavigateTo, Some("pages/home/index")).unwrap();
        }
        assert_eq!(rt.navigate(Mechanism::Navigate, Some("pages/home/index")), Err(RuntimeError::StackFull(MAX_STACK_DEPTH)));
        rt.navigate(Mechanism::Redirect, Some("sub/pages/a/index")).unwrap();
        assert_eq!(rt.depth(), MAX_STACK_DEPTH);
        rt.navigate(Mechanism::ReLaunch, Some("pages/home/index")).unwrap();
        assert_eq!(rt.depth(), 1);
    }

    #[test]
    fn blocked_launch() {
        let mut m = manifest();
        m.launch = "pages/locked/index".into();
        let mut rt = SimulatedRuntime::new(m);
        assert!(matches!(rt.launch(), Err(RuntimeError::PageBlocked(_))));
        assert!(rt.page_stack.is_empty());
    }
}
