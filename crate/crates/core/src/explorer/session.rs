//! Directed exploration sessions: subpackage-directed breadth-first replay
//! and practice-directed depth-first replay against one runtime.

use super::matching::{locate_widget, xpath_match, MatchMethod, MatchResult};
use super::runtime::{Action, ApiEvent, RuntimeError, SimulatedRuntime, StepOutcome, ENTRY_HOOKS};
use crate::diag::{DiagCode, Diagnostic};
use crate::graphs::{AppAnalysis, EntryEvent, StackEffect, Target, TransitionEdge, TransitionPath, Trigger, Utg, Verdict};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Extra attempts granted to a path whose replay failed.
pub const RETRY_BUDGET: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    /// Page the action was performed on; `None` for a launch.
    pub screen: Option<String>,
    pub matched_widget: Option<String>,
    pub method: Option<MatchMethod>,
    pub action: Option<Action>,
    pub resulting_page: String,
    pub new_subpackage: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObservedEvent {
    pub step: usize,
    #[serde(flatten)]
    pub event: ApiEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExplorationTrace {
    pub phase: u8,
    pub steps: Vec<TraceStep>,
    pub observed: Vec<ObservedEvent>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ExplorationTrace {
    pub fn new(phase: u8) -> Self {
        Self { phase, steps: Vec::new(), observed: Vec::new(), diagnostics: Vec::new() }
    }

    pub fn events(&self) -> Vec<ApiEvent> {
        self.observed.iter().map(|o| o.event.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct LoadedSubpackage {
    pub root: String,
    pub dir: String,
}

#[derive(Debug)]
enum ReplayError {
    Runtime(RuntimeError),
    Other(String),
}

impl std::fmt::Display for ReplayError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReplayError::Runtime(e) => e.fmt(f),
            ReplayError::Other(s) => f.write_str(s),
        }
    }
}

impl From<RuntimeError> for ReplayError {
    fn from(e: RuntimeError) -> Self {
        ReplayError::Runtime(e)
    }
}

struct Session<'a> {
    analysis: &'a AppAnalysis,
    rt: &'a mut SimulatedRuntime,
    trace: ExplorationTrace,
}

impl Session<'_> {
    fn record(&mut self, screen: Option<String>, m: Option<&MatchResult>, action: Option<Action>, out: StepOutcome) {
        let step = self.trace.steps.len();
        for e in &self.rt.api_log[out.events.clone()] {
            self.trace.observed.push(ObservedEvent { step, event: e.clone() });
        }
        self.trace.steps.push(TraceStep {
            screen,
            matched_widget: m.map(|m| m.candidate.xpath.clone()),
            method: m.map(|m| m.method),
            action,
            resulting_page: out.page,
            new_subpackage: out.new_subpackage,
        });
    }

    fn launch(&mut self) -> Result<usize, ReplayError> {
        let out = self.rt.launch()?;
        let start = out.events.start;
        self.record(None, None, None, out);
        Ok(start)
    }

    fn current(&self) -> String {
        self.rt.current_page().unwrap_or_default().to_string()
    }

    /// Locates the markup element on the live screen and acts on it. An IoU
    /// candidate the runtime rejects is retried with the xpath candidate.
    fn fire(&mut self, page: &str, xpath: &str, action: Action) -> Result<(), ReplayError> {
        let node = self
            .analysis
            .parsed
            .wxmls
            .get(page)
            .and_then(|t| t.find(xpath))
            .ok_or_else(|| ReplayError::Other(format!("no element {xpath} on {page}")))?;
        let screen = self.rt.screen().to_vec();
        let first = locate_widget(node, &screen).map_err(|e| ReplayError::Other(e.to_string()))?;
        let here = self.current();
        match self.rt.step(&first.candidate, action) {
            Ok(out) => {
                self.record(Some(here), Some(&first), Some(action), out);
                Ok(())
            }
            Err(RuntimeError::IllegalAction(reason)) if first.method == MatchMethod::Iou => {
                let second = xpath_match(xpath, &screen).map_err(|e| ReplayError::Other(e.to_string()))?;
                if second.candidate.xpath == first.candidate.xpath {
                    return Err(RuntimeError::IllegalAction(reason).into());
                }
                let out = self.rt.step(&second.candidate, action)?;
                self.record(Some(here), Some(&second), Some(action), out);
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    }

    fn replay_edge(&mut self, e: &TransitionEdge) -> Result<(), ReplayError> {
        let here = self.current();
        if here != e.from {
            return Err(ReplayError::Other(format!("expected page {}, runtime shows {here}", e.from)));
        }
        match &e.trigger {
            Trigger::Navigator { xpath } => self.fire(&e.from, xpath, Action::Tap)?,
            Trigger::Bind(b) => self.fire(&b.page, &b.widget_xpath, Action::for_event(&b.event))?,
            other => return Err(ReplayError::Other(format!("trigger {other:?} cannot be driven from the screen"))),
        }
        if let Some(expected) = e.to.page() {
            let now = self.current();
            if now != expected {
                return Err(ReplayError::Other(format!("expected page {expected} after the step, runtime shows {now}")));
            }
        }
        Ok(())
    }

    fn diag(&mut self, code: DiagCode, location: &str, message: String) {
        self.trace.diagnostics.push(Diagnostic::new(code, location, message));
    }

    fn finish(mut self) -> ExplorationTrace {
        self.trace.diagnostics.sort();
        self.trace.diagnostics.dedup();
        self.trace
    }
}

/// Replays the shortest route into each unloaded subpackage. Failed paths
/// are re-enqueued once; once a subpackage loads, its remaining paths are
/// dropped. Returns the trace and the subpackages the runtime exposed.
pub fn explore_bfs_subpackages(analysis: &AppAnalysis, rt: &mut SimulatedRuntime) -> (ExplorationTrace, Vec<LoadedSubpackage>) {
    let before = rt.loaded_subpackages.clone();
    let mut s = Session { analysis, rt, trace: ExplorationTrace::new(1) };
    if let Err(e) = s.rt.launch() {
        let launch = s.rt.manifest.launch.clone();
        s.diag(DiagCode::Exploration, &launch, format!("launch failed: {e}"));
        return (s.finish(), Vec::new());
    }
    s.rt.page_stack.clear();
    let mut queue: VecDeque<(&TransitionPath, usize)> = analysis.transition_paths.iter().map(|p| (p, 0)).collect();
    while let Some((path, attempts)) = queue.pop_front() {
        if s.rt.loaded_subpackages.contains(&path.subpackage) {
            continue;
        }
        let result = s.launch().map(|_| ()).and_then(|_| path.edges.iter().try_for_each(|e| s.replay_edge(e)));
        match result {
            Ok(()) => {
                let root = &path.subpackage;
                queue.retain(|(p, _)| &p.subpackage != root);
                if !s.rt.loaded_subpackages.contains(root) {
                    s.diag(DiagCode::Exploration, &path.target, format!("reached {} but subpackage {root} did not load", path.target));
                }
            }
            Err(e) if attempts < RETRY_BUDGET => {
                s.diag(DiagCode::Exploration, &path.target, format!("path to {} failed, retrying: {e}", path.target));
                queue.push_back((path, attempts + 1));
            }
            Err(e) => s.diag(DiagCode::Exploration, &path.target, format!("path to {} abandoned: {e}", path.target)),
        }
    }
    let mut loaded = Vec::new();
    for root in s.rt.loaded_subpackages.difference(&before).cloned().collect::<Vec<_>>() {
        match s.rt.manifest.subpackages.get(&root) {
            Some(dir) => loaded.push(LoadedSubpackage { root, dir: dir.clone() }),
            None => s.diag(DiagCode::Exploration, &root, format!("runtime loaded {root} without exposing a directory")),
        }
    }
    (s.finish(), loaded)
}

/// Drives every reachable practice, in order, through its full trigger
/// path before starting the next one.
pub fn explore_dfs_practices(analysis: &AppAnalysis, rt: &mut SimulatedRuntime) -> ExplorationTrace {
    let mut s = Session { analysis, rt, trace: ExplorationTrace::new(2) };
    let routes = shortest_routes(&analysis.mdg.utg);
    let queue: VecDeque<_> = analysis.practices.iter().filter(|p| p.is_reachable()).collect();
    // Entry already driven → api log range it produced.
    let mut driven: BTreeMap<String, Result<std::ops::Range<usize>, String>> = BTreeMap::new();
    for p in queue {
        let Verdict::Reachable { entry, .. } = &p.verdict else { continue };
        let loc = format!("{}:{}:{}", p.call_site.file, p.call_site.line, p.call_site.col);
        let key = entry.describe();
        let outcome = match driven.get(&key) {
            Some(o) => o.clone(),
            None => {
                let o = drive(&mut s, &routes, entry);
                driven.insert(key.clone(), o.clone());
                o
            }
        };
        match outcome {
            Ok(range) => {
                if !s.rt.api_log[range].iter().any(|e| e.api == p.api) {
                    s.diag(DiagCode::StaticOnlyEvidence, &loc, format!("static-only evidence: {} not observed when driving {key}", p.api));
                }
            }
            Err(reason) => s.diag(DiagCode::StaticOnlyEvidence, &loc, format!("static-only evidence: {} ({reason})", p.api)),
        }
    }
    s.finish()
}

fn drive(s: &mut Session<'_>, routes: &BTreeMap<String, Vec<TransitionEdge>>, entry: &EntryEvent) -> Result<std::ops::Range<usize>, String> {
    let start = s.rt.api_log.len();
    let page = entry.page().map(str::to_string);
    let route = match &page {
        Some(p) => routes.get(p).ok_or_else(|| format!("no route from the launch page to {p}"))?.clone(),
        None => Vec::new(),
    };
    let describe = |e: ReplayError| match e {
        ReplayError::Runtime(RuntimeError::PageBlocked(p)) => format!("page {p} is blocked"),
        other => other.to_string(),
    };
    s.launch().map_err(describe)?;
    for e in &route {
        s.replay_edge(e).map_err(describe)?;
    }
    match entry {
        EntryEvent::Lifecycle { name, .. } if page.is_none() || ENTRY_HOOKS.contains(&name.as_str()) => {}
        EntryEvent::Lifecycle { name, .. } => return Err(format!("lifecycle hook {name} cannot be driven")),
        EntryEvent::Gui { bind, .. } => s.fire(&bind.page, &bind.widget_xpath, Action::for_event(&bind.event)).map_err(describe)?,
    }
    Ok(start..s.rt.api_log.len())
}

/// Breadth-first shortest UI-drivable route from the launch page to every
/// page, over concrete forward edges.
fn shortest_routes(utg: &Utg) -> BTreeMap<String, Vec<TransitionEdge>> {
    let mut out = BTreeMap::new();
    let Some(launch) = utg.launch.clone() else { return out };
    out.insert(launch.clone(), Vec::new());
    let mut queue = VecDeque::from([launch]);
    let mut seen = BTreeSet::new();
    while let Some(p) = queue.pop_front() {
        if !seen.insert(p.clone()) {
            continue;
        }
        for e in utg.outgoing(&p) {
            if e.stack_effect == StackEffect::Pop || !matches!(e.trigger, Trigger::Navigator { .. } | Trigger::Bind(_)) {
                continue;
            }
            let Target::Page { path } = &e.to else { continue };
            if !out.contains_key(path) {
                let mut r: Vec<TransitionEdge> = out[&p].clone();
                r.push(e.clone());
                out.insert(path.clone(), r);
                queue.push_back(path.clone());
            }
        }
    }
    out
}
