//! Two-phase directed exploration against a simulated runtime: widget
//! matching, the runtime model, exploration sessions and manifest
//! generation from a loaded package.

pub mod manifest_gen;
pub mod matching;
pub mod runtime;
pub mod session;

pub use manifest_gen::{generate_manifest, navigator_handler, GenOptions};
pub use matching::{iou, iou_match, key_attrs, levenshtein, locate_widget, xpath_match, Iou, MatchError, MatchMethod, MatchResult, MatchScore};
pub use runtime::{
    Action, ApiCall, ApiEvent, Bounds, Handler, ManifestError, Route, RuntimeError, RuntimeManifest, RuntimePage, SimulatedRuntime,
    StepOutcome, UiWidget, WidgetAttrs, MAX_STACK_DEPTH,
};
pub use session::{explore_bfs_subpackages, explore_dfs_practices, ExplorationTrace, LoadedSubpackage, ObservedEvent, TraceStep, RETRY_BUDGET};
