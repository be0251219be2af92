//! Loading, validating and merging unpacked MiniApp package directories.
//!
//! A package directory holds `app.json` plus page sources laid out as
//! `<page-path>.wxml` / `<page-path>.js`. At cold start only the main package
//! is present; subpackages declared in the manifest are merged in later, once
//! their code has been fetched.

use crate::diag::{DiagCode, Diagnostic};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;
use walkdir::WalkDir;

pub const MANIFEST_FILE: &str = "app.json";

#[derive(Debug, Error)]
pub enum PackageError {
    #[error("no {MANIFEST_FILE} found under {0}")]
    MissingManifest(PathBuf),
    #[error("invalid manifest {path}: {reason}")]
    InvalidManifest { path: PathBuf, reason: String },
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("page path {0} is declared more than once")]
    DuplicatePagePath(String),
    #[error("manifest declares {0} but no source files exist for it")]
    DanglingManifestEntry(String),
    #[error("invalid page path {0:?}")]
    InvalidPagePath(String),
    #[error("no unloaded subpackage with root {0:?}")]
    UnknownSubpackage(String),
    #[error("{path} lies outside subpackage root {prefix}")]
    PageOutsidePrefix { prefix: String, path: String },
}

pub type Result<T> = std::result::Result<T, PackageError>;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Manifest {
    /// Main-package pages; the first entry is the launch page.
    pub page_paths: Vec<String>,
    pub tab_bar_pages: Vec<String>,
    pub subpackage_decls: Vec<SubpackageDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubpackageDecl {
    pub root_prefix: String,
    pub page_paths: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PageUnit {
    pub path: String,
    pub wxml_source: String,
    pub js_source: String,
    pub in_subpackage: Option<String>,
}

impl PageUnit {
    pub fn js_file(&self) -> String {
        format!("{}.js", self.path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubpackageSpec {
    pub root_prefix: String,
    pub page_paths: Vec<String>,
    pub loaded: bool,
    pub source_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PageScope {
    Main,
    Loaded,
    AllDeclared,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MiniAppPackage {
    pub root: PathBuf,
    pub manifest: Manifest,
    /// Sorted by page path.
    pub pages: Vec<PageUnit>,
    pub subpackages: Vec<SubpackageSpec>,
    pub complete: bool,
    /// JavaScript files that are not page logic (`app.js`, shared modules),
    /// keyed by normalized relative path including the `.js` extension.
    pub scripts: BTreeMap<String, String>,
    pub manifest_source: String,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Deserialize)]
struct RawManifest {
    #[serde(default)]
    pages: Vec<String>,
    #[serde(default, rename = "tabBar")]
    tab_bar: Option<RawTabBar>,
    #[serde(default)]
    subpackages: Vec<RawSubpackage>,
}

#[derive(Deserialize)]
struct RawTabBar {
    #[serde(default)]
    list: Vec<RawTabItem>,
}

#[derive(Deserialize)]
struct RawTabItem {
    #[serde(rename = "pagePath")]
    page_path: String,
}

#[derive(Deserialize)]
struct RawSubpackage {
    root: String,
    #[serde(default)]
    pages: Vec<String>,
}

/// Normalizes a page path: leading `/` and `.wxml`/`.js` extensions are
/// stripped, `.` segments dropped; `..` is rejected.
pub fn normalize_page_path(raw: &str) -> Result<String> {
    let trimmed = raw.trim();
    let stripped = trimmed
        .strip_suffix(".wxml")
        .or_else(|| trimmed.strip_suffix(".js"))
        .unwrap_or(trimmed);
    let mut segments = Vec::new();
    for seg in stripped.split('/') {
        match seg {
            "" | "." => {}
            ".." => return Err(PackageError::InvalidPagePath(raw.to_string())),
            s => segments.push(s),
        }
    }
    if segments.is_empty() {
        return Err(PackageError::InvalidPagePath(raw.to_string()));
    }
    Ok(segments.join("/"))
}

fn normalize_root_prefix(raw: &str) -> Result<String> {
    let trimmed = raw.trim().trim_end_matches('/');
    normalize_page_path(trimmed)
}

fn invalid(path: &Path, reason: impl Into<String>) -> PackageError {
    PackageError::InvalidManifest { path: path.to_path_buf(), reason: reason.into() }
}

fn parse_manifest(path: &Path, text: &str, diags: &mut Vec<Diagnostic>) -> Result<Manifest> {
    let raw: RawManifest = serde_json::from_str(text).map_err(|e| invalid(path, e.to_string()))?;
    let mut seen = BTreeSet::new();
    let mut page_paths = Vec::new();
    for p in &raw.pages {
        let norm = normalize_page_path(p)?;
        if !seen.insert(norm.clone()) {
            return Err(PackageError::DuplicatePagePath(norm));
        }
        page_paths.push(norm);
    }
    let mut tab_bar_pages = Vec::new();
    for item in raw.tab_bar.map(|t| t.list).unwrap_or_default() {
        let norm = normalize_page_path(&item.page_path)?;
        if !page_paths.contains(&norm) {
            return Err(invalid(path, format!("tabBar page {norm} is not a main-package page")));
        }
        if !tab_bar_pages.contains(&norm) {
            tab_bar_pages.push(norm);
        }
    }
    let mut subpackage_decls: Vec<SubpackageDecl> = Vec::new();
    for sub in &raw.subpackages {
        let root = normalize_root_prefix(&sub.root)?;
        let nested = subpackage_decls.iter().any(|d| {
            root.starts_with(&format!("{}/", d.root_prefix))
                || d.root_prefix.starts_with(&format!("{root}/"))
                || d.root_prefix == root
        });
        if nested {
            diags.push(Diagnostic::new(
                DiagCode::NestedSubpackage,
                root.clone(),
                "subpackage root overlaps another subpackage; declaration ignored",
            ));
            continue;
        }
        let mut pages = Vec::new();
        for p in &sub.pages {
            let rel = normalize_page_path(p)?;
            let full = if rel.starts_with(&format!("{root}/")) { rel } else { format!("{root}/{rel}") };
            if !seen.insert(full.clone()) {
                return Err(PackageError::DuplicatePagePath(full));
            }
            pages.push(full);
        }
        subpackage_decls.push(SubpackageDecl { root_prefix: root, page_paths: pages });
    }
    if let Some(main) = page_paths.iter().find(|p| {
        subpackage_decls.iter().any(|d| p.starts_with(&format!("{}/", d.root_prefix)))
    }) {
        return Err(invalid(path, format!("main page {main} lies inside a subpackage root")));
    }
    Ok(Manifest { page_paths, tab_bar_pages, subpackage_decls })
}

/// Reads every `.wxml`/`.js` file under `base.join(sub)`, returning paths
/// relative to `base`, sorted.
fn collect_sources(base: &Path, sub: Option<&str>) -> Result<BTreeMap<String, String>> {
    let start = match sub {
        Some(s) => base.join(s),
        None => base.to_path_buf(),
    };
    let mut out = BTreeMap::new();
    if !start.exists() {
        return Ok(out);
    }
    let walker = WalkDir::new(&start).sort_by_file_name().into_iter().filter_entry(|e| {
        e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.')
    });
    for entry in walker {
        let entry = entry.map_err(|e| PackageError::Io {
            path: start.clone(),
            source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if ext != "wxml" && ext != "js" {
            continue;
        }
        let rel = path
            .strip_prefix(base)
            .expect("walked path lies under base")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let text = fs::read_to_string(path)
            .map_err(|source| PackageError::Io { path: path.to_path_buf(), source })?;
        out.insert(rel, text);
    }
    Ok(out)
}

fn under_prefix(path: &str, prefix: &str) -> bool {
    path.starts_with(&format!("{prefix}/"))
}

fn take_page(
    files: &mut BTreeMap<String, String>,
    page: &str,
    in_subpackage: Option<String>,
    diags: &mut Vec<Diagnostic>,
) -> Option<PageUnit> {
    let wxml = files.remove(&format!("{page}.wxml"));
    let js = files.remove(&format!("{page}.js"));
    if wxml.is_none() && js.is_none() {
        return None;
    }
    if wxml.is_none() {
        diags.push(Diagnostic::new(DiagCode::MissingSource, page, "no .wxml file; using empty markup"));
    }
    if js.is_none() {
        diags.push(Diagnostic::new(DiagCode::MissingSource, page, "no .js file; using empty logic"));
    }
    Some(PageUnit {
        path: page.to_string(),
        wxml_source: wxml.unwrap_or_default(),
        js_source: js.unwrap_or_default(),
        in_subpackage,
    })
}

/// Loads the main package found at `root`. Subpackages are recorded but
/// left unloaded even when their files happen to be present.
pub fn load_package(root: &Path) -> Result<MiniAppPackage> {
    let manifest_path = root.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(PackageError::MissingManifest(root.to_path_buf()));
    }
    let manifest_source = fs::read_to_string(&manifest_path)
        .map_err(|source| PackageError::Io { path: manifest_path.clone(), source })?;
    let mut diagnostics = Vec::new();
    let manifest = parse_manifest(&manifest_path, &manifest_source, &mut diagnostics)?;

    let mut files = collect_sources(root, None)?;
    files.retain(|path, _| {
        !manifest.subpackage_decls.iter().any(|d| under_prefix(path, &d.root_prefix))
    });

    let mut pages = Vec::new();
    for page in &manifest.page_paths {
        match take_page(&mut files, page, None, &mut diagnostics) {
            Some(unit) => pages.push(unit),
            None => return Err(PackageError::DanglingManifestEntry(page.clone())),
        }
    }
    pages.sort_by(|a, b| a.path.cmp(&b.path));

    let scripts = files.into_iter().filter(|(p, _)| p.ends_with(".js")).collect();
    let subpackages: Vec<SubpackageSpec> = manifest
        .subpackage_decls
        .iter()
        .map(|d| SubpackageSpec {
            root_prefix: d.root_prefix.clone(),
            page_paths: d.page_paths.clone(),
            loaded: false,
            source_dir: None,
        })
        .collect();
    let complete = subpackages.is_empty();
    Ok(MiniAppPackage {
        root: root.to_path_buf(),
        manifest,
        pages,
        subpackages,
        complete,
        scripts,
        manifest_source,
        diagnostics,
    })
}

impl MiniAppPackage {
    pub fn launch_page(&self) -> Option<&str> {
        self.manifest.page_paths.first().map(String::as_str)
    }

    pub fn page(&self, path: &str) -> Option<&PageUnit> {
        self.pages.binary_search_by(|p| p.path.as_str().cmp(path)).ok().map(|i| &self.pages[i])
    }

    /// The subpackage root a declared page belongs to, if any.
    pub fn subpackage_of(&self, page: &str) -> Option<&SubpackageSpec> {
        self.subpackages.iter().find(|s| s.page_paths.iter().any(|p| p == page))
    }

    pub fn is_declared(&self, page: &str) -> bool {
        self.manifest.page_paths.iter().any(|p| p == page) || self.subpackage_of(page).is_some()
    }

    pub fn list_pages(&self, scope: PageScope) -> Vec<String> {
        let main = self.manifest.page_paths.iter().filter(|p| self.page(p).is_some()).cloned();
        match scope {
            PageScope::Main => main.collect(),
            PageScope::Loaded => main
                .chain(
                    self.subpackages
                        .iter()
                        .filter(|s| s.loaded)
                        .flat_map(|s| s.page_paths.iter())
                        .filter(|p| self.page(p).is_some())
                        .cloned(),
                )
                .collect(),
            PageScope::AllDeclared => self
                .manifest
                .page_paths
                .iter()
                .chain(self.subpackages.iter().flat_map(|s| s.page_paths.iter()))
                .cloned()
                .collect(),
        }
    }

    /// All JavaScript sources: page logic files and standalone scripts,
    /// keyed by relative file path.
    pub fn js_files(&self) -> BTreeMap<String, &str> {
        let mut out: BTreeMap<String, &str> =
            self.scripts.iter().map(|(k, v)| (k.clone(), v.as_str())).collect();
        for page in &self.pages {
            out.insert(page.js_file(), page.js_source.as_str());
        }
        out
    }

    /// Merges the subpackage `root_prefix` from `dir`, a directory mirroring
    /// the package layout (files live under `dir/<root_prefix>/...`).
    pub fn merge_subpackage(&self, root_prefix: &str, dir: &Path) -> Result<MiniAppPackage> {
        let prefix = normalize_root_prefix(root_prefix)
            .map_err(|_| PackageError::UnknownSubpackage(root_prefix.to_string()))?;
        self.unloaded_spec(&prefix)?;
        let files = collect_sources(dir, None)?;
        if let Some(stray) = files.keys().find(|p| !under_prefix(p, &prefix)) {
            return Err(PackageError::PageOutsidePrefix { prefix, path: stray.clone() });
        }
        let mut extra = Vec::new();
        if let Ok(text) = fs::read_to_string(dir.join(MANIFEST_FILE)) {
            if text.contains("\"subpackages\"") {
                extra.push(Diagnostic::new(
                    DiagCode::NestedSubpackage,
                    prefix.clone(),
                    "subpackage directory declares its own subpackages; ignored",
                ));
            }
        }
        Ok(self.merge_files(&prefix, files, dir, extra))
    }

    /// True when the files of subpackage `root_prefix` already sit inside the
    /// package root (an unpacked, pre-merged package).
    pub fn has_premerged(&self, root_prefix: &str) -> bool {
        self.root.join(root_prefix).is_dir()
    }

    /// Merges a subpackage whose files are already present under the root.
    pub fn merge_premerged(&self, root_prefix: &str) -> Result<MiniAppPackage> {
        let prefix = normalize_root_prefix(root_prefix)
            .map_err(|_| PackageError::UnknownSubpackage(root_prefix.to_string()))?;
        self.unloaded_spec(&prefix)?;
        let files = collect_sources(&self.root, Some(&prefix))?;
        let root = self.root.clone();
        Ok(self.merge_files(&prefix, files, &root, Vec::new()))
    }

    fn unloaded_spec(&self, prefix: &str) -> Result<&SubpackageSpec> {
        self.subpackages
            .iter()
            .find(|s| s.root_prefix == prefix && !s.loaded)
            .ok_or_else(|| PackageError::UnknownSubpackage(prefix.to_string()))
    }

    fn merge_files(
        &self,
        prefix: &str,
        mut files: BTreeMap<String, String>,
        dir: &Path,
        mut diags: Vec<Diagnostic>,
    ) -> MiniAppPackage {
        let mut next = self.clone();
        let spec_idx = next
            .subpackages
            .iter()
            .position(|s| s.root_prefix == prefix)
            .expect("subpackage checked by caller");
        for page in next.subpackages[spec_idx].page_paths.clone() {
            let unit = take_page(&mut files, &page, Some(prefix.to_string()), &mut diags)
                .unwrap_or_else(|| {
                    diags.push(Diagnostic::new(
                        DiagCode::MissingSource,
                        page.clone(),
                        "subpackage page has no source files; using empty page",
                    ));
                    PageUnit {
                        path: page.clone(),
                        wxml_source: String::new(),
                        js_source: String::new(),
                        in_subpackage: Some(prefix.to_string()),
                    }
                });
            next.pages.push(unit);
        }
        next.pages.sort_by(|a, b| a.path.cmp(&b.path));
        next.scripts.extend(files.into_iter().filter(|(p, _)| p.ends_with(".js")));
        let spec = &mut next.subpackages[spec_idx];
        spec.loaded = true;
        spec.source_dir = Some(dir.to_path_buf());
        next.complete = next.subpackages.iter().all(|s| s.loaded);
        next.diagnostics.extend(diags);
        next
    }

    /// Writes the loaded sources back out as an unpacked package directory.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let write = |rel: &str, text: &str| -> Result<()> {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)
                    .map_err(|source| PackageError::Io { path: parent.to_path_buf(), source })?;
            }
            fs::write(&path, text).map_err(|source| PackageError::Io { path, source })
        };
        write(MANIFEST_FILE, &self.manifest_source)?;
        for page in &self.pages {
            if !page.wxml_source.is_empty() {
                write(&format!("{}.wxml", page.path), &page.wxml_source)?;
            }
            if !page.js_source.is_empty() {
                write(&page.js_file(), &page.js_source)?;
            }
        }
        for (path, text) in &self.scripts {
            write(path, text)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn write(dir: &Path, rel: &str, text: &str) {
        let p = dir.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, text).unwrap();
    }

    fn sample() -> (TempDir, TempDir) {
        let root = TempDir::new().unwrap();
        write(
            root.path(),
            "app.json",
            r#"{"pages":["pages/myInfo/index","/pages/takePhoto/index"],
                "subpackages":[{"root":"pages/checkID","pages":["index"]}]}"#,
        );
        write(root.path(), "pages/myInfo/index.wxml", "<view/>");
        write(root.path(), "pages/myInfo/index.js", "Page({})");
        write(root.path(), "pages/takePhoto/index.wxml", "<view/>");
        write(root.path(), "pages/takePhoto/index.js", "Page({})");
        write(root.path(), "pages/util/util.js", "module.exports = {}");
        let sub = TempDir::new().unwrap();
        write(sub.path(), "pages/checkID/index.wxml", "<input/>");
        write(sub.path(), "pages/checkID/index.js", "Page({})");
        (root, sub)
    }

    #[test]
    fn normalizes_paths() {
        assert_eq!(normalize_page_path("/pages/a/index").unwrap(), "pages/a/index");
        assert_eq!(normalize_page_path("pages/./a/index.wxml").unwrap(), "pages/a/index");
        assert_eq!(normalize_page_path("pages/a/index.js").unwrap(), "pages/a/index");
        assert!(normalize_page_path("pages/../x").is_err());
        assert!(normalize_page_path("/").is_err());
    }

    #[test]
    fn loads_main_package_only() {
        let (root, _sub) = sample();
        let pkg = load_package(root.path()).unwrap();
        assert_eq!(pkg.pages.len(), 2);
        assert_eq!(pkg.subpackages.len(), 1);
        assert!(!pkg.subpackages[0].loaded);
        assert!(!pkg.complete);
        assert_eq!(pkg.subpackages[0].page_paths, vec!["pages/checkID/index"]);
        assert!(pkg.scripts.contains_key("pages/util/util.js"));
        assert_eq!(
            pkg.list_pages(PageScope::Main),
            vec!["pages/myInfo/index", "pages/takePhoto/index"]
        );
        assert!(pkg.list_pages(PageScope::AllDeclared).contains(&"pages/checkID/index".to_string()));
    }

    #[test]
    fn no_subpackages_is_complete() {
        let root = TempDir::new().unwrap();
        write(root.path(), "app.json", r#"{"pages":["pages/a/index"]}"#);
        write(root.path(), "pages/a/index.wxml", "");
        let pkg = load_package(root.path()).unwrap();
        assert!(pkg.complete);
        assert!(pkg.subpackages.is_empty());
        // missing js is accepted with a diagnostic
        assert_eq!(pkg.diagnostics.len(), 1);
        assert_eq!(pkg.diagnostics[0].code, DiagCode::MissingSource);
    }

    #[test]
    fn errors() {
        let root = TempDir::new().unwrap();
        assert!(matches!(load_package(root.path()), Err(PackageError::MissingManifest(_))));
        write(root.path(), "app.json", r#"{"pages":["pages/ghost/index"]}"#);
        assert!(matches!(
            load_package(root.path()),
            Err(PackageError::DanglingManifestEntry(p)) if p == "pages/ghost/index"
        ));
        write(root.path(), "app.json", r#"{"pages":["pages/a/index","/pages/a/index.wxml"]}"#);
        assert!(matches!(load_package(root.path()), Err(PackageError::DuplicatePagePath(_))));
    }

    #[test]
    fn merge_and_errors() {
        let (root, sub) = sample();
        let pkg = load_package(root.path()).unwrap();
        let merged = pkg.merge_subpackage("pages/checkID", sub.path()).unwrap();
        assert_eq!(merged.pages.len(), 3);
        assert!(merged.complete);
        assert_eq!(
            merged.page("pages/checkID/index").unwrap().in_subpackage.as_deref(),
            Some("pages/checkID")
        );
        assert!(matches!(
            merged.merge_subpackage("pages/checkID", sub.path()),
            Err(PackageError::UnknownSubpackage(_))
        ));
        write(sub.path(), "pages/other/x.js", "");
        assert!(matches!(
            pkg.merge_subpackage("pages/checkID", sub.path()),
            Err(PackageError::PageOutsidePrefix { .. })
        ));
        // all-declared is invariant under merge
        assert_eq!(pkg.list_pages(PageScope::AllDeclared), merged.list_pages(PageScope::AllDeclared));
    }

    #[test]
    fn nested_subpackage_rejected() {
        let root = TempDir::new().unwrap();
        write(
            root.path(),
            "app.json",
            r#"{"pages":["pages/a/index"],"subpackages":[{"root":"sub","pages":["a"]},{"root":"sub/inner","pages":["b"]}]}"#,
        );
        write(root.path(), "pages/a/index.js", "");
        let pkg = load_package(root.path()).unwrap();
        assert_eq!(pkg.subpackages.len(), 1);
        assert!(pkg.diagnostics.iter().any(|d| d.code == DiagCode::NestedSubpackage));
    }

    #[test]
    fn premerged_subpackage() {
        let (root, sub) = sample();
        write(root.path(), "pages/checkID/index.js", &fs::read_to_string(sub.path().join("pages/checkID/index.js")).unwrap());
        let pkg = load_package(root.path()).unwrap();
        assert!(pkg.page("pages/checkID/index").is_none());
        assert!(pkg.has_premerged("pages/checkID"));
        let merged = pkg.merge_premerged("pages/checkID").unwrap();
        assert!(merged.complete);
        assert!(merged.page("pages/checkID/index").is_some());
    }

    #[test]
    fn write_round_trip() {
        let (root, sub) = sample();
        let merged = load_package(root.path()).unwrap().merge_subpackage("pages/checkID", sub.path()).unwrap();
        let out = TempDir::new().unwrap();
        merged.write_to(out.path()).unwrap();
        let reloaded = load_package(out.path()).unwrap();
        assert_eq!(reloaded.pages.len(), 2);
        let again = reloaded.merge_premerged("pages/checkID").unwrap();
        assert_eq!(again.pages, merged.pages);
        assert_eq!(again.scripts, merged.scripts);
    }
}
