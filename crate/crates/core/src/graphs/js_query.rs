//! Name resolution over a single file's AST: registration objects, scopes,
//! function names and parameter lists.

use crate::frontend::{AstGraph, NodeKind};
use std::collections::BTreeMap;

pub const REGISTRATION_CALLEES: [&str; 3] = ["Page", "App", "Component"];
pub const LIFECYCLE_NAMES: [&str; 6] = ["onLaunch", "onShow", "onHide", "onLoad", "onReady", "onUnload"];
/// Pseudo-function standing for a file's top-level code (AST root).
pub const MODULE_FN: &str = "<module>";

/// Per-file lookup tables derived once from the AST.
#[derive(Debug, Clone, Default)]
pub struct FileIndex {
    /// Object literal passed to `Page(...)`/`App(...)`/`Component(...)`.
    pub registration: Option<usize>,
    /// Registration call itself.
    pub registration_call: Option<usize>,
    /// Methods of the registration object by property name.
    pub methods: BTreeMap<String, usize>,
    /// Named functions by name, first definition in preorder.
    pub functions: BTreeMap<String, usize>,
    /// (scope function id or 0, name) → declaring node.
    decls: BTreeMap<(usize, String), usize>,
}

impl FileIndex {
    pub fn build(ast: &AstGraph) -> Self {
        let mut idx = FileIndex::default();
        for f in ast.ids_of(NodeKind::FunctionDef) {
            let scope = ast.enclosing_function(f).unwrap_or(0);
            if let Some(id) = ast.child(f, "id") {
                if let Some(name) = ast.value(id) {
                    idx.decls.entry((scope, name.to_string())).or_insert(f);
                }
            }
            for p in param_nodes(ast, f) {
                if let Some(name) = ast.value(p) {
                    idx.decls.entry((f, name.to_string())).or_insert(p);
                }
            }
            let name = function_name(ast, f);
            if !name.starts_with('<') {
                idx.functions.entry(name).or_insert(f);
            }
        }
        for d in ast.ids_of(NodeKind::VariableDeclarator) {
            if let Some(name) = ast.value(d) {
                let scope = ast.enclosing_function(d).unwrap_or(0);
                idx.decls.entry((scope, name.to_string())).or_insert(d);
            }
        }
        if let Some((call, obj)) = registration(ast) {
            idx.registration_call = Some(call);
            idx.registration = Some(obj);
            for prop in ast.children_labeled(obj, "property") {
                let (Some(name), Some(value)) = (ast.value(prop), ast.child(prop, "value")) else { continue };
                let target = match ast.kind(value) {
                    NodeKind::FunctionDef => Some(value),
                    NodeKind::Identifier => ast.value(value).and_then(|n| idx.module_function_decl(ast, n)),
                    _ => None,
                };
                if let Some(t) = target {
                    idx.methods.entry(name.to_string()).or_insert(t);
                }
            }
        }
        idx
    }

    fn module_function_decl(&self, ast: &AstGraph, name: &str) -> Option<usize> {
        let d = *self.decls.get(&(0, name.to_string()))?;
        match ast.kind(d) {
            NodeKind::FunctionDef => Some(d),
            NodeKind::VariableDeclarator => ast.child(d, "init").filter(|&i| ast.kind(i) == NodeKind::FunctionDef),
            _ => None,
        }
    }

    /// Scope (function id, 0 for module) that declares `name` as seen from `at`,
    /// with the declaring node. Undeclared names resolve to module scope.
    pub fn resolve(&self, ast: &AstGraph, at: usize, name: &str) -> (usize, Option<usize>) {
        let chain = std::iter::once(at).chain(ast.ancestors(at)).filter(|&n| ast.kind(n) == NodeKind::FunctionDef);
        for f in chain.chain(std::iter::once(0)) {
            if let Some(&d) = self.decls.get(&(f, name.to_string())) {
                return (f, Some(d));
            }
        }
        (0, None)
    }

    /// Function value bound to `name` as seen from `at`: a function
    /// declaration, or a declarator initialised with a function.
    pub fn function_binding(&self, ast: &AstGraph, at: usize, name: &str) -> Option<usize> {
        let (_, decl) = self.resolve(ast, at, name);
        let d = decl?;
        match ast.kind(d) {
            NodeKind::FunctionDef if ast.value(d) == Some(name) => Some(d),
            NodeKind::VariableDeclarator => ast.child(d, "init").filter(|&i| ast.kind(i) == NodeKind::FunctionDef),
            _ => None,
        }
    }

    /// Function a module exposes under `name`: a top-level binding, an
    /// exported object property, or an `exports.name = ...` assignment.
    pub fn exported_function(&self, ast: &AstGraph, name: &str) -> Option<usize> {
        self.module_function_decl(ast, name).or_else(|| self.functions.get(name).copied())
    }

    /// True when `node` evaluates to the page/component context: `this`
    /// or a variable initialised from `this` (`const that = this`).
    pub fn is_this_alias(&self, ast: &AstGraph, node: usize) -> bool {
        match ast.kind(node) {
            NodeKind::ThisExpression => true,
            NodeKind::Identifier => {
                let Some(name) = ast.value(node) else { return false };
                let (_, decl) = self.resolve(ast, node, name);
                decl.filter(|&d| ast.kind(d) == NodeKind::VariableDeclarator)
                    .and_then(|d| ast.child(d, "init"))
                    .is_some_and(|i| ast.kind(i) == NodeKind::ThisExpression)
            }
            _ => false,
        }
    }
}

fn registration(ast: &AstGraph) -> Option<(usize, usize)> {
    ast.ids_of(NodeKind::CallExpression).find_map(|call| {
        let callee = ast.child(call, "callee")?;
        let name = ast.value(callee)?;
        if ast.kind(callee) != NodeKind::Identifier || !REGISTRATION_CALLEES.contains(&name) {
            return None;
        }
        let arg = *ast.call_args(call).first()?;
        (ast.kind(arg) == NodeKind::ObjectLiteral).then_some((call, arg))
    })
}

/// Parameter identifier nodes by position (`None`-free: defaults and rest
/// parameters contribute their identifier; patterns are skipped).
pub fn param_nodes(ast: &AstGraph, f: usize) -> Vec<usize> {
    ast.children_labeled(f, "param").filter_map(|p| param_ident(ast, p)).collect()
}

/// Parameter names by position; destructuring patterns yield `None`.
pub fn param_names(ast: &AstGraph, f: usize) -> Vec<Option<String>> {
    ast.children_labeled(f, "param")
        .map(|p| param_ident(ast, p).and_then(|i| ast.value(i)).map(str::to_string))
        .collect()
}

fn param_ident(ast: &AstGraph, p: usize) -> Option<usize> {
    match ast.kind(p) {
        NodeKind::Identifier => Some(p),
        NodeKind::Assignment => ast.child(p, "left").filter(|&l| ast.kind(l) == NodeKind::Identifier),
        NodeKind::Other if ast.value(p) == Some("...") => ast.child(p, "argument").filter(|&l| ast.kind(l) == NodeKind::Identifier),
        _ => None,
    }
}

/// Best-effort name: declared name, property key, declarator or assignment
/// target; anonymous functions get `<anonymous:ID>`; the root is `<module>`.
pub fn function_name(ast: &AstGraph, f: usize) -> String {
    if f == 0 {
        return MODULE_FN.to_string();
    }
    if let Some(v) = ast.value(f) {
        return v.to_string();
    }
    if let Some(p) = ast.parent(f) {
        match (ast.kind(p), ast.label(f)) {
            (NodeKind::Property | NodeKind::VariableDeclarator, _) => {
                if let Some(v) = ast.value(p) {
                    return v.to_string();
                }
            }
            (NodeKind::Assignment, Some("right")) => {
                if let Some(l) = ast.child(p, "left") {
                    if let Some(v) = ast.value(l) {
                        return v.to_string();
                    }
                }
            }
            _ => {}
        }
    }
    format!("<anonymous:{f}>")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_js;

    #[test]
    fn page_methods_and_names() {
        let src = "function helper() {}\nPage({ data: {a: 1}, onLoad() {}, tap: function () {}, h: helper, go: () => 1 })";
        let ast = parse_js(src, "p.js").unwrap();
        let idx = FileIndex::build(&ast);
        let names: Vec<_> = idx.methods.keys().cloned().collect();
        assert_eq!(names, vec!["go", "h", "onLoad", "tap"]);
        assert_eq!(function_name(&ast, idx.methods["tap"]), "tap");
        assert_eq!(function_name(&ast, idx.methods["h"]), "helper");
        assert_eq!(function_name(&ast, 0), MODULE_FN);
    }

    #[test]
    fn scope_resolution_and_aliases() {
        let src = "var x = 1\nfunction f(x) { const that = this; function g() { return x + that.y } }";
        let ast = parse_js(src, "p.js").unwrap();
        let idx = FileIndex::build(&ast);
        let f = idx.functions["f"];
        let g = idx.functions["g"];
        let uses: Vec<_> = ast.subtree(g).filter(|&n| ast.kind(n) == NodeKind::Identifier && ast.value(n) == Some("x")).collect();
        assert_eq!(idx.resolve(&ast, uses[0], "x").0, f);
        let that = ast.subtree(g).find(|&n| ast.kind(n) == NodeKind::Identifier && ast.value(n) == Some("that")).unwrap();
        assert!(idx.is_this_alias(&ast, that));
        assert_eq!(param_names(&ast, f), vec![Some("x".to_string())]);
    }

    #[test]
    fn exported_functions() {
        let src = "function init(ctx) {}\nmodule.exports = { init: init, other: function (a) {} }\nexports.third = function () {}";
        let ast = parse_js(src, "u.js").unwrap();
        let idx = FileIndex::build(&ast);
        assert!(idx.exported_function(&ast, "init").is_some());
        assert!(idx.exported_function(&ast, "other").is_some());
        assert!(idx.exported_function(&ast, "third").is_some());
        assert!(idx.exported_function(&ast, "missing").is_none());
    }
}
