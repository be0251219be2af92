//! Recursive-descent parser over the token stream.
//!
//! Statements that fail to parse are re-scanned to their end and kept as
//! opaque `Other` leaves, so one unsupported construct never hides the rest
//! of a file.

use super::lexer::{Tok, Token};
use super::NodeKind;

pub(crate) struct Raw {
    pub kind: NodeKind,
    pub start: usize,
    pub end: usize,
    pub value: Option<String>,
    pub children: Vec<(&'static str, Raw)>,
}

impl Raw {
    fn leaf(kind: NodeKind, start: usize, end: usize, value: Option<String>) -> Self {
        Self { kind, start, end, value, children: Vec::new() }
    }
}

type PResult<T> = Result<T, ()>;

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "**=", "<<=", ">>=", ">>>=", "&=", "|=", "^=", "&&=", "||=", "??="];

const STATEMENT_WORDS: &[&str] = &[
    "class", "if", "for", "while", "do", "return", "switch", "case", "default", "break", "continue", "throw", "try",
    "catch", "finally", "var", "const", "export", "else",
];

fn binop_prec(t: &Token) -> Option<(String, u8)> {
    let prec = match &t.tok {
        Tok::Punct(p) => match *p {
            "??" => 1,
            "||" => 2,
            "&&" => 3,
            "|" => 4,
            "^" => 5,
            "&" => 6,
            "==" | "!=" | "===" | "!==" => 7,
            "<" | ">" | "<=" | ">=" => 8,
            "<<" | ">>" | ">>>" => 9,
            "+" | "-" => 10,
            "*" | "/" | "%" => 11,
            "**" => 12,
            _ => return None,
        },
        Tok::Ident(w) if w == "instanceof" || w == "in" => 8,
        _ => return None,
    };
    let op = match &t.tok {
        Tok::Punct(p) => p.to_string(),
        Tok::Ident(w) => w.clone(),
        _ => unreachable!(),
    };
    Some((op, prec))
}

pub(crate) struct Parser<'a> {
    src: &'a str,
    toks: &'a [Token],
    /// For each bracket token, the index of its partner.
    pairs: &'a [usize],
    pos: usize,
    last_end: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(src: &'a str, toks: &'a [Token], pairs: &'a [usize]) -> Self {
        Self { src, toks, pairs, pos: 0, last_end: 0 }
    }

    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Token> {
        self.toks.get(self.pos + n)
    }

    fn at(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is(p))
    }

    fn at_word(&self, w: &str) -> bool {
        self.peek().is_some_and(|t| t.is_word(w))
    }

    fn eof(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn start(&self) -> usize {
        self.peek().map(|t| t.start).unwrap_or(self.src.len())
    }

    fn bump(&mut self) -> PResult<&'a Token> {
        let t = self.toks.get(self.pos).ok_or(())?;
        self.pos += 1;
        self.last_end = t.end;
        Ok(t)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.at(p) {
            self.pos += 1;
            self.last_end = self.toks[self.pos - 1].end;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(())
        }
    }

    fn node(&self, kind: NodeKind, start: usize, value: Option<String>, children: Vec<(&'static str, Raw)>) -> Raw {
        Raw { kind, start, end: self.last_end.max(start), value, children }
    }

    fn end_statement(&mut self) -> PResult<()> {
        if self.eat(";") || self.eof() || self.at("}") || self.peek().is_some_and(|t| t.nl_before) {
            Ok(())
        } else {
            Err(())
        }
    }

    pub(crate) fn program(&mut self) -> Raw {
        let mut body = Vec::new();
        while !self.eof() {
            for s in self.statement_recover() {
                body.push(("body", s));
            }
        }
        Raw { kind: NodeKind::Program, start: 0, end: self.src.len(), value: None, children: body }
    }

    fn statement_recover(&mut self) -> Vec<Raw> {
        let (save, save_end) = (self.pos, self.last_end);
        match self.statement() {
            Ok(v) => v,
            Err(()) => {
                self.pos = save;
                self.last_end = save_end;
                let start = self.start();
                self.skip_statement();
                if self.pos == save {
                    let _ = self.bump();
                }
                vec![Raw::leaf(NodeKind::Other, start, self.last_end, None)]
            }
        }
    }

    fn skip_statement(&mut self) {
        let mut prev: Option<&Token> = None;
        while let Some(t) = self.peek() {
            if t.is("}") {
                break;
            }
            if let Some(p) = prev {
                let continues = matches!(&p.tok, Tok::Punct(q) if !matches!(*q, ")" | "]" | "}" | "++" | "--"));
                if t.nl_before && !continues {
                    break;
                }
            }
            if t.is(";") {
                self.pos += 1;
                self.last_end = t.end;
                break;
            }
            if t.is("(") || t.is("[") || t.is("{") {
                self.pos = self.pairs[self.pos];
            }
            let closing = &self.toks[self.pos];
            self.pos += 1;
            self.last_end = closing.end;
            prev = Some(closing);
        }
    }

    fn statement(&mut self) -> PResult<Vec<Raw>> {
        let t = self.peek().ok_or(())?;
        if t.is(";") {
            self.bump()?;
            return Ok(Vec::new());
        }
        if t.is("{") {
            return Ok(vec![self.block()?]);
        }
        let word = match &t.tok {
            Tok::Ident(w) => w.as_str(),
            _ => "",
        };
        let next_is = |p: &str| self.peek_at(1).is_some_and(|n| n.is(p));
        let one = |r: Raw| Ok(vec![r]);
        match word {
            "import" if !next_is("(") && !next_is(".") => one(self.import_decl()?),
            "export" => {
                self.bump()?;
                if self.at_word("default") {
                    self.bump()?;
                }
                self.statement()
            }
            "const" | "let" | "var" if self.peek_at(1).is_some_and(|n| matches!(n.tok, Tok::Ident(_)) || n.is("{") || n.is("[")) => {
                self.var_decl()
            }
            "function" => one(self.function()?),
            "async" if self.peek_at(1).is_some_and(|n| n.is_word("function") && !n.nl_before) => one(self.function()?),
            "return" => one(self.return_stmt()?),
            "if" => one(self.if_stmt()?),
            "for" => one(self.for_stmt()?),
            "while" => one(self.while_stmt()?),
            "do" => one(self.do_stmt()?),
            "try" => one(self.try_stmt()?),
            "switch" => one(self.switch_stmt()?),
            "throw" => {
                let start = self.start();
                self.bump()?;
                let e = self.expression()?;
                self.end_statement()?;
                one(self.node(NodeKind::Other, start, Some("throw".into()), vec![("argument", e)]))
            }
            "break" | "continue" => {
                let start = self.start();
                self.bump()?;
                if self.peek().is_some_and(|n| matches!(n.tok, Tok::Ident(_)) && !n.nl_before) {
                    self.bump()?;
                }
                self.end_statement()?;
                one(self.node(NodeKind::Other, start, Some(word.to_string()), Vec::new()))
            }
            _ => {
                let e = self.expression()?;
                self.end_statement()?;
                one(e)
            }
        }
    }

    fn wrap(&self, start: usize, mut stmts: Vec<Raw>) -> Raw {
        if stmts.len() == 1 {
            return stmts.pop().expect("one");
        }
        let children = stmts.into_iter().map(|s| ("body", s)).collect();
        self.node(NodeKind::Block, start, None, children)
    }

    fn sub_statement(&mut self) -> Raw {
        let start = self.start();
        let stmts = self.statement_recover();
        self.wrap(start, stmts)
    }

    fn block(&mut self) -> PResult<Raw> {
        let start = self.start();
        self.expect("{")?;
        let mut children = Vec::new();
        while !self.eof() && !self.at("}") {
            for s in self.statement_recover() {
                children.push(("body", s));
            }
        }
        self.expect("}")?;
        Ok(self.node(NodeKind::Block, start, None, children))
    }

    fn ident_leaf(&mut self) -> PResult<Raw> {
        let t = self.bump()?;
        match &t.tok {
            Tok::Ident(w) => Ok(Raw::leaf(NodeKind::Identifier, t.start, t.end, Some(w.clone()))),
            _ => Err(()),
        }
    }

    fn import_decl(&mut self) -> PResult<Raw> {
        let start = self.start();
        self.bump()?;
        let mut children = Vec::new();
        if !matches!(self.peek().map(|t| &t.tok), Some(Tok::Str(_))) {
            loop {
                if self.eat("*") {
                    if !self.at_word("as") {
                        return Err(());
                    }
                    self.bump()?;
                    children.push(("specifier", self.ident_leaf()?));
                } else if self.eat("{") {
                    while !self.at("}") {
                        let mut spec = self.ident_leaf()?;
                        if self.at_word("as") {
                            self.bump()?;
                            spec = self.ident_leaf()?;
                        }
                        children.push(("specifier", spec));
                        if !self.eat(",") {
                            break;
                        }
                    }
                    self.expect("}")?;
                } else {
                    children.push(("specifier", self.ident_leaf()?));
                }
                if !self.eat(",") {
                    break;
                }
            }
            if !self.at_word("from") {
                return Err(());
            }
            self.bump()?;
        }
        let t = self.bump()?;
        let Tok::Str(source) = &t.tok else { return Err(()) };
        children.push(("source", Raw::leaf(NodeKind::StringLiteral, t.start, t.end, Some(source.clone()))));
        self.end_statement()?;
        Ok(self.node(NodeKind::ImportDeclaration, start, Some(source.clone()), children))
    }

    fn var_decl(&mut self) -> PResult<Vec<Raw>> {
        self.bump()?;
        let mut out = Vec::new();
        loop {
            let start = self.start();
            let (id, name) = match self.peek().map(|t| &t.tok) {
                Some(Tok::Ident(w)) => (self.ident_leaf()?, Some(w.clone())),
                _ => (self.primary()?, None),
            };
            let mut children = vec![("id", id)];
            if self.eat("=") {
                children.push(("init", self.assignment()?));
            }
            out.push(self.node(NodeKind::VariableDeclarator, start, name, children));
            if !self.eat(",") {
                break;
            }
        }
        self.end_statement()?;
        Ok(out)
    }

    fn params(&mut self) -> PResult<Vec<(&'static str, Raw)>> {
        self.expect("(")?;
        let mut out = Vec::new();
        while !self.at(")") {
            let start = self.start();
            let p = if self.eat("...") {
                let e = self.assignment()?;
                self.node(NodeKind::Other, start, Some("...".into()), vec![("argument", e)])
            } else {
                self.assignment()?
            };
            out.push(("param", p));
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(out)
    }

    fn function(&mut self) -> PResult<Raw> {
        let start = self.start();
        if self.at_word("async") {
            self.bump()?;
        }
        if !self.at_word("function") {
            return Err(());
        }
        self.bump()?;
        self.eat("*");
        let mut children = Vec::new();
        let mut name = None;
        if let Some(Tok::Ident(w)) = self.peek().map(|t| &t.tok) {
            name = Some(w.clone());
            children.push(("id", self.ident_leaf()?));
        }
        children.extend(self.params()?);
        children.push(("body", self.block()?));
        Ok(self.node(NodeKind::FunctionDef, start, name, children))
    }

    fn return_stmt(&mut self) -> PResult<Raw> {
        let start = self.start();
        self.bump()?;
        let mut children = Vec::new();
        let bare = self.eof() || self.at(";") || self.at("}") || self.peek().is_some_and(|t| t.nl_before);
        if !bare {
            children.push(("argument", self.expression()?));
        }
        self.end_statement()?;
        Ok(self.node(NodeKind::Return, start, None, children))
    }

    fn paren_expr(&mut self) -> PResult<Raw> {
        self.expect("(")?;
        let e = self.expression()?;
        self.expect(")")?;
        Ok(e)
    }

    fn if_stmt(&mut self) -> PResult<Raw> {
        let start = self.start();
        self.bump()?;
        let mut children = vec![("test", self.paren_expr()?)];
        children.push(("consequent", self.sub_statement()));
        if self.at_word("else") {
            self.bump()?;
            children.push(("alternate", self.sub_statement()));
        }
        Ok(self.node(NodeKind::Other, start, Some("if".into()), children))
    }

    fn for_stmt(&mut self) -> PResult<Raw> {
        let start = self.start();
        self.bump()?;
        if self.at_word("await") {
            self.bump()?;
        }
        if !self.at("(") {
            return Err(());
        }
        let head_start = self.start();
        self.pos = self.pairs[self.pos];
        self.bump()?;
        let head = Raw::leaf(NodeKind::Other, head_start, self.last_end, Some("for-head".into()));
        let body = self.sub_statement();
        Ok(self.node(NodeKind::Other, start, Some("for".into()), vec![("test", head), ("body", body)]))
    }

    fn while_stmt(&mut self) -> PResult<Raw> {
        let start = self.start();
        self.bump()?;
        let test = self.paren_expr()?;
        let body = self.sub_statement();
        Ok(self.node(NodeKind::Other, start, Some("while".into()), vec![("test", test), ("body", body)]))
    }

    fn do_stmt(&mut self) -> PResult<Raw> {
        let start = self.start();
        self.bump()?;
        let body = self.sub_statement();
        if !self.at_word("while") {
            return Err(());
        }
        self.bump()?;
        let test = self.paren_expr()?;
        self.eat(";");
        Ok(self.node(NodeKind::Other, start, Some("do".into()), vec![("body", body), ("test", test)]))
    }

    fn try_stmt(&mut self) -> PResult<Raw> {
        let start = self.start();
        self.bump()?;
        let mut children = vec![("body", self.block()?)];
        if self.at_word("catch") {
            self.bump()?;
            if self.eat("(") {
                children.push(("param", self.assignment()?));
                self.expect(")")?;
            }
            children.push(("handler", self.block()?));
        }
        if self.at_word("finally") {
            self.bump()?;
            children.push(("finalizer", self.block()?));
        }
        Ok(self.node(NodeKind::Other, start, Some("try".into()), children))
    }

    fn switch_stmt(&mut self) -> PResult<Raw> {
        let start = self.start();
        self.bump()?;
        let mut children = vec![("test", self.paren_expr()?)];
        self.expect("{")?;
        while !self.eof() && !self.at("}") {
            if self.at_word("case") {
                self.bump()?;
                children.push(("test", self.expression()?));
                self.expect(":")?;
            } else if self.at_word("default") {
                self.bump()?;
                self.expect(":")?;
            } else {
                for s in self.statement_recover() {
                    children.push(("consequent", s));
                }
            }
        }
        self.expect("}")?;
        Ok(self.node(NodeKind::Other, start, Some("switch".into()), children))
    }

    fn expression(&mut self) -> PResult<Raw> {
        let start = self.start();
        let first = self.assignment()?;
        if !self.at(",") {
            return Ok(first);
        }
        let mut children = vec![("expression", first)];
        while self.eat(",") {
            children.push(("expression", self.assignment()?));
        }
        Ok(self.node(NodeKind::Other, start, Some(",".into()), children))
    }

    fn arrow_ahead(&self) -> bool {
        let mut i = self.pos;
        let tok = |i: usize| self.toks.get(i);
        if tok(i).is_some_and(|t| t.is_word("async")) && tok(i + 1).is_some_and(|t| !t.nl_before && (t.is("(") || matches!(t.tok, Tok::Ident(_)))) {
            i += 1;
        }
        match tok(i) {
            Some(t) if matches!(t.tok, Tok::Ident(_)) => tok(i + 1).is_some_and(|n| n.is("=>")),
            Some(t) if t.is("(") => tok(self.pairs[i] + 1).is_some_and(|n| n.is("=>")),
            _ => false,
        }
    }

    fn arrow(&mut self) -> PResult<Raw> {
        let start = self.start();
        if self.at_word("async") && !self.peek_at(1).is_some_and(|t| t.is("=>")) {
            self.bump()?;
        }
        let mut children = if self.at("(") { self.params()? } else { vec![("param", self.ident_leaf()?)] };
        self.expect("=>")?;
        let body = if self.at("{") { self.block()? } else { self.assignment()? };
        children.push(("body", body));
        Ok(self.node(NodeKind::FunctionDef, start, None, children))
    }

    fn assignment(&mut self) -> PResult<Raw> {
        if self.arrow_ahead() {
            return self.arrow();
        }
        let start = self.start();
        let left = self.conditional()?;
        if let Some(Tok::Punct(op)) = self.peek().map(|t| &t.tok) {
            if ASSIGN_OPS.contains(op) {
                self.bump()?;
                let right = self.assignment()?;
                return Ok(self.node(NodeKind::Assignment, start, Some(op.to_string()), vec![("left", left), ("right", right)]));
            }
        }
        Ok(left)
    }

    fn conditional(&mut self) -> PResult<Raw> {
        let start = self.start();
        let test = self.binary(1)?;
        if !self.eat("?") {
            return Ok(test);
        }
        let cons = self.assignment()?;
        self.expect(":")?;
        let alt = self.assignment()?;
        Ok(self.node(NodeKind::Other, start, Some("?:".into()), vec![("test", test), ("consequent", cons), ("alternate", alt)]))
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Raw> {
        let start = self.start();
        let mut left = self.unary()?;
        while let Some((op, prec)) = self.peek().and_then(binop_prec) {
            if prec < min_prec {
                break;
            }
            self.bump()?;
            let right = if op == "**" { self.binary(prec)? } else { self.binary(prec + 1)? };
            left = self.node(NodeKind::Other, start, Some(op), vec![("left", left), ("right", right)]);
        }
        Ok(left)
    }

    fn unary(&mut self) -> PResult<Raw> {
        let start = self.start();
        let t = self.peek().ok_or(())?;
        let op = match &t.tok {
            Tok::Punct(p) if matches!(*p, "!" | "~" | "+" | "-" | "++" | "--") => Some(p.to_string()),
            Tok::Ident(w) if matches!(w.as_str(), "typeof" | "void" | "delete" | "await") => {
                // `await` etc. used as plain identifiers are left to primary()
                let next = self.peek_at(1);
                let operand_follows = next.is_some_and(|n| !n.is(")") && !n.is(",") && !n.is(";") && !n.is("}") && !n.is("."));
                operand_follows.then(|| w.clone())
            }
            _ => None,
        };
        if let Some(op) = op {
            self.bump()?;
            let operand = self.unary()?;
            return Ok(self.node(NodeKind::Other, start, Some(op), vec![("argument", operand)]));
        }
        if t.is_word("new") {
            return self.new_expr();
        }
        let e = self.call_member()?;
        if (self.at("++") || self.at("--")) && !self.peek().is_some_and(|t| t.nl_before) {
            let op = if self.at("++") { "++" } else { "--" };
            self.bump()?;
            return Ok(self.node(NodeKind::Other, start, Some(op.into()), vec![("argument", e)]));
        }
        Ok(e)
    }

    fn new_expr(&mut self) -> PResult<Raw> {
        let start = self.start();
        self.bump()?;
        if self.eat(".") {
            self.bump()?;
            return Ok(self.node(NodeKind::Other, start, Some("new.target".into()), Vec::new()));
        }
        let callee = if self.at_word("new") { self.new_expr()? } else { self.primary()? };
        let callee = self.tail(start, callee, false)?;
        let mut children = vec![("callee", callee)];
        if self.at("(") {
            children.extend(self.args()?);
        }
        let e = self.node(NodeKind::Other, start, Some("new".into()), children);
        self.tail(start, e, true)
    }

    fn call_member(&mut self) -> PResult<Raw> {
        let start = self.start();
        let e = self.primary()?;
        self.tail(start, e, true)
    }

    fn member_name(&mut self) -> PResult<Raw> {
        self.eat("#");
        self.ident_leaf()
    }

    fn tail(&mut self, start: usize, mut e: Raw, allow_call: bool) -> PResult<Raw> {
        loop {
            if self.eat(".") {
                let prop = self.member_name()?;
                let name = prop.value.clone();
                e = self.node(NodeKind::MemberExpression, start, name, vec![("object", e), ("property", prop)]);
            } else if self.at("?.") {
                self.bump()?;
                if self.at("(") {
                    let mut children = vec![("callee", e)];
                    children.extend(self.args()?);
                    e = self.node(NodeKind::CallExpression, start, None, children);
                } else if self.eat("[") {
                    let idx = self.expression()?;
                    self.expect("]")?;
                    e = self.computed_member(start, e, idx);
                } else {
                    let prop = self.member_name()?;
                    let name = prop.value.clone();
                    e = self.node(NodeKind::MemberExpression, start, name, vec![("object", e), ("property", prop)]);
                }
            } else if self.at("[") {
                self.bump()?;
                let idx = self.expression()?;
                self.expect("]")?;
                e = self.computed_member(start, e, idx);
            } else if allow_call && self.at("(") {
                let value = dotted(&e);
                let mut children = vec![("callee", e)];
                children.extend(self.args()?);
                e = self.node(NodeKind::CallExpression, start, value, children);
            } else if matches!(self.peek().map(|t| &t.tok), Some(Tok::Template { .. })) {
                let t = self.bump()?;
                let tpl = Raw::leaf(NodeKind::Other, t.start, t.end, Some("template".into()));
                e = self.node(NodeKind::Other, start, Some("tagged-template".into()), vec![("callee", e), ("argument", tpl)]);
            } else {
                return Ok(e);
            }
        }
    }

    fn computed_member(&self, start: usize, object: Raw, idx: Raw) -> Raw {
        let name = (idx.kind == NodeKind::StringLiteral).then(|| idx.value.clone()).flatten();
        self.node(NodeKind::MemberExpression, start, name, vec![("object", object), ("property", idx)])
    }

    fn args(&mut self) -> PResult<Vec<(&'static str, Raw)>> {
        self.expect("(")?;
        let mut out = Vec::new();
        while !self.at(")") {
            let start = self.start();
            let a = if self.eat("...") {
                let e = self.assignment()?;
                self.node(NodeKind::Other, start, Some("...".into()), vec![("argument", e)])
            } else {
                self.assignment()?
            };
            out.push(("argument", a));
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(out)
    }

    fn primary(&mut self) -> PResult<Raw> {
        let t = self.peek().ok_or(())?;
        let (s, e) = (t.start, t.end);
        match &t.tok {
            Tok::Ident(w) => match w.as_str() {
                "this" => {
                    self.bump()?;
                    Ok(Raw::leaf(NodeKind::ThisExpression, s, e, Some("this".into())))
                }
                "function" => self.function(),
                "async" if self.peek_at(1).is_some_and(|n| n.is_word("function") && !n.nl_before) => self.function(),
                "true" | "false" | "null" => {
                    self.bump()?;
                    Ok(Raw::leaf(NodeKind::Other, s, e, Some(w.clone())))
                }
                w if STATEMENT_WORDS.contains(&w) => Err(()),
                _ => self.ident_leaf(),
            },
            Tok::Str(v) => {
                self.bump()?;
                Ok(Raw::leaf(NodeKind::StringLiteral, s, e, Some(v.clone())))
            }
            Tok::Num(v) => {
                self.bump()?;
                Ok(Raw::leaf(NodeKind::NumberLiteral, s, e, Some(v.clone())))
            }
            Tok::Template { cooked: Some(v) } => {
                self.bump()?;
                Ok(Raw::leaf(NodeKind::StringLiteral, s, e, Some(v.clone())))
            }
            Tok::Template { cooked: None } => {
                self.bump()?;
                Ok(Raw::leaf(NodeKind::Other, s, e, Some("template".into())))
            }
            Tok::Regex => {
                self.bump()?;
                Ok(Raw::leaf(NodeKind::Other, s, e, Some("regex".into())))
            }
            Tok::Punct("(") => self.paren_expr(),
            Tok::Punct("[") => self.array(),
            Tok::Punct("{") => self.object(),
            _ => Err(()),
        }
    }

    fn array(&mut self) -> PResult<Raw> {
        let start = self.start();
        self.expect("[")?;
        let mut children = Vec::new();
        while !self.at("]") {
            if self.eat(",") {
                continue;
            }
            let es = self.start();
            let el = if self.eat("...") {
                let e = self.assignment()?;
                self.node(NodeKind::Other, es, Some("...".into()), vec![("argument", e)])
            } else {
                self.assignment()?
            };
            children.push(("element", el));
            if !self.eat(",") {
                break;
            }
        }
        self.expect("]")?;
        Ok(self.node(NodeKind::Other, start, Some("array".into()), children))
    }

    fn object(&mut self) -> PResult<Raw> {
        let start = self.start();
        self.expect("{")?;
        let mut children = Vec::new();
        while !self.at("}") {
            children.push(("property", self.property()?));
            if !self.eat(",") {
                break;
            }
        }
        self.expect("}")?;
        Ok(self.node(NodeKind::ObjectLiteral, start, None, children))
    }

    fn property(&mut self) -> PResult<Raw> {
        let start = self.start();
        if self.eat("...") {
            let e = self.assignment()?;
            return Ok(self.node(NodeKind::Other, start, Some("...".into()), vec![("argument", e)]));
        }
        let key_follows = |t: Option<&Token>| {
            t.is_some_and(|t| matches!(t.tok, Tok::Ident(_) | Tok::Str(_) | Tok::Num(_)) || t.is("[") || t.is("*"))
        };
        if (self.at_word("get") || self.at_word("set") || self.at_word("async")) && key_follows(self.peek_at(1)) {
            self.bump()?;
        }
        self.eat("*");
        let t = self.peek().ok_or(())?;
        let (key, name, shorthand_ok) = match &t.tok {
            Tok::Ident(w) => (self.ident_leaf()?, Some(w.clone()), true),
            Tok::Str(v) => {
                self.bump()?;
                (Raw::leaf(NodeKind::StringLiteral, t.start, t.end, Some(v.clone())), Some(v.clone()), false)
            }
            Tok::Num(v) => {
                self.bump()?;
                (Raw::leaf(NodeKind::NumberLiteral, t.start, t.end, Some(v.clone())), Some(v.clone()), false)
            }
            Tok::Punct("[") => {
                self.bump()?;
                let k = self.assignment()?;
                self.expect("]")?;
                (k, None, false)
            }
            _ => return Err(()),
        };
        let value = if self.at("(") {
            let mut children = self.params()?;
            children.push(("body", self.block()?));
            self.node(NodeKind::FunctionDef, start, name.clone(), children)
        } else if self.eat(":") {
            self.assignment()?
        } else if shorthand_ok {
            let v = Raw::leaf(NodeKind::Identifier, key.start, key.end, name.clone());
            if self.eat("=") {
                let d = self.assignment()?;
                self.node(NodeKind::Assignment, key.start, Some("=".into()), vec![("left", v), ("right", d)])
            } else {
                v
            }
        } else {
            return Err(());
        };
        Ok(self.node(NodeKind::Property, start, name, vec![("key", key), ("value", value)]))
    }
}

/// `a.b.c` for identifier/member chains, `this.x` for this-rooted chains.
fn dotted(e: &Raw) -> Option<String> {
    match e.kind {
        NodeKind::Identifier | NodeKind::ThisExpression => e.value.clone(),
        NodeKind::MemberExpression => {
            let object = &e.children.first()?.1;
            Some(format!("{}.{}", dotted(object)?, e.value.as_ref()?))
        }
        _ => None,
    }
}
