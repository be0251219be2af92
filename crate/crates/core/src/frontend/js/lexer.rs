//! Tokenizer for the supported JavaScript subset.

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Num(String),
    /// Template literal; `cooked` is set when it has no substitutions.
    Template { cooked: Option<String> },
    Regex,
    Punct(&'static str),
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
    /// A line terminator appears between this token and the previous one.
    pub nl_before: bool,
}

impl Token {
    pub fn is(&self, p: &str) -> bool {
        matches!(&self.tok, Tok::Punct(q) if *q == p)
    }

    pub fn is_word(&self, w: &str) -> bool {
        matches!(&self.tok, Tok::Ident(s) if s == w)
    }
}

const PUNCTS: &[&str] = &[
    ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "&&=", "||=", "??=", "=>", "==", "!=", "<=", ">=",
    "&&", "||", "??", "?.", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "**", "<<", ">>", "{",
    "}", "(", ")", "[", "]", ";", ",", "<", ">", "+", "-", "*", "/", "%", "&", "|", "^", "!", "~", "?", ":", "=",
    ".", "@", "#",
];

/// Words after which a `/` starts a regular expression rather than division.
const REGEX_PRECEDERS: &[&str] = &["return", "typeof", "case", "do", "else", "in", "of", "new", "delete", "void", "throw", "instanceof"];

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

pub(crate) fn tokenize(src: &str) -> Vec<Token> {
    let bytes = src.as_bytes();
    let mut out: Vec<Token> = Vec::new();
    let mut i = 0;
    let mut nl = false;
    while i < src.len() {
        let rest = &src[i..];
        let c = rest.chars().next().expect("non-empty");
        if c == '\n' {
            nl = true;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if rest.starts_with("//") {
            i += rest.find('\n').unwrap_or(rest.len());
            continue;
        }
        if rest.starts_with("/*") {
            let end = rest[2..].find("*/").map(|e| e + 4).unwrap_or(rest.len());
            nl |= rest[..end].contains('\n');
            i += end;
            continue;
        }
        let start = i;
        let tok = if is_ident_start(c) {
            let len = rest.find(|ch: char| !is_ident_char(ch)).unwrap_or(rest.len());
            i += len;
            Tok::Ident(rest[..len].to_string())
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let len = rest
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '.' || ch == '_'))
                .unwrap_or(rest.len());
            i += len;
            Tok::Num(rest[..len].to_string())
        } else if c == '"' || c == '\'' {
            let (value, len) = lex_string(rest, c);
            i += len;
            Tok::Str(value)
        } else if c == '`' {
            let (cooked, len) = lex_template(rest);
            i += len;
            Tok::Template { cooked }
        } else if c == '/' && regex_allowed(out.last()) {
            i += lex_regex(rest);
            Tok::Regex
        } else {
            match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => {
                    i += p.len();
                    Tok::Punct(p)
                }
                None => {
                    // Unknown character: skip it.
                    i += c.len_utf8();
                    continue;
                }
            }
        };
        out.push(Token { tok, start, end: i, nl_before: nl });
        nl = false;
    }
    out
}

fn regex_allowed(prev: Option<&Token>) -> bool {
    match prev.map(|t| &t.tok) {
        None => true,
        Some(Tok::Punct(p)) => !matches!(*p, ")" | "]" | "}"),
        Some(Tok::Ident(w)) => REGEX_PRECEDERS.contains(&w.as_str()),
        Some(_) => false,
    }
}

/// Returns (decoded value, byte length including quotes). An unterminated
/// string ends at the line break.
fn lex_string(rest: &str, quote: char) -> (String, usize) {
    let mut value = String::new();
    let mut chars = rest.char_indices().skip(1);
    while let Some((idx, ch)) = chars.next() {
        match ch {
            c if c == quote => return (value, idx + 1),
            '\n' => return (value, idx),
            '\\' => match chars.next() {
                Some((_, 'n')) => value.push('\n'),
                Some((_, 't')) => value.push('\t'),
                Some((_, 'r')) => value.push('\r'),
                Some((_, '\n')) => {}
                Some((_, other)) => value.push(other),
                None => break,
            },
            c => value.push(c),
        }
    }
    (value, rest.len())
}

fn lex_template(rest: &str) -> (Option<String>, usize) {
    let b = rest.as_bytes();
    let mut i = 1;
    let mut has_subst = false;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 2,
            b'`' => {
                let body = &rest[1..i];
                return ((!has_subst).then(|| body.to_string()), i + 1);
            }
            b'$' if b.get(i + 1) == Some(&b'{') => {
                has_subst = true;
                i = skip_substitution(rest, i + 2);
            }
            _ => i += 1,
        }
    }
    (None, rest.len())
}

/// Skips a `${ ... }` body starting just after `${`; returns index after `}`.
fn skip_substitution(s: &str, mut i: usize) -> usize {
    let b = s.as_bytes();
    let mut depth = 1;
    while i < b.len() {
        match b[i] {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return i + 1;
                }
            }
            q @ (b'"' | b'\'') => {
                let (_, len) = lex_string(&s[i..], q as char);
                i += len;
                continue;
            }
            b'`' => {
                let (_, len) = lex_template(&s[i..]);
                i += len;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    b.len()
}

fn lex_regex(rest: &str) -> usize {
    let b = rest.as_bytes();
    let mut i = 1;
    let mut in_class = false;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 1,
            b'[' => in_class = true,
            b']' => in_class = false,
            b'/' if !in_class => {
                i += 1;
                while i < b.len() && (b[i] as char).is_ascii_alphabetic() {
                    i += 1;
                }
                return i;
            }
            b'\n' => return i,
            _ => {}
        }
        i += 1;
    }
    b.len()
}
