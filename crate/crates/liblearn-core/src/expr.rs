//! Lambda calculus term representation with de Bruijn indices, plus the
//! S-expression surface syntax used everywhere programs are read or written.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A program term. Applications are binary; multi-argument surface syntax
/// desugars to left-nested `App` chains. `MetaVar` only appears inside
/// compression patterns, never in runnable programs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    /// De Bruijn index; `$0` is the innermost binder.
    Var(usize),
    /// Named primitive, learned abstraction, or quoted literal (name keeps
    /// its quotes, e.g. `'a'`).
    Prim(String),
    Lam(Box<Expr>),
    App(Box<Expr>, Box<Expr>),
    /// Pattern slot `#k`.
    MetaVar(usize),
}

#[derive(Debug, Error, PartialEq, Eq, Clone, Serialize, Deserialize)]
pub enum ParseError {
    #[error("unexpected character {ch:?} at byte {pos}")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("unexpected token {token:?} at byte {pos}, expected {expected}")]
    UnexpectedToken {
        pos: usize,
        token: String,
        expected: &'static str,
    },
    #[error("unexpected end of input")]
    UnexpectedEof,
    #[error("unknown identifier {name:?}")]
    UnknownIdentifier { name: String },
    #[error("trailing input at byte {pos}")]
    TrailingInput { pos: usize },
    #[error("malformed index token {token:?} at byte {pos}")]
    BadIndex { pos: usize, token: String },
    #[error("expression nesting exceeds depth limit {limit}")]
    TooDeep { limit: usize },
}

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum PrintError {
    #[error("pattern MetaVar #{0} is not printable as a program")]
    PatternNotPrintable(usize),
}

/// Maps surface identifiers to canonical production names. `parse` rejects
/// identifiers the resolver does not know.
pub trait NameResolver {
    fn resolve_name(&self, name: &str) -> Option<String>;
}

/// Accepts every identifier verbatim. Used for patterns, fixtures, and tests
/// where no library is in scope.
pub struct OpenNames;

impl NameResolver for OpenNames {
    fn resolve_name(&self, name: &str) -> Option<String> {
        Some(name.to_owned())
    }
}

impl Expr {
    pub fn lam(body: Expr) -> Expr {
        Expr::Lam(Box::new(body))
    }

    pub fn app(fun: Expr, arg: Expr) -> Expr {
        Expr::App(Box::new(fun), Box::new(arg))
    }

    pub fn prim(name: impl Into<String>) -> Expr {
        Expr::Prim(name.into())
    }

    /// Left-nested application of `head` to each argument in order.
    pub fn apply(head: Expr, args: impl IntoIterator<Item = Expr>) -> Expr {
        args.into_iter().fold(head, Expr::app)
    }

    /// Quoted literal primitive, e.g. `literal("a")` prints as `'a'`.
    pub fn literal(content: &str) -> Expr {
        Expr::Prim(format!("'{content}'"))
    }

    /// Node count: leaves cost 1, `Lam` and `App` cost 1 plus their children.
    pub fn size(&self) -> usize {
        match self {
            Expr::Var(_) | Expr::Prim(_) | Expr::MetaVar(_) => 1,
            Expr::Lam(b) => 1 + b.size(),
            Expr::App(f, x) => 1 + f.size() + x.size(),
        }
    }

    /// Number of enclosing binders required to close this term: 0 means the
    /// term has no free variables.
    pub fn free_reach(&self) -> usize {
        fn go(e: &Expr, depth: usize) -> usize {
            match e {
                Expr::Var(i) => (i + 1).saturating_sub(depth),
                Expr::Prim(_) | Expr::MetaVar(_) => 0,
                Expr::Lam(b) => go(b, depth + 1),
                Expr::App(f, x) => go(f, depth).max(go(x, depth)),
            }
        }
        go(self, 0)
    }

    pub fn is_closed(&self) -> bool {
        self.free_reach() == 0
    }

    pub fn contains_metavar(&self) -> bool {
        match self {
            Expr::MetaVar(_) => true,
            Expr::Var(_) | Expr::Prim(_) => false,
            Expr::Lam(b) => b.contains_metavar(),
            Expr::App(f, x) => f.contains_metavar() || x.contains_metavar(),
        }
    }

    /// Splits an application chain into its head and argument list.
    pub fn spine(&self) -> (&Expr, Vec<&Expr>) {
        let mut head = self;
        let mut args = Vec::new();
        while let Expr::App(f, x) = head {
            args.push(x.as_ref());
            head = f.as_ref();
        }
        args.reverse();
        (head, args)
    }

    /// Quoted-literal content when this node is a literal primitive.
    pub fn literal_content(&self) -> Option<&str> {
        match self {
            Expr::Prim(name) if name.len() >= 2 && name.starts_with('\'') && name.ends_with('\'') => {
                Some(&name[1..name.len() - 1])
            }
            _ => None,
        }
    }

    /// Shifts free variables at or above `cutoff` by `delta`.
    pub fn shift(&self, delta: isize, cutoff: usize) -> Expr {
        match self {
            Expr::Var(i) if *i >= cutoff => {
                let shifted = (*i as isize) + delta;
                debug_assert!(shifted >= 0, "shift produced a negative index");
                Expr::Var(shifted as usize)
            }
            Expr::Var(_) | Expr::Prim(_) | Expr::MetaVar(_) => self.clone(),
            Expr::Lam(b) => Expr::lam(b.shift(delta, cutoff + 1)),
            Expr::App(f, x) => Expr::app(f.shift(delta, cutoff), x.shift(delta, cutoff)),
        }
    }

    /// Substitutes `value` for variable `index`, adjusting indices as binders
    /// are crossed. `value` must be closed.
    pub fn subst(&self, index: usize, value: &Expr) -> Expr {
        debug_assert!(value.is_closed());
        match self {
            Expr::Var(i) if *i == index => value.clone(),
            Expr::Var(i) if *i > index => Expr::Var(i - 1),
            Expr::Var(_) | Expr::Prim(_) | Expr::MetaVar(_) => self.clone(),
            Expr::Lam(b) => Expr::lam(b.subst(index + 1, value)),
            Expr::App(f, x) => Expr::app(f.subst(index, value), x.subst(index, value)),
        }
    }

    /// Replaces every `Prim(old)` node with `Prim(new)`.
    pub fn rename_prim(&self, old: &str, new: &str) -> Expr {
        match self {
            Expr::Prim(name) if name == old => Expr::prim(new),
            Expr::Var(_) | Expr::Prim(_) | Expr::MetaVar(_) => self.clone(),
            Expr::Lam(b) => Expr::lam(b.rename_prim(old, new)),
            Expr::App(f, x) => Expr::app(f.rename_prim(old, new), x.rename_prim(old, new)),
        }
    }

    pub fn references_prim(&self, name: &str) -> bool {
        match self {
            Expr::Prim(n) => n == name,
            Expr::Var(_) | Expr::MetaVar(_) => false,
            Expr::Lam(b) => b.references_prim(name),
            Expr::App(f, x) => f.references_prim(name) || x.references_prim(name),
        }
    }

    /// All primitive names referenced by this term, in first-occurrence order.
    pub fn referenced_prims(&self) -> Vec<String> {
        let mut out = Vec::new();
        fn go(e: &Expr, out: &mut Vec<String>) {
            match e {
                Expr::Prim(n) => {
                    if !out.iter().any(|x| x == n) {
                        out.push(n.clone());
                    }
                }
                Expr::Var(_) | Expr::MetaVar(_) => {}
                Expr::Lam(b) => go(b, out),
                Expr::App(f, x) => {
                    go(f, out);
                    go(x, out);
                }
            }
        }
        go(self, &mut out);
        out
    }

    /// Replaces the single occurrence of `MetaVar(slot)`-style holes: returns
    /// a copy where every `MetaVar(slot)` is swapped for `value`.
    pub fn fill_metavar(&self, slot: usize, value: &Expr) -> Expr {
        match self {
            Expr::MetaVar(s) if *s == slot => value.clone(),
            Expr::Var(_) | Expr::Prim(_) | Expr::MetaVar(_) => self.clone(),
            Expr::Lam(b) => Expr::lam(b.fill_metavar(slot, value)),
            Expr::App(f, x) => Expr::app(f.fill_metavar(slot, value), x.fill_metavar(slot, value)),
        }
    }
}

impl fmt::Display for Expr {
    /// Total printer: MetaVars render as `#k`. Use [`print`] when patterns
    /// must be rejected.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print_pattern(self))
    }
}

/// Canonical S-expression form. Application spines flatten to a single
/// parenthesized list; partial applications print as-is.
pub fn print(e: &Expr) -> Result<String, PrintError> {
    fn check(e: &Expr) -> Result<(), PrintError> {
        match e {
            Expr::MetaVar(s) => Err(PrintError::PatternNotPrintable(*s)),
            Expr::Var(_) | Expr::Prim(_) => Ok(()),
            Expr::Lam(b) => check(b),
            Expr::App(f, x) => check(f).and_then(|_| check(x)),
        }
    }
    check(e)?;
    Ok(print_pattern(e))
}

/// Like [`print`] but total: pattern slots render as `#k`.
pub fn print_pattern(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(e, &mut out);
    out
}

fn write_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Var(i) => {
            out.push('$');
            out.push_str(&i.to_string());
        }
        Expr::MetaVar(s) => {
            out.push('#');
            out.push_str(&s.to_string());
        }
        Expr::Prim(name) => out.push_str(name),
        Expr::Lam(b) => {
            out.push_str("(lambda ");
            write_expr(b, out);
            out.push(')');
        }
        Expr::App(_, _) => {
            let (head, args) = e.spine();
            out.push('(');
            write_expr(head, out);
            for a in args {
                out.push(' ');
                write_expr(a, out);
            }
            out.push(')');
        }
    }
}

const MAX_PARSE_DEPTH: usize = 512;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open(usize),
    Close(usize),
    Atom(usize, String),
}

impl Token {
    fn pos(&self) -> usize {
        match self {
            Token::Open(p) | Token::Close(p) => *p,
            Token::Atom(p, _) => *p,
        }
    }
    fn describe(&self) -> String {
        match self {
            Token::Open(_) => "(".to_owned(),
            Token::Close(_) => ")".to_owned(),
            Token::Atom(_, s) => s.clone(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(pos, ch)) = chars.peek() {
        match ch {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                tokens.push(Token::Open(pos));
            }
            ')' => {
                chars.next();
                tokens.push(Token::Close(pos));
            }
            '\'' => {
                chars.next();
                let mut content = String::from("'");
                let mut closed = false;
                for (_, c) in chars.by_ref() {
                    content.push(c);
                    if c == '\'' {
                        closed = true;
                        break;
                    }
                }
                if !closed {
                    return Err(ParseError::UnexpectedEof);
                }
                tokens.push(Token::Atom(pos, content));
            }
            _ => {
                let mut atom = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == '\'' {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                }
                tokens.push(Token::Atom(pos, atom));
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a, R: NameResolver + ?Sized> {
    tokens: Vec<Token>,
    cursor: usize,
    resolver: &'a R,
    /// Innermost binder last; `None` for de Bruijn-form binders.
    bound: Vec<Option<String>>,
}

/// Parses the surface grammar
/// `expr := '$'INT | '#'INT | IDENT | QUOTED | '(' 'lambda' params? expr ')' | '(' expr expr+ ')'`.
/// Named lambda parameters (`(lambda (x y) body)` or `(lambda x body)`) and
/// de Bruijn bodies (`(lambda body)`) are both accepted; printing always uses
/// de Bruijn form.
pub fn parse<R: NameResolver + ?Sized>(src: &str, resolver: &R) -> Result<Expr, ParseError> {
    let tokens = tokenize(src)?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        resolver,
        bound: Vec::new(),
    };
    let expr = parser.expr(0)?;
    if parser.cursor < parser.tokens.len() {
        return Err(ParseError::TrailingInput {
            pos: parser.tokens[parser.cursor].pos(),
        });
    }
    Ok(expr)
}

impl<R: NameResolver + ?Sized> Parser<'_, R> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor)
    }

    fn next_token(&mut self) -> Result<Token, ParseError> {
        let t = self.tokens.get(self.cursor).cloned().ok_or(ParseError::UnexpectedEof)?;
        self.cursor += 1;
        Ok(t)
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        match self.next_token()? {
            Token::Close(_) => Ok(()),
            t => Err(ParseError::UnexpectedToken {
                pos: t.pos(),
                token: t.describe(),
                expected: ")",
            }),
        }
    }

    fn expr(&mut self, depth: usize) -> Result<Expr, ParseError> {
        if depth > MAX_PARSE_DEPTH {
            return Err(ParseError::TooDeep {
                limit: MAX_PARSE_DEPTH,
            });
        }
        match self.next_token()? {
            Token::Atom(pos, atom) => self.atom(pos, atom),
            Token::Open(_) => {
                let head = self.next_token()?;
                if let Token::Atom(_, name) = &head {
                    if name == "lambda" || name == "\u{3bb}" {
                        return self.lambda(depth);
                    }
                }
                self.cursor -= 1;
                self.application(depth)
            }
            Token::Close(pos) => Err(ParseError::UnexpectedToken {
                pos,
                token: ")".to_owned(),
                expected: "expression",
            }),
        }
    }

    fn atom(&mut self, pos: usize, atom: String) -> Result<Expr, ParseError> {
        if let Some(rest) = atom.strip_prefix('$') {
            return rest
                .parse::<usize>()
                .map(Expr::Var)
                .map_err(|_| ParseError::BadIndex { pos, token: atom.clone() });
        }
        if let Some(rest) = atom.strip_prefix('#') {
            return rest
                .parse::<usize>()
                .map(Expr::MetaVar)
                .map_err(|_| ParseError::BadIndex { pos, token: atom.clone() });
        }
        if atom.starts_with('\'') {
            return Ok(Expr::Prim(atom));
        }
        if atom == "lambda" || atom == "\u{3bb}" {
            return Err(ParseError::UnexpectedToken {
                pos,
                token: atom,
                expected: "expression",
            });
        }
        // Named binders shadow library names.
        if let Some(distance) = self
            .bound
            .iter()
            .rev()
            .position(|b| b.as_deref() == Some(atom.as_str()))
        {
            return Ok(Expr::Var(distance));
        }
        match self.resolver.resolve_name(&atom) {
            Some(canonical) => Ok(Expr::Prim(canonical)),
            None => Err(ParseError::UnknownIdentifier { name: atom }),
        }
    }

    fn lambda(&mut self, depth: usize) -> Result<Expr, ParseError> {
        // `(lambda X)` is a de Bruijn body; `(lambda params body)` binds names.
        let first = self.next_token()?;
        match first {
            Token::Atom(pos, atom) => {
                let after = self.peek().cloned();
                match after {
                    Some(Token::Close(_)) => {
                        // Single-atom body, e.g. `(lambda $0)`.
                        let body = self.atom(pos, atom)?;
                        self.expect_close()?;
                        Ok(Expr::lam(body))
                    }
                    Some(_) => {
                        // Named single parameter, e.g. `(lambda x (f x))`.
                        if atom.starts_with('$') || atom.starts_with('#') || atom.starts_with('\'') {
                            return Err(ParseError::UnexpectedToken {
                                pos,
                                token: atom,
                                expected: "parameter name",
                            });
                        }
                        self.bound.push(Some(atom));
                        let body = self.expr(depth + 1)?;
                        self.bound.pop();
                        self.expect_close()?;
                        Ok(Expr::lam(body))
                    }
                    None => Err(ParseError::UnexpectedEof),
                }
            }
            Token::Open(open_pos) => {
                // Either a parameter list of bare names or a de Bruijn body.
                let mut names = Vec::new();
                let mut probe = self.cursor;
                let params = loop {
                    match self.tokens.get(probe) {
                        Some(Token::Atom(_, a))
                            if !a.starts_with('$')
                                && !a.starts_with('#')
                                && !a.starts_with('\'')
                                && a != "lambda"
                                && a != "\u{3bb}" =>
                        {
                            names.push(a.clone());
                            probe += 1;
                        }
                        Some(Token::Close(_)) => break !names.is_empty(),
                        _ => break false,
                    }
                };
                // A parameter list must be followed by a body, otherwise the
                // parenthesized form was the body itself (e.g. `(lambda (f x))`).
                let params = params && !matches!(self.tokens.get(probe + 1), Some(Token::Close(_)) | None);
                if params {
                    self.cursor = probe + 1;
                    for name in &names {
                        self.bound.push(Some(name.clone()));
                    }
                    let body = self.expr(depth + 1)?;
                    for _ in &names {
                        self.bound.pop();
                    }
                    self.expect_close()?;
                    let mut expr = body;
                    for _ in &names {
                        expr = Expr::lam(expr);
                    }
                    Ok(expr)
                } else {
                    self.cursor -= 1;
                    debug_assert!(matches!(self.tokens.get(self.cursor), Some(Token::Open(p)) if *p == open_pos));
                    self.bound.push(None);
                    let body = self.expr(depth + 1)?;
                    self.bound.pop();
                    self.expect_close()?;
                    Ok(Expr::lam(body))
                }
            }
            Token::Close(pos) => Err(ParseError::UnexpectedToken {
                pos,
                token: ")".to_owned(),
                expected: "lambda body",
            }),
        }
    }

    fn application(&mut self, depth: usize) -> Result<Expr, ParseError> {
        let head = self.expr(depth + 1)?;
        let mut args = Vec::new();
        loop {
            match self.peek() {
                Some(Token::Close(_)) => {
                    self.cursor += 1;
                    break;
                }
                Some(_) => args.push(self.expr(depth + 1)?),
                None => return Err(ParseError::UnexpectedEof),
            }
        }
        if args.is_empty() {
            return Err(ParseError::UnexpectedToken {
                pos: 0,
                token: ")".to_owned(),
                expected: "argument",
            });
        }
        Ok(Expr::apply(head, args))
    }
}
