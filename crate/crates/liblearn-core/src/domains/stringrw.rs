//! String rewriting with regex-style patterns.
//!
//! A pattern is itself a string: literal characters match themselves, `.`
//! matches any single character, `(p|q)` matches either branch, and `(!p)`
//! matches any single character that `p` does not match. Juxtaposition is
//! sequencing, so `ab` matches exactly the two-character string "ab". These
//! semantics are this crate's own definitions; the full reference lives in
//! the bundled domain manifest.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::{evaluate, EvalCtx, EvalError, DEFAULT_STEP_BUDGET};
use crate::expr::{self, Expr};
use crate::library::Library;
use crate::task::{Example, Task};
use crate::ty::parse_ty;
use crate::value::Value;

use super::{parse_ground_truth, DomainError, DomainSpec};

pub const WORDS: &str = include_str!("../../assets/words_1k.txt");

/// The disjunction of the five vowels, written with nested alternation.
pub const VOWEL_SRC: &str = "(regex_or 'a' (regex_or 'e' (regex_or 'i' (regex_or 'o' 'u'))))";

const HEADER: &str = "Write programs in a lambda-calculus string-rewriting language. \
Each program maps an input word to an output word. Patterns are strings: \
letters match themselves, '.' matches any one character, (p|q) matches either \
branch, and (!p) matches any one character p does not match.";

#[derive(Debug, Clone, PartialEq)]
enum Rx {
    Lit(char),
    Any,
    Or(Box<Rx>, Box<Rx>),
    Not(Box<Rx>),
    Seq(Vec<Rx>),
}

fn parse_pattern(src: &str) -> Result<Rx, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut pos = 0;
    let rx = parse_seq(&chars, &mut pos)?;
    if pos != chars.len() {
        return Err(format!("trailing pattern input in {src:?}"));
    }
    Ok(rx)
}

fn parse_seq(chars: &[char], pos: &mut usize) -> Result<Rx, String> {
    let mut items = Vec::new();
    while let Some(&c) = chars.get(*pos) {
        if c == ')' || c == '|' {
            break;
        }
        items.push(parse_atom(chars, pos)?);
    }
    match items.len() {
        0 => Err("empty pattern".to_owned()),
        1 => Ok(items.pop().unwrap()),
        _ => Ok(Rx::Seq(items)),
    }
}

fn parse_atom(chars: &[char], pos: &mut usize) -> Result<Rx, String> {
    match chars.get(*pos) {
        Some('.') => {
            *pos += 1;
            Ok(Rx::Any)
        }
        Some(&c) if c.is_ascii_lowercase() => {
            *pos += 1;
            Ok(Rx::Lit(c))
        }
        Some('(') => {
            *pos += 1;
            if chars.get(*pos) == Some(&'!') {
                *pos += 1;
                let inner = parse_seq(chars, pos)?;
                if chars.get(*pos) != Some(&')') {
                    return Err("unclosed (!...) pattern".to_owned());
                }
                *pos += 1;
                return Ok(Rx::Not(Box::new(inner)));
            }
            let left = parse_seq(chars, pos)?;
            if chars.get(*pos) != Some(&'|') {
                return Err("expected | in (p|q) pattern".to_owned());
            }
            *pos += 1;
            let right = parse_seq(chars, pos)?;
            if chars.get(*pos) != Some(&')') {
                return Err("unclosed (p|q) pattern".to_owned());
            }
            *pos += 1;
            Ok(Rx::Or(Box::new(left), Box::new(right)))
        }
        Some(&c) => Err(format!("unexpected pattern character {c:?}")),
        None => Err("unexpected end of pattern".to_owned()),
    }
}

/// Whole-string match. `Not` deliberately matches exactly one character, so
/// `(!p)` is the complement character class of `p`.
fn match_full(rx: &Rx, s: &[char]) -> bool {
    match rx {
        Rx::Lit(c) => s.len() == 1 && s[0] == *c,
        Rx::Any => s.len() == 1,
        Rx::Not(p) => s.len() == 1 && !match_full(p, s),
        Rx::Or(a, b) => match_full(a, s) || match_full(b, s),
        Rx::Seq(items) => match_seq(items, s),
    }
}

fn match_seq(items: &[Rx], s: &[char]) -> bool {
    match items.split_first() {
        None => s.is_empty(),
        Some((first, rest)) => {
            (0..=s.len()).any(|k| match_full(first, &s[..k]) && match_seq(rest, &s[k..]))
        }
    }
}

/// Tokenizes `s` left to right: the longest prefix matching `rx` becomes one
/// token; where nothing matches, a single character does.
fn split_tokens(rx: &Rx, s: &str) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let k = (1..=chars.len() - i)
            .rev()
            .find(|&k| match_full(rx, &chars[i..i + k]))
            .unwrap_or(1);
        out.push(chars[i..i + k].iter().collect());
        i += k;
    }
    out
}

fn want_str(v: &Value) -> Result<String, EvalError> {
    match v {
        Value::Str(s) => Ok(s.clone()),
        other => Err(EvalError::Runtime(format!("expected a string, got {other}"))),
    }
}

fn want_list(v: Value) -> Result<Vec<Value>, EvalError> {
    match v {
        Value::List(items) => Ok(items),
        other => Err(EvalError::Runtime(format!("expected a list, got {other}"))),
    }
}

fn want_pattern(v: &Value) -> Result<Rx, EvalError> {
    parse_pattern(&want_str(v)?).map_err(EvalError::Runtime)
}

fn p_or(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    Ok(Value::Str(format!(
        "({}|{})",
        want_str(&args[0])?,
        want_str(&args[1])?
    )))
}

fn p_not(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    Ok(Value::Str(format!("(!{})", want_str(&args[0])?)))
}

fn p_concat(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    Ok(Value::Str(format!(
        "{}{}",
        want_str(&args[0])?,
        want_str(&args[1])?
    )))
}

fn p_match(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let rx = want_pattern(&args[0])?;
    let s = want_str(&args[1])?;
    let chars: Vec<char> = s.chars().collect();
    Ok(Value::Bool(match_full(&rx, &chars)))
}

fn p_split(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let rx = want_pattern(&args[0])?;
    let s = want_str(&args[1])?;
    Ok(Value::List(
        split_tokens(&rx, &s).into_iter().map(Value::Str).collect(),
    ))
}

fn p_flatten(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let items = want_list(args.into_iter().next().unwrap())?;
    let mut out = String::new();
    for item in &items {
        out.push_str(&want_str(item)?);
    }
    Ok(Value::Str(out))
}

fn p_cons(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let mut args = args.into_iter();
    let head = args.next().unwrap();
    let mut items = want_list(args.next().unwrap())?;
    items.insert(0, head);
    Ok(Value::List(items))
}

fn p_car(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let items = want_list(args.into_iter().next().unwrap())?;
    items
        .into_iter()
        .next()
        .ok_or_else(|| EvalError::Runtime("car of an empty list".to_owned()))
}

fn p_cdr(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let mut items = want_list(args.into_iter().next().unwrap())?;
    if !items.is_empty() {
        items.remove(0);
    }
    Ok(Value::List(items))
}

fn p_append(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let mut args = args.into_iter();
    let element = args.next().unwrap();
    let mut items = want_list(args.next().unwrap())?;
    items.push(element);
    Ok(Value::List(items))
}

fn p_tail(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let items = want_list(args.into_iter().next().unwrap())?;
    items
        .into_iter()
        .last()
        .ok_or_else(|| EvalError::Runtime("tail of an empty list".to_owned()))
}

fn p_map(ctx: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let mut args = args.into_iter();
    let f = args.next().unwrap();
    let items = want_list(args.next().unwrap())?;
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        out.push(ctx.apply_value(f.clone(), item)?);
    }
    Ok(Value::List(out))
}

fn p_if(_: &mut EvalCtx<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let mut args = args.into_iter();
    match args.next().unwrap() {
        Value::Bool(true) => Ok(args.next().unwrap()),
        Value::Bool(false) => Ok(args.nth(1).unwrap()),
        other => Err(EvalError::Runtime(format!("expected a bool, got {other}"))),
    }
}

fn p_literal(_: &mut EvalCtx<'_>, _: Vec<Value>) -> Result<Value, EvalError> {
    // Quoted names evaluate through their literal content before primitive
    // dispatch, so this body is unreachable.
    Err(EvalError::Runtime("literal evaluated as a primitive".to_owned()))
}

pub fn library() -> Library {
    let mut lib = Library::new("stringrw")
        .with_literal_ty("tsubstr")
        .with_primitive(
            "regex_split",
            "tsubstr -> tfullstr -> list(tsubstr)",
            Some("Tokenize the word: maximal runs matching the pattern become one token, any other character stands alone."),
            p_split,
        )
        .with_primitive(
            "regex_map",
            "(tsubstr -> tsubstr) -> list(tsubstr) -> list(tsubstr)",
            Some("Apply a function to every token."),
            p_map,
        )
        .with_primitive(
            "regex_if",
            "tbool -> t0 -> t0 -> t0",
            Some("Choose between two values by a condition."),
            p_if,
        )
        .with_primitive(
            "regex_match",
            "tsubstr -> tsubstr -> tbool",
            Some("Test whether the pattern matches the whole candidate string."),
            p_match,
        )
        .with_primitive(
            "regex_or",
            "tsubstr -> tsubstr -> tsubstr",
            Some("Pattern alternation: (p|q) matches either branch."),
            p_or,
        )
        .with_primitive(
            "regex_not",
            "tsubstr -> tsubstr",
            Some("Complement class: (!p) matches any one character p does not."),
            p_not,
        )
        .with_primitive(
            "regex_concat",
            "tsubstr -> tsubstr -> tsubstr",
            Some("Concatenate two strings or patterns in sequence."),
            p_concat,
        )
        .with_primitive(
            "regex_flatten",
            "list(tsubstr) -> tfullstr",
            Some("Concatenate all tokens back into a word."),
            p_flatten,
        )
        .with_primitive(
            "regex_cons",
            "tsubstr -> list(tsubstr) -> list(tsubstr)",
            Some("Prepend a token to a token list."),
            p_cons,
        )
        .with_primitive(
            "regex_car",
            "list(tsubstr) -> tsubstr",
            Some("First token of a list; errors on an empty list."),
            p_car,
        )
        .with_primitive(
            "regex_cdr",
            "list(tsubstr) -> list(tsubstr)",
            Some("All tokens but the first; empty stays empty."),
            p_cdr,
        )
        .with_primitive(
            "regex_append",
            "tsubstr -> list(tsubstr) -> list(tsubstr)",
            Some("Append a token at the end of a token list."),
            p_append,
        )
        .with_primitive(
            "regex_tail",
            "list(tsubstr) -> tsubstr",
            Some("Last token of a list; errors on an empty list."),
            p_tail,
        );
    for c in ('a'..='z').chain(['.']) {
        let name = format!("'{c}'");
        lib = lib.with_primitive(&name, "tsubstr", None, p_literal);
    }
    lib
}

pub fn vowel_expr() -> Expr {
    expr::parse(VOWEL_SRC, &library()).expect("vowel expression parses")
}

/// The bundled task templates. Descriptions follow the synthetic-language
/// phrasing of the task corpus; each family fixes the program shape and
/// leaves the pattern and replacement letters open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// "if there is X replace that with Y1 Y2"
    ReplaceEachTwo,
    /// "if the word starts with X replace that with Y1 Y2"
    StartsReplaceTwo,
    /// "if the word starts with X add Y before that"
    StartsAddBefore,
    /// "if the word ends with X add Y after that"
    EndsAddAfter,
    /// "replace every X with Y"
    ReplaceEachOne,
    /// "add Y before every X"
    AddBeforeEach,
}

pub fn template_families() -> Vec<Family> {
    vec![
        Family::ReplaceEachTwo,
        Family::StartsReplaceTwo,
        Family::StartsAddBefore,
        Family::EndsAddAfter,
        Family::ReplaceEachOne,
        Family::AddBeforeEach,
    ]
}

impl Family {
    fn letter_slots(self) -> usize {
        match self {
            Family::ReplaceEachTwo | Family::StartsReplaceTwo => 2,
            Family::StartsAddBefore | Family::EndsAddAfter => 1,
            Family::ReplaceEachOne | Family::AddBeforeEach => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Subject {
    Vowel,
    Consonant,
    Letter(char),
    Pair(char, char),
}

impl Subject {
    fn pattern_src(self) -> String {
        match self {
            Subject::Vowel => VOWEL_SRC.to_owned(),
            Subject::Consonant => format!("(regex_not {VOWEL_SRC})"),
            Subject::Letter(c) => format!("'{c}'"),
            Subject::Pair(a, b) => format!("(regex_or '{a}' '{b}')"),
        }
    }

    fn phrase(self) -> String {
        match self {
            Subject::Vowel => "vowel".to_owned(),
            Subject::Consonant => "consonant".to_owned(),
            Subject::Letter(c) => c.to_string(),
            Subject::Pair(a, b) => format!("{a} or {b}"),
        }
    }
}

fn draw_subject(rng: &mut ChaCha8Rng) -> Subject {
    match rng.gen_range(0..100) {
        0..=14 => Subject::Vowel,
        15..=29 => Subject::Consonant,
        30..=44 => {
            let a = (b'a' + rng.gen_range(0..26)) as char;
            let mut b = a;
            while b == a {
                b = (b'a' + rng.gen_range(0..26)) as char;
            }
            Subject::Pair(a, b)
        }
        _ => Subject::Letter((b'a' + rng.gen_range(0..26)) as char),
    }
}

#[derive(Debug, Clone)]
struct Instance {
    family: Family,
    subject: Subject,
    letters: Vec<char>,
}

/// Substitutes the open body of one template into another at the variable
/// bound by the shared outer lambda. Both arguments must be single-argument
/// lambdas; the result is the lambda computing `outer(inner(x))`.
fn compose(outer: &Expr, inner: &Expr) -> Expr {
    let (Expr::Lam(ob), Expr::Lam(ib)) = (outer, inner) else {
        panic!("compose expects lambdas");
    };
    fn subst_open(e: &Expr, index: usize, value: &Expr) -> Expr {
        match e {
            Expr::Var(i) if *i == index => value.shift(index as isize, 0),
            Expr::Var(_) | Expr::Prim(_) | Expr::MetaVar(_) => e.clone(),
            Expr::Lam(b) => Expr::lam(subst_open(b, index + 1, value)),
            Expr::App(f, x) => Expr::app(subst_open(f, index, value), subst_open(x, index, value)),
        }
    }
    Expr::lam(subst_open(ob, 0, ib))
}

impl Instance {
    fn description(&self) -> String {
        let x = self.subject.phrase();
        match self.family {
            Family::ReplaceEachTwo => format!(
                "if there is {x} replace that with {} {}",
                self.letters[0], self.letters[1]
            ),
            Family::StartsReplaceTwo => format!(
                "if the word starts with {x} replace that with {} {}",
                self.letters[0], self.letters[1]
            ),
            Family::StartsAddBefore => {
                format!("if the word starts with {x} add {} before that", self.letters[0])
            }
            Family::EndsAddAfter => {
                format!("if the word ends with {x} add {} after that", self.letters[0])
            }
            Family::ReplaceEachOne => format!("replace every {x} with {}", self.letters[0]),
            Family::AddBeforeEach => format!("add {} before every {x}", self.letters[0]),
        }
    }

    fn program_src(&self) -> String {
        let x = self.subject.pattern_src();
        let y: Vec<String> = self.letters.iter().map(|c| format!("'{c}'")).collect();
        match self.family {
            Family::ReplaceEachTwo => format!(
                "(lambda (regex_flatten (regex_map (lambda (regex_if (regex_match {x} $0) \
                 (regex_concat {} {}) $0)) (regex_split '.' $0))))",
                y[0], y[1]
            ),
            Family::StartsReplaceTwo => format!(
                "(lambda (regex_if (regex_match {x} (regex_car (regex_split '.' $0))) \
                 (regex_flatten (regex_cons {} (regex_cons {} (regex_cdr (regex_split '.' $0))))) $0))",
                y[0], y[1]
            ),
            Family::StartsAddBefore => format!(
                "(lambda (regex_if (regex_match {x} (regex_car (regex_split '.' $0))) \
                 (regex_flatten (regex_cons {} (regex_split '.' $0))) $0))",
                y[0]
            ),
            Family::EndsAddAfter => format!(
                "(lambda (regex_if (regex_match {x} (regex_tail (regex_split '.' $0))) \
                 (regex_flatten (regex_append {} (regex_split '.' $0))) $0))",
                y[0]
            ),
            Family::ReplaceEachOne => format!(
                "(lambda (regex_flatten (regex_map (lambda (regex_if (regex_match {x} $0) \
                 {} $0)) (regex_split '.' $0))))",
                y[0]
            ),
            Family::AddBeforeEach => format!(
                "(lambda (regex_flatten (regex_map (lambda (regex_if (regex_match {x} $0) \
                 (regex_concat {} $0) $0)) (regex_split '.' $0))))",
                y[0]
            ),
        }
    }
}

/// Positional one-off transforms outside the template families. Their
/// programs lean on list plumbing instead of the shared map pipeline, which
/// keeps a slice of the corpus structurally idiosyncratic.
#[derive(Debug, Clone)]
struct OneOff {
    shape: usize,
    subject: Subject,
    letters: Vec<char>,
}

const ONE_OFF_SHAPES: usize = 10;

impl OneOff {
    fn letter_slots(shape: usize) -> usize {
        match shape {
            0..=4 | 9 => 0,
            6 | 7 => 1,
            _ => 2,
        }
    }

    fn description(&self) -> String {
        let x = self.subject.phrase();
        match self.shape {
            0 => "drop the first letter".to_owned(),
            1 => "duplicate the first letter".to_owned(),
            2 => "move the first letter to the end".to_owned(),
            3 => "duplicate the last letter".to_owned(),
            4 => "double every letter".to_owned(),
            5 => format!(
                "add {} at the front and {} at the end",
                self.letters[0], self.letters[1]
            ),
            6 => format!("replace the first letter with {}", self.letters[0]),
            7 => format!("add {} after every {x}", self.letters[0]),
            8 => format!(
                "surround every {x} with {} and {}",
                self.letters[0], self.letters[1]
            ),
            9 => format!("double every {x}"),
            _ => unreachable!(),
        }
    }

    fn program_src(&self) -> String {
        let x = self.subject.pattern_src();
        let y: Vec<String> = self.letters.iter().map(|c| format!("'{c}'")).collect();
        match self.shape {
            0 => "(lambda (regex_flatten (regex_cdr (regex_split '.' $0))))".to_owned(),
            1 => "(lambda (regex_flatten (regex_cons (regex_car (regex_split '.' $0)) \
                  (regex_split '.' $0))))"
                .to_owned(),
            2 => "(lambda (regex_flatten (regex_append (regex_car (regex_split '.' $0)) \
                  (regex_cdr (regex_split '.' $0)))))"
                .to_owned(),
            3 => "(lambda (regex_flatten (regex_append (regex_tail (regex_split '.' $0)) \
                  (regex_split '.' $0))))"
                .to_owned(),
            4 => "(lambda (regex_flatten (regex_map (lambda (regex_concat $0 $0)) \
                  (regex_split '.' $0))))"
                .to_owned(),
            5 => format!(
                "(lambda (regex_flatten (regex_cons {} (regex_append {} (regex_split '.' $0)))))",
                y[0], y[1]
            ),
            6 => format!(
                "(lambda (regex_flatten (regex_cons {} (regex_cdr (regex_split '.' $0)))))",
                y[0]
            ),
            7 => format!(
                "(lambda (regex_flatten (regex_map (lambda (regex_if (regex_match {x} $0) \
                 (regex_concat $0 {}) $0)) (regex_split '.' $0))))",
                y[0]
            ),
            8 => format!(
                "(lambda (regex_flatten (regex_map (lambda (regex_if (regex_match {x} $0) \
                 (regex_concat {} (regex_concat $0 {})) $0)) (regex_split '.' $0))))",
                y[0], y[1]
            ),
            9 => format!(
                "(lambda (regex_flatten (regex_map (lambda (regex_if (regex_match {x} $0) \
                 (regex_concat $0 $0) $0)) (regex_split '.' $0))))"
            ),
            _ => unreachable!(),
        }
    }
}

/// One corpus entry: a plain template instance, two of them run in sequence,
/// or a positional one-off. Composed programs inline the first transform
/// into the second, which yields task-specific shapes the template families
/// do not cover.
#[derive(Debug, Clone)]
enum Draft {
    Single(Instance),
    Composed { inner: Instance, outer: Instance },
    OneOff(OneOff),
}

impl Draft {
    fn description(&self) -> String {
        match self {
            Draft::Single(i) => i.description(),
            Draft::Composed { inner, outer } => {
                format!("{} then {}", inner.description(), outer.description())
            }
            Draft::OneOff(o) => o.description(),
        }
    }

    fn program(&self, lib: &Library) -> Expr {
        match self {
            Draft::Single(i) => expr::parse(&i.program_src(), lib).expect("template parses"),
            Draft::Composed { inner, outer } => {
                let inner = expr::parse(&inner.program_src(), lib).expect("template parses");
                let outer = expr::parse(&outer.program_src(), lib).expect("template parses");
                compose(&outer, &inner)
            }
            Draft::OneOff(o) => expr::parse(&o.program_src(), lib).expect("template parses"),
        }
    }
}

pub struct GeneratedCorpus {
    pub train: Vec<Task>,
    pub test: Vec<Task>,
    /// Task id paired with its reference program, train split first.
    pub ground_truth: Vec<(String, Expr)>,
}

fn word_list() -> Vec<&'static str> {
    WORDS.lines().filter(|w| !w.is_empty()).collect()
}

/// Builds five examples for one instance: words the transform changes, plus
/// up to two it leaves alone. Words are visited in a shuffled order and the
/// scan stops as soon as both buckets are full, so common subjects settle
/// after a handful of evaluations. Returns `None` when the pool cannot
/// supply five examples with at least three changed, which rejects the
/// instance.
fn build_examples(
    lib: &Library,
    program: &Expr,
    words: &[&str],
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Example>> {
    let mut order: Vec<usize> = (0..words.len()).collect();
    order.shuffle(rng);
    let mut changed: Vec<(&str, String)> = Vec::new();
    let mut unchanged: Vec<(&str, String)> = Vec::new();
    for &i in &order {
        if changed.len() >= 5 && unchanged.len() >= 2 {
            break;
        }
        let w = words[i];
        match evaluate(lib, program, &[Value::Str(w.to_owned())], DEFAULT_STEP_BUDGET) {
            Ok(Value::Str(out)) if out != w => changed.push((w, out)),
            Ok(Value::Str(out)) => {
                if unchanged.len() < 2 {
                    unchanged.push((w, out));
                }
            }
            _ => return None,
        }
    }
    let take_unchanged = unchanged.len().min(2);
    let take_changed = 5 - take_unchanged;
    if changed.len() < 3.max(take_changed) {
        return None;
    }
    let mut picked: Vec<(&str, String)> = changed.into_iter().take(take_changed).collect();
    picked.extend(unchanged.into_iter().take(take_unchanged));
    Some(
        picked
            .into_iter()
            .map(|(w, out)| Example {
                inputs: vec![Value::Str(w.to_owned())],
                output: Value::Str(out),
            })
            .collect(),
    )
}

fn draw_instance(families: &[Family], rng: &mut ChaCha8Rng) -> Instance {
    let family = families[rng.gen_range(0..families.len())];
    let subject = draw_subject(rng);
    let letters = (0..family.letter_slots())
        .map(|_| (b'a' + rng.gen_range(0..26)) as char)
        .collect();
    Instance {
        family,
        subject,
        letters,
    }
}

fn degenerate(instance: &Instance) -> bool {
    // "replace every c with c" never changes anything.
    matches!(
        (instance.family, instance.subject),
        (Family::ReplaceEachOne, Subject::Letter(c)) if c == instance.letters[0]
    )
}

/// Mix of random draws, tuned so the bundled 50-program corpus compresses
/// into a moderate range rather than collapsing entirely into template
/// calls: plain instances, then composed tasks, the rest one-offs.
const SINGLE_PERCENT: u64 = 35;
const COMPOSED_PERCENT: u64 = 20;

fn draw_draft(families: &[Family], rng: &mut ChaCha8Rng) -> Draft {
    let roll = rng.gen_range(0..100);
    if roll < SINGLE_PERCENT {
        Draft::Single(draw_instance(families, rng))
    } else if roll < SINGLE_PERCENT + COMPOSED_PERCENT {
        // The outer transform is always a per-token family, so the inner
        // result is consumed exactly once.
        let map_families = [
            Family::ReplaceEachTwo,
            Family::ReplaceEachOne,
            Family::AddBeforeEach,
        ];
        let outer_family = map_families[rng.gen_range(0..map_families.len())];
        let inner = draw_instance(families, rng);
        let outer = draw_instance(&[outer_family], rng);
        Draft::Composed { inner, outer }
    } else {
        let shape = rng.gen_range(0..ONE_OFF_SHAPES);
        let subject = draw_subject(rng);
        let letters = (0..OneOff::letter_slots(shape))
            .map(|_| (b'a' + rng.gen_range(0..26)) as char)
            .collect();
        Draft::OneOff(OneOff {
            shape,
            subject,
            letters,
        })
    }
}

/// Deterministic corpus generation. The first train tasks instantiate every
/// family with the vowel subject so the shared vowel expression is always
/// discoverable; the rest are random draws, deduplicated by description.
pub fn generate_corpus(
    families: &[Family],
    seed: u64,
    n_train: usize,
    n_test: usize,
) -> GeneratedCorpus {
    let lib = library();
    let words = word_list();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen_descriptions = std::collections::BTreeSet::new();
    let mut accepted: Vec<(String, Expr, Vec<Example>)> = Vec::new();
    let total = n_train + n_test;

    let mut queue: Vec<Draft> = families
        .iter()
        .map(|&family| {
            Draft::Single(Instance {
                family,
                subject: Subject::Vowel,
                letters: (0..family.letter_slots())
                    .map(|_| (b'a' + rng.gen_range(0..26)) as char)
                    .collect(),
            })
        })
        .take(n_train)
        .collect();

    let mut attempts = 0;
    while accepted.len() < total {
        attempts += 1;
        assert!(attempts < 100 * total.max(1), "corpus generation stalled");
        let draft = if let Some(head) = queue.pop() {
            head
        } else {
            draw_draft(families, &mut rng)
        };
        let rejected = match &draft {
            Draft::Single(i) => degenerate(i),
            Draft::Composed { inner, outer } => degenerate(inner) || degenerate(outer),
            Draft::OneOff(_) => false,
        };
        if rejected {
            continue;
        }
        let description = draft.description();
        if seen_descriptions.contains(&description) {
            continue;
        }
        let program = draft.program(&lib);
        let Some(examples) = build_examples(&lib, &program, &words, &mut rng) else {
            continue;
        };
        seen_descriptions.insert(description.clone());
        accepted.push((description, program, examples));
    }

    let request_ty = parse_ty("tfullstr -> tfullstr").unwrap();
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut ground_truth = Vec::new();
    for (idx, (description, program, examples)) in accepted.into_iter().enumerate() {
        let (split, number, bucket) = if idx < n_train {
            ("train", idx, &mut train)
        } else {
            ("test", idx - n_train, &mut test)
        };
        let id = format!("stringrw_{split}_{number:03}");
        bucket.push(Task {
            id: id.clone(),
            description,
            request_ty: request_ty.clone(),
            examples,
        });
        ground_truth.push((id, program));
    }
    GeneratedCorpus {
        train,
        test,
        ground_truth,
    }
}

/// Seed behind the bundled corpus files; regenerate with the ignored test
/// below or the gen-corpus command.
pub const BUNDLED_SEED: u64 = 7;

pub(super) fn domain_spec() -> Result<DomainSpec, DomainError> {
    let lib = library();
    let train = super::parse_corpus(
        "stringrw/train.jsonl",
        include_str!("../../assets/stringrw/train.jsonl"),
    )?;
    let test = super::parse_corpus(
        "stringrw/test.jsonl",
        include_str!("../../assets/stringrw/test.jsonl"),
    )?;
    let ground_truth = parse_ground_truth(
        "stringrw/ground_truth.jsonl",
        include_str!("../../assets/stringrw/ground_truth.jsonl"),
        &lib,
    )?;
    Ok(DomainSpec {
        name: "stringrw".to_owned(),
        header: HEADER.to_owned(),
        library: lib,
        train,
        test,
        ground_truth,
        default_timeout_secs: 30.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_word(src: &str, word: &str) -> String {
        let lib = library();
        let e = expr::parse(src, &lib).unwrap();
        match evaluate(&lib, &e, &[Value::Str(word.into())], DEFAULT_STEP_BUDGET) {
            Ok(Value::Str(s)) => s,
            other => panic!("expected a string, got {other:?}"),
        }
    }

    #[test]
    fn pattern_matching_semantics() {
        let m = |p: &str, s: &str| {
            let rx = parse_pattern(p).unwrap();
            let chars: Vec<char> = s.chars().collect();
            match_full(&rx, &chars)
        };
        assert!(m("a", "a") && !m("a", "b") && !m("a", "aa"));
        assert!(m(".", "q") && !m(".", "qq"));
        assert!(m("(a|b)", "a") && m("(a|b)", "b") && !m("(a|b)", "c"));
        assert!(m("(!a)", "b") && !m("(!a)", "a") && !m("(!a)", "bb"));
        assert!(m("ab", "ab") && !m("ab", "ba") && !m("ab", "a"));
        // The five-way vowel alternation as rendered by regex_or.
        let vowels = "(a|(e|(i|(o|u))))";
        for v in ["a", "e", "i", "o", "u"] {
            assert!(m(vowels, v));
        }
        assert!(!m(vowels, "t"));
        assert!(m(&format!("(!{vowels})"), "t"));
        assert!(!m(&format!("(!{vowels})"), "o"));
    }

    #[test]
    fn split_groups_longest_pattern_runs() {
        let rx = parse_pattern(".").unwrap();
        assert_eq!(split_tokens(&rx, "cat"), vec!["c", "a", "t"]);
        let rx = parse_pattern("ab").unwrap();
        assert_eq!(split_tokens(&rx, "cabab"), vec!["c", "ab", "ab"]);
        let rx = parse_pattern("(ab|b)").unwrap();
        assert_eq!(split_tokens(&rx, "abb"), vec!["ab", "b"]);
    }

    #[test]
    fn primitive_semantics_compose() {
        // Replace every vowel with "xy".
        let src = format!(
            "(lambda (regex_flatten (regex_map (lambda (regex_if (regex_match {VOWEL_SRC} $0) \
             (regex_concat 'x' 'y') $0)) (regex_split '.' $0))))"
        );
        assert_eq!(run_word(&src, "cat"), "cxyt");
        assert_eq!(run_word(&src, "queue"), "qxyxyxyxy");
        // Prepend at the front when the word starts with a consonant.
        let src = format!(
            "(lambda (regex_if (regex_match (regex_not {VOWEL_SRC}) (regex_car (regex_split '.' $0))) \
             (regex_flatten (regex_cons 'z' (regex_split '.' $0))) $0))"
        );
        assert_eq!(run_word(&src, "cat"), "zcat");
        assert_eq!(run_word(&src, "ant"), "ant");
        // Append at the end when the word ends with "t".
        let src = "(lambda (regex_if (regex_match 't' (regex_tail (regex_split '.' $0))) \
                    (regex_flatten (regex_append 's' (regex_split '.' $0))) $0))";
        assert_eq!(run_word(src, "cat"), "cats");
        assert_eq!(run_word(src, "dog"), "dog");
    }

    #[test]
    fn vowel_expression_has_the_frozen_size() {
        assert_eq!(vowel_expr().size(), 17);
    }

    #[test]
    fn list_edge_cases_error_or_stay_total() {
        let lib = library();
        let car_empty = expr::parse("(regex_car (regex_cdr (regex_split '.' 'a')))", &lib).unwrap();
        assert!(matches!(
            evaluate(&lib, &car_empty, &[], DEFAULT_STEP_BUDGET),
            Err(EvalError::Runtime(_))
        ));
        let cdr_empty = expr::parse(
            "(regex_flatten (regex_cdr (regex_cdr (regex_split '.' 'a'))))",
            &lib,
        )
        .unwrap();
        assert_eq!(
            evaluate(&lib, &cdr_empty, &[], DEFAULT_STEP_BUDGET),
            Ok(Value::Str(String::new()))
        );
    }

    #[test]
    fn generation_is_deterministic_and_well_formed() {
        let fams = template_families();
        let a = generate_corpus(&fams, 11, 8, 4);
        let b = generate_corpus(&fams, 11, 8, 4);
        assert_eq!(
            crate::task::write_tasks_jsonl(&a.train),
            crate::task::write_tasks_jsonl(&b.train)
        );
        let c = generate_corpus(&fams, 12, 8, 4);
        assert_ne!(
            crate::task::write_tasks_jsonl(&a.train),
            crate::task::write_tasks_jsonl(&c.train)
        );
        assert_eq!(a.train.len(), 8);
        assert_eq!(a.test.len(), 4);
        assert_eq!(a.ground_truth.len(), 12);
        // The guaranteed head instances cover every family with the vowel.
        let vowel_tasks = a
            .train
            .iter()
            .filter(|t| t.description.contains("vowel"))
            .count();
        assert!(vowel_tasks >= 6, "expected the vowel head tasks, got {vowel_tasks}");
    }

    #[test]
    #[ignore = "rewrites the bundled corpus fixtures in assets/stringrw"]
    fn regenerate_bundled_corpus() {
        let corpus = generate_corpus(&template_families(), BUNDLED_SEED, 50, 30);
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/stringrw");
        std::fs::create_dir_all(dir).unwrap();
        std::fs::write(
            format!("{dir}/train.jsonl"),
            crate::task::write_tasks_jsonl(&corpus.train),
        )
        .unwrap();
        std::fs::write(
            format!("{dir}/test.jsonl"),
            crate::task::write_tasks_jsonl(&corpus.test),
        )
        .unwrap();
        std::fs::write(
            format!("{dir}/ground_truth.jsonl"),
            super::super::write_ground_truth_jsonl(&corpus.ground_truth),
        )
        .unwrap();
    }

    #[test]
    fn bundled_corpus_matches_its_seed() {
        let corpus = generate_corpus(&template_families(), BUNDLED_SEED, 50, 30);
        assert_eq!(
            crate::task::write_tasks_jsonl(&corpus.train),
            include_str!("../../assets/stringrw/train.jsonl")
        );
        assert_eq!(
            crate::task::write_tasks_jsonl(&corpus.test),
            include_str!("../../assets/stringrw/test.jsonl")
        );
    }
}
