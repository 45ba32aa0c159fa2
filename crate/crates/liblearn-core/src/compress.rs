//! Corpus compression: top-down branch-and-bound search for the reusable
//! pattern that most reduces total description length, plus the rewriting
//! machinery that folds accepted patterns back into the corpus.

use std::collections::{BTreeMap, BinaryHeap};

use crate::expr::{self, Expr};
use crate::library::Library;

/// A pattern body over `MetaVar` slots `#0..#arity-1`, numbered by first
/// occurrence in preorder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub body: Expr,
    pub arity: usize,
}

impl Pattern {
    /// Wraps slots into leading binders, outermost slot first: `#s` at
    /// internal lambda depth `d` becomes `$(d + arity - 1 - s)`.
    pub fn to_abstraction_body(&self) -> Expr {
        fn go(e: &Expr, depth: usize, arity: usize) -> Expr {
            match e {
                Expr::MetaVar(s) => Expr::Var(depth + (arity - 1 - s)),
                Expr::Var(_) | Expr::Prim(_) => e.clone(),
                Expr::Lam(b) => Expr::lam(go(b, depth + 1, arity)),
                Expr::App(f, x) => Expr::app(go(f, depth, arity), go(x, depth, arity)),
            }
        }
        let mut body = go(&self.body, 0, self.arity);
        for _ in 0..self.arity {
            body = Expr::lam(body);
        }
        body
    }

    /// Inverts [`Pattern::to_abstraction_body`]: strips leading binders and
    /// turns references to them into slots. Returns `None` for open bodies.
    pub fn from_abstraction_body(body: &Expr) -> Option<Pattern> {
        let mut arity = 0;
        let mut cursor = body;
        while let Expr::Lam(inner) = cursor {
            arity += 1;
            cursor = inner;
        }
        fn go(e: &Expr, depth: usize, arity: usize) -> Option<Expr> {
            match e {
                Expr::Var(v) => {
                    if *v < depth {
                        Some(Expr::Var(*v))
                    } else {
                        let leading = v - depth;
                        if leading < arity {
                            Some(Expr::MetaVar(arity - 1 - leading))
                        } else {
                            None
                        }
                    }
                }
                Expr::Prim(_) => Some(e.clone()),
                Expr::MetaVar(_) => None,
                Expr::Lam(b) => Some(Expr::lam(go(b, depth + 1, arity)?)),
                Expr::App(f, x) => Some(Expr::app(go(f, depth, arity)?, go(x, depth, arity)?)),
            }
        }
        Some(Pattern {
            body: go(cursor, 0, arity)?,
            arity,
        })
    }

    pub fn print(&self) -> String {
        expr::print_pattern(&self.body)
    }
}

/// One occurrence of a pattern: the root path within a program plus the
/// subtrees bound to each slot.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSite {
    pub program: usize,
    pub path: Vec<usize>,
    pub bindings: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionCandidate {
    pub pattern: Pattern,
    /// Outer (non-overlapping) sites in the corpus it was extracted from.
    pub sites: usize,
    /// Exact change in Eq.-4-style description length:
    /// `corpus_before - (corpus_after + size(pattern.body))`.
    pub utility: i64,
    pub corpus_before: usize,
    pub corpus_after: usize,
    /// The fn_k name the abstraction gets on registration; set by compress.
    pub anon_name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CompressionConfig {
    /// Maximum abstractions extracted per compression call.
    pub iterations: usize,
    pub max_arity: usize,
    /// Minimum outer match sites for a pattern to be acceptable.
    pub min_sites: usize,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        CompressionConfig {
            iterations: 10,
            max_arity: 3,
            min_sites: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompressionOutcome {
    /// Closed Lam-term per accepted abstraction, outermost slot first,
    /// ordered for registration as fn_0, fn_1, ...
    pub bodies: Vec<Expr>,
    /// The corpus after all rewrites, calling the abstractions by fn_k name.
    pub rewritten: Vec<Expr>,
    pub accepted: Vec<CompressionCandidate>,
    pub ratio: f64,
}

/// Structurally matches `pattern.body` against `t`. Slot bindings must be
/// closed subtrees (no variable may cross the binding boundary) and repeated
/// slots must bind equal subtrees. Requires every slot to occur.
pub fn match_at(pattern: &Pattern, t: &Expr) -> Option<Vec<Expr>> {
    let mut bindings: Vec<Option<Expr>> = vec![None; pattern.arity];
    fn go(p: &Expr, t: &Expr, bindings: &mut Vec<Option<Expr>>) -> bool {
        match (p, t) {
            (Expr::MetaVar(s), _) => {
                if !t.is_closed() {
                    return false;
                }
                match &bindings[*s] {
                    Some(existing) => existing == t,
                    None => {
                        bindings[*s] = Some(t.clone());
                        true
                    }
                }
            }
            (Expr::Prim(a), Expr::Prim(b)) => a == b,
            (Expr::Var(a), Expr::Var(b)) => a == b,
            (Expr::Lam(a), Expr::Lam(b)) => go(a, b, bindings),
            (Expr::App(f1, x1), Expr::App(f2, x2)) => {
                go(f1, f2, bindings) && go(x1, x2, bindings)
            }
            _ => false,
        }
    }
    if !go(&pattern.body, t, &mut bindings) {
        return None;
    }
    bindings.into_iter().collect()
}

/// All maximal occurrences, outer-first: once a node matches, its descendants
/// (including slot bindings) are not scanned further.
pub fn match_sites(pattern: &Pattern, corpus: &[Expr]) -> Vec<MatchSite> {
    let mut sites = Vec::new();
    fn scan(
        pattern: &Pattern,
        e: &Expr,
        program: usize,
        path: &mut Vec<usize>,
        sites: &mut Vec<MatchSite>,
    ) {
        if let Some(bindings) = match_at(pattern, e) {
            sites.push(MatchSite {
                program,
                path: path.clone(),
                bindings,
            });
            return;
        }
        match e {
            Expr::Lam(b) => {
                path.push(0);
                scan(pattern, b, program, path, sites);
                path.pop();
            }
            Expr::App(f, x) => {
                path.push(0);
                scan(pattern, f, program, path, sites);
                path.pop();
                path.push(1);
                scan(pattern, x, program, path, sites);
                path.pop();
            }
            _ => {}
        }
    }
    for (idx, program) in corpus.iter().enumerate() {
        let mut path = Vec::new();
        scan(pattern, program, idx, &mut path, &mut sites);
    }
    sites
}

struct Matcher {
    display: String,
    pattern: Pattern,
}

fn matchers_for(lib: &Library) -> Vec<Matcher> {
    lib.abstractions
        .iter()
        .filter_map(|abs| {
            let pattern = Pattern::from_abstraction_body(&abs.body)?;
            // A bare-slot pattern matches everything; rewriting with it
            // would never terminate and never helps.
            if matches!(pattern.body, Expr::MetaVar(_)) {
                return None;
            }
            Some(Matcher {
                display: abs.display_name().to_owned(),
                pattern,
            })
        })
        .collect()
}

fn call_site(display: &str, bindings: Vec<Expr>) -> Expr {
    Expr::apply(Expr::prim(display), bindings)
}

/// Earlier-registered matchers win ties; larger local saving wins otherwise.
/// Only strictly shrinking matches are applied: a call no smaller than the
/// site would inflate the corpus, and the strict decrease is what guarantees
/// rewriting terminates.
fn best_match<'m>(matchers: &'m [Matcher], e: &Expr) -> Option<(&'m Matcher, Vec<Expr>)> {
    let mut best: Option<(&Matcher, Vec<Expr>, i64)> = None;
    for m in matchers {
        if let Some(bindings) = match_at(&m.pattern, e) {
            let call = 1 + 2 * bindings.len() as i64
                + bindings.iter().map(|b| b.size() as i64 - 1).sum::<i64>();
            let saving = e.size() as i64 - call;
            if saving > 0 && best.as_ref().is_none_or(|(_, _, s)| saving > *s) {
                best = Some((m, bindings, saving));
            }
        }
    }
    best.map(|(m, b, _)| (m, b))
}

const REWRITE_NODE_GUARD: usize = 32;

fn rewrite_node(matchers: &[Matcher], e: &Expr) -> Expr {
    let mut current = e.clone();
    // Outer-first: a match at this node takes precedence over matches inside
    // it; bindings are then rewritten recursively. Rewriting children can
    // enable a match here, so re-check until stable.
    for _ in 0..REWRITE_NODE_GUARD {
        if let Some((m, bindings)) = best_match(matchers, &current) {
            let args: Vec<Expr> = bindings
                .iter()
                .map(|b| rewrite_node(matchers, b))
                .collect();
            let next = call_site(&m.display, args);
            if next == current {
                return current;
            }
            current = next;
            continue;
        }
        let rebuilt = match &current {
            Expr::Lam(b) => Expr::lam(rewrite_node(matchers, b)),
            Expr::App(f, x) => {
                Expr::app(rewrite_node(matchers, f), rewrite_node(matchers, x))
            }
            leaf => leaf.clone(),
        };
        if rebuilt == current {
            return current;
        }
        current = rebuilt;
    }
    current
}

/// Replaces every match of every usable library abstraction, greedy and
/// outer-first. The result is a fixed point: rewriting again changes nothing.
pub fn rewrite(lib: &Library, programs: &[Expr]) -> Vec<Expr> {
    let matchers = matchers_for(lib);
    programs
        .iter()
        .map(|p| rewrite_node(&matchers, p))
        .collect()
}

/// Total corpus size before over after; 1.0 for an empty corpus.
pub fn compression_ratio(before: &[Expr], after: &[Expr]) -> f64 {
    let b: usize = before.iter().map(Expr::size).sum();
    let a: usize = after.iter().map(Expr::size).sum();
    if a == 0 {
        return 1.0;
    }
    b as f64 / a as f64
}

/// A call-head name that appears nowhere in the corpus, so rewritten sites
/// can never re-match.
fn fresh_head(corpus: &[Expr]) -> String {
    let mut used = std::collections::BTreeSet::new();
    for p in corpus {
        used.extend(p.referenced_prims());
    }
    let mut name = "candidate".to_owned();
    while used.contains(&name) {
        name.push('_');
    }
    name
}

/// Measures the exact utility of adopting `pattern` alone: the corpus-size
/// reduction under a full rewrite, minus the pattern body size.
fn measure_candidate(
    pattern: &Pattern,
    corpus: &[Expr],
    min_sites: usize,
    head: &str,
) -> Option<CompressionCandidate> {
    // A bare slot matches everything and rewrites to a call around itself.
    if matches!(pattern.body, Expr::MetaVar(_)) {
        return None;
    }
    let sites = match_sites(pattern, corpus).len();
    if sites < min_sites {
        return None;
    }
    let matcher = [Matcher {
        display: head.to_owned(),
        pattern: pattern.clone(),
    }];
    let before: usize = corpus.iter().map(Expr::size).sum();
    let after: usize = corpus
        .iter()
        .map(|p| rewrite_node(&matcher, p).size())
        .sum();
    let utility = before as i64 - after as i64 - pattern.body.size() as i64;
    Some(CompressionCandidate {
        pattern: pattern.clone(),
        sites,
        utility,
        corpus_before: before,
        corpus_after: after,
        anon_name: None,
    })
}

mod arena {
    use super::Expr;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Kind {
        Prim(u32),
        Var(u32),
        Lam(u32),
        App(u32, u32),
    }

    #[derive(Debug)]
    pub struct Node {
        pub kind: Kind,
        pub size: u32,
        pub free_reach: u32,
        pub hash: u64,
    }

    /// Flattened corpus: nodes across all programs share one arena so that
    /// binding equality checks work across programs.
    #[derive(Debug, Default)]
    pub struct Corpus {
        pub nodes: Vec<Node>,
        pub syms: Vec<String>,
        pub roots: Vec<u32>,
    }

    impl Corpus {
        pub fn build(programs: &[Expr]) -> Corpus {
            let mut corpus = Corpus::default();
            for p in programs {
                let root = corpus.add(p);
                corpus.roots.push(root);
            }
            corpus
        }

        fn sym(&mut self, name: &str) -> u32 {
            if let Some(i) = self.syms.iter().position(|s| s == name) {
                return i as u32;
            }
            self.syms.push(name.to_owned());
            (self.syms.len() - 1) as u32
        }

        fn add(&mut self, e: &Expr) -> u32 {
            let (kind, size, free_reach, hash) = match e {
                Expr::Prim(name) => {
                    let s = self.sym(name);
                    (Kind::Prim(s), 1, 0, mix(1, s as u64, 0))
                }
                Expr::Var(i) => (Kind::Var(*i as u32), 1, *i as u32 + 1, mix(2, *i as u64, 0)),
                Expr::MetaVar(_) => unreachable!("corpus programs never contain MetaVars"),
                Expr::Lam(b) => {
                    let c = self.add(b);
                    let n = &self.nodes[c as usize];
                    (
                        Kind::Lam(c),
                        1 + n.size,
                        n.free_reach.saturating_sub(1),
                        mix(3, n.hash, 0),
                    )
                }
                Expr::App(f, x) => {
                    let cf = self.add(f);
                    let cx = self.add(x);
                    let (nf, nx) = (&self.nodes[cf as usize], &self.nodes[cx as usize]);
                    (
                        Kind::App(cf, cx),
                        1 + nf.size + nx.size,
                        nf.free_reach.max(nx.free_reach),
                        mix(4, nf.hash, nx.hash),
                    )
                }
            };
            self.nodes.push(Node {
                kind,
                size,
                free_reach,
                hash,
            });
            (self.nodes.len() - 1) as u32
        }

        pub fn node(&self, id: u32) -> &Node {
            &self.nodes[id as usize]
        }

        /// Child lookup along a pattern-relative path.
        pub fn node_at(&self, root: u32, path: &[u8]) -> u32 {
            let mut id = root;
            for step in path {
                id = match self.node(id).kind {
                    Kind::Lam(c) => c,
                    Kind::App(f, x) => {
                        if *step == 0 {
                            f
                        } else {
                            x
                        }
                    }
                    _ => unreachable!("path leads through a leaf"),
                };
            }
            id
        }

        pub fn eq(&self, a: u32, b: u32) -> bool {
            if a == b {
                return true;
            }
            let (na, nb) = (self.node(a), self.node(b));
            if na.hash != nb.hash || na.size != nb.size {
                return false;
            }
            match (na.kind, nb.kind) {
                (Kind::Prim(x), Kind::Prim(y)) => x == y,
                (Kind::Var(x), Kind::Var(y)) => x == y,
                (Kind::Lam(x), Kind::Lam(y)) => self.eq(x, y),
                (Kind::App(f1, x1), Kind::App(f2, x2)) => self.eq(f1, f2) && self.eq(x1, x2),
                _ => false,
            }
        }

    }

    fn mix(tag: u64, a: u64, b: u64) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64 ^ tag.wrapping_mul(0x1000_0000_01b3);
        for v in [a, b] {
            h ^= v;
            h = h.wrapping_mul(0x1000_0000_01b3);
            h = h.rotate_left(27);
        }
        h
    }
}

/// Pattern under construction: `Hole`s await expansion, `Slot`s are final.
#[derive(Debug, Clone, PartialEq, Eq)]
enum PExpr {
    Hole(usize),
    Slot(usize),
    Prim(String),
    Var(usize),
    Lam(Box<PExpr>),
    App(Box<PExpr>, Box<PExpr>),
}

impl PExpr {
    fn fill_hole(&self, id: usize, value: &PExpr) -> PExpr {
        match self {
            PExpr::Hole(h) if *h == id => value.clone(),
            PExpr::Hole(_) | PExpr::Slot(_) | PExpr::Prim(_) | PExpr::Var(_) => self.clone(),
            PExpr::Lam(b) => PExpr::Lam(Box::new(b.fill_hole(id, value))),
            PExpr::App(f, x) => Box::new(f.fill_hole(id, value))
                .pipe(|f| PExpr::App(f, Box::new(x.fill_hole(id, value)))),
        }
    }

    fn to_pattern_body(&self) -> Expr {
        match self {
            PExpr::Hole(_) => unreachable!("finished patterns have no holes"),
            PExpr::Slot(s) => Expr::MetaVar(*s),
            PExpr::Prim(name) => Expr::prim(name.clone()),
            PExpr::Var(i) => Expr::Var(*i),
            PExpr::Lam(b) => Expr::lam(b.to_pattern_body()),
            PExpr::App(f, x) => Expr::app(f.to_pattern_body(), x.to_pattern_body()),
        }
    }
}

trait Pipe: Sized {
    fn pipe<T>(self, f: impl FnOnce(Self) -> T) -> T {
        f(self)
    }
}
impl<T> Pipe for T {}

#[derive(Debug, Clone)]
struct SearchHole {
    id: usize,
    path: Vec<u8>,
    lam_depth: u32,
}

#[derive(Debug, Clone)]
struct LocState {
    root: u32,
    /// Arena node bound to each slot at this location.
    bindings: Vec<u32>,
}

#[derive(Debug)]
struct SearchItem {
    pat: PExpr,
    holes: std::collections::VecDeque<SearchHole>,
    locs: Vec<LocState>,
    slots: usize,
    next_hole: usize,
    bound: i64,
    seq: u64,
}

impl PartialEq for SearchItem {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl Eq for SearchItem {}
impl PartialOrd for SearchItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for SearchItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bound
            .cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum GroupKey {
    Prim(String),
    Var(u32),
    App,
    Lam,
}

/// The single pattern with maximal utility over the corpus: top-down
/// branch-and-bound, starting from a bare hole matched at every closed
/// subtree and expanding one hole at a time with either a concrete
/// production or a (possibly reused) slot. The admissible bound at a node is
/// the sum over surviving locations of `subtree size - 1`.
pub fn best_abstraction(programs: &[Expr], cfg: &CompressionConfig) -> Option<CompressionCandidate> {
    let corpus = arena::Corpus::build(programs);
    let head = fresh_head(programs);
    // Sites are whole subtrees; only closed ones can ever match validly.
    let mut all_locs = Vec::new();
    for id in 0..corpus.nodes.len() as u32 {
        if corpus.node(id).free_reach == 0 {
            all_locs.push(LocState {
                root: id,
                bindings: Vec::new(),
            });
        }
    }
    if all_locs.len() < cfg.min_sites {
        return None;
    }

    let bound_of = |locs: &[LocState]| -> i64 {
        locs.iter()
            .map(|l| corpus.node(l.root).size as i64 - 1)
            .sum()
    };

    let mut heap: BinaryHeap<SearchItem> = BinaryHeap::new();
    let mut seq = 0u64;
    let root_bound = bound_of(&all_locs);
    heap.push(SearchItem {
        pat: PExpr::Hole(0),
        holes: std::collections::VecDeque::from(vec![SearchHole {
            id: 0,
            path: Vec::new(),
            lam_depth: 0,
        }]),
        locs: all_locs,
        slots: 0,
        next_hole: 1,
        bound: root_bound,
        seq,
    });

    let mut best: Option<CompressionCandidate> = None;
    let floor = |best: &Option<CompressionCandidate>| best.as_ref().map_or(0, |b| b.utility);
    // An item whose bound sits exactly at the floor can still produce an
    // equal-utility pattern that wins the print tie-break, so only items
    // strictly below the floor (or at an empty floor) are hopeless.
    let prunable = |bound: i64, best: &Option<CompressionCandidate>| {
        bound < floor(best) || (bound == floor(best) && best.is_none())
    };

    while let Some(item) = heap.pop() {
        if prunable(item.bound, &best) {
            // Heap is ordered by bound, so nothing below can do better.
            break;
        }
        let mut item = item;
        let Some(hole) = item.holes.pop_front() else {
            // Finished pattern: measure exactly.
            let pattern = Pattern {
                body: item.pat.to_pattern_body(),
                arity: item.slots,
            };
            if let Some(cand) = measure_candidate(&pattern, programs, cfg.min_sites, &head) {
                let better = cand.utility > floor(&best)
                    || (Some(cand.utility) == best.as_ref().map(|b| b.utility)
                        && best
                            .as_ref()
                            .is_some_and(|b| cand.pattern.print() < b.pattern.print()));
                if cand.utility > 0 && better {
                    best = Some(cand);
                }
            }
            continue;
        };

        // Group locations by the head shape at the hole position.
        let mut groups: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
        for (i, loc) in item.locs.iter().enumerate() {
            let node = corpus.node_at(loc.root, &hole.path);
            let key = match corpus.node(node).kind {
                arena::Kind::Prim(s) => GroupKey::Prim(corpus.syms[s as usize].clone()),
                arena::Kind::Var(v) => GroupKey::Var(v),
                arena::Kind::App(_, _) => GroupKey::App,
                arena::Kind::Lam(_) => GroupKey::Lam,
            };
            groups.entry(key).or_default().push(i);
        }

        let mut push_child =
            |pat: PExpr,
             holes: std::collections::VecDeque<SearchHole>,
             locs: Vec<LocState>,
             slots: usize,
             next_hole: usize,
             heap: &mut BinaryHeap<SearchItem>| {
                if locs.len() < cfg.min_sites {
                    return;
                }
                let bound = bound_of(&locs);
                if prunable(bound, &best) {
                    return;
                }
                seq += 1;
                heap.push(SearchItem {
                    pat,
                    holes,
                    locs,
                    slots,
                    next_hole,
                    bound,
                    seq,
                });
            };

        for (key, loc_indices) in &groups {
            let locs: Vec<LocState> = loc_indices.iter().map(|&i| item.locs[i].clone()).collect();
            match key {
                GroupKey::Prim(name) => {
                    let pat = item.pat.fill_hole(hole.id, &PExpr::Prim(name.clone()));
                    push_child(pat, item.holes.clone(), locs, item.slots, item.next_hole, &mut heap);
                }
                GroupKey::Var(v) => {
                    // Concrete variables must reference a pattern-internal binder.
                    if *v < hole.lam_depth {
                        let pat = item.pat.fill_hole(hole.id, &PExpr::Var(*v as usize));
                        push_child(pat, item.holes.clone(), locs, item.slots, item.next_hole, &mut heap);
                    }
                }
                GroupKey::App => {
                    let (a, b) = (item.next_hole, item.next_hole + 1);
                    let pat = item.pat.fill_hole(
                        hole.id,
                        &PExpr::App(Box::new(PExpr::Hole(a)), Box::new(PExpr::Hole(b))),
                    );
                    let mut holes = item.holes.clone();
                    let mut path_b = hole.path.clone();
                    path_b.push(1);
                    holes.push_front(SearchHole {
                        id: b,
                        path: path_b,
                        lam_depth: hole.lam_depth,
                    });
                    let mut path_a = hole.path.clone();
                    path_a.push(0);
                    holes.push_front(SearchHole {
                        id: a,
                        path: path_a,
                        lam_depth: hole.lam_depth,
                    });
                    push_child(pat, holes, locs, item.slots, item.next_hole + 2, &mut heap);
                }
                GroupKey::Lam => {
                    let a = item.next_hole;
                    let pat = item
                        .pat
                        .fill_hole(hole.id, &PExpr::Lam(Box::new(PExpr::Hole(a))));
                    let mut holes = item.holes.clone();
                    let mut path = hole.path.clone();
                    path.push(0);
                    holes.push_front(SearchHole {
                        id: a,
                        path,
                        lam_depth: hole.lam_depth + 1,
                    });
                    push_child(pat, holes, locs, item.slots, item.next_hole + 1, &mut heap);
                }
            }
        }

        // Reuse an existing slot where the subtree equals its binding.
        for slot in 0..item.slots {
            let locs: Vec<LocState> = item
                .locs
                .iter()
                .filter(|loc| {
                    let node = corpus.node_at(loc.root, &hole.path);
                    corpus.eq(loc.bindings[slot], node)
                })
                .cloned()
                .collect();
            let pat = item.pat.fill_hole(hole.id, &PExpr::Slot(slot));
            push_child(pat, item.holes.clone(), locs, item.slots, item.next_hole, &mut heap);
        }

        // Open a fresh slot over closed subtrees.
        if item.slots < cfg.max_arity {
            let locs: Vec<LocState> = item
                .locs
                .iter()
                .filter_map(|loc| {
                    let node = corpus.node_at(loc.root, &hole.path);
                    if corpus.node(node).free_reach == 0 {
                        let mut bindings = loc.bindings.clone();
                        bindings.push(node);
                        Some(LocState {
                            root: loc.root,
                            bindings,
                        })
                    } else {
                        None
                    }
                })
                .collect();
            let pat = item.pat.fill_hole(hole.id, &PExpr::Slot(item.slots));
            push_child(pat, item.holes.clone(), locs, item.slots + 1, item.next_hole, &mut heap);
        }
    }

    best
}

/// Repeatedly extracts the best abstraction and rewrites the corpus, until no
/// pattern has positive utility or the iteration cap hits. Purely syntactic:
/// the rewritten corpus calls each abstraction as fn_0, fn_1, ... in
/// extraction order, matching what register_abstractions would assign when
/// the bodies are added to a bare base library. Later abstractions may call
/// earlier ones through the rewritten corpus.
pub fn compress(programs: &[Expr], cfg: &CompressionConfig) -> CompressionOutcome {
    let mut corpus: Vec<Expr> = programs.to_vec();
    let mut accepted = Vec::new();
    let mut bodies = Vec::new();
    let mut matchers: Vec<Matcher> = Vec::new();
    for _ in 0..cfg.iterations {
        let Some(mut cand) = best_abstraction(&corpus, cfg) else {
            break;
        };
        if cand.utility <= 0 {
            break;
        }
        let name = format!("fn_{}", matchers.len());
        cand.anon_name = Some(name.clone());
        bodies.push(cand.pattern.to_abstraction_body());
        matchers.push(Matcher {
            display: name,
            pattern: cand.pattern.clone(),
        });
        corpus = corpus.iter().map(|p| rewrite_node(&matchers, p)).collect();
        accepted.push(cand);
    }
    let ratio = compression_ratio(programs, &corpus);
    CompressionOutcome {
        bodies,
        rewritten: corpus,
        accepted,
        ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    fn pair_lib() -> Library {
        Library::new("pair")
            .with_primitive("+", "tint -> tint -> tint", None, |_, _| Ok(Value::Int(0)))
            .with_primitive("a", "tint", None, |_, _| Ok(Value::Int(0)))
            .with_primitive("b", "tint", None, |_, _| Ok(Value::Int(0)))
    }

    fn parse_corpus(lib: &Library, srcs: &[&str]) -> Vec<Expr> {
        srcs.iter().map(|s| expr::parse(s, lib).unwrap()).collect()
    }

    #[test]
    fn worked_example_extracts_the_shared_shape() {
        let lib = pair_lib();
        let corpus = parse_corpus(&lib, &["(+ a (+ a a))", "(+ b (+ b b))"]);
        let cand = best_abstraction(&corpus, &CompressionConfig::default()).unwrap();
        assert_eq!(cand.pattern.print(), "(+ #0 (+ #0 #0))");
        assert_eq!(cand.pattern.arity, 1);
        assert_eq!(cand.sites, 2);
        assert_eq!(cand.corpus_before, 18);
        assert_eq!(cand.corpus_after, 6);
        assert_eq!(cand.utility, 3);
        assert_eq!(
            cand.utility,
            cand.corpus_before as i64
                - (cand.corpus_after as i64 + cand.pattern.body.size() as i64)
        );

        let out = compress(&corpus, &CompressionConfig::default());
        assert_eq!(out.accepted.len(), 1);
        assert_eq!(out.accepted[0].anon_name.as_deref(), Some("fn_0"));
        assert_eq!(
            expr::print(&out.bodies[0]).unwrap(),
            "(lambda (+ $0 (+ $0 $0)))"
        );
        let prints: Vec<String> = out.rewritten.iter().map(expr::print_pattern).collect();
        assert_eq!(prints, vec!["(fn_0 a)", "(fn_0 b)"]);
        assert!((out.ratio - 3.0).abs() < 1e-12);

        // Registering the bodies in order reproduces the fn_k naming and the
        // abstraction type-checks against the base primitives.
        let mut lib = pair_lib();
        let names = lib.register_abstractions(&out.bodies).unwrap();
        assert_eq!(names, vec!["fn_0"]);
        let abs = lib.abstraction("fn_0").unwrap();
        assert_eq!(expr::print(&abs.body).unwrap(), "(lambda (+ $0 (+ $0 $0)))");
        assert_eq!(rewrite(&lib, &corpus), out.rewritten);
    }

    #[test]
    fn pattern_body_round_trips_through_abstraction_form() {
        let pattern = Pattern {
            body: Expr::apply(
                Expr::prim("+"),
                vec![Expr::MetaVar(0), Expr::apply(Expr::prim("+"), vec![Expr::MetaVar(1), Expr::MetaVar(0)])],
            ),
            arity: 2,
        };
        let body = pattern.to_abstraction_body();
        assert_eq!(expr::print(&body).unwrap(), "(lambda (lambda (+ $1 (+ $0 $1))))");
        assert_eq!(Pattern::from_abstraction_body(&body).unwrap(), pattern);
        // Open bodies cannot become patterns.
        assert_eq!(Pattern::from_abstraction_body(&Expr::lam(Expr::Var(5))), None);
    }

    #[test]
    fn matching_is_outer_first_and_respects_closure() {
        let lib = pair_lib();
        let pattern = Pattern {
            body: Expr::apply(Expr::prim("+"), vec![Expr::MetaVar(0), Expr::MetaVar(0)]),
            arity: 1,
        };
        let corpus = parse_corpus(&lib, &["(+ (+ a a) (+ a a))"]);
        let sites = match_sites(&pattern, &corpus);
        assert_eq!(sites.len(), 1, "outer match shadows inner ones");
        assert_eq!(sites[0].path, Vec::<usize>::new());
        assert_eq!(expr::print_pattern(&sites[0].bindings[0]), "(+ a a)");
        // A slot may not capture a variable bound outside the site.
        let open = Expr::apply(Expr::prim("+"), vec![Expr::Var(0), Expr::Var(0)]);
        assert_eq!(match_at(&pattern, &open), None);
        // Repeated slots demand equal bindings.
        let unequal = parse_corpus(&lib, &["(+ a b)"]);
        assert_eq!(match_sites(&pattern, &unequal).len(), 0);
    }

    #[test]
    fn unused_slots_block_matching() {
        let body = expr::parse("(lambda (lambda (+ $1 $1)))", &pair_lib()).unwrap();
        let pattern = Pattern::from_abstraction_body(&body).unwrap();
        assert_eq!(pattern.arity, 2);
        let target = expr::parse("(+ a a)", &pair_lib()).unwrap();
        assert_eq!(match_at(&pattern, &target), None);
    }

    #[test]
    fn rewrite_reaches_sites_enabled_by_child_rewrites() {
        let mut lib = pair_lib();
        lib.register_abstractions(&[expr::parse("(lambda (+ $0 $0))", &lib).unwrap()])
            .unwrap();
        lib.register_abstractions(&[expr::parse("(lambda (+ (fn_0 $0) a))", &lib).unwrap()])
            .unwrap();
        let program = expr::parse("(+ (+ b b) a)", &lib).unwrap();
        let rewritten = rewrite(&lib, &[program]);
        assert_eq!(expr::print_pattern(&rewritten[0]), "(fn_1 b)");
        assert_eq!(rewrite(&lib, &rewritten), rewritten, "idempotent");
    }

    #[test]
    fn compression_chains_account_exactly() {
        for seed in 0..25u64 {
            let corpus = crate::oracle::random_corpus(seed);
            let out = compress(&corpus, &CompressionConfig::default());
            let before: usize = corpus.iter().map(Expr::size).sum();
            let after: usize = out.rewritten.iter().map(Expr::size).sum();
            if let Some(first) = out.accepted.first() {
                assert_eq!(first.corpus_before, before, "seed {seed}");
            }
            if let Some(last) = out.accepted.last() {
                assert_eq!(last.corpus_after, after, "seed {seed}");
            }
            for pair in out.accepted.windows(2) {
                assert_eq!(pair[0].corpus_after, pair[1].corpus_before, "seed {seed}");
            }
            for cand in &out.accepted {
                assert!(cand.utility > 0);
                assert!(cand.sites >= 2);
                assert_eq!(
                    cand.utility,
                    cand.corpus_before as i64
                        - (cand.corpus_after as i64 + cand.pattern.body.size() as i64),
                    "seed {seed}"
                );
            }
            // The rewritten corpus is a fixed point of its own matchers.
            let matchers: Vec<Matcher> = out
                .accepted
                .iter()
                .map(|c| Matcher {
                    display: c.anon_name.clone().unwrap(),
                    pattern: c.pattern.clone(),
                })
                .collect();
            let again: Vec<Expr> = out
                .rewritten
                .iter()
                .map(|p| rewrite_node(&matchers, p))
                .collect();
            assert_eq!(again, out.rewritten, "seed {seed}");
        }
    }

    #[test]
    fn agrees_with_the_bruteforce_oracle() {
        let cfg = CompressionConfig::default();
        for seed in 100..140u64 {
            let corpus = crate::oracle::random_corpus(seed);
            let mine = best_abstraction(&corpus, &cfg);
            let orc = crate::oracle::oracle_best_abstraction(&corpus, cfg.max_arity, cfg.min_sites);
            match (&mine, &orc) {
                (None, None) => {}
                (Some(m), Some(o)) => {
                    assert_eq!(m.utility, o.utility, "seed {seed}");
                    assert_eq!(m.pattern.print(), o.pattern, "seed {seed}");
                    assert_eq!(m.sites, o.sites, "seed {seed}");
                }
                _ => panic!("seed {seed}: {mine:?} vs {orc:?}"),
            }
        }
    }

    #[test]
    fn empty_and_incompressible_corpora_yield_nothing() {
        assert_eq!(compression_ratio(&[], &[]), 1.0);
        let lib = pair_lib();
        let corpus = parse_corpus(&lib, &["a", "b"]);
        assert_eq!(best_abstraction(&corpus, &CompressionConfig::default()), None);
        let out = compress(&corpus, &CompressionConfig::default());
        assert!(out.accepted.is_empty() && out.bodies.is_empty());
        assert_eq!(out.rewritten, corpus);
        assert!((out.ratio - 1.0).abs() < 1e-12);
    }
}
