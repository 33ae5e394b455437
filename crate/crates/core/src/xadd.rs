//! Extended algebraic decision diagrams.
//!
//! An [`XaddStore`] owns every node. Internal nodes test a [`Decision`]
//! (a boolean variable or a normalized polynomial inequality) and terminals
//! hold a [`Polynomial`]. The store keeps diagrams ordered (decision ranks
//! strictly increase from root to leaves), reduced (no node with equal
//! children) and hash-consed (one node per structural key), so equal
//! structure means equal [`NodeRef`].
//!
//! Operations that can break the order (substitution into decisions,
//! comparison of leaves under `max`/`min`) rebuild with
//! `reorder(high) ⊗ I[d] ⊕ reorder(low) ⊗ I[¬d]`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use indexmap::IndexSet;
use num_traits::{One, Signed, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::domlang::{self, ParseError};
use crate::poly::{check_disjoint, rat, Decision, Folded, PolyError, Polynomial, Rational};
use crate::prune::{strictly_feasible, ConstraintSet};
use crate::vars::{Assignment, State, VarId, VarKind, Vocab};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef(u32);

impl NodeRef {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense index of a registered decision; stable for the store's lifetime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DecisionId(u32);

impl DecisionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Terminal(Polynomial),
    Internal {
        decision: DecisionId,
        high: NodeRef,
        low: NodeRef,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Max,
    Min,
}

impl Op {
    fn commutative(self) -> bool {
        !matches!(self, Op::Sub)
    }

    pub fn apply_values(self, a: &Rational, b: &Rational) -> Rational {
        match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Max => a.max(b).clone(),
            Op::Min => a.min(b).clone(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum XaddError {
    #[error("decision order violated: children must test later decisions")]
    OrderViolation,
    #[error("variable `{0}` is unassigned")]
    Unassigned(String),
    #[error("boolean variable `{0}` cannot be replaced by a polynomial")]
    BooleanToPolynomial(String),
    #[error("variable `{0}` has the wrong kind for this substitution")]
    KindMismatch(String),
    #[error("substitution is not disjoint: `{0}` is both replaced and used in a replacement")]
    Overlap(String),
    #[error("conditional equation for `{0}` tests the variable it defines")]
    CseMentionsTarget(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("case partitions overlap where {0}")]
    Overlap2(String),
    #[error("case partitions do not cover the state space where {0}")]
    NonExhaustive(String),
}

/// Owned binary decision tree used as input to [`XaddStore::reorder`], for
/// conditional stochastic equations, and as a parse result. Unlike stored
/// diagrams it may test decisions in any order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CaseTree {
    Leaf(Polynomial),
    Branch {
        decision: Decision,
        high: Box<CaseTree>,
        low: Box<CaseTree>,
    },
}

impl CaseTree {
    pub fn leaf(p: Polynomial) -> Self {
        CaseTree::Leaf(p)
    }

    pub fn branch(decision: Decision, high: CaseTree, low: CaseTree) -> Self {
        CaseTree::Branch {
            decision,
            high: Box::new(high),
            low: Box::new(low),
        }
    }

    /// Tree selecting `high` where the (possibly constant) test holds.
    pub fn test(test: Folded, high: CaseTree, low: CaseTree) -> Self {
        match test {
            Folded::Const(true) => high,
            Folded::Const(false) => low,
            Folded::Test(d, false) => Self::branch(d, high, low),
            Folded::Test(d, true) => Self::branch(d, low, high),
        }
    }

    pub fn eval<A: Assignment + ?Sized>(&self, values: &A) -> Result<Rational, PolyError> {
        let mut cur = self;
        loop {
            match cur {
                CaseTree::Leaf(p) => return p.eval(values),
                CaseTree::Branch {
                    decision,
                    high,
                    low,
                } => cur = if decision.holds(values)? { high } else { low },
            }
        }
    }

    /// The leaf reached under `values` (used to check determinism).
    pub fn leaf_at<A: Assignment + ?Sized>(&self, values: &A) -> Result<&Polynomial, PolyError> {
        let mut cur = self;
        loop {
            match cur {
                CaseTree::Leaf(p) => return Ok(p),
                CaseTree::Branch {
                    decision,
                    high,
                    low,
                } => cur = if decision.holds(values)? { high } else { low },
            }
        }
    }

    pub fn leaves(&self) -> Vec<&Polynomial> {
        let mut out = Vec::new();
        self.walk(&mut |t| {
            if let CaseTree::Leaf(p) = t {
                out.push(p);
            }
        });
        out
    }

    pub fn decisions(&self) -> Vec<&Decision> {
        let mut out = Vec::new();
        self.walk(&mut |t| {
            if let CaseTree::Branch { decision, .. } = t {
                out.push(decision);
            }
        });
        out
    }

    fn walk<'a>(&'a self, visit: &mut dyn FnMut(&'a CaseTree)) {
        visit(self);
        if let CaseTree::Branch { high, low, .. } = self {
            high.walk(visit);
            low.walk(visit);
        }
    }
}

/// Simultaneous replacement of continuous variables by polynomials and
/// renaming of boolean variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Substitution {
    pub reals: BTreeMap<VarId, Polynomial>,
    pub bools: BTreeMap<VarId, VarId>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn real(mut self, v: VarId, p: Polynomial) -> Self {
        self.reals.insert(v, p);
        self
    }

    pub fn rename_bool(mut self, from: VarId, to: VarId) -> Self {
        self.bools.insert(from, to);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.reals.is_empty() && self.bools.is_empty()
    }

    fn touches(&self, d: &Decision) -> bool {
        match d {
            Decision::Bool(v) => self.bools.contains_key(v),
            Decision::Ineq { poly, .. } => poly.vars().iter().any(|v| self.reals.contains_key(v)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct DiagramStats {
    pub nodes: usize,
    pub leaves: usize,
    pub decisions: usize,
}

#[derive(Clone, Debug, Default)]
pub struct XaddStore {
    vocab: Vocab,
    decisions: IndexSet<Decision>,
    ranks: Vec<u64>,
    nodes: Vec<Node>,
    terminals: HashMap<Polynomial, NodeRef>,
    internals: HashMap<(DecisionId, NodeRef, NodeRef), NodeRef>,
    apply_cache: HashMap<(Op, NodeRef, NodeRef), NodeRef>,
    scale_cache: HashMap<(NodeRef, Rational), NodeRef>,
    restrict_cache: HashMap<(NodeRef, DecisionId, bool), NodeRef>,
}

const INEQ_RANK_BASE: u64 = 1 << 32;

impl XaddStore {
    pub fn new(vocab: Vocab) -> Self {
        XaddStore {
            vocab,
            ..Default::default()
        }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn vocab_mut(&mut self) -> &mut Vocab {
        &mut self.vocab
    }

    pub fn node(&self, r: NodeRef) -> &Node {
        &self.nodes[r.index()]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn decision(&self, id: DecisionId) -> &Decision {
        &self.decisions[id.index()]
    }

    pub fn decision_count(&self) -> usize {
        self.decisions.len()
    }

    /// Registers a decision (idempotent). Boolean decisions rank before all
    /// inequalities, ordered by variable; inequalities rank by registration.
    pub fn decision_id(&mut self, d: Decision) -> DecisionId {
        if let Some(i) = self.decisions.get_index_of(&d) {
            return DecisionId(i as u32);
        }
        let rank = match &d {
            Decision::Bool(v) => v.0 as u64,
            Decision::Ineq { .. } => INEQ_RANK_BASE + self.decisions.len() as u64,
        };
        let (i, _) = self.decisions.insert_full(d);
        self.ranks.push(rank);
        DecisionId(i as u32)
    }

    pub fn bool_decision(&mut self, v: VarId) -> DecisionId {
        self.decision_id(Decision::Bool(v))
    }

    fn find_decision(&self, d: &Decision) -> Option<DecisionId> {
        self.decisions.get_index_of(d).map(|i| DecisionId(i as u32))
    }

    pub fn rank(&self, id: DecisionId) -> u64 {
        self.ranks[id.index()]
    }

    fn top_rank(&self, r: NodeRef) -> u64 {
        match self.node(r) {
            Node::Terminal(_) => u64::MAX,
            Node::Internal { decision, .. } => self.rank(*decision),
        }
    }

    fn parts(&self, r: NodeRef) -> Option<(DecisionId, NodeRef, NodeRef)> {
        match self.node(r) {
            Node::Terminal(_) => None,
            Node::Internal {
                decision,
                high,
                low,
            } => Some((*decision, *high, *low)),
        }
    }

    pub fn terminal_poly(&self, r: NodeRef) -> Option<&Polynomial> {
        match self.node(r) {
            Node::Terminal(p) => Some(p),
            Node::Internal { .. } => None,
        }
    }

    pub fn terminal(&mut self, p: Polynomial) -> NodeRef {
        if let Some(&r) = self.terminals.get(&p) {
            return r;
        }
        let r = NodeRef(self.nodes.len() as u32);
        self.nodes.push(Node::Terminal(p.clone()));
        self.terminals.insert(p, r);
        r
    }

    pub fn constant(&mut self, c: Rational) -> NodeRef {
        self.terminal(Polynomial::constant(c))
    }

    pub fn zero(&mut self) -> NodeRef {
        self.terminal(Polynomial::zero())
    }

    pub fn one(&mut self) -> NodeRef {
        self.terminal(Polynomial::one())
    }

    fn is_const(&self, r: NodeRef, c: i64) -> bool {
        matches!(self.node(r), Node::Terminal(p) if p.as_constant() == Some(rat(c)))
    }

    /// Hash-consed node; assumes the order invariant already holds.
    pub(crate) fn make(&mut self, decision: DecisionId, high: NodeRef, low: NodeRef) -> NodeRef {
        if high == low {
            return high;
        }
        debug_assert!(self.rank(decision) < self.top_rank(high));
        debug_assert!(self.rank(decision) < self.top_rank(low));
        let key = (decision, high, low);
        if let Some(&r) = self.internals.get(&key) {
            return r;
        }
        let r = NodeRef(self.nodes.len() as u32);
        self.nodes.push(Node::Internal {
            decision,
            high,
            low,
        });
        self.internals.insert(key, r);
        r
    }

    /// Builds an internal node. With `flipped`, the children are swapped
    /// (the node then tests the negation of `d`). Equal children collapse.
    pub fn internal(
        &mut self,
        d: Decision,
        flipped: bool,
        high: NodeRef,
        low: NodeRef,
    ) -> Result<NodeRef, XaddError> {
        let id = self.decision_id(d);
        let (high, low) = if flipped { (low, high) } else { (high, low) };
        if high == low {
            return Ok(high);
        }
        let rank = self.rank(id);
        if rank >= self.top_rank(high) || rank >= self.top_rank(low) {
            return Err(XaddError::OrderViolation);
        }
        Ok(self.make(id, high, low))
    }

    /// `I[d]` (or `I[¬d]` when `truth` is false) as a 1/0 diagram.
    pub fn indicator(&mut self, d: DecisionId, truth: bool) -> NodeRef {
        let (one, zero) = (self.one(), self.zero());
        if truth {
            self.make(d, one, zero)
        } else {
            self.make(d, zero, one)
        }
    }

    /// `if d then high else low` for ordered `high`/`low` whose decisions may
    /// rank anywhere relative to `d`. This is one step of REORDER.
    pub fn ite(&mut self, d: DecisionId, high: NodeRef, low: NodeRef) -> NodeRef {
        if high == low {
            return high;
        }
        let rank = self.rank(d);
        if rank < self.top_rank(high) && rank < self.top_rank(low) {
            return self.make(d, high, low);
        }
        let on = self.indicator(d, true);
        let off = self.indicator(d, false);
        let high = self.apply(high, on, Op::Mul);
        let low = self.apply(low, off, Op::Mul);
        self.apply(high, low, Op::Add)
    }

    /// Ordered, reduced, shared diagram for a decision tree in any order.
    pub fn reorder(&mut self, tree: &CaseTree) -> NodeRef {
        match tree {
            CaseTree::Leaf(p) => self.terminal(p.clone()),
            CaseTree::Branch {
                decision,
                high,
                low,
            } => {
                let h = self.reorder(high);
                let l = self.reorder(low);
                let id = self.decision_id(decision.clone());
                self.ite(id, h, l)
            }
        }
    }

    /// Unfolds a stored diagram into a tree (exponential for heavily shared
    /// DAGs; meant for I/O and tests).
    pub fn to_tree(&self, f: NodeRef) -> CaseTree {
        match self.node(f) {
            Node::Terminal(p) => CaseTree::Leaf(p.clone()),
            Node::Internal {
                decision,
                high,
                low,
            } => CaseTree::branch(
                self.decision(*decision).clone(),
                self.to_tree(*high),
                self.to_tree(*low),
            ),
        }
    }

    pub fn apply(&mut self, f: NodeRef, g: NodeRef, op: Op) -> NodeRef {
        if let Some(r) = self.apply_shortcut(f, g, op) {
            return r;
        }
        let key = if op.commutative() && g < f {
            (op, g, f)
        } else {
            (op, f, g)
        };
        if let Some(&r) = self.apply_cache.get(&key) {
            return r;
        }
        let result = match (self.parts(f), self.parts(g)) {
            (None, None) => {
                let p = self.terminal_poly(f).cloned().unwrap_or_default();
                let q = self.terminal_poly(g).cloned().unwrap_or_default();
                self.apply_terminals(&p, &q, op)
            }
            _ => {
                let d = if self.top_rank(f) <= self.top_rank(g) {
                    self.parts(f).map(|p| p.0)
                } else {
                    self.parts(g).map(|p| p.0)
                }
                .expect("one operand is internal");
                let (fh, fl) = self.cofactors(f, d);
                let (gh, gl) = self.cofactors(g, d);
                let high = self.apply(fh, gh, op);
                let low = self.apply(fl, gl, op);
                self.ite(d, high, low)
            }
        };
        self.apply_cache.insert(key, result);
        result
    }

    fn cofactors(&self, f: NodeRef, d: DecisionId) -> (NodeRef, NodeRef) {
        match self.parts(f) {
            Some((fd, high, low)) if fd == d => (high, low),
            _ => (f, f),
        }
    }

    fn apply_shortcut(&mut self, f: NodeRef, g: NodeRef, op: Op) -> Option<NodeRef> {
        match op {
            Op::Add if self.is_const(f, 0) => Some(g),
            Op::Add | Op::Sub if self.is_const(g, 0) => Some(f),
            Op::Sub if f == g => Some(self.zero()),
            Op::Mul if self.is_const(f, 0) || self.is_const(g, 0) => Some(self.zero()),
            Op::Mul if self.is_const(f, 1) => Some(g),
            Op::Mul if self.is_const(g, 1) => Some(f),
            Op::Max | Op::Min if f == g => Some(f),
            _ => None,
        }
    }

    fn apply_terminals(&mut self, p: &Polynomial, q: &Polynomial, op: Op) -> NodeRef {
        match op {
            Op::Add => self.terminal(p + q),
            Op::Sub => self.terminal(p - q),
            Op::Mul => self.terminal(p * q),
            Op::Max => self.extremum(p, q, true),
            Op::Min => self.extremum(p, q, false),
        }
    }

    /// Compares two leaves by introducing the decision `e > 0`, where `e` is
    /// `p - q` or `q - p`, whichever has a positive leading coefficient. The
    /// orientation makes `max(f, g)` and `max(g, f)` the same node; where
    /// `e = 0` both leaves agree.
    fn extremum(&mut self, p: &Polynomial, q: &Polynomial, max: bool) -> NodeRef {
        let diff = p - q;
        if let Some(c) = diff.as_constant() {
            let take_p = if max { c.is_positive() } else { c.is_negative() };
            return self.terminal(if take_p { p.clone() } else { q.clone() });
        }
        let leading_positive = diff.leading_coefficient().is_some_and(|c| c.is_positive());
        let (e, larger, smaller) = if leading_positive {
            (diff, p, q)
        } else {
            (-diff, q, p)
        };
        let Folded::Test(decision, _) = Decision::compare_zero(&e, true) else {
            unreachable!("non-constant difference")
        };
        let id = self.decision_id(decision);
        let (high, low) = if max { (larger, smaller) } else { (smaller, larger) };
        let high = self.terminal(high.clone());
        let low = self.terminal(low.clone());
        self.make(id, high, low)
    }

    pub fn add(&mut self, f: NodeRef, g: NodeRef) -> NodeRef {
        self.apply(f, g, Op::Add)
    }

    pub fn sub(&mut self, f: NodeRef, g: NodeRef) -> NodeRef {
        self.apply(f, g, Op::Sub)
    }

    pub fn mul(&mut self, f: NodeRef, g: NodeRef) -> NodeRef {
        self.apply(f, g, Op::Mul)
    }

    pub fn max(&mut self, f: NodeRef, g: NodeRef) -> NodeRef {
        self.apply(f, g, Op::Max)
    }

    pub fn min(&mut self, f: NodeRef, g: NodeRef) -> NodeRef {
        self.apply(f, g, Op::Min)
    }

    /// Multiplies every leaf by `c`.
    pub fn scale(&mut self, f: NodeRef, c: &Rational) -> NodeRef {
        if c.is_zero() {
            return self.zero();
        }
        if c.is_one() {
            return f;
        }
        if let Some(&r) = self.scale_cache.get(&(f, c.clone())) {
            return r;
        }
        let result = match self.parts(f) {
            None => {
                let p = self.terminal_poly(f).cloned().unwrap_or_default();
                self.terminal(p.scale(c))
            }
            Some((d, high, low)) => {
                let h = self.scale(high, c);
                let l = self.scale(low, c);
                self.make(d, h, l)
            }
        };
        self.scale_cache.insert((f, c.clone()), result);
        result
    }

    /// Fixes boolean variable `v` to `value`, removing every test on it.
    pub fn restrict(&mut self, f: NodeRef, v: VarId, value: bool) -> NodeRef {
        match self.find_decision(&Decision::Bool(v)) {
            Some(d) => self.restrict_decision(f, d, value),
            None => f,
        }
    }

    pub(crate) fn restrict_decision(&mut self, f: NodeRef, d: DecisionId, value: bool) -> NodeRef {
        let Some((fd, high, low)) = self.parts(f) else {
            return f;
        };
        if self.rank(fd) > self.rank(d) {
            return f;
        }
        if let Some(&r) = self.restrict_cache.get(&(f, d, value)) {
            return r;
        }
        let result = if fd == d {
            if value {
                high
            } else {
                low
            }
        } else {
            let h = self.restrict_decision(high, d, value);
            let l = self.restrict_decision(low, d, value);
            self.make(fd, h, l)
        };
        self.restrict_cache.insert((f, d, value), result);
        result
    }

    fn check_substitution(&self, sigma: &Substitution) -> Result<(), XaddError> {
        for v in sigma.reals.keys() {
            if self.vocab.kind(*v) == VarKind::Boolean {
                return Err(XaddError::BooleanToPolynomial(self.vocab.name(*v).into()));
            }
        }
        for (from, to) in &sigma.bools {
            for v in [from, to] {
                if self.vocab.kind(*v) != VarKind::Boolean {
                    return Err(XaddError::KindMismatch(self.vocab.name(*v).into()));
                }
            }
            if sigma.bools.contains_key(to) && to != from {
                return Err(XaddError::Overlap(self.vocab.name(*to).into()));
            }
        }
        check_disjoint(&sigma.reals).map_err(|e| match e {
            PolyError::SubstitutionOverlap(v) => XaddError::Overlap(self.vocab.name(v).into()),
            other => XaddError::Unassigned(other.to_string()),
        })
    }

    /// Applies `sigma` to every leaf and decision, folding decisions that
    /// become constant and restoring the decision order.
    pub fn subst(&mut self, f: NodeRef, sigma: &Substitution) -> Result<NodeRef, XaddError> {
        self.check_substitution(sigma)?;
        if sigma.is_empty() {
            return Ok(f);
        }
        let mut memo = HashMap::new();
        Ok(self.subst_rec(f, sigma, &mut memo))
    }

    fn subst_rec(
        &mut self,
        f: NodeRef,
        sigma: &Substitution,
        memo: &mut HashMap<NodeRef, NodeRef>,
    ) -> NodeRef {
        if let Some(&r) = memo.get(&f) {
            return r;
        }
        let result = match self.parts(f) {
            None => {
                let p = self.terminal_poly(f).cloned().unwrap_or_default();
                let q = p.subst_unchecked(&sigma.reals);
                self.terminal(q)
            }
            Some((d, high, low)) => {
                let h = self.subst_rec(high, sigma, memo);
                let l = self.subst_rec(low, sigma, memo);
                let decision = self.decision(d).clone();
                if !sigma.touches(&decision) {
                    self.ite(d, h, l)
                } else {
                    let folded = match decision {
                        Decision::Bool(v) => Folded::Test(Decision::Bool(sigma.bools[&v]), false),
                        Decision::Ineq { poly, strict } => {
                            Decision::compare_zero(&poly.subst_unchecked(&sigma.reals), strict)
                        }
                    };
                    match folded {
                        Folded::Const(true) => h,
                        Folded::Const(false) => l,
                        Folded::Test(nd, flipped) => {
                            let id = self.decision_id(nd);
                            if flipped {
                                self.ite(id, l, h)
                            } else {
                                self.ite(id, h, l)
                            }
                        }
                    }
                }
            }
        };
        memo.insert(f, result);
        result
    }

    /// Integrates `δ[v − cse]·f` over `v`: each CSE leaf `g` yields
    /// `f{v ↦ g}`, and the CSE's own tests become diagram decisions.
    pub fn subst_conditional(
        &mut self,
        f: NodeRef,
        v: VarId,
        cse: &CaseTree,
    ) -> Result<NodeRef, XaddError> {
        if self.vocab.kind(v) != VarKind::Continuous {
            return Err(XaddError::KindMismatch(self.vocab.name(v).into()));
        }
        if cse.decisions().iter().any(|d| d.mentions(v)) {
            return Err(XaddError::CseMentionsTarget(self.vocab.name(v).into()));
        }
        if let Some(p) = cse.leaves().into_iter().find(|p| p.mentions(v)) {
            let _ = p;
            return Err(XaddError::Overlap(self.vocab.name(v).into()));
        }
        if !self.support(f).contains(&v) {
            return Ok(f);
        }
        let mut leaf_cache = HashMap::new();
        Ok(self.subst_cse_rec(f, v, cse, &mut leaf_cache))
    }

    fn subst_cse_rec(
        &mut self,
        f: NodeRef,
        v: VarId,
        cse: &CaseTree,
        leaf_cache: &mut HashMap<Polynomial, NodeRef>,
    ) -> NodeRef {
        match cse {
            CaseTree::Leaf(g) => {
                if let Some(&r) = leaf_cache.get(g) {
                    return r;
                }
                let sigma = Substitution::new().real(v, g.clone());
                let mut memo = HashMap::new();
                let r = self.subst_rec(f, &sigma, &mut memo);
                leaf_cache.insert(g.clone(), r);
                r
            }
            CaseTree::Branch {
                decision,
                high,
                low,
            } => {
                let h = self.subst_cse_rec(f, v, high, leaf_cache);
                let l = self.subst_cse_rec(f, v, low, leaf_cache);
                let id = self.decision_id(decision.clone());
                self.ite(id, h, l)
            }
        }
    }

    pub fn eval<A: Assignment + ?Sized>(&self, f: NodeRef, values: &A) -> Result<Rational, XaddError> {
        let unassigned = |e: PolyError| match e {
            PolyError::Unassigned(v) => XaddError::Unassigned(self.vocab.name(v).into()),
            other => XaddError::Unassigned(other.to_string()),
        };
        let mut cur = f;
        loop {
            match self.node(cur) {
                Node::Terminal(p) => return p.eval(values).map_err(unassigned),
                Node::Internal {
                    decision,
                    high,
                    low,
                } => {
                    let holds = self.decision(*decision).holds(values).map_err(unassigned)?;
                    cur = if holds { *high } else { *low };
                }
            }
        }
    }

    /// Distinct nodes reachable from `f`, in depth-first preorder (high
    /// before low).
    pub fn reachable(&self, f: NodeRef) -> Vec<NodeRef> {
        let mut seen = std::collections::HashSet::new();
        let mut order = Vec::new();
        let mut stack = vec![f];
        while let Some(r) = stack.pop() {
            if !seen.insert(r) {
                continue;
            }
            order.push(r);
            if let Some((_, high, low)) = self.parts(r) {
                stack.push(low);
                stack.push(high);
            }
        }
        order
    }

    pub fn stats(&self, f: NodeRef) -> DiagramStats {
        let nodes = self.reachable(f);
        let mut decisions = BTreeSet::new();
        let mut leaves = 0;
        for r in &nodes {
            match self.node(*r) {
                Node::Terminal(_) => leaves += 1,
                Node::Internal { decision, .. } => {
                    decisions.insert(*decision);
                }
            }
        }
        DiagramStats {
            nodes: nodes.len(),
            leaves,
            decisions: decisions.len(),
        }
    }

    /// Variables mentioned anywhere in `f`.
    pub fn support(&self, f: NodeRef) -> BTreeSet<VarId> {
        let mut vars = BTreeSet::new();
        for r in self.reachable(f) {
            match self.node(r) {
                Node::Terminal(p) => vars.extend(p.vars()),
                Node::Internal { decision, .. } => vars.extend(self.decision(*decision).vars()),
            }
        }
        vars
    }

    /// Root-to-leaf paths as `(decision, branch taken)` lists.
    pub fn paths(&self, f: NodeRef) -> Vec<(Vec<(DecisionId, bool)>, NodeRef)> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.paths_rec(f, &mut path, &mut out);
        out
    }

    fn paths_rec(
        &self,
        f: NodeRef,
        path: &mut Vec<(DecisionId, bool)>,
        out: &mut Vec<(Vec<(DecisionId, bool)>, NodeRef)>,
    ) {
        match self.parts(f) {
            None => out.push((path.clone(), f)),
            Some((d, high, low)) => {
                path.push((d, true));
                self.paths_rec(high, path, out);
                path.pop();
                path.push((d, false));
                self.paths_rec(low, path, out);
                path.pop();
            }
        }
    }

    /// Checks the ordered and reduced invariants below `f`.
    pub fn check_invariants(&self, f: NodeRef) -> Result<(), String> {
        for r in self.reachable(f) {
            if let Some((d, high, low)) = self.parts(r) {
                if high == low {
                    return Err(format!("node {} has equal children", r.0));
                }
                let rank = self.rank(d);
                if rank >= self.top_rank(high) || rank >= self.top_rank(low) {
                    return Err(format!("node {} is out of order", r.0));
                }
            }
        }
        Ok(())
    }

    pub fn clear_caches(&mut self) {
        self.apply_cache.clear();
        self.scale_cache.clear();
        self.restrict_cache.clear();
    }

    pub(crate) fn describe_path(&self, path: &[(DecisionId, bool)]) -> String {
        if path.is_empty() {
            return "true".into();
        }
        path.iter()
            .map(|(d, truth)| self.decision(*d).display(&self.vocab, !truth).to_string())
            .collect::<Vec<_>>()
            .join(" & ")
    }

    /// One `conditions : value` line per root-to-leaf path.
    pub fn to_case(&self, f: NodeRef) -> String {
        let mut out = String::new();
        for (path, leaf) in self.paths(f) {
            let value = self.terminal_poly(leaf).cloned().unwrap_or_default();
            let _ = writeln!(
                out,
                "{} : {}",
                self.describe_path(&path),
                value.display(&self.vocab)
            );
        }
        out
    }

    /// Builds a diagram from `conditions : value` lines. Partitions must be
    /// pairwise disjoint and cover every in-bounds state.
    pub fn from_case(&mut self, text: &str) -> Result<NodeRef, XaddError> {
        let partitions = domlang::parse_partitions(text, &self.vocab)?;
        let mut cover = self.zero();
        let mut f = self.zero();
        for (atoms, value) in partitions {
            let mut indicator = self.one();
            for atom in atoms {
                match atom {
                    Folded::Const(true) => {}
                    Folded::Const(false) => indicator = self.zero(),
                    Folded::Test(d, flipped) => {
                        let id = self.decision_id(d);
                        let i = self.indicator(id, !flipped);
                        indicator = self.mul(indicator, i);
                    }
                }
            }
            cover = self.add(cover, indicator);
            let leaf = self.terminal(value);
            let piece = self.mul(indicator, leaf);
            f = self.add(f, piece);
        }
        for (path, leaf) in self.paths(cover) {
            let count = self
                .terminal_poly(leaf)
                .and_then(Polynomial::as_constant)
                .unwrap_or_else(Rational::zero);
            if count.is_one() || !self.path_reachable(&path) {
                continue;
            }
            let place = self.describe_path(&path);
            return Err(if count.is_zero() {
                XaddError::NonExhaustive(place)
            } else {
                XaddError::Overlap2(place)
            });
        }
        Ok(f)
    }

    /// Whether some in-bounds state follows `path`. Exact for linear paths;
    /// nonlinear paths are probed with 10,000 random states.
    fn path_reachable(&self, path: &[(DecisionId, bool)]) -> bool {
        let ineqs: Vec<(&Polynomial, bool, bool)> = path
            .iter()
            .filter_map(|(d, truth)| match self.decision(*d) {
                Decision::Ineq { poly, strict } => Some((poly, *strict, *truth)),
                Decision::Bool(_) => None,
            })
            .collect();
        if ineqs.iter().all(|(p, _, _)| p.is_linear()) {
            let mut cs = ConstraintSet::from_vocab(&self.vocab);
            for (p, strict, truth) in &ineqs {
                cs.push((*p).clone(), *strict, *truth);
            }
            return strictly_feasible(&cs).unwrap_or(true);
        }
        let vars: BTreeSet<VarId> = ineqs.iter().flat_map(|(p, _, _)| p.vars()).collect();
        let mut rng = StdRng::seed_from_u64(0x5eed);
        (0..10_000).any(|_| {
            let mut state = State::new();
            for v in &vars {
                let (lo, hi) = self
                    .vocab
                    .bounds(*v)
                    .cloned()
                    .unwrap_or_else(|| (rat(-100), rat(100)));
                let t = Rational::new(rng.gen_range(0..=1000).into(), 1000.into());
                state.set_real(*v, &lo + (&hi - &lo) * t);
            }
            ineqs.iter().all(|(p, strict, truth)| {
                let value = p.eval(&state).unwrap_or_else(|_| Rational::zero());
                let holds = if *strict {
                    value.is_positive()
                } else {
                    !value.is_negative()
                };
                holds == *truth
            })
        })
    }

    /// Graphviz rendering: true branches solid, false branches dashed.
    pub fn export_dot(&self, f: NodeRef) -> String {
        let order = self.reachable(f);
        let ids: HashMap<NodeRef, usize> = order.iter().enumerate().map(|(i, r)| (*r, i)).collect();
        let mut out = String::from("digraph xadd {\n");
        for r in &order {
            let i = ids[r];
            match self.node(*r) {
                Node::Terminal(p) => {
                    let _ = writeln!(
                        out,
                        "  n{i} [shape=box, label=\"{}\"];",
                        p.display(&self.vocab)
                    );
                }
                Node::Internal {
                    decision,
                    high,
                    low,
                } => {
                    let _ = writeln!(
                        out,
                        "  n{i} [shape=ellipse, label=\"{}\"];",
                        self.decision(*decision).display(&self.vocab, false)
                    );
                    let _ = writeln!(out, "  n{i} -> n{} [style=solid];", ids[high]);
                    let _ = writeln!(out, "  n{i} -> n{} [style=dashed];", ids[low]);
                }
            }
        }
        out.push_str("}\n");
        out
    }
}
