//! Linear feasibility of path constraints and pruning of unreachable
//! diagram branches.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::lp::{Lp, LpOutcome, RowKind};
use crate::poly::{Decision, Folded, Polynomial, Rational};
use crate::vars::{VarId, VarKind, Vocab};
use crate::xadd::{DecisionId, Node, NodeRef, XaddStore};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PruneError {
    #[error("constraint is not linear")]
    Nonlinear,
}

/// `poly > 0` / `poly >= 0` asserted true or false.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub poly: Polynomial,
    pub strict: bool,
    pub truth: bool,
}

impl Constraint {
    /// Whether the asserted relation is a strict inequality (`p > 0`, or
    /// the negation of `p >= 0`, i.e. `p < 0`).
    pub fn is_strict(&self) -> bool {
        self.strict == self.truth
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintSet {
    constraints: Vec<Constraint>,
    bounds: BTreeMap<VarId, (Rational, Rational)>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Empty set carrying the box bounds of every bounded continuous
    /// variable in `vocab`.
    pub fn from_vocab(vocab: &Vocab) -> Self {
        let mut cs = Self::new();
        for i in 0..vocab.len() {
            let v = VarId(i as u32);
            if vocab.kind(v) == VarKind::Continuous {
                if let Some((lo, hi)) = vocab.bounds(v) {
                    cs.bounds.insert(v, (lo.clone(), hi.clone()));
                }
            }
        }
        cs
    }

    pub fn with_bound(mut self, v: VarId, lower: Rational, upper: Rational) -> Self {
        self.bounds.insert(v, (lower, upper));
        self
    }

    pub fn push(&mut self, poly: Polynomial, strict: bool, truth: bool) {
        self.constraints.push(Constraint {
            poly,
            strict,
            truth,
        });
    }

    /// Adds a normalized comparison; constant comparisons become `0 > 0`
    /// when false and are dropped when true.
    pub fn push_folded(&mut self, test: Folded) {
        match test {
            Folded::Const(true) => {}
            Folded::Const(false) => self.push(Polynomial::zero(), true, true),
            Folded::Test(Decision::Ineq { poly, strict }, flipped) => self.push(poly, strict, !flipped),
            Folded::Test(Decision::Bool(_), _) => {}
        }
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn bounds(&self) -> &BTreeMap<VarId, (Rational, Rational)> {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// LP over shifted columns: bounded `x = L + y` with `0 <= y <= U - L`,
    /// free `x = y+ - y-`. With `slack`, a last column `t` in `[0, 1]` is
    /// subtracted from every strict relation.
    fn build(&self, slack: bool) -> Result<(Lp, usize), PruneError> {
        let mut vars = BTreeSet::new();
        for c in &self.constraints {
            if !c.poly.is_linear() {
                return Err(PruneError::Nonlinear);
            }
            vars.extend(c.poly.vars());
        }
        let mut column = HashMap::new();
        let mut columns = 0;
        for v in &vars {
            column.insert(*v, columns);
            columns += if self.bounds.contains_key(v) { 1 } else { 2 };
        }
        let t = columns;
        if slack {
            columns += 1;
        }
        let mut lp = Lp::new(columns);
        for v in &vars {
            if let Some((lo, hi)) = self.bounds.get(v) {
                let mut row = vec![Rational::zero(); columns];
                row[column[v]] = Rational::one();
                lp.add_row(row, RowKind::Le, hi - lo);
            }
        }
        if slack {
            let mut row = vec![Rational::zero(); columns];
            row[t] = Rational::one();
            lp.add_row(row, RowKind::Le, Rational::one());
        }
        for c in &self.constraints {
            let (terms, mut constant) = c.poly.linear_parts().ok_or(PruneError::Nonlinear)?;
            let mut row = vec![Rational::zero(); columns];
            for (v, a) in terms {
                let j = column[&v];
                match self.bounds.get(&v) {
                    Some((lo, _)) => {
                        constant += &a * lo;
                        row[j] += &a;
                    }
                    None => {
                        row[j] += &a;
                        row[j + 1] -= &a;
                    }
                }
            }
            // Asserting the negation flips the relation.
            if !c.truth {
                for x in row.iter_mut() {
                    *x = -x.clone();
                }
                constant = -constant;
            }
            if slack && c.is_strict() {
                row[t] = -Rational::one();
            }
            lp.add_row(row, RowKind::Ge, -constant);
        }
        Ok((lp, t))
    }
}

/// Whether the relaxed system (strict relations weakened) has a solution
/// within the box bounds.
pub fn feasible(cs: &ConstraintSet) -> Result<bool, PruneError> {
    let (lp, _) = cs.build(false)?;
    Ok(lp.is_feasible())
}

/// Exact feasibility honouring strict relations: maximizes a common slack
/// `t` on every strict relation and tests `t > 0`.
pub fn strictly_feasible(cs: &ConstraintSet) -> Result<bool, PruneError> {
    if !cs.constraints.iter().any(Constraint::is_strict) {
        return feasible(cs);
    }
    let (lp, t) = cs.build(true)?;
    let mut objective = vec![Rational::zero(); lp.columns()];
    objective[t] = Rational::one();
    Ok(match lp.maximize(&objective) {
        LpOutcome::Infeasible => false,
        LpOutcome::Unbounded => true,
        LpOutcome::Optimal(v) => v.is_positive(),
    })
}

/// Path pruner with a feasibility cache shared across calls.
#[derive(Debug, Default)]
pub struct Pruner {
    lp_cache: HashMap<Vec<(DecisionId, bool)>, bool>,
    lp_calls: usize,
}

impl Pruner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of LPs actually solved (cache misses).
    pub fn lp_calls(&self) -> usize {
        self.lp_calls
    }

    /// Removes branches whose linear path constraints are infeasible. The
    /// result never has more nodes than `f`.
    pub fn prune(&mut self, store: &mut XaddStore, f: NodeRef) -> NodeRef {
        let mut memo = HashMap::new();
        let mut path = Vec::new();
        let g = self.prune_rec(store, f, &mut path, &mut memo);
        if g != f && store.stats(g).nodes > store.stats(f).nodes {
            return f;
        }
        g
    }

    fn reachable(&mut self, store: &XaddStore, path: &[(DecisionId, bool)]) -> bool {
        let mut key = path.to_vec();
        key.sort();
        if let Some(&known) = self.lp_cache.get(&key) {
            return known;
        }
        let mut cs = ConstraintSet::from_vocab(store.vocab());
        for (d, truth) in path {
            if let Decision::Ineq { poly, strict } = store.decision(*d) {
                cs.push(poly.clone(), *strict, *truth);
            }
        }
        self.lp_calls += 1;
        let ok = feasible(&cs).unwrap_or(true);
        self.lp_cache.insert(key, ok);
        ok
    }

    fn prune_rec(
        &mut self,
        store: &mut XaddStore,
        f: NodeRef,
        path: &mut Vec<(DecisionId, bool)>,
        memo: &mut HashMap<(NodeRef, Vec<(DecisionId, bool)>), NodeRef>,
    ) -> NodeRef {
        let (d, high, low) = match store.node(f) {
            Node::Terminal(_) => return f,
            Node::Internal {
                decision,
                high,
                low,
            } => (*decision, *high, *low),
        };
        let key = (f, path.clone());
        if let Some(&r) = memo.get(&key) {
            return r;
        }
        let linear = store.decision(d).is_linear();
        let mut branch = |pruner: &mut Self, store: &mut XaddStore, truth: bool, child: NodeRef| {
            if !linear {
                return Some(pruner.prune_rec(store, child, path, memo));
            }
            path.push((d, truth));
            let result = if pruner.reachable(store, path) {
                Some(pruner.prune_rec(store, child, path, memo))
            } else {
                None
            };
            path.pop();
            result
        };
        let h = branch(self, store, true, high);
        let l = branch(self, store, false, low);
        let result = match (h, l) {
            (Some(h), Some(l)) => store.make(d, h, l),
            (Some(h), None) => h,
            (None, Some(l)) => l,
            // The path itself was reachable, so one side must be; keep the
            // node if the LP disagrees with that.
            (None, None) => f,
        };
        memo.insert(key, result);
        result
    }
}

/// One-shot pruning with a fresh cache.
pub fn prune(store: &mut XaddStore, f: NodeRef) -> NodeRef {
    Pruner::new().prune(store, f)
}
