//! Symbolic value iteration over XADDs.

use std::time::{Duration, Instant};

use num_traits::Zero;
use thiserror::Error;

use crate::model::{Action, Dcmdp};
use crate::poly::{Polynomial, Rational};
use crate::prune::Pruner;
use crate::vars::{Assignment, VarKind};
use crate::xadd::{CaseTree, DiagramStats, NodeRef, Substitution, XaddError, XaddStore};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("value function mentions next-state variable `{0}`")]
    PrimedValue(String),
    #[error(transparent)]
    Xadd(#[from] XaddError),
    #[error("horizon {0} was not computed")]
    MissingHorizon(u32),
    #[error("no policy at horizon 0")]
    NoPolicy,
    #[error("variable `{0}` is not assigned")]
    MissingVariable(String),
    #[error("`{name}` = {value} is outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: String,
        lower: String,
        upper: String,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Init {
    #[default]
    Zero,
    /// `V⁰ = max_a R_a`.
    MaxReward,
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    pub horizon: u32,
    pub prune: bool,
    pub init: Init,
}

#[derive(Clone, Debug)]
pub struct Iteration {
    pub value: NodeRef,
    /// Per-action Q in declaration order; empty for `V⁰`.
    pub q: Vec<NodeRef>,
    pub stats: DiagramStats,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// `iterations[h]` holds `V^h`.
    pub iterations: Vec<Iteration>,
    /// Set when `V^h` came out as the same node as `V^{h-1}`.
    pub converged_at: Option<u32>,
    pub action_names: Vec<String>,
}

impl SolveResult {
    pub fn horizon(&self) -> u32 {
        (self.iterations.len() - 1) as u32
    }

    /// `V^h`; past a structural fixpoint every later horizon has the same
    /// value function.
    pub fn iteration(&self, h: u32) -> Result<&Iteration, SdpError> {
        match self.iterations.get(h as usize) {
            Some(it) => Ok(it),
            None if self.converged_at.is_some() => Ok(self.iterations.last().expect("V0 present")),
            None => Err(SdpError::MissingHorizon(h)),
        }
    }

    pub fn value(&self, h: u32) -> Result<NodeRef, SdpError> {
        Ok(self.iteration(h)?.value)
    }
}

/// `Q_a = R_a ⊕ γ · Σ_b' ∫ P(b', x' | b, x, a) · V'(b', x') dx'`.
pub fn regress(
    store: &mut XaddStore,
    m: &Dcmdp,
    a: &Action,
    v: NodeRef,
) -> Result<NodeRef, SdpError> {
    let support = store.support(v);
    if let Some(p) = support.iter().find(|w| store.vocab().is_primed(**w)) {
        return Err(SdpError::PrimedValue(store.vocab().name(*p).into()));
    }

    let mut prime = Substitution::new();
    for c in &m.cvars {
        let next = store.vocab().primed(c.id);
        prime.reals.insert(c.id, Polynomial::var(next));
    }
    for b in &m.bvars {
        prime.bools.insert(*b, store.vocab().primed(*b));
    }
    let mut q = store.subst(v, &prime)?;

    for c in &m.cvars {
        let next = store.vocab().primed(c.id);
        if !store.support(q).contains(&next) {
            continue;
        }
        let identity = CaseTree::Leaf(Polynomial::var(c.id));
        let cse = a.cses.get(&next).unwrap_or(&identity);
        q = store.subst_conditional(q, next, cse)?;
    }

    for b in &m.bvars {
        let next = store.vocab().primed(*b);
        if !store.support(q).contains(&next) {
            continue;
        }
        let p_true = match a.cpts.get(&next) {
            Some(cpt) => *cpt,
            None => {
                let d = store.bool_decision(*b);
                store.indicator(d, true)
            }
        };
        let one = store.one();
        let p_false = store.sub(one, p_true);
        let d = store.bool_decision(next);
        let joint = store.ite(d, p_true, p_false);
        let weighted = store.mul(q, joint);
        let on = store.restrict(weighted, next, true);
        let off = store.restrict(weighted, next, false);
        q = store.add(on, off);
    }

    let discounted = store.scale(q, &m.discount);
    Ok(store.add(a.reward, discounted))
}

/// One Bellman backup: every `Q_a`, then their maximum folded from the
/// right in declaration order.
pub fn backup(
    store: &mut XaddStore,
    m: &Dcmdp,
    v: NodeRef,
    mut pruner: Option<&mut Pruner>,
) -> Result<(NodeRef, Vec<NodeRef>), SdpError> {
    let mut qs = Vec::with_capacity(m.actions.len());
    for a in &m.actions {
        let mut q = regress(store, m, a, v)?;
        if let Some(p) = pruner.as_deref_mut() {
            q = p.prune(store, q);
        }
        qs.push(q);
    }
    let mut acc = *qs.last().unwrap_or(&store.zero());
    for q in qs.iter().rev().skip(1) {
        acc = store.max(*q, acc);
        if let Some(p) = pruner.as_deref_mut() {
            acc = p.prune(store, acc);
        }
    }
    Ok((acc, qs))
}

pub fn initial_value(store: &mut XaddStore, m: &Dcmdp, init: Init) -> NodeRef {
    match init {
        Init::Zero => store.zero(),
        Init::MaxReward => {
            let rewards: Vec<NodeRef> = m.actions.iter().map(|a| a.reward).collect();
            let mut acc = *rewards.last().unwrap_or(&store.zero());
            for r in rewards.iter().rev().skip(1) {
                acc = store.max(*r, acc);
            }
            acc
        }
    }
}

/// Value iteration up to `opts.horizon` backups, stopping early at a
/// structural fixpoint.
pub fn solve(store: &mut XaddStore, m: &Dcmdp, opts: &SolveOptions) -> Result<SolveResult, SdpError> {
    solve_with(store, m, opts, |_, _| {})
}

/// As [`solve`], calling `progress(h, &iteration)` after each backup.
pub fn solve_with(
    store: &mut XaddStore,
    m: &Dcmdp,
    opts: &SolveOptions,
    mut progress: impl FnMut(u32, &Iteration),
) -> Result<SolveResult, SdpError> {
    let start = Instant::now();
    let v0 = initial_value(store, m, opts.init);
    let mut iterations = vec![Iteration {
        value: v0,
        q: Vec::new(),
        stats: store.stats(v0),
        elapsed: start.elapsed(),
    }];
    let mut pruner = Pruner::new();
    let mut converged_at = None;
    for h in 1..=opts.horizon {
        let start = Instant::now();
        let prev = iterations[iterations.len() - 1].value;
        let (value, q) = backup(store, m, prev, opts.prune.then_some(&mut pruner))?;
        store.clear_caches();
        let it = Iteration {
            value,
            q,
            stats: store.stats(value),
            elapsed: start.elapsed(),
        };
        progress(h, &it);
        iterations.push(it);
        if value == prev {
            converged_at = Some(h);
            break;
        }
    }
    Ok(SolveResult {
        iterations,
        converged_at,
        action_names: m.action_names(),
    })
}

/// Every state variable assigned and every continuous value within bounds.
pub fn check_state<A: Assignment + ?Sized>(store: &XaddStore, m: &Dcmdp, s: &A) -> Result<(), SdpError> {
    let vocab = store.vocab();
    for b in &m.bvars {
        if s.boolean(*b).is_none() {
            return Err(SdpError::MissingVariable(vocab.name(*b).into()));
        }
    }
    for c in &m.cvars {
        let Some(x) = s.real(c.id) else {
            return Err(SdpError::MissingVariable(vocab.name(c.id).into()));
        };
        if *x < c.lower || *x > c.upper {
            return Err(SdpError::OutOfBounds {
                name: vocab.name(c.id).into(),
                value: x.to_string(),
                lower: c.lower.to_string(),
                upper: c.upper.to_string(),
            });
        }
    }
    debug_assert!(m.cvars.iter().all(|c| vocab.kind(c.id) == VarKind::Continuous));
    Ok(())
}

pub fn value_at<A: Assignment + ?Sized>(
    store: &XaddStore,
    m: &Dcmdp,
    r: &SolveResult,
    h: u32,
    s: &A,
) -> Result<Rational, SdpError> {
    let v = r.value(h)?;
    check_state(store, m, s)?;
    Ok(store.eval(v, s)?)
}

/// Greedy action at horizon `h` and its Q value; ties go to the action
/// declared first.
pub fn policy_at<A: Assignment + ?Sized>(
    store: &XaddStore,
    m: &Dcmdp,
    r: &SolveResult,
    h: u32,
    s: &A,
) -> Result<(String, Rational), SdpError> {
    if h == 0 {
        return Err(SdpError::NoPolicy);
    }
    let it = r.iteration(h)?;
    check_state(store, m, s)?;
    let mut best: Option<(usize, Rational)> = None;
    for (i, q) in it.q.iter().enumerate() {
        let value = store.eval(*q, s)?;
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((i, value));
        }
    }
    let (i, value) = best.unwrap_or((0, Rational::zero()));
    Ok((r.action_names[i].clone(), value))
}
