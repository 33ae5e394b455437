//! Factored DC-MDP model: variables, actions (CPTs, CSEs, reward) and
//! structural validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};

use crate::domlang::{self, ParseError};
use crate::poly::Rational;
use crate::vars::{State, VarId, VarKind};
use crate::xadd::{CaseTree, Node, NodeRef, XaddStore};

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousVar {
    pub id: VarId,
    pub lower: Rational,
    pub upper: Rational,
}

/// One action. Next-state variables without an entry keep their value
/// (`x' = x`, `b' = b`).
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    pub name: String,
    /// Primed boolean -> diagram for `P(b' = true)` over current state.
    pub cpts: BTreeMap<VarId, NodeRef>,
    /// Primed continuous variable -> its conditional equation.
    pub cses: BTreeMap<VarId, CaseTree>,
    pub reward: NodeRef,
}

impl Action {
    pub fn new(name: impl Into<String>, reward: NodeRef) -> Self {
        Action {
            name: name.into(),
            cpts: BTreeMap::new(),
            cses: BTreeMap::new(),
            reward,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dcmdp {
    pub name: String,
    pub bvars: Vec<VarId>,
    pub cvars: Vec<ContinuousVar>,
    pub actions: Vec<Action>,
    pub discount: Rational,
    /// `None` means unbounded.
    pub horizon: Option<u32>,
}

impl Dcmdp {
    pub fn action(&self, name: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn action_names(&self) -> Vec<String> {
        self.actions.iter().map(|a| a.name.clone()).collect()
    }

    pub fn cvar(&self, id: VarId) -> Option<&ContinuousVar> {
        self.cvars.iter().find(|c| c.id == id)
    }

    /// Uniform random in-bounds state. Continuous values lie on a grid of
    /// 10^6 steps per variable so they stay small rationals.
    pub fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        let mut s = State::new();
        for b in &self.bvars {
            s.set_bool(*b, rng.gen());
        }
        for c in &self.cvars {
            let step = Rational::new(rng.gen_range(0..=1_000_000i64).into(), 1_000_000.into());
            s.set_real(c.id, &c.lower + (&c.upper - &c.lower) * step);
        }
        s
    }
}

/// A parsed model together with the store holding its diagrams.
#[derive(Clone, Debug)]
pub struct Domain {
    pub store: XaddStore,
    pub mdp: Dcmdp,
}

impl Domain {
    pub fn parse(text: &str) -> Result<Domain, ParseError> {
        domlang::parse_domain(text)
    }

    pub fn load(path: &Path) -> Result<Domain, ParseError> {
        domlang::parse_domain_file(path)
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate(&self.store, &self.mdp)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub action: Option<String>,
    pub variable: Option<String>,
    pub rule: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rule)?;
        match (&self.action, &self.variable) {
            (Some(a), Some(v)) => write!(f, " (action {a}, variable {v})")?,
            (Some(a), None) => write!(f, " (action {a})")?,
            (None, Some(v)) => write!(f, " (variable {v})")?,
            (None, None) => {}
        }
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

pub const PROBABILITY_RANGE: &str = "probability out of [0,1]";
pub const SYNCHRONIC_BOOLEAN: &str = "synchronic arc within boolean variables";
pub const SYNCHRONIC_CONTINUOUS: &str = "synchronic arc within continuous variables";
pub const NEXT_STATE_EQUATION: &str = "equation depends on next-state variable";
pub const NEXT_STATE_REWARD: &str = "reward depends on next-state variable";

fn violation(action: Option<&str>, variable: Option<&str>, rule: &str, detail: String) -> Violation {
    Violation {
        action: action.map(str::to_string),
        variable: variable.map(str::to_string),
        rule: rule.to_string(),
        detail,
    }
}

/// Lists every broken structural rule; empty means the model is valid.
pub fn validate(store: &XaddStore, m: &Dcmdp) -> Vec<Violation> {
    let vocab = store.vocab();
    let mut out = Vec::new();
    for c in &m.cvars {
        if c.lower > c.upper {
            out.push(violation(
                None,
                Some(vocab.name(c.id)),
                "inverted bounds",
                format!("[{}, {}]", c.lower, c.upper),
            ));
        }
    }
    if m.discount < Rational::zero() || m.discount > Rational::one() {
        out.push(violation(None, None, "discount out of [0,1]", m.discount.to_string()));
    }
    if m.actions.is_empty() {
        out.push(violation(None, None, "no actions", String::new()));
    }
    let mut names = BTreeSet::new();
    for a in &m.actions {
        if !names.insert(a.name.as_str()) {
            out.push(violation(Some(&a.name), None, "duplicate action", String::new()));
        }
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for a in &m.actions {
        let act = Some(a.name.as_str());
        for (v, cpt) in &a.cpts {
            let name = vocab.name(*v);
            if vocab.kind(*v) != VarKind::Boolean || !vocab.is_primed(*v) {
                out.push(violation(act, Some(name), "CPT must define a next-state boolean", String::new()));
            }
            if let Some(p) = store
                .support(*cpt)
                .into_iter()
                .find(|w| vocab.is_primed(*w))
            {
                out.push(violation(act, Some(name), SYNCHRONIC_BOOLEAN, format!("mentions {}", vocab.name(p))));
                continue;
            }
            if let Some(detail) = cpt_range_problem(store, m, *cpt, &mut rng) {
                out.push(violation(act, Some(name), PROBABILITY_RANGE, detail));
            }
        }
        for (v, cse) in &a.cses {
            let name = vocab.name(*v);
            if vocab.kind(*v) != VarKind::Continuous || !vocab.is_primed(*v) {
                out.push(violation(act, Some(name), "equation must define a next-state continuous variable", String::new()));
            }
            for d in cse.decisions() {
                if let Some(p) = d
                    .vars()
                    .into_iter()
                    .find(|w| vocab.is_primed(*w) && vocab.kind(*w) == VarKind::Continuous)
                {
                    out.push(violation(act, Some(name), SYNCHRONIC_CONTINUOUS, format!("condition mentions {}", vocab.name(p))));
                }
            }
            for leaf in cse.leaves() {
                if let Some(p) = leaf.vars().into_iter().find(|w| vocab.is_primed(*w)) {
                    out.push(violation(act, Some(name), NEXT_STATE_EQUATION, format!("mentions {}", vocab.name(p))));
                }
            }
        }
        if let Some(p) = store
            .support(a.reward)
            .into_iter()
            .find(|w| vocab.is_primed(*w))
        {
            out.push(violation(act, None, NEXT_STATE_REWARD, format!("mentions {}", vocab.name(p))));
        }
    }
    out
}

/// Leaf scan for constants; polynomial leaves are probed at 1,000 states.
fn cpt_range_problem(
    store: &XaddStore,
    m: &Dcmdp,
    cpt: NodeRef,
    rng: &mut rand::rngs::StdRng,
) -> Option<String> {
    let in_range = |p: &Rational| *p >= Rational::zero() && *p <= Rational::one();
    let mut polynomial = false;
    for r in store.reachable(cpt) {
        if let Node::Terminal(p) = store.node(r) {
            match p.as_constant() {
                Some(c) if !in_range(&c) => return Some(format!("leaf {c}")),
                Some(_) => {}
                None => polynomial = true,
            }
        }
    }
    if polynomial {
        for _ in 0..1000 {
            let s = m.random_state(rng);
            if let Ok(p) = store.eval(cpt, &s) {
                if !in_range(&p) {
                    return Some(format!("value {p} at a sampled state"));
                }
            }
        }
    }
    None
}
