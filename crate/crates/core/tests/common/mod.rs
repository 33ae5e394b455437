//! Oracles shared by the integration tests. They simulate models state by
//! state with plain rational arithmetic and never call the solver.

#![allow(dead_code)]

use std::path::PathBuf;

use num_traits::{One, Zero};
use rand::Rng;
use xadd_sdp::model::{Action, Domain};
use xadd_sdp::{Polynomial, Rational, State, VarKind};

pub fn domains_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../domains")
}

pub fn load(name: &str) -> Domain {
    let path = domains_dir().join(format!("{name}.dcmdp"));
    Domain::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// Random rational in `[lo, hi]` with denominator `den`.
pub fn rand_rat<R: Rng>(rng: &mut R, lo: i64, hi: i64, den: i64) -> Rational {
    q(rng.gen_range(lo * den..=hi * den), den)
}

/// Reward and successor of a deterministic action. CPT leaves must be 0 or
/// 1 at the visited state.
pub fn step(d: &Domain, a: &Action, s: &State) -> (Rational, State) {
    let vocab = d.store.vocab();
    let reward = d.store.eval(a.reward, s).expect("reward defined");
    let mut next = s.clone();
    for (v, cpt) in &a.cpts {
        let p = d.store.eval(*cpt, s).expect("cpt defined");
        assert!(p.is_zero() || p.is_one(), "stochastic CPT in a deterministic oracle");
        next.set_bool(vocab.unprimed(*v), p.is_one());
    }
    for (v, cse) in &a.cses {
        let x = cse.eval(&with_next_bools(d, s, &next)).expect("cse defined");
        next.set_real(vocab.unprimed(*v), x);
    }
    (reward, next)
}

/// `s` extended with primed booleans taken from `next`, for CSE tests on
/// `b'`.
fn with_next_bools(d: &Domain, s: &State, next: &State) -> State {
    let vocab = d.store.vocab();
    let mut out = s.clone();
    for b in &d.mdp.bvars {
        if let Some(v) = xadd_sdp::Assignment::boolean(next, *b) {
            out.set_bool(vocab.primed(*b), v);
        }
    }
    out
}

/// Best discounted return over every action sequence of length `h`.
pub fn best_return(d: &Domain, s: &State, h: u32) -> Rational {
    if h == 0 {
        return Rational::zero();
    }
    d.mdp
        .actions
        .iter()
        .map(|a| {
            let (r, next) = step(d, a, s);
            r + &d.mdp.discount * best_return(d, &next, h - 1)
        })
        .max()
        .expect("at least one action")
}

/// Knapsack simulated directly from its description: moving source i
/// empties it into the knapsack when the result stays within 100.
pub fn knapsack_best(k: &Rational, x1: &Rational, x2: &Rational, h: u32) -> Rational {
    if h == 0 {
        return Rational::zero();
    }
    let cap = Rational::from_integer(100.into());
    let mut best = None::<Rational>;
    for i in 0..2 {
        let xi = if i == 0 { x1 } else { x2 };
        let (reward, k2, xi2) = if k + xi <= cap {
            (xi.clone(), k + xi, Rational::zero())
        } else {
            (Rational::zero(), k.clone(), xi.clone())
        };
        let rest = if i == 0 {
            knapsack_best(&k2, &xi2, x2, h - 1)
        } else {
            knapsack_best(&k2, x1, &xi2, h - 1)
        };
        let total = reward + rest;
        if best.as_ref().is_none_or(|b| total > *b) {
            best = Some(total);
        }
    }
    best.unwrap()
}

/// The closed form for two moves: both items if they fit together, else
/// the larger one that fits alone, else nothing.
pub fn knapsack_closed_form(k: &Rational, x1: &Rational, x2: &Rational) -> Rational {
    let cap = Rational::from_integer(100.into());
    let fit1 = k + x1 <= cap;
    let fit2 = k + x2 <= cap;
    if k + x1 + x2 <= cap {
        x1 + x2
    } else if fit1 && fit2 {
        x1.max(x2).clone()
    } else if fit1 {
        x1.clone()
    } else if fit2 {
        x2.clone()
    } else {
        Rational::zero()
    }
}

pub fn var(d: &Domain, name: &str) -> xadd_sdp::VarId {
    d.store.vocab().get(name).unwrap_or_else(|| panic!("no variable {name}"))
}

pub fn poly_var(d: &Domain, name: &str) -> Polynomial {
    Polynomial::var(var(d, name))
}

/// Whether every state variable of `d` is assigned in `s`.
pub fn complete(d: &Domain, s: &State) -> bool {
    let vocab = d.store.vocab();
    vocab.state_vars().all(|v| match vocab.kind(v) {
        VarKind::Boolean => xadd_sdp::Assignment::boolean(s, v).is_some(),
        VarKind::Continuous => xadd_sdp::Assignment::real(s, v).is_some(),
    })
}

pub fn one() -> Rational {
    Rational::one()
}

pub mod gen {
    //! Random diagrams over three continuous variables and one boolean.

    use rand::seq::SliceRandom;
    use rand::Rng;
    use xadd_sdp::{CaseTree, Cmp, Decision, Folded, Polynomial, State, VarId, Vocab};

    use super::{q, rand_rat};

    pub struct Space {
        pub vocab: Vocab,
        pub reals: Vec<VarId>,
        pub flag: VarId,
    }

    pub fn space() -> Space {
        let mut vocab = Vocab::new();
        let reals = ["a", "b", "c"]
            .iter()
            .map(|n| vocab.declare_real(n, q(-10, 1), q(10, 1)).unwrap())
            .collect();
        let flag = vocab.declare_bool("z").unwrap();
        Space { vocab, reals, flag }
    }

    pub fn monomial<R: Rng>(rng: &mut R, vars: &[VarId], degree: u32) -> Polynomial {
        let mut p = Polynomial::one();
        for _ in 0..degree {
            p = p * Polynomial::var(*vars.choose(rng).unwrap());
        }
        p
    }

    /// Up to three terms of degree at most `max_degree`.
    pub fn poly<R: Rng>(rng: &mut R, vars: &[VarId], max_degree: u32) -> Polynomial {
        let mut p = Polynomial::constant(rand_rat(rng, -5, 5, 2));
        for _ in 0..rng.gen_range(1..=3) {
            let d = rng.gen_range(1..=max_degree);
            let c = q(rng.gen_range(-5..=5), rng.gen_range(1..=3));
            p = p + monomial(rng, vars, d).scale(&c);
        }
        p
    }

    pub fn decision<R: Rng>(rng: &mut R, s: &Space) -> (Decision, bool) {
        if rng.gen_bool(0.15) {
            return (Decision::Bool(s.flag), false);
        }
        loop {
            let degree = if rng.gen_bool(0.75) { 1 } else { 2 };
            let p = poly(rng, &s.reals, degree);
            let op = *[Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge].choose(rng).unwrap();
            if let Folded::Test(d, flipped) = Decision::compare(&p, op, &Polynomial::zero()) {
                return (d, flipped);
            }
        }
    }

    /// A tree testing at most six distinct decisions, to depth four.
    pub fn tree<R: Rng>(rng: &mut R, s: &Space) -> CaseTree {
        let pool: Vec<(Decision, bool)> = (0..rng.gen_range(1..=6)).map(|_| decision(rng, s)).collect();
        grow(rng, s, &pool, 4)
    }

    fn grow<R: Rng>(rng: &mut R, s: &Space, pool: &[(Decision, bool)], depth: u32) -> CaseTree {
        if depth == 0 || rng.gen_bool(0.25) {
            return CaseTree::Leaf(poly(rng, &s.reals, 2));
        }
        let (d, flipped) = pool.choose(rng).unwrap().clone();
        let high = grow(rng, s, pool, depth - 1);
        let low = grow(rng, s, pool, depth - 1);
        CaseTree::test(Folded::Test(d, flipped), high, low)
    }

    pub fn point<R: Rng>(rng: &mut R, s: &Space) -> State {
        let mut st = State::new();
        for v in &s.reals {
            let den = rng.gen_range(1..=8);
            st.set_real(*v, rand_rat(rng, -10, 10, den));
        }
        st.set_bool(s.flag, rng.gen());
        st
    }
}

/// Expected-value lookahead: enumerates every joint outcome of the primed
/// booleans, weighting by CPT probabilities evaluated at `s`.
pub fn expectimax(d: &Domain, s: &State, h: u32) -> Rational {
    if h == 0 {
        return Rational::zero();
    }
    let vocab = d.store.vocab();
    let mut best = None::<Rational>;
    for a in &d.mdp.actions {
        let reward = d.store.eval(a.reward, s).expect("reward defined");
        let probs: Vec<(xadd_sdp::VarId, Rational)> = d
            .mdp
            .bvars
            .iter()
            .map(|b| {
                let p = match a.cpts.get(&vocab.primed(*b)) {
                    Some(cpt) => d.store.eval(*cpt, s).expect("cpt defined"),
                    None if xadd_sdp::Assignment::boolean(s, *b).unwrap() => Rational::one(),
                    None => Rational::zero(),
                };
                (*b, p)
            })
            .collect();
        let mut future = Rational::zero();
        for mask in 0..(1u32 << probs.len()) {
            let mut weight = Rational::one();
            let mut next = s.clone();
            let mut ext = s.clone();
            for (i, (b, p)) in probs.iter().enumerate() {
                let on = mask & (1 << i) != 0;
                weight *= if on { p.clone() } else { Rational::one() - p };
                next.set_bool(*b, on);
                ext.set_bool(vocab.primed(*b), on);
            }
            if weight.is_zero() {
                continue;
            }
            for (v, cse) in &a.cses {
                next.set_real(vocab.unprimed(*v), cse.eval(&ext).expect("cse defined"));
            }
            future += weight * expectimax(d, &next, h - 1);
        }
        let total = reward + &d.mdp.discount * future;
        if best.as_ref().is_none_or(|b| total > *b) {
            best = Some(total);
        }
    }
    best.expect("at least one action")
}
