//! Canonical sparse multivariate polynomials with exact rational
//! coefficients, and normalization of comparisons into decisions.
//!
//! A [`Polynomial`] is a map from [`Monomial`] to a nonzero coefficient.
//! Monomials are kept in graded lexicographic order over the global
//! variable order, so two polynomials are equal as functions exactly when
//! their term maps are equal.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::vars::{Assignment, VarId, Vocab};

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("variable #{0} is unassigned")]
    Unassigned(VarId),
    #[error("substitution is not disjoint: variable #{0} is both replaced and used in a replacement")]
    SubstitutionOverlap(VarId),
    #[error("comparison between constants has no decision form")]
    ConstantComparison,
}

/// Product of variables raised to positive powers, sorted by variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(VarId, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: VarId) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(VarId, u32)] {
        &self.0
    }

    fn product(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            match a.0.cmp(&b.0) {
                Ordering::Less => {
                    out.push(a);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a.0, a.1 + b.1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }
}

/// Leading monomials sort first: higher total degree, then lexicographic
/// with earlier variables and higher exponents first.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        other.degree().cmp(&self.degree()).then_with(|| {
            for (a, b) in self.0.iter().zip(other.0.iter()) {
                if a.0 != b.0 {
                    return a.0.cmp(&b.0);
                }
                if a.1 != b.1 {
                    return b.1.cmp(&a.1);
                }
            }
            other.0.len().cmp(&self.0.len())
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Polynomial { terms }
    }

    pub fn int(n: i64) -> Self {
        Self::constant(rat(n))
    }

    pub fn var(v: VarId) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::var(v), Rational::one());
        Polynomial { terms }
    }

    pub fn term(coefficient: Rational, monomial: Monomial) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(monomial, coefficient);
        p
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value of a constant polynomial, `None` otherwise.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    pub fn constant_term(&self) -> Rational {
        self.terms
            .get(&Monomial::one())
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn is_linear(&self) -> bool {
        self.degree() <= 1
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn leading_coefficient(&self) -> Option<&Rational> {
        self.terms.values().next()
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(v, _)| *v))
            .collect()
    }

    pub fn mentions(&self, v: VarId) -> bool {
        self.terms.keys().any(|m| m.0.iter().any(|(w, _)| *w == v))
    }

    /// Coefficients of a polynomial of degree at most one, as
    /// `(variable coefficients, constant)`.
    pub fn linear_parts(&self) -> Option<(Vec<(VarId, Rational)>, Rational)> {
        if !self.is_linear() {
            return None;
        }
        let coeffs = self
            .terms
            .iter()
            .filter(|(m, _)| !m.is_one())
            .map(|(m, c)| (m.0[0].0, c.clone()))
            .collect();
        Some((coeffs, self.constant_term()))
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), k * c))
                .collect(),
        }
    }

    pub fn pow(&self, exp: u32) -> Polynomial {
        let mut result = Polynomial::one();
        for _ in 0..exp {
            result = &result * self;
        }
        result
    }

    /// Replaces each key of `sigma` by its polynomial. Fails when a variable
    /// occurring in some replacement is itself a key.
    pub fn subst(&self, sigma: &BTreeMap<VarId, Polynomial>) -> Result<Polynomial, PolyError> {
        check_disjoint(sigma)?;
        Ok(self.subst_unchecked(sigma))
    }

    pub(crate) fn subst_unchecked(&self, sigma: &BTreeMap<VarId, Polynomial>) -> Polynomial {
        if sigma.is_empty() || !self.vars().iter().any(|v| sigma.contains_key(v)) {
            return self.clone();
        }
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut kept = Monomial::one();
            let mut factor = Polynomial::constant(c.clone());
            for &(v, e) in &m.0 {
                match sigma.get(&v) {
                    Some(rep) => factor = &factor * &rep.pow(e),
                    None => kept = kept.product(&Monomial(vec![(v, e)])),
                }
            }
            for (fm, fc) in factor.terms {
                out.add_term(fm.product(&kept), fc);
            }
        }
        out
    }

    pub fn eval<A: Assignment + ?Sized>(&self, values: &A) -> Result<Rational, PolyError> {
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for &(v, e) in &m.0 {
                let x = values.real(v).ok_or(PolyError::Unassigned(v))?;
                term *= num_traits::pow(x.clone(), e as usize);
            }
            total += term;
        }
        Ok(total)
    }

    /// Rescales to coprime integer coefficients with a positive leading
    /// coefficient. Returns the scaled polynomial and whether it was negated.
    fn primitive(&self) -> (Polynomial, bool) {
        let mut lcm = BigInt::one();
        let mut gcd = BigInt::zero();
        for c in self.terms.values() {
            lcm = lcm.lcm(c.denom());
            gcd = gcd.gcd(c.numer());
        }
        let negate = self
            .leading_coefficient()
            .map(|c| c.is_negative())
            .unwrap_or(false);
        let mut factor = Rational::new(lcm, if gcd.is_zero() { BigInt::one() } else { gcd });
        if negate {
            factor = -factor;
        }
        (self.scale(&factor), negate)
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocab) -> PolyDisplay<'a> {
        PolyDisplay { poly: self, vocab }
    }
}

pub(crate) fn check_disjoint(sigma: &BTreeMap<VarId, Polynomial>) -> Result<(), PolyError> {
    for rep in sigma.values() {
        if let Some(v) = rep.vars().into_iter().find(|v| sigma.contains_key(v)) {
            return Err(PolyError::SubstitutionOverlap(v));
        }
    }
    Ok(())
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.product(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(&-Rational::one())
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: Polynomial) -> Polynomial {
        &self + &rhs
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        &self - &rhs
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

pub struct PolyDisplay<'a> {
    poly: &'a Polynomial,
    vocab: &'a Vocab,
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.poly.terms.iter().enumerate() {
            let magnitude = c.abs();
            match (i, c.is_negative()) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if m.is_one() {
                write!(f, "{magnitude}")?;
                continue;
            }
            if !magnitude.is_one() {
                write!(f, "{magnitude}*")?;
            }
            for (j, (v, e)) in m.0.iter().enumerate() {
                if j > 0 {
                    f.write_str("*")?;
                }
                f.write_str(self.vocab.name(*v))?;
                if *e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Cmp::Lt => lhs < rhs,
            Cmp::Le => lhs <= rhs,
            Cmp::Gt => lhs > rhs,
            Cmp::Ge => lhs >= rhs,
        }
    }
}

/// Internal-node test of a decision diagram.
///
/// `Ineq { poly, strict }` means `poly > 0` when strict and `poly >= 0`
/// otherwise; `poly` always has coprime integer coefficients and a positive
/// leading coefficient.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    Bool(VarId),
    Ineq { poly: Polynomial, strict: bool },
}

/// Result of normalizing a test that might be constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Folded {
    Const(bool),
    /// The test is equivalent to the decision, or to its negation if the
    /// flag is set.
    Test(Decision, bool),
}

impl Decision {
    /// Normalizes `p > 0` (strict) or `p >= 0` into a canonical decision.
    pub fn compare_zero(p: &Polynomial, strict: bool) -> Folded {
        if let Some(c) = p.as_constant() {
            return Folded::Const(if strict { c.is_positive() } else { !c.is_negative() });
        }
        let (poly, negated) = p.primitive();
        if negated {
            // p > 0  <=>  not(-p >= 0);  p >= 0  <=>  not(-p > 0)
            Folded::Test(Decision::Ineq { poly, strict: !strict }, true)
        } else {
            Folded::Test(Decision::Ineq { poly, strict }, false)
        }
    }

    pub fn compare(lhs: &Polynomial, op: Cmp, rhs: &Polynomial) -> Folded {
        let diff = lhs - rhs;
        match op {
            Cmp::Gt => Self::compare_zero(&diff, true),
            Cmp::Ge => Self::compare_zero(&diff, false),
            Cmp::Lt => negate(Self::compare_zero(&diff, false)),
            Cmp::Le => negate(Self::compare_zero(&diff, true)),
        }
    }

    pub fn holds<A: Assignment + ?Sized>(&self, values: &A) -> Result<bool, PolyError> {
        match self {
            Decision::Bool(v) => values.boolean(*v).ok_or(PolyError::Unassigned(*v)),
            Decision::Ineq { poly, strict } => {
                let value = poly.eval(values)?;
                Ok(if *strict {
                    value.is_positive()
                } else {
                    !value.is_negative()
                })
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        match self {
            Decision::Bool(v) => std::iter::once(*v).collect(),
            Decision::Ineq { poly, .. } => poly.vars(),
        }
    }

    pub fn mentions(&self, v: VarId) -> bool {
        match self {
            Decision::Bool(w) => *w == v,
            Decision::Ineq { poly, .. } => poly.mentions(v),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Decision::Ineq { poly, .. } if poly.is_linear())
    }

    /// Renders the decision, or its negation, as a comparison with the
    /// constant moved to the right-hand side (`k + x1 > 100`).
    pub fn display<'a>(&'a self, vocab: &'a Vocab, negated: bool) -> DecisionDisplay<'a> {
        DecisionDisplay {
            decision: self,
            vocab,
            negated,
        }
    }
}

fn negate(folded: Folded) -> Folded {
    match folded {
        Folded::Const(b) => Folded::Const(!b),
        Folded::Test(d, flipped) => Folded::Test(d, !flipped),
    }
}

/// Canonical decision for `lhs op rhs`. The flag reports that the
/// comparison is equivalent to the negation of the returned decision.
pub fn normalize_cmp(
    lhs: &Polynomial,
    op: Cmp,
    rhs: &Polynomial,
) -> Result<(Decision, bool), PolyError> {
    match Decision::compare(lhs, op, rhs) {
        Folded::Const(_) => Err(PolyError::ConstantComparison),
        Folded::Test(d, flipped) => Ok((d, flipped)),
    }
}

pub struct DecisionDisplay<'a> {
    decision: &'a Decision,
    vocab: &'a Vocab,
    negated: bool,
}

impl fmt::Display for DecisionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.decision {
            Decision::Bool(v) => {
                if self.negated {
                    f.write_str("!")?;
                }
                f.write_str(self.vocab.name(*v))
            }
            Decision::Ineq { poly, strict } => {
                let constant = poly.constant_term();
                let lhs = poly - &Polynomial::constant(constant.clone());
                let op = match (strict, self.negated) {
                    (true, false) => ">",
                    (false, false) => ">=",
                    (true, true) => "<=",
                    (false, true) => "<",
                };
                write!(f, "{} {} {}", lhs.display(self.vocab), op, -constant)
            }
        }
    }
}
