//! State variables, their primed twins, and concrete state assignments.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::poly::Rational;

/// Handle of a variable registered in a [`Vocab`].
///
/// The numeric order of handles is the global variable order used for
/// monomial ordering and for boolean decision ranks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    Boolean,
    Continuous,
}

#[derive(Clone, Debug)]
pub struct VarInfo {
    pub name: String,
    pub kind: VarKind,
    pub primed: bool,
    /// The primed variable for a current-state variable and vice versa.
    pub twin: VarId,
    pub bounds: Option<(Rational, Rational)>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VocabError {
    #[error("variable `{0}` declared twice")]
    Duplicate(String),
    #[error("`{0}` is not a valid variable name")]
    InvalidName(String),
    #[error("inverted bounds for `{name}`: [{lower}, {upper}]")]
    InvertedBounds {
        name: String,
        lower: String,
        upper: String,
    },
}

/// Registry of state variables. Declaring a variable also declares its
/// primed twin (`x` and `x'`), immediately after it in the global order.
#[derive(Clone, Debug, Default)]
pub struct Vocab {
    vars: Vec<VarInfo>,
    by_name: HashMap<String, VarId>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare_bool(&mut self, name: &str) -> Result<VarId, VocabError> {
        self.declare(name, VarKind::Boolean, None)
    }

    pub fn declare_real(
        &mut self,
        name: &str,
        lower: Rational,
        upper: Rational,
    ) -> Result<VarId, VocabError> {
        if lower > upper {
            return Err(VocabError::InvertedBounds {
                name: name.to_string(),
                lower: lower.to_string(),
                upper: upper.to_string(),
            });
        }
        self.declare(name, VarKind::Continuous, Some((lower, upper)))
    }

    /// Declares a continuous variable without box bounds.
    pub fn declare_free(&mut self, name: &str) -> Result<VarId, VocabError> {
        self.declare(name, VarKind::Continuous, None)
    }

    fn declare(
        &mut self,
        name: &str,
        kind: VarKind,
        bounds: Option<(Rational, Rational)>,
    ) -> Result<VarId, VocabError> {
        if !is_identifier(name) {
            return Err(VocabError::InvalidName(name.to_string()));
        }
        let primed_name = format!("{name}'");
        if self.by_name.contains_key(name) || self.by_name.contains_key(&primed_name) {
            return Err(VocabError::Duplicate(name.to_string()));
        }
        let id = VarId(self.vars.len() as u32);
        let twin = VarId(id.0 + 1);
        self.vars.push(VarInfo {
            name: name.to_string(),
            kind,
            primed: false,
            twin,
            bounds: bounds.clone(),
        });
        self.vars.push(VarInfo {
            name: primed_name.clone(),
            kind,
            primed: true,
            twin: id,
            bounds,
        });
        self.by_name.insert(name.to_string(), id);
        self.by_name.insert(primed_name, twin);
        Ok(id)
    }

    /// Looks up a variable by name; `x'` resolves to the primed twin.
    pub fn get(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn info(&self, v: VarId) -> &VarInfo {
        &self.vars[v.index()]
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.vars[v.index()].name
    }

    pub fn kind(&self, v: VarId) -> VarKind {
        self.vars[v.index()].kind
    }

    pub fn is_primed(&self, v: VarId) -> bool {
        self.vars[v.index()].primed
    }

    pub fn bounds(&self, v: VarId) -> Option<&(Rational, Rational)> {
        self.vars[v.index()].bounds.as_ref()
    }

    /// The next-state twin of `v` (identity on primed variables).
    pub fn primed(&self, v: VarId) -> VarId {
        let info = self.info(v);
        if info.primed {
            v
        } else {
            info.twin
        }
    }

    /// The current-state twin of `v` (identity on unprimed variables).
    pub fn unprimed(&self, v: VarId) -> VarId {
        let info = self.info(v);
        if info.primed {
            info.twin
        } else {
            v
        }
    }

    /// Current-state variables in declaration order.
    pub fn state_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, info)| !info.primed)
            .map(|(i, _)| VarId(i as u32))
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

pub(crate) fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Read access to variable values.
pub trait Assignment {
    fn real(&self, v: VarId) -> Option<&Rational>;
    fn boolean(&self, v: VarId) -> Option<bool>;
}

/// A (possibly partial) assignment of boolean and continuous variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct State {
    reals: HashMap<VarId, Rational>,
    bools: HashMap<VarId, bool>,
}

impl State {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_real(&mut self, v: VarId, value: Rational) -> &mut Self {
        self.reals.insert(v, value);
        self
    }

    pub fn set_bool(&mut self, v: VarId, value: bool) -> &mut Self {
        self.bools.insert(v, value);
        self
    }

    pub fn with_real(mut self, v: VarId, value: Rational) -> Self {
        self.reals.insert(v, value);
        self
    }

    pub fn with_bool(mut self, v: VarId, value: bool) -> Self {
        self.bools.insert(v, value);
        self
    }

    pub fn reals(&self) -> impl Iterator<Item = (VarId, &Rational)> {
        self.reals.iter().map(|(v, r)| (*v, r))
    }

    pub fn bools(&self) -> impl Iterator<Item = (VarId, bool)> + '_ {
        self.bools.iter().map(|(v, b)| (*v, *b))
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.reals.contains_key(&v) || self.bools.contains_key(&v)
    }
}

impl Assignment for State {
    fn real(&self, v: VarId) -> Option<&Rational> {
        self.reals.get(&v)
    }

    fn boolean(&self, v: VarId) -> Option<bool> {
        self.bools.get(&v).copied()
    }
}

impl Assignment for HashMap<VarId, Rational> {
    fn real(&self, v: VarId) -> Option<&Rational> {
        self.get(&v)
    }

    fn boolean(&self, _v: VarId) -> Option<bool> {
        None
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarKind::Boolean => f.write_str("bvar"),
            VarKind::Continuous => f.write_str("cvar"),
        }
    }
}
