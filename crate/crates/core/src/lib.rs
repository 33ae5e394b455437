//! Exact symbolic dynamic programming for MDPs with boolean and bounded
//! continuous state, using extended algebraic decision diagrams (XADDs).
//!
//! Polynomials with rational coefficients are the leaf language
//! ([`poly`]); [`xadd`] stores piecewise polynomial functions as ordered,
//! reduced, shared diagrams; [`sdp`] runs value iteration over them.

mod lp;

pub mod cli;
pub mod domlang;
pub mod model;
pub mod poly;
pub mod prune;
pub mod sdp;
pub mod vars;
pub mod xadd;

pub use domlang::{parse_case, parse_domain, serialize_domain, ParseError, SourceSpan};
pub use model::{Action, ContinuousVar, Dcmdp, Domain, Violation};
pub use poly::{rat, ratio, Cmp, Decision, Folded, Polynomial, Rational};
pub use prune::{feasible, prune, ConstraintSet, Pruner};
pub use sdp::{solve, SolveOptions, SolveResult};
pub use vars::{Assignment, State, VarId, VarKind, Vocab};
pub use xadd::{CaseTree, NodeRef, Op, Substitution, XaddError, XaddStore};
