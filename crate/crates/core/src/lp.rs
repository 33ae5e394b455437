//! Dense two-phase simplex over exact rationals with Bland's rule.
//!
//! Problems are `maximize c·y` subject to rows `a·y (<=|>=|=) b` and
//! `y >= 0`. Sizes here are tiny (path constraints of one diagram path), so
//! a dense tableau is fine.

use num_traits::{One, Signed, Zero};

use crate::poly::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum LpOutcome {
    Infeasible,
    Unbounded,
    Optimal(Rational),
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Lp {
    columns: usize,
    rows: Vec<(Vec<Rational>, RowKind, Rational)>,
}

impl Lp {
    pub fn new(columns: usize) -> Self {
        Lp {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn add_row(&mut self, coeffs: Vec<Rational>, kind: RowKind, rhs: Rational) {
        debug_assert_eq!(coeffs.len(), self.columns);
        self.rows.push((coeffs, kind, rhs));
    }

    pub fn is_feasible(&self) -> bool {
        self.phase_one().is_some()
    }

    pub fn maximize(&self, objective: &[Rational]) -> LpOutcome {
        let Some(mut tableau) = self.phase_one() else {
            return LpOutcome::Infeasible;
        };
        let mut cost = vec![Rational::zero(); tableau.width];
        cost[..self.columns].clone_from_slice(objective);
        let allowed: Vec<bool> = (0..tableau.width).map(|j| j < tableau.artificial_start).collect();
        match tableau.optimize(&cost, &allowed) {
            Ok(()) => LpOutcome::Optimal(tableau.value(&cost)),
            Err(()) => LpOutcome::Unbounded,
        }
    }

    /// Builds the equality-form tableau and drives the artificial variables
    /// to zero. Returns `None` when the system is infeasible.
    fn phase_one(&self) -> Option<Tableau> {
        let m = self.rows.len();
        let slack_count = self
            .rows
            .iter()
            .filter(|(_, kind, _)| *kind != RowKind::Eq)
            .count();
        let artificial_start = self.columns + slack_count;
        let width = artificial_start + m;
        let mut a = Vec::with_capacity(m);
        let mut slack = self.columns;
        for (i, (coeffs, kind, rhs)) in self.rows.iter().enumerate() {
            let mut row = vec![Rational::zero(); width + 1];
            row[..self.columns].clone_from_slice(coeffs);
            match kind {
                RowKind::Le => {
                    row[slack] = Rational::one();
                    slack += 1;
                }
                RowKind::Ge => {
                    row[slack] = -Rational::one();
                    slack += 1;
                }
                RowKind::Eq => {}
            }
            row[width] = rhs.clone();
            if rhs.is_negative() {
                for x in row.iter_mut() {
                    *x = -x.clone();
                }
            }
            row[artificial_start + i] = Rational::one();
            a.push(row);
        }
        let mut tableau = Tableau {
            a,
            basis: (artificial_start..width).collect(),
            width,
            artificial_start,
        };
        let mut cost = vec![Rational::zero(); width];
        for c in cost.iter_mut().skip(artificial_start) {
            *c = -Rational::one();
        }
        let allowed = vec![true; width];
        // Phase one is bounded above by zero.
        tableau.optimize(&cost, &allowed).ok()?;
        if tableau.value(&cost).is_negative() {
            return None;
        }
        tableau.evict_artificials();
        Some(tableau)
    }
}

struct Tableau {
    /// `m` rows of `width` coefficients followed by the right-hand side.
    a: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    width: usize,
    artificial_start: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = Rational::one() / &self.a[r][c];
        for x in self.a[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let factor = row[c].clone();
            for (x, p) in row.iter_mut().zip(pivot_row.iter()) {
                if !p.is_zero() {
                    *x -= &factor * p;
                }
            }
        }
        self.basis[r] = c;
    }

    fn value(&self, cost: &[Rational]) -> Rational {
        self.basis
            .iter()
            .zip(self.a.iter())
            .map(|(&b, row)| &cost[b] * &row[self.width])
            .fold(Rational::zero(), |acc, x| acc + x)
    }

    fn reduced_cost(&self, cost: &[Rational], j: usize) -> Rational {
        let mut r = cost[j].clone();
        for (&b, row) in self.basis.iter().zip(self.a.iter()) {
            if !row[j].is_zero() && !cost[b].is_zero() {
                r -= &cost[b] * &row[j];
            }
        }
        r
    }

    /// Maximizes `cost` over columns flagged in `allowed`; `Err` when
    /// unbounded.
    fn optimize(&mut self, cost: &[Rational], allowed: &[bool]) -> Result<(), ()> {
        loop {
            let entering = (0..self.width).find(|&j| {
                allowed[j] && !self.basis.contains(&j) && self.reduced_cost(cost, j).is_positive()
            });
            let Some(c) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, Rational)> = None;
            for (i, row) in self.a.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                let ratio = &row[self.width] / &row[c];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => {
                        ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            let Some((r, _)) = best else {
                return Err(());
            };
            self.pivot(r, c);
        }
    }

    /// After a successful phase one, pivots zero-valued artificials out of
    /// the basis and drops rows that turn out to be redundant.
    fn evict_artificials(&mut self) {
        let mut i = 0;
        while i < self.a.len() {
            if self.basis[i] >= self.artificial_start {
                let replacement =
                    (0..self.artificial_start).find(|&j| !self.a[i][j].is_zero());
                match replacement {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.a.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
}
