//! Dense two-phase tableau simplex with Bland's rule, generic over the
//! scalar field.
//!
//! Problems are in equality form `A q = b`, `q >= 0`, `b >= 0`. Phase 1 runs
//! once; the resulting feasible basis is then reused for any number of
//! objectives.

use std::fmt::Debug;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Field operations and sign tests the tableau needs.
pub trait Scalar: Clone + Debug + PartialOrd {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(r: &BigRational) -> Self;
    fn to_f64(&self) -> f64;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn is_positive(&self) -> bool;
    fn is_negative(&self) -> bool;
    fn is_zero(&self) -> bool {
        !self.is_positive() && !self.is_negative()
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
}

/// Pivot tolerance for the floating-point tableau.
const FLOAT_TOL: f64 = 1e-9;

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_rational(r: &BigRational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_positive(&self) -> bool {
        *self > FLOAT_TOL
    }
    fn is_negative(&self) -> bool {
        *self < -FLOAT_TOL
    }
}

/// A basic feasible solution in canonical form: each row holds
/// `B^{-1} A | B^{-1} b`, and `basis[r]` is the column basic in row `r`.
#[derive(Debug, Clone)]
pub struct FeasibleTableau<S> {
    columns: usize,
    rows: Vec<Vec<S>>,
    basis: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

fn pivot<S: Scalar>(rows: &mut [Vec<S>], objective: &mut [S], r: usize, c: usize) {
    let p = rows[r][c].clone();
    for v in rows[r].iter_mut() {
        *v = v.div(&p);
    }
    let pivot_row = rows[r].clone();
    let eliminate = |row: &mut [S]| {
        let f = row[c].clone();
        if f.is_zero() {
            // float noise below the tolerance is dropped as well
            row[c] = S::zero();
            return;
        }
        for (v, pv) in row.iter_mut().zip(&pivot_row) {
            if !pv.is_zero() {
                *v = v.sub(&f.mul(pv));
            }
        }
        row[c] = S::zero();
    };
    for (i, row) in rows.iter_mut().enumerate() {
        if i != r {
            eliminate(row);
        }
    }
    eliminate(objective);
}

/// Minimise with Bland's rule. `objective` holds reduced costs for every
/// column followed by minus the current objective value. Only the first
/// `allowed` columns may enter the basis.
fn optimise<S: Scalar>(rows: &mut [Vec<S>], basis: &mut [usize], objective: &mut [S], allowed: usize) -> Result<()> {
    let rhs = objective.len() - 1;
    loop {
        let Some(enter) = (0..allowed).find(|&c| objective[c].is_negative()) else {
            return Ok(());
        };
        let mut leave: Option<(usize, S)> = None;
        for (r, row) in rows.iter().enumerate() {
            if !row[enter].is_positive() {
                continue;
            }
            let ratio = row[rhs].div(&row[enter]);
            let better = match &leave {
                None => true,
                Some((best_r, best)) => ratio < *best || (ratio == *best && basis[r] < basis[*best_r]),
            };
            if better {
                leave = Some((r, ratio));
            }
        }
        let Some((r, _)) = leave else {
            return Err(Error::Unbounded);
        };
        pivot(rows, objective, r, enter);
        basis[r] = enter;
    }
}

impl<S: Scalar> FeasibleTableau<S> {
    /// Phase 1 on `A q = b`. Constraint rows are given sparsely as the
    /// columns holding a coefficient of one. Redundant rows are dropped.
    pub fn from_unit_rows(columns: usize, rows: &[Vec<usize>], rhs: &[S]) -> Result<Self> {
        let m = rows.len();
        let width = columns + m + 1;
        let mut tab: Vec<Vec<S>> = rows
            .iter()
            .enumerate()
            .map(|(r, cols)| {
                let mut row = vec![S::zero(); width];
                for &c in cols {
                    row[c] = S::one();
                }
                row[columns + r] = S::one();
                row[width - 1] = rhs[r].clone();
                row
            })
            .collect();
        let mut basis: Vec<usize> = (columns..columns + m).collect();
        // phase-one objective: minimise the sum of the artificials
        let mut objective = vec![S::zero(); width];
        for row in &tab {
            for (o, v) in objective.iter_mut().zip(row) {
                *o = o.sub(v);
            }
        }
        for o in &mut objective[columns..columns + m] {
            *o = S::zero();
        }
        optimise(&mut tab, &mut basis, &mut objective, columns + m)?;
        if objective[width - 1].is_negative() {
            return Err(Error::Infeasible);
        }
        // drive remaining artificials out of the basis, dropping redundant rows
        let mut r = 0;
        while r < tab.len() {
            if basis[r] >= columns {
                match (0..columns).find(|&c| !tab[r][c].is_zero()) {
                    Some(c) => {
                        pivot(&mut tab, &mut objective, r, c);
                        basis[r] = c;
                    }
                    None => {
                        tab.remove(r);
                        basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        for row in &mut tab {
            let b = row[width - 1].clone();
            row.truncate(columns);
            row.push(b);
        }
        Ok(Self {
            columns,
            rows: tab,
            basis,
        })
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    /// Optimal value of `c · q` over the feasible region.
    pub fn solve(&self, cost: &[S], sense: Sense) -> Result<S> {
        let mut rows = self.rows.clone();
        let mut basis = self.basis.clone();
        let signed: Vec<S> = match sense {
            Sense::Minimize => cost.to_vec(),
            Sense::Maximize => cost.iter().map(Scalar::neg).collect(),
        };
        let mut objective = signed.clone();
        objective.push(S::zero());
        for (row, &b) in rows.iter().zip(&basis) {
            let cb = &signed[b];
            if cb.is_zero() {
                continue;
            }
            for (o, v) in objective.iter_mut().zip(row) {
                *o = o.sub(&cb.mul(v));
            }
        }
        optimise(&mut rows, &mut basis, &mut objective, self.columns)?;
        let value = objective[self.columns].neg();
        Ok(match sense {
            Sense::Minimize => value,
            Sense::Maximize => value.neg(),
        })
    }
}
