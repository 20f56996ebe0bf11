//! Exact bounds by linear programming over response types.
//!
//! A response type assigns an outcome to every treatment, so there are
//! `n^m` of them. The unknowns are `q[t][j']`, the probability that a unit
//! has response type `t` and is observed under treatment `j'`. The
//! observational joint and every experimental point are linear in `q`, and so
//! is the probability of any counterfactual event; its tight bounds are the
//! minimum and maximum over the feasible polytope.
//!
//! Count-based datasets are solved in exact rational arithmetic when the
//! program is small, otherwise in floating point.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::frechet::Interval;
use crate::model::{Dataset, ExactTables, ProblemSpace};
use crate::query::{CanonicalEvent, CanonicalQuery, Evidence, Term};
use crate::simplex::{self, FeasibleTableau, Sense};
use crate::EPS_NUM;

/// Largest program solved in exact arithmetic.
pub const EXACT_LIMIT: usize = 81;
/// Default limit on the number of LP variables.
pub const DEFAULT_BUDGET: usize = 4096;
/// Denominator used to turn probability-valued datasets into rationals.
const RATIONALIZE: i64 = 1_000_000_000;

/// Every map from treatments to outcomes, lexicographic with treatment 0 as
/// the most significant digit.
pub fn response_types(m: usize, n: usize) -> Vec<Vec<usize>> {
    let count = n.pow(m as u32);
    (0..count)
        .map(|mut code| {
            let mut t = vec![0; m];
            for slot in t.iter_mut().rev() {
                *slot = code % n;
                code /= n;
            }
            t
        })
        .collect()
}

/// One equality constraint with unit coefficients.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub label: String,
    pub columns: Vec<usize>,
    pub rhs: BigRational,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    m: usize,
    types: Vec<Vec<usize>>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(space: &ProblemSpace, tables: &ExactTables) -> Self {
        let (m, n) = (space.m(), space.n());
        let types = response_types(m, n);
        let vars = types.len() * m;
        let mut constraints = vec![Constraint {
            label: "total".into(),
            columns: (0..vars).collect(),
            rhs: BigRational::one(),
        }];
        for j in 0..m {
            for i in 0..n {
                let columns = types
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t[j] == i)
                    .map(|(ti, _)| ti * m + j)
                    .collect();
                constraints.push(Constraint {
                    label: format!("obs_x{}_y{}", j + 1, i + 1),
                    columns,
                    rhs: tables.joint[j][i].clone(),
                });
            }
        }
        for j in 0..m {
            for i in 0..n {
                let columns = types
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t[j] == i)
                    .flat_map(|(ti, _)| (0..m).map(move |jp| ti * m + jp))
                    .collect();
                constraints.push(Constraint {
                    label: format!("exp_y{}_do_x{}", i + 1, j + 1),
                    columns,
                    rhs: tables.experimental[j][i].clone(),
                });
            }
        }
        Self { m, types, constraints }
    }

    pub fn variables(&self) -> usize {
        self.types.len() * self.m
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Indicator of the event `terms ∧ evidence` over the variables.
    pub fn objective(&self, terms: &[Term], evidence: &Evidence) -> Vec<bool> {
        let mut c = vec![false; self.variables()];
        for (ti, t) in self.types.iter().enumerate() {
            if !terms.iter().all(|term| t[term.treatment] == term.outcome) {
                continue;
            }
            for jp in 0..self.m {
                let x_ok = evidence.x.is_none_or(|p| p == jp);
                let y_ok = evidence.y.is_none_or(|q| t[jp] == q);
                c[ti * self.m + jp] = x_ok && y_ok;
            }
        }
        c
    }

    pub fn variable_name(&self, v: usize) -> String {
        let (ti, jp) = (v / self.m, v % self.m);
        let digits: String = self.types[ti].iter().map(|o| (o + 1).to_string()).collect();
        format!("q_t{digits}_x{}", jp + 1)
    }

    /// The program in CPLEX LP text format. Right-hand sides are printed
    /// as exact fractions in a comment and as decimals in the constraint.
    pub fn to_lp_text(&self, objective: Option<(&str, &[bool])>) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "\\ {} response types x {} observed treatments = {} variables",
            self.types.len(),
            self.m,
            self.variables()
        );
        let _ = writeln!(out, "Maximize");
        match objective {
            Some((name, c)) => {
                let _ = writeln!(out, "\\ {name}");
                let terms: Vec<String> = (0..c.len()).filter(|&v| c[v]).map(|v| self.variable_name(v)).collect();
                let body = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
                let _ = writeln!(out, " obj: {body}");
            }
            None => {
                let _ = writeln!(out, " obj: 0");
            }
        }
        let _ = writeln!(out, "Subject To");
        for con in &self.constraints {
            let lhs: Vec<String> = con.columns.iter().map(|&v| self.variable_name(v)).collect();
            let _ = writeln!(out, " \\ = {}", con.rhs);
            let _ = writeln!(
                out,
                " {}: {} = {}",
                con.label,
                lhs.join(" + "),
                con.rhs.to_f64().unwrap_or(f64::NAN)
            );
        }
        let _ = writeln!(out, "End");
        out
    }
}

/// Round a probability table to rationals with denominator
/// [`RATIONALIZE`], then move the rounding residue onto the largest entry of
/// each group so every group sums to exactly one.
fn rationalize(rows: &[Vec<f64>], per_row: bool) -> Vec<Vec<BigRational>> {
    let denom = BigInt::from(RATIONALIZE);
    let mut out: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|&p| BigRational::new(BigInt::from((p * RATIONALIZE as f64).round() as i64), denom.clone()))
                .collect()
        })
        .collect();
    let mut fix = |cells: Vec<(usize, usize)>| {
        let sum: BigRational = cells.iter().map(|&(a, b)| out[a][b].clone()).sum();
        let &(a, b) = cells
            .iter()
            .max_by(|x, y| out[x.0][x.1].cmp(&out[y.0][y.1]))
            .expect("non-empty table");
        let adjusted = &out[a][b] + (BigRational::one() - sum);
        if !adjusted.is_negative() {
            out[a][b] = adjusted;
        }
    };
    if per_row {
        for (a, row) in rows.iter().enumerate() {
            fix((0..row.len()).map(|b| (a, b)).collect());
        }
    } else {
        fix((0..rows.len()).flat_map(|a| (0..rows[a].len()).map(move |b| (a, b))).collect());
    }
    out
}

/// Exact tables of a dataset, rationalising probability-valued data.
pub fn exact_tables(ds: &Dataset) -> ExactTables {
    match ds.exact() {
        Some(t) => t.clone(),
        None => ExactTables {
            experimental: rationalize(ds.experimental_distribution().rows(), true),
            joint: rationalize(ds.observational_distribution().rows(), false),
        },
    }
}

#[derive(Debug, Clone)]
enum Solver {
    Exact(FeasibleTableau<BigRational>),
    Float(FeasibleTableau<f64>),
}

/// A dataset's linear program after phase 1, ready to bound queries.
#[derive(Debug, Clone)]
pub struct Oracle {
    lp: LinearProgram,
    tables: ExactTables,
    solver: Solver,
}

impl Oracle {
    pub fn new(ds: &Dataset) -> Result<Self> {
        Self::with_budget(ds, DEFAULT_BUDGET)
    }

    pub fn with_budget(ds: &Dataset, budget: usize) -> Result<Self> {
        Self::with_limits(ds, budget, EXACT_LIMIT)
    }

    /// Programs with at most `exact_limit` variables are solved in rationals,
    /// larger ones in floating point.
    pub fn with_limits(ds: &Dataset, budget: usize, exact_limit: usize) -> Result<Self> {
        let space = ds.space();
        let variables = space.n().checked_pow(space.m() as u32).map(|t| t * space.m());
        match variables {
            Some(v) if v <= budget => {}
            _ => {
                return Err(Error::BudgetExceeded {
                    variables: variables.unwrap_or(usize::MAX),
                    budget,
                })
            }
        }
        let tables = exact_tables(ds);
        let lp = LinearProgram::new(space, &tables);
        let rows: Vec<Vec<usize>> = lp.constraints.iter().map(|c| c.columns.clone()).collect();
        let solver = if lp.variables() <= exact_limit {
            let rhs: Vec<BigRational> = lp.constraints.iter().map(|c| c.rhs.clone()).collect();
            Solver::Exact(FeasibleTableau::from_unit_rows(lp.variables(), &rows, &rhs)?)
        } else {
            let rhs: Vec<f64> = lp.constraints.iter().map(|c| <f64 as simplex::Scalar>::from_rational(&c.rhs)).collect();
            Solver::Float(FeasibleTableau::from_unit_rows(lp.variables(), &rows, &rhs)?)
        };
        Ok(Self { lp, tables, solver })
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.solver, Solver::Exact(_))
    }

    pub fn linear_program(&self) -> &LinearProgram {
        &self.lp
    }

    fn evidence_probability(&self, ev: &Evidence) -> BigRational {
        let t = &self.tables;
        match (ev.x, ev.y) {
            (Some(p), Some(q)) => t.joint[p][q].clone(),
            (Some(p), None) => t.joint[p].iter().sum(),
            (None, Some(q)) => t.joint.iter().map(|r| r[q].clone()).sum(),
            (None, None) => BigRational::one(),
        }
    }

    /// Exact extremes of the event's probability, in rationals when the
    /// program is exact.
    fn extremes(&self, terms: &[Term], evidence: &Evidence) -> Result<(f64, f64)> {
        let c = self.lp.objective(terms, evidence);
        fn run<S: simplex::Scalar>(t: &FeasibleTableau<S>, c: &[bool]) -> Result<(S, S)> {
            let cost: Vec<S> = c.iter().map(|&b| if b { S::one() } else { S::zero() }).collect();
            Ok((t.solve(&cost, Sense::Minimize)?, t.solve(&cost, Sense::Maximize)?))
        }
        match &self.solver {
            Solver::Exact(t) => {
                let (lo, hi) = run(t, &c)?;
                Ok((simplex::Scalar::to_f64(&lo), simplex::Scalar::to_f64(&hi)))
            }
            Solver::Float(t) => run(t, &c),
        }
    }

    /// Tight bounds of a canonical query. Conditional queries divide the
    /// joint extremes by the probability of the conditioning event.
    pub fn tight_bounds(&self, query: &CanonicalQuery) -> Result<Interval> {
        let (terms, evidence): (&[Term], Evidence) = match &query.event {
            CanonicalEvent::Zero => return Ok(Interval::ZERO),
            CanonicalEvent::ExactObservational(ev) => (&[], *ev),
            CanonicalEvent::Standard(conj) => (&conj.terms, conj.evidence),
        };
        let (lo, hi) = self.extremes(terms, &evidence)?;
        let joint = Interval::new(lo, hi)?;
        match &query.condition {
            None => Ok(joint),
            Some(cond) => {
                let p = self.evidence_probability(cond);
                if p.is_zero() {
                    return Err(Error::ZeroEvidenceProbability(0.0));
                }
                let p = ToPrimitive::to_f64(&p).unwrap_or(0.0);
                if p < EPS_NUM {
                    return Err(Error::ZeroEvidenceProbability(p));
                }
                Ok(joint.scale_down(p))
            }
        }
    }

    /// The program with the query's objective, as LP text.
    pub fn dump(&self, query: &CanonicalQuery) -> String {
        let (name, c) = match &query.event {
            CanonicalEvent::Zero => ("impossible event".to_string(), vec![false; self.lp.variables()]),
            CanonicalEvent::ExactObservational(ev) => (format!("{ev:?}"), self.lp.objective(&[], ev)),
            CanonicalEvent::Standard(conj) => (conj.to_string(), self.lp.objective(&conj.terms, &conj.evidence)),
        };
        self.lp.to_lp_text(Some((&name, &c)))
    }
}

/// Tight bounds of `query` on `ds`.
pub fn tight_bounds(ds: &Dataset, query: &CanonicalQuery) -> Result<Interval> {
    Oracle::new(ds)?.tight_bounds(query)
}

/// Whether some joint distribution over response types and treatments
/// reproduces the dataset.
pub fn feasible(ds: &Dataset) -> Result<bool> {
    match Oracle::new(ds) {
        Ok(_) => Ok(true),
        Err(Error::Infeasible) => Ok(false),
        Err(e) => Err(e),
    }
}
