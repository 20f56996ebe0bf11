//! Closed-form bounds on probabilities of causation.
//!
//! Single-term events use direct formulas in the experimental point
//! `P(y_i | do(x_j))` and observational cells. Conjunctions of `k >= 2` terms
//! combine three families of candidate bounds and keep the tightest:
//!
//! * Fréchet bounds over the `k` experimental points and the evidence;
//! * leave-one-out: bounds of the `(k-1)`-term conjunction combined with the
//!   dropped term;
//! * decomposition over the observed treatment (for events without an
//!   observed `X`): `P(A) = Σ_p P(A, x_p)`, where `x_p` matching a term's
//!   treatment turns that term into the observation `(x_p, y_i)`.
//!
//! Every recursive call strictly reduces the number of counterfactual terms,
//! except decomposition summands, which keep `k` but gain an observed `X`
//! and therefore never decompose again.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frechet::Interval;
use crate::model::Dataset;
use crate::query::{canonicalize, CanonicalEvent, CanonicalQuery, Conjunction, Evidence, Query, Term};
use crate::EPS_NUM;

#[derive(Debug, Clone)]
pub struct EngineOptions {
    pub memoize: bool,
    /// Largest number of counterfactual terms accepted.
    pub max_terms: usize,
    /// Refuse datasets whose validation report is not clean.
    pub strict: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            memoize: true,
            max_terms: 8,
            strict: false,
        }
    }
}

/// Which rule produced a trace node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Theorem {
    /// `P(y_i_{x_j}, y_i)`
    T1,
    /// `P(y_i_{x_j}, y_k)`, `k != i`
    T2,
    /// `P(y_i_{x_j}, x_k)`, `k != j`
    T3,
    /// `P(y_i_{x_j}, x_p, y_k)`, `p != j`
    T4,
    /// conjunction, no evidence
    T5,
    /// conjunction with observed `X`
    T6,
    /// conjunction with observed `Y`
    T7,
    /// conjunction with observed `X` and `Y`
    T8,
    /// An experimental point or an observational cell/marginal.
    Exact,
    Zero,
    /// Joint bound divided by the probability of the conditioning event.
    Conditional,
    #[serde(rename = "TP-PNS")]
    TpPns,
    #[serde(rename = "TP-PN")]
    TpPn,
    #[serde(rename = "TP-PS")]
    TpPs,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub label: String,
    /// Value before clamping to `[0, 1]`; lower candidates may be negative.
    pub value: f64,
}

/// Derivation tree of a bound. Shared subtrees (memoised subqueries) are
/// reference counted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTrace {
    pub query: String,
    pub theorem: Theorem,
    pub lower_branch: String,
    pub upper_branch: String,
    pub lo: f64,
    pub hi: f64,
    pub lower_candidates: Vec<Branch>,
    pub upper_candidates: Vec<Branch>,
    pub children: Vec<Arc<BoundTrace>>,
}

impl BoundTrace {
    pub fn interval(&self) -> Interval {
        Interval { lo: self.lo, hi: self.hi }
    }

    /// Depth-first search for the node bounding `query` (as printed).
    pub fn find(&self, query: &str) -> Option<&BoundTrace> {
        if self.query == query {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(query))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialises")
    }
}

#[derive(Debug, Clone)]
pub struct BoundResult {
    pub interval: Interval,
    pub trace: Arc<BoundTrace>,
    /// Distinct subqueries bounded while answering the query.
    pub stats_evaluated: usize,
}

/// The largest number of subqueries the recursion is expected to visit for
/// `k` counterfactual terms, `2^(k+2)`.
pub fn recursion_budget(k: usize) -> usize {
    1usize << (k + 2)
}

/// Bound a query with default options.
pub fn bound(dataset: &Dataset, query: &Query) -> Result<BoundResult> {
    bound_with(dataset, query, &EngineOptions::default())
}

pub fn bound_with(dataset: &Dataset, query: &Query, options: &EngineOptions) -> Result<BoundResult> {
    query.check(dataset.space())?;
    bound_canonical(dataset, &canonicalize(query), options)
}

pub fn bound_canonical(dataset: &Dataset, query: &CanonicalQuery, options: &EngineOptions) -> Result<BoundResult> {
    if options.strict && !dataset.validation().ok {
        return Err(Error::Validation(dataset.validation().clone()));
    }
    let mut eval = Evaluator::new(dataset, options.memoize);
    let joint = match &query.event {
        CanonicalEvent::Zero => Arc::new(point_node("impossible event".into(), Theorem::Zero, "zero", 0.0)),
        CanonicalEvent::ExactObservational(ev) => {
            let p = evidence_probability(dataset, ev);
            Arc::new(point_node(observational_name(ev), Theorem::Exact, "observational", p))
        }
        CanonicalEvent::Standard(conj) => {
            if conj.k() > options.max_terms {
                return Err(Error::TooManyTerms {
                    k: conj.k(),
                    limit: options.max_terms,
                });
            }
            eval.eval(conj)?
        }
    };
    let trace = match &query.condition {
        None => joint,
        Some(condition) => Arc::new(condition_node(dataset, joint, condition)?),
    };
    Ok(BoundResult {
        interval: trace.interval(),
        trace,
        stats_evaluated: eval.seen.len(),
    })
}

/// `P(x_p, y_q)`, `P(x_p)`, `P(y_q)` or 1, depending on which events are
/// present.
pub fn evidence_probability(dataset: &Dataset, ev: &Evidence) -> f64 {
    match (ev.x, ev.y) {
        (Some(p), Some(q)) => dataset.joint(p, q),
        (Some(p), None) => dataset.p_x(p),
        (None, Some(q)) => dataset.p_y(q),
        (None, None) => 1.0,
    }
}

fn observational_name(ev: &Evidence) -> String {
    Conjunction {
        terms: Vec::new(),
        evidence: *ev,
    }
    .to_string()
}

fn condition_node(dataset: &Dataset, joint: Arc<BoundTrace>, condition: &Evidence) -> Result<BoundTrace> {
    let p = evidence_probability(dataset, condition);
    if p < EPS_NUM {
        return Err(Error::ZeroEvidenceProbability(p));
    }
    let scaled = joint.interval().scale_down(p);
    Ok(BoundTrace {
        query: format!("{} / {}", joint.query, observational_name(condition)),
        theorem: Theorem::Conditional,
        lower_branch: "joint / evidence".into(),
        upper_branch: "joint / evidence".into(),
        lo: scaled.lo,
        hi: scaled.hi,
        lower_candidates: vec![Branch {
            label: "joint / evidence".into(),
            value: joint.lo / p,
        }],
        upper_candidates: vec![Branch {
            label: "joint / evidence".into(),
            value: joint.hi / p,
        }],
        children: vec![joint],
    })
}

fn point_node(query: String, theorem: Theorem, label: &str, p: f64) -> BoundTrace {
    let iv = Interval::point(p);
    BoundTrace {
        query,
        theorem,
        lower_branch: label.into(),
        upper_branch: label.into(),
        lo: iv.lo,
        hi: iv.hi,
        lower_candidates: vec![Branch {
            label: label.into(),
            value: p,
        }],
        upper_candidates: vec![Branch {
            label: label.into(),
            value: p,
        }],
        children: Vec::new(),
    }
}

/// Candidate bounds collected for one node.
#[derive(Default)]
struct Candidates {
    lower: Vec<Branch>,
    upper: Vec<Branch>,
    children: Vec<Arc<BoundTrace>>,
}

impl Candidates {
    fn lower(&mut self, label: impl Into<String>, value: f64) {
        self.lower.push(Branch {
            label: label.into(),
            value,
        });
    }

    fn upper(&mut self, label: impl Into<String>, value: f64) {
        self.upper.push(Branch {
            label: label.into(),
            value,
        });
    }

    fn child(&mut self, trace: &Arc<BoundTrace>) -> Interval {
        self.children.push(Arc::clone(trace));
        trace.interval()
    }

    /// Largest lower and smallest upper candidate win; ties go to the
    /// earlier candidate.
    fn settle(self, query: String, theorem: Theorem) -> Result<BoundTrace> {
        let best_lower = self
            .lower
            .iter()
            .reduce(|a, b| if b.value > a.value { b } else { a })
            .expect("every rule has a lower candidate");
        let best_upper = self
            .upper
            .iter()
            .reduce(|a, b| if b.value < a.value { b } else { a })
            .expect("every rule has an upper candidate");
        let iv = Interval::new(best_lower.value, best_upper.value).map_err(|_| Error::InfeasibleInterval {
            lower: best_lower.value,
            upper: best_upper.value,
            lower_witness: format!("{query} {}", best_lower.label),
            upper_witness: format!("{query} {}", best_upper.label),
        })?;
        Ok(BoundTrace {
            query,
            theorem,
            lower_branch: best_lower.label.clone(),
            upper_branch: best_upper.label.clone(),
            lo: iv.lo,
            hi: iv.hi,
            lower_candidates: self.lower,
            upper_candidates: self.upper,
            children: self.children,
        })
    }
}

// ---------------------------------------------------------------------------
// single counterfactual term

fn single_outcome_same(ds: &Dataset, term: Term) -> Candidates {
    let (j, i) = (term.treatment, term.outcome);
    let exp = ds.experimental(j, i);
    let mut c = Candidates::default();
    c.lower("observational", ds.joint(j, i));
    c.lower("frechet", exp + ds.p_y(i) - 1.0);
    c.upper("experimental", exp);
    c.upper("evidence", ds.p_y(i));
    c
}

fn single_outcome_other(ds: &Dataset, term: Term, k: usize) -> Candidates {
    let (j, i) = (term.treatment, term.outcome);
    let exp = ds.experimental(j, i);
    let remainder = ds.p_x(j) - ds.joint(j, i);
    let partition: f64 = (0..ds.space().m())
        .filter(|&p| p != j)
        .map(|p| (exp + ds.joint(p, k) - 1.0 + remainder).max(0.0))
        .sum();
    let mut c = Candidates::default();
    c.lower("0", 0.0);
    c.lower("frechet", exp + ds.p_y(k) - 1.0);
    c.lower("partition", partition);
    c.upper("exp-minus-obs", exp - ds.joint(j, i));
    c.upper("outcome-remainder", ds.p_y(k) - ds.joint(j, k));
    c
}

fn single_treatment(ds: &Dataset, term: Term, k: usize) -> Candidates {
    let (j, i) = (term.treatment, term.outcome);
    let exp = ds.experimental(j, i);
    let mut c = Candidates::default();
    c.lower("0", 0.0);
    c.lower("partition", exp - ds.joint(j, i) - 1.0 + ds.p_x(j) + ds.p_x(k));
    c.upper("exp-minus-obs", exp - ds.joint(j, i));
    c.upper("evidence", ds.p_x(k));
    c
}

fn single_both(ds: &Dataset, term: Term, p: usize, k: usize) -> Candidates {
    let (j, i) = (term.treatment, term.outcome);
    let exp = ds.experimental(j, i);
    let mut c = Candidates::default();
    c.lower("0", 0.0);
    c.lower("partition", exp + ds.joint(p, k) - 1.0 + ds.p_x(j) - ds.joint(j, i));
    c.upper("exp-minus-obs", exp - ds.joint(j, i));
    c.upper("evidence", ds.joint(p, k));
    c
}

fn single_name(term: Term, evidence: Evidence) -> String {
    Conjunction {
        terms: vec![term],
        evidence,
    }
    .to_string()
}

fn settle_interval(c: Candidates, term: Term, evidence: Evidence, theorem: Theorem) -> Result<Interval> {
    Ok(c.settle(single_name(term, evidence), theorem)?.interval())
}

/// Bound `P(Y_{x_j} = y_i, Y = y_k)`.
pub fn bound_term_outcome(ds: &Dataset, term: Term, observed_y: usize) -> Result<Interval> {
    let ev = Evidence::y(observed_y);
    if observed_y == term.outcome {
        settle_interval(single_outcome_same(ds, term), term, ev, Theorem::T1)
    } else {
        settle_interval(single_outcome_other(ds, term, observed_y), term, ev, Theorem::T2)
    }
}

/// Bound `P(Y_{x_j} = y_i, X = x_k)` for `k != j`.
pub fn bound_term_treatment(ds: &Dataset, term: Term, observed_x: usize) -> Result<Interval> {
    if observed_x == term.treatment {
        return Err(Error::UnsupportedQuery(
            "observed treatment equals the counterfactual treatment; canonicalize first".into(),
        ));
    }
    settle_interval(single_treatment(ds, term, observed_x), term, Evidence::x(observed_x), Theorem::T3)
}

/// Bound `P(Y_{x_j} = y_i, X = x_p, Y = y_k)` for `p != j`.
pub fn bound_term_both(ds: &Dataset, term: Term, observed_x: usize, observed_y: usize) -> Result<Interval> {
    if observed_x == term.treatment {
        return Err(Error::UnsupportedQuery(
            "observed treatment equals the counterfactual treatment; canonicalize first".into(),
        ));
    }
    settle_interval(
        single_both(ds, term, observed_x, observed_y),
        term,
        Evidence::xy(observed_x, observed_y),
        Theorem::T4,
    )
}

// ---------------------------------------------------------------------------
// conjunctions

fn conjunction(terms: &[Term], evidence: Evidence) -> Result<Conjunction> {
    let mut terms = terms.to_vec();
    terms.sort();
    if terms.len() < 2 {
        return Err(Error::UnsupportedQuery("a conjunction needs at least two terms".into()));
    }
    if terms.windows(2).any(|w| w[0].treatment == w[1].treatment) {
        return Err(Error::UnsupportedQuery("terms must use distinct treatments".into()));
    }
    if evidence.x.is_some_and(|p| terms.iter().any(|t| t.treatment == p)) {
        return Err(Error::UnsupportedQuery(
            "observed treatment must differ from every term's treatment".into(),
        ));
    }
    Ok(Conjunction { terms, evidence })
}

fn run(ds: &Dataset, conj: Conjunction) -> Result<BoundResult> {
    let mut eval = Evaluator::new(ds, true);
    let trace = eval.eval(&conj)?;
    Ok(BoundResult {
        interval: trace.interval(),
        trace,
        stats_evaluated: eval.seen.len(),
    })
}

/// Bound `P(Y_{x_{j_1}} = y_{i_1}, ..., Y_{x_{j_k}} = y_{i_k})`, `k >= 2`.
pub fn bound_conjunction(ds: &Dataset, terms: &[Term]) -> Result<BoundResult> {
    run(ds, conjunction(terms, Evidence::NONE)?)
}

/// Bound the conjunction jointly with `X = x_p`.
pub fn bound_conjunction_treatment(ds: &Dataset, terms: &[Term], p: usize) -> Result<BoundResult> {
    run(ds, conjunction(terms, Evidence::x(p))?)
}

/// Bound the conjunction jointly with `Y = y_q`.
pub fn bound_conjunction_outcome(ds: &Dataset, terms: &[Term], q: usize) -> Result<BoundResult> {
    run(ds, conjunction(terms, Evidence::y(q))?)
}

/// Bound the conjunction jointly with `X = x_p, Y = y_q`.
pub fn bound_conjunction_both(ds: &Dataset, terms: &[Term], p: usize, q: usize) -> Result<BoundResult> {
    run(ds, conjunction(terms, Evidence::xy(p, q))?)
}

struct Evaluator<'a> {
    ds: &'a Dataset,
    memoize: bool,
    memo: HashMap<Conjunction, Arc<BoundTrace>>,
    seen: HashSet<Conjunction>,
}

impl<'a> Evaluator<'a> {
    fn new(ds: &'a Dataset, memoize: bool) -> Self {
        Self {
            ds,
            memoize,
            memo: HashMap::new(),
            seen: HashSet::new(),
        }
    }

    fn eval(&mut self, conj: &Conjunction) -> Result<Arc<BoundTrace>> {
        self.seen.insert(conj.clone());
        if self.memoize {
            if let Some(hit) = self.memo.get(conj) {
                return Ok(Arc::clone(hit));
            }
        }
        let trace = Arc::new(self.compute(conj)?);
        if self.memoize {
            self.memo.insert(conj.clone(), Arc::clone(&trace));
        }
        Ok(trace)
    }

    fn sub(&mut self, terms: Vec<Term>, evidence: Evidence) -> Result<Arc<BoundTrace>> {
        self.eval(&Conjunction { terms, evidence })
    }

    fn compute(&mut self, conj: &Conjunction) -> Result<BoundTrace> {
        let ds = self.ds;
        let name = conj.to_string();
        let ev = conj.evidence;
        if conj.k() == 1 {
            let term = conj.terms[0];
            return match (ev.x, ev.y) {
                (None, None) => Ok(point_node(
                    name,
                    Theorem::Exact,
                    "experimental",
                    ds.experimental(term.treatment, term.outcome),
                )),
                (None, Some(k)) if k == term.outcome => single_outcome_same(ds, term).settle(name, Theorem::T1),
                (None, Some(k)) => single_outcome_other(ds, term, k).settle(name, Theorem::T2),
                (Some(k), None) => single_treatment(ds, term, k).settle(name, Theorem::T3),
                (Some(p), Some(k)) => single_both(ds, term, p, k).settle(name, Theorem::T4),
            };
        }
        let theorem = match (ev.x, ev.y) {
            (None, None) => Theorem::T5,
            (Some(_), None) => Theorem::T6,
            (None, Some(_)) => Theorem::T7,
            (Some(_), Some(_)) => Theorem::T8,
        };
        let c = self.multi(conj)?;
        c.settle(name, theorem)
    }

    /// Candidates shared by all four conjunction rules, plus the
    /// decomposition branch where no treatment is observed.
    fn multi(&mut self, conj: &Conjunction) -> Result<Candidates> {
        let ds = self.ds;
        let k = conj.k();
        let ev = conj.evidence;
        let exps: Vec<f64> = conj
            .terms
            .iter()
            .map(|t| ds.experimental(t.treatment, t.outcome))
            .collect();
        let evidence_p = (!ev.is_empty()).then(|| evidence_probability(ds, &ev));

        let mut c = Candidates::default();
        c.lower("0", 0.0);
        let exp_sum: f64 = exps.iter().sum();
        match evidence_p {
            None => c.lower("frechet", exp_sum - k as f64 + 1.0),
            Some(pe) => c.lower("frechet", exp_sum + pe - k as f64),
        }
        for (term, &exp) in conj.terms.iter().zip(&exps) {
            c.upper(format!("experimental({term})"), exp);
        }
        if let Some(pe) = evidence_p {
            c.upper("evidence", pe);
        }

        // leave one out
        let mut singles = Vec::with_capacity(k);
        for (t, &exp) in exps.iter().enumerate().take(k) {
            let rest = self.sub(conj.without(t), Evidence::NONE)?;
            let rest = c.child(&rest);
            let dropped = conj.terms[t];
            let single = if ev.is_empty() {
                Interval::point(exp)
            } else {
                let trace = self.sub(vec![dropped], ev)?;
                c.child(&trace)
            };
            c.lower(format!("loo(-{dropped})"), rest.lo + single.lo - 1.0);
            c.upper(format!("loo(-{dropped})"), rest.hi);
            singles.push((dropped, single));
        }
        if !ev.is_empty() {
            for (dropped, single) in singles {
                c.upper(format!("single({dropped})"), single.hi);
            }
        }

        // decomposition over the observed treatment
        if ev.x.is_none() {
            let (mut lo, mut hi) = (0.0, 0.0);
            for p in 0..ds.space().m() {
                let part = match conj.terms.iter().position(|t| t.treatment == p) {
                    Some(r) => {
                        let observed = conj.terms[r].outcome;
                        if ev.y.is_some_and(|q| q != observed) {
                            // Y_{x_p} = y_{i_r} and X = x_p force Y = y_{i_r}
                            continue;
                        }
                        self.sub(conj.without(r), Evidence::xy(p, observed))?
                    }
                    None => self.sub(conj.terms.clone(), Evidence { x: Some(p), y: ev.y })?,
                };
                let part = c.child(&part);
                lo += part.lo;
                hi += part.hi;
            }
            c.lower("decomposition", lo);
            c.upper("decomposition", hi);
        }
        Ok(c)
    }
}

// ---------------------------------------------------------------------------
// binary special cases

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CausationKind {
    /// `P(y_x, y'_{x'})`
    Pns,
    /// `P(y'_{x'} | x, y)`
    Pn,
    /// `P(y_x | x', y')`
    Ps,
}

impl CausationKind {
    /// The same quantity in the general query language, with `x = x1`,
    /// `y = y1`.
    pub fn query(self) -> Query {
        match self {
            CausationKind::Pns => Query::joint(vec![Term::new(0, 0), Term::new(1, 1)], Evidence::NONE),
            CausationKind::Pn => Query::conditional(vec![Term::new(1, 1)], Evidence::xy(0, 0)),
            CausationKind::Ps => Query::conditional(vec![Term::new(0, 0)], Evidence::xy(1, 1)),
        }
    }
}

/// The closed-form PNS/PN/PS bounds for binary treatment and effect, with
/// `x = x1`, `x' = x2`, `y = y1`, `y' = y2`.
pub fn tian_pearl(ds: &Dataset, kind: CausationKind) -> Result<Interval> {
    let space = ds.space();
    if !space.is_binary() {
        return Err(Error::NotBinary {
            m: space.m(),
            n: space.n(),
        });
    }
    match kind {
        CausationKind::Pns => {
            let y_x = ds.experimental(0, 0);
            let y_xp = ds.experimental(1, 0);
            let yp_xp = ds.experimental(1, 1);
            let p_y = ds.p_y(0);
            let lo = [0.0, y_x - y_xp, p_y - y_xp, y_x - p_y]
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            let hi = [
                y_x,
                yp_xp,
                ds.joint(0, 0) + ds.joint(1, 1),
                y_x - y_xp + ds.joint(0, 1) + ds.joint(1, 0),
            ]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
            Interval::new(lo, hi)
        }
        CausationKind::Pn => necessity(ds, 0, 0),
        CausationKind::Ps => necessity(ds, 1, 1),
    }
}

/// PN with the roles of the values chosen by `(x, y)`; PS is PN with both
/// variables' values exchanged.
fn necessity(ds: &Dataset, x: usize, y: usize) -> Result<Interval> {
    let (xp, yp) = (1 - x, 1 - y);
    let p_xy = ds.joint(x, y);
    if p_xy < EPS_NUM {
        return Err(Error::ZeroEvidenceProbability(p_xy));
    }
    let lo = ((ds.p_y(y) - ds.experimental(xp, y)) / p_xy).max(0.0);
    let hi = ((ds.experimental(xp, yp) - ds.joint(xp, yp)) / p_xy).min(1.0);
    Interval::new(lo, hi)
}
