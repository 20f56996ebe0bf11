//! Counterfactual queries: syntax, parsing, printing and canonical form.
//!
//! The textual form follows the usual notation with 1-based indices:
//!
//! ```text
//! query  := "P(" events ( "|" events )? ")"
//! events := event ("," event)*
//! event  := OUTCOME "_" TREATMENT | TREATMENT | OUTCOME
//! ```
//!
//! so `P(y3_x1, y1_x2 | x2, y2)` reads "Y would be y3 had X been x1 and Y
//! would be y1 had X been x2, given that X = x2 and Y = y2 were observed".

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ProblemSpace;

/// The counterfactual event `Y_{x_j} = y_i` (zero-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Term {
    pub treatment: usize,
    pub outcome: usize,
}

impl Term {
    pub fn new(treatment: usize, outcome: usize) -> Self {
        Self { treatment, outcome }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "y{}_x{}", self.outcome + 1, self.treatment + 1)
    }
}

/// Observed values of `X` and/or `Y`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Evidence {
    pub x: Option<usize>,
    pub y: Option<usize>,
}

impl Evidence {
    pub const NONE: Evidence = Evidence { x: None, y: None };

    pub fn x(p: usize) -> Self {
        Self { x: Some(p), y: None }
    }

    pub fn y(q: usize) -> Self {
        Self { x: None, y: Some(q) }
    }

    pub fn xy(p: usize, q: usize) -> Self {
        Self { x: Some(p), y: Some(q) }
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_none() && self.y.is_none()
    }

    fn push_events(&self, out: &mut Vec<String>) {
        if let Some(p) = self.x {
            out.push(format!("x{}", p + 1));
        }
        if let Some(q) = self.y {
            out.push(format!("y{}", q + 1));
        }
    }
}

/// Which evidence events sit to the right of the conditioning bar.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Given {
    pub x: bool,
    pub y: bool,
}

/// A conjunction of counterfactual terms with optional observed evidence,
/// either joint (`P(A, e)`) or conditional (`P(A | e)`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Query {
    pub terms: Vec<Term>,
    pub evidence: Evidence,
    pub given: Given,
}

impl Query {
    pub fn joint(terms: Vec<Term>, evidence: Evidence) -> Self {
        Self {
            terms,
            evidence,
            given: Given::default(),
        }
    }

    /// Condition on every evidence event that is present.
    pub fn conditional(terms: Vec<Term>, evidence: Evidence) -> Self {
        Self {
            terms,
            evidence,
            given: Given {
                x: evidence.x.is_some(),
                y: evidence.y.is_some(),
            },
        }
    }

    pub fn is_conditional(&self) -> bool {
        self.given.x || self.given.y
    }

    /// Indices in range, conditioning only on evidence that is present.
    pub fn check(&self, space: &ProblemSpace) -> Result<()> {
        for t in &self.terms {
            check_treatment(t.treatment, space)?;
            check_outcome(t.outcome, space)?;
        }
        if let Some(p) = self.evidence.x {
            check_treatment(p, space)?;
        }
        if let Some(q) = self.evidence.y {
            check_outcome(q, space)?;
        }
        if (self.given.x && self.evidence.x.is_none()) || (self.given.y && self.evidence.y.is_none()) {
            return Err(Error::UnsupportedQuery("conditioning on an absent evidence event".into()));
        }
        Ok(())
    }

    /// The conditioning event, if any.
    pub fn condition(&self) -> Option<Evidence> {
        self.is_conditional().then(|| Evidence {
            x: self.evidence.x.filter(|_| self.given.x),
            y: self.evidence.y.filter(|_| self.given.y),
        })
    }
}

fn check_treatment(j: usize, space: &ProblemSpace) -> Result<()> {
    if j >= space.m() {
        return Err(Error::IndexOutOfRange(format!("x{} (treatment has {} values)", j + 1, space.m())));
    }
    Ok(())
}

fn check_outcome(i: usize, space: &ProblemSpace) -> Result<()> {
    if i >= space.n() {
        return Err(Error::IndexOutOfRange(format!("y{} (outcome has {} values)", i + 1, space.n())));
    }
    Ok(())
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut left: Vec<String> = self.terms.iter().map(Term::to_string).collect();
        let mut right = Vec::new();
        if let Some(p) = self.evidence.x {
            let side = if self.given.x { &mut right } else { &mut left };
            side.push(format!("x{}", p + 1));
        }
        if let Some(q) = self.evidence.y {
            let side = if self.given.y { &mut right } else { &mut left };
            side.push(format!("y{}", q + 1));
        }
        write!(f, "P({}", left.join(", "))?;
        if !right.is_empty() {
            write!(f, " | {}", right.join(", "))?;
        }
        write!(f, ")")
    }
}

/// Render a query in the textual grammar.
pub fn format_query(query: &Query) -> String {
    query.to_string()
}

/// A conjunction of terms with pairwise distinct treatments, sorted by
/// treatment, whose evidence treatment (if any) differs from every term's.
/// This is the form every bound rule consumes, and the memoisation key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Conjunction {
    pub terms: Vec<Term>,
    pub evidence: Evidence,
}

impl Conjunction {
    pub fn k(&self) -> usize {
        self.terms.len()
    }

    /// The same conjunction without term `t`.
    pub fn without(&self, t: usize) -> Vec<Term> {
        let mut terms = self.terms.clone();
        terms.remove(t);
        terms
    }

    pub fn uses_treatment(&self, j: usize) -> bool {
        self.terms.iter().any(|t| t.treatment == j)
    }
}

impl fmt::Display for Conjunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.terms.iter().map(Term::to_string).collect();
        self.evidence.push_events(&mut parts);
        write!(f, "P({})", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum CanonicalEvent {
    /// The event is impossible.
    Zero,
    /// The event is a purely observational cell or marginal.
    ExactObservational(Evidence),
    Standard(Conjunction),
}

/// A normalised query: the joint event plus the conditioning event to
/// divide by, if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalQuery {
    pub event: CanonicalEvent,
    pub condition: Option<Evidence>,
}

/// Normalise a query.
///
/// * duplicate terms are merged;
/// * two terms on the same treatment with different outcomes make the
///   event impossible;
/// * a term on the observed treatment `x_p` is replaced by the observation
///   `Y = y_i` (consistency), or makes the event impossible when it
///   contradicts an observed `Y`;
/// * remaining terms are sorted by treatment.
pub fn canonicalize(query: &Query) -> CanonicalQuery {
    let condition = query.condition();
    let mut terms = query.terms.clone();
    terms.sort();
    terms.dedup();
    let zero = CanonicalQuery {
        event: CanonicalEvent::Zero,
        condition,
    };
    if terms.windows(2).any(|w| w[0].treatment == w[1].treatment) {
        return zero;
    }

    let mut evidence = query.evidence;
    if let Some(p) = evidence.x {
        if let Some(pos) = terms.iter().position(|t| t.treatment == p) {
            let absorbed = terms.remove(pos);
            match evidence.y {
                None => evidence.y = Some(absorbed.outcome),
                Some(q) if q == absorbed.outcome => {}
                Some(_) => return zero,
            }
        }
    }

    let event = if terms.is_empty() {
        CanonicalEvent::ExactObservational(evidence)
    } else {
        CanonicalEvent::Standard(Conjunction { terms, evidence })
    };
    CanonicalQuery { event, condition }
}

/// Parse the textual query grammar against a problem space.
pub fn parse_query(text: &str, space: &ProblemSpace) -> Result<Query> {
    let mut parser = Parser::new(text);
    let (left, right) = parser.query()?;

    let mut terms = Vec::new();
    let mut evidence = Evidence::NONE;
    let mut given = Given::default();
    for (side_given, events) in [(false, left), (true, right)] {
        for (pos, event) in events {
            match event {
                Event::Term(term) => {
                    if side_given {
                        return Err(Error::UnsupportedQuery(format!(
                            "counterfactual term {term} at position {pos} cannot appear after '|'"
                        )));
                    }
                    terms.push(term);
                }
                Event::X(p) => {
                    if evidence.x.is_some() {
                        return Err(Error::UnsupportedQuery(format!(
                            "second observed treatment at position {pos}; at most one is allowed"
                        )));
                    }
                    evidence.x = Some(p);
                    given.x = side_given;
                }
                Event::Y(q) => {
                    if evidence.y.is_some() {
                        return Err(Error::UnsupportedQuery(format!(
                            "second observed outcome at position {pos}; at most one is allowed"
                        )));
                    }
                    evidence.y = Some(q);
                    given.y = side_given;
                }
            }
        }
    }
    let query = Query { terms, evidence, given };
    query.check(space)?;
    Ok(query)
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Term(Term),
    X(usize),
    Y(usize),
}

type Events = Vec<(usize, Event)>;

struct Parser {
    chars: Vec<(usize, char)>,
    at: usize,
    len: usize,
}

impl Parser {
    fn new(text: &str) -> Self {
        Self {
            chars: text.char_indices().collect(),
            at: 0,
            len: text.len(),
        }
    }

    fn position(&self) -> usize {
        self.chars.get(self.at).map_or(self.len, |&(p, _)| p)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.position(),
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.at).is_some_and(|(_, c)| c.is_whitespace()) {
            self.at += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.at).map(|&(_, c)| c)
    }

    fn expect(&mut self, want: char) -> Result<()> {
        match self.peek() {
            Some(c) if c == want => {
                self.at += 1;
                Ok(())
            }
            Some(c) => self.error(format!("expected '{want}', found '{c}'")),
            None => self.error(format!("expected '{want}', found end of input")),
        }
    }

    fn query(&mut self) -> Result<(Events, Events)> {
        if self.peek().is_none() {
            return self.error("empty query");
        }
        self.expect('P')?;
        self.expect('(')?;
        let left = self.events()?;
        let right = if self.peek() == Some('|') {
            self.at += 1;
            self.events()?
        } else {
            Vec::new()
        };
        self.expect(')')?;
        if let Some(c) = self.peek() {
            return self.error(format!("unexpected '{c}' after closing parenthesis"));
        }
        Ok((left, right))
    }

    fn events(&mut self) -> Result<Events> {
        let mut out = vec![self.event()?];
        while self.peek() == Some(',') {
            self.at += 1;
            out.push(self.event()?);
        }
        Ok(out)
    }

    fn event(&mut self) -> Result<(usize, Event)> {
        let start = {
            self.skip_ws();
            self.position()
        };
        match self.peek() {
            Some('x') => {
                self.at += 1;
                Ok((start, Event::X(self.index()?)))
            }
            Some('y') => {
                self.at += 1;
                let outcome = self.index()?;
                if self.peek() == Some('_') {
                    self.at += 1;
                    if self.peek() != Some('x') {
                        return self.error("expected treatment 'x<n>' after '_'");
                    }
                    self.at += 1;
                    let treatment = self.index()?;
                    Ok((start, Event::Term(Term { treatment, outcome })))
                } else {
                    Ok((start, Event::Y(outcome)))
                }
            }
            Some(c) => self.error(format!("expected an event such as 'y1_x2', 'x1' or 'y1', found '{c}'")),
            None => self.error("expected an event, found end of input"),
        }
    }

    /// A 1-based index, returned zero-based.
    fn index(&mut self) -> Result<usize> {
        let begin = self.at;
        while self.chars.get(self.at).is_some_and(|(_, c)| c.is_ascii_digit()) {
            self.at += 1;
        }
        if begin == self.at {
            return self.error("expected an index");
        }
        let digits: String = self.chars[begin..self.at].iter().map(|&(_, c)| c).collect();
        match digits.parse::<usize>() {
            Ok(0) => Err(Error::IndexOutOfRange("indices start at 1".into())),
            Ok(v) => Ok(v - 1),
            Err(_) => Err(Error::IndexOutOfRange(format!("index {digits} is too large"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space(m: usize, n: usize) -> ProblemSpace {
        ProblemSpace::new(m, n).unwrap()
    }

    fn t(j: usize, i: usize) -> Term {
        Term::new(j - 1, i - 1)
    }

    #[test]
    fn parse_three_terms() {
        let q = parse_query("P(y3_x1, y1_x2, y2_x3)", &space(3, 3)).unwrap();
        assert_eq!(q.terms, vec![t(1, 3), t(2, 1), t(3, 2)]);
        assert_eq!(q.evidence, Evidence::NONE);
        assert!(!q.is_conditional());
    }

    #[test]
    fn parse_conditional() {
        let q = parse_query("P(y1_x3 | x2, y2)", &space(4, 2)).unwrap();
        assert_eq!(q.terms, vec![t(3, 1)]);
        assert_eq!(q.evidence, Evidence::xy(1, 1));
        assert!(q.is_conditional());
        assert_eq!(q.condition(), Some(Evidence::xy(1, 1)));
    }

    #[test]
    fn parse_single_term_and_whitespace() {
        let q = parse_query("  P ( y1_x1 )  ", &space(2, 2)).unwrap();
        assert_eq!(q, Query::joint(vec![t(1, 1)], Evidence::NONE));
        let q = parse_query("P(x1,y3,y1_x2,y2_x3)", &space(3, 3)).unwrap();
        assert_eq!(q.evidence, Evidence::xy(0, 2));
        assert_eq!(q.terms.len(), 2);
    }

    #[test]
    fn mixed_sides_of_the_bar() {
        let q = parse_query("P(y1_x3, x2 | y2)", &space(4, 2)).unwrap();
        assert_eq!(q.condition(), Some(Evidence::y(1)));
        assert_eq!(format_query(&q), "P(y1_x3, x2 | y2)");
    }

    #[test]
    fn parse_errors() {
        let s = space(3, 3);
        assert!(matches!(parse_query("", &s), Err(Error::Syntax { position: 0, .. })));
        assert!(matches!(parse_query("P(y1_x1", &s), Err(Error::Syntax { position: 7, .. })));
        assert!(matches!(parse_query("P(y1_z1)", &s), Err(Error::Syntax { position: 5, .. })));
        assert!(matches!(parse_query("Q(y1)", &s), Err(Error::Syntax { position: 0, .. })));
        assert!(matches!(parse_query("P(y1_x1) x", &s), Err(Error::Syntax { .. })));
        assert!(matches!(parse_query("P(y4_x1)", &s), Err(Error::IndexOutOfRange(_))));
        assert!(matches!(parse_query("P(y1_x0)", &s), Err(Error::IndexOutOfRange(_))));
        assert!(matches!(parse_query("P(y1_x1, x1, x2)", &s), Err(Error::UnsupportedQuery(_))));
        assert!(matches!(parse_query("P(y1_x1 | y1, y2)", &s), Err(Error::UnsupportedQuery(_))));
        assert!(matches!(parse_query("P(x1 | y1_x2)", &s), Err(Error::UnsupportedQuery(_))));
    }

    #[test]
    fn format_examples() {
        let q = Query::joint(vec![t(1, 3), t(2, 1), t(3, 2)], Evidence::NONE);
        assert_eq!(format_query(&q), "P(y3_x1, y1_x2, y2_x3)");
        let q = Query::conditional(vec![t(3, 1)], Evidence::xy(1, 1));
        assert_eq!(format_query(&q), "P(y1_x3 | x2, y2)");
        assert_eq!(format_query(&Query::joint(vec![t(1, 1)], Evidence::NONE)), "P(y1_x1)");
    }

    #[test]
    fn canonical_observational() {
        let c = canonicalize(&Query::joint(vec![t(1, 3)], Evidence::x(0)));
        assert_eq!(c.event, CanonicalEvent::ExactObservational(Evidence::xy(0, 2)));
        assert_eq!(c.condition, None);
    }

    #[test]
    fn canonical_zero() {
        let c = canonicalize(&Query::joint(vec![t(1, 2), t(1, 3)], Evidence::NONE));
        assert_eq!(c.event, CanonicalEvent::Zero);
        let c = canonicalize(&Query::joint(vec![t(1, 3), t(2, 1)], Evidence::xy(1, 1)));
        assert_eq!(c.event, CanonicalEvent::Zero);
    }

    #[test]
    fn canonical_absorbs_matching_term() {
        let c = canonicalize(&Query::joint(vec![t(2, 1), t(1, 3), t(1, 3)], Evidence::xy(1, 0)));
        assert_eq!(
            c.event,
            CanonicalEvent::Standard(Conjunction {
                terms: vec![t(1, 3)],
                evidence: Evidence::xy(1, 0),
            })
        );
        // P(y1_x1 | x1) = P(x1, y1) / P(x1)
        let c = canonicalize(&Query::conditional(vec![t(1, 1)], Evidence::x(0)));
        assert_eq!(c.event, CanonicalEvent::ExactObservational(Evidence::xy(0, 0)));
        assert_eq!(c.condition, Some(Evidence::x(0)));
    }

    fn arb_query(m: usize, n: usize) -> impl Strategy<Value = Query> {
        (
            prop::collection::vec((0..m, 0..n), 0..4),
            prop::option::of(0..m),
            prop::option::of(0..n),
            any::<(bool, bool)>(),
        )
            .prop_filter_map("needs an event", |(terms, x, y, (gx, gy))| {
                let terms: Vec<Term> = terms.into_iter().map(|(j, i)| Term::new(j, i)).collect();
                let evidence = Evidence { x, y };
                if terms.is_empty() && evidence.is_empty() {
                    return None;
                }
                let given = Given {
                    x: gx && x.is_some(),
                    y: gy && y.is_some(),
                };
                Some(Query { terms, evidence, given })
            })
    }

    proptest! {
        #[test]
        fn format_parse_round_trip(q in arb_query(3, 4)) {
            let s = space(3, 4);
            // a query with nothing left of the bar has no textual form
            let left_empty = q.terms.is_empty()
                && (q.evidence.x.is_none() || q.given.x)
                && (q.evidence.y.is_none() || q.given.y);
            prop_assume!(!left_empty);
            let parsed = parse_query(&format_query(&q), &s).unwrap();
            prop_assert_eq!(canonicalize(&parsed), canonicalize(&q));
        }

        #[test]
        fn canonical_form_is_order_insensitive_and_idempotent(q in arb_query(4, 3), seed in any::<u64>()) {
            let mut shuffled = q.clone();
            if !shuffled.terms.is_empty() {
                let len = shuffled.terms.len();
                shuffled.terms.rotate_left(seed as usize % len);
                shuffled.terms.reverse();
            }
            let c = canonicalize(&q);
            prop_assert_eq!(&c, &canonicalize(&shuffled));
            if let CanonicalEvent::Standard(conj) = &c.event {
                let again = Query { terms: conj.terms.clone(), evidence: conj.evidence, given: q.given };
                prop_assert_eq!(&canonicalize(&again).event, &c.event);
                // distinctness preconditions of the bound rules
                prop_assert!(conj.terms.windows(2).all(|w| w[0].treatment < w[1].treatment));
                if let Some(p) = conj.evidence.x {
                    prop_assert!(!conj.uses_treatment(p));
                }
            }
        }
    }
}
