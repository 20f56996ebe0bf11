//! Probability intervals and the Fréchet inequalities for conjunctions.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::EPS_NUM;

/// A closed sub-interval of `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };

    /// Clamp both ends into `[0, 1]`. Fails when the clamped lower end
    /// exceeds the upper end by more than [`EPS_NUM`]; smaller crossings are
    /// float noise and collapse onto the upper end.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let lo = lo.clamp(0.0, 1.0);
        let hi = hi.clamp(0.0, 1.0);
        if lo > hi + EPS_NUM {
            return Err(Error::InfeasibleInterval {
                lower: lo,
                upper: hi,
                lower_witness: "lower".into(),
                upper_witness: "upper".into(),
            });
        }
        Ok(Self { lo: lo.min(hi), hi })
    }

    pub fn point(p: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        Self { lo: p, hi: p }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `lo - eps <= p <= hi + eps`
    pub fn contains(&self, p: f64, eps: f64) -> bool {
        self.lo - eps <= p && p <= self.hi + eps
    }

    /// `self ⊇ other` up to `eps` on either end.
    pub fn encloses(&self, other: &Interval, eps: f64) -> bool {
        self.lo <= other.lo + eps && other.hi <= self.hi + eps
    }

    /// Divide both ends by `by` and clamp to `[0, 1]`.
    pub fn scale_down(&self, by: f64) -> Self {
        let lo = (self.lo / by).clamp(0.0, 1.0);
        let hi = (self.hi / by).clamp(0.0, 1.0);
        Self { lo: lo.min(hi), hi }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "[{:.*}, {:.*}]", p, self.lo, p, self.hi),
            None => write!(f, "[{}, {}]", self.lo, self.hi),
        }
    }
}

/// `max{0, Σ p - (len - 1)}`, the Fréchet lower bound on `P(A_1, ..., A_n)`.
pub fn frechet_lower(ps: &[f64]) -> Result<f64> {
    if ps.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(frechet_lower_raw(ps).max(0.0))
}

/// `Σ p - (len - 1)` before clamping; may be negative.
pub fn frechet_lower_raw(ps: &[f64]) -> f64 {
    ps.iter().sum::<f64>() - (ps.len() as f64 - 1.0)
}

/// `min p`, the Fréchet upper bound on `P(A_1, ..., A_n)`.
pub fn frechet_upper(ps: &[f64]) -> Result<f64> {
    ps.iter().copied().reduce(f64::min).ok_or(Error::EmptySequence)
}

/// `[max lo, min hi]` over all inputs, clamped to `[0, 1]`.
///
/// An empty intersection (beyond [`EPS_NUM`]) is an error naming the input
/// holding the largest lower end and the one holding the smallest upper end.
pub fn intersect(intervals: &[Interval]) -> Result<Interval> {
    let (lo_at, lo) = intervals
        .iter()
        .enumerate()
        .map(|(a, iv)| (a, iv.lo))
        .reduce(|best, cur| if cur.1 > best.1 { cur } else { best })
        .ok_or(Error::EmptySequence)?;
    let (hi_at, hi) = intervals
        .iter()
        .enumerate()
        .map(|(a, iv)| (a, iv.hi))
        .reduce(|best, cur| if cur.1 < best.1 { cur } else { best })
        .ok_or(Error::EmptySequence)?;
    Interval::new(lo, hi).map_err(|_| Error::InfeasibleInterval {
        lower: lo,
        upper: hi,
        lower_witness: format!("interval #{lo_at}"),
        upper_witness: format!("interval #{hi_at}"),
    })
}
