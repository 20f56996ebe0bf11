//! Problem space, experimental and observational distributions, and the
//! consistency checks that tie them together.
//!
//! Indices are zero-based throughout the library. The first index of every
//! table is the treatment `x_j`, the second is the outcome `y_i`.

use std::fmt;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The value sets of treatment `X` (`m` values) and effect `Y` (`n` values).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemSpace {
    m: usize,
    n: usize,
    treatment_labels: Option<Vec<String>>,
    outcome_labels: Option<Vec<String>>,
}

impl ProblemSpace {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m < 2 || n < 2 {
            return Err(Error::InvalidSpace(format!(
                "need at least two treatment and two outcome values, got m = {m}, n = {n}"
            )));
        }
        Ok(Self {
            m,
            n,
            treatment_labels: None,
            outcome_labels: None,
        })
    }

    pub fn with_labels(treatments: Vec<String>, outcomes: Vec<String>) -> Result<Self> {
        let mut space = Self::new(treatments.len(), outcomes.len())?;
        check_unique("treatment", &treatments)?;
        check_unique("outcome", &outcomes)?;
        space.treatment_labels = Some(treatments);
        space.outcome_labels = Some(outcomes);
        Ok(space)
    }

    /// Number of treatment values.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of outcome values.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn treatment_label(&self, j: usize) -> String {
        match &self.treatment_labels {
            Some(labels) => labels[j].clone(),
            None => format!("x{}", j + 1),
        }
    }

    pub fn outcome_label(&self, i: usize) -> String {
        match &self.outcome_labels {
            Some(labels) => labels[i].clone(),
            None => format!("y{}", i + 1),
        }
    }

    pub fn is_binary(&self) -> bool {
        self.m == 2 && self.n == 2
    }
}

fn check_unique(axis: &str, labels: &[String]) -> Result<()> {
    for (a, label) in labels.iter().enumerate() {
        if labels[..a].contains(label) {
            return Err(Error::InvalidSpace(format!("duplicate {axis} label {label:?}")));
        }
    }
    Ok(())
}

/// `P(y_i | do(x_j))`, one row per treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentalDistribution {
    rows: Vec<Vec<f64>>,
}

impl ExperimentalDistribution {
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.rows[j][i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// The observational joint `P(x_j, y_i)`. Marginals are always recomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationalDistribution {
    joint: Vec<Vec<f64>>,
}

impl ObservationalDistribution {
    pub fn joint(&self, j: usize, i: usize) -> f64 {
        self.joint[j][i]
    }

    pub fn p_x(&self, j: usize) -> f64 {
        self.joint[j].iter().sum()
    }

    pub fn p_y(&self, i: usize) -> f64 {
        self.joint.iter().map(|row| row[i]).sum()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.joint
    }
}

/// Exact rational copies of both tables, kept when the data came from counts
/// so that the linear-programming oracle can work without rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTables {
    pub experimental: Vec<Vec<BigRational>>,
    pub joint: Vec<Vec<BigRational>>,
}

/// Tolerances for the sum-to-one checks (`sum`) and the consistency relation
/// (`cons`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub sum: f64,
    pub cons: f64,
}

impl Tolerances {
    /// Count-derived data is exact up to one rounding per cell.
    pub const COUNTS: Tolerances = Tolerances { sum: 1e-9, cons: 1e-9 };
    /// User-supplied probabilities get slack for hand-typed decimals.
    pub const PROBABILITIES: Tolerances = Tolerances { sum: 1e-6, cons: 1e-6 };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `P(x_j, y_i) > P(y_i | do(x_j))`
    Lower,
    /// `P(y_i | do(x_j)) > P(x_j, y_i) + 1 - P(x_j)`
    Upper,
    /// An experimental row does not sum to one.
    RowSum,
    /// The observational joint does not sum to one.
    TotalSum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub treatment: Option<usize>,
    pub outcome: Option<usize>,
    pub kind: ViolationKind,
    /// How far past the tolerance-free boundary the data lies.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn has(&self, treatment: Option<usize>, outcome: Option<usize>, kind: ViolationKind) -> bool {
        self.violations
            .iter()
            .any(|v| v.treatment == treatment && v.outcome == outcome && v.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        write!(f, "{} violation(s)", self.violations.len())?;
        for v in &self.violations {
            let at = match (v.treatment, v.outcome) {
                (Some(j), Some(i)) => format!("(x{}, y{})", j + 1, i + 1),
                (Some(j), None) => format!("x{}", j + 1),
                _ => "total".to_string(),
            };
            write!(f, "; {at} {:?} by {:.3e}", v.kind, v.magnitude)?;
        }
        Ok(())
    }
}

/// A problem space with its experimental and observational distributions.
#[derive(Debug, Clone)]
pub struct Dataset {
    space: ProblemSpace,
    exp: ExperimentalDistribution,
    obs: ObservationalDistribution,
    exact: Option<ExactTables>,
    tolerances: Tolerances,
    validation: ValidationReport,
}

impl Dataset {
    /// Frequency estimates from raw counts. Every experimental row is
    /// normalised by its own total, the observational table by its grand
    /// total.
    pub fn from_counts(exp_counts: &[Vec<u64>], obs_counts: &[Vec<u64>], space: ProblemSpace) -> Result<Self> {
        check_shape("experimental", exp_counts, &space)?;
        check_shape("observational", obs_counts, &space)?;
        let exact_exp = exact_experimental(exp_counts)?;
        let exact_joint = exact_joint(obs_counts)?;
        Self::from_exact(space, exact_exp, exact_joint)
    }

    /// Build from exact rational tables. Each value is converted to `f64`
    /// exactly once.
    pub fn from_exact(
        space: ProblemSpace,
        experimental: Vec<Vec<BigRational>>,
        joint: Vec<Vec<BigRational>>,
    ) -> Result<Self> {
        check_shape("experimental", &experimental, &space)?;
        check_shape("observational", &joint, &space)?;
        let exp = experimental.iter().map(|r| r.iter().map(ratio_to_f64).collect()).collect();
        let obs = joint.iter().map(|r| r.iter().map(ratio_to_f64).collect()).collect();
        let mut ds = Self::assemble(space, exp, obs, Tolerances::COUNTS)?;
        ds.exact = Some(ExactTables { experimental, joint });
        Ok(ds)
    }

    /// Build from probability matrices. Entries must lie in `[0, 1]`; sum and
    /// consistency defects are reported in [`Dataset::validation`], not
    /// rejected.
    pub fn from_probabilities(
        space: ProblemSpace,
        experimental: Vec<Vec<f64>>,
        joint: Vec<Vec<f64>>,
        tolerances: Tolerances,
    ) -> Result<Self> {
        check_shape("experimental", &experimental, &space)?;
        check_shape("observational", &joint, &space)?;
        Self::assemble(space, experimental, joint, tolerances)
    }

    fn assemble(space: ProblemSpace, exp: Vec<Vec<f64>>, joint: Vec<Vec<f64>>, tolerances: Tolerances) -> Result<Self> {
        for table in [&exp, &joint] {
            for (row, values) in table.iter().enumerate() {
                for (col, &value) in values.iter().enumerate() {
                    if !(0.0..=1.0).contains(&value) {
                        return Err(Error::InvalidProbability { row, col, value });
                    }
                }
            }
        }
        let mut ds = Self {
            space,
            exp: ExperimentalDistribution { rows: exp },
            obs: ObservationalDistribution { joint },
            exact: None,
            tolerances,
            validation: ValidationReport::from_violations(Vec::new()),
        };
        ds.validation = validate(&ds, tolerances.cons);
        Ok(ds)
    }

    pub fn space(&self) -> &ProblemSpace {
        &self.space
    }

    pub fn experimental_distribution(&self) -> &ExperimentalDistribution {
        &self.exp
    }

    pub fn observational_distribution(&self) -> &ObservationalDistribution {
        &self.obs
    }

    /// `P(y_i | do(x_j))`
    pub fn experimental(&self, j: usize, i: usize) -> f64 {
        self.exp.get(j, i)
    }

    /// `P(x_j, y_i)`
    pub fn joint(&self, j: usize, i: usize) -> f64 {
        self.obs.joint(j, i)
    }

    /// `P(x_j)`
    pub fn p_x(&self, j: usize) -> f64 {
        self.obs.p_x(j)
    }

    /// `P(y_i)`
    pub fn p_y(&self, i: usize) -> f64 {
        self.obs.p_y(i)
    }

    pub fn exact(&self) -> Option<&ExactTables> {
        self.exact.as_ref()
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances
    }

    pub fn validation(&self) -> &ValidationReport {
        &self.validation
    }

    /// Parse the JSON dataset format (counts or `_probs` matrices).
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text)?;
        file.into_dataset()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }
}

fn check_shape<T>(what: &str, table: &[Vec<T>], space: &ProblemSpace) -> Result<()> {
    if table.len() != space.m() {
        return Err(Error::ShapeMismatch(format!(
            "{what} table has {} rows, expected {} (one per treatment)",
            table.len(),
            space.m()
        )));
    }
    for (j, row) in table.iter().enumerate() {
        if row.len() != space.n() {
            return Err(Error::ShapeMismatch(format!(
                "{what} row x{} has {} columns, expected {} (one per outcome)",
                j + 1,
                row.len(),
                space.n()
            )));
        }
    }
    Ok(())
}

fn exact_experimental(counts: &[Vec<u64>]) -> Result<Vec<Vec<BigRational>>> {
    counts
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                return Err(Error::ZeroRowTotal(j + 1));
            }
            Ok(row.iter().map(|&c| ratio(c, total)).collect())
        })
        .collect()
}

fn exact_joint(counts: &[Vec<u64>]) -> Result<Vec<Vec<BigRational>>> {
    let total: u64 = counts.iter().flatten().sum();
    if total == 0 {
        return Err(Error::ZeroGrandTotal);
    }
    Ok(counts.iter().map(|row| row.iter().map(|&c| ratio(c, total)).collect()).collect())
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Correctly rounded conversion (`num / den` in IEEE arithmetic when both
/// fit in 53 bits, which covers every count table).
pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    match (r.numer().to_i64(), r.denom().to_i64()) {
        (Some(a), Some(b)) if a.unsigned_abs() < (1 << 53) && b.unsigned_abs() < (1 << 53) => a as f64 / b as f64,
        _ => r.to_f64().unwrap_or(f64::NAN),
    }
}

/// Check the sum-to-one conditions and the consistency relation
/// `P(x_j, y_i) <= P(y_i | do(x_j)) <= P(x_j, y_i) + 1 - P(x_j)` for every
/// cell. Never fails; defects are listed in the report.
pub fn validate(dataset: &Dataset, eps_cons: f64) -> ValidationReport {
    let eps_sum = dataset.tolerances.sum;
    let space = &dataset.space;
    let mut violations = Vec::new();

    for j in 0..space.m() {
        let row_sum: f64 = dataset.exp.rows[j].iter().sum();
        if (row_sum - 1.0).abs() > eps_sum {
            violations.push(Violation {
                treatment: Some(j),
                outcome: None,
                kind: ViolationKind::RowSum,
                magnitude: (row_sum - 1.0).abs(),
            });
        }
    }
    let total: f64 = dataset.obs.joint.iter().flatten().sum();
    if (total - 1.0).abs() > eps_sum {
        violations.push(Violation {
            treatment: None,
            outcome: None,
            kind: ViolationKind::TotalSum,
            magnitude: (total - 1.0).abs(),
        });
    }

    for j in 0..space.m() {
        let p_x = dataset.p_x(j);
        for i in 0..space.n() {
            let joint = dataset.joint(j, i);
            let exp = dataset.experimental(j, i);
            if joint > exp + eps_cons {
                violations.push(Violation {
                    treatment: Some(j),
                    outcome: Some(i),
                    kind: ViolationKind::Lower,
                    magnitude: joint - exp,
                });
            }
            let ceiling = joint + 1.0 - p_x;
            if exp > ceiling + eps_cons {
                violations.push(Violation {
                    treatment: Some(j),
                    outcome: Some(i),
                    kind: ViolationKind::Upper,
                    magnitude: exp - ceiling,
                });
            }
        }
    }
    ValidationReport::from_violations(violations)
}

/// On-disk dataset format. Exactly one of the counts/probabilities matrices
/// must be present for each distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub treatments: Vec<String>,
    pub outcomes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experimental_counts: Option<Vec<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experimental_probs: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observational_counts: Option<Vec<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observational_probs: Option<Vec<Vec<f64>>>,
}

impl DatasetFile {
    pub fn into_dataset(self) -> Result<Dataset> {
        let space = ProblemSpace::with_labels(self.treatments, self.outcomes)?;
        match (
            self.experimental_counts,
            self.experimental_probs,
            self.observational_counts,
            self.observational_probs,
        ) {
            (Some(ec), None, Some(oc), None) => Dataset::from_counts(&ec, &oc, space),
            (ec, ep, oc, op) => {
                let exp = match (ec, ep) {
                    (Some(c), None) => {
                        check_shape("experimental", &c, &space)?;
                        to_f64(exact_experimental(&c)?)
                    }
                    (None, Some(p)) => p,
                    _ => {
                        return Err(Error::DatasetFormat(
                            "give exactly one of experimental_counts / experimental_probs".into(),
                        ))
                    }
                };
                let joint = match (oc, op) {
                    (Some(c), None) => {
                        check_shape("observational", &c, &space)?;
                        to_f64(exact_joint(&c)?)
                    }
                    (None, Some(p)) => p,
                    _ => {
                        return Err(Error::DatasetFormat(
                            "give exactly one of observational_counts / observational_probs".into(),
                        ))
                    }
                };
                Dataset::from_probabilities(space, exp, joint, Tolerances::PROBABILITIES)
            }
        }
    }
}

fn to_f64(table: Vec<Vec<BigRational>>) -> Vec<Vec<f64>> {
    table.iter().map(|r| r.iter().map(ratio_to_f64).collect()).collect()
}
