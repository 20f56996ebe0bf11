//! Random datasets with two treatments and three outcomes, generated from
//! known response-type fractions, and the simulation study built on them.
//!
//! Each sample draws the nine fractions `f[3a + b] = P(Y_{x1} = y_{a+1},
//! Y_{x2} = y_{b+1})` by differencing eight sorted uniforms, derives the
//! experimental rows from `f`, draws an observational table, and keeps the
//! draw only if every pair satisfies `P(x,y) <= P(y_x) <= P(x,y) + 1 - P(x)`.
//! The quantity bounded is `P(y1_x1, y1_x2)`, whose true value is `f[0]`.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::bound_conjunction;
use crate::error::{Error, Result};
use crate::frechet::Interval;
use crate::model::{Dataset, ProblemSpace, Tolerances};
use crate::query::Term;
use crate::EPS_NUM;

pub const DEFAULT_SEED: u64 = 20_230_611;
pub const DEFAULT_SAMPLES: usize = 1000;
pub const MAX_ATTEMPTS: usize = 1_000_000;

/// Upper end of the interval `P(x1)` is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum X1Bracket {
    /// `min{P(x1,y1) + 1 - P(y1_x1), P(x1,y2) + 1 - P(y1_x2)}`
    #[default]
    Printed,
    /// `min{P(x1,y1) + 1 - P(y1_x1), P(x1,y2) + 1 - P(y2_x1)}`, the bound
    /// the consistency relation gives for the second outcome.
    Consistency,
}

/// How the observational table of a sample is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObservationalSource {
    /// Independent uniform draws for the cells, as in the published
    /// generator.
    #[default]
    Algorithm,
    /// Each response type `t` chooses `x1` with probability `s_t ~ U(0,1)`,
    /// so the table is compatible with the fractions by construction.
    ResponseTypes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub bracket: X1Bracket,
    pub observational: ObservationalSource,
    pub max_attempts: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            bracket: X1Bracket::default(),
            observational: ObservationalSource::default(),
            max_attempts: MAX_ATTEMPTS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationRecord {
    pub sample_id: usize,
    pub fractions: [f64; 9],
    pub dataset: Dataset,
    pub interval: Interval,
    pub real_value: f64,
    pub gap: f64,
    pub midpoint: f64,
    pub contained: bool,
    /// Draws needed before one passed the consistency check.
    pub attempts: usize,
}

#[derive(Debug, Clone)]
pub struct SimulationSummary {
    pub num_samples: usize,
    pub average_gap: f64,
    pub containment_rate: f64,
    pub records: Vec<SimulationRecord>,
}

impl SimulationSummary {
    pub fn from_records(records: Vec<SimulationRecord>) -> Self {
        let n = records.len();
        let average_gap = records.iter().map(|r| r.gap).sum::<f64>() / n as f64;
        let containment_rate = records.iter().filter(|r| r.contained).count() as f64 / n as f64;
        Self {
            num_samples: n,
            average_gap,
            containment_rate,
            records,
        }
    }
}

/// Uniform draw from `[a, b]`.
fn uniform(rng: &mut impl Rng, a: f64, b: f64) -> f64 {
    a + (b - a) * rng.gen::<f64>()
}

fn draw_fractions(rng: &mut impl Rng) -> [f64; 9] {
    let mut a: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
    a.push(1.0);
    a.sort_by(f64::total_cmp);
    let mut f = [0.0; 9];
    f[0] = a[0];
    for i in 1..9 {
        f[i] = a[i] - a[i - 1];
    }
    f
}

/// `exp[j][i] = P(y_{i+1} | do(x_{j+1}))`
fn experimental_rows(f: &[f64; 9]) -> Vec<Vec<f64>> {
    vec![
        vec![f[0] + f[1] + f[2], f[3] + f[4] + f[5], f[6] + f[7] + f[8]],
        vec![f[0] + f[3] + f[6], f[1] + f[4] + f[7], f[2] + f[5] + f[8]],
    ]
}

fn draw_observational(rng: &mut impl Rng, exp: &[Vec<f64>], bracket: X1Bracket) -> Option<Vec<Vec<f64>>> {
    let x1y1 = uniform(rng, 0.0, exp[0][0]);
    let x1y2 = uniform(rng, 0.0, exp[0][1]);
    let second = match bracket {
        X1Bracket::Printed => exp[1][0],
        X1Bracket::Consistency => exp[0][1],
    };
    let lo = x1y1 + x1y2;
    let hi = (x1y1 + 1.0 - exp[0][0]).min(x1y2 + 1.0 - second);
    if hi < lo {
        return None;
    }
    let x1 = uniform(rng, lo, hi);
    let x1y3 = x1 - x1y1 - x1y2;
    let x2 = 1.0 - x1;
    let x2y1 = uniform(rng, 0.0, exp[1][0].min(x2));
    let x2y2 = uniform(rng, 0.0, exp[1][1].min(x2 - x2y1));
    let x2y3 = x2 - x2y1 - x2y2;
    let joint = vec![vec![x1y1, x1y2, x1y3], vec![x2y1, x2y2, x2y3]];
    joint.iter().flatten().all(|&p| (0.0..=1.0).contains(&p)).then_some(joint)
}

fn draw_from_types(rng: &mut impl Rng, f: &[f64; 9]) -> Vec<Vec<f64>> {
    let mut joint = vec![vec![0.0; 3]; 2];
    for (t, &mass) in f.iter().enumerate() {
        let s: f64 = rng.gen();
        joint[0][t / 3] += mass * s;
        joint[1][t % 3] += mass * (1.0 - s);
    }
    joint
}

/// The generator's own acceptance test, without tolerance.
fn consistent(exp: &[Vec<f64>], joint: &[Vec<f64>]) -> bool {
    (0..3).all(|i| {
        (0..2).all(|j| {
            let px: f64 = joint[j].iter().sum();
            exp[j][i] >= joint[j][i] && exp[j][i] <= joint[j][i] + 1.0 - px
        })
    })
}

/// Draw until a sample passes the consistency check, then bound
/// `P(y1_x1, y1_x2)` on it.
pub fn generate_sample(rng: &mut impl Rng, config: &GeneratorConfig) -> Result<SimulationRecord> {
    for attempt in 1..=config.max_attempts {
        let f = draw_fractions(rng);
        let exp = experimental_rows(&f);
        let joint = match config.observational {
            ObservationalSource::Algorithm => match draw_observational(rng, &exp, config.bracket) {
                Some(joint) => joint,
                None => continue,
            },
            ObservationalSource::ResponseTypes => draw_from_types(rng, &f),
        };
        if !consistent(&exp, &joint) {
            continue;
        }
        let space = ProblemSpace::new(2, 3)?;
        let dataset = Dataset::from_probabilities(space, exp, joint, Tolerances::COUNTS)?;
        let interval = bound_conjunction(&dataset, &[Term::new(0, 0), Term::new(1, 0)])?.interval;
        return Ok(SimulationRecord {
            sample_id: 0,
            fractions: f,
            dataset,
            interval,
            real_value: f[0],
            gap: interval.width(),
            midpoint: interval.midpoint(),
            contained: interval.contains(f[0], EPS_NUM),
            attempts: attempt,
        });
    }
    Err(Error::RetryLimit(config.max_attempts))
}

/// The generator for sample `index`: stream `index` of the seeded ChaCha8
/// generator, so samples are independent of scheduling.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn run_simulation(num_samples: usize, seed: u64) -> Result<SimulationSummary> {
    run_simulation_with(num_samples, seed, &GeneratorConfig::default())
}

pub fn run_simulation_with(num_samples: usize, seed: u64, config: &GeneratorConfig) -> Result<SimulationSummary> {
    if num_samples == 0 {
        return Err(Error::UnsupportedQuery("at least one sample is required".into()));
    }
    let records = (0..num_samples)
        .into_par_iter()
        .map(|index| {
            let mut record = generate_sample(&mut sample_rng(seed, index), config)?;
            record.sample_id = index;
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationSummary::from_records(records))
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub sample_id: usize,
    pub lower: f64,
    pub upper: f64,
    pub midpoint: f64,
    pub real_value: f64,
    pub gap: f64,
    pub contained: bool,
}

impl From<&SimulationRecord> for CsvRow {
    fn from(r: &SimulationRecord) -> Self {
        Self {
            sample_id: r.sample_id,
            lower: r.interval.lo,
            upper: r.interval.hi,
            midpoint: r.midpoint,
            real_value: r.real_value,
            gap: r.gap,
            contained: r.contained,
        }
    }
}

pub fn write_csv<W: Write>(records: &[SimulationRecord], out: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::UnsupportedQuery("no records to export".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CsvRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv(records: &[SimulationRecord], destination: impl AsRef<Path>) -> Result<()> {
    write_csv(records, std::fs::File::create(destination)?)
}
