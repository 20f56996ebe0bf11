//! Random corpora shared by the integration tests.
//!
//! Datasets are built from integer weights over (response type, observed
//! treatment) cells, so every table is an exact rational and the dataset is
//! feasible by construction.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use causation_bounds::model::{Dataset, ProblemSpace};
use causation_bounds::oracle::response_types;
use causation_bounds::query::{Evidence, Query, Term};

pub const CORPUS_SEED: u64 = 0x5eed_cafe;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dataset induced by random weights on `n^m × m` cells. About a third of
/// the cells are empty so that boundary cases (zero cells, degenerate
/// evidence) show up regularly.
pub fn random_dataset(rng: &mut impl Rng, m: usize, n: usize) -> Dataset {
    let types = response_types(m, n);
    let mut weights = vec![vec![0u64; m]; types.len()];
    let mut total = 0u64;
    while total == 0 {
        for row in weights.iter_mut() {
            for w in row.iter_mut() {
                *w = if rng.gen_bool(0.35) { 0 } else { rng.gen_range(1..=20) };
                total += *w;
            }
        }
    }
    let ratio = |num: u64| BigRational::new(BigInt::from(num), BigInt::from(total));
    let mut joint = vec![vec![0u64; n]; m];
    let mut exp = vec![vec![0u64; n]; m];
    for (t, row) in types.iter().zip(&weights) {
        let mass: u64 = row.iter().sum();
        for j in 0..m {
            joint[j][t[j]] += row[j];
            exp[j][t[j]] += mass;
        }
    }
    let to_ratio = |table: Vec<Vec<u64>>| -> Vec<Vec<BigRational>> {
        table.into_iter().map(|r| r.into_iter().map(ratio).collect()).collect()
    };
    Dataset::from_exact(ProblemSpace::new(m, n).unwrap(), to_ratio(exp), to_ratio(joint)).unwrap()
}

/// Same as [`random_dataset`] with every cell non-empty.
pub fn random_dense_dataset(rng: &mut impl Rng, m: usize, n: usize) -> Dataset {
    loop {
        let ds = random_dataset(rng, m, n);
        if (0..m).all(|j| (0..n).all(|i| ds.joint(j, i) > 0.0)) {
            return ds;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvidenceKind {
    None,
    X,
    Y,
    Xy,
}

pub const EVIDENCE_KINDS: [EvidenceKind; 4] = [EvidenceKind::None, EvidenceKind::X, EvidenceKind::Y, EvidenceKind::Xy];

/// A joint query with `k` terms on distinct treatments and the requested
/// evidence. Observed treatments avoid the terms' treatments; `None` when
/// that is impossible.
pub fn random_query<R: Rng>(rng: &mut R, m: usize, n: usize, k: usize, kind: EvidenceKind) -> Option<Query> {
    let mut treatments: Vec<usize> = (0..m).collect();
    treatments.shuffle(rng);
    let (used, free) = treatments.split_at(k.min(m));
    let terms: Vec<Term> = used.iter().map(|&j| Term::new(j, rng.gen_range(0..n))).collect();
    let pick_x = |rng: &mut R| free.choose(rng).copied();
    let evidence = match kind {
        EvidenceKind::None => Evidence::NONE,
        EvidenceKind::X => Evidence::x(pick_x(rng)?),
        EvidenceKind::Y => Evidence::y(rng.gen_range(0..n)),
        EvidenceKind::Xy => {
            let p = pick_x(rng)?;
            Evidence::xy(p, rng.gen_range(0..n))
        }
    };
    Some(Query::joint(terms, evidence))
}

/// The evidence-corpus used by the acceptance suite: `datasets` random
/// datasets with `m, n ∈ {2, 3}` and, for each, every `k ≤ min(3, m)` with
/// every evidence variant.
pub fn corpus(seed: u64, datasets: usize) -> Vec<(Dataset, Vec<Query>)> {
    let mut rng = rng(seed);
    (0..datasets)
        .map(|d| {
            let (m, n) = [(2, 2), (2, 3), (3, 2), (3, 3)][d % 4];
            let ds = random_dataset(&mut rng, m, n);
            let mut queries = Vec::new();
            for k in 1..=m.min(3) {
                for kind in EVIDENCE_KINDS {
                    if let Some(q) = random_query(&mut rng, m, n, k, kind) {
                        queries.push(q);
                    }
                }
            }
            (ds, queries)
        })
        .collect()
}
