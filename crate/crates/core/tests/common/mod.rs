#![allow(dead_code)]

use discrete_fdr::oracle::HypothesisSpec;
use discrete_fdr::{
    fisher_exact, ContingencyTable, Family, NullDistribution, TailDirection, TestResult,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Random distribution whose atoms equal its cdf, with `atoms` support points
/// and the last one at 1.
pub fn random_null<R: Rng>(rng: &mut R, atoms: usize) -> NullDistribution {
    let w: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>() + 0.02).collect();
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = w
        .iter()
        .map(|x| {
            acc += x / total;
            acc
        })
        .collect();
    *cdf.last_mut().unwrap() = 1.0;
    NullDistribution::exact(cdf).unwrap()
}

/// Random probability vector of length `n`, tilted toward the first entries.
pub fn random_alternative<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let tilt = rng.random_range(0.0..4.0);
    let w: Vec<f64> = (0..n)
        .map(|j| (rng.random::<f64>() + 0.05) * (-(tilt * j as f64)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// 2-4 hypotheses with 2-4 atoms each. `false_share` is the chance that a
/// hypothesis is a false null.
pub fn random_specs<R: Rng>(rng: &mut R, false_share: f64) -> Vec<HypothesisSpec> {
    let m = rng.random_range(2..=4);
    (0..m)
        .map(|_| {
            let atoms = rng.random_range(2..=4);
            let model = random_null(rng, atoms);
            if rng.random::<f64>() < false_share {
                let masses = random_alternative(rng, model.len());
                HypothesisSpec::false_null(model, masses).unwrap()
            } else {
                HypothesisSpec::true_null(model)
            }
        })
        .collect()
}

pub fn random_table<R: Rng>(rng: &mut R) -> ContingencyTable {
    let n1 = rng.random_range(1..=30);
    let n2 = rng.random_range(1..=30);
    let p1: f64 = rng.random_range(0.0..0.6);
    let p2: f64 = rng.random_range(0.0..0.6);
    let x11 = (0..n1).filter(|_| rng.random::<f64>() < p1).count() as u64;
    let x21 = (0..n2).filter(|_| rng.random::<f64>() < p2).count() as u64;
    ContingencyTable::new(x11, n1 - x11, x21, n2 - x21)
}

/// Random discrete family: Fisher tests on random tables mixed with
/// hypotheses drawn from random atom grids.
pub fn random_family<R: Rng>(rng: &mut R, max_m: usize) -> Family {
    let m = rng.random_range(1..=max_m);
    let results = (0..m)
        .map(|_| {
            if rng.random::<bool>() {
                fisher_exact(&random_table(rng), TailDirection::Less)
            } else {
                let atoms = rng.random_range(1..=8);
                let null = random_null(rng, atoms);
                let p = *null.atoms().choose(rng).unwrap();
                TestResult::from_observed(null, p).unwrap()
            }
        })
        .collect();
    Family::new(results).unwrap()
}
