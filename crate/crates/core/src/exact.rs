//! One-sided Fisher's exact test for 2x2 tables.

use std::fmt;
use std::str::FromStr;

use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::null_model::{NullDistribution, TestResult};
use crate::numeric::CompensatedSum;

/// Counts of a 2x2 table. Row 1 is group 1 (occurrences `x11`, non-occurrences
/// `x12`), row 2 is group 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContingencyTable {
    pub x11: u64,
    pub x12: u64,
    pub x21: u64,
    pub x22: u64,
}

impl ContingencyTable {
    pub fn new(x11: u64, x12: u64, x21: u64, x22: u64) -> Self {
        Self { x11, x12, x21, x22 }
    }

    pub fn total(&self) -> u64 {
        self.x11 + self.x12 + self.x21 + self.x22
    }

    pub fn row1(&self) -> u64 {
        self.x11 + self.x12
    }

    pub fn col1(&self) -> u64 {
        self.x11 + self.x21
    }

    /// Range of `x11` compatible with the fixed margins.
    pub fn support_bounds(&self) -> (u64, u64) {
        let (n, k, total) = (self.row1(), self.col1(), self.total());
        ((n + k).saturating_sub(total), n.min(k))
    }

    /// True when the margins leave only one attainable table.
    pub fn is_degenerate(&self) -> bool {
        let (lo, hi) = self.support_bounds();
        lo == hi
    }
}

/// Direction of the one-sided alternative for group 1's success probability
/// relative to group 2's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TailDirection {
    /// Group 1 smaller: p-value is `Pr(X11 <= observed)`.
    #[default]
    Less,
    /// Group 1 larger: p-value is `Pr(X11 >= observed)`.
    Greater,
}

impl fmt::Display for TailDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailDirection::Less => "less",
            TailDirection::Greater => "greater",
        })
    }
}

impl FromStr for TailDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "less" => Ok(Self::Less),
            "greater" => Ok(Self::Greater),
            other => Err(Error::Parameter(format!(
                "unknown tail direction '{other}'"
            ))),
        }
    }
}

/// Hypergeometric probability of `k` successes in `draws` draws without
/// replacement from `population` items of which `successes` are successes.
pub fn hypergeom_pmf(k: i64, population: u64, successes: u64, draws: u64) -> Result<f64> {
    if successes > population || draws > population {
        return Err(Error::Parameter(format!(
            "hypergeometric parameters out of range: population={population}, \
             successes={successes}, draws={draws}"
        )));
    }
    let lo = (draws + successes).saturating_sub(population);
    let hi = draws.min(successes);
    if k < 0 || (k as u64) < lo || (k as u64) > hi {
        return Ok(0.0);
    }
    let k = k as u64;
    let ln_p = ln_binomial(successes, k) + ln_binomial(population - successes, draws - k)
        - ln_binomial(population, draws);
    Ok(ln_p.exp().min(1.0))
}

/// Normalised hypergeometric point masses of `x11` over `lo..=hi`, built by
/// accumulating log ratios of consecutive terms.
fn support_masses(table: &ContingencyTable) -> (u64, Vec<f64>) {
    let (lo, hi) = table.support_bounds();
    let n = table.row1() as f64;
    let k = table.col1() as f64;
    let total = table.total() as f64;

    let mut log_w = Vec::with_capacity((hi - lo + 1) as usize);
    let mut acc = 0.0;
    log_w.push(acc);
    for x in lo..hi {
        let x = x as f64;
        acc += ((k - x) * (n - x)).ln() - ((x + 1.0) * (total - k - n + x + 1.0)).ln();
        log_w.push(acc);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|w| (w - max).exp()).collect();
    let norm: f64 = weights.iter().copied().collect::<CompensatedSum>().value();
    (lo, weights.into_iter().map(|w| w / norm).collect())
}

/// Tail probability of every support point, in support order. The last value
/// on the accumulation path is exactly 1.
fn tail_probabilities(masses: &[f64], tail: TailDirection) -> Vec<f64> {
    let mut acc = CompensatedSum::new();
    let mut tails = vec![0.0; masses.len()];
    let order: Box<dyn Iterator<Item = usize>> = match tail {
        TailDirection::Less => Box::new(0..masses.len()),
        TailDirection::Greater => Box::new((0..masses.len()).rev()),
    };
    for i in order {
        acc.add(masses[i]);
        tails[i] = acc.value();
    }
    // the weights were normalised with the same accumulator, so rounding can
    // only leave the final value a few ulps away from 1
    let last = match tail {
        TailDirection::Less => masses.len() - 1,
        TailDirection::Greater => 0,
    };
    tails[last] = 1.0;
    for t in tails.iter_mut() {
        *t = t.min(1.0);
    }
    tails
}

fn sorted_atoms(tails: &[f64]) -> Vec<f64> {
    let mut atoms: Vec<f64> = tails.iter().copied().filter(|&t| t > 0.0).collect();
    atoms.sort_by(f64::total_cmp);
    atoms.dedup();
    atoms
}

/// All attainable one-sided p-values for the margins of `table`.
pub fn attainable_support(table: &ContingencyTable, tail: TailDirection) -> NullDistribution {
    if table.is_degenerate() {
        return NullDistribution::degenerate();
    }
    let (_, masses) = support_masses(table);
    NullDistribution::from_sorted_exact(sorted_atoms(&tail_probabilities(&masses, tail)))
}

/// One-sided Fisher's exact test. The observed p-value is read off the same
/// tail accumulation that produces the support, so it is bit-identical to one
/// of the atoms.
pub fn fisher_exact(table: &ContingencyTable, tail: TailDirection) -> TestResult {
    if table.is_degenerate() {
        return TestResult {
            p_value: 1.0,
            mid_p: 0.5,
            null: NullDistribution::degenerate(),
        };
    }
    let (lo, masses) = support_masses(table);
    let tails = tail_probabilities(&masses, tail);
    let p_value = tails[(table.x11 - lo) as usize];
    let null = NullDistribution::from_sorted_exact(sorted_atoms(&tails));
    // far-tail masses can underflow to zero; such an outcome has p = 0
    let mid_p = null.index_of(p_value).map_or(0.0, |j| null.midp_at(j));
    TestResult {
        p_value,
        mid_p,
        null,
    }
}
