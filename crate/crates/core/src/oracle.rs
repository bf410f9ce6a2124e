//! Exact FDR and power of a procedure by enumerating every joint outcome of
//! a small family of independent discrete p-values.

use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::null_model::NullDistribution;
use crate::numeric::CompensatedSum;
use crate::procedures::{Evaluator, Procedure};

pub const DEFAULT_OUTCOME_CAP: u128 = 10_000_000;

/// One hypothesis of an enumerable family.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSpec {
    /// Null distribution the procedures use.
    pub model: NullDistribution,
    /// Probability of observing each atom of `model`. Equal to the model's point
    /// masses for a true null.
    pub masses: Vec<f64>,
    pub is_true_null: bool,
}

impl HypothesisSpec {
    pub fn true_null(model: NullDistribution) -> Self {
        let masses = model.point_masses();
        Self {
            model,
            masses,
            is_true_null: true,
        }
    }

    /// A false null whose p-value falls on the model atoms with the given
    /// probabilities.
    pub fn false_null(model: NullDistribution, masses: Vec<f64>) -> Result<Self> {
        let spec = Self {
            model,
            masses,
            is_true_null: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.is_midp() {
            return param("oracle hypotheses need a p-value distribution, not a midP one");
        }
        if self.masses.len() != self.model.len() {
            return param(format!(
                "{} outcome probabilities for {} atoms",
                self.masses.len(),
                self.model.len()
            ));
        }
        if self.masses.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
            return param("outcome probabilities must lie in [0, 1]");
        }
        let total: f64 = self
            .masses
            .iter()
            .copied()
            .collect::<CompensatedSum>()
            .value();
        if (total - 1.0).abs() > 1e-9 {
            return param(format!("outcome probabilities sum to {total}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub cap: u128,
    /// Tarone constant for the Tarone+midP procedures.
    pub c: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_OUTCOME_CAP,
            c: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    /// `E[V / max(R, 1)]`.
    pub fdr: f64,
    /// Expected fraction of false nulls rejected; 0 when there are none.
    pub power: f64,
    pub outcome_count: u128,
}

pub fn exact_fdr(specs: &[HypothesisSpec], procedure: Procedure, q: f64) -> Result<OracleResult> {
    exact_fdr_with(specs, procedure, q, &OracleOptions::default())
}

pub fn exact_fdr_with(
    specs: &[HypothesisSpec],
    procedure: Procedure,
    q: f64,
    options: &OracleOptions,
) -> Result<OracleResult> {
    if specs.is_empty() {
        return param("oracle needs at least one hypothesis");
    }
    if !(q > 0.0 && q < 1.0) {
        return param(format!("level q={q} must lie in (0, 1)"));
    }
    for s in specs {
        s.validate()?;
    }
    let count = specs
        .iter()
        .try_fold(1u128, |acc, s| acc.checked_mul(s.model.len() as u128))
        .unwrap_or(u128::MAX);
    if count > options.cap {
        return Err(Error::OutcomeCap {
            count,
            cap: options.cap,
        });
    }

    let evaluator = Evaluator::new(specs.iter().map(|s| &s.model).collect(), q, options.c);
    let n_false = specs.iter().filter(|s| !s.is_true_null).count();

    // one work item per atom of the first hypothesis, folded back in order
    let partials: Vec<(CompensatedSum, CompensatedSum)> = (0..specs[0].model.len())
        .into_par_iter()
        .map(|first| enumerate_slice(specs, &evaluator, procedure, q, n_false, first))
        .collect();
    let mut fdr = CompensatedSum::new();
    let mut power = CompensatedSum::new();
    for (f, p) in partials {
        fdr.add(f.value());
        power.add(p.value());
    }
    Ok(OracleResult {
        fdr: fdr.value(),
        power: power.value(),
        outcome_count: count,
    })
}

fn enumerate_slice(
    specs: &[HypothesisSpec],
    evaluator: &Evaluator<'_>,
    procedure: Procedure,
    q: f64,
    n_false: usize,
    first: usize,
) -> (CompensatedSum, CompensatedSum) {
    let m = specs.len();
    let mut fdr = CompensatedSum::new();
    let mut power = CompensatedSum::new();
    let mut idx = vec![0usize; m];
    idx[0] = first;
    let mut p = vec![0.0; m];
    let mut mid = vec![0.0; m];

    loop {
        let mut weight = 1.0;
        for (i, s) in specs.iter().enumerate() {
            weight *= s.masses[idx[i]];
        }
        if weight > 0.0 {
            for (i, s) in specs.iter().enumerate() {
                p[i] = s.model.atoms()[idx[i]];
                mid[i] = s.model.midp_at(idx[i]);
            }
            let rejected = evaluator.rejections(procedure, &p, &mid, q);
            let (mut r, mut v, mut t) = (0usize, 0usize, 0usize);
            for (s, &rej) in specs.iter().zip(&rejected) {
                if rej {
                    r += 1;
                    if s.is_true_null {
                        v += 1;
                    } else {
                        t += 1;
                    }
                }
            }
            fdr.add(weight * v as f64 / r.max(1) as f64);
            if n_false > 0 {
                power.add(weight * t as f64 / n_false as f64);
            }
        }

        // odometer over hypotheses 1..m; hypothesis 0 is fixed for this slice
        let mut pos = m - 1;
        loop {
            if pos == 0 {
                return (fdr, power);
            }
            idx[pos] += 1;
            if idx[pos] < specs[pos].model.len() {
                break;
            }
            idx[pos] = 0;
            pos -= 1;
        }
    }
}
