//! Multiple-testing procedures as adjusted p-value transforms.
//!
//! Step-up procedures (BH, DBH) take a suffix minimum over sorted ranks and
//! step-down procedures (BL, DBL) a prefix maximum, so rejecting every
//! hypothesis with adjusted value `<= q` reproduces the procedure at level `q`.
//! Sorting is stable: tied p-values keep their input order.

use std::fmt;
use std::str::FromStr;

use crate::error::{param, Error, Result};
use crate::null_model::{NullDistribution, TestResult};
use crate::numeric::{compensated_sum, stable_order, TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Procedure {
    /// Benjamini-Hochberg step-up on p-values.
    Bh,
    /// BH on midP-values of the whole family.
    MidpBh,
    /// Discrete BH. Does not guarantee FDR control.
    Dbh,
    /// Benjamini-Liu step-down on p-values.
    Bl,
    /// BL on midP-values of the whole family.
    MidpBl,
    /// Discrete BL.
    Dbl,
    /// Tarone filtering, then BH on midP-values of the retained hypotheses.
    TaroneMidpBh,
    /// Tarone filtering, then BL on midP-values of the retained hypotheses.
    TaroneMidpBl,
}

impl Procedure {
    /// The six procedures compared in the simulation study, step-up first.
    pub const STUDY: [Procedure; 6] = [
        Procedure::Dbh,
        Procedure::TaroneMidpBh,
        Procedure::Bh,
        Procedure::Dbl,
        Procedure::TaroneMidpBl,
        Procedure::Bl,
    ];

    /// Column order of the small worked example: BH, midP+BH, DBH, BL,
    /// midP+BL, DBL.
    pub const EXAMPLE: [Procedure; 6] = [
        Procedure::Bh,
        Procedure::MidpBh,
        Procedure::Dbh,
        Procedure::Bl,
        Procedure::MidpBl,
        Procedure::Dbl,
    ];

    pub const ALL: [Procedure; 8] = [
        Procedure::Bh,
        Procedure::MidpBh,
        Procedure::Dbh,
        Procedure::Bl,
        Procedure::MidpBl,
        Procedure::Dbl,
        Procedure::TaroneMidpBh,
        Procedure::TaroneMidpBl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Procedure::Bh => "bh",
            Procedure::MidpBh => "midp-bh",
            Procedure::Dbh => "dbh",
            Procedure::Bl => "bl",
            Procedure::MidpBl => "midp-bl",
            Procedure::Dbl => "dbl",
            Procedure::TaroneMidpBh => "tmidp-bh",
            Procedure::TaroneMidpBl => "tmidp-bl",
        }
    }

    pub fn is_step_up(self) -> bool {
        matches!(
            self,
            Procedure::Bh | Procedure::MidpBh | Procedure::Dbh | Procedure::TaroneMidpBh
        )
    }

    pub fn uses_midp(self) -> bool {
        matches!(
            self,
            Procedure::MidpBh
                | Procedure::MidpBl
                | Procedure::TaroneMidpBh
                | Procedure::TaroneMidpBl
        )
    }

    /// DBH is the one procedure here with a known FDR counterexample.
    pub fn guarantees_fdr_control(self) -> bool {
        self != Procedure::Dbh
    }

    pub fn parse_list(list: &str) -> Result<Vec<Procedure>> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Procedure::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| Error::Parameter(format!("unknown procedure '{s}'")))
    }
}

/// A family of `m >= 1` tested hypotheses in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    results: Vec<TestResult>,
}

impl Family {
    pub fn new(results: Vec<TestResult>) -> Result<Self> {
        if results.is_empty() {
            return param("a family needs at least one hypothesis");
        }
        Ok(Self { results })
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    pub fn results(&self) -> &[TestResult] {
        &self.results
    }

    pub fn p_values(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.p_value).collect()
    }

    pub fn mid_p_values(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.mid_p).collect()
    }

    pub fn nulls(&self) -> Vec<&NullDistribution> {
        self.results.iter().map(|r| &r.null).collect()
    }

    /// Reorders hypotheses; `order[k]` is the input index placed at position k.
    pub fn permuted(&self, order: &[usize]) -> Family {
        Family {
            results: order.iter().map(|&i| self.results[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedPValues {
    pub procedure: Procedure,
    /// Adjusted value per hypothesis, aligned to input order.
    pub values: Vec<f64>,
    /// Hypotheses that were actually tested; all of them unless Tarone
    /// filtering removed some.
    pub selected: Vec<usize>,
}

impl AdjustedPValues {
    pub fn reject(&self, q: f64) -> Vec<usize> {
        reject_values(&self.values, q)
    }
}

/// Outcome of the Tarone filtering step.
#[derive(Debug, Clone, PartialEq)]
pub struct TaroneSelection {
    /// Smallest k with m(k) <= k.
    pub k: usize,
    /// m(K): number of retained hypotheses.
    pub m_k: usize,
    /// Retained indices, ascending.
    pub selected: Vec<usize>,
    pub c: f64,
}

fn check_level(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        param(format!("level q={q} must lie in (0, 1)"))
    }
}

fn check_pvalues(pvals: &[f64]) -> Result<()> {
    if pvals.is_empty() {
        return param("no p-values to adjust");
    }
    match pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(p) => param(format!("p-value {p} outside [0, 1]")),
        None => Ok(()),
    }
}

/// Scatters sorted-order values back to input order.
fn unsort(order: &[usize], sorted: Vec<f64>) -> Vec<f64> {
    let mut out = vec![0.0; order.len()];
    for (&i, v) in order.iter().zip(sorted) {
        out[i] = v;
    }
    out
}

/// Suffix minimum of `terms` (in sorted order), capped at 1.
fn step_up(mut terms: Vec<f64>) -> Vec<f64> {
    let mut running = 1.0_f64;
    for t in terms.iter_mut().rev() {
        running = running.min(*t);
        *t = running;
    }
    terms
}

/// Prefix maximum of `terms` (in sorted order), capped at 1.
fn step_down(mut terms: Vec<f64>) -> Vec<f64> {
    let mut running = 0.0_f64;
    for t in terms.iter_mut() {
        running = running.max(*t);
        *t = running.min(1.0);
    }
    terms
}

/// `1 - (1 - x)^n`, accurate for small x.
fn one_minus_pow_complement(x: f64, n: f64) -> f64 {
    -(n * (-x).ln_1p()).exp_m1()
}

pub(crate) fn bh_values(pvals: &[f64]) -> Vec<f64> {
    let m = pvals.len() as f64;
    let order = stable_order(pvals);
    let terms = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| m / (rank + 1) as f64 * pvals[i])
        .collect();
    unsort(&order, step_up(terms))
}

pub(crate) fn bl_values(pvals: &[f64]) -> Vec<f64> {
    let m = pvals.len();
    let order = stable_order(pvals);
    let terms = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let remaining = (m - rank) as f64;
            remaining / m as f64 * one_minus_pow_complement(pvals[i], remaining)
        })
        .collect();
    unsort(&order, step_down(terms))
}

pub(crate) fn dbh_values(pvals: &[f64], nulls: &[&NullDistribution]) -> Vec<f64> {
    let order = stable_order(pvals);
    let terms = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let t = pvals[i];
            compensated_sum(nulls.iter().map(|d| d.cdf_le(t))) / (rank + 1) as f64
        })
        .collect();
    unsort(&order, step_up(terms))
}

/// `(m-i+1)/m * (1 - prod_{j>=i} (1 - F_(j)(z)))` for sorted rank `rank`
/// (0-based), where `sorted_nulls` lists null distributions in rank order.
fn dbl_term(sorted_nulls: &[&NullDistribution], rank: usize, z: f64) -> f64 {
    let m = sorted_nulls.len();
    let log_survival: f64 = sorted_nulls[rank..]
        .iter()
        .map(|d| (-d.cdf_le(z)).ln_1p())
        .sum();
    (m - rank) as f64 / m as f64 * -log_survival.exp_m1()
}

pub(crate) fn dbl_values(pvals: &[f64], nulls: &[&NullDistribution]) -> Vec<f64> {
    let order = stable_order(pvals);
    let sorted_nulls: Vec<&NullDistribution> = order.iter().map(|&i| nulls[i]).collect();
    let terms = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| dbl_term(&sorted_nulls, rank, pvals[i]))
        .collect();
    unsort(&order, step_down(terms))
}

/// Benjamini-Hochberg adjusted p-values: `min_{i>=j} m/i * p_(i)`.
pub fn bh_adjust(pvals: &[f64]) -> Result<AdjustedPValues> {
    check_pvalues(pvals)?;
    Ok(AdjustedPValues {
        procedure: Procedure::Bh,
        values: bh_values(pvals),
        selected: (0..pvals.len()).collect(),
    })
}

/// Benjamini-Liu step-down adjusted p-values.
pub fn bl_adjust(pvals: &[f64]) -> Result<AdjustedPValues> {
    check_pvalues(pvals)?;
    Ok(AdjustedPValues {
        procedure: Procedure::Bl,
        values: bl_values(pvals),
        selected: (0..pvals.len()).collect(),
    })
}

/// Discrete BH: replaces `m * p_(i)` by `sum_l Pr_l(P_l <= p_(i))`.
pub fn dbh_adjust(family: &Family) -> Result<AdjustedPValues> {
    Ok(AdjustedPValues {
        procedure: Procedure::Dbh,
        values: dbh_values(&family.p_values(), &family.nulls()),
        selected: (0..family.len()).collect(),
    })
}

/// Discrete BL: replaces `(1 - p_(i))^{m-i+1}` by the product of the null
/// survival functions of the hypotheses at ranks `i..m`.
pub fn dbl_adjust(family: &Family) -> Result<AdjustedPValues> {
    Ok(AdjustedPValues {
        procedure: Procedure::Dbl,
        values: dbl_values(&family.p_values(), &family.nulls()),
        selected: (0..family.len()).collect(),
    })
}

/// BL critical values `1 - [1 - min(1, m q / (m-i+1))]^{1/(m-i+1)}`.
pub fn bl_critical_values(m: usize, q: f64) -> Result<Vec<f64>> {
    check_level(q)?;
    Ok((1..=m)
        .map(|i| {
            let remaining = (m - i + 1) as f64;
            let x = (m as f64 * q / remaining).min(1.0);
            one_minus_pow_complement(x, 1.0 / remaining)
        })
        .collect())
}

/// DBL critical values under the observed rank order of the family. Each value
/// is the largest atom `z` (among the null distributions at ranks `i..m`) whose
/// DBL term stays within `q`, floored by the previous critical value.
pub fn dbl_critical_values(family: &Family, q: f64) -> Result<Vec<f64>> {
    check_level(q)?;
    let pvals = family.p_values();
    let nulls = family.nulls();
    let order = stable_order(&pvals);
    let sorted_nulls: Vec<&NullDistribution> = order.iter().map(|&i| nulls[i]).collect();

    let mut crit = Vec::with_capacity(order.len());
    let mut prev = 0.0_f64;
    for rank in 0..order.len() {
        let mut candidates: Vec<f64> = sorted_nulls[rank..]
            .iter()
            .flat_map(|d| d.atoms().iter().copied())
            .collect();
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        // the term is non-decreasing in z, so feasible atoms form a prefix
        let feasible = candidates.partition_point(|&z| dbl_term(&sorted_nulls, rank, z) <= q + TOL);
        if feasible > 0 {
            prev = prev.max(candidates[feasible - 1]);
        }
        crit.push(prev);
    }
    Ok(crit)
}

/// Number of rejections of a step-down walk: sorted p-values are compared
/// with `critical` in rank order until the first one exceeds its value.
pub fn step_down_rejections(sorted_pvals: &[f64], critical: &[f64]) -> usize {
    sorted_pvals
        .iter()
        .zip(critical)
        .take_while(|(p, c)| **p <= **c + TOL)
        .count()
}

fn tarone_from_nulls(nulls: &[&NullDistribution], q: f64, c: f64) -> TaroneSelection {
    let m = nulls.len();
    let min_levels: Vec<f64> = nulls
        .iter()
        .map(|d| d.min_achievable_significance())
        .collect();
    let count_below = |threshold: f64| min_levels.iter().filter(|&&s| s <= threshold + TOL).count();
    let k = (1..=m)
        .find(|&k| count_below(c * q / k as f64) <= k)
        .unwrap_or(m);
    let threshold = c * q / k as f64;
    let selected: Vec<usize> = (0..m)
        .filter(|&i| min_levels[i] <= threshold + TOL)
        .collect();
    TaroneSelection {
        k,
        m_k: selected.len(),
        selected,
        c,
    }
}

/// Tarone filtering: keeps the hypotheses whose minimum achievable
/// significance is at most `c q / K`, with `K` the smallest `k` such that at
/// most `k` hypotheses reach `c q / k`.
pub fn tarone_select(family: &Family, q: f64, c: f64) -> Result<TaroneSelection> {
    check_level(q)?;
    if !(c >= 1.0 && c.is_finite()) {
        return param(format!("Tarone constant c={c} must be >= 1"));
    }
    Ok(tarone_from_nulls(&family.nulls(), q, c))
}

/// Which adjustment a Tarone+midP procedure runs on the retained hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseProcedure {
    Bh,
    Bl,
}

fn tarone_values(mid_p: &[f64], selection: &TaroneSelection, base: BaseProcedure) -> Vec<f64> {
    let mut values = vec![1.0; mid_p.len()];
    if selection.selected.is_empty() {
        return values;
    }
    let sub: Vec<f64> = selection.selected.iter().map(|&i| mid_p[i]).collect();
    let adjusted = match base {
        BaseProcedure::Bh => bh_values(&sub),
        BaseProcedure::Bl => bl_values(&sub),
    };
    for (&i, v) in selection.selected.iter().zip(adjusted) {
        values[i] = v;
    }
    values
}

/// Tarone filtering followed by BH or BL on the midP-values of the retained
/// hypotheses, with the family size replaced by m(K). Filtered hypotheses get
/// adjusted value 1. The adjusted values are only meaningful at level `q`.
pub fn tarone_midp_procedure(
    family: &Family,
    q: f64,
    c: f64,
    base: BaseProcedure,
) -> Result<AdjustedPValues> {
    let selection = tarone_select(family, q, c)?;
    let procedure = match base {
        BaseProcedure::Bh => Procedure::TaroneMidpBh,
        BaseProcedure::Bl => Procedure::TaroneMidpBl,
    };
    Ok(AdjustedPValues {
        procedure,
        values: tarone_values(&family.mid_p_values(), &selection, base),
        selected: selection.selected,
    })
}

fn reject_values(values: &[f64], q: f64) -> Vec<usize> {
    (0..values.len())
        .filter(|&i| values[i] <= q + TOL)
        .collect()
}

/// Indices whose adjusted value is at most `q`.
pub fn reject_at_level(adj: &AdjustedPValues, q: f64) -> Result<Vec<usize>> {
    check_level(q)?;
    Ok(adj.reject(q))
}

/// Precomputed per-family state for repeated evaluation under different
/// observed p-values (exhaustive enumeration, simulation).
pub(crate) struct Evaluator<'a> {
    nulls: Vec<&'a NullDistribution>,
    tarone: TaroneSelection,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(nulls: Vec<&'a NullDistribution>, q: f64, c: f64) -> Self {
        let tarone = tarone_from_nulls(&nulls, q, c);
        Self { nulls, tarone }
    }

    pub(crate) fn values(&self, procedure: Procedure, p: &[f64], mid_p: &[f64]) -> Vec<f64> {
        match procedure {
            Procedure::Bh => bh_values(p),
            Procedure::MidpBh => bh_values(mid_p),
            Procedure::Dbh => dbh_values(p, &self.nulls),
            Procedure::Bl => bl_values(p),
            Procedure::MidpBl => bl_values(mid_p),
            Procedure::Dbl => dbl_values(p, &self.nulls),
            Procedure::TaroneMidpBh => tarone_values(mid_p, &self.tarone, BaseProcedure::Bh),
            Procedure::TaroneMidpBl => tarone_values(mid_p, &self.tarone, BaseProcedure::Bl),
        }
    }

    pub(crate) fn rejections(
        &self,
        procedure: Procedure,
        p: &[f64],
        mid_p: &[f64],
        q: f64,
    ) -> Vec<bool> {
        self.values(procedure, p, mid_p)
            .into_iter()
            .map(|v| v <= q + TOL)
            .collect()
    }
}

/// Runs any procedure on a family. `q` and `c` only affect the Tarone
/// variants, whose filtering step depends on the level.
pub fn adjust(family: &Family, procedure: Procedure, q: f64, c: f64) -> Result<AdjustedPValues> {
    match procedure {
        Procedure::Bh => bh_adjust(&family.p_values()),
        Procedure::Bl => bl_adjust(&family.p_values()),
        Procedure::MidpBh => {
            bh_adjust(&family.mid_p_values()).map(|a| AdjustedPValues { procedure, ..a })
        }
        Procedure::MidpBl => {
            bl_adjust(&family.mid_p_values()).map(|a| AdjustedPValues { procedure, ..a })
        }
        Procedure::Dbh => dbh_adjust(family),
        Procedure::Dbl => dbl_adjust(family),
        Procedure::TaroneMidpBh => tarone_midp_procedure(family, q, c, BaseProcedure::Bh),
        Procedure::TaroneMidpBl => tarone_midp_procedure(family, q, c, BaseProcedure::Bl),
    }
}
