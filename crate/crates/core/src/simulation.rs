//! Monte-Carlo study of FDR and power on two-group binary data.
//!
//! Each of the `m` positions compares a binary response between two groups of
//! `N` subjects with a one-sided Fisher's exact test. Hypotheses are laid out
//! as `n_null_low` true nulls at the low success probability, then
//! `n_null_high` true nulls at the high one, then `n_false` false nulls.
//!
//! # Random streams
//!
//! Replicate `r` draws from `ChaCha20Rng::seed_from_u64(seed)` switched to
//! stream `r` (`set_stream(r)`), so results do not depend on how replicates are
//! scheduled across threads. `seed_from_u64` is the PCG32 key expansion of
//! `rand_core` 0.9. Changing either the generator or this derivation changes
//! every reported number.
//!
//! With `rho == 0` counts are binomial draws. With `rho > 0` every subject gets
//! a Gaussian vector `mu + sqrt(rho) Z0 + sqrt(1 - rho) Z_i` (one shared factor
//! `Z0` per subject) and a response is a success when its component is
//! negative; `mu_i = -Phi^{-1}(p_i)` so that the marginal success probability
//! is `p_i`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{param, Result};
use crate::exact::{fisher_exact, ContingencyTable, TailDirection};
use crate::numeric::{compensated_sum, fmt_sig};
use crate::procedures::{Evaluator, Family, Procedure};

/// How group counts are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Generator {
    /// Binomial when `rho == 0`, equicorrelated Gaussian otherwise.
    #[default]
    Auto,
    Binomial,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub m: usize,
    /// Subjects per group.
    pub n_per_group: u64,
    pub n_null_low: usize,
    pub n_null_high: usize,
    pub n_false: usize,
    pub rho: f64,
    pub reps: usize,
    pub q: f64,
    pub c: f64,
    pub seed: u64,
    /// Tail of the test. The false nulls put their larger success probability
    /// on the side the tail looks for: group 2 for `Less`, group 1 for
    /// `Greater`.
    pub tail: TailDirection,
    pub prob_null_low: f64,
    pub prob_null_high: f64,
    /// (smaller, larger) success probabilities of a false null.
    pub prob_false: (f64, f64),
    pub generator: Generator,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            m: 20,
            n_per_group: 100,
            n_null_low: 4,
            n_null_high: 15,
            n_false: 1,
            rho: 0.0,
            reps: 1000,
            q: 0.05,
            c: 1.0,
            seed: 1,
            tail: TailDirection::Less,
            prob_null_low: 0.01,
            prob_null_high: 0.10,
            prob_false: (0.10, 0.30),
            generator: Generator::Auto,
        }
    }
}

impl SimulationConfig {
    /// m = 20: 4 nulls at 0.01, 15 nulls at 0.1, one false null 0.1 vs 0.3.
    pub fn small_family(n_per_group: u64) -> Self {
        Self {
            n_per_group,
            ..Self::default()
        }
    }

    /// m = 100: 20 nulls at 0.01, 75 nulls at 0.1, five false nulls.
    pub fn large_family(n_per_group: u64) -> Self {
        Self {
            m: 100,
            n_per_group,
            n_null_low: 20,
            n_null_high: 75,
            n_false: 5,
            ..Self::default()
        }
    }

    /// m = 100, N = 100, `m0` nulls at 0.1 and the rest false.
    pub fn null_fraction(m0: usize) -> Self {
        Self {
            m: 100,
            n_per_group: 100,
            n_null_low: 0,
            n_null_high: m0,
            n_false: 100 - m0,
            ..Self::default()
        }
    }

    pub fn m0(&self) -> usize {
        self.n_null_low + self.n_null_high
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_null_low + self.n_null_high + self.n_false != self.m || self.m == 0 {
            return param(format!(
                "null-low + null-high + false = {} + {} + {} must equal m = {} >= 1",
                self.n_null_low, self.n_null_high, self.n_false, self.m
            ));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return param(format!("rho={} must lie in [0, 1)", self.rho));
        }
        if self.reps == 0 {
            return param("reps must be at least 1");
        }
        if self.n_per_group == 0 {
            return param("N must be at least 1");
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return param(format!("q={} must lie in (0, 1)", self.q));
        }
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return param(format!("c={} must be >= 1", self.c));
        }
        let probs = [
            self.prob_null_low,
            self.prob_null_high,
            self.prob_false.0,
            self.prob_false.1,
        ];
        if probs.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return param("success probabilities must lie in (0, 1)");
        }
        Ok(())
    }

    /// Success probabilities (group 1, group 2) and truth of every position.
    fn positions(&self) -> Vec<(f64, f64, bool)> {
        let (lo, hi) = self.prob_false;
        let alt = match self.tail {
            TailDirection::Less => (lo, hi),
            TailDirection::Greater => (hi, lo),
        };
        std::iter::repeat_n(
            (self.prob_null_low, self.prob_null_low, true),
            self.n_null_low,
        )
        .chain(std::iter::repeat_n(
            (self.prob_null_high, self.prob_null_high, true),
            self.n_null_high,
        ))
        .chain(std::iter::repeat_n((alt.0, alt.1, false), self.n_false))
        .collect()
    }

    fn uses_gaussian(&self) -> bool {
        match self.generator {
            Generator::Auto => self.rho > 0.0,
            Generator::Binomial => false,
            Generator::Gaussian => true,
        }
    }
}

/// Gaussian mean whose negative side has probability `p`.
pub fn threshold_mean(p: f64) -> f64 {
    -Normal::standard().inverse_cdf(p)
}

/// The random stream of replicate `rep`.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// One simulated data set.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub tables: Vec<ContingencyTable>,
    pub family: Family,
    pub is_true_null: Vec<bool>,
}

/// Success counts of one group of `n` subjects at every position, with
/// equicorrelated latent Gaussians.
pub fn gaussian_group_counts<R: Rng + ?Sized>(
    rng: &mut R,
    means: &[f64],
    rho: f64,
    n: u64,
) -> Vec<u64> {
    let shared = rho.sqrt();
    let own = (1.0 - rho).sqrt();
    let mut counts = vec![0u64; means.len()];
    for _ in 0..n {
        let z0: f64 = rng.sample(StandardNormal);
        for (mu, count) in means.iter().zip(counts.iter_mut()) {
            let zi: f64 = rng.sample(StandardNormal);
            if mu + shared * z0 + own * zi < 0.0 {
                *count += 1;
            }
        }
    }
    counts
}

/// Draws replicate `rep` of `config`. Positions with no success in either
/// group yield the degenerate test with support {1}.
pub fn generate_replicate(config: &SimulationConfig, rep: u64) -> Result<Replicate> {
    config.validate()?;
    let mut rng = replicate_rng(config.seed, rep);
    Ok(draw(config, &config.positions(), &mut rng))
}

fn draw(
    config: &SimulationConfig,
    positions: &[(f64, f64, bool)],
    rng: &mut ChaCha20Rng,
) -> Replicate {
    let n = config.n_per_group;
    let (g1, g2): (Vec<u64>, Vec<u64>) = if config.uses_gaussian() {
        let mu1: Vec<f64> = positions.iter().map(|p| threshold_mean(p.0)).collect();
        let mu2: Vec<f64> = positions.iter().map(|p| threshold_mean(p.1)).collect();
        let g1 = gaussian_group_counts(rng, &mu1, config.rho, n);
        let g2 = gaussian_group_counts(rng, &mu2, config.rho, n);
        (g1, g2)
    } else {
        positions
            .iter()
            .map(|&(p1, p2, _)| {
                let a = Binomial::new(n, p1)
                    .expect("validated probability")
                    .sample(rng);
                let b = Binomial::new(n, p2)
                    .expect("validated probability")
                    .sample(rng);
                (a, b)
            })
            .unzip()
    };
    let tables: Vec<ContingencyTable> = g1
        .iter()
        .zip(&g2)
        .map(|(&a, &b)| ContingencyTable::new(a, n - a, b, n - b))
        .collect();
    let results = tables
        .iter()
        .map(|t| fisher_exact(t, config.tail))
        .collect();
    Replicate {
        tables,
        family: Family::new(results).expect("m >= 1"),
        is_true_null: positions.iter().map(|p| p.2).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureSummary {
    pub procedure: Procedure,
    pub fdr_mean: f64,
    pub fdr_se: f64,
    /// 0 with `power_defined == false` when the configuration has no false nulls.
    pub power_mean: f64,
    pub power_se: f64,
    pub power_defined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub config: SimulationConfig,
    pub procedures: Vec<ProcedureSummary>,
}

impl SimulationSummary {
    pub fn get(&self, procedure: Procedure) -> Option<&ProcedureSummary> {
        self.procedures.iter().find(|s| s.procedure == procedure)
    }
}

/// Realised false discovery proportion and power of every procedure on one
/// replicate.
fn evaluate(
    config: &SimulationConfig,
    rep: &Replicate,
    procedures: &[Procedure],
) -> Vec<(f64, f64)> {
    let evaluator = Evaluator::new(rep.family.nulls(), config.q, config.c);
    let p = rep.family.p_values();
    let mid = rep.family.mid_p_values();
    procedures
        .iter()
        .map(|&proc| {
            let rejected = evaluator.rejections(proc, &p, &mid, config.q);
            let (mut r, mut v, mut t) = (0usize, 0usize, 0usize);
            for (&rej, &null) in rejected.iter().zip(&rep.is_true_null) {
                if rej {
                    r += 1;
                    if null {
                        v += 1;
                    } else {
                        t += 1;
                    }
                }
            }
            let fdp = v as f64 / r.max(1) as f64;
            let power = if config.n_false > 0 {
                t as f64 / config.n_false as f64
            } else {
                0.0
            };
            (fdp, power)
        })
        .collect()
}

/// Mean and standard error (sample sd / sqrt(n)).
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(xs.iter().map(|x| (x - mean).powi(2))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `config.reps` replicates in parallel and reduces them in replicate
/// order, so the summary is identical for any thread count.
pub fn run_study(config: &SimulationConfig, procedures: &[Procedure]) -> Result<SimulationSummary> {
    config.validate()?;
    if procedures.is_empty() {
        return param("no procedures requested");
    }
    let positions = config.positions();
    let per_rep: Vec<Vec<(f64, f64)>> = (0..config.reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(config.seed, r);
            let rep = draw(config, &positions, &mut rng);
            evaluate(config, &rep, procedures)
        })
        .collect();

    let summaries = procedures
        .iter()
        .enumerate()
        .map(|(j, &procedure)| {
            let fdp: Vec<f64> = per_rep.iter().map(|r| r[j].0).collect();
            let pow: Vec<f64> = per_rep.iter().map(|r| r[j].1).collect();
            let (fdr_mean, fdr_se) = mean_se(&fdp);
            let (power_mean, power_se) = mean_se(&pow);
            ProcedureSummary {
                procedure,
                fdr_mean,
                fdr_se,
                power_mean,
                power_se,
                power_defined: config.n_false > 0,
            }
        })
        .collect();
    Ok(SimulationSummary {
        config: config.clone(),
        procedures: summaries,
    })
}

/// Runs every configuration in turn.
pub fn sweep(
    configs: &[SimulationConfig],
    procedures: &[Procedure],
) -> Result<Vec<SimulationSummary>> {
    if configs.is_empty() {
        return param("no configurations to sweep");
    }
    configs.iter().map(|c| run_study(c, procedures)).collect()
}

pub const LONG_CSV_HEADER: &str = "scenario_id,procedure,N,m,m0,rho,metric,estimate,se";

/// Long-format CSV, one row per scenario x procedure x metric. `digits`
/// limits significant digits; `None` writes shortest round-trip values.
pub fn write_long_csv<W: Write>(
    summaries: &[SimulationSummary],
    mut out: W,
    digits: Option<usize>,
) -> Result<()> {
    let num = |x: f64| match digits {
        Some(d) => fmt_sig(x, d),
        None => format!("{x}"),
    };
    writeln!(out, "{LONG_CSV_HEADER}")?;
    for (id, s) in summaries.iter().enumerate() {
        let c = &s.config;
        for p in &s.procedures {
            let mut metrics = vec![("fdr", p.fdr_mean, p.fdr_se)];
            if p.power_defined {
                metrics.push(("power", p.power_mean, p.power_se));
            }
            for (metric, est, se) in metrics {
                writeln!(
                    out,
                    "{id},{},{},{},{},{},{metric},{},{}",
                    p.procedure,
                    c.n_per_group,
                    c.m,
                    c.m0(),
                    c.rho,
                    num(est),
                    num(se)
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_mean_for_tenth() {
        let mu = threshold_mean(0.1);
        assert!((mu - 1.2816).abs() < 5e-5);
        assert!((Normal::standard().cdf(-mu) - 0.1).abs() < 1e-9, "{mu}");
    }

    #[test]
    fn config_validation() {
        let mut c = SimulationConfig::default();
        assert!(c.validate().is_ok());
        c.n_false = 2;
        assert!(c.validate().is_err());
        let c = SimulationConfig {
            rho: 1.0,
            ..SimulationConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SimulationConfig {
            reps: 0,
            ..SimulationConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn binomial_fraction_converges() {
        let c = SimulationConfig {
            m: 1,
            n_per_group: 40_000,
            n_null_low: 0,
            n_null_high: 1,
            n_false: 0,
            prob_null_high: 0.5,
            ..SimulationConfig::default()
        };
        let rep = generate_replicate(&c, 0).unwrap();
        let t = rep.tables[0];
        let frac = t.x11 as f64 / c.n_per_group as f64;
        assert!((frac - 0.5).abs() < 3.0 / (c.n_per_group as f64).sqrt());
    }

    #[test]
    fn replicates_are_reproducible() {
        let c = SimulationConfig::small_family(30);
        let a = generate_replicate(&c, 7).unwrap();
        let b = generate_replicate(&c, 7).unwrap();
        assert_eq!(a.tables, b.tables);
        let other = generate_replicate(&c, 8).unwrap();
        assert_ne!(a.tables, other.tables);
    }

    #[test]
    fn zero_success_positions_are_degenerate() {
        let c = SimulationConfig::small_family(5);
        let rep = generate_replicate(&c, 0).unwrap();
        for (t, r) in rep.tables.iter().zip(rep.family.results()) {
            if t.x11 + t.x21 == 0 {
                assert!(r.null.is_degenerate());
                assert_eq!(r.p_value, 1.0);
            }
        }
    }

    #[test]
    fn mean_se_matches_definition() {
        let (m, se) = mean_se(&[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(m, 0.5);
        // sd = sqrt(1/3), se = sd / 2
        assert!((se - (1.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn no_false_nulls_flags_power() {
        let c = SimulationConfig {
            m: 5,
            n_null_low: 0,
            n_null_high: 5,
            n_false: 0,
            reps: 20,
            ..SimulationConfig::default()
        };
        let s = run_study(&c, &[Procedure::Bh]).unwrap();
        assert!(!s.procedures[0].power_defined);
        assert_eq!(s.procedures[0].power_mean, 0.0);
        let mut buf = Vec::new();
        write_long_csv(&[s], &mut buf, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains("power"));
    }
}
