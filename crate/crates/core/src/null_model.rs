//! Discrete null distributions of p-values.
//!
//! A [`NullDistribution`] lists every attainable p-value ("atom") together with
//! the null probability `Pr(P <= atom)`. Exact tests satisfy `cdf == atom` at
//! every atom; user-supplied distributions may be conservative (`cdf <= atom`).

use crate::error::{Error, Result};
use crate::numeric::{le_rel, TOL};

/// Tolerance when snapping a user-supplied final cdf value to exactly 1.
const CDF_END_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    atoms: Vec<f64>,
    cdf: Vec<f64>,
    midp: bool,
}

impl NullDistribution {
    /// Builds a distribution from explicit `(atom, cdf)` columns.
    ///
    /// Atoms must be strictly increasing in (0, 1] and end at 1; the cdf must be
    /// non-decreasing in [0, 1] and end at 1. A cdf value above its atom means the
    /// p-value is anti-conservative at that point and is rejected; a value below
    /// only logs a warning.
    pub fn new(atoms: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        let mut dist = Self {
            atoms,
            cdf,
            midp: false,
        };
        dist.validate()?;
        Ok(dist)
    }

    /// Distribution of an exact test: `Pr(P <= a) = a` at every atom.
    pub fn exact(atoms: Vec<f64>) -> Result<Self> {
        let cdf = atoms.clone();
        Self::new(atoms, cdf)
    }

    /// The single-atom distribution `{1}` of a test that cannot reject.
    pub fn degenerate() -> Self {
        Self {
            atoms: vec![1.0],
            cdf: vec![1.0],
            midp: false,
        }
    }

    /// Used by the exact tests, which build atoms that already satisfy the
    /// invariants by construction.
    pub(crate) fn from_sorted_exact(atoms: Vec<f64>) -> Self {
        debug_assert!(atoms.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(atoms.last().copied(), Some(1.0));
        let cdf = atoms.clone();
        Self {
            atoms,
            cdf,
            midp: false,
        }
    }

    fn validate(&mut self) -> Result<()> {
        let bad = |msg: String| Err(Error::Distribution(msg));
        if self.atoms.is_empty() {
            return bad("no atoms".into());
        }
        if self.atoms.len() != self.cdf.len() {
            return bad(format!(
                "{} atoms but {} cdf values",
                self.atoms.len(),
                self.cdf.len()
            ));
        }
        for (j, (&a, &f)) in self.atoms.iter().zip(&self.cdf).enumerate() {
            if !(a > 0.0 && a <= 1.0) {
                return bad(format!("atom {a} outside (0, 1]"));
            }
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("cdf value {f} outside [0, 1]"));
            }
            if j > 0 {
                if a <= self.atoms[j - 1] {
                    return bad(format!("atoms not strictly increasing at {a}"));
                }
                if f < self.cdf[j - 1] {
                    return bad(format!("cdf decreases at atom {a}"));
                }
            }
            if f > a + TOL {
                return bad(format!(
                    "cdf {f} exceeds its atom {a}; p-value is not valid"
                ));
            }
            if f < a - TOL {
                log::warn!("cdf {f} below atom {a}: p-value is conservative at this atom");
            }
        }
        let last = self.atoms.len() - 1;
        if self.atoms[last] != 1.0 {
            return bad(format!("last atom is {} instead of 1", self.atoms[last]));
        }
        if (self.cdf[last] - 1.0).abs() > CDF_END_TOL {
            return bad(format!("cdf ends at {} instead of 1", self.cdf[last]));
        }
        self.cdf[last] = 1.0;
        Ok(())
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// True when this is the image of a distribution under the midP transform.
    pub fn is_midp(&self) -> bool {
        self.midp
    }

    /// A single attainable value: the test can never produce evidence.
    pub fn is_degenerate(&self) -> bool {
        self.atoms.len() == 1
    }

    /// `Pr(P = atom_j)` for every atom.
    pub fn point_masses(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cdf
            .iter()
            .map(|&f| {
                let m = f - prev;
                prev = f;
                m
            })
            .collect()
    }

    /// Step-function evaluation of `Pr(P <= t)`.
    pub fn cdf_at(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Parameter(format!(
                "cdf_at threshold {t} outside [0, 1]"
            )));
        }
        Ok(self.cdf_le(t))
    }

    /// Unchecked form of [`cdf_at`](Self::cdf_at) for hot loops; any `t` is
    /// accepted.
    #[inline]
    pub(crate) fn cdf_le(&self, t: f64) -> f64 {
        let n = self.atoms.partition_point(|&a| le_rel(a, t));
        if n == 0 {
            0.0
        } else {
            self.cdf[n - 1]
        }
    }

    /// Position of the atom equal to `p` (within tolerance).
    pub fn index_of(&self, p: f64) -> Option<usize> {
        // nearest of the two atoms around p, so that atoms closer together
        // than the tolerance are still told apart
        let j = self.atoms.partition_point(|&a| a < p);
        let below = j.checked_sub(1);
        let above = (j < self.atoms.len()).then_some(j);
        let nearest = match (below, above) {
            (Some(b), Some(a)) if p - self.atoms[b] < self.atoms[a] - p => b,
            (_, Some(a)) => a,
            (Some(b), None) => b,
            (None, None) => return None,
        };
        let a = self.atoms[nearest];
        (le_rel(a, p) && le_rel(p, a)).then_some(nearest)
    }

    /// midP value of the atom at `index`: the average with the next smaller atom
    /// (0 below the smallest).
    pub fn midp_at(&self, index: usize) -> f64 {
        let prev = if index == 0 {
            0.0
        } else {
            self.atoms[index - 1]
        };
        (self.atoms[index] + prev) / 2.0
    }

    /// Distribution of the midP-value: every atom is averaged with its
    /// predecessor while point masses stay where they were.
    pub fn midp_distribution(&self) -> Result<NullDistribution> {
        if self.midp {
            return Err(Error::Distribution(
                "midP transform applied to a distribution that is already midP".into(),
            ));
        }
        let atoms = (0..self.atoms.len()).map(|j| self.midp_at(j)).collect();
        Ok(NullDistribution {
            atoms,
            cdf: self.cdf.clone(),
            midp: true,
        })
    }

    /// Minimum achievable significance level: the smallest atom.
    pub fn min_achievable_significance(&self) -> f64 {
        self.atoms[0]
    }
}

/// Free-function form of [`NullDistribution::cdf_at`].
pub fn cdf_at(dist: &NullDistribution, t: f64) -> Result<f64> {
    dist.cdf_at(t)
}

pub fn midp_distribution(dist: &NullDistribution) -> Result<NullDistribution> {
    dist.midp_distribution()
}

pub fn min_achievable_significance(dist: &NullDistribution) -> f64 {
    dist.min_achievable_significance()
}

/// Observed outcome of one discrete test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub p_value: f64,
    pub mid_p: f64,
    pub null: NullDistribution,
}

impl TestResult {
    /// Attaches an observed p-value to its null distribution; the p-value must
    /// be one of the atoms.
    pub fn from_observed(null: NullDistribution, p_value: f64) -> Result<Self> {
        if null.is_midp() {
            return Err(Error::Distribution(
                "test results carry the p-value distribution, not its midP image".into(),
            ));
        }
        let j = null.index_of(p_value).ok_or_else(|| {
            Error::Parameter(format!(
                "observed p-value {p_value} is not an attainable atom"
            ))
        })?;
        Ok(Self {
            p_value: null.atoms()[j],
            mid_p: null.midp_at(j),
            null,
        })
    }
}
