//! Computable upper bound on the FDR of BH applied to midP-values.

use crate::error::{param, Result};
use crate::null_model::NullDistribution;
use crate::numeric::compensated_sum;
use crate::procedures::{tarone_select, Family};

#[derive(Debug, Clone, PartialEq)]
pub struct MidFdrBound {
    /// Per-hypothesis inflation factors, aligned to the hypotheses the bound
    /// was computed over.
    pub epsilons: Vec<f64>,
    /// `(q / m) * sum(epsilons)`.
    pub bound_all: f64,
    pub q: f64,
    /// Family size used in the thresholds `k q / m`.
    pub m: usize,
    /// Indices of the hypotheses covered (all, or the Tarone-retained subset).
    pub indices: Vec<usize>,
}

/// `max_k Pr(midP <= kq/m) / (kq/m)` over `k = 1..m`.
pub fn epsilon(dist: &NullDistribution, q: f64, m: usize) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) || m == 0 {
        return param(format!("epsilon needs 0 < q < 1 and m >= 1 (q={q}, m={m})"));
    }
    let mid = dist.midp_distribution()?;
    Ok((1..=m)
        .map(|k| {
            let t = k as f64 * q / m as f64;
            mid.cdf_le(t) / t
        })
        .fold(0.0, f64::max))
}

fn bound_over(family: &Family, indices: Vec<usize>, q: f64) -> Result<MidFdrBound> {
    let m = indices.len();
    if m == 0 {
        return Ok(MidFdrBound {
            epsilons: vec![],
            bound_all: 0.0,
            q,
            m,
            indices,
        });
    }
    let epsilons = indices
        .iter()
        .map(|&i| epsilon(&family.results()[i].null, q, m))
        .collect::<Result<Vec<_>>>()?;
    let bound_all = q / m as f64 * compensated_sum(epsilons.iter().copied());
    Ok(MidFdrBound {
        epsilons,
        bound_all,
        q,
        m,
        indices,
    })
}

/// Upper bound on the FDR of BH at level `q` on the family's midP-values.
pub fn midfdr_upper_bound(family: &Family, q: f64) -> Result<MidFdrBound> {
    bound_over(family, (0..family.len()).collect(), q)
}

/// Same bound for the Tarone+midP BH procedure: only retained hypotheses
/// contribute and `m` becomes m(K).
pub fn midfdr_upper_bound_tarone(family: &Family, q: f64, c: f64) -> Result<MidFdrBound> {
    let sel = tarone_select(family, q, c)?;
    bound_over(family, sel.selected, q)
}
