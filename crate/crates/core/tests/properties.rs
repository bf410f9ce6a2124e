use discrete_fdr::exact::hypergeom_pmf;
use discrete_fdr::procedures::tarone_select;
use discrete_fdr::{adjust, fisher_exact, ContingencyTable, Family, Procedure, TailDirection};
use proptest::prelude::*;

fn table() -> impl Strategy<Value = ContingencyTable> {
    (0u64..25, 0u64..25, 0u64..25, 0u64..25)
        .prop_map(|(a, b, c, d)| ContingencyTable::new(a, b, c, d))
}

fn tail() -> impl Strategy<Value = TailDirection> {
    prop_oneof![Just(TailDirection::Less), Just(TailDirection::Greater)]
}

fn family() -> impl Strategy<Value = Family> {
    prop::collection::vec(table(), 1..25).prop_map(|tables| {
        Family::new(
            tables
                .iter()
                .map(|t| fisher_exact(t, TailDirection::Less))
                .collect(),
        )
        .unwrap()
    })
}

/// p-values in ascending order with their 1-based ranks.
fn ranked(p: &[f64]) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    idx.into_iter().map(|i| (i, p[i])).collect()
}

fn naive_step_up(p: &[f64], term: impl Fn(usize, f64) -> f64) -> Vec<f64> {
    let sorted = ranked(p);
    let mut out = vec![0.0; p.len()];
    for (j, &(i, _)) in sorted.iter().enumerate() {
        out[i] = sorted[j..]
            .iter()
            .enumerate()
            .map(|(k, &(_, pk))| term(j + k + 1, pk))
            .fold(f64::INFINITY, f64::min)
            .min(1.0);
    }
    out
}

fn naive_step_down(p: &[f64], term: impl Fn(usize, f64) -> f64) -> Vec<f64> {
    let sorted = ranked(p);
    let mut out = vec![0.0; p.len()];
    for (j, &(i, _)) in sorted.iter().enumerate() {
        out[i] = sorted[..=j]
            .iter()
            .enumerate()
            .map(|(k, &(_, pk))| term(k + 1, pk))
            .fold(0.0, f64::max)
            .min(1.0);
    }
    out
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-10)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(300) })]

    #[test]
    fn p_value_is_hypergeometric_tail(t in table(), tail in tail()) {
        let r = fisher_exact(&t, tail);
        let (lo, hi) = t.support_bounds();
        let range: Vec<u64> = match tail {
            TailDirection::Less => (lo..=t.x11).collect(),
            TailDirection::Greater => (t.x11..=hi).collect(),
        };
        let tail_sum: f64 = range
            .iter()
            .map(|&k| hypergeom_pmf(k as i64, t.total(), t.col1(), t.row1()).unwrap())
            .sum();
        prop_assert!((r.p_value - tail_sum.min(1.0)).abs() < 1e-10);
    }

    #[test]
    fn support_is_a_valid_p_value_distribution(t in table(), tail in tail()) {
        let r = fisher_exact(&t, tail);
        let atoms = r.null.atoms();
        prop_assert_eq!(*atoms.last().unwrap(), 1.0);
        prop_assert!(atoms.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(atoms[0] > 0.0);
        prop_assert!(r.null.index_of(r.p_value).is_some());
        for &a in atoms {
            prop_assert!((r.null.cdf_at(a).unwrap() - a).abs() < 1e-12);
        }
        prop_assert!(r.mid_p < r.p_value || r.null.is_degenerate());
        prop_assert!(r.mid_p > 0.0);
    }

    #[test]
    fn midp_stays_under_envelope(t in table(), tail in tail()) {
        let null = fisher_exact(&t, tail).null;
        let midp = null.midp_distribution().unwrap();
        for &x in null.atoms().iter().chain(midp.atoms()) {
            let lhs = midp.cdf_at(x).unwrap();
            let rhs = 2.0 * x - null.cdf_at(x).unwrap();
            // atoms closer than the lookup tolerance merge, moving ~1e-12 of mass
            prop_assert!(lhs <= rhs + 1e-11, "x={} {} > {}", x, lhs, rhs);
        }
    }

    #[test]
    fn bh_and_bl_match_definitions(f in family()) {
        let p = f.p_values();
        let m = p.len() as f64;
        let bh = naive_step_up(&p, |i, x| m / i as f64 * x);
        let bl = naive_step_down(&p, |i, x| {
            let r = m - i as f64 + 1.0;
            r / m * (1.0 - (1.0 - x).powf(r))
        });
        prop_assert!(close(&adjust(&f, Procedure::Bh, 0.05, 1.0).unwrap().values, &bh));
        prop_assert!(close(&adjust(&f, Procedure::Bl, 0.05, 1.0).unwrap().values, &bl));
    }

    #[test]
    fn dbh_matches_definition(f in family()) {
        let p = f.p_values();
        let nulls = f.nulls();
        let dbh = naive_step_up(&p, |i, x| {
            nulls.iter().map(|d| d.cdf_at(x).unwrap()).sum::<f64>() / i as f64
        });
        prop_assert!(close(&adjust(&f, Procedure::Dbh, 0.05, 1.0).unwrap().values, &dbh));
    }

    #[test]
    fn adjusted_values_follow_p_value_order(f in family()) {
        let p = f.p_values();
        for proc in [Procedure::Bh, Procedure::Dbh, Procedure::Bl, Procedure::Dbl] {
            let v = adjust(&f, proc, 0.05, 1.0).unwrap().values;
            for i in 0..p.len() {
                for j in 0..p.len() {
                    if p[i] < p[j] {
                        prop_assert!(v[i] <= v[j] + 1e-15, "{} {} {}", proc.name(), i, j);
                    }
                }
            }
        }
    }

    #[test]
    fn tarone_threshold_is_minimal(f in family(), q in 0.01f64..0.3) {
        let s = tarone_select(&f, q, 1.0).unwrap();
        let mins: Vec<f64> = f.nulls().iter().map(|d| d.min_achievable_significance()).collect();
        let count = |k: usize| mins.iter().filter(|&&a| a <= q / k as f64 + 1e-12).count();
        prop_assert!(count(s.k) <= s.k);
        prop_assert!((1..s.k).all(|k| count(k) > k));
        prop_assert_eq!(s.m_k, s.selected.len());
        let v = adjust(&f, Procedure::TaroneMidpBh, q, 1.0).unwrap();
        for i in 0..f.len() {
            if !s.selected.contains(&i) {
                prop_assert_eq!(v.values[i], 1.0);
            }
        }
    }

    #[test]
    fn rejections_grow_with_level(f in family(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        for proc in Procedure::ALL {
            let v = adjust(&f, proc, 0.05, 1.0).unwrap();
            let small = v.reject(lo);
            let large = v.reject(hi);
            prop_assert!(small.iter().all(|i| large.contains(i)));
        }
    }
}

#[test]
fn observed_atom_next_to_one() {
    // P(X >= 1) is within 1e-12 of 1 here
    let t = ContingencyTable::new(1, 21, 20, 1);
    let r = fisher_exact(&t, TailDirection::Greater);
    assert!(r.p_value < 1.0);
    assert!(r.mid_p < r.p_value);
    assert_eq!(r.null.index_of(r.p_value), Some(r.null.len() - 2));
}
