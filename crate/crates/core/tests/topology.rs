use std::collections::BTreeSet;

use hdsched::presets;
use hdsched::topology::{worst_case_exponent_h, worst_case_exponent_r, BigPower, DelayTable, ThresholdVariant};
use num_bigint::BigUint;
use proptest::prelude::*;

fn table_strategy(links: std::ops::RangeInclusive<usize>, max_delay: u32) -> impl Strategy<Value = DelayTable> {
    links.prop_flat_map(move |n| prop::collection::vec(prop::collection::vec(1..=max_delay, n), n)).prop_map(
        |mut rows| {
            for (i, r) in rows.iter_mut().enumerate() {
                r[i] = 0;
            }
            DelayTable::new(rows).unwrap()
        },
    )
}

/// Tables whose off-diagonal entries are pairwise distinct across the whole matrix.
fn distinct_table_strategy(links: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = DelayTable> {
    links.prop_flat_map(|n| (Just(n), Just((1..=(n * (n - 1)) as u32).collect::<Vec<u32>>()).prop_shuffle())).prop_map(
        |(n, pool)| {
            let mut it = pool.into_iter();
            let rows = (0..n).map(|i| (0..n).map(|j| if i == j { 0 } else { it.next().unwrap() }).collect()).collect();
            DelayTable::new(rows).unwrap()
        },
    )
}

/// Critical set of `observer` straight from the definition, without the library.
fn critical_set_by_hand(rows: &[Vec<u32>], observer: usize, upper: impl Fn(usize) -> u32) -> BTreeSet<(usize, u32)> {
    let n = rows.len();
    let mut out = BTreeSet::new();
    for (m, row) in rows.iter().enumerate() {
        for k in (0..n).filter(|&k| k != m) {
            let d = row[k];
            if d >= row[observer] && d <= upper(m) {
                out.insert((m, d));
            }
        }
    }
    out
}

fn param_sizes(t: &DelayTable, v: ThresholdVariant) -> Vec<usize> {
    (0..t.len()).map(|l| t.threshold_params(l, v).len()).collect()
}

#[test]
fn worked_example_counts() {
    let t = presets::example2();
    assert_eq!(param_sizes(&t, ThresholdVariant::R), vec![3, 4, 5]);
    assert_eq!(param_sizes(&t, ThresholdVariant::H), vec![1, 2, 3]);
    assert_eq!(t.complexity_threshold_vectors(2, ThresholdVariant::R), BigPower::from_u64(3, 56));
    assert_eq!(t.complexity_sample_paths(2, ThresholdVariant::R), BigPower::from_u64(2, 36));
    assert_eq!(t.complexity_threshold_vectors(2, ThresholdVariant::H), BigPower::from_u64(3, 14));
    assert_eq!(t.complexity_sample_paths(2, ThresholdVariant::H), BigPower::from_u64(2, 32));
}

#[test]
fn first_table_view_of_transmitter_a() {
    // Link 0 observes link 1 at delay 2 and link 2 at delay 1.
    let t = presets::table1();
    let cs = t.link_critical_set(0, ThresholdVariant::H);
    assert!(cs.contains(&(1, 2)) && cs.contains(&(1, 4)));
    assert!(cs.contains(&(2, 1)) && cs.contains(&(2, 2)));
    assert!(!cs.contains(&(1, 1)));
}

#[test]
fn big_power_comparisons() {
    let a = BigPower::from_u64(3, 56);
    let b = BigPower::from_u64(2, 89);
    // 56 log 3 = 61.52, 89 log 2 = 61.69.
    assert_eq!(a.value_cmp(&b), std::cmp::Ordering::Less);
    assert_eq!(a.expand().unwrap(), BigUint::from(3u32).pow(56));
    assert!(BigPower::from_u64(10, 9).at_most(1_000_000_000));
    assert!(!BigPower::from_u64(10, 9).at_most(999_999_999));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn row_maxima_bounded_by_global(t in table_strategy(2..=6, 30)) {
        for l in 0..t.len() {
            prop_assert!(t.tau_l_max(l) <= t.tau_max());
        }
        prop_assert_eq!((0..t.len()).map(|l| t.tau_l_max(l)).max().unwrap(), t.tau_max());
    }

    #[test]
    fn per_link_critical_sets_agree_across_variants(t in table_strategy(3..=5, 12)) {
        let rows = t.rows().to_vec();
        let tau_max = t.tau_max();
        for l in 0..t.len() {
            let r = t.link_critical_set(l, ThresholdVariant::R);
            let h = t.link_critical_set(l, ThresholdVariant::H);
            prop_assert_eq!(&r, &h);
            prop_assert_eq!(&r, &critical_set_by_hand(&rows, l, |_| tau_max));
        }
    }

    #[test]
    fn masking_never_increases_delays(t in table_strategy(3..=6, 20), pick in any::<prop::sample::Index>()) {
        let k = pick.index(t.len());
        let m = t.mask(k);
        prop_assert!(m.tau_max() <= t.tau_max());
        for l in (0..t.len()).filter(|&l| l != k) {
            prop_assert!(m.tau_l_max(l) <= t.tau_l_max(l));
        }
    }

    #[test]
    fn h_search_never_larger_than_r(t in table_strategy(2..=5, 8)) {
        let r = t.complexity_threshold_vectors(2, ThresholdVariant::R);
        let h = t.complexity_threshold_vectors(2, ThresholdVariant::H);
        prop_assert_ne!(h.value_cmp(&r), std::cmp::Ordering::Greater);
        let rp = t.complexity_sample_paths(2, ThresholdVariant::R);
        let hp = t.complexity_sample_paths(2, ThresholdVariant::H);
        prop_assert_ne!(hp.value_cmp(&rp), std::cmp::Ordering::Greater);
    }

    #[test]
    fn rearranged_tables_meet_the_closed_forms(t in distinct_table_strategy(3..=5), c in 2u32..=3) {
        let w = t.worst_case_rearrange().unwrap();
        let n = w.len() as u32;
        let mut r = param_sizes(&w, ThresholdVariant::R);
        let mut h = param_sizes(&w, ThresholdVariant::H);
        r.sort_unstable();
        h.sort_unstable();
        let expect_r: Vec<usize> = (1..=n).map(|i| (i * (n - 2) + n - 1) as usize).collect();
        let expect_h: Vec<usize> = (1..=n).map(|i| (i * (n - 2)) as usize).collect();
        prop_assert_eq!(&r, &expect_r);
        prop_assert_eq!(&h, &expect_h);
        prop_assert_eq!(w.complexity_threshold_vectors(c, ThresholdVariant::R), BigPower::new(c as u64 + 1, worst_case_exponent_r(n, c)));
        prop_assert_eq!(w.complexity_threshold_vectors(c, ThresholdVariant::H), BigPower::new(c as u64 + 1, worst_case_exponent_h(n, c)));
    }

    #[test]
    fn rows_round_trip(t in table_strategy(1..=5, 50)) {
        let rows: Vec<Vec<u32>> = t.clone().into();
        let back = DelayTable::new(rows).unwrap();
        prop_assert_eq!(back, t);
    }
}
