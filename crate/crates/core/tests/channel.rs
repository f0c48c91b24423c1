use approx::assert_abs_diff_eq;
use hdsched::channel::ChannelModel;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Row-stochastic matrix from positive raw weights.
fn normalize(raw: &[Vec<f64>]) -> Vec<Vec<f64>> {
    raw.iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|x| x / s).collect()
        })
        .collect()
}

fn model_strategy() -> impl Strategy<Value = ChannelModel> {
    (2usize..=4).prop_flat_map(|k| prop::collection::vec(prop::collection::vec(0.05f64..1.0, k), k)).prop_map(|raw| {
        let k = raw.len();
        ChannelModel::new((1..=k as u32).collect(), normalize(&raw)).unwrap()
    })
}

/// Stationary law by plain power iteration.
fn power_iteration(m: &ChannelModel) -> Vec<f64> {
    let k = m.num_states();
    let mut pi = vec![1.0 / k as f64; k];
    for _ in 0..20_000 {
        pi = (0..k).map(|j| (0..k).map(|i| pi[i] * m.p(i, j)).sum()).collect();
    }
    pi
}

#[test]
fn two_step_matrix_by_hand() {
    let m = ChannelModel::two_state(0.1).unwrap();
    let p2 = m.n_step_matrix(2);
    // 0.9^2 + 0.1^2 on the diagonal.
    assert_abs_diff_eq!(p2[(0, 0)], 0.82, epsilon = 1e-12);
    assert_abs_diff_eq!(p2[(0, 1)], 0.18, epsilon = 1e-12);
    let p0 = m.n_step_matrix(0);
    assert_eq!(p0[(0, 0)], 1.0);
    assert_eq!(p0[(0, 1)], 0.0);
}

#[test]
fn asymmetric_two_state_balance() {
    let m = ChannelModel::new(vec![1, 2], vec![vec![0.8, 0.2], vec![0.1, 0.9]]).unwrap();
    // pi_1 * 0.2 = pi_2 * 0.1 with pi_1 + pi_2 = 1.
    let pi = m.stationary().unwrap();
    assert_abs_diff_eq!(pi[0], 1.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(pi[1], 2.0 / 3.0, epsilon = 1e-12);
}

#[test]
fn doubly_stochastic_is_uniform() {
    let m =
        ChannelModel::new(vec![0, 1, 3], vec![vec![0.2, 0.3, 0.5], vec![0.5, 0.2, 0.3], vec![0.3, 0.5, 0.2]]).unwrap();
    for p in m.stationary().unwrap() {
        assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
    }
}

#[test]
fn reducible_chain_is_rejected() {
    let m = ChannelModel::new(vec![1, 2], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert!(matches!(m.stationary(), Err(hdsched::Error::NonErgodic)));
}

#[test]
fn zero_delay_returns_the_observed_rate() {
    let m = ChannelModel::two_state(0.3).unwrap();
    assert_eq!(m.cond_expected_rate(0, 0), 1.0);
    assert_eq!(m.cond_expected_rate(1, 0), 2.0);
}

#[test]
fn degenerate_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let stay = ChannelModel::two_state(0.0).unwrap();
    assert_eq!(stay.sample_path(Some(1), 5, &mut rng).unwrap(), vec![1; 5]);
    let flip = ChannelModel::two_state(1.0).unwrap();
    assert_eq!(flip.sample_path(Some(0), 4, &mut rng).unwrap(), vec![0, 1, 0, 1]);
}

#[test]
fn empirical_flip_frequency() {
    let m = ChannelModel::two_state(0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let path = m.sample_path(None, 1_000_000, &mut rng).unwrap();
    let flips = path.windows(2).filter(|w| w[0] != w[1]).count();
    let freq = flips as f64 / (path.len() - 1) as f64;
    assert!((freq - 0.1).abs() < 0.001, "flip frequency {freq}");
}

#[test]
fn sample_paths_are_seed_deterministic() {
    let m = ChannelModel::two_state(0.3).unwrap();
    let a = m.sample_path(None, 500, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = m.sample_path(None, 500, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn long_delay_forgets_the_observation() {
    let m = ChannelModel::two_state(0.1).unwrap();
    let mean = m.stationary_mean().unwrap();
    for s in 0..2 {
        assert_abs_diff_eq!(m.cond_expected_rate(s, 100), mean, epsilon = 1e-9);
    }
}

proptest! {
    #[test]
    fn chapman_kolmogorov(m in model_strategy(), a in 0u32..40, b in 0u32..40) {
        let lhs = m.n_step_matrix(a + b);
        let rhs = m.n_step_matrix(a) * m.n_step_matrix(b);
        prop_assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn powers_stay_stochastic(m in model_strategy(), n in 0u32..200) {
        let p = m.n_step_matrix(n);
        for i in 0..m.num_states() {
            let s: f64 = p.row(i).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_is_a_fixed_point(m in model_strategy()) {
        let pi = m.stationary().unwrap();
        let k = m.num_states();
        for j in 0..k {
            let next: f64 = (0..k).map(|i| pi[i] * m.p(i, j)).sum();
            prop_assert!((next - pi[j]).abs() < 1e-12);
            prop_assert!(pi[j] >= 0.0);
        }
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in pi.iter().zip(power_iteration(&m)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn conditional_rate_is_a_matrix_row_mean(m in model_strategy(), n in 0u32..30) {
        let p = m.n_step_matrix(n);
        for i in 0..m.num_states() {
            let direct: f64 = (0..m.num_states()).map(|j| m.rate(j) as f64 * p[(i, j)]).sum();
            prop_assert!((m.cond_expected_rate(i, n) - direct).abs() < 1e-12);
        }
    }
}
