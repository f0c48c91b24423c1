use hdsched::channel::{ChannelModel, LinkChannels};
use hdsched::policies::{Policy, Scheduler};
use hdsched::prelude::*;
use hdsched::sim::{replay, run_trials, run_trials_sequential, stability_probe, trial_sample};
use hdsched::state::{Network, NsiView};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vsvc() -> ChannelModel {
    ChannelModel::from_profile(ChannelProfile::Vsvc)
}

#[test]
fn one_link_saturated_mean() {
    let t = DelayTable::new(vec![vec![0]]).unwrap();
    for p in [Policy::Dqic1, Policy::O, Policy::Ic, Policy::LcEldr, Policy::H] {
        let m = run_trials(&SimConfig::saturated(t.clone(), vsvc(), p).with_trials(20_000).with_seed(5)).unwrap();
        assert!(m.throughput.covers(1.5, 3.0), "{p}: {:?}", m.throughput);
    }
}

#[test]
fn parallel_equals_sequential() {
    let cfg = SimConfig::queued(presets::table3(3), vsvc(), Policy::Dqic2, vec![ArrivalProcess::poisson(0.3); 2])
        .with_trials(40)
        .with_horizon(200)
        .with_seed(8)
        .with_lags(vec![1, 3]);
    let a = run_trials(&cfg).unwrap();
    let b = run_trials_sequential(&cfg).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    let c = run_trials(&cfg).unwrap();
    assert_eq!(format!("{a:?}"), format!("{c:?}"));
    assert!(a.correlations.iter().all(|&(_, r)| (-1.0..=1.0).contains(&r)));
}

#[test]
fn saturated_service_is_the_winner_rate() {
    let t = presets::sd();
    let ch = LinkChannels::shared(&vsvc(), 3, t.tau_max()).unwrap();
    let cfg = SimConfig::saturated(t.clone(), vsvc(), Policy::LcEldr).with_seed(2);
    let s = Scheduler::new(Policy::LcEldr, t.clone(), ch, InterferenceSpec::complete(3), true, 0).unwrap();
    for i in 0..200 {
        let sample = trial_sample(&cfg, i).unwrap();
        let out = replay(&s, Mode::Saturated, &sample, &[]).unwrap();
        // Rebuild the final slot's view and ask the scheduler directly.
        let mut net = Network::new(3, t.tau_max(), -(t.tau_max() as i64));
        let k = sample.slots();
        for j in 0..k {
            let c: Vec<usize> = (0..3).map(|l| sample.channels[l][j]).collect();
            net.observe(&c);
            if j + 1 < k {
                net.advance_slot(&[0; 3], &[0; 3]);
            }
        }
        let w = s.decide(net.history()).unwrap().winner().unwrap();
        assert_eq!(out.delivered, vsvc().rate(net.history().channel(w, 0).unwrap()) as u64);
    }
}

#[test]
fn instant_information_dominates() {
    for t in [presets::vsd3(), presets::md()] {
        let ic =
            run_trials(&SimConfig::saturated(t.clone(), vsvc(), Policy::Ic).with_trials(20_000).with_seed(4)).unwrap();
        for p in [Policy::LcEldr, Policy::LcErdmc, Policy::O] {
            let m = run_trials(&SimConfig::saturated(t.clone(), vsvc(), p).with_trials(20_000).with_seed(4)).unwrap();
            assert!(m.throughput.mean <= ic.throughput.mean + 3.0 * m.throughput.stderr.hypot(ic.throughput.stderr));
        }
    }
}

#[test]
fn zero_load_is_stable() {
    let cfg = SimConfig::queued(presets::table3(2), vsvc(), Policy::Dqic1, vec![ArrivalProcess::bernoulli(0.0); 2])
        .with_trials(5)
        .with_horizon(500);
    assert!(stability_probe(&cfg, 1).unwrap());
}

#[test]
fn budget_errors_surface() {
    let cfg = SimConfig::saturated(presets::vsd3(), vsvc(), Policy::R).with_budget(1000);
    assert!(matches!(run_trials(&cfg), Err(Error::BudgetExceeded { .. })));
}

#[test]
fn queue_update_examples() {
    let mut net = Network::new(1, 0, 0);
    net.observe(&[0]);
    net.advance_slot(&[5], &[0]);
    net.observe(&[0]);
    net.advance_slot(&[2], &[3]);
    assert_eq!(net.queue_lengths(), vec![4]);
    let mut net = Network::new(1, 0, 0);
    net.observe(&[0]);
    net.advance_slot(&[1], &[0]);
    net.observe(&[0]);
    assert_eq!(net.advance_slot(&[0], &[3]), vec![1]);
    assert_eq!(net.queue_lengths(), vec![0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn queues_conserve_packets(seed in any::<u64>(), links in 1usize..5, slots in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Network::new(links, 3, -3);
        let mut last_served = 0u64;
        for _ in 0..slots {
            net.observe(&vec![0; links]);
            let before: u64 = net.queue_lengths().iter().sum();
            let a: Vec<u32> = (0..links).map(|_| rng.random_range(0..4)).collect();
            let s: Vec<u32> = (0..links).map(|_| rng.random_range(0..4)).collect();
            let served = net.advance_slot(&a, &s);
            let after: u64 = net.queue_lengths().iter().sum();
            let arrived: u64 = a.iter().map(|&x| x as u64).sum();
            let out: u64 = served.iter().map(|&x| x as u64).sum();
            prop_assert_eq!(before + arrived, after + out);
            for l in 0..links {
                prop_assert!(served[l] <= s[l]);
            }
            let (n, _) = net.delay_totals();
            prop_assert!(n >= last_served);
            last_served = n;
        }
        for l in 0..links {
            prop_assert!(net.queue(l).arrival(0).is_none_or(|a| a < net.now()));
        }
    }

    #[test]
    fn idle_network_drains(seed in any::<u64>(), policy in prop::sample::select(vec![Policy::Dqic1, Policy::Dqic2, Policy::O, Policy::LcEldr])) {
        let cfg = SimConfig::queued(presets::table3(2), vsvc(), policy, vec![ArrivalProcess::bernoulli(0.0); 2])
            .with_trials(2)
            .with_horizon(50)
            .with_seed(seed);
        let m = run_trials(&cfg).unwrap();
        prop_assert_eq!(m.max_queue, 0);
        prop_assert!(m.delay.unwrap().count == 0);
    }

    #[test]
    fn recorded_delays_are_exact(seed in any::<u64>()) {
        // Every packet served at slot t >= 0 contributes t - a with a its arrival slot.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Network::new(1, 2, -2);
        let mut fifo = std::collections::VecDeque::new();
        let (mut n, mut sum) = (0u64, 0u64);
        for t in -2i64..100 {
            net.observe(&[0]);
            let a = rng.random_range(0..3u32);
            let s = rng.random_range(0..3u32);
            for _ in 0..a {
                fifo.push_back(t);
            }
            for _ in 0..s.min(fifo.len() as u32) {
                let arr = fifo.pop_front().unwrap();
                if t >= 0 {
                    n += 1;
                    sum += (t - arr).max(0) as u64;
                }
            }
            net.advance_slot(&[a], &[s]);
        }
        prop_assert_eq!(net.delay_totals(), (n, sum));
    }
}
