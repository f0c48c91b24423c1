//! Slotted network state: packet queues, arrivals and delayed NSI history.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};

use crate::topology::DelayTable;
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalKind {
    /// One packet with probability `rate`.
    Bernoulli,
    /// Poisson counts clipped at the cap.
    TruncatedPoisson,
    /// Unbounded Poisson counts.
    Poisson,
}

/// Per-slot packet arrival law for one link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProcess {
    pub kind: ArrivalKind,
    pub rate: f64,
    #[serde(default = "default_cap")]
    pub cap: u32,
}

fn default_cap() -> u32 {
    8
}

impl ArrivalProcess {
    pub fn new(kind: ArrivalKind, rate: f64, cap: u32) -> Result<Self, Error> {
        if !rate.is_finite() || rate < 0.0 {
            return Err(Error::InvalidConfig(format!("arrival rate {rate} is not a finite non-negative number")));
        }
        if kind == ArrivalKind::Bernoulli && rate > 1.0 {
            return Err(Error::InvalidConfig(format!("bernoulli rate {rate} exceeds 1")));
        }
        if kind != ArrivalKind::Poisson && cap == 0 && rate > 0.0 {
            return Err(Error::InvalidConfig("arrival cap must be positive".into()));
        }
        Ok(Self { kind, rate, cap })
    }

    pub fn poisson(rate: f64) -> Self {
        Self { kind: ArrivalKind::Poisson, rate, cap: u32::MAX }
    }

    pub fn bernoulli(rate: f64) -> Self {
        Self { kind: ArrivalKind::Bernoulli, rate, cap: 1 }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.rate == 0.0 {
            return 0;
        }
        match self.kind {
            ArrivalKind::Bernoulli => rng.random_bool(self.rate) as u32,
            ArrivalKind::Poisson => self.poisson_draw(rng),
            ArrivalKind::TruncatedPoisson => self.poisson_draw(rng).min(self.cap),
        }
    }

    fn poisson_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let d = Poisson::new(self.rate).expect("positive finite rate");
        let x: f64 = d.sample(rng);
        x as u32
    }

    /// `Pr(A = a)`.
    pub fn pmf(&self, a: u32) -> f64 {
        let poisson = |k: u32| {
            let mut p = (-self.rate).exp();
            for i in 1..=k {
                p *= self.rate / i as f64;
            }
            p
        };
        match self.kind {
            ArrivalKind::Bernoulli => match a {
                0 => 1.0 - self.rate,
                1 => self.rate,
                _ => 0.0,
            },
            ArrivalKind::Poisson => poisson(a),
            ArrivalKind::TruncatedPoisson => {
                if a < self.cap {
                    poisson(a)
                } else if a == self.cap {
                    1.0 - (0..self.cap).map(poisson).sum::<f64>()
                } else {
                    0.0
                }
            }
        }
    }
}

/// FIFO of packet arrival slots with served-packet delay accounting.
#[derive(Clone, Debug, Default)]
pub struct PacketQueue {
    packets: VecDeque<i64>,
    served: u64,
    delay_sum: u64,
}

impl PacketQueue {
    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn push(&mut self, slot: i64, count: u32) {
        self.packets.extend(std::iter::repeat(slot).take(count as usize));
    }

    /// Removes up to `k` head packets at slot `t`; counted toward the
    /// delay statistics when `record` is set.
    pub fn serve(&mut self, t: i64, k: u32, record: bool) -> u32 {
        let n = (k as usize).min(self.packets.len());
        for a in self.packets.drain(..n) {
            if record {
                self.served += 1;
                self.delay_sum += (t - a).max(0) as u64;
            }
        }
        n as u32
    }

    /// Arrival slot of the `j`th packet from the head.
    pub fn arrival(&self, j: usize) -> Option<i64> {
        self.packets.get(j).copied()
    }

    pub fn served(&self) -> u64 {
        self.served
    }

    pub fn delay_sum(&self) -> u64 {
        self.delay_sum
    }
}

/// Read access to delayed queue lengths and channel states.
pub trait NsiView {
    fn num_links(&self) -> usize;

    /// Channel state index of `link` at `delay` slots ago.
    fn channel(&self, link: usize, delay: u32) -> Result<usize, Error>;

    /// Queue length of `link` at `delay` slots ago.
    fn queue(&self, link: usize, delay: u32) -> Result<u64, Error>;
}

/// Ring buffers of the last `depth` slots of `(Q_l, C_l)` for every link.
#[derive(Clone, Debug)]
pub struct NsiHistory {
    depth: usize,
    queues: Vec<Vec<u64>>,
    channels: Vec<Vec<usize>>,
    recorded: usize,
    t: i64,
}

impl NsiHistory {
    /// Empty history starting at slot `start`; `depth` must exceed the largest read delay.
    pub fn new(links: usize, depth: usize, start: i64) -> Self {
        let depth = depth.max(1);
        Self {
            depth,
            queues: vec![vec![0; depth]; links],
            channels: vec![vec![0; depth]; links],
            recorded: 0,
            t: start - 1,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Slot of the latest record.
    pub fn now(&self) -> i64 {
        self.t
    }

    /// Appends the state of the next slot.
    pub fn record(&mut self, queues: &[u64], channels: &[usize]) {
        self.t += 1;
        let pos = self.t.rem_euclid(self.depth as i64) as usize;
        for l in 0..self.queues.len() {
            self.queues[l][pos] = queues[l];
            self.channels[l][pos] = channels[l];
        }
        self.recorded += 1;
    }

    fn slot_index(&self, link: usize, delay: u32) -> Result<usize, Error> {
        if delay as usize >= self.depth || delay as usize >= self.recorded {
            return Err(Error::InsufficientHistory { link, delay });
        }
        Ok((self.t - delay as i64).rem_euclid(self.depth as i64) as usize)
    }
}

impl NsiView for NsiHistory {
    fn num_links(&self) -> usize {
        self.queues.len()
    }

    fn channel(&self, link: usize, delay: u32) -> Result<usize, Error> {
        Ok(self.channels[link][self.slot_index(link, delay)?])
    }

    fn queue(&self, link: usize, delay: u32) -> Result<u64, Error> {
        Ok(self.queues[link][self.slot_index(link, delay)?])
    }
}

/// The view of one transmitter: reads fresher than its delay to a link fail.
#[derive(Clone, Copy, Debug)]
pub struct TransmitterView<'a, V> {
    inner: &'a V,
    table: &'a DelayTable,
    observer: usize,
}

impl<'a, V: NsiView> TransmitterView<'a, V> {
    pub fn new(inner: &'a V, table: &'a DelayTable, observer: usize) -> Self {
        Self { inner, table, observer }
    }

    pub fn observer(&self) -> usize {
        self.observer
    }

    fn check(&self, link: usize, delay: u32) -> Result<(), Error> {
        if delay < self.table.delay(link, self.observer) {
            return Err(Error::NotObservable { observer: self.observer, link, delay });
        }
        Ok(())
    }
}

impl<V: NsiView> NsiView for TransmitterView<'_, V> {
    fn num_links(&self) -> usize {
        self.inner.num_links()
    }

    fn channel(&self, link: usize, delay: u32) -> Result<usize, Error> {
        self.check(link, delay)?;
        self.inner.channel(link, delay)
    }

    fn queue(&self, link: usize, delay: u32) -> Result<u64, Error> {
        self.check(link, delay)?;
        self.inner.queue(link, delay)
    }
}

/// A sparse snapshot of delayed channel states, with unit queues.
#[derive(Clone, Debug, Default)]
pub struct MapView {
    links: usize,
    channels: HashMap<(usize, u32), usize>,
    queues: HashMap<(usize, u32), u64>,
}

impl MapView {
    pub fn new(links: usize) -> Self {
        Self { links, ..Self::default() }
    }

    pub fn set_channel(&mut self, link: usize, delay: u32, state: usize) {
        self.channels.insert((link, delay), state);
    }

    pub fn set_queue(&mut self, link: usize, delay: u32, q: u64) {
        self.queues.insert((link, delay), q);
    }
}

impl NsiView for MapView {
    fn num_links(&self) -> usize {
        self.links
    }

    fn channel(&self, link: usize, delay: u32) -> Result<usize, Error> {
        self.channels.get(&(link, delay)).copied().ok_or(Error::InsufficientHistory { link, delay })
    }

    fn queue(&self, link: usize, delay: u32) -> Result<u64, Error> {
        Ok(self.queues.get(&(link, delay)).copied().unwrap_or(1))
    }
}

/// One entry of a transmitter's delayed view.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ViewEntry {
    pub link: usize,
    pub delay: u32,
    pub queue: u64,
    pub channel: usize,
}

/// The NSI transmitter `observer` holds for each link `m`, at delays
/// `tau_observer(m) ..= tau_{m,max}`.
pub fn delayed_view<V: NsiView>(history: &V, table: &DelayTable, observer: usize) -> Result<Vec<ViewEntry>, Error> {
    let mut out = Vec::new();
    for link in table.active_links() {
        let lo = table.delay(link, observer);
        let hi = table.tau_l_max(link).max(lo);
        for delay in lo..=hi {
            out.push(ViewEntry {
                link,
                delay,
                queue: history.queue(link, delay)?,
                channel: history.channel(link, delay)?,
            });
        }
    }
    Ok(out)
}

/// Queues plus history for one network, advanced one slot at a time.
#[derive(Clone, Debug)]
pub struct Network {
    queues: Vec<PacketQueue>,
    history: NsiHistory,
    t: i64,
}

impl Network {
    /// Empty queues, first slot `start`, history deep enough for `max_delay`.
    pub fn new(links: usize, max_delay: u32, start: i64) -> Self {
        Self {
            queues: vec![PacketQueue::default(); links],
            history: NsiHistory::new(links, max_delay as usize + 1, start),
            t: start,
        }
    }

    pub fn now(&self) -> i64 {
        self.t
    }

    pub fn history(&self) -> &NsiHistory {
        &self.history
    }

    pub fn queue(&self, link: usize) -> &PacketQueue {
        &self.queues[link]
    }

    pub fn queue_lengths(&self) -> Vec<u64> {
        self.queues.iter().map(|q| q.len() as u64).collect()
    }

    /// Records `(Q[t], C[t])` for the current slot.
    pub fn observe(&mut self, channels: &[usize]) {
        let q = self.queue_lengths();
        self.history.record(&q, channels);
    }

    /// Applies `Q[t+1] = (Q[t] + A[t] - S[t])^+` packet by packet and moves to
    /// the next slot. Returns the packets actually served per link.
    pub fn advance_slot(&mut self, arrivals: &[u32], service: &[u32]) -> Vec<u32> {
        let t = self.t;
        let record = t >= 0;
        let served = self
            .queues
            .iter_mut()
            .zip(arrivals.iter().zip(service))
            .map(|(q, (&a, &s))| {
                q.push(t, a);
                q.serve(t, s, record)
            })
            .collect();
        self.t += 1;
        served
    }

    /// Packets served at `t >= 0` and the sum of their delays.
    pub fn delay_totals(&self) -> (u64, u64) {
        self.queues.iter().fold((0, 0), |(n, d), q| (n + q.served(), d + q.delay_sum()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn queue_law() {
        let mut net = Network::new(1, 0, 0);
        net.advance_slot(&[5], &[0]);
        assert_eq!(net.queue_lengths(), vec![5]);
        net.advance_slot(&[2], &[3]);
        assert_eq!(net.queue_lengths(), vec![4]);
        let mut net = Network::new(1, 0, 0);
        net.advance_slot(&[1], &[0]);
        let served = net.advance_slot(&[0], &[3]);
        assert_eq!(served, vec![1]);
        assert_eq!(net.queue_lengths(), vec![0]);
    }

    #[test]
    fn same_slot_service_has_zero_delay() {
        let mut net = Network::new(1, 0, 0);
        net.advance_slot(&[1], &[1]);
        assert_eq!(net.delay_totals(), (1, 0));
        let mut net = Network::new(1, 0, 0);
        net.advance_slot(&[2], &[1]);
        net.advance_slot(&[0], &[0]);
        net.advance_slot(&[0], &[1]);
        assert_eq!(net.delay_totals(), (2, 2));
    }

    #[test]
    fn warmup_services_are_not_counted() {
        let mut net = Network::new(1, 2, -2);
        net.advance_slot(&[1], &[1]);
        net.advance_slot(&[1], &[0]);
        net.advance_slot(&[0], &[1]);
        assert_eq!(net.delay_totals(), (1, 1));
    }

    #[test]
    fn history_reads() {
        let mut h = NsiHistory::new(2, 3, 0);
        assert!(matches!(h.channel(0, 0), Err(Error::InsufficientHistory { .. })));
        for t in 0..5u64 {
            h.record(&[t, 10 * t], &[t as usize % 2, 1]);
        }
        assert_eq!(h.now(), 4);
        assert_eq!(h.queue(0, 0).unwrap(), 4);
        assert_eq!(h.queue(1, 2).unwrap(), 20);
        assert_eq!(h.channel(0, 1).unwrap(), 1);
        assert!(h.queue(0, 3).is_err());
    }

    #[test]
    fn transmitter_view_enforces_delays() {
        let table = presets::table1();
        let mut h = NsiHistory::new(3, 5, 0);
        for _ in 0..5 {
            h.record(&[1, 2, 3], &[0, 1, 0]);
        }
        let a = TransmitterView::new(&h, &table, 0);
        assert!(a.channel(0, 0).is_ok());
        assert!(a.queue(1, 1).is_err());
        assert!(a.queue(1, 2).is_ok());
        assert!(matches!(a.channel(2, 0), Err(Error::NotObservable { observer: 0, link: 2, delay: 0 })));
    }

    #[test]
    fn observer_a_view_in_table1() {
        let table = presets::table1();
        let mut h = NsiHistory::new(3, 5, 0);
        for _ in 0..5 {
            h.record(&[1, 2, 3], &[0, 1, 0]);
        }
        let view = delayed_view(&h, &table, 0).unwrap();
        let delays = |link| view.iter().filter(|e| e.link == link).map(|e| e.delay).collect::<Vec<_>>();
        assert_eq!(delays(0), vec![0, 1, 2, 3]);
        assert_eq!(delays(1), vec![2, 3, 4]);
        assert_eq!(delays(2), vec![1, 2]);
    }

    #[test]
    fn single_link_view_is_instantaneous() {
        let table = DelayTable::new(vec![vec![0]]).unwrap();
        let mut h = NsiHistory::new(1, 1, 0);
        h.record(&[7], &[1]);
        let view = delayed_view(&h, &table, 0).unwrap();
        assert_eq!(view, vec![ViewEntry { link: 0, delay: 0, queue: 7, channel: 1 }]);
    }

    #[test]
    fn arrival_pmfs_sum_to_one() {
        for a in [ArrivalProcess::bernoulli(0.3), ArrivalProcess::new(ArrivalKind::TruncatedPoisson, 0.8, 3).unwrap()] {
            let s: f64 = (0..=a.cap).map(|k| a.pmf(k)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let p = ArrivalProcess::poisson(0.25);
        let s: f64 = (0..30).map(|k| p.pmf(k)).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(ArrivalProcess::new(ArrivalKind::Bernoulli, 1.5, 1).is_err());
    }
}
