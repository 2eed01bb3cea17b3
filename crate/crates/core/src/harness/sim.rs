//! Epoch-level simulation of one trial.
//!
//! A buffer entry holds the relay's own decisions on one packet pair: two
//! slots of `M` symbols for each of the `K` users. When pair `(m, n)` with
//! `m < n` forwards, relay `m` sends slot 0 of its head entry and relay `n`
//! slot 1 of its head entry, one Alamouti block per symbol index. Bit errors
//! are counted against the source symbols the first time each slot of a
//! source packet reaches the destination; later copies of the same slot are
//! transmitted but not counted again.

use std::cell::Cell;
use std::rc::Rc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::buffers::{adapt_size_power, adapt_size_snr, BufferBank, BufferMode};
use crate::delay::DelayTrace;
use crate::dstc::{add_dstc_contribution, alamouti_encode};
use crate::harness::config::SimConfig;
use crate::harness::estimation::estimate_channels;
use crate::link_quality::{LinkFilters, LinkQualityTable, LinkTerms, Phase, RelayPair};
use crate::receivers::{linear_detect, AlamoutiReceiver, RelayDetector};
use crate::selection::{
    no_selection_schedule, select_exhaustive, select_forwarding_pair, select_greedy, select_random,
    BaseRelayState, Decision, Strategy,
};
use crate::signal::{
    generate_codes, superpose, ChannelRealization, LinkSignatures, NoiseModel, SpreadingCode,
};
use crate::{Error, Result};

/// `[slot][user][symbol]`.
pub type PacketSymbols = [Vec<Vec<f64>>; 2];

#[derive(Debug)]
pub struct SourcePacket {
    truth: PacketSymbols,
    delivered: [Cell<bool>; 2],
}

#[derive(Debug)]
pub struct StoredPacket {
    source: Rc<SourcePacket>,
    decoded: PacketSymbols,
}

/// How relays hold and forward packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Buffers decouple reception and forwarding; selection picks pair and phase.
    Buffered,
    /// Sources broadcast to every relay, the selected pair forwards in the
    /// next epoch and the other copies are dropped.
    Unbuffered,
    /// Each consecutive pair receives in turn, then all pairs forward at once.
    Static,
}

/// Everything about a trial that does not change between epochs.
#[derive(Debug, Clone)]
pub struct TrialContext {
    pub config: SimConfig,
    pub snr_db: f64,
    pub noise: NoiseModel,
    pub codes: Vec<SpreadingCode>,
    pub scheme: Scheme,
    pub initial_capacity: usize,
    pub warm_up: u64,
    schedule: Vec<RelayPair>,
}

impl TrialContext {
    pub fn new(config: &SimConfig, snr_db: f64) -> Result<Self> {
        config.validate()?;
        let scheme = match (config.selection, config.buffering) {
            (Strategy::None, _) => Scheme::Static,
            (_, true) => Scheme::Buffered,
            (_, false) => Scheme::Unbuffered,
        };
        let schedule = if scheme == Scheme::Static {
            no_selection_schedule(config.relays)?
        } else {
            Vec::new()
        };
        let policy = &config.buffer.policy;
        let initial_capacity = match (scheme, policy.mode) {
            (Scheme::Buffered, BufferMode::Fixed) => config.buffer.size,
            (Scheme::Buffered, BufferMode::SnrDriven) => {
                adapt_size_snr(policy, policy.clamp(config.buffer.size as i64), config.buffer.snr_ref, snr_db)
            }
            (Scheme::Buffered, BufferMode::PowerDriven) => policy.clamp(config.buffer.size as i64),
            _ => 1,
        };
        Ok(Self {
            config: config.clone(),
            snr_db,
            noise: NoiseModel::from_snr_db(snr_db)?,
            codes: generate_codes(config.users, config.chips, config.seed)?,
            scheme,
            initial_capacity,
            warm_up: 2 * initial_capacity as u64,
            schedule,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrialCounters {
    pub epochs: u64,
    pub idle_epochs: u64,
    pub pairs_examined: u64,
    pub capacity_sum: u64,
    pub bit_errors: u64,
    pub symbols_counted: u64,
}

impl TrialCounters {
    pub fn merge(&mut self, o: &TrialCounters) {
        self.epochs += o.epochs;
        self.idle_epochs += o.idle_epochs;
        self.pairs_examined += o.pairs_examined;
        self.capacity_sum += o.capacity_sum;
        self.bit_errors += o.bit_errors;
        self.symbols_counted += o.symbols_counted;
    }
}

/// One forwarding epoch after the warm-up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub epoch: u64,
    /// Mean storage time of the entries forwarded in this epoch.
    pub mean_stored_time: f64,
    pub bit_errors: u64,
    pub symbols_counted: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    /// `None` for an idle epoch.
    pub phase: Option<Phase>,
    /// Relays that received or forwarded.
    pub active_relays: Vec<usize>,
    pub pairs_examined: usize,
    pub bit_errors: u64,
    pub symbols_counted: u64,
}

#[derive(Debug)]
pub struct TrialState {
    epoch: u64,
    rng: ChaCha8Rng,
    bank: BufferBank<StoredPacket>,
    capacity: usize,
    greedy: BaseRelayState,
    static_pos: usize,
    pub counters: TrialCounters,
    pub trace: DelayTrace,
    pub deliveries: Vec<Delivery>,
}

impl TrialState {
    pub fn new(ctx: &TrialContext, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed);
        rng.set_stream(stream);
        Self {
            epoch: 0,
            rng,
            bank: BufferBank::new(ctx.config.relays, ctx.initial_capacity),
            capacity: ctx.initial_capacity,
            greedy: BaseRelayState::new(),
            static_pos: 0,
            counters: TrialCounters::default(),
            trace: DelayTrace::new(ctx.warm_up),
            deliveries: Vec::new(),
        }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn occupancy(&self) -> Vec<usize> {
        self.bank.occupancy()
    }
}

/// The parts of a finished trial that outlive its buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub counters: TrialCounters,
    pub trace: DelayTrace,
    pub deliveries: Vec<Delivery>,
}

impl From<TrialState> for TrialOutcome {
    fn from(s: TrialState) -> Self {
        Self {
            counters: s.counters,
            trace: s.trace,
            deliveries: s.deliveries,
        }
    }
}

/// Signatures, filters and SINR terms of one epoch.
struct EpochLinks {
    actual: LinkSignatures,
    known: Option<LinkSignatures>,
    filters: LinkFilters,
    terms: LinkTerms,
}

impl EpochLinks {
    /// Signatures the receivers believe in.
    fn known(&self) -> &LinkSignatures {
        self.known.as_ref().unwrap_or(&self.actual)
    }
}

/// Simulates one epoch and advances the state.
pub fn run_epoch(ctx: &TrialContext, state: &mut TrialState) -> Result<EpochReport> {
    let cfg = &ctx.config;
    let sigma2 = ctx.noise.variance();
    let channel = ChannelRealization::draw(cfg.users, cfg.relays, cfg.channel_law, &mut state.rng)?;
    let actual = LinkSignatures::new(&ctx.codes, &channel, 1.0)?;
    let estimate = if cfg.channel_estimation {
        Some(estimate_channels(&ctx.codes, &channel, 1.0, cfg.pilots, Some(&ctx.noise), &mut state.rng)?)
    } else {
        None
    };
    if ctx.scheme == Scheme::Buffered && cfg.buffer.policy.mode == BufferMode::PowerDriven {
        state.capacity = adapt_size_power(&cfg.buffer.policy, state.capacity, estimate.as_ref().unwrap_or(&channel));
        state.bank.set_capacity(state.capacity);
    }
    let known = estimate
        .as_ref()
        .map(|c| LinkSignatures::new(&ctx.codes, c, 1.0))
        .transpose()?;
    let known_ref = known.as_ref().unwrap_or(&actual);
    let filters = LinkFilters::build(known_ref, cfg.relay_detector.into(), cfg.dest_detector.into(), sigma2)?;
    let terms = LinkTerms::new(known_ref, &filters, sigma2)?;
    let links = EpochLinks {
        actual,
        known,
        filters,
        terms,
    };

    let report = match ctx.scheme {
        Scheme::Buffered => buffered_epoch(ctx, state, &links)?,
        Scheme::Unbuffered => unbuffered_epoch(ctx, state, &links)?,
        Scheme::Static => static_epoch(ctx, state, &links)?,
    };

    let e = state.epoch;
    for b in state.bank.iter() {
        state.trace.record_sample(e, b.len(), b.capacity());
    }
    let c = &mut state.counters;
    c.epochs += 1;
    c.capacity_sum += state.capacity as u64;
    c.pairs_examined += report.pairs_examined as u64;
    c.bit_errors += report.bit_errors;
    c.symbols_counted += report.symbols_counted;
    if report.phase.is_none() {
        c.idle_epochs += 1;
    }
    state.epoch += 1;
    Ok(report)
}

fn buffered_epoch(ctx: &TrialContext, state: &mut TrialState, links: &EpochLinks) -> Result<EpochReport> {
    let decision = match ctx.config.selection {
        Strategy::Exhaustive => select_exhaustive(&LinkQualityTable::build(&links.terms), &state.bank),
        Strategy::Greedy => select_greedy(&links.terms, &state.bank, &mut state.greedy),
        Strategy::Random => select_random(&links.terms, &state.bank, &mut state.rng),
        Strategy::None => unreachable!("static pairing is not a buffered scheme"),
    };
    let pairs_examined = decision.candidates_examined();
    let Decision::Transfer(d) = decision else {
        return Ok(EpochReport {
            phase: None,
            active_relays: Vec::new(),
            pairs_examined,
            bit_errors: 0,
            symbols_counted: 0,
        });
    };
    let relays = vec![d.pair.first(), d.pair.second()];
    let (bit_errors, symbols_counted) = match d.phase {
        Phase::SourceRelay => {
            receive(ctx, state, links, &relays)?;
            (0, 0)
        }
        Phase::RelayDestination => forward(ctx, state, links, &[d.pair])?,
    };
    Ok(EpochReport {
        phase: Some(d.phase),
        active_relays: relays,
        pairs_examined,
        bit_errors,
        symbols_counted,
    })
}

fn unbuffered_epoch(ctx: &TrialContext, state: &mut TrialState, links: &EpochLinks) -> Result<EpochReport> {
    if state.bank.total_len() == 0 {
        let all: Vec<usize> = (0..ctx.config.relays).collect();
        receive(ctx, state, links, &all)?;
        return Ok(EpochReport {
            phase: Some(Phase::SourceRelay),
            active_relays: all,
            pairs_examined: 0,
            bit_errors: 0,
            symbols_counted: 0,
        });
    }
    let d = select_forwarding_pair(ctx.config.selection, &links.terms, &mut state.rng)?;
    let (bit_errors, symbols_counted) = forward(ctx, state, links, &[d.pair])?;
    for l in 0..ctx.config.relays {
        while state.bank.get_mut(l).pop().is_ok() {}
    }
    Ok(EpochReport {
        phase: Some(Phase::RelayDestination),
        active_relays: vec![d.pair.first(), d.pair.second()],
        pairs_examined: d.candidates_examined,
        bit_errors,
        symbols_counted,
    })
}

fn static_epoch(ctx: &TrialContext, state: &mut TrialState, links: &EpochLinks) -> Result<EpochReport> {
    let pos = state.static_pos;
    state.static_pos = (pos + 1) % (ctx.schedule.len() + 1);
    if let Some(pair) = ctx.schedule.get(pos) {
        let relays = vec![pair.first(), pair.second()];
        receive(ctx, state, links, &relays)?;
        return Ok(EpochReport {
            phase: Some(Phase::SourceRelay),
            active_relays: relays,
            pairs_examined: 0,
            bit_errors: 0,
            symbols_counted: 0,
        });
    }
    let (bit_errors, symbols_counted) = forward(ctx, state, links, &ctx.schedule)?;
    Ok(EpochReport {
        phase: Some(Phase::RelayDestination),
        active_relays: (0..ctx.config.relays).collect(),
        pairs_examined: 0,
        bit_errors,
        symbols_counted,
    })
}

fn random_symbols(rng: &mut ChaCha8Rng, users: usize, len: usize) -> Vec<Vec<f64>> {
    use rand::Rng;
    (0..users)
        .map(|_| (0..len).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect())
        .collect()
}

/// Sources send a fresh packet pair; each listed relay decodes and stores it.
fn receive(ctx: &TrialContext, state: &mut TrialState, links: &EpochLinks, relays: &[usize]) -> Result<()> {
    let cfg = &ctx.config;
    let (users, m) = (cfg.users, cfg.packet_len);
    let truth = [
        random_symbols(&mut state.rng, users, m),
        random_symbols(&mut state.rng, users, m),
    ];
    let packet = Rc::new(SourcePacket {
        truth,
        delivered: [Cell::new(false), Cell::new(false)],
    });
    for &r in relays {
        let decoded = match cfg.relay_detector {
            RelayDetector::Perfect => packet.truth.clone(),
            _ => {
                let sigs = links.actual.into_relay(r);
                let mut out: PacketSymbols = [vec![vec![0.0; m]; users], vec![vec![0.0; m]; users]];
                let mut symbols = vec![0.0; users];
                for slot in 0..2 {
                    for i in 0..m {
                        for (k, s) in symbols.iter_mut().enumerate() {
                            *s = packet.truth[slot][k][i];
                        }
                        let mut y = superpose(&sigs, &symbols)?;
                        ctx.noise.add_to(&mut y, &mut state.rng);
                        for k in 0..users {
                            out[slot][k][i] = linear_detect(links.filters.get(Phase::SourceRelay, k, r), &y)?;
                        }
                    }
                }
                out
            }
        };
        let entry = StoredPacket {
            source: Rc::clone(&packet),
            decoded,
        };
        state.bank.get_mut(r).push(entry, state.epoch)?;
        state.trace.record_arrival(state.epoch);
    }
    Ok(())
}

/// Every listed pair forwards its head entries at once; the destination
/// detects each pair separately. Returns `(bit errors, symbols counted)`.
fn forward(ctx: &TrialContext, state: &mut TrialState, links: &EpochLinks, pairs: &[RelayPair]) -> Result<(u64, u64)> {
    let cfg = &ctx.config;
    let (users, m, chips) = (cfg.users, cfg.packet_len, cfg.chips);
    let e = state.epoch;
    let mut heads = Vec::with_capacity(pairs.len());
    let mut stored_time = 0.0;
    for p in pairs {
        let a = state.bank.get_mut(p.first()).pop()?;
        let b = state.bank.get_mut(p.second()).pop()?;
        for s in [&a, &b] {
            state.trace.record_departure(s.epoch, e);
            stored_time += s.stored_time(e) as f64;
        }
        heads.push((a.item, b.item));
    }
    let receivers = pairs
        .iter()
        .map(|p| {
            let known = links.known();
            let sigs: Vec<_> = (0..users)
                .map(|k| (known.relay_dest(k, p.first()), known.relay_dest(k, p.second())))
                .collect();
            AlamoutiReceiver::new(cfg.dest_detector, &sigs, ctx.noise.variance())
        })
        .collect::<Result<Vec<_>>>()?;

    // decisions[pair][half][user][symbol]
    let mut decisions = vec![[vec![vec![0.0; m]; users], vec![vec![0.0; m]; users]]; pairs.len()];
    let zero = Complex64::new(0.0, 0.0);
    let mut y1 = vec![zero; chips];
    let mut y2 = vec![zero; chips];
    for i in 0..m {
        y1.fill(zero);
        y2.fill(zero);
        for (p, (hm, hn)) in pairs.iter().zip(&heads) {
            for k in 0..users {
                let block = alamouti_encode(
                    Complex64::new(hm.decoded[0][k][i], 0.0),
                    Complex64::new(hn.decoded[1][k][i], 0.0),
                );
                add_dstc_contribution(
                    &mut y1,
                    &mut y2,
                    links.actual.relay_dest(k, p.first()).as_slice(),
                    links.actual.relay_dest(k, p.second()).as_slice(),
                    &block,
                );
            }
        }
        ctx.noise.add_to(&mut y1, &mut state.rng);
        ctx.noise.add_to(&mut y2, &mut state.rng);
        for (rx, out) in receivers.iter().zip(&mut decisions) {
            for (k, (bm, bn)) in rx.detect(&y1, &y2)?.into_iter().enumerate() {
                out[0][k][i] = bm;
                out[1][k][i] = bn;
            }
        }
    }

    let (mut errors, mut counted) = (0u64, 0u64);
    for ((hm, hn), out) in heads.iter().zip(&decisions) {
        for (half, entry) in [(0, hm), (1, hn)] {
            let src = &entry.source;
            if src.delivered[half].replace(true) {
                continue;
            }
            for k in 0..users {
                errors += src.truth[half][k]
                    .iter()
                    .zip(&out[half][k])
                    .filter(|(a, b)| a != b)
                    .count() as u64;
            }
            counted += (users * m) as u64;
        }
    }
    if state.trace.is_active(e) {
        state.deliveries.push(Delivery {
            epoch: e,
            mean_stored_time: stored_time / (2 * pairs.len()) as f64,
            bit_errors: errors,
            symbols_counted: counted,
        });
    }
    Ok((errors, counted))
}

/// Runs `epochs` epochs on stream `stream`.
pub fn run_trial(ctx: &TrialContext, stream: u64, epochs: usize) -> Result<TrialState> {
    let mut state = TrialState::new(ctx, stream);
    for _ in 0..epochs {
        run_epoch(ctx, &mut state)?;
    }
    Ok(state)
}

/// Runs until `deliveries` forwarding epochs after the warm-up have been
/// recorded, or fails after `max_epochs`.
pub fn run_until_deliveries(
    ctx: &TrialContext,
    stream: u64,
    deliveries: usize,
    max_epochs: u64,
) -> Result<TrialState> {
    let mut state = TrialState::new(ctx, stream);
    while state.deliveries.len() < deliveries {
        if state.epoch >= max_epochs {
            return Err(Error::InsufficientData(format!(
                "only {} of {deliveries} forwarding epochs after {max_epochs} epochs",
                state.deliveries.len()
            )));
        }
        run_epoch(ctx, &mut state)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::receivers::DestDetector;

    fn small(selection: Strategy) -> SimConfig {
        SimConfig {
            users: 2,
            relays: 4,
            chips: 8,
            packet_len: 4,
            buffer: crate::harness::config::BufferConfig {
                size: 3,
                ..Default::default()
            },
            selection,
            ..SimConfig::default()
        }
    }

    #[test]
    fn first_epoch_receives() {
        for s in [Strategy::Exhaustive, Strategy::Greedy, Strategy::Random, Strategy::None] {
            let ctx = TrialContext::new(&small(s), 10.0).unwrap();
            let mut state = TrialState::new(&ctx, 0);
            let r = run_epoch(&ctx, &mut state).unwrap();
            assert_eq!(r.phase, Some(Phase::SourceRelay), "{s}");
        }
    }

    #[test]
    fn buffers_stay_within_capacity() {
        let ctx = TrialContext::new(&small(Strategy::Exhaustive), 5.0).unwrap();
        let mut state = TrialState::new(&ctx, 1);
        for _ in 0..300 {
            let r = run_epoch(&ctx, &mut state).unwrap();
            assert!(state.occupancy().iter().all(|&o| o <= 3));
            assert_eq!(r.pairs_examined, 6);
        }
        assert_eq!(state.counters.epochs, 300);
        assert!(state.counters.symbols_counted > 0);
    }

    #[test]
    fn noiseless_perfect_round_trip() {
        let mut cfg = small(Strategy::Exhaustive);
        cfg.relay_detector = RelayDetector::Perfect;
        cfg.dest_detector = DestDetector::Ml;
        let ctx = TrialContext::new(&cfg, 200.0).unwrap();
        let state = run_trial(&ctx, 2, 1000).unwrap();
        assert!(state.counters.symbols_counted > 0);
        assert_eq!(state.counters.bit_errors, 0);
    }

    #[test]
    fn counted_symbols_are_whole_slots() {
        for s in [Strategy::Greedy, Strategy::Random, Strategy::None] {
            let ctx = TrialContext::new(&small(s), 8.0).unwrap();
            let state = run_trial(&ctx, 3, 200).unwrap();
            assert_eq!(state.counters.symbols_counted % (2 * 4) as u64, 0, "{s}");
            assert!(state.counters.symbols_counted > 0, "{s}");
        }
    }

    #[test]
    fn unbuffered_alternates_phases() {
        let mut cfg = small(Strategy::Exhaustive);
        cfg.buffering = false;
        let ctx = TrialContext::new(&cfg, 8.0).unwrap();
        let mut state = TrialState::new(&ctx, 4);
        for i in 0..20 {
            let r = run_epoch(&ctx, &mut state).unwrap();
            let expect = if i % 2 == 0 { Phase::SourceRelay } else { Phase::RelayDestination };
            assert_eq!(r.phase, Some(expect));
            if expect == Phase::RelayDestination {
                assert_eq!(r.symbols_counted, 2 * 2 * 4);
                assert_eq!(state.bank.total_len(), 0);
            }
        }
    }

    #[test]
    fn static_cycle() {
        let ctx = TrialContext::new(&small(Strategy::None), 8.0).unwrap();
        let mut state = TrialState::new(&ctx, 5);
        let phases: Vec<_> = (0..6).map(|_| run_epoch(&ctx, &mut state).unwrap()).collect();
        assert_eq!(phases[0].active_relays, vec![0, 1]);
        assert_eq!(phases[1].active_relays, vec![2, 3]);
        assert_eq!(phases[2].phase, Some(Phase::RelayDestination));
        assert_eq!(phases[2].symbols_counted, 2 * 2 * 2 * 4);
        assert_eq!(phases[3].active_relays, vec![0, 1]);
    }

    #[test]
    fn same_stream_same_result() {
        let ctx = TrialContext::new(&small(Strategy::Greedy), 6.0).unwrap();
        let a = run_trial(&ctx, 9, 100).unwrap();
        let b = run_trial(&ctx, 9, 100).unwrap();
        let c = run_trial(&ctx, 10, 100).unwrap();
        assert_eq!(a.counters, b.counters);
        assert_eq!(a.deliveries, b.deliveries);
        assert_ne!(a.deliveries, c.deliveries);
    }
}
