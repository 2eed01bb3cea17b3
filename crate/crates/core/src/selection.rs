//! Relay pair and phase selection.
//!
//! Argmax ties go to the lowest pair in lexicographic order and, within a
//! pair, to the source-relay phase.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::link_quality::{all_pairs, pair_count, LinkQualityTable, Phase, RelayPair, SinrSource};
use crate::{Error, Result};

/// Buffer availability seen by the selector.
pub trait BufferStatus {
    /// Room for one more entry.
    fn can_receive(&self, relay: usize) -> bool;
    /// At least one stored entry.
    fn can_transmit(&self, relay: usize) -> bool;
}

/// Every buffer can both receive and transmit.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllAvailable;

impl BufferStatus for AllAvailable {
    fn can_receive(&self, _: usize) -> bool {
        true
    }

    fn can_transmit(&self, _: usize) -> bool {
        true
    }
}

/// Occupancy and capacity per relay.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferSnapshot {
    pub occupancy: Vec<usize>,
    pub capacity: Vec<usize>,
}

impl BufferSnapshot {
    pub fn uniform(relays: usize, occupancy: usize, capacity: usize) -> Self {
        Self {
            occupancy: vec![occupancy; relays],
            capacity: vec![capacity; relays],
        }
    }
}

impl BufferStatus for BufferSnapshot {
    fn can_receive(&self, relay: usize) -> bool {
        self.occupancy[relay] < self.capacity[relay]
    }

    fn can_transmit(&self, relay: usize) -> bool {
        self.occupancy[relay] > 0
    }
}

pub fn is_feasible(buffers: &impl BufferStatus, pair: RelayPair, phase: Phase) -> bool {
    let ok = |r| match phase {
        Phase::SourceRelay => buffers.can_receive(r),
        Phase::RelayDestination => buffers.can_transmit(r),
    };
    ok(pair.first()) && ok(pair.second())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDecision {
    pub pair: RelayPair,
    pub phase: Phase,
    pub sinr: f64,
    /// Higher-ranked entries skipped because of buffer state.
    pub fallbacks_taken: usize,
    /// Distinct relay pairs whose SINR was evaluated.
    pub candidates_examined: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Transfer(PairDecision),
    Idle { candidates_examined: usize },
}

impl Decision {
    pub fn candidates_examined(&self) -> usize {
        match self {
            Decision::Transfer(d) => d.candidates_examined,
            Decision::Idle { candidates_examined } => *candidates_examined,
        }
    }

    pub fn transfer(&self) -> Option<&PairDecision> {
        match self {
            Decision::Transfer(d) => Some(d),
            Decision::Idle { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    sinr: f64,
    pair: RelayPair,
    phase: Phase,
}

fn rank(a: &Entry, b: &Entry) -> Ordering {
    b.sinr
        .total_cmp(&a.sinr)
        .then(a.pair.cmp(&b.pair))
        .then(a.phase.cmp(&b.phase))
}

fn first_feasible(
    mut entries: Vec<Entry>,
    buffers: &impl BufferStatus,
    fallbacks: &mut usize,
) -> Option<Entry> {
    entries.sort_by(rank);
    for e in entries {
        if is_feasible(buffers, e.pair, e.phase) {
            return Some(e);
        }
        *fallbacks += 1;
    }
    None
}

/// Best feasible entry over both phase tables.
pub fn select_exhaustive(table: &LinkQualityTable, buffers: &impl BufferStatus) -> Decision {
    let relays = table.relays();
    let examined = pair_count(relays);
    let entries = Phase::BOTH
        .iter()
        .flat_map(|&phase| {
            all_pairs(relays).into_iter().map(move |pair| Entry {
                sinr: table.pair(phase, pair),
                pair,
                phase,
            })
        })
        .collect();
    let mut fallbacks = 0;
    match first_feasible(entries, buffers, &mut fallbacks) {
        Some(e) => Decision::Transfer(PairDecision {
            pair: e.pair,
            phase: e.phase,
            sinr: e.sinr,
            fallbacks_taken: fallbacks,
            candidates_examined: examined,
        }),
        None => Decision::Idle {
            candidates_examined: examined,
        },
    }
}

/// Base relays tried by the greedy search in the current epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaseRelayState {
    /// Base relay of the latest stage.
    pub base: Option<usize>,
    /// Earlier bases whose pairs were all infeasible.
    pub excluded: Vec<usize>,
}

impl BaseRelayState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        self.base = None;
        self.excluded.clear();
    }

    fn next_base(&self, source: &impl SinrSource) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for r in (0..source.relays()).filter(|r| !self.excluded.contains(r)) {
            for phase in Phase::BOTH {
                let s = source.single(phase, r);
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, r));
                }
            }
        }
        best.map(|(_, r)| r)
    }
}

/// Greedy search around the strongest single link.
///
/// The base relay is the argmax of the single-link SINRs of both phases; only
/// pairs containing it are evaluated. When none of them is feasible the base
/// moves to the next strongest relay not yet used as a base, skipping pairs
/// already evaluated. The state is reset at the start of every call.
pub fn select_greedy(
    source: &impl SinrSource,
    buffers: &impl BufferStatus,
    state: &mut BaseRelayState,
) -> Decision {
    state.reset();
    let mut examined = 0;
    let mut fallbacks = 0;
    while let Some(base) = state.next_base(source) {
        state.base = Some(base);
        let partners: Vec<usize> = (0..source.relays())
            .filter(|&r| r != base && !state.excluded.contains(&r))
            .collect();
        examined += partners.len();
        let mut entries = Vec::with_capacity(2 * partners.len());
        for r in partners {
            let pair = RelayPair::new(base, r).expect("partner differs from base");
            for phase in Phase::BOTH {
                entries.push(Entry {
                    sinr: source.pair(phase, pair),
                    pair,
                    phase,
                });
            }
        }
        if let Some(e) = first_feasible(entries, buffers, &mut fallbacks) {
            return Decision::Transfer(PairDecision {
                pair: e.pair,
                phase: e.phase,
                sinr: e.sinr,
                fallbacks_taken: fallbacks,
                candidates_examined: examined,
            });
        }
        state.excluded.push(base);
    }
    Decision::Idle {
        candidates_examined: examined,
    }
}

/// Uniform choice among pairs with at least one feasible phase; the phase is
/// then uniform among the feasible ones.
pub fn select_random<R: Rng + ?Sized>(
    source: &impl SinrSource,
    buffers: &impl BufferStatus,
    rng: &mut R,
) -> Decision {
    let options: Vec<(RelayPair, Vec<Phase>)> = all_pairs(source.relays())
        .into_iter()
        .map(|p| {
            let phases = Phase::BOTH.into_iter().filter(|&ph| is_feasible(buffers, p, ph)).collect();
            (p, phases)
        })
        .filter(|(_, phases): &(RelayPair, Vec<Phase>)| !phases.is_empty())
        .collect();
    if options.is_empty() {
        return Decision::Idle {
            candidates_examined: 0,
        };
    }
    let (pair, phases) = &options[rng.random_range(0..options.len())];
    let phase = phases[rng.random_range(0..phases.len())];
    Decision::Transfer(PairDecision {
        pair: *pair,
        phase,
        sinr: source.pair(phase, *pair),
        fallbacks_taken: 0,
        candidates_examined: 0,
    })
}

/// Consecutive relays working in pairs: `(0, 1), (2, 3), ...`.
pub fn no_selection_schedule(relays: usize) -> Result<Vec<RelayPair>> {
    if relays < 2 || !relays.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "static pairing needs an even number of relays, got {relays}"
        )));
    }
    (0..relays / 2).map(|j| RelayPair::new(2 * j, 2 * j + 1)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Strategy {
    #[default]
    Exhaustive,
    Greedy,
    Random,
    /// Static consecutive pairs, no selection.
    None,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Exhaustive => "exhaustive",
            Strategy::Greedy => "greedy",
            Strategy::Random => "random",
            Strategy::None => "none",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exhaustive" => Ok(Strategy::Exhaustive),
            "greedy" => Ok(Strategy::Greedy),
            "random" => Ok(Strategy::Random),
            "none" => Ok(Strategy::None),
            other => Err(Error::Config(format!(
                "unknown selection `{other}` (expected exhaustive, greedy, random or none)"
            ))),
        }
    }
}

/// Relay-destination pair for the unbuffered scheme, where every relay holds
/// the packet just broadcast by the sources.
pub fn select_forwarding_pair<R: Rng + ?Sized>(
    strategy: Strategy,
    source: &impl SinrSource,
    rng: &mut R,
) -> Result<PairDecision> {
    let relays = source.relays();
    let rd = Phase::RelayDestination;
    let best_of = |pairs: Vec<RelayPair>| {
        let mut best: Option<(f64, RelayPair)> = None;
        for p in pairs {
            let s = source.pair(rd, p);
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, p));
            }
        }
        best
    };
    let (sinr, pair, examined) = match strategy {
        Strategy::Exhaustive => {
            let (s, p) = best_of(all_pairs(relays)).ok_or_else(|| too_few(relays))?;
            (s, p, pair_count(relays))
        }
        Strategy::Greedy => {
            let base = (0..relays)
                .fold(None, |best: Option<(f64, usize)>, r| {
                    let s = source.single(rd, r);
                    if best.is_none_or(|(b, _)| s > b) {
                        Some((s, r))
                    } else {
                        best
                    }
                })
                .map(|(_, r)| r)
                .ok_or_else(|| too_few(relays))?;
            let pairs: Vec<RelayPair> = (0..relays)
                .filter(|&r| r != base)
                .map(|r| RelayPair::new(base, r))
                .collect::<Result<_>>()?;
            let n = pairs.len();
            let (s, p) = best_of(pairs).ok_or_else(|| too_few(relays))?;
            (s, p, n)
        }
        Strategy::Random => {
            let pairs = all_pairs(relays);
            if pairs.is_empty() {
                return Err(too_few(relays));
            }
            let p = pairs[rng.random_range(0..pairs.len())];
            (source.pair(rd, p), p, 0)
        }
        Strategy::None => {
            return Err(Error::Config("static pairing has no forwarding selection".into()));
        }
    };
    Ok(PairDecision {
        pair,
        phase: rd,
        sinr,
        fallbacks_taken: 0,
        candidates_examined: examined,
    })
}

fn too_few(relays: usize) -> Error {
    Error::Config(format!("pair selection needs at least 2 relays, got {relays}"))
}
