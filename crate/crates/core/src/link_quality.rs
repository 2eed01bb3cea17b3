//! SINR of single relay links and of relay pairs, for both hops.
//!
//! With `ρ = h^H h` and `t(k, l) = w^H ρ w = ρ ||w||²` for the filter `w` of
//! user `k` on relay `l`:
//!
//! ```text
//! SINR_pair(m, n) = Σ_k [t(k,m) + t(k,n)]
//!                 / Σ_k [Σ_{l∉{m,n}} t(k,l) + σ²||w_km||² + σ²||w_kn||²]
//! SINR_single(p)  = Σ_k t(k,p) / Σ_k [Σ_{l≠p} t(k,l) + σ²||w_kp||²]
//! ```
//!
//! The noise terms sit inside the user sum.

use std::fmt;

use crate::error::check_len;
use crate::receivers::{mmse_filters, rake_filter, DestDetector, ReceiveFilter, RelayDetector};
use crate::signal::LinkSignatures;
use crate::{Error, Result};

/// Transmission phase of an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    /// Sources transmit, the pair receives into its buffers.
    SourceRelay,
    /// The pair forwards buffered symbols to the destination.
    RelayDestination,
}

impl Phase {
    pub const BOTH: [Phase; 2] = [Phase::SourceRelay, Phase::RelayDestination];

    fn index(self) -> usize {
        match self {
            Phase::SourceRelay => 0,
            Phase::RelayDestination => 1,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::SourceRelay => "source-relay",
            Phase::RelayDestination => "relay-destination",
        })
    }
}

/// Unordered pair of distinct relays, stored with `first < second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelayPair {
    first: usize,
    second: usize,
}

impl RelayPair {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Self { first: a, second: b }),
            std::cmp::Ordering::Greater => Ok(Self { first: b, second: a }),
            std::cmp::Ordering::Equal => Err(Error::InvalidPair(a)),
        }
    }

    pub fn first(self) -> usize {
        self.first
    }

    pub fn second(self) -> usize {
        self.second
    }

    pub fn contains(self, relay: usize) -> bool {
        self.first == relay || self.second == relay
    }

    /// The member that is not `relay`.
    pub fn partner(self, relay: usize) -> Option<usize> {
        if self.first == relay {
            Some(self.second)
        } else if self.second == relay {
            Some(self.first)
        } else {
            None
        }
    }

    /// Position in the lexicographic enumeration of [`all_pairs`].
    pub fn index(self, relays: usize) -> usize {
        let m = self.first;
        m * relays - m * (m + 1) / 2 + (self.second - m - 1)
    }
}

impl fmt::Display for RelayPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.first, self.second)
    }
}

/// `L(L-1)/2`.
pub fn pair_count(relays: usize) -> usize {
    relays * relays.saturating_sub(1) / 2
}

/// All pairs in lexicographic order.
pub fn all_pairs(relays: usize) -> Vec<RelayPair> {
    (0..relays)
        .flat_map(|m| (m + 1..relays).map(move |n| RelayPair { first: m, second: n }))
        .collect()
}

/// Filter family used inside the SINR expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Rake,
    Mmse,
}

impl From<RelayDetector> for FilterKind {
    fn from(d: RelayDetector) -> Self {
        match d {
            RelayDetector::Mmse => FilterKind::Mmse,
            RelayDetector::Rake | RelayDetector::Perfect => FilterKind::Rake,
        }
    }
}

impl From<DestDetector> for FilterKind {
    fn from(d: DestDetector) -> Self {
        match d {
            DestDetector::Mmse => FilterKind::Mmse,
            DestDetector::Rake | DestDetector::Ml => FilterKind::Rake,
        }
    }
}

/// Per-link receive filters of both hops, indexed `[user * relays + relay]`.
#[derive(Debug, Clone)]
pub struct LinkFilters {
    users: usize,
    relays: usize,
    source_relay: Vec<ReceiveFilter>,
    relay_dest: Vec<ReceiveFilter>,
}

impl LinkFilters {
    /// Relay-side filters on each relay see all users' source-relay
    /// signatures; destination-side filters for relay `l` see all users'
    /// signatures from relay `l`.
    pub fn build(
        signatures: &LinkSignatures,
        relay_kind: FilterKind,
        dest_kind: FilterKind,
        noise_variance: f64,
    ) -> Result<Self> {
        let (users, relays) = (signatures.users(), signatures.relays());
        let per_relay = |sigs: Vec<&crate::signal::EffectiveSignature>, kind| -> Result<Vec<ReceiveFilter>> {
            match kind {
                FilterKind::Rake => Ok(sigs.into_iter().map(rake_filter).collect()),
                FilterKind::Mmse => mmse_filters(&sigs, noise_variance),
            }
        };
        let mut source_relay = vec![ReceiveFilter::new(Vec::new()); users * relays];
        let mut relay_dest = source_relay.clone();
        for l in 0..relays {
            for (k, w) in per_relay(signatures.into_relay(l), relay_kind)?.into_iter().enumerate() {
                source_relay[k * relays + l] = w;
            }
            for (k, w) in per_relay(signatures.from_relay(l), dest_kind)?.into_iter().enumerate() {
                relay_dest[k * relays + l] = w;
            }
        }
        Ok(Self {
            users,
            relays,
            source_relay,
            relay_dest,
        })
    }

    pub fn from_parts(
        users: usize,
        relays: usize,
        source_relay: Vec<ReceiveFilter>,
        relay_dest: Vec<ReceiveFilter>,
    ) -> Result<Self> {
        check_len(users * relays, source_relay.len())?;
        check_len(users * relays, relay_dest.len())?;
        Ok(Self {
            users,
            relays,
            source_relay,
            relay_dest,
        })
    }

    pub fn get(&self, phase: Phase, user: usize, relay: usize) -> &ReceiveFilter {
        let i = user * self.relays + relay;
        match phase {
            Phase::SourceRelay => &self.source_relay[i],
            Phase::RelayDestination => &self.relay_dest[i],
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn relays(&self) -> usize {
        self.relays
    }
}

/// Anything that can report link and pair SINRs.
pub trait SinrSource {
    fn relays(&self) -> usize;
    fn single(&self, phase: Phase, relay: usize) -> f64;
    fn pair(&self, phase: Phase, pair: RelayPair) -> f64;
}

/// Per-link signal and noise terms of one epoch; evaluates SINRs on demand.
#[derive(Debug, Clone)]
pub struct LinkTerms {
    users: usize,
    relays: usize,
    /// `ρ ||w||²` per phase, `[user * relays + relay]`.
    signal: [Vec<f64>; 2],
    /// `σ² ||w||²` per phase.
    noise: [Vec<f64>; 2],
}

impl LinkTerms {
    pub fn new(signatures: &LinkSignatures, filters: &LinkFilters, noise_variance: f64) -> Result<Self> {
        let (users, relays) = (signatures.users(), signatures.relays());
        check_len(users, filters.users())?;
        check_len(relays, filters.relays())?;
        let mut signal = [vec![0.0; users * relays], vec![0.0; users * relays]];
        let mut noise = signal.clone();
        for phase in Phase::BOTH {
            let p = phase.index();
            for k in 0..users {
                for l in 0..relays {
                    let rho = match phase {
                        Phase::SourceRelay => signatures.source_relay(k, l).norm_sqr(),
                        Phase::RelayDestination => signatures.relay_dest(k, l).norm_sqr(),
                    };
                    let w2 = filters.get(phase, k, l).norm_sqr();
                    signal[p][k * relays + l] = rho * w2;
                    noise[p][k * relays + l] = noise_variance * w2;
                }
            }
        }
        Ok(Self {
            users,
            relays,
            signal,
            noise,
        })
    }

    fn ratio(num: f64, den: f64) -> f64 {
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

impl SinrSource for LinkTerms {
    fn relays(&self) -> usize {
        self.relays
    }

    fn single(&self, phase: Phase, p: usize) -> f64 {
        let (sig, noise) = (&self.signal[phase.index()], &self.noise[phase.index()]);
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..self.users {
            let row = k * self.relays;
            num += sig[row + p];
            for l in (0..self.relays).filter(|&l| l != p) {
                den += sig[row + l];
            }
            den += noise[row + p];
        }
        Self::ratio(num, den)
    }

    fn pair(&self, phase: Phase, pair: RelayPair) -> f64 {
        let (m, n) = (pair.first, pair.second);
        let (sig, noise) = (&self.signal[phase.index()], &self.noise[phase.index()]);
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..self.users {
            let row = k * self.relays;
            num += sig[row + m] + sig[row + n];
            for l in (0..self.relays).filter(|&l| l != m && l != n) {
                den += sig[row + l];
            }
            den += noise[row + m] + noise[row + n];
        }
        Self::ratio(num, den)
    }
}

pub fn pair_sinr_source_relay(
    signatures: &LinkSignatures,
    filters: &LinkFilters,
    pair: RelayPair,
    noise_variance: f64,
) -> Result<f64> {
    Ok(LinkTerms::new(signatures, filters, noise_variance)?.pair(Phase::SourceRelay, pair))
}

pub fn pair_sinr_relay_dest(
    signatures: &LinkSignatures,
    filters: &LinkFilters,
    pair: RelayPair,
    noise_variance: f64,
) -> Result<f64> {
    Ok(LinkTerms::new(signatures, filters, noise_variance)?.pair(Phase::RelayDestination, pair))
}

/// Single-link SINRs `(source-relay, relay-destination)` of every relay.
pub fn single_link_sinrs(
    signatures: &LinkSignatures,
    filters: &LinkFilters,
    noise_variance: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let terms = LinkTerms::new(signatures, filters, noise_variance)?;
    let per = |phase| (0..terms.relays).map(|p| terms.single(phase, p)).collect();
    Ok((per(Phase::SourceRelay), per(Phase::RelayDestination)))
}

/// Every single-link and pair SINR of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkQualityTable {
    relays: usize,
    single: [Vec<f64>; 2],
    pairs: [Vec<f64>; 2],
    evaluations: [usize; 2],
}

impl LinkQualityTable {
    pub fn build(source: &impl SinrSource) -> Self {
        let relays = source.relays();
        let pairs = all_pairs(relays);
        let mut evaluations = [0; 2];
        let mut tables: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut single: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for phase in Phase::BOTH {
            let p = phase.index();
            single[p] = (0..relays).map(|r| source.single(phase, r)).collect();
            tables[p] = pairs.iter().map(|&pr| source.pair(phase, pr)).collect();
            evaluations[p] = pairs.len();
        }
        Self {
            relays,
            single,
            pairs: tables,
            evaluations,
        }
    }

    /// Builds a table from explicit values; pair vectors follow [`all_pairs`].
    pub fn from_values(
        relays: usize,
        single_sr: Vec<f64>,
        single_rd: Vec<f64>,
        pair_sr: Vec<f64>,
        pair_rd: Vec<f64>,
    ) -> Result<Self> {
        check_len(relays, single_sr.len())?;
        check_len(relays, single_rd.len())?;
        check_len(pair_count(relays), pair_sr.len())?;
        check_len(pair_count(relays), pair_rd.len())?;
        let n = pair_sr.len();
        Ok(Self {
            relays,
            single: [single_sr, single_rd],
            pairs: [pair_sr, pair_rd],
            evaluations: [n, n],
        })
    }

    /// Number of pair SINRs computed for `phase`.
    pub fn evaluations(&self, phase: Phase) -> usize {
        self.evaluations[phase.index()]
    }

    pub fn pair_entries(&self, phase: Phase) -> &[f64] {
        &self.pairs[phase.index()]
    }

    pub fn single_entries(&self, phase: Phase) -> &[f64] {
        &self.single[phase.index()]
    }
}

impl SinrSource for LinkQualityTable {
    fn relays(&self) -> usize {
        self.relays
    }

    fn single(&self, phase: Phase, relay: usize) -> f64 {
        self.single[phase.index()][relay]
    }

    fn pair(&self, phase: Phase, pair: RelayPair) -> f64 {
        self.pairs[phase.index()][pair.index(self.relays)]
    }
}

/// Filters for the given detectors, then the full table.
pub fn build_table(
    signatures: &LinkSignatures,
    relay_detector: RelayDetector,
    dest_detector: DestDetector,
    noise_variance: f64,
) -> Result<LinkQualityTable> {
    let filters = LinkFilters::build(signatures, relay_detector.into(), dest_detector.into(), noise_variance)?;
    Ok(LinkQualityTable::build(&LinkTerms::new(signatures, &filters, noise_variance)?))
}
