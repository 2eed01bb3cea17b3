//! Bounded relay FIFOs and the dynamic buffer-size rules.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::selection::BufferStatus;
use crate::signal::ChannelRealization;
use crate::{Error, Result};

/// A queued item tagged with the epoch it was stored in.
#[derive(Debug, Clone, PartialEq)]
pub struct Stamped<T> {
    pub item: T,
    pub epoch: u64,
}

impl<T> Stamped<T> {
    /// Epochs spent in the buffer when taken out at `now`.
    pub fn stored_time(&self, now: u64) -> u64 {
        now.saturating_sub(self.epoch)
    }
}

/// FIFO of one relay holding at most `capacity` entries.
///
/// Lowering the capacity below the occupancy keeps every entry; pushes are
/// refused until the queue drains below the new capacity.
#[derive(Debug, Clone)]
pub struct RelayBuffer<T> {
    relay: usize,
    capacity: usize,
    entries: VecDeque<Stamped<T>>,
}

impl<T> RelayBuffer<T> {
    pub fn new(relay: usize, capacity: usize) -> Self {
        Self {
            relay,
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn relay(&self) -> usize {
        self.relay
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn set_capacity(&mut self, capacity: usize) {
        self.capacity = capacity;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn push(&mut self, item: T, epoch: u64) -> Result<()> {
        if self.is_full() {
            return Err(Error::BufferFull {
                relay: self.relay,
                capacity: self.capacity,
            });
        }
        self.entries.push_back(Stamped { item, epoch });
        Ok(())
    }

    pub fn pop(&mut self) -> Result<Stamped<T>> {
        self.entries
            .pop_front()
            .ok_or(Error::BufferEmpty { relay: self.relay })
    }

    pub fn front(&self) -> Option<&Stamped<T>> {
        self.entries.front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Stamped<T>> {
        self.entries.iter()
    }
}

/// One buffer per relay.
#[derive(Debug, Clone)]
pub struct BufferBank<T> {
    buffers: Vec<RelayBuffer<T>>,
}

impl<T> BufferBank<T> {
    pub fn new(relays: usize, capacity: usize) -> Self {
        Self {
            buffers: (0..relays).map(|l| RelayBuffer::new(l, capacity)).collect(),
        }
    }

    pub fn relays(&self) -> usize {
        self.buffers.len()
    }

    pub fn get(&self, relay: usize) -> &RelayBuffer<T> {
        &self.buffers[relay]
    }

    pub fn get_mut(&mut self, relay: usize) -> &mut RelayBuffer<T> {
        &mut self.buffers[relay]
    }

    pub fn set_capacity(&mut self, capacity: usize) {
        for b in &mut self.buffers {
            b.set_capacity(capacity);
        }
    }

    pub fn occupancy(&self) -> Vec<usize> {
        self.buffers.iter().map(RelayBuffer::len).collect()
    }

    pub fn total_len(&self) -> usize {
        self.buffers.iter().map(RelayBuffer::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RelayBuffer<T>> {
        self.buffers.iter()
    }
}

impl<T> BufferStatus for BufferBank<T> {
    fn can_receive(&self, relay: usize) -> bool {
        !self.buffers[relay].is_full()
    }

    fn can_transmit(&self, relay: usize) -> bool {
        !self.buffers[relay].is_empty()
    }
}

/// How the buffer capacity evolves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum BufferMode {
    #[default]
    Fixed,
    /// Capacity shrinks as the input SNR grows.
    SnrDriven,
    /// Capacity grows when the weakest link falls below a power threshold.
    PowerDriven,
}

impl fmt::Display for BufferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BufferMode::Fixed => "fixed",
            BufferMode::SnrDriven => "snr",
            BufferMode::PowerDriven => "power",
        })
    }
}

impl FromStr for BufferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(BufferMode::Fixed),
            "snr" | "snr-driven" => Ok(BufferMode::SnrDriven),
            "power" | "power-driven" => Ok(BufferMode::PowerDriven),
            other => Err(Error::Config(format!(
                "unknown buffer mode `{other}` (expected fixed, snr or power)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicBufferPolicy {
    pub mode: BufferMode,
    pub j_min: usize,
    pub j_max: usize,
    /// Channel power threshold of the power-driven rule.
    pub gamma: f64,
    /// SNR step in dB.
    pub d1: f64,
    /// Capacity change per SNR step.
    pub d2: usize,
    /// Capacity change of the power-driven rule.
    pub d3: usize,
}

impl Default for DynamicBufferPolicy {
    fn default() -> Self {
        Self {
            mode: BufferMode::Fixed,
            j_min: 1,
            j_max: 12,
            gamma: 0.5,
            d1: 2.0,
            d2: 2,
            d3: 2,
        }
    }
}

impl DynamicBufferPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.j_min < 1 {
            return Err(Error::Config("buffer.Jmin must be at least 1".into()));
        }
        if self.j_max < self.j_min {
            return Err(Error::Config(format!(
                "buffer.Jmax ({}) is below buffer.Jmin ({})",
                self.j_max, self.j_min
            )));
        }
        if !(self.d1 >= 0.0 && self.d1.is_finite()) {
            return Err(Error::Config(format!("buffer.d1 must be non-negative, got {}", self.d1)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("buffer.gamma must be non-negative, got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn clamp(&self, j: i64) -> usize {
        j.clamp(self.j_min as i64, self.j_max as i64) as usize
    }
}

/// Capacity after the input SNR moves from `snr_pre` to `snr_cur`.
///
/// Every whole `d1` dB of increase removes `d2` entries, every whole `d1`
/// of decrease adds `d2`.
pub fn adapt_size_snr(policy: &DynamicBufferPolicy, j_pre: usize, snr_pre: f64, snr_cur: f64) -> usize {
    if policy.d1 <= 0.0 {
        return policy.clamp(j_pre as i64);
    }
    let steps = ((snr_cur - snr_pre) / policy.d1 + 1e-9 * (snr_cur - snr_pre).signum()).trunc() as i64;
    policy.clamp(j_pre as i64 - steps * policy.d2 as i64)
}

/// Capacity after observing a link whose weakest power is `min_power`.
pub fn adapt_size_power_min(policy: &DynamicBufferPolicy, j_pre: usize, min_power: f64) -> usize {
    let d3 = policy.d3 as i64;
    if min_power <= policy.gamma {
        policy.clamp(j_pre as i64 + d3)
    } else {
        policy.clamp(j_pre as i64 - d3)
    }
}

/// Power-driven rule on the weakest `|h|^2` over both hops.
pub fn adapt_size_power(policy: &DynamicBufferPolicy, j_pre: usize, channel: &ChannelRealization) -> usize {
    let (sr, rd) = channel.min_power();
    adapt_size_power_min(policy, j_pre, sr.min(rd))
}
