//! Simulation parameters and the `key = value` configuration format.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::buffers::DynamicBufferPolicy;
use crate::receivers::{DestDetector, RelayDetector, MAX_ML_USERS};
use crate::selection::Strategy;
use crate::signal::ChannelLaw;
use crate::{Error, Result};

/// Inclusive SNR range in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrGrid {
    pub min: f64,
    pub step: f64,
    pub max: f64,
}

impl SnrGrid {
    pub fn single(snr_db: f64) -> Self {
        Self {
            min: snr_db,
            step: 1.0,
            max: snr_db,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.min + i as f64 * self.step).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.step.is_finite()) {
            return Err(Error::Config("SNR grid values must be finite".into()));
        }
        if self.min > self.max {
            return Err(Error::Config(format!("SNR min {} exceeds max {}", self.min, self.max)));
        }
        if self.step <= 0.0 {
            return Err(Error::Config(format!("SNR step must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

impl FromStr for SnrGrid {
    type Err = Error;

    /// `min:step:max` or a single value.
    fn from_str(s: &str) -> Result<Self> {
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid SNR value `{v}`")))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [v] => Ok(Self::single(num(v)?)),
            [a, b, c] => Ok(Self {
                min: num(a)?,
                step: num(b)?,
                max: num(c)?,
            }),
            _ => Err(Error::Config(format!("SNR must be `min:step:max` or a value, got `{s}`"))),
        }
    }
}

impl fmt::Display for SnrGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.step, self.max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BufferConfig {
    /// Starting capacity `J`.
    pub size: usize,
    pub policy: DynamicBufferPolicy,
    /// Input SNR at which `size` applies under the SNR-driven rule.
    pub snr_ref: f64,
}

impl Default for BufferConfig {
    fn default() -> Self {
        Self {
            size: 6,
            policy: DynamicBufferPolicy::default(),
            snr_ref: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub users: usize,
    pub relays: usize,
    pub chips: usize,
    /// Symbols per packet and user.
    pub packet_len: usize,
    pub buffer: BufferConfig,
    /// Store packets at the relays; when off every packet is forwarded in the
    /// epoch after it is received.
    pub buffering: bool,
    pub selection: Strategy,
    pub relay_detector: RelayDetector,
    pub dest_detector: DestDetector,
    pub snr: SnrGrid,
    /// Selection epochs per replica.
    pub packets: usize,
    pub replicas: usize,
    pub seed: u64,
    pub channel_estimation: bool,
    pub pilots: usize,
    pub channel_law: ChannelLaw,
    pub out: Option<PathBuf>,
    pub plot: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            users: 3,
            relays: 6,
            chips: 16,
            packet_len: 1000,
            buffer: BufferConfig::default(),
            buffering: true,
            selection: Strategy::Exhaustive,
            relay_detector: RelayDetector::Mmse,
            dest_detector: DestDetector::Rake,
            snr: SnrGrid {
                min: 0.0,
                step: 2.0,
                max: 16.0,
            },
            packets: 200,
            replicas: 1,
            seed: 1,
            channel_estimation: false,
            pilots: 8,
            channel_law: ChannelLaw::default(),
            out: None,
            plot: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

impl SimConfig {
    /// Sets one option by its configuration key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "users" => self.users = parse(key, v)?,
            "relays" => self.relays = parse(key, v)?,
            "chips" => self.chips = parse(key, v)?,
            "packet-len" => self.packet_len = parse(key, v)?,
            "buffer.mode" => self.buffer.policy.mode = v.parse()?,
            "buffer.J" | "buffer-size" => self.buffer.size = parse(key, v)?,
            "buffer.Jmin" => self.buffer.policy.j_min = parse(key, v)?,
            "buffer.Jmax" => self.buffer.policy.j_max = parse(key, v)?,
            "buffer.gamma" => self.buffer.policy.gamma = parse(key, v)?,
            "buffer.d1" => self.buffer.policy.d1 = parse(key, v)?,
            "buffer.d2" => self.buffer.policy.d2 = parse(key, v)?,
            "buffer.d3" => self.buffer.policy.d3 = parse(key, v)?,
            "buffer.snr-ref" => self.buffer.snr_ref = parse(key, v)?,
            "buffering" => self.buffering = parse_bool(key, v)?,
            "selection" => self.selection = v.parse()?,
            "relay-detector" => self.relay_detector = v.parse()?,
            "dest-detector" => self.dest_detector = v.parse()?,
            "snr" => self.snr = v.parse()?,
            "packets" => self.packets = parse(key, v)?,
            "replicas" => self.replicas = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "channel-estimation" => self.channel_estimation = parse_bool(key, v)?,
            "pilots" => self.pilots = parse(key, v)?,
            "channel-law" => self.channel_law = v.parse()?,
            "out" => self.out = Some(PathBuf::from(v)),
            "plot" => self.plot = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", no + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn from_str_validated(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut c = Self::default();
        c.apply_str(&text)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.users < 1 {
            return fail("users must be at least 1".into());
        }
        if self.relays < 2 {
            return fail(format!("relays must be at least 2, got {}", self.relays));
        }
        if self.chips < 1 {
            return fail("chips must be at least 1".into());
        }
        if self.packet_len < 1 {
            return fail("packet-len must be at least 1".into());
        }
        if self.packets < 1 {
            return fail("packets must be at least 1".into());
        }
        if self.replicas < 1 {
            return fail("replicas must be at least 1".into());
        }
        if self.buffer.size < 1 {
            return fail("buffer.J must be at least 1".into());
        }
        self.buffer.policy.validate()?;
        self.snr.validate()?;
        if self.selection == Strategy::None && !self.relays.is_multiple_of(2) {
            return fail(format!("selection `none` needs an even number of relays, got {}", self.relays));
        }
        if self.dest_detector == DestDetector::Ml && self.users > MAX_ML_USERS {
            return fail(format!("ML detection supports at most {MAX_ML_USERS} users"));
        }
        if self.channel_estimation && self.pilots < 1 {
            return fail("channel estimation needs at least one pilot".into());
        }
        Ok(())
    }

    /// The configuration as `key = value` lines accepted by [`apply_str`](Self::apply_str).
    pub fn to_config_string(&self) -> String {
        let p = &self.buffer.policy;
        let mut s = format!(
            "users = {}\nrelays = {}\nchips = {}\npacket-len = {}\n\
             buffer.mode = {}\nbuffer.J = {}\nbuffer.Jmin = {}\nbuffer.Jmax = {}\n\
             buffer.gamma = {}\nbuffer.d1 = {}\nbuffer.d2 = {}\nbuffer.d3 = {}\nbuffer.snr-ref = {}\n\
             buffering = {}\nselection = {}\nrelay-detector = {}\ndest-detector = {}\n\
             snr = {}\npackets = {}\nreplicas = {}\nseed = {}\n\
             channel-estimation = {}\npilots = {}\nchannel-law = {}\nplot = {}\n",
            self.users,
            self.relays,
            self.chips,
            self.packet_len,
            p.mode,
            self.buffer.size,
            p.j_min,
            p.j_max,
            p.gamma,
            p.d1,
            p.d2,
            p.d3,
            self.buffer.snr_ref,
            self.buffering,
            self.selection,
            self.relay_detector,
            self.dest_detector,
            self.snr,
            self.packets,
            self.replicas,
            self.seed,
            self.channel_estimation,
            self.pilots,
            self.channel_law,
            self.plot,
        );
        if let Some(out) = &self.out {
            s.push_str(&format!("out = {}\n", out.display()));
        }
        s
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
