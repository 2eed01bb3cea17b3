//! Signal model: spreading codes, fading channels, effective signatures,
//! BPSK data and noisy chip-rate observations.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::check_len;
use crate::linalg::axpy;
use crate::{Error, Result};

/// A user's signature sequence: `N` chips of value `±1/√N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingCode {
    chips: Vec<f64>,
}

impl SpreadingCode {
    /// Builds a code from chip signs (`true` is `+`).
    pub fn from_signs(signs: &[bool]) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::Config("spreading code needs at least one chip".into()));
        }
        let amp = 1.0 / (signs.len() as f64).sqrt();
        Ok(Self {
            chips: signs.iter().map(|&s| if s { amp } else { -amp }).collect(),
        })
    }

    pub fn chips(&self) -> &[f64] {
        &self.chips
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }
}

/// Draws `users` random codes of `chips` chips, deterministically from `seed`.
pub fn generate_codes(users: usize, chips: usize, seed: u64) -> Result<Vec<SpreadingCode>> {
    if users == 0 || chips == 0 {
        return Err(Error::Config(format!(
            "code set needs users >= 1 and chips >= 1 (got {users} x {chips})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..users)
        .map(|_| {
            let signs: Vec<bool> = (0..chips).map(|_| rng.random()).collect();
            SpreadingCode::from_signs(&signs)
        })
        .collect()
}

/// Complex flat-fading gain of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingCoefficient(pub Complex64);

/// Distribution of the fading gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelLaw {
    /// `r e^{jθ}` with `r ~ U[0, √3]`, `θ ~ U[0, 2π)`; unit mean power.
    #[default]
    UniformAmplitude,
    /// Circularly symmetric complex Gaussian with unit variance.
    Rayleigh,
}

impl ChannelLaw {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> FadingCoefficient {
        match self {
            ChannelLaw::UniformAmplitude => {
                let r = 3f64.sqrt() * rng.random::<f64>();
                let theta = std::f64::consts::TAU * rng.random::<f64>();
                FadingCoefficient(Complex64::from_polar(r, theta))
            }
            ChannelLaw::Rayleigh => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                FadingCoefficient(Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2)
            }
        }
    }
}

impl std::str::FromStr for ChannelLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ChannelLaw::UniformAmplitude),
            "rayleigh" => Ok(ChannelLaw::Rayleigh),
            other => Err(Error::Config(format!("unknown channel law `{other}`"))),
        }
    }
}

impl std::fmt::Display for ChannelLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChannelLaw::UniformAmplitude => "uniform",
            ChannelLaw::Rayleigh => "rayleigh",
        })
    }
}

/// All fading gains of one epoch: user-to-relay and relay-to-destination.
///
/// Both tables are indexed `[user * relays + relay]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    users: usize,
    relays: usize,
    source_relay: Vec<FadingCoefficient>,
    relay_dest: Vec<FadingCoefficient>,
}

impl ChannelRealization {
    pub fn draw<R: Rng + ?Sized>(
        users: usize,
        relays: usize,
        law: ChannelLaw,
        rng: &mut R,
    ) -> Result<Self> {
        if users == 0 || relays == 0 {
            return Err(Error::Config(format!(
                "channel needs users >= 1 and relays >= 1 (got {users} x {relays})"
            )));
        }
        let n = users * relays;
        let source_relay = (0..n).map(|_| law.sample(rng)).collect();
        let relay_dest = (0..n).map(|_| law.sample(rng)).collect();
        Ok(Self {
            users,
            relays,
            source_relay,
            relay_dest,
        })
    }

    /// Builds a realization from explicit gains, both indexed `[user * relays + relay]`.
    pub fn from_gains(
        users: usize,
        relays: usize,
        source_relay: Vec<Complex64>,
        relay_dest: Vec<Complex64>,
    ) -> Result<Self> {
        check_len(users * relays, source_relay.len())?;
        check_len(users * relays, relay_dest.len())?;
        Ok(Self {
            users,
            relays,
            source_relay: source_relay.into_iter().map(FadingCoefficient).collect(),
            relay_dest: relay_dest.into_iter().map(FadingCoefficient).collect(),
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn relays(&self) -> usize {
        self.relays
    }

    pub fn source_relay(&self, user: usize, relay: usize) -> FadingCoefficient {
        self.source_relay[user * self.relays + relay]
    }

    pub fn relay_dest(&self, user: usize, relay: usize) -> FadingCoefficient {
        self.relay_dest[user * self.relays + relay]
    }

    /// Iterates over every coefficient of both hops.
    pub fn coefficients(&self) -> impl Iterator<Item = FadingCoefficient> + '_ {
        self.source_relay.iter().chain(&self.relay_dest).copied()
    }

    /// Smallest `|h|^2` over the source-relay links and over the
    /// relay-destination links.
    pub fn min_power(&self) -> (f64, f64) {
        let min = |v: &[FadingCoefficient]| {
            v.iter().map(|h| h.0.norm_sqr()).fold(f64::INFINITY, f64::min)
        };
        (min(&self.source_relay), min(&self.relay_dest))
    }
}

/// Draws one realization from a fresh generator seeded with `seed`.
pub fn draw_channels(users: usize, relays: usize, seed: u64) -> Result<ChannelRealization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ChannelRealization::draw(users, relays, ChannelLaw::default(), &mut rng)
}

/// `a * h * s`: what a receiver sees of one user's symbol on one link.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveSignature(Vec<Complex64>);

impl EffectiveSignature {
    pub fn new(vector: Vec<Complex64>) -> Self {
        Self(vector)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        crate::linalg::norm_sqr(&self.0)
    }
}

pub fn effective_signature(
    amplitude: f64,
    code: &SpreadingCode,
    h: FadingCoefficient,
) -> EffectiveSignature {
    let g = h.0 * amplitude;
    EffectiveSignature(code.chips().iter().map(|&c| g * c).collect())
}

/// Effective signatures of every link for one epoch, indexed like
/// [`ChannelRealization`].
#[derive(Debug, Clone)]
pub struct LinkSignatures {
    users: usize,
    relays: usize,
    chips: usize,
    source_relay: Vec<EffectiveSignature>,
    relay_dest: Vec<EffectiveSignature>,
}

impl LinkSignatures {
    pub fn new(
        codes: &[SpreadingCode],
        channel: &ChannelRealization,
        amplitude: f64,
    ) -> Result<Self> {
        check_len(channel.users(), codes.len())?;
        let chips = codes[0].len();
        for c in codes {
            check_len(chips, c.len())?;
        }
        let (users, relays) = (channel.users(), channel.relays());
        let mut source_relay = Vec::with_capacity(users * relays);
        let mut relay_dest = Vec::with_capacity(users * relays);
        for (k, code) in codes.iter().enumerate() {
            for l in 0..relays {
                source_relay.push(effective_signature(amplitude, code, channel.source_relay(k, l)));
                relay_dest.push(effective_signature(amplitude, code, channel.relay_dest(k, l)));
            }
        }
        Ok(Self {
            users,
            relays,
            chips,
            source_relay,
            relay_dest,
        })
    }

    /// Assembles signatures directly, both indexed `[user * relays + relay]`.
    pub fn from_parts(
        users: usize,
        relays: usize,
        source_relay: Vec<EffectiveSignature>,
        relay_dest: Vec<EffectiveSignature>,
    ) -> Result<Self> {
        check_len(users * relays, source_relay.len())?;
        check_len(users * relays, relay_dest.len())?;
        let chips = source_relay.first().map_or(0, EffectiveSignature::len);
        for s in source_relay.iter().chain(&relay_dest) {
            check_len(chips, s.len())?;
        }
        Ok(Self {
            users,
            relays,
            chips,
            source_relay,
            relay_dest,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn relays(&self) -> usize {
        self.relays
    }

    pub fn chips(&self) -> usize {
        self.chips
    }

    pub fn source_relay(&self, user: usize, relay: usize) -> &EffectiveSignature {
        &self.source_relay[user * self.relays + relay]
    }

    pub fn relay_dest(&self, user: usize, relay: usize) -> &EffectiveSignature {
        &self.relay_dest[user * self.relays + relay]
    }

    /// All users' signatures towards `relay`.
    pub fn into_relay(&self, relay: usize) -> Vec<&EffectiveSignature> {
        (0..self.users).map(|k| self.source_relay(k, relay)).collect()
    }

    /// All users' signatures from `relay` to the destination.
    pub fn from_relay(&self, relay: usize) -> Vec<&EffectiveSignature> {
        (0..self.users).map(|k| self.relay_dest(k, relay)).collect()
    }
}

/// One user's BPSK symbols for one time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock {
    pub user: usize,
    pub slot: u64,
    pub symbols: Vec<f64>,
}

impl SymbolBlock {
    pub fn random<R: Rng + ?Sized>(user: usize, slot: u64, len: usize, rng: &mut R) -> Self {
        let symbols = (0..len)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Self { user, slot, symbols }
    }

    pub fn is_bpsk(&self) -> bool {
        self.symbols.iter().all(|&s| s == 1.0 || s == -1.0)
    }
}

/// Zero-mean circularly symmetric complex Gaussian noise of variance `σ²`
/// per chip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    variance: f64,
}

impl NoiseModel {
    pub fn new(variance: f64) -> Result<Self> {
        if variance > 0.0 && variance.is_finite() {
            Ok(Self { variance })
        } else {
            Err(Error::Config(format!("noise variance must be positive, got {variance}")))
        }
    }

    /// `σ² = 10^(-SNR/10)` for unit mean received signal power.
    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        Self::new(snr_to_noise_variance(snr_db))
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let s = (self.variance / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    }

    pub fn add_to<R: Rng + ?Sized>(&self, y: &mut [Complex64], rng: &mut R) {
        for v in y {
            *v += self.sample(rng);
        }
    }
}

pub fn snr_to_noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Noiseless superposition `Σ_k h_k b_k` of all users at one receiver.
pub fn superpose(signatures: &[&EffectiveSignature], symbols: &[f64]) -> Result<Vec<Complex64>> {
    check_len(signatures.len(), symbols.len())?;
    let chips = signatures.first().map_or(0, |s| s.len());
    let mut y = vec![Complex64::new(0.0, 0.0); chips];
    for (sig, &b) in signatures.iter().zip(symbols) {
        check_len(chips, sig.len())?;
        axpy(&mut y, Complex64::new(b, 0.0), sig.as_slice());
    }
    Ok(y)
}

/// Received chip vector at one relay for one slot: `Σ_k h_k b_k(t) + n(t)`.
pub fn transmit_source_phase<R: Rng + ?Sized>(
    signatures: &[&EffectiveSignature],
    symbols: &[f64],
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let mut y = superpose(signatures, symbols)?;
    if let Some(noise) = noise {
        noise.add_to(&mut y, rng);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_short_code_has_half_amplitude_chips() {
        let codes = generate_codes(1, 4, 7).unwrap();
        assert_eq!(codes.len(), 1);
        assert!(codes[0].chips().iter().all(|&x| x == 0.5 || x == -0.5));
    }

    #[test]
    fn codes_are_unit_norm_and_reproducible() {
        let a = generate_codes(3, 16, 11).unwrap();
        let b = generate_codes(3, 16, 11).unwrap();
        assert_eq!(a, b);
        for code in &a {
            assert_eq!(code.len(), 16);
            let e: f64 = code.chips().iter().map(|x| x * x).sum();
            assert!((e - 1.0).abs() < 1e-12);
        }
        assert_ne!(a, generate_codes(3, 16, 12).unwrap());
    }

    #[test]
    fn empty_code_set_is_rejected() {
        assert!(matches!(generate_codes(0, 16, 1), Err(Error::Config(_))));
        assert!(matches!(generate_codes(3, 0, 1), Err(Error::Config(_))));
    }

    #[test]
    fn channel_counts_and_determinism() {
        let a = draw_channels(3, 6, 5).unwrap();
        assert_eq!(a.coefficients().count(), 36);
        assert_eq!(a, draw_channels(3, 6, 5).unwrap());
        assert!(draw_channels(0, 6, 5).is_err());
    }

    #[test]
    fn uniform_law_has_unit_mean_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let p: f64 = (0..n)
            .map(|_| ChannelLaw::UniformAmplitude.sample(&mut rng).0.norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((p - 1.0).abs() < 0.02, "mean power {p}");
        let p: f64 = (0..n)
            .map(|_| ChannelLaw::Rayleigh.sample(&mut rng).0.norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((p - 1.0).abs() < 0.02, "mean power {p}");
    }

    #[test]
    fn effective_signature_scaling() {
        let code = SpreadingCode::from_signs(&[true, false, true, true]).unwrap();
        let unit = effective_signature(1.0, &code, FadingCoefficient(c(1.0, 0.0)));
        for (v, &s) in unit.as_slice().iter().zip(code.chips()) {
            assert_eq!(*v, c(s, 0.0));
        }
        let scaled = effective_signature(2.0, &code, FadingCoefficient(c(0.0, 1.0)));
        for (v, &s) in scaled.as_slice().iter().zip(code.chips()) {
            assert_eq!(*v, c(0.0, 2.0 * s));
        }
        let h = c(0.3, -1.1);
        let sig = effective_signature(1.7, &code, FadingCoefficient(h));
        assert!((sig.norm_sqr().sqrt() - 1.7 * h.norm()).abs() < 1e-12);
    }

    #[test]
    fn source_phase_superposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h1 = EffectiveSignature::new(vec![c(1.0, 0.5), c(-0.2, 0.0)]);
        let h2 = EffectiveSignature::new(vec![c(0.1, 0.1), c(0.7, -0.3)]);
        let y = transmit_source_phase(&[&h1], &[1.0], None, &mut rng).unwrap();
        assert_eq!(y, h1.as_slice());
        let y = transmit_source_phase(&[&h1, &h2], &[1.0, -1.0], None, &mut rng).unwrap();
        for i in 0..2 {
            assert_eq!(y[i], h1.as_slice()[i] - h2.as_slice()[i]);
        }
        assert!(matches!(
            transmit_source_phase(&[&h1, &h2], &[1.0], None, &mut rng),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn source_phase_noise_power_matches_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let codes = generate_codes(2, 16, 4).unwrap();
        let ch = draw_channels(2, 1, 4).unwrap();
        let sigs = LinkSignatures::new(&codes, &ch, 1.0).unwrap();
        let into = sigs.into_relay(0);
        let noise = NoiseModel::new(1.0).unwrap();
        let b = [1.0, -1.0];
        let clean = superpose(&into, &b).unwrap();
        let trials = 100_000 / 16;
        let mut acc = 0.0;
        for _ in 0..trials {
            let y = transmit_source_phase(&into, &b, Some(&noise), &mut rng).unwrap();
            acc += y.iter().zip(&clean).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / 16.0;
        }
        let p = acc / trials as f64;
        assert!((p - 1.0).abs() < 0.03, "noise power {p}");
    }

    #[test]
    fn noise_sample_variance_within_three_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = NoiseModel::from_snr_db(6.0).unwrap();
        let n = 100_000;
        let v: f64 = (0..n).map(|_| noise.sample(&mut rng).norm_sqr()).sum::<f64>() / n as f64;
        assert!((v / noise.variance() - 1.0).abs() < 0.03);
        assert!(NoiseModel::new(0.0).is_err());
        assert!(NoiseModel::new(-1.0).is_err());
    }

    #[test]
    fn random_blocks_are_bpsk() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = SymbolBlock::random(2, 7, 1000, &mut rng);
        assert!(b.is_bpsk());
        assert_eq!(b.symbols.len(), 1000);
    }

    proptest::proptest! {
        #[test]
        fn source_phase_is_linear_in_symbols(
            seed in 0u64..1000,
            alpha in -3.0f64..3.0,
            b0 in proptest::bool::ANY,
            b1 in proptest::bool::ANY,
        ) {
            let codes = generate_codes(2, 8, seed).unwrap();
            let ch = draw_channels(2, 1, seed).unwrap();
            let sigs = LinkSignatures::new(&codes, &ch, 1.0).unwrap();
            let into = sigs.into_relay(0);
            let b = [if b0 { 1.0 } else { -1.0 }, if b1 { 1.0 } else { -1.0 }];
            let scaled = [alpha * b[0], alpha * b[1]];
            let y = superpose(&into, &b).unwrap();
            let ys = superpose(&into, &scaled).unwrap();
            for (a, s) in y.iter().zip(&ys) {
                proptest::prop_assert!((a * alpha - s).norm() < 1e-12);
            }
        }
    }
}
