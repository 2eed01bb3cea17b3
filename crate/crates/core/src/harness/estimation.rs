//! Least-squares channel estimation from known pilot symbols.
//!
//! Users send their pilots in separate slots, so each link is estimated
//! without multiple-access interference. For pilots `p_t` received as
//! `y_t = a s h p_t + n_t`:
//!
//! ```text
//! ĥ = Σ_t p_t^* s^H y_t / (a² ||s||² Σ_t |p_t|²)
//! ```
//!
//! with error variance `σ² / (a² ||s||² Σ_t |p_t|²)`.

use num_complex::Complex64;
use rand::Rng;

use crate::linalg::dot_h;
use crate::signal::{ChannelRealization, FadingCoefficient, NoiseModel, SpreadingCode};
use crate::{Error, Result};

/// Alternating `+1, -1, ...` pilot symbols.
pub fn pilot_sequence(len: usize) -> Vec<f64> {
    (0..len).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

/// LS estimate of one fading coefficient from received pilot vectors.
pub fn ls_estimate(
    code: &SpreadingCode,
    amplitude: f64,
    pilots: &[f64],
    received: &[Vec<Complex64>],
) -> Result<FadingCoefficient> {
    if pilots.is_empty() {
        return Err(Error::Config("channel estimation needs at least one pilot".into()));
    }
    crate::error::check_len(pilots.len(), received.len())?;
    let s: Vec<Complex64> = code.chips().iter().map(|&c| Complex64::new(c, 0.0)).collect();
    let energy = amplitude * amplitude * dot_h(&s, &s).re * pilots.iter().map(|p| p * p).sum::<f64>();
    let mut acc = Complex64::new(0.0, 0.0);
    for (p, y) in pilots.iter().zip(received) {
        crate::error::check_len(s.len(), y.len())?;
        acc += dot_h(&s, y) * *p;
    }
    Ok(FadingCoefficient(acc / energy))
}

fn estimate_link<R: Rng + ?Sized>(
    code: &SpreadingCode,
    amplitude: f64,
    h: FadingCoefficient,
    pilots: &[f64],
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<FadingCoefficient> {
    let received: Vec<Vec<Complex64>> = pilots
        .iter()
        .map(|&p| {
            let g = h.0 * amplitude * p;
            let mut y: Vec<Complex64> = code.chips().iter().map(|&c| g * c).collect();
            if let Some(n) = noise {
                n.add_to(&mut y, rng);
            }
            y
        })
        .collect();
    ls_estimate(code, amplitude, pilots, &received)
}

/// Estimates every link of `channel` from `pilots` noisy pilot symbols.
pub fn estimate_channels<R: Rng + ?Sized>(
    codes: &[SpreadingCode],
    channel: &ChannelRealization,
    amplitude: f64,
    pilots: usize,
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<ChannelRealization> {
    crate::error::check_len(channel.users(), codes.len())?;
    let seq = pilot_sequence(pilots);
    if seq.is_empty() {
        return Err(Error::Config("channel estimation needs at least one pilot".into()));
    }
    let (users, relays) = (channel.users(), channel.relays());
    let mut sr = Vec::with_capacity(users * relays);
    let mut rd = Vec::with_capacity(users * relays);
    for (k, code) in codes.iter().enumerate() {
        for l in 0..relays {
            sr.push(estimate_link(code, amplitude, channel.source_relay(k, l), &seq, noise, rng)?.0);
        }
    }
    for (k, code) in codes.iter().enumerate() {
        for l in 0..relays {
            rd.push(estimate_link(code, amplitude, channel.relay_dest(k, l), &seq, noise, rng)?.0);
        }
    }
    ChannelRealization::from_gains(users, relays, sr, rd)
}
