//! Alamouti encoding across a relay pair and the relay-destination channel.

use num_complex::Complex64;
use rand::Rng;

use crate::error::check_len;
use crate::linalg::{axpy, dot_h, norm_sqr};
use crate::signal::{EffectiveSignature, NoiseModel};
use crate::Result;

/// Symbol matrix transmitted by relays `m` (row 0) and `n` (row 1) over
/// slots `2i-1` (column 0) and `2i` (column 1):
///
/// ```text
/// [ b_m   -b_n* ]
/// [ b_n    b_m* ]
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlamoutiBlock {
    pub entries: [[Complex64; 2]; 2],
}

impl AlamoutiBlock {
    pub fn b_m(&self) -> Complex64 {
        self.entries[0][0]
    }

    pub fn b_n(&self) -> Complex64 {
        self.entries[1][0]
    }

    /// `|column_0^H column_1|`.
    pub fn column_inner_product(&self) -> f64 {
        let e = &self.entries;
        (e[0][0].conj() * e[0][1] + e[1][0].conj() * e[1][1]).norm()
    }
}

pub fn alamouti_encode(b_m: Complex64, b_n: Complex64) -> AlamoutiBlock {
    AlamoutiBlock {
        entries: [[b_m, -b_n.conj()], [b_n, b_m.conj()]],
    }
}

/// Noiseless received vectors of one user for a pair transmission:
/// `y1 = h_m b_m + h_n b_n`, `y2 = h_n b_m* - h_m b_n*`.
pub fn dstc_contribution(
    h_m: &[Complex64],
    h_n: &[Complex64],
    block: &AlamoutiBlock,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = h_m.len();
    let mut y1 = vec![Complex64::new(0.0, 0.0); n];
    let mut y2 = vec![Complex64::new(0.0, 0.0); n];
    add_dstc_contribution(&mut y1, &mut y2, h_m, h_n, block);
    (y1, y2)
}

pub(crate) fn add_dstc_contribution(
    y1: &mut [Complex64],
    y2: &mut [Complex64],
    h_m: &[Complex64],
    h_n: &[Complex64],
    block: &AlamoutiBlock,
) {
    let e = &block.entries;
    axpy(y1, e[0][0], h_m);
    axpy(y1, e[1][0], h_n);
    axpy(y2, e[0][1], h_m);
    axpy(y2, e[1][1], h_n);
}

/// Both slots received at the destination from one user's Alamouti block.
pub fn transmit_dstc_phase<R: Rng + ?Sized>(
    h_m: &EffectiveSignature,
    h_n: &EffectiveSignature,
    block: &AlamoutiBlock,
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    check_len(h_m.len(), h_n.len())?;
    let (mut y1, mut y2) = dstc_contribution(h_m.as_slice(), h_n.as_slice(), block);
    if let Some(noise) = noise {
        noise.add_to(&mut y1, rng);
        noise.add_to(&mut y2, rng);
    }
    Ok((y1, y2))
}

/// The `2N x 2` matrix mapping `[b_m; b_n]` to `[y1; y2*]`:
///
/// ```text
/// [ h_m    h_n  ]
/// [ h_n*  -h_m* ]
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct StackedChannel {
    columns: [Vec<Complex64>; 2],
}

impl StackedChannel {
    pub fn column(&self, i: usize) -> &[Complex64] {
        &self.columns[i]
    }

    /// `H^H H` as a row-major 2x2 matrix.
    pub fn gram(&self) -> [[Complex64; 2]; 2] {
        let [a, b] = &self.columns;
        [[dot_h(a, a), dot_h(a, b)], [dot_h(b, a), dot_h(b, b)]]
    }

    /// `H x`.
    pub fn apply(&self, x: [Complex64; 2]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.columns[0].len()];
        axpy(&mut out, x[0], &self.columns[0]);
        axpy(&mut out, x[1], &self.columns[1]);
        out
    }
}

pub fn build_stacked_channel(h_m: &EffectiveSignature, h_n: &EffectiveSignature) -> Result<StackedChannel> {
    check_len(h_m.len(), h_n.len())?;
    let (m, n) = (h_m.as_slice(), h_n.as_slice());
    let top_bottom = |a: &[Complex64], b: Vec<Complex64>| a.iter().copied().chain(b).collect();
    Ok(StackedChannel {
        columns: [
            top_bottom(m, n.iter().map(|v| v.conj()).collect()),
            top_bottom(n, m.iter().map(|v| -v.conj()).collect()),
        ],
    })
}

/// Noiseless received energy over both slots.
pub fn received_energy(y1: &[Complex64], y2: &[Complex64]) -> f64 {
    norm_sqr(y1) + norm_sqr(y2)
}
