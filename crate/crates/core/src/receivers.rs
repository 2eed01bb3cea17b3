//! Receive filters and detectors.
//!
//! Relays detect each user per slot with a linear filter (RAKE or MMSE)
//! followed by the BPSK slicer. The destination decodes the Alamouti pair of
//! every user with one of three detectors working on the stacked observation
//! `[y(2i-1); y*(2i)]`:
//!
//! - RAKE: matched filter to the user's columns of the stacked channel, which
//!   is the per-user Alamouti combiner;
//! - MMSE: linear MMSE over the stacked model of all users;
//! - ML: joint maximum likelihood over all users' symbol pairs. For a single
//!   user it makes the same decisions as the Alamouti combiner.

use num_complex::Complex64;

use crate::error::check_len;
use crate::linalg::{dot_h, norm_sqr, LoadedGram};
use crate::signal::EffectiveSignature;
use crate::{Error, Result};

/// Largest number of users the joint ML detector accepts (`4^K` hypotheses).
pub const MAX_ML_USERS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveFilter {
    weights: Vec<Complex64>,
}

impl ReceiveFilter {
    pub fn new(weights: Vec<Complex64>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.weights)
    }

    /// `w^H y`.
    pub fn apply(&self, y: &[Complex64]) -> Result<Complex64> {
        check_len(self.weights.len(), y.len())?;
        Ok(dot_h(&self.weights, y))
    }
}

/// Matched filter: the weights are the link's effective signature.
pub fn rake_filter(signature: &EffectiveSignature) -> ReceiveFilter {
    ReceiveFilter::new(signature.as_slice().to_vec())
}

/// `(Σ_k h_k h_k^H + σ² I)^{-1} h_target`.
pub fn mmse_filter(
    signatures: &[&EffectiveSignature],
    target: usize,
    noise_variance: f64,
) -> Result<ReceiveFilter> {
    if target >= signatures.len() {
        return Err(Error::Config(format!(
            "target user {target} out of range for {} signatures",
            signatures.len()
        )));
    }
    let gram = loaded_gram(signatures, noise_variance)?;
    Ok(ReceiveFilter::new(gram.solve(signatures[target].as_slice())?))
}

/// MMSE filters for every user sharing one factorisation.
pub fn mmse_filters(
    signatures: &[&EffectiveSignature],
    noise_variance: f64,
) -> Result<Vec<ReceiveFilter>> {
    let gram = loaded_gram(signatures, noise_variance)?;
    signatures
        .iter()
        .map(|s| Ok(ReceiveFilter::new(gram.solve(s.as_slice())?)))
        .collect()
}

fn loaded_gram(signatures: &[&EffectiveSignature], noise_variance: f64) -> Result<LoadedGram> {
    if !(noise_variance > 0.0) {
        return Err(Error::IllConditioned(format!(
            "MMSE filter needs a positive noise variance, got {noise_variance}"
        )));
    }
    let dim = signatures.first().map_or(0, |s| s.len());
    let vectors: Vec<&[Complex64]> = signatures.iter().map(|s| s.as_slice()).collect();
    LoadedGram::new(dim, &vectors, noise_variance)
}

/// BPSK decision on the real part; a zero real part maps to `+1`.
pub fn slicer(z: Complex64) -> f64 {
    if z.re >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `Q(w^H y)`.
pub fn linear_detect(filter: &ReceiveFilter, y: &[Complex64]) -> Result<f64> {
    Ok(slicer(filter.apply(y)?))
}

/// Alamouti combiner outputs before slicing:
/// `h_m^H y1 + h_n^T y2*` and `h_n^H y1 - h_m^T y2*`.
pub fn alamouti_combine(
    h_m: &[Complex64],
    h_n: &[Complex64],
    y1: &[Complex64],
    y2: &[Complex64],
) -> Result<(Complex64, Complex64)> {
    let n = h_m.len();
    check_len(n, h_n.len())?;
    check_len(n, y1.len())?;
    check_len(n, y2.len())?;
    // h^T y* = conj(h^H y)
    let zm = dot_h(h_m, y1) + dot_h(h_n, y2).conj();
    let zn = dot_h(h_n, y1) - dot_h(h_m, y2).conj();
    Ok((zm, zn))
}

/// Single-user ML decision for one Alamouti epoch via the orthogonal
/// combiner.
pub fn ml_alamouti_detect(
    h_m: &EffectiveSignature,
    h_n: &EffectiveSignature,
    y1: &[Complex64],
    y2: &[Complex64],
) -> Result<(f64, f64)> {
    let (zm, zn) = alamouti_combine(h_m.as_slice(), h_n.as_slice(), y1, y2)?;
    Ok((slicer(zm), slicer(zn)))
}

/// Detector applied by the relays in the source-relay phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelayDetector {
    Rake,
    #[default]
    Mmse,
    /// Relays recover the transmitted symbols without error.
    Perfect,
}

impl std::str::FromStr for RelayDetector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rake" => Ok(Self::Rake),
            "mmse" => Ok(Self::Mmse),
            "perfect" => Ok(Self::Perfect),
            other => Err(Error::Config(format!("unknown relay detector `{other}`"))),
        }
    }
}

impl std::fmt::Display for RelayDetector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Rake => "rake",
            Self::Mmse => "mmse",
            Self::Perfect => "perfect",
        })
    }
}

/// Detector applied at the destination in the relay-destination phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DestDetector {
    #[default]
    Rake,
    Mmse,
    Ml,
}

impl std::str::FromStr for DestDetector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rake" => Ok(Self::Rake),
            "mmse" => Ok(Self::Mmse),
            "ml" => Ok(Self::Ml),
            other => Err(Error::Config(format!("unknown destination detector `{other}`"))),
        }
    }
}

impl std::fmt::Display for DestDetector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Rake => "rake",
            Self::Mmse => "mmse",
            Self::Ml => "ml",
        })
    }
}

/// Relay-pair signatures of one user: `(h_m, h_n)` towards the destination.
pub type PairSignatures<'a> = (&'a EffectiveSignature, &'a EffectiveSignature);

/// Destination detector prepared for one epoch and one relay pair.
#[derive(Debug)]
pub struct AlamoutiReceiver {
    chips: usize,
    kind: Prepared,
}

#[derive(Debug)]
enum Prepared {
    Rake {
        pairs: Vec<(Vec<Complex64>, Vec<Complex64>)>,
    },
    Linear {
        /// Two stacked filters per user.
        filters: Vec<(Vec<Complex64>, Vec<Complex64>)>,
    },
    Ml {
        columns: Vec<Vec<Complex64>>,
        gram: Vec<f64>,
        hypotheses: Vec<Vec<f64>>,
    },
}

/// `[h_m; h_n*]` and `[h_n; -h_m*]`.
fn stacked_columns(h_m: &[Complex64], h_n: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let c1 = h_m.iter().copied().chain(h_n.iter().map(|v| v.conj())).collect();
    let c2 = h_n.iter().copied().chain(h_m.iter().map(|v| -v.conj())).collect();
    (c1, c2)
}

impl AlamoutiReceiver {
    pub fn new(kind: DestDetector, users: &[PairSignatures<'_>], noise_variance: f64) -> Result<Self> {
        let chips = users.first().map_or(0, |(m, _)| m.len());
        for (m, n) in users {
            check_len(chips, m.len())?;
            check_len(chips, n.len())?;
        }
        let kind = match kind {
            DestDetector::Rake => Prepared::Rake {
                pairs: users
                    .iter()
                    .map(|(m, n)| (m.as_slice().to_vec(), n.as_slice().to_vec()))
                    .collect(),
            },
            DestDetector::Mmse => {
                let cols: Vec<(Vec<Complex64>, Vec<Complex64>)> = users
                    .iter()
                    .map(|(m, n)| stacked_columns(m.as_slice(), n.as_slice()))
                    .collect();
                let all: Vec<&[Complex64]> =
                    cols.iter().flat_map(|(a, b)| [a.as_slice(), b.as_slice()]).collect();
                if !(noise_variance > 0.0) {
                    return Err(Error::IllConditioned(format!(
                        "MMSE filter needs a positive noise variance, got {noise_variance}"
                    )));
                }
                let gram = LoadedGram::new(2 * chips, &all, noise_variance)?;
                let filters = cols
                    .iter()
                    .map(|(a, b)| Ok((gram.solve(a)?, gram.solve(b)?)))
                    .collect::<Result<_>>()?;
                Prepared::Linear { filters }
            }
            DestDetector::Ml => {
                if users.len() > MAX_ML_USERS {
                    return Err(Error::Config(format!(
                        "joint ML detection supports at most {MAX_ML_USERS} users, got {}",
                        users.len()
                    )));
                }
                let columns: Vec<Vec<Complex64>> = users
                    .iter()
                    .flat_map(|(m, n)| {
                        let (a, b) = stacked_columns(m.as_slice(), n.as_slice());
                        [a, b]
                    })
                    .collect();
                let d = columns.len();
                let mut gram = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        gram[i * d + j] = dot_h(&columns[i], &columns[j]).re;
                    }
                }
                let hypotheses = (0..1usize << d)
                    .map(|mask| {
                        (0..d)
                            .map(|i| if mask >> i & 1 == 0 { 1.0 } else { -1.0 })
                            .collect()
                    })
                    .collect();
                Prepared::Ml {
                    columns,
                    gram,
                    hypotheses,
                }
            }
        };
        Ok(Self { chips, kind })
    }

    /// Decisions `(b_m, b_n)` for every user from one epoch's two slots.
    pub fn detect(&self, y1: &[Complex64], y2: &[Complex64]) -> Result<Vec<(f64, f64)>> {
        check_len(self.chips, y1.len())?;
        check_len(self.chips, y2.len())?;
        match &self.kind {
            Prepared::Rake { pairs } => pairs
                .iter()
                .map(|(m, n)| {
                    let (zm, zn) = alamouti_combine(m, n, y1, y2)?;
                    Ok((slicer(zm), slicer(zn)))
                })
                .collect(),
            Prepared::Linear { filters } => {
                let stacked = stack(y1, y2);
                Ok(filters
                    .iter()
                    .map(|(a, b)| (slicer(dot_h(a, &stacked)), slicer(dot_h(b, &stacked))))
                    .collect())
            }
            Prepared::Ml {
                columns,
                gram,
                hypotheses,
            } => {
                let stacked = stack(y1, y2);
                let d = columns.len();
                let corr: Vec<f64> = columns.iter().map(|c| dot_h(c, &stacked).re).collect();
                let mut best = f64::INFINITY;
                let mut best_idx = 0;
                for (idx, b) in hypotheses.iter().enumerate() {
                    // ||y - G b||^2 up to the constant ||y||^2
                    let mut metric = 0.0;
                    for i in 0..d {
                        let row = &gram[i * d..(i + 1) * d];
                        let gb: f64 = row.iter().zip(b).map(|(g, bj)| g * bj).sum();
                        metric += b[i] * (gb - 2.0 * corr[i]);
                    }
                    if metric < best {
                        best = metric;
                        best_idx = idx;
                    }
                }
                let b = &hypotheses[best_idx];
                Ok(b.chunks(2).map(|p| (p[0], p[1])).collect())
            }
        }
    }
}

/// `[y1; y2*]`.
fn stack(y1: &[Complex64], y2: &[Complex64]) -> Vec<Complex64> {
    y1.iter().copied().chain(y2.iter().map(|v| v.conj())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate_codes, LinkSignatures, ChannelRealization, ChannelLaw};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit(n: usize, i: usize) -> EffectiveSignature {
        let mut v = vec![c(0.0, 0.0); n];
        v[i] = c(1.0, 0.0);
        EffectiveSignature::new(v)
    }

    fn random_sigs(users: usize, chips: usize, seed: u64) -> LinkSignatures {
        let codes = generate_codes(users, chips, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = ChannelRealization::draw(users, 2, ChannelLaw::UniformAmplitude, &mut rng).unwrap();
        LinkSignatures::new(&codes, &ch, 1.0).unwrap()
    }

    #[test]
    fn rake_copies_signature() {
        let s = EffectiveSignature::new(vec![c(1.0, 2.0), c(-0.5, 0.0)]);
        let w = rake_filter(&s);
        assert_eq!(w.weights(), s.as_slice());
        assert_eq!(w.norm_sqr(), s.norm_sqr());
        let z = EffectiveSignature::new(vec![c(0.0, 0.0); 3]);
        assert!(rake_filter(&z).weights().iter().all(|v| *v == c(0.0, 0.0)));
    }

    #[test]
    fn mmse_single_user_closed_form() {
        let h = EffectiveSignature::new(vec![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)]);
        let w = mmse_filter(&[&h], 0, 1.0).unwrap();
        for (wi, hi) in w.weights().iter().zip(h.as_slice()) {
            assert!((wi - hi / 2.0).norm() < 1e-14);
        }
        // Large noise: w -> h / σ², the RAKE direction.
        let s2 = 1e6;
        let w = mmse_filter(&[&h], 0, s2).unwrap();
        for (wi, hi) in w.weights().iter().zip(h.as_slice()) {
            assert!((wi * s2 - hi).norm() < 1e-5);
        }
    }

    #[test]
    fn mmse_rejects_nonpositive_noise() {
        let h = unit(4, 0);
        assert!(matches!(mmse_filter(&[&h], 0, 0.0), Err(Error::IllConditioned(_))));
        assert!(matches!(mmse_filter(&[&h], 0, -1.0), Err(Error::IllConditioned(_))));
        assert!(matches!(mmse_filter(&[&h], 1, 1.0), Err(Error::Config(_))));
    }

    /// Gaussian elimination with partial pivoting, independent of the
    /// Cholesky path used by the filters.
    fn gauss_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for r in col + 1..n {
                let f = a[r][col] / a[col][col];
                for k in col..n {
                    let v = a[col][k];
                    a[r][k] -= f * v;
                }
                let v = b[col];
                b[r] -= f * v;
            }
        }
        let mut x = vec![c(0.0, 0.0); n];
        for r in (0..n).rev() {
            let s: Complex64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn mmse_matches_independent_solve_with_small_residual() {
        let sigs = random_sigs(3, 16, 21);
        let into = sigs.into_relay(0);
        let s2 = 0.1;
        let filters = mmse_filters(&into, s2).unwrap();
        let mut a = vec![vec![c(0.0, 0.0); 16]; 16];
        for h in &into {
            for r in 0..16 {
                for col in 0..16 {
                    a[r][col] += h.as_slice()[r] * h.as_slice()[col].conj();
                }
            }
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += c(s2, 0.0);
        }
        for (k, w) in filters.iter().enumerate() {
            let target = into[k].as_slice();
            let x = gauss_solve(a.clone(), target.to_vec());
            let diff: f64 = x.iter().zip(w.weights()).map(|(p, q)| (p - q).norm_sqr()).sum();
            assert!(diff.sqrt() < 1e-10);
            let res: f64 = (0..16)
                .map(|r| {
                    let aw: Complex64 = (0..16).map(|col| a[r][col] * w.weights()[col]).sum();
                    (aw - target[r]).norm_sqr()
                })
                .sum();
            assert!(res.sqrt() <= 1e-10);
        }
    }

    #[test]
    fn slicer_decisions() {
        assert_eq!(slicer(c(0.7, -0.2)), 1.0);
        assert_eq!(slicer(c(-0.1, 0.0)), -1.0);
        assert_eq!(slicer(c(0.0, 0.0)), 1.0);
        assert_eq!(slicer(c(0.0, -5.0)), 1.0);
    }

    #[test]
    fn linear_detect_signs_and_dims() {
        let h = EffectiveSignature::new(vec![c(0.3, 0.4), c(-0.1, 0.9)]);
        let w = rake_filter(&h);
        let neg: Vec<Complex64> = h.as_slice().iter().map(|v| -v).collect();
        assert_eq!(linear_detect(&w, h.as_slice()).unwrap(), 1.0);
        assert_eq!(linear_detect(&w, &neg).unwrap(), -1.0);
        assert!(matches!(linear_detect(&w, &[c(1.0, 0.0)]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn alamouti_unit_vector_example() {
        let e1 = unit(4, 0);
        // (b_m, b_n) = (+1, -1) over h_m = h_n = e1: y1 = 0, y2 = 2 e1.
        let y1 = vec![c(0.0, 0.0); 4];
        let mut y2 = vec![c(0.0, 0.0); 4];
        y2[0] = c(2.0, 0.0);
        let (zm, zn) = alamouti_combine(e1.as_slice(), e1.as_slice(), &y1, &y2).unwrap();
        assert_eq!(zm, c(2.0, 0.0));
        assert_eq!(zn, c(-2.0, 0.0));
        assert_eq!(ml_alamouti_detect(&e1, &e1, &y1, &y2).unwrap(), (1.0, -1.0));
    }

    #[test]
    fn alamouti_combining_gain() {
        let sigs = random_sigs(1, 8, 4);
        let (hm, hn) = (sigs.relay_dest(0, 0), sigs.relay_dest(0, 1));
        let gain = hm.norm_sqr() + hn.norm_sqr();
        for &(bm, bn) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let (y1, y2) = crate::dstc::dstc_contribution(
                hm.as_slice(),
                hn.as_slice(),
                &crate::dstc::alamouti_encode(c(bm, 0.0), c(bn, 0.0)),
            );
            let (zm, zn) = alamouti_combine(hm.as_slice(), hn.as_slice(), &y1, &y2).unwrap();
            assert!((zm - c(gain * bm, 0.0)).norm() < 1e-12);
            assert!((zn - c(gain * bn, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn receivers_reject_wrong_lengths() {
        let a = unit(4, 0);
        let b = unit(3, 0);
        let y = vec![c(0.0, 0.0); 4];
        assert!(ml_alamouti_detect(&a, &b, &y, &y).is_err());
        let rx = AlamoutiReceiver::new(DestDetector::Rake, &[(&a, &a)], 1.0).unwrap();
        assert!(rx.detect(&y, &y[..3]).is_err());
    }

    #[test]
    fn stacked_rake_equals_combiner() {
        // Matched filtering with the stacked columns is the Alamouti combiner.
        let sigs = random_sigs(2, 8, 9);
        let (hm, hn) = (sigs.relay_dest(0, 0), sigs.relay_dest(0, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = crate::signal::NoiseModel::new(0.5).unwrap();
        for _ in 0..50 {
            let mut y1: Vec<Complex64> = (0..8).map(|_| noise.sample(&mut rng)).collect();
            let y2: Vec<Complex64> = (0..8).map(|_| noise.sample(&mut rng)).collect();
            y1[0] += 1.0;
            let (c1, c2) = stacked_columns(hm.as_slice(), hn.as_slice());
            let s = stack(&y1, &y2);
            let (zm, zn) = alamouti_combine(hm.as_slice(), hn.as_slice(), &y1, &y2).unwrap();
            assert!((dot_h(&c1, &s) - zm).norm() < 1e-12);
            assert!((dot_h(&c2, &s) - zn).norm() < 1e-12);
        }
    }

    #[test]
    fn joint_ml_single_user_matches_combiner() {
        let sigs = random_sigs(1, 8, 3);
        let (hm, hn) = (sigs.relay_dest(0, 0), sigs.relay_dest(0, 1));
        let rx = AlamoutiReceiver::new(DestDetector::Ml, &[(hm, hn)], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = crate::signal::NoiseModel::new(2.0).unwrap();
        for _ in 0..500 {
            let y1: Vec<Complex64> = (0..8).map(|_| noise.sample(&mut rng)).collect();
            let y2: Vec<Complex64> = (0..8).map(|_| noise.sample(&mut rng)).collect();
            let joint = rx.detect(&y1, &y2).unwrap();
            let single = ml_alamouti_detect(hm, hn, &y1, &y2).unwrap();
            assert_eq!(joint[0], single);
        }
    }

    #[test]
    fn ml_user_limit() {
        let a = unit(2, 0);
        let users = vec![(&a, &a); MAX_ML_USERS + 1];
        assert!(matches!(
            AlamoutiReceiver::new(DestDetector::Ml, &users, 1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn parse_detector_names() {
        assert_eq!("mmse".parse::<RelayDetector>().unwrap(), RelayDetector::Mmse);
        assert_eq!("perfect".parse::<RelayDetector>().unwrap(), RelayDetector::Perfect);
        assert_eq!("ml".parse::<DestDetector>().unwrap(), DestDetector::Ml);
        assert!("zf".parse::<DestDetector>().is_err());
    }

    proptest::proptest! {
        #[test]
        fn slicer_is_idempotent(re in -10.0f64..10.0, im in -10.0f64..10.0) {
            let s = slicer(c(re, im));
            proptest::prop_assert_eq!(slicer(c(s, 0.0)), s);
        }
    }
}
