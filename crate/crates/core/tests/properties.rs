//! Statistical and structural properties of the full simulator.

use bdstc::dstc::build_stacked_channel;
use bdstc::harness::{run_ber_sweep, run_trial, SimConfig, TrialContext};
use bdstc::receivers::{AlamoutiReceiver, DestDetector, RelayDetector};
use bdstc::selection::Strategy;
use bdstc::signal::{EffectiveSignature, NoiseModel};
use bdstc::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(users: usize) -> SimConfig {
    SimConfig {
        users,
        relays: 6,
        chips: 16,
        packet_len: 25,
        relay_detector: RelayDetector::Mmse,
        dest_detector: DestDetector::Rake,
        ..SimConfig::default()
    }
}

/// Per-replica BER.
fn bers(cfg: &SimConfig, snr: f64, replicas: usize, epochs: usize) -> Vec<f64> {
    let ctx = TrialContext::new(cfg, snr).unwrap();
    (0..replicas)
        .map(|r| {
            let s = run_trial(&ctx, r as u64, epochs).unwrap();
            s.counters.bit_errors as f64 / s.counters.symbols_counted as f64
        })
        .collect()
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[test]
fn single_user_bound_and_snr_monotonicity() {
    let points = [0.0, 5.0, 10.0, 15.0];
    let (replicas, epochs) = (8, 1200);
    let mut previous: Option<Vec<f64>> = None;
    for snr in points {
        let single = bers(&config(1), snr, replicas, epochs);
        let multi = bers(&config(3), snr, replicas, epochs);
        let (d, s) = mean_se(&diff(&single, &multi));
        assert!(d <= 2.0 * s, "{snr} dB: single-user minus multiuser {d} +- {s}");
        if let Some(prev) = &previous {
            let (d, s) = mean_se(&diff(&multi, prev));
            assert!(d <= 2.0 * s, "{snr} dB: BER rose by {d} +- {s}");
        }
        previous = Some(multi);
    }
}

#[test]
fn exhaustive_beats_random_at_10_db() {
    let exhaustive = bers(&config(3), 10.0, 8, 1200);
    let random = bers(
        &SimConfig {
            selection: Strategy::Random,
            ..config(3)
        },
        10.0,
        8,
        1200,
    );
    let (d, s) = mean_se(&diff(&exhaustive, &random));
    assert!(d < -2.0 * s, "exhaustive minus random {d} +- {s}");
}

#[test]
fn estimated_channels_cost_performance() {
    let perfect = bers(&config(3), 10.0, 8, 1200);
    let estimated = bers(
        &SimConfig {
            channel_estimation: true,
            pilots: 2,
            ..config(3)
        },
        10.0,
        8,
        1200,
    );
    let (d, s) = mean_se(&diff(&estimated, &perfect));
    assert!(d >= -2.0 * s, "estimated minus perfect {d} +- {s}");
}

#[test]
fn counted_symbols_are_delivered_slots() {
    for (selection, buffering) in [
        (Strategy::Exhaustive, true),
        (Strategy::Greedy, true),
        (Strategy::Random, false),
        (Strategy::None, true),
    ] {
        let cfg = SimConfig {
            selection,
            buffering,
            packets: 300,
            replicas: 2,
            snr: "5".parse().unwrap(),
            ..config(3)
        };
        let r = run_ber_sweep(&cfg).unwrap();
        let row = &r.rows[0];
        // Slots of 25 symbols for 3 users; no slot is counted twice, so at
        // most two per epoch.
        assert_eq!(row.symbols_counted % 75, 0);
        assert!(row.symbols_counted <= 2 * 75 * row.epochs);
        assert!(row.ber >= 0.0 && row.ber <= 0.5, "{selection}: {}", row.ber);
    }
}

fn random_signature(rng: &mut ChaCha8Rng, n: usize) -> EffectiveSignature {
    EffectiveSignature::new(
        (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect(),
    )
}

#[test]
fn joint_ml_is_brute_force_minimum_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = NoiseModel::new(0.3).unwrap();
    let users = 2;
    for _ in 0..300 {
        let sigs: Vec<(EffectiveSignature, EffectiveSignature)> = (0..users)
            .map(|_| (random_signature(&mut rng, 8), random_signature(&mut rng, 8)))
            .collect();
        let stacked: Vec<_> = sigs.iter().map(|(m, n)| build_stacked_channel(m, n).unwrap()).collect();
        let truth: Vec<[f64; 2]> = (0..users)
            .map(|_| [0, 1].map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }))
            .collect();
        let mut y = vec![Complex64::new(0.0, 0.0); 16];
        for (h, b) in stacked.iter().zip(&truth) {
            for (acc, v) in y.iter_mut().zip(h.apply([Complex64::new(b[0], 0.0), Complex64::new(b[1], 0.0)])) {
                *acc += v;
            }
        }
        noise.add_to(&mut y, &mut rng);
        let (y1, y2s) = y.split_at(8);
        let y2: Vec<Complex64> = y2s.iter().map(|v| v.conj()).collect();

        let mut best = (f64::INFINITY, 0u32);
        for hyp in 0..(1u32 << (2 * users)) {
            let bit = |i: usize| if hyp >> i & 1 == 1 { 1.0 } else { -1.0 };
            let mut r = y.clone();
            for (k, h) in stacked.iter().enumerate() {
                let v = h.apply([Complex64::new(bit(2 * k), 0.0), Complex64::new(bit(2 * k + 1), 0.0)]);
                for (a, b) in r.iter_mut().zip(v) {
                    *a -= b;
                }
            }
            let dist: f64 = r.iter().map(|v| v.norm_sqr()).sum();
            if dist < best.0 {
                best = (dist, hyp);
            }
        }
        let pairs: Vec<_> = sigs.iter().map(|(m, n)| (m, n)).collect();
        let rx = AlamoutiReceiver::new(DestDetector::Ml, &pairs, noise.variance()).unwrap();
        let got = rx.detect(y1, &y2).unwrap();
        for (k, (bm, bn)) in got.into_iter().enumerate() {
            let bit = |i: usize| if best.1 >> i & 1 == 1 { 1.0 } else { -1.0 };
            assert_eq!((bm, bn), (bit(2 * k), bit(2 * k + 1)));
        }
    }
}
