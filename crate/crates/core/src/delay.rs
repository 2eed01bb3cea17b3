//! Queueing delay of the relay buffers.
//!
//! Little's law gives the average storage time as `T = Q / R_a`. With the
//! mean queue length `Q = J P_GJ` and arrival rate
//! `R_a = (1 - P_GJ) P + P_G0 P`:
//!
//! ```text
//! T = J P_GJ / ((1 - P_GJ) P + P_G0 P)
//! ```
//!
//! `P_G0` and `P_GJ` are the probabilities of an empty and a full buffer and
//! `P` the per-slot probability of a successful transfer. All times are in
//! selection epochs.

use crate::{Error, Result};

pub fn analytic_delay(p_gj: f64, p_g0: f64, p: f64, capacity: f64) -> Result<f64> {
    for (name, v) in [("P_GJ", p_gj), ("P_G0", p_g0), ("P", p)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    let den = (1.0 - p_gj) * p + p_g0 * p;
    if den <= 0.0 {
        return Err(Error::UndefinedDelay);
    }
    Ok(capacity * p_gj / den)
}

/// Observations of one or more FIFOs.
///
/// Each call to [`record_sample`](Self::record_sample) is one queue observed
/// at the end of one epoch; arrivals and departures are counted between
/// samples. Departures of entries stored before the trace started are
/// ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelayTrace {
    start_epoch: u64,
    samples: u64,
    occupancy_sum: f64,
    capacity_sum: f64,
    empty: u64,
    full: u64,
    arrivals: u64,
    departures: u64,
    stored_time_sum: f64,
}

impl DelayTrace {
    pub fn new(start_epoch: u64) -> Self {
        Self {
            start_epoch,
            ..Self::default()
        }
    }

    pub fn start_epoch(&self) -> u64 {
        self.start_epoch
    }

    pub fn is_active(&self, epoch: u64) -> bool {
        epoch >= self.start_epoch
    }

    pub fn record_sample(&mut self, epoch: u64, occupancy: usize, capacity: usize) {
        if !self.is_active(epoch) {
            return;
        }
        self.samples += 1;
        self.occupancy_sum += occupancy as f64;
        self.capacity_sum += capacity as f64;
        if occupancy == 0 {
            self.empty += 1;
        }
        if occupancy >= capacity {
            self.full += 1;
        }
    }

    pub fn record_arrival(&mut self, epoch: u64) {
        if self.is_active(epoch) {
            self.arrivals += 1;
        }
    }

    pub fn record_departure(&mut self, stored_at: u64, epoch: u64) {
        if self.is_active(stored_at) {
            self.departures += 1;
            self.stored_time_sum += epoch.saturating_sub(stored_at) as f64;
        }
    }

    pub fn departures(&self) -> u64 {
        self.departures
    }

    pub fn merge(&mut self, other: &DelayTrace) {
        self.samples += other.samples;
        self.occupancy_sum += other.occupancy_sum;
        self.capacity_sum += other.capacity_sum;
        self.empty += other.empty;
        self.full += other.full;
        self.arrivals += other.arrivals;
        self.departures += other.departures;
        self.stored_time_sum += other.stored_time_sum;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayStats {
    pub p_g0: f64,
    pub p_gj: f64,
    /// Mean occupancy per queue.
    pub mean_queue: f64,
    /// Mean capacity per queue.
    pub mean_capacity: f64,
    /// Entries per queue per epoch.
    pub arrival_rate: f64,
    pub departure_rate: f64,
    /// Mean storage time of departed entries, in epochs.
    pub mean_delay: f64,
    /// Transfer probability implied by the measured arrival rate.
    pub transfer_probability: f64,
    /// [`analytic_delay`] on the measured probabilities, when defined.
    pub analytic: Option<f64>,
}

pub fn measure_delay(trace: &DelayTrace) -> Result<DelayStats> {
    if trace.departures == 0 || trace.samples == 0 {
        return Err(Error::InsufficientData("no packet left a buffer during the trace".into()));
    }
    let n = trace.samples as f64;
    let p_g0 = trace.empty as f64 / n;
    let p_gj = trace.full as f64 / n;
    let arrival_rate = trace.arrivals as f64 / n;
    let mean_capacity = trace.capacity_sum / n;
    let den = (1.0 - p_gj) + p_g0;
    let transfer_probability = if den > 0.0 { (arrival_rate / den).min(1.0) } else { 0.0 };
    Ok(DelayStats {
        p_g0,
        p_gj,
        mean_queue: trace.occupancy_sum / n,
        mean_capacity,
        arrival_rate,
        departure_rate: trace.departures as f64 / n,
        mean_delay: trace.stored_time_sum / trace.departures as f64,
        transfer_probability,
        analytic: analytic_delay(p_gj, p_g0, transfer_probability, mean_capacity).ok(),
    })
}

/// Least-squares line with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    crate::error::check_len(xs.len(), ys.len())?;
    if xs.len() < 2 {
        return Err(Error::InsufficientData("a line needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffers::RelayBuffer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn analytic_examples() {
        assert_eq!(analytic_delay(0.0, 0.3, 0.7, 4.0).unwrap(), 0.0);
        let t = analytic_delay(0.2, 0.1, 1.0, 4.0).unwrap();
        assert!((t - 0.8 / 0.9).abs() < 1e-12);
        assert!(matches!(analytic_delay(1.0, 0.0, 1.0, 4.0), Err(Error::UndefinedDelay)));
        assert!(matches!(analytic_delay(0.5, 0.5, 0.0, 4.0), Err(Error::UndefinedDelay)));
        assert!(analytic_delay(1.5, 0.0, 1.0, 4.0).is_err());
    }

    #[test]
    fn deterministic_trace() {
        let mut t = DelayTrace::new(0);
        t.record_departure(1, 3);
        t.record_departure(2, 4);
        for e in 0..4 {
            t.record_sample(e, 1, 4);
        }
        let s = measure_delay(&t).unwrap();
        assert_eq!(s.mean_delay, 2.0);
        assert_eq!(s.p_gj, 0.0);
    }

    #[test]
    fn empty_trace_is_insufficient() {
        let mut t = DelayTrace::new(0);
        t.record_sample(0, 0, 1);
        assert!(matches!(measure_delay(&t), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn warm_up_is_excluded() {
        let mut t = DelayTrace::new(5);
        t.record_sample(4, 3, 4);
        t.record_arrival(4);
        t.record_departure(4, 6);
        assert_eq!(t, DelayTrace::new(5));
    }

    // Bernoulli arrivals and services on a single FIFO. Arrivals are refused
    // when full, departures when empty.
    fn simulate(capacity: usize, p_in: f64, p_out: f64, epochs: u64, seed: u64) -> DelayStats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = RelayBuffer::new(0, capacity);
        let mut trace = DelayTrace::new(2 * capacity as u64);
        for e in 0..epochs {
            if rng.random_bool(0.5) {
                if rng.random_bool(p_in) && q.push((), e).is_ok() {
                    trace.record_arrival(e);
                }
            } else if rng.random_bool(p_out) {
                if let Ok(s) = q.pop() {
                    trace.record_departure(s.epoch, e);
                }
            }
            trace.record_sample(e, q.len(), capacity);
        }
        measure_delay(&trace).unwrap()
    }

    #[test]
    fn littles_law_on_random_queue() {
        for capacity in [1, 3, 8] {
            let s = simulate(capacity, 0.8, 0.8, 200_000, capacity as u64);
            let little = s.mean_queue / s.arrival_rate;
            assert!((s.mean_delay - little).abs() / s.mean_delay < 0.05, "{s:?}");
        }
    }

    #[test]
    fn single_slot_queue_matches_analytic() {
        let s = simulate(1, 0.9, 0.9, 200_000, 9);
        let a = s.analytic.unwrap();
        assert!((s.mean_delay - a).abs() / a < 0.1, "{s:?}");
    }

    #[test]
    fn fit_examples() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let f = linear_fit(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(f.r_squared < 0.5);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }
}
