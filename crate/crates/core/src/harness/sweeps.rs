//! Experiments built from independent trials.
//!
//! Trials run in parallel; trial `r` of SNR point `i` uses RNG stream
//! `i << 32 | r`, and results are reduced in index order, so the output does
//! not depend on the thread count.

use rayon::prelude::*;

use crate::buffers::BufferMode;
use crate::delay::{measure_delay, DelayTrace};
use crate::harness::config::SimConfig;
use crate::harness::sim::{run_trial, run_until_deliveries, TrialContext, TrialCounters, TrialOutcome};
use crate::{Error, Result};

/// One output row.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub snr_db: f64,
    /// NaN when no symbol reached the destination.
    pub ber: f64,
    /// NaN when no packet left a buffer after the warm-up.
    pub avg_delay_epochs: f64,
    pub mean_buffer_size: f64,
    pub pairs_examined_mean: f64,
    pub idle_epoch_fraction: f64,
    pub symbols_counted: u64,
    pub bit_errors: u64,
    pub epochs: u64,
}

impl ExperimentRow {
    pub fn insufficient(&self) -> bool {
        self.symbols_counted == 0
    }

    /// Binomial standard error of `ber`.
    pub fn ber_std_error(&self) -> f64 {
        let n = self.symbols_counted as f64;
        (self.ber * (1.0 - self.ber) / n).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub label: String,
    pub rows: Vec<ExperimentRow>,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

fn summarize(snr_db: f64, outcomes: &[TrialOutcome]) -> ExperimentRow {
    let mut c = TrialCounters::default();
    let mut trace = DelayTrace::default();
    for o in outcomes {
        c.merge(&o.counters);
        trace.merge(&o.trace);
    }
    ExperimentRow {
        snr_db,
        ber: ratio(c.bit_errors, c.symbols_counted),
        avg_delay_epochs: measure_delay(&trace).map_or(f64::NAN, |s| s.mean_delay),
        mean_buffer_size: ratio(c.capacity_sum, c.epochs),
        pairs_examined_mean: ratio(c.pairs_examined, c.epochs),
        idle_epoch_fraction: ratio(c.idle_epochs, c.epochs),
        symbols_counted: c.symbols_counted,
        bit_errors: c.bit_errors,
        epochs: c.epochs,
    }
}

fn run_jobs(contexts: &[TrialContext], streams: impl Fn(usize, usize) -> u64 + Sync, replicas: usize, epochs: usize) -> Result<Vec<Vec<TrialOutcome>>> {
    let jobs: Vec<(usize, usize)> = (0..contexts.len())
        .flat_map(|p| (0..replicas).map(move |r| (p, r)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(p, r)| run_trial(&contexts[p], streams(p, r), epochs).map(TrialOutcome::from))
        .collect::<Result<Vec<_>>>()?;
    let mut grouped: Vec<Vec<TrialOutcome>> = (0..contexts.len()).map(|_| Vec::new()).collect();
    for ((p, _), o) in jobs.into_iter().zip(outcomes) {
        grouped[p].push(o);
    }
    Ok(grouped)
}

pub fn label(config: &SimConfig) -> String {
    format!(
        "{}{} {}/{}",
        config.selection,
        if config.buffering { "" } else { " unbuffered" },
        config.relay_detector,
        config.dest_detector
    )
}

/// One row per SNR point.
pub fn run_ber_sweep(config: &SimConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let points = config.snr.points();
    let contexts = points
        .iter()
        .map(|&snr| TrialContext::new(config, snr))
        .collect::<Result<Vec<_>>>()?;
    let grouped = run_jobs(&contexts, |p, r| ((p as u64) << 32) | r as u64, config.replicas, config.packets)?;
    Ok(ExperimentResult {
        label: label(config),
        rows: points.iter().zip(&grouped).map(|(&snr, o)| summarize(snr, o)).collect(),
    })
}

/// One row per fixed buffer size at the lowest SNR of the grid; every size
/// sees the same RNG streams.
pub fn run_buffer_size_sweep(config: &SimConfig, sizes: &[usize]) -> Result<ExperimentResult> {
    let snr = config.snr.min;
    let contexts = sizes
        .iter()
        .map(|&j| {
            let mut c = config.clone();
            c.buffer.size = j;
            c.buffer.policy.mode = BufferMode::Fixed;
            TrialContext::new(&c, snr)
        })
        .collect::<Result<Vec<_>>>()?;
    let grouped = run_jobs(&contexts, |_, r| r as u64, config.replicas, config.packets)?;
    Ok(ExperimentResult {
        label: format!("{} buffer sweep", label(config)),
        rows: grouped.iter().map(|o| summarize(snr, o)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayExperiment {
    pub packet_counts: Vec<usize>,
    /// Constant capacity `buffer.J`.
    pub fixed: ExperimentResult,
    /// Capacity adapted from `buffer.J` by the configured rule (SNR-driven
    /// when the configuration says fixed).
    pub dynamic: ExperimentResult,
}

/// Storage delay accumulated while forwarding packets.
///
/// For each count `P` the row holds the sum, over the first `P` forwarding
/// epochs after the warm-up, of the mean storage time of the forwarded
/// entries, averaged over replicas. BER and symbol counts refer to the same
/// epochs.
pub fn run_delay_experiment(config: &SimConfig, packet_counts: &[usize]) -> Result<DelayExperiment> {
    config.validate()?;
    if !config.buffering || config.selection == crate::selection::Strategy::None {
        return Err(Error::Config("the delay experiment needs a buffered selection scheme".into()));
    }
    let snr = config.snr.min;
    let mut fixed = config.clone();
    fixed.buffer.policy.mode = BufferMode::Fixed;
    let mut dynamic = config.clone();
    if dynamic.buffer.policy.mode == BufferMode::Fixed {
        dynamic.buffer.policy.mode = BufferMode::SnrDriven;
    }
    let arm = |cfg: &SimConfig| -> Result<ExperimentResult> {
        let ctx = TrialContext::new(cfg, snr)?;
        let target = packet_counts.iter().copied().max().unwrap_or(0);
        let max_epochs = ctx.warm_up + 1000 * (target as u64 + 10);
        let outcomes = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| run_until_deliveries(&ctx, r as u64, target, max_epochs).map(TrialOutcome::from))
            .collect::<Result<Vec<_>>>()?;
        let overall = summarize(snr, &outcomes);
        let rows = packet_counts
            .iter()
            .map(|&p| {
                let (mut delay, mut errors, mut counted) = (0.0, 0, 0);
                for o in &outcomes {
                    for d in &o.deliveries[..p] {
                        delay += d.mean_stored_time;
                        errors += d.bit_errors;
                        counted += d.symbols_counted;
                    }
                }
                ExperimentRow {
                    ber: ratio(errors, counted),
                    avg_delay_epochs: delay / outcomes.len() as f64,
                    symbols_counted: counted,
                    bit_errors: errors,
                    ..overall.clone()
                }
            })
            .collect();
        Ok(ExperimentResult {
            label: format!("{} {}", label(cfg), cfg.buffer.policy.mode),
            rows,
        })
    };
    Ok(DelayExperiment {
        packet_counts: packet_counts.to_vec(),
        fixed: arm(&fixed)?,
        dynamic: arm(&dynamic)?,
    })
}
