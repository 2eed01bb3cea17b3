//! `bdstc`: run BER, buffer-size and delay experiments from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bdstc::harness::output::{ber_plot, Plot, Series};
use bdstc::harness::{
    emit_results, run_ber_sweep, run_buffer_size_sweep, run_delay_experiment, write_csv, write_svg, ExperimentResult,
    SimConfig,
};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bdstc", version, about = "Buffer-aided DSTC cooperative DS-CDMA link-level simulator")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// BER against SNR.
    Sweep,
    /// BER against buffer size at the lowest SNR of the grid.
    BufferSweep {
        /// Buffer sizes to simulate.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,6,8")]
        sizes: Vec<usize>,
    },
    /// Accumulated storage delay against forwarded packets, fixed against dynamic buffers.
    Delay {
        /// Forwarded packet counts to report.
        #[arg(long, value_delimiter = ',', default_value = "100,200,300,400,500")]
        counts: Vec<usize>,
    },
    /// Print the effective configuration and exit.
    ShowConfig,
}

/// Command-line values override the configuration file.
#[derive(Debug, Args)]
struct Overrides {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    users: Option<String>,
    #[arg(long, global = true)]
    relays: Option<String>,
    #[arg(long, global = true)]
    chips: Option<String>,
    /// Symbols per packet and user.
    #[arg(long, global = true)]
    packet_len: Option<String>,
    #[arg(long, global = true)]
    buffer_size: Option<String>,
    /// fixed | snr | power
    #[arg(long, global = true)]
    buffer_mode: Option<String>,
    /// true | false
    #[arg(long, global = true)]
    buffering: Option<String>,
    /// exhaustive | greedy | random | none
    #[arg(long, global = true)]
    selection: Option<String>,
    /// rake | mmse | perfect
    #[arg(long, global = true)]
    relay_detector: Option<String>,
    /// rake | mmse | ml
    #[arg(long, global = true)]
    dest_detector: Option<String>,
    /// `min:step:max` in dB, or a single value.
    #[arg(long, global = true, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Selection epochs per replica.
    #[arg(long, global = true)]
    packets: Option<String>,
    #[arg(long, global = true)]
    replicas: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Output CSV path.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Also write an SVG plot next to the CSV.
    #[arg(long, global = true)]
    plot: bool,
}

impl Overrides {
    fn config(&self) -> Result<SimConfig> {
        let mut config = match &self.config {
            Some(path) => SimConfig::load(path)?,
            None => SimConfig::default(),
        };
        let pairs = [
            ("users", &self.users),
            ("relays", &self.relays),
            ("chips", &self.chips),
            ("packet-len", &self.packet_len),
            ("buffer.J", &self.buffer_size),
            ("buffer.mode", &self.buffer_mode),
            ("buffering", &self.buffering),
            ("selection", &self.selection),
            ("relay-detector", &self.relay_detector),
            ("dest-detector", &self.dest_detector),
            ("snr", &self.snr),
            ("packets", &self.packets),
            ("replicas", &self.replicas),
            ("seed", &self.seed),
            ("out", &self.out),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                config.set(key, v).with_context(|| format!("--{}", key.replace('.', "-")))?;
            }
        }
        if self.plot {
            config.plot = true;
        }
        config.validate()?;
        Ok(config)
    }
}

fn out_path(config: &SimConfig, default: &str) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "results".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}-{suffix}.csv"))
}

fn print_rows(result: &ExperimentResult) {
    println!("# {}", result.label);
    for r in &result.rows {
        println!(
            "snr {:>6} dB  ber {:<12.6e} delay {:<10.3} J {:<6.2} pairs {:<6.2} idle {:<6.4} symbols {}",
            r.snr_db,
            r.ber,
            r.avg_delay_epochs,
            r.mean_buffer_size,
            r.pairs_examined_mean,
            r.idle_epoch_fraction,
            r.symbols_counted
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.opts.config()?;
    match cli.command {
        Command::ShowConfig => print!("{}", config.to_config_string()),
        Command::Sweep => {
            let result = run_ber_sweep(&config)?;
            print_rows(&result);
            for f in emit_results(&result, &out_path(&config, "ber.csv"), config.plot)? {
                println!("wrote {}", f.display());
            }
        }
        Command::BufferSweep { sizes } => {
            let result = run_buffer_size_sweep(&config, &sizes)?;
            print_rows(&result);
            let path = out_path(&config, "buffer-sweep.csv");
            write_csv(&result, &path)?;
            println!("wrote {}", path.display());
            if config.plot {
                let mut plot = ber_plot(&result);
                plot.title = format!("BER versus buffer size at {} dB", config.snr.min);
                plot.x_label = "buffer size J".into();
                plot.series[0].points = result.rows.iter().map(|r| (r.mean_buffer_size, r.ber)).collect();
                let svg = path.with_extension("svg");
                write_svg(&plot, &svg)?;
                println!("wrote {}", svg.display());
            }
        }
        Command::Delay { counts } => {
            let exp = run_delay_experiment(&config, &counts)?;
            let path = out_path(&config, "delay.csv");
            for (name, result) in [("fixed", &exp.fixed), ("dynamic", &exp.dynamic)] {
                print_rows(result);
                let p = with_suffix(&path, name);
                write_csv(result, &p)?;
                println!("wrote {}", p.display());
            }
            if config.plot {
                let series = |result: &ExperimentResult| Series {
                    name: result.label.clone(),
                    points: counts.iter().zip(&result.rows).map(|(&c, r)| (c as f64, r.avg_delay_epochs)).collect(),
                };
                let plot = Plot {
                    title: format!("Accumulated storage delay at {} dB", config.snr.min),
                    x_label: "forwarded packets".into(),
                    y_label: "delay (epochs)".into(),
                    log_y: false,
                    series: vec![series(&exp.fixed), series(&exp.dynamic)],
                };
                let svg = path.with_extension("svg");
                write_svg(&plot, &svg)?;
                println!("wrote {}", svg.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bdstc: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
