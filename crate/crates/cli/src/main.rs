//! `ajscc`: run the single-transistor AJSCC experiments and write CSV.
//!
//! Configuration precedence, lowest first: built-in defaults, `--config`
//! file, `AJSCC_<KEY>` environment variables, `--set key=value`, then the
//! dedicated flags (`--seed`, `--workers`, `--out`).
//!
//! Every CSV starts with one `#` line echoing the resolved configuration,
//! then a header row. Schemas:
//!
//! | file | columns |
//! |---|---|
//! | `noiseless_corrected.csv`, `noiseless_uncorrected.csv` | `vgs_true,vds_true,vgs_hat,vds_hat,corrected` |
//! | `sweep_lambda.csv` | `lambda,mse_pre,mse_post,accuracy_pre,accuracy_post` |
//! | `sweep_delta.csv` | `delta,mse_gs,mse_ds,mse_sum` (plus `mse_literal_sum` with `--literal-sum`) |
//! | `sweep_snr.csv` | `snr_db,bandwidth_hz,mse_sum` |
//! | `field_vgs.csv`, `field_vds.csv` | `x,y,t,value` |

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use ajscc_core::codec::{decode_pair, encode, CodecConfig};
use ajscc_core::experiments::{run_noiseless, sweep_lambda, NoiselessOutcome};
use ajscc_core::{Interval, RunConfig};
use clap::{Parser, Subcommand};

use output::Outputs;

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Debug, Parser)]
#[command(
    name = "ajscc",
    version,
    about = "Single-transistor analog joint source-channel coding experiments"
)]
struct Cli {
    /// Flat TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed for fields and channel.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decode every point of the noiseless curves, with and without range check.
    Noiseless,
    /// Noiseless MSE before and after correction over the λ grid.
    SweepLambda,
    /// Block-averaged MSE over the Δ grid at the configured bandwidth and SNR.
    SweepDelta {
        /// Also write `mse_gs + mse_ds`.
        #[arg(long)]
        literal_sum: bool,
    },
    /// Block-averaged MSE over the SNR grid for each bandwidth.
    ///
    /// Uses `delta` when set, otherwise `snr_delta`.
    SweepSnr,
    /// Write the ground-truth fields of one repetition.
    GenField {
        #[arg(long, default_value_t = 0)]
        rep: usize,
    },
    /// Print the drain current for one sample.
    ///
    /// `vgs` is first quantized to the noiseless level set, or to a uniform
    /// grid over the `Vgs` range when `--delta` is given.
    Encode {
        #[arg(long, allow_hyphen_values = true)]
        vgs: f64,
        #[arg(long, allow_hyphen_values = true)]
        vds: f64,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Decode two consecutive currents.
    Decode {
        #[arg(long)]
        i1: f64,
        #[arg(long)]
        i2: f64,
        #[arg(long)]
        delta: Option<f64>,
        /// Disable the range-check correction.
        #[arg(long)]
        no_correction: bool,
    },
}

fn resolve(cli: &Cli) -> AnyResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => RunConfig::default(),
    };
    cfg.merge_env(std::env::vars())?;
    for pair in &cli.overrides {
        cfg.set_pair(pair)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn codec_for(cfg: &RunConfig, delta: Option<f64>) -> AnyResult<CodecConfig> {
    let params = cfg.params();
    let vds = Interval::new(cfg.vds_lo, cfg.vds_hi);
    Ok(match delta {
        Some(d) => CodecConfig::uniform(&params, Interval::new(cfg.vgs_lo, cfg.vgs_hi), d, vds)?,
        None => CodecConfig::from_levels(&params, cfg.noiseless_levels.clone(), vds)?,
    })
}

fn write_scatter(out: &mut Outputs, name: &str, meta: &str, o: &NoiselessOutcome) -> AnyResult<()> {
    let mut w = out.csv(name, meta)?;
    w.write_record(["vgs_true", "vds_true", "vgs_hat", "vds_hat", "corrected"])?;
    for p in &o.points {
        w.write_record([
            p.vgs_true.to_string(),
            p.vds_true.to_string(),
            p.vgs_hat.to_string(),
            p.vds_hat.to_string(),
            p.corrected.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli, cfg: &RunConfig, out: &mut Outputs) -> AnyResult<String> {
    let meta = cfg.metadata_line();
    Ok(match &cli.command {
        Command::Noiseless => {
            let r = run_noiseless(&cfg.noiseless_setup())?;
            write_scatter(out, "noiseless_corrected.csv", &meta, &r.corrected)?;
            write_scatter(out, "noiseless_uncorrected.csv", &meta, &r.uncorrected)?;
            format!(
                "accuracy_corrected={} accuracy_uncorrected={} mse_corrected={:e} mse_uncorrected={:e}",
                r.corrected.accuracy,
                r.uncorrected.accuracy,
                r.corrected.mse(),
                r.uncorrected.mse()
            )
        }
        Command::SweepLambda => {
            let rows = sweep_lambda(&cfg.noiseless_setup(), &cfg.lambda_grid)?;
            let mut w = out.csv("sweep_lambda.csv", &meta)?;
            w.write_record([
                "lambda",
                "mse_pre",
                "mse_post",
                "accuracy_pre",
                "accuracy_post",
            ])?;
            for r in &rows {
                w.write_record([
                    r.lambda.to_string(),
                    r.mse_pre.to_string(),
                    r.mse_post.to_string(),
                    r.accuracy_pre.to_string(),
                    r.accuracy_post.to_string(),
                ])?;
            }
            w.flush()?;
            let worst_pre = rows.iter().map(|r| r.mse_pre).fold(0.0, f64::max);
            let worst_post = rows.iter().map(|r| r.mse_post).fold(0.0, f64::max);
            format!(
                "points={} max_mse_pre={worst_pre:e} max_mse_post={worst_post:e}",
                rows.len()
            )
        }
        Command::SweepDelta { literal_sum } => {
            let exp = cfg.channel_experiment();
            let sweep = exp.sweep_delta(&cfg.effective_delta_grid(), cfg.bandwidth, cfg.snr_db)?;
            let mut w = out.csv("sweep_delta.csv", &meta)?;
            let mut header = vec!["delta", "mse_gs", "mse_ds", "mse_sum"];
            if *literal_sum {
                header.push("mse_literal_sum");
            }
            w.write_record(&header)?;
            for r in &sweep.reports {
                let mut row = vec![
                    r.point.delta.to_string(),
                    r.mse_gs.to_string(),
                    r.mse_ds.to_string(),
                    r.mse_sum.to_string(),
                ];
                if *literal_sum {
                    row.push(r.literal_sum().to_string());
                }
                w.write_record(&row)?;
            }
            w.flush()?;
            let b = sweep.best_report();
            format!(
                "delta_star={} mse_gs={:.4} mse_ds={:.4} mse_sum={:.4}",
                sweep.delta_star, b.mse_gs, b.mse_ds, b.mse_sum
            )
        }
        Command::SweepSnr => {
            let exp = cfg.channel_experiment();
            let delta = cfg.delta.unwrap_or(cfg.snr_delta);
            let reports = exp.sweep_snr(delta, &cfg.snr_grid, &cfg.bandwidths)?;
            let mut w = out.csv("sweep_snr.csv", &meta)?;
            w.write_record(["snr_db", "bandwidth_hz", "mse_sum"])?;
            for r in &reports {
                w.write_record([
                    r.point.snr_db.to_string(),
                    r.point.bandwidth.to_string(),
                    r.mse_sum.to_string(),
                ])?;
            }
            w.flush()?;
            let worst = reports.iter().map(|r| r.mse_sum).fold(0.0, f64::max);
            let best = reports
                .iter()
                .map(|r| r.mse_sum)
                .fold(f64::INFINITY, f64::min);
            format!(
                "delta={delta} points={} min_mse_sum={best:.4} max_mse_sum={worst:.4}",
                reports.len()
            )
        }
        Command::GenField { rep } => {
            let (gs, ds) = cfg.channel_experiment().fields(*rep)?;
            for (name, f) in [("field_vgs.csv", &gs), ("field_vds.csv", &ds)] {
                let w = out.raw(name, &meta)?;
                f.write_csv(w)?;
            }
            format!(
                "rep={rep} samples={} blocks={}",
                gs.values.len(),
                gs.geometry.n_blocks()
            )
        }
        Command::Encode { vgs, vds, delta } => {
            let codec = codec_for(cfg, *delta)?;
            let i = encode(&cfg.params(), &codec, *vgs, *vds)?;
            format!("{i:.4e}")
        }
        Command::Decode {
            i1,
            i2,
            delta,
            no_correction,
        } => {
            let codec = codec_for(cfg, *delta)?.with_range_check(!no_correction);
            let d = decode_pair(&cfg.params(), &codec, *i1, *i2)?;
            format!(
                "vgs_hat={} vds_hat_1={} vds_hat_2={} corrected={} in_range={}",
                d.vgs_hat, d.vds_hat_1, d.vds_hat_2, d.corrected, d.in_range
            )
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("ajscc: configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cfg.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("ajscc: cannot start {n} workers: {e}");
            return ExitCode::FAILURE;
        }
    }
    let mut out = Outputs::new(cfg.output_dir.clone());
    match run(&cli, &cfg, &mut out).and_then(|summary| {
        out.commit()?;
        Ok(summary)
    }) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            out.discard();
            eprintln!("ajscc: {e}");
            ExitCode::FAILURE
        }
    }
}
