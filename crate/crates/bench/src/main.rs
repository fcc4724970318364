use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fiba_bench::{emit_stats, generate, run_replay, run_synthetic, with_agg, AggName, BenchError, GeneratorConfig, Mode, ReplayConfig, TsUnit, WorkloadSpec};

#[derive(Parser)]
#[command(name = "bench", about = "Sliding-window aggregation benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time bulk operations on a synthetic window.
    Synthetic {
        #[arg(long, default_value_t = 1 << 20)]
        window_size: usize,
        #[arg(long, default_value_t = 1 << 10)]
        bulk_size: usize,
        #[arg(long, default_value_t = 0)]
        ooo_distance: usize,
        #[arg(long, value_enum, default_value_t = AggName::Sum)]
        agg: AggName,
        #[arg(long, value_enum, default_value_t = Mode::Evict)]
        mode: Mode,
        #[arg(long, default_value_t = 4)]
        min_arity: usize,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Use loops of single inserts and evicts instead of bulks.
        #[arg(long)]
        emulate_loop: bool,
        /// Stats CSV destination. Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a timestamped CSV through a time-based window.
    Replay {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        window_duration: u64,
        #[arg(long, value_enum, default_value_t = AggName::Sum)]
        agg: AggName,
        /// Write `{PREFIX}_n.csv`, `{PREFIX}_m.csv` and `{PREFIX}_d.csv`.
        #[arg(long)]
        hist_out: Option<String>,
        #[arg(long, default_value = "timestamp")]
        ts_col: String,
        #[arg(long, default_value = "value")]
        val_col: String,
        #[arg(long, value_enum, default_value_t = TsUnit::Us)]
        ts_unit: TsUnit,
        #[arg(long, default_value_t = 4)]
        min_arity: usize,
    },
    /// Write a bursty out-of-order `timestamp,value` CSV.
    Generate {
        #[arg(long, default_value_t = 1_000_000)]
        rows: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.cmd {
        Cmd::Synthetic {
            window_size,
            bulk_size,
            ooo_distance,
            agg,
            mode,
            min_arity,
            iters,
            seed,
            emulate_loop,
            out,
        } => {
            let spec = WorkloadSpec {
                window_size,
                bulk_size,
                ooo_distance,
                agg,
                mode,
                min_arity,
                iters,
                seed,
                emulate: emulate_loop,
            };
            let res = run_synthetic(&spec)?;
            let text = emit_stats(&res.records, &res.summaries)?;
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => io::stdout().write_all(text.as_bytes())?,
            }
        }
        Cmd::Replay {
            input,
            window_duration,
            agg,
            hist_out,
            ts_col,
            val_col,
            ts_unit,
            min_arity,
        } => {
            let cfg = ReplayConfig {
                window_duration,
                ts_col,
                val_col,
                ts_unit,
                min_arity,
            };
            let file = BufReader::new(File::open(&input)?);
            let rep = with_agg!(agg, m => run_replay(m, file, &cfg))?;
            let s = rep.summary;
            println!("rows={} skipped={}", rep.rows, rep.skipped);
            println!(
                "mean_ns={:.1} median_ns={} p99.9_ns={} p99.999_ns={} throughput_per_s={:.1}",
                s.mean, s.median, s.p99_9, s.p99_999, s.throughput
            );
            if let Some(prefix) = hist_out {
                for (tag, h) in [("n", &rep.window), ("m", &rep.bulk), ("d", &rep.distance)] {
                    std::fs::write(format!("{prefix}_{tag}.csv"), h.to_csv()?)?;
                }
            }
        }
        Cmd::Generate { rows, seed, out } => {
            let w = BufWriter::new(File::create(out)?);
            generate(&GeneratorConfig::new(rows, seed), w)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
