use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::BenchError;

/// Shape of a generated event stream. Times are in ticks.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub rows: usize,
    pub seed: u64,
    /// Largest number of events in one burst.
    pub burst_max: usize,
    /// Largest clock advance between bursts.
    pub gap_max: u64,
    /// Largest clock advance between events inside a burst.
    pub jitter_max: u64,
    /// Fraction of events stamped behind the clock.
    pub late_fraction: f64,
    /// Largest lateness of a late event.
    pub lateness_max: u64,
}

impl GeneratorConfig {
    pub fn new(rows: usize, seed: u64) -> Self {
        GeneratorConfig {
            rows,
            seed,
            burst_max: 2000,
            gap_max: 3000,
            jitter_max: 1,
            late_fraction: 0.05,
            lateness_max: 4000,
        }
    }

    /// A window duration that keeps a few bursts live at once.
    pub fn suggested_window(&self) -> u64 {
        5000
    }
}

/// Writes a `timestamp,value` CSV of bursty, partly out-of-order events.
pub fn generate<W: Write>(cfg: &GeneratorConfig, out: W) -> Result<(), BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "value"])?;
    // start far enough in that late events never go negative
    let mut clock = cfg.lateness_max + 1;
    let mut written = 0;
    while written < cfg.rows {
        let burst = rng.random_range(1..=cfg.burst_max).min(cfg.rows - written);
        for _ in 0..burst {
            clock += rng.random_range(0..=cfg.jitter_max);
            let t = if rng.random_bool(cfg.late_fraction) {
                clock - rng.random_range(1..=cfg.lateness_max)
            } else {
                clock
            };
            let v: u32 = rng.random_range(0..1000);
            w.write_record([t.to_string(), v.to_string()])?;
        }
        written += burst;
        clock += rng.random_range(1..=cfg.gap_max);
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_count_and_determinism() {
        let cfg = GeneratorConfig::new(5000, 9);
        let mut a = Vec::new();
        let mut b = Vec::new();
        generate(&cfg, &mut a).unwrap();
        generate(&cfg, &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(String::from_utf8(a).unwrap().lines().count(), 5001);
    }
}
