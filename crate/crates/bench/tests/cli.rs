use std::process::Command;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bench"))
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("fiba-bench-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn synthetic_writes_stats_csv() {
    let out = scratch("stats.csv");
    let status = bench()
        .args(["synthetic", "--window-size", "2000", "--bulk-size", "16", "--ooo-distance", "40"])
        .args(["--agg", "concat", "--mode", "both", "--min-arity", "3", "--iters", "25", "--seed", "1"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let recs = fiba_bench::parse_stats(&text).unwrap();
    assert_eq!(recs.len(), 50);
    assert_eq!(text.lines().filter(|l| l.starts_with('#')).count(), 2);
}

#[test]
fn synthetic_rejects_distance_beyond_window() {
    let out = bench()
        .args(["synthetic", "--window-size", "10", "--ooo-distance", "11", "--iters", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds window size"));
}

#[test]
fn generate_then_replay_with_histograms() {
    let csv = scratch("events.csv");
    assert!(bench()
        .args(["generate", "--rows", "20000", "--seed", "3", "--out"])
        .arg(&csv)
        .status()
        .unwrap()
        .success());
    let prefix = scratch("hist");
    let out = bench()
        .args(["replay", "--window-duration", "5000", "--agg", "bloom", "--input"])
        .arg(&csv)
        .arg("--hist-out")
        .arg(&prefix)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("rows=20000 skipped=0"));
    for tag in ["n", "m", "d"] {
        let h = std::fs::read_to_string(format!("{}_{tag}.csv", prefix.display())).unwrap();
        assert!(h.starts_with("bin_lo,bin_hi,count\n0,1,"));
        let total: u64 = h.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
        assert_eq!(total, 20000);
    }
}
