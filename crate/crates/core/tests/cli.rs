use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_tsaga");

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(
        &path,
        format!(
            "seed = 3\nrounds = 6\ndevices = 2\nsamples_per_device = 60\nsynthetic_features = 10\n\
             synthetic_classes = 3\nsynthetic_test = 100\nchannel_ratio = 1.0\nsparsity_ratio = 0.3\n\
             sigma_e = 0.0\nem_warmup = 2\nt0_window = 2\nse_population = 2000\nse_samples = 2000\n\
             se_rounds = 2\nbound_dim = 32\nbound_devices = 2\nbound_seeds = 2\n{extra}"
        ),
    )
    .unwrap();
    path
}

#[test]
fn run_writes_outputs_and_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let st = Command::new(BIN)
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--rounds", "4", "--variant", "memoryless", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    let rounds = fs::read_to_string(out.join("rounds.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(rounds.as_bytes());
    assert_eq!(rdr.records().count(), 4);
    let config: serde_json::Value = serde_json::from_slice(&fs::read(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["config"]["variant"], "memoryless");
    assert_eq!(config["config"]["rounds"], 4);
    for f in ["params.csv", "timing.csv", "shards.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let diverged = rounds.lines().skip(1).any(|l| l.split(',').nth(14) == Some("true"));
    assert_eq!(st.status.success(), !diverged, "{}", String::from_utf8_lossy(&st.stderr));
}

#[test]
fn same_seed_gives_identical_rounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let mut files = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("o{i}"));
        Command::new(BIN).args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
        files.push(fs::read(out.join("rounds.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn bad_config_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "no_such_key = 1\n");
    let st = Command::new(BIN).args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!st.status.success());
    assert!(String::from_utf8_lossy(&st.stderr).contains("no_such_key"));
    let st = Command::new(BIN).args(["run", "--config"]).arg(&cfg).args(["--variant", "bogus"]).output().unwrap();
    assert!(!st.status.success());
}

#[test]
fn se_and_bound_write_stable_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let header = "round,i,tau,v,tau_star,v_star,kappa,bound,empirical_gap";
    let out = dir.path().join("se");
    let st = Command::new(BIN).args(["se", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let se = fs::read_to_string(out.join("se.csv")).unwrap();
    assert_eq!(se.lines().next(), Some(header));
    assert!(se.lines().count() > 2);

    let out = dir.path().join("bound");
    let st = Command::new(BIN)
        .args(["bound", "--config"])
        .arg(&cfg)
        .args(["--rounds", "5", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let b = fs::read_to_string(out.join("bound.csv")).unwrap();
    assert_eq!(b.lines().next(), Some(header));
    assert_eq!(b.lines().count(), 6);
}
