use std::path::Path;
use std::process::Command;

fn sybilsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sybilsim")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.conf");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn sweep_writes_csv_with_plot_columns() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(
        dir.path(),
        "experiment.t_values = 0, 2^6\nexperiment.runs = 2\nexperiment.sim_seconds = 200\nexperiment.defenses = togcom,remp-1e4\n",
    );
    let out = dir.path().join("out");
    let o = sybilsim(&["sweep", "--config", &conf, "--out", out.to_str().unwrap(), "--emit-plot-data"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("avt_sweep_gnutella.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "defense,T,mean_A,sd_A,mean_T_spent,valid_runs,runs,valid,log2_T,log2_A");
    assert_eq!(lines.count(), 4);
    assert!(csv.contains("remp-1e4,64,170000,"));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "experiment.t_values = 2^8\nexperiment.runs = 1\nexperiment.sim_seconds = 150\nexperiment.defenses = togcom,ccom\n");
    let read = |name: &str| {
        let out = dir.path().join(name);
        let o = sybilsim(&["sweep", "--config", &conf, "--seed", "9", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        std::fs::read(out.join("avt_sweep_gnutella.csv")).unwrap()
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn run_writes_timeseries_and_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "experiment.sim_seconds = 120\nadversary.rate = 256\ndefense.name = togcom\n");
    let out = dir.path().join("out");
    let o = sybilsim(&["run", "--config", &conf, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ts = std::fs::read_to_string(out.join("single_run_gnutella.csv")).unwrap();
    assert!(ts.starts_with("time,n_system,bad_fraction,jg_estimate,alg_spend_rate,adv_spend_rate\n"));
    let times: Vec<f64> = ts.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
    assert!((1..=120).all(|k| times.contains(&(k as f64))));
    let it = std::fs::read_to_string(out.join("single_run_iterations_gnutella.csv")).unwrap();
    assert!(it.starts_with("iteration,start,length,alg_entrance,alg_purge,adv_entrance,adv_purge\n"));
}

#[test]
fn gmcom_failure_and_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "experiment.x_values = 1, 2^10\nexperiment.epochs = 20\nexperiment.runs = 1\n");
    let out = dir.path().join("out");
    let o = sybilsim(&["gmcom-failure", "--config", &conf, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("gmcom_failure_gnutella.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    let conf = write_config(dir.path(), "experiment.network = ethereum\nexperiment.epochs = 20\nexperiment.runs = 1\n");
    let o = sybilsim(&["assumptions", "--config", &conf, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("assumptions_ethereum.csv")).unwrap();
    assert!(csv.starts_with("network,a1_low,a1_high,a2_low,a2_high\nethereum,"));
    assert!(out.join("assumptions_derived_ethereum.csv").exists());
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "experiment.runs = 0\n");
    let o = sybilsim(&["sweep", "--config", &conf, "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("runs"));

    let conf = write_config(dir.path(), "experiment.kind = assumptions\n");
    let o = sybilsim(&["sweep", "--config", &conf]);
    assert!(!o.status.success());

    let conf = write_config(dir.path(), "bogus.key = 1\n");
    let o = sybilsim(&["heuristics", "--config", &conf]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key `bogus.key`"));

    let o = sybilsim(&["sweep", "--config", "/nonexistent/exp.conf"]);
    assert!(!o.status.success());
}
