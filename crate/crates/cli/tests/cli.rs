//! Smoke tests of the `ald` binary.

use std::path::Path;
use std::process::{Command, Output};

fn ald(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ald"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Small two-variant dimension sweep writing into `dir`.
fn small_sweep(dir: &Path) -> String {
    format!(
        r#"
experiment = "fig2_bias_vs_dim"

[target]
weights = [0.75, 0.25]
means = [{{ kind = "zero" }}, {{ kind = "sparse", entries = [[1, 4.0]] }}]
variance = {{ kind = "power_law", scale = 1.0, exponent = 1.25 }}
tau = [1.2, 1.0]

[[variants]]
name = "green"
gamma = {{ kind = "power_law", scale = 1.0, exponent = 1.5 }}
c_base = {{ kind = "power_law", scale = 1.0, exponent = 2.7 }}

[[variants]]
name = "red"
gamma = {{ kind = "constant", value = 1.0 }}
c_base = {{ kind = "constant", value = 1.0 }}

[schedule]
n_steps = 60
dt = 9e-3
s_half = 2.0

[sampling]
n_chains = 60
n_target_samples = 60
k = [5]
repeats = 1
seed = 7

[sweep]
d = [1, 3]

[output]
csv = "{0}/sweep.csv"
plot_script = "{0}/sweep_plot.py"
cache_dir = "{0}/cache"
"#,
        dir.display()
    )
}

#[test]
fn schedule_prints_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&ald(&["schedule", "--n", "5", "--dt", "0.1", "--s", "2"], dir.path()));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "k,t,theta,kappa");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0,0,4,"), "{}", lines[1]);
    assert!(lines[5].starts_with("4,"), "{}", lines[5]);
    assert!(lines[5].contains(",0,"), "theta ends at zero: {}", lines[5]);
}

#[test]
fn kl_reads_sample_files() {
    let dir = tempfile::tempdir().unwrap();
    let p: String = (0..200).map(|i| format!("{}, {}\n", (i % 17) as f64 * 0.1, (i % 13) as f64 * 0.2)).collect();
    std::fs::write(dir.path().join("p.csv"), format!("# two columns\n{p}")).unwrap();
    std::fs::write(dir.path().join("q.txt"), p.replace(',', " ")).unwrap();
    let out = ok(&ald(&["kl", "--p", "p.csv", "--q", "q.txt", "--k", "3"], dir.path()));
    assert!(out.starts_with("kl="), "{out}");
    assert!(out.contains("k=3 n=200 m=200 dim=2"), "{out}");
}

#[test]
fn run_is_resumable_and_bounds_and_plot_work() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    std::fs::write(&config, small_sweep(dir.path())).unwrap();
    let cfg = config.to_str().unwrap();

    ok(&ald(&["run", cfg], dir.path()));
    let csv = dir.path().join("sweep.csv");
    let first = std::fs::read_to_string(&csv).unwrap();
    assert!(first.starts_with("experiment,variant,d,k,seed,repeat,kl,steps,wall_time_s\n"));
    assert_eq!(first.lines().count(), 1 + 2 * 2);
    assert!(std::fs::read_dir(dir.path().join("cache")).unwrap().count() >= 4);

    // second run is served from the cache and must reproduce the file
    ok(&ald(&["run", cfg], dir.path()));
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), first);

    let out = ok(&ald(&["bounds", cfg], dir.path()));
    assert!(out.contains("sweep_bounds.csv"), "{out}");
    let report = std::fs::read_to_string(dir.path().join("sweep_bounds.txt")).unwrap();
    assert!(report.contains("== green =="), "{report}");

    let script = dir.path().join("again.py");
    ok(&ald(&["plot", csv.to_str().unwrap(), script.to_str().unwrap()], dir.path()));
    assert!(std::fs::read_to_string(script).unwrap().contains("LOG_FLOOR"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, small_sweep(dir.path()).replace("repeats = 1", "repeats = 1\nrepeat = 2")).unwrap();
    let out = ald(&["run", config.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("repeat"));
}

#[test]
fn robustness_without_cached_batches_names_the_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("sweep.toml");
    std::fs::write(&source, small_sweep(dir.path())).unwrap();
    let robustness = small_sweep(dir.path())
        .replace("fig2_bias_vs_dim", "knn_robustness")
        .replace("sweep.csv", "robustness.csv")
        + &format!("\n[robustness]\nsources = [\"{}\"]\nk = [3, 5]\n", source.display());
    let config = dir.path().join("robustness.toml");
    std::fs::write(&config, robustness).unwrap();
    let out = ald(&["run", config.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no cached batch") && err.contains("ald run"), "{err}");

    ok(&ald(&["run", source.to_str().unwrap()], dir.path()));
    ok(&ald(&["run", config.to_str().unwrap()], dir.path()));
    let rows = std::fs::read_to_string(dir.path().join("robustness.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 2);
    assert!(rows.contains("fig2_bias_vs_dim/green"));
}
