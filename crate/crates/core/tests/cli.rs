use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn memmon(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_memmon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec![
        sub,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = memmon(&args);
    assert!(
        o.status.success(),
        "{sub} failed: {}\n{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|f| f.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

fn manifest_checksums(dir: &Path) -> Vec<(String, String)> {
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            (
                f["name"].as_str().unwrap().to_string(),
                f["sha256"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("experiment.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn nonselective_markov_population_follows_exponential_decay() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok("nonselective", &config_path("markov_qubit.toml"), tmp.path(), &[]);
    let (header, rows) = read_csv(&tmp.path().join("nonselective.csv"));
    let (t, pop) = (column(&header, "time"), column(&header, "population"));
    assert_eq!(rows.len(), 301);
    for row in &rows {
        let exact = (-row[t]).exp();
        assert!(
            (row[pop] - exact).abs() <= 0.02 * exact,
            "t = {}: {} vs {exact}",
            row[t],
            row[pop]
        );
    }
}

#[test]
fn trajectory_csv_has_the_fixed_schema() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(
        "trajectory",
        &config_path("exponential_qubit.toml"),
        tmp.path(),
        &["--format", "csv"],
    );
    let (header, rows) = read_csv(&tmp.path().join("trajectory.csv"));
    let expected = [
        "step",
        "time",
        "re_xi",
        "im_xi",
        "weight",
        "purity",
        "rho_re_00",
        "rho_im_00",
        "rho_re_01",
        "rho_im_01",
        "rho_re_10",
        "rho_im_10",
        "rho_re_11",
        "rho_im_11",
    ];
    assert_eq!(header, expected);
    assert_eq!(rows.len(), 101);
    assert!(rows[0][2].is_nan() && rows[1][2].is_finite());
    for row in &rows {
        assert!((row[6] + row[12] - 1.0).abs() < 1e-12);
    }
    assert!(!tmp.path().join("trajectory.json").exists());
    for name in ["record.txt", "conditional_states.txt", "manifest.json"] {
        assert!(tmp.path().join(name).exists(), "{name}");
    }
}

#[test]
fn same_config_and_seed_give_identical_checksums() {
    let config = config_path("exponential_qubit.toml");
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    run_ok("trajectory", &config, a.path(), &[]);
    run_ok("trajectory", &config, b.path(), &["--threads", "1"]);
    run_ok("trajectory", &config, c.path(), &["--seed", "8"]);
    let (ma, mb, mc) = (
        manifest_checksums(a.path()),
        manifest_checksums(b.path()),
        manifest_checksums(c.path()),
    );
    assert_eq!(ma, mb);
    assert_eq!(ma.len(), 4);
    let trajectory = |m: &[(String, String)]| m.iter().find(|f| f.0 == "trajectory.csv").unwrap().1.clone();
    assert_ne!(trajectory(&ma), trajectory(&mc));
    for (name, sha) in &ma {
        let bytes = fs::read(a.path().join(name)).unwrap();
        assert_eq!(&hex::encode(<sha2::Sha256 as sha2::Digest>::digest(&bytes)), sha);
    }
}

#[test]
fn ensemble_agrees_with_nonselective_and_is_thread_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        &fs::read_to_string(config_path("exponential_qubit.toml"))
            .unwrap()
            .replace("steps = 100", "steps = 40"),
    );
    let (one, many) = (tmp.path().join("one"), tmp.path().join("many"));
    run_ok("ensemble", &config, &one, &["--threads", "1"]);
    run_ok("ensemble", &config, &many, &["--threads", "4"]);
    assert_eq!(manifest_checksums(&one), manifest_checksums(&many));
    let (header, rows) = read_csv(&one.join("ensemble.csv"));
    let (d, se) = (column(&header, "trace_distance"), column(&header, "trace_distance_se"));
    assert_eq!(rows.len(), 41);
    for row in &rows {
        assert!(
            row[d] <= 5.0 * row[se] + 1e-12,
            "step {}: {} > 5 x {}",
            row[0],
            row[d],
            row[se]
        );
    }
    let (_, finals) = read_csv(&one.join("ensemble_final_states.csv"));
    let order: Vec<f64> = finals.iter().map(|r| r[0]).collect();
    assert_eq!(order, (0..1000).map(f64::from).collect::<Vec<_>>());
}

#[test]
fn json_format_mirrors_csv_columns() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(
        "nonselective",
        &config_path("markov_qubit.toml"),
        tmp.path(),
        &["--format", "json"],
    );
    let v: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("nonselective.json")).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["columns"][2], "population");
    assert_eq!(v["rows"].as_array().unwrap().len(), 301);
    assert!(!tmp.path().join("nonselective.csv").exists());
}

#[test]
fn factorize_writes_kernel_for_correlation_input() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config_path("markov_qubit.toml"))
        .unwrap()
        .replace(
            "markov = { gamma = 1.0 }",
            "correlation = { samples = [[1.25, 0], [0.5, 0]] }",
        )
        .replace("memory_bins = 1", "memory_bins = 2")
        .replace("dt = 0.01", "dt = 1.0");
    let config = write_config(tmp.path(), &text);
    let stdout = run_ok("factorize", &config, &tmp.path().join("out"), &[]);
    assert!(stdout.contains("residual"), "{stdout}");
    let (header, rows) = read_csv(&tmp.path().join("out/kernel.csv"));
    let k = column(&header, "re_kappa");
    assert!((rows[0][k] - 1.0).abs() < 1e-8 && (rows[1][k] - 0.5).abs() < 1e-8);
    let kernel =
        memmon::kernel::CouplingKernel::from_text(&fs::read_to_string(tmp.path().join("out/kernel.txt")).unwrap())
            .unwrap();
    assert_eq!(kernel.len(), 2);
}

#[test]
fn validate_passes_on_sample_configs() {
    for name in ["markov_qubit.toml", "exponential_qubit.toml"] {
        let tmp = tempfile::tempdir().unwrap();
        let stdout = run_ok("validate", &config_path(name), tmp.path(), &[]);
        assert!(!stdout.contains("FAIL"), "{stdout}");
        assert!(stdout.contains("PASS monitor::girsanov_identity"), "{stdout}");
        assert!(tmp.path().join("validate.json").exists());
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config_path("markov_qubit.toml"))
        .unwrap()
        .replace("[kernel]", "[ketnel]");
    let config = write_config(tmp.path(), &text);
    let o = memmon(&[
        "trajectory",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("ketnel") && stderr.contains("line"), "{stderr}");
    assert!(!tmp.path().join("o").exists(), "no output before validation succeeds");
}

#[test]
fn exit_codes_distinguish_config_and_runtime_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = memmon(&[
        "nonselective",
        "--config",
        tmp.path().join("absent.toml").to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("absent.toml"));

    let bad_flag = memmon(&["nonselective", "--config"]);
    assert_eq!(bad_flag.status.code(), Some(1));

    // an output path that is a regular file cannot become a directory
    let blocker = tmp.path().join("blocker");
    fs::write(&blocker, "x").unwrap();
    let config = config_path("markov_qubit.toml");
    let o = memmon(&[
        "nonselective",
        "--config",
        config.to_str().unwrap(),
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("blocker"));
}

#[test]
fn library_entry_point_matches_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let config = config_path("markov_qubit.toml");
    let code = memmon::cli::main_with_args([
        "memmon",
        "nonselective",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("lib").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    run_ok("nonselective", &config, &tmp.path().join("bin"), &[]);
    assert_eq!(
        manifest_checksums(&tmp.path().join("lib")),
        manifest_checksums(&tmp.path().join("bin"))
    );
}
