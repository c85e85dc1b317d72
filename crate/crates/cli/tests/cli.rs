use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mca(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mca"))
        .args(args)
        .current_dir(dir)
        .env_remove("MCA_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_column(path: &Path, col: usize) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn help_documents_precedence() {
    let d = tempfile::tempdir().unwrap();
    let o = mca(d.path(), &["sdof", "--help"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("Precedence"));
}

#[test]
fn usage_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        &["sdof", "--bogus"][..],
        &["sdof", "--k", "0"],
        &["sdof", "--m", "abc"],
        &["sdof", "--scheme", "sideways"],
        &["verify-identities", "--alpha", "1.0", "--kind", "CONV_COMPLEMENTARY"],
        &["actions"],
        &["mdof", "--u0", "1,2"],
    ] {
        let o = mca(d.path(), args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn tampered_identity_exits_two_with_location() {
    let d = tempfile::tempdir().unwrap();
    let o = mca(d.path(), &["verify-identities", "--tamper-lhs"]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    for part in ["identities", "ibp_residual", "t = 1", "n = 64"] {
        assert!(e.contains(part), "{e}");
    }
}

#[test]
fn fractional_identities_pass() {
    let d = tempfile::tempdir().unwrap();
    let o = mca(d.path(), &["verify-identities", "--kind", "INNER_INTEGRAL,INNER_DERIV,CONV_COMPLEMENTARY"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(d.path().join("identities_seed42.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "kind,alpha,h,lhs,rhs,residual,order_estimate");
    assert_eq!(csv.lines().count(), 1 + 3 * 3 * 3);
}

#[test]
fn singular_solve_exits_two_with_location() {
    let d = tempfile::tempdir().unwrap();
    let o = mca(d.path(), &["sdof", "--k", "1e-30", "--n", "16"]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    for part in ["stationarity", "solve_stationary", "t = 10", "n = 16"] {
        assert!(e.contains(part), "{e}");
    }
}

#[test]
fn sdof_schemes_agree_with_oracle() {
    let d = tempfile::tempdir().unwrap();
    for scheme in ["reduced", "direct"] {
        let o = mca(d.path(), &["sdof", "--n", "256", "--scheme", scheme]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        for suffix in ["solution", "oracle", "residuals"] {
            assert!(d.path().join(format!("sdof_{scheme}_n256_{suffix}.csv")).exists());
        }
    }
    let r = read_column(&d.path().join("sdof_reduced_n256_solution.csv"), 1);
    let x = read_column(&d.path().join("sdof_direct_n256_solution.csv"), 1);
    let o = read_column(&d.path().join("sdof_reduced_n256_oracle.csv"), 1);
    let gap = r.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let err_r = r.iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let err_x = x.iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err_r < 1e-3, "{err_r}");
    assert!(gap <= err_r + err_x, "{gap}");
}

#[test]
fn tonti_defect_is_reported() {
    let d = tempfile::tempdir().unwrap();
    let o = mca(d.path(), &["actions", "--kind", "tonti"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let v: f64 = out
        .split("momentum_initial = ")
        .nth(1)
        .unwrap()
        .split(';')
        .next()
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((v - 0.1).abs() < 1e-8, "{out}");
    assert!(d.path().join("actions_tonti_n512.csv").exists());
}

#[test]
fn actions_reads_a_trajectory_file() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&mca(d.path(), &["sdof", "--n", "64"])), 0);
    let o = mca(d.path(), &["actions", "--kind", "mca_sdof", "--trajectory", "sdof_reduced_n64_solution.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("MCA_SDOF n = 64"));
}

#[test]
fn mdof_presets_run() {
    let d = tempfile::tempdir().unwrap();
    let o = mca(d.path(), &["mdof", "--n", "64"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(d.path().join("mdof_three-story_reduced_n64_solution.csv").exists());
    let o = mca(d.path(), &["mdof", "--preset", "bar", "--n", "32"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn convergence_table_shape() {
    let d = tempfile::tempdir().unwrap();
    let o = mca(d.path(), &["convergence", "--n", "32,64,128"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(d.path().join("convergence_sdof_reduced.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,h,err_u_sup,err_u_l2,err_J_sup,err_J_l2,order_u,order_J,wall_ms");
    assert_eq!(lines.len(), 4);
    let last: Vec<&str> = lines[3].split(',').collect();
    assert!(!last[6].is_empty() && !last[7].is_empty());
    assert!(last[8].is_empty());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["verify-identities", "--kind", "CONV_LEFT", "--seed", "7"],
        &["convergence", "--n", "32,64,128", "--forcing", "harmonic"],
        &["actions", "--kind", "gurtin", "--n", "128"],
    ];
    for args in runs {
        mca(a.path(), args);
        mca(b.path(), args);
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for name in names {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn output_dir_precedence() {
    let d = tempfile::tempdir().unwrap();
    let run = |env: Option<&str>, args: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_mca"));
        c.args(args).current_dir(d.path()).env_remove("MCA_OUTPUT_DIR");
        if let Some(v) = env {
            c.env("MCA_OUTPUT_DIR", v);
        }
        assert!(c.output().unwrap().status.success());
    };
    run(Some("from_env"), &["sdof", "--n", "8"]);
    assert!(d.path().join("from_env/sdof_reduced_n8_solution.csv").exists());
    run(Some("from_env"), &["sdof", "--n", "8", "--output-dir", "from_flag"]);
    assert!(d.path().join("from_flag/sdof_reduced_n8_solution.csv").exists());
    fs::write(d.path().join("cfg.json"), r#"{"output_dir": "from_config"}"#).unwrap();
    run(Some("from_env"), &["sdof", "--n", "8", "--config", "cfg.json"]);
    assert!(d.path().join("from_config/sdof_reduced_n8_solution.csv").exists());
}

#[test]
fn config_keys_are_overridden_by_flags() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("cfg.json"), r#"{"n": 16, "scheme": "direct", "forcing": "pulse", "duration": 2.5}"#).unwrap();
    assert_eq!(code(&mca(d.path(), &["sdof", "--config", "cfg.json"])), 0);
    assert!(d.path().join("sdof_direct_n16_solution.csv").exists());
    assert_eq!(code(&mca(d.path(), &["sdof", "--config", "cfg.json", "--n", "8"])), 0);
    assert!(d.path().join("sdof_direct_n8_solution.csv").exists());
    fs::write(d.path().join("list.json"), r#"{"kind": ["CONV_LEFT"], "n": [16, 32, 64], "alpha": [0.5]}"#).unwrap();
    let o = mca(d.path(), &["verify-identities", "--config", "list.json", "--n", "32,64,128"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = fs::read_to_string(d.path().join("identities_seed42.csv")).unwrap();
    assert_eq!(rows.lines().count(), 4);
    assert!(rows.lines().nth(1).unwrap().contains(&format!("{:.16e}", 1.0 / 32.0)));
}

#[test]
fn bad_config_exits_one() {
    let d = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("unknown.json", r#"{"mass": 1.0}"#),
        ("type.json", r#"{"m": "heavy"}"#),
        ("nested.json", r#"{"m": {"value": 1}}"#),
        ("syntax.json", "{"),
        ("hook.json", r#"{"tamper_lhs": true}"#),
    ] {
        fs::write(d.path().join(name), body).unwrap();
        let cmd = if name == "hook.json" { "verify-identities" } else { "sdof" };
        let o = mca(d.path(), &[cmd, "--config", name]);
        assert_eq!(code(&o), 1, "{name}: {}", stderr(&o));
    }
    assert_eq!(code(&mca(d.path(), &["sdof", "--config", "missing.json"])), 1);
}
