use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dyndtn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyndtn"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const CYLINDER: &str = r#"{
    "mesh": {"generator": "disk", "h": 0.25},
    "family": {"preset": "laplace_shift", "lambda": -1},
    "T": 1, "dt": 0.1,
    "initial": "cos_theta",
    "forcing": [{"space": "const:1", "time": "decay_exp:1"}, {"space": "sin_theta", "time": "const:0.5"}]
}"#;

#[test]
fn identity_motion_reproduces_cylinder_bytewise() {
    let dir = tempfile::tempdir().unwrap();
    let cyl = write_config(dir.path(), "cyl.json", CYLINDER);
    let moving = CYLINDER
        .replace("laplace_shift", "motion")
        .replace("\"T\"", "\"motion\": {\"preset\": \"identity\"}, \"T\"");
    let ident = write_config(dir.path(), "ident.json", &moving);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = dyndtn(&a, &["evolve", "--config", &cyl]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = dyndtn(&b, &["noncyl-evolve", "--config", &ident]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv_a = fs::read(a.join("series.csv")).unwrap();
    let csv_b = fs::read(b.join("series.csv")).unwrap();
    assert_eq!(csv_a.iter().filter(|&&c| c == b'\n').count(), 12);
    assert_eq!(csv_a, csv_b);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = CYLINDER.replace(
        "\"initial\"",
        "\"output\": {\"vtk\": \"u\", \"snapshot_every\": 5}, \"verify\": {\"adjoint\": true, \"trials\": 3}, \"initial\"",
    );
    let cfg = write_config(dir.path(), "c.json", &text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = dyndtn(d, &["evolve", "--config", &cfg, "--seed", "7"]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for name in ["series.csv", "adjoint.csv", "summary.json", "u_000000.vtk", "u_000005.vtk", "u_000010.vtk"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn decay_scenario_meets_the_mode_decay_oracle() {
    // u0 = cos(theta), f = 0 on the unit disk: the harmonic representative
    // decays like exp(-mu_1 t) with H1 norm sqrt(pi mu_1).
    let mu1 = dyndtn::oracle::disk_dtn_eigenvalue(-1.0, 1).unwrap();
    let t_end = 2.0;
    let exact = (-mu1 * t_end).exp() * (std::f64::consts::PI * mu1).sqrt();
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{
            "mesh": {{"generator": "disk", "h": 0.1}},
            "family": {{"preset": "laplace_shift", "lambda": -1}},
            "T": {t_end}, "dt": 0.01, "initial": "cos_theta",
            "thresholds": {{"dist_h1_to_uinf": {}}}
        }}"#,
        1.05 * exact
    );
    let cfg = write_config(dir.path(), "decay.json", &text);
    let out = dyndtn(dir.path(), &["evolve", "--config", &cfg]);
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("\"terminal_distance\": true"));
    let csv = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let last: f64 = csv.lines().last().unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!((last / exact - 1.0).abs() < 0.05, "{last} vs {exact}");
}

#[test]
fn failed_threshold_gives_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = CYLINDER.replace("\"initial\"", "\"thresholds\": {\"dist_h1_to_uinf\": 1e-12}, \"initial\"");
    let cfg = write_config(dir.path(), "c.json", &text);
    let out = dyndtn(dir.path(), &["evolve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("\"terminal_distance\": false"));
}

#[test]
fn invalid_config_names_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = CYLINDER.replace("\"dt\": 0.1", "\"dt\": 0").replace("cos_theta", "cos_phi");
    let cfg = write_config(dir.path(), "bad.json", &text);
    let out = dyndtn(dir.path(), &["evolve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("dt:") && err.contains("initial:"), "{err}");
}

#[test]
fn evolve_and_noncyl_evolve_are_not_interchangeable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cyl.json", CYLINDER);
    let out = dyndtn(dir.path(), &["noncyl-evolve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_coercivity_writes_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let text = CYLINDER.replace("\"T\": 1", "\"T\": 0");
    let cfg = write_config(dir.path(), "v.json", &text);
    let out = dyndtn(dir.path(), &["verify", "coercivity", "--config", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("\"coercivity\": true"));
    let table = fs::read_to_string(dir.path().join("coercivity.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    for line in table.lines().skip(1) {
        let c: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((c - 1.0).abs() < 1e-8);
    }
    assert!(!dir.path().join("series.csv").exists());
}

#[test]
fn dtn_matrix_is_square_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", CYLINDER);
    let out = dyndtn(dir.path(), &["dtn-matrix", "--config", &cfg, "--time", "inf"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("dtn_matrix.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert!(rows.iter().all(|r| r.len() == rows.len()));
    let n = rows.len();
    // constants are mapped to a positive multiple of the boundary mass
    let row_sum: f64 = rows[0].iter().sum();
    assert!(row_sum > 0.0);
    for i in 0..n {
        for j in 0..n {
            assert!((rows[i][j] - rows[j][i]).abs() <= 1e-12 * rows[i][i].abs());
        }
    }
}

#[test]
fn stationary_writes_boundary_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", CYLINDER);
    let out = dyndtn(dir.path(), &["stationary", "--config", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("stationary.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("vertex,x,y,u"));
    // f_inf = 0.5 M sin(theta): u_inf = 0.5 sin(theta) / mu_1 on the unit circle
    let mu1 = dyndtn::oracle::disk_dtn_eigenvalue(-1.0, 1).unwrap();
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let expected = 0.5 * v[2].atan2(v[1]).sin() / mu1;
        assert!((v[3] - expected).abs() < 0.05, "{line}");
    }
}

#[test]
fn oracle_disk_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dyndtn(dir.path(), &["oracle", "disk", "--lambda", "-1", "--kmax", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,mu_k");
    assert_eq!(lines.len(), 4);
    // mu_0 = I_1(1) / I_0(1)
    let mu0: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((mu0 - 0.44639).abs() < 1e-4);
}

#[test]
fn mesh_gen_then_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dyndtn(dir.path(), &["mesh", "gen", "--generator", "square", "--n", "4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("triangles 32"));
    let path = dir.path().join("mesh.txt");
    let out = dyndtn(dir.path(), &["mesh", "check", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("boundary_vertices 16"));

    let broken = fs::read_to_string(&path).unwrap().replacen("t 0 ", "t 999 ", 1);
    fs::write(&path, broken).unwrap();
    let out = dyndtn(dir.path(), &["mesh", "check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
