use std::collections::HashSet;
use std::path::Path;
use std::process::{Command, Output};

fn ridgeshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ridgeshift")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Checks the strict-reader contract and returns header plus rows.
fn read_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    assert!(text.ends_with('\n') && !text.contains('\r'));
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let unique: HashSet<&String> = header.iter().collect();
    assert_eq!(unique.len(), header.len(), "duplicate header names");
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    for r in &rows {
        assert_eq!(r.len(), header.len());
        assert!(r.iter().all(|c| !c.is_empty()));
    }
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn boundary_risk_is_a_quarter() {
    let o = ridgeshift(&[
        "risk", "--kappa", "0.5", "--costheta", "1", "--snr", "1", "--lambda", "optimal", "--gamma", "0.25,1,4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let (header, rows) = read_csv(&text);
    assert_eq!(header.join(","), "gamma,kappa,costheta,lambda_used,B,V,R");
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r[6], "2.500000000e-1");
    }
    assert!(stderr(&o).starts_with("risk: 3 row(s)"));
}

#[test]
fn usage_errors_exit_1() {
    let o = ridgeshift(&["risk", "--gamma", "-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--gamma"));
    assert!(o.stdout.is_empty());

    let o = ridgeshift(&["risk", "--gamma", "1", "--kappa", "0.5", "--robust-q", "0.3", "--snr", "-2"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("--robust-q") && err.contains("--snr"), "{err}");

    assert_eq!(ridgeshift(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ridgeshift(&["risk", "--gamma", "1", "--nope"]).status.code(), Some(1));
}

#[test]
fn help_exits_0() {
    let o = ridgeshift(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in ["risk", "sweep", "phase", "mc", "whiten"] {
        assert!(stdout(&o).contains(sub));
    }
}

#[test]
fn solver_failure_exits_2() {
    let o = ridgeshift(&["sweep", "--max-iters", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("did not converge"));
    assert!(o.stdout.is_empty());
}

#[test]
fn write_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("r.csv");
    let o = ridgeshift(&["risk", "--gamma", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn mc_smoke_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let path = dir.path().join(name);
        let o = ridgeshift(&[
            "mc", "--dim", "32", "--n-seeds", "2", "--gamma", "0.5,2", "--seed", seed, "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).starts_with("mc: 2 gamma value(s) x 2 seeds at P = 32"));
        std::fs::read(&path).unwrap()
    };
    let a = run("a.csv", "17");
    let b = run("b.csv", "17");
    let c = run("c.csv", "18");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let (header, rows) = read_csv(std::str::from_utf8(&a).unwrap());
    assert_eq!(rows.len(), 2);
    assert_eq!(column(&header, &rows, "n_samples"), vec![64.0, 16.0]);
    assert!(column(&header, &rows, "R_stderr").iter().all(|s| s.is_finite()));
}

#[test]
fn sweep_reports_profiles() {
    let o = ridgeshift(&[
        "sweep", "--spectrum", "0.1,0.5,0.5;1,0.5,0.5", "--kappa", "1,1;1,0.5477225575051661;0.2,1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&stdout(&o));
    assert_eq!(
        header.join(","),
        "shift,gamma,kappa_1,kappa_2,costheta_1,costheta_2,lambda_used,B,V,R"
    );
    assert_eq!(rows.len(), 150);
    assert!(
        stderr(&o).contains("0=monotone_decreasing_in_N 1=interior_max 2=interior_min"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn phase_grid_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phase.csv");
    let o = ridgeshift(&["phase", "--kappa-grid", "0:1.5:31", "--costheta-grid", "0:1:21", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&path).unwrap();
    let (header, rows) = read_csv(&text);
    assert_eq!(header.join(","), "kappa,costheta,R0,Rinf,R_min,regime,boundary");
    assert_eq!(rows.len(), 31 * 21);
    // (1, 1) and (0.5, 1)
    let find = |k: &str, c: &str| rows.iter().find(|r| r[0] == k && r[1] == c).unwrap().clone();
    let star = find("1.000000000e0", "1.000000000e0");
    assert_eq!((star[4].as_str(), star[5].as_str()), ("0.000000000e0", "weak"));
    let edge = find("5.000000000e-1", "1.000000000e0");
    assert_eq!((edge[4].as_str(), edge[5].as_str(), edge[6].as_str()), ("2.500000000e-1", "boundary", "1"));
}

#[test]
fn whiten_fig5_caption() {
    // kappa_+^2 = 0.6, kappa_- = 1, all aligned: kappa_eff^2 = (1 + 0.6) / 2
    let o = ridgeshift(&["whiten", "--spectrum", "0.1,0.5,0.5;1,0.5,0.5", "--kappa", &format!("1,{}", 0.6f64.sqrt())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&stdout(&o));
    let k = column(&header, &rows, "kappa_eff")[0];
    assert!((k - 0.8f64.sqrt()).abs() < 1e-9);
    // the overlap is averaged, not the angle
    let c = column(&header, &rows, "costheta_eff")[0];
    assert!((c - (1.0 + 0.6f64.sqrt()) / (2.0 * 0.8f64.sqrt())).abs() < 1e-9);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("fig2.conf");
    std::fs::write(&conf, "# figure 2a\nkappa = 1;0.75;0.5;0.25;0\ngamma = 0.01,1,100\nthreads = 2\n").unwrap();
    let o = ridgeshift(&["risk", "--config", conf.to_str().unwrap(), "--gamma", "0.01"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&stdout(&o));
    assert_eq!(header[0], "shift");
    assert_eq!(rows.len(), 5);
    // at large N the risk follows (1 - kappa)^2
    let r = column(&header, &rows, "R");
    assert!(r.windows(2).all(|w| w[0] < w[1]));

    std::fs::write(&conf, "gamma = 1\nn-seeds = 4\n").unwrap();
    let o = ridgeshift(&["risk", "--config", conf.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key `n-seeds`"));
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let args = ["risk", "--gamma", "0.5,2", "--kappa", "0.8", "--costheta", "0.3"];
    let direct = ridgeshift(&args);
    let mut with_out = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    with_out.extend(["--out", &p]);
    let o = ridgeshift(&with_out);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&path).unwrap(), direct.stdout);
    assert!(stdout(&o).starts_with("risk:"));
    assert!(Path::new(&path).exists());
}
