use std::path::Path;
use std::process::{Command, Output};

fn qdecode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdecode"))
        .args(args)
        .output()
        .expect("run qdecode")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn body(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn curves_single_row_and_default_grid() {
    let o = qdecode(&["curves", "--r", "2", "--k", "0"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "R,k,f\n2,0.0,0.5\n");

    let o = qdecode(&["curves"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 9 * 201);
    let mut rs: Vec<u64> = rows.iter().map(|r| r[0] as u64).collect();
    rs.dedup();
    assert_eq!(rs.len(), 9);
    for r in rows.iter().filter(|r| r[1] > 0.0) {
        assert!(r[2] > 0.0 && r[2] < 0.5);
    }
}

#[test]
fn output_is_deterministic_and_written_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = qdecode(&[
            "simulate",
            "--trials",
            "60",
            "--seed",
            "9",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = std::fs::read_to_string(&a).unwrap();
    assert!(text.lines().last().unwrap().starts_with("summary,"));
    assert_eq!(text.lines().count(), 62);

    // A failing command leaves no file behind.
    let c = dir.path().join("c.csv");
    let o = qdecode(&["curves", "--k", "2,1", "--out", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!c.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn uncapped_beam_matches_runtime_command() {
    let beam = stdout(&qdecode(&[
        "beam", "--r", "3", "--k", "2.91", "--n", "5,20,40", "--param", "inf",
    ]));
    let runtime = stdout(&qdecode(&[
        "runtime", "--r", "3", "--k", "2.91", "--n", "5,20,40",
    ]));
    assert!(beam.starts_with("# qdecode "));
    let b = body(&beam);
    let r = body(&runtime);
    let bcol = b[0].split(',').position(|c| c == "log10_runtime").unwrap();
    let rcol = r[0].split(',').position(|c| c == "log10_rt2").unwrap();
    for (x, y) in b[1..].iter().zip(&r[1..]) {
        let x: f64 = x.split(',').nth(bcol).unwrap().parse().unwrap();
        let y: f64 = y.split(',').nth(rcol).unwrap().parse().unwrap();
        assert_eq!(x, y);
    }
}

#[test]
fn exit_codes() {
    let infeasible = qdecode(&[
        "beam", "--r", "6", "--k", "2", "--n", "40", "--mode", "constant", "--param", "1",
    ]);
    assert_eq!(infeasible.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&infeasible.stderr).contains("infeasible"));

    let budget = qdecode(&["simulate", "--r", "10", "--n", "7", "--trials", "1"]);
    assert_eq!(budget.status.code(), Some(4));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n0.5,0.5\n0.5,oops\n").unwrap();
    let parse = qdecode(&["fit", "--input", bad.to_str().unwrap()]);
    assert_eq!(parse.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("line 3"));

    assert_eq!(qdecode(&["curves", "--nope"]).status.code(), Some(2));
    assert_eq!(qdecode(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_mirrors_flags_and_cli_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("curves.toml");
    std::fs::write(&cfg, "command = \"curves\"\nr = [3]\nk = \"0:1:0.5\"\n").unwrap();
    let o = qdecode(&["curves", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 4);

    let o = qdecode(&["curves", "--config", cfg.to_str().unwrap(), "--k", "2"]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("3,2.0,"));

    std::fs::write(&cfg, "r = [3]\nunknown_key = 1\n").unwrap();
    let o = qdecode(&["curves", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(&cfg, "command = \"beam\"\n").unwrap();
    let o = qdecode(&["curves", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sample_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["dump.csv", "dump.json"] {
        let path = dir.path().join(name);
        let p = path.to_str().unwrap();
        let o = qdecode(&[
            "sample", "--r", "29", "--k", "3.03", "--frames", "300", "--seed", "4", "--out", p,
        ]);
        assert!(o.status.success());
        let o = qdecode(&["fit", "--input", p, "--rank-range", "1:25"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let fit: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!((fit["b"].as_f64().unwrap() - 3.03).abs() < 0.05, "{fit}");
        assert_eq!(fit["rank_range"], serde_json::json!([1, 25]));
        for key in ["a", "stderr_a", "stderr_b", "r2"] {
            assert!(fit[key].is_number());
        }
    }
}

#[test]
fn simulate_from_files_and_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    std::fs::write(&table, "x,y\n0.9,0.1\n0.6,0.4\n").unwrap();
    let acc = dir.path().join("acc.json");
    std::fs::write(
        &acc,
        r#"{"alphabet": ["x", "y"], "states": 3, "start": 0, "accepting": [2],
            "transitions": [[0, "x", 1], [0, "y", 1], [1, "y", 2]]}"#,
    )
    .unwrap();
    let o = qdecode(&[
        "simulate",
        "--table",
        table.to_str().unwrap(),
        "--acceptor",
        acc.to_str().unwrap(),
        "--trials",
        "20",
        "--json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["summary"]["N"], 2);
    assert_eq!(v["summary"]["success_rate"], 1.0);
    assert_eq!(v["trials"].as_array().unwrap().len(), 20);
}

#[test]
fn threads_flag_does_not_change_output() {
    let one = qdecode(&["simulate", "--trials", "40", "--threads", "1"]);
    let two = qdecode(&["simulate", "--trials", "40", "--threads", "3"]);
    assert!(one.status.success() && two.status.success());
    assert_eq!(one.stdout, two.stdout);
    assert!(!Path::new("--threads").exists());
}
