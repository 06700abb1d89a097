use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};
use std::path::Path;
use std::process::{Command, Output};

use infocausal::boxes::pr_box;
use infocausal::quantum::singlet_box;

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infocausal")).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn chsh_reports_pr_and_tsirelson_boxes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pr.json"), pr_box().to_json()).unwrap();
    let o = bin(dir.path(), &["chsh", "pr.json"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("{\"chsh\":4.0,"), "{text}");

    let tsirelson = singlet_box([0.0, FRAC_PI_2], [FRAC_PI_4, -FRAC_PI_4]);
    std::fs::write(dir.path().join("q.json"), tsirelson.to_json()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&bin(dir.path(), &["chsh", "q.json"]))).unwrap();
    assert!((v["chsh"].as_f64().unwrap().abs() - 2.8284).abs() < 1e-4);
    assert_eq!(v["local"], false);
    assert_eq!(v["tsirelson_compatible"], true);

    let m = json(&dir.path().join("chsh.manifest.json"));
    assert_eq!(m["subcommand"], "chsh");
    assert_eq!(m["parameters"]["input"], "q.json");
}

#[test]
fn chsh_rejects_malformed_and_unnormalized_boxes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\"nx\":2").unwrap();
    assert_eq!(bin(dir.path(), &["chsh", "bad.json"]).status.code(), Some(2));
    let skew = pr_box().to_json().replacen("0.5", "0.7", 1);
    std::fs::write(dir.path().join("skew.json"), skew).unwrap();
    let o = bin(dir.path(), &["chsh", "skew.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(bin(dir.path(), &["chsh", "missing.json"]).status.code(), Some(2));
}

#[test]
fn ic_scan_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["ic-scan", "--emin", "0.6", "--emax", "0.8", "--steps", "21", "--kmax", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("E,k,J,delta_ic,per_bit_success,trials,seed"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 21);
    for r in &rows {
        let e: f64 = r[0].parse().unwrap();
        if e <= FRAC_1_SQRT_2 {
            assert_eq!(r[1], "none");
        }
        if e >= 0.72 {
            assert_ne!(r[1], "none");
        }
        assert_eq!(r[5], "0");
    }
    let one = stdout(&bin(dir.path(), &["ic-scan", "--emin", "1", "--emax", "1", "--steps", "1", "--kmax", "5"]));
    let lines: Vec<&str> = one.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("1,1,2,1,1,"), "{}", lines[1]);
}

#[test]
fn ic_scan_monte_carlo_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "ic-scan", "--emin", "0.75", "--emax", "0.8", "--steps", "2", "--kmax", "6", "--trials", "2000", "--seed", "9",
        "--out", "a.csv",
    ];
    assert_eq!(bin(dir.path(), &args).status.code(), Some(0));
    let first = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(bin(dir.path(), &args).status.code(), Some(0));
    assert_eq!(first, std::fs::read(dir.path().join("a.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(5) == Some("2000")));
    let m = json(&dir.path().join("a.csv.manifest.json"));
    assert_eq!(m["seed"], 9);
    assert_eq!(m["outputs"][0], "a.csv");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));

    let no_seed = bin(dir.path(), &["ic-scan", "--emin", "0.7", "--emax", "0.8", "--steps", "2", "--kmax", "3", "--trials", "5"]);
    assert_eq!(no_seed.status.code(), Some(2));
}

#[test]
fn gbit_boundary_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["gbit-boundary", "--steps", "101", "--out", "curve.csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 102);
    assert_eq!(lines[0], "alpha,beta_chain_rule,beta_qubit");
    let parse = |l: &str| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>();
    assert_eq!(parse(lines[1]), vec![0.0, 1.0, 1.0]);
    assert_eq!(parse(lines[101]), vec![1.0, 0.0, 0.0]);
    for l in &lines[2..101] {
        let v = parse(l);
        assert!(v[1] > v[2] + 1e-9, "{l}");
    }
    assert!(dir.path().join("curve.csv.manifest.json").exists());
    assert_eq!(bin(dir.path(), &["gbit-boundary", "--steps", "1"]).status.code(), Some(2));
}

#[test]
fn code_sim_rows_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["code-sim", "--channel", "bsc:0.1", "--rate", "0.7", "--lengths", "10", "--codebooks", "4", "--seed", "3", "--trials", "3000"];
    let a = Command::new(env!("CARGO_BIN_EXE_infocausal"))
        .current_dir(dir.path())
        .env("RAYON_NUM_THREADS", "1")
        .args(args)
        .output()
        .unwrap();
    let b = Command::new(env!("CARGO_BIN_EXE_infocausal"))
        .current_dir(dir.path())
        .env("RAYON_NUM_THREADS", "4")
        .args(args)
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "l,N,rate,pe,pe_stderr,tolerance,decoder,seed");
    assert_eq!(lines.len(), 5);
    let capacity = 0.531_004_406_410_719;
    for l in &lines[1..] {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f[0], "10");
        assert_eq!(f[1], "128");
        assert_eq!(f[6], "ml");
        let rate: f64 = f[2].parse().unwrap();
        let pe: f64 = f[3].parse().unwrap();
        let se: f64 = f[4].parse().unwrap();
        let bound = 1.0 - capacity / rate - 1.0 / (10.0 * rate);
        assert!(pe + 3.0 * se >= bound, "{l}");
    }
    assert!(dir.path().join("code-sim.manifest.json").exists());
}

#[test]
fn code_sim_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["code-sim", "--codebooks", "2", "--seed", "1", "--trials", "10"];
        args.extend_from_slice(extra);
        bin(dir.path(), &args).status.code()
    };
    assert_eq!(run(&["--channel", "bsc:0.1", "--rate", "0.4", "--lengths", "64"]), Some(2));
    assert_eq!(run(&["--channel", "awgn", "--rate", "0.4", "--lengths", "10"]), Some(2));
    assert_eq!(run(&["--channel", "bsc:0.1", "--rate", "0.4", "--lengths", "10", "--decoder", "map"]), Some(2));
    assert_eq!(run(&["--channel", "[[0.5,0.5],[0.1,0.9]]", "--rate", "0.4", "--lengths", "10,15"]), Some(0));
    assert_eq!(run(&["--channel", "bec:0.2", "--rate", "0.4", "--lengths", "10", "--decoder", "typical"]), Some(0));
}

#[test]
fn lemma_accy_prints_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let a = bin(dir.path(), &["lemma-accy", "--trials", "1", "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a).lines().count(), 1);
    let b = bin(dir.path(), &["lemma-accy", "--trials", "40", "--seed", "5"]);
    let c = bin(dir.path(), &["lemma-accy", "--trials", "40", "--seed", "5"]);
    assert_eq!(b.stdout, c.stdout);
    let line = stdout(&b);
    let slack: f64 = line.split_whitespace().next().unwrap().strip_prefix("min_slack=").unwrap().parse().unwrap();
    assert!(slack >= -1e-9);
    assert_eq!(json(&dir.path().join("lemma-accy.manifest.json"))["seed"], 5);
    assert_eq!(bin(dir.path(), &["lemma-accy", "--seed", "5"]).status.code(), Some(2));
}

#[test]
fn help_documents_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&bin(dir.path(), &["--help"]));
    for sub in ["chsh", "ic-scan", "gbit-boundary", "code-sim", "lemma-accy"] {
        assert!(text.contains(sub), "{sub}");
    }
}
