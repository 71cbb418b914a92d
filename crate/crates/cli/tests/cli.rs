use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krein-ball"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn equal_pair_gives_zero_spectrum() {
    let o = bin(&[
        "snum", "--n", "3", "--left", "2", "--right", "2", "--cutoff", "10",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,s"));
    let rows: Vec<&str> = lines.collect();
    // sum of multiplicities for n = 3: (L+1)^2
    assert_eq!(rows.len(), 121);
    assert!(rows.iter().all(|r| r.ends_with(",0.0000000000000000e0")));
}

#[test]
fn spectrum_csv_is_sorted_with_expanded_length() {
    let o = bin(&[
        "snum", "--n", "2", "--left", "1", "--right", "neumann", "--cutoff", "50",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let values: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 101);
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
    let first = stdout(&o)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .to_string();
    let mantissa = first.split('e').next().unwrap();
    assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17);
}

#[test]
fn verify_robin_neumann_disk() {
    let o = bin(&[
        "verify",
        "--suite",
        "robin-neumann",
        "--n",
        "2",
        "--no-timestamp",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = json(&o);
    assert_eq!(v["passed"], Value::Bool(true));
    let r = &v["results"][0]["details"];
    assert_eq!(r["verdict"], "consistent");
    let exponent = r["fit"]["exponent"].as_f64().unwrap();
    assert!((exponent - 3.0).abs() <= 0.15);
    assert!(v.get("generated_at_unix").is_none());
}

#[test]
fn oracle_krein_orders() {
    let o = bin(&[
        "oracle",
        "--check",
        "krein",
        "--l",
        "0",
        "--grids",
        "1024,2048,4096",
        "--left",
        "1",
        "--right",
        "neumann",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = json(&o);
    for p in v["results"][0]["orders"].as_array().unwrap() {
        assert!((p.as_f64().unwrap() - 2.0).abs() <= 0.4);
    }
    assert!(v["generated_at_unix"].is_u64());
}

#[test]
fn oracle_weyl_and_gamma_checks() {
    for check in ["weyl", "gamma"] {
        let o = bin(&[
            "oracle",
            "--check",
            check,
            "--l",
            "0,3",
            "--grids",
            "256,512,1024",
            "--no-timestamp",
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{check}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let v = json(&o);
        assert_eq!(v["results"].as_array().unwrap().len(), 2);
        for row in v["results"].as_array().unwrap() {
            for p in row["orders"].as_array().unwrap() {
                assert!((p.as_f64().unwrap() - 2.0).abs() <= 0.4, "{check}: {row}");
            }
        }
    }
}

#[test]
fn fit_round_trips_through_its_own_output() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let csv = dir.path().join("spectrum.csv");
    let args = [
        "fit",
        "--n",
        "2",
        "--left",
        "2",
        "--right",
        "2 - (1+l)^(-2)",
        "--cutoff",
        "400",
        "--threshold",
        "parameter_difference",
        "--q",
        "2",
        "--tolerance",
        "0.3",
        "--no-timestamp",
    ];
    let mut a: Vec<&str> = args.to_vec();
    let first_s = first.to_str().unwrap();
    let csv_s = csv.to_str().unwrap();
    a.extend(["--out", first_s, "--spectrum-out", csv_s]);
    let o = bin(&a);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    assert_eq!(v["verdict"], "consistent");
    assert_eq!(v["threshold"]["kind"], "parameter_difference");
    assert!((v["threshold"]["p"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert_eq!(v["spectrum_file"], csv_s);
    assert!(Path::new(&csv).exists());

    let second = dir.path().join("second.json");
    let o = bin(&[
        "fit",
        "--config",
        first_s,
        "--no-timestamp",
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let a: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    let b: Value = serde_json::from_str(&std::fs::read_to_string(&second).unwrap()).unwrap();
    assert_eq!(a["config"], b["config"]);
    assert_eq!(a["fit"], b["fit"]);
    assert_eq!(a["margin"], b["margin"]);
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let args = [
        "snum",
        "--n",
        "3",
        "--left",
        "1 + (1+l)^(-1)",
        "--cutoff",
        "60",
    ];
    let a = bin(&args);
    let mut one = vec!["--threads", "1"];
    one.extend(args);
    let b = bin(&one);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let fit = ["fit", "--n", "2", "--cutoff", "300", "--no-timestamp"];
    assert_eq!(bin(&fit).stdout, bin(&fit).stdout);
}

#[test]
fn eig_reports_dirichlet_ground_state() {
    let o = bin(&[
        "eig",
        "--left",
        "dirichlet",
        "--l",
        "0",
        "--eig-window",
        "0.5,10",
        "--no-timestamp",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let e = v["modes"][0]["eigenvalues"][0].as_f64().unwrap();
    assert!((e - 5.78319).abs() < 1e-4);
}

#[test]
fn weyl_table_has_one_row_per_degree() {
    let o = bin(&["weyl", "--n", "3", "--cutoff", "5", "--lambda", "1+2i"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 7);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..2], ["0", "1"]);
    assert!(row[3].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn exit_codes() {
    // config
    assert_eq!(bin(&["snum", "--left", "2 +"]).status.code(), Some(1));
    assert_eq!(bin(&["verify", "--suite", "nope"]).status.code(), Some(1));
    assert_eq!(bin(&["snum", "--bogus"]).status.code(), Some(1));
    assert_eq!(bin(&["snum", "--n", "1"]).status.code(), Some(1));
    // admissibility: real lambda with a Robin participant, decaying parameter
    let o = bin(&["snum", "--lambda", "2,0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("non-real"));
    assert_eq!(
        bin(&["snum", "--left", "(1+l)^(-1)"]).status.code(),
        Some(2)
    );
    assert_eq!(
        bin(&["snum", "--left", "1+i", "--right", "1-i"])
            .status
            .code(),
        Some(2)
    );
    // numerical: window endpoint on the exact eigenvalue 0 of l = 1, theta = 1
    let o = bin(&["eig", "--left", "1", "--l", "1", "--eig-window", "0,10"]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    // help is not an error
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}
