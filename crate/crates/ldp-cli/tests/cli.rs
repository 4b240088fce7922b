use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../ldp/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn ldp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ldp_stdin(args: &[&str], input: &str) -> Output {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_ldp"))
        .args(args)
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .expect("binary runs");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn classify_reports_three_singletons() {
    let out = ldp(&["classify", &fixture("e1.chain"), "--json-only"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(
        v["result"]["classes"],
        serde_json::json!([["1"], ["2"], ["3"]])
    );
    assert_eq!(v["result"]["order"], serde_json::json!([[0, 1], [0, 2]]));
    assert_eq!(v["manifest"]["subcommand"], "classify");
    assert_eq!(
        v["manifest"]["inputs"][0]["sha256"].as_str().unwrap().len(),
        64
    );
}

#[test]
fn level_one_rate_on_leak_chain() {
    let out = ldp(&[
        "rate",
        &fixture("e1.chain"),
        &fixture("lambda05.measure"),
        "--level",
        "1",
    ]);
    assert!(out.status.success());
    let v = json(&out)["result"]["value"].as_f64().unwrap();
    assert!((v - 0.346574).abs() < 1e-6);
}

#[test]
fn inadmissible_estimate_is_a_valid_answer() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("slope.csv");
    let out = ldp(&[
        "estimate",
        &fixture("e1.chain"),
        &fixture("e1_split.measure"),
        "--delta",
        "0.05",
        "--n",
        "10,20,40",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v = json(&out);
    assert!(v["result"]["logprobs"]
        .as_array()
        .unwrap()
        .iter()
        .all(|l| l == "-inf"));
    assert_eq!(v["result"]["reference"], "inf");
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text, "n,logprob\n10,-inf\n20,-inf\n40,-inf\n");
}

#[test]
fn monte_carlo_is_independent_of_workers() {
    let run = |w: &str| {
        let out = ldp(&[
            "estimate",
            &fixture("sym2.chain"),
            &fixture("d11.measure"),
            "--delta",
            "0.2",
            "--n",
            "8",
            "--mc",
            "samples=20000,seed=3",
            "--workers",
            w,
            "--json-only",
        ]);
        assert!(out.status.success());
        json(&out)["result"]["monte_carlo"].clone()
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn results_are_byte_stable() {
    let args = [
        "decompose",
        &fixture("ex27.chain"),
        &fixture("ex27.measure"),
        "--terms",
        "10",
        "--json-only",
    ];
    let a = json(&ldp(&args));
    let b = json(&ldp(&args));
    assert_eq!(
        serde_json::to_string(&a["result"]).unwrap(),
        serde_json::to_string(&b["result"]).unwrap()
    );
    assert!(a["result"]["residual_tv"].as_f64().unwrap() < 1e-12);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(ldp(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        ldp(&["classify", "/nonexistent/chain"]).status.code(),
        Some(2)
    );
    let out = ldp(&[
        "rate",
        &fixture("e1.chain"),
        &fixture("lambda05.measure"),
        "--level",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_with_one_and_a_witness() {
    let out = ldp(&[
        "approximate",
        &fixture("e1.chain"),
        &fixture("e1_split.measure"),
        "--m",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["error"]["kind"], "domain");
    assert_eq!(v["error"]["witness"]["witness"]["kind"], "incomparable");
    assert!(v["manifest"].is_object());
}

#[test]
fn approximate_prints_the_word_first() {
    let out = ldp(&[
        "approximate",
        &fixture("ex27.chain"),
        &fixture("ex27.measure"),
        "--m",
        "8",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let (word, rest) = text.split_once('\n').unwrap();
    let v: Value = serde_json::from_str(rest).unwrap();
    assert_eq!(word, v["result"]["word"]);
    assert!(v["result"]["tv"].as_f64().unwrap() <= 3.0 / 8.0);
}

#[test]
fn words_slice_stitch_couple() {
    let chain = fixture("ex27.chain");
    let base = ["--k", "1,2,5,6", "--j0", "0,1,3", "--json-only"];
    let mut args = vec!["words", "slice", chain.as_str()];
    args.extend(base);
    let out = ldp_stdin(&args, "1 1 2 4 5 6 5\n1 2 2 2 4 7\n");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    let words = v["result"]["words"].as_array().unwrap();
    assert_eq!(words.len(), 2);
    assert!(words.iter().all(|w| w["bounds_hold"] == true));
    assert_eq!(
        words[0]["pieces"],
        serde_json::json!([["1", "1"], ["2"], ["5", "6", "5"]])
    );

    args[1] = "stitch";
    let out = ldp_stdin(&args, "1 1\n2 2\n5 6 5\n");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = &json(&out)["result"];
    assert!(r["geographic"]["lhs"].as_f64().unwrap() <= r["geographic"]["rhs"].as_f64().unwrap());
    assert!(
        r["probability"]["ln_p_word"].as_f64().unwrap()
            >= r["probability"]["ln_c_st_times_pieces"].as_f64().unwrap()
    );

    args[1] = "couple";
    let out = ldp_stdin(&args, "1 1 2 2\n1 2 2 4\n");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = &json(&out)["result"];
    assert!(r["geographic"]["lhs"].as_f64().unwrap() <= r["geographic"]["rhs"].as_f64().unwrap());
    assert!(
        r["probability"]["ln_p_word"].as_f64().unwrap()
            >= r["probability"]["ln_c_nt_times_words"].as_f64().unwrap()
    );
}

#[test]
fn scgf_and_conjugate() {
    let dir = tempfile::tempdir().unwrap();
    let pot = dir.path().join("v.potential");
    std::fs::write(&pot, "v 2 1.5\n").unwrap();
    let out = ldp(&[
        "scgf",
        &fixture("e1.chain"),
        "--potential",
        pot.to_str().unwrap(),
        "--json-only",
    ]);
    assert!(out.status.success());
    assert!((json(&out)["result"]["value"].as_f64().unwrap() - 1.5).abs() < 1e-10);

    let w = fixture("e2_w10.chain");
    let window: Vec<String> = (1..=10).map(|i| i.to_string()).collect();
    let out = ldp(&[
        "scgf",
        &w,
        "--potential",
        &fixture("zero.potential"),
        "--truncate",
        &window.join(","),
        "--json-only",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!((json(&out)["result"]["value"].as_f64().unwrap() - 0.7f64.ln()).abs() < 1e-12);

    let out = ldp(&[
        "conjugate",
        &fixture("e1.chain"),
        &fixture("e1_lift.measure"),
        "--json-only",
    ]);
    assert!(out.status.success());
    assert!((json(&out)["result"]["value"].as_f64().unwrap() - 0.5 * 2f64.ln()).abs() < 1e-6);
}

#[test]
fn check_measure_and_level3() {
    let out = ldp(&[
        "check-measure",
        &fixture("ex27.chain"),
        &fixture("ex27.measure"),
        "--json-only",
    ]);
    assert!(out.status.success());
    let r = &json(&out)["result"];
    assert_eq!(r["verdict"]["status"], "Admissible");
    assert_eq!(r["balanced"], true);

    let dir = tempfile::tempdir().unwrap();
    let (pi, q, csv) = (
        dir.path().join("pi"),
        dir.path().join("q"),
        dir.path().join("h.csv"),
    );
    std::fs::write(&pi, "mass 1 0.5\nmass 2 0.5\n").unwrap();
    std::fs::write(
        &q,
        "trans 1 1 0.5\ntrans 1 2 0.5\ntrans 2 1 0.5\ntrans 2 2 0.5\n",
    )
    .unwrap();
    let before = std::fs::read(&pi).unwrap();
    let out = ldp(&[
        "level3",
        &fixture("sym2.chain"),
        "--pi",
        pi.to_str().unwrap(),
        "--q",
        q.to_str().unwrap(),
        "--kmax",
        "4",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(json(&out)["result"]["limit"].as_f64().unwrap(), 0.0);
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 5);
    assert_eq!(std::fs::read(&pi).unwrap(), before);
}
