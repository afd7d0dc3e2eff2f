use std::io::Write;
use std::process::{Command, Output, Stdio};

use pcmeta::counterexample::PowerPoint2D;
use pcmeta::io::{read_csv_rows, PcCurveReport};

fn pcmeta(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_pcmeta"))
        .args(args)
        .env_remove("PCMETA_SEED")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const AGE: &str = "study_id,p\nage_le_75,9.26e-03\nage_ge_75,6.61e-05\n";

#[test]
fn combine_from_stdin() {
    let v = json(&pcmeta(&["combine", "-", "--json"], Some(AGE)));
    let p = v["p"].as_f64().unwrap();
    assert!(((p - 9.37e-6) / 9.37e-6).abs() < 0.01, "{p}");
    assert_eq!(v["n"], 2);
}

#[test]
fn single_study_returns_its_own_p() {
    for method in ["fisher", "simes", "bonferroni", "stouffer", "tpm"] {
        let v = json(&pcmeta(&["combine", "-", "--method", method, "--json"], Some("study_id,p\nx,0.0123\n")));
        let p = v["p"].as_f64().unwrap();
        assert!((p - 0.0123).abs() < 1e-12, "{method}: {p}");
    }
}

#[test]
fn tpm_at_gamma_one_is_fisher() {
    let f = json(&pcmeta(&["combine", "--bundled", "--json"], None));
    let t = json(&pcmeta(&["combine", "--bundled", "--method", "tpm", "--gamma", "1", "--json"], None));
    let (a, b) = (f["log_p"].as_f64().unwrap(), t["log_p"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-10 * a.abs(), "{a} vs {b}");
}

#[test]
fn pc_at_r_one_is_the_combined_p() {
    let c = json(&pcmeta(&["combine", "--bundled", "--method", "simes", "--json"], None));
    let p = json(&pcmeta(&["pc", "--bundled", "--method", "simes", "--r", "1", "--json"], None));
    assert_eq!(c["log_p"], p["log_p"]);
    assert_eq!(p["rejected"], true);
}

#[test]
fn grouped_curve_json_round_trips() {
    let out = pcmeta(&["pc", "--bundled", "--groups", "--all-r", "--json"], None);
    let report: PcCurveReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.n, 18);
    assert_eq!(report.entries.len(), 18);
    assert_eq!(report.r_hat, 12);
    let again: PcCurveReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(report, again);
    let r2 = &report.entries[1];
    assert!(((r2.p - 4.49e-5) / 4.49e-5).abs() < 0.01);
}

#[test]
fn table_output_lists_every_order() {
    let out = pcmeta(&["pc", "--bundled", "--method", "bonferroni", "--all-r"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 19, "{text}");
    assert!(text.contains("# warning:"), "bonferroni curve has a dip: {text}");
}

#[test]
fn bad_input_exits_2_with_empty_stdout() {
    let cases: [(&[&str], &str); 4] = [
        (&["combine", "-", "--json"], "study_id,p\na,1.5\n"),
        (&["combine", "-", "--json"], "study_id,p\na,not_a_number\n"),
        (&["pc", "-", "--r", "3", "--json"], AGE),
        (&["pc", "-", "--all-r", "--method", "simes", "--groups", "--json"], "study_id,group_factor,p\na,g,0.1\n"),
    ];
    for (args, input) in cases {
        let out = pcmeta(args, Some(input));
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
        let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert!(err["error"].is_string() && err["message"].is_string());
    }
    assert_eq!(pcmeta(&["combine", "--no-such-flag"], None).status.code(), Some(2));
}

#[test]
fn counterexample_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let out = pcmeta(
        &["counterexample", "--grid", "3", "--mu-max", "2", "--reps", "10000", "--out", path.to_str().unwrap()],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<PowerPoint2D> = read_csv_rows(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(rows.len(), 3 * 3 * 3);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.power)));
}

#[test]
fn exact2x2_bundled_matches_published() {
    let out = pcmeta(&["exact2x2", "--bundled"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("study_id,odds_ratio,p,log_p"));
    assert_eq!(lines.count(), 18);
    let chads = text.lines().find(|l| l.starts_with("chads2_2,")).unwrap();
    let p: f64 = chads.split(',').nth(2).unwrap().parse().unwrap();
    assert!(((p - 0.105) / 0.105).abs() < 0.01, "{p}");
}

#[test]
fn seed_from_environment_matches_flag() {
    let args = ["oracle", "tpm", "--l", "2", "--gamma", "0.2", "--w", "0.01", "--json"];
    let flag = pcmeta(&[&args[..], &["--seed", "11"]].concat(), None);
    let env = Command::new(env!("CARGO_BIN_EXE_pcmeta")).args(args).env("PCMETA_SEED", "11").output().unwrap();
    assert!(flag.status.success());
    assert_eq!(flag.stdout, env.stdout);
}
