//! End-to-end CLI tests: exit codes, file outputs, and determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bjdm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bjdm"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bjdm-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &std::path::Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.display().to_string()
}

fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed: {}\n{}",
        output.status,
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).unwrap()
}

const BASKETS: &str = "1 2 3 5 6 7\n1 2 4 8 9\n3 4 10 11\n";

#[test]
fn gen_is_deterministic_and_parseable() {
    let a = bjdm()
        .args(["gen", "--transactions", "40", "--items", "15", "--avg-length", "4", "--seed", "9"])
        .output()
        .unwrap();
    let b = bjdm()
        .args(["gen", "--transactions", "40", "--items", "15", "--avg-length", "4", "--seed", "9"])
        .output()
        .unwrap();
    let text = stdout_of(&a);
    assert_eq!(text, stdout_of(&b));
    assert_eq!(text.lines().count(), 40);

    let seq = bjdm()
        .args([
            "gen", "--format", "seq", "--transactions", "10", "--items", "8", "--avg-length",
            "3", "--seed", "4",
        ])
        .output()
        .unwrap();
    let seq_text = stdout_of(&seq);
    assert_eq!(seq_text.lines().count(), 10);
    assert!(seq_text.lines().all(|l| l.trim_end().ends_with("-2")));
}

#[test]
fn mine_baskets_finds_five_patterns() {
    let dir = temp_dir("mine");
    let input = write(&dir, "baskets.dat", BASKETS);
    let out = bjdm().args(["mine", "--input", &input, "--theta", "2"]).output().unwrap();
    let text = stdout_of(&out);
    assert_eq!(text.lines().count(), 5);
    assert!(text.contains("1 2 #SUP: 2"));
}

#[test]
fn mine_rejects_bad_theta_with_exit_2() {
    let dir = temp_dir("badtheta");
    let input = write(&dir, "baskets.dat", BASKETS);
    let out = bjdm().args(["mine", "--input", &input, "--theta", "1.01"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_exit_3() {
    let out = bjdm()
        .args(["mine", "--input", "/nonexistent/nope.dat", "--theta", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sample_writes_files_and_manifest_with_stable_bjdm() {
    let dir = temp_dir("sample");
    let input = write(&dir, "baskets.dat", BASKETS);
    let out_dir = dir.join("out");
    let out = bjdm()
        .args([
            "sample",
            "--input",
            &input,
            "--algo",
            "alice-a",
            "--k",
            "4",
            "--samples",
            "5",
            "--seed",
            "7",
            "--check-invariants",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    let observed = manifest["observed_bjdm_checksum"].as_u64().unwrap();
    let samples = manifest["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 5);
    for s in samples {
        assert_eq!(s["bjdm_checksum"].as_u64().unwrap(), observed);
        let file = s["file"].as_str().unwrap();
        assert!(std::fs::metadata(file).unwrap().is_file());
    }
    assert_eq!(manifest["config"]["seed"].as_u64(), Some(7));
}

#[test]
fn sequence_sampler_on_transactional_input_is_exit_2() {
    let dir = temp_dir("mismatch");
    let input = write(&dir, "baskets.dat", BASKETS);
    let out = bjdm()
        .args(["sample", "--input", &input, "--algo", "alice-s", "--samples", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_sequences_round_trip() {
    let dir = temp_dir("seqsample");
    let input = write(&dir, "seqs.dat", "1 -1 2 -1 -2\n3 -1 4 -1 -2\n2 -1 -2\n");
    let out_dir = dir.join("out");
    let out = bjdm()
        .args([
            "sample",
            "--input",
            &input,
            "--format",
            "seq",
            "--algo",
            "alice-s",
            "--swaps",
            "500",
            "--samples",
            "2",
            "--check-invariants",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for i in 0..2 {
        let text = std::fs::read_to_string(out_dir.join(format!("sample_{i:04}.dat"))).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.trim_end().ends_with("-2")));
    }
}

#[test]
fn convergence_emits_rows_per_sampler_and_k() {
    let dir = temp_dir("conv");
    let input = write(&dir, "gen.dat", &synthetic(60, 20, 5.0, 3));
    let out = bjdm()
        .args([
            "convergence",
            "--input",
            &input,
            "--algo",
            "alice-a,selfloop",
            "--theta",
            "4",
            "--seed",
            "2",
            "--k-grid",
            "0,0.5,1",
        ])
        .output()
        .unwrap();
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sampler,k,arsd,seconds"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("alice-a,0,0.000000"));
    assert!(rows[3].starts_with("selfloop,0,0.000000"));
}

#[test]
fn significance_reports_pvalue() {
    let dir = temp_dir("sig");
    let input = write(&dir, "gen.dat", &synthetic(50, 15, 5.0, 8));
    let out = bjdm()
        .args([
            "significance",
            "--input",
            &input,
            "--algo",
            "alice-b",
            "--theta",
            "0.2",
            "--samples",
            "9",
            "--seed",
            "5",
        ])
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert!(report["observed_count"].as_u64().unwrap() > 0);
    let p = report["pvalue"]["p_hat"].as_f64().unwrap();
    assert!((0.1..=1.0).contains(&p));
    assert!(report["observed_length_histogram"].is_object());
    assert!(report["sampled_mean_length_histogram"].is_object());

    let zero = bjdm()
        .args([
            "significance",
            "--input",
            &input,
            "--algo",
            "alice-b",
            "--theta",
            "0.2",
            "--samples",
            "0",
        ])
        .output()
        .unwrap();
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn bench_emits_one_row_per_dataset_and_sampler() {
    let dir = temp_dir("bench");
    let a = write(&dir, "a.dat", &synthetic(30, 12, 4.0, 1));
    let b = write(&dir, "b.dat", &synthetic(40, 12, 4.0, 2));
    let out = bjdm()
        .args([
            "bench", "--input", &a, "--input", &b, "--algo", "alice-a,gmmt", "--steps", "500",
        ])
        .output()
        .unwrap();
    let text = stdout_of(&out);
    assert_eq!(text.lines().count(), 1 + 4);
}

#[test]
fn run_replays_a_json_config() {
    let dir = temp_dir("runcfg");
    let input = write(&dir, "baskets.dat", BASKETS);
    let direct = bjdm().args(["mine", "--input", &input, "--theta", "2"]).output().unwrap();
    let config = serde_json::json!({
        "command": "mine",
        "inputs": [input],
        "format": "trans",
        "theta": 2.0,
    });
    let config_path = write(&dir, "job.json", &config.to_string());
    let replay = bjdm().args(["run", "--config", &config_path]).output().unwrap();
    assert_eq!(stdout_of(&direct), stdout_of(&replay));
}

#[test]
fn env_var_overrides_parallelism() {
    let dir = temp_dir("env");
    let input = write(&dir, "baskets.dat", BASKETS);
    let bad = bjdm()
        .env("BJDM_SAMPLER_THREADS", "zzz")
        .args(["mine", "--input", &input, "--theta", "2"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let good = bjdm()
        .env("BJDM_SAMPLER_THREADS", "2")
        .args([
            "sample", "--input", &input, "--algo", "alice-b", "--samples", "2", "--swaps", "50",
            "--out",
            dir.join("o").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(good.status.success());
}

/// Tiny deterministic generator for test inputs, independent of the library.
fn synthetic(rows: usize, items: usize, avg: f64, seed: u64) -> String {
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut out = String::new();
    for _ in 0..rows {
        let len = 1 + (next() as usize % (2 * avg as usize - 1));
        let mut row: Vec<usize> = Vec::new();
        while row.len() < len.min(items) {
            let x = next() as usize % items;
            if !row.contains(&x) {
                row.push(x);
            }
        }
        row.sort_unstable();
        let toks: Vec<String> = row.iter().map(|x| (x + 1).to_string()).collect();
        out.push_str(&toks.join(" "));
        out.push('\n');
    }
    out
}
