use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn creditnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_creditnn"))
        .current_dir(dir)
        .env_remove("CREDITNN_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

const SMALL_RUN: &str = r#"
[synth]
preset = "energy"
n_features = 6

[case]
case_id = 3
sector = "energy"
architectures = ["mlp", "lstm"]
replicates = 2
seed = 4

[case.model]
dense_units = [8, 8]

[case.train]
max_epochs = 2
"#;

#[test]
fn synth_energy_preset_has_840_records() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&creditnn(
        dir.path(),
        &["synth", "--preset", "energy", "--features", "12"],
    ));
    assert!(stdout.contains("records: 840"), "{stdout}");
    assert!(
        stdout.contains("missing: 0.09") || stdout.contains("missing: 0.10"),
        "{stdout}"
    );
    assert!(dir.path().join("out/energy_panel.csv").exists());
    assert!(dir.path().join("out/energy_latent.csv").exists());
}

#[test]
fn synth_from_config_file_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = workspace().join("configs/synth/energy.toml");
    let cfg = cfg.to_str().unwrap();
    ok(&creditnn(
        dir.path(),
        &["--out-dir", "a", "synth", "--config", cfg],
    ));
    ok(&creditnn(
        dir.path(),
        &["--out-dir", "b", "synth", "--config", cfg],
    ));
    let a = fs::read(dir.path().join("a/energy_panel.csv")).unwrap();
    let b = fs::read(dir.path().join("b/energy_panel.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn run_is_deterministic_and_respects_arch_filter() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("run.toml"), SMALL_RUN);
    ok(&creditnn(
        dir.path(),
        &["run", "--config", "run.toml", "--quiet", "--out", "one.csv"],
    ));
    ok(&creditnn(
        dir.path(),
        &[
            "run", "--config", "run.toml", "--quiet", "--jobs", "2", "--out", "two.csv",
        ],
    ));
    let one = fs::read_to_string(dir.path().join("one.csv")).unwrap();
    assert_eq!(one, fs::read_to_string(dir.path().join("two.csv")).unwrap());
    assert_eq!(one.lines().count(), 5);

    ok(&creditnn(
        dir.path(),
        &[
            "run", "--config", "run.toml", "--quiet", "--arch", "lstm", "--out", "lstm.csv",
        ],
    ));
    let lstm = fs::read_to_string(dir.path().join("lstm.csv")).unwrap();
    assert_eq!(lstm.lines().count(), 3);
    assert!(lstm.lines().skip(1).all(|l| l.contains(",lstm,")), "{lstm}");
}

#[test]
fn invalid_config_names_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("bad.toml"),
        &SMALL_RUN.replace("replicates = 2", "replicate = 2"),
    );
    let out = creditnn(dir.path(), &["run", "--config", "bad.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicate"));

    write(
        &dir.path().join("arch.toml"),
        &SMALL_RUN.replace("case_id = 3", "case_id = 1"),
    );
    let out = creditnn(dir.path(), &["run", "--config", "arch.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lstm"));
}

#[test]
fn ttest_on_published_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let summary = workspace().join("configs/table6_summary.csv");
    let stdout = ok(&creditnn(
        dir.path(),
        &[
            "stats",
            "--mode",
            "ttest",
            "--results",
            summary.to_str().unwrap(),
        ],
    ));
    assert!(stdout.contains("0.0506"), "{stdout}");
    assert!(stdout.contains("E-08"), "{stdout}");
}

#[test]
fn anova_on_constant_responses_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("case,sector,arch,allocation,train_acc,test_acc,epochs,seconds\n");
    for sector in ["energy", "financial"] {
        for arch in ["mlp", "cnn"] {
            for rep in 0..3 {
                csv.push_str(&format!(
                    "3,{sector},{arch},{rep},0.900000,0.800000,5,0.000\n"
                ));
            }
        }
    }
    write(&dir.path().join("flat.csv"), &csv);
    let out = creditnn(
        dir.path(),
        &["stats", "--mode", "anova2", "--results", "flat.csv"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn report_without_results_lists_every_table() {
    let dir = tempfile::tempdir().unwrap();
    ok(&creditnn(dir.path(), &["report", "--out", "r.md"]));
    let md = fs::read_to_string(dir.path().join("r.md")).unwrap();
    for n in 2..=10 {
        assert!(md.contains(&format!("## Table {n}:")), "missing table {n}");
    }
    assert!(md.contains("no data"));
}
