use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn omrkit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omrkit"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let o = omrkit(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    for sub in ["synth", "stats", "augment", "cached", "detect", "eval", "align", "bias"] {
        assert!(stdout(&o).contains(sub), "{sub} missing from help");
    }
    assert_eq!(omrkit(&["--version"], dir.path()).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = omrkit(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    // --seed has no default
    let o = omrkit(&["augment", "d.json", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--seed"));
    let o = omrkit(
        &[
            "synth",
            "--out",
            "s",
            "--pages",
            "1",
            "--seed",
            "1",
            "--energy-noise",
            "0.1",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1), "map options need --emit-maps");
}

#[test]
fn missing_input_exits_with_two_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = omrkit(&["stats", "absent.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.json"));
}

#[test]
fn malformed_dataset_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "{\"pages\": 3").unwrap();
    let o = omrkit(&["stats", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn augment_that_does_not_fit_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let s = omrkit(&["synth", "--out", "s", "--pages", "1", "--seed", "2"], dir.path());
    assert!(s.status.success(), "{}", stderr(&s));
    // 640 px pages hold four 130 px crops per row
    let o = omrkit(&["augment", "s/dataset.json", "--out", "a", "--seed", "1"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!dir.path().join("a").exists());
}

#[test]
fn detect_rejects_bad_options() {
    let dir = tempfile::tempdir().unwrap();
    let s = omrkit(
        &["synth", "--out", "s", "--pages", "1", "--seed", "2", "--emit-maps"],
        dir.path(),
    );
    assert!(s.status.success());
    let base = [
        "detect",
        "s/page_000.dwm",
        "--registry",
        "s/dataset.json",
        "--out",
        "d.json",
    ];
    let with = |extra: &[&str]| {
        let mut v: Vec<&str> = base.to_vec();
        v.extend_from_slice(extra);
        omrkit(&v, dir.path())
    };
    assert_eq!(with(&["--connectivity", "6"]).status.code(), Some(1));
    assert_eq!(with(&["--mode", "fancy"]).status.code(), Some(1));
    assert_eq!(with(&["--mode", "cached"]).status.code(), Some(1));
    assert_eq!(with(&[]).status.code(), Some(0));
}

#[test]
fn eval_rejects_detections_for_unknown_pages() {
    let dir = tempfile::tempdir().unwrap();
    for (out, seed) in [("s", "2"), ("t", "3")] {
        let o = omrkit(
            &["synth", "--out", out, "--pages", "2", "--seed", seed, "--emit-maps"],
            dir.path(),
        );
        assert!(o.status.success());
    }
    fs::rename(dir.path().join("t/page_001.dwm"), dir.path().join("t/page_009.dwm")).unwrap();
    let o = omrkit(
        &[
            "detect",
            "t/page_009.dwm",
            "--registry",
            "t/dataset.json",
            "--out",
            "d.json",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let o = omrkit(&["eval", "--dets", "d.json", "--gt", "s/dataset.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("page_009"));
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = omrkit(
            &[
                "synth",
                "--out",
                out,
                "--pages",
                "2",
                "--seed",
                "11",
                "--emit-maps",
                "--energy-noise",
                "0.05",
            ],
            dir.path(),
        );
        assert!(o.status.success());
    }
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 5);
    for n in names {
        assert_eq!(
            fs::read(dir.path().join("a").join(&n)).unwrap(),
            fs::read(dir.path().join("b").join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn stats_reports_the_rare_set() {
    let dir = tempfile::tempdir().unwrap();
    let o = omrkit(
        &["synth", "--out", "s", "--pages", "3", "--seed", "5", "--zipf", "1.2"],
        dir.path(),
    );
    assert!(o.status.success());
    let o = omrkit(&["stats", "s/dataset.json", "--max-rare", "2"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("top-10 coverage"));
    assert!(text.contains("rare classes at head coverage 0.85: 2"), "{text}");
}
