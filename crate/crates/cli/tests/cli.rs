//! End-to-end tests that drive the `tagparse` binary itself: stage-wise runs
//! against single-shot pipelines, config layering, exit codes, and the
//! keep-previous-outputs guarantees.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn tagparse() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tagparse"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn tagparse");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstderr: {}",
        cmd.get_args().collect::<Vec<_>>(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(cmd: &mut Command, expected_code: i32) -> Output {
    let out = cmd.output().expect("spawn tagparse");
    assert_eq!(
        out.status.code(),
        Some(expected_code),
        "command: {:?}\nstderr: {}",
        cmd.get_args().collect::<Vec<_>>(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn assert_same_file(a: &Path, b: &Path) {
    assert_eq!(read(a), read(b), "{} vs {}", a.display(), b.display());
}

/// Report text with the wall-clock timing lines dropped; everything else in a
/// report is deterministic.
fn report_without_timings(path: &Path) -> String {
    String::from_utf8(read(path))
        .unwrap()
        .lines()
        .filter(|line| !line.contains("_ms = "))
        .collect::<Vec<_>>()
        .join("\n")
}

fn synth_small(dir: &Path) {
    run_ok(tagparse().args([
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--images",
        "6",
        "--categories",
        "3",
        "--width",
        "32",
        "--height",
        "32",
        "--seed",
        "4",
    ]));
}

const SMALL_TUNING: &[&str] = &["--k", "8", "--m", "8", "--seed", "4"];

#[test]
fn stage_wise_run_matches_single_pipeline() {
    let dir = TempDir::new().unwrap();
    let d = |name: &str| dir.path().join(name);
    let s = |p: &Path| p.to_str().unwrap().to_string();
    synth_small(&d("data"));

    run_ok(tagparse().args(["segment", "--images", &s(&d("data/images")), "--out", &s(&d("seg"))]).args(SMALL_TUNING));
    run_ok(tagparse().args(["graph", "--regions", &s(&d("seg/regions.tsv")), "--out", &s(&d("graph.bin"))]).args(SMALL_TUNING));
    run_ok(
        tagparse()
            .args([
                "parse",
                "--regions",
                &s(&d("seg/regions.tsv")),
                "--tags",
                &s(&d("data/tags.tsv")),
                "--maps",
                &s(&d("seg/maps")),
                "--graph",
                &s(&d("graph.bin")),
                "--truth",
                &s(&d("data/truth")),
                "--out",
                &s(&d("staged")),
            ])
            .args(SMALL_TUNING),
    );
    run_ok(
        tagparse()
            .args([
                "pipeline",
                "--images",
                &s(&d("data/images")),
                "--tags",
                &s(&d("data/tags.tsv")),
                "--truth",
                &s(&d("data/truth")),
                "--out",
                &s(&d("single")),
            ])
            .args(SMALL_TUNING),
    );

    assert_same_file(&d("staged/labels.tsv"), &d("single/labels.tsv"));
    assert_same_file(&d("seg/regions.tsv"), &d("single/regions.tsv"));
    for i in 0..6 {
        let name = format!("labels/label_{i:05}.pgm");
        assert_same_file(&d(&format!("staged/{name}")), &d(&format!("single/{name}")));
        let map = format!("maps/region_{i:05}.pgm");
        assert_same_file(&d(&format!("seg/{map}")), &d(&format!("single/{map}")));
    }

    // Identical accuracy sections in both reports.
    let staged_report = report_without_timings(&d("staged/report.txt"));
    let single_report = report_without_timings(&d("single/report.txt"));
    let accuracy = |text: &str| {
        text.lines()
            .skip_while(|l| *l != "[accuracy]")
            .map(String::from)
            .collect::<Vec<_>>()
    };
    assert!(!accuracy(&staged_report).is_empty());
    assert_eq!(accuracy(&staged_report), accuracy(&single_report));

    // The standalone scorer agrees with the in-run accuracy section.
    let eval = run_ok(tagparse().args([
        "eval",
        "--pred",
        &s(&d("single/labels")),
        "--truth",
        &s(&d("data/truth")),
    ]));
    let eval_text = String::from_utf8(eval.stdout).unwrap();
    let average = |text: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix("average = ").map(String::from))
            .expect("report carries an average accuracy")
    };
    assert_eq!(average(&eval_text), average(&single_report));
}

#[test]
fn pipeline_reruns_bit_identically_and_report_reloads() {
    let dir = TempDir::new().unwrap();
    let d = |name: &str| dir.path().join(name);
    let s = |p: &Path| p.to_str().unwrap().to_string();
    synth_small(&d("data"));

    for out in ["one", "two"] {
        run_ok(
            tagparse()
                .args([
                    "pipeline",
                    "--images",
                    &s(&d("data/images")),
                    "--tags",
                    &s(&d("data/tags.tsv")),
                    "--out",
                    &s(&d(out)),
                ])
                .args(SMALL_TUNING),
        );
    }
    assert_same_file(&d("one/labels.tsv"), &d("two/labels.tsv"));
    assert_same_file(&d("one/regions.tsv"), &d("two/regions.tsv"));
    for i in 0..6 {
        for name in [format!("maps/region_{i:05}.pgm"), format!("labels/label_{i:05}.pgm")] {
            assert_same_file(&d(&format!("one/{name}")), &d(&format!("two/{name}")));
        }
    }
    assert_eq!(
        report_without_timings(&d("one/report.txt")),
        report_without_timings(&d("two/report.txt"))
    );

    // The run report itself reloads as the config of an identical rerun;
    // no tuning flags this time.
    run_ok(tagparse().args([
        "pipeline",
        "--images",
        &s(&d("data/images")),
        "--tags",
        &s(&d("data/tags.tsv")),
        "--out",
        &s(&d("three")),
        "--config",
        &s(&d("one/report.txt")),
    ]));
    assert_same_file(&d("one/labels.tsv"), &d("three/labels.tsv"));
    assert_same_file(&d("one/effective-config.txt"), &d("three/effective-config.txt"));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let d = |name: &str| dir.path().join(name);
    let s = |p: &Path| p.to_str().unwrap().to_string();
    synth_small(&d("data"));
    std::fs::write(d("run.cfg"), "k = 8\nm = 9\nseed = 4\n").unwrap();

    run_ok(tagparse().args([
        "pipeline",
        "--images",
        &s(&d("data/images")),
        "--tags",
        &s(&d("data/tags.tsv")),
        "--out",
        &s(&d("out")),
        "--config",
        &s(&d("run.cfg")),
        "--m",
        "7",
    ]));
    let echoed = String::from_utf8(read(&d("out/effective-config.txt"))).unwrap();
    assert!(echoed.contains("k = 8\n"), "file value kept:\n{echoed}");
    assert!(echoed.contains("m = 7\n"), "flag beats file:\n{echoed}");
    assert!(echoed.contains("seed = 4\n"), "{echoed}");
}

#[test]
fn usage_data_and_success_exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = |name: &str| dir.path().join(name);
    let s = |p: &Path| p.to_str().unwrap().to_string();

    // Clap-level usage problems exit 1; help and version exit 0.
    run_err(tagparse().arg("synth").arg("--bogus-flag"), 1);
    run_err(tagparse().arg("no-such-command"), 1);
    run_ok(tagparse().arg("--help"));
    run_ok(tagparse().arg("--version"));

    // Unknown config key: usage error, exit 1.
    std::fs::write(d("bad.cfg"), "mystery = 1\n").unwrap();
    let out = run_err(
        tagparse().args([
            "parse",
            "--regions",
            "x.tsv",
            "--tags",
            "y.tsv",
            "--out",
            &s(&d("out")),
            "--config",
            &s(&d("bad.cfg")),
        ]),
        1,
    );
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("usage error"), "{stderr}");
    assert!(stderr.contains("mystery"), "{stderr}");

    // Missing input file: data error, exit 2.
    let out = run_err(
        tagparse().args([
            "parse",
            "--regions",
            &s(&d("absent.tsv")),
            "--tags",
            "y.tsv",
            "--out",
            &s(&d("out")),
        ]),
        2,
    );
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("data error"), "{stderr}");
    assert!(stderr.contains("absent.tsv"), "{stderr}");

    // Corrupt region table: data error naming the file's problem.
    std::fs::write(d("mangled.tsv"), "region_id\twrong\theader\n").unwrap();
    let out = run_err(
        tagparse().args([
            "parse",
            "--regions",
            &s(&d("mangled.tsv")),
            "--tags",
            "y.tsv",
            "--out",
            &s(&d("out")),
        ]),
        2,
    );
    assert!(String::from_utf8(out.stderr).unwrap().contains("data error"));
}

#[test]
fn noise_adds_one_wrong_tag_to_the_chosen_fraction() {
    let dir = TempDir::new().unwrap();
    let d = |name: &str| dir.path().join(name);
    let s = |p: &Path| p.to_str().unwrap().to_string();
    run_ok(tagparse().args([
        "synth",
        "--out",
        &s(&d("data")),
        "--images",
        "8",
        "--categories",
        "6",
        "--width",
        "32",
        "--height",
        "32",
        "--seed",
        "9",
    ]));
    run_ok(tagparse().args([
        "noise",
        "--tags",
        &s(&d("data/tags.tsv")),
        "--percent",
        "50",
        "--seed",
        "7",
        "--categories",
        "6",
        "--out",
        &s(&d("noisy.tsv")),
    ]));

    let parse_tags = |path: &Path| -> BTreeMap<usize, Vec<usize>> {
        String::from_utf8(read(path))
            .unwrap()
            .lines()
            .skip(1)
            .map(|line| {
                let (image, tags) = line.split_once('\t').unwrap();
                let tags = tags.split(',').map(|t| t.parse().unwrap()).collect();
                (image.parse().unwrap(), tags)
            })
            .collect()
    };
    let clean = parse_tags(&d("data/tags.tsv"));
    let noisy = parse_tags(&d("noisy.tsv"));
    assert_eq!(clean.len(), 8);
    assert_eq!(noisy.len(), 8);

    let mut grew = 0;
    for (image, before) in &clean {
        let after = &noisy[image];
        assert!(
            before.iter().all(|t| after.contains(t)),
            "image {image} lost a tag"
        );
        match after.len() - before.len() {
            0 => {}
            1 => grew += 1,
            extra => panic!("image {image} gained {extra} tags"),
        }
    }
    assert_eq!(grew, 4, "half of eight images gain exactly one wrong tag");

    // 0% is the identity.
    run_ok(tagparse().args([
        "noise",
        "--tags",
        &s(&d("data/tags.tsv")),
        "--percent",
        "0",
        "--out",
        &s(&d("same.tsv")),
    ]));
    assert_same_file(&d("data/tags.tsv"), &d("same.tsv"));
}

#[test]
fn stale_cache_is_refused() {
    let dir = TempDir::new().unwrap();
    let d = |name: &str| dir.path().join(name);
    let s = |p: &Path| p.to_str().unwrap().to_string();
    synth_small(&d("data"));
    run_ok(tagparse().args(["segment", "--images", &s(&d("data/images")), "--out", &s(&d("seg"))]).args(SMALL_TUNING));
    run_ok(tagparse().args([
        "graph",
        "--regions",
        &s(&d("seg/regions.tsv")),
        "--out",
        &s(&d("graph.bin")),
        "--k",
        "9",
        "--m",
        "8",
    ]));

    // Same table, different k: the cache must not be accepted.
    let out = run_err(
        tagparse()
            .args([
                "parse",
                "--regions",
                &s(&d("seg/regions.tsv")),
                "--tags",
                &s(&d("data/tags.tsv")),
                "--graph",
                &s(&d("graph.bin")),
                "--out",
                &s(&d("out")),
            ])
            .args(SMALL_TUNING),
        2,
    );
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("cache"), "{stderr}");
    assert!(!d("out").exists(), "no partial output on failure");
}

#[test]
fn failed_rerun_keeps_previous_outputs() {
    let dir = TempDir::new().unwrap();
    let d = |name: &str| dir.path().join(name);
    let s = |p: &Path| p.to_str().unwrap().to_string();
    synth_small(&d("data"));
    run_ok(
        tagparse()
            .args([
                "pipeline",
                "--images",
                &s(&d("data/images")),
                "--tags",
                &s(&d("data/tags.tsv")),
                "--out",
                &s(&d("out")),
            ])
            .args(SMALL_TUNING),
    );
    let labels_before = read(&d("out/labels.tsv"));

    // Rerun into the same directory with a missing tag table: the previous
    // run must survive untouched.
    run_err(
        tagparse()
            .args([
                "pipeline",
                "--images",
                &s(&d("data/images")),
                "--tags",
                &s(&d("gone.tsv")),
                "--out",
                &s(&d("out")),
            ])
            .args(SMALL_TUNING),
        2,
    );
    assert_eq!(read(&d("out/labels.tsv")), labels_before);
    assert!(d("out/report.txt").exists());
    assert!(!d("out.partial").exists(), "staging directory cleaned up");

    // A directory that is not a previous run is never replaced.
    std::fs::create_dir(d("keep")).unwrap();
    std::fs::write(d("keep/notes.txt"), b"mine").unwrap();
    run_err(
        tagparse().args(["synth", "--out", &s(&d("keep")), "--images", "2", "--categories", "3"]),
        2,
    );
    assert_eq!(read(&d("keep/notes.txt")), b"mine");
}

#[test]
fn baseline_writes_the_same_artifact_shape() {
    let dir = TempDir::new().unwrap();
    let d = |name: &str| dir.path().join(name);
    let s = |p: &Path| p.to_str().unwrap().to_string();
    synth_small(&d("data"));
    run_ok(tagparse().args(["segment", "--images", &s(&d("data/images")), "--out", &s(&d("seg"))]).args(SMALL_TUNING));
    run_ok(
        tagparse()
            .args([
                "baseline-lgc",
                "--regions",
                &s(&d("seg/regions.tsv")),
                "--tags",
                &s(&d("data/tags.tsv")),
                "--maps",
                &s(&d("seg/maps")),
                "--truth",
                &s(&d("data/truth")),
                "--out",
                &s(&d("lgc")),
            ])
            .args(SMALL_TUNING),
    );
    assert!(d("lgc/labels.tsv").exists());
    assert!(d("lgc/labels/label_00000.pgm").exists());
    let report = String::from_utf8(read(&d("lgc/report.txt"))).unwrap();
    assert!(report.contains("command = baseline-lgc"), "{report}");
    assert!(report.contains("[accuracy]"), "{report}");
    assert!(!report.contains("[solve]"), "no solver iterations in the baseline:\n{report}");
}
