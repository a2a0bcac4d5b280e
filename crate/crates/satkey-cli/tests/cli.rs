//! Black-box checks of the satkey binary: exit taxonomy, file emission,
//! determinism and config round-trips.

use std::path::Path;
use std::process::{Command, Output};

fn satkey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_satkey"))
        .args(args)
        .output()
        .expect("binary should launch")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

// ----------------------------------------------------------------------------
// Exit taxonomy
// ----------------------------------------------------------------------------

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(satkey(&["--help"]).status.code(), Some(0));
    assert_eq!(satkey(&["--version"]).status.code(), Some(0));
    assert_eq!(satkey(&["pass", "--help"]).status.code(), Some(0));
}

#[test]
fn zero_key_is_still_a_successful_run() {
    let out = satkey(&["pass", "--config", "cqt-sat", "--elevation", "20"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(
        stdout(&out).contains("skl_bits=0"),
        "a 20 degree pass should report zero key, got: {}",
        stdout(&out)
    );
}

#[test]
fn usage_and_config_errors_exit_one() {
    let cases: &[&[&str]] = &[
        &["pass", "--config", "no-such-preset", "--elevation", "80"],
        &[
            "pass",
            "--config",
            "cqt-sat",
            "--elevation",
            "80",
            "--bogus-flag",
        ],
        &[
            "pass",
            "--config",
            "cqt-sat",
            "--elevation",
            "80",
            "--sampled",
        ],
        &[
            "pass",
            "--config",
            "cqt-sat",
            "--elevation",
            "80",
            "--seed",
            "7",
        ],
        &["pass", "--config", "cqt-sat", "--elevation", "95"],
        &["sweep", "--config", "cqt-sat", "--elevations", "60,40"],
        &[
            "pass",
            "--config",
            "cqt-sat",
            "--elevation",
            "80",
            "--override",
            "no.such.key=1",
        ],
        &[
            "accumulate",
            "--config",
            "cqt-sat",
            "--altitudes",
            "500",
            "--qber-cutoff",
            "0.9",
            "--schedule-seed",
            "1",
        ],
    ];
    for args in cases {
        let out = satkey(args);
        assert_eq!(
            out.status.code(),
            Some(1),
            "expected exit 1 for {args:?}, got {:?} (stderr: {})",
            out.status.code(),
            stderr(&out)
        );
    }
}

#[test]
fn runtime_errors_exit_two_and_name_the_module() {
    // The uplink curve starts at 10 degrees; lowering the visibility floor
    // sends the profile outside the curve domain at run time.
    let out = satkey(&[
        "pass",
        "--config",
        "qeyssat-uplink",
        "--elevation",
        "45",
        "--override",
        "ground_station.min_elevation_deg=5",
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(
        stderr(&out).contains("runtime error in linkbudget"),
        "runtime failures should name the module, got: {}",
        stderr(&out)
    );
}

// ----------------------------------------------------------------------------
// File emission and determinism
// ----------------------------------------------------------------------------

#[test]
fn sweep_emits_annotated_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = satkey(&[
        "sweep",
        "--config",
        "quarc-roks",
        "--elevations",
        "40,60,80",
        "--extra-losses",
        "0,2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let text = String::from_utf8(read(&dir.path().join("sweep.csv"))).unwrap();
    assert!(text.starts_with("# study: elevation_sweep\n"));
    assert!(text.contains("# config_hash: "));
    assert!(text.contains("# command_line: "));
    let data_rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .count();
    assert_eq!(data_rows, 7, "expected one header line plus a 3 x 2 grid");
    assert!(
        !dir.path().join("sweep.tmp").exists(),
        "atomic writes must not leave temporaries behind"
    );
}

#[test]
fn repeated_seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep",
        "--config",
        "qeyssat-downlink",
        "--elevations",
        "45,65,85",
        "--sampled",
        "--seed",
        "9",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ];
    assert_eq!(satkey(&args).status.code(), Some(0));
    let first = read(&dir.path().join("sweep.csv"));
    assert_eq!(satkey(&args).status.code(), Some(0));
    let second = read(&dir.path().join("sweep.csv"));
    assert_eq!(
        first, second,
        "identical invocations must rewrite identical bytes"
    );
}

#[test]
fn json_output_parses_and_matches_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = satkey(&[
        "sweep",
        "--config",
        "cqt-sat",
        "--elevations",
        "50,90",
        "--format",
        "json",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let value: serde_json::Value =
        serde_json::from_slice(&read(&dir.path().join("sweep.json"))).unwrap();
    assert_eq!(value["study"], "elevation_sweep");
    assert_eq!(value["rows"].as_array().unwrap().len(), 2);
    assert_eq!(value["x_name"], "max_elevation_deg");
}

// ----------------------------------------------------------------------------
// Config handling
// ----------------------------------------------------------------------------

#[test]
fn validate_round_trips_and_overrides_change_the_hash() {
    let dir_a = tempfile::tempdir().unwrap();
    let out_a = satkey(&[
        "validate",
        "--config",
        "quarc-roks",
        "--out-dir",
        dir_a.path().to_str().unwrap(),
    ]);
    assert_eq!(out_a.status.code(), Some(0), "stderr: {}", stderr(&out_a));
    let emitted = dir_a.path().join("validated.json");

    let dir_b = tempfile::tempdir().unwrap();
    let out_b = satkey(&[
        "validate",
        "--config",
        emitted.to_str().unwrap(),
        "--out-dir",
        dir_b.path().to_str().unwrap(),
    ]);
    assert_eq!(out_b.status.code(), Some(0), "stderr: {}", stderr(&out_b));

    assert_eq!(
        read(&emitted),
        read(&dir_b.path().join("validated.json")),
        "the normalized config must be a fixpoint of parse and emit"
    );

    let hash = |text: &str| {
        text.split("config_hash=")
            .nth(1)
            .and_then(|rest| rest.split_whitespace().next())
            .map(str::to_owned)
            .expect("summary should carry a config hash")
    };
    assert_eq!(hash(&stdout(&out_a)), hash(&stdout(&out_b)));

    let out_c = satkey(&[
        "validate",
        "--config",
        "quarc-roks",
        "--override",
        "altitude_km=550",
    ]);
    assert_eq!(out_c.status.code(), Some(0), "stderr: {}", stderr(&out_c));
    assert_ne!(
        hash(&stdout(&out_a)),
        hash(&stdout(&out_c)),
        "an override must change the reported config hash"
    );
}

#[test]
fn configs_load_from_disk_paths_too() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        satkey(&[
            "validate",
            "--config",
            "qeyssat-uplink",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ])
        .status
        .code(),
        Some(0)
    );
    let config_path = dir.path().join("validated.json");
    let out = satkey(&[
        "pass",
        "--config",
        config_path.to_str().unwrap(),
        "--elevation",
        "85",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("skl_bits="));
}
