use std::fs;
use std::process::{Command, Output};

fn rmcfair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmcfair"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn validate_exit_codes() {
    let out = rmcfair(&["validate", "herman-ring-merge"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "herman-ring-merge: ok\n");

    let dir = tempfile::tempdir().unwrap();
    let src = rmcfair::benchmarks::entry("herman-ring-merge")
        .unwrap()
        .source;
    let path = dir.path().join("mutant.spec");
    fs::write(
        &path,
        src.replace("let Pick = T/Tm | B/Bm", "let Pick = T/Tm"),
    )
    .unwrap();
    let out = rmcfair(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("dead-end"), "{}", stdout(&out));
    assert!(stdout(&out).contains("`B B`"));

    fs::write(&path, "system broken\nalphabet a\nv1 = a(\n").unwrap();
    assert_eq!(code(&rmcfair(&["validate", path.to_str().unwrap()])), 3);
    assert_eq!(code(&rmcfair(&["validate", "no-such-system"])), 3);
}

#[test]
fn usage_errors_exit_with_3() {
    assert_eq!(code(&rmcfair(&["frobnicate"])), 3);
    assert_eq!(code(&rmcfair(&["oracle", "token-death"])), 3);
    assert_eq!(
        code(&rmcfair(&["oracle", "token-death", "--n", "2", "--bogus"])),
        3
    );
    assert_eq!(
        code(&rmcfair(&[
            "oracle",
            "token-death",
            "--n",
            "2",
            "--compare"
        ])),
        3
    );
    assert_eq!(code(&rmcfair(&["--help"])), 0);
}

#[test]
fn encode_emits_a_reparsable_system() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("enc.spec");
    let dot = dir.path().join("enc.dot");
    let out = rmcfair(&[
        "encode",
        "token-death",
        "--emit",
        spec.to_str().unwrap(),
        "--dot",
        dot.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&spec).unwrap();
    let parsed = rmcfair::spec::SystemSpec::parse(&text).unwrap();
    assert_eq!(parsed.name, "token-death-encoded");
    assert_eq!(code(&rmcfair(&["validate", spec.to_str().unwrap()])), 0);
    assert_eq!(
        fs::read_to_string(&dot).unwrap().matches("digraph").count(),
        6
    );
    // No temporary files are left behind.
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);

    // Without an annotator there is nothing to encode.
    assert_eq!(code(&rmcfair(&["encode", spec.to_str().unwrap()])), 3);
}

#[test]
fn check_proof_exit_codes() {
    let out = rmcfair(&["check-proof", "token-death", "token-death"]);
    assert_eq!(code(&out), 0);
    assert!(!stdout(&out).contains("FAIL"));

    let out = rmcfair(&["check-proof", "token-death", "token-death-reflexive"]);
    assert_eq!(code(&out), 1);
    assert!(
        stdout(&out).contains("vc2 strict order: FAIL ord relates `ε` to itself"),
        "{}",
        stdout(&out)
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.proof");
    fs::write(
        &path,
        rmcfair::benchmarks::proof_entry("token-death")
            .unwrap()
            .source,
    )
    .unwrap();
    assert_eq!(
        code(&rmcfair(&[
            "check-proof",
            "token-death",
            path.to_str().unwrap()
        ])),
        0
    );
    // The proof targets a different system.
    assert_eq!(
        code(&rmcfair(&[
            "check-proof",
            "herman-ring-merge",
            path.to_str().unwrap()
        ])),
        3
    );
}

#[test]
fn oracle_exit_codes_and_parallel_output() {
    let out = rmcfair(&["oracle", "herman-ring-merge", "--n", "3"]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    assert!(text.lines().nth(1).unwrap().starts_with("n=3 plain fails"));
    assert!(text.contains("  choose "));

    let args = [
        "oracle",
        "herman-ring-merge",
        "--n",
        "1,2,3",
        "--kfair",
        "2,4,8",
    ];
    let seq = rmcfair(&args);
    assert_eq!(code(&seq), 0);
    let par = rmcfair(&[&args[..], &["--jobs", "4"]].concat());
    assert_eq!(stdout(&seq), stdout(&par));
    assert_eq!(stdout(&seq).lines().count(), 10);

    let out = rmcfair(&[
        "oracle",
        "token-death",
        "--n",
        "2",
        "--kfair",
        "2",
        "--compare",
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("compare ok"));

    let out = Command::new(env!("CARGO_BIN_EXE_rmcfair"))
        .args(["oracle", "herman-ring-merge", "--n", "3", "--kfair", "2"])
        .env("RMCFAIR_STATE_BOUND", "10")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("unknown: state bound exceeded"));
}

#[test]
fn search_proves_and_emits() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("found.proof");
    let out = rmcfair(&["search", "token-death", "--emit", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).starts_with("token-death-encoded: proved"));
    assert_eq!(
        code(&rmcfair(&[
            "check-proof",
            "token-death",
            path.to_str().unwrap()
        ])),
        0
    );
    let first = fs::read_to_string(&path).unwrap();
    let again = rmcfair(&["search", "token-death", "--jobs", "3"]);
    assert!(stdout(&again).ends_with(&first));

    let out = rmcfair(&[
        "search",
        "herman-ring-merge",
        "--max-inv",
        "1",
        "--max-ord",
        "1",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("unknown"));
    assert_eq!(
        code(&rmcfair(&["search", "token-death", "--max-inv", "0"])),
        3
    );
}

#[test]
fn benchmarks_list_and_export() {
    let out = rmcfair(&["benchmarks"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).lines().any(|l| l == "moran-line-2\tBenchmark"));

    let dir = tempfile::tempdir().unwrap();
    let out = rmcfair(&["benchmarks", "--export", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let mut specs = 0;
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().unwrap() == "spec" {
            assert_eq!(
                code(&rmcfair(&["validate", path.to_str().unwrap()])),
                0,
                "{}",
                path.display()
            );
            specs += 1;
        }
    }
    assert_eq!(specs, rmcfair::benchmarks::entries().len());
}
