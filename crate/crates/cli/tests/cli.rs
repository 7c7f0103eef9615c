use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liouville")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn help_lists_every_subcommand() {
    let o = run(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for s in ["field-check", "boundary", "critical", "bulk", "transform", "ballmass", "coupling", "identities"] {
        assert!(text.contains(s), "{s}");
    }
}

#[test]
fn identities_succeed_and_write_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("id");
    let o = run(&["identities", "--out", out.to_str().unwrap(), "--workers", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("identity_checks.json").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn unknown_key_is_a_config_error_with_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "experiment = \"bulk_specdim\"\n[model]\ngama = 1.0\n");
    let o = run(&["bulk", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("did you mean `gamma`"), "{}", stderr(&o));
}

#[test]
fn supercritical_gamma_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"experiment": "bulk_specdim", "model": {"gamma": 2.0}}"#);
    let o = run(&["bulk", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("γ ∈ [0,2) required"), "{}", stderr(&o));
}

#[test]
fn subcommand_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "experiment = \"coupling_check\"\n");
    assert_eq!(code(&run(&["bulk", "--config", &cfg])), 1);
}

#[test]
fn bad_flags_are_config_errors() {
    assert_eq!(code(&run(&["coupling", "--workers", "0"])), 1);
    assert_eq!(code(&run(&["coupling", "--seed", "minus-one"])), 1);
    assert_eq!(code(&run(&["nonsense"])), 1);
}

#[test]
fn runtime_failure_exits_two_and_cleans_up() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    // the grid [0.5, 1.5] does not contain the anchor 0 of the boundary map
    let cfg = write(dir.path(), "c.toml", "experiment = \"boundary_specdim\"\n[grid]\norigin_x = 0.5\nextent = 1.0\n[boundary]\nx = 1.0\n");
    let o = run(&["boundary", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("boundary_specdim"));
    assert_eq!(fs::read_dir(&out).unwrap().count(), 0);
}

#[test]
fn seed_override_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "experiment = \"coupling_check\"\n[mc]\nreplicates = 100\n[coupling]\nn_steps = 1000\n");
    let mut outs = Vec::new();
    for (name, seed) in [("a", "5"), ("b", "5"), ("c", "6")] {
        let out = dir.path().join(name);
        let o = run(&["coupling", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        outs.push(fs::read(out.join("coupling.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    assert_ne!(outs[0], outs[2]);
}

#[test]
fn printed_config_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["transform", "--seed", "18446744073709551615", "--quenched", "--print-config"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("quenched = true"));
    let cfg = write(dir.path(), "c.toml", &text);
    let again = run(&["transform", "--config", &cfg, "--print-config"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}
