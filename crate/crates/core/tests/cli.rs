use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ftni::faultlab::{uniform_environment, FaultProneSystem};
use ftni::machine::{assemble, MachineConfig, RiscSystem};
use ftni::seccomp::Level;
use num::{BigRational, Zero};
use tempfile::TempDir;

fn ftni(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftni")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const LEAK: &str = "load r2 1\nout low r2\n";

#[test]
fn compile_writes_assembly_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let src = file(&dir, "p.while", "low x; high h; x := 1; h := x; out low x\n");
    let o = ftni(&["compile", s(&src)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let asm = std::fs::read_to_string(dir.path().join("p.asm")).unwrap();
    assert!(assemble(&asm).is_ok());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert_eq!(meta["v2p"]["x"], 0);
    assert_eq!(meta["v2p"]["h"], 1);
    assert!(stdout(&o).contains("instructions"));
}

#[test]
fn compile_reports_type_and_syntax_errors() {
    let dir = TempDir::new().unwrap();
    let bad = file(&dir, "bad.while", "low x; high h; x := h\n");
    let o = ftni(&["compile", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rule :="), "{}", stderr(&o));
    let broken = file(&dir, "broken.while", "low x;\nx := := 1\n");
    let o = ftni(&["compile", s(&broken)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(":2:"), "{}", stderr(&o));
    assert_eq!(ftni(&["compile", s(&dir.path().join("missing.while"))]).status.code(), Some(1));
}

#[test]
fn run_uses_sidecar_variables() {
    let dir = TempDir::new().unwrap();
    let src = file(&dir, "p.while", "low x; x := x + 1; out low x\n");
    assert_eq!(ftni(&["compile", s(&src)]).status.code(), Some(0));
    let asm = dir.path().join("p.asm");
    let meta = dir.path().join("p.json");
    let o = ftni(&["run", s(&asm), "--meta", s(&meta), "--mem", "x=4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let last = stdout(&o).lines().last().unwrap().to_string();
    assert!(last.ends_with("; low!5; flipped={}"), "{last}");
}

#[test]
fn inject_flips_bits_at_the_scripted_step() {
    let dir = TempDir::new().unwrap();
    let asm = file(&dir, "p.asm", "movek r0 0\nout low r0\n");
    let script = file(&dir, "f.txt", "# flip the low bit before the output\n2 r0_0\n");
    let o = ftni(&["inject", s(&asm), "--faults", s(&script)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "0; tau; flipped={}\n1; low!1; flipped={r0_0}\n");
    assert_eq!(ftni(&["inject", s(&asm)]).status.code(), Some(2));
    let tolerant = file(&dir, "t.txt", "1 pc_0\n");
    assert_eq!(ftni(&["inject", s(&asm), "--faults", s(&tolerant)]).status.code(), Some(1));
}

#[test]
fn check_secure_and_violating() {
    let dir = TempDir::new().unwrap();
    let ok = file(&dir, "ok.asm", "movek r0 1\nout low r0\n");
    let leak = file(&dir, "leak.asm", LEAK);
    let m = ["--width", "1", "--mem-levels", "LH"];
    for mode in ["ss", "poni"] {
        let o = ftni(&[&["check", s(&ok), "--mode", mode][..], &m].concat());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["status"], "secure-up-to-bound");
        let o = ftni(&[&["check", s(&leak), "--mode", mode][..], &m].concat());
        assert_eq!(o.status.code(), Some(3));
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["status"], "violation");
        assert!(v["witness"]["trace"].as_array().is_some_and(|t| !t.is_empty()));
    }
}

#[test]
fn check_pni_needs_an_environment() {
    let dir = TempDir::new().unwrap();
    let leak = file(&dir, "leak.asm", LEAK);
    let o = ftni(&["check", s(&leak), "--mode", "pni", "--width", "1", "--mem-levels", "LH"]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = MachineConfig::new(1, MachineConfig::default_registers(), vec![Level::L, Level::H]);
    let sys = RiscSystem::new(assemble(LEAK).unwrap(), cfg).unwrap();
    let scope = vec![sys.layout().lookup("r0_0").unwrap()];
    let env = uniform_environment(&BigRational::zero(), &scope).unwrap();
    let env_path = file(&dir, "env.txt", &env.to_text(sys.layout()));
    let o = ftni(&[
        "check",
        s(&leak),
        "--mode",
        "pni",
        "--width",
        "1",
        "--mem-levels",
        "LH",
        "--env",
        s(&env_path),
        "--scope",
        "r0_0",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["witness"]["probabilities"], serde_json::json!(["1", "0"]));
}

#[test]
fn check_budget_and_config_errors() {
    let dir = TempDir::new().unwrap();
    let leak = file(&dir, "leak.asm", LEAK);
    let o = Command::new(env!("CARGO_BIN_EXE_ftni"))
        .args(["check", s(&leak), "--mode", "ss", "--width", "1", "--mem-levels", "LH"])
        .env("FTNI_BUDGET", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("budget"));
    let o = ftni(&["check", s(&leak), "--mode", "poni", "--width", "1", "--mem-levels", "LH", "--scope", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    let o = ftni(&["check", s(&leak), "--mode", "poni", "--depth", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(ftni(&["check", s(&leak), "--mode", "sideways"]).status.code(), Some(2));
}

#[test]
fn demo_hash_matches_the_reference() {
    let o = ftni(&["demo-hash"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().count() >= 5);
    assert!(out.lines().all(|l| l.ends_with(", ok")), "{out}");
    assert_eq!(ftni(&["demo-hash", "--width", "4"]).status.code(), Some(2));
}
