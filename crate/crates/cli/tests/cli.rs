use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn visprog() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_visprog"));
    cmd.env_remove("VISPROG_MODEL_ENDPOINT")
        .env_remove("VISPROG_CRITIC_ENDPOINT")
        .env_remove("VISPROG_REFINER_ENDPOINT")
        .arg("--scenes")
        .arg(fixtures().join("scenes"));
    cmd
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn run_prints_result_or_exception() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("p.py");
    std::fs::write(&prog, "def execute_command(image):\n    return len(ImagePatch(image).find('lamp'))").unwrap();
    let out = ok(visprog().args(["run", "--scene", "room"]).arg(&prog).output().unwrap());
    assert_eq!(out, "1\n");
    let golden = fixtures().join("golden/figure_program.py");
    let out = ok(visprog().args(["run", "--scene", "room"]).arg(&golden).output().unwrap());
    assert!(out.starts_with("AttributeError"), "{out}");
}

#[test]
fn trace_matches_golden_feedback() {
    let out = ok(visprog()
        .args(["trace", "--scene", "room"])
        .arg(fixtures().join("golden/figure_program.py"))
        .output()
        .unwrap());
    let golden = std::fs::read_to_string(fixtures().join("golden/figure_feedback.txt")).unwrap();
    assert_eq!(out, golden);
}

#[test]
fn syntax_error_fails_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("bad.py");
    std::fs::write(&prog, "def execute_command(image)\n    return 1").unwrap();
    let out = visprog().args(["run", "--scene", "room"]).arg(&prog).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn pipeline_inject_generate_stats_eval() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let pool = fixtures().join("pool.jsonl");
    let natural = fixtures().join("natural_incorrect.jsonl");
    let out = ok(visprog()
        .args(["inject", "--mode", "mask-best", "--seed", "17", "--pool"])
        .arg(&pool)
        .arg("--out")
        .arg(p("mb.jsonl"))
        .output()
        .unwrap());
    assert!(out.starts_with("mask-best: "), "{out}");
    let again = ok(visprog()
        .args(["inject", "--mode", "mask-best", "--seed", "17", "--pool"])
        .arg(&pool)
        .arg("--out")
        .arg(p("mb2.jsonl"))
        .output()
        .unwrap());
    assert_eq!(out, again);
    assert_eq!(std::fs::read(p("mb.jsonl")).unwrap(), std::fs::read(p("mb2.jsonl")).unwrap());

    ok(visprog()
        .args(["inject", "--mode", "greedy", "--attempts", "1", "--pool"])
        .arg(&pool)
        .arg("--out")
        .arg(p("g.jsonl"))
        .output()
        .unwrap());

    let out = ok(visprog()
        .arg("dataset-gen")
        .arg("--records")
        .arg(p("mb.jsonl"))
        .arg("--natural")
        .arg(&natural)
        .arg("--out-dir")
        .arg(p("ds"))
        .output()
        .unwrap());
    let injected = lines(&p("mb.jsonl"));
    let n_natural = lines(&natural);
    assert_eq!(lines(&p("ds/critic.jsonl")), 2 * injected + n_natural, "{out}");
    assert_eq!(lines(&p("ds/refiner.jsonl")), injected);

    let table = ok(visprog()
        .args(["stats", "--dataset", "Toy", "--pool-correct"])
        .arg(&pool)
        .arg("--pool-incorrect")
        .arg(&natural)
        .arg("--greedy")
        .arg(p("g.jsonl"))
        .arg("--mask-best")
        .arg(p("mb.jsonl"))
        .output()
        .unwrap());
    let row: Vec<&str> = table.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[0], "Toy");
    assert_eq!(row[1], n_natural.to_string());
    assert_eq!(row[2], "200");
    assert_eq!(row[5], injected.to_string());

    let out = ok(visprog()
        .args(["eval", "--max-steps", "1"])
        .arg(p("mb.jsonl"))
        .arg("--out")
        .arg(p("report.json"))
        .output()
        .unwrap());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("report.json")).unwrap()).unwrap();
    assert_eq!(report["per_iteration"][1]["qa_accuracy"], 1.0, "{out}");
    assert_eq!(report["per_iteration"][0]["qa_accuracy"], 0.0);
}

#[test]
fn debug_emits_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let sample = dir.path().join("s.json");
    let first = std::fs::read_to_string(fixtures().join("natural_incorrect.jsonl")).unwrap();
    std::fs::write(&sample, first.lines().next().unwrap()).unwrap();
    let out = ok(visprog().args(["debug", "--max-steps", "2"]).arg(&sample).output().unwrap());
    let t: serde_json::Value = serde_json::from_str(&out).unwrap();
    // Without a stored correction the oracle refiner cannot act.
    assert_eq!(t["termination"], "aborted");
}

#[test]
fn config_file_and_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        format!(
            "[scenes]\ndir = {:?}\n[endpoints]\nmodel = \"http://127.0.0.1:1\"\ntimeout_ms = 500\nretries = 0\n",
            fixtures().join("scenes")
        ),
    )
    .unwrap();
    let pool = fixtures().join("pool.jsonl");
    let run = |env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_visprog"));
        cmd.env_remove("VISPROG_MODEL_ENDPOINT");
        if let Some(url) = env {
            cmd.env("VISPROG_MODEL_ENDPOINT", url);
        }
        cmd.arg("--config")
            .arg(&cfg)
            .args(["inject", "--pool"])
            .arg(&pool)
            .arg("--out")
            .arg(dir.path().join("x.jsonl"))
            .output()
            .unwrap()
    };
    let out = run(None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("127.0.0.1:1"));
    let out = run(Some("http://127.0.0.1:2"));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("127.0.0.1:2"));

    std::fs::write(dir.path().join("bad.toml"), "[inject]\ntemperature = 2\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_visprog"))
        .arg("--config")
        .arg(dir.path().join("bad.toml"))
        .args(["stats", "--dataset", "x", "--pool-correct", "a", "--pool-incorrect", "b"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn inject_through_served_model() {
    let dir = tempfile::tempdir().unwrap();
    let pool = fixtures().join("pool.jsonl");
    let small = dir.path().join("small.jsonl");
    let text = std::fs::read_to_string(&pool).unwrap();
    std::fs::write(&small, text.lines().take(3).collect::<Vec<_>>().join("\n")).unwrap();

    let mut server = Command::new(env!("CARGO_BIN_EXE_visprog"))
        .args(["serve-mock", "--addr", "127.0.0.1:0", "--train"])
        .arg(&pool)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut url = String::new();
    BufReader::new(server.stdout.take().unwrap()).read_line(&mut url).unwrap();
    let url = url.trim().to_string();

    let remote = visprog()
        .env("VISPROG_MODEL_ENDPOINT", &url)
        .args(["inject", "--mode", "greedy", "--attempts", "1", "--pool"])
        .arg(&small)
        .arg("--out")
        .arg(dir.path().join("remote.jsonl"))
        .output()
        .unwrap();
    let local = visprog()
        .args(["inject", "--mode", "greedy", "--attempts", "1", "--pool"])
        .arg(&small)
        .arg("--train")
        .arg(&pool)
        .arg("--out")
        .arg(dir.path().join("local.jsonl"))
        .output()
        .unwrap();
    server.kill().unwrap();
    server.wait().unwrap();
    let remote = ok(remote);
    assert!(remote.contains("of 3 programs"), "{remote}");
    ok(local);
}
