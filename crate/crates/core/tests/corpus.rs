use std::path::PathBuf;

use visprog_core::exec::{execute_or_syntax_error, DEFAULT_STEP_LIMIT};
use visprog_core::harness::matches_ground_truth;
use visprog_core::inject::PoolEntry;
use visprog_core::jsonl::read_jsonl;
use visprog_core::world::SceneStore;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn check(file: &str, expect_correct: bool) {
    let store = SceneStore::load_dir(&fixtures().join("scenes")).unwrap();
    let entries: Vec<PoolEntry> = read_jsonl(&fixtures().join(file)).unwrap();
    let mut wrong = Vec::new();
    for e in &entries {
        let scenes = store.resolve(&e.scene_ids).unwrap();
        let out = execute_or_syntax_error(&e.program, &scenes, DEFAULT_STEP_LIMIT);
        if matches_ground_truth(&out, &e.ground_truth) != expect_correct {
            wrong.push(format!("{}: {:?} {:?} vs {:?}", e.id, out.result, out.exception, e.ground_truth));
        }
    }
    assert!(wrong.is_empty(), "{}", wrong.join("\n"));
}

#[test]
fn pool_programs_match_ground_truth() {
    check("pool.jsonl", true);
}

#[test]
fn natural_programs_do_not() {
    check("natural_incorrect.jsonl", false);
}
