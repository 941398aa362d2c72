use std::path::PathBuf;

use visprog_core::exec::{execute, DEFAULT_STEP_LIMIT};
use visprog_core::harness::{
    evaluate, matches_ground_truth, score, Backends, ErrorSource, EvalConfig, EvalError, GroundTruth, Sample,
    TaskKind,
};
use visprog_core::inject::{inject_pool, DecodeMode, InjectConfig, PoolEntry, PromptTemplate};
use visprog_core::jsonl::read_jsonl;
use visprog_core::model::NGramLm;
use visprog_core::world::SceneStore;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn load() -> (SceneStore, Vec<PoolEntry>, Vec<PoolEntry>) {
    let store = SceneStore::load_dir(&fixtures().join("scenes")).unwrap();
    let pool = read_jsonl(&fixtures().join("pool.jsonl")).unwrap();
    let natural = read_jsonl(&fixtures().join("natural_incorrect.jsonl")).unwrap();
    (store, pool, natural)
}

fn direct_score(e: &PoolEntry, store: &SceneStore) -> f64 {
    let scenes = store.resolve(&e.scene_ids).unwrap();
    match execute(&e.program, &scenes, DEFAULT_STEP_LIMIT) {
        Ok(out) => score(&out, &e.ground_truth),
        Err(_) => 0.0,
    }
}

#[test]
fn zero_iterations_is_plain_execution() {
    let (store, pool, natural) = load();
    let entries: Vec<&PoolEntry> = pool.iter().step_by(5).chain(natural.iter()).collect();
    let samples: Vec<Sample> = entries.iter().map(|e| Sample::from_entry(e)).collect();
    let cfg = EvalConfig { iterations: 0, ..EvalConfig::default() };
    let report = evaluate(&samples, &store, &cfg, &Backends::Oracle).unwrap();
    assert_eq!(report.per_iteration.len(), 1);
    for o in &report.samples {
        let e = entries.iter().find(|e| e.id == o.id).unwrap();
        assert_eq!(o.scores, vec![direct_score(e, &store)], "{}", o.id);
        assert_eq!(o.termination, None);
    }
    let qa: Vec<f64> = entries
        .iter()
        .filter(|e| matches!(e.ground_truth, GroundTruth::Answer(_)))
        .map(|e| direct_score(e, &store))
        .collect();
    let expected = qa.iter().sum::<f64>() / qa.len() as f64;
    assert!((report.per_iteration[0].qa_accuracy.unwrap() - expected).abs() < 1e-12);
}

#[test]
fn oracle_repairs_every_injected_error() {
    let (store, pool, _) = load();
    let lm = NGramLm::train_on_texts(pool.iter().map(|e| e.program.as_str()), 3, 1.0);
    let cfg = InjectConfig { mode: DecodeMode::MaskBest, ..InjectConfig::default() };
    let records: Vec<_> = inject_pool(&pool[..30], &store, &lm, &PromptTemplate::default(), &cfg)
        .into_iter()
        .filter_map(|r| r.result.unwrap())
        .collect();
    assert!(!records.is_empty());
    let samples: Vec<Sample> = records.iter().map(Sample::from_record).collect();
    let report = evaluate(&samples, &store, &EvalConfig { iterations: 1, ..EvalConfig::default() }, &Backends::Oracle)
        .unwrap();
    for o in &report.samples {
        assert_eq!(o.scores[0], 0.0, "{}: injected programs start wrong", o.id);
        let kind = o.task_kind;
        let repaired = o.scores[1];
        match kind {
            TaskKind::Qa => assert_eq!(repaired, 1.0, "{}", o.id),
            TaskKind::Grounding => assert!(repaired >= 0.5, "{}", o.id),
        }
        assert_eq!(o.refinements, 1);
    }
    assert_eq!(report.tally.program_error + report.tally.vlm_error_simulated, samples.len());
}

#[test]
fn empty_dataset_is_an_error() {
    let (store, _, _) = load();
    let err = evaluate(&[], &store, &EvalConfig::default(), &Backends::Oracle).unwrap_err();
    assert!(matches!(err, EvalError::EmptyDataset));
    assert_eq!(err.to_string(), "empty dataset");
}

#[test]
fn missing_scene_counts_as_wrong() {
    let (store, pool, _) = load();
    let mut broken = Sample::from_entry(&pool[0]);
    broken.id = "zz-missing".into();
    broken.scene_ids = vec!["no-such-scene".into()];
    let samples = vec![Sample::from_entry(&pool[0]), broken];
    let report = evaluate(&samples, &store, &EvalConfig::default(), &Backends::Oracle).unwrap();
    let missing = report.samples.iter().find(|o| o.id == "zz-missing").unwrap();
    assert!(missing.error.as_deref().unwrap().contains("no-such-scene"));
    assert!(missing.scores.iter().all(|&s| s == 0.0));
    assert_eq!(missing.error_source, ErrorSource::ProgramError);
}

#[test]
fn correct_grounding_program_scores_one() {
    let (store, pool, _) = load();
    let grounding: Vec<Sample> = pool
        .iter()
        .filter(|e| matches!(e.ground_truth, GroundTruth::Box(_)))
        .map(Sample::from_entry)
        .collect();
    assert!(!grounding.is_empty());
    let report = evaluate(&grounding, &store, &EvalConfig::default(), &Backends::Oracle).unwrap();
    for m in &report.per_iteration {
        assert_eq!(m.grounding_iou, Some(1.0));
        assert_eq!(m.qa_accuracy, None);
    }
    assert!(report.samples.iter().all(|o| o.refinements == 0));
}

#[test]
fn faulty_perception_is_tallied_separately() {
    let (store, _, natural) = load();
    let samples: Vec<Sample> = natural.iter().map(Sample::from_entry).collect();
    let report = evaluate(&samples, &store, &EvalConfig::default(), &Backends::Oracle).unwrap();
    let mut expected_vlm = 0;
    let mut expected_correct = 0;
    for e in &natural {
        let scenes = store.resolve(&e.scene_ids).unwrap();
        let out = execute(&e.program, &scenes, DEFAULT_STEP_LIMIT).unwrap();
        if matches_ground_truth(&out, &e.ground_truth) {
            expected_correct += 1;
        } else if e.scene_ids.iter().any(|s| s.starts_with('f')) && out.queries.iter().any(|q| q.faulty) {
            expected_vlm += 1;
        }
    }
    assert!(expected_vlm > 0);
    assert_eq!(report.tally.vlm_error_simulated, expected_vlm);
    assert_eq!(report.tally.correct, expected_correct);
    assert_eq!(
        report.tally.correct + report.tally.vlm_error_simulated + report.tally.program_error,
        natural.len()
    );
    let ids: Vec<&str> = report.samples.iter().map(|o| o.id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}
