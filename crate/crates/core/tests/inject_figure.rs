//! The failing program of the feedback figure can be produced by injection.

use std::path::PathBuf;
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use visprog_core::dsl::{self, ast::NodeKind, enumerate_subtrees};
use visprog_core::exec::render_full;
use visprog_core::harness::GroundTruth;
use visprog_core::inject::{
    inject_error, try_candidate, DecodeMode, ErrorCategory, InjectConfig, PoolEntry, PromptTemplate,
};
use visprog_core::model::{LanguageModel, ModelError, TokenDistribution, Vocabulary};
use visprog_core::world::SceneStore;

const CORRECT: &str = "def execute_command(image) -> str:\n    image_patch = ImagePatch(image)\n    image_patch = best_image_match(list_patches=[ImagePatch(image)], content=['item'])\n    return image_patch.simple_query('What item of furniture is not large?')";
const RECOVERY: &str = " best_image_match(list_patches=[ImagePatch(image)], content=['item'], return_index=True)";

/// Emits a fixed token script, one token per call, then EOS.
struct ScriptedModel {
    vocab: Vocabulary,
    script: Vec<u32>,
    step: Mutex<usize>,
}

impl ScriptedModel {
    fn new(text: &str) -> Self {
        let vocab = Vocabulary::build([CORRECT, text]);
        let script = vocab.tokenize(text);
        ScriptedModel { vocab, script, step: Mutex::new(0) }
    }
}

impl LanguageModel for ScriptedModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_distribution(&self, _context: &[u32]) -> Result<TokenDistribution, ModelError> {
        let mut step = self.step.lock().unwrap();
        let id = self.script.get(*step).copied().unwrap_or(self.vocab.eos());
        *step += 1;
        let mut p = vec![0.0; self.vocab.len()];
        p[id as usize] = 1.0;
        Ok(TokenDistribution::new(p).unwrap())
    }
}

fn entry() -> PoolEntry {
    PoolEntry {
        id: "figure".into(),
        question: "What item of furniture is not large?".into(),
        scene_ids: vec!["room".into()],
        ground_truth: GroundTruth::Answer("lamp".into()),
        program: CORRECT.into(),
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[test]
fn figure_program_is_reachable() {
    let store = SceneStore::load_dir(&fixtures().join("scenes")).unwrap();
    let scenes = store.resolve(&["room".to_string()]).unwrap();
    let ast = dsl::parse(CORRECT).unwrap();
    let call = enumerate_subtrees(&ast)
        .into_iter()
        .find(|s| s.kind == NodeKind::Call && s.span.text(CORRECT).starts_with("best_image_match"))
        .unwrap();
    let model = ScriptedModel::new(RECOVERY);
    let cfg = InjectConfig { mode: DecodeMode::Greedy, ..InjectConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cand = try_candidate(&entry(), &call.span, &scenes, &model, &PromptTemplate::default(), &cfg, &mut rng).unwrap();

    let figure = std::fs::read_to_string(fixtures().join("golden/figure_program.py")).unwrap();
    assert_eq!(cand.program, figure.trim_end());
    let golden = std::fs::read_to_string(fixtures().join("golden/figure_feedback.txt")).unwrap();
    assert_eq!(render_full(&cand.outcome), golden);
    let loc = cand.loc.unwrap();
    assert_eq!(loc.text(&cand.program), RECOVERY.trim_start());
}

#[test]
fn identical_recovery_is_rejected() {
    let store = SceneStore::load_dir(&fixtures().join("scenes")).unwrap();
    let scenes = store.resolve(&["room".to_string()]).unwrap();
    // The scripted model always reproduces the masked text's first token
    // sequence for the call; repeating the original call is a no-op.
    let model = ScriptedModel::new(" best_image_match(list_patches=[ImagePatch(image)], content=['item'])");
    let ast = dsl::parse(CORRECT).unwrap();
    let call = enumerate_subtrees(&ast)
        .into_iter()
        .find(|s| s.kind == NodeKind::Call && s.span.text(CORRECT).starts_with("best_image_match"))
        .unwrap();
    let cfg = InjectConfig { mode: DecodeMode::Greedy, ..InjectConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cand = try_candidate(&entry(), &call.span, &scenes, &model, &PromptTemplate::default(), &cfg, &mut rng).unwrap();
    assert_eq!(cand.program, CORRECT);
    assert_eq!(cand.outcome.result.as_deref(), Some("lamp"));
}

#[test]
fn injected_record_carries_category_and_spans() {
    let store = SceneStore::load_dir(&fixtures().join("scenes")).unwrap();
    let scenes = store.resolve(&["room".to_string()]).unwrap();
    // Whatever subtree is drawn, the scripted text replaces it; stop after
    // the first attempt that diverges.
    let model = ScriptedModel::new(" undefined_thing");
    let cfg = InjectConfig { mode: DecodeMode::Greedy, attempts: 1, ..InjectConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let record = inject_error(&entry(), &scenes, &model, &PromptTemplate::default(), &cfg, &mut rng)
        .unwrap()
        .expect("an undefined name always changes the result");
    assert_eq!(record.attempt, 1);
    assert_eq!(record.loc.text(&record.program_incorrect).trim_start(), "undefined_thing");
    assert_eq!(
        &record.program_correct[..record.loc_correct.start_byte],
        &record.program_incorrect[..record.loc.start_byte]
    );
    assert!(matches!(
        record.error_category,
        ErrorCategory::UndefinedName | ErrorCategory::Other
    ));
}
