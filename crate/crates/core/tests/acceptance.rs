//! Acceptance checks. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; the process exits non-zero
//! when any criterion fails.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use visprog_core::debugger::{
    decode_loc, encode_loc, run_debug_loop, BackendError, DebugSessionConfig, FixedCritic,
    IdentityRefiner, OracleCritic, OracleRefiner, Refiner, Termination,
};
use visprog_core::dsl::{self, pretty_print, structurally_equal, SourceSpan};
use visprog_core::exec::{execute, execute_or_syntax_error, render_full, DEFAULT_BUDGET, DEFAULT_STEP_LIMIT};
use visprog_core::harness::{matches_ground_truth, StatsRow};
use visprog_core::inject::{
    inject_pool, mask_best_sample, mask_best_step, serialize_training_records, DatasetRecord,
    DecodeMode, InjectConfig, MaskBestConfig, PoolEntry, PromptTemplate, RowSource,
};
use visprog_core::jsonl::{read_jsonl, to_jsonl};
use visprog_core::model::{
    LanguageModel, ModelError, NGramLm, TokenDistribution, Vocabulary, T_CORRECT, T_INCORRECT,
};
use visprog_core::world::{iou, SceneStore};

// Pinned tolerances.
const TAIL_SUM_TOL: f64 = 1e-9;
const TAIL_RATIO_REL_TOL: f64 = 1e-9;
const IOU_TOL: f64 = 1e-6;
const GATE_THRESHOLD: f64 = 0.9;
const EFFICACY_MIN_RATIO: f64 = 1.5;
const INJECT_SEED: u64 = 17;

struct Report {
    failures: usize,
}

impl Report {
    fn record(&mut self, id: u32, name: &str, limit: Duration, run: impl FnOnce() -> Result<String, String>) {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (status, detail) = match result {
            Ok(d) if elapsed <= limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over the {limit:?} runtime limit")),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            self.failures += 1;
        }
        println!("criterion {id:>2} {status} {name}: {detail} [{:.3}s]", elapsed.as_secs_f64());
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Corpus {
    store: SceneStore,
    pool: Vec<PoolEntry>,
    natural: Vec<PoolEntry>,
    model: NGramLm,
}

fn load_corpus() -> Corpus {
    let f = fixtures();
    let store = SceneStore::load_dir(&f.join("scenes")).expect("scene fixtures load");
    let pool: Vec<PoolEntry> = read_jsonl(&f.join("pool.jsonl")).expect("pool loads");
    let natural: Vec<PoolEntry> = read_jsonl(&f.join("natural_incorrect.jsonl")).expect("natural pool loads");
    let model = NGramLm::train_on_texts(pool.iter().map(|e| e.program.as_str()), 3, 1.0);
    Corpus { store, pool, natural, model }
}

fn injected(corpus: &Corpus, mode: DecodeMode, attempts: usize) -> Vec<DatasetRecord> {
    let cfg = InjectConfig {
        mode,
        attempts,
        mask_best: MaskBestConfig { seed: INJECT_SEED, ..MaskBestConfig::default() },
        ..InjectConfig::default()
    };
    let results = inject_pool(&corpus.pool, &corpus.store, &corpus.model, &PromptTemplate::default(), &cfg);
    results
        .into_iter()
        .filter_map(|r| r.result.expect("pool programs are correct and parse"))
        .collect()
}

fn golden_feedback() -> Result<String, String> {
    let f = fixtures();
    let program = std::fs::read_to_string(f.join("golden/figure_program.py")).map_err(|e| e.to_string())?;
    let expected = std::fs::read_to_string(f.join("golden/figure_feedback.txt")).map_err(|e| e.to_string())?;
    let store = SceneStore::load_dir(&f.join("scenes")).map_err(|e| e.to_string())?;
    let room = store.get("room").map_err(|e| e.to_string())?;
    ensure(room.width == 500 && room.height == 375, || "room fixture is not 500x375".into())?;
    let out = execute(program.trim_end(), &[room], DEFAULT_STEP_LIMIT).map_err(|e| e.to_string())?;
    let got = render_full(&out);
    for needle in [
        "-> None",
        "New var:....... image_patch = ImagePatch(left=0, right=500, upper=375, lower=0, height=375, width=500, horizontal_center=250.0, vertical_center=187.5)",
        "Modified var:.. image_patch = 0",
        "Call ended by exception",
    ] {
        ensure(got.contains(needle), || format!("missing line {needle:?}"))?;
    }
    ensure(got == expected, || format!("feedback differs:\n{got}"))?;
    Ok(format!("{} bytes identical", got.len()))
}

fn random_distribution(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.gen_range(2..=40);
    let peak = rng.gen_range(0.0..8.0);
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().powf(1.0 + peak)).collect();
    if rng.gen_bool(0.2) {
        let i = rng.gen_range(0..n);
        w[i] += rng.gen_range(0.0..200.0);
    }
    if rng.gen_bool(0.05) {
        let i = rng.gen_range(0..n);
        w[i] = 0.0;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// A model whose distribution is a pseudo-random function of the context.
struct HashedModel {
    vocab: Vocabulary,
}

impl LanguageModel for HashedModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_distribution(&self, context: &[u32]) -> Result<TokenDistribution, ModelError> {
        let seed = context.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &t| {
            (h ^ u64::from(t)).wrapping_mul(0x1000_0000_01b3)
        });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = random_distribution(&mut rng);
        p.resize(self.vocab.len(), 0.0);
        p[0] *= 0.1; // keep EOS rare so runs are long
        let total: f64 = p.iter().sum();
        Ok(TokenDistribution::new(p.iter().map(|x| x / total).collect()).expect("valid distribution"))
    }
}

fn mask_best_math() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut max_sum_err = 0.0f64;
    let mut max_ratio_err = 0.0f64;
    let mut fired_count = 0;
    let mut degenerate = 0;
    for case in 0..10_000 {
        let probs = random_distribution(&mut rng);
        let p = TokenDistribution::new(probs.clone()).map_err(|e| e.to_string())?;
        // Oracle top two by a full sort; ties resolve to the lower index.
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
        let (top, second) = (order[0], order[1]);
        if probs[top] == 1.0 {
            ensure(p.tail().is_none(), || format!("case {case}: degenerate tail was built"))?;
            degenerate += 1;
            continue;
        }
        let tail = p.tail().ok_or_else(|| format!("case {case}: no tail"))?;
        let t = tail.probs();
        ensure(t[top] == 0.0, || format!("case {case}: tail keeps mass at the argmax"))?;
        max_sum_err = max_sum_err.max((t.iter().sum::<f64>() - 1.0).abs());
        let rest: Vec<usize> = (0..probs.len()).filter(|&i| i != top && probs[i] > 0.0).collect();
        for w in rest.windows(2) {
            let (i, j) = (w[0], w[1]);
            let want = probs[i] / probs[j];
            let got = t[i] / t[j];
            max_ratio_err = max_ratio_err.max(((got - want) / want).abs());
        }
        let n_masked = rng.gen_range(0..3usize);
        let cfg = MaskBestConfig { max_masked: 2, ..MaskBestConfig::default() };
        let (_, fired) = mask_best_step(&p, n_masked, &cfg);
        let expect = n_masked < 2 && probs[top] - probs[second] < GATE_THRESHOLD;
        ensure(fired == expect, || format!("case {case}: gate fired={fired}, expected {expect}"))?;
        fired_count += usize::from(fired);
    }
    ensure(max_sum_err <= TAIL_SUM_TOL, || format!("tail sum error {max_sum_err:e}"))?;
    ensure(max_ratio_err <= TAIL_RATIO_REL_TOL, || format!("ratio error {max_ratio_err:e}"))?;

    let model = HashedModel { vocab: Vocabulary::base() };
    let mut runs = 0;
    for n in 0..5usize {
        for seed in 0..40u64 {
            let cfg = MaskBestConfig { max_masked: n, max_tokens: 32, seed, ..MaskBestConfig::default() };
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let prompt = [7 + seed as u32];
            let d = mask_best_sample(&model, &prompt, &cfg, None, &mut r).map_err(|e| e.to_string())?;
            ensure(d.masked_steps.len() <= n, || format!("N={n}: {} masked steps", d.masked_steps.len()))?;
            runs += 1;
        }
    }
    Ok(format!(
        "10000 distributions, max |sum-1| {max_sum_err:.1e}, max ratio error {max_ratio_err:.1e}, gate fired {fired_count} times, {degenerate} degenerate; {runs} decoding runs within N"
    ))
}

fn efficacy(corpus: &Corpus) -> Result<String, String> {
    let pool = corpus.pool.len();
    let rate = |mode, attempts| injected(corpus, mode, attempts).len() as f64 / pool as f64;
    let greedy = rate(DecodeMode::Greedy, 1);
    let mask_best = rate(DecodeMode::MaskBest, 1);
    let greedy5 = rate(DecodeMode::Greedy, 5);
    let mask_best5 = rate(DecodeMode::MaskBest, 5);
    let ratio = mask_best / greedy;
    let detail = format!(
        "one attempt per program: greedy {:.1}%, mask-best {:.1}%, ratio {ratio:.2} (need >= {EFFICACY_MIN_RATIO}); five attempts: greedy {:.1}%, mask-best {:.1}%, ratio {:.2}",
        100.0 * greedy,
        100.0 * mask_best,
        100.0 * greedy5,
        100.0 * mask_best5,
        mask_best5 / greedy5
    );
    ensure(pool >= 200, || format!("pool has only {pool} programs"))?;
    ensure(ratio >= EFFICACY_MIN_RATIO, || detail.clone())?;
    Ok(detail)
}

/// Checks a record from scratch: byte comparison of the text around the
/// edited spans, and fresh executions of both programs.
fn independent_check(r: &DatasetRecord, store: &SceneStore) -> Result<(), String> {
    let (c, i) = (r.program_correct.as_bytes(), r.program_incorrect.as_bytes());
    let (ls, le) = (r.loc.start_byte, r.loc.end_byte);
    let (cs, ce) = (r.loc_correct.start_byte, r.loc_correct.end_byte);
    if ls != cs || le > i.len() || ce > c.len() || c[..cs] != i[..ls] || c[ce..] != i[le..] {
        return Err(format!("{}: programs differ outside loc", r.id));
    }
    let scenes = store.resolve(&r.scene_ids).map_err(|e| e.to_string())?;
    if !matches_ground_truth(&execute_or_syntax_error(&r.program_correct, &scenes, DEFAULT_STEP_LIMIT), &r.ground_truth) {
        return Err(format!("{}: correct program misses the ground truth", r.id));
    }
    if matches_ground_truth(&execute_or_syntax_error(&r.program_incorrect, &scenes, DEFAULT_STEP_LIMIT), &r.ground_truth) {
        return Err(format!("{}: incorrect program matches the ground truth", r.id));
    }
    Ok(())
}

fn record_validity(corpus: &Corpus, records: &[DatasetRecord]) -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("records.jsonl");
    std::fs::write(&path, to_jsonl(records)).map_err(|e| e.to_string())?;
    let back: Vec<DatasetRecord> = read_jsonl(&path).map_err(|e| e.to_string())?;
    ensure(back.len() == records.len(), || "JSONL lost records".into())?;
    ensure(!back.is_empty(), || "no records were emitted".into())?;
    let bad: Vec<String> = back.iter().filter_map(|r| independent_check(r, &corpus.store).err()).collect();
    ensure(bad.is_empty(), || format!("{} invalid records, first: {}", bad.len(), bad[0]))?;
    Ok(format!("{}/{} records valid", back.len(), back.len()))
}

struct CountingRefiner<'a> {
    inner: &'a dyn Refiner,
    calls: AtomicUsize,
}

impl Refiner for CountingRefiner<'_> {
    fn refine(&self, program: &str, feedback: &str, loc: &SourceSpan) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.refine(program, feedback, loc)
    }
}

fn oracle_loop(corpus: &Corpus, records: &[DatasetRecord]) -> Result<String, String> {
    let cfg = DebugSessionConfig { score_threshold: 0.5, max_steps: 3, ..DebugSessionConfig::default() };
    let mut fixed = 0;
    let mut accept_calls = 0;
    let mut reject_iterations = Vec::new();
    for r in records {
        let scenes = corpus.store.resolve(&r.scene_ids).map_err(|e| e.to_string())?;
        let critic = OracleCritic {
            scenes: scenes.clone(),
            ground_truth: Some(r.ground_truth.clone()),
            injected_loc: Some(r.loc),
        };
        let refiner = OracleRefiner {
            correct_text: Some(r.program_correct[r.loc_correct.start_byte..r.loc_correct.end_byte].to_string()),
        };
        let t = run_debug_loop(&r.program_incorrect, &scenes, &critic, &refiner, &cfg);
        let out = execute_or_syntax_error(&t.final_program, &scenes, DEFAULT_STEP_LIMIT);
        if t.termination == Termination::CriticAccepted
            && t.refinements() == 1
            && matches_ground_truth(&out, &r.ground_truth)
        {
            fixed += 1;
        }

        let counting = CountingRefiner { inner: &IdentityRefiner, calls: AtomicUsize::new(0) };
        let t = run_debug_loop(&r.program_incorrect, &scenes, &FixedCritic::accepting(), &counting, &cfg);
        ensure(t.termination == Termination::CriticAccepted, || format!("{}: accepting critic did not accept", r.id))?;
        accept_calls += counting.calls.load(Ordering::Relaxed);

        let t = run_debug_loop(&r.program_incorrect, &scenes, &FixedCritic::rejecting(), &IdentityRefiner, &cfg);
        reject_iterations.push(t.iterations.len());
    }
    let n = records.len();
    ensure(n > 0, || "no records".into())?;
    ensure(fixed == n, || format!("oracle loop fixed {fixed}/{n} in one refinement"))?;
    ensure(accept_calls == 0, || format!("accepting critic led to {accept_calls} refiner calls"))?;
    ensure(reject_iterations.iter().all(|&k| k == 3), || {
        format!("rejecting critic ran {reject_iterations:?} iterations")
    })?;
    Ok(format!(
        "{fixed}/{n} accepted after one refinement; accepting critic: 0 refiner calls; rejecting critic: 3 iterations each"
    ))
}

fn loc_codec(corpus: &Corpus) -> Result<String, String> {
    let program = std::fs::read_to_string(fixtures().join("golden/figure_program.py")).map_err(|e| e.to_string())?;
    let program = program.trim_end();
    let line = "return image_patch.simple_query('What item of furniture is not large?')";
    let start = program.find(line).ok_or("figure line not found")?;
    let loc = SourceSpan::from_bytes(program, start, start + line.len()).ok_or("bad span")?;
    let expected = "def execute_command(image) -> str:\n    image_patch = ImagePatch(image)\n    image_patch = best_image_match(list_patches=[ImagePatch(image)], content=['item'], return_index=True)\n    <BUG>return image_patch.simple_query('What item of furniture is not large?')<BUG/>";
    let marked = encode_loc(program, &loc).map_err(|e| e.to_string())?;
    ensure(marked == expected, || format!("marked text differs:\n{marked}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let programs: Vec<&str> = corpus.pool.iter().chain(&corpus.natural).map(|e| e.program.as_str()).collect();
    for case in 0..1000 {
        let p = programs[rng.gen_range(0..programs.len())];
        let a = rng.gen_range(0..p.len());
        let b = rng.gen_range(a + 1..=p.len());
        let span = SourceSpan::from_bytes(p, a, b).ok_or("corpus is ASCII")?;
        let m = encode_loc(p, &span).map_err(|e| format!("case {case}: {e}"))?;
        let (back, back_span) = decode_loc(&m).map_err(|e| format!("case {case}: {e}"))?;
        ensure(back == p && back_span == span, || format!("case {case}: round trip differs"))?;
    }
    Ok("figure marked text identical; 1000 random spans round-trip".into())
}

fn table_formula() -> Result<String, String> {
    let row = StatsRow {
        dataset: "GQA".into(),
        pool_incorrect: 0,
        pool_correct: 18126,
        greedy: Some(3927),
        mask_best: Some(7758),
    };
    let (g, m) = (row.greedy_rate(), row.mask_best_rate());
    ensure(g.as_deref() == Some("21.7%") && m.as_deref() == Some("42.8%"), || format!("got {g:?} and {m:?}"))?;
    Ok("greedy 21.7%, mask-best 42.8%".into())
}

fn raster_iou(a: [i64; 4], b: [i64; 4]) -> f64 {
    let inside = |r: [i64; 4], x: i64, y: i64| r[0] <= x && x < r[2] && r[1] <= y && y < r[3];
    let (mut inter, mut union) = (0u64, 0u64);
    for x in 0..64 {
        for y in 0..64 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn iou_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let random_box = |rng: &mut ChaCha8Rng| {
        let l = rng.gen_range(0..60);
        let low = rng.gen_range(0..60);
        [l, low, rng.gen_range(l + 1..=64), rng.gen_range(low + 1..=64)]
    };
    let f = |b: [i64; 4]| b.map(|v| v as f64);
    let mut max_err = 0.0f64;
    for _ in 0..100 {
        let (a, b) = (random_box(&mut rng), random_box(&mut rng));
        max_err = max_err.max((iou(&f(a), &f(b)) - raster_iou(a, b)).abs());
    }
    ensure(max_err <= IOU_TOL, || format!("max error {max_err:e}"))?;
    let a = [3, 4, 20, 30];
    ensure(iou(&f(a), &f(a)) == 1.0, || "identical boxes".into())?;
    ensure(iou(&f(a), &f([25, 4, 40, 30])) == 0.0, || "disjoint boxes".into())?;
    Ok(format!("100 pairs, max error {max_err:.1e}; identical 1.0; disjoint 0.0"))
}

fn parser_round_trip(corpus: &Corpus) -> Result<String, String> {
    let programs: Vec<&PoolEntry> = corpus.pool.iter().chain(&corpus.natural).collect();
    ensure(programs.len() >= 200, || format!("corpus has {} programs", programs.len()))?;
    for e in &programs {
        let a = dsl::parse(&e.program).map_err(|err| format!("{}: {err}", e.id))?;
        let printed = pretty_print(&a);
        let b = dsl::parse(&printed).map_err(|err| format!("{} reprinted: {err}", e.id))?;
        ensure(structurally_equal(&a, &b), || format!("{}: structure changed", e.id))?;
    }
    Ok(format!("{} programs", programs.len()))
}

fn record_cardinality(corpus: &Corpus, records: &[DatasetRecord]) -> Result<String, String> {
    let set = serialize_training_records(records, &corpus.natural, &corpus.store, DEFAULT_BUDGET)
        .map_err(|e| e.to_string())?;
    let (k, m) = (records.len(), corpus.natural.len());
    ensure(set.critic.len() == 2 * k + m, || format!("{} critic rows for k={k}, m={m}", set.critic.len()))?;
    ensure(set.refiner.len() == k, || format!("{} refiner rows for k={k}", set.refiner.len()))?;
    let ground_truth = |id: &str, natural: bool| {
        let list = if natural { &corpus.natural } else { &corpus.pool };
        list.iter().find(|e| e.id == id).map(|e| (e.scene_ids.clone(), e.ground_truth.clone()))
    };
    for row in &set.critic {
        let (scene_ids, gt) = ground_truth(&row.id, row.source == RowSource::Natural).ok_or("unknown row id")?;
        let scenes = corpus.store.resolve(&scene_ids).map_err(|e| e.to_string())?;
        let correct = matches_ground_truth(&execute_or_syntax_error(&row.program, &scenes, DEFAULT_STEP_LIMIT), &gt);
        let label_ok = if correct {
            row.target == T_CORRECT
        } else if row.source == RowSource::Natural {
            row.target == T_INCORRECT
        } else {
            row.target.starts_with(&format!("{T_INCORRECT}\n")) && row.target.contains("<BUG>")
        };
        ensure(label_ok, || format!("{} ({:?}): label {:?} disagrees with execution", row.id, row.source, row.target))?;
    }
    for (row, r) in set.refiner.iter().zip(records) {
        ensure(row.target == r.program_correct, || format!("{}: refiner target", row.id))?;
    }
    Ok(format!("k={k}, m={m}: {} critic rows, {} refiner rows, labels match execution", set.critic.len(), set.refiner.len()))
}

fn main() {
    let mut report = Report { failures: 0 };
    let corpus = load_corpus();
    let records = injected(&corpus, DecodeMode::MaskBest, InjectConfig::default().attempts);

    report.record(1, "golden feedback", Duration::from_secs(1), golden_feedback);
    report.record(2, "mask-best math", Duration::from_secs(10), mask_best_math);
    report.record(3, "injection efficacy", Duration::from_secs(300), || efficacy(&corpus));
    report.record(4, "record validity", Duration::from_secs(120), || record_validity(&corpus, &records));
    report.record(5, "oracle closed loop", Duration::from_secs(60), || oracle_loop(&corpus, &records));
    report.record(6, "loc codec", Duration::from_secs(5), || loc_codec(&corpus));
    report.record(7, "error-rate formula", Duration::from_secs(1), table_formula);
    report.record(8, "iou oracle", Duration::from_secs(5), iou_oracle);
    report.record(9, "parser round trip", Duration::from_secs(10), || parser_round_trip(&corpus));
    report.record(10, "training-record cardinality", Duration::from_secs(5), || record_cardinality(&corpus, &records));

    if report.failures > 0 {
        println!("{} criteria failed", report.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
