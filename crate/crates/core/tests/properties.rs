use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use visprog_core::debugger::{decode_loc, encode_loc};
use visprog_core::dsl::{self, differs_only_within, splice, walk, SourceSpan};
use visprog_core::exec::{execute, render_full, DEFAULT_STEP_LIMIT};
use visprog_core::harness::{answer_match, evaluate, normalize_answer, Backends, EvalConfig, Sample};
use visprog_core::inject::{
    inject_pool, mask_best_step, DecodeMode, InjectConfig, MaskBestConfig, PoolEntry, PromptTemplate,
};
use visprog_core::jsonl::read_jsonl;
use visprog_core::model::{LanguageModel, NGramLm, TokenDistribution, Vocabulary};
use visprog_core::world::{iou, PatchValue, SceneStore};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

struct Fixture {
    store: SceneStore,
    pool: Vec<PoolEntry>,
    vocab: Vocabulary,
    samples: Vec<Sample>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let store = SceneStore::load_dir(&fixtures().join("scenes")).unwrap();
        let pool: Vec<PoolEntry> = read_jsonl(&fixtures().join("pool.jsonl")).unwrap();
        let natural: Vec<PoolEntry> = read_jsonl(&fixtures().join("natural_incorrect.jsonl")).unwrap();
        let lm = NGramLm::train_on_texts(pool.iter().map(|e| e.program.as_str()), 3, 1.0);
        let cfg = InjectConfig { mode: DecodeMode::MaskBest, ..InjectConfig::default() };
        let records: Vec<_> = inject_pool(&pool[..40], &store, &lm, &PromptTemplate::default(), &cfg)
            .into_iter()
            .filter_map(|r| r.result.unwrap())
            .collect();
        let samples = records
            .iter()
            .map(Sample::from_record)
            .chain(natural.iter().map(Sample::from_entry))
            .chain(pool[40..60].iter().map(Sample::from_entry))
            .collect();
        Fixture {
            store,
            vocab: lm.vocab().clone(),
            pool,
            samples,
        }
    })
}

fn corpus_program() -> impl Strategy<Value = String> {
    (0..200usize).prop_map(|i| fixture().pool[i].program.clone())
}

fn dsl_text() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[a-z_ ()\\[\\]'\"=.,:0-9\\n<>#+-]{0,80}").unwrap()
}

fn raster_iou(a: [i64; 4], b: [i64; 4]) -> f64 {
    let inside = |r: [i64; 4], x: i64, y: i64| r[0] <= x && x < r[2] && r[1] <= y && y < r[3];
    let (mut inter, mut union) = (0u32, 0u32);
    for x in 0..32 {
        for y in 0..32 {
            inter += u32::from(inside(a, x, y) && inside(b, x, y));
            union += u32::from(inside(a, x, y) || inside(b, x, y));
        }
    }
    f64::from(inter) / f64::from(union)
}

fn boxes() -> impl Strategy<Value = [i64; 4]> {
    (0..31i64, 0..31i64, 1..32i64, 1..32i64).prop_map(|(l, b, w, h)| [l, b, (l + w).min(32), (b + h).min(32)])
}

proptest! {
    #[test]
    fn tokenizer_round_trips_any_text(text in dsl_text()) {
        let v = &fixture().vocab;
        prop_assert_eq!(v.detokenize(&v.tokenize(&text)), text);
    }

    #[test]
    fn tokenizer_round_trips_corpus(program in corpus_program()) {
        let v = &fixture().vocab;
        prop_assert_eq!(v.detokenize(&v.tokenize(&program)), program);
    }

    #[test]
    fn tail_invariants(w in proptest::collection::vec(0.0f64..1.0, 2..30)) {
        let total: f64 = w.iter().sum();
        prop_assume!(total > 0.0);
        let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
        let p = TokenDistribution::new(probs.clone()).unwrap();
        let top = p.argmax();
        prop_assume!(probs[top] < 1.0);
        let tail = p.tail().unwrap();
        let t = tail.probs();
        prop_assert_eq!(t[top], 0.0);
        prop_assert!((t.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for i in 0..probs.len() {
            for j in 0..probs.len() {
                if i != top && j != top && probs[j] > 0.0 && probs[i] > 0.0 {
                    let rel = (t[i] / t[j] - probs[i] / probs[j]).abs() / (probs[i] / probs[j]);
                    prop_assert!(rel <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn masking_eligibility_grows_with_n(
        w in proptest::collection::vec(0.0f64..1.0, 2..10),
        n in 0usize..4,
        big_n in 0usize..4,
    ) {
        let total: f64 = w.iter().sum();
        prop_assume!(total > 0.0);
        let p = TokenDistribution::new(w.iter().map(|x| x / total).collect()).unwrap();
        let cfg = MaskBestConfig { max_masked: big_n, ..MaskBestConfig::default() };
        let more = MaskBestConfig { max_masked: big_n + 1, ..cfg };
        if mask_best_step(&p, n, &cfg).1 {
            prop_assert!(mask_best_step(&p, n, &more).1);
        }
    }

    #[test]
    fn loc_codec_round_trips(program in corpus_program(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let s = (a * (program.len() - 1) as f64) as usize;
        let e = s + 1 + (b * (program.len() - s - 1) as f64) as usize;
        let span = SourceSpan::from_bytes(&program, s, e).unwrap();
        let marked = encode_loc(&program, &span).unwrap();
        prop_assert_eq!(decode_loc(&marked).unwrap(), (program, span));
    }

    #[test]
    fn splice_touches_only_the_span(program in corpus_program(), a in 0.0f64..1.0, repl in "[a-z ]{0,12}") {
        let s = (a * (program.len() - 1) as f64) as usize;
        let span = SourceSpan::from_bytes(&program, s, (s + 5).min(program.len())).unwrap();
        let out = splice(&program, &span, &repl).unwrap();
        prop_assert_eq!(&out.as_bytes()[..s], &program.as_bytes()[..s]);
        prop_assert_eq!(&out.as_bytes()[s + repl.len()..], &program.as_bytes()[span.end_byte..]);
        let edited = SourceSpan::from_bytes(&out, s, s + repl.len().max(1)).unwrap();
        prop_assert!(repl.is_empty() || differs_only_within(&out, &program, &edited));
    }

    #[test]
    fn iou_matches_raster(a in boxes(), b in boxes()) {
        let f = |x: [i64; 4]| x.map(|v| v as f64);
        prop_assert!((iou(&f(a), &f(b)) - raster_iou(a, b)).abs() <= 1e-6);
        prop_assert_eq!(iou(&f(a), &f(b)), iou(&f(b), &f(a)));
        prop_assert_eq!(iou(&f(a), &f(a)), 1.0);
    }

    #[test]
    fn find_on_a_crop_is_a_subset(
        scene in 0usize..40,
        name in prop::sample::select(vec!["cup", "dog", "cat", "car", "chair", "bird", "book", "bench", "person", "apple"]),
        crop in (0i64..600, 0i64..440, 1i64..640, 1i64..480),
    ) {
        let scene = fixture().store.get(&format!("s{scene:03}")).unwrap();
        let full = PatchValue::full(Arc::clone(&scene));
        let (l, b, w, h) = crop;
        let Ok(sub) = full.crop(l, b, l + w, b + h) else { return Ok(()); };
        let outer: Vec<[i64; 4]> = full.find(name).iter().map(|p| p.bounds()).collect();
        for p in sub.find(name) {
            prop_assert!(outer.contains(&p.bounds()));
        }
    }

    #[test]
    fn answer_match_symmetric_and_idempotent(a in "[A-Za-z ,.!?]{0,30}", b in "[A-Za-z ,.!?]{0,30}") {
        prop_assert_eq!(answer_match(&a, &b), answer_match(&b, &a));
        let once = normalize_answer(&a).join(" ");
        prop_assert_eq!(normalize_answer(&once).join(" "), once.clone());
        prop_assert!(answer_match(&a, &once));
    }

    #[test]
    fn rendering_is_injective(x in -20i64..20, y in -20i64..20, word in "[a-z]{1,3}") {
        let scene = fixture().store.get("room").unwrap();
        let run = |k: i64, w: &str| {
            let src = format!(
                "def execute_command(image):\n    v = {k}\n    s = '{w}'\n    if v > 0:\n        return s\n    return v // 0"
            );
            execute(&src, &[Arc::clone(&scene)], DEFAULT_STEP_LIMIT).unwrap()
        };
        let (a, b) = (run(x, &word), run(y, "q"));
        if render_full(&a) == render_full(&b) {
            prop_assert_eq!(a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn evaluation_ignores_sample_order(perm in Just(()).prop_perturb(|_, mut rng| {
        let mut idx: Vec<usize> = (0..fixture().samples.len()).collect();
        for i in (1..idx.len()).rev() {
            idx.swap(i, (rng.next_u32() as usize) % (i + 1));
        }
        idx
    })) {
        let f = fixture();
        let shuffled: Vec<Sample> = perm.iter().map(|&i| f.samples[i].clone()).collect();
        let cfg = EvalConfig::default();
        let a = evaluate(&f.samples, &f.store, &cfg, &Backends::Oracle).unwrap();
        let b = evaluate(&shuffled, &f.store, &cfg, &Backends::Oracle).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn child_spans_nest_in_parent_spans() {
    for e in &fixture().pool {
        let ast = dsl::parse(&e.program).unwrap();
        walk::walk(&ast, &mut |n| {
            for c in n.children() {
                assert!(n.span().contains(&c.span()), "{}: {:?} outside {:?}", e.id, c.span(), n.span());
            }
        });
    }
}
