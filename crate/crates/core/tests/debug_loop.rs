use std::sync::atomic::{AtomicUsize, Ordering};

use visprog_core::debugger::{
    run_debug_loop, BackendError, ContainmentPolicy, Critic, CriticVerdict, DebugSessionConfig,
    FixedCritic, IdentityRefiner, Refiner, Termination,
};
use visprog_core::dsl::SourceSpan;

const PROGRAM: &str = "def execute_command(image):\n    x = 1\n    return x";

struct Counting<R> {
    inner: R,
    calls: AtomicUsize,
}

impl<R: Refiner> Refiner for Counting<R> {
    fn refine(&self, program: &str, feedback: &str, loc: &SourceSpan) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.refine(program, feedback, loc)
    }
}

/// Replaces the whole program, ignoring the location.
struct Rewriter(&'static str);

impl Refiner for Rewriter {
    fn refine(&self, _: &str, _: &str, _: &SourceSpan) -> Result<String, BackendError> {
        Ok(self.0.to_string())
    }
}

/// Accepts once the program contains `needle`; points at `x = 1` otherwise.
struct NeedleCritic(&'static str);

impl Critic for NeedleCritic {
    fn judge(&self, program: &str, _: &str) -> Result<CriticVerdict, BackendError> {
        if program.contains(self.0) {
            return Ok(CriticVerdict { score: 0.9, loc: None });
        }
        let start = program.find("1").unwrap();
        Ok(CriticVerdict {
            score: 0.1,
            loc: SourceSpan::from_bytes(program, start, start + 1),
        })
    }
}

fn cfg(max_steps: usize) -> DebugSessionConfig {
    DebugSessionConfig { max_steps, ..DebugSessionConfig::default() }
}

#[test]
fn accepting_critic_never_calls_the_refiner() {
    let r = Counting { inner: IdentityRefiner, calls: AtomicUsize::new(0) };
    let t = run_debug_loop(PROGRAM, &[], &FixedCritic::accepting(), &r, &cfg(3));
    assert_eq!(t.termination, Termination::CriticAccepted);
    assert_eq!(r.calls.load(Ordering::Relaxed), 0);
    assert_eq!(t.iterations.len(), 1);
    assert_eq!(t.refinements(), 0);
}

#[test]
fn rejecting_critic_runs_exactly_t_iterations() {
    for steps in 1..=5 {
        let r = Counting { inner: IdentityRefiner, calls: AtomicUsize::new(0) };
        let t = run_debug_loop(PROGRAM, &[], &FixedCritic::rejecting(), &r, &cfg(steps));
        assert_eq!(t.termination, Termination::MaxSteps);
        assert_eq!(t.iterations.len(), steps);
        assert_eq!(r.calls.load(Ordering::Relaxed), steps);
        assert_eq!(t.final_program, PROGRAM);
    }
}

#[test]
fn score_equal_to_threshold_is_rejected() {
    let critic = FixedCritic { verdict: CriticVerdict { score: 0.5, loc: None } };
    let t = run_debug_loop(PROGRAM, &[], &critic, &IdentityRefiner, &cfg(2));
    assert_eq!(t.termination, Termination::MaxSteps);
    let critic = FixedCritic { verdict: CriticVerdict { score: 0.5 + 1e-12, loc: None } };
    let t = run_debug_loop(PROGRAM, &[], &critic, &IdentityRefiner, &cfg(2));
    assert_eq!(t.termination, Termination::CriticAccepted);
}

#[test]
fn missing_location_falls_back_to_the_body() {
    let t = run_debug_loop(PROGRAM, &[], &FixedCritic::rejecting(), &IdentityRefiner, &cfg(1));
    let loc = t.iterations[0].loc.unwrap();
    assert_eq!(loc.text(PROGRAM), "x = 1\n    return x");
}

#[test]
fn strict_policy_discards_rewrites_outside_loc() {
    let rewrite = "def execute_command(image):\n    y = 2\n    return 2";
    let t = run_debug_loop(PROGRAM, &[], &NeedleCritic("2"), &Rewriter(rewrite), &cfg(3));
    assert_eq!(t.termination, Termination::MaxSteps);
    assert!(t.iterations.iter().all(|i| i.containment_violation));
    assert_eq!(t.final_program, PROGRAM);

    let lenient = DebugSessionConfig { containment: ContainmentPolicy::Lenient, ..cfg(3) };
    let t = run_debug_loop(PROGRAM, &[], &NeedleCritic("2"), &Rewriter(rewrite), &lenient);
    assert_eq!(t.termination, Termination::CriticAccepted);
    assert_eq!(t.final_program, rewrite);
    assert_eq!(t.refinements(), 1);
    assert_eq!(t.program_at(0), PROGRAM);
    assert_eq!(t.program_at(1), rewrite);
    assert_eq!(t.program_at(7), rewrite);
}

#[test]
fn contained_refinement_is_kept() {
    let fixed = "def execute_command(image):\n    x = 2\n    return x";
    let t = run_debug_loop(PROGRAM, &[], &NeedleCritic("2"), &Rewriter(fixed), &cfg(3));
    assert_eq!(t.termination, Termination::CriticAccepted);
    assert!(!t.iterations[0].containment_violation);
    assert_eq!(t.final_program, fixed);
    let json: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
    assert_eq!(json["termination"], "critic-accepted");
    assert_eq!(json["iterations"].as_array().unwrap().len(), 2);
}
