//! Program execution against scene graphs, with step-by-step tracing.
//!
//! [`execute`] runs a program and returns an [`ExecutionOutcome`]; runtime
//! errors are captured inside the outcome rather than returned.
//! [`render_feedback`] turns an outcome into the textual feedback consumed by
//! the critic and refiner.

mod builtins;
pub mod interp;
pub mod render;
pub mod trace;
pub mod value;

use std::sync::Arc;

use crate::dsl::{self, ParseError, ProgramAst};
use crate::world::SceneGraph;

pub use interp::GLOBALS;
pub use render::{render_feedback, render_full, FeedbackText, DEFAULT_BUDGET};
pub use trace::{ChangeKind, EventKind, ExecutionOutcome, QueryRecord, TraceEvent, VarChange};

/// Default cap on traced statement executions.
pub const DEFAULT_STEP_LIMIT: usize = 10_000;

/// Parses and runs `program`. Only parse failures are returned as errors.
pub fn execute(
    program: &str,
    scenes: &[Arc<SceneGraph>],
    step_limit: usize,
) -> Result<ExecutionOutcome, ParseError> {
    let ast = dsl::parse(program)?;
    Ok(execute_ast(&ast, program, scenes, step_limit))
}

/// Runs an already parsed program; `source` supplies the traced line text.
pub fn execute_ast(
    ast: &ProgramAst,
    source: &str,
    scenes: &[Arc<SceneGraph>],
    step_limit: usize,
) -> ExecutionOutcome {
    interp::run(ast, source, scenes, step_limit)
}

/// Like [`execute`], but a parse failure becomes a `SyntaxError` outcome.
pub fn execute_or_syntax_error(
    program: &str,
    scenes: &[Arc<SceneGraph>],
    step_limit: usize,
) -> ExecutionOutcome {
    execute(program, scenes, step_limit)
        .unwrap_or_else(|e| ExecutionOutcome::syntax_error(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn furniture() -> Arc<SceneGraph> {
        Arc::new(
            SceneGraph::from_json(
                r#"{"image_id": "room", "width": 500, "height": 375, "default_answer": "unknown",
                "image_qa": {"What item of furniture is not large?": "lamp"},
                "objects": [
                  {"name": "sofa", "synonyms": ["couch", "furniture"], "box": [40, 20, 300, 160],
                   "attributes": {"large": true}, "depth": 3.0},
                  {"name": "lamp", "synonyms": ["furniture"], "box": [380, 30, 430, 250],
                   "attributes": {"large": false}, "depth": 4.0}
                ]}"#,
            )
            .unwrap(),
        )
    }

    fn run(src: &str) -> ExecutionOutcome {
        execute(src, &[furniture()], DEFAULT_STEP_LIMIT).unwrap()
    }

    const FIGURE_PROGRAM: &str = "def execute_command(image) -> str:\n    image_patch = ImagePatch(image)\n    image_patch = best_image_match(list_patches=[ImagePatch(image)], content=['item'], return_index=True)\n    return image_patch.simple_query('What item of furniture is not large?')";

    #[test]
    fn figure_trace_is_reproduced() {
        let out = run(FIGURE_PROGRAM);
        let expected = "-> None\n\n\
call         1 def execute_command(image) -> str:\n\
line         2     image_patch = ImagePatch(image)\n\
New var:....... image_patch = ImagePatch(left=0, right=500, upper=375, lower=0, height=375, width=500, horizontal_center=250.0, vertical_center=187.5)\n\
line         3     image_patch = best_image_match(list_patches=[ImagePatch(image)], content=['item'], return_index=True)\n\
Modified var:.. image_patch = 0\n\
line         4     return image_patch.simple_query('What item of furniture is not large?')\n\
exception    4     return image_patch.simple_query('What item of furniture is not large?')\n\
Exception:..... AttributeError: 'int' object has no attribute 'simple_query'\n\
Call ended by exception\n";
        assert_eq!(render_full(&out), expected);
    }

    #[test]
    fn constant_program() {
        let out = run("def execute_command(image) -> str:\n    return 'yes'");
        assert_eq!(out.result.as_deref(), Some("yes"));
        assert!(out.exception.is_none());
        assert_eq!(
            render_full(&out),
            "-> yes\n\ncall         1 def execute_command(image) -> str:\nline         2     return 'yes'\nreturn       2     return 'yes'\nReturn value:.. 'yes'\n"
        );
    }

    #[test]
    fn step_limit_stops_infinite_loop() {
        let src = "def execute_command(image):\n    while True:\n        pass";
        let out = execute(src, &[furniture()], 1000).unwrap();
        assert_eq!(out.step_count, 1000);
        assert_eq!(out.line_events(), 1000);
        assert_eq!(out.exception.as_deref(), Some("RuntimeError: step limit of 1000 exceeded"));
    }

    #[test]
    fn loops_trace_headers_per_iteration() {
        let src = "def execute_command(image):\n    total = 0\n    for i in range(2):\n        total += i\n    return total";
        let out = run(src);
        let lines: Vec<usize> = out.events.iter().map(|e| e.line_no).collect();
        assert_eq!(lines, vec![1, 2, 3, 4, 3, 4, 3, 5, 5]);
        assert_eq!(out.result.as_deref(), Some("1"));
        let text = render_full(&out);
        assert!(text.contains("New var:....... total = 0\n"));
        assert!(text.contains("New var:....... i = 0\n"));
        assert!(text.contains("Modified var:.. i = 1\n"));
    }

    #[test]
    fn api_and_builtins() {
        let src = r#"def execute_command(image) -> str:
    image_patch = ImagePatch(image)
    items = image_patch.find('furniture')
    items.sort(key=lambda p: p.horizontal_center, reverse=True)
    names = [p.simple_query('What is this?') for p in items]
    small = [p for p in items if not p.verify_property('furniture', 'large')]
    depth = round(small[0].compute_depth(), 1)
    return f'{len(items)} {small[0].left} {depth} {names}'"#;
        let out = run(src);
        assert_eq!(out.exception, None, "{}", render_full(&out));
        assert_eq!(out.result.as_deref(), Some("2 380 4.0 ['unknown', 'unknown']"));
        assert_eq!(out.queries.len(), 2);
    }

    #[test]
    fn python_error_messages() {
        let cases = [
            ("return x", "NameError: name 'x' is not defined"),
            ("y = x\n    x = 1\n    return y", "UnboundLocalError: cannot access local variable 'x' where it is not associated with a value"),
            ("return 1 / 0", "ZeroDivisionError: division by zero"),
            ("return [1][3]", "IndexError: list index out of range"),
            ("return {'a': 1}['b']", "KeyError: 'b'"),
            ("return 'a' + 1", "TypeError: can only concatenate str (not \"int\") to str"),
            ("return len(3)", "TypeError: object of type 'int' has no len()"),
            ("a, b = [1]\n    return a", "ValueError: not enough values to unpack (expected 2, got 1)"),
            ("return llm_query('hi')", "UnsupportedApiError: 'llm_query' is not available in the scene-graph world"),
            ("return ImagePatch(image).crop(10, 10, 10, 20)", "ValueError: empty crop"),
            ("return ImagePatch(image).crop(0, 300, 10, 375).compute_depth()", "ValueError: no objects in patch"),
            ("return max([])", "ValueError: max() iterable argument is empty"),
            ("return 3()", "TypeError: 'int' object is not callable"),
        ];
        for (body, want) in cases {
            let src = format!("def execute_command(image):\n    {body}");
            let out = run(&src);
            assert_eq!(out.exception.as_deref(), Some(want), "{body}");
        }
    }

    #[test]
    fn python_arithmetic() {
        let cases = [
            ("-7 // 2", "-4"),
            ("-7 % 2", "1"),
            ("7 % -2", "-1"),
            ("2 ** -1", "0.5"),
            ("7 / 2", "3.5"),
            ("round(2.5)", "2"),
            ("[1, 2, 3][::-1]", "[3, 2, 1]"),
            ("'abcdef'[1:-1:2]", "bd"),
            ("sorted(['b', 'a', 'c'])", "['a', 'b', 'c']"),
            ("1 < 2 < 3", "True"),
            ("'a' in 'cat'", "True"),
            ("max([3, 1, 2], key=lambda x: -x)", "1"),
            ("dict(zip(['a', 'b'], [1, 2]))", "{'a': 1, 'b': 2}"),
            ("0.1 + 0.2", "0.30000000000000004"),
            ("f'{{x}} {1 + 1}'", "{x} 2"),
            ("(1,)", "(1,)"),
            ("int('12') + float('1.5')", "13.5"),
            ("' a b '.split()", "['a', 'b']"),
            ("list(range(5))[-2:]", "[3, 4]"),
        ];
        for (expr, want) in cases {
            let src = format!("def execute_command(image):\n    return {expr}");
            let out = run(&src);
            assert_eq!(out.result.as_deref(), Some(want), "{expr}: {:?}", out.exception);
        }
    }

    #[test]
    fn multi_image_binds_list() {
        let src = "def execute_command(image):\n    return len(image)";
        let out = execute(src, &[furniture(), furniture()], DEFAULT_STEP_LIMIT).unwrap();
        assert_eq!(out.result.as_deref(), Some("2"));
    }

    #[test]
    fn grounding_result_box() {
        let src = "def execute_command(image):\n    return ImagePatch(image).find('lamp')[0]";
        let out = run(src);
        assert_eq!(out.result_box, Some([380, 30, 430, 250]));
    }

    #[test]
    fn execution_is_pure() {
        let a = run(FIGURE_PROGRAM);
        let b = run(FIGURE_PROGRAM);
        assert_eq!(a, b);
        assert_eq!(render_full(&a), render_full(&b));
    }

    #[test]
    fn syntax_errors_become_outcomes() {
        let out = execute_or_syntax_error("def f(:", &[], DEFAULT_STEP_LIMIT);
        assert!(out.exception.unwrap().starts_with("SyntaxError: line 1, col 7"));
    }

    #[test]
    fn jsonl_export_round_trips() {
        let out = run(FIGURE_PROGRAM);
        let jsonl = out.events_jsonl();
        let back: Vec<TraceEvent> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(back, out.events);
    }
}
