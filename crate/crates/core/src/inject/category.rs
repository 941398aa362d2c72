//! Static classification of injected errors.
//!
//! The taxonomy is a reconstruction: use-before-definition, API call
//! changes, literal changes, control-flow changes and operator changes, with
//! everything else as `other`. Undefined names are found by a position-based
//! scope analysis; the remaining categories come from the first differing
//! node pair when walking both syntax trees in parallel.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::ast::*;
use crate::dsl::{self, NodeRef, SourceSpan};
use crate::exec::{ExecutionOutcome, GLOBALS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCategory {
    UndefinedName,
    ApiCallChange,
    LiteralChange,
    ControlFlowChange,
    OperatorChange,
    Other,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 6] = [
        ErrorCategory::UndefinedName,
        ErrorCategory::ApiCallChange,
        ErrorCategory::LiteralChange,
        ErrorCategory::ControlFlowChange,
        ErrorCategory::OperatorChange,
        ErrorCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::UndefinedName => "undefined-name",
            ErrorCategory::ApiCallChange => "api-call-change",
            ErrorCategory::LiteralChange => "literal-change",
            ErrorCategory::ControlFlowChange => "control-flow-change",
            ErrorCategory::OperatorChange => "operator-change",
            ErrorCategory::Other => "other",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies the edit that turned `p_corr` into `p_inc`. `loc` is the
/// edited span in `p_inc`.
pub fn categorize_error(
    p_corr: &str,
    p_inc: &str,
    loc: &SourceSpan,
    outcome_incorrect: &ExecutionOutcome,
) -> ErrorCategory {
    let (Ok(a), Ok(b)) = (dsl::parse(p_corr), dsl::parse(p_inc)) else {
        return ErrorCategory::Other;
    };
    if !undefined_uses(&b, loc).is_empty() {
        return ErrorCategory::UndefinedName;
    }
    let ka: Vec<_> = a.function.body.iter().map(NodeRef::Stmt).collect();
    let kb: Vec<_> = b.function.body.iter().map(NodeRef::Stmt).collect();
    match classify_lists(&ka, &kb) {
        Some(c) => c,
        None => match outcome_incorrect.exception.as_deref() {
            Some(e) if e.starts_with("NameError") || e.starts_with("UnboundLocalError") => {
                ErrorCategory::UndefinedName
            }
            _ => ErrorCategory::Other,
        },
    }
}

/// Names read inside `within` at a point where no earlier binding exists.
///
/// A binding is a parameter, an assignment target (visible after its
/// statement), a loop target, a comprehension target or a lambda
/// parameter (visible from the start of their construct).
pub fn undefined_uses(ast: &ProgramAst, within: &SourceSpan) -> Vec<String> {
    let mut defs: HashMap<String, usize> = HashMap::new();
    let define = |name: &str, pos: usize, defs: &mut HashMap<String, usize>| {
        let e = defs.entry(name.to_string()).or_insert(pos);
        *e = (*e).min(pos);
    };
    for p in &ast.function.params {
        define(p, 0, &mut defs);
    }
    let mut stores = Vec::new();
    let mut uses = Vec::new();
    dsl::walk::walk(ast, &mut |n| match n {
        NodeRef::Stmt(s) => match &s.kind {
            StmtKind::Assign { targets, .. } => {
                for t in targets {
                    target_names(t, &mut |name, span| {
                        define(name, s.span.end_byte, &mut defs);
                        stores.push(span.start_byte);
                    });
                }
            }
            StmtKind::For { target, .. } => target_names(target, &mut |name, span| {
                define(name, s.span.start_byte, &mut defs);
                stores.push(span.start_byte);
            }),
            _ => {}
        },
        NodeRef::Expr(e) => match &e.kind {
            ExprKind::Name(name) => uses.push((name.clone(), e.span)),
            ExprKind::ListComp { generators, .. } => {
                for g in generators {
                    target_names(&g.target, &mut |name, span| {
                        define(name, e.span.start_byte, &mut defs);
                        stores.push(span.start_byte);
                    });
                }
            }
            ExprKind::Lambda { params, .. } => {
                for p in params {
                    define(p, e.span.start_byte, &mut defs);
                }
            }
            _ => {}
        },
    });
    let mut out = Vec::new();
    for (name, span) in uses {
        if !within.contains(&span) || stores.contains(&span.start_byte) {
            continue;
        }
        if GLOBALS.contains(&name.as_str()) {
            continue;
        }
        if defs.get(&name).is_none_or(|&pos| pos > span.start_byte) && !out.contains(&name) {
            out.push(name);
        }
    }
    out
}

fn target_names(t: &Expr, f: &mut dyn FnMut(&str, SourceSpan)) {
    match &t.kind {
        ExprKind::Name(n) => f(n, t.span),
        ExprKind::Tuple { elts, .. } | ExprKind::List(elts) => {
            for e in elts {
                target_names(e, f);
            }
        }
        _ => {}
    }
}

/// Node content that is not captured by its children.
fn label(n: NodeRef<'_>) -> String {
    match n {
        NodeRef::Stmt(s) => match &s.kind {
            StmtKind::Assign { targets, .. } => format!("assign/{}", targets.len()),
            StmtKind::AugAssign { op, .. } => format!("aug{}", op.symbol()),
            StmtKind::If { body, orelse, is_elif, .. } => {
                format!("if/{}/{}/{is_elif}", body.len(), orelse.len())
            }
            StmtKind::Return(v) => format!("return/{}", v.is_some()),
            other => format!("{:?}", std::mem::discriminant(other)),
        },
        NodeRef::Expr(e) => match &e.kind {
            ExprKind::Name(n) => format!("name {n}"),
            ExprKind::Constant(c) => format!("const {c:?}"),
            ExprKind::Call { args, .. } => {
                let kws: Vec<_> = args.iter().map(|a| a.name.as_deref().unwrap_or("_")).collect();
                format!("call({})", kws.join(","))
            }
            ExprKind::Attribute { attr, .. } => format!(".{attr}"),
            ExprKind::Slice { lower, upper, step } => {
                format!("slice {} {} {}", lower.is_some(), upper.is_some(), step.is_some())
            }
            ExprKind::BinOp { op, .. } => format!("binop {}", op.symbol()),
            ExprKind::UnaryOp { op, .. } => format!("unary {op:?}"),
            ExprKind::BoolOp { op, .. } => format!("boolop {op:?}"),
            ExprKind::Compare { ops, .. } => {
                let ops: Vec<_> = ops.iter().map(|o| o.symbol()).collect();
                format!("cmp {}", ops.join(" "))
            }
            ExprKind::Lambda { params, .. } => format!("lambda {}", params.join(",")),
            ExprKind::Tuple { .. } => "tuple".into(),
            ExprKind::FString { quote, parts } => {
                let lits: Vec<_> = parts
                    .iter()
                    .map(|p| match p {
                        FStringPart::Literal(l) => l.as_str(),
                        FStringPart::Field(_) => "{}",
                    })
                    .collect();
                format!("f {quote}{}", lits.concat())
            }
            ExprKind::ListComp { generators, .. } => {
                let ifs: Vec<_> = generators.iter().map(|g| g.ifs.len().to_string()).collect();
                format!("listcomp {}", ifs.join(","))
            }
            other => format!("{:?}", std::mem::discriminant(other)),
        },
    }
}

fn same_tree(a: NodeRef<'_>, b: NodeRef<'_>) -> bool {
    if a.kind() != b.kind() || label(a) != label(b) {
        return false;
    }
    let (ca, cb) = (a.children(), b.children());
    ca.len() == cb.len() && ca.iter().zip(&cb).all(|(x, y)| same_tree(*x, *y))
}

/// Category of the first differing pair, or `None` when the lists are equal.
fn classify_lists(a: &[NodeRef<'_>], b: &[NodeRef<'_>]) -> Option<ErrorCategory> {
    let common = a.iter().zip(b).take_while(|(x, y)| same_tree(**x, **y)).count();
    if common == a.len() && common == b.len() {
        return None;
    }
    if a.len() == b.len() {
        return Some(classify(a[common], b[common]));
    }
    let changed = a[common..].iter().chain(&b[common..]);
    if changed.clone().any(|n| is_control(n.kind())) {
        Some(ErrorCategory::ControlFlowChange)
    } else if changed.clone().any(|n| n.kind() == NodeKind::Call) {
        Some(ErrorCategory::ApiCallChange)
    } else {
        Some(ErrorCategory::Other)
    }
}

fn classify(a: NodeRef<'_>, b: NodeRef<'_>) -> ErrorCategory {
    let (ka, kb) = (a.kind(), b.kind());
    if ka == kb && label(a) == label(b) {
        let (ca, cb) = (a.children(), b.children());
        if ca.len() == cb.len() {
            return classify_lists(&ca, &cb).unwrap_or(ErrorCategory::Other);
        }
    }
    if ka != kb {
        return if is_control(ka) || is_control(kb) {
            ErrorCategory::ControlFlowChange
        } else if ka == NodeKind::Call || kb == NodeKind::Call || is_api_name(a) || is_api_name(b) {
            ErrorCategory::ApiCallChange
        } else if is_literal(ka) && is_literal(kb) || (is_literal(ka) || is_literal(kb)) && is_atom(ka) && is_atom(kb) {
            ErrorCategory::LiteralChange
        } else if is_operator(ka) || is_operator(kb) {
            ErrorCategory::OperatorChange
        } else {
            ErrorCategory::Other
        };
    }
    match ka {
        NodeKind::Constant | NodeKind::FormattedString => ErrorCategory::LiteralChange,
        NodeKind::Call | NodeKind::AttributeAccess => ErrorCategory::ApiCallChange,
        NodeKind::Name if is_api_name(a) || is_api_name(b) => ErrorCategory::ApiCallChange,
        k if is_operator(k) || k == NodeKind::AugAssignment => {
            if label(a) != label(b) {
                ErrorCategory::OperatorChange
            } else {
                ErrorCategory::Other
            }
        }
        k if is_control(k) => ErrorCategory::ControlFlowChange,
        _ => ErrorCategory::Other,
    }
}

fn is_control(k: NodeKind) -> bool {
    matches!(
        k,
        NodeKind::If
            | NodeKind::For
            | NodeKind::While
            | NodeKind::Break
            | NodeKind::Continue
            | NodeKind::Return
            | NodeKind::Pass
            | NodeKind::ConditionalExpression
    )
}

fn is_operator(k: NodeKind) -> bool {
    matches!(
        k,
        NodeKind::BinaryOp | NodeKind::UnaryOp | NodeKind::BoolOp | NodeKind::Comparison
    )
}

fn is_literal(k: NodeKind) -> bool {
    matches!(k, NodeKind::Constant | NodeKind::FormattedString)
}

fn is_atom(k: NodeKind) -> bool {
    matches!(k, NodeKind::Constant | NodeKind::FormattedString | NodeKind::Name)
}

fn is_api_name(n: NodeRef<'_>) -> bool {
    matches!(n, NodeRef::Expr(Expr { kind: ExprKind::Name(name), .. }) if GLOBALS[..7].contains(&name.as_str()))
}
