//! Canonical pretty-printer. Literals are emitted exactly as written, layout
//! is normalized to 4-space indentation and single spaces around operators.

use super::ast::*;

pub fn pretty_print(ast: &ProgramAst) -> String {
    let f = &ast.function;
    let mut out = format!("def {}({})", f.name, f.params.join(", "));
    if let Some(ret) = &f.returns {
        out.push_str(" -> ");
        out.push_str(ret);
    }
    out.push(':');
    let mut lines = vec![out];
    block(&f.body, 1, &mut lines);
    lines.join("\n")
}

/// Renders a single expression in canonical form.
pub fn expr_to_string(e: &Expr) -> String {
    expr(e, 0)
}

fn block(stmts: &[Stmt], depth: usize, out: &mut Vec<String>) {
    for s in stmts {
        stmt(s, depth, out);
    }
}

fn stmt(s: &Stmt, depth: usize, out: &mut Vec<String>) {
    let pad = "    ".repeat(depth);
    match &s.kind {
        StmtKind::Assign { targets, value } => {
            let mut line = pad;
            for t in targets {
                line.push_str(&top_level(t));
                line.push_str(" = ");
            }
            line.push_str(&top_level(value));
            out.push(line);
        }
        StmtKind::AugAssign { target, op, value } => out.push(format!(
            "{pad}{} {} {}",
            expr(target, 0),
            op.symbol(),
            top_level(value)
        )),
        StmtKind::Expr(e) => out.push(format!("{pad}{}", top_level(e))),
        StmtKind::Return(None) => out.push(format!("{pad}return")),
        StmtKind::Return(Some(e)) => out.push(format!("{pad}return {}", top_level(e))),
        StmtKind::If { .. } => if_chain(s, depth, false, out),
        StmtKind::For { target, iter, body } => {
            out.push(format!(
                "{pad}for {} in {}:",
                top_level(target),
                top_level(iter)
            ));
            block(body, depth + 1, out);
        }
        StmtKind::While { test, body } => {
            out.push(format!("{pad}while {}:", expr(test, 0)));
            block(body, depth + 1, out);
        }
        StmtKind::Break => out.push(format!("{pad}break")),
        StmtKind::Continue => out.push(format!("{pad}continue")),
        StmtKind::Pass => out.push(format!("{pad}pass")),
    }
}

fn if_chain(s: &Stmt, depth: usize, as_elif: bool, out: &mut Vec<String>) {
    let StmtKind::If {
        test, body, orelse, ..
    } = &s.kind
    else {
        unreachable!()
    };
    let pad = "    ".repeat(depth);
    let kw = if as_elif { "elif" } else { "if" };
    out.push(format!("{pad}{kw} {}:", expr(test, 0)));
    block(body, depth + 1, out);
    match orelse.as_slice() {
        [] => {}
        [only]
            if matches!(
                only.kind,
                StmtKind::If {
                    is_elif: true,
                    ..
                }
            ) =>
        {
            if_chain(only, depth, true, out)
        }
        rest => {
            out.push(format!("{pad}else:"));
            block(rest, depth + 1, out);
        }
    }
}

/// Statement-level expressions: bare tuples print without parentheses.
fn top_level(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Tuple {
            elts,
            parens: false,
        } if !elts.is_empty() => tuple_items(elts),
        _ => expr(e, 0),
    }
}

fn tuple_items(elts: &[Expr]) -> String {
    let items: Vec<_> = elts.iter().map(|x| expr(x, 0)).collect();
    if items.len() == 1 {
        format!("{},", items[0])
    } else {
        items.join(", ")
    }
}

const P_LAMBDA: u8 = 0;
const P_IFEXP: u8 = 1;
const P_OR: u8 = 2;
const P_AND: u8 = 3;
const P_NOT: u8 = 4;
const P_CMP: u8 = 5;
const P_ARITH: u8 = 6;
const P_TERM: u8 = 7;
const P_UNARY: u8 = 8;
const P_POWER: u8 = 9;
const P_PRIMARY: u8 = 10;
const P_ATOM: u8 = 11;

fn precedence(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Lambda { .. } => P_LAMBDA,
        ExprKind::IfExp { .. } => P_IFEXP,
        ExprKind::BoolOp { op: BoolOp::Or, .. } => P_OR,
        ExprKind::BoolOp { op: BoolOp::And, .. } => P_AND,
        ExprKind::UnaryOp {
            op: UnaryOp::Not, ..
        } => P_NOT,
        ExprKind::Compare { .. } => P_CMP,
        ExprKind::BinOp {
            op: BinOp::Add | BinOp::Sub,
            ..
        } => P_ARITH,
        ExprKind::BinOp { op: BinOp::Pow, .. } => P_POWER,
        ExprKind::BinOp { .. } => P_TERM,
        ExprKind::UnaryOp { .. } => P_UNARY,
        ExprKind::Call { .. } | ExprKind::Attribute { .. } | ExprKind::Subscript { .. } => {
            P_PRIMARY
        }
        // A bare tuple nested inside another expression needs parentheses.
        ExprKind::Tuple { parens: false, .. } => P_LAMBDA,
        _ => P_ATOM,
    }
}

/// Renders `e`, parenthesising it when its precedence is below `min`.
fn expr(e: &Expr, min: u8) -> String {
    let text = raw_expr(e);
    if precedence(e) < min {
        if let ExprKind::Tuple {
            elts,
            parens: false,
        } = &e.kind
        {
            return format!("({})", tuple_items(elts));
        }
        format!("({text})")
    } else {
        text
    }
}

fn raw_expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Name(n) => n.clone(),
        ExprKind::Constant(c) => match c {
            Constant::None => "None".into(),
            Constant::Bool(true) => "True".into(),
            Constant::Bool(false) => "False".into(),
            Constant::Int(_, raw) | Constant::Float(_, raw) | Constant::Str(_, raw) => raw.clone(),
        },
        ExprKind::Call { func, args } => {
            let args: Vec<_> = args
                .iter()
                .map(|a| match &a.name {
                    Some(n) => format!("{n}={}", expr(&a.value, 0)),
                    None => expr(&a.value, 0),
                })
                .collect();
            format!("{}({})", expr(func, P_PRIMARY), args.join(", "))
        }
        ExprKind::Attribute { value, attr } => {
            let base = expr(value, P_PRIMARY);
            // `1 .real` needs the space; int literals are the only case.
            if matches!(value.kind, ExprKind::Constant(Constant::Int(..))) {
                format!("({base}).{attr}")
            } else {
                format!("{base}.{attr}")
            }
        }
        ExprKind::Subscript { value, index } => {
            format!("{}[{}]", expr(value, P_PRIMARY), subscript_index(index))
        }
        ExprKind::Slice { .. } => format!("[{}]", subscript_index(e)),
        ExprKind::BinOp { left, op, right } => {
            let (lmin, rmin) = match op {
                BinOp::Pow => (P_PRIMARY, P_UNARY),
                BinOp::Add | BinOp::Sub => (P_ARITH, P_TERM),
                _ => (P_TERM, P_UNARY),
            };
            format!("{} {} {}", expr(left, lmin), op.symbol(), expr(right, rmin))
        }
        ExprKind::UnaryOp { op, operand } => match op {
            UnaryOp::Not => format!("not {}", expr(operand, P_NOT)),
            UnaryOp::Neg => format!("-{}", expr(operand, P_UNARY)),
            UnaryOp::Pos => format!("+{}", expr(operand, P_UNARY)),
        },
        ExprKind::BoolOp { op, values } => {
            let (kw, min) = match op {
                BoolOp::Or => (" or ", P_OR + 1),
                BoolOp::And => (" and ", P_AND + 1),
            };
            values
                .iter()
                .map(|v| expr(v, min))
                .collect::<Vec<_>>()
                .join(kw)
        }
        ExprKind::Compare {
            left,
            ops,
            comparators,
        } => {
            let mut s = expr(left, P_CMP + 1);
            for (op, c) in ops.iter().zip(comparators) {
                s.push(' ');
                s.push_str(op.symbol());
                s.push(' ');
                s.push_str(&expr(c, P_CMP + 1));
            }
            s
        }
        ExprKind::IfExp { test, body, orelse } => format!(
            "{} if {} else {}",
            expr(body, P_OR),
            expr(test, P_OR),
            expr(orelse, P_IFEXP)
        ),
        ExprKind::Lambda { params, body } => {
            if params.is_empty() {
                format!("lambda: {}", expr(body, 0))
            } else {
                format!("lambda {}: {}", params.join(", "), expr(body, 0))
            }
        }
        ExprKind::List(elts) => format!(
            "[{}]",
            elts.iter().map(|x| expr(x, 0)).collect::<Vec<_>>().join(", ")
        ),
        ExprKind::Tuple { elts, .. } => {
            if elts.is_empty() {
                "()".into()
            } else {
                format!("({})", tuple_items(elts))
            }
        }
        ExprKind::Dict(items) => format!(
            "{{{}}}",
            items
                .iter()
                .map(|(k, v)| format!("{}: {}", expr(k, 0), expr(v, 0)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        ExprKind::ListComp { elt, generators } => {
            let mut s = format!("[{}", expr(elt, 0));
            for g in generators {
                s.push_str(&format!(
                    " for {} in {}",
                    comp_target(&g.target),
                    expr(&g.iter, P_OR)
                ));
                for cond in &g.ifs {
                    s.push_str(&format!(" if {}", expr(cond, P_OR)));
                }
            }
            s.push(']');
            s
        }
        ExprKind::FString { quote, parts } => {
            let mut s = quote.clone();
            for p in parts {
                match p {
                    FStringPart::Literal(l) => s.push_str(l),
                    FStringPart::Field(e) => {
                        s.push('{');
                        let inner = expr(e, 0);
                        // `{{` would read as an escaped brace.
                        if inner.starts_with('{') {
                            s.push(' ');
                        }
                        s.push_str(&inner);
                        s.push('}');
                    }
                }
            }
            s.push_str(&quote[quote.len() - 1..]);
            s
        }
    }
}

fn comp_target(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Tuple {
            elts,
            parens: false,
        } => tuple_items(elts),
        _ => expr(e, P_ARITH),
    }
}

fn subscript_index(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Slice { lower, upper, step } => {
            let part = |x: &Option<Box<Expr>>| x.as_ref().map(|x| expr(x, 0)).unwrap_or_default();
            let mut s = format!("{}:{}", part(lower), part(upper));
            if step.is_some() {
                s.push(':');
                s.push_str(&part(step));
            }
            s
        }
        _ => expr(e, 0),
    }
}
