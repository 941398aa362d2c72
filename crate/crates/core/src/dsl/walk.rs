//! Tree traversal: child enumeration, subtree references and span stripping.

use super::ast::*;
use super::span::SourceSpan;

/// A borrowed statement or expression node.
#[derive(Debug, Clone, Copy)]
pub enum NodeRef<'a> {
    Stmt(&'a Stmt),
    Expr(&'a Expr),
}

impl<'a> NodeRef<'a> {
    pub fn span(&self) -> SourceSpan {
        match self {
            NodeRef::Stmt(s) => s.span,
            NodeRef::Expr(e) => e.span,
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            NodeRef::Stmt(s) => s.node_kind(),
            NodeRef::Expr(e) => e.node_kind(),
        }
    }

    /// Direct children in source order.
    pub fn children(&self) -> Vec<NodeRef<'a>> {
        let mut out = Vec::new();
        match self {
            NodeRef::Stmt(s) => stmt_children(s, &mut out),
            NodeRef::Expr(e) => expr_children(e, &mut out),
        }
        out
    }
}

fn stmts<'a>(body: &'a [Stmt], out: &mut Vec<NodeRef<'a>>) {
    out.extend(body.iter().map(NodeRef::Stmt));
}

fn stmt_children<'a>(s: &'a Stmt, out: &mut Vec<NodeRef<'a>>) {
    match &s.kind {
        StmtKind::Assign { targets, value } => {
            out.extend(targets.iter().map(NodeRef::Expr));
            out.push(NodeRef::Expr(value));
        }
        StmtKind::AugAssign { target, value, .. } => {
            out.push(NodeRef::Expr(target));
            out.push(NodeRef::Expr(value));
        }
        StmtKind::Expr(e) | StmtKind::Return(Some(e)) => out.push(NodeRef::Expr(e)),
        StmtKind::If {
            test, body, orelse, ..
        } => {
            out.push(NodeRef::Expr(test));
            stmts(body, out);
            stmts(orelse, out);
        }
        StmtKind::For { target, iter, body } => {
            out.push(NodeRef::Expr(target));
            out.push(NodeRef::Expr(iter));
            stmts(body, out);
        }
        StmtKind::While { test, body } => {
            out.push(NodeRef::Expr(test));
            stmts(body, out);
        }
        StmtKind::Return(None) | StmtKind::Break | StmtKind::Continue | StmtKind::Pass => {}
    }
}

fn expr_children<'a>(e: &'a Expr, out: &mut Vec<NodeRef<'a>>) {
    match &e.kind {
        ExprKind::Name(_) | ExprKind::Constant(_) => {}
        ExprKind::Call { func, args } => {
            out.push(NodeRef::Expr(func));
            out.extend(args.iter().map(|a| NodeRef::Expr(&a.value)));
        }
        ExprKind::Attribute { value, .. } => out.push(NodeRef::Expr(value)),
        ExprKind::Subscript { value, index } => {
            out.push(NodeRef::Expr(value));
            out.push(NodeRef::Expr(index));
        }
        ExprKind::Slice { lower, upper, step } => {
            for part in [lower, upper, step].into_iter().flatten() {
                out.push(NodeRef::Expr(part));
            }
        }
        ExprKind::BinOp { left, right, .. } => {
            out.push(NodeRef::Expr(left));
            out.push(NodeRef::Expr(right));
        }
        ExprKind::UnaryOp { operand, .. } => out.push(NodeRef::Expr(operand)),
        ExprKind::BoolOp { values, .. } | ExprKind::List(values) => {
            out.extend(values.iter().map(NodeRef::Expr))
        }
        ExprKind::Tuple { elts, .. } => out.extend(elts.iter().map(NodeRef::Expr)),
        ExprKind::Compare {
            left, comparators, ..
        } => {
            out.push(NodeRef::Expr(left));
            out.extend(comparators.iter().map(NodeRef::Expr));
        }
        ExprKind::IfExp { test, body, orelse } => {
            out.push(NodeRef::Expr(body));
            out.push(NodeRef::Expr(test));
            out.push(NodeRef::Expr(orelse));
        }
        ExprKind::Lambda { body, .. } => out.push(NodeRef::Expr(body)),
        ExprKind::Dict(items) => {
            for (k, v) in items {
                out.push(NodeRef::Expr(k));
                out.push(NodeRef::Expr(v));
            }
        }
        ExprKind::ListComp { elt, generators } => {
            out.push(NodeRef::Expr(elt));
            for g in generators {
                out.push(NodeRef::Expr(&g.target));
                out.push(NodeRef::Expr(&g.iter));
                out.extend(g.ifs.iter().map(NodeRef::Expr));
            }
        }
        ExprKind::FString { parts, .. } => {
            for p in parts {
                if let FStringPart::Field(f) = p {
                    out.push(NodeRef::Expr(f));
                }
            }
        }
    }
}

/// A subtree addressed by child indices from the function root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtreeRef {
    pub node_path: Vec<usize>,
    pub span: SourceSpan,
    pub kind: NodeKind,
}

/// Every statement and expression below the function definition, pre-order.
pub fn enumerate_subtrees(ast: &ProgramAst) -> Vec<SubtreeRef> {
    fn visit(node: NodeRef<'_>, path: &mut Vec<usize>, out: &mut Vec<SubtreeRef>) {
        out.push(SubtreeRef {
            node_path: path.clone(),
            span: node.span(),
            kind: node.kind(),
        });
        for (i, child) in node.children().into_iter().enumerate() {
            path.push(i);
            visit(child, path, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    let mut path = Vec::new();
    for (i, s) in ast.function.body.iter().enumerate() {
        path.push(i);
        visit(NodeRef::Stmt(s), &mut path, &mut out);
        path.pop();
    }
    out
}

/// Resolves a node path produced by [`enumerate_subtrees`].
pub fn resolve<'a>(ast: &'a ProgramAst, path: &[usize]) -> Option<NodeRef<'a>> {
    let (first, rest) = path.split_first()?;
    let mut node = NodeRef::Stmt(ast.function.body.get(*first)?);
    for &i in rest {
        node = *node.children().get(i)?;
    }
    Some(node)
}

/// Pre-order walk over every node with a visitor callback.
pub fn walk<'a>(ast: &'a ProgramAst, f: &mut dyn FnMut(NodeRef<'a>)) {
    fn go<'a>(n: NodeRef<'a>, f: &mut dyn FnMut(NodeRef<'a>)) {
        f(n);
        for c in n.children() {
            go(c, f);
        }
    }
    for s in &ast.function.body {
        go(NodeRef::Stmt(s), f);
    }
}

/// Returns a copy of `ast` with every span zeroed, for structural comparison.
pub fn without_spans(ast: &ProgramAst) -> ProgramAst {
    let mut copy = ast.clone();
    copy.function.span = SourceSpan::default();
    for s in &mut copy.function.body {
        clear_stmt(s);
    }
    copy
}

fn clear_stmt(s: &mut Stmt) {
    s.span = SourceSpan::default();
    match &mut s.kind {
        StmtKind::Assign { targets, value } => {
            targets.iter_mut().for_each(clear_expr);
            clear_expr(value);
        }
        StmtKind::AugAssign { target, value, .. } => {
            clear_expr(target);
            clear_expr(value);
        }
        StmtKind::Expr(e) | StmtKind::Return(Some(e)) => clear_expr(e),
        StmtKind::If {
            test, body, orelse, ..
        } => {
            clear_expr(test);
            body.iter_mut().chain(orelse.iter_mut()).for_each(clear_stmt);
        }
        StmtKind::For { target, iter, body } => {
            clear_expr(target);
            clear_expr(iter);
            body.iter_mut().for_each(clear_stmt);
        }
        StmtKind::While { test, body } => {
            clear_expr(test);
            body.iter_mut().for_each(clear_stmt);
        }
        StmtKind::Return(None) | StmtKind::Break | StmtKind::Continue | StmtKind::Pass => {}
    }
}

fn clear_expr(e: &mut Expr) {
    e.span = SourceSpan::default();
    match &mut e.kind {
        ExprKind::Name(_) | ExprKind::Constant(_) => {}
        ExprKind::Call { func, args } => {
            clear_expr(func);
            args.iter_mut().for_each(|a| clear_expr(&mut a.value));
        }
        ExprKind::Attribute { value, .. } => clear_expr(value),
        ExprKind::Subscript { value, index } => {
            clear_expr(value);
            clear_expr(index);
        }
        ExprKind::Slice { lower, upper, step } => {
            for part in [lower, upper, step].into_iter().flatten() {
                clear_expr(part);
            }
        }
        ExprKind::BinOp { left, right, .. } => {
            clear_expr(left);
            clear_expr(right);
        }
        ExprKind::UnaryOp { operand, .. } => clear_expr(operand),
        ExprKind::BoolOp { values, .. } | ExprKind::List(values) => {
            values.iter_mut().for_each(clear_expr)
        }
        ExprKind::Tuple { elts, .. } => elts.iter_mut().for_each(clear_expr),
        ExprKind::Compare {
            left, comparators, ..
        } => {
            clear_expr(left);
            comparators.iter_mut().for_each(clear_expr);
        }
        ExprKind::IfExp { test, body, orelse } => {
            clear_expr(test);
            clear_expr(body);
            clear_expr(orelse);
        }
        ExprKind::Lambda { body, .. } => clear_expr(body),
        ExprKind::Dict(items) => items.iter_mut().for_each(|(k, v)| {
            clear_expr(k);
            clear_expr(v);
        }),
        ExprKind::ListComp { elt, generators } => {
            clear_expr(elt);
            for g in generators {
                clear_expr(&mut g.target);
                clear_expr(&mut g.iter);
                g.ifs.iter_mut().for_each(clear_expr);
            }
        }
        ExprKind::FString { parts, .. } => {
            for p in parts {
                if let FStringPart::Field(f) = p {
                    clear_expr(f);
                }
            }
        }
    }
}
