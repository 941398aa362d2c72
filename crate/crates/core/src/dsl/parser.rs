//! Recursive-descent parser producing a span-annotated [`ProgramAst`].

use super::ast::*;
use super::lexer::{self, Tok, Token};
use super::span::SourceSpan;
use super::ParseError;

pub fn parse(source: &str) -> Result<ProgramAst, ParseError> {
    let tokens = lexer::tokenize(source)?;
    let mut p = Parser::new(source, tokens);
    p.program()
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    last_end: usize,
    last_line: usize,
    loop_depth: usize,
}

type PResult<T> = Result<T, ParseError>;

fn cmp_from(tok: &Tok) -> Option<CmpOp> {
    Some(match tok {
        Tok::Op("==") => CmpOp::Eq,
        Tok::Op("!=") => CmpOp::NotEq,
        Tok::Op("<") => CmpOp::Lt,
        Tok::Op("<=") => CmpOp::LtE,
        Tok::Op(">") => CmpOp::Gt,
        Tok::Op(">=") => CmpOp::GtE,
        Tok::Keyword("in") => CmpOp::In,
        Tok::Keyword("is") => CmpOp::Is,
        _ => return None,
    })
}

fn unsupported_keyword(k: &str) -> Option<&'static str> {
    Some(match k {
        "class" => "class definition",
        "import" | "from" => "import statement",
        "try" | "except" | "finally" => "try/except statement",
        "with" => "with statement",
        "yield" => "generator (yield)",
        "raise" => "raise statement",
        "global" | "nonlocal" => "global/nonlocal declaration",
        "del" => "del statement",
        "assert" => "assert statement",
        "async" | "await" => "async code",
        "as" => "'as' clause",
        _ => return None,
    })
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, toks: Vec<Token>) -> Self {
        Parser {
            src,
            toks,
            pos: 0,
            last_end: 0,
            last_line: 1,
            loop_depth: 0,
        }
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek_at(&self, off: usize) -> &Tok {
        &self.toks[(self.pos + off).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        if !matches!(t.tok, Tok::Newline | Tok::Indent | Tok::Dedent | Tok::Eof) {
            self.last_end = t.end;
            self.last_line = t.line;
        }
        t
    }

    fn at(&self, tok: &Tok) -> bool {
        &self.peek().tok == tok
    }

    fn at_op(&self, op: &str) -> bool {
        matches!(self.peek().tok, Tok::Op(o) if o == op)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek().tok, Tok::Keyword(k) if k == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        if let Tok::Keyword(k) = t.tok {
            if let Some(what) = unsupported_keyword(k) {
                return ParseError::unsupported(t.line, t.col, what);
            }
        }
        ParseError::syntax(
            t.line,
            t.col,
            expected.iter().map(|s| s.to_string()).collect(),
            t.describe(),
        )
    }

    fn expect_op(&mut self, op: &'static str) -> PResult<Token> {
        if self.at_op(op) {
            Ok(self.bump())
        } else {
            Err(self.error(&[&format!("'{op}'")]))
        }
    }

    fn expect_name(&mut self) -> PResult<String> {
        match &self.peek().tok {
            Tok::Name(n) => {
                let n = n.clone();
                self.bump();
                Ok(n)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn span_from(&self, start: usize, start_line: usize) -> SourceSpan {
        SourceSpan {
            start_byte: start,
            end_byte: self.last_end,
            start_line,
            end_line: self.last_line,
        }
    }

    // ---- statements -------------------------------------------------------

    fn program(&mut self) -> PResult<ProgramAst> {
        while self.at(&Tok::Newline) {
            self.bump();
        }
        if !self.at_kw("def") {
            let t = self.peek();
            if matches!(t.tok, Tok::Eof) {
                return Err(self.error(&["'def'"]));
            }
            if let Tok::Keyword(k) = t.tok {
                if unsupported_keyword(k).is_some() {
                    return Err(self.error(&["'def'"]));
                }
            }
            if t.tok == Tok::Op("@") {
                return Err(ParseError::unsupported(t.line, t.col, "decorator"));
            }
            return Err(ParseError::unsupported(t.line, t.col, "top-level statement"));
        }
        let function = self.function_def()?;
        while self.at(&Tok::Newline) {
            self.bump();
        }
        let t = self.peek();
        match t.tok {
            Tok::Eof => Ok(ProgramAst { function }),
            Tok::Keyword("def") => Err(ParseError::unsupported(
                t.line,
                t.col,
                "multiple function definitions",
            )),
            _ => Err(ParseError::unsupported(t.line, t.col, "top-level statement")),
        }
    }

    fn function_def(&mut self) -> PResult<FunctionDef> {
        let def = self.bump();
        let name = self.expect_name()?;
        self.expect_op("(")?;
        let mut params = Vec::new();
        if !self.at_op(")") {
            loop {
                match &self.peek().tok {
                    Tok::Name(n) => {
                        params.push(n.clone());
                        self.bump();
                    }
                    _ => return Err(self.error(&["identifier", "')'"])),
                }
                if self.at_op("=") || self.at_op(":") {
                    let t = self.peek();
                    return Err(ParseError::unsupported(
                        t.line,
                        t.col,
                        "parameter defaults or annotations",
                    ));
                }
                if !self.eat_op(",") || self.at_op(")") {
                    break;
                }
            }
        }
        if !self.at_op(")") {
            return Err(self.error(&["','", "')'"]));
        }
        self.bump();
        let returns = if self.eat_op("->") {
            let start = self.peek().start;
            self.expr()?;
            Some(self.src[start..self.last_end].to_string())
        } else {
            None
        };
        self.expect_op(":")?;
        let body = self.suite(true)?;
        Ok(FunctionDef {
            name,
            params,
            returns,
            body,
            span: self.span_from(def.start, def.line),
        })
    }

    /// Parses the body after a `:`.
    fn suite(&mut self, is_function: bool) -> PResult<Vec<Stmt>> {
        if self.at(&Tok::Newline) {
            self.bump();
            if !self.at(&Tok::Indent) {
                return Err(self.error(&["indented block"]));
            }
            self.bump();
            let mut body = Vec::new();
            while !self.at(&Tok::Dedent) && !self.at(&Tok::Eof) {
                body.push(self.statement()?);
            }
            if self.at(&Tok::Dedent) {
                self.bump();
            }
            Ok(body)
        } else {
            if is_function && self.at(&Tok::Eof) {
                return Err(self.error(&["statement"]));
            }
            let s = self.simple_statement()?;
            self.end_of_simple()?;
            Ok(vec![s])
        }
    }

    fn end_of_simple(&mut self) -> PResult<()> {
        if self.at_op(";") {
            let t = self.peek();
            return Err(ParseError::unsupported(
                t.line,
                t.col,
                "semicolon-separated statements",
            ));
        }
        match self.peek().tok {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::Eof | Tok::Dedent => Ok(()),
            _ => Err(self.error(&["newline"])),
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Keyword("if") => self.if_stmt(false),
            Tok::Keyword("for") => {
                self.bump();
                let target = self.target_list()?;
                if !self.eat_kw("in") {
                    return Err(self.error(&["'in'"]));
                }
                let iter = self.testlist()?;
                self.expect_op(":")?;
                let body = self.loop_suite()?;
                Ok(Stmt {
                    kind: StmtKind::For { target, iter, body },
                    span: self.span_from(t.start, t.line),
                })
            }
            Tok::Keyword("while") => {
                self.bump();
                let test = self.expr()?;
                self.expect_op(":")?;
                let body = self.loop_suite()?;
                Ok(Stmt {
                    kind: StmtKind::While { test, body },
                    span: self.span_from(t.start, t.line),
                })
            }
            Tok::Keyword("def") => Err(ParseError::unsupported(
                t.line,
                t.col,
                "nested function definition",
            )),
            Tok::Keyword("elif") | Tok::Keyword("else") => Err(self.error(&["statement"])),
            Tok::Op("@") => Err(ParseError::unsupported(t.line, t.col, "decorator")),
            Tok::Indent => Err(ParseError::syntax(
                t.line,
                t.col,
                vec!["statement".into()],
                "unexpected indent".into(),
            )),
            _ => {
                let s = self.simple_statement()?;
                self.end_of_simple()?;
                Ok(s)
            }
        }
    }

    fn loop_suite(&mut self) -> PResult<Vec<Stmt>> {
        self.loop_depth += 1;
        let body = self.suite(false);
        self.loop_depth -= 1;
        body
    }

    fn if_stmt(&mut self, is_elif: bool) -> PResult<Stmt> {
        let t = self.bump();
        let test = self.expr()?;
        self.expect_op(":")?;
        let body = self.suite(false)?;
        let orelse = if self.at_kw("elif") {
            vec![self.if_stmt(true)?]
        } else if self.at_kw("else") {
            self.bump();
            self.expect_op(":")?;
            self.suite(false)?
        } else {
            Vec::new()
        };
        Ok(Stmt {
            kind: StmtKind::If {
                test,
                body,
                orelse,
                is_elif,
            },
            span: self.span_from(t.start, t.line),
        })
    }

    fn simple_statement(&mut self) -> PResult<Stmt> {
        let t = self.peek().clone();
        let kind = match t.tok {
            Tok::Keyword("return") => {
                self.bump();
                if matches!(self.peek().tok, Tok::Newline | Tok::Eof | Tok::Dedent)
                    || self.at_op(";")
                {
                    StmtKind::Return(None)
                } else {
                    StmtKind::Return(Some(self.testlist()?))
                }
            }
            Tok::Keyword("pass") => {
                self.bump();
                StmtKind::Pass
            }
            Tok::Keyword(k @ ("break" | "continue")) => {
                if self.loop_depth == 0 {
                    return Err(ParseError::syntax(
                        t.line,
                        t.col,
                        vec!["statement".into()],
                        format!("'{k}' outside loop"),
                    ));
                }
                self.bump();
                if k == "break" {
                    StmtKind::Break
                } else {
                    StmtKind::Continue
                }
            }
            Tok::Keyword(k) if unsupported_keyword(k).is_some() => {
                return Err(self.error(&["statement"]))
            }
            Tok::Keyword("if") | Tok::Keyword("for") | Tok::Keyword("while") => {
                return Err(ParseError::unsupported(
                    t.line,
                    t.col,
                    "compound statement after ':' on the same line",
                ))
            }
            _ => {
                let first = self.testlist()?;
                if self.at_op("=") {
                    let mut exprs = vec![first];
                    while self.eat_op("=") {
                        exprs.push(self.testlist()?);
                    }
                    let value = exprs.pop().unwrap();
                    for target in &exprs {
                        self.check_target(target)?;
                    }
                    StmtKind::Assign {
                        targets: exprs,
                        value,
                    }
                } else if let Some(op) = self.aug_op() {
                    self.bump();
                    if !matches!(
                        first.kind,
                        ExprKind::Name(_) | ExprKind::Subscript { .. } | ExprKind::Attribute { .. }
                    ) {
                        return Err(self.target_error(&first));
                    }
                    let value = self.testlist()?;
                    StmtKind::AugAssign {
                        target: first,
                        op,
                        value,
                    }
                } else {
                    StmtKind::Expr(first)
                }
            }
        };
        Ok(Stmt {
            kind,
            span: self.span_from(t.start, t.line),
        })
    }

    fn aug_op(&self) -> Option<AugOp> {
        Some(match self.peek().tok {
            Tok::Op("+=") => AugOp::Add,
            Tok::Op("-=") => AugOp::Sub,
            Tok::Op("*=") => AugOp::Mul,
            Tok::Op("/=") => AugOp::Div,
            Tok::Op("//=") => AugOp::FloorDiv,
            Tok::Op("%=") => AugOp::Mod,
            Tok::Op("**=") => AugOp::Pow,
            _ => return None,
        })
    }

    fn target_error(&self, e: &Expr) -> ParseError {
        let (line, col) = self.line_col(e.span.start_byte);
        ParseError::syntax(
            line,
            col,
            vec!["assignable target".into()],
            format!("{:?} expression", e.node_kind()),
        )
    }

    fn line_col(&self, offset: usize) -> (usize, usize) {
        let line = super::span::line_of(self.src, offset);
        let line_start = self.src[..offset].rfind('\n').map(|i| i + 1).unwrap_or(0);
        (line, self.src[line_start..offset].chars().count() + 1)
    }

    fn check_target(&self, e: &Expr) -> PResult<()> {
        match &e.kind {
            ExprKind::Name(_) | ExprKind::Subscript { .. } | ExprKind::Attribute { .. } => Ok(()),
            ExprKind::Tuple { elts, .. } | ExprKind::List(elts) if !elts.is_empty() => {
                elts.iter().try_for_each(|x| self.check_target(x))
            }
            _ => Err(self.target_error(e)),
        }
    }

    fn target_list(&mut self) -> PResult<Expr> {
        let start = self.peek().clone();
        let first = self.arith()?;
        let e = if self.at_op(",") {
            let mut elts = vec![first];
            while self.eat_op(",") {
                if self.at_kw("in") {
                    break;
                }
                elts.push(self.arith()?);
            }
            Expr {
                kind: ExprKind::Tuple { elts, parens: false },
                span: self.span_from(start.start, start.line),
            }
        } else {
            first
        };
        self.check_target(&e)?;
        Ok(e)
    }

    /// `test (',' test)* [',']`; produces a bare tuple when a comma appears.
    fn testlist(&mut self) -> PResult<Expr> {
        let start = self.peek().clone();
        let first = self.expr()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut elts = vec![first];
        while self.eat_op(",") {
            if self.starts_expr() {
                elts.push(self.expr()?);
            } else {
                break;
            }
        }
        Ok(Expr {
            kind: ExprKind::Tuple { elts, parens: false },
            span: self.span_from(start.start, start.line),
        })
    }

    fn starts_expr(&self) -> bool {
        match &self.peek().tok {
            Tok::Name(_) | Tok::Int(_) | Tok::Float(_) | Tok::Str { .. } => true,
            Tok::Keyword(k) => matches!(*k, "True" | "False" | "None" | "not" | "lambda"),
            Tok::Op(o) => matches!(*o, "(" | "[" | "{" | "-" | "+"),
            _ => false,
        }
    }

    // ---- expressions ------------------------------------------------------

    /// `test`: lambda, conditional expression, or an or-test.
    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        if self.at_kw("lambda") {
            return self.lambda();
        }
        let start = self.peek().clone();
        let body = self.or_test()?;
        if self.at_kw("if") {
            self.bump();
            let test = self.or_test()?;
            if !self.eat_kw("else") {
                return Err(self.error(&["'else'"]));
            }
            let orelse = self.expr()?;
            return Ok(Expr {
                kind: ExprKind::IfExp {
                    test: Box::new(test),
                    body: Box::new(body),
                    orelse: Box::new(orelse),
                },
                span: self.span_from(start.start, start.line),
            });
        }
        Ok(body)
    }

    fn lambda(&mut self) -> PResult<Expr> {
        let t = self.bump();
        let mut params = Vec::new();
        while let Tok::Name(n) = &self.peek().tok {
            params.push(n.clone());
            self.bump();
            if !self.eat_op(",") {
                break;
            }
        }
        if !self.at_op(":") {
            return Err(self.error(&["identifier", "':'"]));
        }
        self.bump();
        let body = self.expr()?;
        Ok(Expr {
            kind: ExprKind::Lambda {
                params,
                body: Box::new(body),
            },
            span: self.span_from(t.start, t.line),
        })
    }

    fn or_test(&mut self) -> PResult<Expr> {
        self.bool_chain("or", BoolOp::Or, Self::and_test)
    }

    fn and_test(&mut self) -> PResult<Expr> {
        self.bool_chain("and", BoolOp::And, Self::not_test)
    }

    fn bool_chain(
        &mut self,
        kw: &str,
        op: BoolOp,
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let start = self.peek().clone();
        let first = next(self)?;
        if !self.at_kw(kw) {
            return Ok(first);
        }
        let mut values = vec![first];
        while self.eat_kw(kw) {
            values.push(next(self)?);
        }
        Ok(Expr {
            kind: ExprKind::BoolOp { op, values },
            span: self.span_from(start.start, start.line),
        })
    }

    fn not_test(&mut self) -> PResult<Expr> {
        if self.at_kw("not") {
            let t = self.bump();
            let operand = self.not_test()?;
            return Ok(Expr {
                kind: ExprKind::UnaryOp {
                    op: UnaryOp::Not,
                    operand: Box::new(operand),
                },
                span: self.span_from(t.start, t.line),
            });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let start = self.peek().clone();
        let left = self.arith()?;
        let mut ops = Vec::new();
        let mut comparators = Vec::new();
        loop {
            let op = if self.at_kw("not") && self.peek_at(1) == &Tok::Keyword("in") {
                self.bump();
                self.bump();
                CmpOp::NotIn
            } else if let Some(op) = cmp_from(&self.peek().tok) {
                self.bump();
                if op == CmpOp::Is && self.eat_kw("not") {
                    CmpOp::IsNot
                } else {
                    op
                }
            } else {
                break;
            };
            ops.push(op);
            comparators.push(self.arith()?);
        }
        if ops.is_empty() {
            return Ok(left);
        }
        Ok(Expr {
            kind: ExprKind::Compare {
                left: Box::new(left),
                ops,
                comparators,
            },
            span: self.span_from(start.start, start.line),
        })
    }

    fn binary_level(
        &mut self,
        ops: &[(&str, BinOp)],
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let start = self.peek().clone();
        let mut left = next(self)?;
        'outer: loop {
            for (sym, op) in ops {
                if self.at_op(sym) {
                    self.bump();
                    let right = next(self)?;
                    left = Expr {
                        kind: ExprKind::BinOp {
                            left: Box::new(left),
                            op: *op,
                            right: Box::new(right),
                        },
                        span: self.span_from(start.start, start.line),
                    };
                    continue 'outer;
                }
            }
            break;
        }
        if matches!(self.peek().tok, Tok::Op("@" | "&" | "|" | "^")) {
            let t = self.peek();
            return Err(ParseError::unsupported(
                t.line,
                t.col,
                "bitwise or matrix operator",
            ));
        }
        Ok(left)
    }

    fn arith(&mut self) -> PResult<Expr> {
        self.binary_level(&[("+", BinOp::Add), ("-", BinOp::Sub)], Self::term)
    }

    fn term(&mut self) -> PResult<Expr> {
        self.binary_level(
            &[
                ("*", BinOp::Mul),
                ("//", BinOp::FloorDiv),
                ("/", BinOp::Div),
                ("%", BinOp::Mod),
            ],
            Self::factor,
        )
    }

    fn factor(&mut self) -> PResult<Expr> {
        let op = match self.peek().tok {
            Tok::Op("-") => Some(UnaryOp::Neg),
            Tok::Op("+") => Some(UnaryOp::Pos),
            Tok::Op("~") => {
                let t = self.peek();
                return Err(ParseError::unsupported(t.line, t.col, "bitwise operator"));
            }
            _ => None,
        };
        if let Some(op) = op {
            let t = self.bump();
            let operand = self.factor()?;
            return Ok(Expr {
                kind: ExprKind::UnaryOp {
                    op,
                    operand: Box::new(operand),
                },
                span: self.span_from(t.start, t.line),
            });
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let start = self.peek().clone();
        let base = self.primary()?;
        if self.eat_op("**") {
            let exp = self.factor()?;
            return Ok(Expr {
                kind: ExprKind::BinOp {
                    left: Box::new(base),
                    op: BinOp::Pow,
                    right: Box::new(exp),
                },
                span: self.span_from(start.start, start.line),
            });
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.peek().clone();
        let mut e = self.atom()?;
        loop {
            if self.at_op("(") {
                self.bump();
                let args = self.call_args()?;
                e = Expr {
                    kind: ExprKind::Call {
                        func: Box::new(e),
                        args,
                    },
                    span: self.span_from(start.start, start.line),
                };
            } else if self.at_op(".") {
                self.bump();
                let attr = self.expect_name()?;
                e = Expr {
                    kind: ExprKind::Attribute {
                        value: Box::new(e),
                        attr,
                    },
                    span: self.span_from(start.start, start.line),
                };
            } else if self.at_op("[") {
                self.bump();
                let index = self.subscript_index()?;
                self.expect_op("]")?;
                e = Expr {
                    kind: ExprKind::Subscript {
                        value: Box::new(e),
                        index: Box::new(index),
                    },
                    span: self.span_from(start.start, start.line),
                };
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn call_args(&mut self) -> PResult<Vec<Arg>> {
        let mut args: Vec<Arg> = Vec::new();
        loop {
            if self.at_op(")") {
                self.bump();
                break;
            }
            if self.at_op("*") || self.at_op("**") {
                let t = self.peek();
                return Err(ParseError::unsupported(t.line, t.col, "argument unpacking"));
            }
            let name = match (&self.peek().tok, self.peek_at(1)) {
                (Tok::Name(n), Tok::Op("=")) => {
                    let n = n.clone();
                    self.bump();
                    self.bump();
                    Some(n)
                }
                _ => None,
            };
            if name.is_none() && args.iter().any(|a| a.name.is_some()) {
                let t = self.peek();
                return Err(ParseError::syntax(
                    t.line,
                    t.col,
                    vec!["keyword argument".into()],
                    "positional argument after keyword argument".into(),
                ));
            }
            let value = self.expr()?;
            if self.at_kw("for") {
                let t = self.peek();
                return Err(ParseError::unsupported(t.line, t.col, "generator expression"));
            }
            args.push(Arg { name, value });
            if !self.eat_op(",") {
                self.expect_op(")").map_err(|_| self.error(&["','", "')'"]))?;
                break;
            }
        }
        Ok(args)
    }

    fn subscript_index(&mut self) -> PResult<Expr> {
        let start = self.peek().clone();
        let lower = if self.at_op(":") {
            None
        } else {
            let e = self.expr()?;
            if !self.at_op(":") {
                return Ok(e);
            }
            Some(Box::new(e))
        };
        self.expect_op(":")?;
        let upper = if self.at_op(":") || self.at_op("]") {
            None
        } else {
            Some(Box::new(self.expr()?))
        };
        let step = if self.eat_op(":") && !self.at_op("]") {
            Some(Box::new(self.expr()?))
        } else {
            None
        };
        Ok(Expr {
            kind: ExprKind::Slice { lower, upper, step },
            span: self.span_from(start.start, start.line),
        })
    }

    fn atom(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        let kind = match &t.tok {
            Tok::Name(n) => {
                self.bump();
                ExprKind::Name(n.clone())
            }
            Tok::Int(v) => {
                self.bump();
                ExprKind::Constant(Constant::Int(*v, self.src[t.start..t.end].to_string()))
            }
            Tok::Float(v) => {
                self.bump();
                ExprKind::Constant(Constant::Float(*v, self.src[t.start..t.end].to_string()))
            }
            Tok::Keyword("True") => {
                self.bump();
                ExprKind::Constant(Constant::Bool(true))
            }
            Tok::Keyword("False") => {
                self.bump();
                ExprKind::Constant(Constant::Bool(false))
            }
            Tok::Keyword("None") => {
                self.bump();
                ExprKind::Constant(Constant::None)
            }
            Tok::Str {
                raw,
                value,
                fstring,
                body_start,
            } => {
                self.bump();
                if matches!(self.peek().tok, Tok::Str { .. }) {
                    let n = self.peek();
                    return Err(ParseError::unsupported(
                        n.line,
                        n.col,
                        "implicit string concatenation",
                    ));
                }
                if *fstring {
                    self.fstring(&t, raw, *body_start)?
                } else {
                    ExprKind::Constant(Constant::Str(value.clone(), raw.clone()))
                }
            }
            Tok::Op("(") => return self.paren(),
            Tok::Op("[") => return self.list_display(),
            Tok::Op("{") => return self.dict_display(),
            _ => return Err(self.error(&["expression"])),
        };
        Ok(Expr {
            kind,
            span: self.span_from(t.start, t.line),
        })
    }

    fn paren(&mut self) -> PResult<Expr> {
        let t = self.bump();
        if self.eat_op(")") {
            return Ok(Expr {
                kind: ExprKind::Tuple {
                    elts: Vec::new(),
                    parens: true,
                },
                span: self.span_from(t.start, t.line),
            });
        }
        let first = self.expr()?;
        if self.at_kw("for") {
            let n = self.peek();
            return Err(ParseError::unsupported(n.line, n.col, "generator expression"));
        }
        if self.at_op(",") {
            let mut elts = vec![first];
            while self.eat_op(",") {
                if self.at_op(")") {
                    break;
                }
                elts.push(self.expr()?);
            }
            self.expect_op(")").map_err(|_| self.error(&["','", "')'"]))?;
            return Ok(Expr {
                kind: ExprKind::Tuple { elts, parens: true },
                span: self.span_from(t.start, t.line),
            });
        }
        self.expect_op(")")?;
        // Parenthesised expressions keep their kind; the span grows to cover
        // the parentheses so parent spans stay contiguous.
        Ok(Expr {
            kind: first.kind,
            span: self.span_from(t.start, t.line),
        })
    }

    fn list_display(&mut self) -> PResult<Expr> {
        let t = self.bump();
        let mut elts = Vec::new();
        if !self.at_op("]") {
            let first = self.expr()?;
            if self.at_kw("for") {
                let generators = self.comprehension_clauses()?;
                self.expect_op("]")?;
                return Ok(Expr {
                    kind: ExprKind::ListComp {
                        elt: Box::new(first),
                        generators,
                    },
                    span: self.span_from(t.start, t.line),
                });
            }
            elts.push(first);
            while self.eat_op(",") {
                if self.at_op("]") {
                    break;
                }
                elts.push(self.expr()?);
            }
        }
        self.expect_op("]").map_err(|_| self.error(&["','", "']'"]))?;
        Ok(Expr {
            kind: ExprKind::List(elts),
            span: self.span_from(t.start, t.line),
        })
    }

    fn comprehension_clauses(&mut self) -> PResult<Vec<Comprehension>> {
        let mut gens = Vec::new();
        while self.eat_kw("for") {
            let target = self.target_list()?;
            if !self.eat_kw("in") {
                return Err(self.error(&["'in'"]));
            }
            let iter = self.or_test()?;
            let mut ifs = Vec::new();
            while self.eat_kw("if") {
                ifs.push(self.or_test()?);
            }
            gens.push(Comprehension { target, iter, ifs });
        }
        Ok(gens)
    }

    fn dict_display(&mut self) -> PResult<Expr> {
        let t = self.bump();
        let mut items = Vec::new();
        if !self.at_op("}") {
            loop {
                let key = self.expr()?;
                if !self.at_op(":") {
                    let n = self.peek();
                    let what = if self.at_kw("for") {
                        "set comprehension"
                    } else {
                        "set display"
                    };
                    return Err(ParseError::unsupported(n.line, n.col, what));
                }
                self.bump();
                let value = self.expr()?;
                if self.at_kw("for") {
                    let n = self.peek();
                    return Err(ParseError::unsupported(n.line, n.col, "dict comprehension"));
                }
                items.push((key, value));
                if !self.eat_op(",") || self.at_op("}") {
                    break;
                }
            }
        }
        self.expect_op("}").map_err(|_| self.error(&["','", "'}'"]))?;
        Ok(Expr {
            kind: ExprKind::Dict(items),
            span: self.span_from(t.start, t.line),
        })
    }

    /// Splits an f-string body into literal runs and `{expr}` fields, parsing
    /// each field against the original source so spans stay absolute.
    fn fstring(&mut self, t: &Token, raw: &str, body_start: usize) -> PResult<ExprKind> {
        let prefix_len = body_start - t.start;
        let quote = raw[..prefix_len].to_string();
        let body_end = t.end - 1;
        let body = &self.src[body_start..body_end];
        let bytes = body.as_bytes();
        let mut parts = Vec::new();
        let mut lit = String::new();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if c == b'{' && bytes.get(i + 1) == Some(&b'{') {
                lit.push_str("{{");
                i += 2;
            } else if c == b'}' && bytes.get(i + 1) == Some(&b'}') {
                lit.push_str("}}");
                i += 2;
            } else if c == b'{' {
                if !lit.is_empty() {
                    parts.push(FStringPart::Literal(std::mem::take(&mut lit)));
                }
                let field_start = i + 1;
                let mut depth = 0usize;
                let mut j = field_start;
                let mut in_str: Option<u8> = None;
                while j < bytes.len() {
                    let b = bytes[j];
                    if let Some(q) = in_str {
                        if b == b'\\' {
                            j += 1;
                        } else if b == q {
                            in_str = None;
                        }
                    } else {
                        match b {
                            b'\'' | b'"' => in_str = Some(b),
                            b'(' | b'[' | b'{' => depth += 1,
                            b')' | b']' => depth = depth.saturating_sub(1),
                            b'}' if depth == 0 => break,
                            b'}' => depth -= 1,
                            b'!' if depth == 0 && bytes.get(j + 1) != Some(&b'=') => {
                                let (line, col) = self.line_col(body_start + j);
                                return Err(ParseError::unsupported(
                                    line,
                                    col,
                                    "f-string conversion",
                                ));
                            }
                            b':' if depth == 0 => {
                                let (line, col) = self.line_col(body_start + j);
                                return Err(ParseError::unsupported(
                                    line,
                                    col,
                                    "f-string format specification",
                                ));
                            }
                            _ => {}
                        }
                    }
                    j += 1;
                }
                let expr = self.parse_embedded(body_start + field_start, body_start + j)?;
                parts.push(FStringPart::Field(expr));
                i = j + 1;
            } else {
                let ch = body[i..].chars().next().unwrap();
                lit.push(ch);
                i += ch.len_utf8();
            }
        }
        if !lit.is_empty() {
            parts.push(FStringPart::Literal(lit));
        }
        Ok(ExprKind::FString { quote, parts })
    }

    /// Parses `src[start..end]` as a single expression with absolute spans.
    fn parse_embedded(&self, start: usize, end: usize) -> PResult<Expr> {
        let text = &self.src[start..end];
        let (line, col) = self.line_col(start);
        if text.trim().is_empty() {
            return Err(ParseError::syntax(
                line,
                col,
                vec!["expression".into()],
                "empty f-string field".into(),
            ));
        }
        let wrapped = format!("({text})");
        let base_line = line - 1;
        let mut toks = lexer::tokenize(&wrapped).map_err(|mut e| {
            e.line += base_line;
            e
        })?;
        // Drop the wrapping parentheses and trailing layout tokens.
        toks.retain(|t| !matches!(t.tok, Tok::Newline | Tok::Indent | Tok::Dedent | Tok::Eof));
        toks.remove(0);
        toks.pop();
        for t in &mut toks {
            t.start = t.start - 1 + start;
            t.end = t.end - 1 + start;
            t.line += base_line;
        }
        toks.push(Token {
            tok: Tok::Eof,
            start: end,
            end,
            line,
            col,
        });
        let mut sub = Parser::new(self.src, toks);
        let e = sub.expr()?;
        if !sub.at(&Tok::Eof) {
            return Err(sub.error(&["'}'"]));
        }
        Ok(e)
    }
}
