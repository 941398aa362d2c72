//! Tree-walking evaluator with a line tracer.
//!
//! Tracing follows pysnooper's model of a single traced frame: one `call`
//! event, a `line` event each time a statement line is about to run
//! (loop headers fire once per iteration plus once on exhaustion), and a
//! final `return` or `exception` event. Local-variable diffs are taken at
//! every event and attached to the event before it.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::sync::Arc;

use crate::dsl::ast::*;
use crate::world::SceneGraph;

use super::trace::{
    ChangeKind, EventKind, ExecutionOutcome, QueryRecord, TraceEvent, VarChange,
};
use super::value::{
    is_hashable, py_cmp, py_eq, range_len, LambdaValue, PyException, PyResult, Value,
};

/// Upper bound on expression evaluations per run, guarding loops that do
/// not pass through traced lines (comprehensions, builtins over ranges).
pub const MAX_EVAL_OPS: u64 = 2_000_000;

/// Largest sequence a program may materialize.
pub const MAX_SEQUENCE_LEN: i64 = 1_000_000;

#[derive(Default)]
pub struct Scope {
    vars: Vec<(String, Value)>,
    index: HashMap<String, usize>,
    parent: Option<Rc<RefCell<Scope>>>,
}

impl Scope {
    fn child(parent: &Rc<RefCell<Scope>>) -> Rc<RefCell<Scope>> {
        Rc::new(RefCell::new(Scope {
            parent: Some(Rc::clone(parent)),
            ..Scope::default()
        }))
    }

    pub fn set(&mut self, name: &str, value: Value) {
        match self.index.get(name) {
            Some(&i) => self.vars[i].1 = value,
            None => {
                self.index.insert(name.to_string(), self.vars.len());
                self.vars.push((name.to_string(), value));
            }
        }
    }

    fn get_local(&self, name: &str) -> Option<Value> {
        self.index.get(name).map(|&i| self.vars[i].1.clone())
    }
}

fn lookup(scope: &Rc<RefCell<Scope>>, name: &str) -> Option<Value> {
    let s = scope.borrow();
    s.get_local(name)
        .or_else(|| s.parent.as_ref().and_then(|p| lookup(p, name)))
}

enum Flow {
    Normal,
    Break,
    Continue,
    Return(Value),
}

/// Live iteration state, so ranges and lists are walked without copying.
pub(crate) enum PyIter {
    Items(std::vec::IntoIter<Value>),
    List(Rc<RefCell<Vec<Value>>>, usize),
    Range { next: i64, stop: i64, step: i64 },
}

impl Iterator for PyIter {
    type Item = Value;

    fn next(&mut self) -> Option<Value> {
        match self {
            PyIter::Items(it) => it.next(),
            PyIter::List(l, i) => {
                let v = l.borrow().get(*i).cloned();
                *i += 1;
                v
            }
            PyIter::Range { next, stop, step } => {
                let more = if *step > 0 { *next < *stop } else { *next > *stop };
                if !more {
                    return None;
                }
                let v = *next;
                *next = next.saturating_add(*step);
                Some(Value::Int(v))
            }
        }
    }
}

pub(crate) struct Interpreter<'s> {
    lines: Vec<&'s str>,
    pub(crate) scope: Rc<RefCell<Scope>>,
    root: Rc<RefCell<Scope>>,
    assigned: HashSet<String>,
    events: Vec<TraceEvent>,
    snapshot: Vec<(String, String)>,
    current_line: usize,
    step_count: usize,
    step_limit: usize,
    ops: u64,
    pub(crate) queries: Vec<QueryRecord>,
}

fn collect_assigned(stmts: &[Stmt], out: &mut HashSet<String>) {
    fn targets(e: &Expr, out: &mut HashSet<String>) {
        match &e.kind {
            ExprKind::Name(n) => {
                out.insert(n.clone());
            }
            ExprKind::Tuple { elts, .. } | ExprKind::List(elts) => {
                elts.iter().for_each(|t| targets(t, out))
            }
            _ => {}
        }
    }
    for s in stmts {
        match &s.kind {
            StmtKind::Assign { targets: ts, .. } => ts.iter().for_each(|t| targets(t, out)),
            StmtKind::AugAssign { target, .. } => targets(target, out),
            StmtKind::For { target, body, .. } => {
                targets(target, out);
                collect_assigned(body, out);
            }
            StmtKind::If { body, orelse, .. } => {
                collect_assigned(body, out);
                collect_assigned(orelse, out);
            }
            StmtKind::While { body, .. } => collect_assigned(body, out),
            _ => {}
        }
    }
}

/// Names of the API surface and Python builtins visible to programs.
pub const GLOBALS: &[&str] = &[
    "ImagePatch",
    "best_image_match",
    "bool_to_yesno",
    "distance",
    "llm_query",
    "coerce_to_numeric",
    "process_guesses",
    "len",
    "range",
    "enumerate",
    "zip",
    "sorted",
    "reversed",
    "min",
    "max",
    "sum",
    "abs",
    "round",
    "int",
    "float",
    "str",
    "bool",
    "list",
    "tuple",
    "dict",
    "any",
    "all",
    "print",
];

/// Runs `ast` (parsed from `source`) against the given scenes.
pub fn run(ast: &ProgramAst, source: &str, scenes: &[Arc<SceneGraph>], step_limit: usize) -> ExecutionOutcome {
    let root = Rc::new(RefCell::new(Scope::default()));
    let mut assigned = HashSet::new();
    collect_assigned(&ast.function.body, &mut assigned);
    let mut interp = Interpreter {
        lines: source.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect(),
        scope: Rc::clone(&root),
        root,
        assigned,
        events: Vec::new(),
        snapshot: Vec::new(),
        current_line: ast.function.span.start_line,
        step_count: 0,
        step_limit,
        ops: 0,
        queries: Vec::new(),
    };
    let image = match scenes {
        [] => Value::None,
        [one] => Value::Image(Arc::clone(one)),
        many => Value::list(many.iter().map(|s| Value::Image(Arc::clone(s))).collect()),
    };
    let func = &ast.function;
    let bound = match func.params.as_slice() {
        [param] => {
            interp.root.borrow_mut().set(param, image);
            Ok(())
        }
        [] => Err(PyException::type_error(format!(
            "{}() takes 0 positional arguments but 1 was given",
            func.name
        ))),
        [_, rest @ ..] => {
            let names: Vec<String> = rest.iter().map(|p| format!("'{p}'")).collect();
            Err(PyException::type_error(format!(
                "{}() missing {} required positional argument{}: {}",
                func.name,
                rest.len(),
                if rest.len() == 1 { "" } else { "s" },
                join_names(&names)
            )))
        }
    };
    if let Err(exc) = bound {
        return interp.finish(Err(exc));
    }
    interp.snapshot = interp.take_snapshot();
    interp.push_event(EventKind::Call, func.span.start_line);
    let flow = interp.exec_block(&func.body);
    let result = flow.map(|f| match f {
        Flow::Return(v) => v,
        _ => Value::None,
    });
    interp.finish(result)
}

fn join_names(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

impl<'s> Interpreter<'s> {
    fn source_line(&self, line: usize) -> String {
        self.lines.get(line.wrapping_sub(1)).copied().unwrap_or("").to_string()
    }

    fn push_event(&mut self, kind: EventKind, line: usize) {
        self.events.push(TraceEvent {
            kind,
            line_no: line,
            source_line: self.source_line(line),
            var_changes: Vec::new(),
            exception_text: None,
        });
    }

    fn take_snapshot(&self) -> Vec<(String, String)> {
        self.root
            .borrow()
            .vars
            .iter()
            .map(|(n, v)| (n.clone(), v.repr()))
            .collect()
    }

    /// Attaches local-variable changes since the last event to that event.
    fn flush_diffs(&mut self) {
        if self.events.is_empty() {
            return;
        }
        let now = self.take_snapshot();
        let mut changes = Vec::new();
        for (name, value) in &now {
            match self.snapshot.iter().find(|(n, _)| n == name) {
                None => changes.push(VarChange {
                    kind: ChangeKind::New,
                    name: name.clone(),
                    value: value.clone(),
                }),
                Some((_, old)) if old != value => changes.push(VarChange {
                    kind: ChangeKind::Modified,
                    name: name.clone(),
                    value: value.clone(),
                }),
                _ => {}
            }
        }
        self.snapshot = now;
        if let Some(last) = self.events.last_mut() {
            last.var_changes.extend(changes);
        }
    }

    fn line_event(&mut self, line: usize) -> PyResult<()> {
        self.flush_diffs();
        self.current_line = line;
        if self.step_count >= self.step_limit {
            return Err(PyException::new(
                "RuntimeError",
                format!("step limit of {} exceeded", self.step_limit),
            ));
        }
        self.step_count += 1;
        self.push_event(EventKind::Line, line);
        Ok(())
    }

    fn finish(mut self, result: PyResult<Value>) -> ExecutionOutcome {
        let traced = !self.events.is_empty();
        if traced {
            self.flush_diffs();
        }
        match result {
            Ok(value) => {
                if traced {
                    self.push_event(EventKind::Return, self.current_line);
                }
                let result_box = match &value {
                    Value::Patch(p) => Some(p.bounds()),
                    _ => None,
                };
                ExecutionOutcome {
                    result: Some(value.to_str()),
                    result_repr: Some(value.repr()),
                    result_box,
                    exception: None,
                    events: self.events,
                    step_count: self.step_count,
                    queries: self.queries,
                }
            }
            Err(exc) => {
                let text = exc.text();
                if traced {
                    self.push_event(EventKind::Exception, self.current_line);
                    self.events.last_mut().unwrap().exception_text = Some(text.clone());
                }
                ExecutionOutcome {
                    result: None,
                    result_repr: None,
                    result_box: None,
                    exception: Some(text),
                    events: self.events,
                    step_count: self.step_count,
                    queries: self.queries,
                }
            }
        }
    }

    fn exec_block(&mut self, stmts: &[Stmt]) -> PyResult<Flow> {
        for s in stmts {
            match self.exec_stmt(s)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_stmt(&mut self, stmt: &Stmt) -> PyResult<Flow> {
        let line = stmt.span.start_line;
        self.line_event(line)?;
        match &stmt.kind {
            StmtKind::Assign { targets, value } => {
                let v = self.eval(value)?;
                for t in targets {
                    self.assign(t, v.clone())?;
                }
                Ok(Flow::Normal)
            }
            StmtKind::AugAssign { target, op, value } => {
                let current = self.eval(target)?;
                let rhs = self.eval(value)?;
                let v = match (&current, op) {
                    // `+=` on a list extends it in place.
                    (Value::List(l), AugOp::Add) => {
                        let items: Vec<Value> = self.iterate(&rhs)?.collect();
                        l.borrow_mut().extend(items);
                        current.clone()
                    }
                    _ => self.binop(op.bin_op(), &current, &rhs)?,
                };
                self.assign(target, v)?;
                Ok(Flow::Normal)
            }
            StmtKind::Expr(e) => {
                self.eval(e)?;
                Ok(Flow::Normal)
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e)?,
                    None => Value::None,
                };
                Ok(Flow::Return(v))
            }
            StmtKind::If { test, body, orelse, .. } => {
                if self.eval(test)?.truthy() {
                    self.exec_block(body)
                } else if let [elif] = orelse.as_slice() {
                    if matches!(elif.kind, StmtKind::If { is_elif: true, .. }) {
                        self.exec_stmt(elif)
                    } else {
                        self.exec_block(orelse)
                    }
                } else {
                    self.exec_block(orelse)
                }
            }
            StmtKind::For { target, iter, body } => {
                let iterable = self.eval(iter)?;
                let it = self.iterate(&iterable)?;
                for item in it {
                    self.assign(target, item)?;
                    match self.exec_block(body)? {
                        Flow::Break => return Ok(Flow::Normal),
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Normal | Flow::Continue => {}
                    }
                    self.line_event(line)?;
                }
                Ok(Flow::Normal)
            }
            StmtKind::While { test, body } => {
                loop {
                    if !self.eval(test)?.truthy() {
                        return Ok(Flow::Normal);
                    }
                    match self.exec_block(body)? {
                        Flow::Break => return Ok(Flow::Normal),
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Normal | Flow::Continue => {}
                    }
                    self.line_event(line)?;
                }
            }
            StmtKind::Break => Ok(Flow::Break),
            StmtKind::Continue => Ok(Flow::Continue),
            StmtKind::Pass => Ok(Flow::Normal),
        }
    }

    fn assign(&mut self, target: &Expr, value: Value) -> PyResult<()> {
        match &target.kind {
            ExprKind::Name(n) => {
                self.scope.borrow_mut().set(n, value);
                Ok(())
            }
            ExprKind::Tuple { elts, .. } | ExprKind::List(elts) => {
                let items: Vec<Value> = self.iterate(&value)?.collect();
                if items.len() < elts.len() {
                    return Err(PyException::value_error(format!(
                        "not enough values to unpack (expected {}, got {})",
                        elts.len(),
                        items.len()
                    )));
                }
                if items.len() > elts.len() {
                    return Err(PyException::value_error(format!(
                        "too many values to unpack (expected {})",
                        elts.len()
                    )));
                }
                for (t, v) in elts.iter().zip(items) {
                    self.assign(t, v)?;
                }
                Ok(())
            }
            ExprKind::Subscript { value: obj, index } => {
                let obj = self.eval(obj)?;
                let key = self.eval(index)?;
                match &obj {
                    Value::List(l) => {
                        let len = l.borrow().len();
                        let i = self.normalize_index(&key, len, "list assignment")?;
                        l.borrow_mut()[i] = value;
                        Ok(())
                    }
                    Value::Dict(d) => {
                        if !is_hashable(&key) {
                            return Err(unhashable(&key));
                        }
                        let mut d = d.borrow_mut();
                        match d.iter_mut().find(|(k, _)| py_eq(k, &key)) {
                            Some(slot) => slot.1 = value,
                            None => d.push((key, value)),
                        }
                        Ok(())
                    }
                    other => Err(PyException::type_error(format!(
                        "'{}' object does not support item assignment",
                        other.type_name()
                    ))),
                }
            }
            ExprKind::Attribute { value: obj, attr } => {
                let obj = self.eval(obj)?;
                Err(PyException::new(
                    "AttributeError",
                    format!("'{}' object attribute '{attr}' is read-only", obj.type_name()),
                ))
            }
            _ => Err(PyException::new("SyntaxError", "cannot assign to expression")),
        }
    }

    fn tick(&mut self) -> PyResult<()> {
        self.ops += 1;
        if self.ops > MAX_EVAL_OPS {
            return Err(PyException::new(
                "RuntimeError",
                format!("evaluation budget of {MAX_EVAL_OPS} operations exceeded"),
            ));
        }
        Ok(())
    }

    pub(crate) fn eval(&mut self, e: &Expr) -> PyResult<Value> {
        self.tick()?;
        match &e.kind {
            ExprKind::Name(n) => self.load_name(n),
            ExprKind::Constant(c) => Ok(match c {
                Constant::None => Value::None,
                Constant::Bool(b) => Value::Bool(*b),
                Constant::Int(i, _) => Value::Int(*i),
                Constant::Float(f, _) => Value::Float(*f),
                Constant::Str(s, _) => Value::str(s),
            }),
            ExprKind::Call { func, args } => {
                let f = self.eval(func)?;
                let mut pos = Vec::new();
                let mut kw = Vec::new();
                for a in args {
                    let v = self.eval(&a.value)?;
                    match &a.name {
                        Some(n) => kw.push((n.clone(), v)),
                        None => pos.push(v),
                    }
                }
                self.call_value(&f, pos, kw)
            }
            ExprKind::Attribute { value, attr } => {
                let obj = self.eval(value)?;
                self.get_attr(&obj, attr)
            }
            ExprKind::Subscript { value, index } => {
                let obj = self.eval(value)?;
                if let ExprKind::Slice { lower, upper, step } = &index.kind {
                    let lower = self.eval_opt(lower.as_deref())?;
                    let upper = self.eval_opt(upper.as_deref())?;
                    let step = self.eval_opt(step.as_deref())?;
                    return self.slice(&obj, lower, upper, step);
                }
                let key = self.eval(index)?;
                self.subscript(&obj, &key)
            }
            ExprKind::Slice { .. } => Err(PyException::new("SyntaxError", "invalid slice")),
            ExprKind::BinOp { left, op, right } => {
                let l = self.eval(left)?;
                let r = self.eval(right)?;
                self.binop(*op, &l, &r)
            }
            ExprKind::UnaryOp { op, operand } => {
                let v = self.eval(operand)?;
                match (op, &v) {
                    (UnaryOp::Not, _) => Ok(Value::Bool(!v.truthy())),
                    (UnaryOp::Neg, Value::Int(i)) => {
                        i.checked_neg().map(Value::Int).ok_or_else(overflow)
                    }
                    (UnaryOp::Neg, Value::Bool(b)) => Ok(Value::Int(-(*b as i64))),
                    (UnaryOp::Neg, Value::Float(f)) => Ok(Value::Float(-f)),
                    (UnaryOp::Pos, Value::Int(_) | Value::Float(_)) => Ok(v.clone()),
                    (UnaryOp::Pos, Value::Bool(b)) => Ok(Value::Int(*b as i64)),
                    (op, v) => Err(PyException::type_error(format!(
                        "bad operand type for unary {}: '{}'",
                        if *op == UnaryOp::Neg { "-" } else { "+" },
                        v.type_name()
                    ))),
                }
            }
            ExprKind::BoolOp { op, values } => {
                let mut last = Value::None;
                for v in values {
                    last = self.eval(v)?;
                    let t = last.truthy();
                    if (*op == BoolOp::And && !t) || (*op == BoolOp::Or && t) {
                        return Ok(last);
                    }
                }
                Ok(last)
            }
            ExprKind::Compare { left, ops, comparators } => {
                let mut l = self.eval(left)?;
                for (op, c) in ops.iter().zip(comparators) {
                    let r = self.eval(c)?;
                    if !self.compare(*op, &l, &r)? {
                        return Ok(Value::Bool(false));
                    }
                    l = r;
                }
                Ok(Value::Bool(true))
            }
            ExprKind::IfExp { test, body, orelse } => {
                if self.eval(test)?.truthy() {
                    self.eval(body)
                } else {
                    self.eval(orelse)
                }
            }
            ExprKind::Lambda { params, body } => Ok(Value::Lambda(Rc::new(LambdaValue {
                params: params.clone(),
                body: Rc::new((**body).clone()),
                scope: Rc::clone(&self.scope),
            }))),
            ExprKind::List(items) => {
                let vs = items.iter().map(|i| self.eval(i)).collect::<PyResult<Vec<_>>>()?;
                Ok(Value::list(vs))
            }
            ExprKind::Tuple { elts, .. } => {
                let vs = elts.iter().map(|i| self.eval(i)).collect::<PyResult<Vec<_>>>()?;
                Ok(Value::tuple(vs))
            }
            ExprKind::Dict(items) => {
                let mut out: Vec<(Value, Value)> = Vec::new();
                for (k, v) in items {
                    let k = self.eval(k)?;
                    let v = self.eval(v)?;
                    if !is_hashable(&k) {
                        return Err(unhashable(&k));
                    }
                    match out.iter_mut().find(|(k2, _)| py_eq(k2, &k)) {
                        Some(slot) => slot.1 = v,
                        None => out.push((k, v)),
                    }
                }
                Ok(Value::Dict(Rc::new(RefCell::new(out))))
            }
            ExprKind::ListComp { elt, generators } => {
                let outer = Rc::clone(&self.scope);
                self.scope = Scope::child(&outer);
                let mut out = Vec::new();
                let r = self.comprehension(elt, generators, &mut out);
                self.scope = outer;
                r.map(|_| Value::list(out))
            }
            ExprKind::FString { quote, parts } => {
                let raw = quote.contains(['r', 'R']);
                let mut s = String::new();
                for p in parts {
                    match p {
                        FStringPart::Literal(text) => s.push_str(&decode_fstring_literal(text, raw)),
                        FStringPart::Field(e) => s.push_str(&self.eval(e)?.to_str_full()),
                    }
                }
                Ok(Value::str(&s))
            }
        }
    }

    fn eval_opt(&mut self, e: Option<&Expr>) -> PyResult<Option<Value>> {
        e.map(|e| self.eval(e)).transpose()
    }

    fn comprehension(
        &mut self,
        elt: &Expr,
        generators: &[Comprehension],
        out: &mut Vec<Value>,
    ) -> PyResult<()> {
        let Some((first, rest)) = generators.split_first() else {
            let v = self.eval(elt)?;
            if out.len() as i64 >= MAX_SEQUENCE_LEN {
                return Err(memory_error());
            }
            out.push(v);
            return Ok(());
        };
        let iterable = self.eval(&first.iter)?;
        let it = self.iterate(&iterable)?;
        'items: for item in it {
            self.tick()?;
            self.assign(&first.target, item)?;
            for cond in &first.ifs {
                if !self.eval(cond)?.truthy() {
                    continue 'items;
                }
            }
            self.comprehension(elt, rest, out)?;
        }
        Ok(())
    }

    fn load_name(&self, name: &str) -> PyResult<Value> {
        if let Some(v) = lookup(&self.scope, name) {
            return Ok(v);
        }
        if self.assigned.contains(name) {
            return Err(PyException::new(
                "UnboundLocalError",
                format!("cannot access local variable '{name}' where it is not associated with a value"),
            ));
        }
        if let Some(g) = GLOBALS.iter().find(|g| **g == name) {
            return Ok(Value::Builtin(g));
        }
        Err(PyException::new("NameError", format!("name '{name}' is not defined")))
    }

    pub(crate) fn call_value(
        &mut self,
        f: &Value,
        pos: Vec<Value>,
        kw: Vec<(String, Value)>,
    ) -> PyResult<Value> {
        self.tick()?;
        match f {
            Value::Lambda(l) => {
                let args = bind_args("<lambda>", &l.params.iter().map(String::as_str).collect::<Vec<_>>(), l.params.len(), pos, kw)?;
                let scope = Scope::child(&l.scope);
                for (p, v) in l.params.iter().zip(args) {
                    scope.borrow_mut().set(p, v.expect("all lambda parameters are required"));
                }
                let outer = std::mem::replace(&mut self.scope, scope);
                let r = self.eval(&l.body);
                self.scope = outer;
                r
            }
            Value::Builtin(name) => self.call_builtin(name, pos, kw),
            Value::Method(m) => {
                let (recv, name) = (&m.0, m.1.as_str());
                self.call_method(recv, name, pos, kw)
            }
            other => Err(PyException::type_error(format!(
                "'{}' object is not callable",
                other.type_name()
            ))),
        }
    }

    pub(crate) fn iterate(&mut self, v: &Value) -> PyResult<PyIter> {
        Ok(match v {
            Value::List(l) => PyIter::List(Rc::clone(l), 0),
            Value::Tuple(t) => PyIter::Items(t.to_vec().into_iter()),
            Value::Str(s) => PyIter::Items(
                s.chars()
                    .map(|c| Value::str(c.encode_utf8(&mut [0; 4])))
                    .collect::<Vec<_>>()
                    .into_iter(),
            ),
            Value::Dict(d) => PyIter::Items(
                d.borrow().iter().map(|(k, _)| k.clone()).collect::<Vec<_>>().into_iter(),
            ),
            Value::Range { start, stop, step } => PyIter::Range {
                next: *start,
                stop: *stop,
                step: *step,
            },
            other => {
                return Err(PyException::type_error(format!(
                    "'{}' object is not iterable",
                    other.type_name()
                )))
            }
        })
    }

    /// Materializes an iterable, enforcing the sequence size cap.
    pub(crate) fn collect(&mut self, v: &Value) -> PyResult<Vec<Value>> {
        if let Value::Range { .. } = v {
            if range_len(v) > MAX_SEQUENCE_LEN {
                return Err(memory_error());
            }
        }
        Ok(self.iterate(v)?.collect())
    }

    pub(crate) fn normalize_index(&self, key: &Value, len: usize, what: &str) -> PyResult<usize> {
        let Some(i) = key.as_index() else {
            let container = what.split(' ').next().unwrap_or(what);
            return Err(PyException::type_error(format!(
                "{container} indices must be integers or slices, not {}",
                key.type_name()
            )));
        };
        let len = len as i64;
        let idx = if i < 0 { i + len } else { i };
        if idx < 0 || idx >= len {
            return Err(PyException::new("IndexError", format!("{what} index out of range")));
        }
        Ok(idx as usize)
    }

    fn subscript(&mut self, obj: &Value, key: &Value) -> PyResult<Value> {
        match obj {
            Value::List(l) => {
                let l = l.borrow();
                let i = self.normalize_index(key, l.len(), "list")?;
                Ok(l[i].clone())
            }
            Value::Tuple(t) => {
                let i = self.normalize_index(key, t.len(), "tuple")?;
                Ok(t[i].clone())
            }
            Value::Str(s) => {
                let chars: Vec<char> = s.chars().collect();
                let i = self.normalize_index(key, chars.len(), "string")?;
                Ok(Value::str(chars[i].encode_utf8(&mut [0; 4])))
            }
            Value::Range { start, step, .. } => {
                let i = self.normalize_index(key, range_len(obj) as usize, "range object")?;
                Ok(Value::Int(start + step * i as i64))
            }
            Value::Dict(d) => {
                if !is_hashable(key) {
                    return Err(unhashable(key));
                }
                d.borrow()
                    .iter()
                    .find(|(k, _)| py_eq(k, key))
                    .map(|(_, v)| v.clone())
                    .ok_or_else(|| PyException::new("KeyError", key.repr()))
            }
            other => Err(PyException::type_error(format!(
                "'{}' object is not subscriptable",
                other.type_name()
            ))),
        }
    }

    fn slice(
        &mut self,
        obj: &Value,
        lower: Option<Value>,
        upper: Option<Value>,
        step: Option<Value>,
    ) -> PyResult<Value> {
        let as_bound = |v: Option<Value>| -> PyResult<Option<i64>> {
            match v {
                None | Some(Value::None) => Ok(None),
                Some(v) => v.as_index().map(Some).ok_or_else(|| {
                    PyException::type_error(
                        "slice indices must be integers or None or have an __index__ method",
                    )
                }),
            }
        };
        let (lo, hi, st) = (as_bound(lower)?, as_bound(upper)?, as_bound(step)?);
        let st = st.unwrap_or(1);
        if st == 0 {
            return Err(PyException::value_error("slice step cannot be zero"));
        }
        let pick = |len: usize| slice_indices(len as i64, lo, hi, st);
        match obj {
            Value::List(l) => {
                let l = l.borrow();
                Ok(Value::list(pick(l.len()).into_iter().map(|i| l[i].clone()).collect()))
            }
            Value::Tuple(t) => Ok(Value::tuple(pick(t.len()).into_iter().map(|i| t[i].clone()).collect())),
            Value::Str(s) => {
                let chars: Vec<char> = s.chars().collect();
                Ok(Value::str(&pick(chars.len()).into_iter().map(|i| chars[i]).collect::<String>()))
            }
            other => Err(PyException::type_error(format!(
                "'{}' object is not subscriptable",
                other.type_name()
            ))),
        }
    }

    pub(crate) fn binop(&mut self, op: BinOp, l: &Value, r: &Value) -> PyResult<Value> {
        use Value::*;
        let unsupported = || {
            PyException::type_error(format!(
                "unsupported operand type(s) for {}: '{}' and '{}'",
                op.symbol(),
                l.type_name(),
                r.type_name()
            ))
        };
        let ints = match (l, r) {
            (Int(_) | Bool(_), Int(_) | Bool(_)) => Some((l.as_index().unwrap(), r.as_index().unwrap())),
            _ => Option::None,
        };
        let floats = match (l.as_number(), r.as_number()) {
            (Some(a), Some(b)) if ints.is_none() => Some((a, b)),
            _ => Option::None,
        };
        match op {
            BinOp::Add => {
                if let Some((a, b)) = ints {
                    return a.checked_add(b).map(Int).ok_or_else(overflow);
                }
                if let Some((a, b)) = floats {
                    return Ok(Float(a + b));
                }
                match (l, r) {
                    (Str(a), Str(b)) => Ok(Value::str(&format!("{a}{b}"))),
                    (Str(_), _) => Err(PyException::type_error(format!(
                        "can only concatenate str (not \"{}\") to str",
                        r.type_name()
                    ))),
                    (List(a), List(b)) => {
                        let mut v = a.borrow().clone();
                        v.extend(b.borrow().iter().cloned());
                        Ok(Value::list(v))
                    }
                    (List(_), _) => Err(PyException::type_error(format!(
                        "can only concatenate list (not \"{}\") to list",
                        r.type_name()
                    ))),
                    (Tuple(a), Tuple(b)) => Ok(Value::tuple(a.iter().chain(b.iter()).cloned().collect())),
                    _ => Err(unsupported()),
                }
            }
            BinOp::Sub => {
                if let Some((a, b)) = ints {
                    return a.checked_sub(b).map(Int).ok_or_else(overflow);
                }
                floats.map(|(a, b)| Float(a - b)).ok_or_else(unsupported)
            }
            BinOp::Mul => {
                if let Some((a, b)) = ints {
                    return a.checked_mul(b).map(Int).ok_or_else(overflow);
                }
                if let Some((a, b)) = floats {
                    return Ok(Float(a * b));
                }
                let (seq, n) = match (l, r) {
                    (Str(_) | List(_) | Tuple(_), n) | (n, Str(_) | List(_) | Tuple(_)) => {
                        let seq = if matches!(l, Str(_) | List(_) | Tuple(_)) { l } else { r };
                        match n.as_index() {
                            Some(n) => (seq, n.max(0)),
                            Option::None => {
                                return Err(PyException::type_error(format!(
                                    "can't multiply sequence by non-int of type '{}'",
                                    n.type_name()
                                )))
                            }
                        }
                    }
                    _ => return Err(unsupported()),
                };
                let len = match seq {
                    Str(s) => s.chars().count(),
                    List(v) => v.borrow().len(),
                    Tuple(t) => t.len(),
                    _ => 0,
                } as i64;
                if len.saturating_mul(n) > MAX_SEQUENCE_LEN {
                    return Err(memory_error());
                }
                Ok(match seq {
                    Str(s) => Value::str(&s.repeat(n as usize)),
                    List(v) => Value::list(repeat_values(&v.borrow(), n as usize)),
                    Tuple(t) => Value::tuple(repeat_values(t, n as usize)),
                    _ => unreachable!(),
                })
            }
            BinOp::Div => {
                let (a, b) = match (ints, floats) {
                    (Some((a, b)), _) => (a as f64, b as f64),
                    (Option::None, Some(p)) => p,
                    _ => return Err(unsupported()),
                };
                if b == 0.0 {
                    let msg = if ints.is_some() { "division by zero" } else { "float division by zero" };
                    return Err(PyException::new("ZeroDivisionError", msg));
                }
                Ok(Float(a / b))
            }
            BinOp::FloorDiv | BinOp::Mod => {
                let is_div = op == BinOp::FloorDiv;
                if let Some((a, b)) = ints {
                    if b == 0 {
                        let msg = if is_div { "integer division or modulo by zero" } else { "integer modulo by zero" };
                        return Err(PyException::new("ZeroDivisionError", msg));
                    }
                    let q = a.checked_div(b).ok_or_else(overflow)?;
                    let m = a - q * b;
                    // Python floors toward negative infinity.
                    let (q, m) = if m != 0 && (m < 0) != (b < 0) { (q - 1, m + b) } else { (q, m) };
                    return Ok(Int(if is_div { q } else { m }));
                }
                if let Some((a, b)) = floats {
                    if b == 0.0 {
                        let msg = if is_div { "float floor division by zero" } else { "float modulo" };
                        return Err(PyException::new("ZeroDivisionError", msg));
                    }
                    let q = (a / b).floor();
                    return Ok(Float(if is_div { q } else { a - q * b }));
                }
                Err(unsupported())
            }
            BinOp::Pow => {
                if let Some((a, b)) = ints {
                    if b >= 0 {
                        let e = u32::try_from(b).map_err(|_| overflow())?;
                        return a.checked_pow(e).map(Int).ok_or_else(overflow);
                    }
                    if a == 0 {
                        return Err(PyException::new(
                            "ZeroDivisionError",
                            "0.0 cannot be raised to a negative power",
                        ));
                    }
                    return Ok(Float((a as f64).powf(b as f64)));
                }
                if let Some((a, b)) = floats {
                    if a == 0.0 && b < 0.0 {
                        return Err(PyException::new(
                            "ZeroDivisionError",
                            "0.0 cannot be raised to a negative power",
                        ));
                    }
                    return Ok(Float(a.powf(b)));
                }
                Err(unsupported())
            }
        }
    }

    pub(crate) fn contains(&mut self, container: &Value, item: &Value) -> PyResult<bool> {
        match container {
            Value::Str(s) => match item {
                Value::Str(sub) => Ok(s.contains(&**sub)),
                other => Err(PyException::type_error(format!(
                    "'in <string>' requires string as left operand, not {}",
                    other.type_name()
                ))),
            },
            Value::List(l) => Ok(l.borrow().iter().any(|v| py_eq(v, item))),
            Value::Tuple(t) => Ok(t.iter().any(|v| py_eq(v, item))),
            Value::Dict(d) => {
                if !is_hashable(item) {
                    return Err(unhashable(item));
                }
                Ok(d.borrow().iter().any(|(k, _)| py_eq(k, item)))
            }
            Value::Range { start, step, .. } => Ok(match item.as_index() {
                Some(i) => {
                    let n = range_len(container);
                    let off = i - start;
                    off % step == 0 && (0..n).contains(&(off / step))
                }
                None => false,
            }),
            other => Err(PyException::type_error(format!(
                "argument of type '{}' is not iterable",
                other.type_name()
            ))),
        }
    }

    fn compare(&mut self, op: CmpOp, l: &Value, r: &Value) -> PyResult<bool> {
        use std::cmp::Ordering::*;
        Ok(match op {
            CmpOp::Eq => py_eq(l, r),
            CmpOp::NotEq => !py_eq(l, r),
            CmpOp::In => self.contains(r, l)?,
            CmpOp::NotIn => !self.contains(r, l)?,
            CmpOp::Is => is_same(l, r),
            CmpOp::IsNot => !is_same(l, r),
            CmpOp::Lt | CmpOp::LtE | CmpOp::Gt | CmpOp::GtE => {
                let nan = matches!(l, Value::Float(f) if f.is_nan()) || matches!(r, Value::Float(f) if f.is_nan());
                let ord = py_cmp(l, r, op.symbol())?;
                if nan {
                    return Ok(false);
                }
                match op {
                    CmpOp::Lt => ord == Less,
                    CmpOp::LtE => ord != Greater,
                    CmpOp::Gt => ord == Greater,
                    _ => ord != Less,
                }
            }
        })
    }

    pub(crate) fn record_query(&mut self, scene: &SceneGraph, question: &str) {
        self.queries.push(QueryRecord {
            image_id: scene.image_id.clone(),
            question: question.to_string(),
            faulty: scene.is_faulty_question(question),
        });
    }
}

fn is_same(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::None, Value::None) => true,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Str(x), Value::Str(y)) => Rc::ptr_eq(x, y) || x == y,
        (Value::List(x), Value::List(y)) => Rc::ptr_eq(x, y),
        (Value::Dict(x), Value::Dict(y)) => Rc::ptr_eq(x, y),
        (Value::Tuple(x), Value::Tuple(y)) => Rc::ptr_eq(x, y),
        (Value::Patch(x), Value::Patch(y)) => Rc::ptr_eq(x, y),
        (Value::Image(x), Value::Image(y)) => Arc::ptr_eq(x, y),
        (Value::Lambda(x), Value::Lambda(y)) => Rc::ptr_eq(x, y),
        (Value::Builtin(x), Value::Builtin(y)) => x == y,
        _ => false,
    }
}

/// CPython's slice index adjustment.
fn slice_indices(len: i64, lo: Option<i64>, hi: Option<i64>, step: i64) -> Vec<usize> {
    let clamp = |v: i64, low: i64, high: i64| v.max(low).min(high);
    let adjust = |v: Option<i64>, default: i64| -> i64 {
        match v {
            None => default,
            Some(v) if v < 0 => {
                let v = v + len;
                if step < 0 { clamp(v, -1, len - 1) } else { clamp(v, 0, len) }
            }
            Some(v) => {
                if step < 0 { clamp(v, -1, len - 1) } else { clamp(v, 0, len) }
            }
        }
    };
    let (start, stop) = if step > 0 {
        (adjust(lo, 0), adjust(hi, len))
    } else {
        (adjust(lo, len - 1), adjust(hi, -1))
    };
    let mut out = Vec::new();
    let mut i = start;
    while (step > 0 && i < stop) || (step < 0 && i > stop) {
        out.push(i as usize);
        i += step;
    }
    out
}

/// Decodes the literal text between f-string fields.
fn decode_fstring_literal(text: &str, raw: bool) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' | '}' if chars.peek() == Some(&c) => {
                chars.next();
                out.push(c);
            }
            '\\' if !raw => match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('r') => out.push('\r'),
                Some('0') => out.push('\0'),
                Some('\\') => out.push('\\'),
                Some('\'') => out.push('\''),
                Some('"') => out.push('"'),
                Some(n @ ('x' | 'u')) => {
                    let len = if n == 'x' { 2 } else { 4 };
                    let hex: String = (0..len).filter_map(|_| chars.next()).collect();
                    match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                        Some(ch) => out.push(ch),
                        None => {
                            out.push('\\');
                            out.push(n);
                            out.push_str(&hex);
                        }
                    }
                }
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            },
            c => out.push(c),
        }
    }
    out
}

pub(crate) fn bind_args(
    fname: &str,
    params: &[&str],
    required: usize,
    pos: Vec<Value>,
    kw: Vec<(String, Value)>,
) -> PyResult<Vec<Option<Value>>> {
    if pos.len() > params.len() {
        let takes = if required == params.len() {
            format!("{} positional argument{}", params.len(), if params.len() == 1 { "" } else { "s" })
        } else {
            format!("from {required} to {} positional arguments", params.len())
        };
        let given = pos.len();
        return Err(PyException::type_error(format!(
            "{fname}() takes {takes} but {given} {} given",
            if given == 1 { "was" } else { "were" }
        )));
    }
    let mut slots: Vec<Option<Value>> = vec![None; params.len()];
    for (i, v) in pos.into_iter().enumerate() {
        slots[i] = Some(v);
    }
    for (name, v) in kw {
        let Some(i) = params.iter().position(|p| *p == name) else {
            return Err(PyException::type_error(format!(
                "{fname}() got an unexpected keyword argument '{name}'"
            )));
        };
        if slots[i].is_some() {
            return Err(PyException::type_error(format!(
                "{fname}() got multiple values for argument '{name}'"
            )));
        }
        slots[i] = Some(v);
    }
    let missing: Vec<String> = params[..required]
        .iter()
        .zip(&slots)
        .filter(|(_, s)| s.is_none())
        .map(|(p, _)| format!("'{p}'"))
        .collect();
    if !missing.is_empty() {
        return Err(PyException::type_error(format!(
            "{fname}() missing {} required positional argument{}: {}",
            missing.len(),
            if missing.len() == 1 { "" } else { "s" },
            join_names(&missing)
        )));
    }
    Ok(slots)
}

fn repeat_values(items: &[Value], n: usize) -> Vec<Value> {
    let mut out = Vec::with_capacity(items.len() * n);
    for _ in 0..n {
        out.extend_from_slice(items);
    }
    out
}

fn overflow() -> PyException {
    PyException::new("OverflowError", "integer result too large")
}

pub(crate) fn memory_error() -> PyException {
    PyException::new("MemoryError", format!("sequence longer than {MAX_SEQUENCE_LEN} items"))
}

pub(crate) fn unhashable(v: &Value) -> PyException {
    PyException::type_error(format!("unhashable type: '{}'", v.type_name()))
}
