//! Runtime values with Python-compatible `repr`, `str`, truthiness,
//! equality and ordering.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::rc::Rc;
use std::sync::Arc;

use crate::dsl::ast::Expr;
use crate::pyfmt::{float_repr, str_repr};
use crate::world::{PatchValue, SceneGraph};

use super::interp::Scope;

/// A raised exception: Python type name plus message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PyException {
    pub kind: String,
    pub message: String,
}

impl PyException {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        PyException {
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    pub fn type_error(message: impl Into<String>) -> Self {
        Self::new("TypeError", message)
    }

    pub fn value_error(message: impl Into<String>) -> Self {
        Self::new("ValueError", message)
    }

    /// `ErrorType: message`, or just the type when the message is empty.
    pub fn text(&self) -> String {
        if self.message.is_empty() {
            self.kind.clone()
        } else {
            format!("{}: {}", self.kind, self.message)
        }
    }
}

pub type PyResult<T> = Result<T, PyException>;

pub struct LambdaValue {
    pub params: Vec<String>,
    pub body: Rc<Expr>,
    pub scope: Rc<RefCell<Scope>>,
}

#[derive(Clone)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<str>),
    List(Rc<RefCell<Vec<Value>>>),
    Tuple(Rc<[Value]>),
    Dict(Rc<RefCell<Vec<(Value, Value)>>>),
    Range { start: i64, stop: i64, step: i64 },
    Patch(Rc<PatchValue>),
    Image(Arc<SceneGraph>),
    Lambda(Rc<LambdaValue>),
    Builtin(&'static str),
    Method(Rc<(Value, String)>),
}

/// Longest rendering of a single value before it is cut with `…`.
pub const MAX_REPR_CHARS: usize = 200;

impl Value {
    pub fn str(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    pub fn list(items: Vec<Value>) -> Value {
        Value::List(Rc::new(RefCell::new(items)))
    }

    pub fn tuple(items: Vec<Value>) -> Value {
        Value::Tuple(Rc::from(items))
    }

    pub fn patch(p: PatchValue) -> Value {
        Value::Patch(Rc::new(p))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::None => "NoneType",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
            Value::Dict(_) => "dict",
            Value::Range { .. } => "range",
            Value::Patch(_) => "ImagePatch",
            Value::Image(_) => "Image",
            Value::Lambda(_) => "function",
            Value::Builtin(name) if is_class(name) => "type",
            Value::Builtin(_) => "builtin_function_or_method",
            Value::Method(_) => "builtin_function_or_method",
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(i) => *i != 0,
            Value::Float(f) => *f != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::List(l) => !l.borrow().is_empty(),
            Value::Tuple(t) => !t.is_empty(),
            Value::Dict(d) => !d.borrow().is_empty(),
            Value::Range { .. } => range_len(self) > 0,
            _ => true,
        }
    }

    /// Full `repr()`, cut at [`MAX_REPR_CHARS`] characters with a trailing `…`.
    pub fn repr(&self) -> String {
        let mut out = String::new();
        self.repr_into(&mut out, &mut Vec::new());
        truncate_chars(out)
    }

    /// `str()`: strings unquoted, everything else as `repr`.
    pub fn to_str(&self) -> String {
        match self {
            Value::Str(s) => s.to_string(),
            other => other.repr(),
        }
    }

    /// `str()` without the length cap, for f-strings and `str()` calls.
    pub fn to_str_full(&self) -> String {
        match self {
            Value::Str(s) => s.to_string(),
            other => {
                let mut out = String::new();
                other.repr_into(&mut out, &mut Vec::new());
                out
            }
        }
    }

    fn repr_into(&self, out: &mut String, seen: &mut Vec<usize>) {
        // Stop early: anything past the cap is discarded anyway.
        if out.len() > MAX_REPR_CHARS * 4 + 16 {
            return;
        }
        match self {
            Value::None => out.push_str("None"),
            Value::Bool(true) => out.push_str("True"),
            Value::Bool(false) => out.push_str("False"),
            Value::Int(i) => out.push_str(&i.to_string()),
            Value::Float(f) => out.push_str(&float_repr(*f)),
            Value::Str(s) => out.push_str(&str_repr(s)),
            Value::List(l) => {
                let id = Rc::as_ptr(l) as usize;
                if seen.contains(&id) {
                    out.push_str("[...]");
                    return;
                }
                seen.push(id);
                out.push('[');
                for (i, v) in l.borrow().iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    v.repr_into(out, seen);
                }
                out.push(']');
                seen.pop();
            }
            Value::Tuple(t) => {
                out.push('(');
                for (i, v) in t.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    v.repr_into(out, seen);
                }
                if t.len() == 1 {
                    out.push(',');
                }
                out.push(')');
            }
            Value::Dict(d) => {
                let id = Rc::as_ptr(d) as usize;
                if seen.contains(&id) {
                    out.push_str("{...}");
                    return;
                }
                seen.push(id);
                out.push('{');
                for (i, (k, v)) in d.borrow().iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    k.repr_into(out, seen);
                    out.push_str(": ");
                    v.repr_into(out, seen);
                }
                out.push('}');
                seen.pop();
            }
            Value::Range { start, stop, step } => {
                if *step == 1 {
                    out.push_str(&format!("range({start}, {stop})"));
                } else {
                    out.push_str(&format!("range({start}, {stop}, {step})"));
                }
            }
            Value::Patch(p) => out.push_str(&p.repr()),
            Value::Image(s) => {
                out.push_str(&format!("<Image {} {}x{}>", str_repr(&s.image_id), s.width, s.height))
            }
            Value::Lambda(_) => out.push_str("<function execute_command.<locals>.<lambda>>"),
            Value::Builtin(name) if is_class(name) => out.push_str(&format!("<class '{name}'>")),
            Value::Builtin(name) => out.push_str(&format!("<built-in function {name}>")),
            Value::Method(m) => {
                out.push_str(&format!("<bound method {}.{}>", m.0.type_name(), m.1));
            }
        }
    }

    pub fn as_index(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Bool(b) => Some(*b as i64),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Bool(b) => Some(*b as i64 as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    fn is_numeric(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Bool(_) | Value::Float(_))
    }
}

impl std::fmt::Debug for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.repr())
    }
}

pub fn is_class(name: &str) -> bool {
    matches!(
        name,
        "ImagePatch" | "int" | "float" | "str" | "bool" | "list" | "tuple" | "dict" | "range"
    )
}

fn truncate_chars(s: String) -> String {
    match s.char_indices().nth(MAX_REPR_CHARS) {
        Some((idx, _)) => {
            let mut cut = s[..idx].to_string();
            cut.push('…');
            cut
        }
        None => s,
    }
}

pub fn range_len(v: &Value) -> i64 {
    let Value::Range { start, stop, step } = *v else {
        return 0;
    };
    if step > 0 && start < stop {
        (stop - start - 1) / step + 1
    } else if step < 0 && start > stop {
        (start - stop - 1) / (-step) + 1
    } else {
        0
    }
}

/// `a == b` with Python's cross-type numeric equality.
pub fn py_eq(a: &Value, b: &Value) -> bool {
    eq_depth(a, b, 0)
}

fn eq_depth(a: &Value, b: &Value, depth: usize) -> bool {
    if depth > 64 {
        return false;
    }
    match (a, b) {
        (Value::None, Value::None) => true,
        (Value::Int(x), Value::Int(y)) => x == y,
        (x, y) if x.is_numeric() && y.is_numeric() => match (x, y) {
            (Value::Float(_), _) | (_, Value::Float(_)) => x.as_number() == y.as_number(),
            _ => x.as_index() == y.as_index(),
        },
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::List(x), Value::List(y)) => {
            if Rc::ptr_eq(x, y) {
                return true;
            }
            let (x, y) = (x.borrow(), y.borrow());
            x.len() == y.len() && x.iter().zip(y.iter()).all(|(p, q)| eq_depth(p, q, depth + 1))
        }
        (Value::Tuple(x), Value::Tuple(y)) => {
            x.len() == y.len() && x.iter().zip(y.iter()).all(|(p, q)| eq_depth(p, q, depth + 1))
        }
        (Value::Dict(x), Value::Dict(y)) => {
            if Rc::ptr_eq(x, y) {
                return true;
            }
            let (x, y) = (x.borrow(), y.borrow());
            x.len() == y.len()
                && x.iter().all(|(k, v)| {
                    y.iter()
                        .any(|(k2, v2)| eq_depth(k, k2, depth + 1) && eq_depth(v, v2, depth + 1))
                })
        }
        (Value::Range { .. }, Value::Range { .. }) => {
            let (la, lb) = (range_len(a), range_len(b));
            match (a, b) {
                (
                    Value::Range { start: s1, step: st1, .. },
                    Value::Range { start: s2, step: st2, .. },
                ) => la == lb && (la == 0 || (s1 == s2 && (la == 1 || st1 == st2))),
                _ => false,
            }
        }
        (Value::Patch(x), Value::Patch(y)) => x == y,
        (Value::Image(x), Value::Image(y)) => Arc::ptr_eq(x, y),
        (Value::Lambda(x), Value::Lambda(y)) => Rc::ptr_eq(x, y),
        (Value::Builtin(x), Value::Builtin(y)) => x == y,
        (Value::Method(x), Value::Method(y)) => Rc::ptr_eq(x, y),
        _ => false,
    }
}

/// Ordering for `<`, `sorted`, `min`/`max`.
pub fn py_cmp(a: &Value, b: &Value, op: &str) -> PyResult<Ordering> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Ok(x.cmp(y)),
        (x, y) if x.is_numeric() && y.is_numeric() => {
            let (x, y) = (x.as_number().unwrap(), y.as_number().unwrap());
            // NaN compares false both ways; Equal keeps callers consistent.
            Ok(x.partial_cmp(&y).unwrap_or(Ordering::Equal))
        }
        (Value::Str(x), Value::Str(y)) => Ok(x.cmp(y)),
        (Value::List(x), Value::List(y)) => {
            let (x, y) = (x.borrow().clone(), y.borrow().clone());
            seq_cmp(&x, &y, op)
        }
        (Value::Tuple(x), Value::Tuple(y)) => seq_cmp(x, y, op),
        _ => Err(PyException::type_error(format!(
            "'{op}' not supported between instances of '{}' and '{}'",
            a.type_name(),
            b.type_name()
        ))),
    }
}

fn seq_cmp(x: &[Value], y: &[Value], op: &str) -> PyResult<Ordering> {
    for (p, q) in x.iter().zip(y.iter()) {
        if !py_eq(p, q) {
            return py_cmp(p, q, op);
        }
    }
    Ok(x.len().cmp(&y.len()))
}

/// Whether `v` may be used as a dictionary key.
pub fn is_hashable(v: &Value) -> bool {
    match v {
        Value::List(_) | Value::Dict(_) => false,
        Value::Tuple(t) => t.iter().all(is_hashable),
        _ => true,
    }
}
