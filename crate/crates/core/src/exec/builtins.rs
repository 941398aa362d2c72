//! Builtin functions, methods of builtin types, and the `ImagePatch` API.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::rc::Rc;

use crate::world::{self, ImageMatch, PatchValue};

use super::interp::{bind_args, memory_error, unhashable, Interpreter, MAX_SEQUENCE_LEN};
use super::value::{is_hashable, py_cmp, py_eq, range_len, PyException, PyResult, Value};

const PATCH_METHODS: &[&str] = &[
    "find",
    "exists",
    "verify_property",
    "simple_query",
    "best_text_match",
    "crop",
    "compute_depth",
];

/// API names from the wider visual-programming toolkit that the scene-graph
/// world deliberately does not emulate.
const UNSUPPORTED_APIS: &[&str] = &["llm_query", "overlaps", "coerce_to_numeric", "process_guesses"];

const STR_METHODS: &[&str] = &[
    "lower", "upper", "strip", "lstrip", "rstrip", "split", "join", "startswith", "endswith",
    "replace", "count", "title", "capitalize", "isdigit", "find",
];
const LIST_METHODS: &[&str] = &[
    "append", "extend", "pop", "insert", "sort", "index", "count", "remove", "reverse", "copy",
];
const DICT_METHODS: &[&str] = &["get", "keys", "values", "items", "update", "pop"];

fn no_attribute(obj: &Value, attr: &str) -> PyException {
    PyException::new(
        "AttributeError",
        format!("'{}' object has no attribute '{attr}'", obj.type_name()),
    )
}

fn unsupported_api(name: &str) -> PyException {
    PyException::new(
        "UnsupportedApiError",
        format!("'{name}' is not available in the scene-graph world"),
    )
}

fn api_error(e: world::ApiError) -> PyException {
    PyException::new(e.kind, e.message)
}

fn method(recv: &Value, name: &str) -> Value {
    Value::Method(Rc::new((recv.clone(), name.to_string())))
}

fn expect_str(v: &Value, fname: &str, what: &str) -> PyResult<Rc<str>> {
    match v {
        Value::Str(s) => Ok(Rc::clone(s)),
        other => Err(PyException::type_error(format!(
            "{fname}() argument '{what}' must be str, not {}",
            other.type_name()
        ))),
    }
}

fn expect_patch(v: &Value, fname: &str) -> PyResult<Rc<PatchValue>> {
    match v {
        Value::Patch(p) => Ok(Rc::clone(p)),
        other => Err(PyException::type_error(format!(
            "{fname}() expected an ImagePatch, got '{}'",
            other.type_name()
        ))),
    }
}

/// Pixel coordinate argument: ints as-is, floats truncated toward zero.
fn coord(v: &Value, fname: &str) -> PyResult<i64> {
    match v {
        Value::Int(i) => Ok(*i),
        Value::Bool(b) => Ok(*b as i64),
        Value::Float(f) if f.is_finite() => Ok(f.trunc() as i64),
        other => Err(PyException::type_error(format!(
            "{fname}() coordinates must be numbers, not '{}'",
            other.type_name()
        ))),
    }
}

fn no_args(fname: &str, pos: Vec<Value>, kw: Vec<(String, Value)>) -> PyResult<()> {
    bind_args(fname, &[], 0, pos, kw).map(|_| ())
}

impl Interpreter<'_> {
    pub(crate) fn get_attr(&mut self, obj: &Value, attr: &str) -> PyResult<Value> {
        match obj {
            Value::Patch(p) => match attr {
                "left" => Ok(Value::Int(p.left)),
                "right" => Ok(Value::Int(p.right)),
                "upper" => Ok(Value::Int(p.upper)),
                "lower" => Ok(Value::Int(p.lower)),
                "height" => Ok(Value::Int(p.height())),
                "width" => Ok(Value::Int(p.width())),
                "horizontal_center" => Ok(Value::Float(p.horizontal_center())),
                "vertical_center" => Ok(Value::Float(p.vertical_center())),
                a if PATCH_METHODS.contains(&a) || UNSUPPORTED_APIS.contains(&a) => Ok(method(obj, a)),
                _ => Err(no_attribute(obj, attr)),
            },
            Value::Str(_) if STR_METHODS.contains(&attr) => Ok(method(obj, attr)),
            Value::List(_) if LIST_METHODS.contains(&attr) => Ok(method(obj, attr)),
            Value::Dict(_) if DICT_METHODS.contains(&attr) => Ok(method(obj, attr)),
            _ => Err(no_attribute(obj, attr)),
        }
    }

    pub(crate) fn call_builtin(
        &mut self,
        name: &str,
        pos: Vec<Value>,
        kw: Vec<(String, Value)>,
    ) -> PyResult<Value> {
        if UNSUPPORTED_APIS.contains(&name) {
            return Err(unsupported_api(name));
        }
        match name {
            "ImagePatch" => {
                let a = bind_args(name, &["image", "left", "lower", "right", "upper"], 1, pos, kw)?;
                let base = match a[0].as_ref().unwrap() {
                    Value::Image(scene) => PatchValue::full(scene.clone()),
                    Value::Patch(p) => (**p).clone(),
                    other => {
                        return Err(PyException::type_error(format!(
                            "ImagePatch() expected an image, got '{}'",
                            other.type_name()
                        )))
                    }
                };
                if a[1..].iter().all(|c| matches!(c, None | Some(Value::None))) {
                    return Ok(Value::patch(PatchValue::full(base.scene.clone())));
                }
                let pick = |v: &Option<Value>, default: i64| -> PyResult<i64> {
                    match v {
                        None | Some(Value::None) => Ok(default),
                        Some(v) => coord(v, "ImagePatch"),
                    }
                };
                let full = PatchValue::full(base.scene.clone());
                let (l, low) = (pick(&a[1], full.left)?, pick(&a[2], full.lower)?);
                let (r, up) = (pick(&a[3], full.right)?, pick(&a[4], full.upper)?);
                full.crop(l, low, r, up).map(Value::patch).map_err(api_error)
            }
            "best_image_match" => {
                let a = bind_args(name, &["list_patches", "content", "return_index"], 2, pos, kw)?;
                let patches = self
                    .collect(a[0].as_ref().unwrap())?
                    .iter()
                    .map(|p| expect_patch(p, name).map(|p| (*p).clone()))
                    .collect::<PyResult<Vec<_>>>()?;
                let content = self
                    .collect(a[1].as_ref().unwrap())?
                    .iter()
                    .map(|c| expect_str(c, name, "content").map(|s| s.to_string()))
                    .collect::<PyResult<Vec<_>>>()?;
                let return_index = a[2].as_ref().is_some_and(Value::truthy);
                match world::best_image_match(&patches, &content, return_index).map_err(api_error)? {
                    ImageMatch::Index(i) => Ok(Value::Int(i as i64)),
                    ImageMatch::Patch(p) => Ok(Value::patch(p)),
                }
            }
            "bool_to_yesno" => {
                let a = bind_args(name, &["bool_answer"], 1, pos, kw)?;
                Ok(Value::str(world::bool_to_yesno(a[0].as_ref().unwrap().truthy())))
            }
            "distance" => {
                let a = bind_args(name, &["patch_a", "patch_b"], 2, pos, kw)?;
                let (x, y) = (a[0].as_ref().unwrap(), a[1].as_ref().unwrap());
                match (x, y) {
                    (Value::Patch(p), Value::Patch(q)) => Ok(Value::Float(world::distance(p, q))),
                    _ => match (x.as_number(), y.as_number()) {
                        (Some(p), Some(q)) => Ok(Value::Float((p - q).abs())),
                        _ => Err(PyException::type_error(format!(
                            "distance() expected two ImagePatch or two numbers, got '{}' and '{}'",
                            x.type_name(),
                            y.type_name()
                        ))),
                    },
                }
            }
            "print" => Ok(Value::None),
            "len" => {
                let a = bind_args(name, &["obj"], 1, pos, kw)?;
                let v = a[0].as_ref().unwrap();
                let n = match v {
                    Value::Str(s) => s.chars().count() as i64,
                    Value::List(l) => l.borrow().len() as i64,
                    Value::Tuple(t) => t.len() as i64,
                    Value::Dict(d) => d.borrow().len() as i64,
                    Value::Range { .. } => range_len(v),
                    other => {
                        return Err(PyException::type_error(format!(
                            "object of type '{}' has no len()",
                            other.type_name()
                        )))
                    }
                };
                Ok(Value::Int(n))
            }
            "range" => {
                if !kw.is_empty() {
                    return Err(PyException::type_error("range() takes no keyword arguments"));
                }
                let ints = pos
                    .iter()
                    .map(|v| {
                        v.as_index().ok_or_else(|| {
                            PyException::type_error(format!(
                                "'{}' object cannot be interpreted as an integer",
                                v.type_name()
                            ))
                        })
                    })
                    .collect::<PyResult<Vec<i64>>>()?;
                let (start, stop, step) = match ints.as_slice() {
                    [stop] => (0, *stop, 1),
                    [start, stop] => (*start, *stop, 1),
                    [start, stop, step] => (*start, *stop, *step),
                    [] => return Err(PyException::type_error("range expected at least 1 argument, got 0")),
                    more => {
                        return Err(PyException::type_error(format!(
                            "range expected at most 3 arguments, got {}",
                            more.len()
                        )))
                    }
                };
                if step == 0 {
                    return Err(PyException::value_error("range() arg 3 must not be zero"));
                }
                Ok(Value::Range { start, stop, step })
            }
            "enumerate" => {
                let a = bind_args(name, &["iterable", "start"], 1, pos, kw)?;
                let start = match &a[1] {
                    None => 0,
                    Some(v) => v.as_index().ok_or_else(|| {
                        PyException::type_error(format!(
                            "'{}' object cannot be interpreted as an integer",
                            v.type_name()
                        ))
                    })?,
                };
                let items = self.collect(a[0].as_ref().unwrap())?;
                Ok(Value::list(
                    items
                        .into_iter()
                        .enumerate()
                        .map(|(i, v)| Value::tuple(vec![Value::Int(start + i as i64), v]))
                        .collect(),
                ))
            }
            "zip" => {
                if !kw.is_empty() {
                    return Err(PyException::type_error("zip() takes no keyword arguments"));
                }
                let cols = pos.iter().map(|v| self.collect(v)).collect::<PyResult<Vec<_>>>()?;
                let n = cols.iter().map(Vec::len).min().unwrap_or(0);
                Ok(Value::list(
                    (0..n)
                        .map(|i| Value::tuple(cols.iter().map(|c| c[i].clone()).collect()))
                        .collect(),
                ))
            }
            "sorted" => {
                let a = bind_args(name, &["iterable", "key", "reverse"], 1, pos, kw)?;
                let items = self.collect(a[0].as_ref().unwrap())?;
                let key = a[1].clone().filter(|k| !matches!(k, Value::None));
                let reverse = a[2].as_ref().is_some_and(Value::truthy);
                Ok(Value::list(self.sort_values(items, key.as_ref(), reverse)?))
            }
            "reversed" => {
                let a = bind_args(name, &["sequence"], 1, pos, kw)?;
                let v = a[0].as_ref().unwrap();
                if matches!(v, Value::Dict(_)) {
                    return Err(PyException::type_error("'dict' object is not reversible"));
                }
                let mut items = self.collect(v)?;
                items.reverse();
                Ok(Value::list(items))
            }
            "min" | "max" => self.min_max(name, pos, kw),
            "sum" => {
                let a = bind_args(name, &["iterable", "start"], 1, pos, kw)?;
                let mut acc = a[1].clone().unwrap_or(Value::Int(0));
                if matches!(acc, Value::Str(_)) {
                    return Err(PyException::type_error(
                        "sum() can't sum strings [use ''.join(seq) instead]",
                    ));
                }
                let it = self.iterate(a[0].as_ref().unwrap())?;
                for v in it {
                    acc = self.binop(crate::dsl::ast::BinOp::Add, &acc, &v)?;
                }
                Ok(acc)
            }
            "abs" => {
                let a = bind_args(name, &["x"], 1, pos, kw)?;
                match a[0].as_ref().unwrap() {
                    Value::Int(i) => i
                        .checked_abs()
                        .map(Value::Int)
                        .ok_or_else(|| PyException::new("OverflowError", "integer result too large")),
                    Value::Bool(b) => Ok(Value::Int(*b as i64)),
                    Value::Float(f) => Ok(Value::Float(f.abs())),
                    other => Err(PyException::type_error(format!(
                        "bad operand type for abs(): '{}'",
                        other.type_name()
                    ))),
                }
            }
            "round" => {
                let a = bind_args(name, &["number", "ndigits"], 1, pos, kw)?;
                let x = a[0].as_ref().unwrap();
                let digits = a[1].as_ref().filter(|d| !matches!(d, Value::None));
                match (x, digits) {
                    (Value::Int(_) | Value::Bool(_), None) => Ok(Value::Int(x.as_index().unwrap())),
                    (Value::Int(_) | Value::Bool(_), Some(_)) => Ok(Value::Int(x.as_index().unwrap())),
                    (Value::Float(f), None) => {
                        if !f.is_finite() {
                            return Err(PyException::new(
                                "OverflowError",
                                "cannot convert float infinity to integer",
                            ));
                        }
                        Ok(Value::Int(f.round_ties_even() as i64))
                    }
                    (Value::Float(f), Some(d)) => {
                        let d = d.as_index().ok_or_else(|| {
                            PyException::type_error(format!(
                                "'{}' object cannot be interpreted as an integer",
                                d.type_name()
                            ))
                        })?;
                        let scale = 10f64.powi(d.clamp(-300, 300) as i32);
                        Ok(Value::Float((f * scale).round_ties_even() / scale))
                    }
                    (other, _) => Err(PyException::type_error(format!(
                        "type {} doesn't define __round__ method",
                        other.type_name()
                    ))),
                }
            }
            "int" => {
                let a = bind_args(name, &["x"], 0, pos, kw)?;
                match &a[0] {
                    None => Ok(Value::Int(0)),
                    Some(Value::Int(i)) => Ok(Value::Int(*i)),
                    Some(Value::Bool(b)) => Ok(Value::Int(*b as i64)),
                    Some(Value::Float(f)) => {
                        if f.is_finite() {
                            Ok(Value::Int(f.trunc() as i64))
                        } else {
                            Err(PyException::new(
                                "OverflowError",
                                "cannot convert float infinity to integer",
                            ))
                        }
                    }
                    Some(Value::Str(s)) => {
                        let t = s.trim().replace('_', "");
                        t.parse::<i64>().map(Value::Int).map_err(|_| {
                            PyException::value_error(format!(
                                "invalid literal for int() with base 10: {}",
                                Value::Str(Rc::clone(s)).repr()
                            ))
                        })
                    }
                    Some(other) => Err(PyException::type_error(format!(
                        "int() argument must be a string, a bytes-like object or a real number, not '{}'",
                        other.type_name()
                    ))),
                }
            }
            "float" => {
                let a = bind_args(name, &["x"], 0, pos, kw)?;
                match &a[0] {
                    None => Ok(Value::Float(0.0)),
                    Some(Value::Str(s)) => {
                        let t = s.trim().to_ascii_lowercase();
                        let parsed = match t.trim_start_matches(['+', '-']) {
                            "inf" | "infinity" | "nan" => t.parse::<f64>().ok(),
                            body if body.chars().all(|c| c.is_ascii_digit() || ".e+-_".contains(c))
                                && body.chars().any(|c| c.is_ascii_digit()) =>
                            {
                                t.replace('_', "").parse::<f64>().ok()
                            }
                            _ => None,
                        };
                        parsed.map(Value::Float).ok_or_else(|| {
                            PyException::value_error(format!(
                                "could not convert string to float: {}",
                                Value::Str(Rc::clone(s)).repr()
                            ))
                        })
                    }
                    Some(v) => v.as_number().map(Value::Float).ok_or_else(|| {
                        PyException::type_error(format!(
                            "float() argument must be a string or a real number, not '{}'",
                            v.type_name()
                        ))
                    }),
                }
            }
            "str" => {
                let a = bind_args(name, &["object"], 0, pos, kw)?;
                Ok(Value::str(&a[0].as_ref().map(Value::to_str_full).unwrap_or_default()))
            }
            "bool" => {
                let a = bind_args(name, &["x"], 0, pos, kw)?;
                Ok(Value::Bool(a[0].as_ref().is_some_and(Value::truthy)))
            }
            "list" | "tuple" => {
                let a = bind_args(name, &["iterable"], 0, pos, kw)?;
                let items = match &a[0] {
                    None => Vec::new(),
                    Some(v) => self.collect(v)?,
                };
                Ok(if name == "list" { Value::list(items) } else { Value::tuple(items) })
            }
            "dict" => {
                let mut out: Vec<(Value, Value)> = Vec::new();
                if pos.len() > 1 {
                    return Err(PyException::type_error(format!(
                        "dict expected at most 1 argument, got {}",
                        pos.len()
                    )));
                }
                if let Some(src) = pos.first() {
                    let pairs = match src {
                        Value::Dict(d) => d.borrow().clone(),
                        other => {
                            let mut pairs = Vec::new();
                            for item in self.collect(other)? {
                                let kv = self.collect(&item)?;
                                let [k, v] = <[Value; 2]>::try_from(kv).map_err(|kv| {
                                    PyException::value_error(format!(
                                        "dictionary update sequence element has length {}; 2 is required",
                                        kv.len()
                                    ))
                                })?;
                                pairs.push((k, v));
                            }
                            pairs
                        }
                    };
                    for (k, v) in pairs {
                        dict_set(&mut out, k, v)?;
                    }
                }
                for (k, v) in kw {
                    dict_set(&mut out, Value::str(&k), v)?;
                }
                Ok(Value::Dict(Rc::new(RefCell::new(out))))
            }
            "any" | "all" => {
                let a = bind_args(name, &["iterable"], 1, pos, kw)?;
                let want = name == "any";
                let it = self.iterate(a[0].as_ref().unwrap())?;
                for v in it {
                    if v.truthy() == want {
                        return Ok(Value::Bool(want));
                    }
                }
                Ok(Value::Bool(!want))
            }
            other => Err(PyException::new("NameError", format!("name '{other}' is not defined"))),
        }
    }

    fn min_max(&mut self, name: &str, pos: Vec<Value>, kw: Vec<(String, Value)>) -> PyResult<Value> {
        let mut key = None;
        let mut default = None;
        for (k, v) in kw {
            match k.as_str() {
                "key" => key = Some(v).filter(|v| !matches!(v, Value::None)),
                "default" => default = Some(v),
                _ => {
                    return Err(PyException::type_error(format!(
                        "{name}() got an unexpected keyword argument '{k}'"
                    )))
                }
            }
        }
        let items = match pos.len() {
            0 => {
                return Err(PyException::type_error(format!(
                    "{name} expected at least 1 argument, got 0"
                )))
            }
            1 => self.collect(&pos[0])?,
            _ => pos,
        };
        if items.is_empty() {
            return default.ok_or_else(|| {
                PyException::value_error(format!("{name}() iterable argument is empty"))
            });
        }
        let want = if name == "max" { Ordering::Greater } else { Ordering::Less };
        let mut best: Option<(Value, Value)> = None;
        for item in items {
            let k = match &key {
                Some(f) => self.call_value(f, vec![item.clone()], Vec::new())?,
                None => item.clone(),
            };
            let better = match &best {
                None => true,
                Some((bk, _)) => py_cmp(&k, bk, if want == Ordering::Greater { ">" } else { "<" })? == want,
            };
            if better {
                best = Some((k, item));
            }
        }
        Ok(best.unwrap().1)
    }

    /// Stable merge sort with a fallible comparison, mirroring `list.sort`.
    fn sort_values(&mut self, items: Vec<Value>, key: Option<&Value>, reverse: bool) -> PyResult<Vec<Value>> {
        let mut keyed = Vec::with_capacity(items.len());
        for item in items {
            let k = match key {
                Some(f) => self.call_value(f, vec![item.clone()], Vec::new())?,
                None => item.clone(),
            };
            keyed.push((k, item));
        }
        let sorted = merge_sort(keyed, &mut |a: &Value, b: &Value| {
            // `b` sorts before `a` exactly when it compares less.
            let ord = py_cmp(b, a, "<")?;
            Ok(if reverse { ord == Ordering::Greater } else { ord == Ordering::Less })
        })?;
        Ok(sorted.into_iter().map(|(_, v)| v).collect())
    }

    pub(crate) fn call_method(
        &mut self,
        recv: &Value,
        name: &str,
        pos: Vec<Value>,
        kw: Vec<(String, Value)>,
    ) -> PyResult<Value> {
        if UNSUPPORTED_APIS.contains(&name) {
            return Err(unsupported_api(name));
        }
        match recv {
            Value::Patch(p) => self.patch_method(p, name, pos, kw),
            Value::Str(s) => self.str_method(s, name, pos, kw),
            Value::List(l) => self.list_method(l, name, pos, kw),
            Value::Dict(d) => self.dict_method(d, name, pos, kw),
            other => Err(no_attribute(other, name)),
        }
    }

    fn patch_method(
        &mut self,
        p: &Rc<PatchValue>,
        name: &str,
        pos: Vec<Value>,
        kw: Vec<(String, Value)>,
    ) -> PyResult<Value> {
        match name {
            "find" => {
                let a = bind_args(name, &["object_name"], 1, pos, kw)?;
                let obj = expect_str(a[0].as_ref().unwrap(), name, "object_name")?;
                Ok(Value::list(p.find(&obj).into_iter().map(Value::patch).collect()))
            }
            "exists" => {
                let a = bind_args(name, &["object_name"], 1, pos, kw)?;
                let obj = expect_str(a[0].as_ref().unwrap(), name, "object_name")?;
                Ok(Value::Bool(p.exists(&obj)))
            }
            "verify_property" => {
                let a = bind_args(name, &["object_name", "property"], 2, pos, kw)?;
                let obj = expect_str(a[0].as_ref().unwrap(), name, "object_name")?;
                let prop = expect_str(a[1].as_ref().unwrap(), name, "property")?;
                Ok(Value::Bool(p.verify_property(&obj, &prop)))
            }
            "simple_query" => {
                let a = bind_args(name, &["question"], 0, pos, kw)?;
                let question = match &a[0] {
                    None | Some(Value::None) => Rc::from("What is this?"),
                    Some(q) => expect_str(q, name, "question")?,
                };
                self.record_query(&p.scene, &question);
                Ok(Value::str(&p.simple_query(&question)))
            }
            "best_text_match" => {
                let a = bind_args(name, &["option_list"], 1, pos, kw)?;
                let options = self
                    .collect(a[0].as_ref().unwrap())?
                    .iter()
                    .map(|o| expect_str(o, name, "option_list").map(|s| s.to_string()))
                    .collect::<PyResult<Vec<_>>>()?;
                p.best_text_match(&options).map(|s| Value::str(&s)).map_err(api_error)
            }
            "crop" => {
                let a = bind_args(name, &["left", "lower", "right", "upper"], 4, pos, kw)?;
                let c = a
                    .iter()
                    .map(|v| coord(v.as_ref().unwrap(), name))
                    .collect::<PyResult<Vec<_>>>()?;
                p.crop(c[0], c[1], c[2], c[3]).map(Value::patch).map_err(api_error)
            }
            "compute_depth" => {
                no_args(name, pos, kw)?;
                p.compute_depth().map(Value::Float).map_err(api_error)
            }
            _ => Err(no_attribute(&Value::Patch(Rc::clone(p)), name)),
        }
    }

    fn str_method(&mut self, s: &Rc<str>, name: &str, pos: Vec<Value>, kw: Vec<(String, Value)>) -> PyResult<Value> {
        let arg_str = |a: &Option<Value>, what: &str| -> PyResult<Option<Rc<str>>> {
            match a {
                None | Some(Value::None) => Ok(None),
                Some(v) => expect_str(v, name, what).map(Some),
            }
        };
        match name {
            "lower" => no_args(name, pos, kw).map(|_| Value::str(&s.to_lowercase())),
            "upper" => no_args(name, pos, kw).map(|_| Value::str(&s.to_uppercase())),
            "strip" | "lstrip" | "rstrip" => {
                let a = bind_args(name, &["chars"], 0, pos, kw)?;
                let chars = arg_str(&a[0], "chars")?;
                let pat = |c: char| match &chars {
                    Some(cs) => cs.contains(c),
                    None => c.is_whitespace(),
                };
                Ok(Value::str(match name {
                    "strip" => s.trim_matches(pat),
                    "lstrip" => s.trim_start_matches(pat),
                    _ => s.trim_end_matches(pat),
                }))
            }
            "split" => {
                let a = bind_args(name, &["sep", "maxsplit"], 0, pos, kw)?;
                let sep = arg_str(&a[0], "sep")?;
                let maxsplit = a[1].as_ref().and_then(Value::as_index).unwrap_or(-1);
                let parts: Vec<Value> = match sep {
                    Some(sep) if sep.is_empty() => {
                        return Err(PyException::value_error("empty separator"))
                    }
                    Some(sep) if maxsplit >= 0 => {
                        s.splitn(maxsplit as usize + 1, &*sep).map(Value::str).collect()
                    }
                    Some(sep) => s.split(&*sep).map(Value::str).collect(),
                    None => {
                        let words: Vec<&str> = s.split_whitespace().collect();
                        if maxsplit >= 0 && (maxsplit as usize) < words.len() {
                            let n = maxsplit as usize;
                            let mut rest = s.trim_start();
                            let mut out = Vec::new();
                            for _ in 0..n {
                                let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
                                out.push(Value::str(&rest[..end]));
                                rest = rest[end..].trim_start();
                            }
                            out.push(Value::str(rest));
                            out
                        } else {
                            words.into_iter().map(Value::str).collect()
                        }
                    }
                };
                Ok(Value::list(parts))
            }
            "join" => {
                let a = bind_args(name, &["iterable"], 1, pos, kw)?;
                let items = self.collect(a[0].as_ref().unwrap())?;
                let mut parts = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Value::Str(x) => parts.push(x.to_string()),
                        other => {
                            return Err(PyException::type_error(format!(
                                "sequence item {i}: expected str instance, {} found",
                                other.type_name()
                            )))
                        }
                    }
                }
                Ok(Value::str(&parts.join(s)))
            }
            "startswith" | "endswith" => {
                let a = bind_args(name, &["prefix"], 1, pos, kw)?;
                let options: Vec<Rc<str>> = match a[0].as_ref().unwrap() {
                    Value::Tuple(t) => t
                        .iter()
                        .map(|v| expect_str(v, name, "prefix"))
                        .collect::<PyResult<_>>()?,
                    v => vec![expect_str(v, name, "prefix")?],
                };
                let hit = options
                    .iter()
                    .any(|o| if name == "startswith" { s.starts_with(&**o) } else { s.ends_with(&**o) });
                Ok(Value::Bool(hit))
            }
            "replace" => {
                let a = bind_args(name, &["old", "new"], 2, pos, kw)?;
                let old = expect_str(a[0].as_ref().unwrap(), name, "old")?;
                let new = expect_str(a[1].as_ref().unwrap(), name, "new")?;
                Ok(Value::str(&s.replace(&*old, &new)))
            }
            "count" => {
                let a = bind_args(name, &["sub"], 1, pos, kw)?;
                let sub = expect_str(a[0].as_ref().unwrap(), name, "sub")?;
                let n = if sub.is_empty() { s.chars().count() + 1 } else { s.matches(&*sub).count() };
                Ok(Value::Int(n as i64))
            }
            "find" => {
                let a = bind_args(name, &["sub"], 1, pos, kw)?;
                let sub = expect_str(a[0].as_ref().unwrap(), name, "sub")?;
                Ok(Value::Int(match s.find(&*sub) {
                    Some(b) => s[..b].chars().count() as i64,
                    None => -1,
                }))
            }
            "title" | "capitalize" => {
                no_args(name, pos, kw)?;
                let mut out = String::with_capacity(s.len());
                let mut start = true;
                for c in s.chars() {
                    if start {
                        out.extend(c.to_uppercase());
                    } else {
                        out.extend(c.to_lowercase());
                    }
                    start = if name == "title" { !c.is_alphabetic() } else { false };
                }
                Ok(Value::str(&out))
            }
            "isdigit" => {
                no_args(name, pos, kw)?;
                Ok(Value::Bool(!s.is_empty() && s.chars().all(|c| c.is_ascii_digit())))
            }
            _ => Err(no_attribute(&Value::Str(Rc::clone(s)), name)),
        }
    }

    fn list_method(
        &mut self,
        l: &Rc<RefCell<Vec<Value>>>,
        name: &str,
        pos: Vec<Value>,
        kw: Vec<(String, Value)>,
    ) -> PyResult<Value> {
        match name {
            "append" => {
                let a = bind_args(name, &["object"], 1, pos, kw)?;
                if l.borrow().len() as i64 >= MAX_SEQUENCE_LEN {
                    return Err(memory_error());
                }
                l.borrow_mut().push(a[0].clone().unwrap());
                Ok(Value::None)
            }
            "extend" => {
                let a = bind_args(name, &["iterable"], 1, pos, kw)?;
                let items = self.collect(a[0].as_ref().unwrap())?;
                if (l.borrow().len() + items.len()) as i64 > MAX_SEQUENCE_LEN {
                    return Err(memory_error());
                }
                l.borrow_mut().extend(items);
                Ok(Value::None)
            }
            "pop" => {
                let a = bind_args(name, &["index"], 0, pos, kw)?;
                let len = l.borrow().len();
                if len == 0 {
                    return Err(PyException::new("IndexError", "pop from empty list"));
                }
                let i = match &a[0] {
                    None => len - 1,
                    Some(k) => self.normalize_index(k, len, "pop")?,
                };
                Ok(l.borrow_mut().remove(i))
            }
            "insert" => {
                let a = bind_args(name, &["index", "object"], 2, pos, kw)?;
                let idx = a[0].as_ref().unwrap().as_index().ok_or_else(|| {
                    PyException::type_error("'insert' index must be an integer")
                })?;
                let len = l.borrow().len() as i64;
                let i = if idx < 0 { (idx + len).max(0) } else { idx.min(len) };
                l.borrow_mut().insert(i as usize, a[1].clone().unwrap());
                Ok(Value::None)
            }
            "sort" => {
                let a = bind_args(name, &["key", "reverse"], 0, Vec::new(), kw)?;
                if !pos.is_empty() {
                    return Err(PyException::type_error("sort() takes no positional arguments"));
                }
                let items = l.borrow().clone();
                let key = a[0].clone().filter(|k| !matches!(k, Value::None));
                let reverse = a[1].as_ref().is_some_and(Value::truthy);
                let sorted = self.sort_values(items, key.as_ref(), reverse)?;
                *l.borrow_mut() = sorted;
                Ok(Value::None)
            }
            "index" => {
                let a = bind_args(name, &["value"], 1, pos, kw)?;
                let v = a[0].as_ref().unwrap();
                let found = l.borrow().iter().position(|x| py_eq(x, v));
                found
                    .map(|i| Value::Int(i as i64))
                    .ok_or_else(|| PyException::value_error(format!("{} is not in list", v.repr())))
            }
            "count" => {
                let a = bind_args(name, &["value"], 1, pos, kw)?;
                let v = a[0].as_ref().unwrap();
                Ok(Value::Int(l.borrow().iter().filter(|x| py_eq(x, v)).count() as i64))
            }
            "remove" => {
                let a = bind_args(name, &["value"], 1, pos, kw)?;
                let v = a[0].as_ref().unwrap();
                let found = l.borrow().iter().position(|x| py_eq(x, v));
                match found {
                    Some(i) => {
                        l.borrow_mut().remove(i);
                        Ok(Value::None)
                    }
                    None => Err(PyException::value_error("list.remove(x): x not in list")),
                }
            }
            "reverse" => {
                no_args(name, pos, kw)?;
                l.borrow_mut().reverse();
                Ok(Value::None)
            }
            "copy" => {
                no_args(name, pos, kw)?;
                Ok(Value::list(l.borrow().clone()))
            }
            _ => Err(no_attribute(&Value::List(Rc::clone(l)), name)),
        }
    }

    fn dict_method(
        &mut self,
        d: &Rc<RefCell<Vec<(Value, Value)>>>,
        name: &str,
        pos: Vec<Value>,
        kw: Vec<(String, Value)>,
    ) -> PyResult<Value> {
        match name {
            "get" => {
                let a = bind_args(name, &["key", "default"], 1, pos, kw)?;
                let k = a[0].as_ref().unwrap();
                if !is_hashable(k) {
                    return Err(unhashable(k));
                }
                let found = d.borrow().iter().find(|(x, _)| py_eq(x, k)).map(|(_, v)| v.clone());
                Ok(found.or_else(|| a[1].clone()).unwrap_or(Value::None))
            }
            "keys" | "values" | "items" => {
                no_args(name, pos, kw)?;
                let d = d.borrow();
                Ok(Value::list(match name {
                    "keys" => d.iter().map(|(k, _)| k.clone()).collect(),
                    "values" => d.iter().map(|(_, v)| v.clone()).collect(),
                    _ => d.iter().map(|(k, v)| Value::tuple(vec![k.clone(), v.clone()])).collect(),
                }))
            }
            "update" => {
                let merged = self.call_builtin("dict", pos, kw)?;
                let Value::Dict(src) = merged else { unreachable!() };
                let pairs = src.borrow().clone();
                let mut dst = d.borrow_mut();
                for (k, v) in pairs {
                    dict_set(&mut dst, k, v)?;
                }
                Ok(Value::None)
            }
            "pop" => {
                let a = bind_args(name, &["key", "default"], 1, pos, kw)?;
                let k = a[0].as_ref().unwrap();
                let idx = d.borrow().iter().position(|(x, _)| py_eq(x, k));
                match (idx, &a[1]) {
                    (Some(i), _) => Ok(d.borrow_mut().remove(i).1),
                    (None, Some(default)) => Ok(default.clone()),
                    (None, None) => Err(PyException::new("KeyError", k.repr())),
                }
            }
            _ => Err(no_attribute(&Value::Dict(Rc::clone(d)), name)),
        }
    }
}

fn dict_set(d: &mut Vec<(Value, Value)>, k: Value, v: Value) -> PyResult<()> {
    if !is_hashable(&k) {
        return Err(unhashable(&k));
    }
    match d.iter_mut().find(|(x, _)| py_eq(x, &k)) {
        Some(slot) => slot.1 = v,
        None => d.push((k, v)),
    }
    Ok(())
}

/// Stable merge sort; `before(b, a)` reports whether `b` must precede `a`.
fn merge_sort(
    mut items: Vec<(Value, Value)>,
    before: &mut dyn FnMut(&Value, &Value) -> PyResult<bool>,
) -> PyResult<Vec<(Value, Value)>> {
    if items.len() <= 1 {
        return Ok(items);
    }
    let right = items.split_off(items.len() / 2);
    let left = merge_sort(items, before)?;
    let right = merge_sort(right, before)?;
    let mut out = Vec::with_capacity(left.len() + right.len());
    let mut l = left.into_iter().peekable();
    let mut r = right.into_iter().peekable();
    loop {
        match (l.peek(), r.peek()) {
            (Some(a), Some(b)) => {
                if before(&a.0, &b.0)? {
                    out.push(r.next().unwrap());
                } else {
                    out.push(l.next().unwrap());
                }
            }
            (Some(_), None) => out.push(l.next().unwrap()),
            (None, Some(_)) => out.push(r.next().unwrap()),
            (None, None) => return Ok(out),
        }
    }
}
