use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Call,
    Line,
    Return,
    Exception,
}

impl EventKind {
    pub fn keyword(self) -> &'static str {
        match self {
            EventKind::Call => "call",
            EventKind::Line => "line",
            EventKind::Return => "return",
            EventKind::Exception => "exception",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    New,
    Modified,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarChange {
    pub kind: ChangeKind,
    pub name: String,
    /// `repr` of the new value.
    pub value: String,
}

/// One traced step. `var_changes` are the local-variable diffs observed
/// between this event and the next one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub line_no: usize,
    pub source_line: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub var_changes: Vec<VarChange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exception_text: Option<String>,
}

/// One `simple_query` issued against a scene.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueryRecord {
    pub image_id: String,
    pub question: String,
    /// The scene marks this question's fixture answer as deliberately wrong.
    pub faulty: bool,
}

/// Everything observed while running a program once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    /// `str()` of the returned value; `None` when execution raised.
    pub result: Option<String>,
    /// `repr()` of the returned value.
    pub result_repr: Option<String>,
    /// Bounds `[left, lower, right, upper]` when the program returned a patch.
    pub result_box: Option<[i64; 4]>,
    /// `ErrorType: message` when execution raised.
    pub exception: Option<String>,
    pub events: Vec<TraceEvent>,
    pub step_count: usize,
    #[serde(default)]
    pub queries: Vec<QueryRecord>,
}

impl ExecutionOutcome {
    /// Outcome standing in for a program that does not parse.
    pub fn syntax_error(message: &str) -> Self {
        ExecutionOutcome {
            result: None,
            result_repr: None,
            result_box: None,
            exception: Some(format!("SyntaxError: {message}")),
            events: Vec::new(),
            step_count: 0,
            queries: Vec::new(),
        }
    }

    pub fn is_exception(&self) -> bool {
        self.exception.is_some()
    }

    pub fn line_events(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Line).count()
    }

    /// The trace as JSON lines, one event per line.
    pub fn events_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace events always serialize"));
            out.push('\n');
        }
        out
    }
}
