//! Syntax tree for programs. Every statement and expression carries the
//! [`SourceSpan`] it was parsed from.

use super::span::SourceSpan;

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramAst {
    pub function: FunctionDef,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    /// Return annotation as written, e.g. `str` or `ImagePatch`.
    pub returns: Option<String>,
    pub body: Vec<Stmt>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    /// `a = b = value`; targets are names, tuples/lists of targets, subscripts
    /// or attributes.
    Assign { targets: Vec<Expr>, value: Expr },
    AugAssign { target: Expr, op: AugOp, value: Expr },
    Expr(Expr),
    Return(Option<Expr>),
    /// `elif` chains are nested `If` statements in `orelse` with `is_elif`.
    If {
        test: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
        is_elif: bool,
    },
    For {
        target: Expr,
        iter: Expr,
        body: Vec<Stmt>,
    },
    While { test: Expr, body: Vec<Stmt> },
    Break,
    Continue,
    Pass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Pos,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtE,
    Gt,
    GtE,
    In,
    NotIn,
    Is,
    IsNot,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constant {
    None,
    Bool(bool),
    /// Integer literal with its source text.
    Int(i64, String),
    /// Float literal with its source text.
    Float(f64, String),
    /// String literal: decoded value and the literal as written (with quotes).
    Str(String, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    /// `Some` for keyword arguments.
    pub name: Option<String>,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comprehension {
    pub target: Expr,
    pub iter: Expr,
    pub ifs: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FStringPart {
    /// Literal text as written between fields (escapes kept verbatim).
    Literal(String),
    Field(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Name(String),
    Constant(Constant),
    Call { func: Box<Expr>, args: Vec<Arg> },
    Attribute { value: Box<Expr>, attr: String },
    Subscript { value: Box<Expr>, index: Box<Expr> },
    Slice {
        lower: Option<Box<Expr>>,
        upper: Option<Box<Expr>>,
        step: Option<Box<Expr>>,
    },
    BinOp { left: Box<Expr>, op: BinOp, right: Box<Expr> },
    UnaryOp { op: UnaryOp, operand: Box<Expr> },
    BoolOp { op: BoolOp, values: Vec<Expr> },
    Compare {
        left: Box<Expr>,
        ops: Vec<CmpOp>,
        comparators: Vec<Expr>,
    },
    IfExp {
        test: Box<Expr>,
        body: Box<Expr>,
        orelse: Box<Expr>,
    },
    Lambda { params: Vec<String>, body: Box<Expr> },
    List(Vec<Expr>),
    /// `parens` records whether the tuple was written inside parentheses.
    Tuple { elts: Vec<Expr>, parens: bool },
    Dict(Vec<(Expr, Expr)>),
    ListComp {
        elt: Box<Expr>,
        generators: Vec<Comprehension>,
    },
    /// `quote` is the prefix plus opening quote as written, e.g. `f'`.
    FString { quote: String, parts: Vec<FStringPart> },
}

/// Coarse node classification used by subtree enumeration and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Assignment,
    AugAssignment,
    ExpressionStatement,
    Return,
    If,
    For,
    While,
    Break,
    Continue,
    Pass,
    Call,
    AttributeAccess,
    Subscript,
    Slice,
    BinaryOp,
    UnaryOp,
    BoolOp,
    Comparison,
    ConditionalExpression,
    Lambda,
    ListLiteral,
    TupleLiteral,
    DictLiteral,
    ListComprehension,
    FormattedString,
    Name,
    Constant,
}

impl NodeKind {
    pub fn is_statement(self) -> bool {
        matches!(
            self,
            NodeKind::Assignment
                | NodeKind::AugAssignment
                | NodeKind::ExpressionStatement
                | NodeKind::Return
                | NodeKind::If
                | NodeKind::For
                | NodeKind::While
                | NodeKind::Break
                | NodeKind::Continue
                | NodeKind::Pass
        )
    }
}

impl Stmt {
    pub fn node_kind(&self) -> NodeKind {
        match &self.kind {
            StmtKind::Assign { .. } => NodeKind::Assignment,
            StmtKind::AugAssign { .. } => NodeKind::AugAssignment,
            StmtKind::Expr(_) => NodeKind::ExpressionStatement,
            StmtKind::Return(_) => NodeKind::Return,
            StmtKind::If { .. } => NodeKind::If,
            StmtKind::For { .. } => NodeKind::For,
            StmtKind::While { .. } => NodeKind::While,
            StmtKind::Break => NodeKind::Break,
            StmtKind::Continue => NodeKind::Continue,
            StmtKind::Pass => NodeKind::Pass,
        }
    }
}

impl Expr {
    pub fn node_kind(&self) -> NodeKind {
        match &self.kind {
            ExprKind::Name(_) => NodeKind::Name,
            ExprKind::Constant(_) => NodeKind::Constant,
            ExprKind::Call { .. } => NodeKind::Call,
            ExprKind::Attribute { .. } => NodeKind::AttributeAccess,
            ExprKind::Subscript { .. } => NodeKind::Subscript,
            ExprKind::Slice { .. } => NodeKind::Slice,
            ExprKind::BinOp { .. } => NodeKind::BinaryOp,
            ExprKind::UnaryOp { .. } => NodeKind::UnaryOp,
            ExprKind::BoolOp { .. } => NodeKind::BoolOp,
            ExprKind::Compare { .. } => NodeKind::Comparison,
            ExprKind::IfExp { .. } => NodeKind::ConditionalExpression,
            ExprKind::Lambda { .. } => NodeKind::Lambda,
            ExprKind::List(_) => NodeKind::ListLiteral,
            ExprKind::Tuple { .. } => NodeKind::TupleLiteral,
            ExprKind::Dict(_) => NodeKind::DictLiteral,
            ExprKind::ListComp { .. } => NodeKind::ListComprehension,
            ExprKind::FString { .. } => NodeKind::FormattedString,
        }
    }
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::FloorDiv => "//",
            BinOp::Mod => "%",
            BinOp::Pow => "**",
        }
    }
}

impl AugOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AugOp::Add => "+=",
            AugOp::Sub => "-=",
            AugOp::Mul => "*=",
            AugOp::Div => "/=",
            AugOp::FloorDiv => "//=",
            AugOp::Mod => "%=",
            AugOp::Pow => "**=",
        }
    }

    pub fn bin_op(self) -> BinOp {
        match self {
            AugOp::Add => BinOp::Add,
            AugOp::Sub => BinOp::Sub,
            AugOp::Mul => BinOp::Mul,
            AugOp::Div => BinOp::Div,
            AugOp::FloorDiv => BinOp::FloorDiv,
            AugOp::Mod => BinOp::Mod,
            AugOp::Pow => BinOp::Pow,
        }
    }
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::NotEq => "!=",
            CmpOp::Lt => "<",
            CmpOp::LtE => "<=",
            CmpOp::Gt => ">",
            CmpOp::GtE => ">=",
            CmpOp::In => "in",
            CmpOp::NotIn => "not in",
            CmpOp::Is => "is",
            CmpOp::IsNot => "is not",
        }
    }
}
