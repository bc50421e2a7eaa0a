//! Syntax tree for the supported C subset.

#[derive(Debug, Clone, PartialEq)]
pub enum BaseType {
    Void,
    /// `char`; `Some(true)` for explicit `signed`, `Some(false)` for `unsigned`.
    Char(Option<bool>),
    Short {
        unsigned: bool,
    },
    Int {
        unsigned: bool,
    },
    Long {
        unsigned: bool,
    },
    LongLong {
        unsigned: bool,
    },
    Float,
    Double,
    Bool,
    /// A typedef name.
    Named(String),
    Struct(Record),
    Union(Record),
    Enum(EnumDef),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub tag: Option<String>,
    /// `None` for a reference (`struct foo *p`), `Some` for a definition.
    pub fields: Option<Vec<Field>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub name: String,
    pub ty: CType,
    pub bit_width: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumDef {
    pub tag: Option<String>,
    pub variants: Option<Vec<(String, Option<Expr>)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CType {
    Base { base: BaseType, is_const: bool },
    Pointer { pointee: Box<CType>, is_const: bool },
    Array { elem: Box<CType>, len: Option<Box<Expr>> },
    Function(Box<FnType>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnType {
    pub ret: CType,
    pub params: Vec<Param>,
    pub variadic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: Option<String>,
    pub ty: CType,
}

impl CType {
    pub fn base(base: BaseType) -> Self {
        CType::Base { base, is_const: false }
    }

    pub fn int() -> Self {
        CType::base(BaseType::Int { unsigned: false })
    }

    pub fn is_void(&self) -> bool {
        matches!(
            self,
            CType::Base {
                base: BaseType::Void,
                ..
            }
        )
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self, CType::Pointer { .. } | CType::Array { .. })
    }

    /// Walks the type and calls `f` on every base type it mentions.
    pub fn for_each_base(&self, f: &mut dyn FnMut(&BaseType)) {
        match self {
            CType::Base { base, .. } => f(base),
            CType::Pointer { pointee, .. } => pointee.for_each_base(f),
            CType::Array { elem, .. } => elem.for_each_base(f),
            CType::Function(ft) => {
                ft.ret.for_each_base(f);
                for p in &ft.params {
                    p.ty.for_each_base(f);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Plus,
    Not,
    BitNot,
    Deref,
    AddrOf,
    PreInc,
    PreDec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Mul,
    Div,
    Rem,
    Add,
    Sub,
    Shl,
    Shr,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitXor,
    BitOr,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        use BinaryOp::*;
        match self {
            Mul => "*",
            Div => "/",
            Rem => "%",
            Add => "+",
            Sub => "-",
            Shl => "<<",
            Shr => ">>",
            Lt => "<",
            Gt => ">",
            Le => "<=",
            Ge => ">=",
            Eq => "==",
            Ne => "!=",
            BitAnd => "&",
            BitXor => "^",
            BitOr => "|",
            And => "&&",
            Or => "||",
        }
    }

    pub fn is_comparison(self) -> bool {
        use BinaryOp::*;
        matches!(self, Lt | Gt | Le | Ge | Eq | Ne)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::And | BinaryOp::Or)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Ident(String),
    IntLit(String),
    FloatLit(String),
    StrLit(String),
    CharLit(String),
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
    },
    Member {
        base: Box<Expr>,
        field: String,
        arrow: bool,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    Unary {
        op: UnaryOp,
        expr: Box<Expr>,
    },
    PostInc(Box<Expr>),
    PostDec(Box<Expr>),
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// `op` is `None` for plain `=`, otherwise the compound operator.
    Assign {
        op: Option<BinaryOp>,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Ternary {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
    Cast {
        ty: CType,
        expr: Box<Expr>,
    },
    SizeofType(CType),
    SizeofExpr(Box<Expr>),
    Comma(Vec<Expr>),
    InitList(Vec<Expr>),
    CompoundLiteral {
        ty: CType,
        init: Vec<Expr>,
    },
}

impl Expr {
    /// Visits this expression and all sub-expressions, pre-order.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Ident(_)
            | Expr::IntLit(_)
            | Expr::FloatLit(_)
            | Expr::StrLit(_)
            | Expr::CharLit(_)
            | Expr::SizeofType(_) => {}
            Expr::Call { callee, args } => {
                callee.walk(f);
                args.iter().for_each(|a| a.walk(f));
            }
            Expr::Member { base, .. } => base.walk(f),
            Expr::Index { base, index } => {
                base.walk(f);
                index.walk(f);
            }
            Expr::Unary { expr, .. } | Expr::PostInc(expr) | Expr::PostDec(expr) => expr.walk(f),
            Expr::Binary { lhs, rhs, .. } | Expr::Assign { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::Ternary { cond, then, els } => {
                cond.walk(f);
                then.walk(f);
                els.walk(f);
            }
            Expr::Cast { expr, .. } | Expr::SizeofExpr(expr) => expr.walk(f),
            Expr::Comma(items) | Expr::InitList(items) => items.iter().for_each(|e| e.walk(f)),
            Expr::CompoundLiteral { init, .. } => init.iter().for_each(|e| e.walk(f)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalDecl {
    pub name: String,
    pub ty: CType,
    pub init: Option<Expr>,
    pub is_static: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Expr(Expr),
    Empty,
    Decl(Vec<LocalDecl>),
    Compound(Vec<Stmt>),
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    DoWhile {
        body: Box<Stmt>,
        cond: Expr,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Expr>,
        body: Box<Stmt>,
    },
    Switch {
        expr: Expr,
        body: Box<Stmt>,
    },
    Case {
        value: Expr,
        body: Box<Stmt>,
    },
    Default(Box<Stmt>),
    Break,
    Continue,
    Return(Option<Expr>),
    Goto(String),
    Labeled {
        label: String,
        body: Box<Stmt>,
    },
}

impl Stmt {
    /// Visits this statement and all nested statements, pre-order.
    pub fn walk(&self, f: &mut dyn FnMut(&Stmt)) {
        f(self);
        match self {
            Stmt::Compound(items) => items.iter().for_each(|s| s.walk(f)),
            Stmt::If { then, els, .. } => {
                then.walk(f);
                if let Some(e) = els {
                    e.walk(f);
                }
            }
            Stmt::While { body, .. }
            | Stmt::DoWhile { body, .. }
            | Stmt::Switch { body, .. }
            | Stmt::Case { body, .. }
            | Stmt::Default(body)
            | Stmt::Labeled { body, .. } => body.walk(f),
            Stmt::For { init, body, .. } => {
                if let Some(i) = init {
                    i.walk(f);
                }
                body.walk(f);
            }
            _ => {}
        }
    }

    /// Expressions directly owned by this statement (not by nested statements).
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Stmt::Expr(e) => vec![e],
            Stmt::Decl(ds) => ds.iter().filter_map(|d| d.init.as_ref()).collect(),
            Stmt::If { cond, .. } | Stmt::While { cond, .. } | Stmt::DoWhile { cond, .. } => {
                vec![cond]
            }
            Stmt::For { cond, step, .. } => cond.iter().chain(step.iter()).collect(),
            Stmt::Switch { expr, .. } => vec![expr],
            Stmt::Case { value, .. } => vec![value],
            Stmt::Return(Some(e)) => vec![e],
            _ => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub ret: CType,
    pub params: Vec<Param>,
    pub variadic: bool,
    pub is_static: bool,
    pub body: Vec<Stmt>,
    /// Byte range of the whole definition, from the first specifier to the closing brace.
    pub start: usize,
    pub end: usize,
    /// Byte offset of the opening brace of the body.
    pub body_start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroDef {
    pub name: String,
    /// `Some` for function-like macros.
    pub params: Option<Vec<String>>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopLevelKind {
    Function(FunctionDef),
    Prototype {
        name: String,
        fn_type: FnType,
        is_static: bool,
    },
    /// A struct/union/enum definition, possibly wrapped in a typedef.
    Record {
        ty: CType,
    },
    Typedef {
        name: String,
        ty: CType,
    },
    Variable {
        name: String,
        ty: CType,
        is_extern: bool,
        is_static: bool,
        init: Option<Expr>,
    },
    Macro(MacroDef),
    Include {
        path: String,
        system: bool,
    },
    /// Conditional compilation and other directives kept only for round-tripping.
    OtherDirective,
}

/// One top-level construct with its exact byte range in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct TopLevel {
    pub kind: TopLevelKind,
    pub start: usize,
    pub end: usize,
    pub line: u32,
}
