//! Query syntax: abstract syntax tree, lexer, parser and desugaring.

mod lexer;
mod parser;
mod desugar;

pub use desugar::desugar;
pub(crate) use desugar::lower_pattern;
pub(crate) use parser::fmt_num;
pub use parser::{parse_condition, parse_pattern, parse_program, parse_term};

use std::fmt;

// ---------------------------------------------------------------------------
// extraction patterns
// ---------------------------------------------------------------------------

/// One side of an atomic element pattern: a literal name, a variable, or (on
/// the content side) a constant.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomSide {
    Name(String),
    Var(String),
    Const(String),
}

/// Atomic element pattern `name => content`, e.g. `title=>$t`, `last=>"Li"`,
/// `$vtag=>$vcont`. The name side keeps a leading `@` for attribute atoms.
/// `content` is None for abbreviated patterns like `//book`; desugaring
/// supplies a generated variable.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomPtn {
    pub name: AtomSide,
    pub content: Option<AtomSide>,
}

/// Axis of a path pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Child,      // /p
    Descendant, // //p
}

/// Document extraction pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum Ep {
    /// `/atom` or `//atom` (attribute atoms carry `@` in their name).
    Path(Axis, AtomPtn),
    /// `root(sub)` — match the root pattern, then its contents.
    Tree(Box<Ep>, Box<Ep>),
    /// `p1 ; p2` — fold: pair every match of `p1` with the binding of `p2`.
    Fold(Box<Ep>, Box<Ep>),
    Conj(Vec<Ep>),
    Disj(Vec<Ep>),
}

// ---------------------------------------------------------------------------
// value extraction patterns
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum ValConst {
    Str(String),
    Num(f64),
    Bool(bool),
    Nil,
}

/// Value extraction pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum Vp {
    /// `*` — matches any value, binds nothing.
    Univ,
    Const(ValConst),
    Var(String),
    /// `$x p` — bind the whole value and destructure it.
    VarPtn(String, Box<Vp>),
    /// `[p]` — a view: a failing match yields a null binding, not a failure.
    View(Box<Vp>),
    /// A document extraction pattern applied to a document value.
    Doc(Box<Ep>),
    Set(Box<Vp>),
    /// `p :: p'` — head/tail of a set value.
    Cons(Box<Vp>, Box<Vp>),
    Tuple(Vec<Vp>),
    DUnion(Vec<Vp>),
    /// `lab&p | lab'&p'` — labelled option branches.
    Opt(Vec<(Option<String>, Vp)>),
}

// ---------------------------------------------------------------------------
// query expressions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum QExpr {
    /// `doc("name.xml") pattern`; the pattern may be left for a composite
    /// source suffix and is filled in by desugaring.
    Doc { doc: String, pattern: Option<Ep> },
    /// `#input[pattern]` — the declared function's input value.
    Input { pattern: Vp },
    /// `#func[pattern]` — the virtual function-image value.
    Func { pattern: Vp },
    Conj(Vec<QExpr>),
    Disj(Vec<QExpr>),
    /// Pre-desugar only: a composite source awaiting pattern distribution.
    Suffixed(Box<QExpr>, Ep),
}

// ---------------------------------------------------------------------------
// user-written matching terms (groupby / hid / elim / quantifier arguments)
// ---------------------------------------------------------------------------

/// A matching term as written in a query; set terms have no explicit index
/// (it is recovered against the query's original term).
#[derive(Debug, Clone, PartialEq)]
pub enum UTerm {
    Var(String),
    Tuple(Vec<UTerm>),
    DUnion(Vec<UTerm>),
    Opt(Vec<UTerm>),
    Set(Box<UTerm>),
    /// `t%` — content projection of a term.
    Content(Box<UTerm>),
}

impl UTerm {
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            UTerm::Var(v) => out.push(v.clone()),
            UTerm::Tuple(ts) | UTerm::DUnion(ts) | UTerm::Opt(ts) => {
                for t in ts {
                    t.collect_vars(out);
                }
            }
            UTerm::Set(t) | UTerm::Content(t) => t.collect_vars(out),
        }
    }
}

// ---------------------------------------------------------------------------
// construction patterns
// ---------------------------------------------------------------------------

/// Name position of an element construction: literal, variable or invocation;
/// `@` marks attribute output.
#[derive(Debug, Clone, PartialEq)]
pub enum NamePtn {
    Lit(String),
    Var(String),
    Fun(FunInvoke),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunInvoke {
    pub name: String,
    pub arg: Box<Cp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderItem {
    pub unit: Cp,
    pub asc: bool,
}

/// Construction pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum Cp {
    Str(String),
    Num(f64),
    Bool(bool),
    /// `~` — empty content.
    Empty,
    Nil,
    Var(String),
    /// `loc($x)`
    Loc(String),
    Fun(FunInvoke),
    Elem(NamePtn, Box<Cp>),
    Label(String, Box<Cp>),
    Tuple(Vec<Cp>),
    DUnion(Vec<Cp>),
    Opt(Vec<Cp>),
    /// `p hid t` — t joins the argument term but not the value.
    Hid(Box<Cp>, UTerm),
    /// `p elim t` — d-union branch kept in the argument, dropped from output.
    Elim(Box<Cp>, UTerm),
    Set {
        elem: Box<Cp>,
        groupby: Option<UTerm>,
        orderby: Vec<OrderItem>,
    },
    /// `p :: p'` — explicit head/tail set construction.
    Cons(Box<Cp>, Box<Cp>),
}

// ---------------------------------------------------------------------------
// conditions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    /// `<<` — immediate sibling succession of two locations.
    Succ,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Succ => "<<",
        };
        f.write_str(s)
    }
}

/// One side of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Cp(Cp),
    /// `$a/last` — existential selection of matches inside a bound value.
    Sel { var: String, path: Ep },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quant {
    ForEach,
    ForSome,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cond {
    Cmp { op: CmpOp, lhs: Operand, rhs: Operand },
    /// `$a/last=>"Li"` — existential pattern test inside a bound value.
    PathTest { var: String, path: Ep },
    Fun(FunInvoke),
    Not(Box<Cond>),
    And(Vec<Cond>),
    Or(Vec<Cond>),
    /// `c1 | c2` — option-dispatched condition branches.
    OptBranch(Vec<Cond>),
    Quantified { quant: Quant, term: UTerm, domain: Option<UTerm>, body: Box<Cond> },
    /// `any(u)` — vacuously true on its scope; used by complementation.
    Any(UTerm),
    Par(Box<Cond>, Box<Cond>),
    With(Box<Cond>, Box<Cond>),
}

// ---------------------------------------------------------------------------
// value types and programs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum ValType {
    Bool,
    Num,
    Cdata,
    Loc,
    Doc,
    Univ,
    Set(Box<ValType>),
    Tuple(Vec<ValType>),
    DUnion(Vec<ValType>),
    Opt(Vec<ValType>),
    Labeled(String, Box<ValType>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QwcStatement {
    pub query: QExpr,
    pub where_: Option<Cond>,
    pub construct: Cp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDecl {
    pub name: String,
    pub input: ValType,
    pub output: ValType,
    pub body: QwcStatement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub functions: Vec<FunctionDecl>,
    pub statement: QwcStatement,
}

/// Prefix of generated variables; the `!` is unlexable in source queries, so
/// generated names can never collide with user variables.
pub const GEN_PREFIX: &str = "$!g";

/// Variable allocator used by desugaring and suffix inference.
#[derive(Debug, Default)]
pub struct VarGen {
    next: u32,
}

impl VarGen {
    pub fn fresh(&mut self) -> String {
        self.next += 1;
        format!("{}{}", GEN_PREFIX, self.next)
    }
}
