//! Abstract syntax for the supported Alloy subset.
//!
//! The parser produces `Expr::Name` leaves; resolution against a model
//! rewrites them into `Sig`, `Field`, `Var`, ordering accessors or function
//! calls. Every node derives `PartialEq`, and spans compare equal regardless
//! of position, so two trees are equal when their structure is.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub type Ident = String;

/// Byte and line/column extent of a construct in its source text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl SourceSpan {
    pub fn to(self, other: SourceSpan) -> SourceSpan {
        SourceSpan {
            start: self.start,
            end: other.end.max(self.start),
            start_line: self.start_line,
            start_col: self.start_col,
            end_line: other.end_line,
            end_col: other.end_col,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start_line, self.start_col)
    }
}

/// Location attached to AST nodes. Always compares equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span(pub SourceSpan);

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}
impl Eq for Span {}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Model {
    pub name: Ident,
    /// Signatures ordered by `open util/ordering[S]`.
    pub orderings: Vec<Ident>,
    pub sigs: Vec<SigDecl>,
    pub facts: Vec<Fact>,
    pub preds: Vec<PredDecl>,
    pub funs: Vec<FunDecl>,
    pub commands: Vec<RunCommand>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SigMult {
    Lone,
    Some,
    One,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SigKind {
    TopLevel,
    Subset(Ident),
    Extension(Ident),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigDecl {
    pub name: Ident,
    pub kind: SigKind,
    pub is_abstract: bool,
    pub multiplicity: Option<SigMult>,
    pub fields: Vec<FieldDecl>,
    pub span: Span,
}

impl SigDecl {
    pub fn parent(&self) -> Option<&str> {
        match &self.kind {
            SigKind::TopLevel => None,
            SigKind::Subset(p) | SigKind::Extension(p) => Some(p),
        }
    }
}

/// Multiplicity constraint on the final column of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Multiplicity {
    Set,
    Lone,
    Some,
    One,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: Ident,
    pub owner: Ident,
    /// Column signatures after the implicit owner column.
    pub columns: Vec<Ident>,
    pub multiplicity: Multiplicity,
    pub span: Span,
}

impl FieldDecl {
    pub fn arity(&self) -> usize {
        1 + self.columns.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fact {
    pub name: Ident,
    pub body: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: Ident,
    pub bound: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredDecl {
    pub name: Ident,
    pub params: Vec<Param>,
    pub body: Formula,
    /// Comment block immediately preceding the declaration.
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunDecl {
    pub name: Ident,
    pub params: Vec<Param>,
    pub result: Expr,
    pub body: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnaryOp {
    Transpose,
    Closure,
    ReflexiveClosure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryOp {
    Union,
    Difference,
    Intersection,
    Product,
    Join,
    DomainRestrict,
    RangeRestrict,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Union => "+",
            BinaryOp::Difference => "-",
            BinaryOp::Intersection => "&",
            BinaryOp::Product => "->",
            BinaryOp::Join => ".",
            BinaryOp::DomainRestrict => "<:",
            BinaryOp::RangeRestrict => ":>",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    /// Unresolved identifier as written in the source.
    Name(Ident),
    Sig(Ident),
    Field { owner: Ident, name: Ident },
    Var(Ident),
    /// `next` of the ordering on the given signature.
    Next(Ident),
    First(Ident),
    Last(Ident),
    None,
    Univ,
    Iden,
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// `e[a, b]`, kept verbatim until resolution.
    BoxJoin(Box<Expr>, Vec<Expr>),
    /// Resolved call of a `fun`.
    Call(Ident, Vec<Expr>),
}

impl Expr {
    pub fn name(n: impl Into<Ident>) -> Expr {
        Expr::Name(n.into())
    }

    pub fn binary(op: BinaryOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    /// `none -> none -> ...` of the given arity.
    pub fn empty_of_arity(arity: usize) -> Expr {
        let mut e = Expr::None;
        for _ in 1..arity {
            e = Expr::binary(BinaryOp::Product, e, Expr::None);
        }
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    In,
    NotIn,
    Eq,
    NotEq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MultTest {
    No,
    Some,
    Lone,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Logic {
    And,
    Or,
    Implies,
    Iff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantifier {
    All,
    Some,
    No,
    Lone,
    One,
}

/// One `[disj] a, b : bound` group of a quantifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub disj: bool,
    pub names: Vec<Ident>,
    pub bound: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub kind: FormulaKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormulaKind {
    Compare(CompareOp, Expr, Expr),
    Mult(MultTest, Expr),
    Not(Box<Formula>),
    Binary(Logic, Box<Formula>, Box<Formula>),
    /// `c implies a else b`
    IfElse(Box<Formula>, Box<Formula>, Box<Formula>),
    /// `{ f1 f2 ... }`, a conjunction.
    Block(Vec<Formula>),
    Quant {
        quant: Quantifier,
        decls: Vec<Decl>,
        body: Box<Formula>,
    },
    /// Predicate invocation.
    Call(Ident, Vec<Expr>),
}

impl Formula {
    pub fn new(kind: FormulaKind) -> Formula {
        Formula { kind, span: Span::default() }
    }

    pub fn with_span(kind: FormulaKind, span: SourceSpan) -> Formula {
        Formula { kind, span: Span(span) }
    }

    pub fn truth() -> Formula {
        Formula::new(FormulaKind::Block(Vec::new()))
    }

    pub fn call(pred: impl Into<Ident>) -> Formula {
        Formula::new(FormulaKind::Call(pred.into(), Vec::new()))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::new(FormulaKind::Not(Box::new(f)))
    }

    pub fn logic(op: Logic, l: Formula, r: Formula) -> Formula {
        Formula::new(FormulaKind::Binary(op, Box::new(l), Box::new(r)))
    }

    pub fn source_span(&self) -> SourceSpan {
        self.span.0
    }
}

/// Bound on the number of atoms of a top-level signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scope {
    pub bound: u32,
    pub exact: bool,
}

/// Expected satisfiability of a `run` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expect {
    Unsat,
    Sat,
}

impl Expect {
    pub fn from_digit(d: u32) -> Option<Expect> {
        match d {
            0 => Some(Expect::Unsat),
            1 => Some(Expect::Sat),
            _ => None,
        }
    }

    pub fn digit(self) -> u32 {
        match self {
            Expect::Unsat => 0,
            Expect::Sat => 1,
        }
    }
}

/// Scope applied to top-level signatures missing from a command's scope list.
pub const DEFAULT_SCOPE: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunCommand {
    /// Empty for anonymous `run { ... }` commands.
    pub name: Ident,
    pub body: Formula,
    /// Explicit per-signature scopes, keyed by top-level signature.
    pub scopes: BTreeMap<Ident, Scope>,
    /// The `N` of `for N but ...`, if given.
    pub default_bound: Option<u32>,
    pub expect: Option<Expect>,
    /// Natural-language comment immediately preceding the command.
    pub comment: Option<String>,
    pub span: Span,
}

impl RunCommand {
    /// Scope of a top-level signature under this command.
    pub fn scope_of(&self, sig: &str) -> Scope {
        self.scopes.get(sig).copied().unwrap_or(Scope {
            bound: self.default_bound.unwrap_or(DEFAULT_SCOPE),
            exact: false,
        })
    }
}

/// A natural-language requirement and the predicate formalizing it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub index: usize,
    pub text: String,
    pub oracle: Ident,
}

impl Model {
    pub fn sig(&self, name: &str) -> Option<&SigDecl> {
        self.sigs.iter().find(|s| s.name == name)
    }

    pub fn pred(&self, name: &str) -> Option<&PredDecl> {
        self.preds.iter().find(|p| p.name == name)
    }

    pub fn fun(&self, name: &str) -> Option<&FunDecl> {
        self.funs.iter().find(|f| f.name == name)
    }

    pub fn command(&self, name: &str) -> Option<&RunCommand> {
        self.commands.iter().find(|c| c.name == name)
    }

    pub fn fields(&self) -> impl Iterator<Item = &FieldDecl> {
        self.sigs.iter().flat_map(|s| s.fields.iter())
    }

    pub fn field(&self, owner: &str, name: &str) -> Option<&FieldDecl> {
        self.sig(owner)?.fields.iter().find(|f| f.name == name)
    }

    /// Every field with the given name, across owners.
    pub fn fields_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a FieldDecl> + 'a {
        self.fields().filter(move |f| f.name == name)
    }

    pub fn top_level(&self) -> impl Iterator<Item = &SigDecl> {
        self.sigs.iter().filter(|s| s.kind == SigKind::TopLevel)
    }

    /// Top-level ancestor of a signature. Assumes an acyclic hierarchy.
    pub fn top_of<'a>(&'a self, name: &'a str) -> Option<&'a str> {
        let mut cur = self.sig(name)?;
        let mut steps = 0;
        while let Some(p) = cur.parent() {
            cur = self.sig(p)?;
            steps += 1;
            if steps > self.sigs.len() {
                return None;
            }
        }
        Some(&cur.name)
    }

    pub fn children<'a>(&'a self, parent: &'a str) -> impl Iterator<Item = &'a SigDecl> + 'a {
        self.sigs.iter().filter(move |s| s.parent() == Some(parent))
    }

    pub fn extensions<'a>(&'a self, parent: &'a str) -> impl Iterator<Item = &'a SigDecl> + 'a {
        self.sigs
            .iter()
            .filter(move |s| matches!(&s.kind, SigKind::Extension(p) if p == parent))
    }

    pub fn is_ordered(&self, sig: &str) -> bool {
        self.orderings.iter().any(|o| o == sig)
    }

    /// Arities of the relations a bare identifier could denote
    /// (fields and ordering relations), deduplicated.
    pub fn relation_arities(&self, name: &str) -> Vec<usize> {
        let mut out: Vec<usize> = self.fields_named(name).map(|f| f.arity()).collect();
        if !self.orderings.is_empty() {
            match name {
                "next" => out.push(2),
                "first" | "last" => out.push(1),
                _ => {}
            }
        }
        if self.sig(name).is_some() {
            out.push(1);
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}
