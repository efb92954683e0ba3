//! Resolved query trees. Every column points into the schema by position,
//! so aliases and identifier case no longer matter.

use serde::Serialize;

use crate::corpus::ColumnRef;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Literal {
    Number(String),
    Str(String),
    Null,
    /// Stands in for any literal when values are not compared.
    Placeholder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Concat,
}

impl ArithOp {
    pub fn is_commutative(self) -> bool {
        matches!(self, ArithOp::Add | ArithOp::Mul)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    /// The operator that holds after swapping the operands.
    pub fn mirrored(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Le,
            op => op,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SetOp {
    Union,
    UnionAll,
    Intersect,
    Except,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ColumnId {
    Star,
    Schema(ColumnRef),
    /// Output column of a derived table, by lowercased name.
    Derived(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Expr {
    Column(ColumnId),
    Literal(Literal),
    Agg { func: AggFunc, distinct: bool, arg: Box<Expr> },
    Func { name: String, args: Vec<Expr> },
    Arith { op: ArithOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Neg(Box<Expr>),
    Subquery(Box<SqlAst>),
}

impl Expr {
    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::Literal(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum InSet {
    List(Vec<Expr>),
    Query(Box<SqlAst>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Cond {
    And(Vec<Cond>),
    Or(Vec<Cond>),
    Not(Box<Cond>),
    Cmp { lhs: Expr, op: CmpOp, rhs: Expr },
    Like { expr: Expr, pattern: Expr, negated: bool },
    In { expr: Expr, set: InSet, negated: bool },
    Between { expr: Expr, low: Expr, high: Expr, negated: bool },
    Exists { query: Box<SqlAst>, negated: bool },
    IsNull { expr: Expr, negated: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TableRef {
    Table(usize),
    Derived(Box<SqlAst>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct OrderTerm {
    pub expr: Expr,
    pub dir: Direction,
}

/// One SELECT with its clauses, optionally chained to another by a set
/// operation.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SqlAst {
    pub distinct: bool,
    pub select: Vec<Expr>,
    pub from: Vec<TableRef>,
    /// `JOIN ... ON` conditions, split into conjuncts.
    pub join_conds: Vec<Cond>,
    pub where_: Option<Cond>,
    pub group_by: Vec<Expr>,
    pub having: Option<Cond>,
    pub order_by: Vec<OrderTerm>,
    pub limit: Option<Literal>,
    pub set_op: Option<(SetOp, Box<SqlAst>)>,
}
