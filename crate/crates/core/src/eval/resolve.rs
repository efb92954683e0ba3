//! Name resolution against a schema, value masking, and canonical ordering.

use super::ast::*;
use super::parser::{parse, RawCond, RawExpr, RawFactor, RawInSet, RawQuery, RawSelect};
use super::SqlError;
use crate::corpus::{ColumnRef, SchemaDb};

#[derive(Debug, Clone)]
enum Source {
    Table(usize),
    /// Lowercased output column names of a derived table.
    Derived(Vec<String>),
}

#[derive(Debug, Clone)]
struct Entry {
    names: Vec<String>,
    source: Source,
}

#[derive(Debug, Clone)]
struct Scope<'q> {
    entries: Vec<Entry>,
    aliases: Vec<(String, &'q RawExpr)>,
}

/// Parse and resolve every name, without reordering anything.
pub fn parse_resolved(sql: &str, schema: &SchemaDb) -> Result<SqlAst, SqlError> {
    let raw = parse(sql)?;
    Resolver { schema }.query(&raw, &[])
}

/// Parse, resolve and canonicalize.
pub fn parse_sql(sql: &str, schema: &SchemaDb) -> Result<SqlAst, SqlError> {
    parse_resolved(sql, schema).map(canonicalize)
}

fn unresolved(message: String) -> SqlError {
    SqlError::Resolution(message)
}

struct Resolver<'s> {
    schema: &'s SchemaDb,
}

impl Resolver<'_> {
    fn query(&self, q: &RawQuery, outer: &[Scope]) -> Result<SqlAst, SqlError> {
        let mut ast = self.select(&q.select, outer)?;
        if let Some((op, rhs)) = &q.set_op {
            ast.set_op = Some((*op, Box::new(self.query(rhs, outer)?)));
        }
        Ok(ast)
    }

    fn select(&self, s: &RawSelect, outer: &[Scope]) -> Result<SqlAst, SqlError> {
        let mut from = Vec::new();
        let mut entries = Vec::new();
        if s.from.is_empty() {
            // Tables are implied by the qualified columns.
            let mut quals = Vec::new();
            for (e, _) in &s.items {
                expr_qualifiers(e, &mut quals);
            }
            for c in s.where_.iter().chain(&s.having) {
                cond_qualifiers(c, &mut quals);
            }
            for e in s.group_by.iter().chain(s.order_by.iter().map(|(e, _)| e)) {
                expr_qualifiers(e, &mut quals);
            }
            for q in quals {
                let t = self
                    .schema
                    .table_index(&q)
                    .ok_or_else(|| unresolved(format!("unknown table `{q}` in a query without FROM")))?;
                if !from.contains(&TableRef::Table(t)) {
                    from.push(TableRef::Table(t));
                    entries.push(Entry {
                        names: vec![q.to_lowercase()],
                        source: Source::Table(t),
                    });
                }
            }
            if from.is_empty() {
                return Err(unresolved("query has no FROM clause and no qualified columns".into()));
            }
        }
        for f in &s.from {
            match f {
                RawFactor::Table { name, alias } => {
                    let t = self
                        .schema
                        .table_index(name)
                        .ok_or_else(|| unresolved(format!("unknown table `{name}`")))?;
                    let mut names = vec![self.schema.tables[t].name.to_lowercase()];
                    names.extend(alias.iter().map(|a| a.to_lowercase()));
                    entries.push(Entry { names, source: Source::Table(t) });
                    from.push(TableRef::Table(t));
                }
                RawFactor::Derived { query, alias } => {
                    let inner = self.query(query, &[])?;
                    let cols = query
                        .select
                        .items
                        .iter()
                        .map(|(e, a)| match (e, a) {
                            (_, Some(a)) => a.to_lowercase(),
                            (RawExpr::Column { name, .. }, None) => name.to_lowercase(),
                            _ => String::new(),
                        })
                        .collect();
                    entries.push(Entry {
                        names: alias.iter().map(|a| a.to_lowercase()).collect(),
                        source: Source::Derived(cols),
                    });
                    from.push(TableRef::Derived(Box::new(inner)));
                }
            }
        }
        let aliases = s
            .items
            .iter()
            .filter_map(|(e, a)| a.as_ref().map(|a| (a.to_lowercase(), e)))
            .collect();
        let mut scopes = outer.to_vec();
        scopes.push(Scope { entries, aliases });
        let sc = &scopes[..];

        let select = s.items.iter().map(|(e, _)| self.expr(e, sc)).collect::<Result<_, _>>()?;
        let mut join_conds = Vec::new();
        for c in &s.join_conds {
            match self.cond(c, sc)? {
                Cond::And(parts) => join_conds.extend(parts),
                c => join_conds.push(c),
            }
        }
        Ok(SqlAst {
            distinct: s.distinct,
            select,
            from,
            join_conds,
            where_: s.where_.as_ref().map(|c| self.cond(c, sc)).transpose()?,
            group_by: s.group_by.iter().map(|e| self.expr(e, sc)).collect::<Result<_, _>>()?,
            having: s.having.as_ref().map(|c| self.cond(c, sc)).transpose()?,
            order_by: s
                .order_by
                .iter()
                .map(|(e, dir)| Ok(OrderTerm { expr: self.expr(e, sc)?, dir: *dir }))
                .collect::<Result<_, SqlError>>()?,
            limit: s.limit.clone(),
            set_op: None,
        })
    }

    fn column(&self, qualifier: Option<&str>, name: &str, scopes: &[Scope]) -> Result<Expr, SqlError> {
        let lname = name.to_lowercase();
        let lookup = |source: &Source| -> Option<ColumnId> {
            match source {
                Source::Table(t) => self
                    .schema
                    .column_index(*t, name)
                    .map(|c| ColumnId::Schema(ColumnRef::new(*t, c))),
                Source::Derived(cols) => cols.contains(&lname).then(|| ColumnId::Derived(lname.clone())),
            }
        };
        match qualifier {
            Some(q) => {
                let lq = q.to_lowercase();
                for scope in scopes.iter().rev() {
                    if let Some(entry) = scope.entries.iter().find(|e| e.names.contains(&lq)) {
                        return lookup(&entry.source)
                            .map(Expr::Column)
                            .ok_or_else(|| unresolved(format!("unknown column `{q}.{name}`")));
                    }
                }
                Err(unresolved(format!("unknown table or alias `{q}`")))
            }
            None => {
                for (depth, scope) in scopes.iter().rev().enumerate() {
                    if let Some(id) = scope.entries.iter().find_map(|e| lookup(&e.source)) {
                        return Ok(Expr::Column(id));
                    }
                    if depth == 0 {
                        if let Some((_, e)) = scope.aliases.iter().find(|(a, _)| *a == lname) {
                            // Resolve the aliased expression without alias lookup.
                            let mut plain = scopes.to_vec();
                            plain.last_mut().unwrap().aliases.clear();
                            return self.expr(e, &plain);
                        }
                    }
                }
                Err(unresolved(format!("unknown column `{name}`")))
            }
        }
    }

    fn expr(&self, e: &RawExpr, scopes: &[Scope]) -> Result<Expr, SqlError> {
        Ok(match e {
            RawExpr::Column { qualifier, name } => self.column(qualifier.as_deref(), name, scopes)?,
            RawExpr::Star { qualifier } => {
                if let Some(q) = qualifier {
                    let lq = q.to_lowercase();
                    let known = scopes.iter().any(|s| s.entries.iter().any(|e| e.names.contains(&lq)));
                    if !known {
                        return Err(unresolved(format!("unknown table or alias `{q}`")));
                    }
                }
                Expr::Column(ColumnId::Star)
            }
            RawExpr::Literal(l) => Expr::Literal(l.clone()),
            RawExpr::Agg { func, distinct, arg } => Expr::Agg {
                func: *func,
                distinct: *distinct,
                arg: Box::new(self.expr(arg, scopes)?),
            },
            RawExpr::Func { name, args } => Expr::Func {
                name: name.clone(),
                args: args.iter().map(|a| self.expr(a, scopes)).collect::<Result<_, _>>()?,
            },
            RawExpr::Arith { op, lhs, rhs } => Expr::Arith {
                op: *op,
                lhs: Box::new(self.expr(lhs, scopes)?),
                rhs: Box::new(self.expr(rhs, scopes)?),
            },
            RawExpr::Neg(inner) => Expr::Neg(Box::new(self.expr(inner, scopes)?)),
            RawExpr::Subquery(q) => Expr::Subquery(Box::new(self.query(q, scopes)?)),
        })
    }

    fn cond(&self, c: &RawCond, scopes: &[Scope]) -> Result<Cond, SqlError> {
        let many = |parts: &[RawCond]| parts.iter().map(|p| self.cond(p, scopes)).collect::<Result<Vec<_>, _>>();
        Ok(match c {
            RawCond::And(parts) => Cond::And(many(parts)?),
            RawCond::Or(parts) => Cond::Or(many(parts)?),
            RawCond::Not(inner) => Cond::Not(Box::new(self.cond(inner, scopes)?)),
            RawCond::Cmp { lhs, op, rhs } => Cond::Cmp {
                lhs: self.expr(lhs, scopes)?,
                op: *op,
                rhs: self.expr(rhs, scopes)?,
            },
            RawCond::Like { expr, pattern, negated } => Cond::Like {
                expr: self.expr(expr, scopes)?,
                pattern: self.expr(pattern, scopes)?,
                negated: *negated,
            },
            RawCond::In { expr, set, negated } => Cond::In {
                expr: self.expr(expr, scopes)?,
                set: match set {
                    RawInSet::List(items) => {
                        InSet::List(items.iter().map(|i| self.expr(i, scopes)).collect::<Result<_, _>>()?)
                    }
                    RawInSet::Query(q) => InSet::Query(Box::new(self.query(q, scopes)?)),
                },
                negated: *negated,
            },
            RawCond::Between { expr, low, high, negated } => Cond::Between {
                expr: self.expr(expr, scopes)?,
                low: self.expr(low, scopes)?,
                high: self.expr(high, scopes)?,
                negated: *negated,
            },
            RawCond::Exists { query, negated } => Cond::Exists {
                query: Box::new(self.query(query, scopes)?),
                negated: *negated,
            },
            RawCond::IsNull { expr, negated } => Cond::IsNull {
                expr: self.expr(expr, scopes)?,
                negated: *negated,
            },
        })
    }
}

fn push_unique(out: &mut Vec<String>, q: &str) {
    if !out.iter().any(|o| o.eq_ignore_ascii_case(q)) {
        out.push(q.to_string());
    }
}

fn expr_qualifiers(e: &RawExpr, out: &mut Vec<String>) {
    match e {
        RawExpr::Column { qualifier: Some(q), .. } | RawExpr::Star { qualifier: Some(q) } => push_unique(out, q),
        RawExpr::Agg { arg, .. } | RawExpr::Neg(arg) => expr_qualifiers(arg, out),
        RawExpr::Func { args, .. } => args.iter().for_each(|a| expr_qualifiers(a, out)),
        RawExpr::Arith { lhs, rhs, .. } => {
            expr_qualifiers(lhs, out);
            expr_qualifiers(rhs, out);
        }
        _ => {}
    }
}

fn cond_qualifiers(c: &RawCond, out: &mut Vec<String>) {
    match c {
        RawCond::And(parts) | RawCond::Or(parts) => parts.iter().for_each(|p| cond_qualifiers(p, out)),
        RawCond::Not(inner) => cond_qualifiers(inner, out),
        RawCond::Cmp { lhs, rhs, .. } => {
            expr_qualifiers(lhs, out);
            expr_qualifiers(rhs, out);
        }
        RawCond::Like { expr, pattern, .. } => {
            expr_qualifiers(expr, out);
            expr_qualifiers(pattern, out);
        }
        RawCond::In { expr, set, .. } => {
            expr_qualifiers(expr, out);
            if let RawInSet::List(items) = set {
                items.iter().for_each(|i| expr_qualifiers(i, out));
            }
        }
        RawCond::Between { expr, low, high, .. } => {
            for e in [expr, low, high] {
                expr_qualifiers(e, out);
            }
        }
        RawCond::IsNull { expr, .. } => expr_qualifiers(expr, out),
        RawCond::Exists { .. } => {}
    }
}

/// Replace every literal, including the LIMIT count, with
/// [`Literal::Placeholder`].
pub fn mask_values(ast: &mut SqlAst) {
    visit_ast(ast, &mut |l: &mut Literal| *l = Literal::Placeholder);
}

fn visit_ast(ast: &mut SqlAst, f: &mut impl FnMut(&mut Literal)) {
    ast.select.iter_mut().for_each(|e| visit_expr(e, f));
    for t in &mut ast.from {
        if let TableRef::Derived(q) = t {
            visit_ast(q, f);
        }
    }
    ast.join_conds.iter_mut().for_each(|c| visit_cond(c, f));
    ast.where_.iter_mut().for_each(|c| visit_cond(c, f));
    ast.group_by.iter_mut().for_each(|e| visit_expr(e, f));
    ast.having.iter_mut().for_each(|c| visit_cond(c, f));
    ast.order_by.iter_mut().for_each(|o| visit_expr(&mut o.expr, f));
    if let Some(l) = &mut ast.limit {
        f(l);
    }
    if let Some((_, rhs)) = &mut ast.set_op {
        visit_ast(rhs, f);
    }
}

fn visit_expr(e: &mut Expr, f: &mut impl FnMut(&mut Literal)) {
    match e {
        Expr::Column(_) => {}
        Expr::Literal(l) => f(l),
        Expr::Agg { arg, .. } | Expr::Neg(arg) => visit_expr(arg, f),
        Expr::Func { args, .. } => args.iter_mut().for_each(|a| visit_expr(a, f)),
        Expr::Arith { lhs, rhs, .. } => {
            visit_expr(lhs, f);
            visit_expr(rhs, f);
        }
        Expr::Subquery(q) => visit_ast(q, f),
    }
}

fn visit_cond(c: &mut Cond, f: &mut impl FnMut(&mut Literal)) {
    match c {
        Cond::And(parts) | Cond::Or(parts) => parts.iter_mut().for_each(|p| visit_cond(p, f)),
        Cond::Not(inner) => visit_cond(inner, f),
        Cond::Cmp { lhs, rhs, .. } => {
            visit_expr(lhs, f);
            visit_expr(rhs, f);
        }
        Cond::Like { expr, pattern, .. } => {
            visit_expr(expr, f);
            visit_expr(pattern, f);
        }
        Cond::In { expr, set, .. } => {
            visit_expr(expr, f);
            match set {
                InSet::List(items) => items.iter_mut().for_each(|i| visit_expr(i, f)),
                InSet::Query(q) => visit_ast(q, f),
            }
        }
        Cond::Between { expr, low, high, .. } => {
            visit_expr(expr, f);
            visit_expr(low, f);
            visit_expr(high, f);
        }
        Cond::Exists { query, .. } => visit_ast(query, f),
        Cond::IsNull { expr, .. } => visit_expr(expr, f),
    }
}

/// Put a resolved tree in canonical form: set-valued clauses sorted (and
/// deduplicated where duplicates carry no meaning), AND/OR flattened,
/// comparisons oriented, commutative operands ordered. ORDER BY keeps its
/// order.
pub fn canonicalize(mut ast: SqlAst) -> SqlAst {
    ast.select = ast.select.into_iter().map(canon_expr).collect();
    ast.select.sort();
    ast.from = ast
        .from
        .into_iter()
        .map(|t| match t {
            TableRef::Derived(q) => TableRef::Derived(Box::new(canonicalize(*q))),
            t => t,
        })
        .collect();
    ast.from.sort();
    ast.join_conds = flatten(ast.join_conds.into_iter().map(canon_cond), true);
    ast.where_ = ast.where_.map(canon_cond);
    ast.group_by = ast.group_by.into_iter().map(canon_expr).collect();
    ast.group_by.sort();
    ast.group_by.dedup();
    ast.having = ast.having.map(canon_cond);
    ast.order_by = ast
        .order_by
        .into_iter()
        .map(|o| OrderTerm { expr: canon_expr(o.expr), dir: o.dir })
        .collect();
    ast.set_op = ast.set_op.map(|(op, rhs)| (op, Box::new(canonicalize(*rhs))));
    ast
}

fn canon_expr(e: Expr) -> Expr {
    match e {
        Expr::Agg { func, distinct, arg } => Expr::Agg { func, distinct, arg: Box::new(canon_expr(*arg)) },
        Expr::Func { name, args } => Expr::Func { name, args: args.into_iter().map(canon_expr).collect() },
        Expr::Arith { op, lhs, rhs } => {
            let (mut l, mut r) = (canon_expr(*lhs), canon_expr(*rhs));
            if op.is_commutative() && r < l {
                std::mem::swap(&mut l, &mut r);
            }
            Expr::Arith { op, lhs: Box::new(l), rhs: Box::new(r) }
        }
        Expr::Neg(inner) => Expr::Neg(Box::new(canon_expr(*inner))),
        Expr::Subquery(q) => Expr::Subquery(Box::new(canonicalize(*q))),
        e => e,
    }
}

/// Sorted, deduplicated children, with nested nodes of the same connective
/// spliced in.
fn flatten(parts: impl Iterator<Item = Cond>, and: bool) -> Vec<Cond> {
    let mut out = Vec::new();
    for p in parts {
        match p {
            Cond::And(inner) if and => out.extend(inner),
            Cond::Or(inner) if !and => out.extend(inner),
            p => out.push(p),
        }
    }
    out.sort();
    out.dedup();
    out
}

fn canon_cond(c: Cond) -> Cond {
    match c {
        Cond::And(parts) => {
            let mut v = flatten(parts.into_iter().map(canon_cond), true);
            if v.len() == 1 { v.pop().unwrap() } else { Cond::And(v) }
        }
        Cond::Or(parts) => {
            let mut v = flatten(parts.into_iter().map(canon_cond), false);
            if v.len() == 1 { v.pop().unwrap() } else { Cond::Or(v) }
        }
        Cond::Not(inner) => Cond::Not(Box::new(canon_cond(*inner))),
        Cond::Cmp { lhs, op, rhs } => {
            let (l, r) = (canon_expr(lhs), canon_expr(rhs));
            let swap = match (l.is_literal(), r.is_literal()) {
                (true, false) => true,
                (false, true) => false,
                // Symmetric operators: order the operands. Ordering
                // operators: prefer `<`/`<=`.
                _ => match op {
                    CmpOp::Eq | CmpOp::Ne => r < l,
                    CmpOp::Gt | CmpOp::Ge => true,
                    CmpOp::Lt | CmpOp::Le => false,
                },
            };
            if swap {
                Cond::Cmp { lhs: r, op: op.mirrored(), rhs: l }
            } else {
                Cond::Cmp { lhs: l, op, rhs: r }
            }
        }
        Cond::Like { expr, pattern, negated } => Cond::Like {
            expr: canon_expr(expr),
            pattern: canon_expr(pattern),
            negated,
        },
        Cond::In { expr, set, negated } => Cond::In {
            expr: canon_expr(expr),
            set: match set {
                InSet::List(items) => {
                    let mut v: Vec<Expr> = items.into_iter().map(canon_expr).collect();
                    v.sort();
                    v.dedup();
                    InSet::List(v)
                }
                InSet::Query(q) => InSet::Query(Box::new(canonicalize(*q))),
            },
            negated,
        },
        Cond::Between { expr, low, high, negated } => Cond::Between {
            expr: canon_expr(expr),
            low: canon_expr(low),
            high: canon_expr(high),
            negated,
        },
        Cond::Exists { query, negated } => Cond::Exists {
            query: Box::new(canonicalize(*query)),
            negated,
        },
        Cond::IsNull { expr, negated } => Cond::IsNull { expr: canon_expr(expr), negated },
    }
}
