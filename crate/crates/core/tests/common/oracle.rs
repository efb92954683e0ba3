//! Brute-force exact-match oracle. It compares resolved but unordered trees
//! directly: multisets by exhaustive matching, sets by mutual inclusion,
//! comparisons in both orientations. It never sorts or rewrites a tree, so it
//! shares no logic with the library's canonical form.

use semfence::eval::ast::*;

pub struct Oracle {
    pub compare_values: bool,
}

impl Oracle {
    pub fn ast(&self, a: &SqlAst, b: &SqlAst) -> bool {
        a.distinct == b.distinct
            && multiset(&a.select, &b.select, |x, y| self.expr(x, y))
            && multiset(&a.from, &b.from, |x, y| self.table(x, y))
            && set(&conjuncts_of(&a.join_conds), &conjuncts_of(&b.join_conds), |x, y| self.leaf(x, y))
            && self.opt_cond(&a.where_, &b.where_)
            && set(&a.group_by, &b.group_by, |x, y| self.expr(x, y))
            && self.opt_cond(&a.having, &b.having)
            && a.order_by.len() == b.order_by.len()
            && a.order_by.iter().zip(&b.order_by).all(|(x, y)| x.dir == y.dir && self.expr(&x.expr, &y.expr))
            && match (&a.limit, &b.limit) {
                (None, None) => true,
                (Some(x), Some(y)) => self.literal(x, y),
                _ => false,
            }
            && match (&a.set_op, &b.set_op) {
                (None, None) => true,
                (Some((o1, r1)), Some((o2, r2))) => o1 == o2 && self.ast(r1, r2),
                _ => false,
            }
    }

    fn literal(&self, a: &Literal, b: &Literal) -> bool {
        !self.compare_values || a == b
    }

    fn table(&self, a: &TableRef, b: &TableRef) -> bool {
        match (a, b) {
            (TableRef::Table(x), TableRef::Table(y)) => x == y,
            (TableRef::Derived(x), TableRef::Derived(y)) => self.ast(x, y),
            _ => false,
        }
    }

    fn expr(&self, a: &Expr, b: &Expr) -> bool {
        match (a, b) {
            (Expr::Column(x), Expr::Column(y)) => x == y,
            (Expr::Literal(x), Expr::Literal(y)) => self.literal(x, y),
            (
                Expr::Agg { func: f1, distinct: d1, arg: a1 },
                Expr::Agg { func: f2, distinct: d2, arg: a2 },
            ) => f1 == f2 && d1 == d2 && self.expr(a1, a2),
            (Expr::Func { name: n1, args: a1 }, Expr::Func { name: n2, args: a2 }) => {
                n1 == n2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| self.expr(x, y))
            }
            (Expr::Arith { op: o1, lhs: l1, rhs: r1 }, Expr::Arith { op: o2, lhs: l2, rhs: r2 }) => {
                let commutative = matches!(o1, ArithOp::Add | ArithOp::Mul);
                o1 == o2
                    && ((self.expr(l1, l2) && self.expr(r1, r2))
                        || (commutative && self.expr(l1, r2) && self.expr(r1, l2)))
            }
            (Expr::Neg(x), Expr::Neg(y)) => self.expr(x, y),
            (Expr::Subquery(x), Expr::Subquery(y)) => self.ast(x, y),
            _ => false,
        }
    }

    fn opt_cond(&self, a: &Option<Cond>, b: &Option<Cond>) -> bool {
        match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) => self.cond(x, y),
            _ => false,
        }
    }

    /// Compare as sets of conjuncts; a single conjunct is compared as a leaf.
    fn cond(&self, a: &Cond, b: &Cond) -> bool {
        set(&conjuncts(a), &conjuncts(b), |x, y| self.leaf(x, y))
    }

    fn leaf(&self, a: &Cond, b: &Cond) -> bool {
        match (a, b) {
            (Cond::Or(_), _) | (_, Cond::Or(_)) => set(&disjuncts(a), &disjuncts(b), |x, y| self.cond(x, y)),
            (Cond::And(_), _) | (_, Cond::And(_)) => self.cond(a, b),
            (Cond::Not(x), Cond::Not(y)) => self.cond(x, y),
            (Cond::Cmp { lhs: l1, op: o1, rhs: r1 }, Cond::Cmp { lhs: l2, op: o2, rhs: r2 }) => {
                (o1 == o2 && self.expr(l1, l2) && self.expr(r1, r2))
                    || (*o1 == mirror(*o2) && self.expr(l1, r2) && self.expr(r1, l2))
            }
            (
                Cond::Like { expr: e1, pattern: p1, negated: n1 },
                Cond::Like { expr: e2, pattern: p2, negated: n2 },
            ) => n1 == n2 && self.expr(e1, e2) && self.expr(p1, p2),
            (Cond::In { expr: e1, set: s1, negated: n1 }, Cond::In { expr: e2, set: s2, negated: n2 }) => {
                n1 == n2
                    && self.expr(e1, e2)
                    && match (s1, s2) {
                        (InSet::List(x), InSet::List(y)) => set(x, y, |p, q| self.expr(p, q)),
                        (InSet::Query(x), InSet::Query(y)) => self.ast(x, y),
                        _ => false,
                    }
            }
            (
                Cond::Between { expr: e1, low: lo1, high: hi1, negated: n1 },
                Cond::Between { expr: e2, low: lo2, high: hi2, negated: n2 },
            ) => n1 == n2 && self.expr(e1, e2) && self.expr(lo1, lo2) && self.expr(hi1, hi2),
            (Cond::Exists { query: q1, negated: n1 }, Cond::Exists { query: q2, negated: n2 }) => {
                n1 == n2 && self.ast(q1, q2)
            }
            (Cond::IsNull { expr: e1, negated: n1 }, Cond::IsNull { expr: e2, negated: n2 }) => {
                n1 == n2 && self.expr(e1, e2)
            }
            _ => false,
        }
    }
}

fn mirror(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Ge => CmpOp::Le,
        op => op,
    }
}

fn conjuncts(c: &Cond) -> Vec<&Cond> {
    match c {
        Cond::And(parts) => parts.iter().flat_map(conjuncts).collect(),
        c => vec![c],
    }
}

fn conjuncts_of(cs: &[Cond]) -> Vec<&Cond> {
    cs.iter().flat_map(conjuncts).collect()
}

fn disjuncts(c: &Cond) -> Vec<&Cond> {
    match c {
        Cond::Or(parts) => parts.iter().flat_map(disjuncts).collect(),
        c => vec![c],
    }
}

/// Every element of each side has an equal element on the other side.
fn set<T>(a: &[T], b: &[T], eq: impl Fn(&T, &T) -> bool) -> bool {
    a.iter().all(|x| b.iter().any(|y| eq(x, y))) && b.iter().all(|y| a.iter().any(|x| eq(x, y)))
}

/// Some bijection pairs every element with an equal one, found by
/// exhaustive search.
fn multiset<T>(a: &[T], b: &[T], eq: impl Fn(&T, &T) -> bool + Copy) -> bool {
    fn go<T>(a: &[T], b: &[T], used: &mut [bool], eq: impl Fn(&T, &T) -> bool + Copy) -> bool {
        let Some((first, rest)) = a.split_first() else {
            return true;
        };
        for j in 0..b.len() {
            if !used[j] && eq(first, &b[j]) {
                used[j] = true;
                if go(rest, b, used, eq) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    a.len() == b.len() && go(a, b, &mut vec![false; b.len()], eq)
}
