//! Recursive-descent parser producing an unresolved syntax tree: names are
//! kept as written and resolved against a schema afterwards.

use super::ast::{AggFunc, ArithOp, CmpOp, Direction, Literal, SetOp};
use super::lexer::{lex, Tok, Token};
use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RawExpr {
    Column { qualifier: Option<String>, name: String },
    Star { qualifier: Option<String> },
    Literal(Literal),
    Agg { func: AggFunc, distinct: bool, arg: Box<RawExpr> },
    Func { name: String, args: Vec<RawExpr> },
    Arith { op: ArithOp, lhs: Box<RawExpr>, rhs: Box<RawExpr> },
    Neg(Box<RawExpr>),
    Subquery(Box<RawQuery>),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RawInSet {
    List(Vec<RawExpr>),
    Query(Box<RawQuery>),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RawCond {
    And(Vec<RawCond>),
    Or(Vec<RawCond>),
    Not(Box<RawCond>),
    Cmp { lhs: RawExpr, op: CmpOp, rhs: RawExpr },
    Like { expr: RawExpr, pattern: RawExpr, negated: bool },
    In { expr: RawExpr, set: RawInSet, negated: bool },
    Between { expr: RawExpr, low: RawExpr, high: RawExpr, negated: bool },
    Exists { query: Box<RawQuery>, negated: bool },
    IsNull { expr: RawExpr, negated: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RawFactor {
    Table { name: String, alias: Option<String> },
    Derived { query: Box<RawQuery>, alias: Option<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RawSelect {
    pub distinct: bool,
    pub items: Vec<(RawExpr, Option<String>)>,
    pub from: Vec<RawFactor>,
    pub join_conds: Vec<RawCond>,
    pub where_: Option<RawCond>,
    pub group_by: Vec<RawExpr>,
    pub having: Option<RawCond>,
    pub order_by: Vec<(RawExpr, Direction)>,
    pub limit: Option<Literal>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RawQuery {
    pub select: RawSelect,
    pub set_op: Option<(SetOp, Box<RawQuery>)>,
}

/// Words that end an implicit alias position.
const RESERVED: &[&str] = &[
    "select", "from", "where", "group", "order", "by", "having", "limit", "offset", "join", "inner", "left",
    "right", "full", "outer", "cross", "natural", "on", "using", "as", "and", "or", "not", "in", "like", "glob",
    "between", "exists", "is", "null", "union", "intersect", "except", "asc", "desc", "distinct", "all",
    "case", "when", "then", "else", "end", "with", "over",
];

pub(crate) fn parse(sql: &str) -> Result<RawQuery, SqlError> {
    let tokens = lex(sql)?;
    let mut p = Parser { tokens, pos: 0 };
    if p.peek_kw("with") {
        return Err(SqlError::Unsupported("WITH (common table expression)".into()));
    }
    let q = p.query()?;
    if p.eat_sym(";") && !p.at_eof() {
        return Err(SqlError::Unsupported("multiple statements".into()));
    }
    if !p.at_eof() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(q)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> SqlError {
        let t = &self.tokens[self.pos];
        let found = match &t.tok {
            Tok::Ident { text, .. } | Tok::Number(text) => format!("`{text}`"),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        };
        SqlError::Syntax {
            offset: t.offset,
            message: format!("{}; found {found}", message.into()),
        }
    }

    fn kw_at(&self, k: usize, kw: &str) -> bool {
        matches!(self.peek_at(k), Tok::Ident { text, quoted: false } if text.eq_ignore_ascii_case(kw))
    }

    fn peek_kw(&self, kw: &str) -> bool {
        self.kw_at(0, kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected {}", kw.to_uppercase())))
        }
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.peek_sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SqlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`")))
        }
    }

    /// An identifier that is not a reserved word.
    fn name(&mut self) -> Result<String, SqlError> {
        match self.peek().clone() {
            Tok::Ident { text, quoted } if quoted || !is_reserved(&text) => {
                self.advance();
                Ok(text)
            }
            _ => Err(self.error("expected a name")),
        }
    }

    fn optional_alias(&mut self) -> Result<Option<String>, SqlError> {
        if self.eat_kw("as") {
            return match self.peek().clone() {
                Tok::Str(s) => {
                    self.advance();
                    Ok(Some(s))
                }
                _ => self.name().map(Some),
            };
        }
        match self.peek() {
            Tok::Ident { text, quoted } if *quoted || !is_reserved(text) => self.name().map(Some),
            _ => Ok(None),
        }
    }

    fn query(&mut self) -> Result<RawQuery, SqlError> {
        let select = self.select()?;
        let op = if self.eat_kw("union") {
            Some(if self.eat_kw("all") { SetOp::UnionAll } else { SetOp::Union })
        } else if self.eat_kw("intersect") {
            Some(SetOp::Intersect)
        } else if self.eat_kw("except") {
            Some(SetOp::Except)
        } else {
            None
        };
        let set_op = match op {
            Some(op) => Some((op, Box::new(self.query()?))),
            None => None,
        };
        Ok(RawQuery { select, set_op })
    }

    fn select(&mut self) -> Result<RawSelect, SqlError> {
        self.expect_kw("select")?;
        let distinct = self.eat_kw("distinct");
        if !distinct {
            self.eat_kw("all");
        }
        let mut items = Vec::new();
        loop {
            let e = self.expr()?;
            let alias = self.optional_alias()?;
            items.push((e, alias));
            if !self.eat_sym(",") {
                break;
            }
        }
        let (from, join_conds) = if self.eat_kw("from") { self.from()? } else { (Vec::new(), Vec::new()) };
        let where_ = if self.eat_kw("where") { Some(self.cond()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_kw("group") {
            self.expect_kw("by")?;
            loop {
                group_by.push(self.expr()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let having = if self.eat_kw("having") { Some(self.cond()?) } else { None };
        let mut order_by = Vec::new();
        if self.eat_kw("order") {
            self.expect_kw("by")?;
            loop {
                let e = self.expr()?;
                let dir = if self.eat_kw("desc") {
                    Direction::Desc
                } else {
                    self.eat_kw("asc");
                    Direction::Asc
                };
                order_by.push((e, dir));
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let limit = if self.eat_kw("limit") {
            let value = match self.peek().clone() {
                Tok::Number(n) => {
                    self.advance();
                    Literal::Number(n)
                }
                _ => return Err(self.error("expected a number after LIMIT")),
            };
            if self.peek_kw("offset") || self.peek_sym(",") {
                return Err(SqlError::Unsupported("LIMIT with OFFSET".into()));
            }
            Some(value)
        } else {
            None
        };
        Ok(RawSelect {
            distinct,
            items,
            from,
            join_conds,
            where_,
            group_by,
            having,
            order_by,
            limit,
        })
    }

    fn from(&mut self) -> Result<(Vec<RawFactor>, Vec<RawCond>), SqlError> {
        let mut factors = vec![self.factor()?];
        let mut conds = Vec::new();
        loop {
            if self.eat_sym(",") {
                factors.push(self.factor()?);
                continue;
            }
            if self.peek_kw("natural") {
                return Err(SqlError::Unsupported("NATURAL JOIN".into()));
            }
            if self.peek_kw("right") || self.peek_kw("full") {
                return Err(SqlError::Unsupported("RIGHT/FULL JOIN".into()));
            }
            let joined = if self.eat_kw("join") {
                true
            } else if self.eat_kw("inner") || self.eat_kw("cross") {
                self.expect_kw("join")?;
                true
            } else if self.eat_kw("left") {
                self.eat_kw("outer");
                self.expect_kw("join")?;
                true
            } else {
                false
            };
            if !joined {
                break;
            }
            factors.push(self.factor()?);
            if self.eat_kw("on") {
                conds.push(self.cond()?);
            } else if self.peek_kw("using") {
                return Err(SqlError::Unsupported("JOIN ... USING".into()));
            }
        }
        Ok((factors, conds))
    }

    fn factor(&mut self) -> Result<RawFactor, SqlError> {
        if self.eat_sym("(") {
            if !self.peek_kw("select") {
                return Err(SqlError::Unsupported("parenthesised join".into()));
            }
            let query = Box::new(self.query()?);
            self.expect_sym(")")?;
            let alias = self.optional_alias()?;
            return Ok(RawFactor::Derived { query, alias });
        }
        let name = self.name()?;
        let alias = self.optional_alias()?;
        Ok(RawFactor::Table { name, alias })
    }

    fn cond(&mut self) -> Result<RawCond, SqlError> {
        let mut parts = vec![self.and_cond()?];
        while self.eat_kw("or") {
            parts.push(self.and_cond()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { RawCond::Or(parts) })
    }

    fn and_cond(&mut self) -> Result<RawCond, SqlError> {
        let mut parts = vec![self.not_cond()?];
        while self.eat_kw("and") {
            parts.push(self.not_cond()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { RawCond::And(parts) })
    }

    fn not_cond(&mut self) -> Result<RawCond, SqlError> {
        if self.peek_kw("not") && !self.kw_at(1, "exists") {
            self.advance();
            return Ok(RawCond::Not(Box::new(self.not_cond()?)));
        }
        self.predicate()
    }

    fn predicate(&mut self) -> Result<RawCond, SqlError> {
        let negated_exists = self.peek_kw("not") && self.kw_at(1, "exists");
        if negated_exists || self.peek_kw("exists") {
            if negated_exists {
                self.advance();
            }
            self.advance();
            self.expect_sym("(")?;
            let query = Box::new(self.query()?);
            self.expect_sym(")")?;
            return Ok(RawCond::Exists { query, negated: negated_exists });
        }
        if self.peek_sym("(") && !self.kw_at(1, "select") {
            // Either a parenthesised condition or an expression operand.
            let save = self.pos;
            match self.expr_predicate() {
                Ok(c) => return Ok(c),
                Err(first) => {
                    self.pos = save + 1;
                    let inner = self.cond();
                    match inner {
                        Ok(c) if self.eat_sym(")") => return Ok(c),
                        _ => {
                            self.pos = save;
                            return Err(first);
                        }
                    }
                }
            }
        }
        self.expr_predicate()
    }

    fn expr_predicate(&mut self) -> Result<RawCond, SqlError> {
        let expr = self.expr()?;
        if self.eat_kw("is") {
            let negated = self.eat_kw("not");
            self.expect_kw("null")?;
            return Ok(RawCond::IsNull { expr, negated });
        }
        let negated = self.eat_kw("not");
        if self.eat_kw("like") {
            let pattern = self.expr()?;
            return Ok(RawCond::Like { expr, pattern, negated });
        }
        if self.peek_kw("glob") || self.peek_kw("regexp") || self.peek_kw("match") {
            return Err(SqlError::Unsupported("GLOB/REGEXP/MATCH".into()));
        }
        if self.eat_kw("in") {
            self.expect_sym("(")?;
            let set = if self.peek_kw("select") {
                RawInSet::Query(Box::new(self.query()?))
            } else {
                let mut items = vec![self.expr()?];
                while self.eat_sym(",") {
                    items.push(self.expr()?);
                }
                RawInSet::List(items)
            };
            self.expect_sym(")")?;
            return Ok(RawCond::In { expr, set, negated });
        }
        if self.eat_kw("between") {
            let low = self.expr()?;
            self.expect_kw("and")?;
            let high = self.expr()?;
            return Ok(RawCond::Between { expr, low, high, negated });
        }
        if negated {
            return Err(self.error("expected LIKE, IN or BETWEEN after NOT"));
        }
        let op = match self.peek() {
            Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return Err(self.error("expected a comparison")),
        };
        self.advance();
        let rhs = self.expr()?;
        Ok(RawCond::Cmp { lhs: expr, op, rhs })
    }

    fn expr(&mut self) -> Result<RawExpr, SqlError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => ArithOp::Add,
                Tok::Sym("-") => ArithOp::Sub,
                Tok::Sym("||") => ArithOp::Concat,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = RawExpr::Arith { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn term(&mut self) -> Result<RawExpr, SqlError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => ArithOp::Mul,
                Tok::Sym("/") => ArithOp::Div,
                Tok::Sym("%") => ArithOp::Mod,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = RawExpr::Arith { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn unary(&mut self) -> Result<RawExpr, SqlError> {
        if self.eat_sym("-") {
            return Ok(match self.unary()? {
                RawExpr::Literal(Literal::Number(n)) => RawExpr::Literal(Literal::Number(format!("-{n}"))),
                e => RawExpr::Neg(Box::new(e)),
            });
        }
        if self.eat_sym("+") {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<RawExpr, SqlError> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.advance();
                Ok(RawExpr::Literal(Literal::Number(n)))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(RawExpr::Literal(Literal::Str(s)))
            }
            Tok::Sym("*") => {
                self.advance();
                Ok(RawExpr::Star { qualifier: None })
            }
            Tok::Sym("(") => {
                self.advance();
                let e = if self.peek_kw("select") {
                    RawExpr::Subquery(Box::new(self.query()?))
                } else {
                    self.expr()?
                };
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident { text, quoted } => {
                if !quoted {
                    let lower = text.to_ascii_lowercase();
                    match lower.as_str() {
                        "null" => {
                            self.advance();
                            return Ok(RawExpr::Literal(Literal::Null));
                        }
                        "case" => return Err(SqlError::Unsupported("CASE expression".into())),
                        "cast" => return Err(SqlError::Unsupported("CAST expression".into())),
                        _ if matches!(self.peek_at(1), Tok::Sym("(")) => return self.call(lower),
                        _ if is_reserved(&lower) => return Err(self.error("expected an expression")),
                        _ => {}
                    }
                }
                self.advance();
                if self.eat_sym(".") {
                    if self.eat_sym("*") {
                        return Ok(RawExpr::Star { qualifier: Some(text) });
                    }
                    let name = self.name()?;
                    return Ok(RawExpr::Column { qualifier: Some(text), name });
                }
                Ok(RawExpr::Column { qualifier: None, name: text })
            }
            _ => Err(self.error("expected an expression")),
        }
    }

    fn call(&mut self, name: String) -> Result<RawExpr, SqlError> {
        self.advance();
        self.expect_sym("(")?;
        let func = match name.as_str() {
            "count" => Some(AggFunc::Count),
            "sum" => Some(AggFunc::Sum),
            "avg" => Some(AggFunc::Avg),
            "min" => Some(AggFunc::Min),
            "max" => Some(AggFunc::Max),
            _ => None,
        };
        let distinct = self.eat_kw("distinct");
        let mut args = Vec::new();
        if !self.peek_sym(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        if self.peek_kw("over") || self.peek_kw("filter") {
            return Err(SqlError::Unsupported("window function".into()));
        }
        match func {
            // min/max with several arguments are the scalar functions.
            Some(func) if args.len() == 1 => Ok(RawExpr::Agg {
                func,
                distinct,
                arg: Box::new(args.pop().unwrap()),
            }),
            Some(AggFunc::Min | AggFunc::Max) if args.len() > 1 && !distinct => Ok(RawExpr::Func { name, args }),
            Some(_) => Err(self.error(format!("`{name}` takes one argument"))),
            None if distinct => Err(SqlError::Unsupported(format!("DISTINCT in `{name}`"))),
            None => Ok(RawExpr::Func { name, args }),
        }
    }
}

fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(q: Option<&str>, n: &str) -> RawExpr {
        RawExpr::Column { qualifier: q.map(str::to_string), name: n.to_string() }
    }

    #[test]
    fn simple_select() {
        let q = parse("SELECT count(*) FROM head WHERE head.age > 56").unwrap();
        let s = &q.select;
        assert_eq!(
            s.items,
            vec![(
                RawExpr::Agg {
                    func: AggFunc::Count,
                    distinct: false,
                    arg: Box::new(RawExpr::Star { qualifier: None })
                },
                None
            )]
        );
        assert_eq!(s.from, vec![RawFactor::Table { name: "head".into(), alias: None }]);
        assert_eq!(
            s.where_,
            Some(RawCond::Cmp {
                lhs: col(Some("head"), "age"),
                op: CmpOp::Gt,
                rhs: RawExpr::Literal(Literal::Number("56".into()))
            })
        );
    }

    #[test]
    fn joins_aliases_and_clauses() {
        let q = parse(
            "select T1.name , count(*) from a as T1 join b T2 on T1.id = T2.aid \
             group by T1.name having count(*) >= 2 order by count(*) desc limit 3",
        )
        .unwrap();
        let s = &q.select;
        assert_eq!(s.from.len(), 2);
        assert_eq!(s.from[1], RawFactor::Table { name: "b".into(), alias: Some("T2".into()) });
        assert_eq!(s.join_conds.len(), 1);
        assert_eq!(s.group_by, vec![col(Some("T1"), "name")]);
        assert_eq!(s.order_by[0].1, Direction::Desc);
        assert_eq!(s.limit, Some(Literal::Number("3".into())));
    }

    #[test]
    fn parenthesised_conditions_and_operands() {
        let q = parse("select a from t where (a = 1 or b = 2) and (a + b) > 3").unwrap();
        match q.select.where_.unwrap() {
            RawCond::And(parts) => {
                assert!(matches!(parts[0], RawCond::Or(_)));
                assert!(matches!(parts[1], RawCond::Cmp { op: CmpOp::Gt, .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn predicates() {
        let q = parse(
            "select a from t where a not in (select b from s) and c between 1 and 5 \
             and d like '%x%' and e is not null and not exists (select * from s)",
        )
        .unwrap();
        let RawCond::And(parts) = q.select.where_.unwrap() else { panic!() };
        assert!(matches!(parts[0], RawCond::In { negated: true, set: RawInSet::Query(_), .. }));
        assert!(matches!(parts[1], RawCond::Between { negated: false, .. }));
        assert!(matches!(parts[2], RawCond::Like { negated: false, .. }));
        assert!(matches!(parts[3], RawCond::IsNull { negated: true, .. }));
        assert!(matches!(parts[4], RawCond::Exists { negated: true, .. }));
    }

    #[test]
    fn set_operations_chain_right() {
        let q = parse("select a from t union select a from s except select a from r").unwrap();
        let (op, rhs) = q.set_op.unwrap();
        assert_eq!(op, SetOp::Union);
        assert_eq!(rhs.set_op.unwrap().0, SetOp::Except);
    }

    #[test]
    fn negative_literal_folds() {
        let q = parse("select a from t where a > -5").unwrap();
        assert!(matches!(
            q.select.where_,
            Some(RawCond::Cmp { rhs: RawExpr::Literal(Literal::Number(ref n)), .. }) if n == "-5"
        ));
    }

    #[test]
    fn unsupported_constructs_are_named() {
        let cases = [
            ("with x as (select 1) select * from x", "WITH"),
            ("select a from t; select b from s", "multiple statements"),
            ("select rank() over (order by a) from t", "window"),
            ("select case when a then 1 end from t", "CASE"),
            ("select a from t limit 1 offset 2", "OFFSET"),
        ];
        for (sql, needle) in cases {
            match parse(sql) {
                Err(SqlError::Unsupported(what)) => assert!(what.contains(needle), "{sql}: {what}"),
                other => panic!("{sql}: {other:?}"),
            }
        }
    }

    #[test]
    fn syntax_errors_have_offsets() {
        match parse("select from t") {
            Err(SqlError::Syntax { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("select a from t where"), Err(SqlError::Syntax { offset: 21, .. })));
        assert!(parse("select a from t;").is_ok());
    }
}
