//! Recursive-descent parser for the pattern query language.
//!
//! ```text
//! query   := match+ where? return
//! match   := MATCH pattern ("," pattern)*
//! pattern := node (edge node)*
//! node    := "(" var? (":" label)? props? ")"
//! edge    := "-" "[" var? (":" type)? "]" "->" | "<-" "[" … "]" "-" | "-->" | "<--"
//! props   := "{" key ":" literal ("," key ":" literal)* "}"
//! where   := WHERE expr          (OR < AND < NOT < comparison, parentheses group)
//! return  := RETURN var ("," var)* (ORDER BY var "." key (ASC|DESC)?)? (SKIP int)? (LIMIT int)?
//! ```

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Keyword, Tok, Token};
use super::QueryError;
use crate::graph::Value;

pub fn parse(text: &str) -> Result<Query, QueryError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { toks: tokens, pos: 0 };
    let q = p.query()?;
    check_semantics(&q)?;
    Ok(q)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> QueryError {
        let t = &self.toks[self.pos];
        QueryError::Syntax {
            line: t.line,
            col: t.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.to_string(),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), QueryError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{}`", tok.symbol())]))
        }
    }

    fn eat_kw(&mut self, kw: Keyword) -> bool {
        self.eat(&Tok::Kw(kw))
    }

    fn expect_kw(&mut self, kw: Keyword) -> Result<(), QueryError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(&[&kw.to_string()]))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, QueryError> {
        match self.peek() {
            Tok::Ident(_) => match self.bump() {
                Tok::Ident(s) => Ok(s),
                _ => unreachable!(),
            },
            _ => Err(self.error(&[what])),
        }
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        let mut matches = Vec::new();
        while self.eat_kw(Keyword::Match) {
            let mut patterns = vec![self.pattern()?];
            while self.eat(&Tok::Comma) {
                patterns.push(self.pattern()?);
            }
            matches.push(MatchClause { patterns });
        }
        if matches.is_empty() {
            return Err(self.error(&["MATCH"]));
        }

        let where_clause = if self.eat_kw(Keyword::Where) {
            Some(self.or_expr()?)
        } else {
            None
        };

        if !self.eat_kw(Keyword::Return) {
            let mut expected = vec!["RETURN", "MATCH"];
            if where_clause.is_none() {
                expected.insert(1, "WHERE");
            }
            return Err(self.error(&expected));
        }
        let mut returns = vec![self.ident("variable")?];
        while self.eat(&Tok::Comma) {
            returns.push(self.ident("variable")?);
        }

        let order_by = if self.eat_kw(Keyword::Order) {
            self.expect_kw(Keyword::By)?;
            let var = self.ident("variable")?;
            self.expect(Tok::Dot)?;
            let key = self.ident("property key")?;
            let descending = if self.eat_kw(Keyword::Desc) {
                true
            } else {
                self.eat_kw(Keyword::Asc);
                false
            };
            Some(OrderBy { var, key, descending })
        } else {
            None
        };
        let skip = if self.eat_kw(Keyword::Skip) {
            Some(self.count()?)
        } else {
            None
        };
        let limit = if self.eat_kw(Keyword::Limit) {
            Some(self.count()?)
        } else {
            None
        };
        if self.peek() != &Tok::Eof {
            return Err(self.error(&["end of input"]));
        }
        Ok(Query {
            matches,
            where_clause,
            returns,
            order_by,
            skip,
            limit,
        })
    }

    fn count(&mut self) -> Result<u64, QueryError> {
        match self.peek() {
            Tok::Int(digits) => {
                let n = digits.parse().map_err(|_| self.error(&["integer ≤ 2^64-1"]))?;
                self.bump();
                Ok(n)
            }
            _ => Err(self.error(&["non-negative integer"])),
        }
    }

    fn pattern(&mut self) -> Result<PathPattern, QueryError> {
        let start = self.node()?;
        let mut steps = Vec::new();
        while matches!(
            self.peek(),
            Tok::Minus | Tok::ArrowLeft | Tok::AnonRight | Tok::AnonLeft
        ) {
            let rel = self.rel()?;
            let node = self.node()?;
            steps.push((rel, node));
        }
        Ok(PathPattern { start, steps })
    }

    fn node(&mut self) -> Result<NodePattern, QueryError> {
        self.expect(Tok::LParen)?;
        let mut node = NodePattern::default();
        if let Tok::Ident(_) = self.peek() {
            node.var = Some(self.ident("variable")?);
        }
        if self.eat(&Tok::Colon) {
            node.label = Some(self.ident("label")?);
        }
        if self.eat(&Tok::LBrace) {
            loop {
                let key = self.ident("property key")?;
                self.expect(Tok::Colon)?;
                let value = self.literal()?;
                node.props.push((key, value));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RBrace)?;
        }
        if !self.eat(&Tok::RParen) {
            let mut expected = vec!["`)`"];
            if node.props.is_empty() {
                expected.insert(0, "`{`");
                if node.label.is_none() {
                    expected.insert(0, "`:`");
                }
            }
            return Err(self.error(&expected));
        }
        Ok(node)
    }

    fn rel_body(&mut self) -> Result<(Option<String>, Option<String>), QueryError> {
        self.expect(Tok::LBracket)?;
        let var = match self.peek() {
            Tok::Ident(_) => Some(self.ident("variable")?),
            _ => None,
        };
        let rel_type = if self.eat(&Tok::Colon) {
            Some(self.ident("relationship type")?)
        } else {
            None
        };
        self.expect(Tok::RBracket)?;
        Ok((var, rel_type))
    }

    fn rel(&mut self) -> Result<RelPattern, QueryError> {
        match self.bump() {
            Tok::AnonRight => Ok(RelPattern {
                var: None,
                rel_type: None,
                direction: RelDirection::Right,
            }),
            Tok::AnonLeft => Ok(RelPattern {
                var: None,
                rel_type: None,
                direction: RelDirection::Left,
            }),
            Tok::Minus => {
                let (var, rel_type) = self.rel_body()?;
                self.expect(Tok::ArrowRight)?;
                Ok(RelPattern {
                    var,
                    rel_type,
                    direction: RelDirection::Right,
                })
            }
            Tok::ArrowLeft => {
                let (var, rel_type) = self.rel_body()?;
                self.expect(Tok::Minus)?;
                Ok(RelPattern {
                    var,
                    rel_type,
                    direction: RelDirection::Left,
                })
            }
            _ => unreachable!("rel() is only entered on an edge token"),
        }
    }

    fn literal(&mut self) -> Result<Value, QueryError> {
        let negative = self.eat(&Tok::Minus);
        let value = match self.peek().clone() {
            Tok::Str(s) if !negative => Value::Str(s),
            Tok::Kw(Keyword::True) if !negative => Value::Bool(true),
            Tok::Kw(Keyword::False) if !negative => Value::Bool(false),
            Tok::Real(r) => Value::Real(if negative { -r } else { r }),
            Tok::Int(digits) => {
                let n: i128 = digits.parse().unwrap_or(i128::MAX);
                let n = if negative { -n } else { n };
                Value::Int(i64::try_from(n).map_err(|_| self.error(&["64-bit integer"]))?)
            }
            _ if negative => return Err(self.error(&["number"])),
            _ => return Err(self.error(&["literal"])),
        };
        self.bump();
        Ok(value)
    }

    fn or_expr(&mut self) -> Result<Expr, QueryError> {
        let mut e = self.and_expr()?;
        while self.eat_kw(Keyword::Or) {
            e = e.or(self.and_expr()?);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, QueryError> {
        let mut e = self.not_expr()?;
        while self.eat_kw(Keyword::And) {
            e = e.and(self.not_expr()?);
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> Result<Expr, QueryError> {
        if self.eat_kw(Keyword::Not) {
            return Ok(self.not_expr()?.negate());
        }
        if self.eat(&Tok::LParen) {
            let e = self.or_expr()?;
            self.expect(Tok::RParen)?;
            return Ok(e);
        }
        let left = self.operand()?;
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return Err(self.error(&["`=`", "`<>`", "`<`", "`<=`", "`>`", "`>=`"])),
        };
        self.bump();
        let right = self.operand()?;
        Ok(Expr::Compare { left, op, right })
    }

    fn operand(&mut self) -> Result<Operand, QueryError> {
        if let Tok::Ident(_) = self.peek() {
            let var = self.ident("variable")?;
            self.expect(Tok::Dot)?;
            let key = self.ident("property key")?;
            return Ok(Operand::Property { var, key });
        }
        match self.peek() {
            Tok::Str(_) | Tok::Int(_) | Tok::Real(_) | Tok::Minus | Tok::Kw(Keyword::True | Keyword::False) => {
                Ok(Operand::Literal(self.literal()?))
            }
            _ => Err(self.error(&["property reference", "literal", "`(`", "NOT"])),
        }
    }
}

fn check_semantics(q: &Query) -> Result<(), QueryError> {
    let mut node_vars = HashSet::new();
    let mut edge_vars = HashSet::new();
    for m in &q.matches {
        for p in &m.patterns {
            node_vars.extend(p.start.var.as_deref());
            for (rel, node) in &p.steps {
                edge_vars.extend(rel.var.as_deref());
                node_vars.extend(node.var.as_deref());
            }
        }
    }
    if let Some(v) = node_vars.intersection(&edge_vars).next() {
        return Err(QueryError::VariableKind(v.to_string()));
    }
    let bound = |v: &str| node_vars.contains(v) || edge_vars.contains(v);
    let mut referenced: Vec<&str> = q.returns.iter().map(String::as_str).collect();
    if let Some(w) = &q.where_clause {
        referenced.extend(w.variables());
    }
    if let Some(o) = &q.order_by {
        referenced.push(&o.var);
    }
    match referenced.into_iter().find(|v| !bound(v)) {
        Some(v) => Err(QueryError::Unbound(v.to_string())),
        None => Ok(()),
    }
}
