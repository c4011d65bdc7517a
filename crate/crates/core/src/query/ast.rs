use std::fmt::{self, Display, Formatter, Write as _};

use crate::graph::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub matches: Vec<MatchClause>,
    pub where_clause: Option<Expr>,
    pub returns: Vec<String>,
    pub order_by: Option<OrderBy>,
    pub skip: Option<u64>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchClause {
    pub patterns: Vec<PathPattern>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPattern {
    pub start: NodePattern,
    pub steps: Vec<(RelPattern, NodePattern)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodePattern {
    pub var: Option<String>,
    pub label: Option<String>,
    pub props: Vec<(String, Value)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelDirection {
    /// `-[...]->`: from the left node to the right node.
    Right,
    /// `<-[...]-`: from the right node to the left node.
    Left,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelPattern {
    pub var: Option<String>,
    pub rel_type: Option<String>,
    pub direction: RelDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Property { var: String, key: String },
    Literal(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Or(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Compare {
        left: Operand,
        op: CmpOp,
        right: Operand,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderBy {
    pub var: String,
    pub key: String,
    pub descending: bool,
}

impl Expr {
    pub fn and(self, other: Expr) -> Expr {
        Expr::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Expr) -> Expr {
        Expr::Or(Box::new(self), Box::new(other))
    }

    pub fn negate(self) -> Expr {
        Expr::Not(Box::new(self))
    }

    /// Variables referenced anywhere in the expression.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Or(a, b) | Expr::And(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Not(e) => e.collect_vars(out),
            Expr::Compare { left, right, .. } => {
                for side in [left, right] {
                    if let Operand::Property { var, .. } = side {
                        out.push(var);
                    }
                }
            }
        }
    }

    /// Split a conjunction into its top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            other => vec![other],
        }
    }
}

impl Query {
    /// Every variable name bound by a pattern, in order of first appearance.
    pub fn bound_variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        fn push<'a>(out: &mut Vec<&'a str>, v: &'a Option<String>) {
            if let Some(v) = v {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
        }
        for m in &self.matches {
            for p in &m.patterns {
                push(&mut out, &p.start.var);
                for (rel, node) in &p.steps {
                    push(&mut out, &rel.var);
                    push(&mut out, &node.var);
                }
            }
        }
        out
    }
}

impl Display for CmpOp {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        })
    }
}

pub(crate) fn write_literal(f: &mut impl fmt::Write, v: &Value) -> fmt::Result {
    match v {
        Value::Str(s) => {
            f.write_char('"')?;
            for c in s.chars() {
                match c {
                    '"' => f.write_str("\\\"")?,
                    '\\' => f.write_str("\\\\")?,
                    '\n' => f.write_str("\\n")?,
                    '\t' => f.write_str("\\t")?,
                    '\r' => f.write_str("\\r")?,
                    c => f.write_char(c)?,
                }
            }
            f.write_char('"')
        }
        Value::Real(r) => write!(f, "{r:?}"),
        Value::Int(i) => write!(f, "{i}"),
        Value::Bool(b) => f.write_str(if *b { "true" } else { "false" }),
    }
}

impl Display for Operand {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Property { var, key } => write!(f, "{var}.{key}"),
            Operand::Literal(v) => write_literal(f, v),
        }
    }
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 0,
            Expr::And(..) => 1,
            Expr::Not(_) => 2,
            Expr::Compare { .. } => 3,
        }
    }

    fn fmt_at(&self, f: &mut Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_char('(')?;
            self.fmt_at(f, 0)?;
            return f.write_char(')');
        }
        match self {
            Expr::Or(a, b) => {
                a.fmt_at(f, 0)?;
                f.write_str(" OR ")?;
                b.fmt_at(f, 1)
            }
            Expr::And(a, b) => {
                a.fmt_at(f, 1)?;
                f.write_str(" AND ")?;
                b.fmt_at(f, 2)
            }
            Expr::Not(e) => {
                f.write_str("NOT ")?;
                e.fmt_at(f, 2)
            }
            Expr::Compare { left, op, right } => write!(f, "{left} {op} {right}"),
        }
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

impl Display for NodePattern {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_char('(')?;
        if let Some(v) = &self.var {
            f.write_str(v)?;
        }
        if let Some(l) = &self.label {
            write!(f, ":{l}")?;
        }
        if !self.props.is_empty() {
            if self.var.is_some() || self.label.is_some() {
                f.write_char(' ')?;
            }
            f.write_char('{')?;
            for (i, (k, v)) in self.props.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{k}: ")?;
                write_literal(f, v)?;
            }
            f.write_char('}')?;
        }
        f.write_char(')')
    }
}

impl Display for RelPattern {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.var.is_none() && self.rel_type.is_none() {
            return f.write_str(match self.direction {
                RelDirection::Right => "-->",
                RelDirection::Left => "<--",
            });
        }
        let mut inner = String::new();
        if let Some(v) = &self.var {
            inner.push_str(v);
        }
        if let Some(t) = &self.rel_type {
            inner.push(':');
            inner.push_str(t);
        }
        match self.direction {
            RelDirection::Right => write!(f, "-[{inner}]->"),
            RelDirection::Left => write!(f, "<-[{inner}]-"),
        }
    }
}

impl Display for PathPattern {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.start)?;
        for (rel, node) in &self.steps {
            write!(f, " {rel} {node}")?;
        }
        Ok(())
    }
}

impl Display for Query {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for m in &self.matches {
            f.write_str("MATCH ")?;
            for (i, p) in m.patterns.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{p}")?;
            }
            f.write_char('\n')?;
        }
        if let Some(w) = &self.where_clause {
            writeln!(f, "WHERE {w}")?;
        }
        write!(f, "RETURN {}", self.returns.join(", "))?;
        if let Some(o) = &self.order_by {
            write!(
                f,
                " ORDER BY {}.{} {}",
                o.var,
                o.key,
                if o.descending { "DESC" } else { "ASC" }
            )?;
        }
        if let Some(s) = self.skip {
            write!(f, " SKIP {s}")?;
        }
        if let Some(l) = self.limit {
            write!(f, " LIMIT {l}")?;
        }
        Ok(())
    }
}
