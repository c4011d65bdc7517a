//! A small pattern-matching query language over the property graph.
//!
//! ```text
//! MATCH (w:Wordnet {synset: "zebra"})<-[c:Category]-(s:Shot)
//! WHERE c.weight >= 0.3
//! RETURN s ORDER BY s.duration DESC LIMIT 10
//! ```
//!
//! [`parse`] turns text into a [`Query`], [`execute`] evaluates it and
//! [`explain`] reports the chosen plan.

pub mod ast;
mod exec;
pub mod lexer;
pub mod parser;

pub use ast::Query;
pub use exec::{execute, explain, BindingRow, Element, Explain, QueryResult};
pub use parser::parse;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("{line}:{col}: {message}")]
    Lex {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        line: usize,
        col: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("variable `{0}` is not bound by any pattern")]
    Unbound(String),
    #[error("variable `{0}` is used both as a node and as a relationship")]
    VariableKind(String),
}

/// Parse and run in one call.
pub fn run(text: &str, graph: &crate::graph::GraphStore) -> Result<QueryResult, QueryError> {
    execute(&parse(text)?, graph)
}
