//! The closed error taxonomy shared by the HTTP service and the CLI.

use std::fmt;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use shotgraph_core::archive::ArchiveError;
use shotgraph_core::feature_store::StoreError;
use shotgraph_core::graph::GraphError;
use shotgraph_core::indexer::IndexError;
use shotgraph_core::lexicon::LexiconError;
use shotgraph_core::query::QueryError;
use shotgraph_core::retrieval::RetrievalError;
use shotgraph_core::segmenter::SegmentError;
use shotgraph_core::vector::VectorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    NotFound,
    BadFormat,
    DimMismatch,
    ParseError,
    Conflict,
    InvalidArgument,
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 7] = [
        ErrorCode::NotFound,
        ErrorCode::BadFormat,
        ErrorCode::DimMismatch,
        ErrorCode::ParseError,
        ErrorCode::Conflict,
        ErrorCode::InvalidArgument,
        ErrorCode::Internal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::NotFound => "NOT_FOUND",
            ErrorCode::BadFormat => "BAD_FORMAT",
            ErrorCode::DimMismatch => "DIM_MISMATCH",
            ErrorCode::ParseError => "PARSE_ERROR",
            ErrorCode::Conflict => "CONFLICT",
            ErrorCode::InvalidArgument => "INVALID_ARGUMENT",
            ErrorCode::Internal => "INTERNAL",
        }
    }

    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::BadFormat | ErrorCode::ParseError | ErrorCode::InvalidArgument => StatusCode::BAD_REQUEST,
            ErrorCode::DimMismatch => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Conflict => StatusCode::CONFLICT,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        let mut message = message.into();
        if message.is_empty() {
            message = code.as_str().to_lowercase().replace('_', " ");
        }
        Self {
            code,
            message,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::InvalidArgument, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Internal, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

fn at_line(code: ErrorCode, message: String, line: usize) -> ApiError {
    ApiError::new(code, message).with_detail(json!({ "line": line }))
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let msg = e.to_string();
        match e {
            StoreError::MalformedHeader { line, .. }
            | StoreError::MalformedRecord { line, .. }
            | StoreError::NonIncreasingFrame { line, .. }
            | StoreError::StrideMismatch { line, .. }
            | StoreError::InvalidValue { line, .. } => at_line(ErrorCode::BadFormat, msg, line),
            StoreError::DimensionMismatch { line, expected, found, .. } => ApiError::new(ErrorCode::DimMismatch, msg)
                .with_detail(json!({ "line": line, "expected": expected, "found": found })),
            StoreError::EmptyStream | StoreError::InvalidFilmId(_) => ApiError::new(ErrorCode::BadFormat, msg),
            StoreError::DuplicateFilm(_) => ApiError::new(ErrorCode::Conflict, msg),
            StoreError::UnknownFilm(_) | StoreError::UnknownShot(_) => ApiError::not_found(msg),
            StoreError::Corrupt { .. } | StoreError::Io(_) => ApiError::internal(msg),
        }
    }
}

impl From<VectorError> for ApiError {
    fn from(e: VectorError) -> Self {
        let msg = e.to_string();
        match e {
            VectorError::DimensionMismatch { .. } => ApiError::new(ErrorCode::DimMismatch, msg),
            VectorError::ZeroVector => ApiError::invalid(msg),
        }
    }
}

impl From<SegmentError> for ApiError {
    fn from(e: SegmentError) -> Self {
        let msg = e.to_string();
        match e {
            SegmentError::Vector(v) => v.into(),
            SegmentError::BadWindow(_)
            | SegmentError::EmptyInput
            | SegmentError::BadThreshold(_)
            | SegmentError::BadBoundaries(_) => ApiError::invalid(msg),
            SegmentError::BadOrdinalFile { line, .. } => at_line(ErrorCode::BadFormat, msg, line),
        }
    }
}

impl From<GraphError> for ApiError {
    fn from(e: GraphError) -> Self {
        let msg = e.to_string();
        match e {
            GraphError::UnknownNode(_) | GraphError::UnknownEdge(_) => ApiError::not_found(msg),
            GraphError::UnsupportedValue { .. } | GraphError::InvalidName(_) => ApiError::invalid(msg),
            GraphError::BadDump { .. } => ApiError::internal(msg),
        }
    }
}

impl From<LexiconError> for ApiError {
    fn from(e: LexiconError) -> Self {
        let msg = e.to_string();
        match e {
            LexiconError::Malformed { line, .. }
            | LexiconError::DuplicateSynset { line, .. }
            | LexiconError::DanglingEndpoint { line, .. } => at_line(ErrorCode::BadFormat, msg, line),
            LexiconError::HypernymCycle(_) => ApiError::new(ErrorCode::BadFormat, msg),
            LexiconError::UnknownSynset(_) => ApiError::not_found(msg),
            LexiconError::BadDepth => ApiError::invalid(msg),
            LexiconError::Graph(g) => g.into(),
        }
    }
}

impl From<IndexError> for ApiError {
    fn from(e: IndexError) -> Self {
        let msg = e.to_string();
        match e {
            IndexError::EmptyShot
            | IndexError::UnknownClassSynset(_)
            | IndexError::UnresolvedLemma(_)
            | IndexError::BadMode(_)
            | IndexError::BadRelation(_) => ApiError::invalid(msg),
            IndexError::DimensionMismatch { expected, found } => {
                ApiError::new(ErrorCode::DimMismatch, msg).with_detail(json!({ "expected": expected, "found": found }))
            }
            IndexError::BadClassMap { line, .. } => at_line(ErrorCode::BadFormat, msg, line),
            IndexError::BoundaryMismatch { .. } => ApiError::new(ErrorCode::Conflict, msg),
            IndexError::Store(s) => s.into(),
            IndexError::Graph(g) => g.into(),
            IndexError::Io(_) => ApiError::internal(msg),
        }
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        let msg = e.to_string();
        let detail = match &e {
            QueryError::Lex { line, col, .. } => json!({ "line": line, "col": col }),
            QueryError::Syntax {
                line,
                col,
                expected,
                found,
            } => json!({ "line": line, "col": col, "expected": expected, "found": found }),
            QueryError::Unbound(v) | QueryError::VariableKind(v) => json!({ "variable": v }),
        };
        ApiError::new(ErrorCode::ParseError, msg).with_detail(detail)
    }
}

impl From<RetrievalError> for ApiError {
    fn from(e: RetrievalError) -> Self {
        let msg = e.to_string();
        match e {
            RetrievalError::Query(q) => q.into(),
            RetrievalError::Lexicon(l) => l.into(),
            RetrievalError::Store(s) => s.into(),
            RetrievalError::Vector(v) => v.into(),
            RetrievalError::Graph(g) => g.into(),
            RetrievalError::DimensionMismatch { expected, found } => {
                ApiError::new(ErrorCode::DimMismatch, msg).with_detail(json!({ "expected": expected, "found": found }))
            }
            RetrievalError::NoPositives | RetrievalError::BadParams(_) => ApiError::invalid(msg),
            RetrievalError::EmptyArchive => ApiError::new(ErrorCode::Conflict, msg),
            RetrievalError::BadModel { line, .. } => at_line(ErrorCode::BadFormat, msg, line),
            RetrievalError::Io(_) => ApiError::internal(msg),
        }
    }
}

impl From<ArchiveError> for ApiError {
    fn from(e: ArchiveError) -> Self {
        let msg = e.to_string();
        match e {
            ArchiveError::Store(x) => x.into(),
            ArchiveError::Segment(x) => x.into(),
            ArchiveError::Lexicon(x) => x.into(),
            ArchiveError::Index(x) => x.into(),
            ArchiveError::Retrieval(x) => x.into(),
            ArchiveError::Query(x) => x.into(),
            ArchiveError::Graph(x) => x.into(),
            ArchiveError::NotSegmented(_) | ArchiveError::NoClassMap => ApiError::new(ErrorCode::Conflict, msg),
            ArchiveError::UnknownClassifier(_) | ArchiveError::UnknownShot(_) => ApiError::not_found(msg),
            ArchiveError::Corrupt { .. } | ArchiveError::Io(_) => ApiError::internal(msg),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        match e.kind() {
            std::io::ErrorKind::NotFound => ApiError::not_found(e.to_string()),
            std::io::ErrorKind::InvalidData => ApiError::new(ErrorCode::BadFormat, e.to_string()),
            _ => ApiError::internal(e.to_string()),
        }
    }
}
