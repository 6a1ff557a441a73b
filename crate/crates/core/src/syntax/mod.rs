//! Textual languages: MMX for schemas, MEX for model expressions and
//! templates, MTX for transformation specifications, plus the deterministic
//! serializer for ground models and traces.

// Diagnostics only travel on the failure path.
#![allow(clippy::result_large_err)]

mod expr;
mod lexer;
mod lower;
mod mex;
mod mmx;
mod mtx;
mod serialize;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{evaluate_atomic, instantiate, ExprError, ParamEnv, ReductionGuard, Template};
use crate::schema::{SchemaError, SchemaSet, TypeSchema};
use crate::store::{ElemId, Store};
use crate::transform::{TransformError, TransformationSpec};

pub use expr::{eval_expr, Expr};
pub use mex::parse_mex;
pub use mmx::{parse_mmx, parse_mmx_with};
pub use mtx::{mtx_imports, parse_mtx};
pub use serialize::{serialize_model, serialize_trace};

/// Position of a token or node: 1-based line and column, length in chars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug)]
pub enum DiagKind {
    Syntax,
    UnknownTag,
    AttrOnRef,
    UnknownAttribute,
    /// No entity-typed property of the parent accepts the child.
    NoSlot,
    Schema(SchemaError),
    Transform(TransformError),
}

#[derive(Debug)]
pub struct Diagnostic {
    pub kind: DiagKind,
    pub span: SourceSpan,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: DiagKind, span: SourceSpan, message: impl Into<String>) -> Self {
        Diagnostic {
            kind,
            span,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

/// One or more diagnostics; never empty.
#[derive(Debug, Error)]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseError {
    pub fn first(&self) -> &Diagnostic {
        &self.diagnostics[0]
    }
}

impl From<Diagnostic> for ParseError {
    fn from(d: Diagnostic) -> Self {
        ParseError {
            diagnostics: vec![d],
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Text to parse and the name used in spans.
#[derive(Debug, Clone, Copy)]
pub struct Source<'a> {
    pub name: &'a str,
    pub text: &'a str,
}

impl<'a> Source<'a> {
    pub fn named(name: &'a str, text: &'a str) -> Self {
        Source { name, text }
    }
}

impl<'a> From<&'a str> for Source<'a> {
    fn from(text: &'a str) -> Self {
        Source {
            name: "<input>",
            text,
        }
    }
}

impl<'a> From<&'a String> for Source<'a> {
    fn from(text: &'a String) -> Self {
        Source::from(text.as_str())
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Eval(#[from] ExprError),
}

fn read(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads and validates a schema file.
pub fn load_schema(path: &Path, set: &SchemaSet) -> Result<Arc<TypeSchema>, LoadError> {
    let text = read(path)?;
    let name = path.display().to_string();
    Ok(Arc::new(parse_mmx_with(Source::named(&name, &text), set)?))
}

/// Reads a template file whose tags resolve against `schema`.
pub fn load_template(path: &Path, schema: &Arc<TypeSchema>) -> Result<Template, LoadError> {
    let text = read(path)?;
    let name = path.display().to_string();
    Ok(parse_mex(Source::named(&name, &text), schema)?)
}

/// Reads a transformation file. Schema files named by its `import`
/// declarations are loaded relative to it and added to `set`.
pub fn load_spec(path: &Path, set: &mut SchemaSet) -> Result<TransformationSpec, LoadError> {
    let text = read(path)?;
    let name = path.display().to_string();
    let src = Source::named(&name, &text);
    let dir = path.parent().unwrap_or(Path::new("."));
    for import in mtx_imports(src)? {
        let schema = load_schema(&dir.join(import), set)?;
        set.insert(schema);
    }
    Ok(parse_mtx(src, set)?)
}

/// Parses a model document and evaluates it at the root of a fresh store.
/// Returns the store and the top-level element, if the document has one.
pub fn read_model(
    src: Source<'_>,
    schema: &Arc<TypeSchema>,
    env: &ParamEnv,
    guard: &ReductionGuard,
) -> Result<(Store, Option<ElemId>), LoadError> {
    let template = Arc::new(parse_mex(src, schema)?);
    let node = instantiate(&template, env)?;
    let mut store = Store::new();
    let root = store.root();
    let produced = evaluate_atomic(&node, env, &mut store, root, guard)?;
    Ok((store, produced.first().copied()))
}

pub fn load_model(
    path: &Path,
    schema: &Arc<TypeSchema>,
) -> Result<(Store, Option<ElemId>), LoadError> {
    let text = read(path)?;
    let name = path.display().to_string();
    read_model(
        Source::named(&name, &text),
        schema,
        &ParamEnv::new(),
        &ReductionGuard::default(),
    )
}
