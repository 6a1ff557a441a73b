//! Command-line driver. Exit codes: 0 success, 1 domain error (violations
//! or failed evaluation), 2 usage, I/O or parse error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::expr::{
    evaluate_atomic, instantiate, ElemHandle, ExprError, ParamDecl, ParamEnv, ParamKind,
    ReductionGuard, Template, Value,
};
use crate::schema::{conforms_deep, SchemaSet, TypeSchema};
use crate::store::{ElemId, Store};
use crate::syntax::{
    load_model, load_schema, load_spec, load_template, parse_mmx_with, serialize_model,
    serialize_trace, LoadError, Source,
};
use crate::transform::{check_trace, execute, trace_schema, TraceModel, TransformError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "modexpr",
    version,
    about = "Evaluate model expressions and run model transformations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a schema.
    CheckSchema {
        schema: PathBuf,
        /// Schemas referenced by `ref(S::T)` types.
        #[arg(long = "import")]
        imports: Vec<PathBuf>,
    },
    /// Evaluate a model expression into a ground model.
    Eval {
        expr: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Template argument as `name=value`.
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Maximum nesting of computation steps.
        #[arg(long, default_value_t = ReductionGuard::default().max_depth)]
        kappa_depth: usize,
    },
    /// Check a model against its schema.
    Conform {
        model: PathBuf,
        #[arg(long)]
        schema: PathBuf,
    },
    /// Execute a transformation on a source model.
    Transform {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        source: PathBuf,
        /// Source schema, for specifications without imports.
        #[arg(long)]
        source_schema: Option<PathBuf>,
        /// Target schema, for specifications without imports.
        #[arg(long)]
        target_schema: Option<PathBuf>,
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Check a trace against the models and specification it relates.
    TraceCheck {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        source_schema: Option<PathBuf>,
        #[arg(long)]
        target_schema: Option<PathBuf>,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn domain(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_DOMAIN,
            message: message.into(),
        }
    }
}

fn expr_code(e: &ExprError) -> i32 {
    match e {
        ExprError::MissingParameter { .. }
        | ExprError::ParameterKindMismatch { .. }
        | ExprError::UnboundParameter(_) => EXIT_USAGE,
        _ => EXIT_DOMAIN,
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        let code = match &e {
            LoadError::Io { .. } | LoadError::Parse(_) => EXIT_USAGE,
            LoadError::Eval(x) => expr_code(x),
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<TransformError> for Failure {
    fn from(e: TransformError) -> Self {
        let code = match &e {
            TransformError::Eval(x) => expr_code(x),
            _ => EXIT_DOMAIN,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses `args` (program name first) and runs the command, writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message.trim_end());
            f.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::CheckSchema { schema, imports } => check_schema(&schema, &imports, out),
        Command::Eval {
            expr,
            schema,
            params,
            output,
            kappa_depth,
        } => eval(&expr, &schema, &params, output.as_deref(), kappa_depth, out),
        Command::Conform { model, schema } => conform(&model, &schema, out),
        Command::Transform {
            spec,
            source,
            source_schema,
            target_schema,
            params,
            output,
            trace,
            no_timestamp,
        } => {
            let mut set = SchemaSet::new();
            preload(&mut set, [source_schema, target_schema])?;
            transform(
                &spec,
                &source,
                &mut set,
                &params,
                output.as_deref(),
                trace.as_deref(),
                !no_timestamp,
                out,
            )
        }
        Command::TraceCheck {
            trace,
            target,
            source,
            spec,
            source_schema,
            target_schema,
        } => {
            let mut set = SchemaSet::new();
            preload(&mut set, [source_schema, target_schema])?;
            trace_check(&trace, &target, &source, &spec, &mut set, out)
        }
    }
}

fn preload<const N: usize>(
    set: &mut SchemaSet,
    paths: [Option<PathBuf>; N],
) -> Result<(), Failure> {
    for p in paths.into_iter().flatten() {
        let s = load_schema(&p, set)?;
        set.insert(s);
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Writes `text` to `path` through a temporary file in the same directory,
/// so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => {
            write_atomic(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))
        }
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::usage(e.to_string())),
    }
}

fn check_schema(path: &Path, imports: &[PathBuf], out: &mut dyn Write) -> Result<i32, Failure> {
    let mut set = SchemaSet::new();
    for p in imports {
        let s = load_schema(p, &set)?;
        set.insert(s);
    }
    let text = read(path)?;
    let name = path.display().to_string();
    match parse_mmx_with(Source::named(&name, &text), &set) {
        Ok(s) => {
            let _ = writeln!(
                out,
                "{}: {} entity types, model type {}",
                s.name(),
                s.own_entities().count(),
                s.model_type().map(|t| t.name()).unwrap_or("-")
            );
            Ok(EXIT_OK)
        }
        Err(e) => {
            let syntax = e
                .diagnostics
                .iter()
                .any(|d| matches!(d.kind, crate::syntax::DiagKind::Syntax));
            for d in &e.diagnostics {
                let _ = writeln!(out, "{d}");
            }
            Ok(if syntax { EXIT_USAGE } else { EXIT_DOMAIN })
        }
    }
}

/// Splits `name=value` pairs, rejecting malformed and repeated names.
fn split_params(raw: &[String]) -> Result<Vec<(String, String)>, Failure> {
    let mut out: Vec<(String, String)> = Vec::new();
    for r in raw {
        let Some((k, v)) = r.split_once('=') else {
            return Err(Failure::usage(format!(
                "--param `{r}`: expected NAME=VALUE"
            )));
        };
        if out.iter().any(|(n, _)| n == k) {
            return Err(Failure::usage(format!("--param `{k}` given twice")));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Converts a raw argument by the declared kind of its parameter.
fn coerce(
    decl: &ParamDecl,
    raw: &str,
    resolve_template: &dyn Fn(&str) -> Result<Template, Failure>,
    source: Option<(&Arc<Store>, ElemId)>,
) -> Result<Value, Failure> {
    let bad = |what: &str| Failure::usage(format!("--param {}: `{raw}` is not {what}", decl.name));
    Ok(match &decl.kind {
        ParamKind::String | ParamKind::Any => Value::Str(raw.to_string()),
        ParamKind::Number => Value::Num(
            raw.parse::<f64>()
                .ok()
                .filter(|n| n.is_finite())
                .ok_or_else(|| bad("a number"))?,
        ),
        ParamKind::Boolean => Value::Bool(match raw {
            "true" => true,
            "false" => false,
            _ => return Err(bad("a boolean")),
        }),
        ParamKind::Template => Value::Template(Arc::new(resolve_template(raw)?)),
        ParamKind::Element(_) => {
            let Some((store, model)) = source else {
                return Err(Failure::usage(format!(
                    "--param {}: element parameters need a source model",
                    decl.name
                )));
            };
            let id = store
                .resolve_str(model, raw)
                .map_err(|e| Failure::domain(format!("--param {}: {e}", decl.name)))?;
            let v = Value::Elem(ElemHandle::new(store.clone(), id));
            if !decl.kind.admits(&v) {
                return Err(Failure::domain(format!(
                    "--param {}: `{raw}` is a {}, expected {}",
                    decl.name,
                    store.get(id).ty().name(),
                    decl.kind
                )));
            }
            v
        }
    })
}

fn bind_params(
    decls: &[ParamDecl],
    raw: &[String],
    resolve_template: &dyn Fn(&str) -> Result<Template, Failure>,
    source: Option<(&Arc<Store>, ElemId)>,
) -> Result<ParamEnv, Failure> {
    let pairs = split_params(raw)?;
    let mut env = ParamEnv::new();
    for (k, v) in &pairs {
        let Some(decl) = decls.iter().find(|d| d.name == *k) else {
            return Err(Failure::usage(format!("unknown parameter `{k}`")));
        };
        env.bind(k.clone(), coerce(decl, v, resolve_template, source)?);
    }
    if let Some(missing) = decls.iter().find(|d| !env.contains(&d.name)) {
        return Err(Failure::usage(format!(
            "missing parameter `{}` ({})",
            missing.name, missing.kind
        )));
    }
    Ok(env)
}

fn eval(
    path: &Path,
    schema: &Path,
    raw: &[String],
    output: Option<&Path>,
    kappa_depth: usize,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let schema = load_schema(schema, &SchemaSet::new())?;
    let template = Arc::new(load_template(path, &schema)?);
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let resolve =
        |file: &str| -> Result<Template, Failure> { Ok(load_template(&base.join(file), &schema)?) };
    let env = bind_params(template.params(), raw, &resolve, None)?;
    let node = instantiate(&template, &env).map_err(LoadError::from)?;
    let guard = ReductionGuard {
        max_depth: kappa_depth,
        ..ReductionGuard::default()
    };
    let mut store = Store::new();
    let root = store.root();
    let produced =
        evaluate_atomic(&node, &env, &mut store, root, &guard).map_err(LoadError::from)?;
    let text: String = produced
        .iter()
        .map(|&id| serialize_model(&store, id))
        .collect();
    emit(output, &text, out)?;
    let count = store.len() - 1;
    if output.is_some() {
        let _ = writeln!(out, "{count} elements");
    }
    Ok(EXIT_OK)
}

fn conform(path: &Path, schema: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let schema = load_schema(schema, &SchemaSet::new())?;
    let (store, top) = load_model(path, &schema)?;
    let Some(top) = top else {
        let _ = writeln!(out, "empty model");
        return Ok(EXIT_OK);
    };
    let el = store.get(top);
    if !el.is_model() {
        let _ = writeln!(
            out,
            "{}\t\tmodel-typing\ta {} is not a model",
            store.qname(top),
            el.ty().name()
        );
        return Ok(EXIT_DOMAIN);
    }
    let report = conforms_deep(&store, top);
    if report.is_ok() {
        let _ = writeln!(out, "{} conforms to {}", store.qname(top), schema.name());
        Ok(EXIT_OK)
    } else {
        let _ = write!(out, "{report}");
        Ok(EXIT_DOMAIN)
    }
}

fn model_of(path: &Path, schema: &Arc<TypeSchema>) -> Result<(Store, ElemId), Failure> {
    let (store, top) = load_model(path, schema)?;
    let top = top.ok_or_else(|| Failure::usage(format!("{}: no model", path.display())))?;
    Ok((store, top))
}

#[allow(clippy::too_many_arguments)]
fn transform(
    spec_path: &Path,
    source: &Path,
    set: &mut SchemaSet,
    raw: &[String],
    output: Option<&Path>,
    trace: Option<&Path>,
    timestamp: bool,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let spec = Arc::new(load_spec(spec_path, set)?);
    let (src, model) = model_of(source, &spec.source_schema)?;
    let src = Arc::new(src);
    let base = spec_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let target = spec.target_schema.clone();
    let resolve =
        |file: &str| -> Result<Template, Failure> { Ok(load_template(&base.join(file), &target)?) };
    let env = bind_params(&spec.params, raw, &resolve, Some((&src, model)))?;
    let run = execute(&spec, &src, model, &env, &ReductionGuard::default())?;
    let text = serialize_model(&run.store, run.target);
    if let Some(t) = trace {
        let trace_text =
            serialize_trace(&run.trace, timestamp).map_err(|e| Failure::domain(e.to_string()))?;
        write_atomic(t, &trace_text)
            .map_err(|e| Failure::usage(format!("{}: {e}", t.display())))?;
    }
    emit(output, &text, out)?;
    Ok(EXIT_OK)
}

fn trace_check(
    trace: &Path,
    target: &Path,
    source: &Path,
    spec_path: &Path,
    set: &mut SchemaSet,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let spec = load_spec(spec_path, set)?;
    let (src, sm) = model_of(source, &spec.source_schema)?;
    let (tgt, tm) = model_of(target, &spec.target_schema)?;
    let (ts, t) = model_of(trace, trace_schema())?;
    let trace = TraceModel::from_model(&ts, t).map_err(Failure::domain)?;
    let report = check_trace(&trace, (&tgt, tm), &spec, (&src, sm));
    if report.is_ok() {
        let _ = writeln!(
            out,
            "{} entries, trace consistent",
            trace.all_entries().len()
        );
        Ok(EXIT_OK)
    } else {
        let _ = write!(out, "{report}");
        Ok(EXIT_DOMAIN)
    }
}
