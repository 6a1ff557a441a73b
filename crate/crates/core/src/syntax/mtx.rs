use std::collections::HashMap;
use std::sync::Arc;

use crate::expr::{ParamDecl, ParamKind, Value};
use crate::schema::{SchemaSet, TypeSchema};
use crate::syntax::lexer::{tokenize, Cursor, Tok};
use crate::syntax::lower::{lower_all, Linker, Runtime};
use crate::syntax::mex::{basic_kind, param_header, MexParser, Node};
use crate::syntax::{DiagKind, Diagnostic, ParseError, Source, SourceSpan};
use crate::transform::{validate_spec, Rule, RuleKind, TransformError, TransformationSpec};

struct RuleDecl {
    name: String,
    span: SourceSpan,
    kind: RuleKind,
    top: bool,
    var: String,
    ty: (String, SourceSpan),
    extras: Vec<ParamDecl>,
    body: Vec<Node>,
}

fn imports(c: &mut Cursor) -> Result<Vec<String>, Diagnostic> {
    let mut out = Vec::new();
    while c.at_ident("import") {
        c.bump();
        let t = c.peek().clone();
        let path = match &t.tok {
            Tok::Str(parts) => match parts.as_slice() {
                [crate::syntax::lexer::StrPart::Lit(s)] => s.clone(),
                _ => return Err(c.error("expected a plain file name")),
            },
            _ => return Err(c.error("expected a quoted file name")),
        };
        c.bump();
        out.push(path);
    }
    Ok(out)
}

/// Schema files named by the leading `import "…"` declarations.
pub fn mtx_imports<'a>(src: impl Into<Source<'a>>) -> Result<Vec<String>, ParseError> {
    let src = src.into();
    let file: Arc<str> = Arc::from(src.name);
    let mut c = Cursor::new(tokenize(src.text, &file)?);
    Ok(imports(&mut c)?)
}

fn schema_ref(c: &mut Cursor, set: &SchemaSet) -> Result<Arc<TypeSchema>, Diagnostic> {
    let t = c.peek().clone();
    let name = match &t.tok {
        Tok::Ident(s) => s.clone(),
        Tok::Str(parts) => match parts.as_slice() {
            [crate::syntax::lexer::StrPart::Lit(s)] => s.clone(),
            _ => return Err(c.error("expected a schema name")),
        },
        _ => return Err(c.error("expected a schema name")),
    };
    c.bump();
    set.get(&name).cloned().ok_or_else(|| {
        Diagnostic::new(DiagKind::Syntax, t.span, format!("unknown schema `{name}`"))
    })
}

fn rule_decl(c: &mut Cursor) -> Result<RuleDecl, Diagnostic> {
    let mut kind = RuleKind::Regular;
    let mut top = false;
    let mut kinds_seen = 0;
    while c.at("@") {
        let at = c.bump().span;
        let (anno, _) = c.ident("an annotation")?;
        match anno.as_str() {
            "top" => top = true,
            "specpoint" => {
                kind = RuleKind::SpecPoint;
                kinds_seen += 1;
            }
            "specoption" => {
                c.expect("(")?;
                let (p, _) = c.ident("a specialization point name")?;
                c.expect(")")?;
                kind = RuleKind::SpecOption(p);
                kinds_seen += 1;
            }
            _ => {
                return Err(Diagnostic::new(
                    DiagKind::Syntax,
                    at,
                    format!("unknown annotation `@{anno}`"),
                ))
            }
        }
        if kinds_seen > 1 {
            return Err(Diagnostic::new(
                DiagKind::Syntax,
                at,
                "a rule is either a specialization point or an option",
            ));
        }
    }
    c.expect_keyword("rule")?;
    let (name, span) = c.ident("a rule name")?;
    c.expect("(")?;
    let (var, _) = c.ident("the source parameter")?;
    c.expect(":")?;
    let ty = c.ident("a source type")?;
    let mut extras: Vec<ParamDecl> = Vec::new();
    while c.eat(",") {
        let (p, pspan) = c.ident("a parameter name")?;
        c.expect(":")?;
        let (k, kspan) = c.ident("`int`, `number`, `string` or `boolean`")?;
        let kind = match k.as_str() {
            "int" | "number" => ParamKind::Number,
            "string" => ParamKind::String,
            "boolean" => ParamKind::Boolean,
            _ => {
                return Err(Diagnostic::new(
                    DiagKind::Syntax,
                    kspan,
                    format!("unknown rule parameter kind `{k}`"),
                ))
            }
        };
        if p == var || extras.iter().any(|e| e.name == p) {
            return Err(Diagnostic::new(
                DiagKind::Syntax,
                pspan,
                format!("duplicate parameter `{p}`"),
            ));
        }
        extras.push(ParamDecl::new(p, kind));
    }
    c.expect(")")?;
    c.expect("{")?;
    let body = MexParser { c, rules: true }.children_until_brace()?;
    c.expect("}")?;
    Ok(RuleDecl {
        name,
        span,
        kind,
        top,
        var,
        ty,
        extras,
        body,
    })
}

fn check_calls(nodes: &[Node], arity: &HashMap<String, usize>, diags: &mut Vec<Diagnostic>) {
    for n in nodes {
        match n {
            Node::ApplyRule { rule, args, span } => match arity.get(rule) {
                None => diags.push(Diagnostic::new(
                    DiagKind::Transform(TransformError::UnknownRule(rule.clone())),
                    span.clone(),
                    format!("unknown rule `{rule}`"),
                )),
                Some(&k) if k != args.len() => diags.push(Diagnostic::new(
                    DiagKind::Transform(TransformError::BadArguments {
                        rule: rule.clone(),
                        message: format!("expected {k} arguments, got {}", args.len()),
                    }),
                    span.clone(),
                    format!("`{rule}` takes {k} arguments, got {}", args.len()),
                )),
                _ => {}
            },
            Node::Element { children, .. } | Node::Group { children, .. } => {
                check_calls(children, arity, diags)
            }
            Node::For { body, .. } => check_calls(body, arity, diags),
            Node::If { then, els, .. } => {
                check_calls(then, arity, diags);
                check_calls(els, arity, diags);
            }
            _ => {}
        }
    }
}

/// Parses a transformation specification. Source and target schemas are
/// looked up by name in `set`; the result passes [`validate_spec`].
pub fn parse_mtx<'a>(
    src: impl Into<Source<'a>>,
    set: &SchemaSet,
) -> Result<TransformationSpec, ParseError> {
    let src = src.into();
    let file: Arc<str> = Arc::from(src.name);
    let mut c = Cursor::new(tokenize(src.text, &file)?);
    imports(&mut c)?;
    let header = c.expect_keyword("transform")?;
    let (name, _) = c.ident("a transformation name")?;
    c.expect_keyword("from")?;
    let source = schema_ref(&mut c, set)?;
    c.expect_keyword("to")?;
    let target = schema_ref(&mut c, set)?;
    c.expect("{")?;
    let mut spec = TransformationSpec::new(name, &source, &target);
    if c.at_ident("params") {
        let src_schema = source.clone();
        let kind = move |k: &str| {
            basic_kind(k).or_else(|| {
                src_schema
                    .entity(k)
                    .map(|e| ParamKind::Element(Some(e.clone())))
            })
        };
        for p in param_header(&mut c, &kind)? {
            spec.add_param(p);
        }
    }
    let mut decls = Vec::new();
    while !c.eat("}") {
        if c.at_eof() {
            return Err(c.error("expected a rule or `}`").into());
        }
        decls.push(rule_decl(&mut c)?);
    }
    if !c.at_eof() {
        return Err(c.error("expected end of input").into());
    }

    let mut diags = Vec::new();
    let arity: HashMap<String, usize> = decls
        .iter()
        .map(|d| (d.name.clone(), 1 + d.extras.len()))
        .collect();
    let mut spans: HashMap<String, SourceSpan> = HashMap::new();
    let mut top: Option<String> = None;
    for d in decls {
        spans.insert(d.name.clone(), d.span.clone());
        check_calls(&d.body, &arity, &mut diags);
        if d.top {
            if let Some(first) = &top {
                diags.push(Diagnostic::new(
                    DiagKind::Transform(TransformError::MissingTopRule(format!(
                        "ambiguous top rule: `{first}` and `{}`",
                        d.name
                    ))),
                    d.span.clone(),
                    format!("`{first}` is already the top rule"),
                ));
            } else {
                top = Some(d.name.clone());
            }
        }
        let Some(ty) = source.entity(&d.ty.0).cloned() else {
            diags.push(Diagnostic::new(
                DiagKind::Transform(TransformError::UnknownSourceType {
                    rule: d.name.clone(),
                    ty: d.ty.0.clone(),
                }),
                d.ty.1.clone(),
                format!("`{}` is not a type of schema `{}`", d.ty.0, source.name()),
            ));
            continue;
        };
        let mut linker = Linker::new(&target);
        let nodes = linker.nodes(&d.body);
        let body = match linker.finish(nodes) {
            Ok(b) => b,
            Err(e) => {
                diags.extend(e.diagnostics);
                continue;
            }
        };
        let var = d.var.clone();
        let rule = Rule::new(d.name.clone(), &ty, d.kind, move |call| {
            let mut env = call.ctx.params().clone();
            for (k, v) in call.args.iter() {
                env.bind(k, v.clone());
            }
            env.bind(var.clone(), Value::Elem(call.source.clone()));
            let rt = Runtime {
                ctx: Some(call.ctx.clone()),
            };
            lower_all(&body, &env, &rt)
        })
        .with_params(d.extras);
        if let Err(e) = spec.add_rule(rule) {
            let message = e.to_string();
            diags.push(Diagnostic::new(DiagKind::Transform(e), d.span, message));
        }
    }
    if let Some(t) = &top {
        spec.set_top(t);
    }
    if !diags.is_empty() {
        return Err(ParseError { diagnostics: diags });
    }
    for e in validate_spec(&spec).errors {
        let at = match &e {
            TransformError::AmbiguousOptions { second, .. }
            | TransformError::AmbiguousDispatch { second, .. } => spans.get(second),
            TransformError::DanglingSpecOption { option, .. }
            | TransformError::OptionNotSubtype { option, .. } => spans.get(option),
            _ => None,
        }
        .cloned()
        .unwrap_or_else(|| header.clone());
        let message = e.to_string();
        diags.push(Diagnostic::new(DiagKind::Transform(e), at, message));
    }
    if diags.is_empty() {
        Ok(spec)
    } else {
        Err(ParseError { diagnostics: diags })
    }
}
