use std::collections::HashMap;
use std::sync::Arc;

use crate::schema::{abstract_schema, SchemaError, SchemaSet, TypeSchema, ABSTRACT_SCHEMA};
use crate::syntax::lexer::{tokenize, Cursor, Tok};
use crate::syntax::{DiagKind, Diagnostic, ParseError, Source, SourceSpan};
use crate::typesys::{
    make_array, make_base, make_iref, make_ref, EntityRef, Multiplicity, PropertySpec,
    TypeDescriptor,
};

struct PropDecl {
    name: String,
    ty: TypeDescriptor,
    mult: Multiplicity,
    span: SourceSpan,
}

struct EntityDecl {
    name: String,
    is_model: bool,
    parent: Option<(String, SourceSpan)>,
    props: Vec<PropDecl>,
    span: SourceSpan,
}

struct InverseDecl {
    a: (String, String),
    b: (String, String),
    span: SourceSpan,
}

/// Parses and validates a schema against the built-in abstract schema.
pub fn parse_mmx<'a>(src: impl Into<Source<'a>>) -> Result<TypeSchema, ParseError> {
    parse_mmx_with(src, &SchemaSet::new())
}

/// Parses and validates a schema; `ref(S::T)` targets are looked up in `set`.
pub fn parse_mmx_with<'a>(
    src: impl Into<Source<'a>>,
    set: &SchemaSet,
) -> Result<TypeSchema, ParseError> {
    let src = src.into();
    let file: Arc<str> = Arc::from(src.name);
    let mut c = Cursor::new(tokenize(src.text, &file)?);
    let header = c.expect_keyword("schema")?;
    let (name, _) = schema_name(&mut c)?;
    c.expect("{")?;
    let mut entities = Vec::new();
    let mut inverses = Vec::new();
    while !c.eat("}") {
        if c.at_ident("inverse") {
            inverses.push(inverse(&mut c)?);
        } else if c.at_ident("entity") || c.at_ident("model") {
            entities.push(entity(&mut c, &name)?);
        } else {
            return Err(c
                .error("expected `entity`, `model`, `inverse` or `}`")
                .into());
        }
    }
    if !c.at_eof() {
        return Err(c.error("expected end of input").into());
    }
    build(name, header, entities, inverses, set)
}

fn schema_name(c: &mut Cursor) -> Result<(String, SourceSpan), Diagnostic> {
    let t = c.peek().clone();
    match t.tok {
        Tok::Ident(s) if !s.starts_with('$') => {
            c.bump();
            Ok((s, t.span))
        }
        Tok::Str(_) => Err(c.error("expected a schema name")),
        _ => Err(c.error("expected a schema name")),
    }
}

fn entity(c: &mut Cursor, schema: &str) -> Result<EntityDecl, Diagnostic> {
    let is_model = c.at_ident("model");
    c.bump();
    let (name, span) = c.ident("an entity name")?;
    let parent = if c.eat(":") {
        Some(c.ident("a parent entity name")?)
    } else {
        None
    };
    c.expect("{")?;
    let mut props = Vec::new();
    while !c.eat("}") {
        let (pname, pspan) = c.ident("a property name or `}`")?;
        c.expect(":")?;
        let ty = typeref(c, schema)?;
        let (ty, mult) = if c.eat("?") {
            (ty, Multiplicity::ZeroOrOne)
        } else if c.at("[") {
            c.bump();
            let mult = if c.eat("+") {
                Multiplicity::OneOrMore
            } else {
                Multiplicity::ZeroOrMore
            };
            c.expect("]")?;
            (make_array(ty), mult)
        } else {
            (ty, Multiplicity::One)
        };
        props.push(PropDecl {
            name: pname,
            ty,
            mult,
            span: pspan,
        });
        c.eat(",");
    }
    Ok(EntityDecl {
        name,
        is_model,
        parent,
        props,
        span,
    })
}

fn qualified(c: &mut Cursor) -> Result<(String, String), Diagnostic> {
    c.expect("(")?;
    let (s, _) = schema_name(c)?;
    c.expect("::")?;
    let (t, _) = c.ident("a type name")?;
    c.expect(")")?;
    Ok((s, t))
}

fn typeref(c: &mut Cursor, schema: &str) -> Result<TypeDescriptor, Diagnostic> {
    let (word, span) = c.ident("a type")?;
    Ok(match word.as_str() {
        "string" | "number" | "boolean" => make_base(&word).expect("base type name"),
        "ref" if c.at("(") => {
            let (s, t) = qualified(c)?;
            make_ref(&s, &t)
        }
        "iref" if c.at("(") => {
            let (s, t) = qualified(c)?;
            make_iref(&s, &t)
        }
        "ModelElement" | "Model" => make_ref(ABSTRACT_SCHEMA, &word),
        _ if word.contains('-') => {
            return Err(Diagnostic::new(
                DiagKind::Syntax,
                span,
                format!("invalid type name `{word}`"),
            ))
        }
        _ => make_ref(schema, &word),
    })
}

fn inverse(c: &mut Cursor) -> Result<InverseDecl, Diagnostic> {
    let span = c.bump().span;
    let end = |c: &mut Cursor| -> Result<(String, String), Diagnostic> {
        let (t, _) = c.ident("an entity name")?;
        c.expect(".")?;
        let (p, _) = c.ident("a property name")?;
        Ok((t, p))
    };
    let a = end(c)?;
    c.expect("<->")?;
    let b = end(c)?;
    Ok(InverseDecl { a, b, span })
}

fn build(
    name: String,
    header: SourceSpan,
    decls: Vec<EntityDecl>,
    inverses: Vec<InverseDecl>,
    set: &SchemaSet,
) -> Result<TypeSchema, ParseError> {
    let mut diags = Vec::new();
    let mut schema = TypeSchema::new(name.clone());
    let mut spans: HashMap<String, SourceSpan> = HashMap::new();
    let mut prop_spans: HashMap<(String, String), SourceSpan> = HashMap::new();
    for d in &decls {
        if spans.insert(d.name.clone(), d.span.clone()).is_some() {
            diags.push(Diagnostic::new(
                DiagKind::Syntax,
                d.span.clone(),
                format!("entity `{}` is declared twice", d.name),
            ));
        }
        for p in &d.props {
            prop_spans.insert((d.name.clone(), p.name.clone()), p.span.clone());
        }
    }
    if !diags.is_empty() {
        return Err(ParseError { diagnostics: diags });
    }

    // Parents are created before their subtypes.
    let mut built: HashMap<String, EntityRef> = HashMap::new();
    let mut pending: Vec<&EntityDecl> = decls.iter().collect();
    let mut model_type: Option<EntityRef> = None;
    while !pending.is_empty() {
        let before = pending.len();
        let mut rest = Vec::new();
        for d in pending {
            let parent = match &d.parent {
                None if d.is_model => Some(crate::schema::model_type().clone()),
                None => Some(crate::schema::model_element_type().clone()),
                Some((p, pspan)) => match built.get(p) {
                    Some(e) => Some(e.clone()),
                    None if spans.contains_key(p) => {
                        rest.push(d);
                        continue;
                    }
                    None => match abstract_schema().entity(p) {
                        Some(e) => Some(e.clone()),
                        None => {
                            diags.push(Diagnostic::new(
                                DiagKind::Syntax,
                                pspan.clone(),
                                format!("unknown parent entity `{p}`"),
                            ));
                            None
                        }
                    },
                },
            };
            let Some(parent) = parent else { continue };
            let mut props = PropertySpec::new();
            for p in &d.props {
                if let Err(e) = props.insert(p.name.clone(), p.ty.clone(), p.mult) {
                    diags.push(Diagnostic::new(
                        DiagKind::Syntax,
                        p.span.clone(),
                        e.to_string(),
                    ));
                }
            }
            match schema.make_subtype(&parent, &d.name, props) {
                Ok(e) => {
                    if d.is_model {
                        if !e.is_subtype_of(crate::schema::model_type()) {
                            diags.push(Diagnostic::new(
                                DiagKind::Schema(SchemaError::InvalidModelType(d.name.clone())),
                                d.span.clone(),
                                format!("model `{}` must extend a model type", d.name),
                            ));
                        } else if model_type.is_none() {
                            model_type = Some(e.clone());
                        }
                    }
                    built.insert(d.name.clone(), e);
                }
                Err(e) => diags.push(Diagnostic::new(
                    DiagKind::Syntax,
                    d.span.clone(),
                    e.to_string(),
                )),
            }
        }
        if rest.len() == before {
            for d in rest {
                diags.push(Diagnostic::new(
                    DiagKind::Syntax,
                    d.span.clone(),
                    format!("inheritance cycle through `{}`", d.name),
                ));
            }
            break;
        }
        pending = rest;
    }
    if let Some(m) = &model_type {
        schema.set_model_type(m);
    }
    for inv in &inverses {
        let lookup = |t: &str| {
            built
                .get(t)
                .cloned()
                .or_else(|| abstract_schema().entity(t).cloned())
        };
        match (lookup(&inv.a.0), lookup(&inv.b.0)) {
            (Some(a), Some(b)) => schema.add_inverse(&a, &inv.a.1, &b, &inv.b.1),
            _ => diags.push(Diagnostic::new(
                DiagKind::Schema(SchemaError::InvalidInverse(format!(
                    "{}.{} <-> {}.{}",
                    inv.a.0, inv.a.1, inv.b.0, inv.b.1
                ))),
                inv.span.clone(),
                "inverse names an unknown entity",
            )),
        }
    }
    if !diags.is_empty() {
        return Err(ParseError { diagnostics: diags });
    }
    if let Err(errors) = schema.validate(set) {
        let diagnostics = errors
            .0
            .into_iter()
            .map(|e| {
                let local = |q: &str| q.rsplit("::").next().unwrap_or(q).to_string();
                let span = match &e {
                    SchemaError::UnresolvedReference {
                        entity, property, ..
                    }
                    | SchemaError::ClosureViolation {
                        entity, property, ..
                    } => prop_spans
                        .get(&(local(entity), property.clone()))
                        .or_else(|| spans.get(&local(entity)))
                        .cloned(),
                    SchemaError::InvalidModelType(n) => spans.get(&local(n)).cloned(),
                    SchemaError::InvalidInverse(_) => inverses.first().map(|i| i.span.clone()),
                    SchemaError::MissingModelType(_) => None,
                }
                .unwrap_or_else(|| header.clone());
                let message = e.to_string();
                Diagnostic::new(DiagKind::Schema(e), span, message)
            })
            .collect();
        return Err(ParseError { diagnostics });
    }
    Ok(schema)
}
