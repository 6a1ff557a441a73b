use std::sync::Arc;

use crate::expr::{ParamDecl, ParamKind, Template};
use crate::schema::TypeSchema;
use crate::syntax::expr::{parse_expr, parse_unary_attr, Expr};
use crate::syntax::lexer::{tokenize, Cursor, Tok};
use crate::syntax::lower::{link_root, Runtime};
use crate::syntax::{DiagKind, Diagnostic, ParseError, Source, SourceSpan};

pub(crate) const REF_ATTR: &str = "$refByName";
pub(crate) const IGNORED_ATTR: &str = "MDA_level";

#[derive(Debug, Clone)]
pub(crate) struct Attr {
    pub name: String,
    pub value: Expr,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub(crate) enum ForSrc {
    Range(Expr, Expr),
    Items(Expr),
}

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Element {
        tag: String,
        attrs: Vec<Attr>,
        children: Vec<Node>,
        span: SourceSpan,
    },
    Ref {
        tag: String,
        path: Expr,
        span: SourceSpan,
    },
    /// `<.prop> ... </.prop>`: children assigned to an explicit property.
    Group {
        prop: String,
        children: Vec<Node>,
        span: SourceSpan,
    },
    For {
        var: String,
        src: ForSrc,
        body: Vec<Node>,
        span: SourceSpan,
    },
    If {
        cond: Expr,
        then: Vec<Node>,
        els: Vec<Node>,
        span: SourceSpan,
    },
    Param {
        name: String,
        attrs: Vec<Attr>,
        span: SourceSpan,
    },
    Apply {
        path: Expr,
        span: SourceSpan,
    },
    ApplyRule {
        rule: String,
        args: Vec<Expr>,
        span: SourceSpan,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum End {
    Tag(String),
    Group(String),
    /// Stops before `{/…}` or `{else}`.
    Comp,
    /// Stops before a `}` that closes a rule body.
    Body,
}

pub(crate) struct MexParser<'c> {
    pub c: &'c mut Cursor,
    /// Enables `{apply}` and `{applyRule}`.
    pub rules: bool,
}

impl MexParser<'_> {
    pub fn children_until_brace(&mut self) -> Result<Vec<Node>, Diagnostic> {
        self.children(End::Body)
    }

    fn children(&mut self, end: End) -> Result<Vec<Node>, Diagnostic> {
        let mut out = Vec::new();
        loop {
            if self.c.at("</") {
                let span = self.c.bump().span;
                let group = self.c.eat(".");
                let (name, _) = self.c.ident("a closing tag name")?;
                let ok = match &end {
                    End::Tag(t) => !group && *t == name,
                    End::Group(p) => group && *p == name,
                    _ => false,
                };
                if !ok {
                    let expected = match &end {
                        End::Tag(t) => format!("`</{t}>`"),
                        End::Group(p) => format!("`</.{p}>`"),
                        _ => "no closing tag".to_string(),
                    };
                    return Err(Diagnostic::new(
                        DiagKind::Syntax,
                        span,
                        format!("mismatched closing tag: expected {expected}"),
                    ));
                }
                self.c.expect(">")?;
                return Ok(out);
            }
            if self.c.at("<") {
                out.push(self.element()?);
                continue;
            }
            if self.c.at("{") {
                let next = &self.c.peek_at(1).tok;
                let closing =
                    matches!(next, Tok::Punct("/")) || matches!(next, Tok::Ident(w) if w == "else");
                if closing {
                    if end == End::Comp {
                        return Ok(out);
                    }
                    return Err(self.c.error("unexpected end of block"));
                }
                out.push(self.comp()?);
                continue;
            }
            if self.c.at("}") && end == End::Body {
                return Ok(out);
            }
            return Err(match &end {
                End::Tag(t) if self.c.at_eof() => self.c.error(format!("unclosed `<{t}>`")),
                _ => self.c.error("expected an element or a `{` block"),
            });
        }
    }

    pub fn element(&mut self) -> Result<Node, Diagnostic> {
        let open = self.c.expect("<")?;
        if self.c.eat(".") {
            let (prop, _) = self.c.ident("a property name")?;
            self.c.expect(">")?;
            let children = self.children(End::Group(prop.clone()))?;
            return Ok(Node::Group {
                prop,
                children,
                span: open,
            });
        }
        let (tag, span) = self.c.ident("a tag name")?;
        let attrs = self.attrs()?;
        let self_closing = if self.c.eat("/>") {
            true
        } else {
            self.c.expect(">")?;
            false
        };
        if let Some(r) = attrs.iter().find(|a| a.name == REF_ATTR) {
            if let Some(other) = attrs
                .iter()
                .find(|a| a.name != REF_ATTR && a.name != IGNORED_ATTR)
            {
                return Err(Diagnostic::new(
                    DiagKind::AttrOnRef,
                    other.span.clone(),
                    format!(
                        "`{}` is not allowed on a `{REF_ATTR}` reference",
                        other.name
                    ),
                ));
            }
            if !self_closing {
                let children = self.children(End::Tag(tag.clone()))?;
                if !children.is_empty() {
                    return Err(Diagnostic::new(
                        DiagKind::AttrOnRef,
                        span,
                        "a reference cannot have children",
                    ));
                }
            }
            return Ok(Node::Ref {
                tag,
                path: r.value.clone(),
                span,
            });
        }
        let children = if self_closing {
            Vec::new()
        } else {
            self.children(End::Tag(tag.clone()))?
        };
        Ok(Node::Element {
            tag,
            attrs,
            children,
            span,
        })
    }

    fn attrs(&mut self) -> Result<Vec<Attr>, Diagnostic> {
        let mut attrs: Vec<Attr> = Vec::new();
        while let Tok::Ident(name) = &self.c.peek().tok {
            let name = name.clone();
            let span = self.c.bump().span;
            if name.starts_with('$') && name != REF_ATTR {
                return Err(Diagnostic::new(
                    DiagKind::Syntax,
                    span,
                    format!("unknown special attribute `{name}`"),
                ));
            }
            if attrs.iter().any(|a| a.name == name) {
                return Err(Diagnostic::new(
                    DiagKind::Syntax,
                    span,
                    format!("duplicate attribute `{name}`"),
                ));
            }
            self.c.expect("=")?;
            let value = if self.c.eat("{") {
                let e = parse_expr(self.c)?;
                self.c.expect("}")?;
                e
            } else {
                parse_unary_attr(self.c)?
            };
            attrs.push(Attr { name, value, span });
        }
        Ok(attrs)
    }

    fn close_block(&mut self, word: &str) -> Result<(), Diagnostic> {
        self.c.expect("{")?;
        self.c.expect("/")?;
        self.c.expect_keyword(word)?;
        self.c.expect("}")?;
        Ok(())
    }

    fn comp(&mut self) -> Result<Node, Diagnostic> {
        self.c.expect("{")?;
        let (word, span) = self.c.ident("`for`, `if` or `param`")?;
        match word.as_str() {
            "for" => {
                let (var, _) = self.c.ident("a loop variable")?;
                self.c.expect_keyword("in")?;
                let first = parse_expr(self.c)?;
                let src = if self.c.eat("..") {
                    ForSrc::Range(first, parse_expr(self.c)?)
                } else {
                    ForSrc::Items(first)
                };
                self.c.expect("}")?;
                let body = self.children(End::Comp)?;
                self.close_block("for")?;
                Ok(Node::For {
                    var,
                    src,
                    body,
                    span,
                })
            }
            "if" => {
                let cond = parse_expr(self.c)?;
                self.c.expect("}")?;
                let then = self.children(End::Comp)?;
                let els = if self.c.at("{")
                    && matches!(&self.c.peek_at(1).tok, Tok::Ident(w) if w == "else")
                {
                    self.c.bump();
                    self.c.bump();
                    self.c.expect("}")?;
                    self.children(End::Comp)?
                } else {
                    Vec::new()
                };
                self.close_block("if")?;
                Ok(Node::If {
                    cond,
                    then,
                    els,
                    span,
                })
            }
            "param" => {
                let (name, _) = self.c.ident("a parameter name")?;
                let attrs = self.attrs()?;
                self.c.expect("}")?;
                Ok(Node::Param { name, attrs, span })
            }
            "apply" if self.rules => {
                let path = parse_expr(self.c)?;
                self.c.expect("}")?;
                Ok(Node::Apply { path, span })
            }
            "applyRule" if self.rules => {
                let (rule, _) = self.c.ident("a rule name")?;
                self.c.expect("(")?;
                let mut args = Vec::new();
                while !self.c.at(")") {
                    args.push(parse_expr(self.c)?);
                    if !self.c.eat(",") {
                        break;
                    }
                }
                self.c.expect(")")?;
                self.c.expect("}")?;
                Ok(Node::ApplyRule { rule, args, span })
            }
            "apply" | "applyRule" => Err(Diagnostic::new(
                DiagKind::Syntax,
                span,
                format!("`{word}` is only available in transformation rules"),
            )),
            _ => Err(Diagnostic::new(
                DiagKind::Syntax,
                span,
                format!("unknown block `{{{word}`"),
            )),
        }
    }
}

/// `params(name: kind ...)` with kinds resolved by `kind`.
pub(crate) fn param_header(
    c: &mut Cursor,
    kind: &dyn Fn(&str) -> Option<ParamKind>,
) -> Result<Vec<ParamDecl>, Diagnostic> {
    c.expect_keyword("params")?;
    c.expect("(")?;
    let mut out: Vec<ParamDecl> = Vec::new();
    while !c.eat(")") {
        let (name, span) = c.ident("a parameter name")?;
        c.expect(":")?;
        let (k, kspan) = c.ident("a parameter kind")?;
        let Some(k) = kind(&k) else {
            return Err(Diagnostic::new(
                DiagKind::Syntax,
                kspan,
                format!("unknown parameter kind `{k}`"),
            ));
        };
        if out.iter().any(|p| p.name == name) {
            return Err(Diagnostic::new(
                DiagKind::Syntax,
                span,
                format!("duplicate parameter `{name}`"),
            ));
        }
        out.push(ParamDecl::new(name, k));
        c.eat(",");
    }
    Ok(out)
}

pub(crate) fn basic_kind(k: &str) -> Option<ParamKind> {
    Some(match k {
        "string" => ParamKind::String,
        "number" | "int" => ParamKind::Number,
        "boolean" => ParamKind::Boolean,
        "template" => ParamKind::Template,
        "element" => ParamKind::Element(None),
        "any" => ParamKind::Any,
        _ => return None,
    })
}

/// Parses a model expression whose tags resolve against `schema`. The
/// optional `params(...)` header declares the template parameters; a
/// document without an element denotes the empty expression.
pub fn parse_mex<'a>(
    src: impl Into<Source<'a>>,
    schema: &Arc<TypeSchema>,
) -> Result<Template, ParseError> {
    let src = src.into();
    let file: Arc<str> = Arc::from(src.name);
    let mut c = Cursor::new(tokenize(src.text, &file)?);
    let params = if c.at_ident("params") {
        param_header(&mut c, &basic_kind)?
    } else {
        Vec::new()
    };
    let root = if c.at_eof() {
        Vec::new()
    } else {
        let mut p = MexParser {
            c: &mut c,
            rules: false,
        };
        vec![p.element()?]
    };
    if !c.at_eof() {
        return Err(c.error("expected end of input").into());
    }
    let linked = link_root(&root, schema)?;
    let name = std::path::Path::new(src.name)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("expression")
        .to_string();
    Ok(Template::new(name, params, move |env| {
        crate::syntax::lower::lower_all(&linked, env, &Runtime::default())
    }))
}
