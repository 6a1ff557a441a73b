use std::sync::Arc;

use crate::expr::{ExprError, ParamEnv, Value};
use crate::syntax::lexer::{Cursor, Lexer, StrPart, Tok};
use crate::syntax::{Diagnostic, SourceSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

/// Expressions of the computation forms: attribute values, interpolation
/// holes, conditions, ranges and rule arguments.
#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Bool(bool),
    Null,
    Str(Vec<StrSeg>),
    /// A variable followed by property navigation.
    Path(Vec<String>, SourceSpan),
    List(Vec<Expr>),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone)]
pub enum StrSeg {
    Lit(String),
    Hole(Expr),
}

impl Expr {
    pub fn string(s: impl Into<String>) -> Self {
        Expr::Str(vec![StrSeg::Lit(s.into())])
    }

    /// The literal text of an interpolation-free string.
    pub fn as_literal_str(&self) -> Option<String> {
        match self {
            Expr::Str(segs) => segs
                .iter()
                .map(|s| match s {
                    StrSeg::Lit(l) => Some(l.as_str()),
                    StrSeg::Hole(_) => None,
                })
                .collect(),
            _ => None,
        }
    }
}

pub(crate) fn string_literal(c: &mut Cursor, parts: Vec<StrPart>) -> Result<Expr, Diagnostic> {
    let file: Arc<str> = c.peek().span.file.clone();
    let mut segs = Vec::new();
    for p in parts {
        match p {
            StrPart::Lit(s) => segs.push(StrSeg::Lit(s)),
            StrPart::Interp { src, line, column } => {
                let toks = Lexer::new(&src, &file, line, column).tokenize()?;
                let mut inner = Cursor::new(toks);
                let e = parse_expr(&mut inner)?;
                if !inner.at_eof() {
                    return Err(inner.error("expected end of interpolation"));
                }
                segs.push(StrSeg::Hole(e));
            }
        }
    }
    Ok(Expr::Str(segs))
}

pub(crate) fn parse_expr(c: &mut Cursor) -> Result<Expr, Diagnostic> {
    parse_or(c)
}

fn parse_or(c: &mut Cursor) -> Result<Expr, Diagnostic> {
    let mut l = parse_and(c)?;
    while c.eat("||") {
        let r = parse_and(c)?;
        l = Expr::Bin(BinOp::Or, Box::new(l), Box::new(r));
    }
    Ok(l)
}

fn parse_and(c: &mut Cursor) -> Result<Expr, Diagnostic> {
    let mut l = parse_cmp(c)?;
    while c.eat("&&") {
        let r = parse_cmp(c)?;
        l = Expr::Bin(BinOp::And, Box::new(l), Box::new(r));
    }
    Ok(l)
}

fn parse_cmp(c: &mut Cursor) -> Result<Expr, Diagnostic> {
    let l = parse_add(c)?;
    let op = [
        ("==", BinOp::Eq),
        ("!=", BinOp::Ne),
        ("<=", BinOp::Le),
        (">=", BinOp::Ge),
        ("<", BinOp::Lt),
        (">", BinOp::Gt),
    ]
    .into_iter()
    .find(|(p, _)| c.at(p));
    match op {
        Some((_, op)) => {
            c.bump();
            let r = parse_add(c)?;
            Ok(Expr::Bin(op, Box::new(l), Box::new(r)))
        }
        None => Ok(l),
    }
}

fn parse_add(c: &mut Cursor) -> Result<Expr, Diagnostic> {
    let mut l = parse_mul(c)?;
    loop {
        let op = if c.eat("+") {
            BinOp::Add
        } else if c.eat("-") {
            BinOp::Sub
        } else {
            return Ok(l);
        };
        let r = parse_mul(c)?;
        l = Expr::Bin(op, Box::new(l), Box::new(r));
    }
}

fn parse_mul(c: &mut Cursor) -> Result<Expr, Diagnostic> {
    let mut l = parse_unary(c)?;
    while c.eat("*") {
        let r = parse_unary(c)?;
        l = Expr::Bin(BinOp::Mul, Box::new(l), Box::new(r));
    }
    Ok(l)
}

fn parse_unary(c: &mut Cursor) -> Result<Expr, Diagnostic> {
    if c.eat("-") {
        return Ok(match parse_unary(c)? {
            Expr::Num(n) => Expr::Num(-n),
            e => Expr::Neg(Box::new(e)),
        });
    }
    if c.eat("!") {
        return Ok(Expr::Not(Box::new(parse_unary(c)?)));
    }
    parse_primary(c)
}

/// Attribute value without braces: a literal, possibly negated, or a list.
pub(crate) fn parse_unary_attr(c: &mut Cursor) -> Result<Expr, Diagnostic> {
    let span = c.peek().span.clone();
    let e = parse_unary(c)?;
    if matches!(e, Expr::Path(..)) {
        return Err(Diagnostic::new(
            crate::syntax::DiagKind::Syntax,
            span,
            "attribute values are literals; wrap expressions in `{...}`",
        ));
    }
    Ok(e)
}

fn parse_primary(c: &mut Cursor) -> Result<Expr, Diagnostic> {
    let t = c.peek().clone();
    match t.tok {
        Tok::Num(n) => {
            c.bump();
            Ok(Expr::Num(n))
        }
        Tok::Str(parts) => {
            let e = string_literal(c, parts)?;
            c.bump();
            Ok(e)
        }
        Tok::Ident(w) if w == "true" || w == "false" => {
            c.bump();
            Ok(Expr::Bool(w == "true"))
        }
        Tok::Ident(w) if w == "null" => {
            c.bump();
            Ok(Expr::Null)
        }
        Tok::Ident(w) if !w.starts_with('$') => {
            c.bump();
            let mut path = vec![w];
            let mut span = t.span.clone();
            while c.at(".") && matches!(c.peek_at(1).tok, Tok::Ident(_)) {
                c.bump();
                let (seg, s) = c.ident("property name")?;
                span.length = s.column + s.length - span.column.min(s.column);
                path.push(seg);
            }
            Ok(Expr::Path(path, span))
        }
        Tok::Punct("(") => {
            c.bump();
            let e = parse_expr(c)?;
            c.expect(")")?;
            Ok(e)
        }
        Tok::Punct("[") => {
            c.bump();
            let mut items = Vec::new();
            while !c.at("]") {
                items.push(parse_expr(c)?);
                if !c.eat(",") {
                    break;
                }
            }
            c.expect("]")?;
            Ok(Expr::List(items))
        }
        _ => Err(c.error("expected an expression")),
    }
}

fn computation(msg: String) -> ExprError {
    ExprError::Computation(msg)
}

pub fn truthy(v: &Value) -> bool {
    match v {
        Value::Absent => false,
        Value::Bool(b) => *b,
        Value::Num(n) => *n != 0.0,
        Value::Str(s) => !s.is_empty(),
        Value::Seq(items) => !items.is_empty(),
        _ => true,
    }
}

fn navigate(v: Value, seg: &str) -> Result<Value, ExprError> {
    match v {
        Value::Absent => Ok(Value::Absent),
        Value::Elem(h) => {
            if h.element().ty().prop(seg).is_none() {
                return Err(computation(format!(
                    "{} has no property `{seg}`",
                    h.element().ty().name()
                )));
            }
            Ok(h.prop(seg))
        }
        Value::Seq(items) => {
            let mut out = Vec::new();
            for i in items {
                match navigate(i, seg)? {
                    Value::Seq(inner) => out.extend(inner),
                    Value::Absent => {}
                    v => out.push(v),
                }
            }
            Ok(Value::Seq(out))
        }
        other => Err(computation(format!(
            "cannot read `{seg}` of a {}",
            other.kind_name()
        ))),
    }
}

fn equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Absent, other) | (other, Value::Absent) => {
            matches!(other, Value::Absent) || matches!(other, Value::Seq(v) if v.is_empty())
        }
        _ => a == b,
    }
}

fn num(v: &Value, op: &str) -> Result<f64, ExprError> {
    v.as_num()
        .ok_or_else(|| computation(format!("`{op}` expects numbers, got {}", v.kind_name())))
}

/// Evaluates an expression against the environment.
pub fn eval_expr(e: &Expr, env: &ParamEnv) -> Result<Value, ExprError> {
    Ok(match e {
        Expr::Num(n) => Value::Num(*n),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Null => Value::Absent,
        Expr::Str(segs) => match segs.as_slice() {
            [StrSeg::Lit(s)] => Value::Str(s.clone()),
            _ => {
                let mut out = String::new();
                for s in segs {
                    match s {
                        StrSeg::Lit(l) => out.push_str(l),
                        StrSeg::Hole(h) => out.push_str(&eval_expr(h, env)?.to_string()),
                    }
                }
                Value::Str(out)
            }
        },
        Expr::Path(path, _) => {
            let mut v = env.get(&path[0])?.clone();
            for seg in &path[1..] {
                v = navigate(v, seg)?;
            }
            v
        }
        Expr::List(items) => Value::Seq(
            items
                .iter()
                .map(|i| eval_expr(i, env))
                .collect::<Result<_, _>>()?,
        ),
        Expr::Neg(x) => Value::Num(-num(&eval_expr(x, env)?, "-")?),
        Expr::Not(x) => Value::Bool(!truthy(&eval_expr(x, env)?)),
        Expr::Bin(op, l, r) => {
            let a = eval_expr(l, env)?;
            match op {
                BinOp::And => return Ok(Value::Bool(truthy(&a) && truthy(&eval_expr(r, env)?))),
                BinOp::Or => return Ok(Value::Bool(truthy(&a) || truthy(&eval_expr(r, env)?))),
                _ => {}
            }
            let b = eval_expr(r, env)?;
            match op {
                BinOp::Add => match (&a, &b) {
                    (Value::Num(x), Value::Num(y)) => Value::Num(x + y),
                    _ => Value::Str(format!("{a}{b}")),
                },
                BinOp::Sub => Value::Num(num(&a, "-")? - num(&b, "-")?),
                BinOp::Mul => Value::Num(num(&a, "*")? * num(&b, "*")?),
                BinOp::Eq => Value::Bool(equal(&a, &b)),
                BinOp::Ne => Value::Bool(!equal(&a, &b)),
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    let ord = match (&a, &b) {
                        (Value::Str(x), Value::Str(y)) => x.partial_cmp(y),
                        _ => num(&a, "comparison")?.partial_cmp(&num(&b, "comparison")?),
                    };
                    let Some(ord) = ord else {
                        return Ok(Value::Bool(false));
                    };
                    Value::Bool(match op {
                        BinOp::Lt => ord.is_lt(),
                        BinOp::Le => ord.is_le(),
                        BinOp::Gt => ord.is_gt(),
                        _ => ord.is_ge(),
                    })
                }
                BinOp::And | BinOp::Or => unreachable!("handled above"),
            }
        }
    })
}
