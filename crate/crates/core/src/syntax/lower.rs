//! Link step (tags, attributes and slots resolved against a schema) and
//! lowering of linked nodes to model expressions under an environment.

use std::sync::Arc;

use crate::expr::{instantiate, ExprError, ExprNode, Kappa, ParamEnv, Value};
use crate::schema::TypeSchema;
use crate::store::{PropertyValue, QName};
use crate::syntax::expr::{eval_expr, truthy, Expr};
use crate::syntax::mex::{Attr, ForSrc, Node, IGNORED_ATTR};
use crate::syntax::{DiagKind, Diagnostic, ParseError, SourceSpan};
use crate::transform::TransformContext;
use crate::typesys::{EntityRef, EntityType, TypeDescriptor};

/// Upper bound on the iterations of one `{for}` block.
const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug)]
pub(crate) struct LConstruct {
    ty: EntityRef,
    schema: Arc<TypeSchema>,
    name: Option<Expr>,
    /// Data properties; the flag marks instance-reference properties, whose
    /// string values are read as qualified names.
    props: Vec<(String, Expr, bool)>,
    slots: Vec<(String, Arc<[LNode]>)>,
}

#[derive(Debug)]
pub(crate) enum LNode {
    Construct(Arc<LConstruct>),
    Ref {
        ty: EntityRef,
        path: Expr,
    },
    For {
        var: String,
        src: ForSrc,
        body: Arc<[LNode]>,
    },
    If {
        cond: Expr,
        then: Arc<[LNode]>,
        els: Arc<[LNode]>,
    },
    Param {
        name: String,
        attrs: Vec<(String, Expr)>,
    },
    Apply {
        path: Expr,
    },
    ApplyRule {
        rule: String,
        args: Vec<Expr>,
    },
}

/// Entity-typed property that receives a child of type `child` (or of
/// unknown type): collection-valued properties first, then the most
/// specific member type, then declaration order.
pub(crate) fn infer_slot(
    ty: &EntityType,
    schema: &TypeSchema,
    child: Option<&EntityRef>,
) -> Option<String> {
    let mut best: Option<((bool, usize), String)> = None;
    for (name, decl) in ty.all_props().iter() {
        if !decl.ty.is_entity_valued() {
            continue;
        }
        let Some(member) = schema.member_entity(decl) else {
            continue;
        };
        if child.is_some_and(|c| !c.is_subtype_of(&member)) {
            continue;
        }
        let key = (decl.is_collection(), member.depth());
        if best.as_ref().is_none_or(|(k, _)| key > *k) {
            best = Some((key, name.to_string()));
        }
    }
    best.map(|(_, n)| n)
}

enum StaticType {
    Known(Vec<EntityRef>),
    Unknown,
}

fn static_types(nodes: &[LNode]) -> StaticType {
    let mut out = Vec::new();
    for n in nodes {
        match n {
            LNode::Construct(c) => out.push(c.ty.clone()),
            LNode::Ref { ty, .. } => out.push(ty.clone()),
            LNode::For { body, .. } => match static_types(body) {
                StaticType::Known(ts) => out.extend(ts),
                StaticType::Unknown => return StaticType::Unknown,
            },
            LNode::If { then, els, .. } => {
                for branch in [then, els] {
                    match static_types(branch) {
                        StaticType::Known(ts) => out.extend(ts),
                        StaticType::Unknown => return StaticType::Unknown,
                    }
                }
            }
            LNode::Param { .. } | LNode::Apply { .. } | LNode::ApplyRule { .. } => {
                return StaticType::Unknown
            }
        }
    }
    if out.is_empty() {
        StaticType::Unknown
    } else {
        StaticType::Known(out)
    }
}

pub(crate) struct Linker<'a> {
    schema: &'a Arc<TypeSchema>,
    diags: Vec<Diagnostic>,
}

pub(crate) fn link_root(
    nodes: &[Node],
    schema: &Arc<TypeSchema>,
) -> Result<Arc<[LNode]>, ParseError> {
    let mut l = Linker::new(schema);
    let out = l.nodes(nodes);
    l.finish(out)
}

impl<'a> Linker<'a> {
    pub fn new(schema: &'a Arc<TypeSchema>) -> Self {
        Linker {
            schema,
            diags: Vec::new(),
        }
    }

    pub fn finish(self, out: Vec<LNode>) -> Result<Arc<[LNode]>, ParseError> {
        if self.diags.is_empty() {
            Ok(out.into())
        } else {
            Err(ParseError {
                diagnostics: self.diags,
            })
        }
    }

    fn diag(&mut self, kind: DiagKind, span: &SourceSpan, message: impl Into<String>) {
        self.diags
            .push(Diagnostic::new(kind, span.clone(), message));
    }

    fn tag(&mut self, tag: &str, span: &SourceSpan) -> Option<EntityRef> {
        let t = self.schema.entity(tag).cloned();
        if t.is_none() {
            self.diag(
                DiagKind::UnknownTag,
                span,
                format!("unknown tag `{tag}` in schema `{}`", self.schema.name()),
            );
        }
        t
    }

    pub fn nodes(&mut self, nodes: &[Node]) -> Vec<LNode> {
        nodes.iter().filter_map(|n| self.node(n)).collect()
    }

    fn node(&mut self, n: &Node) -> Option<LNode> {
        Some(match n {
            Node::Element {
                tag,
                attrs,
                children,
                span,
            } => {
                let ty = self.tag(tag, span)?;
                LNode::Construct(Arc::new(self.construct(ty, attrs, children, span)))
            }
            Node::Ref { tag, path, span } => LNode::Ref {
                ty: self.tag(tag, span)?,
                path: path.clone(),
            },
            Node::Group { span, .. } => {
                self.diag(
                    DiagKind::Syntax,
                    span,
                    "a property group must be a child of an element",
                );
                return None;
            }
            Node::For { var, src, body, .. } => LNode::For {
                var: var.clone(),
                src: src.clone(),
                body: self.nodes(body).into(),
            },
            Node::If {
                cond, then, els, ..
            } => LNode::If {
                cond: cond.clone(),
                then: self.nodes(then).into(),
                els: self.nodes(els).into(),
            },
            Node::Param { name, attrs, .. } => LNode::Param {
                name: name.clone(),
                attrs: attrs
                    .iter()
                    .map(|a| (a.name.clone(), a.value.clone()))
                    .collect(),
            },
            Node::Apply { path, .. } => LNode::Apply { path: path.clone() },
            Node::ApplyRule { rule, args, .. } => LNode::ApplyRule {
                rule: rule.clone(),
                args: args.clone(),
            },
        })
    }

    fn construct(
        &mut self,
        ty: EntityRef,
        attrs: &[Attr],
        children: &[Node],
        span: &SourceSpan,
    ) -> LConstruct {
        let mut name = None;
        let mut props = Vec::new();
        for a in attrs {
            if a.name == IGNORED_ATTR {
                continue;
            }
            if a.name == "name" {
                name = Some(a.value.clone());
                continue;
            }
            match ty.prop(&a.name) {
                None => self.diag(
                    DiagKind::UnknownAttribute,
                    &a.span,
                    format!("{} has no property `{}`", ty.name(), a.name),
                ),
                Some(d) if d.ty.is_entity_valued() => self.diag(
                    DiagKind::UnknownAttribute,
                    &a.span,
                    format!(
                        "`{}` of {} holds elements; give them as children",
                        a.name,
                        ty.name()
                    ),
                ),
                Some(d) => {
                    let iref = matches!(d.ty.innermost(), TypeDescriptor::InstanceRef { .. });
                    props.push((a.name.clone(), a.value.clone(), iref));
                }
            }
        }
        let mut slots: Vec<(String, Vec<LNode>)> = Vec::new();
        let push = |slots: &mut Vec<(String, Vec<LNode>)>, prop: String, n: LNode| match slots
            .iter_mut()
            .find(|(p, _)| *p == prop)
        {
            Some((_, v)) => v.push(n),
            None => slots.push((prop, vec![n])),
        };
        for ch in children {
            if let Node::Group {
                prop,
                children,
                span: gspan,
            } = ch
            {
                match ty.prop(prop) {
                    Some(d) if d.ty.is_entity_valued() => {
                        for n in self.nodes(children) {
                            push(&mut slots, prop.clone(), n);
                        }
                    }
                    _ => self.diag(
                        DiagKind::UnknownAttribute,
                        gspan,
                        format!("{} has no entity-typed property `{prop}`", ty.name()),
                    ),
                }
                continue;
            }
            let Some(n) = self.node(ch) else { continue };
            let slot = match static_types(std::slice::from_ref(&n)) {
                StaticType::Known(types) => {
                    let picks: Vec<Option<String>> = types
                        .iter()
                        .map(|t| infer_slot(&ty, self.schema, Some(t)))
                        .collect();
                    match picks.first() {
                        Some(Some(first)) if picks.iter().all(|p| p.as_ref() == Some(first)) => {
                            Some(first.clone())
                        }
                        _ => {
                            let names: Vec<&str> = types.iter().map(|t| t.name()).collect();
                            self.diag(
                                DiagKind::NoSlot,
                                node_span(ch).unwrap_or(span),
                                format!(
                                    "no single property of {} accepts {}; use a `<.property>` group",
                                    ty.name(),
                                    names.join(", ")
                                ),
                            );
                            None
                        }
                    }
                }
                StaticType::Unknown => {
                    let s = infer_slot(&ty, self.schema, None);
                    if s.is_none() {
                        self.diag(
                            DiagKind::NoSlot,
                            node_span(ch).unwrap_or(span),
                            format!("{} has no entity-typed property", ty.name()),
                        );
                    }
                    s
                }
            };
            if let Some(slot) = slot {
                push(&mut slots, slot, n);
            }
        }
        LConstruct {
            ty,
            schema: self.schema.clone(),
            name,
            props,
            slots: slots.into_iter().map(|(p, v)| (p, v.into())).collect(),
        }
    }
}

fn node_span(n: &Node) -> Option<&SourceSpan> {
    match n {
        Node::Element { span, .. }
        | Node::Ref { span, .. }
        | Node::Group { span, .. }
        | Node::For { span, .. }
        | Node::If { span, .. }
        | Node::Param { span, .. }
        | Node::Apply { span, .. }
        | Node::ApplyRule { span, .. } => Some(span),
    }
}

/// What lowering needs beyond the environment: the transformation context
/// inside rule bodies.
#[derive(Clone, Default)]
pub(crate) struct Runtime {
    pub ctx: Option<TransformContext>,
}

fn to_qnames(v: PropertyValue) -> Result<PropertyValue, ExprError> {
    Ok(match v {
        PropertyValue::Data(crate::store::DataValue::Str(s)) => {
            PropertyValue::QName(QName::parse(&s).map_err(crate::store::StoreError::from)?)
        }
        PropertyValue::Seq(items) => {
            PropertyValue::Seq(items.into_iter().map(to_qnames).collect::<Result<_, _>>()?)
        }
        other => other,
    })
}

fn kappa<F>(env: &ParamEnv, f: F) -> ExprNode
where
    F: Fn(&ParamEnv) -> Result<Vec<ExprNode>, ExprError> + Send + Sync + 'static,
{
    ExprNode::Kappa(Kappa {
        f: Arc::new(f),
        label: None,
        bound: Some(Arc::new(env.clone())),
    })
}

fn integer(v: &Value, what: &str) -> Result<i64, ExprError> {
    match v.as_num() {
        Some(n) if n.fract() == 0.0 && n.abs() < 1e15 => Ok(n as i64),
        _ => Err(ExprError::Computation(format!(
            "range {what} must be an integer, got {v}"
        ))),
    }
}

fn context(rt: &Runtime) -> Result<&TransformContext, ExprError> {
    rt.ctx
        .as_ref()
        .ok_or_else(|| ExprError::Computation("rule application outside a transformation".into()))
}

fn element_arg(v: Value, what: &str) -> Result<crate::expr::ElemHandle, ExprError> {
    match v {
        Value::Elem(h) => Ok(h),
        other => Err(ExprError::Computation(format!(
            "{what} must be a source element, got {}",
            other.kind_name()
        ))),
    }
}

pub(crate) fn lower_all(
    nodes: &Arc<[LNode]>,
    env: &ParamEnv,
    rt: &Runtime,
) -> Result<Vec<ExprNode>, ExprError> {
    let mut out = Vec::new();
    for i in 0..nodes.len() {
        lower(nodes, i, env, rt, &mut out)?;
    }
    Ok(out)
}

fn lower(
    nodes: &Arc<[LNode]>,
    i: usize,
    env: &ParamEnv,
    rt: &Runtime,
    out: &mut Vec<ExprNode>,
) -> Result<(), ExprError> {
    match &nodes[i] {
        LNode::Construct(c) => out.push(construct(c, env, rt)?),
        LNode::Ref { ty, path } => {
            let p = eval_expr(path, env)?.to_string();
            out.push(ExprNode::reference_typed(p, ty));
        }
        LNode::For { .. } | LNode::If { .. } => {
            let (nodes, rt) = (nodes.clone(), rt.clone());
            out.push(kappa(env, move |env| comp(&nodes[i], env, &rt)));
        }
        LNode::Param { name, attrs } => match env.get(name)? {
            Value::Template(t) => {
                let mut args = ParamEnv::new();
                for (k, e) in attrs {
                    args.bind(k.clone(), eval_expr(e, env)?);
                }
                out.push(instantiate(t, &args)?);
            }
            other => {
                return Err(ExprError::ParameterKindMismatch {
                    name: name.clone(),
                    expected: "template".to_string(),
                    actual: other.kind_name().to_string(),
                })
            }
        },
        LNode::Apply { path } => {
            let ctx = context(rt)?;
            for v in eval_expr(path, env)?.items() {
                out.push(ctx.apply(&element_arg(v, "`apply` target")?)?);
            }
        }
        LNode::ApplyRule { rule, args } => {
            let ctx = context(rt)?;
            let r = ctx
                .spec()
                .rule(rule)
                .ok_or_else(|| ExprError::Computation(format!("unknown rule `{rule}`")))?;
            let mut vals = args.iter().map(|a| eval_expr(a, env));
            let source = match vals.next() {
                Some(v) => element_arg(v?, &format!("first argument of `{rule}`"))?,
                None => {
                    return Err(ExprError::Computation(format!(
                        "`{rule}` needs a source element"
                    )))
                }
            };
            let mut extra = ParamEnv::new();
            for (p, v) in r.extra_params.iter().zip(vals) {
                extra.bind(p.name.clone(), v?);
            }
            out.push(ctx.apply_rule(rule, &source, extra)?);
        }
    }
    Ok(())
}

fn comp(n: &LNode, env: &ParamEnv, rt: &Runtime) -> Result<Vec<ExprNode>, ExprError> {
    match n {
        LNode::For { var, src, body } => {
            let items: Vec<Value> = match src {
                ForSrc::Range(lo, hi) => {
                    let lo = integer(&eval_expr(lo, env)?, "start")?;
                    let hi = integer(&eval_expr(hi, env)?, "end")?;
                    if hi >= lo && (hi - lo) as u64 >= MAX_ITERATIONS as u64 {
                        return Err(ExprError::Computation(format!(
                            "range {lo}..{hi} exceeds {MAX_ITERATIONS} iterations"
                        )));
                    }
                    (lo..=hi).map(|k| Value::Num(k as f64)).collect()
                }
                ForSrc::Items(e) => eval_expr(e, env)?.items(),
            };
            let mut out = Vec::new();
            for item in items {
                let inner = env.clone().with(var.clone(), item);
                out.extend(lower_all(body, &inner, rt)?);
            }
            Ok(out)
        }
        LNode::If { cond, then, els } => {
            if truthy(&eval_expr(cond, env)?) {
                lower_all(then, env, rt)
            } else {
                lower_all(els, env, rt)
            }
        }
        _ => unreachable!("only blocks are deferred"),
    }
}

fn construct(c: &LConstruct, env: &ParamEnv, rt: &Runtime) -> Result<ExprNode, ExprError> {
    let is_model = c.ty.is_subtype_of(crate::schema::model_type());
    let mut b = if is_model {
        ExprNode::tag(&c.schema, c.ty.name())?
    } else {
        ExprNode::element(&c.schema, &c.ty)
    };
    if let Some(n) = &c.name {
        b = b.name(eval_expr(n, env)?.to_string());
    }
    for (k, e, iref) in &c.props {
        let mut v = eval_expr(e, env)?.to_property_value()?;
        if *iref {
            v = to_qnames(v)?;
        }
        if !v.is_absent() {
            b = b.prop(k, v)?;
        }
    }
    for (slot, kids) in &c.slots {
        b = b.children(slot, lower_all(kids, env, rt)?)?;
    }
    Ok(b.build())
}
