//! Model expressions: terms over model creation (μ), element creation (ε),
//! reference (ρ) and computation (κ), their reduction to ground terms and
//! their document-order evaluation into a store.

mod eval;
mod template;
mod value;

use std::any::Any;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::schema::TypeSchema;
use crate::store::{PropertyValue, StoreError};
use crate::typesys::{EntityRef, PropertyDecl};

pub use eval::{
    evaluate, evaluate_atomic, evaluate_observed, reduce, EvalObserver, NoObserver, ReductionGuard,
};
pub use template::{instantiate, ParamDecl, ParamKind, Template};
pub use value::{ElemHandle, ParamEnv, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardLimit {
    Depth,
    Nodes,
}

impl fmt::Display for GuardLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GuardLimit::Depth => "computation nesting depth",
            GuardLimit::Nodes => "produced node count",
        })
    }
}

#[derive(Debug, Error)]
pub enum ExprError {
    #[error("{limit} exceeds the limit of {max}")]
    GuardExceeded { limit: GuardLimit, max: usize },
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("computed child for slot `{slot}` has type {actual}, expected {expected}")]
    KappaTypeError {
        slot: String,
        expected: String,
        actual: String,
    },
    #[error("child for slot `{slot}` has type {actual}, expected {expected}")]
    SlotTypeMismatch {
        slot: String,
        expected: String,
        actual: String,
    },
    #[error("slot `{property}` of {element} holds a single value but received {count}")]
    SlotArityError {
        element: String,
        property: String,
        count: usize,
    },
    #[error("{ty}.{property}: {reason}")]
    InvalidProperty {
        ty: String,
        property: String,
        reason: String,
    },
    #[error("template `{template}` is missing parameter `{name}`")]
    MissingParameter { template: String, name: String },
    #[error("parameter `{name}` expects {expected}, got {actual}")]
    ParameterKindMismatch {
        name: String,
        expected: String,
        actual: String,
    },
    #[error("`{path}` resolves to a {actual}, expected {expected}")]
    ReferenceTypeMismatch {
        path: String,
        expected: String,
        actual: String,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Computation(String),
    #[error(transparent)]
    Nested(Box<dyn std::error::Error + Send + Sync>),
}

pub type TextFn = dyn Fn(&ParamEnv) -> Result<String, ExprError> + Send + Sync;
pub type ValueFn = dyn Fn(&ParamEnv) -> Result<PropertyValue, ExprError> + Send + Sync;
pub type KappaFn = dyn Fn(&ParamEnv) -> Result<Vec<ExprNode>, ExprError> + Send + Sync;
pub type KappaLabel = Arc<dyn Any + Send + Sync>;

/// A literal string or one computed from the environment.
#[derive(Clone)]
pub enum TextExpr {
    Lit(String),
    Computed(Arc<TextFn>),
}

impl TextExpr {
    pub fn computed<F>(f: F) -> Self
    where
        F: Fn(&ParamEnv) -> Result<String, ExprError> + Send + Sync + 'static,
    {
        TextExpr::Computed(Arc::new(f))
    }

    pub fn eval(&self, env: &ParamEnv) -> Result<String, ExprError> {
        match self {
            TextExpr::Lit(s) => Ok(s.clone()),
            TextExpr::Computed(f) => f(env),
        }
    }
}

impl From<&str> for TextExpr {
    fn from(s: &str) -> Self {
        TextExpr::Lit(s.to_string())
    }
}

impl From<String> for TextExpr {
    fn from(s: String) -> Self {
        TextExpr::Lit(s)
    }
}

impl fmt::Debug for TextExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TextExpr::Lit(s) => write!(f, "{s:?}"),
            TextExpr::Computed(_) => f.write_str("<computed>"),
        }
    }
}

/// A literal data value or one computed from the environment.
#[derive(Clone)]
pub enum ValueExpr {
    Lit(PropertyValue),
    Computed(Arc<ValueFn>),
}

impl ValueExpr {
    pub fn computed<F>(f: F) -> Self
    where
        F: Fn(&ParamEnv) -> Result<PropertyValue, ExprError> + Send + Sync + 'static,
    {
        ValueExpr::Computed(Arc::new(f))
    }

    pub fn eval(&self, env: &ParamEnv) -> Result<PropertyValue, ExprError> {
        match self {
            ValueExpr::Lit(v) => Ok(v.clone()),
            ValueExpr::Computed(f) => f(env),
        }
    }
}

impl fmt::Debug for ValueExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueExpr::Lit(v) => write!(f, "{v:?}"),
            ValueExpr::Computed(_) => f.write_str("<computed>"),
        }
    }
}

/// Children connected through one entity-typed property.
#[derive(Clone, Debug)]
pub struct Slot {
    pub property: String,
    pub children: Vec<ExprNode>,
}

/// Payload shared by μ and ε nodes.
#[derive(Clone, Debug)]
pub struct Construct {
    pub ty: EntityRef,
    /// Schema resolving the slot types; for μ also the schema bound to the
    /// new model.
    pub schema: Arc<TypeSchema>,
    pub name: Option<TextExpr>,
    pub props: Vec<(String, ValueExpr)>,
    pub slots: Vec<Slot>,
}

impl Construct {
    pub fn slot_decl(&self, property: &str) -> Option<&PropertyDecl> {
        self.ty.prop(property)
    }

    /// Element type accepted by a slot.
    pub fn slot_type(&self, property: &str) -> Option<EntityRef> {
        self.slot_decl(property)
            .and_then(|d| self.schema.member_entity(d))
    }
}

#[derive(Clone, Debug)]
pub struct RefNode {
    pub path: TextExpr,
    /// Type the referenced element must have, if annotated.
    pub expected: Option<EntityRef>,
}

/// Computation operator: a host function of the environment producing
/// child expressions.
#[derive(Clone)]
pub struct Kappa {
    pub f: Arc<KappaFn>,
    /// Opaque tag handed to evaluation observers.
    pub label: Option<KappaLabel>,
    /// When set, this environment replaces the ambient one for the
    /// computation and everything it produces.
    pub bound: Option<Arc<ParamEnv>>,
}

impl fmt::Debug for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<kappa>")
    }
}

#[derive(Clone, Debug)]
pub enum ExprNode {
    Model(Arc<Construct>),
    Element(Arc<Construct>),
    Ref(Arc<RefNode>),
    Kappa(Kappa),
}

impl ExprNode {
    /// μ node for a new model bound to `schema`.
    pub fn model(schema: &Arc<TypeSchema>) -> Result<ConstructBuilder, ExprError> {
        let ty = schema
            .model_type()
            .cloned()
            .ok_or_else(|| ExprError::InvalidProperty {
                ty: schema.name().to_string(),
                property: String::new(),
                reason: "schema has no model type".to_string(),
            })?;
        Ok(ConstructBuilder::new(true, ty, schema.clone()))
    }

    /// ε node of type `ty`, slot types resolved through `schema`.
    pub fn element(schema: &Arc<TypeSchema>, ty: &EntityRef) -> ConstructBuilder {
        ConstructBuilder::new(false, ty.clone(), schema.clone())
    }

    /// ε node, looking the type up by name. Model types yield μ nodes.
    pub fn tag(schema: &Arc<TypeSchema>, type_name: &str) -> Result<ConstructBuilder, ExprError> {
        let ty = schema
            .entity(type_name)
            .cloned()
            .ok_or_else(|| ExprError::InvalidProperty {
                ty: schema.name().to_string(),
                property: type_name.to_string(),
                reason: "unknown entity type".to_string(),
            })?;
        let is_model = ty.is_subtype_of(crate::schema::model_type());
        Ok(ConstructBuilder::new(is_model, ty, schema.clone()))
    }

    pub fn reference(path: impl Into<TextExpr>) -> Self {
        ExprNode::Ref(Arc::new(RefNode {
            path: path.into(),
            expected: None,
        }))
    }

    pub fn reference_typed(path: impl Into<TextExpr>, expected: &EntityRef) -> Self {
        ExprNode::Ref(Arc::new(RefNode {
            path: path.into(),
            expected: Some(expected.clone()),
        }))
    }

    pub fn kappa<F>(f: F) -> Self
    where
        F: Fn(&ParamEnv) -> Result<Vec<ExprNode>, ExprError> + Send + Sync + 'static,
    {
        ExprNode::Kappa(Kappa {
            f: Arc::new(f),
            label: None,
            bound: None,
        })
    }

    pub fn kappa_labeled<F>(label: KappaLabel, f: F) -> Self
    where
        F: Fn(&ParamEnv) -> Result<Vec<ExprNode>, ExprError> + Send + Sync + 'static,
    {
        ExprNode::Kappa(Kappa {
            f: Arc::new(f),
            label: Some(label),
            bound: None,
        })
    }

    /// Type of the node when known without evaluation.
    pub fn static_type(&self) -> Option<&EntityRef> {
        match self {
            ExprNode::Model(c) | ExprNode::Element(c) => Some(&c.ty),
            ExprNode::Ref(r) => r.expected.as_ref(),
            ExprNode::Kappa(_) => None,
        }
    }

    pub fn construct(&self) -> Option<&Construct> {
        match self {
            ExprNode::Model(c) | ExprNode::Element(c) => Some(c),
            _ => None,
        }
    }

    /// True when the term holds no κ and no computed literals.
    pub fn is_ground(&self) -> bool {
        match self {
            ExprNode::Kappa(_) => false,
            ExprNode::Ref(r) => matches!(r.path, TextExpr::Lit(_)),
            ExprNode::Model(c) | ExprNode::Element(c) => {
                !matches!(c.name, Some(TextExpr::Computed(_)))
                    && c.props.iter().all(|(_, v)| matches!(v, ValueExpr::Lit(_)))
                    && c.slots
                        .iter()
                        .all(|s| s.children.iter().all(ExprNode::is_ground))
            }
        }
    }

    /// Compact rendering of a ground term, used to compare reductions.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out);
        out
    }

    fn render_into(&self, out: &mut String) {
        use std::fmt::Write;
        match self {
            ExprNode::Kappa(_) => out.push('κ'),
            ExprNode::Ref(r) => {
                let _ = write!(out, "ρ({:?})", r.path);
            }
            ExprNode::Model(c) | ExprNode::Element(c) => {
                let op = if matches!(self, ExprNode::Model(_)) {
                    "μ"
                } else {
                    "ε"
                };
                let _ = write!(out, "{op}({}", c.ty.name());
                if let Some(n) = &c.name {
                    let _ = write!(out, " {n:?}");
                }
                for (k, v) in &c.props {
                    let _ = write!(out, " {k}={v:?}");
                }
                for s in &c.slots {
                    let _ = write!(out, " {}:[", s.property);
                    for (i, ch) in s.children.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        ch.render_into(out);
                    }
                    out.push(']');
                }
                out.push(')');
            }
        }
    }
}

/// Builds μ/ε nodes, classifying properties against the node type: data
/// properties go to `prop`, entity-typed properties are slots.
pub struct ConstructBuilder {
    is_model: bool,
    c: Construct,
}

impl ConstructBuilder {
    fn new(is_model: bool, ty: EntityRef, schema: Arc<TypeSchema>) -> Self {
        ConstructBuilder {
            is_model,
            c: Construct {
                ty,
                schema,
                name: None,
                props: Vec::new(),
                slots: Vec::new(),
            },
        }
    }

    pub fn name(mut self, name: impl Into<TextExpr>) -> Self {
        self.c.name = Some(name.into());
        self
    }

    pub fn prop(self, property: &str, v: PropertyValue) -> Result<Self, ExprError> {
        self.prop_expr(property, ValueExpr::Lit(v))
    }

    pub fn prop_expr(mut self, property: &str, v: ValueExpr) -> Result<Self, ExprError> {
        let decl = self.decl(property)?;
        if property == "name" {
            return Err(self.invalid(property, "use the name of the node instead"));
        }
        if decl.ty.is_entity_valued() {
            return Err(self.invalid(property, "entity-typed property must be given as a slot"));
        }
        self.c.props.push((property.to_string(), v));
        Ok(self)
    }

    pub fn child(self, property: &str, node: ExprNode) -> Result<Self, ExprError> {
        self.children(property, vec![node])
    }

    pub fn children(mut self, property: &str, nodes: Vec<ExprNode>) -> Result<Self, ExprError> {
        let decl = self.decl(property)?;
        if !decl.ty.is_entity_valued() {
            return Err(self.invalid(property, "data property cannot hold child expressions"));
        }
        let expected = self
            .c
            .schema
            .member_entity(&decl)
            .ok_or_else(|| self.invalid(property, "slot type does not resolve"))?;
        for n in &nodes {
            if let Some(t) = n.static_type() {
                if !t.is_subtype_of(&expected) {
                    return Err(ExprError::SlotTypeMismatch {
                        slot: property.to_string(),
                        expected: expected.name().to_string(),
                        actual: t.name().to_string(),
                    });
                }
            }
        }
        match self.c.slots.iter_mut().find(|s| s.property == property) {
            Some(slot) => slot.children.extend(nodes),
            None => self.c.slots.push(Slot {
                property: property.to_string(),
                children: nodes,
            }),
        }
        Ok(self)
    }

    pub fn build(self) -> ExprNode {
        if self.is_model {
            ExprNode::Model(Arc::new(self.c))
        } else {
            ExprNode::Element(Arc::new(self.c))
        }
    }

    fn decl(&self, property: &str) -> Result<PropertyDecl, ExprError> {
        self.c
            .ty
            .prop(property)
            .cloned()
            .ok_or_else(|| self.invalid(property, "no such property"))
    }

    fn invalid(&self, property: &str, reason: &str) -> ExprError {
        ExprError::InvalidProperty {
            ty: self.c.ty.name().to_string(),
            property: property.to_string(),
            reason: reason.to_string(),
        }
    }
}
