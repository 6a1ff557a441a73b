use std::fmt;
use std::sync::Arc;

use crate::expr::{ExprError, ExprNode, Kappa, KappaFn, ParamEnv, Value};
use crate::typesys::EntityRef;

/// Semantic kind of a template parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamKind {
    String,
    Number,
    Boolean,
    Template,
    /// An element, optionally restricted to a subtype of the given entity.
    Element(Option<EntityRef>),
    Any,
}

impl ParamKind {
    pub fn admits(&self, v: &Value) -> bool {
        match (self, v) {
            (ParamKind::Any, _) => true,
            (ParamKind::String, Value::Str(_))
            | (ParamKind::Number, Value::Num(_))
            | (ParamKind::Boolean, Value::Bool(_))
            | (ParamKind::Template, Value::Template(_)) => true,
            (ParamKind::Element(None), Value::Elem(_)) => true,
            (ParamKind::Element(Some(t)), Value::Elem(e)) => e.element().ty().is_subtype_of(t),
            _ => false,
        }
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKind::String => f.write_str("string"),
            ParamKind::Number => f.write_str("number"),
            ParamKind::Boolean => f.write_str("boolean"),
            ParamKind::Template => f.write_str("template"),
            ParamKind::Element(None) => f.write_str("element"),
            ParamKind::Element(Some(t)) => f.write_str(t.name()),
            ParamKind::Any => f.write_str("any"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamDecl {
    pub name: String,
    pub kind: ParamKind,
}

impl ParamDecl {
    pub fn new(name: impl Into<String>, kind: ParamKind) -> Self {
        ParamDecl {
            name: name.into(),
            kind,
        }
    }
}

/// A parameterized model expression.
pub struct Template {
    name: String,
    params: Vec<ParamDecl>,
    body: Arc<KappaFn>,
}

impl fmt::Debug for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Template")
            .field("name", &self.name)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl Template {
    pub fn new<F>(name: impl Into<String>, params: Vec<ParamDecl>, body: F) -> Self
    where
        F: Fn(&ParamEnv) -> Result<Vec<ExprNode>, ExprError> + Send + Sync + 'static,
    {
        Template {
            name: name.into(),
            params,
            body: Arc::new(body),
        }
    }

    /// A zero-parameter template around a fixed expression.
    pub fn constant(name: impl Into<String>, e: ExprNode) -> Self {
        Template::new(name, Vec::new(), move |_| Ok(vec![e.clone()]))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[ParamDecl] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<&ParamDecl> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Checks that every declared parameter is bound with the declared kind.
    pub fn check_args(&self, env: &ParamEnv) -> Result<(), ExprError> {
        for p in &self.params {
            let v = env.get(&p.name).map_err(|_| ExprError::MissingParameter {
                template: self.name.clone(),
                name: p.name.clone(),
            })?;
            if !p.kind.admits(v) {
                return Err(ExprError::ParameterKindMismatch {
                    name: p.name.clone(),
                    expected: p.kind.to_string(),
                    actual: v.kind_name().to_string(),
                });
            }
        }
        Ok(())
    }

    /// Applies the body directly.
    pub fn apply(&self, env: &ParamEnv) -> Result<Vec<ExprNode>, ExprError> {
        (self.body)(env)
    }
}

/// Binds `env` to the template's parameters. The result is a computation
/// node that evaluates the body under `env`, whatever environment it is
/// later evaluated in.
pub fn instantiate(t: &Arc<Template>, env: &ParamEnv) -> Result<ExprNode, ExprError> {
    t.check_args(env)?;
    Ok(ExprNode::Kappa(Kappa {
        f: t.body.clone(),
        label: None,
        bound: Some(Arc::new(env.clone())),
    }))
}
