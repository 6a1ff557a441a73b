use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;

use crate::expr::{ExprError, Template};
use crate::store::{format_number, DataValue, ElemId, Element, PropertyValue, QName, Store};

/// An element of some store, carried as a parameter value (for instance a
/// source element handed to a transformation rule).
#[derive(Clone)]
pub struct ElemHandle {
    store: Arc<Store>,
    id: ElemId,
}

impl ElemHandle {
    pub fn new(store: Arc<Store>, id: ElemId) -> Self {
        ElemHandle { store, id }
    }

    pub fn id(&self) -> ElemId {
        self.id
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn element(&self) -> &Element {
        self.store.get(self.id)
    }

    pub fn name(&self) -> &str {
        self.element().name()
    }

    pub fn qname(&self) -> String {
        self.store.qname(self.id)
    }

    /// Property value lifted into a [`Value`]; element references stay in
    /// the same store.
    pub fn prop(&self, name: &str) -> Value {
        self.lift(self.element().prop(name))
    }

    fn lift(&self, v: &PropertyValue) -> Value {
        match v {
            PropertyValue::Absent => Value::Absent,
            PropertyValue::Data(d) => Value::from(d.clone()),
            PropertyValue::Elem(id) => Value::Elem(ElemHandle::new(self.store.clone(), *id)),
            PropertyValue::QName(q) => Value::QName(q.clone()),
            PropertyValue::Seq(items) => Value::Seq(items.iter().map(|i| self.lift(i)).collect()),
        }
    }
}

impl PartialEq for ElemHandle {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.store, &other.store) && self.id == other.id
    }
}

impl fmt::Debug for ElemHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Elem({})", self.qname())
    }
}

/// Parameter and computation values.
#[derive(Clone, Debug, Default)]
pub enum Value {
    #[default]
    Absent,
    Str(String),
    Num(f64),
    Bool(bool),
    QName(QName),
    Elem(ElemHandle),
    Seq(Vec<Value>),
    Template(Arc<Template>),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Absent, Value::Absent) => true,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Num(a), Value::Num(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::QName(a), Value::QName(b)) => a == b,
            (Value::Elem(a), Value::Elem(b)) => a == b,
            (Value::Seq(a), Value::Seq(b)) => a == b,
            (Value::Template(a), Value::Template(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl From<DataValue> for Value {
    fn from(d: DataValue) -> Self {
        match d {
            DataValue::Str(s) => Value::Str(s),
            DataValue::Num(n) => Value::Num(n),
            DataValue::Bool(b) => Value::Bool(b),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Num(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl Value {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Absent => "null",
            Value::Str(_) => "string",
            Value::Num(_) => "number",
            Value::Bool(_) => "boolean",
            Value::QName(_) => "qname",
            Value::Elem(_) => "element",
            Value::Seq(_) => "sequence",
            Value::Template(_) => "template",
        }
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, Value::Absent)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_elem(&self) -> Option<&ElemHandle> {
        match self {
            Value::Elem(e) => Some(e),
            _ => None,
        }
    }

    /// Items of a sequence; a single value is one item, absence none.
    pub fn items(&self) -> Vec<Value> {
        match self {
            Value::Absent => Vec::new(),
            Value::Seq(items) => items.clone(),
            other => vec![other.clone()],
        }
    }

    /// Converts to a data property value. Elements and templates are not
    /// data and are rejected.
    pub fn to_property_value(&self) -> Result<PropertyValue, ExprError> {
        Ok(match self {
            Value::Absent => PropertyValue::Absent,
            Value::Str(s) => PropertyValue::str(s.clone()),
            Value::Num(n) => PropertyValue::num(*n),
            Value::Bool(b) => PropertyValue::bool(*b),
            Value::QName(q) => PropertyValue::QName(q.clone()),
            Value::Seq(items) => PropertyValue::Seq(
                items
                    .iter()
                    .map(Value::to_property_value)
                    .collect::<Result<_, _>>()?,
            ),
            Value::Elem(e) => {
                return Err(ExprError::Computation(format!(
                    "element {} cannot be used as a data value",
                    e.qname()
                )))
            }
            Value::Template(t) => {
                return Err(ExprError::Computation(format!(
                    "template {} cannot be used as a data value",
                    t.name()
                )))
            }
        })
    }
}

/// Text rendering used by string interpolation.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Absent => f.write_str("null"),
            Value::Str(s) => f.write_str(s),
            Value::Num(n) => f.write_str(&format_number(*n)),
            Value::Bool(b) => write!(f, "{b}"),
            Value::QName(q) => write!(f, "{q}"),
            Value::Elem(e) => f.write_str(e.name()),
            Value::Seq(items) => {
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
            Value::Template(t) => write!(f, "<template {}>", t.name()),
        }
    }
}

/// Parameter environment θ. Lookup of an unbound name is an error.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamEnv {
    values: IndexMap<String, Value>,
}

impl ParamEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, v: impl Into<Value>) -> Self {
        self.bind(name, v);
        self
    }

    pub fn bind(&mut self, name: impl Into<String>, v: impl Into<Value>) {
        self.values.insert(name.into(), v.into());
    }

    pub fn get(&self, name: &str) -> Result<&Value, ExprError> {
        self.values
            .get(name)
            .ok_or_else(|| ExprError::UnboundParameter(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Bindings of `self`, overridden by those of `inner`.
    pub fn overlay(&self, inner: &ParamEnv) -> ParamEnv {
        let mut out = self.clone();
        for (k, v) in &inner.values {
            out.values.insert(k.clone(), v.clone());
        }
        out
    }
}
