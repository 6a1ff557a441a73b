//! The model store: an arena of elements, nested model namespaces rooted at
//! a universal root model, property records with merge semantics, inverse
//! property maintenance and qualified name resolution.

mod qname;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

pub use qname::{QName, QNameError, QNameKind};

use crate::schema::{model_type, universal_schema, TypeSchema};
use crate::typesys::{EntityRef, PropertyDecl, TypeDescriptor};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error(transparent)]
    Path(#[from] QNameError),
    #[error("name `{name}` already used in model `{model}`")]
    DuplicateName { model: String, name: String },
    #[error("type `{ty}` is not part of schema `{schema}`")]
    TypeNotInSchema { ty: String, schema: String },
    #[error("{element}.{property}: {message}")]
    BadPropertyValue {
        element: String,
        property: String,
        message: String,
    },
    #[error("schema `{0}` has not been validated")]
    InvalidSchema(String),
    #[error("unknown element {0}")]
    UnknownElement(String),
    #[error("`{0}` is not a model")]
    NotAModel(String),
    #[error("cannot resolve `{path}` from `{from}`")]
    Unresolved { path: String, from: String },
}

/// Index of an element inside its [`Store`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElemId(u32);

impl ElemId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ElemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataValue {
    Str(String),
    Num(f64),
    Bool(bool),
}

impl fmt::Display for DataValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataValue::Str(s) => f.write_str(s),
            DataValue::Num(n) => f.write_str(&format_number(*n)),
            DataValue::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Renders integral numbers without a fractional part, everything else in
/// the shortest form that reads back to the same value.
pub fn format_number(n: f64) -> String {
    if n.is_finite() && n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum PropertyValue {
    #[default]
    Absent,
    Data(DataValue),
    Elem(ElemId),
    QName(QName),
    Seq(Vec<PropertyValue>),
}

impl PropertyValue {
    pub fn str(s: impl Into<String>) -> Self {
        PropertyValue::Data(DataValue::Str(s.into()))
    }

    pub fn num(n: f64) -> Self {
        PropertyValue::Data(DataValue::Num(n))
    }

    pub fn bool(b: bool) -> Self {
        PropertyValue::Data(DataValue::Bool(b))
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, PropertyValue::Absent)
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            PropertyValue::Data(DataValue::Str(s)) => Some(s),
            _ => None,
        }
    }

    pub fn as_elem(&self) -> Option<ElemId> {
        match self {
            PropertyValue::Elem(id) => Some(*id),
            _ => None,
        }
    }

    /// Element ids held directly or inside a sequence.
    pub fn elems(&self) -> Vec<ElemId> {
        match self {
            PropertyValue::Elem(id) => vec![*id],
            PropertyValue::Seq(items) => items.iter().flat_map(|v| v.elems()).collect(),
            _ => Vec::new(),
        }
    }

    /// Items of a sequence; a single value counts as one item, absence as none.
    pub fn items(&self) -> Vec<&PropertyValue> {
        match self {
            PropertyValue::Absent => Vec::new(),
            PropertyValue::Seq(items) => items.iter().collect(),
            other => vec![other],
        }
    }
}

pub type PropertyRecord = IndexMap<String, PropertyValue>;

/// An entity-valued property assignment, kept in the order it was made.
/// Derived links were added by inverse maintenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub property: String,
    pub target: ElemId,
    pub derived: bool,
}

#[derive(Debug, Clone)]
struct Namespace {
    schema: Arc<TypeSchema>,
    members: IndexMap<String, ElemId>,
    anon: HashMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct Element {
    name: String,
    path: Vec<String>,
    ty: EntityRef,
    props: PropertyRecord,
    owner: Option<ElemId>,
    namespace: Option<Namespace>,
    container: Option<(ElemId, String)>,
    links: Vec<Link>,
}

static ABSENT: PropertyValue = PropertyValue::Absent;

impl Element {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ty(&self) -> &EntityRef {
        &self.ty
    }

    pub fn props(&self) -> &PropertyRecord {
        &self.props
    }

    pub fn prop(&self, name: &str) -> &PropertyValue {
        self.props.get(name).unwrap_or(&ABSENT)
    }

    /// The model whose namespace holds this element; `None` for the root.
    pub fn owner(&self) -> Option<ElemId> {
        self.owner
    }

    pub fn is_model(&self) -> bool {
        self.namespace.is_some()
    }

    pub fn schema(&self) -> Option<&Arc<TypeSchema>> {
        self.namespace.as_ref().map(|n| &n.schema)
    }

    /// Members of the namespace, in insertion order. Empty for non-models.
    pub fn members(&self) -> impl Iterator<Item = (&str, ElemId)> {
        self.namespace
            .iter()
            .flat_map(|n| n.members.iter().map(|(k, v)| (k.as_str(), *v)))
    }

    /// Element and property through which this element was constructed as
    /// a child, if any.
    pub fn container(&self) -> Option<(ElemId, &str)> {
        self.container.as_ref().map(|(id, p)| (*id, p.as_str()))
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn path(&self) -> &[String] {
        &self.path
    }
}

/// Arena of elements rooted at a universal root model.
#[derive(Debug, Clone)]
pub struct Store {
    elements: Vec<Element>,
}

impl Default for Store {
    fn default() -> Self {
        Self::new()
    }
}

impl Store {
    pub fn new() -> Self {
        let root = Element {
            name: String::new(),
            path: Vec::new(),
            ty: model_type().clone(),
            props: PropertyRecord::new(),
            owner: None,
            namespace: Some(Namespace {
                schema: universal_schema().clone(),
                members: IndexMap::new(),
                anon: HashMap::new(),
            }),
            container: None,
            links: Vec::new(),
        };
        Store {
            elements: vec![root],
        }
    }

    pub fn root(&self) -> ElemId {
        ElemId(0)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ids(&self) -> impl Iterator<Item = ElemId> {
        (0..self.elements.len() as u32).map(ElemId)
    }

    pub fn contains(&self, id: ElemId) -> bool {
        id.index() < self.elements.len()
    }

    pub fn get(&self, id: ElemId) -> &Element {
        &self.elements[id.index()]
    }

    fn get_mut(&mut self, id: ElemId) -> &mut Element {
        &mut self.elements[id.index()]
    }

    fn checked(&self, id: ElemId) -> Result<&Element, StoreError> {
        self.elements
            .get(id.index())
            .ok_or_else(|| StoreError::UnknownElement(id.to_string()))
    }

    fn checked_model(&self, id: ElemId) -> Result<&Element, StoreError> {
        let e = self.checked(id)?;
        if e.is_model() {
            Ok(e)
        } else {
            Err(StoreError::NotAModel(self.qname(id)))
        }
    }

    /// Absolute qualified name; `/` for the root.
    pub fn qname(&self, id: ElemId) -> String {
        format!("/{}", self.get(id).path.join("/"))
    }

    pub fn lookup(&self, model: ElemId, name: &str) -> Option<ElemId> {
        self.get(model)
            .namespace
            .as_ref()
            .and_then(|n| n.members.get(name).copied())
    }

    /// Direct members of a model, in creation order.
    pub fn members(&self, model: ElemId) -> Vec<ElemId> {
        self.get(model).members().map(|(_, id)| id).collect()
    }

    /// The model element itself followed by every element in it and in its
    /// nested models, depth first.
    pub fn closure(&self, model: ElemId) -> Vec<ElemId> {
        let mut out = vec![model];
        let mut i = 0;
        while i < out.len() {
            let id = out[i];
            i += 1;
            out.extend(self.members(id));
        }
        out
    }

    /// Innermost model whose namespace (transitively) contains `id`.
    pub fn enclosing_model(&self, id: ElemId) -> ElemId {
        self.get(id).owner.unwrap_or(self.root())
    }

    /// Next `Type#k` name not yet used in the model.
    pub fn fresh_name(&mut self, model: ElemId, ty: &EntityRef) -> String {
        let taken: Vec<String> = self
            .get(model)
            .members()
            .map(|(k, _)| k.to_string())
            .collect();
        let ns = self
            .get_mut(model)
            .namespace
            .as_mut()
            .expect("fresh_name on a model");
        let counter = ns.anon.entry(ty.name().to_string()).or_insert(0);
        loop {
            *counter += 1;
            let candidate = format!("{}#{}", ty.name(), counter);
            if !taken.contains(&candidate) {
                return candidate;
            }
        }
    }

    pub fn new_element(
        &mut self,
        model: ElemId,
        name: &str,
        ty: &EntityRef,
        pr: PropertyRecord,
    ) -> Result<ElemId, StoreError> {
        let m = self.checked_model(model)?;
        let schema = m.namespace.as_ref().expect("model").schema.clone();
        if !schema.contains_entity(ty) {
            return Err(StoreError::TypeNotInSchema {
                ty: ty.qualified(),
                schema: schema.name().to_string(),
            });
        }
        QName::simple(name)?;
        if self.lookup(model, name).is_some() {
            return Err(StoreError::DuplicateName {
                model: self.qname(model),
                name: name.to_string(),
            });
        }
        let mut path = m.path.clone();
        path.push(name.to_string());
        let display = format!("/{}", path.join("/"));
        let mut props = PropertyRecord::new();
        for (k, v) in pr {
            let decl = self.property_decl(&display, ty, &k)?;
            if k == "name" {
                if v.as_str() != Some(name) {
                    return Err(bad(
                        &display,
                        &k,
                        "name property must equal the element name",
                    ));
                }
            } else {
                self.check_shape(&display, &k, &decl, &v)?;
            }
            let v = match v {
                PropertyValue::Absent | PropertyValue::Seq(_) => v,
                single if decl.is_collection() => PropertyValue::Seq(vec![single]),
                single => single,
            };
            if !v.is_absent() {
                props.insert(k, v);
            }
        }
        if ty.prop("name").is_some() {
            props.insert("name".to_string(), PropertyValue::str(name));
            let name_first: PropertyRecord = std::iter::once((
                "name".to_string(),
                props.shift_remove("name").expect("just inserted"),
            ))
            .chain(props)
            .collect();
            props = name_first;
        }

        let id = ElemId(self.elements.len() as u32);
        let links: Vec<Link> = props
            .iter()
            .flat_map(|(k, v)| {
                v.elems().into_iter().map(move |t| Link {
                    property: k.clone(),
                    target: t,
                    derived: false,
                })
            })
            .collect();
        self.elements.push(Element {
            name: name.to_string(),
            path,
            ty: ty.clone(),
            props,
            owner: Some(model),
            namespace: None,
            container: None,
            links: links.clone(),
        });
        self.get_mut(model)
            .namespace
            .as_mut()
            .expect("model")
            .members
            .insert(name.to_string(), id);
        for l in links {
            self.on_link_added(id, &l.property, l.target);
        }
        Ok(id)
    }

    pub fn new_model(
        &mut self,
        model: ElemId,
        name: &str,
        schema: &Arc<TypeSchema>,
        pr: PropertyRecord,
    ) -> Result<ElemId, StoreError> {
        if !schema.is_validated() {
            return Err(StoreError::InvalidSchema(schema.name().to_string()));
        }
        let mt = schema
            .model_type()
            .ok_or_else(|| StoreError::InvalidSchema(schema.name().to_string()))?
            .clone();
        let id = self.new_element(model, name, &mt, pr)?;
        self.get_mut(id).namespace = Some(Namespace {
            schema: schema.clone(),
            members: IndexMap::new(),
            anon: HashMap::new(),
        });
        Ok(id)
    }

    /// Merges `pr` into the element's record: scalar properties are
    /// overridden, collection properties are concatenated.
    pub fn update_element(
        &mut self,
        model: ElemId,
        x: ElemId,
        pr: PropertyRecord,
    ) -> Result<(), StoreError> {
        self.checked_model(model)?;
        let el = self.checked(x)?;
        if el.owner != Some(model) {
            return Err(StoreError::UnknownElement(format!(
                "{} in {}",
                self.qname(x),
                self.qname(model)
            )));
        }
        let display = self.qname(x);
        let ty = el.ty.clone();
        let mut decls = Vec::with_capacity(pr.len());
        for (k, v) in &pr {
            let decl = self.property_decl(&display, &ty, k)?;
            if k == "name" {
                if !v.is_absent() && v.as_str() != Some(el.name.as_str()) {
                    return Err(bad(&display, k, "elements cannot be renamed"));
                }
            } else {
                self.check_shape(&display, k, &decl, v)?;
            }
            decls.push(decl);
        }
        for ((k, v), decl) in pr.into_iter().zip(decls) {
            if k == "name" || v.is_absent() {
                continue;
            }
            if decl.is_collection() {
                let items = match v {
                    PropertyValue::Seq(items) => items,
                    other => vec![other],
                };
                for item in items {
                    self.append_item(x, &k, item);
                }
            } else {
                self.set_scalar(x, &k, v, false);
            }
        }
        Ok(())
    }

    /// Records that `child` was constructed as the value of `parent.prop`.
    pub(crate) fn set_container(&mut self, child: ElemId, parent: ElemId, prop: &str) {
        self.get_mut(child).container = Some((parent, prop.to_string()));
    }

    fn append_item(&mut self, x: ElemId, prop: &str, item: PropertyValue) {
        if let PropertyValue::Elem(t) = item {
            let already = self.get(x).prop(prop).elems().contains(&t);
            if already && self.has_inverse(x, prop) {
                if let Some(l) = self
                    .get_mut(x)
                    .links
                    .iter_mut()
                    .find(|l| l.property == prop && l.target == t)
                {
                    l.derived = false;
                }
                return;
            }
            self.push_item(x, prop, PropertyValue::Elem(t));
            self.get_mut(x).links.push(Link {
                property: prop.to_string(),
                target: t,
                derived: false,
            });
            self.on_link_added(x, prop, t);
        } else {
            self.push_item(x, prop, item);
        }
    }

    fn push_item(&mut self, x: ElemId, prop: &str, item: PropertyValue) {
        let slot = self
            .get_mut(x)
            .props
            .entry(prop.to_string())
            .or_insert(PropertyValue::Seq(Vec::new()));
        match slot {
            PropertyValue::Seq(items) => items.push(item),
            other => {
                let prev = std::mem::take(other);
                *other = PropertyValue::Seq(vec![prev, item]);
            }
        }
    }

    fn set_scalar(&mut self, x: ElemId, prop: &str, v: PropertyValue, derived: bool) {
        let old = self
            .get_mut(x)
            .props
            .insert(prop.to_string(), v.clone())
            .unwrap_or_default();
        for o in old.elems() {
            self.remove_link(x, prop, o);
            self.on_link_removed(x, prop, o);
        }
        for t in v.elems() {
            self.get_mut(x).links.push(Link {
                property: prop.to_string(),
                target: t,
                derived,
            });
            self.on_link_added(x, prop, t);
        }
    }

    fn remove_link(&mut self, x: ElemId, prop: &str, target: ElemId) {
        let links = &mut self.get_mut(x).links;
        if let Some(pos) = links
            .iter()
            .rposition(|l| l.property == prop && l.target == target)
        {
            links.remove(pos);
        }
    }

    fn has_inverse(&self, x: ElemId, prop: &str) -> bool {
        !self.inverse_targets(x, prop).is_empty()
    }

    /// Properties mirroring `x.prop`, with the entity type their owner must have.
    fn inverse_targets(&self, x: ElemId, prop: &str) -> Vec<(String, EntityRef)> {
        let el = self.get(x);
        let Some(owner) = el.owner else {
            return Vec::new();
        };
        let schema = self.get(owner).schema().expect("owner is a model");
        let mut out = Vec::new();
        for pair in schema.inverse_pairs() {
            if pair.a_prop == prop && el.ty.is_subtype_of(&pair.a) {
                out.push((pair.b_prop.clone(), pair.b.clone()));
            }
            if pair.b_prop == prop && el.ty.is_subtype_of(&pair.b) {
                out.push((pair.a_prop.clone(), pair.a.clone()));
            }
        }
        out
    }

    fn on_link_added(&mut self, x: ElemId, prop: &str, b: ElemId) {
        for (q, bt) in self.inverse_targets(x, prop) {
            if !self.get(b).ty.is_subtype_of(&bt) {
                continue;
            }
            let Some(decl) = self.get(b).ty.prop(&q).cloned() else {
                continue;
            };
            if decl.is_collection() {
                if self.get(b).prop(&q).elems().contains(&x) {
                    continue;
                }
                self.push_item(b, &q, PropertyValue::Elem(x));
                self.get_mut(b).links.push(Link {
                    property: q.clone(),
                    target: x,
                    derived: true,
                });
                self.on_link_added(b, &q, x);
            } else {
                if self.get(b).prop(&q).as_elem() == Some(x) {
                    continue;
                }
                self.set_scalar(b, &q, PropertyValue::Elem(x), true);
            }
        }
    }

    fn on_link_removed(&mut self, x: ElemId, prop: &str, b: ElemId) {
        for (q, _) in self.inverse_targets(x, prop) {
            let Some(decl) = self.get(b).ty.prop(&q).cloned() else {
                continue;
            };
            if decl.is_collection() {
                let removed = match self.get_mut(b).props.get_mut(&q) {
                    Some(PropertyValue::Seq(items)) => {
                        match items.iter().position(|v| v.as_elem() == Some(x)) {
                            Some(pos) => {
                                items.remove(pos);
                                true
                            }
                            None => false,
                        }
                    }
                    _ => false,
                };
                if removed {
                    self.remove_link(b, &q, x);
                    self.on_link_removed(b, &q, x);
                }
            } else if self.get(b).prop(&q).as_elem() == Some(x) {
                self.get_mut(b).props.shift_remove(&q);
                self.remove_link(b, &q, x);
                self.on_link_removed(b, &q, x);
            }
        }
    }

    fn property_decl(
        &self,
        display: &str,
        ty: &EntityRef,
        prop: &str,
    ) -> Result<PropertyDecl, StoreError> {
        ty.prop(prop).cloned().ok_or_else(|| {
            bad(
                display,
                prop,
                &format!("{} has no such property", ty.name()),
            )
        })
    }

    fn check_shape(
        &self,
        display: &str,
        prop: &str,
        decl: &PropertyDecl,
        v: &PropertyValue,
    ) -> Result<(), StoreError> {
        let ok = if decl.is_collection() {
            match v {
                PropertyValue::Absent => true,
                PropertyValue::Seq(items) => {
                    items.iter().all(|i| self.shape_ok(decl.member_type(), i))
                }
                single => self.shape_ok(decl.member_type(), single),
            }
        } else {
            self.shape_ok(&decl.ty, v)
        };
        if ok {
            Ok(())
        } else {
            Err(bad(
                display,
                prop,
                &format!("value does not fit {}", decl.ty),
            ))
        }
    }

    fn shape_ok(&self, t: &TypeDescriptor, v: &PropertyValue) -> bool {
        match (t, v) {
            (_, PropertyValue::Absent) => true,
            (TypeDescriptor::Optional(inner), v) => self.shape_ok(inner, v),
            (TypeDescriptor::Array(inner), PropertyValue::Seq(items)) => {
                items.iter().all(|i| self.shape_ok(inner, i))
            }
            (TypeDescriptor::Base(_), PropertyValue::Data(_)) => true,
            (TypeDescriptor::Entity(_) | TypeDescriptor::Ref { .. }, PropertyValue::Elem(id)) => {
                self.contains(*id)
            }
            (TypeDescriptor::InstanceRef { .. }, PropertyValue::QName(_)) => true,
            _ => false,
        }
    }

    /// Resolves a qualified name relative to model `model`.
    pub fn resolve(&self, model: ElemId, q: &QName) -> Result<ElemId, StoreError> {
        let unresolved = || StoreError::Unresolved {
            path: q.to_string(),
            from: self.qname(model),
        };
        self.checked_model(model)?;
        let mut cur = match q.kind() {
            QNameKind::Absolute => self.root(),
            _ => {
                let mut m = model;
                for _ in 0..q.ups() {
                    m = self.get(m).owner.ok_or_else(unresolved)?;
                }
                m
            }
        };
        let segs = q.segments();
        for (i, seg) in segs.iter().enumerate() {
            if i > 0 && !self.get(cur).is_model() {
                return Err(unresolved());
            }
            cur = self.lookup(cur, seg).ok_or_else(unresolved)?;
        }
        Ok(cur)
    }

    pub fn resolve_str(&self, model: ElemId, path: &str) -> Result<ElemId, StoreError> {
        self.resolve(model, &QName::parse(path)?)
    }

    /// Structural equality of two models, possibly from different stores:
    /// same names, types, property values and nested members. Element
    /// references are compared by their paths relative to the model.
    pub fn structurally_equal(&self, a: ElemId, other: &Store, b: ElemId) -> bool {
        let base_a = self.get(a).path.len();
        let base_b = other.get(b).path.len();
        let ca = self.closure(a);
        let cb = other.closure(b);
        if ca.len() != cb.len() {
            return false;
        }
        let rel = |s: &Store, base: usize, id: ElemId| -> Option<Vec<String>> {
            let p = &s.get(id).path;
            (p.len() >= base).then(|| p[base..].to_vec())
        };
        for x in ca {
            let Some(path) = rel(self, base_a, x) else {
                return false;
            };
            let y = path.iter().try_fold(b, |cur, seg| other.lookup(cur, seg));
            let Some(y) = y else {
                return false;
            };
            let (ex, ey) = (self.get(x), other.get(y));
            if ex.ty != ey.ty || ex.is_model() != ey.is_model() || ex.props.len() != ey.props.len()
            {
                return false;
            }
            for (k, va) in &ex.props {
                let vb = ey.prop(k);
                if !values_equal(self, base_a, va, other, base_b, vb) {
                    return false;
                }
            }
        }
        true
    }
}

fn values_equal(
    sa: &Store,
    base_a: usize,
    a: &PropertyValue,
    sb: &Store,
    base_b: usize,
    b: &PropertyValue,
) -> bool {
    match (a, b) {
        (PropertyValue::Elem(x), PropertyValue::Elem(y)) => {
            let (px, py) = (&sa.get(*x).path, &sb.get(*y).path);
            match (px.get(base_a..), py.get(base_b..)) {
                (Some(rx), Some(ry)) => rx == ry,
                _ => px == py,
            }
        }
        (PropertyValue::Seq(xs), PropertyValue::Seq(ys)) => {
            xs.len() == ys.len()
                && xs
                    .iter()
                    .zip(ys)
                    .all(|(x, y)| values_equal(sa, base_a, x, sb, base_b, y))
        }
        (x, y) => x == y,
    }
}

fn bad(element: &str, property: &str, message: &str) -> StoreError {
    StoreError::BadPropertyValue {
        element: element.to_string(),
        property: property.to_string(),
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{model_element_type, SchemaSet};
    use crate::typesys::{
        make_array, make_base, make_optional, make_ref, Multiplicity, PropertySpec,
    };

    fn org_schema() -> Arc<TypeSchema> {
        let string = make_base("string").unwrap();
        let mut s = TypeSchema::new("Org");
        let unit = s
            .make_subtype(
                model_element_type(),
                "Unit",
                PropertySpec::new()
                    .with(
                        "label",
                        make_optional(string.clone()),
                        Multiplicity::ZeroOrOne,
                    )
                    .unwrap()
                    .with("tags", make_array(string), Multiplicity::ZeroOrMore)
                    .unwrap()
                    .with("parent", make_ref("Org", "Unit"), Multiplicity::ZeroOrOne)
                    .unwrap()
                    .with(
                        "subs",
                        make_array(make_ref("Org", "Unit")),
                        Multiplicity::ZeroOrMore,
                    )
                    .unwrap(),
            )
            .unwrap();
        let m = s
            .make_subtype(crate::schema::model_type(), "Org", PropertySpec::new())
            .unwrap();
        s.set_model_type(&m);
        s.add_inverse(&unit, "parent", &unit, "subs");
        s.validate(&SchemaSet::new()).unwrap();
        Arc::new(s)
    }

    fn rec(entries: Vec<(&str, PropertyValue)>) -> PropertyRecord {
        entries
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    #[test]
    fn models_and_names() {
        let schema = org_schema();
        let mut st = Store::new();
        let m = st
            .new_model(st.root(), "Acme", &schema, PropertyRecord::new())
            .unwrap();
        let unit = schema.entity("Unit").unwrap().clone();
        let a = st
            .new_element(m, "A", &unit, PropertyRecord::new())
            .unwrap();
        assert_eq!(st.get(a).prop("name"), &PropertyValue::str("A"));
        assert_eq!(st.qname(a), "/Acme/A");
        assert!(matches!(
            st.new_element(m, "A", &unit, PropertyRecord::new()),
            Err(StoreError::DuplicateName { .. })
        ));
        assert!(matches!(
            st.new_element(m, "", &unit, PropertyRecord::new()),
            Err(StoreError::Path(QNameError::EmptySegment(_)))
        ));
        assert!(matches!(
            st.new_element(a, "B", &unit, PropertyRecord::new()),
            Err(StoreError::NotAModel(_))
        ));
        let foreign = TypeSchema::new("X")
            .make_entity("Y", PropertySpec::new())
            .unwrap();
        assert!(matches!(
            st.new_element(m, "Y", &foreign, PropertyRecord::new()),
            Err(StoreError::TypeNotInSchema { .. })
        ));
        let unvalidated = Arc::new(TypeSchema::new("Raw"));
        assert!(matches!(
            st.new_model(st.root(), "R", &unvalidated, PropertyRecord::new()),
            Err(StoreError::InvalidSchema(_))
        ));
    }

    #[test]
    fn merge_overrides_scalars_and_concatenates_arrays() {
        let schema = org_schema();
        let unit = schema.entity("Unit").unwrap().clone();
        let mut st = Store::new();
        let m = st
            .new_model(st.root(), "Acme", &schema, PropertyRecord::new())
            .unwrap();
        let a = st
            .new_element(
                m,
                "A",
                &unit,
                rec(vec![
                    ("label", PropertyValue::str("one")),
                    ("tags", PropertyValue::Seq(vec![PropertyValue::str("x")])),
                ]),
            )
            .unwrap();
        st.update_element(
            m,
            a,
            rec(vec![
                ("label", PropertyValue::str("two")),
                ("tags", PropertyValue::Seq(vec![PropertyValue::str("y")])),
            ]),
        )
        .unwrap();
        assert_eq!(st.get(a).prop("label"), &PropertyValue::str("two"));
        assert_eq!(
            st.get(a).prop("tags"),
            &PropertyValue::Seq(vec![PropertyValue::str("x"), PropertyValue::str("y")])
        );
        assert!(matches!(
            st.update_element(m, a, rec(vec![("name", PropertyValue::str("Z"))])),
            Err(StoreError::BadPropertyValue { .. })
        ));
        assert!(matches!(
            st.update_element(m, a, rec(vec![("nope", PropertyValue::str("Z"))])),
            Err(StoreError::BadPropertyValue { .. })
        ));
        assert!(matches!(
            st.update_element(m, a, rec(vec![("parent", PropertyValue::str("Z"))])),
            Err(StoreError::BadPropertyValue { .. })
        ));
    }

    #[test]
    fn inverse_properties_follow_updates() {
        let schema = org_schema();
        let unit = schema.entity("Unit").unwrap().clone();
        let mut st = Store::new();
        let m = st
            .new_model(st.root(), "Acme", &schema, PropertyRecord::new())
            .unwrap();
        let top = st
            .new_element(m, "Top", &unit, PropertyRecord::new())
            .unwrap();
        let other = st
            .new_element(m, "Other", &unit, PropertyRecord::new())
            .unwrap();
        let a = st
            .new_element(
                m,
                "A",
                &unit,
                rec(vec![("parent", PropertyValue::Elem(top))]),
            )
            .unwrap();
        assert_eq!(st.get(top).prop("subs").elems(), [a]);
        assert!(st.get(top).links()[0].derived);

        st.update_element(m, a, rec(vec![("parent", PropertyValue::Elem(other))]))
            .unwrap();
        assert!(st.get(top).prop("subs").elems().is_empty());
        assert_eq!(st.get(other).prop("subs").elems(), [a]);

        let b = st
            .new_element(m, "B", &unit, PropertyRecord::new())
            .unwrap();
        st.update_element(
            m,
            other,
            rec(vec![(
                "subs",
                PropertyValue::Seq(vec![PropertyValue::Elem(b), PropertyValue::Elem(a)]),
            )]),
        )
        .unwrap();
        assert_eq!(st.get(other).prop("subs").elems(), [a, b]);
        assert_eq!(st.get(b).prop("parent").as_elem(), Some(other));
    }

    #[test]
    fn resolution() {
        let schema = org_schema();
        let unit = schema.entity("Unit").unwrap().clone();
        let mut st = Store::new();
        let outer = st
            .new_model(st.root(), "Outer", &schema, PropertyRecord::new())
            .unwrap();
        let inner = st
            .new_model(outer, "Inner", &schema, PropertyRecord::new())
            .unwrap();
        let x = st
            .new_element(outer, "Board X", &unit, PropertyRecord::new())
            .unwrap();
        let y = st
            .new_element(inner, "Y", &unit, PropertyRecord::new())
            .unwrap();
        assert_eq!(st.resolve_str(inner, "Y").unwrap(), y);
        assert_eq!(st.resolve_str(inner, "../Board X").unwrap(), x);
        assert_eq!(st.resolve_str(outer, "Inner/Y").unwrap(), y);
        assert_eq!(st.resolve_str(inner, "/Outer/Inner/Y").unwrap(), y);
        assert_eq!(st.resolve_str(st.root(), "Outer").unwrap(), outer);
        assert!(matches!(
            st.resolve_str(inner, "X"),
            Err(StoreError::Unresolved { .. })
        ));
        assert!(matches!(
            st.resolve_str(inner, "../../../X"),
            Err(StoreError::Unresolved { .. })
        ));
        assert!(matches!(
            st.resolve_str(inner, "/"),
            Err(StoreError::Path(QNameError::EmptyPath))
        ));
        assert_eq!(st.closure(outer), [outer, inner, x, y]);
    }

    #[test]
    fn anonymous_names_skip_taken() {
        let schema = org_schema();
        let unit = schema.entity("Unit").unwrap().clone();
        let mut st = Store::new();
        let m = st
            .new_model(st.root(), "M", &schema, PropertyRecord::new())
            .unwrap();
        st.new_element(m, "Unit#1", &unit, PropertyRecord::new())
            .unwrap();
        assert_eq!(st.fresh_name(m, &unit), "Unit#2");
        assert_eq!(st.fresh_name(m, &unit), "Unit#3");
    }

    #[test]
    fn number_format() {
        assert_eq!(format_number(3.0), "3");
        assert_eq!(format_number(-2.0), "-2");
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(1e20), "100000000000000000000");
    }
}
