//! The type constructor system: base types, entity types, the wrapper
//! constructors (array, optional, ref, iref), property specifications and
//! the subtype partial order.
//!
//! Entity descriptors are immutable once built and are shared through
//! [`EntityRef`]. Two entity descriptors are the same type iff their
//! `(schema_id, name)` pairs coincide, so equality and hashing ignore the
//! property payload.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unknown base type `{0}`")]
    UnknownBaseType(String),
    #[error("type `{name}` is already defined in schema `{schema}`")]
    DuplicateTypeName { schema: String, name: String },
    #[error("parent of `{0}` is not an entity type")]
    InvalidParent(String),
    #[error("property `{property}` of `{name}` shadows an inherited property")]
    PropertyShadowing { name: String, property: String },
    #[error("property `{0}` declared twice")]
    DuplicateProperty(String),
    #[error("unresolved type reference `{schema}::{name}`")]
    UnresolvedReference { schema: String, name: String },
    #[error("`{0}` is not an entity type")]
    NotAnEntity(String),
}

/// The frozen set of primitive types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseType {
    String,
    Number,
    Boolean,
}

impl BaseType {
    pub fn name(self) -> &'static str {
        match self {
            BaseType::String => "string",
            BaseType::Number => "number",
            BaseType::Boolean => "boolean",
        }
    }
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Multiplicity indicator of a property: `1`, `0..1`, `0..` or `1..`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Multiplicity {
    One,
    ZeroOrOne,
    ZeroOrMore,
    OneOrMore,
}

impl Multiplicity {
    /// True for `0..` and `1..`.
    pub fn is_many(self) -> bool {
        matches!(self, Multiplicity::ZeroOrMore | Multiplicity::OneOrMore)
    }
}

impl fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Multiplicity::One => "1",
            Multiplicity::ZeroOrOne => "0..1",
            Multiplicity::ZeroOrMore => "0..",
            Multiplicity::OneOrMore => "1..",
        })
    }
}

pub type EntityRef = Arc<EntityType>;

/// A node of the type universe.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeDescriptor {
    Base(BaseType),
    Entity(EntityRef),
    Array(Box<TypeDescriptor>),
    Optional(Box<TypeDescriptor>),
    /// Named forward reference, resolved through a schema.
    Ref {
        schema: String,
        name: String,
    },
    /// Values are qualified names designating instances of the named entity.
    InstanceRef {
        schema: String,
        name: String,
    },
}

impl TypeDescriptor {
    /// True when values of this type are element references (entity or ref),
    /// possibly wrapped in array/optional.
    pub fn is_entity_valued(&self) -> bool {
        match self {
            TypeDescriptor::Entity(_) | TypeDescriptor::Ref { .. } => true,
            TypeDescriptor::Array(t) | TypeDescriptor::Optional(t) => t.is_entity_valued(),
            TypeDescriptor::Base(_) | TypeDescriptor::InstanceRef { .. } => false,
        }
    }

    pub fn is_array(&self) -> bool {
        matches!(self, TypeDescriptor::Array(_))
    }

    /// Strips array and optional wrappers.
    pub fn innermost(&self) -> &TypeDescriptor {
        match self {
            TypeDescriptor::Array(t) | TypeDescriptor::Optional(t) => t.innermost(),
            other => other,
        }
    }
}

impl fmt::Display for TypeDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeDescriptor::Base(b) => write!(f, "{b}"),
            TypeDescriptor::Entity(e) => write!(f, "{}", e.name()),
            TypeDescriptor::Array(t) => write!(f, "array({t})"),
            TypeDescriptor::Optional(t) => write!(f, "optional({t})"),
            TypeDescriptor::Ref { schema, name } => write!(f, "ref({schema}::{name})"),
            TypeDescriptor::InstanceRef { schema, name } => write!(f, "iref({schema}::{name})"),
        }
    }
}

/// Type and multiplicity of a single property.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PropertyDecl {
    pub ty: TypeDescriptor,
    pub mult: Multiplicity,
}

impl PropertyDecl {
    pub fn new(ty: TypeDescriptor, mult: Multiplicity) -> Self {
        PropertyDecl { ty, mult }
    }

    /// Collection-valued properties hold sequences: array types or `0..`/`1..`.
    pub fn is_collection(&self) -> bool {
        self.ty.is_array() || self.mult.is_many()
    }

    /// Type of a single member: the array's element type, or the type itself.
    pub fn member_type(&self) -> &TypeDescriptor {
        match &self.ty {
            TypeDescriptor::Array(t) => t,
            t => t,
        }
    }
}

/// Ordered property specification. Order is declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertySpec {
    entries: IndexMap<String, PropertyDecl>,
}

impl PropertySpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builder-style insert; panics are avoided by returning the error.
    pub fn with(
        mut self,
        name: impl Into<String>,
        ty: TypeDescriptor,
        mult: Multiplicity,
    ) -> Result<Self, TypeError> {
        self.insert(name, ty, mult)?;
        Ok(self)
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        ty: TypeDescriptor,
        mult: Multiplicity,
    ) -> Result<(), TypeError> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(TypeError::DuplicateProperty(name));
        }
        self.entries.insert(name, PropertyDecl::new(ty, mult));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&PropertyDecl> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &PropertyDecl)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// An entity type. Built only through the schema constructors.
#[derive(Debug)]
pub struct EntityType {
    schema_id: String,
    name: String,
    own_props: PropertySpec,
    parent: Option<EntityRef>,
}

impl PartialEq for EntityType {
    fn eq(&self, other: &Self) -> bool {
        self.schema_id == other.schema_id && self.name == other.name
    }
}

impl Eq for EntityType {}

impl Hash for EntityType {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.schema_id.hash(state);
        self.name.hash(state);
    }
}

impl EntityType {
    pub(crate) fn new_root(schema_id: &str, name: &str, props: PropertySpec) -> EntityRef {
        Arc::new(EntityType {
            schema_id: schema_id.to_string(),
            name: name.to_string(),
            own_props: props,
            parent: None,
        })
    }

    pub(crate) fn new_subtype(
        parent: &EntityRef,
        schema_id: &str,
        name: &str,
        extra: PropertySpec,
    ) -> Result<EntityRef, TypeError> {
        for prop in extra.names() {
            if parent.all_props().contains(prop) {
                return Err(TypeError::PropertyShadowing {
                    name: name.to_string(),
                    property: prop.to_string(),
                });
            }
        }
        Ok(Arc::new(EntityType {
            schema_id: schema_id.to_string(),
            name: name.to_string(),
            own_props: extra,
            parent: Some(parent.clone()),
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema_id(&self) -> &str {
        &self.schema_id
    }

    pub fn parent(&self) -> Option<&EntityRef> {
        self.parent.as_ref()
    }

    pub fn own_props(&self) -> &PropertySpec {
        &self.own_props
    }

    /// `schema::name`, used in messages.
    pub fn qualified(&self) -> String {
        format!("{}::{}", self.schema_id, self.name)
    }

    /// Self, then parent, grandparent, ...
    pub fn ancestors(&self) -> impl Iterator<Item = &EntityType> {
        std::iter::successors(Some(self), |t| t.parent.as_deref())
    }

    /// `self ⊑ other`: `other` is reachable by zero or more parent links.
    pub fn is_subtype_of(&self, other: &EntityType) -> bool {
        self.ancestors().any(|a| a == other)
    }

    /// Own and inherited properties, ancestors first, declaration order
    /// within each level.
    pub fn all_props(&self) -> PropertySpec {
        let mut chain: Vec<&EntityType> = self.ancestors().collect();
        chain.reverse();
        let mut out = PropertySpec::new();
        for level in chain {
            for (name, decl) in level.own_props.iter() {
                out.entries.insert(name.to_string(), decl.clone());
            }
        }
        out
    }

    /// Single-property lookup along the parent chain.
    pub fn prop(&self, name: &str) -> Option<&PropertyDecl> {
        self.ancestors().find_map(|t| t.own_props.get(name))
    }

    pub fn depth(&self) -> usize {
        self.ancestors().count() - 1
    }
}

/// Canonical base descriptor for `string`, `number` or `boolean`.
pub fn make_base(name: &str) -> Result<TypeDescriptor, TypeError> {
    let base = match name {
        "string" => BaseType::String,
        "number" => BaseType::Number,
        "boolean" => BaseType::Boolean,
        other => return Err(TypeError::UnknownBaseType(other.to_string())),
    };
    Ok(TypeDescriptor::Base(base))
}

pub fn make_array(t: TypeDescriptor) -> TypeDescriptor {
    TypeDescriptor::Array(Box::new(t))
}

pub fn make_optional(t: TypeDescriptor) -> TypeDescriptor {
    TypeDescriptor::Optional(Box::new(t))
}

pub fn make_ref(schema: &str, type_name: &str) -> TypeDescriptor {
    TypeDescriptor::Ref {
        schema: schema.to_string(),
        name: type_name.to_string(),
    }
}

pub fn make_iref(schema: &str, entity_name: &str) -> TypeDescriptor {
    TypeDescriptor::InstanceRef {
        schema: schema.to_string(),
        name: entity_name.to_string(),
    }
}

/// Subtype test on descriptors. Both sides must already be entity
/// descriptors; refs have to be resolved through a schema first.
pub fn is_subtype(t1: &TypeDescriptor, t2: &TypeDescriptor) -> Result<bool, TypeError> {
    let a = as_entity(t1)?;
    let b = as_entity(t2)?;
    Ok(a.is_subtype_of(b))
}

fn as_entity(t: &TypeDescriptor) -> Result<&EntityRef, TypeError> {
    match t {
        TypeDescriptor::Entity(e) => Ok(e),
        TypeDescriptor::Ref { schema, name } => Err(TypeError::UnresolvedReference {
            schema: schema.clone(),
            name: name.clone(),
        }),
        other => Err(TypeError::NotAnEntity(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn string() -> TypeDescriptor {
        make_base("string").unwrap()
    }

    #[test]
    fn base_types() {
        assert_eq!(string(), TypeDescriptor::Base(BaseType::String));
        assert_eq!(make_base("string").unwrap(), make_base("string").unwrap());
        assert_eq!(
            make_base("complex"),
            Err(TypeError::UnknownBaseType("complex".into()))
        );
    }

    #[test]
    fn wrappers_nest() {
        let num = make_base("number").unwrap();
        let nested = make_array(make_array(num.clone()));
        assert_eq!(nested.innermost(), &num);
        assert_eq!(nested.to_string(), "array(array(number))");
        let opt = make_optional(string());
        assert_eq!(opt.to_string(), "optional(string)");
        let r = make_ref("OrgModel-Schema", "OrgUnit");
        assert!(r.is_entity_valued());
        assert!(!make_iref("S", "X").is_entity_valued());
    }

    #[test]
    fn subtype_and_inheritance() {
        let root = EntityType::new_root(
            "S",
            "Root",
            PropertySpec::new()
                .with("name", string(), Multiplicity::One)
                .unwrap(),
        );
        let mid = EntityType::new_subtype(
            &root,
            "S",
            "Mid",
            PropertySpec::new()
                .with("a", string(), Multiplicity::ZeroOrOne)
                .unwrap(),
        )
        .unwrap();
        let leaf = EntityType::new_subtype(&mid, "S", "Leaf", PropertySpec::new()).unwrap();
        assert!(leaf.is_subtype_of(&root));
        assert!(leaf.is_subtype_of(&leaf));
        assert!(!root.is_subtype_of(&leaf));
        let names: Vec<_> = leaf.all_props().names().map(str::to_string).collect();
        assert_eq!(names, ["name", "a"]);
        assert_eq!(leaf.depth(), 2);

        let shadow = EntityType::new_subtype(
            &mid,
            "S",
            "Bad",
            PropertySpec::new()
                .with("name", string(), Multiplicity::One)
                .unwrap(),
        );
        assert!(matches!(shadow, Err(TypeError::PropertyShadowing { .. })));
    }

    #[test]
    fn is_subtype_rejects_unresolved_refs() {
        let e = TypeDescriptor::Entity(EntityType::new_root("S", "A", PropertySpec::new()));
        assert!(matches!(
            is_subtype(&make_ref("S", "A"), &e),
            Err(TypeError::UnresolvedReference { .. })
        ));
        assert!(matches!(
            is_subtype(&string(), &e),
            Err(TypeError::NotAnEntity(_))
        ));
        assert_eq!(is_subtype(&e, &e), Ok(true));
    }

    #[test]
    fn duplicate_property_rejected() {
        let spec = PropertySpec::new()
            .with("a", string(), Multiplicity::One)
            .unwrap();
        assert_eq!(
            spec.with("a", string(), Multiplicity::One),
            Err(TypeError::DuplicateProperty("a".into()))
        );
    }
}
