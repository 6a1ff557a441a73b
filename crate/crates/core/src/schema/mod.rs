//! Type schemas (metamodels): named sets of entity types with a designated
//! model type, validation of closure and references, and the conformance
//! checks of models against schemas.

mod conformance;

use std::fmt;
use std::sync::{Arc, OnceLock};

use indexmap::IndexMap;
use thiserror::Error;

use crate::typesys::{
    make_array, make_base, EntityRef, EntityType, Multiplicity, PropertyDecl, PropertySpec,
    TypeDescriptor, TypeError,
};

pub use conformance::{
    check_value, conforms, conforms_deep, cross_model_integrity, ConformanceReport, Violation,
    ViolationKind,
};

pub const ABSTRACT_SCHEMA: &str = "Abstract-Schema";
pub const UNIVERSAL_SCHEMA: &str = "Universal-Schema";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("{entity}.{property}: unresolved reference `{target}`")]
    UnresolvedReference {
        entity: String,
        property: String,
        target: String,
    },
    #[error("{entity}.{property}: type `{target}` is not part of the schema")]
    ClosureViolation {
        entity: String,
        property: String,
        target: String,
    },
    #[error("schema `{0}` has no model type")]
    MissingModelType(String),
    #[error("model type `{0}` is not a subtype of Abstract-Schema::Model")]
    InvalidModelType(String),
    #[error("invalid inverse pair: {0}")]
    InvalidInverse(String),
}

/// All errors found by one validation pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaErrors(pub Vec<SchemaError>);

impl fmt::Display for SchemaErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for SchemaErrors {}

/// Declares that `a.a_prop` and `b.b_prop` mirror each other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InversePair {
    pub a: EntityRef,
    pub a_prop: String,
    pub b: EntityRef,
    pub b_prop: String,
}

#[derive(Debug, Clone)]
pub struct TypeSchema {
    name: String,
    entities: IndexMap<(String, String), EntityRef>,
    model_type: Option<EntityRef>,
    inverses: Vec<InversePair>,
    value_types: Vec<TypeDescriptor>,
    validated: bool,
    universal: bool,
}

impl TypeSchema {
    pub fn new(name: impl Into<String>) -> Self {
        TypeSchema {
            name: name.into(),
            entities: IndexMap::new(),
            model_type: None,
            inverses: Vec::new(),
            value_types: Vec::new(),
            validated: false,
            universal: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    /// The universal schema admits every entity type.
    pub fn is_universal(&self) -> bool {
        self.universal
    }

    pub fn model_type(&self) -> Option<&EntityRef> {
        self.model_type.as_ref()
    }

    pub fn inverse_pairs(&self) -> &[InversePair] {
        &self.inverses
    }

    /// Non-entity property types used by the schema's entities.
    pub fn value_types(&self) -> &[TypeDescriptor] {
        &self.value_types
    }

    /// All entity types of the schema, including imported ones.
    pub fn entities(&self) -> impl Iterator<Item = &EntityRef> {
        self.entities.values()
    }

    /// Entity types defined by this schema itself.
    pub fn own_entities(&self) -> impl Iterator<Item = &EntityRef> {
        self.entities
            .values()
            .filter(|e| e.schema_id() == self.name)
    }

    /// Looks an entity up by local name, preferring the schema's own types
    /// over imported ones.
    pub fn entity(&self, name: &str) -> Option<&EntityRef> {
        self.entities
            .get(&(self.name.clone(), name.to_string()))
            .or_else(|| self.entities.values().find(|e| e.name() == name))
    }

    pub fn entity_qualified(&self, schema: &str, name: &str) -> Option<&EntityRef> {
        self.entities.get(&(schema.to_string(), name.to_string()))
    }

    pub fn contains_entity(&self, e: &EntityType) -> bool {
        self.universal
            || self
                .entities
                .contains_key(&(e.schema_id().to_string(), e.name().to_string()))
    }

    /// Resolves an entity-valued descriptor (after stripping wrappers) to
    /// its entity type.
    pub fn resolve(&self, t: &TypeDescriptor) -> Option<EntityRef> {
        match t.innermost() {
            TypeDescriptor::Entity(e) => Some(e.clone()),
            TypeDescriptor::Ref { schema, name } => {
                if let Some(e) = self.entity_qualified(schema, name) {
                    return Some(e.clone());
                }
                if self.universal || schema == ABSTRACT_SCHEMA {
                    return abstract_schema().entity_qualified(schema, name).cloned();
                }
                None
            }
            _ => None,
        }
    }

    /// Element type of an entity-valued property, if any.
    pub fn member_entity(&self, decl: &PropertyDecl) -> Option<EntityRef> {
        if decl.ty.is_entity_valued() {
            self.resolve(&decl.ty)
        } else {
            None
        }
    }

    pub fn make_entity(&mut self, name: &str, props: PropertySpec) -> Result<EntityRef, TypeError> {
        self.check_fresh(name)?;
        let e = EntityType::new_root(&self.name, name, props);
        self.insert(e.clone());
        Ok(e)
    }

    /// Defines `name ⊑ parent`. The parent chain is imported into the
    /// schema if it comes from elsewhere.
    pub fn make_subtype(
        &mut self,
        parent: &EntityRef,
        name: &str,
        extra: PropertySpec,
    ) -> Result<EntityRef, TypeError> {
        self.check_fresh(name)?;
        let e = EntityType::new_subtype(parent, &self.name, name, extra)?;
        self.include(parent);
        self.insert(e.clone());
        Ok(e)
    }

    /// Imports a foreign entity type and its ancestors.
    pub fn include(&mut self, e: &EntityRef) {
        let mut chain = vec![e.clone()];
        while let Some(p) = chain.last().and_then(|t| t.parent().cloned()) {
            chain.push(p);
        }
        for t in chain.into_iter().rev() {
            self.insert(t);
        }
    }

    pub fn set_model_type(&mut self, e: &EntityRef) {
        self.include(e);
        self.model_type = Some(e.clone());
        self.validated = false;
    }

    pub fn add_inverse(&mut self, a: &EntityRef, a_prop: &str, b: &EntityRef, b_prop: &str) {
        self.inverses.push(InversePair {
            a: a.clone(),
            a_prop: a_prop.to_string(),
            b: b.clone(),
            b_prop: b_prop.to_string(),
        });
        self.validated = false;
    }

    fn check_fresh(&self, name: &str) -> Result<(), TypeError> {
        if self
            .entities
            .contains_key(&(self.name.clone(), name.to_string()))
        {
            return Err(TypeError::DuplicateTypeName {
                schema: self.name.clone(),
                name: name.to_string(),
            });
        }
        Ok(())
    }

    fn insert(&mut self, e: EntityRef) {
        let key = (e.schema_id().to_string(), e.name().to_string());
        self.entities.entry(key).or_insert(e);
        self.validated = false;
    }

    /// Checks closure, resolves every reference (importing the targets of
    /// cross-schema refs), checks the model type and the inverse pairs.
    pub fn validate(&mut self, set: &SchemaSet) -> Result<(), SchemaErrors> {
        let mut errors = Vec::new();
        let mut i = 0;
        while i < self.entities.len() {
            let e = self.entities[i].clone();
            i += 1;
            if let Some(p) = e.parent() {
                self.include(p);
            }
            for (prop, decl) in e.own_props().iter() {
                self.check_descriptor(set, &e, prop, &decl.ty, &mut errors);
            }
        }
        match self.model_type.clone() {
            None => errors.push(SchemaError::MissingModelType(self.name.clone())),
            Some(mt) => {
                if !mt.is_subtype_of(model_type()) {
                    errors.push(SchemaError::InvalidModelType(mt.qualified()));
                }
            }
        }
        for pair in self.inverses.clone() {
            self.check_inverse(&pair.a, &pair.a_prop, &pair.b, &mut errors);
            self.check_inverse(&pair.b, &pair.b_prop, &pair.a, &mut errors);
        }
        let mut value_types: Vec<TypeDescriptor> = Vec::new();
        for e in self.entities.values() {
            for (_, decl) in e.own_props().iter() {
                if !decl.ty.is_entity_valued() && !value_types.contains(&decl.ty) {
                    value_types.push(decl.ty.clone());
                }
            }
        }
        self.value_types = value_types;
        self.validated = errors.is_empty();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(SchemaErrors(errors))
        }
    }

    fn check_descriptor(
        &mut self,
        set: &SchemaSet,
        owner: &EntityRef,
        prop: &str,
        t: &TypeDescriptor,
        errors: &mut Vec<SchemaError>,
    ) {
        let err_ctx = |target: String| (owner.qualified(), prop.to_string(), target);
        match t {
            TypeDescriptor::Base(_) => {}
            TypeDescriptor::Array(inner) | TypeDescriptor::Optional(inner) => {
                self.check_descriptor(set, owner, prop, inner, errors)
            }
            TypeDescriptor::Entity(e) => {
                if !self.contains_entity(e) {
                    let (entity, property, target) = err_ctx(e.qualified());
                    errors.push(SchemaError::ClosureViolation {
                        entity,
                        property,
                        target,
                    });
                }
            }
            TypeDescriptor::Ref { schema, name } => {
                if self.entity_qualified(schema, name).is_some() {
                    return;
                }
                let found = if *schema == self.name {
                    None
                } else {
                    set.get(schema)
                        .and_then(|s| s.entity_qualified(schema, name).cloned())
                };
                match found {
                    Some(e) => self.include(&e),
                    None => {
                        let (entity, property, target) = err_ctx(format!("{schema}::{name}"));
                        errors.push(SchemaError::UnresolvedReference {
                            entity,
                            property,
                            target,
                        });
                    }
                }
            }
            TypeDescriptor::InstanceRef { schema, name } => {
                let exists = if *schema == self.name {
                    self.entity_qualified(schema, name).is_some()
                } else {
                    set.get(schema)
                        .map(|s| s.entity_qualified(schema, name).is_some())
                        .unwrap_or(false)
                };
                if !exists {
                    let (entity, property, target) = err_ctx(format!("{schema}::{name}"));
                    errors.push(SchemaError::UnresolvedReference {
                        entity,
                        property,
                        target,
                    });
                }
            }
        }
    }

    fn check_inverse(
        &self,
        from: &EntityRef,
        prop: &str,
        to: &EntityRef,
        errors: &mut Vec<SchemaError>,
    ) {
        let Some(decl) = from.prop(prop) else {
            errors.push(SchemaError::InvalidInverse(format!(
                "{} has no property `{prop}`",
                from.qualified()
            )));
            return;
        };
        match self.member_entity(decl) {
            Some(t) if t == *to => {}
            _ => errors.push(SchemaError::InvalidInverse(format!(
                "{}.{prop} is not typed by {}",
                from.qualified(),
                to.qualified()
            ))),
        }
    }
}

/// Registry of validated schemas, used to resolve cross-schema references.
#[derive(Debug, Clone)]
pub struct SchemaSet {
    schemas: IndexMap<String, Arc<TypeSchema>>,
}

impl Default for SchemaSet {
    fn default() -> Self {
        Self::new()
    }
}

impl SchemaSet {
    /// A registry holding the abstract schema.
    pub fn new() -> Self {
        let mut schemas = IndexMap::new();
        schemas.insert(ABSTRACT_SCHEMA.to_string(), abstract_schema().clone());
        SchemaSet { schemas }
    }

    pub fn insert(&mut self, schema: Arc<TypeSchema>) {
        self.schemas.insert(schema.name().to_string(), schema);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<TypeSchema>> {
        self.schemas.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<TypeSchema>> {
        self.schemas.values()
    }
}

struct AbstractTypes {
    schema: Arc<TypeSchema>,
    universal: Arc<TypeSchema>,
    element: EntityRef,
    model: EntityRef,
}

fn abstract_types() -> &'static AbstractTypes {
    static CELL: OnceLock<AbstractTypes> = OnceLock::new();
    CELL.get_or_init(|| {
        let string = make_base("string").expect("base type");
        let mut s = TypeSchema::new(ABSTRACT_SCHEMA);
        let element = s
            .make_entity(
                "ModelElement",
                PropertySpec::new()
                    .with("name", string, Multiplicity::One)
                    .expect("fresh property"),
            )
            .expect("fresh type");
        let model = s
            .make_subtype(
                &element,
                "Model",
                PropertySpec::new()
                    .with(
                        "elements",
                        make_array(TypeDescriptor::Entity(element.clone())),
                        Multiplicity::ZeroOrMore,
                    )
                    .expect("fresh property"),
            )
            .expect("fresh type");
        s.model_type = Some(model.clone());
        s.validated = true;

        let mut u = TypeSchema::new(UNIVERSAL_SCHEMA);
        u.include(&model);
        u.model_type = Some(model.clone());
        u.universal = true;
        u.validated = true;

        AbstractTypes {
            schema: Arc::new(s),
            universal: Arc::new(u),
            element,
            model,
        }
    })
}

/// The schema defining `ModelElement` and `Model`.
pub fn abstract_schema() -> &'static Arc<TypeSchema> {
    &abstract_types().schema
}

/// The schema that admits every entity type; it binds the store root.
pub fn universal_schema() -> &'static Arc<TypeSchema> {
    &abstract_types().universal
}

pub fn model_element_type() -> &'static EntityRef {
    &abstract_types().element
}

pub fn model_type() -> &'static EntityRef {
    &abstract_types().model
}
