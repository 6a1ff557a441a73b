//! Model expressions: a small algebra for constructing, referencing and
//! transforming typed models.
//!
//! The crate is layered bottom-up: [`typesys`] defines entity types and the
//! subtype order, [`schema`] groups them into metamodels and checks model
//! conformance, [`store`] holds elements in nested model namespaces,
//! [`expr`] evaluates model expressions into a store, [`transform`] runs
//! rule-based model-to-model transformations with traces, and [`syntax`]
//! reads and writes the textual notations.

pub mod cli;
pub mod expr;
pub mod schema;
pub mod store;
pub mod syntax;
pub mod transform;
pub mod typesys;
