use std::fmt;

use crate::schema::{model_type, TypeSchema};
use crate::store::{ElemId, PropertyValue, Store};
use crate::typesys::{BaseType, Multiplicity, PropertyDecl, TypeDescriptor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    ModelTyping,
    ElementTyping,
    PropertyType,
    Multiplicity,
    NameUniqueness,
    UnresolvedRef,
    TraceCoverage,
    TraceDispatch,
    TraceStructure,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::ModelTyping => "model-typing",
            ViolationKind::ElementTyping => "element-typing",
            ViolationKind::PropertyType => "property-type",
            ViolationKind::Multiplicity => "multiplicity",
            ViolationKind::NameUniqueness => "name-uniqueness",
            ViolationKind::UnresolvedRef => "unresolved-ref",
            ViolationKind::TraceCoverage => "trace-coverage",
            ViolationKind::TraceDispatch => "trace-dispatch",
            ViolationKind::TraceStructure => "trace-structure",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub element: String,
    pub property: String,
    pub kind: ViolationKind,
    pub message: String,
}

/// Ordered list of violations; empty means the model conforms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConformanceReport {
    pub violations: Vec<Violation>,
}

impl ConformanceReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(
        &mut self,
        element: impl Into<String>,
        property: impl Into<String>,
        kind: ViolationKind,
        message: impl Into<String>,
    ) {
        self.violations.push(Violation {
            element: element.into(),
            property: property.into(),
            kind,
            message: message.into(),
        });
    }

    pub fn extend(&mut self, other: ConformanceReport) {
        self.violations.extend(other.violations);
    }

    pub fn kinds(&self) -> Vec<ViolationKind> {
        self.violations.iter().map(|v| v.kind).collect()
    }
}

/// One tab-separated line per violation: element, property, kind, message.
impl fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(
                f,
                "{}\t{}\t{}\t{}",
                v.element, v.property, v.kind, v.message
            )?;
        }
        Ok(())
    }
}

/// Checks model `m` against `schema`: model typing, element typing of each
/// direct member, property conformance of the model and its members, and
/// name uniqueness. Violations come in document order, then property order.
pub fn conforms(store: &Store, m: ElemId, schema: &TypeSchema) -> ConformanceReport {
    let mut report = ConformanceReport::default();
    let model = store.get(m);
    let qn = store.qname(m);
    let expected = schema.model_type().unwrap_or(model_type());
    if !model.is_model() || !model.ty().is_subtype_of(expected) {
        report.push(
            &qn,
            "",
            ViolationKind::ModelTyping,
            format!(
                "{} is not a subtype of {}",
                model.ty().name(),
                expected.name()
            ),
        );
        return report;
    }
    check_props(store, schema, m, &mut report);
    let mut seen_names: Vec<&str> = Vec::new();
    for (local, x) in model.members() {
        let el = store.get(x);
        let xq = store.qname(x);
        if !schema.contains_entity(el.ty()) {
            report.push(
                &xq,
                "",
                ViolationKind::ElementTyping,
                format!(
                    "type {} is not part of {}",
                    el.ty().qualified(),
                    schema.name()
                ),
            );
            continue;
        }
        check_props(store, schema, x, &mut report);
        if let Some(n) = el.prop("name").as_str() {
            if n != local {
                report.push(
                    &xq,
                    "name",
                    ViolationKind::NameUniqueness,
                    format!("name property `{n}` differs from local name `{local}`"),
                );
            } else if seen_names.contains(&n) {
                report.push(&xq, "name", ViolationKind::NameUniqueness, "duplicate name");
            }
            seen_names.push(local);
        }
    }
    report
}

/// [`conforms`] applied to a model and, recursively, to every nested model
/// against the schema it is bound to.
pub fn conforms_deep(store: &Store, m: ElemId) -> ConformanceReport {
    let mut report = ConformanceReport::default();
    for id in store.closure(m) {
        let el = store.get(id);
        if let Some(schema) = el.schema() {
            if !schema.is_universal() {
                report.extend(conforms(store, id, schema));
            }
        }
    }
    report
}

fn check_props(store: &Store, schema: &TypeSchema, x: ElemId, report: &mut ConformanceReport) {
    if schema.is_universal() {
        return;
    }
    let el = store.get(x);
    let xq = store.qname(x);
    let decls = el.ty().all_props();
    for (p, decl) in decls.iter() {
        for (kind, msg) in check_value(store, schema, el.prop(p), decl) {
            report.push(&xq, p, kind, msg);
        }
    }
    for p in el.props().keys() {
        if !decls.contains(p) {
            report.push(&xq, p, ViolationKind::PropertyType, "undeclared property");
        }
    }
}

/// Checks one property value against its declaration.
pub fn check_value(
    store: &Store,
    schema: &TypeSchema,
    v: &PropertyValue,
    decl: &PropertyDecl,
) -> Vec<(ViolationKind, String)> {
    let mut out = Vec::new();
    if decl.is_collection() {
        let items: &[PropertyValue] = match v {
            PropertyValue::Absent => &[],
            PropertyValue::Seq(items) => items,
            _ => {
                out.push((
                    ViolationKind::PropertyType,
                    format!("expected a sequence of {}", decl.member_type()),
                ));
                return out;
            }
        };
        if decl.mult == Multiplicity::OneOrMore && items.is_empty() {
            out.push((
                ViolationKind::Multiplicity,
                "at least one value required".to_string(),
            ));
        }
        for item in items {
            check_single(store, schema, item, decl.member_type(), &mut out);
        }
    } else {
        match v {
            PropertyValue::Absent => {
                if decl.mult == Multiplicity::One && !matches!(decl.ty, TypeDescriptor::Optional(_))
                {
                    out.push((ViolationKind::Multiplicity, "value required".to_string()));
                }
            }
            PropertyValue::Seq(_) => {
                out.push((
                    ViolationKind::Multiplicity,
                    "expected a single value".to_string(),
                ));
            }
            single => check_single(store, schema, single, &decl.ty, &mut out),
        }
    }
    out
}

fn check_single(
    store: &Store,
    schema: &TypeSchema,
    v: &PropertyValue,
    t: &TypeDescriptor,
    out: &mut Vec<(ViolationKind, String)>,
) {
    use crate::store::DataValue as D;
    let mismatch = |out: &mut Vec<(ViolationKind, String)>| {
        out.push((ViolationKind::PropertyType, format!("expected {t}")));
    };
    match t {
        TypeDescriptor::Optional(inner) => {
            if !v.is_absent() {
                check_single(store, schema, v, inner, out);
            }
        }
        TypeDescriptor::Array(inner) => match v {
            PropertyValue::Seq(items) => {
                for i in items {
                    check_single(store, schema, i, inner, out);
                }
            }
            _ => mismatch(out),
        },
        TypeDescriptor::Base(b) => {
            let ok = matches!(
                (b, v),
                (BaseType::String, PropertyValue::Data(D::Str(_)))
                    | (BaseType::Number, PropertyValue::Data(D::Num(_)))
                    | (BaseType::Boolean, PropertyValue::Data(D::Bool(_)))
            );
            if !ok {
                mismatch(out);
            }
        }
        TypeDescriptor::Entity(_) | TypeDescriptor::Ref { .. } => {
            let Some(target) = schema.resolve(t) else {
                out.push((ViolationKind::UnresolvedRef, format!("cannot resolve {t}")));
                return;
            };
            match v {
                PropertyValue::Elem(id) if store.contains(*id) => {
                    let actual = store.get(*id).ty();
                    if !actual.is_subtype_of(&target) {
                        out.push((
                            ViolationKind::PropertyType,
                            format!("{} is not a {}", actual.name(), target.name()),
                        ));
                    }
                }
                PropertyValue::Elem(id) => out.push((
                    ViolationKind::UnresolvedRef,
                    format!("dangling element {id}"),
                )),
                _ => mismatch(out),
            }
        }
        TypeDescriptor::InstanceRef { .. } => {
            if !matches!(v, PropertyValue::QName(_)) {
                mismatch(out);
            }
        }
    }
}

/// Checks that every instance reference held by the weaving model (and its
/// members) resolves, through absolute names, into one of the context
/// models, to an element of the declared entity type. Non-absolute names
/// resolve within the weaving model's own store.
pub fn cross_model_integrity(
    weaving: (&Store, ElemId),
    context: &[(&Store, ElemId)],
) -> ConformanceReport {
    let (ws, wm) = weaving;
    let mut report = ConformanceReport::default();
    let mut elems = vec![wm];
    elems.extend(ws.members(wm));
    for x in elems {
        let el = ws.get(x);
        let xq = ws.qname(x);
        for (p, decl) in el.ty().all_props().iter() {
            let TypeDescriptor::InstanceRef { schema, name } = decl.member_type().innermost()
            else {
                continue;
            };
            for item in el.prop(p).items() {
                let PropertyValue::QName(q) = item else {
                    continue;
                };
                let found = if q.is_absolute() {
                    context.iter().find_map(|(s, m)| {
                        let model = s.get(*m);
                        let segs = q.segments();
                        if segs.first().map(String::as_str) != Some(model.name()) {
                            return None;
                        }
                        let rest = &segs[1..];
                        if rest.is_empty() {
                            return Some((*s, *m));
                        }
                        rest.iter()
                            .try_fold(*m, |cur, seg| s.lookup(cur, seg))
                            .map(|id| (*s, id))
                    })
                } else {
                    ws.resolve(wm, q).ok().map(|id| (ws, id))
                };
                match found {
                    None => report.push(
                        &xq,
                        p,
                        ViolationKind::UnresolvedRef,
                        format!("`{q}` does not resolve"),
                    ),
                    Some((s, id)) => {
                        let ty = s.get(id).ty();
                        let ok = ty
                            .ancestors()
                            .any(|a| a.schema_id() == schema && a.name() == name);
                        if !ok {
                            report.push(
                                &xq,
                                p,
                                ViolationKind::PropertyType,
                                format!("`{q}` is a {}, expected {schema}::{name}", ty.name()),
                            );
                        }
                    }
                }
            }
        }
    }
    report
}
