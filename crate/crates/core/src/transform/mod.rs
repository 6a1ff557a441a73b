//! Rule-based model-to-model transformation: specifications with
//! specialization points and options, most-specific dispatch, execution
//! into a fresh target store and execution traces.

mod exec;
mod trace;

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::expr::{ExprError, ExprNode, ParamDecl};
use crate::schema::{ConformanceReport, TypeSchema};
use crate::typesys::EntityRef;

pub use exec::{execute, Execution, Invocation, RuleCall, TransformContext};
pub use trace::{check_trace, trace_schema, TraceEntry, TraceModel};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("options `{first}` and `{second}` of `{point}` have comparable source types")]
    AmbiguousOptions {
        point: String,
        first: String,
        second: String,
    },
    #[error("rules `{first}` and `{second}` are both dispatched on `{ty}`")]
    AmbiguousDispatch {
        ty: String,
        first: String,
        second: String,
    },
    #[error("option `{option}` names `{point}`, which is not a specialization point")]
    DanglingSpecOption { option: String, point: String },
    #[error("source type of option `{option}` is not a strict subtype of that of `{point}`")]
    OptionNotSubtype { option: String, point: String },
    #[error("{0}")]
    MissingTopRule(String),
    #[error("rule `{0}` is defined twice")]
    DuplicateRule(String),
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("source type `{ty}` of rule `{rule}` is not part of the source schema")]
    UnknownSourceType { rule: String, ty: String },
    #[error("no rule applies to `{0}`")]
    NoApplicableRule(String),
    #[error("rule `{rule}` does not apply to a {ty}")]
    NotApplicable { rule: String, ty: String },
    #[error("rule `{rule}`: {message}")]
    BadArguments { rule: String, message: String },
    #[error("source model does not conform to the source schema:\n{0}")]
    SourceNotConforming(ConformanceReport),
    #[error("top rule must produce exactly one target model: {0}")]
    TopRuleResult(String),
    #[error(transparent)]
    Eval(ExprError),
}

impl From<ExprError> for TransformError {
    fn from(e: ExprError) -> Self {
        match e {
            ExprError::Nested(inner) => match inner.downcast::<TransformError>() {
                Ok(t) => *t,
                Err(other) => TransformError::Eval(ExprError::Nested(other)),
            },
            other => TransformError::Eval(other),
        }
    }
}

impl From<TransformError> for ExprError {
    fn from(e: TransformError) -> Self {
        match e {
            TransformError::Eval(inner) => inner,
            other => ExprError::Nested(Box::new(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleKind {
    Regular,
    SpecPoint,
    /// Specialization of the named point.
    SpecOption(String),
}

impl RuleKind {
    /// Name recorded in traces.
    pub fn trace_name(&self) -> &'static str {
        match self {
            RuleKind::Regular => "RegularRule",
            RuleKind::SpecPoint => "SpecPoint",
            RuleKind::SpecOption(_) => "SpecOption",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.trace_name())
    }
}

pub type RuleBody = dyn Fn(&RuleCall) -> Result<Vec<ExprNode>, ExprError> + Send + Sync;

/// A transformation rule: a template over one source element plus optional
/// scalar parameters, producing target expressions.
#[derive(Clone)]
pub struct Rule {
    pub name: String,
    pub source_type: EntityRef,
    pub kind: RuleKind,
    pub extra_params: Vec<ParamDecl>,
    pub body: Arc<RuleBody>,
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Rule")
            .field("name", &self.name)
            .field("source_type", &self.source_type.qualified())
            .field("kind", &self.kind)
            .field("extra_params", &self.extra_params)
            .finish_non_exhaustive()
    }
}

impl Rule {
    pub fn new<F>(name: impl Into<String>, source_type: &EntityRef, kind: RuleKind, body: F) -> Self
    where
        F: Fn(&RuleCall) -> Result<Vec<ExprNode>, ExprError> + Send + Sync + 'static,
    {
        Rule {
            name: name.into(),
            source_type: source_type.clone(),
            kind,
            extra_params: Vec::new(),
            body: Arc::new(body),
        }
    }

    pub fn with_params(mut self, params: Vec<ParamDecl>) -> Self {
        self.extra_params = params;
        self
    }

    /// Rules taking only the source element take part in dispatch.
    pub fn is_dispatchable(&self) -> bool {
        self.extra_params.is_empty()
    }

    pub fn applies_to(&self, ty: &EntityRef) -> bool {
        ty.is_subtype_of(&self.source_type)
    }
}

#[derive(Debug, Clone)]
pub struct TransformationSpec {
    pub name: String,
    pub source_schema: Arc<TypeSchema>,
    pub target_schema: Arc<TypeSchema>,
    pub rules: IndexMap<String, Rule>,
    pub top: Option<String>,
    pub params: Vec<ParamDecl>,
}

impl TransformationSpec {
    pub fn new(
        name: impl Into<String>,
        source_schema: &Arc<TypeSchema>,
        target_schema: &Arc<TypeSchema>,
    ) -> Self {
        TransformationSpec {
            name: name.into(),
            source_schema: source_schema.clone(),
            target_schema: target_schema.clone(),
            rules: IndexMap::new(),
            top: None,
            params: Vec::new(),
        }
    }

    pub fn add_rule(&mut self, rule: Rule) -> Result<(), TransformError> {
        if self.rules.contains_key(&rule.name) {
            return Err(TransformError::DuplicateRule(rule.name));
        }
        if !self.source_schema.contains_entity(&rule.source_type) {
            return Err(TransformError::UnknownSourceType {
                rule: rule.name,
                ty: rule.source_type.qualified(),
            });
        }
        self.rules.insert(rule.name.clone(), rule);
        Ok(())
    }

    pub fn set_top(&mut self, name: &str) {
        self.top = Some(name.to_string());
    }

    pub fn add_param(&mut self, p: ParamDecl) {
        self.params.push(p);
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.get(name)
    }

    pub fn top_rule(&self) -> Option<&Rule> {
        self.top.as_deref().and_then(|t| self.rules.get(t))
    }

    pub fn options_of<'a, 'b>(
        &'a self,
        point: &'b str,
    ) -> impl Iterator<Item = &'a Rule> + use<'a, 'b> {
        self.rules
            .values()
            .filter(move |r| matches!(&r.kind, RuleKind::SpecOption(p) if p == point))
    }
}

/// Outcome of [`validate_spec`]: hard errors and, separately, the source
/// types no rule applies to.
#[derive(Debug, Default)]
pub struct SpecValidation {
    pub errors: Vec<TransformError>,
    pub uncovered: Vec<EntityRef>,
}

impl SpecValidation {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks top rule presence, option/point links, pairwise incomparability of
/// each point's options and uniqueness of dispatch candidates, and lists
/// the source types with no applicable rule.
pub fn validate_spec(spec: &TransformationSpec) -> SpecValidation {
    let mut out = SpecValidation::default();
    match &spec.top {
        None => out.errors.push(TransformError::MissingTopRule(
            "no top rule declared".to_string(),
        )),
        Some(t) if !spec.rules.contains_key(t) => out.errors.push(TransformError::MissingTopRule(
            format!("top rule `{t}` is not defined"),
        )),
        Some(_) => {}
    }
    for rule in spec.rules.values() {
        if let RuleKind::SpecOption(point) = &rule.kind {
            match spec.rules.get(point) {
                Some(p) if p.kind == RuleKind::SpecPoint => {
                    if p.source_type == rule.source_type
                        || !rule.source_type.is_subtype_of(&p.source_type)
                    {
                        out.errors.push(TransformError::OptionNotSubtype {
                            option: rule.name.clone(),
                            point: point.clone(),
                        });
                    }
                }
                _ => out.errors.push(TransformError::DanglingSpecOption {
                    option: rule.name.clone(),
                    point: point.clone(),
                }),
            }
        }
    }
    for point in spec
        .rules
        .values()
        .filter(|r| r.kind == RuleKind::SpecPoint)
    {
        let options: Vec<&Rule> = spec.options_of(&point.name).collect();
        for (i, a) in options.iter().enumerate() {
            for b in &options[i + 1..] {
                if a.source_type.is_subtype_of(&b.source_type)
                    || b.source_type.is_subtype_of(&a.source_type)
                {
                    out.errors.push(TransformError::AmbiguousOptions {
                        point: point.name.clone(),
                        first: a.name.clone(),
                        second: b.name.clone(),
                    });
                }
            }
        }
    }
    let candidates: Vec<&Rule> = dispatch_candidates(spec).collect();
    for (i, a) in candidates.iter().enumerate() {
        for b in &candidates[i + 1..] {
            if a.source_type == b.source_type {
                out.errors.push(TransformError::AmbiguousDispatch {
                    ty: a.source_type.qualified(),
                    first: a.name.clone(),
                    second: b.name.clone(),
                });
            }
        }
    }
    for ty in spec.source_schema.own_entities() {
        if !spec.rules.values().any(|r| r.applies_to(ty)) {
            out.uncovered.push(ty.clone());
        }
    }
    out
}

/// Rules considered by global dispatch: single-parameter regular rules and
/// specialization points. Options are reached through their point.
pub(crate) fn dispatch_candidates(spec: &TransformationSpec) -> impl Iterator<Item = &Rule> {
    spec.rules.values().filter(|r| {
        r.is_dispatchable() && matches!(r.kind, RuleKind::Regular | RuleKind::SpecPoint)
    })
}

pub(crate) fn most_specific<'a>(
    rules: impl Iterator<Item = &'a Rule>,
    ty: &EntityRef,
) -> Option<&'a Rule> {
    let applicable: Vec<&Rule> = rules.filter(|r| r.applies_to(ty)).collect();
    let strictly_below = |o: &Rule, r: &Rule| {
        o.source_type != r.source_type && o.source_type.is_subtype_of(&r.source_type)
    };
    applicable
        .iter()
        .copied()
        .find(|r| !applicable.iter().any(|o| strictly_below(o, r)))
}

/// Selects the most specific rule for an element of type `ty`. When the
/// winner is a specialization point, its most specific applicable option
/// takes priority and the point itself is the fallback.
pub fn dispatch<'a>(
    spec: &'a TransformationSpec,
    ty: &EntityRef,
) -> Result<&'a Rule, TransformError> {
    let chosen = most_specific(dispatch_candidates(spec), ty)
        .ok_or_else(|| TransformError::NoApplicableRule(ty.qualified()))?;
    if chosen.kind == RuleKind::SpecPoint {
        Ok(most_specific(spec.options_of(&chosen.name), ty).unwrap_or(chosen))
    } else {
        Ok(chosen)
    }
}

/// Dispatch restricted to one specialization point and its options.
pub fn dispatch_in_point<'a>(
    spec: &'a TransformationSpec,
    point: &str,
    ty: &EntityRef,
) -> Result<&'a Rule, TransformError> {
    let p = spec
        .rule(point)
        .ok_or_else(|| TransformError::UnknownRule(point.to_string()))?;
    if !p.applies_to(ty) {
        return Err(TransformError::NotApplicable {
            rule: point.to_string(),
            ty: ty.qualified(),
        });
    }
    Ok(most_specific(spec.options_of(point), ty).unwrap_or(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{model_element_type, model_type, SchemaSet};
    use crate::typesys::PropertySpec;

    fn org() -> Arc<TypeSchema> {
        let mut s = TypeSchema::new("Org");
        let unit = s
            .make_subtype(model_element_type(), "OrgUnit", PropertySpec::new())
            .unwrap();
        s.make_subtype(&unit, "Department", PropertySpec::new())
            .unwrap();
        s.make_subtype(&unit, "Board", PropertySpec::new()).unwrap();
        let m = s
            .make_subtype(model_type(), "Organization", PropertySpec::new())
            .unwrap();
        s.set_model_type(&m);
        s.validate(&SchemaSet::new()).unwrap();
        Arc::new(s)
    }

    fn rule(s: &Arc<TypeSchema>, name: &str, ty: &str, kind: RuleKind) -> Rule {
        Rule::new(name, s.entity(ty).unwrap(), kind, |_| Ok(Vec::new()))
    }

    fn org2wf() -> TransformationSpec {
        let s = org();
        let mut spec = TransformationSpec::new("T", &s, &s);
        spec.add_rule(rule(&s, "top", "Organization", RuleKind::Regular))
            .unwrap();
        spec.add_rule(rule(&s, "P", "OrgUnit", RuleKind::SpecPoint))
            .unwrap();
        spec.add_rule(rule(
            &s,
            "D",
            "Department",
            RuleKind::SpecOption("P".into()),
        ))
        .unwrap();
        spec.add_rule(rule(&s, "B", "Board", RuleKind::SpecOption("P".into())))
            .unwrap();
        spec.set_top("top");
        spec
    }

    #[test]
    fn dispatch_prefers_options() {
        let spec = org2wf();
        let v = validate_spec(&spec);
        assert!(v.is_ok(), "{:?}", v.errors);
        assert!(v.uncovered.is_empty());
        let s = &spec.source_schema;
        assert_eq!(
            dispatch(&spec, s.entity("Department").unwrap())
                .unwrap()
                .name,
            "D"
        );
        assert_eq!(
            dispatch(&spec, s.entity("Board").unwrap()).unwrap().name,
            "B"
        );
        assert_eq!(
            dispatch(&spec, s.entity("OrgUnit").unwrap()).unwrap().name,
            "P"
        );
        assert_eq!(
            dispatch_in_point(&spec, "P", s.entity("Board").unwrap())
                .unwrap()
                .name,
            "B"
        );
        assert!(matches!(
            dispatch(&spec, s.entity("ModelElement").unwrap()),
            Err(TransformError::NoApplicableRule(_))
        ));
    }

    #[test]
    fn comparable_options_are_ambiguous() {
        let mut spec = org2wf();
        let s = spec.source_schema.clone();
        spec.add_rule(rule(&s, "U", "OrgUnit", RuleKind::SpecOption("P".into())))
            .unwrap();
        let v = validate_spec(&spec);
        assert!(v
            .errors
            .iter()
            .any(|e| matches!(e, TransformError::AmbiguousOptions { .. })));
        assert!(v
            .errors
            .iter()
            .any(|e| matches!(e, TransformError::OptionNotSubtype { .. })));
    }

    #[test]
    fn dangling_option_and_missing_top() {
        let s = org();
        let mut spec = TransformationSpec::new("T", &s, &s);
        spec.add_rule(rule(
            &s,
            "D",
            "Department",
            RuleKind::SpecOption("Nope".into()),
        ))
        .unwrap();
        let v = validate_spec(&spec);
        assert!(matches!(v.errors[0], TransformError::MissingTopRule(_)));
        assert!(matches!(
            v.errors[1],
            TransformError::DanglingSpecOption { .. }
        ));
        let names: Vec<_> = v.uncovered.iter().map(|t| t.name().to_string()).collect();
        assert_eq!(names, ["OrgUnit", "Board", "Organization"]);
    }

    #[test]
    fn same_type_candidates_rejected() {
        let mut spec = org2wf();
        let s = spec.source_schema.clone();
        spec.add_rule(rule(&s, "Q", "OrgUnit", RuleKind::Regular))
            .unwrap();
        let v = validate_spec(&spec);
        assert!(matches!(
            v.errors[0],
            TransformError::AmbiguousDispatch { .. }
        ));
        assert!(matches!(
            spec.add_rule(rule(&s, "Q", "Board", RuleKind::Regular)),
            Err(TransformError::DuplicateRule(_))
        ));
    }
}
