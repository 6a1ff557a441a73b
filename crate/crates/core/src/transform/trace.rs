use std::collections::HashSet;
use std::sync::{Arc, OnceLock};

use crate::schema::{
    cross_model_integrity, model_element_type, model_type, ConformanceReport, SchemaSet,
    TypeSchema, ViolationKind, ABSTRACT_SCHEMA,
};
use crate::store::{ElemId, PropertyRecord, PropertyValue, QName, Store, StoreError};
use crate::transform::{dispatch_in_point, RuleKind, TransformationSpec};
use crate::typesys::{
    make_array, make_base, make_iref, make_optional, make_ref, Multiplicity, PropertySpec,
};

pub const TRACE_SCHEMA: &str = "Trace-Schema";

/// One rule invocation: its source element, the rule named at the call
/// site, the rule that ran, the elements its own body created and the
/// invocations it made.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub source: String,
    pub rule: String,
    pub dispatched: String,
    pub rule_kind: String,
    pub targets: Vec<String>,
    pub calls: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceModel {
    pub name: String,
    pub source_model: String,
    pub target_model: String,
    pub timestamp: Option<String>,
    pub entries: Vec<TraceEntry>,
}

/// Schema of trace models. Source and target references are instance
/// references (qualified names), making a trace a weaving model.
pub fn trace_schema() -> &'static Arc<TypeSchema> {
    static CELL: OnceLock<Arc<TypeSchema>> = OnceLock::new();
    CELL.get_or_init(|| {
        let string = make_base("string").expect("base type");
        let mut s = TypeSchema::new(TRACE_SCHEMA);
        s.make_subtype(
            model_element_type(),
            "TraceEntry",
            PropertySpec::new()
                .with(
                    "source",
                    make_iref(ABSTRACT_SCHEMA, "ModelElement"),
                    Multiplicity::One,
                )
                .and_then(|p| p.with("rule", string.clone(), Multiplicity::One))
                .and_then(|p| p.with("ruleType", string.clone(), Multiplicity::One))
                .and_then(|p| p.with("dispatched", string.clone(), Multiplicity::One))
                .and_then(|p| {
                    p.with(
                        "targets",
                        make_array(make_iref(ABSTRACT_SCHEMA, "ModelElement")),
                        Multiplicity::ZeroOrMore,
                    )
                })
                .and_then(|p| {
                    p.with(
                        "calls",
                        make_array(make_ref(TRACE_SCHEMA, "TraceEntry")),
                        Multiplicity::ZeroOrMore,
                    )
                })
                .expect("distinct properties"),
        )
        .expect("fresh type");
        let tm = s
            .make_subtype(
                model_type(),
                "TraceModel",
                PropertySpec::new()
                    .with("timestamp", make_optional(string), Multiplicity::ZeroOrOne)
                    .and_then(|p| {
                        p.with(
                            "source",
                            make_iref(ABSTRACT_SCHEMA, "Model"),
                            Multiplicity::One,
                        )
                    })
                    .and_then(|p| {
                        p.with(
                            "targets",
                            make_array(make_iref(ABSTRACT_SCHEMA, "Model")),
                            Multiplicity::ZeroOrMore,
                        )
                    })
                    .and_then(|p| {
                        p.with(
                            "entries",
                            make_array(make_ref(TRACE_SCHEMA, "TraceEntry")),
                            Multiplicity::ZeroOrMore,
                        )
                    })
                    .expect("distinct properties"),
            )
            .expect("fresh type");
        s.set_model_type(&tm);
        s.validate(&SchemaSet::new())
            .expect("trace schema is valid");
        Arc::new(s)
    })
}

fn qname_value(text: &str) -> Result<PropertyValue, StoreError> {
    Ok(PropertyValue::QName(QName::parse(text)?))
}

impl TraceModel {
    /// Entries in preorder (call order).
    pub fn all_entries(&self) -> Vec<&TraceEntry> {
        fn walk<'a>(e: &'a TraceEntry, out: &mut Vec<&'a TraceEntry>) {
            out.push(e);
            for c in &e.calls {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        for e in &self.entries {
            walk(e, &mut out);
        }
        out
    }

    pub fn without_timestamp(mut self) -> Self {
        self.timestamp = None;
        self
    }

    /// Builds the trace as a model of the trace schema. Entries are named
    /// `call-<k>` in preorder.
    pub fn to_store(&self) -> Result<(Store, ElemId), StoreError> {
        let schema = trace_schema();
        let entry_ty = schema
            .entity("TraceEntry")
            .expect("trace entry type")
            .clone();
        let mut store = Store::new();
        let mut rec = PropertyRecord::new();
        if let Some(ts) = &self.timestamp {
            rec.insert("timestamp".into(), PropertyValue::str(ts.clone()));
        }
        rec.insert("source".into(), qname_value(&self.source_model)?);
        rec.insert(
            "targets".into(),
            PropertyValue::Seq(vec![qname_value(&self.target_model)?]),
        );
        let root = store.root();
        let tm = store.new_model(root, &self.name, schema, rec)?;
        let mut counter = 0;
        for e in &self.entries {
            let id = add_entry(&mut store, tm, &entry_ty, e, &mut counter)?;
            store.set_container(id, tm, "entries");
            link(&mut store, root, tm, "entries", id)?;
        }
        Ok((store, tm))
    }

    /// Reads a trace back from a trace model.
    pub fn from_model(store: &Store, m: ElemId) -> Result<TraceModel, String> {
        let el = store.get(m);
        if el.ty().name() != "TraceModel" {
            return Err(format!("{} is not a TraceModel", store.qname(m)));
        }
        let qn = |v: &PropertyValue| -> Result<String, String> {
            match v {
                PropertyValue::QName(q) => Ok(q.to_string()),
                PropertyValue::Data(crate::store::DataValue::Str(s)) => Ok(s.clone()),
                other => Err(format!("expected a qualified name, found {other:?}")),
            }
        };
        let targets = el.prop("targets").items();
        let target_model = match targets.as_slice() {
            [t] => qn(t)?,
            _ => return Err("trace must name exactly one target model".to_string()),
        };
        fn entry(
            store: &Store,
            id: ElemId,
            qn: &dyn Fn(&PropertyValue) -> Result<String, String>,
        ) -> Result<TraceEntry, String> {
            let el = store.get(id);
            let text = |p: &str| {
                el.prop(p)
                    .as_str()
                    .map(str::to_string)
                    .ok_or_else(|| format!("{}: missing `{p}`", store.qname(id)))
            };
            Ok(TraceEntry {
                source: qn(el.prop("source"))?,
                rule: text("rule")?,
                dispatched: text("dispatched")?,
                rule_kind: text("ruleType")?,
                targets: el
                    .prop("targets")
                    .items()
                    .into_iter()
                    .map(qn)
                    .collect::<Result<_, _>>()?,
                calls: el
                    .prop("calls")
                    .elems()
                    .into_iter()
                    .map(|c| entry(store, c, qn))
                    .collect::<Result<_, _>>()?,
            })
        }
        Ok(TraceModel {
            name: el.name().to_string(),
            source_model: qn(el.prop("source"))?,
            target_model,
            timestamp: el.prop("timestamp").as_str().map(str::to_string),
            entries: el
                .prop("entries")
                .elems()
                .into_iter()
                .map(|c| entry(store, c, &qn))
                .collect::<Result<_, _>>()?,
        })
    }
}

fn link(
    store: &mut Store,
    owner: ElemId,
    x: ElemId,
    prop: &str,
    target: ElemId,
) -> Result<(), StoreError> {
    let mut rec = PropertyRecord::new();
    rec.insert(prop.to_string(), PropertyValue::Elem(target));
    store.update_element(owner, x, rec)
}

fn add_entry(
    store: &mut Store,
    tm: ElemId,
    ty: &crate::typesys::EntityRef,
    e: &TraceEntry,
    counter: &mut usize,
) -> Result<ElemId, StoreError> {
    *counter += 1;
    let mut rec = PropertyRecord::new();
    rec.insert("source".into(), qname_value(&e.source)?);
    rec.insert("rule".into(), PropertyValue::str(e.rule.clone()));
    rec.insert("ruleType".into(), PropertyValue::str(e.rule_kind.clone()));
    rec.insert(
        "dispatched".into(),
        PropertyValue::str(e.dispatched.clone()),
    );
    rec.insert(
        "targets".into(),
        PropertyValue::Seq(
            e.targets
                .iter()
                .map(|t| qname_value(t))
                .collect::<Result<_, _>>()?,
        ),
    );
    let id = store.new_element(tm, &format!("call-{counter}"), ty, rec)?;
    for c in &e.calls {
        let cid = add_entry(store, tm, ty, c, counter)?;
        store.set_container(cid, id, "calls");
        link(store, tm, id, "calls", cid)?;
    }
    Ok(id)
}

/// Checks a trace against the artifacts of its run: reference integrity,
/// coverage of every target element, consistency of each entry's rule with
/// dispatch, and a single root entry for the top rule on the source model.
pub fn check_trace(
    trace: &TraceModel,
    target: (&Store, ElemId),
    spec: &TransformationSpec,
    source: (&Store, ElemId),
) -> ConformanceReport {
    let mut report = ConformanceReport::default();
    let trace_qn = format!("/{}", trace.name);
    match trace.to_store() {
        Ok((ts, tm)) => report.extend(cross_model_integrity((&ts, tm), &[source, target])),
        Err(e) => {
            report.push(&trace_qn, "", ViolationKind::TraceStructure, e.to_string());
            return report;
        }
    }

    let entries = trace.all_entries();
    let covered: HashSet<&str> = entries
        .iter()
        .flat_map(|e| e.targets.iter().map(String::as_str))
        .collect();
    let (ts, tm) = target;
    for id in ts.closure(tm) {
        let q = ts.qname(id);
        if !covered.contains(q.as_str()) {
            report.push(
                &q,
                "",
                ViolationKind::TraceCoverage,
                "not produced by any trace entry",
            );
        }
    }

    let (ss, sm) = source;
    for (k, e) in entries.iter().enumerate() {
        let at = format!("{trace_qn}/call-{}", k + 1);
        let Ok(src) = ss.resolve_str(ss.root(), &e.source) else {
            continue;
        };
        let ty = ss.get(src).ty();
        let Some(rule) = spec.rule(&e.rule) else {
            report.push(
                &at,
                "rule",
                ViolationKind::TraceDispatch,
                format!("unknown rule `{}`", e.rule),
            );
            continue;
        };
        let expected = if rule.kind == RuleKind::SpecPoint {
            dispatch_in_point(spec, &rule.name, ty).ok()
        } else if rule.applies_to(ty) {
            Some(rule)
        } else {
            None
        };
        match expected {
            None => report.push(
                &at,
                "rule",
                ViolationKind::TraceDispatch,
                format!("`{}` does not apply to a {}", e.rule, ty.name()),
            ),
            Some(r) => {
                if r.name != e.dispatched {
                    report.push(
                        &at,
                        "dispatched",
                        ViolationKind::TraceDispatch,
                        format!(
                            "dispatch selects `{}`, trace records `{}`",
                            r.name, e.dispatched
                        ),
                    );
                }
                if r.kind.trace_name() != e.rule_kind {
                    report.push(
                        &at,
                        "ruleType",
                        ViolationKind::TraceDispatch,
                        format!(
                            "`{}` is a {}, trace records {}",
                            r.name, r.kind, e.rule_kind
                        ),
                    );
                }
            }
        }
    }

    let source_qn = ss.qname(sm);
    if trace.source_model != source_qn {
        report.push(
            &trace_qn,
            "source",
            ViolationKind::TraceStructure,
            format!("expected `{source_qn}`"),
        );
    }
    let target_qn = ts.qname(tm);
    if trace.target_model != target_qn {
        report.push(
            &trace_qn,
            "targets",
            ViolationKind::TraceStructure,
            format!("expected `{target_qn}`"),
        );
    }
    match trace.entries.as_slice() {
        [root] => {
            if spec.top.as_deref() != Some(root.rule.as_str()) {
                report.push(
                    format!("{trace_qn}/call-1"),
                    "rule",
                    ViolationKind::TraceStructure,
                    "root entry is not the top rule",
                );
            }
            if root.source != source_qn {
                report.push(
                    format!("{trace_qn}/call-1"),
                    "source",
                    ViolationKind::TraceStructure,
                    "root entry does not start at the source model",
                );
            }
        }
        other => report.push(
            &trace_qn,
            "entries",
            ViolationKind::TraceStructure,
            format!("expected one root entry, found {}", other.len()),
        ),
    }
    report
}
