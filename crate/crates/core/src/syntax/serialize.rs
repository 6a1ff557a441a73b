use std::fmt::Write;

use crate::schema::universal_schema;
use crate::store::{format_number, DataValue, ElemId, Link, PropertyValue, Store, StoreError};
use crate::syntax::lower::infer_slot;
use crate::transform::TraceModel;

fn quote(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        if matches!(c, '"' | '\\' | '$') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
}

fn value(v: &PropertyValue, out: &mut String) {
    match v {
        PropertyValue::Absent => out.push_str("null"),
        PropertyValue::Data(DataValue::Str(s)) => quote(s, out),
        PropertyValue::Data(DataValue::Num(n)) => out.push_str(&format_number(*n)),
        PropertyValue::Data(DataValue::Bool(b)) => {
            let _ = write!(out, "{b}");
        }
        PropertyValue::QName(q) => quote(&q.to_string(), out),
        PropertyValue::Elem(_) => unreachable!("element values are written as children"),
        PropertyValue::Seq(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                value(item, out);
            }
            out.push(']');
        }
    }
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

/// Ground MEX text of an element and everything it contains: attributes in
/// property declaration order, children in link order, references to
/// elements held elsewhere as `$refByName` tags.
pub fn serialize_model(store: &Store, id: ElemId) -> String {
    let mut out = String::new();
    element(store, id, 0, &mut out);
    out
}

fn element(store: &Store, id: ElemId, depth: usize, out: &mut String) {
    let el = store.get(id);
    indent(depth, out);
    let _ = write!(out, "<{}", el.ty().name());
    for (k, decl) in el.ty().all_props().iter() {
        if decl.ty.is_entity_valued() {
            continue;
        }
        let v = el.prop(k);
        if v.is_absent() {
            continue;
        }
        let _ = write!(out, " {k}=");
        value(v, out);
    }
    let links: Vec<&Link> = el.links().iter().filter(|l| !l.derived).collect();
    if links.is_empty() {
        out.push_str("/>\n");
        return;
    }
    out.push_str(">\n");
    let scope = if el.is_model() {
        id
    } else {
        store.enclosing_model(id)
    };
    let schema = store
        .get(scope)
        .schema()
        .cloned()
        .unwrap_or_else(|| universal_schema().clone());
    let mut i = 0;
    while i < links.len() {
        let prop = &links[i].property;
        let explicit = |l: &Link| {
            infer_slot(el.ty(), &schema, Some(store.get(l.target).ty())).as_deref()
                != Some(l.property.as_str())
        };
        let group = explicit(links[i]);
        let mut j = i;
        while j < links.len() && links[j].property == *prop && explicit(links[j]) == group {
            j += 1;
        }
        let inner = if group {
            indent(depth + 1, out);
            let _ = writeln!(out, "<.{prop}>");
            depth + 2
        } else {
            depth + 1
        };
        for l in &links[i..j] {
            let t = store.get(l.target);
            if t.container() == Some((id, prop.as_str())) {
                element(store, l.target, inner, out);
            } else {
                indent(inner, out);
                let _ = write!(out, "<{} $refByName=", t.ty().name());
                let path = if t.owner() == Some(scope) {
                    t.name().to_string()
                } else {
                    store.qname(l.target)
                };
                quote(&path, out);
                out.push_str("/>\n");
            }
        }
        if group {
            indent(depth + 1, out);
            let _ = writeln!(out, "</.{prop}>");
        }
        i = j;
    }
    indent(depth, out);
    let _ = writeln!(out, "</{}>", el.ty().name());
}

/// Serializes a trace as a model of the trace schema. With
/// `emit_timestamp` off the output is reproducible byte for byte.
pub fn serialize_trace(trace: &TraceModel, emit_timestamp: bool) -> Result<String, StoreError> {
    let (store, tm) = if emit_timestamp {
        trace.to_store()?
    } else {
        trace.clone().without_timestamp().to_store()?
    };
    Ok(serialize_model(&store, tm))
}
