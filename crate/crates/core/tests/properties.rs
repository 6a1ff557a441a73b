mod common;

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use modexpr::expr::{evaluate_atomic, ParamEnv, ReductionGuard};
use modexpr::schema::{conforms, SchemaSet, TypeSchema};
use modexpr::store::Store;
use modexpr::syntax::{
    load_schema, parse_mex, parse_mmx, parse_mtx, read_model, serialize_model, ParseError, Source,
};
use modexpr::transform::{check_trace, execute, validate_spec};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

struct Schemas {
    set: SchemaSet,
    workflow: Arc<TypeSchema>,
}

fn schemas() -> &'static Schemas {
    static S: OnceLock<Schemas> = OnceLock::new();
    S.get_or_init(|| {
        let mut set = SchemaSet::new();
        let workflow = load_schema(&fixture("workflow.mmx"), &set).unwrap();
        let org = load_schema(&fixture("orgmodel.mmx"), &set).unwrap();
        set.insert(workflow.clone());
        set.insert(org);
        Schemas { set, workflow }
    })
}

/// Every diagnostic points at a position inside `text` (or just past its
/// last character).
fn spans_within(text: &str, e: &ParseError) -> Result<(), TestCaseError> {
    let lines: Vec<&str> = text.split('\n').collect();
    for d in &e.diagnostics {
        let (line, col) = (d.span.line as usize, d.span.column as usize);
        prop_assert!(line >= 1 && line <= lines.len(), "{d}");
        let width = lines[line - 1].chars().count();
        prop_assert!(col >= 1 && col <= width + 1, "{d} (line width {width})");
    }
    Ok(())
}

/// Replaces, inserts or deletes one character at a chosen position.
fn mutate(text: &str, at: usize, op: u8, c: char) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    let i = at % (chars.len() + 1);
    match op % 3 {
        0 if i < chars.len() => chars[i] = c,
        1 => chars.insert(i, c),
        _ if i < chars.len() => {
            chars.remove(i);
        }
        _ => chars.push(c),
    }
    chars.into_iter().collect()
}

fn syntax_char() -> impl Strategy<Value = char> {
    prop::sample::select(vec![
        '<', '>', '/', '{', '}', '(', ')', '[', ']', '"', '$', '=', ':', '.', ',', '@', '?', '*',
        '\n', ' ', 'a', 'Z', '0', '9', '\\', '#', '-',
    ])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn evaluated_models_conform(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let schema = common::schema(&mut rng, "G");
        let expr = common::ExprGen::new(&schema, &mut rng).model("m");
        let env = common::env(&mut rng);
        let mut store = Store::new();
        let root = store.root();
        let m = evaluate_atomic(&expr, &env, &mut store, root, &ReductionGuard::default())
            .unwrap()[0];
        let report = conforms(&store, m, &schema);
        prop_assert!(report.is_ok(), "{report}");
    }

    #[test]
    fn serialization_round_trips(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let schema = common::schema(&mut rng, "R");
        let expr = common::ExprGen::new(&schema, &mut rng).model("rt");
        let env = common::env(&mut rng);
        let guard = ReductionGuard::default();
        let mut store = Store::new();
        let root = store.root();
        let m = evaluate_atomic(&expr, &env, &mut store, root, &guard).unwrap()[0];
        let text = serialize_model(&store, m);
        let (again, m2) = read_model(Source::from(&text), &schema, &ParamEnv::new(), &guard)
            .map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        let m2 = m2.unwrap();
        prop_assert!(store.structurally_equal(m, &again, m2), "{text}");
        prop_assert_eq!(serialize_model(&again, m2), text);
    }

    #[test]
    fn dispatch_agrees_with_oracle(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let source = common::schema(&mut rng, "S");
        let expr = common::ExprGen::new(&source, &mut rng).model("src");
        let env = common::env(&mut rng);
        let guard = ReductionGuard::default();
        let mut store = Store::new();
        let root = store.root();
        let m = evaluate_atomic(&expr, &env, &mut store, root, &guard).unwrap()[0];
        let src = Arc::new(store);
        let spec = common::spec(&mut rng, &source);
        prop_assert!(validate_spec(&spec).errors.is_empty());
        let spec = Arc::new(spec);
        let run = execute(&spec, &src, m, &ParamEnv::new(), &guard).unwrap();
        prop_assert!(conforms(&run.store, run.target, &spec.target_schema).is_ok());
        for e in run.trace.all_entries().into_iter().skip(1) {
            let id = src.resolve_str(src.root(), &e.source).unwrap();
            let want = common::oracle(&spec, src.get(id).ty());
            prop_assert_eq!(want, Some((e.rule.clone(), e.dispatched.clone())));
        }
        let report = check_trace(&run.trace, (&run.store, run.target), &spec, (&src, m));
        prop_assert!(report.is_ok(), "{report}");
    }

    #[test]
    fn generated_schemas_parse_back(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let text = common::schema_text(&mut rng, "P");
        prop_assert!(parse_mmx(text.as_str()).is_ok(), "{text}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn parsers_are_total(text in "\\PC{0,200}") {
        let s = schemas();
        if let Err(e) = parse_mmx(text.as_str()) {
            spans_within(&text, &e)?;
        }
        if let Err(e) = parse_mex(text.as_str(), &s.workflow) {
            spans_within(&text, &e)?;
        }
        if let Err(e) = parse_mtx(text.as_str(), &s.set) {
            spans_within(&text, &e)?;
        }
    }

    #[test]
    fn mutated_schema_spans(at in any::<usize>(), op in any::<u8>(), c in syntax_char()) {
        let text = mutate(&fixture_text("orgmodel.mmx"), at, op, c);
        if let Err(e) = parse_mmx(text.as_str()) {
            spans_within(&text, &e)?;
        }
    }

    #[test]
    fn mutated_template_spans(at in any::<usize>(), op in any::<u8>(), c in syntax_char()) {
        let text = mutate(&fixture_text("approval.mex"), at, op, c);
        if let Err(e) = parse_mex(text.as_str(), &schemas().workflow) {
            spans_within(&text, &e)?;
        }
    }

    #[test]
    fn mutated_spec_spans(at in any::<usize>(), op in any::<u8>(), c in syntax_char()) {
        let text = mutate(&fixture_text("org2wf.mtx"), at, op, c);
        if let Err(e) = parse_mtx(text.as_str(), &schemas().set) {
            spans_within(&text, &e)?;
        }
    }
}
