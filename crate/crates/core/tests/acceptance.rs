//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use modexpr::cli;
use modexpr::expr::{evaluate_atomic, ExprError, ExprNode, GuardLimit, ParamEnv, ReductionGuard};
use modexpr::schema::{conforms, SchemaSet, TypeSchema};
use modexpr::store::{ElemId, PropertyRecord, PropertyValue, Store, StoreError};
use modexpr::syntax::{load_model, load_schema, read_model, serialize_model, Source};
use modexpr::transform::{check_trace, execute, trace_schema, validate_spec, TraceModel};
use modexpr::typesys::{make_array, make_base, make_optional, Multiplicity, PropertySpec};

type Check = fn() -> Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["modexpr"];
    argv.extend_from_slice(args);
    let code = cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn workflow() -> Arc<TypeSchema> {
    load_schema(&fixture("workflow.mmx"), &SchemaSet::new()).unwrap()
}

/// Names of the elements nested under `id`, in order.
fn child_names(store: &Store, id: ElemId) -> Vec<String> {
    common::contained(store, id)
        .into_iter()
        .map(|c| store.get(c).name().to_string())
        .collect()
}

fn only_child(store: &Store, id: ElemId) -> Result<ElemId, String> {
    let kids = common::contained(store, id);
    ensure(kids.len() == 1, || {
        format!("{} has {} children", store.qname(id), kids.len())
    })?;
    Ok(kids[0])
}

fn transform_judy(dir: &Path) -> Result<(PathBuf, PathBuf), String> {
    let out = dir.join("out.mex");
    let trace = dir.join("trace.mex");
    let (code, _, err) = run_cli(&[
        "transform",
        "--spec",
        p(&fixture("org2wf.mtx")),
        "--source",
        p(&fixture("acme.mex")),
        "--param",
        "worker=Judy",
        "--param",
        "sensitivity=3",
        "-o",
        p(&out),
        "--trace",
        p(&trace),
        "--no-timestamp",
    ]);
    ensure(code == 0, || format!("transform exited {code}: {err}"))?;
    Ok((out, trace))
}

fn c1_org_approval() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let (out, _) = transform_judy(dir.path())?;
    let elapsed = start.elapsed();
    let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    let golden = std::fs::read_to_string(fixture("golden/org_approval.mex")).unwrap();
    ensure(text == golden, || {
        format!("output differs from golden:\n{text}")
    })?;
    ensure(elapsed.as_secs_f64() < 1.0, || format!("took {elapsed:?}"))?;

    let (store, top) = load_model(&out, &workflow()).map_err(|e| e.to_string())?;
    let top = top.ok_or("no model")?;
    let count = |ty: &str| {
        store
            .ids()
            .filter(|&i| store.get(i).ty().name() == ty)
            .count()
    };
    ensure(
        count("WorkflowModel") == 1 && count("Process") == 1 && count("Sequence") == 1,
        || "expected one WorkflowModel, Process and Sequence".into(),
    )?;
    let process = only_child(&store, top)?;
    ensure(store.get(process).name() == "ApprovalForJudy", || {
        "process name".into()
    })?;
    let seq = only_child(&store, process)?;
    let steps = common::contained(&store, seq);
    ensure(steps.len() == 4, || {
        format!("{} sequence steps", steps.len())
    })?;
    let par = steps[3];
    ensure(store.get(par).ty().name() == "Parallel", || {
        "4th step is not a Parallel".into()
    })?;
    let performers: Vec<String> = common::contained(&store, par)
        .into_iter()
        .map(|t| {
            store
                .get(t)
                .prop("performer")
                .as_str()
                .unwrap_or("")
                .to_string()
        })
        .collect();
    ensure(performers == ["Alice", "Bob", "Carol"], || {
        format!("{performers:?}")
    })?;
    Ok(format!("byte-identical, {} ms", elapsed.as_millis()))
}

fn strip(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn last(q: &str) -> &str {
    q.rsplit('/').next().unwrap_or(q)
}

fn c2_trace() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (out, trace_path) = transform_judy(dir.path())?;
    let (ts, tm) = load_model(&trace_path, trace_schema()).map_err(|e| e.to_string())?;
    let trace = TraceModel::from_model(&ts, tm.ok_or("empty trace")?)?;
    let pairs: Vec<(String, String, String)> = trace
        .all_entries()
        .into_iter()
        .filter(|e| e.rule == "OrgUnit2Approval")
        .map(|e| {
            (
                strip(last(&e.source)),
                e.targets
                    .first()
                    .map(|t| strip(last(t)))
                    .unwrap_or_default(),
                e.dispatched.clone(),
            )
        })
        .collect();
    let expected = [
        ("Engineering", "ApproveByGrace"),
        ("TechnologyDivision", "ApproveByDave"),
        ("ExecutiveBoard", "BoardApprovalExecutiveBoard"),
    ];
    ensure(pairs.len() == 3, || {
        format!("{} OrgUnit2Approval entries", pairs.len())
    })?;
    for ((s, t, _), (es, et)) in pairs.iter().zip(expected) {
        ensure(s == es && t == et, || {
            format!("{s} -> {t}, expected {es} -> {et}")
        })?;
    }
    let (code, stdout, _) = run_cli(&[
        "trace-check",
        "--trace",
        p(&trace_path),
        "--target",
        p(&out),
        "--source",
        p(&fixture("acme.mex")),
        "--spec",
        p(&fixture("org2wf.mtx")),
    ]);
    ensure(code == 0, || format!("trace-check exited {code}: {stdout}"))?;
    Ok(format!(
        "3 entries via {}, trace-check exit 0",
        pairs
            .iter()
            .map(|x| x.2.as_str())
            .collect::<Vec<_>>()
            .join("/")
    ))
}

fn eval_fixture(template: &str, params: &[&str]) -> Result<(Store, ElemId, String), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("out.mex");
    let (expr, schema) = (fixture(template), fixture("workflow.mmx"));
    let mut args = vec!["eval", p(&expr), "--schema", p(&schema), "-o", p(&out)];
    for kv in params {
        args.push("--param");
        args.push(kv);
    }
    let (code, _, err) = run_cli(&args);
    ensure(code == 0, || format!("eval exited {code}: {err}"))?;
    let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    let (store, top) = load_model(&out, &workflow()).map_err(|e| e.to_string())?;
    Ok((store, top.ok_or("no model")?, text))
}

/// Type and name of each step below `Process/Sequence`, with the names of
/// its own children.
fn steps(store: &Store, top: ElemId) -> Result<Vec<(String, String, Vec<String>)>, String> {
    let process = only_child(store, top)?;
    let seq = only_child(store, process)?;
    Ok(common::contained(store, seq)
        .into_iter()
        .map(|s| {
            (
                store.get(s).ty().name().to_string(),
                store.get(s).name().to_string(),
                child_names(store, s),
            )
        })
        .collect())
}

fn c3_template_family() -> Result<String, String> {
    let (store, top, text) = eval_fixture(
        "approval.mex",
        &["document=Contract", "approvers=3", "mode=parallel"],
    )?;
    ensure(
        text == std::fs::read_to_string(fixture("golden/approval_contract.mex")).unwrap(),
        || "contract output differs from golden".into(),
    )?;
    let s = steps(&store, top)?;
    let expected_tasks: Vec<String> = (0..3).map(|i| format!("ContractApproval-{i}")).collect();
    ensure(
        s.len() == 2
            && s[0].1 == "Write Contract"
            && s[1].0 == "Parallel"
            && s[1].2 == expected_tasks,
        || format!("contract: {s:?}"),
    )?;

    let (store, top, text) = eval_fixture(
        "approval.mex",
        &["document=Invoice", "approvers=2", "mode=sequential"],
    )?;
    ensure(
        text == std::fs::read_to_string(fixture("golden/approval_invoice.mex")).unwrap(),
        || "invoice output differs from golden".into(),
    )?;
    let s = steps(&store, top)?;
    let expected_tasks: Vec<String> = (0..2).map(|i| format!("InvoiceApproval-{i}")).collect();
    ensure(
        s.len() == 2
            && s[0].1 == "Write Invoice"
            && s[1].0 == "Sequence"
            && s[1].2 == expected_tasks,
        || format!("invoice: {s:?}"),
    )?;
    Ok("Contract: 3 under Parallel; Invoice: 2 under Sequence".into())
}

fn c4_higher_order() -> Result<String, String> {
    let (store, top, _) = eval_fixture(
        "generic_approval.mex",
        &[
            "worker=two_step_write.mex",
            "document=Contract",
            "approvers=2",
            "mode=parallel",
        ],
    )?;
    let s = steps(&store, top)?;
    ensure(
        s.len() == 2
            && s[0].0 == "Sequence"
            && s[0].2 == ["Write Contract-draft", "Write Contract-final"]
            && s[1].0 == "Parallel"
            && s[1].2 == ["ContractApproval-0", "ContractApproval-1"],
        || format!("{s:?}"),
    )?;
    Ok("nested Sequence [Write Contract-draft, Write Contract-final]".into())
}

fn c5_typing() -> Result<String, String> {
    const N: u64 = 1000;
    let guard = ReductionGuard::default();
    let mut elements = 0;
    for seed in 0..N {
        let mut rng = common::rng(seed);
        let schema = common::schema(&mut rng, "G");
        let expr = common::ExprGen::new(&schema, &mut rng).model("m");
        let env = common::env(&mut rng);
        let mut store = Store::new();
        let root = store.root();
        let produced = evaluate_atomic(&expr, &env, &mut store, root, &guard)
            .map_err(|e| format!("seed {seed}: evaluation failed: {e}"))?;
        let report = conforms(&store, produced[0], &schema);
        ensure(report.is_ok(), || format!("seed {seed}:\n{report}"))?;
        elements += store.len();
    }
    Ok(format!("{N} triples conform ({elements} elements)"))
}

fn c6_transform_props() -> Result<String, String> {
    const N: u64 = 500;
    let guard = ReductionGuard::default();
    let mut entries = 0;
    for seed in 0..N {
        let mut rng = common::rng(10_000 + seed);
        let source = common::schema(&mut rng, "S");
        let expr = common::ExprGen::new(&source, &mut rng).model("src");
        let env = common::env(&mut rng);
        let mut store = Store::new();
        let root = store.root();
        let m = evaluate_atomic(&expr, &env, &mut store, root, &guard)
            .map_err(|e| format!("seed {seed}: {e}"))?[0];
        let src = Arc::new(store);
        let spec = common::spec(&mut rng, &source);
        let v = validate_spec(&spec);
        ensure(v.errors.is_empty(), || {
            format!("seed {seed}: {:?}", v.errors)
        })?;
        let spec = Arc::new(spec);
        let run = execute(&spec, &src, m, &ParamEnv::new(), &guard)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let report = conforms(&run.store, run.target, &spec.target_schema);
        ensure(report.is_ok(), || format!("seed {seed}: target\n{report}"))?;
        for e in run.trace.all_entries().into_iter().skip(1) {
            let id = src
                .resolve_str(src.root(), &e.source)
                .map_err(|x| format!("seed {seed}: {x}"))?;
            let want = common::oracle(&spec, src.get(id).ty());
            let got = Some((e.rule.clone(), e.dispatched.clone()));
            ensure(want == got, || {
                format!("seed {seed}: {}: oracle {want:?}, got {got:?}", e.source)
            })?;
            entries += 1;
        }
        let report = check_trace(&run.trace, (&run.store, run.target), &spec, (&src, m));
        ensure(report.is_ok(), || format!("seed {seed}: trace\n{report}"))?;
    }
    Ok(format!(
        "{N} specs, {entries} dispatches agree with the oracle"
    ))
}

fn merge_schema() -> Arc<TypeSchema> {
    let string = make_base("string").unwrap();
    let mut s = TypeSchema::new("Merge");
    s.make_subtype(
        modexpr::schema::model_element_type(),
        "Item",
        PropertySpec::new()
            .with(
                "label",
                make_optional(string.clone()),
                Multiplicity::ZeroOrOne,
            )
            .unwrap()
            .with("count", make_base("number").unwrap(), Multiplicity::One)
            .unwrap()
            .with("tags", make_array(string), Multiplicity::ZeroOrMore)
            .unwrap(),
    )
    .unwrap();
    let m = s
        .make_subtype(modexpr::schema::model_type(), "Bag", PropertySpec::new())
        .unwrap();
    s.set_model_type(&m);
    s.validate(&SchemaSet::new()).unwrap();
    Arc::new(s)
}

fn rec(entries: Vec<(&str, PropertyValue)>) -> PropertyRecord {
    entries
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

fn strs(xs: &[&str]) -> PropertyValue {
    PropertyValue::Seq(xs.iter().map(|x| PropertyValue::str(*x)).collect())
}

fn c7_merge() -> Result<String, String> {
    let schema = merge_schema();
    let item = schema.entity("Item").unwrap().clone();
    let mut st = Store::new();
    let m = st
        .new_model(st.root(), "M", &schema, PropertyRecord::new())
        .map_err(|e| e.to_string())?;
    let x = st
        .new_element(
            m,
            "x",
            &item,
            rec(vec![
                ("label", PropertyValue::str("a")),
                ("count", PropertyValue::num(1.0)),
                ("tags", strs(&["p", "q"])),
            ]),
        )
        .map_err(|e| e.to_string())?;
    let steps: Vec<(PropertyRecord, &str, f64, Vec<&str>)> = vec![
        (
            rec(vec![("label", PropertyValue::str("b"))]),
            "b",
            1.0,
            vec!["p", "q"],
        ),
        (
            rec(vec![("tags", strs(&["r"]))]),
            "b",
            1.0,
            vec!["p", "q", "r"],
        ),
        (
            rec(vec![
                ("count", PropertyValue::num(7.0)),
                ("tags", strs(&["p"])),
            ]),
            "b",
            7.0,
            vec!["p", "q", "r", "p"],
        ),
        (
            rec(vec![("tags", strs(&[]))]),
            "b",
            7.0,
            vec!["p", "q", "r", "p"],
        ),
        (PropertyRecord::new(), "b", 7.0, vec!["p", "q", "r", "p"]),
    ];
    for (i, (pr, label, count, tags)) in steps.into_iter().enumerate() {
        st.update_element(m, x, pr)
            .map_err(|e| format!("step {i}: {e}"))?;
        let el = st.get(x);
        ensure(
            el.prop("label") == &PropertyValue::str(label)
                && el.prop("count") == &PropertyValue::num(count)
                && el.prop("tags") == &strs(&tags),
            || format!("step {i}: {:?}", el.props()),
        )?;
    }
    let bad = st.update_element(m, x, rec(vec![("name", PropertyValue::str("y"))]));
    ensure(
        matches!(bad, Err(StoreError::BadPropertyValue { .. })),
        || format!("renaming through merge: {bad:?}"),
    )?;
    Ok("scalars overridden, arrays concatenated (5 steps)".into())
}

fn c8_resolution() -> Result<String, String> {
    let schema = merge_schema();
    let item = schema.entity("Item").unwrap().clone();
    let count = rec(vec![("count", PropertyValue::num(0.0))]);
    let mut st = Store::new();
    let e = |r: Result<ElemId, StoreError>| r.map_err(|e| e.to_string());
    let outer = e(st.new_model(st.root(), "Acme Corp", &schema, PropertyRecord::new()))?;
    let inner = e(st.new_model(outer, "Inner Model", &schema, PropertyRecord::new()))?;
    let a = e(st.new_element(outer, "Executive Board", &item, count.clone()))?;
    let b = e(st.new_element(inner, "Team B", &item, count.clone()))?;
    let ok: Vec<(ElemId, &str, ElemId)> = vec![
        (outer, "Executive Board", a),
        (inner, "Team B", b),
        (outer, "Inner Model/Team B", b),
        (inner, "../Executive Board", a),
        (inner, "../Inner Model/Team B", b),
        (inner, "/Acme Corp/Executive Board", a),
        (outer, "/Acme Corp/Inner Model/Team B", b),
        (inner, "/Acme Corp", outer),
    ];
    for (model, path, want) in &ok {
        let got = st
            .resolve_str(*model, path)
            .map_err(|x| format!("`{path}`: {x}"))?;
        ensure(got == *want, || {
            format!("`{path}` resolved to {}", st.qname(got))
        })?;
    }
    let failing: Vec<(ElemId, &str)> = vec![
        (outer, "Team B"),
        (outer, "Executive  Board"),
        (inner, "Executive Board"),
        (outer, "Executive Board/x"),
        (outer, "../../x"),
        (inner, "/Nope/Team B"),
        (outer, ""),
        (outer, "a//b"),
        (inner, ".."),
    ];
    for (model, path) in &failing {
        ensure(st.resolve_str(*model, path).is_err(), || {
            format!("`{path}` resolved")
        })?;
    }
    Ok(format!(
        "{} resolve, {} fail as expected",
        ok.len(),
        failing.len()
    ))
}

fn c9_round_trip() -> Result<String, String> {
    const N: u64 = 500;
    let guard = ReductionGuard::default();
    for seed in 0..N {
        let mut rng = common::rng(20_000 + seed);
        let schema = common::schema(&mut rng, "R");
        let expr = common::ExprGen::new(&schema, &mut rng).model("round trip");
        let env = common::env(&mut rng);
        let mut store = Store::new();
        let root = store.root();
        let m = evaluate_atomic(&expr, &env, &mut store, root, &guard)
            .map_err(|e| format!("seed {seed}: {e}"))?[0];
        let text = serialize_model(&store, m);
        let (again, m2) = read_model(Source::from(&text), &schema, &ParamEnv::new(), &guard)
            .map_err(|e| format!("seed {seed}: {e}\n{text}"))?;
        let m2 = m2.ok_or("no model")?;
        ensure(store.structurally_equal(m, &again, m2), || {
            format!(
                "seed {seed}: not equal\n{text}\n{}",
                serialize_model(&again, m2)
            )
        })?;
        let text2 = serialize_model(&again, m2);
        ensure(text == text2, || {
            format!("seed {seed}: second serialization differs")
        })?;
    }
    Ok(format!("{N} models round-trip"))
}

fn diverge(calls: Arc<AtomicUsize>) -> ExprNode {
    ExprNode::kappa(move |_| {
        calls.fetch_add(1, Ordering::SeqCst);
        Ok(vec![diverge(calls.clone())])
    })
}

fn c10_guard() -> Result<String, String> {
    let schema = workflow();
    let process = schema.entity("Process").unwrap().clone();
    let calls = Arc::new(AtomicUsize::new(0));
    let expr = ExprNode::model(&schema)
        .map_err(|e| e.to_string())?
        .name("W")
        .children(
            "processes",
            vec![
                ExprNode::element(&schema, &process).name("before").build(),
                diverge(calls.clone()),
            ],
        )
        .map_err(|e| e.to_string())?
        .build();
    let mut store = Store::new();
    let root = store.root();
    let before = store.len();
    let guard = ReductionGuard::default();
    let r = evaluate_atomic(&expr, &ParamEnv::new(), &mut store, root, &guard);
    let n = calls.load(Ordering::SeqCst);
    ensure(
        matches!(
            r,
            Err(ExprError::GuardExceeded {
                limit: GuardLimit::Depth,
                max: 64
            })
        ),
        || format!("got {r:?}"),
    )?;
    ensure(n == guard.max_depth, || {
        format!("{n} reductions before abort")
    })?;
    ensure(
        store.len() == before && store.lookup(root, "W").is_none(),
        || "scratch store was not discarded".into(),
    )?;
    Ok(format!(
        "GuardExceeded at depth {}, {n} reductions, store unchanged",
        guard.max_depth
    ))
}

fn main() {
    let checks: [(&str, Check); 10] = [
        ("organization to workflow", c1_org_approval),
        ("trace reproduction", c2_trace),
        ("template family", c3_template_family),
        ("higher-order template", c4_higher_order),
        ("typing property (1000 triples)", c5_typing),
        ("transformation property (500 specs)", c6_transform_props),
        ("merge semantics", c7_merge),
        ("resolution", c8_resolution),
        ("round trip (500 models)", c9_round_trip),
        ("guard", c10_guard),
    ];
    let mut failed = 0;
    for (i, (title, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check)
            .unwrap_or_else(|e| Err(format!("panicked: {:?}", e.downcast_ref::<String>())));
        let ms = start.elapsed().as_millis();
        match result {
            Ok(detail) => println!("PASS {:>2}. {title}: {detail} [{ms} ms]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2}. {title}: {why} [{ms} ms]", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
